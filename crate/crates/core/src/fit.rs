//! Non-Gaussian PDF families fitted to a target moment set.
//!
//! ```text
//! type1:    P(x) = C·exp(−(d₁|x| + d₂|x|² + d₃|x|³ + d₄|x|⁴))
//! type2:    P(x) = C·e^{−x/d₁} / (1 + e^{−x/d₁})²
//! gaussian: N(mean, variance), the baseline
//! ```
//!
//! Coefficients are chosen by minimizing J = Σ lᵢ|Jᵢ| where Jₙ is the plain
//! difference between model and target n-th moments for odd n and the
//! relative difference for even n.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::simplex::{minimize, SimplexOptions};

/// Objective value assigned to coefficient sets that cannot be normalized.
const PENALTY: f64 = 1e10;

/// Classic type2 weights: only the first moment is matched. For an
/// even density that residual does not depend on d₁ at all.
pub const FIRST_MOMENT_ONLY_WEIGHTS: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Type1,
    Type2,
    Gaussian,
}

impl Shape {
    fn is_even(self) -> bool {
        !matches!(self, Shape::Gaussian)
    }

    fn coefficient_count(self) -> usize {
        match self {
            Shape::Type1 => 4,
            Shape::Type2 => 1,
            Shape::Gaussian => 2,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Type1 => "type1",
            Shape::Type2 => "type2",
            Shape::Gaussian => "gaussian",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" => Ok(Shape::Type1),
            "type2" => Ok(Shape::Type2),
            "gaussian" => Ok(Shape::Gaussian),
            other => Err(Error::InvalidArgument(format!(
                "unknown shape {other:?}; expected type1, type2 or gaussian"
            ))),
        }
    }
}

/// Composite Simpson quadrature with a coarse/fine comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Nodes of the coarse pass; the fine pass doubles the intervals.
    pub nodes: usize,
    /// Integration half-width in multiples of √m2 of the target.
    pub halfwidth_sigmas: f64,
    /// Largest accepted relative coarse/fine difference.
    pub tolerance: f64,
    pub max_refinements: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            nodes: 2001,
            halfwidth_sigmas: 20.0,
            tolerance: 1e-9,
            max_refinements: 6,
        }
    }
}

impl QuadratureConfig {
    fn validate(&self) -> Result<()> {
        if self.nodes < 3 {
            return Err(Error::InvalidArgument("quadrature needs at least 3 nodes".into()));
        }
        if !(self.halfwidth_sigmas > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature half-width and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// ∫ₐᵇ xᵏ f(x) dx for k = 0..=4, Richardson-extrapolated from a coarse and
/// a fine Simpson pass.
fn simpson_moments<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, q: &QuadratureConfig) -> Result<[f64; 5]> {
    let mut intervals = (q.nodes - 1).max(2);
    intervals += intervals % 2;
    let mut last_rel = f64::INFINITY;
    for _ in 0..=q.max_refinements {
        let m = 2 * intervals;
        let h = (b - a) / m as f64;
        let mut fine = [0.0; 5];
        let mut coarse = [0.0; 5];
        for i in 0..=m {
            let x = a + i as f64 * h;
            let y = f(x);
            if !y.is_finite() {
                return Err(Error::NotIntegrable(format!("kernel is not finite at x = {x:e}")));
            }
            let wf = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            // Coarse pass uses the even nodes with step 2h.
            let wc = if i % 2 == 1 {
                0.0
            } else if i == 0 || i == m {
                1.0
            } else if (i / 2) % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let mut p = y;
            for k in 0..5 {
                fine[k] += wf * p;
                coarse[k] += wc * p;
                p *= x;
            }
        }
        let mut rel: f64 = 0.0;
        let mut out = [0.0; 5];
        for k in 0..5 {
            let sf = fine[k] * h / 3.0;
            let sc = coarse[k] * 2.0 * h / 3.0;
            out[k] = sf + (sf - sc) / 15.0;
            let scale = sf.abs().max(f64::MIN_POSITIVE);
            if k % 2 == 0 || a >= 0.0 {
                rel = rel.max((sf - sc).abs() / scale);
            }
        }
        if out[0] <= 0.0 {
            return Err(Error::NotIntegrable("kernel integrates to zero on the domain".into()));
        }
        if rel <= q.tolerance {
            return Ok(out);
        }
        last_rel = rel;
        intervals = m;
    }
    Err(Error::Quadrature(last_rel))
}

fn check_coefficients(shape: Shape, d: &[f64]) -> Result<()> {
    if d.len() != shape.coefficient_count() {
        return Err(Error::InvalidArgument(format!(
            "{shape} takes {} coefficients, got {}",
            shape.coefficient_count(),
            d.len()
        )));
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotIntegrable("coefficients must be finite".into()));
    }
    match shape {
        Shape::Type1 => match d.iter().rposition(|&x| x != 0.0) {
            // exp(−poly) decays iff the leading nonzero power is positive.
            Some(i) if d[i] > 0.0 => Ok(()),
            Some(i) => Err(Error::NotIntegrable(format!(
                "leading coefficient d{} = {:e} must be positive",
                i + 1,
                d[i]
            ))),
            None => Err(Error::NotIntegrable("all coefficients are zero".into())),
        },
        Shape::Type2 if d[0] > 0.0 => Ok(()),
        Shape::Type2 => Err(Error::NotIntegrable(format!("d1 = {:e} must be positive", d[0]))),
        Shape::Gaussian if d[1] > 0.0 => Ok(()),
        Shape::Gaussian => Err(Error::NotIntegrable(format!(
            "variance = {:e} must be positive",
            d[1]
        ))),
    }
}

fn kernel(shape: Shape, d: &[f64], x: f64) -> f64 {
    match shape {
        Shape::Type1 => {
            let a = x.abs();
            (-(a * (d[0] + a * (d[1] + a * (d[2] + a * d[3]))))).exp()
        }
        Shape::Type2 => {
            // Written in |x| so large arguments never overflow.
            let e = (-x.abs() / d[0]).exp();
            e / ((1.0 + e) * (1.0 + e))
        }
        Shape::Gaussian => {
            let z = x - d[0];
            (-0.5 * z * z / d[1]).exp()
        }
    }
}

/// A normalized density on [center − halfwidth, center + halfwidth].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfModel {
    shape: Shape,
    d: Vec<f64>,
    c: f64,
    domain_halfwidth: f64,
    moments: [f64; 4],
}

impl PdfModel {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// type1: d₁..d₄; type2: d₁; gaussian: mean, variance.
    pub fn coefficients(&self) -> &[f64] {
        &self.d
    }

    pub fn normalization(&self) -> f64 {
        self.c
    }

    pub fn domain_halfwidth(&self) -> f64 {
        self.domain_halfwidth
    }

    fn center(&self) -> f64 {
        match self.shape {
            Shape::Gaussian => self.d[0],
            _ => 0.0,
        }
    }

    /// Raw moments 1..=4 of the model.
    pub fn moments(&self) -> [f64; 4] {
        self.moments
    }
}

/// Computes C so the density integrates to one over the domain.
pub fn normalize(shape: Shape, d: &[f64], domain_halfwidth: f64, q: &QuadratureConfig) -> Result<PdfModel> {
    check_coefficients(shape, d)?;
    q.validate()?;
    if !(domain_halfwidth > 0.0) || !domain_halfwidth.is_finite() {
        return Err(Error::InvalidArgument("domain half-width must be positive".into()));
    }
    let full = if shape.is_even() {
        // Even density: integrate the half line; odd moments vanish exactly.
        let half = simpson_moments(|x| kernel(shape, d, x), 0.0, domain_halfwidth, q)?;
        [2.0 * half[0], 0.0, 2.0 * half[2], 0.0, 2.0 * half[4]]
    } else {
        let center = d[0];
        simpson_moments(
            |x| kernel(shape, d, x),
            center - domain_halfwidth,
            center + domain_halfwidth,
            q,
        )?
    };
    let c = 1.0 / full[0];
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::NotIntegrable(format!("normalization constant {c:e}")));
    }
    Ok(PdfModel {
        shape,
        d: d.to_vec(),
        c,
        domain_halfwidth,
        moments: [full[1] * c, full[2] * c, full[3] * c, full[4] * c],
    })
}

pub fn pdf_eval(m: &PdfModel, x: f64) -> f64 {
    m.c * kernel(m.shape, &m.d, x)
}

/// ∫ P dx over the model domain, recomputed with `q` from the evaluated
/// density (independent of the normalization pass).
pub fn pdf_mass(m: &PdfModel, q: &QuadratureConfig) -> Result<f64> {
    let center = m.center();
    let r = simpson_moments(
        |x| pdf_eval(m, x),
        center - m.domain_halfwidth,
        center + m.domain_halfwidth,
        q,
    )?;
    Ok(r[0])
}

/// ∫ xⁿ P dx for n in 1..=4.
pub fn pdf_raw_moment(m: &PdfModel, n: u32) -> Result<f64> {
    match n {
        1..=4 => Ok(m.moments[n as usize - 1]),
        _ => Err(Error::InvalidArgument(format!("moment order {n} out of range 1..=4"))),
    }
}

/// J₁..J₄: differences for odd orders, relative differences for even ones.
pub fn residuals(m: &PdfModel, target: &MomentSet) -> [f64; 4] {
    let t = target.as_array();
    let mut r = [0.0; 4];
    for i in 0..4 {
        let diff = m.moments[i] - t[i];
        r[i] = if i % 2 == 1 { diff / t[i] } else { diff };
    }
    r
}

fn check_weights(weights: &[f64; 4], target: &MomentSet) -> Result<()> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::InvalidArgument("at least one weight must be positive".into()));
    }
    for (i, name) in [(1, "m2"), (3, "m4")] {
        if weights[i] > 0.0 && target.get(i + 1) == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "target {name} is zero but weighted by a relative residual"
            )));
        }
    }
    Ok(())
}

/// J = Σ lᵢ|Jᵢ|.
pub fn objective(m: &PdfModel, target: &MomentSet, weights: &[f64; 4]) -> Result<f64> {
    check_weights(weights, target)?;
    Ok(residuals(m, target)
        .iter()
        .zip(weights)
        .map(|(r, w)| w * r.abs())
        .sum())
}

/// Logistic scale with variance m2: d₁ = √(3·m2)/π.
pub fn logistic_scale_from_m2(m2: f64) -> Result<f64> {
    if !(m2 > 0.0) || !m2.is_finite() {
        return Err(Error::InvalidArgument(format!("m2 = {m2:e} must be positive")));
    }
    Ok((3.0 * m2).sqrt() / PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub weights: [f64; 4],
    pub max_iterations: usize,
    pub restarts: usize,
    pub simplex_scale: f64,
    pub tolerance: f64,
    pub quadrature: QuadratureConfig,
    /// Seed of the restart perturbations.
    pub seed: u64,
}

impl FitConfig {
    /// Defaults for a shape: unit weights for type1, variance-only for type2.
    pub fn for_shape(shape: Shape) -> Self {
        let weights = match shape {
            Shape::Type1 => [1.0; 4],
            Shape::Type2 | Shape::Gaussian => [0.0, 1.0, 0.0, 0.0],
        };
        FitConfig {
            weights,
            max_iterations: 4000,
            restarts: 8,
            simplex_scale: 0.25,
            tolerance: 1e-8,
            quadrature: QuadratureConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub shape: Shape,
    pub provenance: String,
    pub coefficients: Vec<f64>,
    pub normalization: f64,
    pub objective: f64,
    pub residuals: [f64; 4],
    pub weights: [f64; 4],
    pub target: [f64; 4],
    pub model_moments: [f64; 4],
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Objective at each restart's initial point.
    pub start_objectives: Vec<f64>,
    pub flat_objective: bool,
    pub notes: Vec<String>,
}

impl FitReport {
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Maps optimizer parameters to coefficients. Working in units of
/// s = √m2 keeps the simplex well scaled; d₄ is squared so it stays
/// non-negative and d₁ of type2 is exponentiated so it stays positive.
fn coefficients_from(shape: Shape, theta: &[f64], s: f64) -> Vec<f64> {
    match shape {
        Shape::Type1 => vec![
            theta[0] / s,
            theta[1] / (s * s),
            theta[2] / (s * s * s),
            theta[3] * theta[3] / (s * s * s * s),
        ],
        Shape::Type2 => vec![s * theta[0].exp()],
        Shape::Gaussian => unreachable!("the baseline is not optimized"),
    }
}

fn initial_point(shape: Shape) -> Vec<f64> {
    match shape {
        // Gaussian-equivalent: d₂ = 1/(2·m2).
        Shape::Type1 => vec![0.0, 0.5, 0.0, 0.0],
        Shape::Type2 => vec![(3.0f64.sqrt() / PI).ln()],
        Shape::Gaussian => unreachable!("the baseline is not optimized"),
    }
}

/// Fits `shape` to `target`. `provenance` labels the source of the target in
/// the report (e.g. "MCS", "closure", or a file path).
pub fn fit_pdf(
    shape: Shape,
    target: &MomentSet,
    cfg: &FitConfig,
    provenance: &str,
) -> Result<(PdfModel, FitReport)> {
    target.validate()?;
    check_weights(&cfg.weights, target)?;
    cfg.quadrature.validate()?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    if !(target.m2 > 0.0) {
        return Err(Error::InvalidArgument("target m2 must be positive".into()));
    }
    let s = target.m2.sqrt();
    let halfwidth = cfg.quadrature.halfwidth_sigmas * s;
    let mut notes = Vec::new();

    if shape == Shape::Gaussian {
        let var = target.m2 - target.m1 * target.m1;
        if !(var > 0.0) {
            return Err(Error::NonRealizable {
                m2: target.m2,
                m1_sq: target.m1 * target.m1,
            });
        }
        let model = normalize(shape, &[target.m1, var], halfwidth, &cfg.quadrature)?;
        let j = objective(&model, target, &cfg.weights)?;
        notes.push("baseline from m1 and m2 only; nothing is optimized".into());
        let report = report(&model, target, cfg, provenance, j, 0, 0, true, 0, vec![j], false, notes);
        return Ok((model, report));
    }

    let eval = |theta: &[f64]| -> f64 {
        let d = coefficients_from(shape, theta, s);
        normalize(shape, &d, halfwidth, &cfg.quadrature)
            .and_then(|m| objective(&m, target, &cfg.weights))
            .unwrap_or(PENALTY)
    };
    let opts = SimplexOptions {
        max_iterations: cfg.max_iterations,
        scale: cfg.simplex_scale,
        tolerance: cfg.tolerance,
    };

    let base = initial_point(shape);
    let mut best: Option<(usize, crate::simplex::SimplexResult)> = None;
    let mut start_objectives = Vec::with_capacity(cfg.restarts);
    let (mut iterations, mut evaluations) = (0, 0);
    for k in 0..cfg.restarts {
        let mut start = base.clone();
        if k > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            for x in start.iter_mut() {
                *x += rng.gen_range(-0.5..0.5);
            }
        }
        start_objectives.push(eval(&start));
        let r = minimize(eval, &start, &opts);
        iterations += r.iterations;
        evaluations += r.evaluations;
        if best.as_ref().is_none_or(|(_, b)| r.value < b.value) {
            best = Some((k, r));
        }
    }
    let (best_restart, best) = best.expect("at least one restart");
    if best.value >= PENALTY {
        return Err(Error::Fit("no integrable coefficient set was found".into()));
    }

    let d = coefficients_from(shape, &best.x, s);
    let model = normalize(shape, &d, halfwidth, &cfg.quadrature)?;
    let j = objective(&model, target, &cfg.weights)?;
    let flat = shape == Shape::Type2 && cfg.weights[1] == 0.0 && cfg.weights[3] == 0.0;
    if flat {
        notes.push(
            "flat objective: odd residuals do not depend on d1 for an even density, so d1 is \
             not identified; weight m2 or m4 to fit the scale"
                .into(),
        );
    }
    if shape == Shape::Type1 {
        notes.push(
            "four coefficients against two informative even moments: the coefficient set is \
             not unique"
                .into(),
        );
    }
    if target.m1 != 0.0 || target.m3 != 0.0 {
        notes.push("odd target moments are not representable by an even density".into());
    }
    if !best.converged {
        notes.push("iteration budget exhausted before the simplex converged".into());
    }
    let report = report(
        &model,
        target,
        cfg,
        provenance,
        j,
        iterations,
        evaluations,
        best.converged,
        best_restart,
        start_objectives,
        flat,
        notes,
    );
    Ok((model, report))
}

#[allow(clippy::too_many_arguments)]
fn report(
    model: &PdfModel,
    target: &MomentSet,
    cfg: &FitConfig,
    provenance: &str,
    objective: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    best_restart: usize,
    start_objectives: Vec<f64>,
    flat_objective: bool,
    notes: Vec<String>,
) -> FitReport {
    FitReport {
        shape: model.shape,
        provenance: provenance.to_string(),
        coefficients: model.d.clone(),
        normalization: model.c,
        objective,
        residuals: residuals(model, target),
        weights: cfg.weights,
        target: target.as_array(),
        model_moments: model.moments,
        iterations,
        evaluations,
        converged,
        best_restart,
        start_objectives,
        flat_objective,
        notes,
    }
}

/// Density sampled at `points` equally spaced x over ±`sigmas`·√m2.
pub fn pdf_curve(m: &PdfModel, m2: f64, sigmas: f64, points: usize) -> Vec<(f64, f64)> {
    let r = sigmas * m2.sqrt();
    (0..points)
        .map(|i| {
            let x = -r + 2.0 * r * i as f64 / (points - 1) as f64;
            (x, pdf_eval(m, x))
        })
        .collect()
}

/// `x,density` rows over ±6√m2 at 601 points.
pub fn curve_csv(m: &PdfModel, m2: f64) -> String {
    let mut out = String::from("x,density\n");
    for (x, p) in pdf_curve(m, m2, 6.0, 601) {
        out.push_str(&format!("{x:e},{p:e}\n"));
    }
    out
}
