//! Monte-Carlo simulation of the roll equation under synthesized effective
//! waves.
//!
//! Each realization integrates
//!
//! ```text
//! φ̈ = −β₁φ̇ − β₃φ̇³ − Σ α_{2n-1} φ^{2n-1} − P(t) φ
//! ```
//!
//! with fixed-step classical RK4. The effective wave is a closed-form cosine
//! sum, so A_w is evaluated exactly at the half-step stage times. Phases of
//! realization `i` come from ChaCha8 stream `i` under the master seed, which
//! makes every realization reproducible on its own and the ensemble
//! independent of thread scheduling.

use std::f64::consts::PI;

use log::warn;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closure::RawStateMoments;
use crate::config::{CargoPosition, RollModel, SeaState};
use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::wave::{
    discretize_equal_energy, effective_spectrum, spectral_variance, SpectrumGrid, WaveComponents,
    WaveSettings, GRAVITY,
};

/// Largest tolerated share of diverged realizations, percent.
pub const DIVERGENCE_LIMIT_PCT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub dt: f64,
    pub duration: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub burn_in: f64,
    pub phi0: f64,
    pub phidot0: f64,
    /// |φ| above this counts as divergence, rad.
    pub max_roll: f64,
    /// Histogram bins per tracked quantity; 0 disables histograms.
    pub histogram_bins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 0.02,
            duration: 600.0,
            realizations: 200,
            master_seed: 1,
            burn_in: 0.0,
            phi0: 5.0f64.to_radians(),
            phidot0: 0.0,
            max_roll: PI,
            histogram_bins: 200,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("simulation.dt", "must be > 0"));
        }
        if !(self.burn_in >= 0.0) || !self.burn_in.is_finite() {
            return Err(Error::config("simulation.burn_in", "must be >= 0"));
        }
        if !(self.duration > self.burn_in) || !self.duration.is_finite() {
            return Err(Error::config("simulation.duration", "must exceed burn_in"));
        }
        if self.realizations == 0 {
            return Err(Error::config("simulation.realizations", "must be >= 1"));
        }
        if !self.phi0.is_finite() || !self.phidot0.is_finite() {
            return Err(Error::config("simulation.phi0", "initial state must be finite"));
        }
        if !(self.max_roll > 0.0) {
            return Err(Error::config("simulation.max_roll", "must be > 0"));
        }
        if self.histogram_bins == 1 {
            return Err(Error::config("simulation.histogram_bins", "must be 0 or >= 2"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn first_sample(&self) -> usize {
        (self.burn_in / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Samples each realization contributes after burn-in.
    pub fn samples_per_realization(&self) -> usize {
        self.steps() + 1 - self.first_sample().min(self.steps() + 1)
    }
}

/// (K₁, K₂) at one state; K₁ + K₂ = φ̈.
pub fn decompose_acceleration(model: &RollModel, phi: f64, phidot: f64, a_w: f64) -> (f64, f64) {
    let k1 = -model.beta1 * phidot - model.beta3 * phidot * phidot * phidot - model.restoring_accel(phi);
    let k2 = -model.gm_delta_factor(a_w) * phi;
    (k1, k2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CargoAccel {
    pub a_c: f64,
    pub k_c1: f64,
    pub k_c2: f64,
}

/// Cargo lateral acceleration with the exact sine.
pub fn cargo_acceleration(
    model: &RollModel,
    cargo: &CargoPosition,
    phi: f64,
    phidot: f64,
    a_w: f64,
) -> CargoAccel {
    let (k1, k2) = decompose_acceleration(model, phi, phidot, a_w);
    let k_c1 = GRAVITY * phi.sin() + cargo.l_prime * k1;
    let k_c2 = cargo.l_prime * k2;
    CargoAccel {
        a_c: k_c1 + k_c2,
        k_c1,
        k_c2,
    }
}

/// Phases for realization `index`: ChaCha8 stream `index` under `master_seed`.
pub fn realization_waves(template: &WaveComponents, master_seed: u64, index: usize) -> WaveComponents {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    template.with_phases(&mut rng, master_seed)
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    phi: f64,
    phidot: f64,
    a_w: f64,
    k1: f64,
    k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Diverged {
    t: f64,
}

/// Integrates one realization, calling `visit` for every post-burn-in sample.
fn integrate<F: FnMut(&Sample)>(
    cfg: &SimulationConfig,
    model: &RollModel,
    waves: &WaveComponents,
    mut visit: F,
) -> std::result::Result<(), Diverged> {
    let dt = cfg.dt;
    let steps = cfg.steps();
    let first = cfg.first_sample();
    let accel = |phi: f64, phidot: f64, a: f64| {
        let (k1, k2) = decompose_acceleration(model, phi, phidot, a);
        k1 + k2
    };

    let (mut phi, mut phidot) = (cfg.phi0, cfg.phidot0);
    let mut a_now = waves.synthesize(0.0);
    for s in 0..=steps {
        let t = s as f64 * dt;
        if !phi.is_finite() || !phidot.is_finite() || phi.abs() > cfg.max_roll {
            return Err(Diverged { t });
        }
        if s >= first {
            let (k1, k2) = decompose_acceleration(model, phi, phidot, a_now);
            visit(&Sample {
                t,
                phi,
                phidot,
                a_w: a_now,
                k1,
                k2,
            });
        }
        if s == steps {
            break;
        }
        let a_half = waves.synthesize(t + 0.5 * dt);
        let a_next = waves.synthesize((s + 1) as f64 * dt);

        let h = 0.5 * dt;
        let v1 = accel(phi, phidot, a_now);
        let x2 = phidot + h * v1;
        let v2 = accel(phi + h * phidot, x2, a_half);
        let x3 = phidot + h * v2;
        let v3 = accel(phi + h * x2, x3, a_half);
        let x4 = phidot + dt * v3;
        let v4 = accel(phi + dt * x3, x4, a_next);
        phi += dt / 6.0 * (phidot + 2.0 * x2 + 2.0 * x3 + x4);
        phidot += dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        a_now = a_next;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CargoSeries {
    pub name: String,
    pub a_c: Vec<f64>,
    pub k_c1: Vec<f64>,
    pub k_c2: Vec<f64>,
}

/// Full time history of one realization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealizationSeries {
    pub time: Vec<f64>,
    pub phi: Vec<f64>,
    pub phidot: Vec<f64>,
    pub phiddot: Vec<f64>,
    pub a_w: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub cargo: Vec<CargoSeries>,
}

/// Simulates realization `realization_index` of the ensemble. `waves`
/// supplies frequencies and amplitudes; its phases are redrawn from the
/// realization's stream.
pub fn simulate_realization(
    cfg: &SimulationConfig,
    model: &RollModel,
    waves: &WaveComponents,
    cargos: &[CargoPosition],
    realization_index: usize,
) -> Result<RealizationSeries> {
    cfg.validate()?;
    if waves.is_empty() {
        return Err(Error::InvalidArgument("no wave components".into()));
    }
    let waves = realization_waves(waves, cfg.master_seed, realization_index);
    simulate_with_waves(cfg, model, &waves, cargos).map_err(|d| Error::RealizationDiverged {
        index: realization_index,
        t: d.t,
    })
}

/// Simulates with the given components as-is (no phase redraw).
fn simulate_with_waves(
    cfg: &SimulationConfig,
    model: &RollModel,
    waves: &WaveComponents,
    cargos: &[CargoPosition],
) -> std::result::Result<RealizationSeries, Diverged> {
    let n = cfg.samples_per_realization();
    let mut out = RealizationSeries {
        cargo: cargos
            .iter()
            .map(|c| CargoSeries {
                name: c.name.clone(),
                a_c: Vec::with_capacity(n),
                k_c1: Vec::with_capacity(n),
                k_c2: Vec::with_capacity(n),
            })
            .collect(),
        ..Default::default()
    };
    integrate(cfg, model, waves, |s| {
        out.time.push(s.t);
        out.phi.push(s.phi);
        out.phidot.push(s.phidot);
        out.phiddot.push(s.k1 + s.k2);
        out.a_w.push(s.a_w);
        out.k1.push(s.k1);
        out.k2.push(s.k2);
        for (series, c) in out.cargo.iter_mut().zip(cargos) {
            let k_c1 = GRAVITY * s.phi.sin() + c.l_prime * s.k1;
            let k_c2 = c.l_prime * s.k2;
            series.a_c.push(k_c1 + k_c2);
            series.k_c1.push(k_c1);
            series.k_c2.push(k_c2);
        }
    })?;
    Ok(out)
}

/// Raw power sums of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerSums {
    n: u64,
    s: [f64; 4],
    min: f64,
    max: f64,
}

impl Default for PowerSums {
    fn default() -> Self {
        PowerSums {
            n: 0,
            s: [0.0; 4],
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl PowerSums {
    fn push(&mut self, x: f64) {
        let x2 = x * x;
        self.n += 1;
        self.s[0] += x;
        self.s[1] += x2;
        self.s[2] += x2 * x;
        self.s[3] += x2 * x2;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(&mut self, other: &PowerSums) {
        self.n += other.n;
        for i in 0..4 {
            self.s[i] += other.s[i];
        }
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }
}

/// Equal-width histogram normalized to a density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn with_range(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument("histogram needs at least 2 bins".into()));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "degenerate histogram range [{lo}, {hi}]"
            )));
        }
        Ok(Histogram {
            lo,
            hi,
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn add(&mut self, x: f64) {
        let bins = self.bins();
        let i = (((x - self.lo) / self.width()) as isize).clamp(0, bins as isize - 1) as usize;
        self.counts[i] += 1;
        self.total += 1;
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn density(&self, i: usize) -> f64 {
        self.counts[i] as f64 / (self.total as f64 * self.width())
    }

    /// Σ density·width.
    pub fn mass(&self) -> f64 {
        (0..self.bins()).map(|i| self.density(i) * self.width()).sum()
    }

    /// `bin_center,density` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,density\n");
        for i in 0..self.bins() {
            out.push_str(&format!("{:e},{:e}\n", self.center(i), self.density(i)));
        }
        out
    }
}

/// Histogram of `samples` over [min, max] with `bin_count` equal bins.
pub fn empirical_pdf(samples: &[f64], bin_count: usize) -> Result<Histogram> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::InvalidArgument("all samples are equal".into()));
    }
    let mut h = Histogram::with_range(lo, hi, bin_count)?;
    for &x in samples {
        h.add(x);
    }
    Ok(h)
}

/// Pooled statistics of one tracked quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityStats {
    pub name: String,
    /// Raw moments E[x], E[x²], E[x³], E[x⁴].
    pub moments: [f64; 4],
    pub min: f64,
    pub max: f64,
    pub histogram: Option<Histogram>,
}

impl QuantityStats {
    pub fn moment_set(&self) -> MomentSet {
        let [m1, m2, m3, m4] = self.moments;
        MomentSet { m1, m2, m3, m4 }
    }

    pub fn variance(&self) -> f64 {
        self.moments[1] - self.moments[0] * self.moments[0]
    }

    /// Central fourth moment over variance squared.
    pub fn kurtosis(&self) -> f64 {
        let [m1, m2, m3, m4] = self.moments;
        let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        let var = m2 - m1 * m1;
        c4 / (var * var)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub realizations_used: usize,
    pub diverged: Vec<usize>,
    pub samples_per_realization: usize,
    pub sample_count: u64,
    /// Spectral variance of the effective wave used for synthesis, m².
    pub wave_variance: f64,
    pub quantities: Vec<QuantityStats>,
    pub state: RawStateMoments,
}

impl EnsembleStats {
    pub fn get(&self, name: &str) -> Option<&QuantityStats> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

/// Names of the tracked quantities, in accumulation order.
pub fn quantity_names(cargos: &[CargoPosition]) -> Vec<String> {
    let mut names: Vec<String> = ["phi", "phidot", "a_w", "phiddot", "k1", "k2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in cargos {
        for part in ["a_c", "k_c1", "k_c2"] {
            names.push(format!("{}.{}", c.name, part));
        }
    }
    names
}

fn sample_values(s: &Sample, cargos: &[CargoPosition], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&[s.phi, s.phidot, s.a_w, s.k1 + s.k2, s.k1, s.k2]);
    let sin = s.phi.sin();
    for c in cargos {
        let k_c1 = GRAVITY * sin + c.l_prime * s.k1;
        let k_c2 = c.l_prime * s.k2;
        out.extend_from_slice(&[k_c1 + k_c2, k_c1, k_c2]);
    }
}

#[derive(Debug, Clone)]
struct RealizationSums {
    sums: Vec<PowerSums>,
    /// Σφφ̇, ΣφA_w, Σφ̇A_w.
    cross: [f64; 3],
}

/// Effective-wave component template (frequencies and amplitudes) for a sea
/// state.
pub fn wave_template(sea: &SeaState, settings: &WaveSettings, seed: u64) -> Result<(WaveComponents, f64)> {
    let grid = SpectrumGrid::ittc(sea, settings)?;
    let eff = effective_spectrum(&grid, sea);
    let m0 = spectral_variance(&eff)?;
    Ok((discretize_equal_energy(&eff, settings.components, seed)?, m0))
}

/// Runs the whole ensemble and pools post-burn-in samples across
/// realizations in index order.
pub fn run_ensemble(
    cfg: &SimulationConfig,
    model: &RollModel,
    sea: &SeaState,
    waves: &WaveSettings,
    cargos: &[CargoPosition],
) -> Result<EnsembleStats> {
    cfg.validate()?;
    let (template, m0) = wave_template(sea, waves, cfg.master_seed)?;
    let names = quantity_names(cargos);
    let nq = names.len();

    let results: Vec<std::result::Result<RealizationSums, Diverged>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| {
            let w = realization_waves(&template, cfg.master_seed, i);
            let mut sums = vec![PowerSums::default(); nq];
            let mut cross = [0.0; 3];
            let mut buf = Vec::with_capacity(nq);
            integrate(cfg, model, &w, |s| {
                sample_values(s, cargos, &mut buf);
                for (acc, &x) in sums.iter_mut().zip(&buf) {
                    acc.push(x);
                }
                cross[0] += s.phi * s.phidot;
                cross[1] += s.phi * s.a_w;
                cross[2] += s.phidot * s.a_w;
            })?;
            Ok(RealizationSums { sums, cross })
        })
        .collect();

    let diverged: Vec<usize> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_err().then_some(i))
        .collect();
    if !diverged.is_empty() {
        warn!(
            "{} of {} realizations diverged and were excluded",
            diverged.len(),
            cfg.realizations
        );
    }
    if diverged.len() as f64 * 100.0 > DIVERGENCE_LIMIT_PCT * cfg.realizations as f64 {
        return Err(Error::EnsembleDiverged {
            failed: diverged.len(),
            total: cfg.realizations,
            limit_pct: DIVERGENCE_LIMIT_PCT,
        });
    }

    let mut pooled = vec![PowerSums::default(); nq];
    let mut cross = [0.0; 3];
    for r in results.iter().flatten() {
        for (p, s) in pooled.iter_mut().zip(&r.sums) {
            p.merge(s);
        }
        for (c, x) in cross.iter_mut().zip(&r.cross) {
            *c += x;
        }
    }
    let count = pooled[0].n;
    if count == 0 {
        return Err(Error::InvalidArgument("ensemble produced no samples".into()));
    }
    let nf = count as f64;

    let mut histograms: Vec<Option<Histogram>> = vec![None; nq];
    if cfg.histogram_bins >= 2 {
        // Second pass over the same realizations now that the pooled range is known.
        let ranges: Vec<Option<(f64, f64)>> = pooled
            .iter()
            .map(|p| (p.max > p.min).then_some((p.min, p.max)))
            .collect();
        let used: Vec<usize> = (0..cfg.realizations).filter(|i| !diverged.contains(i)).collect();
        let partial: Vec<Vec<Option<Histogram>>> = used
            .par_iter()
            .map(|&i| {
                let w = realization_waves(&template, cfg.master_seed, i);
                let mut hs: Vec<Option<Histogram>> = ranges
                    .iter()
                    .map(|r| r.and_then(|(lo, hi)| Histogram::with_range(lo, hi, cfg.histogram_bins).ok()))
                    .collect();
                let mut buf = Vec::with_capacity(nq);
                // Same realization as the first pass, so it cannot diverge now.
                let _ = integrate(cfg, model, &w, |s| {
                    sample_values(s, cargos, &mut buf);
                    for (h, &x) in hs.iter_mut().zip(&buf) {
                        if let Some(h) = h {
                            h.add(x);
                        }
                    }
                });
                hs
            })
            .collect();
        for hs in partial {
            for (acc, h) in histograms.iter_mut().zip(hs) {
                match (acc.as_mut(), h) {
                    (Some(a), Some(h)) => a.merge(&h),
                    (None, Some(h)) => *acc = Some(h),
                    _ => {}
                }
            }
        }
    }

    let quantities: Vec<QuantityStats> = names
        .into_iter()
        .zip(pooled.iter())
        .zip(histograms)
        .map(|((name, p), histogram)| QuantityStats {
            name,
            moments: p.s.map(|s| s / nf),
            min: p.min,
            max: p.max,
            histogram,
        })
        .collect();

    let m = |i: usize, k: usize| quantities[i].moments[k];
    let state = RawStateMoments {
        e_phi: m(0, 0),
        e_phi2: m(0, 1),
        e_phidot: m(1, 0),
        e_phidot2: m(1, 1),
        e_aw: m(2, 0),
        e_aw2: m(2, 1),
        e_phi_phidot: cross[0] / nf,
        e_phi_aw: cross[1] / nf,
        e_phidot_aw: cross[2] / nf,
    };

    Ok(EnsembleStats {
        realizations_used: cfg.realizations - diverged.len(),
        diverged,
        samples_per_realization: cfg.samples_per_realization(),
        sample_count: count,
        wave_variance: m0,
        quantities,
        state,
    })
}
