//! Analytic moments of roll angular and cargo lateral acceleration.
//!
//! The acceleration splits as φ̈ = K₁(φ, φ̇) + K₂(φ, A_w). Both parts are
//! polynomials in the state, so every moment of φ̈ (and of the cargo
//! acceleration g·sin φ + L'φ̈, with sin φ replaced by a truncated series) is
//! a linear combination of Gaussian-closed mixed state moments.

use serde::{Deserialize, Serialize};

use crate::closure::{
    close_scalar, GaussianMoments, MonomialIndex, StateMoments, StatePolynomial,
    DEFAULT_DEGREE_CAP,
};
use crate::config::{CargoPosition, RollModel};
use crate::error::{Error, Result};
use crate::wave::GRAVITY;

/// K₁ and K₂ as state polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelDecomposition {
    /// −β₁φ̇ − β₃φ̇³ − Σ α_{2n-1} φ^{2n-1}
    pub k1_poly: StatePolynomial,
    /// −(ω₀²/GM) Σ ρ_n A_wⁿ φ
    pub k2_poly: StatePolynomial,
}

impl AccelDecomposition {
    pub fn new(model: &RollModel) -> Self {
        let mut k1 = StatePolynomial::zero();
        k1.add_term(MonomialIndex::new(0, 1, 0), -model.beta1);
        k1.add_term(MonomialIndex::new(0, 3, 0), -model.beta3);
        for (n, &a) in model.alpha.iter().enumerate() {
            k1.add_term(MonomialIndex::new(2 * n as u32 + 1, 0, 0), -a);
        }
        let scale = model.excitation_scale();
        let mut k2 = StatePolynomial::zero();
        for (n, &r) in model.rho.iter().enumerate() {
            k2.add_term(MonomialIndex::new(1, 0, n as u32 + 1), -scale * r);
        }
        AccelDecomposition {
            k1_poly: k1,
            k2_poly: k2,
        }
    }

    pub fn total(&self) -> StatePolynomial {
        &self.k1_poly + &self.k2_poly
    }
}

/// First four raw moments of one scalar quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl MomentSet {
    pub fn new(m1: f64, m2: f64, m3: f64, m4: f64) -> Result<Self> {
        let set = MomentSet { m1, m2, m3, m4 };
        set.validate()?;
        Ok(set)
    }

    /// Completes (m1, m2) with the scalar Gaussian closure.
    pub fn closed(m1: f64, m2: f64) -> Result<Self> {
        let (m3, m4) = close_scalar(m1, m2)?;
        MomentSet::new(m1, m2, m3, m4)
    }

    pub fn get(&self, n: usize) -> f64 {
        match n {
            1 => self.m1,
            2 => self.m2,
            3 => self.m3,
            4 => self.m4,
            _ => panic!("moment order {n} out of range 1..=4"),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.m1, self.m2, self.m3, self.m4]
    }

    /// m4 / m2².
    pub fn kurtosis(&self) -> f64 {
        self.m4 / (self.m2 * self.m2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("moments must be finite".into()));
        }
        if self.m2 < self.m1 * self.m1 {
            return Err(Error::NonRealizable {
                m2: self.m2,
                m1_sq: self.m1 * self.m1,
            });
        }
        if self.m4 < self.m2 * self.m2 {
            return Err(Error::InvalidArgument(format!(
                "m4 = {:e} is below m2^2 = {:e}",
                self.m4,
                self.m2 * self.m2
            )));
        }
        Ok(())
    }

    /// Reads `m1`..`m4` from a TOML document. A `[moments]` table is accepted
    /// as well as top-level keys. Missing m3/m4 are filled by closure.
    pub fn from_toml(document: &str) -> Result<Self> {
        let root: toml::Table = document.parse()?;
        let (table, prefix) = match root.get("moments") {
            Some(toml::Value::Table(t)) => (t, "moments."),
            _ => (&root, ""),
        };
        let get = |key: &str| -> Result<Option<f64>> {
            match table.get(key) {
                None => Ok(None),
                Some(toml::Value::Float(f)) if f.is_finite() => Ok(Some(*f)),
                Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
                Some(_) => Err(Error::config(format!("{prefix}{key}"), "must be a finite number")),
            }
        };
        let m1 = get("m1")?.ok_or_else(|| Error::config(format!("{prefix}m1"), "missing key"))?;
        let m2 = get("m2")?.ok_or_else(|| Error::config(format!("{prefix}m2"), "missing key"))?;
        match (get("m3")?, get("m4")?) {
            (Some(m3), Some(m4)) => MomentSet::new(m1, m2, m3, m4),
            (None, None) => MomentSet::closed(m1, m2),
            _ => Err(Error::config(format!("{prefix}m4"), "give both m3 and m4 or neither")),
        }
    }
}

/// Truncated Taylor series of sin φ.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSeries {
    order: u32,
    coefficients: Vec<f64>,
}

/// sin φ ≈ φ − φ³/3! + … up to and including φ^order.
pub fn sine_series(order: u32) -> Result<SineSeries> {
    if !matches!(order, 3 | 5 | 7 | 9) {
        return Err(Error::InvalidArgument(format!(
            "sine series order must be 3, 5, 7 or 9, got {order}"
        )));
    }
    let mut coefficients = Vec::new();
    let mut factorial = 1.0;
    for p in 1..=order {
        factorial *= p as f64;
        if p % 2 == 1 {
            let sign = if (p / 2) % 2 == 0 { 1.0 } else { -1.0 };
            coefficients.push(sign / factorial);
        }
    }
    Ok(SineSeries {
        order,
        coefficients,
    })
}

impl SineSeries {
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Coefficients of φ, φ³, φ⁵, ….
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, phi: f64) -> f64 {
        let phi2 = phi * phi;
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * phi2 + c) * phi
    }

    /// The series as a polynomial in φ.
    pub fn polynomial(&self) -> StatePolynomial {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, &c)| (MonomialIndex::new(2 * j as u32 + 1, 0, 0), c))
            .collect()
    }
}

/// E[φ̈] with its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccelMean {
    pub e_k1: f64,
    pub e_k2: f64,
    pub total: f64,
}

/// E[φ̈²] with its three parts; `total` is E[(K₁ + K₂)²] evaluated directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccelSecondMoment {
    pub e_k1_sq: f64,
    pub e_k1k2: f64,
    pub e_k2_sq: f64,
    pub total: f64,
}

impl AccelSecondMoment {
    pub fn expanded(&self) -> f64 {
        self.e_k1_sq + 2.0 * self.e_k1k2 + self.e_k2_sq
    }
}

fn engine(sm: &StateMoments, polys: &[&StatePolynomial]) -> Result<GaussianMoments> {
    let degree = polys.iter().map(|p| p.degree()).max().unwrap_or(0);
    if degree > DEFAULT_DEGREE_CAP {
        return Err(Error::DegreeCap {
            k: [degree, 0, 0],
            degree,
            cap: DEFAULT_DEGREE_CAP,
        });
    }
    Ok(GaussianMoments::new(sm, degree))
}

pub fn accel_mean(sm: &StateMoments, d: &AccelDecomposition) -> Result<AccelMean> {
    let g = engine(sm, &[&d.k1_poly, &d.k2_poly])?;
    let e_k1 = g.expectation(&d.k1_poly)?;
    let e_k2 = g.expectation(&d.k2_poly)?;
    Ok(AccelMean {
        e_k1,
        e_k2,
        total: e_k1 + e_k2,
    })
}

pub fn accel_second_moment(sm: &StateMoments, d: &AccelDecomposition) -> Result<AccelSecondMoment> {
    let k1k1 = &d.k1_poly * &d.k1_poly;
    let k1k2 = &d.k1_poly * &d.k2_poly;
    let k2k2 = &d.k2_poly * &d.k2_poly;
    let total = d.total().pow(2);
    let g = engine(sm, &[&k1k1, &k1k2, &k2k2, &total])?;
    Ok(AccelSecondMoment {
        e_k1_sq: g.expectation(&k1k1)?,
        e_k1k2: g.expectation(&k1k2)?,
        e_k2_sq: g.expectation(&k2k2)?,
        total: g.expectation(&total)?,
    })
}

/// m1 and m2 from the closure, m3 and m4 from the scalar Gaussian rule.
pub fn accel_moment_set(sm: &StateMoments, d: &AccelDecomposition) -> Result<MomentSet> {
    let m1 = accel_mean(sm, d)?.total;
    let m2 = accel_second_moment(sm, d)?.total;
    MomentSet::closed(m1, m2)
}

/// Cargo lateral acceleration moments and their components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CargoMoments {
    pub name: String,
    pub sine_order: u32,
    pub e_kc1: f64,
    pub e_kc2: f64,
    pub e_kc1_sq: f64,
    pub e_kc2_sq: f64,
    pub e_kc1_kc2: f64,
    pub e_sin: f64,
    pub e_sin_sq: f64,
    pub moments: MomentSet,
}

pub fn cargo_moments(
    sm: &StateMoments,
    d: &AccelDecomposition,
    c: &CargoPosition,
    s: &SineSeries,
) -> Result<CargoMoments> {
    let lp = c.l_prime;
    let sin = s.polynomial();
    let kc1 = &sin.scale(GRAVITY) + &d.k1_poly.scale(lp);
    let kc2 = d.k2_poly.scale(lp);
    let a_c = &kc1 + &kc2;

    let kc1_sq = kc1.pow(2);
    let kc2_sq = kc2.pow(2);
    let kc1_kc2 = &kc1 * &kc2;
    let a_sq = a_c.pow(2);
    let sin_sq = sin.pow(2);
    let g = engine(sm, &[&kc1_sq, &kc2_sq, &kc1_kc2, &a_sq, &sin_sq])?;

    let m1 = g.expectation(&a_c)?;
    let m2 = g.expectation(&a_sq)?;
    Ok(CargoMoments {
        name: c.name.clone(),
        sine_order: s.order(),
        e_kc1: g.expectation(&kc1)?,
        e_kc2: g.expectation(&kc2)?,
        e_kc1_sq: g.expectation(&kc1_sq)?,
        e_kc2_sq: g.expectation(&kc2_sq)?,
        e_kc1_kc2: g.expectation(&kc1_kc2)?,
        e_sin: g.expectation(&sin)?,
        e_sin_sq: g.expectation(&sin_sq)?,
        moments: MomentSet::closed(m1, m2)?,
    })
}

/// Everything the analytic path produces for one set of state moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: AccelMean,
    pub second: AccelSecondMoment,
    pub accel: MomentSet,
    pub cargo: Vec<CargoMoments>,
}

pub fn moment_report(
    sm: &StateMoments,
    model: &RollModel,
    cargos: &[CargoPosition],
    sine: &SineSeries,
) -> Result<MomentReport> {
    let d = AccelDecomposition::new(model);
    let mean = accel_mean(sm, &d)?;
    let second = accel_second_moment(sm, &d)?;
    let accel = MomentSet::closed(mean.total, second.total)?;
    let cargo = cargos
        .iter()
        .map(|c| cargo_moments(sm, &d, c, sine))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentReport {
        mean,
        second,
        accel,
        cargo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::RawStateMoments;
    use crate::config::cargo_geometry;
    use std::f64::consts::PI;

    pub(crate) fn table4_mcs() -> RawStateMoments {
        RawStateMoments {
            e_phi: -4.01e-5,
            e_phi2: 4.38e-2,
            e_phidot: -6.00e-6,
            e_phidot2: 2.81e-3,
            e_aw: -1.66e-5,
            e_aw2: 0.786,
            e_phi_phidot: -7.32e-7,
            e_phi_aw: 1.01e-5,
            e_phidot_aw: -8.33e-7,
        }
    }

    fn linear() -> RollModel {
        RollModel::linear(3.64e-3, 2.0 * PI / 25.1, 1.965)
    }

    #[test]
    fn decomposition_terms() {
        let d = AccelDecomposition::new(&linear());
        assert_eq!(d.k1_poly.len(), 2);
        assert!(d.k2_poly.is_empty());
    }

    #[test]
    fn centered_state_means() {
        let sm = StateMoments::new(
            [0.0; 3],
            [[0.04, 1e-4, 2e-3], [1e-4, 3e-3, -1e-4], [2e-3, -1e-4, 0.8]],
        )
        .unwrap();
        let mut m = linear();
        m.beta3 = 4.25;
        m.alpha[1] = -0.01;
        m.rho = [0.9, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let d = AccelDecomposition::new(&m);
        let mean = accel_mean(&sm, &d).unwrap();
        // K₁ is odd in (φ, φ̇); K₂ only sees E[φA_w] = c and E[φA_w³] = 3·c·σ_A².
        assert_eq!(mean.e_k1, 0.0);
        let c = 2e-3;
        let expected = -m.excitation_scale() * (0.9 * c + 0.1 * 3.0 * c * 0.8);
        assert!((mean.e_k2 - expected).abs() < 1e-15, "{}", mean.e_k2);
    }

    #[test]
    fn linear_oscillator_reduction() {
        let sm = StateMoments::from_raw(&table4_mcs()).unwrap();
        let m = linear();
        let d = AccelDecomposition::new(&m);
        let w2 = m.omega0 * m.omega0;
        let mean = accel_mean(&sm, &d).unwrap();
        let expected = -m.beta1 * -6.00e-6 - w2 * -4.01e-5;
        assert!((mean.total - expected).abs() < 1e-18);
        assert!((mean.total - 2.53e-6).abs() < 1e-8);

        let second = accel_second_moment(&sm, &d).unwrap();
        let expected = m.beta1 * m.beta1 * 2.81e-3
            + 2.0 * m.beta1 * w2 * -7.32e-7
            + w2 * w2 * 4.38e-2;
        assert!((second.total - expected).abs() < 1e-16);
        assert!((second.total - 1.720e-4).abs() < 1e-6);
    }

    #[test]
    fn k2_sign() {
        let sm = StateMoments::from_raw(&table4_mcs()).unwrap();
        let mut m = linear();
        m.rho[0] = 0.9;
        let d = AccelDecomposition::new(&m);
        assert!(accel_mean(&sm, &d).unwrap().e_k2 < 0.0);
    }

    #[test]
    fn second_moment_expansion_identity() {
        let sm = StateMoments::from_raw(&table4_mcs()).unwrap();
        let mut m = linear();
        m.beta3 = 4.25;
        m.alpha[1] = 0.003;
        m.rho = [0.9, -0.05, 0.02, 1e-3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1e-9];
        let d = AccelDecomposition::new(&m);
        let s = accel_second_moment(&sm, &d).unwrap();
        assert!(s.total >= 0.0);
        assert!((s.total - s.expanded()).abs() <= 1e-13 * s.total);
    }

    #[test]
    fn deterministic_state_limit() {
        let phi = 0.1;
        let sm = StateMoments::new([phi, 0.02, 0.5], [[0.0; 3]; 3]).unwrap();
        let mut m = linear();
        m.beta3 = 4.25;
        m.alpha[1] = 0.003;
        m.rho[0] = 0.9;
        let d = AccelDecomposition::new(&m);
        let acc = d.total().eval([phi, 0.02, 0.5]);
        let set = accel_moment_set(&sm, &d).unwrap();
        assert!((set.m1 - acc).abs() < 1e-15);
        assert!((set.m2 - acc * acc).abs() < 1e-15);
    }

    #[test]
    fn moment_set_closure_consistency() {
        let sm = StateMoments::from_raw(&table4_mcs()).unwrap();
        let d = AccelDecomposition::new(&linear());
        let s = accel_moment_set(&sm, &d).unwrap();
        let var = s.m2 - s.m1 * s.m1;
        let m4 = s.m1.powi(4) + 6.0 * s.m1 * s.m1 * var + 3.0 * var * var;
        assert_eq!(s.m4, m4);
    }

    #[test]
    fn sine_series_coefficients() {
        assert_eq!(sine_series(3).unwrap().coefficients(), &[1.0, -1.0 / 6.0]);
        let s9 = sine_series(9).unwrap();
        assert_eq!(s9.coefficients()[4], 1.0 / 362880.0);
        assert_eq!(s9.coefficients()[3], -1.0 / 5040.0);
        assert!((s9.eval(0.3) - 0.3f64.sin()).abs() < 1e-10);
        assert!(sine_series(4).is_err());
        assert!(sine_series(11).is_err());
    }

    #[test]
    fn cargo_scaling_identity() {
        let sm = StateMoments::from_raw(&table4_mcs()).unwrap();
        let mut m = linear();
        m.rho = [0.9, -0.05, 0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let d = AccelDecomposition::new(&m);
        let c = cargo_geometry(30.0, 20.0).unwrap();
        let cm = cargo_moments(&sm, &d, &c, &sine_series(7).unwrap()).unwrap();
        let mean = accel_mean(&sm, &d).unwrap();
        let second = accel_second_moment(&sm, &d).unwrap();
        let lp = c.l_prime;
        assert!((cm.e_kc2 - lp * mean.e_k2).abs() <= 1e-14 * cm.e_kc2.abs());
        assert!((cm.e_kc2_sq - lp * lp * second.e_k2_sq).abs() <= 1e-14 * cm.e_kc2_sq);
    }

    #[test]
    fn moment_file_parsing() {
        let s = MomentSet::from_toml("m1 = 1.62e-6\nm2 = 2.07e-4\nm3 = -2.58e-9\nm4 = 1.69e-7\n").unwrap();
        assert_eq!(s.m4, 1.69e-7);
        let s = MomentSet::from_toml("[moments]\nm1 = 0.0\nm2 = 2.0\n").unwrap();
        assert_eq!(s.m4, 12.0);
        assert!(MomentSet::from_toml("m1 = 0.0\n").is_err());
        assert!(MomentSet::from_toml("m1 = 1.0\nm2 = 0.5\n").is_err());
    }
}
