//! Gaussian (second-order cumulant-neglect) closure.
//!
//! The state (φ, φ̇, A_w) is treated as jointly Gaussian with a given mean and
//! covariance. Any mixed moment E[φ^a φ̇^b A_w^c] then follows from the
//! recurrence
//!
//! ```text
//! m(k) = μᵢ m(k − eᵢ) + Σⱼ Σᵢⱼ (kⱼ − δᵢⱼ) m(k − eᵢ − eⱼ)
//! ```
//!
//! which is what every expectation in the analytic acceleration moments goes
//! through.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE_CAP: u32 = 40;

/// Index of each state variable in exponent triples.
pub const PHI: usize = 0;
pub const PHIDOT: usize = 1;
pub const AW: usize = 2;

/// The nine raw state moments of the (φ, φ̇, A_w) table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStateMoments {
    pub e_phi: f64,
    pub e_phi2: f64,
    pub e_phidot: f64,
    pub e_phidot2: f64,
    pub e_aw: f64,
    pub e_aw2: f64,
    pub e_phi_phidot: f64,
    pub e_phi_aw: f64,
    pub e_phidot_aw: f64,
}

impl RawStateMoments {
    pub const KEYS: [&'static str; 9] = [
        "e_phi",
        "e_phi2",
        "e_phidot",
        "e_phidot2",
        "e_aw",
        "e_aw2",
        "e_phi_phidot",
        "e_phi_aw",
        "e_phidot_aw",
    ];

    /// Reads the nine entries from a TOML document. Every key is required.
    pub fn from_toml(document: &str) -> Result<Self> {
        let table: toml::Table = document.parse()?;
        let mut v = [0.0; 9];
        for (slot, key) in v.iter_mut().zip(Self::KEYS) {
            let x = match table.get(key) {
                Some(toml::Value::Float(f)) => *f,
                Some(toml::Value::Integer(i)) => *i as f64,
                Some(_) => return Err(Error::config(key, "must be a number")),
                None => return Err(Error::config(key, "missing key")),
            };
            if !x.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
            *slot = x;
        }
        Ok(RawStateMoments {
            e_phi: v[0],
            e_phi2: v[1],
            e_phidot: v[2],
            e_phidot2: v[3],
            e_aw: v[4],
            e_aw2: v[5],
            e_phi_phidot: v[6],
            e_phi_aw: v[7],
            e_phidot_aw: v[8],
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn values(&self) -> [f64; 9] {
        [
            self.e_phi,
            self.e_phi2,
            self.e_phidot,
            self.e_phidot2,
            self.e_aw,
            self.e_aw2,
            self.e_phi_phidot,
            self.e_phi_aw,
            self.e_phidot_aw,
        ]
    }
}

/// Mean vector and covariance of the Gaussian-closed state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMoments {
    mean: [f64; 3],
    cov: [[f64; 3]; 3],
}

impl StateMoments {
    pub fn new(mean: [f64; 3], cov: [[f64; 3]; 3]) -> Result<Self> {
        if mean.iter().chain(cov.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        // Rounding-level asymmetry is averaged away; anything larger is an error.
        let mut cov = cov;
        for i in 0..3 {
            for j in 0..i {
                let (a, b) = (cov[i][j], cov[j][i]);
                let tol = 1e-12 * (cov[i][i] * cov[j][j]).abs().sqrt();
                if (a - b).abs() > tol {
                    return Err(Error::InvalidCovariance(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
                let avg = 0.5 * (a + b);
                cov[i][j] = avg;
                cov[j][i] = avg;
            }
        }
        let m = Matrix3::from_fn(|i, j| cov[i][j]);
        let eig = SymmetricEigen::new(m).eigenvalues;
        let min = eig.min();
        let scale = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if min < -1e-12 * scale.max(1.0) {
            return Err(Error::InvalidCovariance(format!(
                "smallest eigenvalue {min:e} is negative"
            )));
        }
        Ok(StateMoments { mean, cov })
    }

    /// Central moments from raw first and second moments.
    pub fn from_raw(raw: &RawStateMoments) -> Result<Self> {
        let mean = [raw.e_phi, raw.e_phidot, raw.e_aw];
        let second = [
            [raw.e_phi2, raw.e_phi_phidot, raw.e_phi_aw],
            [raw.e_phi_phidot, raw.e_phidot2, raw.e_phidot_aw],
            [raw.e_phi_aw, raw.e_phidot_aw, raw.e_aw2],
        ];
        let mut cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] = second[i][j] - mean[i] * mean[j];
            }
        }
        StateMoments::new(mean, cov)
    }

    pub fn to_raw(&self) -> RawStateMoments {
        let s = |i: usize, j: usize| self.cov[i][j] + self.mean[i] * self.mean[j];
        RawStateMoments {
            e_phi: self.mean[PHI],
            e_phi2: s(PHI, PHI),
            e_phidot: self.mean[PHIDOT],
            e_phidot2: s(PHIDOT, PHIDOT),
            e_aw: self.mean[AW],
            e_aw2: s(AW, AW),
            e_phi_phidot: s(PHI, PHIDOT),
            e_phi_aw: s(PHI, AW),
            e_phidot_aw: s(PHIDOT, AW),
        }
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 3]; 3] {
        self.cov
    }
}

/// Exponents (k₁, k₂, k₃) of φ, φ̇ and A_w.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonomialIndex(pub [u32; 3]);

impl MonomialIndex {
    pub fn new(k_phi: u32, k_phidot: u32, k_aw: u32) -> Self {
        MonomialIndex([k_phi, k_phidot, k_aw])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Mixed-moment table for one [`StateMoments`], filled by total degree up to
/// a cap. Entries are computed once; lookups never change them.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    state: StateMoments,
    cap: u32,
    stride: usize,
    table: Vec<f64>,
}

impl GaussianMoments {
    pub fn new(state: &StateMoments, cap: u32) -> Self {
        let stride = cap as usize + 1;
        let mut table = vec![f64::NAN; stride * stride * stride];
        let at = |k: [u32; 3]| (k[0] as usize * stride + k[1] as usize) * stride + k[2] as usize;
        let mu = state.mean;
        let cov = state.cov;
        table[0] = 1.0;
        for degree in 1..=cap {
            for k0 in 0..=degree {
                for k1 in 0..=degree - k0 {
                    let k = [k0, k1, degree - k0 - k1];
                    // Peel off the first variable with a positive exponent.
                    let i = k.iter().position(|&e| e > 0).unwrap();
                    let mut lower = k;
                    lower[i] -= 1;
                    let mut v = mu[i] * table[at(lower)];
                    for j in 0..3 {
                        let mult = lower[j];
                        if mult == 0 {
                            continue;
                        }
                        let mut lower2 = lower;
                        lower2[j] -= 1;
                        v += cov[i][j] * mult as f64 * table[at(lower2)];
                    }
                    table[at(k)] = v;
                }
            }
        }
        GaussianMoments {
            state: *state,
            cap,
            stride,
            table,
        }
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn state(&self) -> &StateMoments {
        &self.state
    }

    /// E[φ^k₁ φ̇^k₂ A_w^k₃].
    pub fn get(&self, k: MonomialIndex) -> Result<f64> {
        let degree = k.degree();
        if degree > self.cap {
            return Err(Error::DegreeCap {
                k: k.0,
                degree,
                cap: self.cap,
            });
        }
        let [a, b, c] = k.0.map(|e| e as usize);
        Ok(self.table[(a * self.stride + b) * self.stride + c])
    }

    pub fn expectation(&self, p: &StatePolynomial) -> Result<f64> {
        let mut total = 0.0;
        for (k, c) in p.terms() {
            total += c * self.get(k)?;
        }
        Ok(total)
    }
}

/// E[φ^k₁ φ̇^k₂ A_w^k₃] under the Gaussian closure, with the default cap.
pub fn mixed_moment(sm: &StateMoments, k: MonomialIndex) -> Result<f64> {
    let degree = k.degree();
    if degree > DEFAULT_DEGREE_CAP {
        return Err(Error::DegreeCap {
            k: k.0,
            degree,
            cap: DEFAULT_DEGREE_CAP,
        });
    }
    GaussianMoments::new(sm, degree).get(k)
}

/// Expectation of a polynomial in the state, term by term.
pub fn poly_expectation(sm: &StateMoments, p: &StatePolynomial) -> Result<f64> {
    let degree = p.degree();
    if degree > DEFAULT_DEGREE_CAP {
        let k = p.terms().map(|(k, _)| k).max_by_key(|k| k.degree()).unwrap();
        return Err(Error::DegreeCap {
            k: k.0,
            degree,
            cap: DEFAULT_DEGREE_CAP,
        });
    }
    GaussianMoments::new(sm, degree).expectation(p)
}

/// Third and fourth raw moments of a scalar with the given first two raw
/// moments, with third and fourth cumulants set to zero.
pub fn close_scalar(m1: f64, m2: f64) -> Result<(f64, f64)> {
    let var = m2 - m1 * m1;
    if var < 0.0 || !var.is_finite() {
        return Err(Error::NonRealizable { m2, m1_sq: m1 * m1 });
    }
    let m3 = m1 * m1 * m1 + 3.0 * m1 * var;
    let m4 = m1.powi(4) + 6.0 * m1 * m1 * var + 3.0 * var * var;
    Ok((m3, m4))
}

/// (E[sin φ], E[sin² φ]) for φ ~ N(mu, sigma²).
pub fn gaussian_sine_moment(mu: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let e_sin = (-0.5 * s2).exp() * mu.sin();
    let e_sin2 = 0.5 * (1.0 - (-2.0 * s2).exp() * (2.0 * mu).cos());
    (e_sin, e_sin2)
}

/// Sparse polynomial in (φ, φ̇, A_w).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatePolynomial {
    terms: BTreeMap<MonomialIndex, f64>,
}

impl StatePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(MonomialIndex([0, 0, 0]), c)
    }

    pub fn monomial(k: MonomialIndex, coeff: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(k, coeff);
        p
    }

    /// The single variable `index` (one of [`PHI`], [`PHIDOT`], [`AW`]).
    pub fn var(index: usize) -> Self {
        let mut k = [0; 3];
        k[index] = 1;
        Self::monomial(MonomialIndex(k), 1.0)
    }

    pub fn add_term(&mut self, k: MonomialIndex, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry(k).or_insert(0.0);
        *e += coeff;
        if *e == 0.0 {
            self.terms.remove(&k);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (MonomialIndex, f64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MonomialIndex::degree).max().unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (k, c) in self.terms() {
            out.add_term(k, c * s);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| &acc * self)
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.terms()
            .map(|(k, c)| {
                c * x[0].powi(k.0[0] as i32) * x[1].powi(k.0[1] as i32) * x[2].powi(k.0[2] as i32)
            })
            .sum()
    }
}

impl FromIterator<(MonomialIndex, f64)> for StatePolynomial {
    fn from_iter<I: IntoIterator<Item = (MonomialIndex, f64)>>(iter: I) -> Self {
        let mut p = Self::zero();
        for (k, c) in iter {
            p.add_term(k, c);
        }
        p
    }
}

impl Add for &StatePolynomial {
    type Output = StatePolynomial;
    fn add(self, rhs: &StatePolynomial) -> StatePolynomial {
        let mut out = self.clone();
        for (k, c) in rhs.terms() {
            out.add_term(k, c);
        }
        out
    }
}

impl Sub for &StatePolynomial {
    type Output = StatePolynomial;
    fn sub(self, rhs: &StatePolynomial) -> StatePolynomial {
        self + &(-rhs)
    }
}

impl Neg for &StatePolynomial {
    type Output = StatePolynomial;
    fn neg(self) -> StatePolynomial {
        self.scale(-1.0)
    }
}

impl Mul for &StatePolynomial {
    type Output = StatePolynomial;
    fn mul(self, rhs: &StatePolynomial) -> StatePolynomial {
        let mut out = StatePolynomial::zero();
        for (ka, ca) in self.terms() {
            for (kb, cb) in rhs.terms() {
                let k = MonomialIndex([ka.0[0] + kb.0[0], ka.0[1] + kb.0[1], ka.0[2] + kb.0[2]]);
                out.add_term(k, ca * cb);
            }
        }
        out
    }
}
