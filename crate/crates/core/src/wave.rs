//! Wave spectra and effective-wave synthesis.
//!
//! The irregular sea is described by the ITTC two-parameter spectrum. The
//! effective wave amplitude A_w(t) seen by the ship follows from Grim's
//! transfer function; its spectrum is split into equal-energy bands and
//! turned into a random-phase cosine sum.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SeaState;
use crate::error::{Error, Result};

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Half-width around x = ±π inside which the transfer function is evaluated
/// through its factored form.
const SINGULAR_BAND: f64 = 1e-3;

/// Frequency grid and discretization settings for the effective wave.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSettings {
    pub components: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub grid_points: usize,
}

impl Default for WaveSettings {
    fn default() -> Self {
        WaveSettings {
            components: 100,
            omega_min: 0.05,
            omega_max: 3.0,
            grid_points: 4000,
        }
    }
}

impl WaveSettings {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::config("waves.components", "must be >= 1"));
        }
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min) || !self.omega_max.is_finite() {
            return Err(Error::config("waves.omega_max", "need 0 < omega_min < omega_max"));
        }
        if self.grid_points < 2 {
            return Err(Error::config("waves.grid_points", "must be >= 2"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        let step = (self.omega_max - self.omega_min) / (n - 1) as f64;
        (0..n).map(|i| self.omega_min + step * i as f64).collect()
    }
}

/// A spectral density sampled on a strictly increasing positive grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    omega: Vec<f64>,
    density: Vec<f64>,
}

impl SpectrumGrid {
    pub fn new(omega: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if omega.len() != density.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} frequencies but {} densities",
                omega.len(),
                density.len()
            )));
        }
        if omega.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("frequencies must be finite and > 0".into()));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("frequencies must be strictly increasing".into()));
        }
        if density.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("densities must be finite and >= 0".into()));
        }
        Ok(SpectrumGrid { omega, density })
    }

    /// ITTC spectrum sampled on the configured grid.
    pub fn ittc(sea: &SeaState, settings: &WaveSettings) -> Result<Self> {
        let omega = settings.grid();
        let density = omega
            .iter()
            .map(|&w| ittc_spectrum(w, sea))
            .collect::<Result<Vec<_>>>()?;
        SpectrumGrid::new(omega, density)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// ITTC wave spectrum S_w(ω) in m²·s.
pub fn ittc_spectrum(omega: f64, sea: &SeaState) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::InvalidArgument(format!("frequency must be >= 0, got {omega}")));
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let t4 = sea.t01.powi(4);
    let w4 = omega.powi(4);
    let a = 173.0 * sea.h13 * sea.h13 / t4;
    let b = 691.0 / t4;
    // Written as exp(-b/ω⁴)/ω⁵ so tiny ω underflows to 0 instead of 0·∞.
    Ok(a * (-b / w4).exp() / (w4 * omega))
}

/// Grim's effective-wave transfer function. The imaginary part is zero.
pub fn grim_transfer(omega: f64, chi: f64, wave_length: f64) -> Complex64 {
    let x = omega * omega * wave_length / (2.0 * GRAVITY) * chi.cos();
    Complex64::new(grim_kernel(x), 0.0)
}

/// 2x·sin x / (π² − x²), with the removable singularity at |x| = π filled in.
fn grim_kernel(x: f64) -> f64 {
    // Even in x.
    let x = x.abs();
    let e = x - PI;
    if e.abs() < SINGULAR_BAND {
        // With x = π + e: 2x sin x/(π² − x²) = 2(π + e)·(sin e / e)/(2π + e).
        let e2 = e * e;
        let sinc = 1.0 - e2 / 6.0 * (1.0 - e2 / 20.0);
        2.0 * (PI + e) * sinc / (2.0 * PI + e)
    } else {
        2.0 * x * x.sin() / (PI * PI - x * x)
    }
}

/// S_eff(ω) = |H(ω)|²·S_w(ω) on the same grid.
pub fn effective_spectrum(grid: &SpectrumGrid, sea: &SeaState) -> SpectrumGrid {
    let density = grid
        .omega
        .iter()
        .zip(&grid.density)
        .map(|(&w, &s)| grim_transfer(w, sea.heading, sea.wave_length).norm_sqr() * s)
        .collect();
    SpectrumGrid {
        omega: grid.omega.clone(),
        density,
    }
}

/// Zeroth spectral moment by the trapezoidal rule.
pub fn spectral_variance(grid: &SpectrumGrid) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "spectral variance needs at least 2 grid points".into(),
        ));
    }
    Ok(cumulative(&grid.omega, &grid.density).last().copied().unwrap_or(0.0))
}

fn cumulative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        out.push(acc);
    }
    out
}

/// Discretized effective wave: A_w(t) = Σ aᵢ cos(ωᵢ t + θᵢ).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveComponents {
    pub omega: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    /// Seed the phases were drawn with.
    pub seed: u64,
}

impl WaveComponents {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Σ aᵢ²/2, the variance the components carry.
    pub fn variance(&self) -> f64 {
        self.amplitude.iter().map(|a| 0.5 * a * a).sum()
    }

    /// Same frequencies and amplitudes with fresh uniform phases.
    pub fn with_phases<R: Rng>(&self, rng: &mut R, seed: u64) -> WaveComponents {
        WaveComponents {
            omega: self.omega.clone(),
            amplitude: self.amplitude.clone(),
            phase: random_phases(rng, self.len()),
            seed,
        }
    }

    /// Effective wave amplitude at time `t`, m.
    pub fn synthesize(&self, t: f64) -> f64 {
        synthesize_effective_wave(self, t)
    }
}

fn random_phases<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
}

/// Splits the spectrum into `n` bands of equal energy. Each band becomes one
/// component at its energy-centroid frequency with amplitude √(2·m₀/n) and a
/// uniform random phase drawn from a ChaCha8 generator seeded with `rng_seed`.
pub fn discretize_equal_energy(grid: &SpectrumGrid, n: usize, rng_seed: u64) -> Result<WaveComponents> {
    if n == 0 {
        return Err(Error::InvalidArgument("component count must be >= 1".into()));
    }
    let m0 = spectral_variance(grid)?;
    if !(m0 > 0.0) {
        return Err(Error::DegenerateSpectrum("zero spectral variance".into()));
    }
    let energy = cumulative(&grid.omega, &grid.density);
    let weighted: Vec<f64> = grid.omega.iter().zip(&grid.density).map(|(w, s)| w * s).collect();
    let first = cumulative(&grid.omega, &weighted);

    let de = m0 / n as f64;
    let mut omega = Vec::with_capacity(n);
    let mut seg = 0usize;
    let mut prev_first = 0.0;
    for k in 1..=n {
        let target = if k == n { m0 } else { de * k as f64 };
        // Advance to the segment containing the band edge.
        while seg + 2 < energy.len() && energy[seg + 1] < target {
            seg += 1;
        }
        let (e0, e1) = (energy[seg], energy[seg + 1]);
        let frac = if e1 > e0 { ((target - e0) / (e1 - e0)).clamp(0.0, 1.0) } else { 1.0 };
        let edge_first = first[seg] + frac * (first[seg + 1] - first[seg]);
        omega.push((edge_first - prev_first) / de);
        prev_first = edge_first;
    }

    let amplitude = vec![(2.0 * de).sqrt(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(WaveComponents {
        omega,
        amplitude,
        phase: random_phases(&mut rng, n),
        seed: rng_seed,
    })
}

/// A_w(t) = Σ aᵢ cos(ωᵢ t + θᵢ).
pub fn synthesize_effective_wave(components: &WaveComponents, t: f64) -> f64 {
    components
        .omega
        .iter()
        .zip(&components.amplitude)
        .zip(&components.phase)
        .map(|((&w, &a), &p)| a * (w * t + p).cos())
        .sum()
}

/// Writes `omega,density` rows.
pub fn spectrum_csv(grid: &SpectrumGrid) -> String {
    let mut out = String::from("omega,density\n");
    for (w, s) in grid.omega.iter().zip(&grid.density) {
        out.push_str(&format!("{w:e},{s:e}\n"));
    }
    out
}

/// Writes `omega,amplitude,phase` rows.
pub fn components_csv(c: &WaveComponents) -> String {
    let mut out = String::from("omega,amplitude,phase\n");
    for i in 0..c.len() {
        out.push_str(&format!("{:e},{:e},{:e}\n", c.omega[i], c.amplitude[i], c.phase[i]));
    }
    out
}
