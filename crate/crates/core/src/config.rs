//! Physical configuration: ship particulars, roll dynamics, cargo positions
//! and sea state, plus the TOML document they are loaded from.
//!
//! Units are SI with angles in radians throughout. The document layout is
//! documented in the repository README; [`Config::to_toml_string`] writes the
//! same layout back so a loaded configuration round-trips exactly.

use std::f64::consts::PI;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::sim::SimulationConfig;
use crate::wave::WaveSettings;

pub const ALPHA_LEN: usize = 5;
pub const RHO_LEN: usize = 12;

/// Principal particulars of the ship.
#[derive(Debug, Clone, PartialEq)]
pub struct ShipParticulars {
    pub length_pp: f64,
    pub breadth: f64,
    pub depth: f64,
    pub draught: f64,
    pub block_coeff: f64,
    pub gm: f64,
    pub natural_roll_period: f64,
    pub bilge_keel_length_ratio: f64,
    pub bilge_keel_breadth_ratio: f64,
}

impl ShipParticulars {
    /// Natural roll frequency in rad/s.
    pub fn omega0(&self) -> f64 {
        2.0 * PI / self.natural_roll_period
    }
}

/// Coefficients of the single-degree-of-freedom roll equation
///
/// ```text
/// φ̈ + β₁φ̇ + β₃φ̇³ + Σ α_{2n-1} φ^{2n-1} + P(t) φ = 0
/// P(t) = (ω₀²/GM) Σ ρ_n A_w(t)^n
/// ```
///
/// `alpha[n]` multiplies `φ^(2n+1)`, `rho[n]` multiplies `A_w^(n+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RollModel {
    pub beta1: f64,
    pub beta3: f64,
    pub alpha: [f64; ALPHA_LEN],
    pub omega0: f64,
    pub gm: f64,
    pub rho: [f64; RHO_LEN],
}

impl RollModel {
    /// Linearly damped oscillator with natural frequency `omega0` and no
    /// parametric excitation.
    pub fn linear(beta1: f64, omega0: f64, gm: f64) -> Self {
        RollModel {
            beta1,
            beta3: 0.0,
            alpha: [omega0 * omega0, 0.0, 0.0, 0.0, 0.0],
            omega0,
            gm,
            rho: [0.0; RHO_LEN],
        }
    }

    /// ω₀²/GM, the scale of the parametric excitation.
    pub fn excitation_scale(&self) -> f64 {
        self.omega0 * self.omega0 / self.gm
    }

    /// Restoring term Σ α_{2n-1} φ^{2n-1} in rad/s².
    pub fn restoring_accel(&self, phi: f64) -> f64 {
        let phi2 = phi * phi;
        // Horner in φ², then one factor of φ keeps the result exactly odd.
        let even = self.alpha.iter().rev().fold(0.0, |acc, &a| acc * phi2 + a);
        even * phi
    }

    /// Instantaneous parametric excitation P = (ω₀²/GM) Σ ρ_n a_wⁿ in 1/s².
    ///
    /// Positive `a_w` means a wave trough amidships.
    pub fn gm_delta_factor(&self, a_w: f64) -> f64 {
        let poly = self.rho.iter().rev().fold(0.0, |acc, &r| acc * a_w + r) * a_w;
        self.excitation_scale() * poly
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 0.0) || !self.beta1.is_finite() {
            return Err(Error::config("roll.beta1", "must be finite and >= 0"));
        }
        if !self.beta3.is_finite() {
            return Err(Error::config("roll.beta3", "must be finite"));
        }
        if !(self.omega0 > 0.0) || !self.omega0.is_finite() {
            return Err(Error::config("ship.natural_roll_period", "must be > 0"));
        }
        if !(self.gm > 0.0) || !self.gm.is_finite() {
            return Err(Error::config("ship.gm", "must be > 0"));
        }
        Ok(())
    }
}

/// Position of a cargo item relative to the roll axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CargoPosition {
    pub name: String,
    /// Vertical distance, m.
    pub v_c: f64,
    /// Horizontal distance, m.
    pub h_c: f64,
    /// Direct distance √(v_c² + h_c²), m.
    pub l_c: f64,
    /// arctan(h_c / v_c), rad.
    pub phi_c: f64,
    /// Lever arm l_c·cos(phi_c), m.
    pub l_prime: f64,
}

/// Builds a [`CargoPosition`] from its vertical and horizontal distances.
pub fn cargo_geometry(v_c: f64, h_c: f64) -> Result<CargoPosition> {
    if !(v_c > 0.0) || !v_c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cargo vertical distance must be > 0, got {v_c}"
        )));
    }
    if !(h_c >= 0.0) || !h_c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cargo horizontal distance must be >= 0, got {h_c}"
        )));
    }
    let l_c = v_c.hypot(h_c);
    let phi_c = h_c.atan2(v_c);
    Ok(CargoPosition {
        name: String::new(),
        v_c,
        h_c,
        l_c,
        phi_c,
        l_prime: l_c * phi_c.cos(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeaState {
    /// Mean wave period T01, s.
    pub t01: f64,
    /// Significant wave height, m.
    pub h13: f64,
    /// Heading from the wave direction, rad (π = head seas).
    pub heading: f64,
    /// Wave length used by the effective-wave transfer function, m.
    pub wave_length: f64,
}

impl SeaState {
    pub fn new(t01: f64, h13: f64, heading: f64, wave_length: f64) -> Result<Self> {
        let sea = SeaState {
            t01,
            h13,
            heading,
            wave_length,
        };
        sea.validate()?;
        Ok(sea)
    }

    fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("sea.t01", self.t01),
            ("sea.h13", self.h13),
            ("sea.wave_length", self.wave_length),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        if !self.heading.is_finite() {
            return Err(Error::config("sea.heading", "must be finite"));
        }
        Ok(())
    }
}

/// Everything a run needs, as loaded from one document.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub ship: ShipParticulars,
    pub roll: RollModel,
    pub cargos: Vec<CargoPosition>,
    pub sea: SeaState,
    pub waves: WaveSettings,
    pub simulation: SimulationConfig,
    pub sine_order: u32,
}

/// Parses and validates a configuration document.
pub fn load_config(document: &str) -> Result<Config> {
    let root: Table = document.parse()?;
    let doc = Section::root(&root);

    let ship_s = doc.table("ship")?;
    let ship = ShipParticulars {
        length_pp: ship_s.positive("length_pp")?,
        breadth: ship_s.positive("breadth")?,
        depth: ship_s.positive("depth")?,
        draught: ship_s.positive("draught")?,
        block_coeff: ship_s.positive("block_coeff")?,
        gm: ship_s.positive("gm")?,
        natural_roll_period: ship_s.positive("natural_roll_period")?,
        bilge_keel_length_ratio: ship_s.f64("bilge_keel_length_ratio")?,
        bilge_keel_breadth_ratio: ship_s.f64("bilge_keel_breadth_ratio")?,
    };

    let roll_s = doc.table("roll")?;
    let omega0 = ship.omega0();
    let alpha = match (roll_s.has("alpha"), roll_s.has("gz")) {
        (true, false) => roll_s.array::<ALPHA_LEN>("alpha")?,
        (false, true) => {
            // GZ polynomial in metres; restoring acceleration is (ω₀²/GM)·GZ.
            let gz = roll_s.array::<ALPHA_LEN>("gz")?;
            gz.map(|g| omega0 * omega0 / ship.gm * g)
        }
        (true, true) => {
            return Err(Error::config(
                roll_s.path("alpha"),
                "give either alpha or gz, not both",
            ))
        }
        (false, false) => return Err(Error::config(roll_s.path("alpha"), "missing key")),
    };
    let roll = RollModel {
        beta1: roll_s.f64("beta1")?,
        beta3: roll_s.f64("beta3")?,
        alpha,
        omega0,
        gm: ship.gm,
        rho: roll_s.array::<RHO_LEN>("rho")?,
    };
    roll.validate()?;

    let sea_s = doc.table("sea")?;
    let sea = SeaState {
        t01: sea_s.positive("t01")?,
        h13: sea_s.positive("h13")?,
        heading: sea_s.f64_or("heading", PI)?,
        wave_length: sea_s.f64_or("wave_length", ship.length_pp)?,
    };
    sea.validate()?;

    let mut cargos = Vec::new();
    if let Some(v) = root.get("cargo") {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::config("cargo", "must be an array of tables"))?;
        for (i, item) in arr.iter().enumerate() {
            let prefix = format!("cargo[{i}]");
            let t = item
                .as_table()
                .ok_or_else(|| Error::config(&prefix, "must be a table"))?;
            let s = Section { table: t, prefix };
            let v_c = s.f64("v_c")?;
            let h_c = s.f64("h_c")?;
            let mut c = cargo_geometry(v_c, h_c).map_err(|e| Error::config(s.path("v_c"), e.to_string()))?;
            c.name = match t.get("name") {
                Some(Value::String(n)) => n.clone(),
                Some(_) => return Err(Error::config(s.path("name"), "must be a string")),
                None => format!("C{}", i + 1),
            };
            cargos.push(c);
        }
    }

    let waves = match doc.optional_table("waves")? {
        Some(s) => {
            let d = WaveSettings::default();
            WaveSettings {
                components: s.count_or("components", d.components)?,
                omega_min: s.f64_or("omega_min", d.omega_min)?,
                omega_max: s.f64_or("omega_max", d.omega_max)?,
                grid_points: s.count_or("grid_points", d.grid_points)?,
            }
        }
        None => WaveSettings::default(),
    };
    waves.validate()?;

    let simulation = match doc.optional_table("simulation")? {
        Some(s) => {
            let d = SimulationConfig::default();
            SimulationConfig {
                dt: s.f64_or("dt", d.dt)?,
                duration: s.f64_or("duration", d.duration)?,
                realizations: s.count_or("realizations", d.realizations)?,
                master_seed: s.count_or("master_seed", d.master_seed as usize)? as u64,
                burn_in: s.f64_or("burn_in", d.burn_in)?,
                phi0: s.f64_or("phi0", d.phi0)?,
                phidot0: s.f64_or("phidot0", d.phidot0)?,
                max_roll: s.f64_or("max_roll", d.max_roll)?,
                histogram_bins: s.count_or("histogram_bins", d.histogram_bins)?,
            }
        }
        None => SimulationConfig::default(),
    };
    simulation.validate()?;

    let sine_order = match doc.optional_table("analysis")? {
        Some(s) => s.count_or("sine_order", 7)? as u32,
        None => 7,
    };
    if !matches!(sine_order, 3 | 5 | 7 | 9) {
        return Err(Error::config("analysis.sine_order", "must be one of 3, 5, 7, 9"));
    }

    Ok(Config {
        ship,
        roll,
        cargos,
        sea,
        waves,
        simulation,
        sine_order,
    })
}

impl Config {
    /// Writes the configuration in the layout [`load_config`] reads.
    /// Restoring coefficients are always written as `alpha`.
    pub fn to_toml_string(&self) -> Result<String> {
        let mut root = Table::new();

        let s = &self.ship;
        root.insert(
            "ship".into(),
            Value::Table(table(&[
                ("length_pp", s.length_pp),
                ("breadth", s.breadth),
                ("depth", s.depth),
                ("draught", s.draught),
                ("block_coeff", s.block_coeff),
                ("gm", s.gm),
                ("natural_roll_period", s.natural_roll_period),
                ("bilge_keel_length_ratio", s.bilge_keel_length_ratio),
                ("bilge_keel_breadth_ratio", s.bilge_keel_breadth_ratio),
            ])),
        );

        let mut roll = table(&[("beta1", self.roll.beta1), ("beta3", self.roll.beta3)]);
        roll.insert("alpha".into(), float_array(&self.roll.alpha));
        roll.insert("rho".into(), float_array(&self.roll.rho));
        root.insert("roll".into(), Value::Table(roll));

        root.insert(
            "sea".into(),
            Value::Table(table(&[
                ("t01", self.sea.t01),
                ("h13", self.sea.h13),
                ("heading", self.sea.heading),
                ("wave_length", self.sea.wave_length),
            ])),
        );

        let w = &self.waves;
        let mut waves = Table::new();
        waves.insert("components".into(), Value::Integer(w.components as i64));
        waves.insert("omega_min".into(), Value::Float(w.omega_min));
        waves.insert("omega_max".into(), Value::Float(w.omega_max));
        waves.insert("grid_points".into(), Value::Integer(w.grid_points as i64));
        root.insert("waves".into(), Value::Table(waves));

        let m = &self.simulation;
        let mut sim = Table::new();
        sim.insert("dt".into(), Value::Float(m.dt));
        sim.insert("duration".into(), Value::Float(m.duration));
        sim.insert("realizations".into(), Value::Integer(m.realizations as i64));
        sim.insert("master_seed".into(), Value::Integer(m.master_seed as i64));
        sim.insert("burn_in".into(), Value::Float(m.burn_in));
        sim.insert("phi0".into(), Value::Float(m.phi0));
        sim.insert("phidot0".into(), Value::Float(m.phidot0));
        sim.insert("max_roll".into(), Value::Float(m.max_roll));
        sim.insert("histogram_bins".into(), Value::Integer(m.histogram_bins as i64));
        root.insert("simulation".into(), Value::Table(sim));

        let mut analysis = Table::new();
        analysis.insert("sine_order".into(), Value::Integer(self.sine_order as i64));
        root.insert("analysis".into(), Value::Table(analysis));

        let cargos = self
            .cargos
            .iter()
            .map(|c| {
                let mut t = Table::new();
                t.insert("name".into(), Value::String(c.name.clone()));
                t.insert("v_c".into(), Value::Float(c.v_c));
                t.insert("h_c".into(), Value::Float(c.h_c));
                Value::Table(t)
            })
            .collect();
        root.insert("cargo".into(), Value::Array(cargos));

        Ok(toml::to_string(&root)?)
    }
}

fn table(entries: &[(&str, f64)]) -> Table {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), Value::Float(*v)))
        .collect()
}

fn float_array(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| Value::Float(v)).collect())
}

/// A view of one TOML table that reports errors with full key paths.
pub(crate) struct Section<'a> {
    table: &'a Table,
    prefix: String,
}

impl<'a> Section<'a> {
    pub(crate) fn root(table: &'a Table) -> Self {
        Section {
            table,
            prefix: String::new(),
        }
    }

    pub(crate) fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.prefix, key)
        }
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    pub(crate) fn table(&self, key: &str) -> Result<Section<'a>> {
        self.optional_table(key)?
            .ok_or_else(|| Error::config(self.path(key), "missing key"))
    }

    pub(crate) fn optional_table(&self, key: &str) -> Result<Option<Section<'a>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Section {
                table: t,
                prefix: self.path(key),
            })),
            Some(_) => Err(Error::config(self.path(key), "must be a table")),
        }
    }

    pub(crate) fn f64(&self, key: &str) -> Result<f64> {
        let v = self
            .table
            .get(key)
            .ok_or_else(|| Error::config(self.path(key), "missing key"))?;
        self.number(key, v)
    }

    fn number(&self, key: &str, v: &Value) -> Result<f64> {
        let x = match v {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            _ => return Err(Error::config(self.path(key), "must be a number")),
        };
        if !x.is_finite() {
            return Err(Error::config(self.path(key), "must be finite"));
        }
        Ok(x)
    }

    pub(crate) fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.has(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x <= 0.0 {
            return Err(Error::config(self.path(key), "must be > 0"));
        }
        Ok(x)
    }

    fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(Error::config(self.path(key), "must be a non-negative integer")),
        }
    }

    fn array<const N: usize>(&self, key: &str) -> Result<[f64; N]> {
        let v = self
            .table
            .get(key)
            .ok_or_else(|| Error::config(self.path(key), "missing key"))?;
        let arr = v
            .as_array()
            .ok_or_else(|| Error::config(self.path(key), "must be an array"))?;
        if arr.len() != N {
            return Err(Error::config(
                self.path(key),
                format!("{key} must have {N} entries, got {}", arr.len()),
            ));
        }
        let mut out = [0.0; N];
        for (i, item) in arr.iter().enumerate() {
            out[i] = self.number(&format!("{key}[{i}]"), item)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIXTURE: &str = include_str!("../../../fixtures/c11.toml");

    #[test]
    fn fixture_particulars() {
        let cfg = load_config(FIXTURE).unwrap();
        assert_eq!(cfg.ship.gm, 1.965);
        assert_eq!(cfg.ship.natural_roll_period, 25.1);
        assert_eq!(cfg.roll.beta1, 3.64e-3);
        assert_eq!(cfg.roll.beta3, 4.25);
        assert_eq!(cfg.cargos.len(), 2);
        assert_eq!(cfg.cargos[0].l_prime, 10.0);
        // gz[0] = GM, so the small-angle limit is the natural-frequency oscillator.
        let w0 = cfg.ship.omega0();
        assert!((cfg.roll.alpha[0] - w0 * w0).abs() < 1e-15);
    }

    #[test]
    fn short_rho_is_rejected() {
        let doc = FIXTURE.replace(
            "rho = [0.75, -0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]",
            "rho = [0.75, -0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]",
        );
        assert_ne!(doc, FIXTURE);
        let err = load_config(&doc).unwrap_err().to_string();
        assert!(err.starts_with("roll.rho"), "{err}");
        assert!(err.contains("rho must have 12 entries"), "{err}");
    }

    #[test]
    fn missing_and_bad_keys_name_their_path() {
        let doc = FIXTURE.replace("gm = 1.965", "");
        assert!(load_config(&doc).unwrap_err().to_string().starts_with("ship.gm"));

        let doc = FIXTURE.replace("t01 = 9.99", "t01 = nan");
        let err = load_config(&doc).unwrap_err().to_string();
        assert!(err.starts_with("sea.t01") && err.contains("finite"), "{err}");

        let doc = FIXTURE.replace("v_c = 10.0", "v_c = -1.0");
        assert!(load_config(&doc).unwrap_err().to_string().starts_with("cargo[0].v_c"));
    }

    #[test]
    fn round_trip() {
        let cfg = load_config(FIXTURE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        let again = load_config(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml_string().unwrap());
    }

    #[test]
    fn restoring_linear_value() {
        let w0: f64 = 2.0 * PI / 25.1;
        let m = RollModel::linear(0.0, w0, 1.965);
        assert_eq!(m.restoring_accel(0.0), 0.0);
        assert!((m.restoring_accel(0.1) - 6.2665e-3).abs() < 1e-6);
    }

    #[test]
    fn gm_delta_factor_values() {
        let w0: f64 = 2.0 * PI / 25.1;
        let mut m = RollModel::linear(0.0, w0, 1.965);
        assert_eq!(m.gm_delta_factor(0.0), 0.0);
        m.rho[0] = 1.0;
        let expected = w0 * w0 * 2.0 / 1.965;
        assert!((m.gm_delta_factor(2.0) - expected).abs() < 1e-15);
        assert!((m.gm_delta_factor(2.0) - 0.06378).abs() < 1e-4);
        m.rho[1] = 0.3;
        assert!((m.gm_delta_factor(-1.5) + m.gm_delta_factor(1.5)).abs() > 1e-6);
    }

    #[test]
    fn cargo_table_positions() {
        let c1 = cargo_geometry(10.0, 0.0).unwrap();
        assert_eq!((c1.l_c, c1.phi_c, c1.l_prime), (10.0, 0.0, 10.0));
        let c2 = cargo_geometry(30.0, 20.0).unwrap();
        assert!((c2.l_c - 36.0555).abs() < 1e-4);
        assert!((c2.l_prime - 30.0).abs() < 1e-12);
        assert!(cargo_geometry(0.0, 1.0).is_err());
        assert!(cargo_geometry(1.0, -1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn restoring_is_odd(phi in -PI..PI) {
                let cfg = load_config(FIXTURE).unwrap();
                prop_assert_eq!(cfg.roll.restoring_accel(-phi), -cfg.roll.restoring_accel(phi));
            }

            #[test]
            fn lever_arm_equals_vertical_distance(v in 0.1f64..100.0, h in 0.0f64..100.0) {
                let c = cargo_geometry(v, h).unwrap();
                prop_assert!((c.l_prime - v).abs() <= 1e-12 * v);
            }
        }
    }
}
