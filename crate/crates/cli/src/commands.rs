//! The five pipeline stages.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;

use rollmoments::closure::{RawStateMoments, StateMoments};
use rollmoments::config::{load_config, Config};
use rollmoments::fit::{curve_csv, fit_pdf, FitConfig, FitReport, PdfModel, Shape};
use rollmoments::moments::{moment_report, sine_series, MomentReport, MomentSet};
use rollmoments::sim::{run_ensemble, simulate_realization, wave_template, EnsembleStats};
use rollmoments::wave::{
    components_csv, effective_spectrum, spectral_variance, spectrum_csv, SpectrumGrid,
};

use crate::run::{read_input, Run};

/// Overrides of the `[simulation]` table given on the command line.
#[derive(Debug, Clone, Default)]
pub struct SimOverrides {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub duration: Option<f64>,
    pub phi0_deg: Option<f64>,
}

impl SimOverrides {
    fn apply(&self, cfg: &mut Config) -> Result<()> {
        let s = &mut cfg.simulation;
        if let Some(v) = self.seed {
            s.master_seed = v;
        }
        if let Some(v) = self.realizations {
            if v == 0 {
                bail!("--realizations must be >= 1");
            }
            s.realizations = v;
        }
        if let Some(v) = self.duration {
            if v.is_nan() || v <= s.burn_in {
                bail!("--duration must exceed the burn-in of {} s", s.burn_in);
            }
            s.duration = v;
        }
        if let Some(v) = self.phi0_deg {
            // Degrees are accepted at the boundary only.
            s.phi0 = v.to_radians();
        }
        Ok(())
    }
}

fn load(path: &Path) -> Result<(Config, String)> {
    let text = read_input(path)?;
    let cfg = load_config(&text).with_context(|| format!("invalid config {}", path.display()))?;
    Ok((cfg, text))
}

fn moments_toml(m: &MomentSet) -> String {
    format!(
        "[moments]\nm1 = {:e}\nm2 = {:e}\nm3 = {:e}\nm4 = {:e}\n",
        m.m1, m.m2, m.m3, m.m4
    )
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}/{name}")
    }
}

// spectrum

pub fn spectrum_stage(run: &mut Run, cfg: &Config, prefix: &str) -> Result<(f64, f64)> {
    let grid = SpectrumGrid::ittc(&cfg.sea, &cfg.waves)?;
    let eff = effective_spectrum(&grid, &cfg.sea);
    let m0_ittc = spectral_variance(&grid)?;
    let m0_eff = spectral_variance(&eff)?;
    let (components, _) = wave_template(&cfg.sea, &cfg.waves, cfg.simulation.master_seed)?;
    let closed = 173.0 * cfg.sea.h13 * cfg.sea.h13 / 2764.0;

    run.write(&join(prefix, "wave_spectrum.csv"), &spectrum_csv(&grid))?;
    run.write(&join(prefix, "effective_spectrum.csv"), &spectrum_csv(&eff))?;
    run.write(&join(prefix, "components.csv"), &components_csv(&components))?;
    let summary = format!(
        "m0_wave = {m0_ittc:e}\nm0_wave_closed_form = {closed:e}\nm0_effective = {m0_eff:e}\n\
         components = {}\ncomponent_variance = {:e}\n",
        components.len(),
        components.variance()
    );
    run.write(&join(prefix, "spectrum_summary.toml"), &summary)?;
    info!("wave m0 = {m0_ittc:.5} m^2, effective-wave m0 = {m0_eff:.5} m^2");
    Ok((m0_ittc, m0_eff))
}

pub fn spectrum(config: &Path, out: &Path) -> Result<()> {
    let (cfg, text) = load(config)?;
    let mut run = Run::start("spectrum", out, &[(config, &text)], Some(cfg.simulation.master_seed))?;
    spectrum_stage(&mut run, &cfg, "")?;
    run.finish()
}

// simulate

fn ensemble_csv(stats: &EnsembleStats) -> String {
    let mut out = String::from("quantity,m1,m2,m3,m4,min,max,kurtosis\n");
    for q in &stats.quantities {
        let [m1, m2, m3, m4] = q.moments;
        let _ = writeln!(
            out,
            "{},{m1:e},{m2:e},{m3:e},{m4:e},{:e},{:e},{:e}",
            q.name,
            q.min,
            q.max,
            q.kurtosis()
        );
    }
    out
}

fn state_csv(raw: &RawStateMoments) -> String {
    let mut out = String::from("entry,value\n");
    for (k, v) in RawStateMoments::KEYS.iter().zip(raw.values()) {
        let _ = writeln!(out, "{k},{v:e}");
    }
    out
}

fn series_csv(s: &rollmoments::sim::RealizationSeries) -> String {
    let mut out = String::from("t,phi,phidot,phiddot,a_w,k1,k2");
    for c in &s.cargo {
        let _ = write!(out, ",{0}.a_c,{0}.k_c1,{0}.k_c2", c.name);
    }
    out.push('\n');
    for i in 0..s.time.len() {
        let _ = write!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.time[i], s.phi[i], s.phidot[i], s.phiddot[i], s.a_w[i], s.k1[i], s.k2[i]
        );
        for c in &s.cargo {
            let _ = write!(out, ",{:e},{:e},{:e}", c.a_c[i], c.k_c1[i], c.k_c2[i]);
        }
        out.push('\n');
    }
    out
}

pub fn simulate_stage(run: &mut Run, cfg: &Config, prefix: &str, series: Option<usize>) -> Result<EnsembleStats> {
    let s = &cfg.simulation;
    info!(
        "simulating {} realizations x {} s at dt = {} s (seed {})",
        s.realizations, s.duration, s.dt, s.master_seed
    );
    let stats = run_ensemble(s, &cfg.roll, &cfg.sea, &cfg.waves, &cfg.cargos)?;
    run.write(&join(prefix, "ensemble_moments.csv"), &ensemble_csv(&stats))?;
    run.write(&join(prefix, "state_moments.csv"), &state_csv(&stats.state))?;
    run.write(&join(prefix, "state_moments.toml"), &stats.state.to_toml_string()?)?;
    let phiddot = stats.get("phiddot").context("ensemble lacks phiddot")?;
    run.write(&join(prefix, "accel_moments.toml"), &moments_toml(&phiddot.moment_set()))?;
    for c in &cfg.cargos {
        if let Some(q) = stats.get(&format!("{}.a_c", c.name)) {
            run.write(
                &join(prefix, &format!("cargo_{}_moments.toml", c.name)),
                &moments_toml(&q.moment_set()),
            )?;
        }
    }
    for q in &stats.quantities {
        if let Some(h) = &q.histogram {
            run.write(&join(prefix, &format!("histograms/{}.csv", q.name)), &h.to_csv())?;
        }
    }
    let summary = format!(
        "realizations_used = {}\ndiverged = {:?}\nsamples_per_realization = {}\nsample_count = {}\n\
         effective_wave_m0 = {:e}\n",
        stats.realizations_used,
        stats.diverged,
        stats.samples_per_realization,
        stats.sample_count,
        stats.wave_variance
    );
    run.write(&join(prefix, "ensemble_summary.toml"), &summary)?;
    if let Some(index) = series {
        let (template, _) = wave_template(&cfg.sea, &cfg.waves, s.master_seed)?;
        let rs = simulate_realization(s, &cfg.roll, &template, &cfg.cargos, index)?;
        run.write(&join(prefix, &format!("series_{index}.csv")), &series_csv(&rs))?;
    }
    Ok(stats)
}

pub fn simulate(config: &Path, out: &Path, overrides: &SimOverrides, series: Option<usize>) -> Result<()> {
    let (mut cfg, text) = load(config)?;
    overrides.apply(&mut cfg)?;
    cfg.simulation.validate()?;
    let mut run = Run::start("simulate", out, &[(config, &text)], Some(cfg.simulation.master_seed))?;
    simulate_stage(&mut run, &cfg, "", series)?;
    run.finish()
}

// moments

fn report_toml(r: &MomentReport) -> String {
    let mut out = moments_toml(&r.accel);
    let _ = write!(
        out,
        "\n[components]\ne_k1 = {:e}\ne_k2 = {:e}\ne_k1_sq = {:e}\ne_k1_k2 = {:e}\ne_k2_sq = {:e}\n",
        r.mean.e_k1, r.mean.e_k2, r.second.e_k1_sq, r.second.e_k1k2, r.second.e_k2_sq
    );
    out
}

fn cargo_csv(reports: &[MomentReport]) -> String {
    let mut out = String::from(
        "cargo,sine_order,e_sin,e_sin_sq,e_kc1,e_kc2,e_kc1_sq,e_kc2_sq,e_kc1_kc2,m1,m2,m3,m4\n",
    );
    for r in reports {
        for c in &r.cargo {
            let m = &c.moments;
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                c.name,
                c.sine_order,
                c.e_sin,
                c.e_sin_sq,
                c.e_kc1,
                c.e_kc2,
                c.e_kc1_sq,
                c.e_kc2_sq,
                c.e_kc1_kc2,
                m.m1,
                m.m2,
                m.m3,
                m.m4
            );
        }
    }
    out
}

/// Analytic moments for each sine order; the last order is the primary one.
pub fn moments_stage(
    run: &mut Run,
    cfg: &Config,
    raw: &RawStateMoments,
    orders: &[u32],
    prefix: &str,
) -> Result<MomentReport> {
    let sm = StateMoments::from_raw(raw)?;
    let mut reports = Vec::with_capacity(orders.len());
    for &order in orders {
        reports.push(moment_report(&sm, &cfg.roll, &cfg.cargos, &sine_series(order)?)?);
    }
    let primary = reports.last().context("no sine order given")?.clone();
    run.write(&join(prefix, "accel_moments.toml"), &report_toml(&primary))?;
    run.write(&join(prefix, "cargo_moments.csv"), &cargo_csv(&reports))?;
    for c in &primary.cargo {
        run.write(
            &join(prefix, &format!("cargo_{}_moments.toml", c.name)),
            &moments_toml(&c.moments),
        )?;
    }
    Ok(primary)
}

pub fn moments(state: &Path, config: &Path, out: &Path, orders: &[u32]) -> Result<()> {
    let (cfg, text) = load(config)?;
    let state_text = read_input(state)?;
    let raw = RawStateMoments::from_toml(&state_text)
        .with_context(|| format!("invalid state moments {}", state.display()))?;
    let orders = if orders.is_empty() { vec![cfg.sine_order] } else { orders.to_vec() };
    let mut run = Run::start("moments", out, &[(config, &text), (state, &state_text)], None)?;
    moments_stage(&mut run, &cfg, &raw, &orders, "")?;
    run.finish()
}

// fit

pub struct FitOptions {
    pub shape: Shape,
    pub weights: Option<[f64; 4]>,
    pub seed: u64,
    pub provenance: Option<String>,
}

fn fit_config(shape: Shape, weights: Option<[f64; 4]>, seed: u64) -> FitConfig {
    let mut cfg = FitConfig::for_shape(shape);
    if let Some(w) = weights {
        cfg.weights = w;
    }
    cfg.seed = seed;
    cfg
}

pub fn fit_stage(
    run: &mut Run,
    target: &MomentSet,
    opts: &FitOptions,
    provenance: &str,
    prefix: &str,
) -> Result<(PdfModel, FitReport)> {
    let cfg = fit_config(opts.shape, opts.weights, opts.seed);
    let (model, report) = fit_pdf(opts.shape, target, &cfg, provenance)?;
    let shape = opts.shape.to_string();
    run.write(&join(prefix, &format!("fit_{shape}.toml")), &report.to_toml_string()?)?;
    run.write(&join(prefix, &format!("pdf_{shape}.csv")), &curve_csv(&model, target.m2))?;
    if opts.shape != Shape::Gaussian {
        let g = fit_config(Shape::Gaussian, None, opts.seed);
        let (baseline, _) = fit_pdf(Shape::Gaussian, target, &g, provenance)?;
        run.write(&join(prefix, "pdf_gaussian_baseline.csv"), &curve_csv(&baseline, target.m2))?;
    }
    info!("{shape} fit: J = {:e}, coefficients {:?}", report.objective, report.coefficients);
    Ok((model, report))
}

pub fn fit(moments: &Path, out: &Path, opts: &FitOptions) -> Result<()> {
    let text = read_input(moments)?;
    let target = MomentSet::from_toml(&text).with_context(|| format!("invalid moments {}", moments.display()))?;
    let provenance = opts
        .provenance
        .clone()
        .unwrap_or_else(|| moments.display().to_string());
    let mut run = Run::start("fit", out, &[(moments, &text)], Some(opts.seed))?;
    fit_stage(&mut run, &target, opts, &provenance, "")?;
    run.finish()
}

// pipeline

fn comparison_csv(columns: &[(&str, Option<MomentSet>)]) -> String {
    let mut out = String::from("moment");
    for (name, _) in columns {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for n in 1..=4 {
        let _ = write!(out, "m{n}");
        for (_, m) in columns {
            match m {
                Some(m) => {
                    let _ = write!(out, ",{:e}", m.get(n));
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.with_context(|| format!("stage {name} failed"))
}

pub fn pipeline(config: &Path, out: &Path, overrides: &SimOverrides, moment_eq: Option<&Path>) -> Result<()> {
    let (mut cfg, text) = stage("config", load(config))?;
    stage("config", overrides.apply(&mut cfg))?;
    stage("config", cfg.simulation.validate().map_err(Into::into))?;
    let mut inputs: Vec<(PathBuf, String)> = vec![(config.to_path_buf(), text)];
    let eq_raw = match moment_eq {
        Some(p) => {
            let t = stage("moments", read_input(p))?;
            let raw = stage(
                "moments",
                RawStateMoments::from_toml(&t).with_context(|| format!("invalid state moments {}", p.display())),
            )?;
            inputs.push((p.to_path_buf(), t));
            Some(raw)
        }
        None => None,
    };
    let refs: Vec<(&Path, &str)> = inputs.iter().map(|(p, t)| (p.as_path(), t.as_str())).collect();
    let mut run = Run::start("pipeline", out, &refs, Some(cfg.simulation.master_seed))?;

    stage("spectrum", spectrum_stage(&mut run, &cfg, "spectrum"))?;
    let stats = stage("simulate", simulate_stage(&mut run, &cfg, "simulate", None))?;
    let orders = [cfg.sine_order];
    let based = stage("moments", moments_stage(&mut run, &cfg, &stats.state, &orders, "moments_mcs"))?;
    let closure = match &eq_raw {
        Some(raw) => Some(stage("moments", moments_stage(&mut run, &cfg, raw, &orders, "moments_eq"))?),
        None => None,
    };

    let mcs = stats.get("phiddot").context("ensemble lacks phiddot")?.moment_set();
    for shape in [Shape::Type1, Shape::Type2, Shape::Gaussian] {
        let opts = FitOptions {
            shape,
            weights: None,
            seed: cfg.simulation.master_seed,
            provenance: Some("MCS".into()),
        };
        stage("fit", fit_stage(&mut run, &mcs, &opts, "MCS", "fit"))?;
    }

    let accel = comparison_csv(&[
        ("MCS", Some(mcs)),
        ("Based-MCS", Some(based.accel)),
        ("closure-input", closure.as_ref().map(|c| c.accel)),
    ]);
    run.write("comparison.csv", &accel)?;
    for (i, c) in cfg.cargos.iter().enumerate() {
        let emp = stats.get(&format!("{}.a_c", c.name)).map(|q| q.moment_set());
        let table = comparison_csv(&[
            ("MCS", emp),
            ("Based-MCS", Some(based.cargo[i].moments)),
            ("closure-input", closure.as_ref().map(|r| r.cargo[i].moments)),
        ]);
        run.write(&format!("comparison_{}.csv", c.name), &table)?;
    }
    run.finish()
}
