//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, Context};
use flocking_core::flockdiag::{self, SummaryRow};
use flocking_core::hydro1d::{self, ParticleState1D};
use flocking_core::hydro2d::{self, Grid, GridState2D};
use flocking_core::kernels::{self, check_variation_bound};
use flocking_core::microdyn::{self, AgentEnsemble};
use flocking_core::profiles::{VelocityProfile, VelocityTerm};
use flocking_core::{FlockError, InfluenceKernel, Model, Outcome, ThresholdVerdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// A command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Bracket(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Bracket(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Bracket(e) | Failure::Numeric(e) => e,
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

trait Classify<T> {
    /// Errors while building inputs: bad configuration.
    fn config(self) -> CmdResult<T>;
    /// Errors while solving: numerical failure, or a bracket error.
    fn numeric(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn numeric(self) -> CmdResult<T> {
        self.map_err(|e| {
            let e: anyhow::Error = e.into();
            if matches!(e.downcast_ref::<FlockError>(), Some(FlockError::Bracket(_))) {
                Failure::Bracket(e)
            } else {
                Failure::Numeric(e)
            }
        })
    }
}

/// Run metadata written next to the artifacts and read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub model: Model,
    pub dim: usize,
    pub verdict: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_blow: Option<f64>,
    /// Predicted decay rate; absent when no finite flock diameter exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_inf: Option<f64>,
}

const SUMMARY_QUANTITIES: [&str; 4] = ["V", "max_eta_S", "max_abs_omega", "max_abs_div"];

fn outcome_name(o: &Outcome) -> &'static str {
    match o {
        Outcome::Completed => "Completed",
        Outcome::BlewUp { .. } => "BlewUp",
    }
}

/// Flock diameter and decay rate predicted from `(m0, D0, V0)`.
fn flock_prediction(kernel: &InfluenceKernel, model: Model, m0: f64, d0: f64, v0: f64) -> CmdResult<(Option<f64>, Option<f64>)> {
    match check_variation_bound(kernel, model, m0, d0, v0) {
        Ok(c) => Ok((Some(c.d_inf), Some(kernels::decay_rate(model, m0, c.phi_inf)))),
        Err(FlockError::NoFiniteFlockDiameter { .. }) => Ok((None, None)),
        Err(e) => Err(e).numeric(),
    }
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).with_context(|| format!("creating {}", path.display())).numeric()
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).numeric()
}

fn prepare_out(out: &Path) -> CmdResult {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).config()
}

fn build_1d(cfg: &RunConfig) -> CmdResult<ParticleState1D> {
    ParticleState1D::from_profiles(cfg.model, cfg.kernel, &cfg.init.density, &cfg.init.velocity, cfg.domain.particles)
        .config()
}

fn build_2d(cfg: &RunConfig) -> CmdResult<GridState2D> {
    let grid = Grid::new(cfg.domain.n, cfg.domain.l).config()?;
    GridState2D::from_profiles(cfg.model, cfg.kernel, grid, &cfg.init.density, &cfg.init.velocity, cfg.grid_params())
        .config()
}

/// Verdict and outcome of one scenario without writing artifacts.
fn simulate(cfg: &RunConfig) -> CmdResult<(ThresholdVerdict, Outcome)> {
    match cfg.dim {
        1 => {
            let mut s = build_1d(cfg)?;
            let verdict = hydro1d::classify_threshold_1d(&s).numeric()?;
            let run = s.run(cfg.time.t_end, &cfg.step_control()).numeric()?;
            Ok((verdict, run.outcome))
        }
        _ => {
            let mut s = build_2d(cfg)?;
            let verdict = s.threshold_report().numeric()?;
            s.set_mask_radius(verdict.d_inf);
            let run = s.run(cfg.time.t_end, None).numeric()?;
            Ok((verdict, run.outcome))
        }
    }
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn write_summary(out: &Path, columns: &BTreeMap<String, Vec<f64>>, kappa: Option<f64>) -> CmdResult<Vec<SummaryRow>> {
    let rows = flockdiag::summarize(columns, &SUMMARY_QUANTITIES, kappa.unwrap_or(f64::NAN)).numeric()?;
    flockdiag::write_summary_csv(&rows, create(&out.join("summary.csv"))?).numeric()?;
    Ok(rows)
}

pub fn run(cfg: &RunConfig, config_text: &str, out: &Path, quiet: bool) -> CmdResult {
    prepare_out(out)?;
    write_text(&out.join("config.toml"), config_text)?;
    let mut diag_csv = Vec::new();
    let (verdict, outcome, d_inf, kappa) = match cfg.dim {
        1 => {
            let mut s = build_1d(cfg)?;
            let verdict = hydro1d::classify_threshold_1d(&s).numeric()?;
            say(quiet, format!("{verdict}").trim_end());
            let (d0, v0) = s.diameters();
            let (d_inf, kappa) = flock_prediction(&s.kernel, cfg.model, s.total_mass(), d0, v0)?;
            let run = s.run(cfg.time.t_end, &cfg.step_control()).numeric()?;
            run.write_csv(&mut diag_csv).numeric()?;
            if cfg.outputs.csv {
                s.write_snapshot_csv(create(&out.join("particles.csv"))?).numeric()?;
            }
            (verdict, run.outcome, d_inf, kappa)
        }
        _ => {
            let mut s = build_2d(cfg)?;
            let verdict = s.threshold_report().numeric()?;
            say(quiet, format!("{verdict}").trim_end());
            s.set_mask_radius(verdict.d_inf);
            let (d0, v0, _) = s.variation().numeric()?;
            let (d_inf, kappa) = flock_prediction(&s.kernel, cfg.model, s.mass(), d0, v0)?;
            if cfg.outputs.checkpoints {
                hydro2d::write_checkpoint(&s, create(&out.join("initial.flck"))?).numeric()?;
            }
            let initial = s.clone();
            let run = s.run(cfg.time.t_end, cfg.outputs.snapshot_interval).numeric()?;
            run.write_csv(&mut diag_csv).numeric()?;
            if cfg.outputs.checkpoints {
                hydro2d::write_checkpoint(&s, create(&out.join("final.flck"))?).numeric()?;
            }
            if cfg.outputs.csv && run.snapshots.len() >= 2 {
                let u_bar = flockdiag::estimate_u_bar(cfg.model, &initial, &s).numeric()?;
                let res = flockdiag::traveling_profile_residual(&s.grid, &run.snapshots, u_bar).numeric()?;
                let mut w = csv::Writer::from_writer(create(&out.join("traveling_residual.csv"))?);
                w.write_record(["t", "residual"]).numeric()?;
                for (t, r) in res.times.iter().zip(&res.values) {
                    w.write_record([t.to_string(), r.to_string()]).numeric()?;
                }
                w.flush().numeric()?;
            }
            (verdict, run.outcome, d_inf, kappa)
        }
    };
    if cfg.outputs.csv {
        write_text(&out.join("diagnostics.csv"), std::str::from_utf8(&diag_csv).expect("csv is utf-8"))?;
    }
    let mut text = format!("{verdict}");
    text.push_str(&format!("outcome = {outcome}\n"));
    write_text(&out.join("verdict.txt"), &text)?;
    let meta = RunMeta {
        model: cfg.model,
        dim: cfg.dim,
        verdict: verdict.verdict.to_string(),
        outcome: outcome_name(&outcome).into(),
        t_blow: outcome.blowup_time(),
        kappa,
        d_inf,
    };
    write_text(&out.join("run.toml"), &toml::to_string(&meta).config()?)?;
    let columns = flockdiag::read_diagnostics_csv(diag_csv.as_slice()).numeric()?;
    write_summary(out, &columns, kappa)?;
    match outcome {
        Outcome::Completed => say(quiet, "outcome = Completed"),
        Outcome::BlewUp { t, reason } => say(quiet, format!("outcome = BlewUp at t_blow = {t} ({reason:?})")),
    }
    Ok(())
}

/// Report of an empirical threshold bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectReport {
    pub model: Model,
    pub param: String,
    pub a_lo: f64,
    pub a_hi: f64,
    pub tol: f64,
    pub a_star: f64,
    pub lo: f64,
    pub hi: f64,
    pub runs: usize,
    /// Analytic critical amplitude, when the family admits one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_gap: Option<f64>,
}

/// Splits the velocity into the part without bump terms and the unit-amplitude bump.
fn split_bump(v: &VelocityProfile) -> (VelocityProfile, VelocityProfile) {
    let is_bump = |t: &&VelocityTerm| matches!(t, VelocityTerm::BumpCompression { .. });
    let base = VelocityProfile { terms: v.terms.iter().filter(|t| !is_bump(t)).copied().collect(), ..v.clone() };
    let shape = VelocityProfile {
        terms: v
            .terms
            .iter()
            .filter(is_bump)
            .map(|t| match *t {
                VelocityTerm::BumpCompression { half_width, .. } => {
                    VelocityTerm::BumpCompression { amplitude: 1.0, half_width }
                }
                other => other,
            })
            .collect(),
        ..v.clone()
    };
    (base, shape)
}

/// Largest amplitude keeping `base' + a shape' >= -1` on the support (dense sampling).
fn mt_critical_amplitude(cfg: &RunConfig, base: &VelocityProfile, shape: &VelocityProfile) -> CmdResult<Option<f64>> {
    let (lo, hi) = cfg.init.density.line().config()?.support();
    let samples = 20_000;
    let best = (0..=samples)
        .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
        .filter_map(|x| {
            let s = shape.eval_1d(x).1;
            (s < -1e-12).then(|| (base.eval_1d(x).1 + 1.0) / -s)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best.is_finite().then_some(best))
}

pub fn bisect(
    cfg: &RunConfig,
    out: &Path,
    bracket: (Option<f64>, Option<f64>, Option<f64>),
    quiet: bool,
) -> CmdResult<BisectReport> {
    if cfg.dim != 1 {
        return Err(Failure::Config(anyhow!("bisect drives the 1D solver; got dim = {}", cfg.dim)));
    }
    let section = cfg.bisect.clone();
    let param = section.as_ref().map_or_else(|| "amplitude".to_string(), |b| b.param.clone());
    let a_lo = bracket.0.or(section.as_ref().map(|b| b.a_lo));
    let a_hi = bracket.1.or(section.as_ref().map(|b| b.a_hi));
    let tol = bracket.2.or(section.as_ref().map(|b| b.tol)).unwrap_or(1e-3);
    let (Some(a_lo), Some(a_hi)) = (a_lo, a_hi) else {
        return Err(Failure::Config(anyhow!("bracket needs a_lo and a_hi ([bisect] section or flags)")));
    };
    for a in [a_lo, a_hi] {
        cfg.with_param(&param, a).config()?;
    }
    prepare_out(out)?;
    let ctrl = cfg.step_control();
    let outcome = |a: f64| -> flocking_core::Result<Outcome> {
        let c = cfg.with_param(&param, a).map_err(|e| FlockError::Domain(e.to_string()))?;
        let mut s = ParticleState1D::from_profiles(c.model, c.kernel, &c.init.density, &c.init.velocity, c.domain.particles)?;
        let o = s.run(c.time.t_end, &ctrl)?.outcome;
        if !quiet {
            println!("a = {a:.6}: {o}");
        }
        Ok(o)
    };
    let b = hydro1d::bisect_threshold(outcome, a_lo, a_hi, tol).numeric()?;
    let a_c = if param == "amplitude" {
        let (base, shape) = split_bump(&cfg.init.velocity);
        match cfg.model {
            Model::Cs => Some(hydro1d::critical_amplitude_1d(&cfg.kernel, &cfg.init.density, &base, &shape).numeric()?),
            Model::Mt => mt_critical_amplitude(cfg, &base, &shape)?,
        }
    } else {
        None
    };
    let report = BisectReport {
        model: cfg.model,
        param,
        a_lo,
        a_hi,
        tol,
        a_star: b.a_star,
        lo: b.lo,
        hi: b.hi,
        runs: b.runs,
        a_c,
        rel_gap: a_c.map(|c| (b.a_star - c).abs() / c),
    };
    let text = toml::to_string(&report).config()?;
    write_text(&out.join("bisect.toml"), &text)?;
    say(quiet, text.trim_end());
    Ok(report)
}

/// One row of a phase-diagram scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub p1: f64,
    pub p2: f64,
    pub verdict: String,
    pub outcome: String,
    pub t_blow: Option<f64>,
}

pub fn scan(cfg: &RunConfig, out: &Path, quiet: bool) -> CmdResult<Vec<ScanRow>> {
    let Some(sc) = &cfg.scan else {
        return Err(Failure::Config(anyhow!("scan needs a [scan] section with p1 and p2")));
    };
    let mut points = Vec::new();
    for &a in &sc.p1.values {
        for &b in &sc.p2.values {
            let c = cfg.with_param(&sc.p1.name, a).and_then(|c| c.with_param(&sc.p2.name, b)).config()?;
            points.push((a, b, c));
        }
    }
    prepare_out(out)?;
    let rows: Vec<ScanRow> = points
        .par_iter()
        .map(|(a, b, c)| {
            let (verdict, outcome, t_blow) = match simulate(c) {
                Ok((v, o)) => (v.verdict.to_string(), outcome_name(&o).to_string(), o.blowup_time()),
                Err(f) => ("Error".to_string(), format!("Failed: {}", f.error()), None),
            };
            ScanRow { p1: *a, p2: *b, verdict, outcome, t_blow }
        })
        .collect();
    let mut w = csv::Writer::from_writer(create(&out.join("scan.csv"))?);
    w.write_record(["p1", "p2", "verdict", "outcome", "t_blow"]).numeric()?;
    for r in &rows {
        let t_blow = r.t_blow.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([r.p1.to_string(), r.p2.to_string(), r.verdict.clone(), r.outcome.clone(), t_blow])
            .numeric()?;
    }
    w.flush().numeric()?;
    say(quiet, format!("scanned {} points ({} x {})", rows.len(), sc.p1.name, sc.p2.name));
    Ok(rows)
}

pub fn report(out: &Path, quiet: bool) -> CmdResult<Vec<SummaryRow>> {
    let diag = out.join("diagnostics.csv");
    let file = File::open(&diag).with_context(|| format!("opening {}", diag.display())).config()?;
    let columns = flockdiag::read_diagnostics_csv(file).config()?;
    let meta_path = out.join("run.toml");
    let kappa = match fs::read_to_string(&meta_path) {
        Ok(text) => toml::from_str::<RunMeta>(&text).with_context(|| format!("parsing {}", meta_path.display())).config()?.kappa,
        Err(_) => None,
    };
    let rows = write_summary(out, &columns, kappa)?;
    for r in &rows {
        say(
            quiet,
            format!("{:<14} rate = {:.6e}  r2 = {:.4}  kappa = {:.6e}  ratio = {:.4}", r.quantity, r.fitted_rate, r.r_squared, r.bound_kappa, r.ratio),
        );
    }
    Ok(rows)
}

pub fn agents(cfg: &RunConfig, config_text: &str, out: &Path, quiet: bool) -> CmdResult {
    let mut ens: AgentEnsemble = microdyn::sample_from_macro(
        cfg.dim,
        cfg.model,
        cfg.kernel,
        &cfg.init.density,
        &cfg.init.velocity,
        cfg.domain.particles,
        cfg.seed,
    )
    .config()?;
    prepare_out(out)?;
    write_text(&out.join("config.toml"), config_text)?;
    let (d0, v0) = ens.diameters();
    let (d_inf, kappa) = flock_prediction(&ens.kernel, cfg.model, ens.total_mass(), d0, v0)?;
    let dt = cfg.time.dt_max;
    let mut traj = if cfg.outputs.csv {
        let mut w = csv::Writer::from_writer(create(&out.join("agents.csv"))?);
        ens.write_csv_header(&mut w).numeric()?;
        ens.write_csv_rows(&mut w).numeric()?;
        Some(w)
    } else {
        None
    };
    let mut diags = vec![ens.diag()];
    let mut k = 0usize;
    while ens.t < cfg.time.t_end - 1e-12 {
        k += 1;
        let target = (k as f64 * cfg.time.output_interval).min(cfg.time.t_end);
        let rows = ens.run(target, dt, usize::MAX).numeric()?;
        diags.extend(rows.into_iter().skip(1).last());
        if let Some(w) = traj.as_mut() {
            ens.write_csv_rows(w).numeric()?;
        }
    }
    if let Some(mut w) = traj {
        w.flush().numeric()?;
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["t", "D", "V", "mass", "momentum1", "momentum2"]).numeric()?;
        for r in &diags {
            w.write_record([r.t, r.d, r.v, r.mass, r.momentum[0], r.momentum[1]].map(|v| v.to_string())).numeric()?;
        }
        w.flush().numeric()?;
    }
    if cfg.outputs.csv {
        write_text(&out.join("diagnostics.csv"), std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    }
    let meta = RunMeta {
        model: cfg.model,
        dim: cfg.dim,
        verdict: "n/a".into(),
        outcome: "Completed".into(),
        t_blow: None,
        kappa,
        d_inf,
    };
    write_text(&out.join("run.toml"), &toml::to_string(&meta).config()?)?;
    write_text(&out.join("verdict.txt"), "verdict = n/a\noutcome = Completed\n")?;
    let columns = flockdiag::read_diagnostics_csv(buf.as_slice()).numeric()?;
    write_summary(out, &columns, kappa)?;
    let last = diags.last().expect("initial row");
    say(quiet, format!("agents: n = {}, t = {}, D = {:.6e}, V = {:.6e}", ens.len(), last.t, last.d, last.v));
    Ok(())
}
