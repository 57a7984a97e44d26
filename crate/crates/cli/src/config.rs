//! Scenario configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use flocking_core::hydro1d::StepControl;
use flocking_core::hydro2d::GridParams;
use flocking_core::profiles::{DensityProfile, VelocityProfile, VelocityTerm};
use flocking_core::{InfluenceKernel, KernelFamily, Model};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    pub kernel: InfluenceKernel,
    #[serde(default)]
    pub domain: Domain,
    pub init: Init,
    pub time: TimeConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect: Option<BisectConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    /// Particle count for 1D Lagrangian runs and agent ensembles.
    pub particles: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { l: 16.0, n: 128, particles: 800 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Init {
    pub density: DensityProfile,
    #[serde(default)]
    pub velocity: VelocityProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_output_interval")]
    pub output_interval: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_cfl() -> f64 {
    GridParams::default().cfl
}

fn default_dt_max() -> f64 {
    GridParams::default().dt_max
}

fn default_output_interval() -> f64 {
    GridParams::default().output_interval
}

fn default_rtol() -> f64 {
    StepControl::default().rtol
}

fn default_atol() -> f64 {
    StepControl::default().atol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub grad_cap: f64,
    pub eps_blow: f64,
    /// Support threshold relative to the mean density `m0 / L^2`.
    pub rho_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            grad_cap: GridParams::default().grad_cap,
            eps_blow: StepControl::default().eps_blow,
            rho_tol: GridParams::default().rho_tol_rel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    /// Artifact directory; `--out` takes precedence.
    pub dir: Option<PathBuf>,
    pub csv: bool,
    pub checkpoints: bool,
    /// Density snapshot spacing for the traveling-profile residual (2D).
    pub snapshot_interval: Option<f64>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { dir: None, csv: true, checkpoints: true, snapshot_interval: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    #[serde(default = "default_param")]
    pub param: String,
    pub a_lo: f64,
    pub a_hi: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_param() -> String {
    "amplitude".into()
}

fn default_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub p1: ScanAxis,
    pub p2: ScanAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanAxis {
    pub name: String,
    #[serde(default)]
    pub values: Vec<f64>,
}

/// Names accepted by [`RunConfig::with_param`].
pub const PARAM_NAMES: [&str; 7] = ["amplitude", "delta", "omega", "rate", "mass", "sigma", "kernel"];

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok((cfg, text))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.dim == 1 || self.dim == 2, "dim must be 1 or 2, got {}", self.dim);
        self.kernel.validate()?;
        self.init.density.validate()?;
        self.init.velocity.validate()?;
        let d = &self.domain;
        ensure!(d.l > 0.0 && d.l.is_finite(), "domain.L must be positive, got {}", d.l);
        ensure!(d.n >= 4 && d.n.is_power_of_two(), "domain.n must be a power of two >= 4, got {}", d.n);
        ensure!(d.particles >= 2, "domain.particles must be >= 2, got {}", d.particles);
        let t = &self.time;
        ensure!(t.t_end > 0.0 && t.t_end.is_finite(), "time.t_end must be positive, got {}", t.t_end);
        self.grid_params().validate()?;
        self.step_control().validate()?;
        if let Some(s) = self.outputs.snapshot_interval {
            ensure!(s > 0.0, "outputs.snapshot_interval must be positive, got {s}");
        }
        if let Some(b) = &self.bisect {
            ensure!(PARAM_NAMES.contains(&b.param.as_str()), "unknown bisection parameter {:?}", b.param);
            ensure!(b.tol > 0.0, "bisect.tol must be positive, got {}", b.tol);
        }
        if let Some(s) = &self.scan {
            for axis in [&s.p1, &s.p2] {
                ensure!(PARAM_NAMES.contains(&axis.name.as_str()), "unknown scan parameter {:?}", axis.name);
                ensure!(axis.values.iter().all(|v| v.is_finite()), "scan values must be finite");
            }
        }
        Ok(())
    }

    pub fn grid_params(&self) -> GridParams {
        GridParams {
            cfl: self.time.cfl,
            dt_max: self.time.dt_max,
            grad_cap: self.thresholds.grad_cap,
            rho_tol_rel: self.thresholds.rho_tol,
            output_interval: self.time.output_interval,
            ..GridParams::default()
        }
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.time.rtol,
            atol: self.time.atol,
            dt_max: self.time.dt_max,
            eps_blow: self.thresholds.eps_blow,
            output_interval: self.time.output_interval,
            ..StepControl::default()
        }
    }

    /// Returns a copy with the named scalar parameter set to `value`.
    ///
    /// Velocity parameters update every matching term, adding one when none
    /// exists (except `amplitude`, whose bump also needs a half-width).
    pub fn with_param(&self, name: &str, value: f64) -> anyhow::Result<RunConfig> {
        let mut cfg = self.clone();
        let terms = &mut cfg.init.velocity.terms;
        let mut hit = false;
        match name {
            "amplitude" => {
                for t in terms.iter_mut() {
                    if let VelocityTerm::BumpCompression { amplitude, .. } = t {
                        *amplitude = value;
                        hit = true;
                    }
                }
                ensure!(hit, "parameter amplitude needs a bump_compression velocity term");
            }
            "delta" | "omega" | "rate" => {
                for t in terms.iter_mut() {
                    match (name, t) {
                        ("delta", VelocityTerm::LinearCompression { delta: p })
                        | ("omega", VelocityTerm::RigidRotation { omega: p })
                        | ("rate", VelocityTerm::Shear { rate: p }) => {
                            *p = value;
                            hit = true;
                        }
                        _ => {}
                    }
                }
                if !hit {
                    terms.push(match name {
                        "delta" => VelocityTerm::LinearCompression { delta: value },
                        "omega" => VelocityTerm::RigidRotation { omega: value },
                        _ => VelocityTerm::Shear { rate: value },
                    });
                }
            }
            "mass" => match &mut cfg.init.density {
                DensityProfile::GaussianBump { mass, .. }
                | DensityProfile::DoubleBump { mass, .. }
                | DensityProfile::UniformDisk { mass, .. } => *mass = value,
            },
            "sigma" => match &mut cfg.init.density {
                DensityProfile::GaussianBump { sigma, .. } | DensityProfile::DoubleBump { sigma, .. } => *sigma = value,
                DensityProfile::UniformDisk { .. } => bail!("parameter sigma does not apply to uniform_disk"),
            },
            "kernel" => {
                cfg.kernel.family = match cfg.kernel.family {
                    KernelFamily::Exponential { .. } => KernelFamily::Exponential { length: value },
                    KernelFamily::PowerLaw { .. } => KernelFamily::PowerLaw { beta: value },
                    KernelFamily::CompactBump { .. } => KernelFamily::CompactBump { radius: value },
                }
            }
            other => bail!("unknown parameter {other:?}; expected one of {PARAM_NAMES:?}"),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
