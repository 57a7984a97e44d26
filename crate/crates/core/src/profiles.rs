//! Named initial profiles for density and velocity.
//!
//! Densities are normalized to a prescribed total mass. In 1D only the
//! first coordinate of every center is used. Velocity fields are a sum of
//! terms; non-constant terms may be multiplied by a smooth radial window
//! so that the field equals its constant part (the far-field velocity)
//! outside a bounded region.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::quadrature;

fn default_cutoff() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum DensityProfile {
    /// Gaussian `exp(-r^2 / 2 sigma^2)` truncated at `cutoff * sigma` and
    /// shifted down so it vanishes continuously there.
    GaussianBump {
        mass: f64,
        sigma: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Two equal truncated Gaussians at `center +- separation/2` along the
    /// first axis, sharing the total mass.
    DoubleBump {
        mass: f64,
        sigma: f64,
        separation: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Constant density on a disk (an interval in 1D).
    UniformDisk {
        mass: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

// Unnormalized truncated Gaussian profile of r^2.
fn bump_shape(r2: f64, sigma: f64, cutoff: f64) -> f64 {
    let rc = cutoff * sigma;
    if r2 >= rc * rc {
        0.0
    } else {
        (-0.5 * r2 / (sigma * sigma)).exp() - (-0.5 * cutoff * cutoff).exp()
    }
}

fn bump_norm_1d(sigma: f64, cutoff: f64) -> f64 {
    let rc = cutoff * sigma;
    quadrature::integrate(|x| bump_shape(x * x, sigma, cutoff), -rc, rc, 1e-15)
}

fn bump_norm_2d(sigma: f64, cutoff: f64) -> f64 {
    let tail = (-0.5 * cutoff * cutoff).exp();
    2.0 * PI * sigma * sigma * (1.0 - tail) - PI * (cutoff * sigma).powi(2) * tail
}

impl DensityProfile {
    pub fn mass(&self) -> f64 {
        match *self {
            DensityProfile::GaussianBump { mass, .. }
            | DensityProfile::DoubleBump { mass, .. }
            | DensityProfile::UniformDisk { mass, .. } => mass,
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            DensityProfile::GaussianBump { center, .. }
            | DensityProfile::DoubleBump { center, .. }
            | DensityProfile::UniformDisk { center, .. } => center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FlockError::domain(format!("density {name} must be positive, got {v}")))
            }
        };
        positive("mass", self.mass())?;
        match *self {
            DensityProfile::GaussianBump { sigma, cutoff, .. } => {
                positive("sigma", sigma)?;
                positive("cutoff", cutoff)
            }
            DensityProfile::DoubleBump { sigma, cutoff, separation, .. } => {
                positive("sigma", sigma)?;
                positive("cutoff", cutoff)?;
                if separation.is_finite() && separation >= 0.0 {
                    Ok(())
                } else {
                    Err(FlockError::domain(format!("separation must be >= 0, got {separation}")))
                }
            }
            DensityProfile::UniformDisk { radius, .. } => positive("radius", radius),
        }
    }

    /// Bounding interval of the 1D support.
    pub fn support_1d(&self) -> (f64, f64) {
        let c = self.center()[0];
        match *self {
            DensityProfile::GaussianBump { sigma, cutoff, .. } => (c - cutoff * sigma, c + cutoff * sigma),
            DensityProfile::DoubleBump { sigma, cutoff, separation, .. } => {
                let h = 0.5 * separation + cutoff * sigma;
                (c - h, c + h)
            }
            DensityProfile::UniformDisk { radius, .. } => (c - radius, c + radius),
        }
    }

    /// Radius about `center` of a disk containing the 2D support.
    pub fn support_radius(&self) -> f64 {
        match *self {
            DensityProfile::GaussianBump { sigma, cutoff, .. } => cutoff * sigma,
            DensityProfile::DoubleBump { sigma, cutoff, separation, .. } => 0.5 * separation + cutoff * sigma,
            DensityProfile::UniformDisk { radius, .. } => radius,
        }
    }

    /// A 1D density evaluator with its normalization precomputed.
    pub fn line(&self) -> Result<Density1D> {
        self.validate()?;
        let norm = match *self {
            DensityProfile::GaussianBump { mass, sigma, cutoff, .. } => mass / bump_norm_1d(sigma, cutoff),
            DensityProfile::DoubleBump { mass, sigma, cutoff, .. } => 0.5 * mass / bump_norm_1d(sigma, cutoff),
            DensityProfile::UniformDisk { mass, radius, .. } => mass / (2.0 * radius),
        };
        Ok(Density1D { profile: *self, norm })
    }

    /// A 2D density evaluator with its normalization precomputed.
    pub fn plane(&self) -> Result<Density2D> {
        self.validate()?;
        let norm = match *self {
            DensityProfile::GaussianBump { mass, sigma, cutoff, .. } => mass / bump_norm_2d(sigma, cutoff),
            DensityProfile::DoubleBump { mass, sigma, cutoff, .. } => 0.5 * mass / bump_norm_2d(sigma, cutoff),
            DensityProfile::UniformDisk { mass, radius, .. } => mass / (PI * radius * radius),
        };
        Ok(Density2D { profile: *self, norm })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Density1D {
    profile: DensityProfile,
    norm: f64,
}

impl Density1D {
    pub fn eval(&self, x: f64) -> f64 {
        let c = self.profile.center()[0];
        let dx = x - c;
        match self.profile {
            DensityProfile::GaussianBump { sigma, cutoff, .. } => self.norm * bump_shape(dx * dx, sigma, cutoff),
            DensityProfile::DoubleBump { sigma, cutoff, separation, .. } => {
                let (a, b) = (dx - 0.5 * separation, dx + 0.5 * separation);
                self.norm * (bump_shape(a * a, sigma, cutoff) + bump_shape(b * b, sigma, cutoff))
            }
            DensityProfile::UniformDisk { radius, .. } => {
                if dx.abs() <= radius {
                    self.norm
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mass(&self) -> f64 {
        self.profile.mass()
    }

    pub fn support(&self) -> (f64, f64) {
        self.profile.support_1d()
    }

    /// Positions `x_i` with `F(x_i) = (i + 1/2) / n`, where `F` is the
    /// normalized cumulative mass; each carries mass `m0 / n`.
    pub fn midpoint_quantiles(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(FlockError::domain("particle count must be >= 1"));
        }
        let (a, b) = self.support();
        let cells = 4096;
        let h = (b - a) / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        for k in 0..cells {
            let lo = a + k as f64 * h;
            let piece = quadrature::integrate(|x| self.eval(x), lo, lo + h, 1e-16);
            cum.push(cum[k] + piece);
        }
        let total = cum[cells];
        if !(total > 0.0) {
            return Err(FlockError::domain("density has zero mass"));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let target = (i as f64 + 0.5) / n as f64 * total;
            let k = cum.partition_point(|&c| c < target).clamp(1, cells) - 1;
            let (mut lo, mut hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let base = cum[k];
            let left = lo;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let f = base + quadrature::integrate(|x| self.eval(x), left, mid, 1e-16);
                if f < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                    break;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Density2D {
    profile: DensityProfile,
    norm: f64,
}

impl Density2D {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let c = self.profile.center();
        let (dx, dy) = (x - c[0], y - c[1]);
        match self.profile {
            DensityProfile::GaussianBump { sigma, cutoff, .. } => {
                self.norm * bump_shape(dx * dx + dy * dy, sigma, cutoff)
            }
            DensityProfile::DoubleBump { sigma, cutoff, separation, .. } => {
                let (a, b) = (dx - 0.5 * separation, dx + 0.5 * separation);
                self.norm
                    * (bump_shape(a * a + dy * dy, sigma, cutoff) + bump_shape(b * b + dy * dy, sigma, cutoff))
            }
            DensityProfile::UniformDisk { radius, .. } => {
                if dx * dx + dy * dy <= radius * radius {
                    self.norm
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mass(&self) -> f64 {
        self.profile.mass()
    }

    pub fn center(&self) -> [f64; 2] {
        self.profile.center()
    }

    pub fn support_radius(&self) -> f64 {
        self.profile.support_radius()
    }
}

/// One additive piece of an initial velocity field, relative to the
/// profile center `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityTerm {
    Constant { value: [f64; 2] },
    /// `-delta (x - c)`
    LinearCompression { delta: f64 },
    /// `omega (-(x2 - c2), x1 - c1)`; vanishes in 1D.
    RigidRotation { omega: f64 },
    /// `(rate (x2 - c2), 0)`; vanishes in 1D.
    Shear { rate: f64 },
    /// Radial `-a sin(pi r / w) (x - c) / r` for `r <= w`; in 1D
    /// `-a sin(pi (x - c) / w)` for `|x - c| <= w`.
    BumpCompression { amplitude: f64, half_width: f64 },
}

/// Smooth radial cutoff: 1 for `r <= inner`, 0 for `r >= outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub inner: f64,
    pub outer: f64,
}

fn smooth_zero(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else {
        let f = (-1.0 / t).exp();
        (f, f / (t * t))
    }
}

impl Window {
    /// Window value and radial derivative.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.inner {
            return (1.0, 0.0);
        }
        if r >= self.outer {
            return (0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let t = (r - self.inner) / w;
        let (a, da) = smooth_zero(1.0 - t);
        let (b, db) = smooth_zero(t);
        let s = a / (a + b);
        let ds = (-da * b - a * db) / ((a + b) * (a + b));
        (s, ds / w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VelocityProfile {
    #[serde(default)]
    pub terms: Vec<VelocityTerm>,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub center: [f64; 2],
}

impl VelocityProfile {
    pub fn constant(value: [f64; 2]) -> Self {
        VelocityProfile { terms: vec![VelocityTerm::Constant { value }], ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.window {
            if !(w.inner >= 0.0 && w.outer > w.inner && w.outer.is_finite()) {
                return Err(FlockError::domain(format!("window needs 0 <= inner < outer, got {w:?}")));
            }
        }
        for t in &self.terms {
            if let VelocityTerm::BumpCompression { half_width, .. } = t {
                if !(*half_width > 0.0 && half_width.is_finite()) {
                    return Err(FlockError::domain(format!("half_width must be positive, got {half_width}")));
                }
            }
        }
        Ok(())
    }

    /// Sum of the constant terms: the velocity outside the window.
    pub fn far_field(&self) -> [f64; 2] {
        self.terms.iter().fold([0.0; 2], |acc, t| match t {
            VelocityTerm::Constant { value } => [acc[0] + value[0], acc[1] + value[1]],
            _ => acc,
        })
    }

    /// Velocity and its derivative in 1D.
    pub fn eval_1d(&self, x: f64) -> (f64, f64) {
        let dx = x - self.center[0];
        let mut base = 0.0;
        let (mut g, mut dg) = (0.0, 0.0);
        for t in &self.terms {
            match *t {
                VelocityTerm::Constant { value } => base += value[0],
                VelocityTerm::LinearCompression { delta } => {
                    g -= delta * dx;
                    dg -= delta;
                }
                VelocityTerm::RigidRotation { .. } | VelocityTerm::Shear { .. } => {}
                VelocityTerm::BumpCompression { amplitude, half_width } => {
                    if dx.abs() <= half_width {
                        let k = PI / half_width;
                        g -= amplitude * (k * dx).sin();
                        dg -= amplitude * k * (k * dx).cos();
                    }
                }
            }
        }
        match self.window {
            Some(w) => {
                let (wv, dw) = w.eval(dx.abs());
                (base + wv * g, wv * dg + dw * dx.signum() * g)
            }
            None => (base + g, dg),
        }
    }

    pub fn eval_2d(&self, x: f64, y: f64) -> [f64; 2] {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let r = dx.hypot(dy);
        let mut base = [0.0; 2];
        let mut g = [0.0; 2];
        for t in &self.terms {
            match *t {
                VelocityTerm::Constant { value } => {
                    base[0] += value[0];
                    base[1] += value[1];
                }
                VelocityTerm::LinearCompression { delta } => {
                    g[0] -= delta * dx;
                    g[1] -= delta * dy;
                }
                VelocityTerm::RigidRotation { omega } => {
                    g[0] -= omega * dy;
                    g[1] += omega * dx;
                }
                VelocityTerm::Shear { rate } => g[0] += rate * dy,
                VelocityTerm::BumpCompression { amplitude, half_width } => {
                    if r <= half_width && r > 0.0 {
                        let s = amplitude * (PI * r / half_width).sin() / r;
                        g[0] -= s * dx;
                        g[1] -= s * dy;
                    }
                }
            }
        }
        let w = self.window.map_or(1.0, |w| w.eval(r).0);
        [base[0] + w * g[0], base[1] + w * g[1]]
    }
}
