//! Lagrangian particle solver for the 1D CS/MT alignment system.
//!
//! Each particle carries a mass `m_i`, position `x_i`, velocity `u_i` and
//! the velocity gradient `d_i = u_x(x_i)`. With the particle sums
//!
//! ```text
//! h_i = sum_j m_j phi_ij             (phi * rho, self term included)
//! a_i = sum_j m_j phi_ij u_j         (phi * (rho u))
//! g_i = sum_j m_j phi'_ij s_ij       (d/dx of phi * rho), s_ij = sgn(x_i - x_j)
//! b_i = sum_j m_j phi'_ij s_ij u_j   (d/dx of phi * (rho u))
//! ```
//!
//! the system is `x' = u` and
//!
//! ```text
//! CS:  u' = a - u h,      d' = -d^2 - h d + (b - u g)
//! MT:  u' = a / h - u,    d' = -d^2 - d + (b h - a g) / h^2
//! ```
//!
//! Since `h_i' = -(b_i - u_i g_i)`, the CS variable `e = d + h` obeys
//! `e' = e (h - e)` exactly at the semi-discrete level.

use std::io::Write;

use serde::Serialize;

use crate::error::{FlockError, Result};
use crate::geometry;
use crate::kernels::{check_variation_bound, InfluenceKernel, RadialKernel, VariationBound};
use crate::profiles::{DensityProfile, VelocityProfile};
use crate::quadrature;
pub use crate::verdict::{BlowupReason, Outcome};
use crate::verdict::{Location, ThresholdVerdict, Verdict};
use crate::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState1D<K = InfluenceKernel> {
    pub model: Model,
    pub kernel: K,
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub m: Vec<f64>,
    pub d: Vec<f64>,
}

/// Time derivatives of a particle state.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs1D {
    pub dx: Vec<f64>,
    pub du: Vec<f64>,
    pub dd: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Sums {
    h: Vec<f64>,
    a: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
    // Pairwise CS alignment sum_j m_j phi_ij (u_j - u_i).
    align: Vec<f64>,
}

fn particle_sums<K: RadialKernel>(kernel: &K, x: &[f64], u: &[f64], m: &[f64]) -> Sums {
    let n = x.len();
    let phi0 = kernel.phi(0.0);
    let mut s = Sums {
        h: m.iter().map(|mi| mi * phi0).collect(),
        a: m.iter().zip(u).map(|(mi, ui)| mi * phi0 * ui).collect(),
        g: vec![0.0; n],
        b: vec![0.0; n],
        align: vec![0.0; n],
    };
    let cutoff = kernel.support_radius().unwrap_or(f64::INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            // Positions are sorted, so r grows with j.
            let r = x[j] - x[i];
            if r > cutoff {
                break;
            }
            let (phi, dphi) = kernel.phi_dphi(r);
            s.h[i] += m[j] * phi;
            s.h[j] += m[i] * phi;
            s.a[i] += m[j] * phi * u[j];
            s.a[j] += m[i] * phi * u[i];
            // s_ij = -1 and s_ji = +1.
            s.g[i] -= m[j] * dphi;
            s.g[j] += m[i] * dphi;
            s.b[i] -= m[j] * dphi * u[j];
            s.b[j] += m[i] * dphi * u[i];
            let du = u[j] - u[i];
            s.align[i] += m[j] * phi * du;
            s.align[j] -= m[i] * phi * du;
        }
    }
    s
}

fn rhs_from(model: Model, sums: &Sums, u: &[f64], d: &[f64]) -> Result<Rhs1D> {
    let n = u.len();
    let mut du = vec![0.0; n];
    let mut dd = vec![0.0; n];
    for i in 0..n {
        let (h, a, g, b) = (sums.h[i], sums.a[i], sums.g[i], sums.b[i]);
        match model {
            Model::Cs => {
                du[i] = sums.align[i];
                dd[i] = -d[i] * d[i] - h * d[i] + (b - u[i] * g);
            }
            Model::Mt => {
                if !(h > 0.0) {
                    return Err(FlockError::VacuumDivision { index: i, value: h, floor: 0.0 });
                }
                du[i] = a / h - u[i];
                dd[i] = -d[i] * d[i] - d[i] + (b * h - a * g) / (h * h);
            }
        }
    }
    Ok(Rhs1D { dx: u.to_vec(), du, dd })
}

impl<K: RadialKernel> ParticleState1D<K> {
    pub fn new(model: Model, kernel: K, x: Vec<f64>, u: Vec<f64>, m: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(FlockError::domain("particle state needs at least one particle"));
        }
        if u.len() != n || m.len() != n || d.len() != n {
            return Err(FlockError::Shape(format!(
                "{n} positions, {} velocities, {} masses, {} gradients",
                u.len(),
                m.len(),
                d.len()
            )));
        }
        if let Some(mi) = m.iter().find(|mi| !(mi.is_finite() && **mi > 0.0)) {
            return Err(FlockError::domain(format!("masses must be positive, got {mi}")));
        }
        if x.iter().chain(&u).chain(&d).any(|v| !v.is_finite()) {
            return Err(FlockError::NonFinite("initial particle state".into()));
        }
        if !is_strictly_increasing(&x) {
            return Err(FlockError::domain("particle positions must be strictly increasing"));
        }
        Ok(ParticleState1D { model, kernel, t: 0.0, x, u, m, d })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.m.iter().sum()
    }

    pub fn momentum(&self) -> f64 {
        self.m.iter().zip(&self.u).map(|(m, u)| m * u).sum()
    }

    /// `(phi * rho)(x) = sum_j m_j phi(|x - x_j|)`.
    pub fn conv_density(&self, x: f64) -> f64 {
        self.x.iter().zip(&self.m).map(|(xj, mj)| mj * self.kernel.phi((x - xj).abs())).sum()
    }

    /// `phi * rho` evaluated at every particle.
    pub fn conv_density_at_particles(&self) -> Vec<f64> {
        particle_sums(&self.kernel, &self.x, &self.u, &self.m).h
    }

    pub fn rhs(&self) -> Result<Rhs1D> {
        let sums = particle_sums(&self.kernel, &self.x, &self.u, &self.m);
        rhs_from(self.model, &sums, &self.u, &self.d)
    }

    /// `e_i = d_i + (phi * rho)(x_i)` (CS) or `d_i + 1` (MT).
    pub fn e_series(&self) -> Vec<f64> {
        match self.model {
            Model::Cs => self.d.iter().zip(self.conv_density_at_particles()).map(|(d, h)| d + h).collect(),
            Model::Mt => self.d.iter().map(|d| d + 1.0).collect(),
        }
    }

    /// `(D, V)`: support and velocity diameters.
    pub fn diameters(&self) -> (f64, f64) {
        (geometry::diameter_1d(&self.x), geometry::diameter_1d(&self.u))
    }

    /// Velocity field reconstructed by piecewise-linear interpolation of
    /// the particle velocities, constant beyond the outermost particles.
    pub fn velocity_at(&self, x: f64) -> f64 {
        let n = self.x.len();
        let k = self.x.partition_point(|&xi| xi <= x);
        if k == 0 {
            return self.u[0];
        }
        if k == n {
            return self.u[n - 1];
        }
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let w = (x - x0) / (x1 - x0);
        (1.0 - w) * self.u[k - 1] + w * self.u[k]
    }

    pub fn diag(&self) -> Diag1D {
        let (d_diam, v) = self.diameters();
        let e = self.e_series();
        Diag1D {
            t: self.t,
            v,
            d: d_diam,
            min_e: e.iter().copied().fold(f64::INFINITY, f64::min),
            min_d: self.d.iter().copied().fold(f64::INFINITY, f64::min),
            mass: self.total_mass(),
            momentum: self.momentum(),
        }
    }

    fn rk4(&self, x: &[f64], u: &[f64], d: &[f64], dt: f64) -> Result<[Vec<f64>; 3]> {
        let model = self.model;
        let eval = |x: &[f64], u: &[f64], d: &[f64]| -> Result<Rhs1D> {
            let sums = particle_sums(&self.kernel, x, u, &self.m);
            rhs_from(model, &sums, u, d)
        };
        let axpy = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + h * k).collect() };
        let k1 = eval(x, u, d)?;
        let k2 = eval(&axpy(x, &k1.dx, 0.5 * dt), &axpy(u, &k1.du, 0.5 * dt), &axpy(d, &k1.dd, 0.5 * dt))?;
        let k3 = eval(&axpy(x, &k2.dx, 0.5 * dt), &axpy(u, &k2.du, 0.5 * dt), &axpy(d, &k2.dd, 0.5 * dt))?;
        let k4 = eval(&axpy(x, &k3.dx, dt), &axpy(u, &k3.du, dt), &axpy(d, &k3.dd, dt))?;
        let combine = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], e: &[f64]| -> Vec<f64> {
            (0..y.len()).map(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i])).collect()
        };
        Ok([
            combine(x, &k1.dx, &k2.dx, &k3.dx, &k4.dx),
            combine(u, &k1.du, &k2.du, &k3.du, &k4.du),
            combine(d, &k1.dd, &k2.dd, &k3.dd, &k4.dd),
        ])
    }

    /// One fixed classical RK4 step (no error control or blowup checks).
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let [x, u, d] = self.rk4(&self.x, &self.u, &self.d, dt)?;
        self.x = x;
        self.u = u;
        self.d = d;
        self.t += dt;
        Ok(())
    }

    /// Advances adaptively to `t_target`, stopping early on blowup.
    ///
    /// Each accepted step is reported to `on_step`.
    pub fn advance_to(
        &mut self,
        t_target: f64,
        ctrl: &StepControl,
        mut on_step: impl FnMut(&Self),
    ) -> Result<Outcome> {
        ctrl.validate()?;
        let mut dt = ctrl.dt_initial.min(ctrl.dt_max);
        while self.t < t_target {
            if let Some(reason) = self.blowup_reason(ctrl) {
                return Ok(Outcome::BlewUp { t: self.t, reason });
            }
            let h = dt.min(t_target - self.t);
            let full = self.rk4(&self.x, &self.u, &self.d, h);
            let half = self
                .rk4(&self.x, &self.u, &self.d, 0.5 * h)
                .and_then(|[x, u, d]| self.rk4(&x, &u, &d, 0.5 * h));
            let (full, half) = match (full, half) {
                (Ok(f), Ok(hf)) => (f, hf),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let mut err = 0.0f64;
            for c in 0..3 {
                for (a, b) in full[c].iter().zip(&half[c]) {
                    let scale = ctrl.atol + ctrl.rtol * b.abs().max(a.abs());
                    let e = (a - b).abs() / 15.0 / scale;
                    err = if e.is_finite() { err.max(e) } else { f64::INFINITY };
                }
            }
            if err <= 1.0 {
                let [x, u, d] = half;
                self.x = x;
                self.u = u;
                self.d = d;
                self.t = if h == t_target - self.t { t_target } else { self.t + h };
                on_step(self);
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
            dt = (h * factor).min(ctrl.dt_max);
            if dt < ctrl.dt_min {
                return Ok(Outcome::BlewUp { t: self.t, reason: BlowupReason::StepCollapse });
            }
        }
        match self.blowup_reason(ctrl) {
            Some(reason) => Ok(Outcome::BlewUp { t: self.t, reason }),
            None => Ok(Outcome::Completed),
        }
    }

    fn blowup_reason(&self, ctrl: &StepControl) -> Option<BlowupReason> {
        if self.d.iter().any(|&d| d < -1.0 / ctrl.eps_blow) {
            Some(BlowupReason::GradientBlowup)
        } else if !is_strictly_increasing(&self.x) {
            Some(BlowupReason::ParticleCrossing)
        } else {
            None
        }
    }

    /// Runs to `t_end`, recording diagnostics initially, at every
    /// `ctrl.output_interval` (every accepted step when zero) and at the end.
    pub fn run(&mut self, t_end: f64, ctrl: &StepControl) -> Result<Run1D> {
        if !(t_end > self.t) {
            return Err(FlockError::domain(format!("t_end = {t_end} must exceed the current time {}", self.t)));
        }
        let mut rows = vec![self.diag()];
        let interval = ctrl.output_interval;
        let mut next = self.t + interval;
        let outcome = self.advance_to(t_end, ctrl, |s| {
            if interval <= 0.0 || s.t >= next - 1e-12 {
                rows.push(s.diag());
                while interval > 0.0 && next <= s.t + 1e-12 {
                    next += interval;
                }
            }
        })?;
        if rows.last().is_none_or(|r| r.t != self.t) {
            rows.push(self.diag());
        }
        Ok(Run1D { rows, outcome })
    }

    pub fn write_snapshot_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "x", "u", "m", "d"])?;
        for i in 0..self.len() {
            wtr.write_record(&[
                i.to_string(),
                self.x[i].to_string(),
                self.u[i].to_string(),
                self.m[i].to_string(),
                self.d[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl ParticleState1D<InfluenceKernel> {
    /// Equal-mass particles at the midpoint mass quantiles of `rho0`, with
    /// `u = u0(x)` and `d = u0'(x)`.
    pub fn from_profiles(
        model: Model,
        kernel: InfluenceKernel,
        density: &DensityProfile,
        velocity: &VelocityProfile,
        n: usize,
    ) -> Result<Self> {
        kernel.validate()?;
        velocity.validate()?;
        let x = density.line()?.midpoint_quantiles(n)?;
        ParticleState1D::from_positions(model, kernel, x, density.mass(), velocity)
    }
}

impl<K: RadialKernel> ParticleState1D<K> {
    /// Equal-mass particles at the given positions sampling `u0`.
    pub fn from_positions(model: Model, kernel: K, x: Vec<f64>, mass: f64, velocity: &VelocityProfile) -> Result<Self> {
        let n = x.len();
        let (u, d): (Vec<f64>, Vec<f64>) = x.iter().map(|&xi| velocity.eval_1d(xi)).unzip();
        ParticleState1D::new(model, kernel, x, u, vec![mass / n.max(1) as f64; n], d)
    }
}

fn is_strictly_increasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// Adaptive step-doubling RK4 control and blowup thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Blowup is declared once some `d_i < -1 / eps_blow`.
    pub eps_blow: f64,
    /// Spacing of recorded diagnostics; zero records every accepted step.
    pub output_interval: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            dt_initial: 1e-3,
            dt_max: 0.25,
            dt_min: 1e-10,
            eps_blow: 1e-4,
            output_interval: 0.0,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.dt_initial > 0.0
            && self.dt_max > 0.0
            && self.dt_min > 0.0
            && self.dt_min < self.dt_max
            && self.eps_blow > 0.0
            && self.output_interval >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(FlockError::domain(format!("invalid step control {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diag1D {
    pub t: f64,
    pub v: f64,
    pub d: f64,
    pub min_e: f64,
    pub min_d: f64,
    pub mass: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run1D {
    pub rows: Vec<Diag1D>,
    pub outcome: Outcome,
}

impl Run1D {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "V", "D", "min_e", "min_d", "mass", "momentum"])?;
        for r in &self.rows {
            wtr.write_record(
                [r.t, r.v, r.d, r.min_e, r.min_d, r.mass, r.momentum].iter().map(|v| v.to_string()),
            )?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Evaluates the 1D critical threshold at the initial state.
///
/// CS is sharp: sub-critical iff `min_i (d_i + (phi * rho)(x_i)) >= 0`.
/// MT additionally requires the strict 1D variation bound on `V0`; when
/// divergence holds but that bound fails, the verdict is indeterminate.
pub fn classify_threshold_1d(state: &ParticleState1D<InfluenceKernel>) -> Result<ThresholdVerdict> {
    let e = state.e_series();
    let (argmin, margin) = e
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty state");
    let loc = Location::Particle { index: argmin, x: state.x[argmin] };
    let (d0, v0) = state.diameters();
    let m0 = state.total_mass();
    let bound = match state.model {
        Model::Cs => VariationBound::Cs,
        Model::Mt => VariationBound::Mt1d,
    };
    let variation = match check_variation_bound(&state.kernel, bound, m0, d0, v0) {
        Ok(v) => Some(v),
        Err(FlockError::NoFiniteFlockDiameter { .. }) => None,
        Err(e) => return Err(e),
    };
    let divergence_ok = margin >= 0.0;
    let verdict = match state.model {
        Model::Cs => {
            if divergence_ok {
                Verdict::SubCritical
            } else {
                Verdict::SuperCritical
            }
        }
        Model::Mt => match (divergence_ok, variation.is_some_and(|v| v.holds)) {
            (false, _) => Verdict::SuperCritical,
            (true, true) => Verdict::SubCritical,
            (true, false) => Verdict::Indeterminate,
        },
    };
    Ok(ThresholdVerdict {
        model: state.model,
        verdict,
        divergence_margin: margin,
        divergence_argmin: Some(loc),
        gap_margin: None,
        max_eta_s0: None,
        variation_slack: variation.map(|v| v.margin),
        violation: (verdict == Verdict::SuperCritical).then_some(loc),
        global_divergence_margin: None,
        d_inf: variation.map(|v| v.d_inf),
        phi_inf: variation.map(|v| v.phi_inf),
    })
}

/// Result of an empirical threshold bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bisection {
    pub a_star: f64,
    /// Largest amplitude observed to complete.
    pub lo: f64,
    /// Smallest amplitude observed to blow up.
    pub hi: f64,
    /// Number of interior runs (bracket validation excluded).
    pub runs: usize,
}

/// Bisects on the amplitude `a` of a one-parameter family of initial data
/// until the completed/blew-up bracket is narrower than `tol`.
///
/// `outcome(a)` must build and run the state for amplitude `a`.
pub fn bisect_threshold(
    mut outcome: impl FnMut(f64) -> Result<Outcome>,
    a_lo: f64,
    a_hi: f64,
    tol: f64,
) -> Result<Bisection> {
    if !(a_lo < a_hi) {
        return Err(FlockError::Bracket(format!("need a_lo < a_hi, got [{a_lo}, {a_hi}]")));
    }
    if !(tol > 0.0) {
        return Err(FlockError::domain(format!("tolerance must be positive, got {tol}")));
    }
    if outcome(a_lo)?.blew_up() {
        return Err(FlockError::Bracket(format!("lower amplitude {a_lo} blows up")));
    }
    if !outcome(a_hi)?.blew_up() {
        return Err(FlockError::Bracket(format!("upper amplitude {a_hi} does not blow up")));
    }
    let (mut lo, mut hi) = (a_lo, a_hi);
    let mut runs = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        runs += 1;
        if outcome(mid)?.blew_up() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bisection { a_star: 0.5 * (lo + hi), lo, hi, runs })
}

/// Continuum critical amplitude for the CS family `u0 = base + a * shape`:
/// the largest `a` with `base' + a shape' + phi * rho0 >= 0` on the
/// support of `rho0`, with `phi * rho0` evaluated by adaptive quadrature.
pub fn critical_amplitude_1d(
    kernel: &InfluenceKernel,
    density: &DensityProfile,
    base: &VelocityProfile,
    shape: &VelocityProfile,
) -> Result<f64> {
    let rho = density.line()?;
    let (lo, hi) = rho.support();
    let conv = |x: f64| {
        let f = |y: f64| kernel.phi((x - y).abs()) * rho.eval(y);
        quadrature::integrate(f, lo, x, 1e-13) + quadrature::integrate(f, x, hi, 1e-13)
    };
    let ratio = |x: f64| {
        let s = shape.eval_1d(x).1;
        if s < -1e-12 {
            (base.eval_1d(x).1 + conv(x)) / -s
        } else {
            f64::INFINITY
        }
    };
    let samples = 4000;
    let h = (hi - lo) / samples as f64;
    let (mut best_x, mut best) = (f64::NAN, f64::INFINITY);
    for k in 0..=samples {
        let x = lo + k as f64 * h;
        let r = ratio(x);
        if r < best {
            best = r;
            best_x = x;
        }
    }
    if !best.is_finite() {
        return Err(FlockError::domain("velocity shape never compresses on the support"));
    }
    // Golden-section refinement around the best sample.
    let (mut a, mut b) = ((best_x - h).max(lo), (best_x + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if ratio(c) < ratio(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(best.min(ratio(0.5 * (a + b))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::VelocityTerm;

    #[test]
    fn conv_density_examples() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let one = ParticleState1D::new(Model::Cs, k, vec![0.0], vec![0.0], vec![2.0], vec![0.0]).unwrap();
        assert!((one.conv_density(1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let two = ParticleState1D::new(Model::Cs, k, vec![-1.0, 1.0], vec![0.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        assert!((two.conv_density(0.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let h = k.with_horizon(0.5).unwrap();
        let far = ParticleState1D::new(Model::Cs, h, vec![-1.0, 1.0], vec![0.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        assert_eq!(far.conv_density(0.0), 0.0);
    }

    #[test]
    fn constant_velocity_is_translation() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        for model in [Model::Cs, Model::Mt] {
            let s = ParticleState1D::new(model, k, vec![0.0, 0.4, 1.0], vec![0.3; 3], vec![0.5; 3], vec![0.0; 3])
                .unwrap();
            let r = s.rhs().unwrap();
            assert!(r.du.iter().chain(&r.dd).all(|v| v.abs() < 1e-15));
            assert_eq!(r.dx, vec![0.3; 3]);
        }
    }

    #[test]
    fn rejects_unordered_positions() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        assert!(ParticleState1D::new(Model::Cs, k, vec![1.0, 0.0], vec![0.0; 2], vec![1.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn gradient_law_matches_finite_differences_of_the_sums() {
        // d/dt of h_i along the flow must equal -(b_i - u_i g_i).
        let k = InfluenceKernel::exponential(0.8).unwrap();
        let x: Vec<f64> = (0..12).map(|i| -1.0 + 0.17 * i as f64 + 0.01 * (i as f64).sin()).collect();
        let u: Vec<f64> = x.iter().map(|x| (1.3 * x).sin()).collect();
        let s = ParticleState1D::new(Model::Cs, k, x.clone(), u.clone(), vec![0.1; 12], vec![0.0; 12]).unwrap();
        let sums = particle_sums(&k, &x, &u, &s.m);
        let eps = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&u).map(|(x, u)| x + eps * u).collect();
        let xm: Vec<f64> = x.iter().zip(&u).map(|(x, u)| x - eps * u).collect();
        let hp = particle_sums(&k, &xp, &u, &s.m).h;
        let hm = particle_sums(&k, &xm, &u, &s.m).h;
        for i in 0..12 {
            let fd = (hp[i] - hm[i]) / (2.0 * eps);
            assert!((fd + sums.b[i] - u[i] * sums.g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn single_particle_blows_up_at_riccati_time() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let m = 1e-6;
        let mut s = ParticleState1D::new(Model::Cs, k, vec![0.0], vec![0.0], vec![m], vec![-1.0]).unwrap();
        let r = s.rhs().unwrap();
        assert_eq!(r.du, vec![0.0]);
        let out = s.run(5.0, &StepControl::default()).unwrap();
        let t = out.outcome.blowup_time().expect("blowup");
        // Exact: d' = -d^2 - m d blows up at ln(d0 / (d0 + m)) / m.
        let exact = (1.0f64 / (1.0 - m)).ln() / m;
        assert!((t - exact).abs() <= 1e-3, "{t} vs {exact}");
        assert!((t - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn all_to_all_alignment_rate() {
        let k = InfluenceKernel::power_law(0.0).unwrap();
        let x = vec![-3.0, 0.0, 5.0];
        let u = vec![1.0, -0.5, 0.2];
        let m = vec![0.2, 0.5, 0.3];
        let mut s = ParticleState1D::new(Model::Cs, k, x, u.clone(), m.clone(), vec![0.0; 3]).unwrap();
        let ubar: f64 = u.iter().zip(&m).map(|(u, m)| u * m).sum();
        let tight = StepControl { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        assert_eq!(s.run(2.0, &tight).unwrap().outcome, Outcome::Completed);
        for (i, ui) in s.u.iter().enumerate() {
            let exact = ubar + (u[i] - ubar) * (-2.0f64).exp();
            assert!((ui - exact).abs() < 1e-8, "{ui} vs {exact} at t = {}", s.t);
        }
    }

    #[test]
    fn mt_unit_gradient_is_a_fixed_point() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let s = ParticleState1D::new(Model::Mt, k, vec![0.0], vec![0.0], vec![1.0], vec![-1.0]).unwrap();
        assert_eq!(s.rhs().unwrap().dd, vec![0.0]);
    }

    #[test]
    fn classification_examples() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let rho = DensityProfile::GaussianBump { mass: 1.0, sigma: 0.5, cutoff: 3.0, center: [0.0; 2] };
        let rest = ParticleState1D::from_profiles(Model::Cs, k, &rho, &VelocityProfile::default(), 50).unwrap();
        let v = classify_threshold_1d(&rest).unwrap();
        assert_eq!(v.verdict, Verdict::SubCritical);
        let h = rest.conv_density_at_particles();
        assert_eq!(v.divergence_margin, h.iter().copied().fold(f64::INFINITY, f64::min));

        let mut bad = rest.clone();
        bad.d[20] = -h[20] - 0.1;
        let v = classify_threshold_1d(&bad).unwrap();
        assert_eq!(v.verdict, Verdict::SuperCritical);
        assert_eq!(v.violation, Some(Location::Particle { index: 20, x: bad.x[20] }));

        let mut edge = rest.clone();
        for (d, hi) in edge.d.iter_mut().zip(&h) {
            *d = -hi;
        }
        assert_eq!(classify_threshold_1d(&edge).unwrap().verdict, Verdict::SubCritical);
    }

    #[test]
    fn bracket_errors() {
        let sub = |_a: f64| Ok(Outcome::Completed);
        assert!(matches!(bisect_threshold(sub, 0.3, 0.3, 1e-3), Err(FlockError::Bracket(_))));
        assert!(matches!(bisect_threshold(sub, 0.1, 0.3, 1e-3), Err(FlockError::Bracket(_))));
    }

    #[test]
    fn bisection_on_a_step_oracle() {
        let oracle = |a: f64| Ok(if a > 0.6180 { Outcome::BlewUp { t: 1.0, reason: BlowupReason::GradientBlowup } } else { Outcome::Completed });
        let b = bisect_threshold(oracle, 0.0, 2.0, 1e-3).unwrap();
        assert!((b.a_star - 0.618).abs() <= 1e-3);
        assert!(b.runs <= (2.0f64 / 1e-3).log2().ceil() as usize);
        let finer = bisect_threshold(oracle, 0.0, 2.0, 5e-4).unwrap();
        assert!((finer.a_star - b.a_star).abs() <= 1e-3);
    }

    #[test]
    fn velocity_interpolation() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let s = ParticleState1D::new(Model::Cs, k, vec![0.0, 1.0, 3.0], vec![1.0, 3.0, -1.0], vec![1.0; 3], vec![0.0; 3])
            .unwrap();
        assert_eq!(s.velocity_at(-1.0), 1.0);
        assert_eq!(s.velocity_at(0.5), 2.0);
        assert_eq!(s.velocity_at(2.0), 1.0);
        assert_eq!(s.velocity_at(9.0), -1.0);
    }

    #[test]
    fn critical_amplitude_of_linear_compression() {
        // u0 = -a x on a uniform interval: e0 = -a + (phi * rho0)(x), minimized at the edges.
        let k = InfluenceKernel::power_law(0.0).unwrap();
        let rho = DensityProfile::UniformDisk { mass: 0.8, radius: 1.0, center: [0.0; 2] };
        let shape = VelocityProfile { terms: vec![VelocityTerm::LinearCompression { delta: 1.0 }], ..Default::default() };
        let a = critical_amplitude_1d(&k, &rho, &VelocityProfile::default(), &shape).unwrap();
        assert!((a - 0.8).abs() < 1e-10);
    }
}
