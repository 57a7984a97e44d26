//! Eulerian solver for the 2D CS/MT alignment system on a uniform grid.
//!
//! The density is advanced in conservative form with a first-order local
//! Lax-Friedrichs flux and zero flux through the domain boundary; the
//! velocity in primitive form with first-order upwind advection plus the
//! nonlocal alignment force, so it stays defined in vacuum. Time stepping is
//! the two-stage SSP Runge-Kutta scheme and the outermost ring of cells is
//! pinned to the far-field velocity after every stage.
//!
//! Cell `(i, j)` has center `(-L/2 + (i + 1/2) dx, -L/2 + (j + 1/2) dx)` and
//! row-major index `j n + i`.

mod checkpoint;
mod convolve;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use convolve::Convolver;

use crate::error::{FlockError, Result};
use crate::geometry;
use crate::kernels::{check_variation_bound, InfluenceKernel, VariationCheck};
use crate::matrixcalc::{decompose_unchecked, e_from_divergence, VelGradDecomp};
use crate::profiles::{DensityProfile, VelocityProfile};
use crate::verdict::{BlowupReason, Location, Outcome, ThresholdVerdict, Verdict};
use crate::Model;

/// Square computational domain `[-L/2, L/2]^2` with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub l: f64,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 4 {
            return Err(FlockError::domain(format!("grid needs at least 4 cells per axis, got {n}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(FlockError::domain(format!("domain side must be positive, got {l}")));
        }
        Ok(Grid { n, l })
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        -0.5 * self.l + (i as f64 + 0.5) * self.dx()
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn is_ring(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    fn location(&self, k: usize) -> Location {
        let (i, j) = (k % self.n, k / self.n);
        Location::Cell { i, j, x: self.center(i), y: self.center(j) }
    }
}

/// Numerical parameters of the grid solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    /// Courant number for `dt (max|u1| + max|u2|) / dx`.
    pub cfl: f64,
    pub dt_max: f64,
    /// A run is declared blown up when the largest velocity-gradient norm
    /// on the support exceeds this.
    pub grad_cap: f64,
    /// Support threshold `rho > rho_tol_rel * m0 / L^2`.
    pub rho_tol_rel: f64,
    /// MT division floor `phi * rho > rho_floor_rel * m0 / L^2` on the mask.
    pub rho_floor_rel: f64,
    pub output_interval: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            cfl: 0.4,
            dt_max: 0.05,
            grad_cap: 1e3,
            rho_tol_rel: 1e-8,
            rho_floor_rel: 1e-12,
            output_interval: 0.1,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.cfl > 0.0
            && self.cfl <= 0.5
            && self.dt_max > 0.0
            && self.grad_cap > 0.0
            && self.rho_tol_rel > 0.0
            && self.rho_floor_rel > 0.0
            && self.output_interval > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FlockError::domain(format!("invalid grid parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridState2D {
    pub model: Model,
    pub kernel: InfluenceKernel,
    pub grid: Grid,
    pub t: f64,
    pub rho: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub u_inf: [f64; 2],
    pub params: GridParams,
    /// Reference mass used to scale the support and vacuum thresholds.
    m_ref: f64,
    /// Radius of the alignment mask around the support (`D_inf`); the
    /// whole grid when unset.
    mask_radius: Option<f64>,
    mask: Vec<bool>,
    conv: Arc<Convolver>,
}

impl GridState2D {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: Model,
        kernel: InfluenceKernel,
        grid: Grid,
        rho: Vec<f64>,
        u1: Vec<f64>,
        u2: Vec<f64>,
        u_inf: [f64; 2],
        params: GridParams,
    ) -> Result<Self> {
        kernel.validate()?;
        params.validate()?;
        let cells = grid.cells();
        if rho.len() != cells || u1.len() != cells || u2.len() != cells {
            return Err(FlockError::Shape(format!(
                "grid has {cells} cells, fields have {}, {}, {}",
                rho.len(),
                u1.len(),
                u2.len()
            )));
        }
        if rho.iter().chain(&u1).chain(&u2).chain(&u_inf).any(|v| !v.is_finite()) {
            return Err(FlockError::NonFinite("initial grid fields".into()));
        }
        if rho.iter().any(|&r| r < 0.0) {
            return Err(FlockError::domain("density must be non-negative"));
        }
        let dx = grid.dx();
        let m_ref = rho.iter().sum::<f64>() * dx * dx;
        if !(m_ref > 0.0) {
            return Err(FlockError::domain("density has zero mass"));
        }
        let conv = Arc::new(Convolver::new(&kernel, grid.n, dx));
        let mut s = GridState2D {
            model,
            kernel,
            grid,
            t: 0.0,
            rho,
            u1,
            u2,
            u_inf,
            params,
            m_ref,
            mask_radius: None,
            mask: vec![true; cells],
            conv,
        };
        pin_ring(&grid, &mut s.u1, &mut s.u2, u_inf);
        Ok(s)
    }

    /// Samples `rho0` and `u0` at cell centers.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        model: Model,
        kernel: InfluenceKernel,
        grid: Grid,
        rho0: impl Fn(f64, f64) -> f64,
        u0: impl Fn(f64, f64) -> [f64; 2],
        u_inf: [f64; 2],
        params: GridParams,
    ) -> Result<Self> {
        let n = grid.n;
        let mut rho = vec![0.0; n * n];
        let mut u1 = vec![0.0; n * n];
        let mut u2 = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (grid.center(i), grid.center(j));
                let k = j * n + i;
                rho[k] = rho0(x, y);
                let u = u0(x, y);
                u1[k] = u[0];
                u2[k] = u[1];
            }
        }
        GridState2D::new(model, kernel, grid, rho, u1, u2, u_inf, params)
    }

    /// Samples named profiles, rescaling the density so the discrete mass
    /// equals the profile mass. The far-field velocity is the constant part
    /// of the velocity profile.
    pub fn from_profiles(
        model: Model,
        kernel: InfluenceKernel,
        grid: Grid,
        density: &DensityProfile,
        velocity: &VelocityProfile,
        params: GridParams,
    ) -> Result<Self> {
        velocity.validate()?;
        let plane = density.plane()?;
        let mut s = GridState2D::from_fn(
            model,
            kernel,
            grid,
            |x, y| plane.eval(x, y),
            |x, y| velocity.eval_2d(x, y),
            velocity.far_field(),
            params,
        )?;
        let scale = density.mass() / s.mass();
        for r in &mut s.rho {
            *r *= scale;
        }
        s.m_ref = density.mass();
        Ok(s)
    }

    pub fn convolver(&self) -> &Convolver {
        &self.conv
    }

    pub fn rho_tol(&self) -> f64 {
        self.params.rho_tol_rel * self.m_ref / (self.grid.l * self.grid.l)
    }

    pub fn rho_floor(&self) -> f64 {
        self.params.rho_floor_rel * self.m_ref / (self.grid.l * self.grid.l)
    }

    pub fn mass(&self) -> f64 {
        let dx = self.grid.dx();
        self.rho.iter().sum::<f64>() * dx * dx
    }

    pub fn momentum(&self) -> [f64; 2] {
        let dx = self.grid.dx();
        let mut p = [0.0; 2];
        for k in 0..self.rho.len() {
            p[0] += self.rho[k] * self.u1[k];
            p[1] += self.rho[k] * self.u2[k];
        }
        [p[0] * dx * dx, p[1] * dx * dx]
    }

    /// Interior cells with `rho > rho_tol`.
    pub fn support(&self) -> Vec<bool> {
        let tol = self.rho_tol();
        let n = self.grid.n;
        (0..n * n).map(|k| !self.grid.is_ring(k % n, k / n) && self.rho[k] > tol).collect()
    }

    /// `(D, V)` over the support.
    pub fn diameters(&self) -> Result<(f64, f64)> {
        let support = self.support();
        if !support.iter().any(|&s| s) {
            return Err(FlockError::EmptySupport);
        }
        Ok(self.diameters_on(&support))
    }

    fn diameters_on(&self, support: &[bool]) -> (f64, f64) {
        let n = self.grid.n;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (k, _) in support.iter().enumerate().filter(|(_, s)| **s) {
            xs.push([self.grid.center(k % n), self.grid.center(k / n)]);
            vs.push([self.u1[k], self.u2[k]]);
        }
        (geometry::diameter_2d(&xs), geometry::diameter_2d(&vs))
    }

    /// Cells within `radius` of the support (the support included).
    pub fn neighborhood(&self, support: &[bool], radius: f64) -> Vec<bool> {
        let dist = geometry::distance_transform(support, self.grid.n);
        let r = radius / self.grid.dx();
        dist.iter().map(|&d| d < r || d == 0.0).collect()
    }

    /// Sets the alignment-mask radius (`D_inf`) and recomputes the mask.
    pub fn set_mask_radius(&mut self, radius: Option<f64>) {
        self.mask_radius = radius;
        self.update_mask();
    }

    pub fn mask_radius(&self) -> Option<f64> {
        self.mask_radius
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn update_mask(&mut self) {
        self.mask = match self.mask_radius {
            Some(r) => {
                let tol = self.rho_tol();
                let support: Vec<bool> = self.rho.iter().map(|&v| v > tol).collect();
                self.neighborhood(&support, r)
            }
            None => vec![true; self.grid.cells()],
        };
    }

    /// `phi * rho` on the grid.
    pub fn conv_density(&self) -> Vec<f64> {
        self.conv.convolve(&self.rho)
    }

    /// Alignment force of the current fields.
    pub fn alignment_force(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.force_of(&self.rho, &self.u1, &self.u2)
    }

    fn force_of(&self, rho: &[f64], u1: &[f64], u2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cells = rho.len();
        let m1: Vec<f64> = (0..cells).map(|k| rho[k] * u1[k]).collect();
        let m2: Vec<f64> = (0..cells).map(|k| rho[k] * u2[k]).collect();
        let (a1, a2) = self.conv.convolve_pair(&m1, &m2);
        let h = self.conv.convolve(rho);
        let mut f1 = vec![0.0; cells];
        let mut f2 = vec![0.0; cells];
        match self.model {
            Model::Cs => {
                for k in 0..cells {
                    f1[k] = a1[k] - u1[k] * h[k];
                    f2[k] = a2[k] - u2[k] * h[k];
                }
            }
            Model::Mt => {
                let floor = self.rho_floor();
                for k in (0..cells).filter(|&k| self.mask[k]) {
                    if !(h[k] > floor) {
                        return Err(FlockError::VacuumDivision { index: k, value: h[k], floor });
                    }
                    f1[k] = a1[k] / h[k] - u1[k];
                    f2[k] = a2[k] / h[k] - u2[k];
                }
            }
        }
        Ok((f1, f2))
    }

    fn rates(&self, rho: &[f64], u1: &[f64], u2: &[f64]) -> Result<[Vec<f64>; 3]> {
        let n = self.grid.n;
        let inv_dx = 1.0 / self.grid.dx();
        let cells = n * n;
        let mut drho = vec![0.0; cells];
        // Local Lax-Friedrichs fluxes through interior faces.
        for j in 0..n {
            for i in 0..n - 1 {
                let (l, r) = (j * n + i, j * n + i + 1);
                let alpha = u1[l].abs().max(u1[r].abs());
                let f = 0.5 * (rho[l] * u1[l] + rho[r] * u1[r]) - 0.5 * alpha * (rho[r] - rho[l]);
                drho[l] -= f * inv_dx;
                drho[r] += f * inv_dx;
            }
        }
        for j in 0..n - 1 {
            for i in 0..n {
                let (b, t) = (j * n + i, (j + 1) * n + i);
                let alpha = u2[b].abs().max(u2[t].abs());
                let f = 0.5 * (rho[b] * u2[b] + rho[t] * u2[t]) - 0.5 * alpha * (rho[t] - rho[b]);
                drho[b] -= f * inv_dx;
                drho[t] += f * inv_dx;
            }
        }
        let (f1, f2) = self.force_of(rho, u1, u2)?;
        let mut du1 = vec![0.0; cells];
        let mut du2 = vec![0.0; cells];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                let (a, b) = (u1[k], u2[k]);
                let upwind = |f: &[f64]| -> f64 {
                    let dxf = if a > 0.0 { f[k] - f[k - 1] } else { f[k + 1] - f[k] };
                    let dyf = if b > 0.0 { f[k] - f[k - n] } else { f[k + n] - f[k] };
                    (a * dxf + b * dyf) * inv_dx
                };
                du1[k] = -upwind(u1) + f1[k];
                du2[k] = -upwind(u2) + f2[k];
            }
        }
        Ok([drho, du1, du2])
    }

    /// Largest step allowed by the CFL condition.
    pub fn cfl_limit(&self) -> f64 {
        let m1 = self.u1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m2 = self.u2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.params.cfl * self.grid.dx() / (m1 + m2 + 1e-12)
    }

    /// One SSP-RK2 step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let limit = self.cfl_limit();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(FlockError::StepSize { dt, limit });
        }
        let [r0, a0, b0] = self.rates(&self.rho, &self.u1, &self.u2)?;
        let axpy = |y: &[f64], k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + dt * k).collect() };
        let rho1 = axpy(&self.rho, &r0);
        let mut u1s = axpy(&self.u1, &a0);
        let mut u2s = axpy(&self.u2, &b0);
        pin_ring(&self.grid, &mut u1s, &mut u2s, self.u_inf);
        let [r1, a1, b1] = self.rates(&rho1, &u1s, &u2s)?;
        let avg = |y0: &[f64], y1: &[f64], k: &[f64]| -> Vec<f64> {
            (0..y0.len()).map(|i| 0.5 * y0[i] + 0.5 * (y1[i] + dt * k[i])).collect()
        };
        self.rho = avg(&self.rho, &rho1, &r1);
        self.u1 = avg(&self.u1, &u1s, &a1);
        self.u2 = avg(&self.u2, &u2s, &b1);
        pin_ring(&self.grid, &mut self.u1, &mut self.u2, self.u_inf);
        self.t += dt;
        Ok(())
    }

    /// Velocity gradient at every cell: central differences inside, one-sided
    /// on the outer ring.
    pub fn gradient_field(&self) -> Vec<VelGradDecomp> {
        let n = self.grid.n;
        let dx = self.grid.dx();
        let diff = |f: &[f64], k: usize, lo: bool, hi: bool, stride: usize| -> f64 {
            match (lo, hi) {
                (true, true) => (f[k + stride] - f[k - stride]) / (2.0 * dx),
                (false, _) => (f[k + stride] - f[k]) / dx,
                (_, false) => (f[k] - f[k - stride]) / dx,
            }
        };
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                let (xl, xh, yl, yh) = (i > 0, i + 1 < n, j > 0, j + 1 < n);
                let m11 = diff(&self.u1, k, xl, xh, 1);
                let m12 = diff(&self.u1, k, yl, yh, n);
                let m21 = diff(&self.u2, k, xl, xh, 1);
                let m22 = diff(&self.u2, k, yl, yh, n);
                out.push(decompose_unchecked(m11, m12, m21, m22));
            }
        }
        out
    }

    fn max_grad_on(&self, support: &[bool]) -> f64 {
        let n = self.grid.n;
        let dx = self.grid.dx();
        let mut best = 0.0f64;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                if !support[k] {
                    continue;
                }
                let m11 = self.u1[k + 1] - self.u1[k - 1];
                let m12 = self.u1[k + n] - self.u1[k - n];
                let m21 = self.u2[k + 1] - self.u2[k - 1];
                let m22 = self.u2[k + n] - self.u2[k - n];
                best = best.max((m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22).sqrt() / (2.0 * dx));
            }
        }
        best
    }

    pub fn diagnostics(&self) -> Result<DiagRow> {
        let support = self.support();
        if !support.iter().any(|&s| s) {
            return Err(FlockError::EmptySupport);
        }
        let (d, v) = self.diameters_on(&support);
        let grads = self.gradient_field();
        let h = self.conv_density();
        let mut row = DiagRow {
            t: self.t,
            v,
            d,
            min_e: f64::INFINITY,
            max_e: f64::NEG_INFINITY,
            max_eta_s: 0.0,
            max_abs_omega: 0.0,
            max_abs_div: 0.0,
            max_grad_norm: 0.0,
            mass: self.mass(),
            momentum1: 0.0,
            momentum2: 0.0,
        };
        [row.momentum1, row.momentum2] = self.momentum();
        for k in (0..support.len()).filter(|&k| support[k]) {
            let g = &grads[k];
            let e = e_from_divergence(g.d, h[k], self.model);
            row.min_e = row.min_e.min(e);
            row.max_e = row.max_e.max(e);
            row.max_eta_s = row.max_eta_s.max(g.eta_s);
            row.max_abs_omega = row.max_abs_omega.max(g.omega.abs());
            row.max_abs_div = row.max_abs_div.max(g.d.abs());
            row.max_grad_norm = row.max_grad_norm.max(g.norm());
        }
        Ok(row)
    }

    /// Variation check at the current support: `(D0, V0, check)`, with the
    /// check absent when no finite flock diameter exists.
    pub fn variation(&self) -> Result<(f64, f64, Option<VariationCheck>)> {
        let (d0, v0) = self.diameters()?;
        match check_variation_bound(&self.kernel, self.model, self.mass(), d0, v0) {
            Ok(c) => Ok((d0, v0, Some(c))),
            Err(FlockError::NoFiniteFlockDiameter { .. }) => Ok((d0, v0, None)),
            Err(e) => Err(e),
        }
    }

    /// Evaluates the 2D critical-threshold conditions on the initial state.
    ///
    /// Conditions are checked on the support plus its `D_inf`-neighborhood
    /// (the whole interior when `D_inf` does not exist); the divergence
    /// margin over the whole interior is reported alongside.
    pub fn threshold_report(&self) -> Result<ThresholdVerdict> {
        let (_, _, variation) = self.variation()?;
        let n = self.grid.n;
        let support = self.support();
        let interior: Vec<bool> = (0..n * n).map(|k| !self.grid.is_ring(k % n, k / n)).collect();
        let mask: Vec<bool> = match variation {
            Some(v) => self.neighborhood(&support, v.d_inf).iter().zip(&interior).map(|(a, b)| *a && *b).collect(),
            None => interior.clone(),
        };
        let grads = self.gradient_field();
        let h = self.conv_density();
        let mut div = (f64::INFINITY, 0usize);
        let mut global = f64::INFINITY;
        let mut eta = (0.0f64, 0usize);
        for k in 0..n * n {
            if !interior[k] {
                continue;
            }
            let e = e_from_divergence(grads[k].d, h[k], self.model);
            global = global.min(e);
            if mask[k] {
                if e < div.0 {
                    div = (e, k);
                }
                if grads[k].eta_s > eta.0 {
                    eta = (grads[k].eta_s, k);
                }
            }
        }
        let gap_bound = match self.model {
            Model::Cs => variation.map(|v| 0.5 * self.mass() * v.phi_inf),
            Model::Mt => Some(0.5),
        };
        let gap_margin = gap_bound.map(|b| b - eta.0);
        let var_ok = variation.is_some_and(|v| v.holds);
        let (verdict, violation) = if div.0 < 0.0 {
            (Verdict::SuperCritical, Some(self.grid.location(div.1)))
        } else if gap_margin.is_some_and(|g| g < 0.0) {
            (Verdict::SuperCritical, Some(self.grid.location(eta.1)))
        } else if gap_margin.is_some() && var_ok {
            (Verdict::SubCritical, None)
        } else {
            (Verdict::Indeterminate, None)
        };
        Ok(ThresholdVerdict {
            model: self.model,
            verdict,
            divergence_margin: div.0,
            divergence_argmin: Some(self.grid.location(div.1)),
            gap_margin,
            max_eta_s0: Some(eta.0),
            variation_slack: variation.map(|v| v.margin),
            violation,
            global_divergence_margin: Some(global),
            d_inf: variation.map(|v| v.d_inf),
            phi_inf: variation.map(|v| v.phi_inf),
        })
    }

    /// Runs to `t_end` with CFL-limited steps, recording diagnostics every
    /// `params.output_interval` and density snapshots every
    /// `snapshot_interval` when given.
    pub fn run(&mut self, t_end: f64, snapshot_interval: Option<f64>) -> Result<Run2D> {
        if !(t_end > self.t) {
            return Err(FlockError::domain(format!("t_end = {t_end} must exceed the current time {}", self.t)));
        }
        let interval = self.params.output_interval;
        let mut rows = vec![self.diagnostics()?];
        let mut snapshots = Vec::new();
        let mut next_snap = self.t;
        let take_snapshot = |s: &Self, next_snap: &mut f64, snaps: &mut Vec<Snapshot>| {
            if let Some(si) = snapshot_interval {
                if s.t >= *next_snap - 1e-9 {
                    snaps.push(Snapshot { t: s.t, rho: s.rho.clone() });
                    while *next_snap <= s.t + 1e-9 {
                        *next_snap += si;
                    }
                }
            }
        };
        take_snapshot(self, &mut next_snap, &mut snapshots);
        let mut next_out = self.t + interval;
        let outcome = loop {
            if self.t >= t_end - 1e-12 {
                break Outcome::Completed;
            }
            let limit = self.cfl_limit();
            if !limit.is_finite() {
                break Outcome::BlewUp { t: self.t, reason: BlowupReason::NonFinite };
            }
            let dt = limit.min(self.params.dt_max).min(next_out - self.t).min(t_end - self.t);
            self.step(dt)?;
            if self.rho.iter().chain(&self.u1).chain(&self.u2).any(|v| !v.is_finite()) {
                break Outcome::BlewUp { t: self.t, reason: BlowupReason::NonFinite };
            }
            let support = self.support();
            if self.max_grad_on(&support) > self.params.grad_cap {
                rows.push(self.diagnostics()?);
                break Outcome::BlewUp { t: self.t, reason: BlowupReason::GradientCap };
            }
            if self.t >= next_out - 1e-12 {
                rows.push(self.diagnostics()?);
                self.update_mask();
                next_out += interval;
            }
            take_snapshot(self, &mut next_snap, &mut snapshots);
        };
        if rows.last().is_none_or(|r| r.t != self.t) {
            rows.push(self.diagnostics()?);
        }
        Ok(Run2D { rows, outcome, snapshots })
    }
}

fn pin_ring(grid: &Grid, u1: &mut [f64], u2: &mut [f64], u_inf: [f64; 2]) {
    let n = grid.n;
    for i in 0..n {
        for k in [i, (n - 1) * n + i, i * n, i * n + n - 1] {
            u1[k] = u_inf[0];
            u2[k] = u_inf[1];
        }
    }
}

/// One diagnostics record, computed over the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub min_e: f64,
    pub max_e: f64,
    #[serde(rename = "max_eta_S")]
    pub max_eta_s: f64,
    pub max_abs_omega: f64,
    pub max_abs_div: f64,
    pub max_grad_norm: f64,
    pub mass: f64,
    pub momentum1: f64,
    pub momentum2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run2D {
    pub rows: Vec<DiagRow>,
    pub outcome: Outcome,
    pub snapshots: Vec<Snapshot>,
}

impl Run2D {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
