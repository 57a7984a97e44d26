//! Agent-based CS/MT alignment dynamics in 1D and 2D.
//!
//! Agent `i` carries position `x_i`, velocity `v_i` and weight `m_i`:
//!
//! ```text
//! x_i' = v_i
//! v_i' = (1 / deg_i) sum_j m_j phi(|x_i - x_j|) (v_j - v_i)
//! ```
//!
//! with `deg_i = 1` for CS (so the rate scales with total mass) and
//! `deg_i = sum_j m_j phi(|x_i - x_j|)` for MT. One-dimensional ensembles
//! store the second coordinate as zero.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FlockError, Result};
use crate::geometry;
use crate::kernels::{InfluenceKernel, RadialKernel};
use crate::profiles::{DensityProfile, VelocityProfile};
use crate::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEnsemble {
    pub dim: usize,
    pub model: Model,
    pub kernel: InfluenceKernel,
    pub t: f64,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Per-record summary of an agent run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentDiag {
    pub t: f64,
    pub d: f64,
    pub v: f64,
    pub mass: f64,
    pub momentum: [f64; 2],
}

impl AgentEnsemble {
    pub fn new(
        dim: usize,
        model: Model,
        kernel: InfluenceKernel,
        positions: Vec<[f64; 2]>,
        velocities: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(FlockError::domain(format!("dimension must be 1 or 2, got {dim}")));
        }
        if positions.len() != velocities.len() || positions.len() != weights.len() {
            return Err(FlockError::Shape(format!(
                "{} positions, {} velocities, {} weights",
                positions.len(),
                velocities.len(),
                weights.len()
            )));
        }
        if positions.is_empty() {
            return Err(FlockError::domain("ensemble needs at least one agent"));
        }
        if let Some(m) = weights.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(FlockError::domain(format!("weights must be positive, got {m}")));
        }
        kernel.validate()?;
        let mut e = AgentEnsemble { dim, model, kernel, t: 0.0, positions, velocities, weights };
        if dim == 1 {
            for p in e.positions.iter_mut().chain(e.velocities.iter_mut()) {
                p[1] = 0.0;
            }
        }
        Ok(e)
    }

    /// Convenience constructor for 1D ensembles.
    pub fn new_1d(model: Model, kernel: InfluenceKernel, x: &[f64], v: &[f64], m: &[f64]) -> Result<Self> {
        Self::new(
            1,
            model,
            kernel,
            x.iter().map(|&x| [x, 0.0]).collect(),
            v.iter().map(|&v| [v, 0.0]).collect(),
            m.to_vec(),
        )
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn momentum(&self) -> [f64; 2] {
        self.weights
            .iter()
            .zip(&self.velocities)
            .fold([0.0; 2], |acc, (m, v)| [acc[0] + m * v[0], acc[1] + m * v[1]])
    }

    /// `(D, V)`: position and velocity diameters.
    pub fn diameters(&self) -> (f64, f64) {
        if self.dim == 1 {
            let xs: Vec<f64> = self.positions.iter().map(|p| p[0]).collect();
            let vs: Vec<f64> = self.velocities.iter().map(|p| p[0]).collect();
            (geometry::diameter_1d(&xs), geometry::diameter_1d(&vs))
        } else {
            (geometry::diameter_2d(&self.positions), geometry::diameter_2d(&self.velocities))
        }
    }

    pub fn diag(&self) -> AgentDiag {
        let (d, v) = self.diameters();
        AgentDiag { t: self.t, d, v, mass: self.total_mass(), momentum: self.momentum() }
    }

    /// Right-hand side `(dx/dt, dv/dt)` at the given configuration.
    pub fn rhs(&self) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let dv = accelerations(self.dim, self.model, &self.kernel, &self.positions, &self.velocities, &self.weights);
        (self.velocities.clone(), dv)
    }

    /// One classical RK4 step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FlockError::domain(format!("time step must be positive, got {dt}")));
        }
        let n = self.len();
        let (x0, v0) = (self.positions.clone(), self.velocities.clone());
        let eval = |x: &[[f64; 2]], v: &[[f64; 2]]| {
            accelerations(self.dim, self.model, &self.kernel, x, v, &self.weights)
        };
        let shifted = |base: &[[f64; 2]], k: &[[f64; 2]], h: f64| -> Vec<[f64; 2]> {
            base.iter().zip(k).map(|(b, k)| [b[0] + h * k[0], b[1] + h * k[1]]).collect()
        };
        let a1 = eval(&x0, &v0);
        let (x2, v2) = (shifted(&x0, &v0, 0.5 * dt), shifted(&v0, &a1, 0.5 * dt));
        let a2 = eval(&x2, &v2);
        let (x3, v3) = (shifted(&x0, &v2, 0.5 * dt), shifted(&v0, &a2, 0.5 * dt));
        let a3 = eval(&x3, &v3);
        let (x4, v4) = (shifted(&x0, &v3, dt), shifted(&v0, &a3, dt));
        let a4 = eval(&x4, &v4);
        for i in 0..n {
            for c in 0..2 {
                self.positions[i][c] = x0[i][c] + dt / 6.0 * (v0[i][c] + 2.0 * v2[i][c] + 2.0 * v3[i][c] + v4[i][c]);
                self.velocities[i][c] = v0[i][c] + dt / 6.0 * (a1[i][c] + 2.0 * a2[i][c] + 2.0 * a3[i][c] + a4[i][c]);
            }
        }
        self.t += dt;
        if self.velocities.iter().chain(&self.positions).any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(FlockError::NonFinite(format!("agent state at t = {}", self.t)));
        }
        Ok(())
    }

    /// Advances to `t_end` with steps of at most `dt`, recording a diagnostic
    /// row initially and after every `record_every` steps and at the end.
    pub fn run(&mut self, t_end: f64, dt: f64, record_every: usize) -> Result<Vec<AgentDiag>> {
        let record_every = record_every.max(1);
        let mut rows = vec![self.diag()];
        let steps = ((t_end - self.t) / dt).ceil().max(0.0) as usize;
        let t_start = self.t;
        for k in 0..steps {
            let target = t_start + (k + 1) as f64 * dt;
            let h = target.min(t_end) - self.t;
            if h <= 0.0 {
                break;
            }
            self.step(h)?;
            if (k + 1) % record_every == 0 {
                rows.push(self.diag());
            }
        }
        if rows.last().is_some_and(|r| r.t != self.t) {
            rows.push(self.diag());
        }
        Ok(rows)
    }

    pub fn write_csv_header<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<()> {
        if self.dim == 1 {
            wtr.write_record(["t", "i", "x", "v"])?;
        } else {
            wtr.write_record(["t", "i", "x1", "x2", "v1", "v2"])?;
        }
        Ok(())
    }

    /// Appends the current snapshot as trajectory rows.
    pub fn write_csv_rows<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<()> {
        for (i, (x, v)) in self.positions.iter().zip(&self.velocities).enumerate() {
            if self.dim == 1 {
                wtr.write_record(&[self.t.to_string(), i.to_string(), x[0].to_string(), v[0].to_string()])?;
            } else {
                wtr.write_record(&[
                    self.t.to_string(),
                    i.to_string(),
                    x[0].to_string(),
                    x[1].to_string(),
                    v[0].to_string(),
                    v[1].to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

fn accelerations<K: RadialKernel>(
    dim: usize,
    model: Model,
    kernel: &K,
    x: &[[f64; 2]],
    v: &[[f64; 2]],
    m: &[f64],
) -> Vec<[f64; 2]> {
    let n = m.len();
    let mut acc = vec![[0.0; 2]; n];
    let mut deg: Vec<f64> = m.to_vec();
    let cutoff = kernel.support_radius();
    let pair = |i: usize, j: usize, r: f64, acc: &mut Vec<[f64; 2]>, deg: &mut Vec<f64>| {
        let phi = kernel.phi(r);
        if phi == 0.0 {
            return;
        }
        for c in 0..2 {
            let dv = v[j][c] - v[i][c];
            acc[i][c] += m[j] * phi * dv;
            acc[j][c] -= m[i] * phi * dv;
        }
        deg[i] += m[j] * phi;
        deg[j] += m[i] * phi;
    };
    match (dim, cutoff) {
        (1, Some(rc)) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[a][0].total_cmp(&x[b][0]));
            for (a, &i) in order.iter().enumerate() {
                for &j in &order[a + 1..] {
                    let r = x[j][0] - x[i][0];
                    if r > rc {
                        break;
                    }
                    pair(i, j, r, &mut acc, &mut deg);
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in i + 1..n {
                    let r = (x[i][0] - x[j][0]).hypot(x[i][1] - x[j][1]);
                    pair(i, j, r, &mut acc, &mut deg);
                }
            }
        }
    }
    if model == Model::Mt {
        for (a, d) in acc.iter_mut().zip(&deg) {
            a[0] /= d;
            a[1] /= d;
        }
    }
    acc
}

/// Monokinetic sample of `n` equal-weight agents from `(rho0, u0)`.
///
/// 1D positions are the midpoint quantiles of the cumulative mass; 2D
/// positions come from seeded rejection sampling against the density's
/// maximum on a fine grid. Velocities are `u0` at the positions.
#[allow(clippy::too_many_arguments)]
pub fn sample_from_macro(
    dim: usize,
    model: Model,
    kernel: InfluenceKernel,
    density: &DensityProfile,
    velocity: &VelocityProfile,
    n: usize,
    seed: u64,
) -> Result<AgentEnsemble> {
    if n == 0 {
        return Err(FlockError::domain("agent count must be >= 1"));
    }
    density.validate()?;
    velocity.validate()?;
    let w = density.mass() / n as f64;
    match dim {
        1 => {
            let xs = density.line()?.midpoint_quantiles(n)?;
            let vs: Vec<f64> = xs.iter().map(|&x| velocity.eval_1d(x).0).collect();
            AgentEnsemble::new_1d(model, kernel, &xs, &vs, &vec![w; n])
        }
        2 => {
            let rho = density.plane()?;
            let c = rho.center();
            let r = rho.support_radius();
            let grid = 400;
            let mut peak = 0.0f64;
            for j in 0..=grid {
                for i in 0..=grid {
                    let x = c[0] - r + 2.0 * r * i as f64 / grid as f64;
                    let y = c[1] - r + 2.0 * r * j as f64 / grid as f64;
                    peak = peak.max(rho.eval(x, y));
                }
            }
            if !(peak > 0.0) {
                return Err(FlockError::domain("density has zero mass"));
            }
            let ceiling = 1.05 * peak;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xs = Vec::with_capacity(n);
            while xs.len() < n {
                let x = c[0] + r * (2.0 * rng.random::<f64>() - 1.0);
                let y = c[1] + r * (2.0 * rng.random::<f64>() - 1.0);
                if rng.random::<f64>() * ceiling < rho.eval(x, y) {
                    xs.push([x, y]);
                }
            }
            let vs = xs.iter().map(|p| velocity.eval_2d(p[0], p[1])).collect();
            AgentEnsemble::new(2, model, kernel, xs, vs, vec![w; n])
        }
        _ => Err(FlockError::domain(format!("dimension must be 1 or 2, got {dim}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::VelocityTerm;

    fn two_body(model: Model) -> AgentEnsemble {
        let k = InfluenceKernel::power_law(0.0).unwrap();
        AgentEnsemble::new_1d(model, k, &[-0.5, 0.5], &[1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn run_always_records_the_end_time() {
        let mut e = two_body(Model::Cs);
        for k in 1..=7 {
            let target = k as f64 * 0.1;
            let rows = e.run(target, 0.05, usize::MAX).unwrap();
            assert_eq!(rows.len(), 2);
            assert_eq!(rows[1].t, e.t);
            assert!((e.t - target).abs() < 1e-12);
        }
    }

    #[test]
    fn two_body_closed_forms() {
        for (model, rate) in [(Model::Cs, 2.0), (Model::Mt, 1.0)] {
            let mut e = two_body(model);
            assert_eq!(e.diameters(), (1.0, 2.0));
            while e.t < 1.0 - 1e-12 {
                e.step(1e-3).unwrap();
            }
            let gap = e.velocities[0][0] - e.velocities[1][0];
            assert!((gap - 2.0 * (-rate * e.t).exp()).abs() < 1e-9, "{model}: {gap}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let mut e = two_body(Model::Cs);
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                e.step(dt).unwrap();
            }
            (e.velocities[0][0] - e.velocities[1][0] - 2.0 * (-2.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn single_and_resting_agents() {
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let mut one = AgentEnsemble::new_1d(Model::Cs, k, &[0.3], &[0.7], &[2.0]).unwrap();
        assert_eq!(one.rhs().1, vec![[0.0, 0.0]]);
        assert_eq!(one.diameters(), (0.0, 0.0));
        one.step(0.1).unwrap();
        assert!((one.positions[0][0] - 0.37).abs() < 1e-15);

        let mut rest =
            AgentEnsemble::new(2, Model::Mt, k, vec![[0.0, 0.0], [1.0, 2.0]], vec![[0.0; 2]; 2], vec![1.0; 2])
                .unwrap();
        let before = rest.positions.clone();
        rest.step(0.5).unwrap();
        assert_eq!(rest.positions, before);
    }

    #[test]
    fn quantile_sampling_and_constant_velocity() {
        let rho = DensityProfile::UniformDisk { mass: 1.0, radius: 0.5, center: [0.5, 0.0] };
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let e = sample_from_macro(1, Model::Cs, k, &rho, &VelocityProfile::constant([0.4, 0.0]), 4, 0).unwrap();
        let xs: Vec<f64> = e.positions.iter().map(|p| p[0]).collect();
        for (x, want) in xs.iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((x - want).abs() < 1e-12);
        }
        assert!(e.velocities.iter().all(|v| v[0] == 0.4));
        assert!((e.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_sampling_is_seeded() {
        let rho = DensityProfile::GaussianBump { mass: 2.0, sigma: 0.5, cutoff: 3.0, center: [0.0; 2] };
        let u = VelocityProfile { terms: vec![VelocityTerm::RigidRotation { omega: 1.0 }], ..Default::default() };
        let k = InfluenceKernel::exponential(1.0).unwrap();
        let a = sample_from_macro(2, Model::Cs, k, &rho, &u, 300, 7).unwrap();
        let b = sample_from_macro(2, Model::Cs, k, &rho, &u, 300, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.positions.iter().all(|p| p[0].hypot(p[1]) < 1.5));
    }

    #[test]
    fn compact_kernel_fast_path_matches_direct_sum() {
        let k = InfluenceKernel::compact_bump(0.7).unwrap();
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64 * 0.05).collect();
        let v: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let e = AgentEnsemble::new_1d(Model::Mt, k, &x, &v, &vec![0.1; 40]).unwrap();
        let fast = e.rhs().1;
        for i in 0..40 {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..40 {
                let phi = k.phi((x[i] - x[j]).abs());
                num += 0.1 * phi * (v[j] - v[i]);
                den += 0.1 * phi;
            }
            assert!((fast[i][0] - num / den).abs() < 1e-14);
        }
    }
}
