//! Flocking diagnostics shared by all solvers: diameters, exponential decay
//! fits, traveling-profile convergence and the limiting mean velocity.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{FlockError, Result};
use crate::hydro1d::ParticleState1D;
use crate::hydro2d::{Grid, GridState2D, Snapshot};
use crate::kernels::RadialKernel;
use crate::microdyn::AgentEnsemble;
use crate::Model;

/// A scalar series on strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(FlockError::Shape(format!("{} times but {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FlockError::domain("series times must be strictly increasing"));
        }
        Ok(TimeSeries { label: label.into(), times, values })
    }

    /// Builds a series from named columns, dropping repeated time stamps.
    pub fn from_columns(columns: &BTreeMap<String, Vec<f64>>, time: &str, value: &str) -> Result<Self> {
        let get = |name: &str| {
            columns.get(name).ok_or_else(|| FlockError::Shape(format!("missing column {name:?}")))
        };
        let (t, v) = (get(time)?, get(value)?);
        let mut times = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        for (&ti, &vi) in t.iter().zip(v) {
            if times.last().is_none_or(|&last| ti > last) {
                times.push(ti);
                values.push(vi);
            }
        }
        TimeSeries::new(value, times, values)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The window covering the second half of the time span.
    pub fn second_half(&self) -> Option<(f64, f64)> {
        let (a, b) = (*self.times.first()?, *self.times.last()?);
        Some((0.5 * (a + b), b))
    }
}

/// Any solver state with a notion of support, flock diameter and mean velocity.
pub trait FlockState {
    /// `(D, V)`: support diameter and velocity diameter over the support.
    fn flock_diameters(&self) -> Result<(f64, f64)>;
    /// Mass-weighted mean velocity.
    fn mean_velocity(&self) -> Result<[f64; 2]>;
}

impl<K: RadialKernel> FlockState for ParticleState1D<K> {
    fn flock_diameters(&self) -> Result<(f64, f64)> {
        if self.is_empty() {
            return Err(FlockError::EmptySupport);
        }
        Ok(self.diameters())
    }

    fn mean_velocity(&self) -> Result<[f64; 2]> {
        if self.is_empty() {
            return Err(FlockError::EmptySupport);
        }
        Ok([self.momentum() / self.total_mass(), 0.0])
    }
}

impl FlockState for AgentEnsemble {
    fn flock_diameters(&self) -> Result<(f64, f64)> {
        if self.is_empty() {
            return Err(FlockError::EmptySupport);
        }
        Ok(self.diameters())
    }

    fn mean_velocity(&self) -> Result<[f64; 2]> {
        if self.is_empty() {
            return Err(FlockError::EmptySupport);
        }
        let p = self.momentum();
        let m = self.total_mass();
        Ok([p[0] / m, p[1] / m])
    }
}

impl FlockState for GridState2D {
    fn flock_diameters(&self) -> Result<(f64, f64)> {
        self.diameters()
    }

    fn mean_velocity(&self) -> Result<[f64; 2]> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(FlockError::EmptySupport);
        }
        let p = self.momentum();
        Ok([p[0] / m, p[1] / m])
    }
}

pub fn diameters(state: &impl FlockState) -> Result<(f64, f64)> {
    state.flock_diameters()
}

/// Limiting mean velocity: the conserved mass mean for CS, the latest mass
/// mean for MT, whose momentum is not conserved.
pub fn estimate_u_bar<S: FlockState>(model: Model, initial: &S, latest: &S) -> Result<[f64; 2]> {
    match model {
        Model::Cs => initial.mean_velocity(),
        Model::Mt => latest.mean_velocity(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `-ln(values)` against time on `[t_a, t_b]`.
pub fn fit_decay_rate(series: &TimeSeries, window: (f64, f64)) -> Result<DecayFit> {
    let (ta, tb) = window;
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= ta && **t <= tb)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 2 {
        return Err(FlockError::domain(format!("fit window [{ta}, {tb}] holds {} points, need 2", pts.len())));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(FlockError::domain(format!("{} = {v} at t = {t} is not positive; shrink the window", series.label)));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| -p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in &pts {
        let (dt, dy) = (t - mt, -v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let rate = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty) / (stt * syy) };
    Ok(DecayFit { rate, r_squared, points: pts.len() })
}

/// Co-moving frame sample `rho(x + shift)` at every cell center, bilinear,
/// zero outside the grid.
fn shifted(grid: &Grid, rho: &[f64], shift: [f64; 2]) -> Vec<f64> {
    let n = grid.n;
    let dx = grid.dx();
    let x0 = grid.center(0);
    let sample = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            0.0
        } else {
            rho[j as usize * n + i as usize]
        }
    };
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let fx = (grid.center(i) + shift[0] - x0) / dx;
            let fy = (grid.center(j) + shift[1] - x0) / dx;
            let (ix, iy) = (fx.floor(), fy.floor());
            let (wx, wy) = (fx - ix, fy - iy);
            let (ix, iy) = (ix as isize, iy as isize);
            out[j * n + i] = (1.0 - wx) * (1.0 - wy) * sample(ix, iy)
                + wx * (1.0 - wy) * sample(ix + 1, iy)
                + (1.0 - wx) * wy * sample(ix, iy + 1)
                + wx * wy * sample(ix + 1, iy + 1);
        }
    }
    out
}

/// L1 distance between consecutive density snapshots in the frame moving
/// with `u_bar`, stamped at the later snapshot time.
pub fn traveling_profile_residual(grid: &Grid, snapshots: &[Snapshot], u_bar: [f64; 2]) -> Result<TimeSeries> {
    if snapshots.len() < 2 {
        return Err(FlockError::domain("traveling-profile residual needs at least 2 snapshots"));
    }
    if let Some(s) = snapshots.iter().find(|s| s.rho.len() != grid.cells()) {
        return Err(FlockError::Shape(format!("snapshot at t = {} has {} cells, grid has {}", s.t, s.rho.len(), grid.cells())));
    }
    let area = grid.dx() * grid.dx();
    let frame = |s: &Snapshot| shifted(grid, &s.rho, [s.t * u_bar[0], s.t * u_bar[1]]);
    let mut prev = frame(&snapshots[0]);
    let mut times = Vec::with_capacity(snapshots.len() - 1);
    let mut values = Vec::with_capacity(snapshots.len() - 1);
    for s in &snapshots[1..] {
        let cur = frame(s);
        values.push(cur.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>() * area);
        times.push(s.t);
        prev = cur;
    }
    TimeSeries::new("traveling_profile_residual", times, values)
}

/// Reads a diagnostics CSV (any solver) into named numeric columns.
pub fn read_diagnostics_csv<R: Read>(r: R) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec?;
        for (h, field) in headers.iter().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| FlockError::Shape(format!("column {h:?}: {field:?} is not a number")))?;
            cols.get_mut(h).expect("header column").push(v);
        }
    }
    Ok(cols)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub fitted_rate: f64,
    pub r_squared: f64,
    pub bound_kappa: f64,
    pub ratio: f64,
}

impl SummaryRow {
    pub fn new(quantity: impl Into<String>, fit: &DecayFit, kappa: f64) -> Self {
        SummaryRow {
            quantity: quantity.into(),
            fitted_rate: fit.rate,
            r_squared: fit.r_squared,
            bound_kappa: kappa,
            ratio: fit.rate / kappa,
        }
    }
}

/// Fits the second half of each named column that is positive there;
/// columns that are identically zero on the window are reported as already
/// flocked with an infinite rate and unit fit quality.
pub fn summarize(columns: &BTreeMap<String, Vec<f64>>, quantities: &[&str], kappa: f64) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for &q in quantities {
        if !columns.contains_key(q) {
            continue;
        }
        let series = TimeSeries::from_columns(columns, "t", q)?;
        let Some(window) = series.second_half() else { continue };
        let on_window: Vec<f64> =
            series.times.iter().zip(&series.values).filter(|(t, _)| **t >= window.0).map(|(_, v)| *v).collect();
        let fit = if on_window.iter().all(|&v| v == 0.0) {
            DecayFit { rate: f64::INFINITY, r_squared: 1.0, points: on_window.len() }
        } else {
            match fit_decay_rate(&series, window) {
                Ok(f) => f,
                Err(_) => DecayFit { rate: f64::NAN, r_squared: f64::NAN, points: on_window.len() },
            }
        };
        rows.push(SummaryRow::new(q, &fit, kappa));
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(["quantity", "fitted_rate", "r_squared", "bound_kappa", "ratio"])?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::InfluenceKernel;

    #[test]
    fn exact_exponential_fit() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let values = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let s = TimeSeries::new("V", times, values).unwrap();
        let fit = fit_decay_rate(&s, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-6);
        assert!(fit.r_squared >= 1.0 - 1e-10);
        assert_eq!(fit.points, 100);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let s = TimeSeries::new("V", vec![0.0, 1.0, 2.0], vec![0.5; 3]).unwrap();
        let fit = fit_decay_rate(&s, (0.0, 2.0)).unwrap();
        assert_eq!(fit.rate, 0.0);
    }

    #[test]
    fn fit_errors() {
        let s = TimeSeries::new("V", vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.5]).unwrap();
        assert!(fit_decay_rate(&s, (0.0, 2.0)).is_err());
        assert!(fit_decay_rate(&s, (1.5, 2.0)).is_err());
        assert!(TimeSeries::new("V", vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(TimeSeries::new("V", vec![0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn two_particle_diameters() {
        let k = InfluenceKernel::power_law(0.0).unwrap();
        let s = ParticleState1D::new(Model::Cs, k, vec![-0.5, 0.5], vec![1.0, -1.0], vec![1.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(diameters(&s).unwrap(), (1.0, 2.0));
        assert_eq!(estimate_u_bar(Model::Cs, &s, &s).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn stationary_profile_has_zero_residual() {
        let grid = Grid::new(16, 4.0).unwrap();
        let rho: Vec<f64> = (0..256).map(|k| (k % 7) as f64).collect();
        let snaps = vec![Snapshot { t: 0.0, rho: rho.clone() }, Snapshot { t: 1.0, rho: rho.clone() }];
        let r = traveling_profile_residual(&grid, &snaps, [0.0, 0.0]).unwrap();
        assert_eq!(r.values, vec![0.0]);
        let bad = vec![Snapshot { t: 0.0, rho }, Snapshot { t: 1.0, rho: vec![0.0; 3] }];
        assert!(matches!(traveling_profile_residual(&grid, &bad, [0.0; 2]), Err(FlockError::Shape(_))));
    }

    #[test]
    fn translating_profile_residual_is_interpolation_error() {
        let grid = Grid::new(64, 8.0).unwrap();
        let field = |t: f64| -> Vec<f64> {
            let mut v = vec![0.0; 64 * 64];
            for j in 0..64 {
                for i in 0..64 {
                    let (x, y) = (grid.center(i) - 0.3 * t, grid.center(j) - 0.1 * t);
                    v[j * 64 + i] = (-(x * x + y * y)).exp();
                }
            }
            v
        };
        let snaps: Vec<Snapshot> = (0..4).map(|k| Snapshot { t: k as f64, rho: field(k as f64) }).collect();
        let r = traveling_profile_residual(&grid, &snaps, [0.3, 0.1]).unwrap();
        let dx = grid.dx();
        assert!(r.values.iter().all(|&v| v < dx * dx * 10.0), "{:?}", r.values);
        let wrong = traveling_profile_residual(&grid, &snaps, [0.0, 0.0]).unwrap();
        assert!(wrong.values.iter().all(|&v| v > 0.1));
    }

    #[test]
    fn csv_round_trip_and_summary() {
        let csv = "t,V,D\n0,1,2\n1,0.5,2\n2,0.25,2\n3,0.125,2\n3,0.125,2\n";
        let cols = read_diagnostics_csv(csv.as_bytes()).unwrap();
        let s = TimeSeries::from_columns(&cols, "t", "V").unwrap();
        assert_eq!(s.len(), 4);
        let rows = summarize(&cols, &["V", "missing"], 2f64.ln()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].ratio - 1.0).abs() < 1e-12);
        let zero = read_diagnostics_csv("t,V\n0,0\n1,0\n2,0\n".as_bytes()).unwrap();
        let rows = summarize(&zero, &["V"], 1.0).unwrap();
        assert!(rows[0].fitted_rate.is_infinite());
        let mut buf = Vec::new();
        write_summary_csv(&rows, &mut buf).unwrap();
        let out = String::from_utf8(buf).unwrap();
        assert!(out.starts_with("quantity,fitted_rate,r_squared,bound_kappa,ratio\n"));
        assert_eq!(out.lines().count(), 2);
    }
}
