//! Radial influence functions and the scalar quantities derived from them.
//!
//! An influence function `phi` is non-increasing on `[0, inf)` with
//! `phi(0) = 1`. From it we derive tail integrals, the flock diameter
//! `D_inf` solving `m0 * int_{D0}^{D_inf} phi = V0`, the variation bounds on
//! `V0` that gate the 2D critical thresholds, and the alignment decay rates.

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::quadrature;
use crate::Model;

const QUAD_TOL: f64 = 1e-15;

/// Evaluation surface shared by every kernel the solvers accept.
///
/// Implementations do not validate `r`; callers pass distances.
pub trait RadialKernel: Send + Sync {
    fn phi(&self, r: f64) -> f64;
    fn dphi(&self, r: f64) -> f64;

    fn phi_dphi(&self, r: f64) -> (f64, f64) {
        (self.phi(r), self.dphi(r))
    }

    /// Radius beyond which `phi` vanishes identically, if any.
    fn support_radius(&self) -> Option<f64> {
        None
    }
}

/// The three closed-form kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-r / length)`
    Exponential { length: f64 },
    /// `(1 + r)^(-beta)`; `beta = 0` is the all-to-all kernel `phi = 1`.
    PowerLaw { beta: f64 },
    /// `exp(-s^2 / (1 - s^2))` with `s = r / radius`, zero for `r >= radius`.
    CompactBump { radius: f64 },
}

impl KernelFamily {
    pub fn id(&self) -> u32 {
        match self {
            KernelFamily::Exponential { .. } => 0,
            KernelFamily::PowerLaw { .. } => 1,
            KernelFamily::CompactBump { .. } => 2,
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            KernelFamily::Exponential { length } => length,
            KernelFamily::PowerLaw { beta } => beta,
            KernelFamily::CompactBump { radius } => radius,
        }
    }

    pub fn from_id(id: u32, param: f64) -> Option<KernelFamily> {
        match id {
            0 => Some(KernelFamily::Exponential { length: param }),
            1 => Some(KernelFamily::PowerLaw { beta: param }),
            2 => Some(KernelFamily::CompactBump { radius: param }),
            _ => None,
        }
    }
}

/// Value of an integral over a possibly unbounded interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Finite(f64),
    Infinite,
}

impl Tail {
    pub fn is_infinite(self) -> bool {
        matches!(self, Tail::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Tail::Finite(v) => Some(v),
            Tail::Infinite => None,
        }
    }

    /// `m * self`, with `Infinite` absorbing any positive factor.
    pub fn scaled(self, m: f64) -> Tail {
        match self {
            Tail::Finite(v) => Tail::Finite(m * v),
            Tail::Infinite => Tail::Infinite,
        }
    }

    /// Strict comparison `value < self`.
    pub fn exceeds(self, value: f64) -> bool {
        match self {
            Tail::Finite(v) => value < v,
            Tail::Infinite => true,
        }
    }
}

/// A radial influence function with an optional finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceKernel {
    #[serde(flatten)]
    pub family: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl InfluenceKernel {
    pub fn new(family: KernelFamily) -> Result<Self> {
        let k = InfluenceKernel { family, horizon: None };
        k.validate()?;
        Ok(k)
    }

    pub fn exponential(length: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential { length })
    }

    pub fn power_law(beta: f64) -> Result<Self> {
        Self::new(KernelFamily::PowerLaw { beta })
    }

    pub fn compact_bump(radius: f64) -> Result<Self> {
        Self::new(KernelFamily::CompactBump { radius })
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = Some(horizon);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            KernelFamily::Exponential { length } => length.is_finite() && length > 0.0,
            KernelFamily::PowerLaw { beta } => beta.is_finite() && beta >= 0.0,
            KernelFamily::CompactBump { radius } => radius.is_finite() && radius > 0.0,
        };
        if !ok {
            return Err(FlockError::domain(format!("invalid kernel parameters {:?}", self.family)));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(FlockError::domain(format!("horizon must be positive, got {h}")));
            }
        }
        Ok(())
    }

    /// `phi(r)`; zero beyond the horizon.
    pub fn eval(&self, r: f64) -> Result<f64> {
        check_distance(r)?;
        Ok(self.phi(r))
    }

    /// `phi'(r)`; zero beyond the horizon.
    pub fn eval_deriv(&self, r: f64) -> Result<f64> {
        check_distance(r)?;
        Ok(self.dphi(r))
    }

    fn beyond_horizon(&self, r: f64) -> bool {
        self.horizon.is_some_and(|h| r > h)
    }

    fn family_phi_dphi(&self, r: f64) -> (f64, f64) {
        match self.family {
            KernelFamily::Exponential { length } => {
                let v = (-r / length).exp();
                (v, -v / length)
            }
            KernelFamily::PowerLaw { beta } => {
                if beta == 0.0 {
                    return (1.0, 0.0);
                }
                let v = (1.0 + r).powf(-beta);
                (v, -beta * v / (1.0 + r))
            }
            KernelFamily::CompactBump { radius } => {
                let s2 = (r / radius) * (r / radius);
                if s2 >= 1.0 {
                    return (0.0, 0.0);
                }
                let one_minus = 1.0 - s2;
                let v = (-s2 / one_minus).exp();
                (v, -v * 2.0 * r / (radius * radius * one_minus * one_minus))
            }
        }
    }

    /// Upper end of the interval on which `phi` can be non-zero.
    fn effective_support(&self) -> f64 {
        let natural = match self.family {
            KernelFamily::CompactBump { radius } => radius,
            _ => f64::INFINITY,
        };
        self.horizon.map_or(natural, |h| h.min(natural))
    }

    /// `int_a^b phi(s) ds`; `b` may be `f64::INFINITY`.
    pub fn tail_integral(&self, a: f64, b: f64) -> Result<Tail> {
        check_distance(a)?;
        if b.is_nan() || a > b {
            return Err(FlockError::domain(format!("tail integral needs 0 <= a <= b, got a={a}, b={b}")));
        }
        let b = b.min(self.effective_support());
        if a >= b {
            return Ok(Tail::Finite(0.0));
        }
        let value = match self.family {
            KernelFamily::Exponential { length } => {
                let upper = if b.is_infinite() { 0.0 } else { (-b / length).exp() };
                length * ((-a / length).exp() - upper)
            }
            KernelFamily::PowerLaw { beta } => {
                if b.is_infinite() && beta <= 1.0 {
                    return Ok(Tail::Infinite);
                }
                if beta == 1.0 {
                    ((1.0 + b) / (1.0 + a)).ln()
                } else if b.is_infinite() {
                    (1.0 + a).powf(1.0 - beta) / (beta - 1.0)
                } else {
                    ((1.0 + a).powf(1.0 - beta) - (1.0 + b).powf(1.0 - beta)) / (beta - 1.0)
                }
            }
            KernelFamily::CompactBump { .. } => {
                quadrature::integrate(|s| self.family_phi_dphi(s).0, a, b, QUAD_TOL)
            }
        };
        Ok(Tail::Finite(value))
    }

    /// `|phi|_1 = int_0^inf phi`.
    pub fn l1_norm(&self) -> Tail {
        self.tail_integral(0.0, f64::INFINITY).expect("valid interval")
    }

    /// `max_{0 <= s <= upto} |phi'(s)|`.
    pub fn max_abs_deriv(&self, upto: f64) -> Result<f64> {
        check_distance(upto)?;
        let upto = upto.min(self.effective_support());
        let value = match self.family {
            KernelFamily::Exponential { length } => 1.0 / length,
            KernelFamily::PowerLaw { beta } => beta,
            KernelFamily::CompactBump { radius } => {
                // |phi'| increases up to r* = radius * 3^(-1/4) and decreases after.
                let peak = radius * 3f64.powf(-0.25);
                self.family_phi_dphi(upto.min(peak)).1.abs()
            }
        };
        Ok(value)
    }

    /// Line integral of the kernel across a strip: the effective 1D kernel
    /// seen by data that is constant in the second coordinate.
    ///
    /// Tabulates `psi(s) = int_{-half_length}^{half_length} phi(sqrt(s^2 + t^2)) dt`
    /// and its derivative on `[0, max_r]` with `nodes` samples.
    pub fn line_projection(&self, half_length: f64, max_r: f64, nodes: usize) -> Result<TabulatedKernel> {
        if !(half_length > 0.0 && max_r > 0.0 && nodes >= 2) {
            return Err(FlockError::domain("line projection needs positive extents and >= 2 nodes"));
        }
        let support = self.effective_support();
        let mut values = Vec::with_capacity(nodes);
        let mut derivs = Vec::with_capacity(nodes);
        let step = max_r / (nodes - 1) as f64;
        for k in 0..nodes {
            let s = k as f64 * step;
            let (t_max, clipped) = if support.is_finite() {
                if s >= support {
                    values.push(0.0);
                    derivs.push(0.0);
                    continue;
                }
                let t = (support * support - s * s).sqrt();
                (t.min(half_length), t < half_length)
            } else {
                (half_length, false)
            };
            let v = 2.0 * quadrature::integrate(|t| self.phi((s * s + t * t).sqrt()), 0.0, t_max, 1e-13);
            let dv = if s == 0.0 {
                0.0
            } else {
                2.0 * quadrature::integrate(
                    |t| {
                        let r = (s * s + t * t).sqrt();
                        self.dphi(r) * s / r
                    },
                    0.0,
                    t_max,
                    1e-13,
                )
            };
            // Moving upper limit: a kernel that jumps to zero at the horizon
            // contributes a boundary term.
            let dv = if clipped && s > 0.0 { dv - 2.0 * self.family_phi_dphi(support).0 * s / t_max } else { dv };
            values.push(v);
            derivs.push(dv);
        }
        Ok(TabulatedKernel { step, values, derivs })
    }
}

impl RadialKernel for InfluenceKernel {
    fn phi(&self, r: f64) -> f64 {
        if self.beyond_horizon(r) {
            0.0
        } else {
            self.family_phi_dphi(r).0
        }
    }

    fn dphi(&self, r: f64) -> f64 {
        if self.beyond_horizon(r) {
            0.0
        } else {
            self.family_phi_dphi(r).1
        }
    }

    fn phi_dphi(&self, r: f64) -> (f64, f64) {
        if self.beyond_horizon(r) {
            (0.0, 0.0)
        } else {
            self.family_phi_dphi(r)
        }
    }

    fn support_radius(&self) -> Option<f64> {
        let s = self.effective_support();
        s.is_finite().then_some(s)
    }
}

/// Kernel given by samples of value and slope, interpolated by cubic Hermite
/// splines; zero past the last node.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl TabulatedKernel {
    pub fn max_r(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    fn hermite(&self, r: f64) -> (f64, f64) {
        let pos = r / self.step;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.derivs[k] * self.step, self.derivs[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let dv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / self.step;
        (v, dv)
    }
}

impl RadialKernel for TabulatedKernel {
    fn phi(&self, r: f64) -> f64 {
        self.phi_dphi(r).0
    }

    fn dphi(&self, r: f64) -> f64 {
        self.phi_dphi(r).1
    }

    fn phi_dphi(&self, r: f64) -> (f64, f64) {
        if r > self.max_r() {
            (0.0, 0.0)
        } else {
            self.hermite(r)
        }
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.max_r())
    }
}

fn check_distance(r: f64) -> Result<()> {
    if r.is_nan() || r < 0.0 {
        return Err(FlockError::domain(format!("distance must be >= 0, got {r}")));
    }
    Ok(())
}

/// Derived geometry of a flock: diameters, `phi_inf = phi(D_inf)`, decay rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlockGeometry {
    pub m0: f64,
    pub d0: f64,
    pub v0: f64,
    pub d_inf: f64,
    pub phi_inf: f64,
    pub kappa_cs: f64,
    pub kappa_mt: f64,
}

impl FlockGeometry {
    pub fn new(kernel: &InfluenceKernel, m0: f64, d0: f64, v0: f64) -> Result<Self> {
        let d_inf = solve_flock_diameter(kernel, m0, d0, v0)?;
        let phi_inf = kernel.phi(d_inf);
        Ok(FlockGeometry {
            m0,
            d0,
            v0,
            d_inf,
            phi_inf,
            kappa_cs: decay_rate(Model::Cs, m0, phi_inf),
            kappa_mt: decay_rate(Model::Mt, m0, phi_inf),
        })
    }

    pub fn kappa(&self, model: Model) -> f64 {
        match model {
            Model::Cs => self.kappa_cs,
            Model::Mt => self.kappa_mt,
        }
    }
}

fn check_flock_inputs(m0: f64, d0: f64, v0: f64) -> Result<()> {
    if !(m0.is_finite() && m0 > 0.0) {
        return Err(FlockError::domain(format!("total mass must be positive, got {m0}")));
    }
    if !(d0.is_finite() && d0 >= 0.0) {
        return Err(FlockError::domain(format!("initial diameter must be >= 0, got {d0}")));
    }
    if !(v0.is_finite() && v0 >= 0.0) {
        return Err(FlockError::domain(format!("velocity variation must be >= 0, got {v0}")));
    }
    Ok(())
}

/// `V0 < m0 * int_{D0}^inf phi`: the kernel is strong enough to hold the flock together.
pub fn check_global_condition(kernel: &InfluenceKernel, m0: f64, d0: f64, v0: f64) -> Result<bool> {
    check_flock_inputs(m0, d0, v0)?;
    Ok(kernel.tail_integral(d0, f64::INFINITY)?.scaled(m0).exceeds(v0))
}

/// Root `D_inf >= D0` of `m0 * int_{D0}^{D_inf} phi = V0` by bracketed bisection.
pub fn solve_flock_diameter(kernel: &InfluenceKernel, m0: f64, d0: f64, v0: f64) -> Result<f64> {
    check_flock_inputs(m0, d0, v0)?;
    if v0 == 0.0 {
        return Ok(d0);
    }
    let capacity = kernel.tail_integral(d0, f64::INFINITY)?.scaled(m0);
    if !capacity.exceeds(v0) {
        return Err(FlockError::NoFiniteFlockDiameter {
            v0,
            capacity: capacity.finite().unwrap_or(f64::INFINITY),
        });
    }
    let mass_between = |d: f64| -> f64 {
        m0 * kernel
            .tail_integral(d0, d)
            .expect("d >= d0")
            .finite()
            .expect("finite interval")
    };
    let mut lo = d0;
    let mut width = d0.max(1.0);
    let mut hi = d0 + width;
    while mass_between(hi) < v0 {
        lo = hi;
        width *= 2.0;
        hi = d0 + width;
        if !hi.is_finite() {
            return Err(FlockError::NoFiniteFlockDiameter { v0, capacity: f64::INFINITY });
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * hi.max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if mass_between(mid) < v0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of an a-posteriori variation-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationCheck {
    pub holds: bool,
    /// `bound - V0`; positive when the bound holds with room to spare.
    pub margin: f64,
    pub bound: f64,
    pub d_inf: f64,
    pub phi_inf: f64,
    pub dphi_max: f64,
}

/// Which variation bound on `V0` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationBound {
    /// `m0 min{|phi|_1, phi_inf^2 / (4 |phi'|)}`
    Cs,
    /// `m0 min{|phi|_1, phi_inf^2 / (4 |phi'| (1 + 2 phi_inf))}`
    Mt,
    /// `m0 min{|phi|_1, phi_inf / (4 |phi'|)}`, strict.
    Mt1d,
}

impl From<Model> for VariationBound {
    fn from(m: Model) -> Self {
        match m {
            Model::Cs => VariationBound::Cs,
            Model::Mt => VariationBound::Mt,
        }
    }
}

/// Evaluates the variation bound at the solved `D_inf` (single a-posteriori check).
pub fn check_variation_bound(
    kernel: &InfluenceKernel,
    bound: impl Into<VariationBound>,
    m0: f64,
    d0: f64,
    v0: f64,
) -> Result<VariationCheck> {
    let kind = bound.into();
    let d_inf = solve_flock_diameter(kernel, m0, d0, v0)?;
    let phi_inf = kernel.phi(d_inf);
    let dphi_max = kernel.max_abs_deriv(d_inf)?;
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    let local = match kind {
        VariationBound::Cs => ratio(phi_inf * phi_inf, 4.0 * dphi_max),
        VariationBound::Mt => ratio(phi_inf * phi_inf, 4.0 * dphi_max * (1.0 + 2.0 * phi_inf)),
        VariationBound::Mt1d => ratio(phi_inf, 4.0 * dphi_max),
    };
    let l1 = kernel.l1_norm().finite().unwrap_or(f64::INFINITY);
    let bound = m0 * l1.min(local);
    let margin = bound - v0;
    let holds = match kind {
        VariationBound::Mt1d => v0 < bound,
        _ => v0 <= bound,
    };
    Ok(VariationCheck { holds, margin, bound, d_inf, phi_inf, dphi_max })
}

/// Exponential alignment rate: `m0 phi_inf` for CS, `phi_inf` for MT.
pub fn decay_rate(model: Model, m0: f64, phi_inf: f64) -> f64 {
    match model {
        Model::Cs => m0 * phi_inf,
        Model::Mt => phi_inf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn families() -> Vec<InfluenceKernel> {
        vec![
            InfluenceKernel::exponential(1.0).unwrap(),
            InfluenceKernel::exponential(3.5).unwrap(),
            InfluenceKernel::power_law(0.5).unwrap(),
            InfluenceKernel::power_law(2.0).unwrap(),
            InfluenceKernel::compact_bump(1.0).unwrap(),
            InfluenceKernel::compact_bump(2.5).unwrap().with_horizon(2.0).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        let e = InfluenceKernel::exponential(1.0).unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 1.0);
        assert_relative_eq!(e.eval(1.0).unwrap(), 0.367_879_441_171_442_3, epsilon = 1e-15);
        let p = InfluenceKernel::power_law(2.0).unwrap().with_horizon(3.0).unwrap();
        assert_eq!(p.eval(4.0).unwrap(), 0.0);
        assert!(p.eval(3.0).unwrap() > 0.0);
    }

    #[test]
    fn negative_distance_is_rejected() {
        let e = InfluenceKernel::exponential(1.0).unwrap();
        assert!(matches!(e.eval(-0.1), Err(FlockError::Domain(_))));
        assert!(matches!(e.eval_deriv(-0.1), Err(FlockError::Domain(_))));
    }

    #[test]
    fn normalization_at_origin() {
        for k in families() {
            assert_eq!(k.phi(0.0), 1.0, "{k:?}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(InfluenceKernel::exponential(0.0).is_err());
        assert!(InfluenceKernel::power_law(-1.0).is_err());
        assert!(InfluenceKernel::compact_bump(f64::NAN).is_err());
        assert!(InfluenceKernel::exponential(1.0).unwrap().with_horizon(-2.0).is_err());
    }

    #[test]
    fn tail_integral_examples() {
        let e = InfluenceKernel::exponential(1.0).unwrap();
        assert_eq!(e.tail_integral(0.0, f64::INFINITY).unwrap(), Tail::Finite(1.0));
        let p1 = InfluenceKernel::power_law(1.0).unwrap();
        assert_eq!(p1.tail_integral(0.0, f64::INFINITY).unwrap(), Tail::Infinite);
        let p2 = InfluenceKernel::power_law(2.0).unwrap();
        let v = p2.tail_integral(0.0, 1.0).unwrap().finite().unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
        assert!(matches!(e.tail_integral(2.0, 1.0), Err(FlockError::Domain(_))));
    }

    #[test]
    fn horizon_makes_tail_finite() {
        let p = InfluenceKernel::power_law(0.5).unwrap().with_horizon(3.0).unwrap();
        let v = p.l1_norm().finite().unwrap();
        // int_0^3 (1+s)^(-1/2) ds = 2 (2 - 1)
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn bump_tail_matches_brute_force() {
        let k = InfluenceKernel::compact_bump(1.5).unwrap();
        let n = 200_000;
        let h = 1.5 / n as f64;
        // Midpoint rule as an independent check.
        let brute: f64 = (0..n).map(|i| k.phi((i as f64 + 0.5) * h)).sum::<f64>() * h;
        let v = k.l1_norm().finite().unwrap();
        assert!((v - brute).abs() < 1e-9, "{v} vs {brute}");
    }

    #[test]
    fn flock_diameter_examples() {
        let p2 = InfluenceKernel::power_law(2.0).unwrap();
        assert_relative_eq!(solve_flock_diameter(&p2, 1.0, 0.0, 0.5).unwrap(), 1.0, epsilon = 1e-10);
        let e = InfluenceKernel::exponential(1.0).unwrap();
        assert_relative_eq!(
            solve_flock_diameter(&e, 2.0, 0.0, 1.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-10
        );
        for k in families() {
            assert_eq!(solve_flock_diameter(&k, 1.0, 0.7, 0.0).unwrap(), 0.7);
        }
    }

    #[test]
    fn flock_diameter_fails_without_capacity() {
        let e = InfluenceKernel::exponential(1.0).unwrap();
        let err = solve_flock_diameter(&e, 1.0, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, FlockError::NoFiniteFlockDiameter { .. }));
    }

    #[test]
    fn global_condition_examples() {
        let p1 = InfluenceKernel::power_law(1.0).unwrap();
        assert!(check_global_condition(&p1, 1.0, 5.0, 1e6).unwrap());
        let e = InfluenceKernel::exponential(1.0).unwrap();
        assert!(check_global_condition(&e, 1.0, 0.0, 0.9).unwrap());
        let b = InfluenceKernel::compact_bump(1.0).unwrap();
        let l1 = b.l1_norm().finite().unwrap();
        assert!(!check_global_condition(&b, 1.0, 0.0, 2.0 * l1).unwrap());
    }

    #[test]
    fn variation_bound_examples() {
        let e = InfluenceKernel::exponential(1.0).unwrap();
        let zero = check_variation_bound(&e, Model::Cs, 1.0, 0.0, 0.0).unwrap();
        assert!(zero.holds);
        assert_eq!(zero.margin, zero.bound);

        // D_inf = -ln(0.98), plug-in bound min{1, phi_inf^2 / 4}.
        let cs = check_variation_bound(&e, Model::Cs, 1.0, 0.0, 0.02).unwrap();
        let d_inf = -(0.98f64).ln();
        assert_relative_eq!(cs.d_inf, d_inf, epsilon = 1e-10);
        let expected = (0.98f64 * 0.98 / 4.0).min(1.0);
        assert_relative_eq!(cs.bound, expected, epsilon = 1e-10);
        assert_eq!(cs.holds, 0.02 <= expected);

        let mt = check_variation_bound(&e, Model::Mt, 1.0, 0.0, 0.02).unwrap();
        assert!(mt.margin < cs.margin);
        assert_relative_eq!(mt.bound, cs.bound / (1.0 + 2.0 * cs.phi_inf), epsilon = 1e-12);
    }

    #[test]
    fn variation_bound_propagates_missing_diameter() {
        let e = InfluenceKernel::exponential(1.0).unwrap();
        let err = check_variation_bound(&e, Model::Cs, 1.0, 0.0, 2.0).unwrap_err();
        assert!(matches!(err, FlockError::NoFiniteFlockDiameter { .. }));
    }

    #[test]
    fn decay_rate_examples() {
        assert_eq!(decay_rate(Model::Cs, 2.0, 0.25), 0.5);
        assert_eq!(decay_rate(Model::Mt, 2.0, 0.25), 0.25);
        assert_eq!(decay_rate(Model::Cs, 1.0, 1.0), 1.0);
    }

    #[test]
    fn bump_derivative_peak_matches_sampling() {
        let k = InfluenceKernel::compact_bump(2.0).unwrap();
        let sampled = (0..=100_000)
            .map(|i| k.dphi(2.0 * i as f64 / 100_000.0).abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(k.max_abs_deriv(10.0).unwrap(), sampled, max_relative = 1e-8);
        // Before the peak the maximum sits at the right end.
        assert_relative_eq!(k.max_abs_deriv(0.5).unwrap(), k.dphi(0.5).abs(), epsilon = 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for k in families() {
            for &r in &[0.1, 0.4, 0.9, 1.3] {
                if k.support_radius().is_some_and(|s| r + 1e-5 >= s) {
                    continue;
                }
                let fd = (k.phi(r + 1e-6) - k.phi(r - 1e-6)) / 2e-6;
                assert!((fd - k.dphi(r)).abs() < 1e-7, "{k:?} at {r}: {fd} vs {}", k.dphi(r));
            }
        }
    }

    #[test]
    fn seeded_monotonicity_sweep() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in families() {
            for _ in 0..1000 {
                let a: f64 = rng.random_range(0.0..10.0);
                let b: f64 = rng.random_range(0.0..10.0);
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                assert!(k.phi(lo) >= k.phi(hi) && k.phi(hi) >= 0.0, "{k:?} at {lo}, {hi}");
                assert!(k.dphi(lo) <= 0.0);
            }
        }
    }

    #[test]
    fn line_projection_of_constant_kernel() {
        // phi = 1 inside a horizon H: psi(s) = 2 sqrt(H^2 - s^2), psi' = -2 s / sqrt(H^2 - s^2).
        let k = InfluenceKernel::power_law(0.0).unwrap().with_horizon(2.0).unwrap();
        let tab = k.line_projection(10.0, 2.0, 401).unwrap();
        for &s in &[0.0, 0.5, 1.0, 1.5] {
            let exact = 2.0 * (4.0f64 - s * s).sqrt();
            assert!((tab.phi(s) - exact).abs() < 1e-8, "{s}");
        }
        assert_relative_eq!(tab.dphi(1.0), -2.0 / 3f64.sqrt(), epsilon = 1e-6);
        assert_eq!(tab.phi(2.5), 0.0);
    }

    proptest! {
        #[test]
        fn monotone_and_nonnegative(r1 in 0.0f64..8.0, gap in 0.0f64..4.0, which in 0usize..6) {
            let k = families()[which];
            let r2 = r1 + gap;
            prop_assert!(k.phi(r1) >= k.phi(r2));
            prop_assert!(k.phi(r2) >= 0.0);
            prop_assert!(k.dphi(r1) <= 0.0);
        }

        #[test]
        fn tail_additivity(a in 0.0f64..3.0, g1 in 0.0f64..3.0, g2 in 0.0f64..3.0, which in 0usize..6) {
            let k = families()[which];
            let (b, c) = (a + g1, a + g1 + g2);
            let ac = k.tail_integral(a, c).unwrap().finite().unwrap();
            let ab = k.tail_integral(a, b).unwrap().finite().unwrap();
            let bc = k.tail_integral(b, c).unwrap().finite().unwrap();
            prop_assert!((ac - ab - bc).abs() <= 1e-12, "{} vs {}", ac, ab + bc);
        }

        #[test]
        fn flock_diameter_monotone_with_small_residual(v0 in 0.0f64..0.8, dv in 0.0f64..0.1, d0 in 0.0f64..1.0, which in 0usize..4) {
            let k = families()[which];
            let m0 = 1.0;
            prop_assume!(check_global_condition(&k, m0, d0, v0 + dv).unwrap());
            let d1 = solve_flock_diameter(&k, m0, d0, v0).unwrap();
            let d2 = solve_flock_diameter(&k, m0, d0, v0 + dv).unwrap();
            prop_assert!(d1 >= d0);
            prop_assert!(d2 >= d1);
            let resid = (m0 * k.tail_integral(d0, d1).unwrap().finite().unwrap() - v0).abs();
            prop_assert!(resid <= 1e-8 * v0.max(1.0));
        }

        #[test]
        fn mt_bound_never_exceeds_cs(v0 in 0.0f64..0.3, which in 0usize..6) {
            let k = families()[which];
            prop_assume!(check_global_condition(&k, 1.0, 0.2, v0).unwrap());
            let cs = check_variation_bound(&k, Model::Cs, 1.0, 0.2, v0).unwrap();
            let mt = check_variation_bound(&k, Model::Mt, 1.0, 0.2, v0).unwrap();
            prop_assert!(mt.bound <= cs.bound);
        }
    }
}
