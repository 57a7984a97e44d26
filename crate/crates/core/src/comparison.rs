//! Comparison dynamics behind the regularity argument: a priori envelopes for
//! the spectral gap and vorticity, Riccati envelopes for `e`, and a closed
//! Lagrangian ODE laboratory with prescribed driving terms.
//!
//! Riccati envelopes solve `e' = (c^2 - e^2) / 2` in closed form,
//! `e(t) = c (e0 + c tanh(ct/2)) / (c + e0 tanh(ct/2))`, valid for `e0 > -c`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::kernels::decay_rate;
use crate::Model;

/// Scalar inputs of the a priori bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub m0: f64,
    pub phi_inf: f64,
    pub v0: f64,
    /// `|phi'|_inf` over `[0, D_inf]`.
    pub dphi_max: f64,
    pub eta0_max: f64,
    pub omega0_max: f64,
    pub e0_min: f64,
    pub e0_max: f64,
}

impl EnvelopeParams {
    pub fn kappa(&self, model: Model) -> f64 {
        decay_rate(model, self.m0, self.phi_inf)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.m0 > 0.0
            && self.phi_inf > 0.0
            && self.v0 >= 0.0
            && self.dphi_max >= 0.0
            && self.eta0_max >= 0.0
            && self.omega0_max >= 0.0
            && [self.e0_min, self.e0_max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(FlockError::domain(format!("invalid envelope parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeKind {
    EtaS,
    Vorticity,
    ELower,
    EUpper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Constant(f64),
    /// `base + amp (1 - exp(-rate t)) / rate`
    Integrated { base: f64, amp: f64, rate: f64 },
    Riccati { e0: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEnvelope {
    pub kind: EnvelopeKind,
    pub params: EnvelopeParams,
    shape: Shape,
}

impl BoundEnvelope {
    pub fn bound(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Constant(c) => c,
            Shape::Integrated { base, amp, rate } => {
                if rate == 0.0 {
                    base + amp * t
                } else {
                    base - amp * (-rate * t).exp_m1() / rate
                }
            }
            Shape::Riccati { e0, c } => riccati(e0, c, t),
        }
    }

    /// Value as `t -> infinity`.
    pub fn limit(&self) -> f64 {
        match self.shape {
            Shape::Constant(c) => c,
            Shape::Integrated { base, amp, rate } => {
                if amp == 0.0 {
                    base
                } else if rate == 0.0 {
                    f64::INFINITY
                } else {
                    base + amp / rate
                }
            }
            Shape::Riccati { c, .. } => c,
        }
    }

    /// The Riccati level `c` of an `e` envelope.
    pub fn level(&self) -> Option<f64> {
        match self.shape {
            Shape::Riccati { c, .. } => Some(c),
            _ => None,
        }
    }
}

/// Closed-form solution of `e' = (c^2 - e^2) / 2`, `e(0) = e0 > -c`.
pub fn riccati(e0: f64, c: f64, t: f64) -> f64 {
    let th = (0.5 * c * t).tanh();
    c * (e0 + c * th) / (c + e0 * th)
}

/// Residual envelope at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBound {
    /// Bound on each entry `|R_ij|`.
    pub entry: f64,
    /// Bound on the spectral-gap forcing `|q|`.
    pub q: f64,
}

/// CS: `|R_ij| <= |phi'| m0 V0 e^{-kappa t}`; MT: `|R_ij| <= (|phi'| / phi_inf) V0 e^{-kappa t}`.
pub fn residual_bound(model: Model, m0: f64, v0: f64, phi_inf: f64, dphi_max: f64, t: f64) -> Result<ResidualBound> {
    if !(t >= 0.0) {
        return Err(FlockError::domain(format!("residual bound needs t >= 0, got {t}")));
    }
    let amp = residual_amplitude(model, m0, v0, phi_inf, dphi_max);
    let entry = amp * (-decay_rate(model, m0, phi_inf) * t).exp();
    Ok(ResidualBound { entry, q: 2.0 * entry })
}

fn residual_amplitude(model: Model, m0: f64, v0: f64, phi_inf: f64, dphi_max: f64) -> f64 {
    match model {
        Model::Cs => dphi_max * m0 * v0,
        Model::Mt => dphi_max / phi_inf * v0,
    }
}

/// Largest `V0` admitted by the local part of the variation bound.
fn local_variation_limit(model: Model, p: &EnvelopeParams) -> f64 {
    if p.dphi_max == 0.0 {
        return f64::INFINITY;
    }
    let phi2 = p.phi_inf * p.phi_inf;
    match model {
        Model::Cs => p.m0 * phi2 / (4.0 * p.dphi_max),
        Model::Mt => p.m0 * phi2 / (4.0 * p.dphi_max * (1.0 + 2.0 * p.phi_inf)),
    }
}

/// Spectral-gap envelope `max|eta_S0| + int_0^t q-bound`.
pub fn eta_envelope(model: Model, params: &EnvelopeParams) -> Result<BoundEnvelope> {
    params.validate()?;
    let limit = local_variation_limit(model, params);
    if params.v0 > limit {
        return Err(FlockError::EnvelopeInvalid(format!("V0 = {} exceeds the variation bound {limit}", params.v0)));
    }
    let amp = 2.0 * residual_amplitude(model, params.m0, params.v0, params.phi_inf, params.dphi_max);
    Ok(BoundEnvelope {
        kind: EnvelopeKind::EtaS,
        params: *params,
        shape: Shape::Integrated { base: params.eta0_max, amp, rate: params.kappa(model) },
    })
}

/// Constant vorticity bound: CS `max|omega0| + m0 phi_inf / 2`; MT the
/// integrated residual `max|omega0| + |phi'| V0 / phi_inf^2`.
pub fn vorticity_envelope(model: Model, params: &EnvelopeParams) -> Result<BoundEnvelope> {
    params.validate()?;
    let c = match model {
        Model::Cs => params.omega0_max + 0.5 * params.m0 * params.phi_inf,
        Model::Mt => params.omega0_max + params.dphi_max * params.v0 / (params.phi_inf * params.phi_inf),
    };
    Ok(BoundEnvelope { kind: EnvelopeKind::Vorticity, params: *params, shape: Shape::Constant(c) })
}

/// Lower and upper Riccati envelopes for `e`, started from `min e0` and `max e0`.
///
/// CS: `c_min^2 = (m0 phi_inf)^2 - eta_lim^2`, cap `m0^2 + 4 omega_max^2`.
/// MT: `c_min^2 = 1 - eta_lim^2 - 4 |phi'| V0 / phi_inf`, cap `3/2 + 2 omega_max^2`.
pub fn e_envelopes(model: Model, params: &EnvelopeParams) -> Result<(BoundEnvelope, BoundEnvelope)> {
    let eta = eta_envelope(model, params)?.limit();
    let omega = vorticity_envelope(model, params)?.limit();
    let (c_min_sq, cap_sq) = match model {
        Model::Cs => {
            let h = params.m0 * params.phi_inf;
            (h * h - eta * eta, params.m0 * params.m0 + 4.0 * omega * omega)
        }
        Model::Mt => {
            let r_max = 2.0 * params.dphi_max * params.v0 / params.phi_inf;
            (1.0 - eta * eta - 2.0 * r_max, 1.5 + 2.0 * omega * omega)
        }
    };
    if !(c_min_sq > 0.0) {
        return Err(FlockError::EnvelopeInvalid(format!("c_min^2 = {c_min_sq} is not positive")));
    }
    let c_min = c_min_sq.sqrt();
    let cap = cap_sq.sqrt();
    if !(params.e0_min > -c_min) || !(params.e0_max > -cap) {
        return Err(FlockError::EnvelopeInvalid(format!(
            "initial e range [{}, {}] lies below the Riccati basin",
            params.e0_min, params.e0_max
        )));
    }
    let lower = BoundEnvelope {
        kind: EnvelopeKind::ELower,
        params: *params,
        shape: Shape::Riccati { e0: params.e0_min, c: c_min },
    };
    let upper =
        BoundEnvelope { kind: EnvelopeKind::EUpper, params: *params, shape: Shape::Riccati { e0: params.e0_max, c: cap } };
    Ok((lower, upper))
}

/// Riccati envelope from explicit data, for callers that already know `c`.
pub fn riccati_envelope(kind: EnvelopeKind, params: &EnvelopeParams, e0: f64, c: f64) -> Result<BoundEnvelope> {
    if !(c > 0.0) || !(e0 > -c) {
        return Err(FlockError::EnvelopeInvalid(format!("Riccati envelope needs c > 0 and e0 > -c, got c = {c}, e0 = {e0}")));
    }
    Ok(BoundEnvelope { kind, params: *params, shape: Shape::Riccati { e0, c } })
}

/// A prescribed scalar function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    Constant { value: f64 },
    /// `amplitude exp(-rate t)`
    Exponential { amplitude: f64, rate: f64 },
}

impl Driver {
    pub fn constant(value: f64) -> Self {
        Driver::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Driver::Constant { value } => value,
            Driver::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
        }
    }
}

impl Default for Driver {
    fn default() -> Self {
        Driver::constant(0.0)
    }
}

/// Which closed comparison system to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabForm {
    /// CS `e' = e (h - e)`; MT `e' = e (1 - e) + r`.
    Strict1D,
    /// CS `e' = (h^2 - e^2) / 2`; MT `e' = (1 + 2r - e^2) / 2`.
    SimplifiedBound,
    /// CS `e' = (h^2 + 4 omega^2 - eta^2 - e^2) / 2`;
    /// MT `e' = (1 - eta^2 + 2r - e^2) / 2 + omega^2`;
    /// with `eta' + e eta = q` and `omega' + e omega = tr(JR) / 2`.
    TwoDFrozen,
}

/// Prescribed coefficients of the lab systems. When `e` is set it replaces
/// the `e` equation, leaving linear equations for `eta` and `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Forcing {
    /// `phi * rho` along the trajectory.
    pub conv_rho: Driver,
    pub q: Driver,
    pub tr_jr: Driver,
    /// Trace of the residual.
    pub r: Driver,
    pub e: Option<Driver>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabInit {
    pub e: f64,
    pub eta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabTrajectory {
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub eta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl LabTrajectory {
    /// CSV with columns `t, e, eta, omega, lower_env, upper_env`; envelope
    /// columns are empty when not supplied.
    pub fn write_csv<W: Write>(&self, w: W, envelopes: Option<(&BoundEnvelope, &BoundEnvelope)>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "e", "eta", "omega", "lower_env", "upper_env"])?;
        for k in 0..self.t.len() {
            let t = self.t[k];
            let (lo, hi) = match envelopes {
                Some((l, u)) => (l.bound(t).to_string(), u.bound(t).to_string()),
                None => (String::new(), String::new()),
            };
            wtr.write_record([t.to_string(), self.e[k].to_string(), self.eta[k].to_string(), self.omega[k].to_string(), lo, hi])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn lab_rhs(model: Model, form: LabForm, f: &Forcing, t: f64, y: [f64; 3]) -> [f64; 3] {
    let [e, eta, omega] = y;
    let h = f.conv_rho.eval(t);
    let r = f.r.eval(t);
    let (e_now, de) = match f.e {
        Some(drv) => (drv.eval(t), 0.0),
        None => {
            let de = match (form, model) {
                (LabForm::Strict1D, Model::Cs) => e * (h - e),
                (LabForm::Strict1D, Model::Mt) => e * (1.0 - e) + r,
                (LabForm::SimplifiedBound, Model::Cs) => 0.5 * (h * h - e * e),
                (LabForm::SimplifiedBound, Model::Mt) => 0.5 * (1.0 + 2.0 * r - e * e),
                (LabForm::TwoDFrozen, Model::Cs) => 0.5 * (h * h + 4.0 * omega * omega - eta * eta - e * e),
                (LabForm::TwoDFrozen, Model::Mt) => 0.5 * (1.0 - eta * eta + 2.0 * r - e * e) + omega * omega,
            };
            (e, de)
        }
    };
    match form {
        LabForm::TwoDFrozen => [de, f.q.eval(t) - e_now * eta, 0.5 * f.tr_jr.eval(t) - e_now * omega],
        _ => [de, 0.0, 0.0],
    }
}

/// Integrates the chosen comparison system by classical RK4 with step `dt`,
/// recording every step. One-dimensional forms keep `eta = omega = 0`.
pub fn lagrangian_lab(
    model: Model,
    form: LabForm,
    init: LabInit,
    forcing: &Forcing,
    t_end: f64,
    dt: f64,
) -> Result<LabTrajectory> {
    if !(t_end > 0.0 && dt > 0.0 && dt.is_finite()) {
        return Err(FlockError::domain(format!("lab needs t_end > 0 and dt > 0, got {t_end}, {dt}")));
    }
    let mut y = match form {
        LabForm::TwoDFrozen => [init.e, init.eta, init.omega],
        _ => [init.e, 0.0, 0.0],
    };
    if let Some(drv) = forcing.e {
        y[0] = drv.eval(0.0);
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut traj = LabTrajectory::default();
    let push = |traj: &mut LabTrajectory, t: f64, y: [f64; 3]| {
        traj.t.push(t);
        traj.e.push(y[0]);
        traj.eta.push(y[1]);
        traj.omega.push(y[2]);
    };
    push(&mut traj, 0.0, y);
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = lab_rhs(model, form, forcing, t, y);
        let k2 = lab_rhs(model, form, forcing, t + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = lab_rhs(model, form, forcing, t + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = lab_rhs(model, form, forcing, t + h, add(y, k3, h));
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let t1 = (i + 1) as f64 * h;
        if let Some(drv) = forcing.e {
            y[0] = drv.eval(t1);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FlockError::NonFinite(format!("lab trajectory at t = {t1}")));
        }
        push(&mut traj, t1, y);
    }
    Ok(traj)
}
