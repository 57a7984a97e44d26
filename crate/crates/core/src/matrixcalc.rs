//! Pointwise algebra of a 2x2 velocity gradient `M_ij = d_j u_i`.
//!
//! `M = S + Omega` splits into the symmetric part `S` (eigenvalues
//! `mu1 <= mu2`, spectral gap `eta_s = mu2 - mu1`) and the rotation
//! `Omega = [[0, -omega], [omega, 0]]` with scaled vorticity
//! `omega = (d_1 u_2 - d_2 u_1) / 2`. The squared spectral gap of `M`
//! itself, `eta_m_sq = (lambda2 - lambda1)^2`, is negative when `M` has
//! complex eigenvalues and satisfies `eta_m_sq = eta_s^2 - 4 omega^2`.

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelGradDecomp {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    /// Trace, i.e. the divergence.
    pub d: f64,
    pub omega: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub eta_s: f64,
    pub eta_m_sq: f64,
}

impl VelGradDecomp {
    /// `tr(M^2)`.
    pub fn trace_sq(&self) -> f64 {
        self.m11 * self.m11 + 2.0 * self.m12 * self.m21 + self.m22 * self.m22
    }

    /// Frobenius norm of `M`.
    pub fn norm(&self) -> f64 {
        (self.m11 * self.m11 + self.m12 * self.m12 + self.m21 * self.m21 + self.m22 * self.m22).sqrt()
    }
}

/// Decomposes `M = [[m11, m12], [m21, m22]]`.
pub fn decompose(m11: f64, m12: f64, m21: f64, m22: f64) -> Result<VelGradDecomp> {
    if ![m11, m12, m21, m22].iter().all(|v| v.is_finite()) {
        return Err(FlockError::NonFinite(format!("gradient [[{m11}, {m12}], [{m21}, {m22}]]")));
    }
    Ok(decompose_unchecked(m11, m12, m21, m22))
}

/// [`decompose`] without the finiteness check, for hot loops over fields.
pub fn decompose_unchecked(m11: f64, m12: f64, m21: f64, m22: f64) -> VelGradDecomp {
    let d = m11 + m22;
    let omega = 0.5 * (m21 - m12);
    let eta_s = (m11 - m22).hypot(m12 + m21);
    let trace_sq = m11 * m11 + 2.0 * m12 * m21 + m22 * m22;
    VelGradDecomp {
        m11,
        m12,
        m21,
        m22,
        d,
        omega,
        mu1: 0.5 * (d - eta_s),
        mu2: 0.5 * (d + eta_s),
        eta_s,
        eta_m_sq: 2.0 * trace_sq - d * d,
    }
}

/// The threshold variable: `e = d + phi*rho` (CS) or `e = d + 1` (MT).
pub fn e_variable(decomp: &VelGradDecomp, conv_rho: f64, model: Model) -> f64 {
    e_from_divergence(decomp.d, conv_rho, model)
}

pub fn e_from_divergence(d: f64, conv_rho: f64, model: Model) -> f64 {
    match model {
        Model::Cs => d + conv_rho,
        Model::Mt => d + 1.0,
    }
}
