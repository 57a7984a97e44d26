//! Numerical laboratory for Euler alignment ("flocking") hydrodynamics.
//!
//! The crate covers the Cucker-Smale (CS) and Motsch-Tadmor (MT) alignment
//! systems at three levels of description:
//!
//! - [`microdyn`]: the agent-based ODE system,
//! - [`hydro1d`]: a Lagrangian particle solver for the 1D pressureless
//!   alignment system that carries the velocity gradient exactly,
//! - [`hydro2d`]: an Eulerian finite-volume solver on a uniform grid with
//!   FFT-evaluated nonlocal forcing and constant far-field velocity.
//!
//! Around the solvers sit the influence kernels ([`kernels`]), pointwise
//! velocity-gradient algebra ([`matrixcalc`]), the scalar comparison
//! dynamics that drive the critical-threshold arguments ([`comparison`]),
//! and flocking post-processing ([`flockdiag`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod error;
pub mod flockdiag;
pub mod geometry;
pub mod hydro1d;
pub mod hydro2d;
pub mod kernels;
pub mod matrixcalc;
pub mod microdyn;
pub mod profiles;
pub mod quadrature;
pub mod verdict;

use serde::{Deserialize, Serialize};

pub use error::{FlockError, Result};
pub use kernels::{InfluenceKernel, KernelFamily, RadialKernel, Tail};
pub use matrixcalc::VelGradDecomp;
pub use verdict::{BlowupReason, Location, Outcome, ThresholdVerdict, Verdict};

/// Which alignment normalization is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Cucker-Smale: symmetric kernel, momentum conserving.
    Cs,
    /// Motsch-Tadmor: kernel normalized by the local density convolution.
    Mt,
}

impl Model {
    pub fn id(self) -> u32 {
        match self {
            Model::Cs => 0,
            Model::Mt => 1,
        }
    }

    pub fn from_id(id: u32) -> Option<Model> {
        match id {
            0 => Some(Model::Cs),
            1 => Some(Model::Mt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Cs => "cs",
            Model::Mt => "mt",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
