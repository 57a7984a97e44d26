//! Shared fixtures for the solver benchmarks.

use flocking_core::hydro1d::ParticleState1D;
use flocking_core::hydro2d::{Grid, GridParams, GridState2D};
use flocking_core::microdyn::{self, AgentEnsemble};
use flocking_core::profiles::{DensityProfile, VelocityProfile, VelocityTerm, Window};
use flocking_core::{InfluenceKernel, Model};

pub fn gaussian(sigma: f64) -> DensityProfile {
    DensityProfile::GaussianBump { mass: 1.0, sigma, cutoff: 3.0, center: [0.0, 0.0] }
}

pub fn compression(delta: f64) -> VelocityProfile {
    VelocityProfile {
        terms: vec![VelocityTerm::LinearCompression { delta }, VelocityTerm::RigidRotation { omega: delta }],
        window: Some(Window { inner: 2.5, outer: 6.0 }),
        center: [0.0, 0.0],
    }
}

pub fn grid_state(model: Model, n: usize) -> GridState2D {
    let kernel = InfluenceKernel::exponential(5.0).expect("kernel");
    let grid = Grid::new(n, 16.0).expect("grid");
    GridState2D::from_profiles(model, kernel, grid, &gaussian(0.7), &compression(0.02), GridParams::default())
        .expect("grid state")
}

pub fn particle_state(model: Model, n: usize) -> ParticleState1D {
    let kernel = InfluenceKernel::exponential(2.0).expect("kernel");
    let v = VelocityProfile {
        terms: vec![VelocityTerm::BumpCompression { amplitude: 0.1, half_width: 1.5 }],
        ..VelocityProfile::default()
    };
    ParticleState1D::from_profiles(model, kernel, &gaussian(0.5), &v, n).expect("particle state")
}

pub fn agents(dim: usize, n: usize) -> AgentEnsemble {
    let kernel = InfluenceKernel::exponential(2.0).expect("kernel");
    microdyn::sample_from_macro(dim, Model::Cs, kernel, &gaussian(0.5), &compression(0.05), n, 11).expect("agents")
}
