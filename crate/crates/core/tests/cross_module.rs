use flocking_core::flockdiag::{self, TimeSeries};
use flocking_core::hydro1d::{self, ParticleState1D, StepControl};
use flocking_core::hydro2d::{Grid, GridParams, GridState2D};
use flocking_core::kernels::{self, check_variation_bound};
use flocking_core::microdyn::{self, AgentEnsemble};
use flocking_core::profiles::{DensityProfile, VelocityProfile, VelocityTerm, Window};
use flocking_core::{FlockError, InfluenceKernel, Model, Outcome, RadialKernel, Verdict};

fn gaussian(mass: f64, sigma: f64) -> DensityProfile {
    DensityProfile::GaussianBump { mass, sigma, cutoff: 3.0, center: [0.0, 0.0] }
}

fn velocity(terms: Vec<VelocityTerm>, window: Option<Window>) -> VelocityProfile {
    VelocityProfile { terms, window, center: [0.0, 0.0] }
}

fn grid_state(model: Model, density: &DensityProfile, v: &VelocityProfile, n: usize) -> GridState2D {
    let kernel = InfluenceKernel::exponential(5.0).unwrap();
    GridState2D::from_profiles(model, kernel, Grid::new(n, 16.0).unwrap(), density, v, GridParams::default()).unwrap()
}

#[test]
fn zero_density_convolves_to_zero_and_pairs_agree() {
    let s = grid_state(Model::Cs, &gaussian(1.0, 0.7), &VelocityProfile::constant([0.1, 0.0]), 32);
    let conv = s.convolver();
    assert!(conv.convolve(&vec![0.0; 32 * 32]).iter().all(|&v| v == 0.0));
    let a = conv.convolve(&s.rho);
    let b = conv.convolve(&s.u1);
    let (pa, pb) = conv.convolve_pair(&s.rho, &s.u1);
    for k in 0..a.len() {
        assert!((a[k] - pa[k]).abs() < 1e-13 && (b[k] - pb[k]).abs() < 1e-13);
    }
}

#[test]
fn constant_velocity_grid_state_is_a_flock() {
    let mut s = grid_state(Model::Cs, &gaussian(1.0, 0.7), &VelocityProfile::constant([0.2, -0.1]), 32);
    let row = s.diagnostics().unwrap();
    assert_eq!((row.v, row.max_grad_norm), (0.0, 0.0));
    assert!(row.min_e > 0.0);
    let (f1, f2) = s.alignment_force().unwrap();
    assert!(f1.iter().chain(&f2).all(|f| f.abs() < 1e-14));
    let run = s.run(2.0, None).unwrap();
    assert_eq!(run.outcome, Outcome::Completed);
    for r in &run.rows {
        assert!(r.v < 1e-12 && r.max_abs_div < 1e-12 && r.max_abs_omega < 1e-12);
        assert!((r.mass - row.mass).abs() < 1e-10);
    }
}

#[test]
fn strong_compression_is_supercritical_where_the_convolution_is_smallest() {
    let density = gaussian(1.0, 0.7);
    let calm = grid_state(Model::Cs, &density, &VelocityProfile::constant([0.0, 0.0]), 64);
    let report = calm.threshold_report().unwrap();
    assert_eq!(report.verdict, Verdict::SubCritical);
    let conv = calm.conv_density();
    let mask = calm.neighborhood(&calm.support(), report.d_inf.unwrap());
    let n = calm.grid.n;
    let min_conv = (0..n * n)
        .filter(|&k| mask[k] && !calm.grid.is_ring(k % n, k / n))
        .map(|k| conv[k])
        .fold(f64::INFINITY, f64::min);
    assert!((report.divergence_margin - min_conv).abs() < 1e-12);

    let delta = 0.5 * min_conv * 1.05;
    let s = grid_state(Model::Cs, &density, &velocity(vec![VelocityTerm::LinearCompression { delta }], None), 64);
    let r = s.threshold_report().unwrap();
    assert_eq!(r.verdict, Verdict::SuperCritical);
    assert!(r.divergence_margin < 0.0);
}

#[test]
fn slow_rotation_passes_pointwise_conditions() {
    let v = velocity(vec![VelocityTerm::RigidRotation { omega: 0.01 }], None);
    let s = grid_state(Model::Cs, &gaussian(1.0, 0.7), &v, 64);
    let r = s.threshold_report().unwrap();
    assert!(r.divergence_margin > 0.0);
    assert!(r.gap_margin.unwrap() > 0.0);
    assert!(r.max_eta_s0.unwrap() < 1e-10, "{r:?}");
    let holds = r.variation_slack.is_some_and(|m| m >= 0.0);
    assert_eq!(r.verdict == Verdict::SubCritical, holds);
}

#[test]
fn grid_and_agent_diameters_agree_to_the_cell_size() {
    let disk = DensityProfile::UniformDisk { mass: 1.0, radius: 2.0, center: [0.0, 0.0] };
    let v = velocity(vec![VelocityTerm::RigidRotation { omega: 0.1 }], None);
    let s = grid_state(Model::Cs, &disk, &v, 64);
    let dx = s.grid.dx();
    let (gd, gv) = flockdiag::diameters(&s).unwrap();
    let kernel = InfluenceKernel::exponential(5.0).unwrap();
    let agents = microdyn::sample_from_macro(2, Model::Cs, kernel, &disk, &v, 4000, 3).unwrap();
    let (ad, av) = flockdiag::diameters(&agents).unwrap();
    assert!((gd - ad).abs() <= 2.0 * dx, "grid {gd} agents {ad}");
    assert!((gd - 4.0).abs() <= 2.0 * dx);
    assert!((gv - av).abs() <= 0.1 * 2.0 * dx, "grid {gv} agents {av}");
}

#[test]
fn two_body_series_fits_the_total_mass_rate() {
    let kernel = InfluenceKernel::power_law(0.0).unwrap();
    let mut e = AgentEnsemble::new_1d(Model::Cs, kernel, &[-0.5, 0.5], &[1.0, -1.0], &[1.0, 1.0]).unwrap();
    assert_eq!(flockdiag::estimate_u_bar(Model::Cs, &e, &e).unwrap(), [0.0, 0.0]);
    let rows = e.run(3.0, 1e-3, 30).unwrap();
    let series =
        TimeSeries::new("V", rows.iter().map(|r| r.t).collect(), rows.iter().map(|r| r.v).collect()).unwrap();
    let fit = flockdiag::fit_decay_rate(&series, (0.0, 3.0)).unwrap();
    assert!((fit.rate - 2.0).abs() < 1e-3, "{fit:?}");
    let last = rows.last().unwrap();
    assert!((last.v - 2.0 * (-2.0 * last.t).exp()).abs() < 1e-9);
}

#[test]
fn gaussian_quantile_sample_is_within_kolmogorov_distance() {
    let density = gaussian(1.0, 0.5);
    let n = 2000;
    let kernel = InfluenceKernel::exponential(1.0).unwrap();
    let e = microdyn::sample_from_macro(1, Model::Cs, kernel, &density, &VelocityProfile::default(), n, 0).unwrap();
    let line = density.line().unwrap();
    let (lo, _) = line.support();
    let mut worst: f64 = 0.0;
    for (k, p) in e.positions.iter().enumerate() {
        let cdf = flocking_core::quadrature::integrate(|y| line.eval(y), lo, p[0], 1e-12) / line.mass();
        worst = worst.max((cdf - (k as f64 + 0.5) / n as f64).abs());
    }
    assert!(worst <= 2.0 / n as f64, "{worst}");
}

#[test]
fn bisection_contract_under_tolerance_halving() {
    let kernel = InfluenceKernel::exponential(2.0).unwrap();
    let density = gaussian(1.0, 0.5);
    let ctrl = StepControl::default();
    let outcome = |a: f64| {
        let v = velocity(vec![VelocityTerm::BumpCompression { amplitude: a, half_width: 1.5 }], None);
        ParticleState1D::from_profiles(Model::Cs, kernel, &density, &v, 60)?.run(8.0, &ctrl).map(|r| r.outcome)
    };
    let coarse = hydro1d::bisect_threshold(outcome, 0.05, 1.5, 0.02).unwrap();
    let fine = hydro1d::bisect_threshold(outcome, 0.05, 1.5, 0.01).unwrap();
    assert!((coarse.a_star - fine.a_star).abs() <= 0.02);
    assert!(fine.runs <= ((1.5f64 - 0.05) / 0.01).log2().ceil() as usize);
    assert!(matches!(hydro1d::bisect_threshold(outcome, 0.1, 0.1, 0.01), Err(FlockError::Bracket(_))));
}

#[test]
fn subcritical_1d_run_respects_diameter_and_rate() {
    let kernel = InfluenceKernel::exponential(2.0).unwrap();
    let v = velocity(vec![VelocityTerm::BumpCompression { amplitude: 0.1, half_width: 1.5 }], None);
    let mut s = ParticleState1D::from_profiles(Model::Cs, kernel, &gaussian(1.0, 0.5), &v, 200).unwrap();
    let verdict = hydro1d::classify_threshold_1d(&s).unwrap();
    assert_eq!(verdict.verdict, Verdict::SubCritical);
    let (d0, v0) = s.diameters();
    let check = check_variation_bound(&kernel, Model::Cs, s.total_mass(), d0, v0).unwrap();
    let kappa = kernels::decay_rate(Model::Cs, s.total_mass(), check.phi_inf);
    let ctrl = StepControl { output_interval: 0.1, ..StepControl::default() };
    let run = s.run(20.0, &ctrl).unwrap();
    assert_eq!(run.outcome, Outcome::Completed);
    assert!(run.rows.iter().all(|r| r.d <= check.d_inf + 1e-9 && r.min_e >= -1e-6));
    let series = TimeSeries::new("V", run.rows.iter().map(|r| r.t).collect(), run.rows.iter().map(|r| r.v).collect())
        .unwrap();
    let fit = flockdiag::fit_decay_rate(&series, series.second_half().unwrap()).unwrap();
    assert!(fit.rate >= 0.9 * kappa, "rate {} kappa {kappa}", fit.rate);
    assert!(kernel.phi(check.d_inf) == check.phi_inf);
}
