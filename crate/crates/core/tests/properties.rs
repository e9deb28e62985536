mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use mixtop::egp::{self, DiagonalUnitarySpec};
use mixtop::gaussian::{self, GaussianStateSpec};
use mixtop::geometry::{self, PhaseKind, PhaseProfile, StateGrid};
use mixtop::io;
use mixtop::linalg::{self, principal, CMatrix};
use mixtop::model::{BlochModel, Direction, MomentumGrid, MomentumPoint, Qwz};
use mixtop::uhlmann::{self, DensityMatrixPath};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn rotate_frames(states: &StateGrid, seed: u64) -> StateGrid {
    let mut rng = StdRng::seed_from_u64(seed);
    let frames = states
        .frames
        .iter()
        .map(|f| f * random_unitary(&mut rng, f.ncols()))
        .collect();
    StateGrid::new(states.grid, frames).unwrap()
}

fn two_filled_bands() -> Doubled<Qwz, Qwz> {
    Doubled(Qwz::default(), Qwz { alpha: 1.5, gamma: 0.7, mass: -1.2 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn principal_lies_in_half_open_interval(x in -1e3f64..1e3) {
        let p = principal(x);
        prop_assert!(p > -PI && p <= PI);
        prop_assert!(((x - p) / (2.0 * PI) - ((x - p) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn bloch_matrix_is_periodic(kx in -PI..PI, ky in -PI..PI, a in -2i32..3, b in -2i32..3) {
        let m = Qwz::default();
        let h0 = m.hamiltonian(MomentumPoint { kx, ky });
        let h1 = m.hamiltonian(MomentumPoint { kx: kx + 2.0 * PI * a as f64, ky: ky + 2.0 * PI * b as f64 });
        prop_assert!(linalg::max_abs_diff(&h0, &h1) < 1e-12);
    }

    #[test]
    fn fictitious_hamiltonian_is_a_correlation_matrix(
        beta in 0.01f64..50.0, mu in -0.9f64..0.9, kx in -PI..PI, ky in -PI..PI,
    ) {
        let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), beta, mu).unwrap();
        let hf = gaussian::fictitious_hamiltonian(&spec, MomentumPoint::new(kx, ky)).unwrap();
        prop_assert!(linalg::hermitian_deviation(&hf) < 1e-14);
        let (values, _) = linalg::eigh(&hf);
        prop_assert!(values.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn zak_phase_is_gauge_invariant(seed in any::<u64>(), ky in -PI..PI) {
        let model = two_filled_bands();
        let frames: Vec<CMatrix> = mixtop::model::loop_samples(96)
            .into_iter()
            .map(|kx| mixtop::model::band_system(&model.hamiltonian(MomentumPoint::new(kx, ky))).unwrap().frame(0..2))
            .collect();
        let mut rng = StdRng::seed_from_u64(seed);
        let rotated: Vec<CMatrix> = frames.iter().map(|f| f * random_unitary(&mut rng, 2)).collect();
        let a = geometry::zak_phase_wilson(&frames).unwrap();
        let b = geometry::zak_phase_wilson(&rotated).unwrap();
        prop_assert!(principal(a - b).abs() < 1e-10);
    }

    #[test]
    fn plaquette_field_is_gauge_invariant(seed in any::<u64>()) {
        let grid = MomentumGrid::square(12).unwrap();
        let states = StateGrid::bands(&two_filled_bands(), &grid, 0..2).unwrap();
        let f0 = geometry::berry_curvature_plaquette(&states).unwrap();
        let f1 = geometry::berry_curvature_plaquette(&rotate_frames(&states, seed)).unwrap();
        for (a, b) in f0.values.iter().zip(&f1.values) {
            prop_assert!(principal(a - b).abs() < 1e-10);
        }
        prop_assert!((f0.total() - f1.total()).abs() < 1e-10);
    }

    #[test]
    fn uhlmann_phase_is_amplitude_gauge_invariant(seed in any::<u64>(), beta in 0.2f64..2.0, kt in -PI..PI) {
        // the direct amplitude route squares the condition number of sqrt(rho); keep it well conditioned
        let path = DensityMatrixPath::thermal(&Qwz::default(), Direction::Y, kt, beta, 48).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let gauges: Vec<CMatrix> = (0..path.len()).map(|_| random_unitary(&mut rng, 2)).collect();
        let a = uhlmann::uhlmann_phase(&path).unwrap();
        let b = uhlmann::uhlmann_phase_in_amplitude_gauge(&path, &gauges).unwrap();
        prop_assert!(principal(a - b).abs() < 1e-10);
    }

    #[test]
    fn uhlmann_links_and_holonomy_are_unitary(beta in 0.05f64..8.0, kt in -PI..PI) {
        let path = DensityMatrixPath::thermal(&Qwz::default(), Direction::X, kt, beta, 64).unwrap();
        let h = uhlmann::uhlmann_holonomy(&path).unwrap();
        prop_assert!(linalg::unitarity_error(&h.matrix) < 1e-10);
        let v = uhlmann::uhlmann_link(&path.states[5], &path.states[6]).unwrap();
        prop_assert!(linalg::unitarity_error(&v) < 1e-12);
    }

    #[test]
    fn gaussian_trace_is_bounded(seed in any::<u64>(), l in 1usize..12) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = random_hermitian(&mut rng, l, 4.0);
        let m = gaussian::covariance_from_generator(&g);
        let angles = (0..l).map(|_| rng.gen_range(-PI..PI)).collect();
        let t = egp::gaussian_trace_diagonal_unitary(&m, &DiagonalUnitarySpec { angles }).unwrap();
        prop_assert!(t.log_det.log_modulus <= 1e-10);
    }

    #[test]
    fn egp_ignores_orbital_basis_within_cells(seed in any::<u64>(), beta in 0.1f64..5.0, kt in -PI..PI) {
        let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), beta, 0.0).unwrap();
        let n = 5;
        let chain = gaussian::chain_correlation_matrix(&spec, Direction::X, kt, n).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let w = random_unitary(&mut rng, 2);
        let mut big = CMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            big.view_mut((2 * j, 2 * j), (2, 2)).copy_from(&w);
        }
        let rotated = &big * &chain.entries * big.adjoint();
        let u = DiagonalUnitarySpec::cell_translation(n, 2);
        let a = egp::gaussian_trace_diagonal_unitary(&chain.entries, &u).unwrap().log_det;
        let b = egp::gaussian_trace_diagonal_unitary(&rotated, &u).unwrap().log_det;
        prop_assert!((a.log_modulus - b.log_modulus).abs() < 1e-10);
        prop_assert!(principal(a.phase - b.phase).abs() < 1e-10);
    }

    #[test]
    fn winding_ignores_offsets_and_flips_with_orientation(
        steps in prop::collection::vec(-2.5f64..2.5, 3..40), offset in -10.0f64..10.0,
    ) {
        let mut acc = 0.0;
        let phases: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
        let p = PhaseProfile::on_loop(PhaseKind::Zak, phases.clone()).unwrap();
        if let Ok(w) = geometry::winding_of_phase_profile(&p) {
            let shifted = PhaseProfile::on_loop(PhaseKind::Zak, phases.iter().map(|x| x + offset).collect()).unwrap();
            prop_assert_eq!(geometry::winding_of_phase_profile(&shifted).unwrap(), w);
            prop_assert_eq!(geometry::winding_of_phase_profile(&p.reversed()).unwrap(), -w);
        }
    }

    #[test]
    fn phase_profile_csv_roundtrips(values in prop::collection::vec(-PI..PI, 2..30)) {
        let p = PhaseProfile::on_loop(PhaseKind::Egp, values).unwrap();
        let back = io::parse_phase_profile_csv(&io::phase_profile_csv(&p).unwrap(), PhaseKind::Egp).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn matrix_grid_roundtrips(seed in any::<u64>(), p in 1usize..4, nx in 2usize..5, ny in 2usize..5) {
        let mut rng = StdRng::seed_from_u64(seed);
        let grid = MomentumGrid::new(nx, ny).unwrap();
        let values = (0..grid.len())
            .map(|_| CMatrix::from_fn(p, p, |_, _| Complex64::new(rng.gen::<f64>() * 1e3 - 5e2, rng.gen::<f64>() * 1e-7)))
            .collect();
        let t = mixtop::model::MatrixGrid::new(grid, p, values).unwrap();
        prop_assert_eq!(io::parse_matrix_grid(&io::matrix_grid_text(&t)).unwrap(), t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn qwz_chern_follows_mass(mass in prop_oneof![0.3f64..1.7, -1.7f64..-0.3, 2.3f64..4.0, -4.0f64..-2.3]) {
        let model = Qwz { mass, ..Qwz::default() };
        let grid = MomentumGrid::square(24).unwrap();
        let c = geometry::chern_of_states(&StateGrid::bands(&model, &grid, 0..1).unwrap()).unwrap();
        let expected = if mass.abs() > 2.0 { 0 } else { mass.signum() as i64 };
        prop_assert_eq!(c, expected);
    }

    #[test]
    fn egp_winding_is_size_independent(log_t in -1.0f64..1.5) {
        let t = 2.0 * 10f64.powf(log_t);
        let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), 1.0 / t, 0.0).unwrap();
        let w: Vec<(i64, i64)> = [6, 10, 20]
            .iter()
            .map(|&n| { let r = egp::egp_windings(&spec, n, 64).unwrap(); (r.cx, r.cy) })
            .collect();
        prop_assert!(w.iter().all(|&c| c == (1, 1)), "{:?}", w);
    }

    #[test]
    fn fictitious_bands_share_chern_numbers(log_t in -1.0f64..1.0) {
        let beta = 1.0 / (2.0 * 10f64.powf(log_t));
        let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), beta, 0.0).unwrap();
        let grid = MomentumGrid::square(16).unwrap();
        prop_assert_eq!(
            geometry::fictitious_band_chern_numbers(&spec, &grid).unwrap(),
            geometry::band_chern_numbers(&Qwz::default(), &grid).unwrap()
        );
    }
}
