mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use mixtop::egp::{self, DiagonalUnitarySpec};
use mixtop::gaussian::{self, GaussianStateSpec};
use mixtop::geometry::{self, StateGrid};
use mixtop::linalg::{self, principal, CMatrix};
use mixtop::model::{self, ConstantD, Direction, MomentumGrid, MomentumPoint, Qwz};
use mixtop::uhlmann::{self, thermal_density_k};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

#[test]
fn correlations_match_exact_diagonalization() {
    let mut rng = StdRng::seed_from_u64(7);
    for l in [1, 3, 5] {
        let g = random_hermitian(&mut rng, l, 2.0);
        let rho = gaussian_density_operator(&g);
        let exact = fock_correlations(&rho, l);
        let formula = gaussian::covariance_from_generator(&g);
        assert!(linalg::max_abs_diff(&exact, &formula) < 1e-12, "L = {l}");
    }
}

#[test]
fn determinant_formula_matches_fock_trace() {
    let mut rng = StdRng::seed_from_u64(11);
    for trial in 0..12 {
        let l = 1 + trial % 7;
        let g = random_hermitian(&mut rng, l, 3.0);
        let angles: Vec<f64> = (0..l).map(|_| rng.gen_range(-PI..PI)).collect();
        let rho = gaussian_density_operator(&g);
        let exact = fock_trace_diagonal(&rho, &angles);
        let m = gaussian::covariance_from_generator(&g);
        let got = egp::gaussian_trace_diagonal_unitary(&m, &DiagonalUnitarySpec { angles }).unwrap();
        assert!((got.log_det.value() - exact).norm() < 1e-10, "trial {trial}");
        assert!(exact.norm() <= 1.0 + 1e-10);
    }
}

/// Real-space single-particle Hamiltonian of an `n`-cell periodic chain.
fn chain_hamiltonian(model: &dyn model::BlochModel, direction: Direction, transverse_k: f64, n: usize) -> CMatrix {
    let p = model.dim();
    let mut out = CMatrix::zeros(n * p, n * p);
    for m in 0..n {
        let k = 2.0 * PI * m as f64 / n as f64;
        let h = model.hamiltonian(direction.point(k, transverse_k));
        for j in 0..n {
            for jp in 0..n {
                let phase = Complex64::from_polar(1.0 / n as f64, k * (j as f64 - jp as f64));
                for a in 0..p {
                    for b in 0..p {
                        out[(j * p + a, jp * p + b)] += h[(a, b)] * phase;
                    }
                }
            }
        }
    }
    out
}

#[test]
fn thermal_chain_egp_matches_many_body_trace() {
    for (n, beta, ky, mu) in [(3, 0.8, 0.4, 0.0), (4, 2.5, -1.9, 0.3), (3, 0.05, 2.2, -0.2)] {
        let model = Qwz::default();
        let h = chain_hamiltonian(&model, Direction::X, ky, n);
        let l = h.nrows();
        let g = (h - CMatrix::identity(l, l).scale(mu)).scale(beta);
        let rho = gaussian_density_operator(&g);
        let angles: Vec<f64> = (0..l).map(|a| 2.0 * PI * (a / 2) as f64 / n as f64).collect();
        let exact = fock_trace_diagonal(&rho, &angles);

        let spec = GaussianStateSpec::thermal(Arc::new(model), beta, mu).unwrap();
        let r = egp::egp_component(&spec, Direction::X, ky, n).unwrap();
        assert!((r.amplitude() - exact).norm() < 1e-10, "N={n}: {} vs {exact}", r.amplitude());
    }
}

#[test]
fn chain_matrix_matches_direct_fourier_sum() {
    let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), 1.3, 0.1).unwrap();
    let n = 7;
    let ky = 0.9;
    let chain = gaussian::chain_correlation_matrix(&spec, Direction::Y, ky, n).unwrap();
    let mut direct = CMatrix::zeros(2 * n, 2 * n);
    for m in 0..n {
        let k = 2.0 * PI * m as f64 / n as f64;
        let hf = gaussian::fictitious_hamiltonian(&spec, MomentumPoint::new(ky, k)).unwrap();
        for j in 0..n {
            for jp in 0..n {
                let phase = Complex64::from_polar(1.0 / n as f64, -k * (j as f64 - jp as f64));
                for a in 0..2 {
                    for b in 0..2 {
                        direct[(2 * j + a, 2 * jp + b)] += hf[(a, b)] * phase;
                    }
                }
            }
        }
    }
    assert!(linalg::max_abs_diff(&chain.entries, &direct) < 1e-14);
}

#[test]
fn atomic_limit_matches_closed_form() {
    // z = prod_lambda [(1 - n)^N - (-n)^N] for flat bands
    for n in [2, 3, 4, 7] {
        let beta = 0.6;
        let spec = GaussianStateSpec::thermal(Arc::new(ConstantD::atomic_limit()), beta, 0.0).unwrap();
        let z = egp::egp_component(&spec, Direction::X, 0.0, n).unwrap().amplitude();
        let expect: f64 = [1.0, -1.0]
            .iter()
            .map(|e| {
                let occ = linalg::fermi(beta * e);
                (1.0 - occ).powi(n as i32) - (-occ).powi(n as i32)
            })
            .product();
        assert!((z - Complex64::new(expect, 0.0)).norm() < 1e-12, "N={n}");
        let expected_phase = if n % 2 == 0 { PI } else { 0.0 };
        assert!(principal(z.arg() - expected_phase).abs() < 1e-12);
    }
}

#[test]
fn uhlmann_link_is_optimal() {
    let mut rng = StdRng::seed_from_u64(3);
    let a = thermal_density_k(&Qwz::default(), 0.9, 0.0, MomentumPoint::new(0.3, -1.2)).unwrap();
    let b = thermal_density_k(&Qwz::default(), 0.9, 0.0, MomentumPoint::new(1.4, 0.5)).unwrap();
    let x = b.sqrt_matrix() * a.sqrt_matrix();
    let v = uhlmann::uhlmann_link(&a, &b).unwrap();
    let best = (v.adjoint() * &x).trace().re;
    for _ in 0..10_000 {
        let u = random_unitary(&mut rng, 2);
        assert!((u.adjoint() * &x).trace().re <= best + 1e-12);
    }
    let fidelity: f64 = linalg::singular_values(&x).iter().sum();
    assert!((best - fidelity).abs() < 1e-12);
}

#[test]
fn uhlmann_link_identity_cases() {
    let a = thermal_density_k(&Qwz::default(), 1.1, 0.0, MomentumPoint::new(0.3, -1.2)).unwrap();
    let v = uhlmann::uhlmann_link(&a, &a).unwrap();
    assert!(linalg::max_abs_diff(&v, &CMatrix::identity(2, 2)) < 1e-13);
    // commuting pair: same eigenvectors, different weights
    let b = uhlmann::SpectralDensity { log_weights: vec![(0.3f64).ln(), (0.7f64).ln()], vectors: a.vectors.clone() };
    let v = uhlmann::uhlmann_link(&a, &b).unwrap();
    assert!(linalg::max_abs_diff(&v, &CMatrix::identity(2, 2)) < 1e-13);
}

#[test]
fn pump_matches_plaquette_chern_on_k_t_torus() {
    let pump = RiceMele::default();
    let grid = MomentumGrid::square(48).unwrap();
    let chern = geometry::chern_of_states(&StateGrid::bands(&pump, &grid, 0..1).unwrap()).unwrap();
    assert_eq!(chern.abs(), 1);
    for beta in [f64::INFINITY, 2.0, 0.3] {
        let family = |t: f64| GaussianStateSpec::thermal(Arc::new(RiceMeleAt { pump, t }), beta, 0.0);
        let (_, winding) = egp::pump_winding(family, Direction::X, 0.0, 10, 128).unwrap();
        assert_eq!(winding, chern, "beta = {beta}");
    }
}

#[test]
fn pump_of_constant_family_is_zero() {
    let family = |_t: f64| GaussianStateSpec::thermal(Arc::new(Qwz::default()), 1.0, 0.0);
    let (profile, winding) = egp::pump_winding(family, Direction::X, 0.4, 8, 16).unwrap();
    assert_eq!(winding, 0);
    assert!(profile.phases.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn pump_along_transverse_momentum_is_egp_winding() {
    let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), 0.5, 0.0).unwrap();
    let windings = egp::egp_windings(&spec, 10, 64).unwrap();
    // the x-chain at transverse momentum t, with t looping over the zone
    #[derive(Debug)]
    struct Frozen(Qwz, f64);
    impl model::BlochModel for Frozen {
        fn dim(&self) -> usize {
            2
        }
        fn hamiltonian(&self, k: MomentumPoint) -> CMatrix {
            self.0.hamiltonian(MomentumPoint::new(k.kx, self.1))
        }
    }
    let family = |t: f64| GaussianStateSpec::thermal(Arc::new(Frozen(Qwz::default(), t - PI)), 0.5, 0.0);
    let (_, winding) = egp::pump_winding(family, Direction::X, 0.0, 10, 64).unwrap();
    assert_eq!(winding, windings.cx);
}

#[test]
fn zak_profile_of_fictitious_band_matches_ground_state() {
    let grid = MomentumGrid::square(24).unwrap();
    let spec = GaussianStateSpec::thermal(Arc::new(Qwz::default()), 0.4, 0.0).unwrap();
    let fict = StateGrid::fictitious_filled(&spec, &grid).unwrap();
    let ground = StateGrid::occupied(&Qwz::default(), &grid, 0.0).unwrap();
    let a = geometry::zak_profile(&fict, Direction::X).unwrap();
    let b = geometry::zak_profile(&ground, Direction::X).unwrap();
    for (x, y) in a.phases.iter().zip(&b.phases) {
        assert!(principal(x - y).abs() < 1e-10);
    }
}
