//! Shared test oracles: exact diagonalization in the full Fock space and a
//! few models that are not part of the library.
#![allow(dead_code)]

use mixtop::linalg::{self, CMatrix};
use mixtop::model::{bloch_matrix_from_d, BlochModel, DVector, MomentumPoint};
use num_complex::Complex64;
use rand::Rng;

/// `c^dagger_a c_b |s>` in the occupation basis with Jordan-Wigner signs
/// (mode 0 first). Returns the new state and sign, or `None` if it vanishes.
pub fn hop(s: usize, a: usize, b: usize) -> Option<(usize, f64)> {
    if s & (1 << b) == 0 {
        return None;
    }
    let below = |state: usize, m: usize| (state & ((1 << m) - 1)).count_ones();
    let mut sign = if below(s, b) % 2 == 1 { -1.0 } else { 1.0 };
    let t = s & !(1 << b);
    if t & (1 << a) != 0 {
        return None;
    }
    if below(t, a) % 2 == 1 {
        sign = -sign;
    }
    Some((t | (1 << a), sign))
}

/// Many-body matrix of `sum_ab c^dagger_a g_ab c_b` on `L` modes.
pub fn quadratic_operator(g: &CMatrix) -> CMatrix {
    let l = g.nrows();
    let dim = 1 << l;
    let mut h = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        for a in 0..l {
            for b in 0..l {
                if let Some((t, sign)) = hop(s, a, b) {
                    h[(t, s)] += g[(a, b)] * sign;
                }
            }
        }
    }
    h
}

/// `exp(-sum c^dagger g c) / Z` built by exact diagonalization.
pub fn gaussian_density_operator(g: &CMatrix) -> CMatrix {
    let h = quadratic_operator(g);
    let (e, v) = linalg::eigh(&h);
    let shift = e[0];
    let w: Vec<f64> = e.iter().map(|x| (-(x - shift)).exp()).collect();
    let z: f64 = w.iter().sum();
    let w: Vec<f64> = w.into_iter().map(|x| x / z).collect();
    linalg::reassemble(&w, &v)
}

/// `Tr[rho exp(i sum_a theta_a n_a)]` by direct enumeration.
pub fn fock_trace_diagonal(rho: &CMatrix, angles: &[f64]) -> Complex64 {
    (0..rho.nrows())
        .map(|s| {
            let phase: f64 = angles.iter().enumerate().filter(|(a, _)| s & (1 << a) != 0).map(|(_, t)| t).sum();
            rho[(s, s)] * Complex64::from_polar(1.0, phase)
        })
        .sum()
}

/// `<c^dagger_a c_b>` by direct enumeration.
pub fn fock_correlations(rho: &CMatrix, l: usize) -> CMatrix {
    CMatrix::from_fn(l, l, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..rho.nrows() {
            if let Some((t, sign)) = hop(s, a, b) {
                acc += rho[(s, t)] * sign;
            }
        }
        acc
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)));
    (&m + m.adjoint()).scale(0.5)
}

pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    linalg::polar_unitary(&m).unwrap()
}

/// Two-band charge pump on the `(k, t)` torus; `ky` plays the role of `t`.
#[derive(Debug, Clone, Copy)]
pub struct RiceMele {
    pub hopping: f64,
    pub dimerization: f64,
    pub staggering: f64,
}

impl Default for RiceMele {
    fn default() -> Self {
        Self { hopping: 1.0, dimerization: 0.5, staggering: 0.5 }
    }
}

impl RiceMele {
    pub fn d_vector(&self, k: f64, t: f64) -> DVector {
        let (j, d) = (self.hopping, self.dimerization);
        DVector::new(
            j + d * t.cos() + (j - d * t.cos()) * k.cos(),
            (j - d * t.cos()) * k.sin(),
            self.staggering * t.sin(),
        )
    }
}

impl BlochModel for RiceMele {
    fn dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, k: MomentumPoint) -> CMatrix {
        bloch_matrix_from_d(self.d_vector(k.kx, k.ky))
    }
}

/// The pump frozen at one value of `t`.
#[derive(Debug, Clone, Copy)]
pub struct RiceMeleAt {
    pub pump: RiceMele,
    pub t: f64,
}

impl BlochModel for RiceMeleAt {
    fn dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, k: MomentumPoint) -> CMatrix {
        bloch_matrix_from_d(self.pump.d_vector(k.kx, self.t))
    }
}

/// Two decoupled copies of a two-band model: block-diagonal 4-band model.
#[derive(Debug)]
pub struct Doubled<A, B>(pub A, pub B);

impl<A: BlochModel, B: BlochModel> BlochModel for Doubled<A, B> {
    fn dim(&self) -> usize {
        self.0.dim() + self.1.dim()
    }

    fn hamiltonian(&self, k: MomentumPoint) -> CMatrix {
        let (p, q) = (self.0.dim(), self.1.dim());
        let mut h = CMatrix::zeros(p + q, p + q);
        h.view_mut((0, 0), (p, p)).copy_from(&self.0.hamiltonian(k));
        h.view_mut((p, p), (q, q)).copy_from(&self.1.hamiltonian(k));
        h
    }
}
