//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on small-to-moderate `DMatrix<Complex64>` values:
//! Bloch matrices are `p x p`, chain correlation matrices are `pN x pN`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest entrywise deviation `max |m - m^dagger|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Largest entrywise deviation of `u^dagger u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let g = u.adjoint() * u;
    let mut err = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((g[(i, j)] - target).norm());
        }
    }
    err
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn symmetrized(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Rotates `v` so that its largest-magnitude component is real and positive.
/// The first index wins on exact ties.
pub fn fix_gauge(v: &mut CVector) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best].conj() / best_abs;
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// gauge-fixed orthonormal eigenvectors as columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = symmetrized(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v: CVector = eig.eigenvectors.column(i).into_owned();
        fix_gauge(&mut v);
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// `V diag(values) V^dagger`.
pub fn reassemble(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &w) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(w);
    }
    scaled * vectors.adjoint()
}

/// Applies a real function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    let mapped: Vec<f64> = values.into_iter().map(f).collect();
    reassemble(&mapped, &vectors)
}

/// Fermi factor `1 / (e^x + 1)`, evaluated without overflow for any finite `x`.
pub fn fermi(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (x.exp() + 1.0)
    }
}

/// Occupation matrix `(e^g + 1)^{-1} = [1 - tanh(g/2)] / 2` of a Hermitian generator `g`.
pub fn fermi_matrix(g: &CMatrix) -> CMatrix {
    hermitian_function(g, fermi)
}

/// `log(sum(exp(x)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Determinant kept in polar log form so that large matrices neither
/// overflow nor underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    /// `ln |det|`; `-inf` for an exactly singular matrix.
    pub log_modulus: f64,
    /// `arg det` in (-pi, pi].
    pub phase: f64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.log_modulus.exp(), self.phase)
    }
}

/// Wraps an angle into the principal interval (-pi, pi].
pub fn principal(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Determinant via partial-pivot LU, accumulating log-magnitudes and phases
/// of the pivots.
pub fn log_det(a: &CMatrix) -> LogDet {
    let lu = a.clone().lu();
    let sign: f64 = lu.p().determinant();
    let u = lu.u();
    let mut log_modulus = 0.0;
    let mut phase = if sign < 0.0 { std::f64::consts::PI } else { 0.0 };
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        log_modulus += d.norm().ln();
        phase += d.arg();
    }
    LogDet { log_modulus, phase: principal(phase) }
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Unitary polar factor `W Z^dagger` of `a = W S Z^dagger`.
pub fn polar_unitary(a: &CMatrix) -> Result<CMatrix> {
    let svd = a.clone().svd(true, true);
    let w = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let zt = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V^dagger".into()))?;
    Ok(w * zt)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Pauli matrices `sigma_x, sigma_y, sigma_z`.
pub fn pauli() -> [CMatrix; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fermi_is_stable_at_large_arguments() {
        assert_eq!(fermi(1e4), 0.0);
        assert_eq!(fermi(-1e4), 1.0);
        assert!((fermi(0.0) - 0.5).abs() < 1e-16);
        for &x in &[-3.0, -0.1, 0.7, 12.0] {
            let tanh_form = 0.5 * (1.0 - (x / 2.0f64).tanh());
            assert!((fermi(x) - tanh_form).abs() < 1e-15);
        }
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let m = CMatrix::from_fn(4, 4, |i, j| {
            Complex64::new((i as f64 + 1.0) * 0.3 - j as f64 * 0.1, (i * j) as f64 * 0.2 - 0.4)
        }) + CMatrix::identity(4, 4);
        let ld = log_det(&m);
        let direct = m.determinant();
        assert!((ld.value() - direct).norm() < 1e-12 * direct.norm().max(1.0));
    }

    #[test]
    fn eigh_sorts_and_fixes_gauge() {
        let [_, _, sz] = pauli();
        let (vals, vecs) = eigh(&sz);
        assert_eq!(vals, vec![-1.0, 1.0]);
        assert_eq!(vecs[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(vecs[(0, 1)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn principal_branch() {
        use std::f64::consts::PI;
        assert!((principal(3.0 * PI) - PI).abs() < 1e-12);
        assert!((principal(-PI) - PI).abs() < 1e-12);
        assert!((principal(0.25) - 0.25).abs() < 1e-15);
    }
}
