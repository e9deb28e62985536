//! Bloch Hamiltonians on a discretized two-dimensional Brillouin zone.
//!
//! Momenta are dimensionless (lattice constant 1) and energies are in units of
//! the hopping amplitude. Grids start at `-pi` inclusive and exclude `+pi`;
//! loop constructions close by wrapping the last index back to the first.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Tolerance for treating an eigenvalue as sitting on the Fermi level.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Hermiticity tolerance accepted by [`band_system`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A lattice momentum with both components reduced into `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumPoint {
    pub kx: f64,
    pub ky: f64,
}

pub fn reduce_angle(k: f64) -> f64 {
    let r = (k + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2 pi
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}

impl MomentumPoint {
    pub fn new(kx: f64, ky: f64) -> Self {
        Self { kx: reduce_angle(kx), ky: reduce_angle(ky) }
    }
}

/// Chain direction of a one-dimensional cut through the 2D lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    X,
    Y,
}

impl Direction {
    /// Momentum with `along` on this axis and `transverse` on the other.
    pub fn point(self, along: f64, transverse: f64) -> MomentumPoint {
        match self {
            Direction::X => MomentumPoint::new(along, transverse),
            Direction::Y => MomentumPoint::new(transverse, along),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Direction::X => Direction::Y,
            Direction::Y => Direction::X,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::X => "x",
            Direction::Y => "y",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(Direction::X),
            "y" | "Y" => Ok(Direction::Y),
            other => Err(Error::InvalidInput(format!("unknown direction `{other}`"))),
        }
    }
}

/// `n` uniformly spaced samples `-pi + 2 pi j / n` of a closed loop.
pub fn loop_samples(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

/// Uniform periodic `nx x ny` sampling of the Brillouin zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentumGrid {
    nx: usize,
    ny: usize,
}

impl MomentumGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!(
                "momentum grid needs at least 2 samples per axis, got {nx} x {ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kx(&self, i: usize) -> f64 {
        -PI + 2.0 * PI * (i % self.nx) as f64 / self.nx as f64
    }

    pub fn ky(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * (j % self.ny) as f64 / self.ny as f64
    }

    /// Grid point `(i, j)`; indices wrap periodically.
    pub fn point(&self, i: usize, j: usize) -> MomentumPoint {
        MomentumPoint { kx: self.kx(i), ky: self.ky(j) }
    }

    /// Flat index, `i` outer and `j` inner.
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i % self.nx) * self.ny + (j % self.ny)
    }

    /// All points in flat-index order.
    pub fn points(&self) -> Vec<MomentumPoint> {
        (0..self.nx)
            .flat_map(|i| (0..self.ny).map(move |j| (i, j)))
            .map(|(i, j)| self.point(i, j))
            .collect()
    }

    /// Number of samples along the given axis.
    pub fn samples_along(&self, direction: Direction) -> usize {
        match direction {
            Direction::X => self.nx,
            Direction::Y => self.ny,
        }
    }

    /// Grid index of a momentum lying on the grid (tolerance 1e-9).
    pub fn locate(&self, k: MomentumPoint) -> Result<(usize, usize)> {
        let find = |v: f64, n: usize| -> Option<usize> {
            let x = (reduce_angle(v) + PI) / (2.0 * PI) * n as f64;
            let idx = x.round();
            ((x - idx).abs() * 2.0 * PI / n as f64 <= 1e-9).then(|| idx as usize % n)
        };
        match (find(k.kx, self.nx), find(k.ky, self.ny)) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(Error::InvalidInput(format!(
                "k = ({:.6}, {:.6}) is not a point of the {} x {} grid",
                k.kx, k.ky, self.nx, self.ny
            ))),
        }
    }
}

/// Coefficients of `d(k) . sigma` for a two-band model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DVector {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl DVector {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Self {
        Self { dx, dy, dz }
    }

    pub fn norm(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy + self.dz * self.dz).sqrt()
    }
}

/// `d = (alpha sin kx, gamma sin ky, m - cos kx - cos ky)`.
pub fn qwz_d_vector(k: MomentumPoint, alpha: f64, gamma: f64, mass: f64) -> DVector {
    DVector {
        dx: alpha * k.kx.sin(),
        dy: gamma * k.ky.sin(),
        dz: mass - k.kx.cos() - k.ky.cos(),
    }
}

/// `dx sigma_x + dy sigma_y + dz sigma_z = [[dz, dx - i dy], [dx + i dy, -dz]]`.
pub fn bloch_matrix_from_d(d: DVector) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(d.dz, 0.0),
            Complex64::new(d.dx, -d.dy),
            Complex64::new(d.dx, d.dy),
            Complex64::new(-d.dz, 0.0),
        ],
    )
}

/// A translation-invariant lattice model: `k -> h(k)`, a `p x p` Hermitian matrix.
///
/// Implementations must be 2 pi periodic in both momentum components.
pub trait BlochModel: Send + Sync + Debug {
    /// Number of internal states per unit cell.
    fn dim(&self) -> usize;

    fn hamiltonian(&self, k: MomentumPoint) -> CMatrix;
}

pub type SharedModel = Arc<dyn BlochModel>;

/// Qi-Wu-Zhang model with independent `sin kx` and `sin ky` amplitudes.
/// The default `(alpha, gamma, mass) = (1, 3, 1)` is the asymmetric variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qwz {
    pub alpha: f64,
    pub gamma: f64,
    pub mass: f64,
}

impl Default for Qwz {
    fn default() -> Self {
        Self { alpha: 1.0, gamma: 3.0, mass: 1.0 }
    }
}

impl Qwz {
    pub fn d_vector(&self, k: MomentumPoint) -> DVector {
        qwz_d_vector(k, self.alpha, self.gamma, self.mass)
    }
}

impl BlochModel for Qwz {
    fn dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, k: MomentumPoint) -> CMatrix {
        bloch_matrix_from_d(self.d_vector(k))
    }
}

/// Momentum-independent `d . sigma`; with `d = (0, 0, 1)` this is the atomic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantD(pub DVector);

impl ConstantD {
    pub fn atomic_limit() -> Self {
        ConstantD(DVector::new(0.0, 0.0, 1.0))
    }
}

impl BlochModel for ConstantD {
    fn dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, _k: MomentumPoint) -> CMatrix {
        bloch_matrix_from_d(self.0)
    }
}

/// One `p x p` matrix per point of a [`MomentumGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGrid {
    pub grid: MomentumGrid,
    pub dim: usize,
    /// Flat-index order, see [`MomentumGrid::index`].
    pub values: Vec<CMatrix>,
}

impl MatrixGrid {
    pub fn new(grid: MomentumGrid, dim: usize, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(bad) = values.iter().find(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.nrows() });
        }
        Ok(Self { grid, dim, values })
    }

    /// Tabulates `f` on every grid point.
    pub fn tabulate(grid: MomentumGrid, dim: usize, f: impl Fn(MomentumPoint) -> CMatrix) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, dim, values }
    }

    pub fn at(&self, i: usize, j: usize) -> &CMatrix {
        &self.values[self.grid.index(i, j)]
    }

    pub fn lookup(&self, k: MomentumPoint) -> Result<&CMatrix> {
        let (i, j) = self.grid.locate(k)?;
        Ok(self.at(i, j))
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        self.values.iter().map(linalg::hermitian_deviation).fold(0.0, f64::max)
    }
}

/// A model given only on grid points. Evaluation snaps to the nearest sample,
/// so it is only meaningful for momenta on (or commensurate with) the grid.
#[derive(Debug, Clone)]
pub struct TabulatedModel {
    table: MatrixGrid,
}

impl TabulatedModel {
    pub fn new(table: MatrixGrid) -> Result<Self> {
        let dev = table.max_hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &MatrixGrid {
        &self.table
    }
}

impl BlochModel for TabulatedModel {
    fn dim(&self) -> usize {
        self.table.dim
    }

    fn hamiltonian(&self, k: MomentumPoint) -> CMatrix {
        let g = self.table.grid;
        let snap = |v: f64, n: usize| {
            (((reduce_angle(v) + PI) / (2.0 * PI) * n as f64).round() as usize) % n
        };
        self.table.at(snap(k.kx, g.nx()), snap(k.ky, g.ny())).clone()
    }
}

/// Ascending eigenvalues and gauge-fixed eigenvectors (columns) of a Bloch matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSystem {
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
}

impl BandSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Columns `bands` of the eigenvector matrix as a `p x n` frame.
    pub fn frame(&self, bands: std::ops::Range<usize>) -> CMatrix {
        self.vectors.columns(bands.start, bands.len()).into_owned()
    }

    /// Number of bands strictly below `level`; errors if any band sits on it.
    pub fn count_below(&self, level: f64, k: MomentumPoint) -> Result<usize> {
        if self.energies.iter().any(|e| (e - level).abs() <= DEGENERACY_TOL) {
            return Err(Error::Gapless { kx: k.kx, ky: k.ky, level, tol: DEGENERACY_TOL });
        }
        Ok(self.energies.iter().filter(|&&e| e < level).count())
    }
}

/// Diagonalizes a Hermitian Bloch matrix.
pub fn band_system(h: &CMatrix) -> Result<BandSystem> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let dev = linalg::hermitian_deviation(h);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let (energies, vectors) = linalg::eigh(h);
    Ok(BandSystem { energies, vectors })
}

/// Band systems of `model` on every grid point, in flat-index order.
pub fn bands_on_grid(model: &dyn BlochModel, grid: &MomentumGrid) -> Result<Vec<BandSystem>> {
    let points = grid.points();
    crate::par::map(&points, |&k| band_system(&model.hamiltonian(k))).into_iter().collect()
}

/// Smallest direct gap across `mu` over the grid.
///
/// Fails if `mu` falls inside the energy range of any band; the error names
/// the grid point where that band comes closest to `mu`.
pub fn band_gap(model: &dyn BlochModel, grid: &MomentumGrid, mu: f64) -> Result<f64> {
    let points = grid.points();
    let bands = bands_on_grid(model, grid)?;
    let p = model.dim();
    for band in 0..p {
        let (lo, hi) = bands
            .iter()
            .map(|b| b.energies[band])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
        if lo - DEGENERACY_TOL <= mu && mu <= hi + DEGENERACY_TOL {
            let (idx, _) = bands
                .iter()
                .enumerate()
                .map(|(i, b)| (i, (b.energies[band] - mu).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("grid is non-empty");
            let k = points[idx];
            return Err(Error::MuInsideBand { mu, band, kx: k.kx, ky: k.ky });
        }
    }
    let mut gap = f64::INFINITY;
    for b in &bands {
        let below = b.energies.iter().copied().filter(|&e| e < mu).fold(f64::NEG_INFINITY, f64::max);
        let above = b.energies.iter().copied().filter(|&e| e > mu).fold(f64::INFINITY, f64::min);
        if !below.is_finite() || !above.is_finite() {
            return Err(Error::InvalidInput(format!(
                "chemical potential {mu} is outside the spectrum; no gap to measure"
            )));
        }
        gap = gap.min(above - below);
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn qwz_d_vector_values() {
        let d = qwz_d_vector(MomentumPoint::new(0.0, 0.0), 1.0, 3.0, 1.0);
        assert_eq!((d.dx, d.dy, d.dz), (0.0, 0.0, -1.0));
        let d = Qwz::default().d_vector(MomentumPoint { kx: PI, ky: PI });
        assert!(d.dx.abs() < 1e-15 && d.dy.abs() < 1e-15 && (d.dz - 3.0).abs() < 1e-15);
        let d = Qwz::default().d_vector(MomentumPoint::new(PI / 2.0, 0.0));
        assert!((d.dx - 1.0).abs() < 1e-15 && d.dy.abs() < 1e-15 && d.dz.abs() < 1e-15);
    }

    #[test]
    fn pauli_from_unit_d_vectors() {
        let [sx, sy, sz] = linalg::pauli();
        assert_eq!(bloch_matrix_from_d(DVector::new(0.0, 0.0, 1.0)), sz);
        assert_eq!(bloch_matrix_from_d(DVector::new(1.0, 0.0, 0.0)), sx);
        assert_eq!(bloch_matrix_from_d(DVector::new(0.0, 1.0, 0.0)), sy);
        assert_eq!(sy[(0, 1)], c(0.0, -1.0));
    }

    #[test]
    fn band_system_of_sigma_z() {
        let b = band_system(&linalg::pauli()[2]).unwrap();
        assert_eq!(b.energies, vec![-1.0, 1.0]);
        assert_eq!(b.vectors.column(0).iter().copied().collect::<Vec<_>>(), vec![c(0., 0.), c(1., 0.)]);
        assert_eq!(b.vectors.column(1).iter().copied().collect::<Vec<_>>(), vec![c(1., 0.), c(0., 0.)]);
    }

    #[test]
    fn band_system_of_d_sigma_and_qwz_origin() {
        let d = DVector::new(0.3, -1.2, 0.7);
        let b = band_system(&bloch_matrix_from_d(d)).unwrap();
        assert!((b.energies[0] + d.norm()).abs() < 1e-12);
        assert!((b.energies[1] - d.norm()).abs() < 1e-12);
        let b = band_system(&Qwz::default().hamiltonian(MomentumPoint::new(0.0, 0.0))).unwrap();
        assert!((b.energies[0] + 1.0).abs() < 1e-12 && (b.energies[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_system_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(-1., 0.)]);
        assert!(matches!(band_system(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigen_residuals_and_unitarity() {
        let model = Qwz::default();
        let grid = MomentumGrid::square(16).unwrap();
        for k in grid.points() {
            let h = model.hamiltonian(k);
            assert!(linalg::hermitian_deviation(&h) <= 1e-12);
            let b = band_system(&h).unwrap();
            assert!(linalg::unitarity_error(&b.vectors) <= 1e-10);
            for n in 0..2 {
                let v = b.vectors.column(n);
                let r = &h * v - v * Complex64::from(b.energies[n]);
                assert!(r.norm() <= 1e-10);
            }
            let dn = model.d_vector(k).norm();
            assert!((b.energies[0] + dn).abs() < 1e-10 && (b.energies[1] - dn).abs() < 1e-10);
        }
    }

    #[test]
    fn gauge_fixing_is_deterministic() {
        let h = Qwz::default().hamiltonian(MomentumPoint::new(0.4, -2.1));
        let a = band_system(&h).unwrap();
        let b = band_system(&h).unwrap();
        assert_eq!(a, b);
        for n in 0..2 {
            let col = a.vectors.column(n);
            let (imax, _) = col
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            assert!(col[imax].im == 0.0 && col[imax].re > 0.0);
        }
    }

    #[test]
    fn periodicity_of_qwz() {
        let model = Qwz::default();
        for &(kx, ky) in &[(0.3, -1.7), (-PI, 2.0), (1.0, -PI)] {
            let h0 = model.hamiltonian(MomentumPoint::new(kx, ky));
            let hx = model.hamiltonian(MomentumPoint::new(kx + 2.0 * PI, ky));
            let hy = model.hamiltonian(MomentumPoint::new(kx, ky + 2.0 * PI));
            assert!(linalg::max_abs_diff(&h0, &hx) < 1e-14);
            assert!(linalg::max_abs_diff(&h0, &hy) < 1e-14);
        }
    }

    #[test]
    fn momentum_reduction() {
        let k = MomentumPoint::new(PI, 3.0 * PI);
        assert_eq!(k.kx, -PI);
        assert!((k.ky + PI).abs() < 1e-12);
        assert!(MomentumGrid::new(1, 4).is_err());
    }

    #[test]
    fn grid_locate_roundtrip() {
        let g = MomentumGrid::new(8, 6).unwrap();
        for i in 0..8 {
            for j in 0..6 {
                assert_eq!(g.locate(g.point(i, j)).unwrap(), (i, j));
            }
        }
        assert!(g.locate(MomentumPoint::new(0.1, 0.0)).is_err());
    }

    #[test]
    fn gap_of_qwz_is_two() {
        // Oracle: dense scan of 2|d(k)|, independent of the eigen solver.
        let model = Qwz::default();
        let grid = MomentumGrid::square(64).unwrap();
        let oracle = grid
            .points()
            .iter()
            .map(|&k| 2.0 * model.d_vector(k).norm())
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - 2.0).abs() < 1e-12);
        let gap = band_gap(&model, &grid, 0.0).unwrap();
        assert!((gap - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gap_of_flat_bands() {
        let grid = MomentumGrid::square(8).unwrap();
        let gap = band_gap(&ConstantD::atomic_limit(), &grid, 0.0).unwrap();
        assert!((gap - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mu_inside_band_is_rejected() {
        let grid = MomentumGrid::square(64).unwrap();
        match band_gap(&Qwz::default(), &grid, 1.5) {
            Err(Error::MuInsideBand { band, .. }) => assert_eq!(band, 1),
            other => panic!("expected MuInsideBand, got {other:?}"),
        }
    }
}
