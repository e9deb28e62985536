//! Gaussian (quasi-free, number-conserving) fermionic states.
//!
//! A translation-invariant Gaussian state is fixed by one `p x p` Hermitian
//! generator `g(k)` per momentum, `rho ~ exp(-sum_k c^dagger(k) g(k) c(k))`.
//! Its single-particle correlations `<c_mu^dagger(k) c_nu(k)>` form the
//! fictitious Hamiltonian
//!
//! ```text
//! h_fict(k) = transpose( [1 - tanh(g(k)/2)] / 2 ) = transpose( 1 / (e^g + 1) )
//! ```
//!
//! and for a thermal state `g = beta (h - mu)`. The transpose comes from the
//! index order of the correlator; Bloch states of the fictitious Hamiltonian
//! are therefore the eigenvectors of `transpose(h_fict)`, which for thermal
//! states are exactly the eigenvectors of `h`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{
    self, BandSystem, Direction, MatrixGrid, MomentumGrid, MomentumPoint, SharedModel,
};

/// Default distance from 1/2 that occupations of a tabulated (non-equilibrium)
/// fictitious Hamiltonian must keep.
pub const DEFAULT_GAP_MARGIN: f64 = 1e-3;
/// Gap margin applied to thermal states; their gap is inherited from `h`.
pub const THERMAL_GAP_MARGIN: f64 = 1e-12;
/// Slack allowed on occupation bounds `[0, 1]`.
pub const OCCUPATION_TOL: f64 = 1e-10;

/// A validated grid of fictitious Hamiltonians for a non-equilibrium state.
#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousHamiltonianGrid {
    table: MatrixGrid,
}

impl FictitiousHamiltonianGrid {
    /// Checks Hermiticity and that every spectrum lies in `[0, 1]`.
    pub fn new(table: MatrixGrid) -> Result<Self> {
        let dev = table.max_hermitian_deviation();
        if dev > model::HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        for (idx, m) in table.values.iter().enumerate() {
            let (vals, _) = linalg::eigh(m);
            if vals.iter().any(|&v| !(-OCCUPATION_TOL..=1.0 + OCCUPATION_TOL).contains(&v)) {
                let k = table.grid.points()[idx];
                return Err(Error::InvalidInput(format!(
                    "fictitious Hamiltonian at k = ({:.6}, {:.6}) has eigenvalues {vals:?} outside [0, 1]",
                    k.kx, k.ky
                )));
            }
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &MatrixGrid {
        &self.table
    }

    pub fn grid(&self) -> MomentumGrid {
        self.table.grid
    }
}

#[derive(Debug, Clone)]
enum Source {
    Thermal { model: SharedModel, beta: f64, mu: f64 },
    Tabulated(FictitiousHamiltonianGrid),
}

/// Everything needed to evaluate the correlations of a Gaussian state.
#[derive(Debug, Clone)]
pub struct GaussianStateSpec {
    source: Source,
    gap_margin: f64,
}

impl GaussianStateSpec {
    /// Grand-canonical state at inverse temperature `beta` (`f64::INFINITY`
    /// selects the ground state) and chemical potential `mu`.
    pub fn thermal(model: SharedModel, beta: f64, mu: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidInput(format!("beta must be positive or infinite, got {beta}")));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidInput(format!("chemical potential must be finite, got {mu}")));
        }
        Ok(Self { source: Source::Thermal { model, beta, mu }, gap_margin: THERMAL_GAP_MARGIN })
    }

    /// Non-equilibrium state given directly by its fictitious Hamiltonian.
    pub fn tabulated(grid: FictitiousHamiltonianGrid) -> Self {
        Self { source: Source::Tabulated(grid), gap_margin: DEFAULT_GAP_MARGIN }
    }

    pub fn with_gap_margin(mut self, margin: f64) -> Self {
        self.gap_margin = margin;
        self
    }

    pub fn gap_margin(&self) -> f64 {
        self.gap_margin
    }

    pub fn dim(&self) -> usize {
        match &self.source {
            Source::Thermal { model, .. } => model.dim(),
            Source::Tabulated(t) => t.table.dim,
        }
    }

    /// Inverse temperature of a thermal state.
    pub fn beta(&self) -> Option<f64> {
        match &self.source {
            Source::Thermal { beta, .. } => Some(*beta),
            Source::Tabulated(_) => None,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match &self.source {
            Source::Thermal { mu, .. } => Some(*mu),
            Source::Tabulated(_) => None,
        }
    }

    pub fn model(&self) -> Option<&SharedModel> {
        match &self.source {
            Source::Thermal { model, .. } => Some(model),
            Source::Tabulated(_) => None,
        }
    }

    /// The same model and chemical potential at another inverse temperature.
    pub fn at_beta(&self, beta: f64) -> Result<Self> {
        match &self.source {
            Source::Thermal { model, mu, .. } => Self::thermal(model.clone(), beta, *mu),
            Source::Tabulated(_) => {
                Err(Error::InvalidInput("a tabulated state has no temperature".into()))
            }
        }
    }
}

/// `g(k) = beta (h(k) - mu)`; requires a finite-temperature thermal state.
pub fn g_matrix(spec: &GaussianStateSpec, k: MomentumPoint) -> Result<CMatrix> {
    match &spec.source {
        Source::Thermal { model, beta, mu } if beta.is_finite() => {
            let h = model.hamiltonian(k);
            let p = h.nrows();
            Ok((h - CMatrix::identity(p, p).scale(*mu)).scale(*beta))
        }
        Source::Thermal { .. } => Err(Error::InvalidInput(
            "g is undefined at beta = inf; use the projector path of fictitious_hamiltonian".into(),
        )),
        Source::Tabulated(_) => Err(Error::InvalidInput(
            "a tabulated state carries no generator g".into(),
        )),
    }
}

/// Correlation matrix `<c_a^dagger c_b>` of `rho ~ exp(-c^dagger g c)`,
/// i.e. `transpose((e^g + 1)^{-1})`.
pub fn covariance_from_generator(g: &CMatrix) -> CMatrix {
    linalg::fermi_matrix(g).transpose()
}

/// `h_fict(k)_{mu nu} = <c_mu^dagger(k) c_nu(k)>`.
pub fn fictitious_hamiltonian(spec: &GaussianStateSpec, k: MomentumPoint) -> Result<CMatrix> {
    match &spec.source {
        Source::Thermal { model, beta, mu } => {
            if beta.is_finite() {
                Ok(covariance_from_generator(&g_matrix(spec, k)?))
            } else {
                let bands = model::band_system(&model.hamiltonian(k))?;
                let filled = bands.count_below(*mu, k)?;
                let occupations: Vec<f64> =
                    (0..bands.dim()).map(|n| if n < filled { 1.0 } else { 0.0 }).collect();
                Ok(linalg::reassemble(&occupations, &bands.vectors).transpose())
            }
        }
        Source::Tabulated(t) => Ok(t.table.lookup(k)?.clone()),
    }
}

/// Tabulates the fictitious Hamiltonian of `spec` on `grid`.
pub fn fictitious_grid(spec: &GaussianStateSpec, grid: &MomentumGrid) -> Result<FictitiousHamiltonianGrid> {
    let points = grid.points();
    let values: Result<Vec<CMatrix>> =
        crate::par::map(&points, |&k| fictitious_hamiltonian(spec, k)).into_iter().collect();
    FictitiousHamiltonianGrid::new(MatrixGrid::new(*grid, spec.dim(), values?)?)
}

/// Bloch bands of the fictitious Hamiltonian.
///
/// Energies are `1/2 - occupation`, ascending, so negative fictitious
/// energies are the (more than half) filled bands and band `n` lines up with
/// band `n` of `h` for thermal states. Vectors are eigenvectors of
/// `transpose(h_fict)`.
pub fn fictitious_bands(spec: &GaussianStateSpec, k: MomentumPoint) -> Result<BandSystem> {
    let hf = fictitious_hamiltonian(spec, k)?;
    let p = hf.nrows();
    let shifted = CMatrix::identity(p, p).scale(0.5) - hf.transpose();
    model::band_system(&shifted)
}

/// Orthonormal frame of the filled fictitious bands at `k`, checking the
/// spectrum keeps the configured distance from occupation 1/2.
pub fn filled_fictitious_frame(spec: &GaussianStateSpec, k: MomentumPoint) -> Result<CMatrix> {
    let bands = fictitious_bands(spec, k)?;
    if let Some(&e) = bands.energies.iter().find(|e| e.abs() <= spec.gap_margin) {
        return Err(Error::FictitiousGapViolation {
            kx: k.kx,
            ky: k.ky,
            occupation: 0.5 - e,
            margin: spec.gap_margin,
        });
    }
    let filled = bands.energies.iter().filter(|&&e| e < 0.0).count();
    Ok(bands.frame(0..filled))
}

/// Real-space single-particle correlations of one chain of `N` unit cells.
///
/// Index `(j, lambda)` is flattened j-major: row `j * p + lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCorrelationMatrix {
    pub direction: Direction,
    pub transverse_k: f64,
    pub n_cells: usize,
    pub dim: usize,
    /// `M[(j,l),(j',l')] = <c^dagger_{j l} c_{j' l'}>`.
    pub entries: CMatrix,
}

impl ChainCorrelationMatrix {
    pub fn len(&self) -> usize {
        self.n_cells * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n_cells == 0
    }
}

/// Periodic chain momenta `2 pi m / N`, `m = 0..N`, reduced into `[-pi, pi)`.
pub fn chain_momenta(n_cells: usize) -> Vec<f64> {
    (0..n_cells).map(|m| model::reduce_angle(2.0 * PI * m as f64 / n_cells as f64)).collect()
}

/// Fourier transform of the fictitious Hamiltonian along `direction` at
/// fixed `transverse_k`, for a periodic chain of `n_cells` unit cells.
pub fn chain_correlation_matrix(
    spec: &GaussianStateSpec,
    direction: Direction,
    transverse_k: f64,
    n_cells: usize,
) -> Result<ChainCorrelationMatrix> {
    if n_cells < 2 {
        return Err(Error::InvalidInput(format!("chain needs at least 2 cells, got {n_cells}")));
    }
    let p = spec.dim();
    let n = n_cells;
    let blocks: Vec<CMatrix> = chain_momenta(n)
        .into_iter()
        .map(|k| fictitious_hamiltonian(spec, direction.point(k, transverse_k)))
        .collect::<Result<_>>()?;

    // The chain is circulant: block (j, j') depends on r = j - j' mod N only.
    let mut by_offset = Vec::with_capacity(n);
    for r in 0..n {
        let mut acc = CMatrix::zeros(p, p);
        for (m, block) in blocks.iter().enumerate() {
            let angle = -2.0 * PI * ((m * r) % n) as f64 / n as f64;
            acc += block * Complex64::from_polar(1.0 / n as f64, angle);
        }
        by_offset.push(acc);
    }

    let mut entries = CMatrix::zeros(n * p, n * p);
    for j in 0..n {
        for jp in 0..n {
            let block = &by_offset[(j + n - jp) % n];
            entries.view_mut((j * p, jp * p), (p, p)).copy_from(block);
        }
    }
    Ok(ChainCorrelationMatrix { direction, transverse_k, n_cells, dim: p, entries })
}
