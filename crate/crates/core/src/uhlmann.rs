//! Uhlmann holonomy of loops of full-rank density matrices.
//!
//! Density matrices are kept in spectral form, `rho = sum_n exp(l_n) |v_n><v_n|`,
//! so that states with weights far below machine epsilon (deep in the
//! low-temperature regime) still have a well-defined, well-conditioned
//! parallel transport. The link between consecutive states is the unitary
//! polar factor of `sqrt(rho_b) sqrt(rho_a)`; the holonomy is their ordered
//! product and the Uhlmann phase is `arg Tr[rho_1 H]`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::egp;
use crate::error::{Error, Result};
use crate::gaussian::GaussianStateSpec;
use crate::geometry::{self, PhaseKind, PhaseProfile, StateGrid, DEFAULT_JUMP_MARGIN};
use crate::linalg::{self, principal, CMatrix};
use crate::model::{self, BandSystem, BlochModel, Direction, MomentumGrid, SharedModel};

/// Smallest eigenvalue accepted by [`SpectralDensity::from_matrix`].
pub const MIN_EIGENVALUE: f64 = 1e-10;
/// Links must stay within this spectral-norm distance of the identity.
pub const MAX_LINK_DEVIATION: f64 = 0.5;
/// `|Tr[rho H]|` below which the Uhlmann phase is undefined.
pub const MIN_TRACE_MODULUS: f64 = 1e-12;

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 60;

/// A density matrix in spectral form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    /// `ln` of the eigenvalues, normalized so that they sum to one.
    pub log_weights: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMatrix,
}

impl SpectralDensity {
    /// `exp(-beta h) / Z` from the eigensystem of `h`.
    pub fn thermal(bands: &BandSystem, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Uhlmann transport needs a finite positive beta, got {beta}"
            )));
        }
        let raw: Vec<f64> = bands.energies.iter().map(|e| -beta * e).collect();
        let z = linalg::log_sum_exp(&raw);
        Ok(Self { log_weights: raw.iter().map(|l| l - z).collect(), vectors: bands.vectors.clone() })
    }

    /// From an explicit matrix; must be Hermitian, unit trace and full rank.
    pub fn from_matrix(rho: &CMatrix) -> Result<Self> {
        let deviation = linalg::hermitian_deviation(rho);
        if deviation > model::HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = rho.trace();
        if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::InvalidInput(format!("density matrix trace {trace} is not 1")));
        }
        let (values, vectors) = linalg::eigh(rho);
        let min = values[0];
        if min <= MIN_EIGENVALUE {
            return Err(Error::RankDeficient { min_eigenvalue: min });
        }
        Ok(Self { log_weights: values.iter().map(|p| p.ln()).collect(), vectors })
    }

    pub fn dim(&self) -> usize {
        self.log_weights.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn matrix(&self) -> CMatrix {
        linalg::reassemble(&self.weights(), &self.vectors)
    }

    pub fn sqrt_matrix(&self) -> CMatrix {
        let roots: Vec<f64> = self.log_weights.iter().map(|l| (l / 2.0).exp()).collect();
        linalg::reassemble(&roots, &self.vectors)
    }
}

/// Thermal single-particle density matrix `exp(-beta (h(k) - mu)) / Z`.
/// The chemical potential drops out after normalization.
pub fn thermal_density_k(model: &dyn BlochModel, beta: f64, _mu: f64, k: model::MomentumPoint) -> Result<SpectralDensity> {
    SpectralDensity::thermal(&model::band_system(&model.hamiltonian(k))?, beta)
}

/// A closed loop of density matrices; the last state links back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixPath {
    pub states: Vec<SpectralDensity>,
}

impl DensityMatrixPath {
    pub fn new(states: Vec<SpectralDensity>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidInput("an Uhlmann loop needs at least 2 states".into()));
        }
        let p = states[0].dim();
        if let Some(s) = states.iter().find(|s| s.dim() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: s.dim() });
        }
        Ok(Self { states })
    }

    pub fn from_matrices(rhos: &[CMatrix]) -> Result<Self> {
        Self::new(rhos.iter().map(SpectralDensity::from_matrix).collect::<Result<_>>()?)
    }

    /// Thermal states of `model` along `direction` at `transverse_k`, on the
    /// loop `-pi + 2 pi i / samples`.
    pub fn thermal(
        model: &dyn BlochModel,
        direction: Direction,
        transverse_k: f64,
        beta: f64,
        samples: usize,
    ) -> Result<Self> {
        let states = model::loop_samples(samples)
            .into_iter()
            .map(|k| thermal_density_k(model, beta, 0.0, direction.point(k, transverse_k)))
            .collect::<Result<_>>()?;
        Self::new(states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Unitary polar factor of `sqrt(rho_b) sqrt(rho_a)`.
///
/// In the eigenbases the matrix is `O_mn exp(s_mn)` with `O = V_b^dagger V_a`
/// and `s_mn = (l^b_m + l^a_n) / 2`. Its entries can span hundreds of orders of
/// magnitude, so the first scaled Newton step
/// `X_1 = (g X_0 + X_0^{-dagger} / g) / 2` is taken analytically, entrywise
/// `O_mn cosh(t_mn)` with `t` the centered exponent. That matrix is well
/// conditioned and the remaining Newton iterations run in floating point.
pub fn uhlmann_link(a: &SpectralDensity, b: &SpectralDensity) -> Result<CMatrix> {
    let overlap = b.vectors.adjoint() * &a.vectors;
    let p = overlap.nrows();
    let mut s = CMatrix::zeros(p, p);
    let mut smax = f64::NEG_INFINITY;
    let mut smin = f64::INFINITY;
    let mut exps = vec![0.0; p * p];
    for m in 0..p {
        for n in 0..p {
            let v = 0.5 * (b.log_weights[m] + a.log_weights[n]);
            exps[m * p + n] = v;
            smax = smax.max(v);
            smin = smin.min(v);
        }
    }
    let centre = 0.5 * (smax + smin);
    let tmax = smax - centre;
    for m in 0..p {
        for n in 0..p {
            let t = exps[m * p + n] - centre;
            let c = 0.5 * ((t - tmax).exp() + (-t - tmax).exp());
            s[(m, n)] = overlap[(m, n)] * c;
        }
    }
    let polar = newton_polar(s)?;
    Ok(&b.vectors * polar * a.vectors.adjoint())
}

fn newton_polar(mut x: CMatrix) -> Result<CMatrix> {
    for _ in 0..NEWTON_MAX_ITER {
        let inv = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular matrix in polar iteration".into()))?;
        let gamma = (inv.norm() / x.norm()).sqrt();
        let next = (x.scale(gamma) + inv.adjoint().scale(1.0 / gamma)).scale(0.5);
        let change = (&next - &x).norm() / next.norm();
        x = next;
        if change < NEWTON_TOL {
            break;
        }
    }
    linalg::polar_unitary(&x)
}

/// Ordered product of links around a loop.
#[derive(Debug, Clone, PartialEq)]
pub struct UhlmannHolonomy {
    /// `V_M ... V_2 V_1`.
    pub matrix: CMatrix,
    /// Largest `|V_i - 1|` (spectral norm) along the loop.
    pub max_link_deviation: f64,
}

/// Holonomy of a closed path; each link must be near the identity.
pub fn uhlmann_holonomy(path: &DensityMatrixPath) -> Result<UhlmannHolonomy> {
    let m = path.len();
    let p = path.states[0].dim();
    let identity = CMatrix::identity(p, p);
    let mut h = identity.clone();
    let mut max_dev = 0.0f64;
    for i in 0..m {
        let v = uhlmann_link(&path.states[i], &path.states[(i + 1) % m])?;
        let dev = linalg::spectral_norm(&(&v - &identity));
        if dev >= MAX_LINK_DEVIATION {
            return Err(Error::LinkNotNearIdentity { link: i, norm: dev });
        }
        max_dev = max_dev.max(dev);
        h = v * h;
    }
    Ok(UhlmannHolonomy { matrix: h, max_link_deviation: max_dev })
}

/// `arg Tr[rho H] = arg sum_n p_n <u_n|H|u_n>`.
pub fn holonomy_phase(base: &SpectralDensity, holonomy: &CMatrix) -> Result<f64> {
    let weights = base.weights();
    let mut tr = Complex64::new(0.0, 0.0);
    for (n, w) in weights.iter().enumerate() {
        let u = base.vectors.column(n);
        tr += (u.adjoint() * holonomy * u)[(0, 0)] * *w;
    }
    if tr.norm() < MIN_TRACE_MODULUS {
        return Err(Error::UhlmannUndefined { modulus: tr.norm() });
    }
    Ok(tr.arg())
}

/// Uhlmann phase of a closed path.
pub fn uhlmann_phase(path: &DensityMatrixPath) -> Result<f64> {
    holonomy_phase(&path.states[0], &uhlmann_holonomy(path)?.matrix)
}

/// Uhlmann phase computed from explicit amplitudes `w_i = sqrt(rho_i) G_i`
/// with arbitrary unitaries `G_i`, transporting `w` so that consecutive
/// overlaps stay positive. Independent of the link formula above and of the
/// choice of `G_i`.
pub fn uhlmann_phase_in_amplitude_gauge(path: &DensityMatrixPath, gauges: &[CMatrix]) -> Result<f64> {
    let m = path.len();
    if gauges.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: gauges.len() });
    }
    let amplitudes: Vec<CMatrix> =
        path.states.iter().zip(gauges).map(|(s, g)| s.sqrt_matrix() * g).collect();
    let mut transported = amplitudes[0].clone();
    let mut cumulative = CMatrix::identity(gauges[0].nrows(), gauges[0].nrows());
    for i in 0..m {
        let next = &amplitudes[(i + 1) % m];
        let w = linalg::polar_unitary(&(next.adjoint() * &transported))?;
        transported = next * &w;
        cumulative = w;
    }
    let g1 = &gauges[0];
    let h = g1 * cumulative * g1.adjoint();
    holonomy_phase(&path.states[0], &h)
}

/// Path refinement settings for Uhlmann loop phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub initial_samples: usize,
    pub max_samples: usize,
    pub tolerance: f64,
}

impl Default for Refinement {
    fn default() -> Self {
        Self { initial_samples: 512, max_samples: 8192, tolerance: 1e-4 }
    }
}

/// Converged Uhlmann phase of one loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPhase {
    pub phase: f64,
    pub samples: usize,
    /// Change from the previous (half as fine) path.
    pub delta: f64,
}

/// Uhlmann phase of the thermal loop along `direction`, doubling the number
/// of path samples until two successive values agree within the tolerance.
pub fn uhlmann_loop_phase(
    model: &dyn BlochModel,
    direction: Direction,
    transverse_k: f64,
    beta: f64,
    refinement: &Refinement,
) -> Result<LoopPhase> {
    let mut m = refinement.initial_samples.max(2);
    let mut previous = uhlmann_phase(&DensityMatrixPath::thermal(model, direction, transverse_k, beta, m)?)?;
    let mut delta = f64::INFINITY;
    while 2 * m <= refinement.max_samples {
        m *= 2;
        let phase = uhlmann_phase(&DensityMatrixPath::thermal(model, direction, transverse_k, beta, m)?)?;
        delta = principal(phase - previous).abs();
        previous = phase;
        if delta < refinement.tolerance {
            return Ok(LoopPhase { phase, samples: m, delta });
        }
    }
    Err(Error::RefinementNotConverged { delta, samples: m })
}

/// Uhlmann phases of the chains along `direction` over the transverse loop.
pub fn uhlmann_profile(
    model: &dyn BlochModel,
    direction: Direction,
    beta: f64,
    n_transverse: usize,
    refinement: &Refinement,
) -> Result<PhaseProfile> {
    let ks = model::loop_samples(n_transverse);
    let phases: Vec<f64> = crate::par::map(&ks, |&k| {
        Ok(uhlmann_loop_phase(model, direction, k, beta, refinement)?.phase)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(PhaseProfile::new(PhaseKind::Uhlmann, ks, phases)?
        .with_direction(direction)
        .with_temperature(1.0 / beta))
}

fn uhlmann_profile_refined(
    model: &dyn BlochModel,
    direction: Direction,
    beta: f64,
    n_transverse: usize,
    max_transverse: usize,
    refinement: &Refinement,
) -> Result<PhaseProfile> {
    let mut n = n_transverse;
    loop {
        let profile = uhlmann_profile(model, direction, beta, n, refinement)?;
        if !profile.is_under_resolved(DEFAULT_JUMP_MARGIN) || 2 * n > max_transverse {
            return Ok(profile);
        }
        n *= 2;
    }
}

/// `(C_x, C_y)` from Uhlmann phase windings, same orientation as the EGP.
/// Unlike the EGP pair these need not agree.
pub fn uhlmann_windings(
    model: &dyn BlochModel,
    beta: f64,
    n_transverse: usize,
    refinement: &Refinement,
) -> Result<(i64, i64)> {
    let x = uhlmann_profile_refined(model, Direction::X, beta, n_transverse, 4 * n_transverse, refinement)?;
    let y = uhlmann_profile_refined(model, Direction::Y, beta, n_transverse, 4 * n_transverse, refinement)?;
    geometry::chern_from_zak_windings(&x, &y)
}

/// One temperature of an invariant scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(with = "crate::io::extended_float")]
    pub beta: f64,
    #[serde(rename = "Cx_uhlmann")]
    pub cx_uhlmann: Option<i64>,
    #[serde(rename = "Cy_uhlmann")]
    pub cy_uhlmann: Option<i64>,
    #[serde(rename = "Cx_egp")]
    pub cx_egp: Option<i64>,
    #[serde(rename = "Cy_egp")]
    pub cy_egp: Option<i64>,
    #[serde(rename = "C_ground")]
    pub c_ground: i64,
    pub status: String,
}

impl InvariantReport {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn uhlmann_asymmetric(&self) -> bool {
        matches!((self.cx_uhlmann, self.cy_uhlmann), (Some(x), Some(y)) if x != y)
    }
}

/// Settings of a temperature scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub n_cells: usize,
    pub n_transverse: usize,
    pub ground_grid: usize,
    pub refinement: Refinement,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { n_cells: 10, n_transverse: 64, ground_grid: 32, refinement: Refinement::default() }
    }
}

/// Uhlmann and EGP Chern numbers of thermal states of `model` for each
/// temperature. Failures at one temperature are recorded in that row's
/// status; only a failure of the ground-state reference aborts the scan.
pub fn uhlmann_temperature_scan(
    model: SharedModel,
    mu: f64,
    temperatures: &[f64],
    options: &ScanOptions,
) -> Result<Vec<InvariantReport>> {
    let grid = MomentumGrid::square(options.ground_grid)?;
    let c_ground = geometry::chern_of_states(&StateGrid::occupied(model.as_ref(), &grid, mu)?)?;
    let rows = temperatures
        .iter()
        .map(|&t| scan_row(&model, mu, t, c_ground, options))
        .collect();
    Ok(rows)
}

fn scan_row(model: &SharedModel, mu: f64, temperature: f64, c_ground: i64, options: &ScanOptions) -> InvariantReport {
    let beta = 1.0 / temperature;
    let mut status = Vec::new();
    let (cx_uhlmann, cy_uhlmann) =
        match uhlmann_windings(model.as_ref(), beta, options.n_transverse, &options.refinement) {
            Ok((x, y)) => (Some(x), Some(y)),
            Err(e) => {
                status.push(format!("uhlmann: {e}"));
                (None, None)
            }
        };
    let egp = GaussianStateSpec::thermal(Arc::clone(model), beta, mu)
        .and_then(|spec| egp::egp_windings(&spec, options.n_cells, options.n_transverse));
    let (cx_egp, cy_egp) = match egp {
        Ok(w) => (Some(w.cx), Some(w.cy)),
        Err(e) => {
            status.push(format!("egp: {e}"));
            (None, None)
        }
    };
    InvariantReport {
        temperature,
        beta,
        cx_uhlmann,
        cy_uhlmann,
        cx_egp,
        cy_egp,
        c_ground,
        status: if status.is_empty() { "ok".to_string() } else { status.join("; ") },
    }
}
