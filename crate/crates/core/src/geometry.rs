//! Gauge-invariant discrete geometry on the Brillouin zone.
//!
//! Bloch states enter as orthonormal frames (`p x n` matrices whose columns
//! span the bands of interest), so everything here works unchanged for
//! several filled bands. Link variables are overlap determinants.
//!
//! Sign conventions: the Zak phase is `phi = oint A dk` with
//! `A = i <u|d_k u>`, discretized as `Im ln prod_i det(F_{i+1}^dagger F_i)`.
//! Plaquettes are `Im ln` of the ordered product
//! `<u(k)|u(k+x)> <u(k+x)|u(k+x+y)> <u(k+x+y)|u(k+y)> <u(k+y)|u(k)>`.
//! With these choices `C_x = winding of phi_x(k_y)`, `C_y = -winding of phi_y(k_x)`
//! and the plaquette sum over `2 pi` all coincide.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianStateSpec};
use crate::linalg::{principal, CMatrix};
use crate::model::{self, BlochModel, Direction, MomentumGrid};

/// Links with `|det overlap|` below this make a loop ill-conditioned.
pub const MIN_OVERLAP: f64 = 1e-8;
/// Maximum distance of a Chern sum from an integer.
pub const CHERN_RESIDUE_TOL: f64 = 1e-6;
/// Default safety margin below `pi` for consecutive phase jumps.
pub const DEFAULT_JUMP_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Zak,
    Egp,
    Uhlmann,
    Pump,
}

/// A geometric phase sampled around a closed, uniformly spaced loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub kind: PhaseKind,
    /// Chain direction of the phase (the loop runs over the other axis).
    pub direction: Option<Direction>,
    /// Temperature in hopping units; 0 marks a pure state.
    #[serde(with = "crate::io::extended_float::option")]
    pub temperature: Option<f64>,
    pub n_cells: Option<usize>,
    pub parameters: Vec<f64>,
    /// Principal values in (-pi, pi].
    pub phases: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(kind: PhaseKind, parameters: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if parameters.len() != phases.len() {
            return Err(Error::DimensionMismatch { expected: parameters.len(), got: phases.len() });
        }
        if phases.len() < 2 {
            return Err(Error::InvalidInput("a phase profile needs at least 2 samples".into()));
        }
        let phases = phases.into_iter().map(principal).collect();
        Ok(Self { kind, direction: None, temperature: None, n_cells: None, parameters, phases })
    }

    /// Profile on the standard loop `-pi + 2 pi j / n`.
    pub fn on_loop(kind: PhaseKind, phases: Vec<f64>) -> Result<Self> {
        Self::new(kind, model::loop_samples(phases.len()), phases)
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = Some(direction);
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = Some(temperature);
        self
    }

    pub fn with_cells(mut self, n_cells: usize) -> Self {
        self.n_cells = Some(n_cells);
        self
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Principal-value steps `phi_{i+1} - phi_i`, closing the loop.
    pub fn steps(&self) -> Vec<f64> {
        let n = self.phases.len();
        (0..n).map(|i| principal(self.phases[(i + 1) % n] - self.phases[i])).collect()
    }

    /// Largest `|step|` and the index it starts from.
    pub fn max_jump(&self) -> (usize, f64) {
        self.steps()
            .into_iter()
            .map(f64::abs)
            .enumerate()
            .fold((0, 0.0), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc })
    }

    pub fn is_under_resolved(&self, margin: f64) -> bool {
        self.max_jump().1 >= PI - margin
    }

    /// Same samples traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.parameters.reverse();
        out.phases.reverse();
        out
    }
}

/// Discrete Berry phase per plaquette on an `nx x ny` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureField {
    pub grid: MomentumGrid,
    /// Plaquette `(i, j)` spans corners `(i, j)..(i + 1, j + 1)`; flat index `i * ny + j`.
    pub values: Vec<f64>,
}

impl CurvatureField {
    pub fn zeros(grid: MomentumGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Sum over plaquettes in flat-index order.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Orthonormal frames on every point of a momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    pub grid: MomentumGrid,
    /// Flat-index order, see [`MomentumGrid::index`].
    pub frames: Vec<CMatrix>,
}

impl StateGrid {
    pub fn new(grid: MomentumGrid, frames: Vec<CMatrix>) -> Result<Self> {
        if frames.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: frames.len() });
        }
        Ok(Self { grid, frames })
    }

    pub fn at(&self, i: usize, j: usize) -> &CMatrix {
        &self.frames[self.grid.index(i, j)]
    }

    /// Frames spanned by the bands `bands` of `model`.
    pub fn bands(model: &dyn BlochModel, grid: &MomentumGrid, bands: std::ops::Range<usize>) -> Result<Self> {
        let systems = model::bands_on_grid(model, grid)?;
        let frames = systems.iter().map(|b| b.frame(bands.clone())).collect();
        Self::new(*grid, frames)
    }

    /// Frames of all bands below `mu`; the count must not change across the grid.
    pub fn occupied(model: &dyn BlochModel, grid: &MomentumGrid, mu: f64) -> Result<Self> {
        let points = grid.points();
        let systems = model::bands_on_grid(model, grid)?;
        let mut filled = None;
        let mut frames = Vec::with_capacity(systems.len());
        for (b, &k) in systems.iter().zip(&points) {
            let n = b.count_below(mu, k)?;
            if *filled.get_or_insert(n) != n {
                return Err(Error::Gapless { kx: k.kx, ky: k.ky, level: mu, tol: model::DEGENERACY_TOL });
            }
            frames.push(b.frame(0..n));
        }
        Self::new(*grid, frames)
    }

    /// Single band `n` of the fictitious Hamiltonian (ordered by decreasing occupation).
    pub fn fictitious_band(spec: &GaussianStateSpec, grid: &MomentumGrid, band: usize) -> Result<Self> {
        let points = grid.points();
        let frames: Result<Vec<CMatrix>> = crate::par::map(&points, |&k| {
            Ok(gaussian::fictitious_bands(spec, k)?.frame(band..band + 1))
        })
        .into_iter()
        .collect();
        Self::new(*grid, frames?)
    }

    /// Filled fictitious bands (occupation above 1/2).
    pub fn fictitious_filled(spec: &GaussianStateSpec, grid: &MomentumGrid) -> Result<Self> {
        let points = grid.points();
        let frames: Result<Vec<CMatrix>> =
            crate::par::map(&points, |&k| gaussian::filled_fictitious_frame(spec, k))
                .into_iter()
                .collect();
        Self::new(*grid, frames?)
    }

    /// Loop of frames along `direction` at transverse grid index `t`.
    pub fn line(&self, direction: Direction, t: usize) -> Vec<CMatrix> {
        match direction {
            Direction::X => (0..self.grid.nx()).map(|i| self.at(i, t).clone()).collect(),
            Direction::Y => (0..self.grid.ny()).map(|j| self.at(t, j).clone()).collect(),
        }
    }
}

/// `det(a^dagger b)` for two frames of equal width; 1 for empty frames.
pub fn overlap_det(a: &CMatrix, b: &CMatrix) -> num_complex::Complex64 {
    if a.ncols() == 0 {
        return num_complex::Complex64::new(1.0, 0.0);
    }
    (a.adjoint() * b).determinant()
}

fn checked_link_phase(a: &CMatrix, b: &CMatrix, link: usize) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    let d = overlap_det(a, b);
    if d.norm() < MIN_OVERLAP {
        return Err(Error::IllConditionedLoop { link, modulus: d.norm() });
    }
    Ok(d.arg())
}

/// Wilson-loop Zak phase `Im ln prod_i det(F_{i+1}^dagger F_i)` of a closed
/// loop of frames (`F_{M+1} = F_1`), in (-pi, pi].
pub fn zak_phase_wilson(frames: &[CMatrix]) -> Result<f64> {
    let m = frames.len();
    if m < 2 {
        return Err(Error::InvalidInput("a Wilson loop needs at least 2 frames".into()));
    }
    let mut phase = 0.0;
    for i in 0..m {
        phase += checked_link_phase(&frames[(i + 1) % m], &frames[i], i)?;
    }
    Ok(principal(phase))
}

/// Zak phases along `direction` for every transverse grid line.
pub fn zak_profile(states: &StateGrid, direction: Direction) -> Result<PhaseProfile> {
    let transverse = states.grid.samples_along(direction.other());
    let phases: Result<Vec<f64>> =
        crate::par::map_range(transverse, |t| zak_phase_wilson(&states.line(direction, t)))
            .into_iter()
            .collect();
    Ok(PhaseProfile::on_loop(PhaseKind::Zak, phases?)?.with_direction(direction))
}

/// Plaquette Berry phases of a grid of frames.
pub fn berry_curvature_plaquette(states: &StateGrid) -> Result<CurvatureField> {
    let g = states.grid;
    let values: Result<Vec<f64>> = crate::par::map_range(g.len(), |idx| {
        let (i, j) = (idx / g.ny(), idx % g.ny());
        let a = states.at(i, j);
        let b = states.at(i + 1, j);
        let c = states.at(i + 1, j + 1);
        let d = states.at(i, j + 1);
        let phase = checked_link_phase(a, b, idx)?
            + checked_link_phase(b, c, idx)?
            + checked_link_phase(c, d, idx)?
            + checked_link_phase(d, a, idx)?;
        Ok(principal(phase))
    })
    .into_iter()
    .collect();
    Ok(CurvatureField { grid: g, values: values? })
}

/// `round(sum / 2 pi)`, refusing sums that are not close to an integer.
pub fn chern_number(field: &CurvatureField) -> Result<i64> {
    let value = field.total() / (2.0 * PI);
    let rounded = value.round();
    let residue = (value - rounded).abs();
    if residue > CHERN_RESIDUE_TOL {
        return Err(Error::NonIntegerChern { value, residue });
    }
    Ok(rounded as i64)
}

/// Integer winding of a closed profile, with an explicit jump margin.
pub fn winding_with_margin(profile: &PhaseProfile, margin: f64) -> Result<i64> {
    let (index, jump) = profile.max_jump();
    let n = profile.len();
    if jump >= PI - margin {
        return Err(Error::UnderResolved { jump, index, next: (index + 1) % n, suggested: 2 * n });
    }
    let total: f64 = profile.steps().iter().sum();
    Ok((total / (2.0 * PI)).round() as i64)
}

/// `(1 / 2 pi) sum_i principal(phi_{i+1} - phi_i)` around the loop.
pub fn winding_of_phase_profile(profile: &PhaseProfile) -> Result<i64> {
    winding_with_margin(profile, DEFAULT_JUMP_MARGIN)
}

/// `(C_x, C_y)` from the x-direction phase over `k_y` and the y-direction
/// phase over `k_x`; `C_y` carries the minus sign.
pub fn chern_from_zak_windings(x_profile: &PhaseProfile, y_profile: &PhaseProfile) -> Result<(i64, i64)> {
    Ok((winding_of_phase_profile(x_profile)?, -winding_of_phase_profile(y_profile)?))
}

/// Chern number of a state grid through its plaquette field.
pub fn chern_of_states(states: &StateGrid) -> Result<i64> {
    chern_number(&berry_curvature_plaquette(states)?)
}

/// Chern number of every band of `model`, lowest band first.
pub fn band_chern_numbers(model: &dyn BlochModel, grid: &MomentumGrid) -> Result<Vec<i64>> {
    (0..model.dim()).map(|n| chern_of_states(&StateGrid::bands(model, grid, n..n + 1)?)).collect()
}

/// Chern number of every fictitious band, most occupied first.
pub fn fictitious_band_chern_numbers(spec: &GaussianStateSpec, grid: &MomentumGrid) -> Result<Vec<i64>> {
    (0..spec.dim())
        .map(|n| chern_of_states(&StateGrid::fictitious_band(spec, grid, n)?))
        .collect()
}
