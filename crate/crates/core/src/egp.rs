//! Ensemble geometric phase of Gaussian states on finite periodic chains.
//!
//! The amplitude is `z = Tr[rho exp(2 pi i X / N)]` with the cell position
//! operator `X = sum_j j n_j` (cells `j = 0..N`). For a Gaussian state with
//! chain correlations `M` the trace reduces to `det[1 + M (D - 1)]`,
//! `D = diag(exp(i theta))`, which is evaluated in log form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianStateSpec};
use crate::geometry::{self, PhaseKind, PhaseProfile, DEFAULT_JUMP_MARGIN};
use crate::linalg::{self, principal, CMatrix, LogDet};
use crate::model::{self, Direction};

/// `sigma_min / sigma_max` of `1 + M (D - 1)` below which the amplitude
/// counts as zero and its phase as undefined.
pub const ZERO_AMPLITUDE_RATIO: f64 = 1e-12;
/// Largest transverse grid automatic refinement will try.
pub const MAX_TRANSVERSE: usize = 1024;

/// Phases `theta_a` of a unitary diagonal in the site-orbital basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalUnitarySpec {
    pub angles: Vec<f64>,
}

impl DiagonalUnitarySpec {
    /// `exp(2 pi i X / N)` on `N` cells with `dim` orbitals each (j-major).
    pub fn cell_translation(n_cells: usize, dim: usize) -> Self {
        let angles = (0..n_cells * dim)
            .map(|a| 2.0 * PI * (a / dim) as f64 / n_cells as f64)
            .collect();
        Self { angles }
    }
}

/// `Tr[rho U]` for a Gaussian `rho` and diagonal `U`, in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTrace {
    pub log_det: LogDet,
    /// `sigma_min / sigma_max` of the determinant's matrix.
    pub conditioning: f64,
}

/// `det[1 + M (D - 1)]` for correlations `M[a, b] = <c_a^dagger c_b>`.
pub fn gaussian_trace_diagonal_unitary(correlations: &CMatrix, unitary: &DiagonalUnitarySpec) -> Result<GaussianTrace> {
    let n = correlations.nrows();
    if correlations.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: correlations.ncols() });
    }
    if unitary.angles.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: unitary.angles.len() });
    }
    let mut a = correlations.clone();
    for (col, &theta) in unitary.angles.iter().enumerate() {
        let factor = num_complex::Complex64::from_polar(1.0, theta) - 1.0;
        a.column_mut(col).iter_mut().for_each(|z| *z *= factor);
    }
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let s = linalg::singular_values(&a);
    let conditioning = match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => min / max,
        _ => 0.0,
    };
    Ok(GaussianTrace { log_det: linalg::log_det(&a), conditioning })
}

/// One EGP evaluation at fixed transverse momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgpResult {
    pub direction: Direction,
    pub transverse_k: f64,
    pub n_cells: usize,
    #[serde(with = "crate::io::extended_float")]
    pub beta: f64,
    /// `arg z` in (-pi, pi].
    pub phase: f64,
    /// `|z|`, may underflow to 0 for long hot chains; see `log_modulus`.
    pub modulus: f64,
    #[serde(with = "crate::io::extended_float")]
    pub log_modulus: f64,
    #[serde(with = "crate::io::extended_float")]
    pub conditioning: f64,
}

impl EgpResult {
    pub fn amplitude(&self) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(self.modulus, self.phase)
    }
}

fn spec_beta(spec: &GaussianStateSpec) -> f64 {
    spec.beta().unwrap_or(f64::NAN)
}

fn spec_temperature(spec: &GaussianStateSpec) -> Option<f64> {
    spec.beta().map(|b| if b.is_infinite() { 0.0 } else { 1.0 / b })
}

/// EGP of the chain along `direction` at `transverse_k`.
pub fn egp_component(
    spec: &GaussianStateSpec,
    direction: Direction,
    transverse_k: f64,
    n_cells: usize,
) -> Result<EgpResult> {
    let chain = gaussian::chain_correlation_matrix(spec, direction, transverse_k, n_cells)?;
    let unitary = DiagonalUnitarySpec::cell_translation(n_cells, chain.dim);
    let trace = gaussian_trace_diagonal_unitary(&chain.entries, &unitary)?;
    if trace.conditioning < ZERO_AMPLITUDE_RATIO {
        return Err(Error::ZeroAmplitude { transverse_k, ratio: trace.conditioning });
    }
    Ok(EgpResult {
        direction,
        transverse_k,
        n_cells,
        beta: spec_beta(spec),
        phase: trace.log_det.phase,
        modulus: trace.log_det.log_modulus.exp(),
        log_modulus: trace.log_det.log_modulus,
        conditioning: trace.conditioning,
    })
}

/// EGP components over a transverse loop together with their phase profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EgpScan {
    pub profile: PhaseProfile,
    pub components: Vec<EgpResult>,
}

/// EGP at `n_transverse` uniformly spaced transverse momenta.
pub fn egp_profile(
    spec: &GaussianStateSpec,
    direction: Direction,
    n_cells: usize,
    n_transverse: usize,
) -> Result<EgpScan> {
    let ks = model::loop_samples(n_transverse);
    let components: Vec<EgpResult> = crate::par::map(&ks, |&k| egp_component(spec, direction, k, n_cells))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut profile = PhaseProfile::new(PhaseKind::Egp, ks, components.iter().map(|c| c.phase).collect())?
        .with_direction(direction)
        .with_cells(n_cells);
    if let Some(t) = spec_temperature(spec) {
        profile = profile.with_temperature(t);
    }
    Ok(EgpScan { profile, components })
}

/// Like [`egp_profile`], doubling the transverse grid (up to `max_transverse`)
/// until no step comes within the jump margin of `pi`.
pub fn egp_profile_refined(
    spec: &GaussianStateSpec,
    direction: Direction,
    n_cells: usize,
    n_transverse: usize,
    max_transverse: usize,
) -> Result<EgpScan> {
    let mut n = n_transverse;
    loop {
        let scan = egp_profile(spec, direction, n_cells, n)?;
        if !scan.profile.is_under_resolved(DEFAULT_JUMP_MARGIN) || 2 * n > max_transverse {
            return Ok(scan);
        }
        n *= 2;
    }
}

/// Both EGP Chern numbers and the profiles they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EgpWindings {
    pub cx: i64,
    pub cy: i64,
    pub x: EgpScan,
    pub y: EgpScan,
}

/// `C_x` from the x-chain EGP over `k_y`, `C_y = -winding` of the y-chain
/// EGP over `k_x`. The two must agree.
pub fn egp_windings(spec: &GaussianStateSpec, n_cells: usize, n_transverse: usize) -> Result<EgpWindings> {
    egp_windings_up_to(spec, n_cells, n_transverse, MAX_TRANSVERSE)
}

/// [`egp_windings`] with an explicit cap on transverse refinement.
pub fn egp_windings_up_to(
    spec: &GaussianStateSpec,
    n_cells: usize,
    n_transverse: usize,
    max_transverse: usize,
) -> Result<EgpWindings> {
    let x = egp_profile_refined(spec, Direction::X, n_cells, n_transverse, max_transverse)?;
    let y = egp_profile_refined(spec, Direction::Y, n_cells, n_transverse, max_transverse)?;
    let (cx, cy) = geometry::chern_from_zak_windings(&x.profile, &y.profile)?;
    if cx != cy {
        return Err(Error::EgpChernInconsistency { cx, cy });
    }
    Ok(EgpWindings { cx, cy, x, y })
}

/// Ground-state reference for the EGP on an `N`-cell chain: the Wilson-loop
/// Zak phase of the filled fictitious bands over the chain momenta, plus
/// `(N - 1) n_filled pi` from reordering the Slater determinant.
pub fn zak_reference(
    spec: &GaussianStateSpec,
    direction: Direction,
    transverse_k: f64,
    n_cells: usize,
) -> Result<f64> {
    let frames: Vec<CMatrix> = gaussian::chain_momenta(n_cells)
        .into_iter()
        .map(|k| gaussian::filled_fictitious_frame(spec, direction.point(k, transverse_k)))
        .collect::<Result<_>>()?;
    let filled = frames[0].ncols();
    let zak = geometry::zak_phase_wilson(&frames)?;
    let parity = ((n_cells - 1) * filled) % 2;
    Ok(principal(zak + parity as f64 * PI))
}

/// [`zak_reference`] over the same transverse loop as [`egp_profile`].
pub fn zak_reference_profile(
    spec: &GaussianStateSpec,
    direction: Direction,
    n_cells: usize,
    n_transverse: usize,
) -> Result<PhaseProfile> {
    let ks = model::loop_samples(n_transverse);
    let phases: Vec<f64> = crate::par::map(&ks, |&k| zak_reference(spec, direction, k, n_cells))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(PhaseProfile::new(PhaseKind::Zak, ks, phases)?.with_direction(direction).with_cells(n_cells))
}

/// One row of a gauge-reduction study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReductionRow {
    pub n_cells: usize,
    pub egp: f64,
    pub reference: f64,
    /// `|principal(egp - reference)|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReduction {
    pub direction: Direction,
    pub transverse_k: f64,
    pub rows: Vec<GaugeReductionRow>,
    /// Least-squares `alpha` in `deviation ~ N^-alpha`, if every deviation is positive.
    pub alpha: Option<f64>,
}

impl GaugeReduction {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].deviation < w[0].deviation)
    }
}

/// Deviation of the finite-temperature EGP from its ground-state reference
/// for each chain length in `n_list`.
pub fn gauge_reduction(
    spec: &GaussianStateSpec,
    direction: Direction,
    transverse_k: f64,
    n_list: &[usize],
) -> Result<GaugeReduction> {
    let rows: Vec<GaugeReductionRow> = crate::par::map(n_list, |&n| {
        let egp = egp_component(spec, direction, transverse_k, n)?.phase;
        let reference = zak_reference(spec, direction, transverse_k, n)?;
        Ok(GaugeReductionRow { n_cells: n, egp, reference, deviation: principal(egp - reference).abs() })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let alpha = fit_power_law(&rows);
    Ok(GaugeReduction { direction, transverse_k, rows, alpha })
}

fn fit_power_law(rows: &[GaugeReductionRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| r.deviation <= 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n_cells as f64).ln(), r.deviation.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// EGP of a one-parameter family of states over a closed cycle `t in [0, 2 pi)`
/// and its winding, i.e. the pumped charge.
pub fn pump_winding<F>(
    family: F,
    direction: Direction,
    transverse_k: f64,
    n_cells: usize,
    t_samples: usize,
) -> Result<(PhaseProfile, i64)>
where
    F: Fn(f64) -> Result<GaussianStateSpec> + Sync + Send,
{
    let ts: Vec<f64> = (0..t_samples).map(|i| 2.0 * PI * i as f64 / t_samples as f64).collect();
    let phases: Vec<f64> = crate::par::map(&ts, |&t| {
        Ok(egp_component(&family(t)?, direction, transverse_k, n_cells)?.phase)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let profile = PhaseProfile::new(PhaseKind::Pump, ts, phases)?.with_direction(direction).with_cells(n_cells);
    let winding = geometry::winding_of_phase_profile(&profile)?;
    Ok((profile, winding))
}
