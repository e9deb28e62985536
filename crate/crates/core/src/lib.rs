//! Topological invariants of Gaussian mixed states of two-dimensional
//! lattice fermions.
//!
//! * [`model`]: Bloch Hamiltonians, momentum grids, band structure.
//! * [`gaussian`]: Gaussian states, fictitious Hamiltonians, chain correlations.
//! * [`geometry`]: Wilson loops, plaquette curvature, Chern numbers, windings.
//! * [`egp`]: ensemble geometric phase and its Chern numbers.
//! * [`uhlmann`]: Uhlmann holonomy and temperature scans.
//! * [`io`]: CSV, JSON and matrix-grid files.
//!
//! The `parallel` feature (on by default) runs sweeps over momenta with rayon.

pub mod egp;
pub mod error;
pub mod gaussian;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod model;
pub mod par;
pub mod uhlmann;

pub use egp::{egp_component, egp_profile, egp_windings, EgpResult};
pub use error::{Error, Result};
pub use gaussian::{GaussianStateSpec, FictitiousHamiltonianGrid};
pub use geometry::{
    berry_curvature_plaquette, chern_number, winding_of_phase_profile, CurvatureField, PhaseKind, PhaseProfile,
    StateGrid,
};
pub use model::{BlochModel, Direction, MomentumGrid, MomentumPoint, Qwz, SharedModel};
pub use uhlmann::{uhlmann_temperature_scan, InvariantReport, ScanOptions};

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
