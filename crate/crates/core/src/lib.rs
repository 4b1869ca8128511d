//! Pseudospectral solver for the generalized Korteweg–de Vries equation
//!
//! ```text
//! ∂_t u + ∂_x³ u = μ ∂_x(|u|^{2α} u)
//! ```
//!
//! on a large periodic box, together with diagnostics for its long-time
//! behavior: conservation laws, the vector fields `J` and `P`, mixed
//! space-time norms, Strichartz sampling and scattering criteria.

pub mod commands;
pub mod config;
pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod initial;
pub mod io;
pub mod model;
pub mod norms;
pub mod scattering;
pub mod spectral;
pub mod vector_fields;
pub mod verify;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use evolve::{evolve, step, SimState, StepperConfig, StoreStride, Trajectory};
pub use field::{RealField, SpectralField};
pub use grid::GridSpec;
pub use model::ModelParams;
