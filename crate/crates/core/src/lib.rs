//! Pilot-wave simulation: a forced 1D Klein-Gordon field guiding a
//! relativistic point particle, seeded ensembles of such runs, and comparison
//! of the resulting particle density with the Born density of the free field.
//!
//! Units are Compton units throughout: lengths in `λ_c`, times in `τ_c`,
//! `c = 1`, `ω_c = 2π`.
//!
//! ```
//! use pilotwave::config::default_config;
//!
//! let config = default_config();
//! assert!(config.validate().is_ok());
//! assert_eq!(config.grid.nt, 4000);
//! ```

pub mod analytic;
pub mod archive;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod export;
pub mod particle;
pub mod stats;
pub mod wavefield;

pub use analytic::{AnalyticParams, AnalyticSolution};
pub use config::{default_config, Grid, PhysicalParams, RunConfig, TimeScheme, Units};
pub use ensemble::{calibrate, run_ensemble, run_single, Calibration, EnsembleResult, TrajectoryRecord};
pub use error::{Error, Result};
pub use particle::ParticleState;
pub use stats::{ComparisonReport, DensitySeries};
pub use wavefield::{FieldState, KleinGordonSolver};
