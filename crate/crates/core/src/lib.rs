//! Three-scale simulation of growing, dividing and interacting cells: a
//! stochastic particle model, a nonlocal density model and its local limit,
//! together with the observables used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod experiment;
pub mod fvm;
pub mod io;
pub mod kernel;
pub mod micro;
pub mod observables;

pub use domain::{build_grid, DensityField, DiagnosticsRecord, Grid3, ParticleEnsemble, SimConfig};
pub use error::{DomainError, FvError, IoError, KernelError, MicroError, ObservableError};
pub use experiment::{Preset, DEFAULT_OUTPUT_TIMES};
pub use fvm::{run_macro, run_meso, FragScheme, FvOptions, FvRun, FvSolver, Scale};
pub use kernel::{Amplitude, KernelSpec};
pub use micro::{run_micro, MicroOptions, MicroRun};
