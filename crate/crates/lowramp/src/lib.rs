//! Low-rank matrix estimation in the dense limit.
//!
//! The crate covers the whole pipeline for the symmetric `X X^T` and the
//! bipartite `U V^T` problems:
//!
//! * [`priors`]: prior families and their input (denoising) functions,
//! * [`channels`]: output channels, Fisher score matrices and noise parameters,
//! * [`instance`]: planted and quenched instance generation and persistence,
//! * [`lowramp`]: the Low-RAMP message-passing solver and its Bethe free energy,
//! * [`state_evolution`]: state evolution, replica free energies, spectral
//!   analysis and the phase-transition finder,
//! * [`cli`]: the command-line driver behind the `lowramp` binary.
//!
//! The runnable programs in `examples/` show each capability end to end.

pub mod channels;
pub mod cli;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod lowramp;
pub mod priors;
pub mod quadrature;
pub mod spectral;
pub mod state_evolution;

pub use error::{Error, Result};
