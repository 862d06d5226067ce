//! Synthesis, certification and tracking of neural spatiotemporal tubes for
//! temporal reach-avoid-stay tasks.
//!
//! A tube is a time-varying ball `B(c(t), r(t))` produced by a small tanh
//! network ([`neural::TubeNet`]). It is trained on time collocation points
//! ([`trainer`]), certified over the whole horizon by a Lipschitz covering
//! argument ([`verifier`]), and tracked by a closed-form funnel controller
//! ([`controller`]) in closed-loop simulation ([`simulator`]).

pub mod controller;
pub mod dual;
pub mod error;
pub mod neural;
pub mod simulator;
pub mod trainer;
pub mod tube;
pub mod verifier;

pub use error::{Error, Result};
