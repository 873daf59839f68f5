//! Front tracking laboratory for 1-D Lagrangian gas dynamics.

// `!(a < b)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bly;
pub mod commands;
pub mod config;
pub mod entropy;
pub mod error;
pub mod front;
pub mod gas;
pub mod glimm;
pub mod holder;
pub mod ode;
pub mod stats;
pub mod suite;
pub mod tracker;
pub mod waves;

pub use error::{Error, Result};
pub use front::{Front, FrontKind, FrontTracker, Profile, SchemeParameters, StepFunction};
pub use gas::{GasParameters, State, StateBox};
pub use tracker::{Side, Trajectory};
pub use waves::{Family, RiemannFan, WaveKind, Waves};
