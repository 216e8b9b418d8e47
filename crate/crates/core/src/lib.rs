//! Indirect-adaptive model predictive control for polytopic uncertain linear
//! systems.
//!
//! Offline: [`design`] synthesizes vertex gains and a parameter-dependent
//! terminal cost from an LMI, [`sets`] computes the robust control invariant
//! set, the robust state-input set, the terminal set and the horizon.
//! Online: [`controller`] solves one condensed QP per step ([`mpc`], [`qp`])
//! using an N-step delayed parameter prediction fed by the [`estimator`].
//! [`sim`] closes the loop and verifies the resulting traces.

pub mod controller;
pub mod design;
pub mod error;
pub mod estimator;
pub mod io;
pub mod lp;
pub mod model;
pub mod mpc;
pub mod polytope;
pub mod qp;
pub mod sdp;
pub mod sets;
pub mod sim;
pub mod simplex;

pub use error::{Error, Result};
pub use nalgebra;
pub use polytope::Polytope;
