//! Electromechanical modeling and analysis of subsynchronous-resonance
//! vulnerability in multi-machine power systems.
//!
//! The pipeline: load a system description ([`model`]), build the linear
//! electrical coupling by Kron reduction ([`network`]), assemble the
//! state-space model with five-mass shaft dynamics ([`statespace`]), scan
//! transfer-function magnitudes from a storage-device injection point and
//! locate vulnerable frequency bands ([`freq`]), and confirm them with
//! time-domain attack simulations ([`sim`]).

pub mod error;
pub mod fixtures;
pub mod fmtnum;
pub mod freq;
mod linalg;
pub mod model;
pub mod network;
pub mod sim;
pub mod statespace;

pub use error::{Error, Result};
pub use model::{load_model, serialize, validate, AttackSpec, SystemModel, ValidationReport};
pub use network::{build_susceptance, kron_reduce, steady_state_angles, ReducedCoupling, SusceptanceMatrix};
pub use statespace::{assemble, build_input_map, eig_modes_of, ModeSet, StateIndexMap, StateSpaceSystem};
