//! Bundled example system.

use crate::model::{load_model, SystemModel};

/// Two-area example configuration shipped with the crate.
pub const TWO_AREA_CFG: &str = include_str!("../fixtures/two_area.cfg");

/// Parsed two-area example system.
pub fn two_area() -> SystemModel {
    load_model(TWO_AREA_CFG).expect("bundled two-area config must parse")
}
