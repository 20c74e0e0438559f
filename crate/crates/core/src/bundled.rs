//! Feeders shipped with the crate.
//!
//! `feeder_unbalanced_13` follows the IEEE 13-node test feeder; the two
//! scenario files reuse its network with scaled loads and extra PV.

use crate::io::{load_feeder_str, FeederError, Strictness};
use crate::network::FeederModel;

pub const SMOKE_4BUS: &str = include_str!("../data/feeder_smoke_4bus.feeder.json");
pub const UNBALANCED_13: &str = include_str!("../data/feeder_unbalanced_13.feeder.json");
/// Loads at 120 % of the base case.
pub const HIGH_LOAD_13: &str = include_str!("../data/feeder_unbalanced_13_high_load.feeder.json");
/// Light load with large PV at the far end of the feeder.
pub const HIGH_PV_13: &str = include_str!("../data/feeder_unbalanced_13_high_pv.feeder.json");

/// Names accepted by [`load`].
pub const NAMES: &[&str] = &[
    "feeder_smoke_4bus",
    "feeder_unbalanced_13",
    "feeder_unbalanced_13_high_load",
    "feeder_unbalanced_13_high_pv",
];

pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "feeder_smoke_4bus" => Some(SMOKE_4BUS),
        "feeder_unbalanced_13" => Some(UNBALANCED_13),
        "feeder_unbalanced_13_high_load" => Some(HIGH_LOAD_13),
        "feeder_unbalanced_13_high_pv" => Some(HIGH_PV_13),
        _ => None,
    }
}

/// Parses a bundled feeder by name.
pub fn load(name: &str) -> Result<FeederModel, FeederError> {
    let text = source(name).ok_or_else(|| FeederError::Read {
        path: name.to_string(),
        message: "no bundled feeder with this name".into(),
    })?;
    load_feeder_str(text, Strictness::Strict)
}
