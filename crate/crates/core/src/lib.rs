//! Extended CMV matrices with quasi-periodic and period-two Verblunsky coefficients:
//! Szego cocycles, rotation numbers, gap labels, resonance tongues and coined walks.

pub mod cocycle;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod qwalk;
pub mod spectrum;
pub mod tongues;

pub use error::{Error, Result};
