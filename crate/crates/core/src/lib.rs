pub mod closure;
pub mod cones;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod liealg;
pub mod linalg;
pub mod mech;
pub mod scalar;
pub mod selftest;
pub mod tracking;

pub use error::{Error, Result, Stage};
