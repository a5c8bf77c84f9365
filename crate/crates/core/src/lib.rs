//! Singular-point classification and fiber-connectivity checks for integrable
//! systems that extend complexity-one torus actions on `C^n`.

pub mod classifier;
pub mod coeff;
pub mod error;
pub mod family;
pub mod fiber;
pub mod io;
pub mod jets;
pub mod lattice;
pub mod linalg;
pub mod local_model;
pub mod poly;

pub use error::{Error, Result};
