//! Builds minimal, complexly normal surfaces `r = R·N` in S⁵ ⊂ C³ from
//! doubly periodic solutions of the Tzitzeica equation
//! `u_xx + u_yy = 4e^{-2u} - 4e^u`, and checks the immersion numerically.

pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lax;
pub mod linalg;
pub mod pipeline;
pub mod solver;
pub mod surface;

pub use error::{Error, Result};
