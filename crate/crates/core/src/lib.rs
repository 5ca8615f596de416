//! Numerical laboratory for monostable cooperative systems with nonlocal
//! dispersal and free boundaries.

pub mod analysis;
pub mod cauchy_sim;
pub mod expr;
pub mod fb_sim;
pub mod kernels;
pub mod nonlocal_ops;
pub mod quad;
pub mod reactions;
pub mod semiwave;
pub mod stats;
