//! Simulation of three coupled bosonic modes with a Fredkin-type interaction
//! `g n_a (b† c + c† b)` under strong coherent drive of modes b and c.

pub mod analytic;
pub mod csv;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod linalg;
pub mod model;
pub mod wigner;

pub use error::{Error, Result};
pub use faer::c64;
