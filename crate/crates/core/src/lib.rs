//! Disordered Thouless pumping of one and two non-interacting bosons on a
//! Rice-Mele chain: quantized Fock-state transport, pump-assisted
//! Hong-Ou-Mandel interference, and NOON-state distribution.

pub mod bloch;
pub mod error;
pub mod evolve;
pub mod fock2;
pub mod model;
pub mod protocol;

pub use error::{Error, Result};
