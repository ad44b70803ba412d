//! Cosymplectic geometry on flat product charts: structures and Reeb fields,
//! cosymplectic and almost cosymplectic isotopies, Moser stability, flux
//! homomorphisms and Hofer-like lengths.

pub mod ad;
pub mod catalog;
pub mod cli;
pub mod cosym;
pub mod error;
pub mod flux;
pub mod forms;
pub mod isotopy;
pub mod linalg;
pub mod manifold;
pub mod norms;

pub use error::{GeomError, Result};
