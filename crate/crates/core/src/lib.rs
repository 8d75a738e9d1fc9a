pub mod analytic;
pub mod averaging;
pub mod calculus;
pub mod error;
pub mod exchange;
pub mod field;
pub mod grid;
pub mod madelung;
pub mod params;
pub mod schrodinger;
pub mod spectral;
pub mod stencil;
pub mod tracer;
pub mod validation;
pub mod hydro_solver;
pub mod kvdoc;
pub use error::{Error, Result};
