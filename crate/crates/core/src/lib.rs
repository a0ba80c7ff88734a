//! Synthesis of finite-round LOCC protocols for separable quantum
//! measurements, together with the no-go test that rules protocols out.

pub mod cone;
pub mod error;
pub mod fixtures;
pub mod hermitian;
pub mod io;
pub mod lift;
pub mod lp;
pub mod measurement;
pub mod random;
pub mod nogo;
pub mod synth;
pub mod tolerance;
pub mod tree;

pub use error::{Error, Result};
pub use hermitian::HermitianOperator;
pub use measurement::{Party, ProductOperator, SeparableMeasurement};
pub use tolerance::Tolerances;
