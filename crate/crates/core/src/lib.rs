//! Counting unstable real eigenvalues of quadratic Sturm–Liouville pencils
//! `y'' + V(x) y = λ f₁(x) y + λ² f₂(x) y` with Maslov indices.

pub mod cli;
pub mod error;
pub mod frameflow;
pub mod lagrangian;
pub mod linalg;
pub mod maslov;
pub mod oracle;
pub mod pencil;

pub use error::{Error, Result};
