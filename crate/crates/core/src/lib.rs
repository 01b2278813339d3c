//! Kernels of hyperbolic type on finite sets, Lorentz isometries of `H^k`, and the
//! sphere integrals behind elementwise powers `cosh^t d`.
//!
//! * [`minkowski`]: the two Minkowski models, hyperboloid and boundary points, horospheres.
//! * [`isometry`]: Lorentz matrices, Möbius lifts, elliptic/parabolic/hyperbolic classification.
//! * [`kernels`]: validation and reconstruction of kernels, powers, conditionally negative kernels.
//! * [`representation`]: isometries induced by kernel automorphisms, orbit experiments.
//! * [`quadrature`]: the integrals `β_n`, change of variables, concentration, snowflake bounds.
//! * [`cli`]: the `hyperkernel` command-line front end.

// Quadrature tables are quoted to full published precision, and `!(x > 0.0)` is the
// NaN-rejecting form of a positivity check.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod io;
pub mod isometry;
pub mod kernels;
mod linalg;
pub mod minkowski;
pub mod quadrature;
pub mod representation;

pub use error::{Error, Result};
pub use isometry::{IsometryClass, IsometryKind, LorentzMap};
pub use kernels::{CndKernel, EmbeddingResult, KernelMatrix};
pub use minkowski::{BoundaryPoint, HyperbolicPoint, MinkowskiVector, ModelTag};
