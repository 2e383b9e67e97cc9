//! Correction of approximately holomorphic discs into pseudoholomorphic ones.
//!
//! Maps `u: D → ℝ²ⁿ ≅ ℂⁿ` are discretized in an orthonormal modal basis on the
//! unit disc. The crate provides the operator `ℱ(u) = ∂̄u + A(u)·conj(∂u)` for an
//! almost complex structure encoded by its complex anti-linear part `A`, a
//! bounded right inverse of its linearization, a frozen-inverse Newton
//! iteration with explicit contraction constants, and gluing of two half-disc
//! maps.
//!
//! Everything is generic over the real scalar (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod basis;
pub mod calculus;
pub mod dbar;
pub mod error;
pub mod example_r6;
pub mod expr;
pub mod gluing;
pub mod modal;
pub mod newton;
pub mod norms;
pub mod quadrature;
pub mod report;
pub mod rightinv;
pub mod scalar;
pub mod structure;

pub use basis::{DiscMap, DiscretizationSpec, GridField};
pub use error::{Error, Result};
pub use expr::parse_disc;
pub use gluing::{glue, preglue, Cutoff, GlueError, GlueReport, GluingConfig, Half, HalfDiscMap};
pub use modal::{Discretization, ModalMap, ModalSpace};
pub use newton::{solve, NewtonConfig, NewtonReport, SolveError};
pub use norms::Region;
pub use rightinv::{kernel_dim, op_norm, right_inverse, RightInverse, RightInverseOptions, SubstitutionMode};
pub use scalar::{Scalar, C};
pub use structure::StructureSpec;

pub type Complex64 = C<f64>;
pub type DiscMap64 = DiscMap<f64>;
pub type GridField64 = GridField<f64>;
pub type ModalMap64 = ModalMap<f64>;
pub type Discretization64 = Discretization<f64>;
pub type Structure64 = StructureSpec<f64>;
pub type NewtonConfig64 = NewtonConfig<f64>;
pub type NewtonReport64 = NewtonReport<f64>;
pub type GluingConfig64 = GluingConfig<f64>;
pub type GlueReport64 = GlueReport<f64>;
pub type Region64 = Region<f64>;
