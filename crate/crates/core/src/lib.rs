//! Numerical laboratory for hyperbolic-parabolic boundary-value problems
//! with Neumann and mixed Dirichlet-Neumann boundary conditions: reduced
//! hyperbolic boundary conditions, Evans/Lopatinski stability quantities,
//! boundary-layer expansions, and small-viscosity verification with
//! finite-difference solvers at desk scale.

pub mod cauchy;
pub mod error;
pub mod expansion;
pub mod expr;
pub mod frequency;
pub mod grid;
pub mod lopatinski;
pub mod model;
pub mod report;
pub mod solvers;
pub mod symbols;

pub use error::{CoreError, Result};
pub use frequency::Frequency;
pub use model::HyperbolicParabolicModel;
