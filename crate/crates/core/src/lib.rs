//! Assortment optimization under the decision forest choice model.
//!
//! The core types are generic over [`Scalar`]: `f64` for production runs,
//! `f32` where memory matters, and [`num_rational::BigRational`] for exact
//! regression checks. Aliases below fix the common `f64` instantiation.

pub mod benders;
pub mod error;
pub mod fixtures;
pub mod formulations;
pub mod heuristics;
pub mod instancegen;
pub mod io;
pub mod lp;
pub mod model;
pub mod scalar;
pub mod subproblems;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Exact = num_rational::BigRational;
pub type Catalog = model::ProductCatalog<f64>;
pub type Forest = model::DecisionForest<f64>;
pub type Instance = model::Instance<f64>;
pub type Lp = lp::LinearProgram<f64>;
