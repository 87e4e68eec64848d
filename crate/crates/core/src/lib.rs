//! Numerical toolkit for frequency functions of divergence-form elliptic equations
//! with coefficients of prescribed modulus of continuity.

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod frequency;
pub mod growth;
pub mod io;
pub mod modulus;
pub mod quad;
pub mod solver;
pub mod svg;

pub use coefficients::{Arity, CoefficientField, FieldConfig};
pub use error::{Error, Result};
pub use growth::{continuous_growth_bound, discrete_cascade, Forcing, GrowthBound, GrowthTrace};
pub use modulus::{classify_osgood, Modulus, ModulusKind, OsgoodVerdict};
pub use solver::{solve_dirichlet, BoundaryData, DiscreteSolution, PolarGrid, Problem, SolveOptions};
