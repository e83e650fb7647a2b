//! Numerical companion for exterior Dirichlet problems of the form
//! `-div(|Du|^(p-2) A(|Du|) Du) = f` outside a compact set.

pub mod annulus;
pub mod asymptotics;
pub mod banded;
pub mod barrier;
pub mod error;
pub mod expr;
pub mod mesh;
pub mod operator;
pub mod quadrature;
pub mod radial;
pub mod rearrangement;
pub mod roots;
pub mod source;
pub mod special;

pub use error::{Error, Result};
pub use operator::{Coefficient, ConditionReport, OperatorSpec, PHI_INV_TOL};
pub use source::{Decay, NormConditionReport, Profile, SourceKind, SourceTerm};
pub use annulus::{solve_dirichlet, solve_dirichlet_with, EnergyReport, Method, SolveOptions};
pub use asymptotics::{decay_fit, envelope_check, osc_prediction, sphere_stats, SphereData, SphereStats};
pub use barrier::{Barrier, Family};
pub use mesh::{AnnularMesh, BoundaryData, GridFunction};
pub use rearrangement::{rearrange, talenti_bound, RearrangementData, SourceSharp};
