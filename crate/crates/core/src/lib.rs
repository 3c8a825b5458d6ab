//! Numerical verification of the identities behind rigidity theorems for
//! hypersurfaces in Euclidean space.

pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod quadrature;
pub mod darboux;
pub mod pairs;
pub mod flex;
pub mod highdim;
pub mod boundary;
pub mod report;
