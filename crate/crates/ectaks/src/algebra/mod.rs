//! Field, vector, and elliptic-curve arithmetic underneath the key scheme.

pub mod curve;
pub mod ecdl;
pub mod field;
pub mod search;
pub mod vector;

pub use curve::{CurvePoint, CurveParams, PointVector};
pub use ecdl::{ecdl_bruteforce, ORACLE_GUARD};
pub use field::{is_prime, FieldElement};
pub use search::find_toy_curves;
pub use vector::{
    dot, sample_nonzero_vector, sample_vector, sample_vector_where, solve_dot_constraint,
    solve_dot_constraint_where, FieldVector,
};
