//! Exact rational polyhedra.
//!
//! [`Polyhedron`] keeps an H- and a V-representation side by side, both in a
//! canonical form, so equality of sets is structural equality. Conversions
//! use the double description method on integer vectors; [`lp`] is an exact
//! simplex solver used for membership oracles and by downstream crates.

mod dd;
pub mod error;
mod guided;
pub mod json;
pub mod lp;
pub mod poly;
pub mod rat;

pub use error::{GeomError, ParseRatError};
pub use json::{from_json_str, from_json_value, to_json_string, to_json_value, PolyhedronJson};
pub use lp::{LinearProgram, LpOutcome, LpSolution, Relation};
pub use poly::{
    contains_point, contains_point_by_generators, contains_ray, dd_convert, diag_scale, intersect, intersect_all,
    is_subset, minkowski_sum, negate, rank, scale, set_equal, translate, HRep, Halfspace, Polyhedron,
    Representation, VRep, MAX_DIM,
};
pub use rat::{
    dot, format_rat, format_rats, parse_rat, parse_rats, rat, rat_from_f64, rat_from_f64_simplest, rat_int,
    rat_to_f64, rats_to_f64, simplest_between,
    Rat,
};
