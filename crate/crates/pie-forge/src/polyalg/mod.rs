//! Exact algebra for matrices of bivariate polynomials in `(s, th)`.

mod matrix;
mod parse;
mod poly;
pub mod serde_io;

pub use matrix::{MatError, PolyMat, RatMat};
pub use parse::{parse_poly, ParseError};
pub use poly::{rat, rint, Bound, Poly, PolyError, Rat, Var};
