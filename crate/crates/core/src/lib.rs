//! Numerical laboratory for one-parameter algebraic families of rational
//! maps on the Riemann sphere.
//!
//! A *dynamical pair* is a holomorphic family `f_lambda` of degree-`d`
//! rational maps together with a marked point `a(lambda)`. This crate
//! computes the objects that control the stability of such pairs:
//!
//! * escape-rate Green functions of homogeneous lifts ([`green`]),
//! * the bifurcation measure of the pair, obtained as the distributional
//!   Laplacian of the Green potential along the marked orbit ([`measure`]),
//! * the maximal-entropy measure of a single map, sampled by random
//!   inverse iteration ([`measure`]),
//! * repelling cycles, Misiurewicz (prerepelling) parameters with
//!   transversality certificates, Koenigs linearization and parameter-space
//!   renormalization ([`periodic`]),
//! * Lyapunov exponents, the Lattes characterization `L = (1/2) log d`,
//!   J-stability scans and whole-family diagnostics ([`exponents`]).
//!
//! Families and marked points are entered as expressions in `z` and
//! `lambda` (alias `c`), parsed by [`expr`].

pub mod expr;
pub mod family;
pub mod green;
pub mod grid;
pub mod measure;
pub mod numerics;
pub mod periodic;
pub mod exponents;
pub mod error;

pub use error::BifError;
pub use num_complex::Complex64;
