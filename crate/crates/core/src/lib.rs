//! Kernel machines for multiple predicates trained under first-order logic
//! constraints.
//!
//! Clauses are parsed ([`fol`]), grounded over the sample pool into
//! differentiable product t-norm graphs ([`grounding`]) and added as a
//! penalty to a regularized kernel risk ([`objective`]) minimised in two
//! stages ([`trainer`]).

pub mod cli;
pub mod data;
pub mod fol;
pub mod grounding;
pub mod kernel;
pub mod model;
pub mod objective;
pub mod par;
pub mod problem;
pub mod tnorm;
pub mod toy;
pub mod trainer;
