//! mmflow: recover the convex potential of a moment measure.
//!
//! Given a discrete probability measure mu on R^d with barycenter 0 that is
//! not supported on a hyperplane, there is a convex u, unique up to
//! translation, with
//!
//!     (grad u)_# e^{-u} = mu.
//!
//! This crate finds u two ways and checks one against the other:
//!
//! * [`solver`] minimizes J(v) = sum_i mu_i v_i - ln int e^{-u_v} over the
//!   offsets of a max-affine ansatz u_v(x) = max_i (x . y_i - v_i) anchored
//!   at mu's atoms;
//! * [`primal`] attacks the density-side problem
//!   min E(rho) + T(rho, mu) directly on a 1-D grid, where E is the entropy
//!   and T the maximal-correlation transport cost; its fixed point is
//!   rho = e^{-u} / Z.
//!
//! Supporting modules implement the measure types ([`measures`]), the
//! entropy functional with its moment lower bound ([`entropy`]), exact
//! optimal transport with Kantorovich duals and geodesics ([`ot`]), and
//! max-affine convex function machinery with certified integration of
//! e^{-u} ([`convex`]).

pub mod convex;
pub mod entropy;
mod error;
pub mod measures;
pub mod numerics;
pub mod ot;
pub mod primal;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
