//! Scenario reduction for two-stage stochastic integer programs.
//!
//! Each scenario's relaxed feasible region is summarized by two numbers:
//! the LP lower bound `kappa` and the minimum of the same objective over the
//! region's maximum-volume inscribed ellipsoid, `sigma`. Scenarios are
//! clustered on a grid in `(kappa, sigma)` space, and the extensive form is
//! solved over one representative per cluster.

pub mod clustering;
pub mod coordinates;
pub mod distribute;
pub mod ellipsoid;
pub mod io;
pub mod linsolve;
pub mod model;
pub mod saa;
mod serde_ext;

pub mod cli;
