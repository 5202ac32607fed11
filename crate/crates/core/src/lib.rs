//! Coverage, rate and area spectral efficiency of multi-antenna heterogeneous
//! cellular downlinks with Poisson-distributed base stations.
//!
//! The crate pairs a Monte Carlo simulator of the stochastic-geometry model with
//! the closed-form results it is checked against: Laplace transforms of the
//! aggregate interference, coverage bounds, area spectral efficiency ratios and
//! stochastic-ordering tests between transmission techniques.

pub mod analytic;
pub mod experiment;
pub mod model;
pub mod montecarlo;
pub mod ordering;
pub mod sampling;
pub mod specfun;
