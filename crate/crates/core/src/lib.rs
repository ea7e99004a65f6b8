//! Root/critical-point geometry of random polynomials with roots drawn
//! uniformly from the unit disc, and Monte Carlo checks of its asymptotics.

pub mod analytic;
pub mod components;
pub mod cli;
pub mod critpoints;
pub mod harness;
pub mod heavytail;
pub mod kacrice;
pub mod par;
pub mod polyeval;
pub mod raster;
pub mod sampling;
pub mod stats;
