//! Simulation laboratory for the approach to equilibrium of two exactly
//! solvable models: the freely expanding ideal gas on the flat d-torus and
//! the Kac ring.
//!
//! The crate is organised bottom-up:
//!
//! * [`torus`], [`logprob`], [`rng`] and [`time`]: shared value types.
//! * [`sampler`]: i.i.d. initial conditions from a one-particle measure.
//! * [`gas`]: closed-form free streaming, coarse-grained observables,
//!   velocity reversal and periodic orbits.
//! * [`analytic`]: Fourier-series expectations and every probability bound,
//!   carried in log space.
//! * [`kac`]: bit-packed Kac ring dynamics, closed forms and an exact
//!   enumeration oracle.
//! * [`ensemble`]: deterministic parallel Monte Carlo experiments.
//! * [`cli`]: configuration parsing and experiment execution for the
//!   `kacgas` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod csv;
pub mod ensemble;
pub mod error;
pub mod gas;
pub mod kac;
pub mod logprob;
pub mod rng;
pub mod sampler;
pub mod time;
pub mod torus;

pub use error::{Error, Result};
pub use logprob::{Bound, LogProbability};
pub use rng::RngStream;
pub use time::TimeGrid;
pub use torus::{fractional_part, region_contains, GasMicrostate, RegionPartition, TorusPoint, TorusRegion};
