//! Numerical laboratory for uniform counting in multiplicative Diophantine
//! approximation: counting sets, volumes of hyperbolic regions, tessellations,
//! lattice heights along diagonal flows, controlled sets, correlation
//! identities and the dyadic Borel-Cantelli machinery.

pub mod config;
pub mod controlled;
pub mod correlations;
pub mod counting;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod heights;
pub mod params;
pub mod quad;
pub mod rng;
pub mod schmidt;
pub mod tessellation;
pub mod volumes;

pub use error::{Error, Result};
pub use params::{
    apply_flow, apply_flow_with_cap, validate_schedule, Box3, DomainSet, FlowTime, ParamSchedule,
    Point3, Regime, TileIndex, Violation,
};
