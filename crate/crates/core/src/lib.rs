//! Sensor network localization through semidefinite relaxation.
//!
//! The crate generates random planar networks with noisy range measurements,
//! turns them into cone programs (an l1 slack model, a least-squares model and
//! a mean/variance shaping quadratic model), solves them with an embedded
//! interior-point method and scores the estimates.

pub mod cli;
pub mod conic;
pub mod experiments;
pub mod metrics;
pub mod models;
pub mod netgen;
