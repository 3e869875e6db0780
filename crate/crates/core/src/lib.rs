//! Statistical DDoS packet filtering by conditional legitimate probability.
//!
//! A nominal attribute profile is learned from legitimate traffic. During
//! operation every packet is scored against log-domain scorebooks built from
//! the previous period's measured profile, and packets scoring below a
//! threshold taken from the previous period's score CDF are discarded. The
//! discard fraction comes from a load shedder that keeps the victim below
//! its capacity.
//!
//! Ratio, score and threshold types are generic over [`Real`] (`f32` or
//! `f64`); the aliases below fix the usual double-precision instantiation.

// NaN must fail validation, so `!(a < b)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod packet_model;
pub mod pipeline;
pub mod profiling;
pub mod report;
pub mod scalar;
pub mod scoring;
pub mod traffic;

pub use error::{Error, Result};
pub use packet_model::{bucket_count, bucketize, AttributeKind, BucketConfig, Dimension, GroundTruth, PacketRecord};
pub use scalar::Real;

pub type NominalProfile64 = profiling::NominalProfile<f64>;
pub type NominalProfile32 = profiling::NominalProfile<f32>;
pub type Scorebook64 = scoring::Scorebook<f64>;
pub type Scorebook32 = scoring::Scorebook<f32>;
pub type Score64 = scoring::Score<f64>;
pub type ScoreCdf64 = control::ScoreCdf<f64>;
pub type ThresholdState64 = control::ThresholdState<f64>;
pub type Pipeline64 = pipeline::Pipeline<f64>;
pub type Pipeline32 = pipeline::Pipeline<f32>;
pub type PacketVerdict64 = pipeline::PacketVerdict<f64>;
