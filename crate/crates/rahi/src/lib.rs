//! Reliability-aware hybrid veracity classification.
//!
//! Two assessment arms score each news item: a dropout-equipped classifier
//! whose Monte Carlo passes yield a Gaussian (mean and variance) over the
//! fake-probability, and a crowd of commenters whose stances are aggregated
//! with difficulty-weighted per-user reliabilities into a Beta
//! distribution. A small encoder fuses the two by maximizing the likelihood
//! of samples pooled from both distributions; the fused mean is the final
//! veracity score and the fused standard deviation its reliability.
//!
//! Modules follow the processing stages:
//!
//! * [`distributions`] — Gaussian/Beta/uniform primitives and the seeded,
//!   splittable RNG everything else draws from.
//! * [`machine`] — hashed bag-of-words features, the dropout classifier,
//!   MC inference and its training loop.
//! * [`crowd`] — difficulty, reliability, aggregation, supervised
//!   adjustment and the vote baselines.
//! * [`fusion`] — sample pools, the fusion encoder, likelihood objectives
//!   and the analytic MLE oracles.
//! * [`pipeline`] — three-stage training, metrics, ablations, and the
//!   time-windowed dynamic evaluation.
//! * [`dataio`] — file schemas, ingestion and the synthetic corpus
//!   generator.
//! * [`config`] — the flat key-value configuration surface.

#![forbid(unsafe_code)]

pub mod config;
pub mod crowd;
pub mod dataio;
pub mod distributions;
pub mod error;
pub mod fusion;
pub mod machine;
pub mod pipeline;

pub use config::{ActivityMode, Config};
pub use distributions::{BetaDist, Dist, GaussianDist, SeededRng, UniformDist};
pub use error::{RahiError, Result};
