//! Conditional marginal screening for generalized linear models.
//!
//! Every candidate feature is fitted in a small GLM next to a fixed
//! conditioning set (plus an intercept); features are then ranked by the
//! magnitude of their fitted coefficient (CSIS) or by the likelihood they
//! add over the conditioning-only fit (CMLR). Thresholds can be chosen by
//! controlling the expected number of false positives through Wald
//! statistics, or by random decoupling (row permutation of the candidate
//! columns).
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature adds
//! `std::error::Error` impls, and `parallel` runs feature sweeps on rayon.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod datagen;
mod error;
pub mod family;
pub mod glm;
pub mod linalg;
pub mod metrics;
pub mod normal;
pub mod rng;
pub mod screening;
pub mod thresholding;

pub use data::{ConditioningSet, Dataset, Matrix};
pub use error::{Error, Result};
pub use family::Family;
pub use glm::{fit_glm, FitOptions, FitProblem, FitResult};
pub use screening::{screen_conditional, FeatureStat, RankBy, ScreenOptions, ScreenStatistics};
