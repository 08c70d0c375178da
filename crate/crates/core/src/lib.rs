//! Hierarchical configuration model with communities.

pub mod catalog;
pub mod community;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod exploration;
pub mod generator;
pub mod kernel;
pub mod limit;
pub mod parallel;
pub mod percolation;
pub mod rng;
pub mod stats;
pub mod union_find;
pub mod window;

pub use community::Community;
pub use distribution::{CommunityDistribution, Moments, Weight};
pub use error::{HcmError, Result};
