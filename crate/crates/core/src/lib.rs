//! Lagged regression over irregularly sampled EHR event streams.

pub mod cohort;
pub mod error;
pub mod evaluate;
pub mod inference;
pub mod lagreg;
pub mod pipeline;
pub mod reference;
pub mod report;
pub mod store;
pub mod study;
pub mod synth;
pub mod timeline;
pub mod transform;

pub use error::{Error, Result};
