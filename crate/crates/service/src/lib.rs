//! Session service for mixed-initiative slide triage.
//!
//! A [`Session`] holds a set of slides and runs the label → retrain →
//! refresh loop. [`http`] exposes sessions over REST, and [`scripted`]
//! drives a session with a simulated annotator for evaluation.

pub mod cohort;
pub mod config;
pub mod error;
pub mod http;
pub mod metrics;
pub mod scripted;
pub mod session;

pub use config::SessionConfig;
pub use error::{Result, ServiceError};
pub use session::{LabelRequest, Session, SlideStatus};
