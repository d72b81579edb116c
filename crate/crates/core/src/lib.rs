//! Core engine for mixed-initiative slide triage.
//!
//! The pipeline runs on a slide cut into 96×96 patches:
//!
//! 1. [`slide`]: tiling, Otsu tissue detection, synthetic slides.
//! 2. [`features`]: per-patch feature vectors from a named extractor, or
//!    loaded from a feature file.
//! 3. [`anomaly`]: isolation-forest outlier scores.
//! 4. [`attention`]: uncertainty/attention maps, DBSCAN over high-attention
//!    patches and the two recommendation boxes.
//! 5. [`mil`]: coarse box labels distilled into training pools and a
//!    random-forest patch classifier.
//! 6. [`triage`]: confidence rules, initiative action and slide category.

pub mod anomaly;
pub mod attention;
pub mod error;
pub mod features;
pub mod mil;
pub mod registry;
pub mod seed;
pub mod slide;
pub mod triage;

pub use error::{Error, Result};
pub use registry::Registry;
