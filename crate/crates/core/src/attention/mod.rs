//! Uncertainty and attention maps, attention clustering and recommendation boxes.

mod boxes;
mod dbscan;

pub use boxes::{recommendation_boxes, RecommendationBox};
pub use dbscan::{cluster_attention, cluster_points, Cluster, ClusterConfig};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Per-patch state of one iteration, aligned with the slide's tissue rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchScores {
    pub iteration: u32,
    pub outlier: Vec<bool>,
    /// Model probability; absent before the first model exists.
    pub probability: Option<Vec<f64>>,
    pub uncertainty: Option<Vec<f64>>,
    pub attention: Vec<f64>,
}

/// `1 − |0.5 − p| · 2`: 1 at p = 0.5, 0 at either extreme.
pub fn uncertainty(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfDomain(p));
    }
    Ok(1.0 - (0.5 - p).abs() * 2.0)
}

/// Merges the outlier flag and the model uncertainty of one patch.
pub trait AttentionRule: Send + Sync {
    fn name(&self) -> &str;
    fn combine(&self, outlier: bool, uncertainty: f64) -> f64;
}

/// Probabilistic OR: `o + u − o·u`.
#[derive(Debug, Default, Clone, Copy)]
pub struct SoftOr;

impl SoftOr {
    pub const NAME: &'static str = "soft-or";
}

impl AttentionRule for SoftOr {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn combine(&self, outlier: bool, uncertainty: f64) -> f64 {
        let o = if outlier { 1.0 } else { 0.0 };
        // o + u − o·u, arranged so the result is exact for o ∈ {0, 1}.
        o + uncertainty * (1.0 - o)
    }
}

/// Elementwise product `o · u`; kept for comparison with [`SoftOr`].
#[derive(Debug, Default, Clone, Copy)]
pub struct Product;

impl Product {
    pub const NAME: &'static str = "product";
}

impl AttentionRule for Product {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn combine(&self, outlier: bool, uncertainty: f64) -> f64 {
        if outlier {
            uncertainty
        } else {
            0.0
        }
    }
}

pub fn default_attention_rules() -> Registry<dyn AttentionRule> {
    let mut reg: Registry<dyn AttentionRule> = Registry::new("attention rule");
    reg.register(SoftOr::NAME, Arc::new(SoftOr));
    reg.register(Product::NAME, Arc::new(Product));
    reg
}

/// Attention per patch. Iteration 1 has no model, so attention is just the
/// outlier indicator; later iterations merge outliers with uncertainty.
pub fn attention_map(
    outlier: &[bool],
    uncertainty: Option<&[f64]>,
    iteration: u32,
    rule: &dyn AttentionRule,
) -> Result<Vec<f64>> {
    match (iteration, uncertainty) {
        (0, _) => Err(Error::InvalidParameter("iterations start at 1".into())),
        (1, None) => Ok(outlier.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect()),
        (1, Some(_)) => Err(Error::Misaligned(
            "uncertainty supplied at iteration 1".into(),
        )),
        (_, None) => Err(Error::Misaligned(format!(
            "uncertainty missing at iteration {iteration}"
        ))),
        (_, Some(u)) => {
            if u.len() != outlier.len() {
                return Err(Error::Misaligned(format!(
                    "{} outlier flags vs {} uncertainties",
                    outlier.len(),
                    u.len()
                )));
            }
            Ok(outlier
                .iter()
                .zip(u)
                .map(|(&o, &u)| rule.combine(o, u))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn uncertainty_values() {
        assert_eq!(uncertainty(0.5).unwrap(), 1.0);
        assert_eq!(uncertainty(0.0).unwrap(), 0.0);
        assert_eq!(uncertainty(1.0).unwrap(), 0.0);
        assert_eq!(uncertainty(0.75).unwrap(), 0.5);
        assert!(matches!(uncertainty(1.01), Err(Error::OutOfDomain(_))));
        assert!(uncertainty(-0.1).is_err());
        assert!(uncertainty(f64::NAN).is_err());
    }

    #[test]
    fn soft_or_values() {
        let rule = SoftOr;
        assert_eq!(rule.combine(true, 0.3), 1.0);
        assert_eq!(rule.combine(false, 0.4), 0.4);
    }

    #[test]
    fn first_iteration_is_outlier_indicator() {
        let a = attention_map(&[true, false, true], None, 1, &SoftOr).unwrap();
        assert_eq!(a, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn precondition_errors() {
        assert!(attention_map(&[true], Some(&[0.2]), 1, &SoftOr).is_err());
        assert!(attention_map(&[true], None, 2, &SoftOr).is_err());
        assert!(matches!(
            attention_map(&[true, false], Some(&[0.2]), 2, &SoftOr),
            Err(Error::Misaligned(_))
        ));
    }

    #[test]
    fn product_zeroes_non_outliers() {
        let a = attention_map(&[true, false], Some(&[0.6, 0.9]), 2, &Product).unwrap();
        assert_eq!(a, vec![0.6, 0.0]);
    }

    #[test]
    fn registry_has_both_rules() {
        let reg = default_attention_rules();
        assert_eq!(reg.names(), vec!["product", "soft-or"]);
        assert_eq!(reg.get("soft-or").unwrap().name(), "soft-or");
    }

    proptest! {
        #[test]
        fn uncertainty_is_symmetric(p in 0.0f64..=1.0) {
            let d = uncertainty(p).unwrap() - uncertainty(1.0 - p).unwrap();
            prop_assert!(d.abs() < 1e-15);
        }

        #[test]
        fn soft_or_dominates(o in any::<bool>(), p in 0.0f64..=1.0) {
            let u = uncertainty(p).unwrap();
            let a = SoftOr.combine(o, u);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a >= u);
            let ind = if o { 1.0 } else { 0.0 };
            prop_assert!(a >= ind);
        }
    }
}
