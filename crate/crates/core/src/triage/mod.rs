//! From a prediction map to a confidence level, an initiative action and a
//! slide category.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slide::{PatchCoord, PatchGrid, PATCH_PX};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageConfig {
    /// Positive iff p is strictly above this.
    pub positive_cutoff: f64,
    /// Uncertain iff p lies in this closed interval.
    pub uncertain_band: (f64, f64),
    pub high_pos_count: usize,
    pub high_pos_vs_uncertain_ratio: usize,
    pub low_uncertain_count: usize,
}

impl Default for TriageConfig {
    fn default() -> Self {
        Self {
            positive_cutoff: 0.5,
            uncertain_band: (0.25, 0.75),
            high_pos_count: 200,
            high_pos_vs_uncertain_ratio: 2,
            low_uncertain_count: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchCounts {
    pub n_positive: usize,
    pub n_uncertain: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitiativeAction {
    AutoDiagnose,
    Prefill,
    Manual,
}

/// Slide categories, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Negative,
    Itc,
    Micro,
    Macro,
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(Self::Negative),
            "itc" => Ok(Self::Itc),
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            other => Err(Error::InvalidParameter(format!("unknown category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageDecision {
    pub confidence: Confidence,
    pub action: InitiativeAction,
    /// Present unless the action is manual.
    pub diagnosis: Option<Category>,
    pub rule_fired: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisThresholds {
    pub itc_max_mm: f64,
    pub macro_min_mm: f64,
    pub microns_per_pixel: Option<f64>,
    /// Use 4-connectivity instead of 8 when grouping positive patches.
    pub four_connected: bool,
}

impl DiagnosisThresholds {
    pub fn new(microns_per_pixel: f64) -> Self {
        Self {
            itc_max_mm: 0.2,
            macro_min_mm: 2.0,
            microns_per_pixel: Some(microns_per_pixel),
            four_connected: false,
        }
    }
}

pub fn patch_counts(probabilities: &[f64], config: &TriageConfig) -> PatchCounts {
    let (lo, hi) = config.uncertain_band;
    PatchCounts {
        n_positive: probabilities.iter().filter(|&&p| p > config.positive_cutoff).count(),
        n_uncertain: probabilities.iter().filter(|&&p| lo <= p && p <= hi).count(),
    }
}

/// The five confidence rules, first match wins. Returns the level and the
/// 1-based rule number.
pub fn confidence_level(counts: PatchCounts, n_clusters: usize, config: &TriageConfig) -> (Confidence, u8) {
    let PatchCounts {
        n_positive: pos,
        n_uncertain: unc,
    } = counts;
    if pos > config.high_pos_count && pos > config.high_pos_vs_uncertain_ratio * unc {
        (Confidence::High, 1)
    } else if n_clusters == 0 {
        (Confidence::Low, 2)
    } else if unc > config.low_uncertain_count {
        (Confidence::Low, 3)
    } else if pos > config.high_pos_count {
        (Confidence::High, 4)
    } else {
        (Confidence::Mid, 5)
    }
}

pub fn initiative_action(confidence: Confidence) -> InitiativeAction {
    match confidence {
        Confidence::High => InitiativeAction::AutoDiagnose,
        Confidence::Mid => InitiativeAction::Prefill,
        Confidence::Low => InitiativeAction::Manual,
    }
}

/// Largest lesion extent in mm: the longer bounding-box side of each
/// connected group of positive patches, maximised over groups.
pub fn lesion_extent_mm(
    probabilities: &[f64],
    grid: &PatchGrid,
    thresholds: &DiagnosisThresholds,
    config: &TriageConfig,
) -> Result<f64> {
    let mpp = thresholds.microns_per_pixel.ok_or(Error::MissingScale)?;
    let coords = grid.tissue_coords();
    if coords.len() != probabilities.len() {
        return Err(Error::DimensionMismatch {
            expected: coords.len(),
            actual: probabilities.len(),
        });
    }
    let mut positive = vec![false; grid.len()];
    for (c, &p) in coords.iter().zip(probabilities) {
        if p > config.positive_cutoff {
            positive[grid.index(*c)] = true;
        }
    }
    let offsets: &[(i64, i64)] = if thresholds.four_connected {
        &[(-1, 0), (1, 0), (0, -1), (0, 1)]
    } else {
        &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    };
    let mut seen = vec![false; grid.len()];
    let mut longest = 0u32;
    for start in 0..grid.len() {
        if !positive[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let s = grid.coord(start);
        let (mut r0, mut c0, mut r1, mut c1) = (s.row, s.col, s.row, s.col);
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            r0 = r0.min(c.row);
            r1 = r1.max(c.row);
            c0 = c0.min(c.col);
            c1 = c1.max(c.col);
            for &(dr, dc) in offsets {
                let (r, cl) = (i64::from(c.row) + dr, i64::from(c.col) + dc);
                if r < 0 || cl < 0 || r >= i64::from(grid.rows) || cl >= i64::from(grid.cols) {
                    continue;
                }
                let n = PatchCoord::new(r as u32, cl as u32);
                let k = grid.index(n);
                if positive[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back(n);
                }
            }
        }
        longest = longest.max((r1 - r0 + 1).max(c1 - c0 + 1));
    }
    Ok(f64::from(longest) * f64::from(PATCH_PX) * mpp / 1000.0)
}

pub fn category_for_extent(extent_mm: f64, thresholds: &DiagnosisThresholds) -> Category {
    if extent_mm <= 0.0 {
        Category::Negative
    } else if extent_mm <= thresholds.itc_max_mm {
        Category::Itc
    } else if extent_mm <= thresholds.macro_min_mm {
        Category::Micro
    } else {
        Category::Macro
    }
}

/// Slide category from the prediction map (aligned with tissue patches).
pub fn diagnose_slide(
    probabilities: &[f64],
    grid: &PatchGrid,
    thresholds: &DiagnosisThresholds,
    config: &TriageConfig,
) -> Result<Category> {
    let extent = lesion_extent_mm(probabilities, grid, thresholds, config)?;
    Ok(category_for_extent(extent, thresholds))
}

/// Full decision for one slide.
pub fn triage(
    probabilities: &[f64],
    n_clusters: usize,
    grid: &PatchGrid,
    thresholds: &DiagnosisThresholds,
    config: &TriageConfig,
) -> Result<TriageDecision> {
    let (confidence, rule_fired) = confidence_level(patch_counts(probabilities, config), n_clusters, config);
    let action = initiative_action(confidence);
    let diagnosis = match action {
        InitiativeAction::Manual => None,
        _ => Some(diagnose_slide(probabilities, grid, thresholds, config)?),
    };
    Ok(TriageDecision {
        confidence,
        action,
        diagnosis,
        rule_fired,
    })
}
