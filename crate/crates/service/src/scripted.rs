//! Scripted annotation runs: a policy labels recommendation boxes from the
//! ground truth, round after round, and every round is scored.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use impetus_core::attention::RecommendationBox;
use impetus_core::mil::{LabelKind, LabelSource};
use impetus_core::slide::PatchBounds;
use impetus_core::triage::{category_for_extent, diagnose_slide, Category, Confidence, DiagnosisThresholds, InitiativeAction};
use impetus_core::Registry;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Result, ServiceError};
use crate::metrics::roc_auc;
use crate::session::{LabelRequest, Session, SlideState, SlideStatus};

/// Chooses which of a slide's current recommendation boxes to label.
pub trait AnnotatorPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn pick(&self, boxes: &[RecommendationBox]) -> Vec<PatchBounds>;
}

/// Labels every box offered.
#[derive(Debug, Default, Clone, Copy)]
pub struct Diligent;

impl Diligent {
    pub const NAME: &'static str = "diligent";
}

impl AnnotatorPolicy for Diligent {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn pick(&self, boxes: &[RecommendationBox]) -> Vec<PatchBounds> {
        boxes.iter().map(|b| b.bounds).collect()
    }
}

/// Labels only the top-ranked box.
#[derive(Debug, Default, Clone, Copy)]
pub struct Lazy;

impl Lazy {
    pub const NAME: &'static str = "lazy";
}

impl AnnotatorPolicy for Lazy {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn pick(&self, boxes: &[RecommendationBox]) -> Vec<PatchBounds> {
        boxes.iter().filter(|b| b.rank == 1).map(|b| b.bounds).collect()
    }
}

pub fn default_annotators() -> Registry<dyn AnnotatorPolicy> {
    let mut reg: Registry<dyn AnnotatorPolicy> = Registry::new("annotator policy");
    reg.register(Diligent::NAME, Arc::new(Diligent));
    reg.register(Lazy::NAME, Arc::new(Lazy));
    reg
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub positive: usize,
    pub negative: usize,
    pub discarded: usize,
    pub deferred: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceCounts {
    pub high: usize,
    pub mid: usize,
    pub low: usize,
    /// Slides without a decision (no model yet).
    pub none: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideOutcome {
    pub slide_id: String,
    pub planted: Category,
    /// Category read off the current prediction map.
    pub predicted: Option<Category>,
    pub confidence: Option<Confidence>,
    pub action: Option<InitiativeAction>,
    pub status: SlideStatus,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Label rounds completed; 0 is the outlier-only starting state.
    pub iteration: u32,
    pub model_version: Option<u32>,
    pub labels_submitted: usize,
    /// Patch-level AUC over all slides' tissue patches. Before any model,
    /// anomaly scores stand in for probabilities.
    pub auc: Option<f64>,
    pub pools: PoolSizes,
    pub confidence: ConfidenceCounts,
    pub slides: Vec<SlideOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub policy: String,
    pub max_iterations: u32,
    pub master_seed: u64,
    pub n_slides: usize,
    pub iterations: Vec<IterationRecord>,
}

impl Report {
    pub fn final_record(&self) -> &IterationRecord {
        self.iterations.last().expect("report has the starting state")
    }

    /// Writes `path` as JSON and a per-iteration summary CSV next to it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        let csv_path = path.with_extension("csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record([
            "iteration", "model_version", "labels", "auc", "positive", "negative", "discarded", "deferred", "high",
            "mid", "low", "none",
        ])?;
        for r in &self.iterations {
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                r.iteration.to_string(),
                opt(r.model_version.map(|v| v.to_string())),
                r.labels_submitted.to_string(),
                opt(r.auc.map(|a| format!("{a:.6}"))),
                r.pools.positive.to_string(),
                r.pools.negative.to_string(),
                r.pools.discarded.to_string(),
                r.pools.deferred.to_string(),
                r.confidence.high.to_string(),
                r.confidence.mid.to_string(),
                r.confidence.low.to_string(),
                r.confidence.none.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(csv_path)
    }
}

fn thresholds(s: &SlideState, config: &SessionConfig) -> DiagnosisThresholds {
    let mut th = DiagnosisThresholds::new(s.manifest.microns_per_pixel);
    th.four_connected = config.four_connected;
    th
}

/// Category implied by the largest planted lesion.
pub fn planted_category(s: &SlideState, config: &SessionConfig) -> Result<Category> {
    let truth = s.truth.as_ref().ok_or_else(|| ServiceError::MissingTruth(s.id.clone()))?;
    let extent = truth.lesion_extents_mm.iter().copied().fold(0.0, f64::max);
    Ok(category_for_extent(extent, &thresholds(s, config)))
}

fn current_scores(s: &SlideState) -> &[f64] {
    s.scores.probability.as_deref().unwrap_or(&s.anomaly_scores)
}

/// Scores the session's current state.
pub fn record_iteration(session: &Session, iteration: u32, labels_submitted: usize) -> Result<IterationRecord> {
    let config = session.config();
    let mut all_scores = Vec::new();
    let mut all_truth = Vec::new();
    let mut slides = Vec::new();
    let mut confidence = ConfidenceCounts::default();
    for s in session.slides() {
        let truth = s.truth.as_ref().ok_or_else(|| ServiceError::MissingTruth(s.id.clone()))?;
        let scores = current_scores(s);
        let labels: Vec<bool> = s.features.patches().iter().map(|c| truth.is_tumor(*c)).collect();
        all_scores.extend_from_slice(scores);
        all_truth.extend_from_slice(&labels);
        let predicted = match &s.scores.probability {
            Some(p) => Some(diagnose_slide(p, &s.grid, &thresholds(s, config), &config.triage)?),
            None => None,
        };
        match s.triage.map(|t| t.confidence) {
            Some(Confidence::High) => confidence.high += 1,
            Some(Confidence::Mid) => confidence.mid += 1,
            Some(Confidence::Low) => confidence.low += 1,
            None => confidence.none += 1,
        }
        slides.push(SlideOutcome {
            slide_id: s.id.clone(),
            planted: planted_category(s, config)?,
            predicted,
            confidence: s.triage.map(|t| t.confidence),
            action: s.triage.map(|t| t.action),
            status: s.status,
            auc: roc_auc(scores, &labels),
        });
    }
    let mut pools = PoolSizes::default();
    for p in session.pools().values() {
        pools.positive += p.positive().len();
        pools.negative += p.negative().len();
        pools.discarded += p.discarded().len();
        pools.deferred += p.deferred_count();
    }
    Ok(IterationRecord {
        iteration,
        model_version: session.model_version(),
        labels_submitted,
        auc: roc_auc(&all_scores, &all_truth),
        pools,
        confidence,
        slides,
    })
}

/// The labels `policy` gives this round: each picked box not labelled
/// before on that slide, positive iff it touches tumor.
pub fn next_labels(session: &Session, policy: &dyn AnnotatorPolicy, seen: &mut HashSet<(String, PatchBounds)>) -> Result<Vec<LabelRequest>> {
    let mut out = Vec::new();
    for s in session.slides() {
        if s.status == SlideStatus::Confirmed {
            continue;
        }
        let truth = s.truth.as_ref().ok_or_else(|| ServiceError::MissingTruth(s.id.clone()))?;
        for bounds in policy.pick(&s.boxes) {
            if !seen.insert((s.id.clone(), bounds)) {
                continue;
            }
            out.push(LabelRequest {
                slide_id: s.id.clone(),
                bounds,
                label: if truth.intersects(&bounds) {
                    LabelKind::Positive
                } else {
                    LabelKind::Negative
                },
                source: LabelSource::RecommendationBox,
                timestamp: None,
            });
        }
    }
    Ok(out)
}

/// Runs up to `max_iterations` label rounds. Stops early once the policy has
/// nothing new to label.
pub fn run_scripted_session(session: &mut Session, policy: &dyn AnnotatorPolicy, max_iterations: u32) -> Result<Report> {
    if let Some(s) = session.slides().iter().find(|s| s.truth.is_none()) {
        return Err(ServiceError::MissingTruth(s.id.clone()));
    }
    let mut report = Report {
        policy: policy.name().to_string(),
        max_iterations,
        master_seed: session.config().master_seed,
        n_slides: session.slides().len(),
        iterations: vec![record_iteration(session, 0, 0)?],
    };
    let mut seen = HashSet::new();
    for k in 1..=max_iterations {
        let labels = next_labels(session, policy, &mut seen)?;
        if labels.is_empty() {
            tracing::info!(iteration = k, "no new boxes to label; stopping");
            break;
        }
        session.submit_labels(&labels)?;
        let record = record_iteration(session, k, labels.len())?;
        tracing::info!(iteration = k, labels = labels.len(), auc = ?record.auc, "round done");
        report.iterations.push(record);
    }
    Ok(report)
}

/// Opens a fresh in-memory session over `slide_dirs` and runs the policy.
pub fn simulate(slide_dirs: &[PathBuf], policy: &dyn AnnotatorPolicy, max_iterations: u32, config: SessionConfig) -> Result<(Report, Session)> {
    let mut session = Session::create("scripted", None, slide_dirs, config)?;
    let report = run_scripted_session(&mut session, policy, max_iterations)?;
    Ok((report, session))
}
