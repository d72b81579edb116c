//! One annotation session over a fixed set of slides.
//!
//! The session owns every slide's features and per-iteration state, the
//! training pools and the current model snapshot(s). Labels arrive in
//! rounds; each round ingests its labels, retrains once, and recomputes
//! every slide. With a session directory, the manifest and append-only logs
//! are enough to rebuild the exact state by replay.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::hash::{DefaultHasher, Hasher};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use impetus_core::anomaly::{fit_forest, outlier_mask, ForestConfig};
use impetus_core::attention::{
    attention_map, cluster_attention, default_attention_rules, recommendation_boxes, uncertainty, AttentionRule,
    PatchScores, RecommendationBox,
};
use impetus_core::features::{default_extractors, extract_features, read_features, FeatureMatrix};
use impetus_core::mil::{
    predict_map, train_mil_rf, AgileLabel, BoxInstances, LabelKind, LabelSource, MilModel, TrainingPools,
};
use impetus_core::seed::derive_seed;
use impetus_core::slide::{
    partition_patches, read_slide_store, read_truth, tile_path, tissue_mask, GroundTruth, LevelInfo, PatchBounds,
    PatchGrid, SlideManifest, TRUTH_FILE,
};
use impetus_core::triage::{triage, Category, DiagnosisThresholds, InitiativeAction, TriageDecision};
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Result, ServiceError};

pub const SESSION_MANIFEST: &str = "manifest.json";
pub const LABEL_LOG: &str = "labels.jsonl";
pub const DIAGNOSIS_LOG: &str = "diagnoses.jsonl";
pub const MODEL_DIR: &str = "models";
/// Optional precomputed features inside a slide directory.
pub const FEATURE_FILE: &str = "features.impf";

/// Scope key of the shared model.
const SHARED: &str = "";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlideStatus {
    Pending,
    Prefilled,
    AutoDiagnosed,
    Confirmed,
}

#[derive(Debug, Clone)]
pub struct SlideState {
    pub id: String,
    pub dir: PathBuf,
    pub manifest: SlideManifest,
    pub grid: PatchGrid,
    pub features: FeatureMatrix,
    pub truth: Option<GroundTruth>,
    pub anomaly_scores: Vec<f64>,
    pub scores: PatchScores,
    pub n_clusters: usize,
    pub boxes: Vec<RecommendationBox>,
    pub model_version: Option<u32>,
    pub triage: Option<TriageDecision>,
    pub final_diagnosis: Option<Category>,
    pub status: SlideStatus,
}

impl SlideState {
    pub fn summary(&self) -> SlideSummary {
        SlideSummary {
            slide_id: self.id.clone(),
            iteration: self.scores.iteration,
            status: self.status,
            triage: self.triage,
            final_diagnosis: self.final_diagnosis,
            boxes: self.boxes.clone(),
            model_version: self.model_version,
            rows: self.grid.rows,
            cols: self.grid.cols,
            tissue_patches: self.features.n_patches(),
            microns_per_pixel: self.manifest.microns_per_pixel,
            levels: self.manifest.levels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideSummary {
    pub slide_id: String,
    pub iteration: u32,
    pub status: SlideStatus,
    pub triage: Option<TriageDecision>,
    pub final_diagnosis: Option<Category>,
    pub boxes: Vec<RecommendationBox>,
    pub model_version: Option<u32>,
    pub rows: u32,
    pub cols: u32,
    pub tissue_patches: usize,
    pub microns_per_pixel: f64,
    pub levels: Vec<LevelInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub slide_id: String,
    pub bounds: PatchBounds,
    pub label: LabelKind,
    pub source: LabelSource,
    /// Defaults to the current time.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub iteration: u32,
    pub model_version: Option<u32>,
    pub slides: Vec<SlideSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlayKind {
    Attention,
    Prediction,
    Boxes,
}

impl std::str::FromStr for OverlayKind {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Self::Attention),
            "prediction" => Ok(Self::Prediction),
            "boxes" => Ok(Self::Boxes),
            other => Err(ServiceError::BadRequest(format!("unknown overlay kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorScale {
    pub low: String,
    pub high: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayBox {
    pub r0: u32,
    pub c0: u32,
    pub r1: u32,
    pub c1: u32,
    pub rank: u8,
    pub cluster_area: usize,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Overlay {
    /// Row-major value grid; `null` marks non-tissue patches.
    Attention {
        iteration: u32,
        rows: u32,
        cols: u32,
        values: Vec<Vec<Option<f64>>>,
        scale: ColorScale,
    },
    Prediction {
        iteration: u32,
        model_version: u32,
        rows: u32,
        cols: u32,
        values: Vec<Vec<Option<f64>>>,
        scale: ColorScale,
    },
    Boxes {
        iteration: u32,
        boxes: Vec<OverlayBox>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub slide_dirs: Vec<PathBuf>,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub seq: u64,
    pub round: u32,
    pub label: AgileLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRecord {
    pub slide_id: String,
    pub category: Category,
    /// Label rounds applied before this confirmation.
    pub after_round: u32,
}

#[derive(Serialize)]
struct StateView<'a> {
    round: u32,
    model_version: u32,
    label_seq: u64,
    pools: &'a BTreeMap<String, TrainingPools>,
    slides: Vec<(SlideSummary, &'a PatchScores)>,
}

pub struct Session {
    id: String,
    dir: Option<PathBuf>,
    manifest: SessionManifest,
    rule: Arc<dyn AttentionRule>,
    slides: Vec<SlideState>,
    index: HashMap<String, usize>,
    pools: BTreeMap<String, TrainingPools>,
    models: BTreeMap<String, Arc<MilModel>>,
    round: u32,
    model_version: u32,
    label_seq: u64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn append_json_line<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    f.write_all(&line)?;
    f.sync_data()?;
    Ok(())
}

fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ServiceError::CorruptLog {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", n + 1),
        })?);
    }
    Ok(out)
}

fn value_grid(grid: &PatchGrid, features: &FeatureMatrix, values: &[f64]) -> Vec<Vec<Option<f64>>> {
    let mut out = vec![vec![None; grid.cols as usize]; grid.rows as usize];
    for (c, &v) in features.patches().iter().zip(values) {
        out[c.row as usize][c.col as usize] = Some(v);
    }
    out
}

fn load_slide(dir: &Path, config: &SessionConfig) -> Result<SlideState> {
    let wrap = |source| ServiceError::SlideLoad {
        path: dir.to_path_buf(),
        source,
    };
    let slide = read_slide_store(dir).map_err(wrap)?;
    let manifest = SlideManifest::of(&slide);
    let mut grid = partition_patches(&slide).map_err(wrap)?;
    tissue_mask(&slide, &mut grid);
    let feature_file = dir.join(FEATURE_FILE);
    let features = if feature_file.exists() {
        read_features(&feature_file).and_then(|m| m.bind(&grid)).map_err(wrap)?
    } else {
        extract_features(&slide, &grid, &config.features, &default_extractors()).map_err(wrap)?
    };
    drop(slide);
    let truth = if dir.join(TRUTH_FILE).exists() {
        Some(read_truth(dir).map_err(wrap)?)
    } else {
        None
    };
    let id = manifest.id.clone();
    let n = features.n_patches();
    let anomaly_scores = if n >= 2 {
        let forest = fit_forest(
            &features,
            &ForestConfig {
                n_trees: config.iforest_trees,
                max_samples: config.iforest_max_samples,
                seed: derive_seed(config.master_seed, 0, &id, "iforest"),
            },
        )?;
        forest.score_all(&features)?
    } else {
        vec![0.0; n]
    };
    let outlier = if n == 0 {
        Vec::new()
    } else {
        outlier_mask(&anomaly_scores, config.outlier_policy)?
    };
    Ok(SlideState {
        id,
        dir: dir.to_path_buf(),
        manifest,
        grid,
        features,
        truth,
        anomaly_scores,
        scores: PatchScores {
            iteration: 1,
            outlier,
            probability: None,
            uncertainty: None,
            attention: Vec::new(),
        },
        n_clusters: 0,
        boxes: Vec::new(),
        model_version: None,
        triage: None,
        final_diagnosis: None,
        status: SlideStatus::Pending,
    })
}

impl Session {
    /// Loads the slides, runs outlier detection and computes the first
    /// attention maps and boxes. With `dir`, the session is persisted there.
    pub fn create(id: impl Into<String>, dir: Option<PathBuf>, slide_dirs: &[PathBuf], config: SessionConfig) -> Result<Self> {
        let mut session = Self::build(id.into(), slide_dirs, config)?;
        if let Some(dir) = dir {
            fs::create_dir_all(dir.join(MODEL_DIR))?;
            fs::write(dir.join(SESSION_MANIFEST), serde_json::to_vec_pretty(&session.manifest)?)?;
            File::create(dir.join(LABEL_LOG))?;
            File::create(dir.join(DIAGNOSIS_LOG))?;
            session.dir = Some(dir);
        }
        Ok(session)
    }

    fn build(id: String, slide_dirs: &[PathBuf], config: SessionConfig) -> Result<Self> {
        if slide_dirs.is_empty() {
            return Err(ServiceError::EmptySlideList);
        }
        let rule = default_attention_rules().get(&config.attention_rule)?;
        let mut slides = Vec::with_capacity(slide_dirs.len());
        let mut index = HashMap::new();
        let mut dimension: Option<usize> = None;
        for dir in slide_dirs {
            let s = load_slide(dir, &config)?;
            let dim = s.features.dimension();
            match dimension {
                Some(expected) if expected != dim => {
                    return Err(ServiceError::FeatureDimension {
                        slide: s.id,
                        expected,
                        actual: dim,
                    })
                }
                _ => dimension = Some(dim),
            }
            if index.insert(s.id.clone(), slides.len()).is_some() {
                return Err(ServiceError::DuplicateSlide(s.id));
            }
            tracing::debug!(slide = %s.id, patches = s.features.n_patches(), "slide loaded");
            slides.push(s);
        }
        let mut session = Self {
            id,
            dir: None,
            manifest: SessionManifest {
                session_id: String::new(),
                slide_dirs: slide_dirs.to_vec(),
                config,
            },
            rule,
            slides,
            index,
            pools: BTreeMap::new(),
            models: BTreeMap::new(),
            round: 0,
            model_version: 0,
            label_seq: 0,
        };
        session.manifest.session_id = session.id.clone();
        for i in 0..session.slides.len() {
            session.refresh(i)?;
        }
        Ok(session)
    }

    /// Rebuilds a persisted session by replaying its logs.
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: SessionManifest = serde_json::from_slice(&fs::read(dir.join(SESSION_MANIFEST))?)?;
        let mut session = Self::build(manifest.session_id.clone(), &manifest.slide_dirs, manifest.config.clone())?;
        let labels: Vec<LabelRecord> = read_json_lines(&dir.join(LABEL_LOG))?;
        let diagnoses: Vec<DiagnosisRecord> = read_json_lines(&dir.join(DIAGNOSIS_LOG))?;
        session.replay(&labels, &diagnoses, &dir.join(LABEL_LOG))?;
        session.dir = Some(dir.to_path_buf());
        Ok(session)
    }

    /// Applies logged rounds and confirmations in their original order.
    pub fn replay(&mut self, labels: &[LabelRecord], diagnoses: &[DiagnosisRecord], log_path: &Path) -> Result<()> {
        let corrupt = |reason: String| ServiceError::CorruptLog {
            path: log_path.to_path_buf(),
            reason,
        };
        let mut rounds: BTreeMap<u32, Vec<&LabelRecord>> = BTreeMap::new();
        for r in labels {
            rounds.entry(r.round).or_default().push(r);
        }
        let last_round = rounds.keys().next_back().copied().unwrap_or(0);
        for round in 1..=last_round {
            for d in diagnoses.iter().filter(|d| d.after_round == round - 1) {
                self.confirm_diagnosis(&d.slide_id, d.category)?;
            }
            let batch = rounds.get(&round).ok_or_else(|| corrupt(format!("round {round} missing")))?;
            if batch.first().map(|r| r.seq) != Some(self.label_seq) {
                return Err(corrupt(format!("round {round} does not start at label {}", self.label_seq)));
            }
            let reqs: Vec<LabelRequest> = batch
                .iter()
                .map(|r| LabelRequest {
                    slide_id: r.label.slide_id.clone(),
                    bounds: r.label.bounds,
                    label: r.label.label,
                    source: r.label.source,
                    timestamp: Some(r.label.timestamp),
                })
                .collect();
            self.submit_labels(&reqs)?;
        }
        for d in diagnoses.iter().filter(|d| d.after_round == last_round) {
            self.confirm_diagnosis(&d.slide_id, d.category)?;
        }
        if diagnoses.iter().any(|d| d.after_round > last_round) {
            return Err(corrupt("confirmation after the last label round".into()));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.manifest.config
    }

    /// Iteration shown on every slide: 1 before any label round.
    pub fn iteration(&self) -> u32 {
        self.round + 1
    }

    pub fn rounds(&self) -> u32 {
        self.round
    }

    /// Latest model version, if any model has been trained.
    pub fn model_version(&self) -> Option<u32> {
        (self.model_version > 0).then_some(self.model_version)
    }

    pub fn slide_ids(&self) -> Vec<&str> {
        self.slides.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn slides(&self) -> &[SlideState] {
        &self.slides
    }

    pub fn slide(&self, id: &str) -> Result<&SlideState> {
        self.index
            .get(id)
            .map(|&i| &self.slides[i])
            .ok_or_else(|| ServiceError::UnknownSlide(id.to_string()))
    }

    /// Pools feeding `slide_id`'s model (the shared pools unless models are per slide).
    pub fn pools_for(&self, slide_id: &str) -> Option<&TrainingPools> {
        self.pools.get(self.scope(slide_id))
    }

    pub fn pools(&self) -> &BTreeMap<String, TrainingPools> {
        &self.pools
    }

    pub fn model_for(&self, slide_id: &str) -> Option<&Arc<MilModel>> {
        self.models.get(self.scope(slide_id))
    }

    pub fn summaries(&self) -> Vec<SlideSummary> {
        self.slides.iter().map(SlideState::summary).collect()
    }

    fn scope<'a>(&self, slide_id: &'a str) -> &'a str {
        if self.manifest.config.per_slide_models {
            slide_id
        } else {
            SHARED
        }
    }

    fn refresh(&mut self, i: usize) -> Result<()> {
        let iteration = self.iteration();
        let model = self.model_for(&self.slides[i].id).cloned();
        let config = &self.manifest.config;
        let s = &mut self.slides[i];
        let (probability, unc, attention) = match &model {
            None => {
                let a = attention_map(&s.scores.outlier, None, 1, self.rule.as_ref())?;
                (None, None, a)
            }
            Some(m) => {
                let p = predict_map(m, &s.features)?;
                let u = p.iter().map(|&x| uncertainty(x)).collect::<impetus_core::Result<Vec<f64>>>()?;
                let a = attention_map(&s.scores.outlier, Some(&u), iteration.max(2), self.rule.as_ref())?;
                (Some(p), Some(u), a)
            }
        };
        let clusters = cluster_attention(s.features.patches(), &attention, &config.cluster);
        s.n_clusters = clusters.len();
        s.boxes = recommendation_boxes(&clusters);
        s.model_version = model.as_ref().map(|m| m.training_iteration);
        if s.status != SlideStatus::Confirmed {
            s.triage = match &probability {
                None => None,
                Some(p) => {
                    let mut th = DiagnosisThresholds::new(s.manifest.microns_per_pixel);
                    th.four_connected = config.four_connected;
                    Some(triage(p, s.n_clusters, &s.grid, &th, &config.triage)?)
                }
            };
            s.status = match s.triage.map(|t| t.action) {
                Some(InitiativeAction::AutoDiagnose) => SlideStatus::AutoDiagnosed,
                Some(InitiativeAction::Prefill) => SlideStatus::Prefilled,
                Some(InitiativeAction::Manual) | None => SlideStatus::Pending,
            };
        }
        s.scores = PatchScores {
            iteration,
            outlier: std::mem::take(&mut s.scores.outlier),
            probability,
            uncertainty: unc,
            attention,
        };
        Ok(())
    }

    pub fn submit_label(&mut self, req: LabelRequest) -> Result<RoundOutcome> {
        self.submit_labels(std::slice::from_ref(&req))
    }

    /// One round: ingest every label in order, retrain once, recompute all
    /// slides. Nothing changes if any label is rejected.
    pub fn submit_labels(&mut self, reqs: &[LabelRequest]) -> Result<RoundOutcome> {
        if reqs.is_empty() {
            return Err(ServiceError::BadRequest("no labels in round".into()));
        }
        let mut prepared = Vec::with_capacity(reqs.len());
        for req in reqs {
            let s = self.slide(&req.slide_id)?;
            if s.status == SlideStatus::Confirmed {
                return Err(ServiceError::ConfirmedSlide(req.slide_id.clone()));
            }
            s.grid.check_bounds(&req.bounds)?;
            prepared.push(BoxInstances::from_matrix(&s.id, &s.features, &req.bounds)?);
        }
        self.round += 1;
        let master = self.manifest.config.master_seed;
        let mil = self.manifest.config.mil;
        // Negative boxes go first so every positive split this round is
        // assigned against the round's full negative set.
        let mut batch: Vec<_> = reqs.iter().zip(prepared).collect();
        batch.sort_by_key(|(req, _)| req.label == LabelKind::Positive);
        let mut touched: Vec<String> = Vec::new();
        for (req, instances) in batch {
            let seq = self.label_seq;
            self.label_seq += 1;
            let label = AgileLabel {
                slide_id: req.slide_id.clone(),
                bounds: req.bounds,
                label: req.label,
                timestamp: req.timestamp.unwrap_or_else(now_ms),
                source: req.source,
            };
            if let Some(dir) = &self.dir {
                append_json_line(
                    &dir.join(LABEL_LOG),
                    &LabelRecord {
                        seq,
                        round: self.round,
                        label: label.clone(),
                    },
                )?;
            }
            let scope = self.scope(&req.slide_id).to_string();
            let pools = self.pools.entry(scope.clone()).or_default();
            match req.label {
                LabelKind::Negative => {
                    pools.ingest_negative_box(instances, &mil)?;
                }
                LabelKind::Positive => {
                    let seed = derive_seed(master, seq, &req.slide_id, "mil-box");
                    pools.ingest_positive_box(instances, &mil, seed)?;
                }
            }
            if !touched.contains(&scope) {
                touched.push(scope);
            }
        }
        let trainable: Vec<String> = touched
            .into_iter()
            .filter(|s| self.pools[s].positive().len() > 0 && self.pools[s].negative().len() > 0)
            .collect();
        if !trainable.is_empty() {
            self.model_version += 1;
            let version = self.model_version;
            let mut snapshot: BTreeMap<String, Arc<MilModel>> = BTreeMap::new();
            for scope in trainable {
                let seed = derive_seed(master, u64::from(version), &scope, "mil-rf");
                let model = Arc::new(train_mil_rf(&self.pools[&scope], &mil.forest, version, seed)?);
                snapshot.insert(scope.clone(), Arc::clone(&model));
                self.models.insert(scope, model);
            }
            if let Some(dir) = &self.dir {
                let path = dir.join(MODEL_DIR).join(format!("model_v{version}.json"));
                let plain: BTreeMap<&str, &MilModel> = snapshot.iter().map(|(k, m)| (k.as_str(), m.as_ref())).collect();
                fs::write(path, serde_json::to_vec(&plain)?)?;
            }
        }
        for i in 0..self.slides.len() {
            self.refresh(i)?;
        }
        Ok(RoundOutcome {
            iteration: self.iteration(),
            model_version: self.model_version(),
            slides: self.summaries(),
        })
    }

    /// Records the pathologist's final category; it may differ from any AI
    /// suggestion. Confirmed slides are closed for good.
    pub fn confirm_diagnosis(&mut self, slide_id: &str, category: Category) -> Result<SlideSummary> {
        let i = *self
            .index
            .get(slide_id)
            .ok_or_else(|| ServiceError::UnknownSlide(slide_id.to_string()))?;
        if self.slides[i].status == SlideStatus::Confirmed {
            return Err(ServiceError::AlreadyConfirmed(slide_id.to_string()));
        }
        if let Some(dir) = &self.dir {
            append_json_line(
                &dir.join(DIAGNOSIS_LOG),
                &DiagnosisRecord {
                    slide_id: slide_id.to_string(),
                    category,
                    after_round: self.round,
                },
            )?;
        }
        let s = &mut self.slides[i];
        s.final_diagnosis = Some(category);
        s.status = SlideStatus::Confirmed;
        Ok(s.summary())
    }

    pub fn overlay(&self, slide_id: &str, kind: OverlayKind) -> Result<Overlay> {
        let s = self.slide(slide_id)?;
        Ok(match kind {
            OverlayKind::Attention => Overlay::Attention {
                iteration: s.scores.iteration,
                rows: s.grid.rows,
                cols: s.grid.cols,
                values: value_grid(&s.grid, &s.features, &s.scores.attention),
                scale: ColorScale {
                    low: "blue".into(),
                    high: "red".into(),
                    min: 0.0,
                    max: 1.0,
                },
            },
            OverlayKind::Prediction => {
                let p = s.scores.probability.as_ref().ok_or(ServiceError::NoModelYet)?;
                Overlay::Prediction {
                    iteration: s.scores.iteration,
                    model_version: s.model_version.ok_or(ServiceError::NoModelYet)?,
                    rows: s.grid.rows,
                    cols: s.grid.cols,
                    values: value_grid(&s.grid, &s.features, p),
                    scale: ColorScale {
                        low: "white".into(),
                        high: "red".into(),
                        min: 0.0,
                        max: 1.0,
                    },
                }
            }
            OverlayKind::Boxes => Overlay::Boxes {
                iteration: s.scores.iteration,
                boxes: s
                    .boxes
                    .iter()
                    .map(|b| OverlayBox {
                        r0: b.bounds.r0,
                        c0: b.bounds.c0,
                        r1: b.bounds.r1,
                        c1: b.bounds.c1,
                        rank: b.rank,
                        cluster_area: b.cluster_area,
                        color: "yellow".into(),
                    })
                    .collect(),
            },
        })
    }

    /// Path of a stored tile, after checking it exists in the pyramid.
    pub fn tile_file(&self, slide_id: &str, level: usize, x: u32, y: u32) -> Result<PathBuf> {
        let s = self.slide(slide_id)?;
        let ok = s
            .manifest
            .levels
            .get(level)
            .is_some_and(|l| x < l.tiles_x && y < l.tiles_y);
        if !ok {
            return Err(impetus_core::Error::TileOutOfRange { level, x, y }.into());
        }
        Ok(tile_path(&s.dir, level, x, y))
    }

    /// Hash of everything observable through the API, for change detection.
    pub fn digest(&self) -> u64 {
        let view = StateView {
            round: self.round,
            model_version: self.model_version,
            label_seq: self.label_seq,
            pools: &self.pools,
            slides: self.slides.iter().map(|s| (s.summary(), &s.scores)).collect(),
        };
        let bytes = serde_json::to_vec(&view).expect("state serialises");
        let mut h = DefaultHasher::new();
        h.write(&bytes);
        h.finish()
    }
}
