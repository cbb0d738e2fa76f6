//! Modality ablation: every (mask, sample size) cell is a k-fold run on a nested
//! subsample, followed by per-object and unknown-object breakdowns of the largest cell
//! of each mask. Reports are CSV (long and aggregated), JSON, and an SVG chart.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactigrasp_core::dataset::{Dataset, ModalityMask};

use crate::inputs::PreparedSet;
use crate::model::{ModelConfig, Network, Params};
use crate::train::{evaluate, mean_std, mix, train_kfold_prepared, TrainConfig};
use crate::LearnError;

pub const DEFAULT_SAMPLE_SIZES: [usize; 4] = [250, 500, 1000, 2000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub masks: Vec<ModalityMask>,
    pub sample_sizes: Vec<usize>,
    pub train: TrainConfig,
    /// Architecture template; the mask is replaced per cell.
    pub model: ModelConfig,
    /// Rows of the per-object table; empty means every object in the dataset.
    pub known_objects: Vec<String>,
    pub workers: usize,
    /// Hash of the configuration text the plan came from, for provenance.
    pub config_hash: u32,
}

impl Default for AblationPlan {
    fn default() -> Self {
        Self {
            masks: ModalityMask::ABLATION.to_vec(),
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            train: TrainConfig::default(),
            model: ModelConfig::new(ModalityMask::VISION_DEPTH_TOUCH),
            known_objects: Vec::new(),
            workers: 1,
            config_hash: 0,
        }
    }
}

impl AblationPlan {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.masks.is_empty() {
            return Err(LearnError::Config("ablation needs at least one modality mask".into()));
        }
        if let Some(m) = self.masks.iter().find(|m| m.is_empty()) {
            return Err(LearnError::Config(format!("mask {m} selects no modality")));
        }
        let distinct: BTreeSet<String> = self.masks.iter().map(|m| m.to_string()).collect();
        if distinct.len() != self.masks.len() {
            return Err(LearnError::Config("duplicate modality mask".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(LearnError::Config("sample sizes must be non-empty and positive".into()));
        }
        if self.workers == 0 {
            return Err(LearnError::Config("workers must be >= 1".into()));
        }
        self.train.validate()
    }

    /// Ascending, de-duplicated sample sizes.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = self.sample_sizes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// First `size` entries of a seeded permutation of `0..n`; smaller sizes are prefixes
/// of larger ones.
pub fn subsample(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, 0xAB1A)));
    perm.truncate(size.min(n));
    perm
}

fn mask_code(m: &ModalityMask) -> u64 {
    m.vision as u64 | (m.depth as u64) << 1 | (m.touch_left as u64) << 2 | (m.touch_right as u64) << 3
}

/// Training seed of one cell; independent of the other cells in the plan.
pub fn cell_seed(seed: u64, mask: &ModalityMask, size: usize) -> u64 {
    mix(mix(seed, 0x100 + mask_code(mask)), size as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub mask: ModalityMask,
    pub size: usize,
    /// Each fold model on the held-out test split.
    pub fold_accuracies: Vec<f64>,
    pub val_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub final_test_accuracy: Option<f64>,
}

/// Accuracy of the fold models on one object's test samples; `None` when the object has
/// no test samples (absent, not zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub object_id: String,
    pub test_samples: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl ObjectRow {
    pub fn is_absent(&self) -> bool {
        self.mean.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerObjectTable {
    pub mask: ModalityMask,
    pub size: usize,
    pub rows: Vec<ObjectRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownRow {
    pub mask: ModalityMask,
    /// One cell per object of the table, in table order.
    pub cells: Vec<ObjectRow>,
    /// Mean of the per-object means.
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownTable {
    pub objects: Vec<String>,
    pub rows: Vec<UnknownRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: u32,
    pub dataset_config_hash: u32,
    pub dataset_samples: usize,
    pub training_objects: Vec<String>,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl Provenance {
    pub fn line(&self) -> String {
        format!(
            "# tactigrasp {} config_hash={:08x} seed={} dataset_config_hash={:08x} samples={} folds={} std=population",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed,
            self.dataset_config_hash,
            self.dataset_samples,
            self.train.folds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub provenance: Provenance,
    /// Declared mask order, then ascending size.
    pub rows: Vec<CellRow>,
    /// Largest size of each mask.
    pub per_object: Vec<PerObjectTable>,
    pub unknown: Option<UnknownTable>,
}

/// Trained models of the largest cell of one mask.
#[derive(Debug, Clone)]
pub struct MaskModels {
    pub mask: ModalityMask,
    pub size: usize,
    pub net: Network,
    pub fold_params: Vec<Params>,
    pub final_params: Option<Params>,
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub report: AblationReport,
    pub models: Vec<MaskModels>,
}

fn prefix(set: &PreparedSet, n: usize) -> PreparedSet {
    PreparedSet {
        inputs: set.inputs[..n].to_vec(),
        labels: set.labels[..n].to_vec(),
        object_ids: set.object_ids[..n].to_vec(),
    }
}

struct CellRun {
    row: CellRow,
    test: Vec<usize>,
    fold_params: Vec<Params>,
    final_params: Option<Params>,
}

fn run_prepared_cell(plan: &AblationPlan, set: &PreparedSet, mask: ModalityMask, size: usize) -> Result<CellRun, LearnError> {
    let model = ModelConfig { mask, ..plan.model.clone() };
    let cfg = TrainConfig { seed: cell_seed(plan.train.seed, &mask, size), ..plan.train.clone() };
    let r = train_kfold_prepared(&prefix(set, size), &model, &cfg)?;
    Ok(CellRun {
        row: CellRow {
            mask,
            size,
            fold_accuracies: r.metrics.test_accuracies.clone(),
            val_accuracies: r.metrics.val_accuracies.clone(),
            mean: r.metrics.mean,
            std: r.metrics.std,
            final_test_accuracy: r.final_test_accuracy,
        },
        test: r.splits.test.clone(),
        fold_params: r.folds.into_iter().map(|f| f.params).collect(),
        final_params: r.final_params,
    })
}

fn check_size(ds: &Dataset, size: usize) -> Result<(), LearnError> {
    if size > ds.len() {
        return Err(LearnError::TooSmall(format!("sample size {size} exceeds the {} samples available", ds.len())));
    }
    Ok(())
}

/// Recomputes a single cell exactly as `run_ablation` does.
pub fn run_cell(plan: &AblationPlan, ds: &Dataset, mask: ModalityMask, size: usize) -> Result<CellRow, LearnError> {
    check_size(ds, size)?;
    let sub = ds.subset(&subsample(ds.len(), size, plan.train.seed));
    let set = PreparedSet::from_dataset(&sub, &mask, &plan.train.input)?;
    Ok(run_prepared_cell(plan, &set, mask, size)?.row)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, LearnError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LearnError::Config(format!("thread pool: {e}")))
}

pub fn run_ablation(plan: &AblationPlan, ds: &Dataset, unknown: Option<&Dataset>) -> Result<AblationOutcome, LearnError> {
    plan.validate()?;
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let sizes = plan.sizes();
    let max = *sizes.last().expect("validated non-empty");
    check_size(ds, max)?;
    let training_objects = ds.object_ids();
    if let Some(u) = unknown {
        check_disjoint(&training_objects, u)?;
    }
    let known = if plan.known_objects.is_empty() { training_objects.clone() } else { plan.known_objects.clone() };
    // the largest subsample, in permutation order; every smaller size is a prefix of it
    let sub = ds.subset(&subsample(ds.len(), max, plan.train.seed));
    let threads = pool(plan.workers)?;

    let mut rows = Vec::new();
    let mut per_object = Vec::new();
    let mut models = Vec::new();
    for &mask in &plan.masks {
        let set = PreparedSet::from_dataset(&sub, &mask, &plan.train.input)?;
        let runs = threads.install(|| {
            sizes
                .par_iter()
                .map(|&size| run_prepared_cell(plan, &set, mask, size).map_err(|e| e.context(format!("mask {mask}, size {size}"))))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let mut runs = runs.into_iter();
        for r in runs.by_ref().take(sizes.len() - 1) {
            rows.push(r.row);
        }
        let last = runs.next().expect("one run per size");
        let net = Network::new(&ModelConfig { mask, ..plan.model.clone() })?;
        let prefix_set = prefix(&set, max);
        per_object.push(PerObjectTable {
            mask,
            size: max,
            rows: threads.install(|| per_object_report(&net, &last.fold_params, &prefix_set, &last.test, &known))?,
        });
        rows.push(last.row);
        models.push(MaskModels { mask, size: max, net, fold_params: last.fold_params, final_params: last.final_params });
    }
    let unknown = match unknown {
        Some(u) => Some(threads.install(|| unknown_eval(&models, u, &training_objects, plan))?),
        None => None,
    };
    let report = AblationReport {
        provenance: Provenance {
            seed: plan.train.seed,
            config_hash: plan.config_hash,
            dataset_config_hash: ds.config_hash,
            dataset_samples: ds.len(),
            training_objects,
            train: plan.train.clone(),
            model: plan.model.clone(),
        },
        rows,
        per_object,
        unknown,
    };
    Ok(AblationOutcome { report, models })
}

/// Accuracy of every fold model on each object's slice of `test`, one row per object in
/// `objects` (sorted by id).
pub fn per_object_report(
    net: &Network,
    fold_params: &[Params],
    set: &PreparedSet,
    test: &[usize],
    objects: &[String],
) -> Result<Vec<ObjectRow>, LearnError> {
    let mut ids: Vec<&String> = objects.iter().collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let slice: Vec<usize> = test.iter().copied().filter(|&i| set.object_ids[i] == *id).collect();
            object_row(net, fold_params, set, &slice, id)
        })
        .collect()
}

fn object_row(net: &Network, fold_params: &[Params], set: &PreparedSet, idx: &[usize], id: &str) -> Result<ObjectRow, LearnError> {
    if idx.is_empty() {
        return Ok(ObjectRow { object_id: id.to_string(), test_samples: 0, fold_accuracies: Vec::new(), mean: None, std: None });
    }
    let accs = fold_params.iter().map(|p| evaluate(net, p, set, idx)).collect::<Result<Vec<_>, _>>()?;
    let (mean, std) = mean_std(&accs);
    Ok(ObjectRow { object_id: id.to_string(), test_samples: idx.len(), fold_accuracies: accs, mean: Some(mean), std: Some(std) })
}

fn check_disjoint(training_objects: &[String], unknown: &Dataset) -> Result<(), LearnError> {
    let train: BTreeSet<&String> = training_objects.iter().collect();
    match unknown.object_ids().into_iter().find(|id| train.contains(id)) {
        Some(id) => Err(LearnError::ObjectOverlap(id)),
        None => Ok(()),
    }
}

/// Evaluate-only pass of every mask's fold models on each unknown object.
pub fn unknown_eval(
    models: &[MaskModels],
    unknown: &Dataset,
    training_objects: &[String],
    plan: &AblationPlan,
) -> Result<UnknownTable, LearnError> {
    check_disjoint(training_objects, unknown)?;
    if unknown.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let objects = unknown.object_ids();
    let mut rows = Vec::with_capacity(models.len());
    for m in models {
        let set = PreparedSet::from_dataset(unknown, &m.mask, &plan.train.input)?;
        let cells = objects
            .iter()
            .map(|id| {
                let idx: Vec<usize> = (0..set.len()).filter(|&i| set.object_ids[i] == *id).collect();
                object_row(&m.net, &m.fold_params, &set, &idx, id)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let average = cells.iter().filter_map(|c| c.mean).sum::<f64>() / cells.len() as f64;
        rows.push(UnknownRow { mask: m.mask, cells, average });
    }
    Ok(UnknownTable { objects, rows })
}

// ---------------------------------------------------------------- reports

pub fn folds_csv(r: &AblationReport) -> String {
    let mut s = format!("{}\nmask,size,fold,accuracy\n", r.provenance.line());
    for row in &r.rows {
        for (k, a) in row.fold_accuracies.iter().enumerate() {
            let _ = writeln!(s, "{},{},{k},{a:.6}", row.mask, row.size);
        }
    }
    s
}

pub fn summary_csv(r: &AblationReport) -> String {
    let mut s = format!("{}\nmask,size,mean,std\n", r.provenance.line());
    for row in &r.rows {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", row.mask, row.size, row.mean, row.std);
    }
    s
}

pub fn per_object_csv(r: &AblationReport) -> String {
    let mut s = format!("{}\nmask,size,object_id,test_samples,mean,std\n", r.provenance.line());
    for t in &r.per_object {
        for o in &t.rows {
            let cell = |v: Option<f64>| v.map_or_else(|| "absent".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(s, "{},{},{},{},{},{}", t.mask, t.size, o.object_id, o.test_samples, cell(o.mean), cell(o.std));
        }
    }
    s
}

/// Mask rows × unknown-object columns of mean accuracy, plus the average column.
pub fn unknown_csv(r: &AblationReport, t: &UnknownTable) -> String {
    let mut s = format!("{}\nmask,{},average\n", r.provenance.line(), t.objects.join(","));
    for row in &t.rows {
        let cells: Vec<String> = row.cells.iter().map(|c| c.mean.map_or_else(|| "absent".into(), |v| format!("{v:.6}"))).collect();
        let _ = writeln!(s, "{},{},{:.6}", row.mask, cells.join(","), row.average);
    }
    s
}

const PALETTE: [&str; 9] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"];

/// Accuracy against sample size, one polyline per mask over a mean ± std band.
pub fn chart_svg(r: &AblationReport) -> String {
    let (w, h) = (800.0, 600.0);
    let (left, right, top, bottom) = (70.0, 220.0, 40.0, 60.0);
    let mut sizes: Vec<usize> = r.rows.iter().map(|c| c.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let x_of = |size: usize| {
        let i = sizes.iter().position(|&s| s == size).unwrap_or(0) as f64;
        let n = sizes.len().max(2) as f64 - 1.0;
        let t = if sizes.len() == 1 { 0.5 } else { i / n };
        left + t * (w - left - right)
    };
    let y_of = |acc: f64| top + (1.0 - acc.clamp(0.0, 1.0)) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="600" viewBox="0 0 800 600">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
    let (x0, x1, yb) = (left, w - right, h - bottom);
    let _ = writeln!(s, r#"<path d="M{x0} {top} L{x0} {yb} L{x1} {yb}" stroke="black" fill="none"/>"#);
    for k in 0..=5 {
        let acc = k as f64 / 5.0;
        let y = y_of(acc);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="12" text-anchor="end">{acc:.1}</text>"#, x0 - 6.0, y + 4.0);
    }
    for &size in &sizes {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" font-size="12" text-anchor="middle">{size}</text>"#, x_of(size), yb + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{}" font-size="13" text-anchor="middle">training samples</text>"#, (x0 + x1) / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="18" y="{:.1}" font-size="13" transform="rotate(-90 18 {:.1})" text-anchor="middle">test accuracy</text>"#, (top + yb) / 2.0, (top + yb) / 2.0);

    let mut masks: Vec<ModalityMask> = Vec::new();
    for c in &r.rows {
        if !masks.contains(&c.mask) {
            masks.push(c.mask);
        }
    }
    for (k, mask) in masks.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let cells: Vec<&CellRow> = r.rows.iter().filter(|c| c.mask == *mask).collect();
        let upper: Vec<String> = cells.iter().map(|c| format!("{:.1},{:.1}", x_of(c.size), y_of(c.mean + c.std))).collect();
        let lower: Vec<String> = cells.iter().rev().map(|c| format!("{:.1},{:.1}", x_of(c.size), y_of(c.mean - c.std))).collect();
        let _ = writeln!(s, r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, upper.join(" "), lower.join(" "));
        let line: Vec<String> = cells.iter().map(|c| format!("{:.1},{:.1}", x_of(c.size), y_of(c.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = top + 10.0 + 20.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{:.1}" width="14" height="4" fill="{color}"/>"#, x1 + 15.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="12">{}</text>"#, x1 + 35.0, ly, mask.label());
    }
    s.push_str("</svg>\n");
    s
}

/// Writes every table, the chart and the JSON report into `dir`; returns the paths.
pub fn emit_report(r: &AblationReport, dir: &Path) -> Result<Vec<PathBuf>, LearnError> {
    let io = |path: &Path, e: std::io::Error| LearnError::Io { path: path.display().to_string(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let json = serde_json::to_string_pretty(r).map_err(|e| LearnError::Config(format!("report serialization: {e}")))?;
    let mut files = vec![
        ("ablation_folds.csv", folds_csv(r)),
        ("ablation_summary.csv", summary_csv(r)),
        ("per_object.csv", per_object_csv(r)),
        ("ablation.svg", chart_svg(r)),
        ("ablation.json", json + "\n"),
    ];
    if let Some(t) = &r.unknown {
        files.push(("unknown_objects.csv", unknown_csv(r, t)));
    }
    let mut paths = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
