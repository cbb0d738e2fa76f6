//! Samples, modality masks, the per-object balance filter, stratified splits, object
//! selection, bulk collection and the on-disk container.

mod collect;
mod container;
mod filter;
mod select;
mod splits;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grasping::{DiscardReason, GraspError, GraspPose};
use crate::tactile::TactileFrame;

pub use collect::{attempt_rng, collect, CollectConfig};
pub use container::{load, manifest_csv, save, to_bytes, from_bytes, FORMAT_VERSION, MAGIC};
pub use filter::{balance_counts, filter_balance};
pub use select::{
    select_objects, selection_csv, AttemptRunner, AttemptSummary, ObjectSelection, Pool,
    SelectionConfig, SimRunner, Stage,
};
pub use splits::{make_splits, SplitSpec, Splits};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad magic: not a dataset container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("attempt budget exhausted: collected {collected} of {target} samples")]
    BudgetExhausted { collected: usize, target: usize },
    #[error("dataset too small: {n} samples, need at least {need}")]
    TooSmall { n: usize, need: usize },
    #[error("sample dimensions do not match dataset dimensions")]
    DimsMismatch,
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Grasp(#[from] GraspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDims {
    pub camera_width: usize,
    pub camera_height: usize,
    pub tactile_width: usize,
    pub tactile_height: usize,
}

impl SampleDims {
    pub fn camera_pixels(&self) -> usize {
        self.camera_width * self.camera_height
    }

    pub fn tactile_pixels(&self) -> usize {
        self.tactile_width * self.tactile_height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub object_id: String,
    pub scale: f64,
    pub attempt_index: u64,
    pub grasp: GraspPose,
    pub tactile_left: TactileFrame,
    pub tactile_right: TactileFrame,
    /// Side camera color, row-major RGB.
    pub rgb: Vec<u8>,
    /// Side camera range along each pixel ray (m).
    pub depth: Vec<f32>,
    pub left_force: f64,
    pub right_force: f64,
    pub success: bool,
}

impl Sample {
    pub fn label(&self) -> u8 {
        self.success as u8
    }

    pub fn dims(&self, camera_width: usize) -> SampleDims {
        SampleDims {
            camera_width,
            camera_height: self.depth.len() / camera_width.max(1),
            tactile_width: self.tactile_left.width,
            tactile_height: self.tactile_left.height,
        }
    }

    pub fn fits(&self, dims: &SampleDims) -> bool {
        let t = |f: &TactileFrame| {
            f.width == dims.tactile_width && f.height == dims.tactile_height && f.data.len() == dims.tactile_pixels()
        };
        t(&self.tactile_left)
            && t(&self.tactile_right)
            && self.rgb.len() == 3 * dims.camera_pixels()
            && self.depth.len() == dims.camera_pixels()
    }

    /// Self-contained encoding (object id inline), for byte-level comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.object_id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.object_id.as_bytes());
        container::encode_record(self, 0, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Raw,
    Filtered,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectTelemetry {
    pub attempts: u64,
    pub recorded: u64,
    pub no_grasp: u64,
    pub no_contact: u64,
    pub invalid_tactile: u64,
}

impl ObjectTelemetry {
    pub fn discard(&mut self, reason: DiscardReason) {
        match reason {
            DiscardReason::NoGrasp => self.no_grasp += 1,
            DiscardReason::NoContact => self.no_contact += 1,
            DiscardReason::InvalidTactile => self.invalid_tactile += 1,
        }
    }

    pub fn discarded(&self) -> u64 {
        self.no_grasp + self.no_contact + self.invalid_tactile
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    pub per_object: BTreeMap<String, ObjectTelemetry>,
}

impl Telemetry {
    pub fn attempts_total(&self) -> u64 {
        self.per_object.values().map(|t| t.attempts).sum()
    }

    pub fn recorded_total(&self) -> u64 {
        self.per_object.values().map(|t| t.recorded).sum()
    }

    /// Recorded / attempted; `None` before any attempt.
    pub fn retention_ratio(&self) -> Option<f64> {
        let a = self.attempts_total();
        (a > 0).then(|| self.recorded_total() as f64 / a as f64)
    }

    pub fn discarded_by_reason(&self) -> BTreeMap<DiscardReason, u64> {
        let mut m = BTreeMap::new();
        for t in self.per_object.values() {
            *m.entry(DiscardReason::NoGrasp).or_default() += t.no_grasp;
            *m.entry(DiscardReason::NoContact).or_default() += t.no_contact;
            *m.entry(DiscardReason::InvalidTactile).or_default() += t.invalid_tactile;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub dims: SampleDims,
    pub seed: u64,
    pub config_hash: u32,
    pub telemetry: Telemetry,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(kind: DatasetKind, dims: SampleDims, seed: u64, config_hash: u32) -> Self {
        Self {
            kind,
            dims,
            seed,
            config_hash,
            telemetry: Telemetry::default(),
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, s: Sample) -> Result<(), DataError> {
        if !s.fits(&self.dims) {
            return Err(DataError::DimsMismatch);
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.success).collect()
    }

    /// Sorted distinct object ids among samples and telemetry.
    pub fn object_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .samples
            .iter()
            .map(|s| s.object_id.clone())
            .chain(self.telemetry.per_object.keys().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Same header, samples restricted to `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.header_only()
        }
    }

    pub fn header_only(&self) -> Dataset {
        Dataset {
            kind: self.kind,
            dims: self.dims,
            seed: self.seed,
            config_hash: self.config_hash,
            telemetry: self.telemetry.clone(),
            samples: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectStats {
    pub object_id: String,
    pub samples: usize,
    pub successes: usize,
}

impl ObjectStats {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.samples as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub per_object: Vec<ObjectStats>,
    pub total: usize,
    pub successes: usize,
}

impl DatasetStats {
    pub fn success_fraction(&self) -> f64 {
        self.successes as f64 / self.total as f64
    }
}

pub fn stats(ds: &Dataset) -> Result<DatasetStats, DataError> {
    if ds.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in &ds.samples {
        let e = per.entry(&s.object_id).or_default();
        e.0 += 1;
        e.1 += s.success as usize;
    }
    Ok(DatasetStats {
        per_object: per
            .into_iter()
            .map(|(id, (n, k))| ObjectStats {
                object_id: id.to_string(),
                samples: n,
                successes: k,
            })
            .collect(),
        total: ds.len(),
        successes: ds.samples.iter().filter(|s| s.success).count(),
    })
}

/// Which sensor streams a predictor sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModalityMask {
    pub vision: bool,
    pub depth: bool,
    pub touch_left: bool,
    pub touch_right: bool,
}

impl ModalityMask {
    pub const fn new(vision: bool, depth: bool, touch_left: bool, touch_right: bool) -> Self {
        Self {
            vision,
            depth,
            touch_left,
            touch_right,
        }
    }

    pub const VISION_DEPTH_TOUCH: Self = Self::new(true, true, true, true);
    pub const VISION_TOUCH_LEFT: Self = Self::new(true, false, true, false);
    pub const VISION_TOUCH: Self = Self::new(true, false, true, true);
    pub const VISION: Self = Self::new(true, false, false, false);
    pub const VISION_DEPTH: Self = Self::new(true, true, false, false);
    pub const DEPTH_TOUCH: Self = Self::new(false, true, true, true);
    pub const DEPTH: Self = Self::new(false, true, false, false);
    pub const TOUCH: Self = Self::new(false, false, true, true);
    pub const TOUCH_LEFT: Self = Self::new(false, false, true, false);

    /// The nine ablation rows, in report order.
    pub const ABLATION: [Self; 9] = [
        Self::VISION_DEPTH_TOUCH,
        Self::VISION_TOUCH_LEFT,
        Self::VISION_TOUCH,
        Self::VISION,
        Self::VISION_DEPTH,
        Self::DEPTH_TOUCH,
        Self::DEPTH,
        Self::TOUCH,
        Self::TOUCH_LEFT,
    ];

    pub fn is_empty(&self) -> bool {
        !(self.vision || self.depth || self.touch_left || self.touch_right)
    }

    pub fn count(&self) -> usize {
        [self.vision, self.depth, self.touch_left, self.touch_right]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    /// Human-readable row label, e.g. `Vision+Touch(Left)`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.vision {
            parts.push("Vision");
        }
        if self.depth {
            parts.push("Depth");
        }
        match (self.touch_left, self.touch_right) {
            (true, true) => parts.push("Touch(Both)"),
            (true, false) => parts.push("Touch(Left)"),
            (false, true) => parts.push("Touch(Right)"),
            (false, false) => {}
        }
        parts.join("+")
    }
}

/// Machine form: `vision+depth+touch`, `touch_left`, ...
impl fmt::Display for ModalityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.vision {
            parts.push("vision");
        }
        if self.depth {
            parts.push("depth");
        }
        match (self.touch_left, self.touch_right) {
            (true, true) => parts.push("touch"),
            (true, false) => parts.push("touch_left"),
            (false, true) => parts.push("touch_right"),
            (false, false) => {}
        }
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for ModalityMask {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut m = ModalityMask::new(false, false, false, false);
        for part in s.split('+').map(str::trim) {
            match part {
                "vision" => m.vision = true,
                "depth" => m.depth = true,
                "touch" => {
                    m.touch_left = true;
                    m.touch_right = true;
                }
                "touch_left" => m.touch_left = true,
                "touch_right" => m.touch_right = true,
                other => return Err(DataError::BadConfig(format!("unknown modality '{other}' in mask '{s}'"))),
            }
        }
        if m.is_empty() {
            return Err(DataError::BadConfig("mask must enable at least one modality".into()));
        }
        Ok(m)
    }
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the id bytes.
pub(crate) fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn nine_named_masks() {
        let labels: Vec<String> = ModalityMask::ABLATION.iter().map(|m| m.label()).collect();
        assert_eq!(
            labels,
            [
                "Vision+Depth+Touch(Both)",
                "Vision+Touch(Left)",
                "Vision+Touch(Both)",
                "Vision",
                "Vision+Depth",
                "Depth+Touch(Both)",
                "Depth",
                "Touch(Both)",
                "Touch(Left)"
            ]
        );
        for m in ModalityMask::ABLATION {
            assert!(!m.is_empty());
            assert_eq!(m.to_string().parse::<ModalityMask>().unwrap(), m);
        }
        assert!("".parse::<ModalityMask>().is_err());
        assert!("vision+smell".parse::<ModalityMask>().is_err());
    }

    #[test]
    fn stats_two_thirds() {
        let ds = dataset(&[("a", 2, 1)]);
        let st = stats(&ds).unwrap();
        assert_eq!(st.per_object.len(), 1);
        assert!((st.success_fraction() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stats_conserve_counts() {
        let ds = dataset(&[("a", 3, 4), ("c", 0, 2), ("b", 5, 0)]);
        let st = stats(&ds).unwrap();
        assert_eq!(st.per_object.iter().map(|o| o.samples).sum::<usize>(), ds.len());
        assert_eq!(st.per_object.iter().map(|o| o.successes).sum::<usize>(), st.successes);
        let ids: Vec<&str> = st.per_object.iter().map(|o| o.object_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn stats_empty_is_error() {
        let ds = dataset(&[]);
        assert!(matches!(stats(&ds), Err(DataError::EmptyDataset)));
    }

    #[test]
    fn push_checks_dims() {
        let mut ds = dataset(&[]);
        let mut s = sample("a", 0, true);
        s.depth.pop();
        assert!(matches!(ds.push(s), Err(DataError::DimsMismatch)));
    }

    #[test]
    fn retention_ratio() {
        let mut t = Telemetry::default();
        assert_eq!(t.retention_ratio(), None);
        t.per_object.insert(
            "a".into(),
            ObjectTelemetry { attempts: 10, recorded: 2, no_grasp: 1, no_contact: 3, invalid_tactile: 4 },
        );
        assert_eq!(t.retention_ratio(), Some(0.2));
        assert_eq!(t.discarded_by_reason()[&DiscardReason::InvalidTactile], 4);
    }
}
