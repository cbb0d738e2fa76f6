//! Flat `key = value` configuration.
//!
//! Every key has a type and a default. Values are stored in canonical form (numbers
//! re-printed, lists re-joined, masks normalized), and the config hash is the CRC-32 of
//! the canonical text of every key except `workers`, which never changes results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use tactigrasp_core::dataset::{CollectConfig, ModalityMask, SelectionConfig};
use tactigrasp_core::grasping::{Gripper, LiftParams, SimConfig};
use tactigrasp_core::scene::{CameraConfig, SceneConfig, TopdownConfig, Workspace};
use tactigrasp_core::tactile::SensorGeom;
use tactigrasp_learn::ablation::AblationPlan;
use tactigrasp_learn::inputs::InputSpec;
use tactigrasp_learn::model::ModelConfig;
use tactigrasp_learn::optim::OptimizerKind;
use tactigrasp_learn::train::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    F64,
    Usize,
    U64,
    Bool,
    Str,
    F64List,
    UsizeList,
    StrList,
    Mask,
    /// `all` or a comma-separated list of masks.
    MaskList,
    Optimizer,
    /// `auto` (logical cores) or a positive count.
    Workers,
}

pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Key {
    Key { name, kind, default, doc }
}

use Kind::*;

pub const KEYS: &[Key] = &[
    key("seed", U64, "0", "Master seed for placement, grasp sampling, splits and initialization."),
    key("workers", Workers, "auto", "Worker threads for collection, selection and ablation; `auto` = logical cores. Not hashed."),
    key("corpus.file", Str, "", "Object corpus manifest; empty selects the built-in primitive corpus."),
    key("corpus.tessellation", Usize, "32", "Segments used for curved built-in primitives."),
    key("scene.workspace_width", F64, "0.3", "Table workspace extent along x (m)."),
    key("scene.workspace_depth", F64, "0.3", "Table workspace extent along y (m)."),
    key("scene.camera_width", Usize, "64", "Side camera width (px)."),
    key("scene.camera_height", Usize, "64", "Side camera height (px)."),
    key("scene.camera_vfov_deg", F64, "45", "Side camera vertical field of view (degrees)."),
    key("scene.camera_elevation_deg", F64, "45", "Side camera elevation above the table (degrees)."),
    key("scene.camera_distance", F64, "0.45", "Side camera distance from the workspace center (m)."),
    key("scene.camera_far", F64, "2", "Range written for camera pixels that miss; also the depth normalizer (m)."),
    key("scene.topdown_width", Usize, "96", "Top-down depth image width (px)."),
    key("scene.topdown_height", Usize, "96", "Top-down depth image height (px)."),
    key("scene.topdown_h0", F64, "0.5", "Height of the top-down image plane above the table (m)."),
    key("sensor.gel_width", F64, "0.016", "Gel pad width (m)."),
    key("sensor.gel_height", F64, "0.024", "Gel pad height (m)."),
    key("sensor.gel_thickness", F64, "0.002", "Gel thickness; displacement clamp and tactile normalizer (m)."),
    key("sensor.width_px", Usize, "40", "Tactile pixels across the gel width."),
    key("sensor.height_px", Usize, "60", "Tactile pixels across the gel height."),
    key("sensor.stiffness", F64, "40000000", "Gel stiffness (N per m displacement per m² area)."),
    key("sensor.smoothing_sigma_px", F64, "0", "Gaussian blur of tactile frames in pixels; 0 disables."),
    key("gripper.max_width", F64, "0.085", "Maximum opening between gel surfaces (m)."),
    key("gripper.close_step", F64, "0.0002", "Closing increment (m)."),
    key("gripper.force_threshold", F64, "2", "Per-finger normal force that stops closing (N)."),
    key("gripper.num_candidates", Usize, "64", "Grasp candidates sampled per attempt."),
    key("lift.speed", F64, "0.1", "Commanded lift speed (m/s)."),
    key("lift.duration", F64, "1.5", "Lift duration (s)."),
    key("lift.mu_static", F64, "0.6", "Static friction coefficient between gel and object."),
    key("lift.mu_kinetic", F64, "0.5", "Kinetic friction coefficient between gel and object."),
    key("lift.gravity", F64, "9.81", "Gravitational acceleration (m/s²)."),
    key("lift.success_fraction", F64, "0.8", "Fraction of the commanded rise that counts as success."),
    key("dataset.density", F64, "500", "Object density (kg/m³)."),
    key("dataset.min_contact_pixels", Usize, "100", "Pixels per finger that must exceed the contact depth."),
    key("dataset.min_contact_depth", F64, "0.0001", "Contact depth for the validity gate (m)."),
    key("dataset.n_target", Usize, "200", "Samples to collect."),
    key("dataset.budget_factor", Usize, "50", "Per-object attempt budget as a multiple of its sample quota."),
    key("dataset.batch", Usize, "8", "Attempts issued per object per collection round."),
    key("dataset.cap", Usize, "500", "Per-object sample cap of the balance filter."),
    key("dataset.scale", F64, "0.8", "Object scale used by `collect` when no selection file is given."),
    key("select.scales", F64List, "0.6,0.7,0.8,0.9", "Scales screened during object selection."),
    key("select.screen_attempts", Usize, "100", "Grasp attempts per object and scale in the success screen."),
    key("select.success_threshold", F64, "0.25", "Success rate that must be strictly exceeded at some scale."),
    key("select.tactile_attempts", Usize, "150", "Attempts in the tactile screen at the chosen scale."),
    key("select.min_known_valid", Usize, "500", "Projected valid samples needed for the known pool."),
    key("select.collection_attempts", Usize, "2500", "Attempts per object assumed when projecting valid samples."),
    key("train.mask", Mask, "vision+depth+touch", "Modalities for `train`: vision, depth, touch, touch_left, touch_right joined by `+`."),
    key("train.epochs", Usize, "10", "Training epochs."),
    key("train.batch_size", Usize, "32", "Mini-batch size."),
    key("train.lr", F64, "0.01", "Learning rate."),
    key("train.optimizer", Optimizer, "sgd_momentum", "Optimizer: sgd_momentum or adam."),
    key("train.momentum", F64, "0.9", "Momentum of sgd_momentum."),
    key("train.folds", Usize, "3", "Cross-validation folds."),
    key("train.test_fraction", F64, "0.2", "Held-out test fraction."),
    key("train.retrain_final", Bool, "true", "Also train a final model on the whole train/validation pool."),
    key("train.input_size", Usize, "64", "Side length images are resized to before the encoders."),
    key("model.widths", UsizeList, "8,16,32", "Channel width of each residual stage."),
    key("model.blocks_per_stage", Usize, "2", "Residual blocks per stage."),
    key("model.hidden", UsizeList, "32", "Hidden layer widths of the fusion head."),
    key("ablation.masks", MaskList, "all", "Masks swept by `ablate`; `all` = the nine standard combinations."),
    key("ablation.sizes", UsizeList, "250,500,1000,2000", "Training-set sizes swept by `ablate`."),
    key("ablation.known_objects", StrList, "", "Rows of the per-object table; empty = every object in the data."),
];

pub fn find_key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

fn bad(key: &str, raw: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config key `{key}`: invalid value `{raw}`: {why}"))
}

fn list<T, F: Fn(&str) -> Result<T, String>>(raw: &str, f: F) -> Result<Vec<T>, String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn canonical(k: &Key, raw: &str) -> Result<String, CliError> {
    let raw = raw.trim();
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if v.is_finite() { Ok(v) } else { Err("not finite".into()) }
    };
    let out = match k.kind {
        F64 => num(raw).map(|v| v.to_string()),
        Usize => raw.parse::<usize>().map(|v| v.to_string()).map_err(|e| e.to_string()),
        U64 => raw.parse::<u64>().map(|v| v.to_string()).map_err(|e| e.to_string()),
        Bool => raw.parse::<bool>().map(|v| v.to_string()).map_err(|e| e.to_string()),
        Str => Ok(raw.to_string()),
        F64List => list(raw, num).map(|v| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        UsizeList => list(raw, |s| s.parse::<usize>().map_err(|e| e.to_string()))
            .map(|v| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
        StrList => list(raw, |s| {
            if s.contains(char::is_whitespace) { Err(format!("`{s}` contains whitespace")) } else { Ok(s.to_string()) }
        })
        .map(|v| v.join(",")),
        Mask => ModalityMask::from_str(raw).map(|m| m.to_string()).map_err(|e| e.to_string()),
        MaskList => {
            let masks = if raw == "all" {
                Ok(ModalityMask::ABLATION.to_vec())
            } else {
                list(raw, |s| ModalityMask::from_str(s).map_err(|e| e.to_string()))
            };
            masks.map(|v| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
        }
        Optimizer => OptimizerKind::from_str(raw).map(|o| o.to_string()).map_err(|e| e.to_string()),
        Workers => {
            if raw == "auto" {
                Ok("auto".into())
            } else {
                match raw.parse::<usize>() {
                    Ok(n) if n > 0 => Ok(n.to_string()),
                    Ok(_) => Err("must be positive".into()),
                    Err(e) => Err(e.to_string()),
                }
            }
        }
    };
    out.map_err(|why| bad(k.name, raw, why))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
    /// Directory relative paths inside the config resolve against.
    base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|k| (k.name, canonical(k, k.default).expect("defaults are valid")))
            .collect();
        Self { values, base_dir: PathBuf::from(".") }
    }
}

impl Config {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut seen = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected `key = value`", n + 1)));
            };
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_string(), n + 1) {
                return Err(CliError::Usage(format!("config line {}: key `{k}` already set on line {prev}", n + 1)));
            }
            cfg.set(k, v).map_err(|e| match e {
                CliError::Usage(m) => CliError::Usage(format!("config line {}: {m}", n + 1)),
                e => e,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let k = find_key(key).ok_or_else(|| CliError::Usage(format!("unknown config key `{key}`")))?;
        self.values.insert(k.name, canonical(k, raw)?);
        Ok(())
    }

    /// `key=value` override from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).unwrap_or_else(|| panic!("unregistered config key {key}"))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> T
    where
        T::Err: std::fmt::Debug,
    {
        self.get(key).parse().unwrap_or_else(|e| panic!("canonical value of {key} does not parse: {e:?}"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.parsed(key)
    }

    pub fn usize(&self, key: &str) -> usize {
        self.parsed(key)
    }

    fn usize_list(&self, key: &str) -> Vec<usize> {
        list(self.get(key), |s| s.parse().map_err(|_| String::new())).expect("canonical")
    }

    fn str_list(&self, key: &str) -> Vec<String> {
        list(self.get(key), |s| Ok(s.to_string())).expect("canonical")
    }

    pub fn seed(&self) -> u64 {
        self.parsed("seed")
    }

    pub fn workers(&self) -> usize {
        match self.get("workers") {
            "auto" => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            n => n.parse().expect("canonical"),
        }
    }

    /// Every hashed key with its canonical value, one `key = value` line each.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS.iter().filter(|k| k.name != "workers") {
            let _ = writeln!(s, "{} = {}", k.name, self.get(k.name));
        }
        s
    }

    pub fn hash(&self) -> u32 {
        crc32fast::hash(self.canonical_text().as_bytes())
    }

    /// One-line provenance record written into every output.
    pub fn provenance(&self) -> String {
        format!("# tactigrasp {} config_hash={:08x} seed={}", env!("CARGO_PKG_VERSION"), self.hash(), self.seed())
    }

    pub fn corpus_file(&self) -> Option<PathBuf> {
        match self.get("corpus.file") {
            "" => None,
            p => Some(self.base_dir.join(p)),
        }
    }

    pub fn scene(&self) -> SceneConfig {
        let workspace = Workspace::centered(self.f64("scene.workspace_width"), self.f64("scene.workspace_depth"));
        let c = workspace.center();
        let el = self.f64("scene.camera_elevation_deg").to_radians();
        let dist = self.f64("scene.camera_distance");
        let eye = c + Vector3::new(-dist * el.cos(), 0.0, dist * el.sin());
        let camera = CameraConfig::look_at(
            eye,
            c,
            self.usize("scene.camera_width"),
            self.usize("scene.camera_height"),
            self.f64("scene.camera_vfov_deg"),
            self.f64("scene.camera_far"),
        );
        SceneConfig {
            workspace,
            camera,
            topdown: TopdownConfig {
                width: self.usize("scene.topdown_width"),
                height: self.usize("scene.topdown_height"),
                h0: self.f64("scene.topdown_h0"),
            },
            ..SceneConfig::default()
        }
    }

    pub fn sensor(&self) -> SensorGeom {
        SensorGeom {
            gel_width: self.f64("sensor.gel_width"),
            gel_height: self.f64("sensor.gel_height"),
            gel_thickness: self.f64("sensor.gel_thickness"),
            width_px: self.usize("sensor.width_px"),
            height_px: self.usize("sensor.height_px"),
            stiffness: self.f64("sensor.stiffness"),
            smoothing_sigma_px: self.f64("sensor.smoothing_sigma_px"),
        }
    }

    pub fn sim(&self) -> Result<SimConfig, CliError> {
        let sim = SimConfig {
            scene: self.scene(),
            gripper: Gripper {
                max_width: self.f64("gripper.max_width"),
                close_step: self.f64("gripper.close_step"),
                force_threshold: self.f64("gripper.force_threshold"),
                sensor: self.sensor(),
                num_candidates: self.usize("gripper.num_candidates"),
            },
            lift: LiftParams {
                speed: self.f64("lift.speed"),
                duration: self.f64("lift.duration"),
                mu_static: self.f64("lift.mu_static"),
                mu_kinetic: self.f64("lift.mu_kinetic"),
                gravity: self.f64("lift.gravity"),
                success_fraction: self.f64("lift.success_fraction"),
            },
            density: self.f64("dataset.density"),
            min_contact_pixels: self.usize("dataset.min_contact_pixels"),
            min_contact_depth: self.f64("dataset.min_contact_depth"),
        };
        sim.validate().map_err(|e| CliError::Usage(format!("invalid simulation config: {e}")))?;
        Ok(sim)
    }

    pub fn collect(&self) -> CollectConfig {
        CollectConfig {
            n_target: self.usize("dataset.n_target"),
            seed: self.seed(),
            workers: self.workers(),
            budget_factor: self.usize("dataset.budget_factor"),
            batch: self.usize("dataset.batch"),
            config_hash: self.hash(),
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            scales: list(self.get("select.scales"), |s| s.parse().map_err(|_| String::new())).expect("canonical"),
            screen_attempts: self.usize("select.screen_attempts"),
            success_threshold: self.f64("select.success_threshold"),
            tactile_attempts: self.usize("select.tactile_attempts"),
            min_known_valid: self.usize("select.min_known_valid"),
            collection_attempts: self.usize("select.collection_attempts"),
        }
    }

    pub fn mask(&self) -> ModalityMask {
        self.parsed("train.mask")
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.usize("train.epochs"),
            batch_size: self.usize("train.batch_size"),
            lr: self.f64("train.lr"),
            optimizer: self.parsed("train.optimizer"),
            momentum: self.f64("train.momentum"),
            folds: self.usize("train.folds"),
            test_fraction: self.f64("train.test_fraction"),
            seed: self.seed(),
            retrain_final: self.parsed("train.retrain_final"),
            input: InputSpec {
                input_size: self.usize("train.input_size"),
                depth_far: self.f64("scene.camera_far"),
                gel_thickness: self.f64("sensor.gel_thickness"),
            },
        }
    }

    pub fn model(&self, mask: ModalityMask) -> ModelConfig {
        ModelConfig {
            mask,
            input_size: self.usize("train.input_size"),
            widths: self.usize_list("model.widths"),
            blocks_per_stage: self.usize("model.blocks_per_stage"),
            hidden: self.usize_list("model.hidden"),
        }
    }

    pub fn ablation(&self) -> AblationPlan {
        AblationPlan {
            masks: list(self.get("ablation.masks"), |s| ModalityMask::from_str(s).map_err(|e| e.to_string())).expect("canonical"),
            sample_sizes: self.usize_list("ablation.sizes"),
            train: self.train(),
            model: self.model(self.mask()),
            known_objects: self.str_list("ablation.known_objects"),
            workers: self.workers(),
            config_hash: self.hash(),
        }
    }
}

/// The key table shown by `--help` and shipped in the docs: `key = default  doc`.
pub fn key_table() -> String {
    let width = KEYS.iter().map(|k| k.name.len() + k.default.len() + 3).max().unwrap_or(0);
    let mut s = String::new();
    for k in KEYS {
        let lhs = format!("{} = {}", k.name, k.default);
        let _ = writeln!(s, "  {lhs:<width$}  {}", k.doc);
    }
    s
}
