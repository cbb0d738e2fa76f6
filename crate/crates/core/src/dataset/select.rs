//! Two-stage object screening: a success-rate screen over scales, then a tactile screen
//! at the chosen scale.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::collect::{attempt_rng, thread_pool};
use super::{mix64, DataError};
use crate::geometry::TriMesh;
use crate::grasping::{execute_attempt, AttemptOutcome, ObjectModel, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Success-rate screen at every scale.
    Screen,
    /// Dual-finger tactile screen at the chosen scale.
    Tactile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttemptSummary {
    pub success: bool,
    /// Both pads produced valid contact.
    pub valid: bool,
}

/// Source of screening attempts; lets the protocol run against the simulator or a script.
pub trait AttemptRunner: Sync {
    type Prepared: Send + Sync;

    fn prepare(&self, object_id: &str, scale: f64) -> Result<Self::Prepared, DataError>;

    fn run(&self, prepared: &Self::Prepared, stage: Stage, attempt_index: u64) -> Result<AttemptSummary, DataError>;
}

/// Runs screening attempts through the full simulator.
pub struct SimRunner<'a> {
    pub corpus: &'a [(String, TriMesh)],
    pub sim: SimConfig,
    pub seed: u64,
}

impl AttemptRunner for SimRunner<'_> {
    type Prepared = ObjectModel;

    fn prepare(&self, object_id: &str, scale: f64) -> Result<ObjectModel, DataError> {
        let (_, mesh) = self
            .corpus
            .iter()
            .find(|(id, _)| id == object_id)
            .ok_or_else(|| DataError::UnknownObject(object_id.into()))?;
        Ok(ObjectModel::new(object_id, mesh, scale, self.sim.density)?)
    }

    fn run(&self, obj: &ObjectModel, stage: Stage, attempt_index: u64) -> Result<AttemptSummary, DataError> {
        // screening streams must not overlap the collection streams of the same object
        let tag = match stage {
            Stage::Screen => 0x5343_5245_454e_0000u64,
            Stage::Tactile => 0x5441_4354_0000_0000u64,
        };
        let seed = mix64(self.seed ^ tag ^ obj.scale.to_bits());
        let mut rng = attempt_rng(seed, &obj.id, attempt_index);
        Ok(match execute_attempt(obj, &self.sim, attempt_index, &mut rng)? {
            AttemptOutcome::Recorded(s) => AttemptSummary { success: s.success, valid: true },
            AttemptOutcome::Discarded(_) => AttemptSummary { success: false, valid: false },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub scales: Vec<f64>,
    pub screen_attempts: usize,
    /// An object passes the screen when its success rate strictly exceeds this at some scale.
    pub success_threshold: f64,
    pub tactile_attempts: usize,
    /// Valid samples an object must be expected to yield to join the known pool.
    pub min_known_valid: usize,
    /// Attempts available per object at collection time, used to project valid yield.
    pub collection_attempts: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            scales: vec![0.6, 0.7, 0.8, 0.9],
            screen_attempts: 100,
            success_threshold: 0.25,
            tactile_attempts: 150,
            min_known_valid: 500,
            collection_attempts: 2500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Known,
    /// Passed both screens but is not expected to yield enough valid samples; reserved for
    /// evaluation.
    Unknown,
    Dropped,
}

impl Pool {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pool::Known => "known",
            Pool::Unknown => "unknown",
            Pool::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSelection {
    pub object_id: String,
    /// Screen successes per configured scale.
    pub screen_successes: Vec<usize>,
    pub screen_pass: bool,
    pub chosen_scale: Option<f64>,
    pub tactile_valid: Option<usize>,
    pub pool: Pool,
}

pub fn select_objects<R: AttemptRunner>(
    ids: &[String],
    runner: &R,
    cfg: &SelectionConfig,
    workers: usize,
) -> Result<Vec<ObjectSelection>, DataError> {
    if ids.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    if cfg.scales.is_empty() || cfg.screen_attempts == 0 || cfg.tactile_attempts == 0 {
        return Err(DataError::BadConfig("selection needs scales and positive attempt counts".into()));
    }
    let pool = thread_pool(workers)?;
    pool.install(|| {
        let pairs: Vec<(usize, usize)> =
            (0..ids.len()).flat_map(|o| (0..cfg.scales.len()).map(move |s| (o, s))).collect();
        let prepared = pairs
            .par_iter()
            .map(|&(o, s)| runner.prepare(&ids[o], cfg.scales[s]))
            .collect::<Result<Vec<_>, _>>()?;

        let screen_jobs: Vec<(usize, u64)> = (0..pairs.len())
            .flat_map(|p| (0..cfg.screen_attempts as u64).map(move |a| (p, a)))
            .collect();
        let outcomes = screen_jobs
            .par_iter()
            .map(|&(p, a)| runner.run(&prepared[p], Stage::Screen, a))
            .collect::<Result<Vec<_>, _>>()?;
        let mut successes = vec![0usize; pairs.len()];
        for (&(p, _), o) in screen_jobs.iter().zip(&outcomes) {
            successes[p] += o.success as usize;
        }

        let mut out: Vec<ObjectSelection> = ids
            .iter()
            .enumerate()
            .map(|(o, id)| {
                let row = successes[o * cfg.scales.len()..(o + 1) * cfg.scales.len()].to_vec();
                let rate = |k: usize| k as f64 / cfg.screen_attempts as f64;
                let pass = row.iter().any(|&k| rate(k) > cfg.success_threshold);
                // best rate, smaller scale on ties
                let chosen = pass.then(|| {
                    (0..cfg.scales.len())
                        .max_by(|&a, &b| {
                            row[a].cmp(&row[b]).then(cfg.scales[b].total_cmp(&cfg.scales[a]))
                        })
                        .expect("non-empty scales")
                });
                ObjectSelection {
                    object_id: id.clone(),
                    screen_successes: row,
                    screen_pass: pass,
                    chosen_scale: chosen.map(|s| cfg.scales[s]),
                    tactile_valid: None,
                    pool: Pool::Dropped,
                }
            })
            .collect();

        let tactile_jobs: Vec<(usize, usize, u64)> = out
            .iter()
            .enumerate()
            .filter_map(|(o, sel)| {
                let s = cfg.scales.iter().position(|&x| Some(x) == sel.chosen_scale)?;
                Some((o, o * cfg.scales.len() + s))
            })
            .flat_map(|(o, p)| (0..cfg.tactile_attempts as u64).map(move |a| (o, p, a)))
            .collect();
        let outcomes = tactile_jobs
            .par_iter()
            .map(|&(_, p, a)| runner.run(&prepared[p], Stage::Tactile, a))
            .collect::<Result<Vec<_>, _>>()?;
        for (&(o, _, _), r) in tactile_jobs.iter().zip(&outcomes) {
            *out[o].tactile_valid.get_or_insert(0) += r.valid as usize;
        }
        for sel in out.iter_mut() {
            let Some(valid) = sel.tactile_valid else { continue };
            let projected = valid as f64 / cfg.tactile_attempts as f64 * cfg.collection_attempts as f64;
            sel.pool = if valid == 0 {
                Pool::Dropped
            } else if projected < cfg.min_known_valid as f64 {
                Pool::Unknown
            } else {
                Pool::Known
            };
        }
        Ok(out)
    })
}

/// One row per object: screen success rates per scale, screen verdict, chosen scale,
/// tactile-screen valid count and pool.
pub fn selection_csv(rows: &[ObjectSelection], cfg: &SelectionConfig) -> String {
    let mut s = String::from("object_id");
    for sc in &cfg.scales {
        let _ = write!(s, ",success_{sc}");
    }
    s.push_str(",screen_pass,chosen_scale,tactile_valid,pool\n");
    for r in rows {
        s.push_str(&r.object_id);
        for &k in &r.screen_successes {
            let _ = write!(s, ",{}", k as f64 / cfg.screen_attempts as f64);
        }
        let opt = |v: Option<String>| v.unwrap_or_default();
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            r.screen_pass,
            opt(r.chosen_scale.map(|x| x.to_string())),
            opt(r.tactile_valid.map(|x| x.to_string())),
            r.pool.as_str()
        );
    }
    s
}
