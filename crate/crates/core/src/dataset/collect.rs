use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{id_hash, mix64, DataError, Dataset, DatasetKind, ObjectTelemetry, SampleDims};
use crate::grasping::{execute_attempt, AttemptOutcome, ObjectModel, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub n_target: usize,
    pub seed: u64,
    pub workers: usize,
    /// Per-object attempt budget as a multiple of the per-object sample quota.
    pub budget_factor: usize,
    /// Attempts issued per object per round.
    pub batch: usize,
    pub config_hash: u32,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            n_target: 200,
            seed: 0,
            workers: 1,
            budget_factor: 50,
            batch: 8,
            config_hash: 0,
        }
    }
}

/// Independent stream per (seed, object, attempt).
pub fn attempt_rng(seed: u64, object_id: &str, attempt_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ id_hash(object_id)));
    rng.set_stream(attempt_index);
    rng
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, DataError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DataError::BadConfig(format!("thread pool: {e}")))
}

struct Progress {
    next_attempt: u64,
    recorded: usize,
}

/// Round-robin collection until `n_target` valid samples are stored.
///
/// Each round issues a batch of attempts per active object. Results are consumed in
/// (object order, attempt index) order, so the output does not depend on `workers`.
/// An object first stops at its quota of `ceil(n_target / objects)`. If every object has
/// stopped short of the target, the ones still inside their attempt budget keep going.
pub fn collect(objects: &[ObjectModel], sim: &SimConfig, cc: &CollectConfig) -> Result<Dataset, DataError> {
    if objects.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    if cc.n_target == 0 || cc.batch == 0 || cc.budget_factor == 0 {
        return Err(DataError::BadConfig("n_target, batch and budget_factor must be positive".into()));
    }
    sim.validate()?;
    let dims = SampleDims {
        camera_width: sim.scene.camera.width,
        camera_height: sim.scene.camera.height,
        tactile_width: sim.gripper.sensor.width_px,
        tactile_height: sim.gripper.sensor.height_px,
    };
    let mut ds = Dataset::new(DatasetKind::Raw, dims, cc.seed, cc.config_hash);
    for o in objects {
        ds.telemetry.per_object.entry(o.id.clone()).or_default();
    }
    let quota = cc.n_target.div_ceil(objects.len());
    let budget = (cc.budget_factor * quota) as u64;
    let pool = thread_pool(cc.workers)?;
    let mut progress: Vec<Progress> = objects.iter().map(|_| Progress { next_attempt: 0, recorded: 0 }).collect();

    let mut capped = true;
    while ds.len() < cc.n_target {
        let active: Vec<usize> = (0..objects.len())
            .filter(|&i| progress[i].next_attempt < budget && (!capped || progress[i].recorded < quota))
            .collect();
        if active.is_empty() {
            if capped {
                capped = false;
                continue;
            }
            return Err(DataError::BudgetExhausted {
                collected: ds.len(),
                target: cc.n_target,
            });
        }
        let jobs: Vec<(usize, u64)> = active
            .iter()
            .flat_map(|&i| {
                let start = progress[i].next_attempt;
                let end = (start + cc.batch as u64).min(budget);
                (start..end).map(move |a| (i, a))
            })
            .collect();
        let results = pool.install(|| {
            jobs.par_iter()
                .map(|&(i, a)| {
                    let obj = &objects[i];
                    execute_attempt(obj, sim, a, &mut attempt_rng(cc.seed, &obj.id, a))
                })
                .collect::<Vec<_>>()
        });
        for (&(i, a), result) in jobs.iter().zip(results) {
            if ds.len() >= cc.n_target {
                break;
            }
            if capped && progress[i].recorded >= quota {
                continue;
            }
            let obj = &objects[i];
            let tele: &mut ObjectTelemetry = ds.telemetry.per_object.get_mut(&obj.id).expect("registered");
            tele.attempts += 1;
            progress[i].next_attempt = a + 1;
            match result? {
                AttemptOutcome::Recorded(s) => {
                    tele.recorded += 1;
                    progress[i].recorded += 1;
                    ds.push(*s)?;
                }
                AttemptOutcome::Discarded(reason) => tele.discard(reason),
            }
        }
    }
    Ok(ds)
}
