//! Mini-batch training with a fixed-order gradient reduction, evaluation, and k-fold
//! cross-validation with a held-out test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactigrasp_core::dataset::{make_splits, Dataset, SplitSpec, Splits};

use crate::inputs::{InputSpec, PreparedSet};
use crate::layers::sigmoid;
use crate::loss::{bce_grad_logit, bce_loss};
use crate::model::{ModelConfig, Network, Params};
use crate::optim::{Optimizer, OptimizerKind, MOMENTUM};
use crate::tensor::Tensor;
use crate::{LearnError, Real};

/// Samples whose gradients are summed sequentially before chunks are combined in order.
/// Fixed, so the reduction order never depends on the thread count.
const REDUCE_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub folds: usize,
    pub test_fraction: f64,
    pub seed: u64,
    /// Also train one model on the whole train/validation pool.
    pub retrain_final: bool,
    pub input: InputSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            lr: 0.01,
            optimizer: OptimizerKind::SgdMomentum,
            momentum: MOMENTUM,
            folds: 3,
            test_fraction: 0.2,
            seed: 0,
            retrain_final: true,
            input: InputSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(LearnError::Config("lr must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LearnError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(LearnError::Config("momentum must be in [0, 1)".into()));
        }
        self.split_spec().validate()?;
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.test_fraction,
            folds: self.folds,
            seed: self.seed,
        }
    }
}

pub(crate) fn mix(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean BCE over `idx` and its parameter gradient.
pub fn batch_gradient(net: &Network, params: &[Tensor], set: &PreparedSet, idx: &[usize]) -> Result<(f64, Params), LearnError> {
    if idx.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let scale = 1.0 / idx.len() as Real;
    let partial = idx
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut grads = net.zero_grads();
            let mut probs = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let inputs = &set.inputs[i];
                let fwd = net.forward(params, inputs)?;
                let p = sigmoid(fwd.logit);
                net.backward(params, inputs, &fwd, bce_grad_logit(p, set.labels[i]) * scale, &mut grads)?;
                probs.push(p);
            }
            Ok((probs, grads))
        })
        .collect::<Result<Vec<_>, LearnError>>()?;
    let mut probs = Vec::with_capacity(idx.len());
    let mut total: Option<Params> = None;
    for (p, g) in partial {
        probs.extend(p);
        match total.as_mut() {
            None => total = Some(g),
            Some(t) => t.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
        }
    }
    let labels: Vec<Real> = idx.iter().map(|&i| set.labels[i]).collect();
    let loss = bce_loss(&probs, &labels)?;
    Ok((loss, total.expect("non-empty batch")))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Params,
    /// Mean mini-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train_model(
    net: &Network,
    set: &PreparedSet,
    train_idx: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, LearnError> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let mut params = net.init_params(seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.momentum, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 1));
    let mut order = train_idx.to_vec();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradient(net, &params, set, batch)?;
            if !loss.is_finite() {
                return Err(LearnError::DivergenceDetected(format!("loss {loss} in epoch {epoch}")));
            }
            for g in &grads {
                g.check_finite("gradients").map_err(|_| LearnError::DivergenceDetected(format!("gradients in epoch {epoch}")))?;
            }
            opt.step(&mut params, &grads);
            weighted += loss * batch.len() as f64;
        }
        epoch_losses.push(weighted / order.len() as f64);
    }
    Ok(TrainOutcome { params, epoch_losses })
}

pub fn predict(net: &Network, params: &[Tensor], set: &PreparedSet, idx: &[usize]) -> Result<Vec<Real>, LearnError> {
    idx.par_iter().map(|&i| net.predict(params, &set.inputs[i])).collect()
}

/// Fraction of hard predictions (`p ≥ 0.5` means success) that match the labels.
pub fn accuracy(probs: &[Real], labels: &[Real]) -> Result<f64, LearnError> {
    if probs.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if probs.len() != labels.len() {
        return Err(LearnError::ShapeMismatch("accuracy: predictions and labels differ in length".into()));
    }
    let correct = probs.iter().zip(labels).filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5)).count();
    Ok(correct as f64 / probs.len() as f64)
}

pub fn evaluate(net: &Network, params: &[Tensor], set: &PreparedSet, idx: &[usize]) -> Result<f64, LearnError> {
    let probs = predict(net, params, set, idx)?;
    let labels: Vec<Real> = idx.iter().map(|&i| set.labels[i]).collect();
    accuracy(&probs, &labels)
}

/// Accuracy on a whole dataset under the model's own mask.
pub fn evaluate_dataset(net: &Network, params: &[Tensor], ds: &Dataset, spec: &InputSpec) -> Result<f64, LearnError> {
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let set = PreparedSet::from_dataset(ds, &net.config().mask, spec)?;
    let all: Vec<usize> = (0..set.len()).collect();
    evaluate(net, params, &set, &all)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fold statistics; `std` is the population standard deviation over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub val_accuracies: Vec<f64>,
    /// Each fold model on the held-out test split.
    pub test_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Metrics {
    pub fn from_folds(val_accuracies: Vec<f64>, test_accuracies: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&test_accuracies);
        Self { val_accuracies, test_accuracies, mean, std }
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub params: Params,
    pub epoch_losses: Vec<f64>,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct KFoldResult {
    pub splits: Splits,
    pub folds: Vec<FoldResult>,
    pub final_params: Option<Params>,
    pub final_test_accuracy: Option<f64>,
    pub metrics: Metrics,
}

pub fn train_kfold(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<KFoldResult, LearnError> {
    let set = PreparedSet::from_dataset(ds, &model_cfg.mask, &cfg.input)?;
    train_kfold_prepared(&set, model_cfg, cfg)
}

pub fn train_kfold_prepared(set: &PreparedSet, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<KFoldResult, LearnError> {
    cfg.validate()?;
    let net = Network::new(model_cfg)?;
    let labels: Vec<bool> = set.labels.iter().map(|&y| y >= 0.5).collect();
    let splits = make_splits(&labels, &cfg.split_spec()).map_err(|e| match e {
        tactigrasp_core::dataset::DataError::TooSmall { n, need } => {
            LearnError::TooSmall(format!("{n} samples, need {need} for {} folds", cfg.folds))
        }
        e => e.into(),
    })?;
    let mut folds = Vec::with_capacity(cfg.folds);
    for k in 0..cfg.folds {
        let train = splits.fold_train(k);
        let out = train_model(&net, set, &train, cfg, mix(cfg.seed, 100 + k as u64)).map_err(|e| e.context(format!("fold {k}")))?;
        let val_accuracy = evaluate(&net, &out.params, set, &splits.folds[k])?;
        let test_accuracy = evaluate(&net, &out.params, set, &splits.test)?;
        folds.push(FoldResult { params: out.params, epoch_losses: out.epoch_losses, val_accuracy, test_accuracy });
    }
    let (final_params, final_test_accuracy) = if cfg.retrain_final {
        let out = train_model(&net, set, &splits.pool, cfg, mix(cfg.seed, 99)).map_err(|e| e.context("final model"))?;
        let acc = evaluate(&net, &out.params, set, &splits.test)?;
        (Some(out.params), Some(acc))
    } else {
        (None, None)
    };
    let metrics = Metrics::from_folds(
        folds.iter().map(|f| f.val_accuracy).collect(),
        folds.iter().map(|f| f.test_accuracy).collect(),
    );
    Ok(KFoldResult { splits, folds, final_params, final_test_accuracy, metrics })
}


#[cfg(test)]
mod tests {
    use super::testutil::square_set;
    use super::*;
    use tactigrasp_core::dataset::ModalityMask;

    fn small_cfg() -> ModelConfig {
        ModelConfig { input_size: 16, widths: vec![4, 8], blocks_per_stage: 1, hidden: vec![8], ..ModelConfig::new(ModalityMask::TOUCH) }
    }

    #[test]
    fn accuracy_oracles() {
        let y: Vec<Real> = vec![1.0, 0.0, 1.0, 0.0];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        let inv: Vec<Real> = y.iter().map(|v| 1.0 - v).collect();
        assert_eq!(accuracy(&inv, &y).unwrap(), 0.0);
        assert_eq!(accuracy(&[0.7; 4], &y).unwrap(), 0.5);
        assert!(matches!(accuracy(&[], &[]), Err(LearnError::EmptyDataset)));
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[0.8, 0.9, 1.0]);
        assert!((m - 0.9).abs() < 1e-12);
        assert!((s - (0.02f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_thread_count_independent() {
        let set = square_set(24, 16, 1);
        let net = Network::new(&small_cfg()).unwrap();
        let params = net.init_params(3);
        let idx: Vec<usize> = (0..24).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| batch_gradient(&net, &params, &set, &idx)).unwrap();
        let b = three.install(|| batch_gradient(&net, &params, &set, &idx)).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn training_is_deterministic() {
        let set = square_set(40, 16, 2);
        let net = Network::new(&small_cfg()).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 8, ..TrainConfig::default() };
        let idx: Vec<usize> = (0..40).collect();
        let a = train_model(&net, &set, &idx, &cfg, 5).unwrap();
        let b = train_model(&net, &set, &idx, &cfg, 5).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let set = square_set(120, 16, 3);
        let cfg = TrainConfig { epochs: 15, batch_size: 8, lr: 0.02, retrain_final: false, ..TrainConfig::default() };
        let r = train_kfold_prepared(&set, &small_cfg(), &cfg).unwrap();
        assert!(r.metrics.mean >= 0.9, "{:?}", r.metrics);
        let (m, s) = mean_std(&r.metrics.test_accuracies);
        assert_eq!((m, s), (r.metrics.mean, r.metrics.std));
    }

    #[test]
    fn all_positive_labels_give_majority_predictor() {
        let mut set = square_set(60, 16, 4);
        set.labels.iter_mut().for_each(|y| *y = 1.0);
        let cfg = TrainConfig { epochs: 10, batch_size: 8, ..TrainConfig::default() };
        let r = train_kfold_prepared(&set, &small_cfg(), &cfg).unwrap();
        assert_eq!(r.final_test_accuracy, Some(1.0));
        assert!(r.metrics.test_accuracies.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn untrained_is_chance_on_balanced_data() {
        let set = square_set(200, 16, 5);
        let cfg = TrainConfig { epochs: 0, retrain_final: false, ..TrainConfig::default() };
        let r = train_kfold_prepared(&set, &small_cfg(), &cfg).unwrap();
        for a in &r.metrics.test_accuracies {
            assert!((a - 0.5).abs() <= 0.15, "{a}");
        }
    }

    /// Full-batch gradient descent without momentum below this step size descends monotonically
    /// on the toy corpus.
    const DESCENT_SMOKE_LR: f64 = 0.005;

    #[test]
    fn full_batch_descent_is_monotone() {
        let set = square_set(48, 16, 6);
        let net = Network::new(&small_cfg()).unwrap();
        let cfg = TrainConfig { epochs: 12, batch_size: 48, lr: DESCENT_SMOKE_LR, momentum: 0.0, ..TrainConfig::default() };
        let idx: Vec<usize> = (0..48).collect();
        let out = train_model(&net, &set, &idx, &cfg, 7).unwrap();
        for w in out.epoch_losses.windows(2) {
            assert!(w[1] <= w[0], "{:?}", out.epoch_losses);
        }
    }

    #[test]
    fn too_small_for_folds() {
        let set = square_set(10, 16, 8);
        let r = train_kfold_prepared(&set, &small_cfg(), &TrainConfig::default());
        assert!(matches!(r, Err(LearnError::TooSmall(_))));
    }

    #[test]
    fn bad_lr_rejected() {
        let cfg = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        assert!(matches!(cfg.validate(), Err(LearnError::Config(_))));
    }
}
