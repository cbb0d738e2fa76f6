//! Per-modality residual encoders, late fusion by concatenation, dense head, one logit.
//!
//! All weights live in one flat parameter list (declaration order). Layers refer to
//! entries by index, so optimizers, gradient checks and serialization treat the model
//! uniformly.

use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use tactigrasp_core::dataset::ModalityMask;

use crate::layers::{
    conv2d, conv2d_backward, conv_out_dim, dense, dense_backward, global_avg_pool, global_avg_pool_backward,
    relu, relu_backward, sigmoid,
};
use crate::tensor::Tensor;
use crate::{LearnError, Real};

pub type Params = Vec<Tensor>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Vision,
    Depth,
    TouchLeft,
    TouchRight,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Vision, Modality::Depth, Modality::TouchLeft, Modality::TouchRight];

    pub fn channels(&self) -> usize {
        match self {
            Modality::Vision => 3,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Modality::Vision => "vision",
            Modality::Depth => "depth",
            Modality::TouchLeft => "touch_left",
            Modality::TouchRight => "touch_right",
        }
    }

    pub fn enabled(&self, mask: &ModalityMask) -> bool {
        match self {
            Modality::Vision => mask.vision,
            Modality::Depth => mask.depth,
            Modality::TouchLeft => mask.touch_left,
            Modality::TouchRight => mask.touch_right,
        }
    }

    /// Active modalities in canonical order.
    pub fn active(mask: &ModalityMask) -> Vec<Modality> {
        Self::ALL.into_iter().filter(|m| m.enabled(mask)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mask: ModalityMask,
    /// Side length of the square encoder input.
    pub input_size: usize,
    /// Channel width per stage; the stem uses the first width.
    pub widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn new(mask: ModalityMask) -> Self {
        Self {
            mask,
            input_size: 64,
            widths: vec![8, 16, 32],
            blocks_per_stage: 2,
            hidden: vec![32],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    w: usize,
    b: usize,
    stride: usize,
    pad: usize,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    conv1: ConvLayer,
    conv2: ConvLayer,
    shortcut: Option<ConvLayer>,
}

#[derive(Debug, Clone)]
struct Encoder {
    modality: Modality,
    stem: ConvLayer,
    blocks: Vec<Block>,
    out_width: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseLayer {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// He normal, scaled.
    He(Real),
    Zero,
}

/// Architecture only; parameters are held separately.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: ModelConfig,
    encoders: Vec<Encoder>,
    head: Vec<DenseLayer>,
    shapes: Vec<Vec<usize>>,
    names: Vec<String>,
    inits: Vec<Init>,
}

struct Builder {
    shapes: Vec<Vec<usize>>,
    names: Vec<String>,
    inits: Vec<Init>,
}

impl Builder {
    fn param(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.shapes.push(shape);
        self.names.push(name);
        self.inits.push(init);
        self.shapes.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, gain: Real) -> ConvLayer {
        ConvLayer {
            w: self.param(format!("{name}.weight"), vec![cout, cin, k, k], Init::He(gain)),
            b: self.param(format!("{name}.bias"), vec![cout], Init::Zero),
            stride,
            pad,
        }
    }

    fn dense(&mut self, name: &str, nin: usize, nout: usize, gain: Real) -> DenseLayer {
        DenseLayer {
            w: self.param(format!("{name}.weight"), vec![nout, nin], Init::He(gain)),
            b: self.param(format!("{name}.bias"), vec![nout], Init::Zero),
        }
    }
}

/// Residual-branch output convs start small so each block begins near identity.
const BRANCH_GAIN: Real = 0.5;

impl Network {
    pub fn new(cfg: &ModelConfig) -> Result<Self, LearnError> {
        if cfg.mask.is_empty() {
            return Err(LearnError::Config("modality mask is empty".into()));
        }
        if cfg.widths.is_empty() || cfg.widths.contains(&0) || cfg.blocks_per_stage == 0 {
            return Err(LearnError::Config("encoder needs at least one stage of non-zero width and blocks".into()));
        }
        // stem and every stage halve the resolution
        let mut side = cfg.input_size;
        for _ in 0..=cfg.widths.len() {
            side = conv_out_dim(side, 3, 2, 1).filter(|&s| s > 0).ok_or_else(|| {
                LearnError::Config(format!("input size {} too small for {} stages", cfg.input_size, cfg.widths.len()))
            })?;
        }
        let mut b = Builder { shapes: Vec::new(), names: Vec::new(), inits: Vec::new() };
        let mut encoders = Vec::new();
        for m in Modality::active(&cfg.mask) {
            let p = m.name();
            let stem = b.conv(&format!("{p}.stem"), m.channels(), cfg.widths[0], 3, 2, 1, 1.0);
            let mut blocks = Vec::new();
            let mut cin = cfg.widths[0];
            for (si, &w) in cfg.widths.iter().enumerate() {
                for bi in 0..cfg.blocks_per_stage {
                    let stride = if bi == 0 { 2 } else { 1 };
                    let n = format!("{p}.stage{si}.block{bi}");
                    let conv1 = b.conv(&format!("{n}.conv1"), cin, w, 3, stride, 1, 1.0);
                    let conv2 = b.conv(&format!("{n}.conv2"), w, w, 3, 1, 1, BRANCH_GAIN);
                    let shortcut =
                        (stride != 1 || cin != w).then(|| b.conv(&format!("{n}.shortcut"), cin, w, 1, stride, 0, 1.0));
                    blocks.push(Block { conv1, conv2, shortcut });
                    cin = w;
                }
            }
            encoders.push(Encoder { modality: m, stem, blocks, out_width: cin });
        }
        let mut head = Vec::new();
        let mut nin: usize = encoders.iter().map(|e| e.out_width).sum();
        for (i, &h) in cfg.hidden.iter().enumerate() {
            head.push(b.dense(&format!("head.hidden{i}"), nin, h, 1.0));
            nin = h;
        }
        head.push(b.dense("head.out", nin, 1, std::f64::consts::FRAC_1_SQRT_2 as Real));
        Ok(Self {
            cfg: cfg.clone(),
            encoders,
            head,
            shapes: b.shapes,
            names: b.names,
            inits: b.inits,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn modalities(&self) -> Vec<Modality> {
        self.encoders.iter().map(|e| e.modality).collect()
    }

    /// Width of the concatenated feature vector entering the head.
    pub fn fusion_width(&self) -> usize {
        self.encoders.iter().map(|e| e.out_width).sum()
    }

    pub fn param_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.shapes.iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn zero_grads(&self) -> Params {
        self.shapes.iter().map(|s| Tensor::zeros(s)).collect()
    }

    pub fn init_params(&self, seed: u64) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.shapes
            .iter()
            .zip(&self.inits)
            .map(|(shape, init)| match init {
                Init::Zero => Tensor::zeros(shape),
                Init::He(gain) => {
                    let fan_in: usize = shape[1..].iter().product();
                    let std = *gain as f64 * (2.0 / fan_in as f64).sqrt();
                    let normal = Normal::new(0.0, std).expect("positive std");
                    let n = shape.iter().product();
                    let data = (0..n).map(|_| normal.sample(&mut rng) as Real).collect();
                    Tensor::from_vec(shape, data).expect("consistent")
                }
            })
            .collect()
    }

    pub fn check_params(&self, params: &[Tensor]) -> Result<(), LearnError> {
        if params.len() != self.shapes.len() || params.iter().zip(&self.shapes).any(|(p, s)| p.shape() != s.as_slice()) {
            return Err(LearnError::ShapeMismatch("parameters do not match the architecture".into()));
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &SampleInputs) -> Result<(), LearnError> {
        if inputs.images.len() != self.encoders.len() {
            return Err(LearnError::MissingModality(format!(
                "network expects {} images ({:?}), got {}",
                self.encoders.len(),
                self.modalities(),
                inputs.images.len()
            )));
        }
        let s = self.cfg.input_size;
        for (e, img) in self.encoders.iter().zip(&inputs.images) {
            if img.shape() != [e.modality.channels(), s, s] {
                return Err(LearnError::MissingModality(format!(
                    "{} input has shape {:?}, expected [{}, {s}, {s}]",
                    e.modality.name(),
                    img.shape(),
                    e.modality.channels()
                )));
            }
        }
        Ok(())
    }

    /// Forward pass for one sample, keeping what the backward pass needs.
    pub fn forward(&self, params: &[Tensor], inputs: &SampleInputs) -> Result<Forward, LearnError> {
        self.check_inputs(inputs)?;
        let conv = |l: &ConvLayer, x: &Tensor| conv2d(x, &params[l.w], Some(&params[l.b]), l.stride, l.pad);
        let mut encoders = Vec::with_capacity(self.encoders.len());
        let mut features = Vec::with_capacity(self.fusion_width());
        for (e, x) in self.encoders.iter().zip(&inputs.images) {
            let stem_pre = conv(&e.stem, x)?;
            let mut a = relu(&stem_pre);
            let mut blocks = Vec::with_capacity(e.blocks.len());
            for blk in &e.blocks {
                let h = conv(&blk.conv1, &a)?;
                let r = relu(&h);
                let mut sum = conv(&blk.conv2, &r)?;
                match &blk.shortcut {
                    Some(sc) => sum.add_assign(&conv(sc, &a)?),
                    None => sum.add_assign(&a),
                }
                let out = relu(&sum);
                blocks.push(BlockCache { input: a, h, r, sum });
                a = out;
            }
            let pooled = global_avg_pool(&a);
            features.extend_from_slice(pooled.data());
            encoders.push(EncoderCache { stem_pre, blocks, last: a });
        }
        let features = Tensor::from_vec(&[features.len()], features)?;
        let mut head_inputs = Vec::with_capacity(self.head.len());
        let mut head_pre = Vec::with_capacity(self.head.len());
        let mut x = features;
        for (i, l) in self.head.iter().enumerate() {
            let z = dense(&x, &params[l.w], &params[l.b])?;
            head_inputs.push(x);
            x = if i + 1 < self.head.len() { relu(&z) } else { z.clone() };
            head_pre.push(z);
        }
        let logit = x.data()[0];
        if !logit.is_finite() {
            return Err(LearnError::NonFinite("model output".into()));
        }
        Ok(Forward { encoders, head_inputs, head_pre, logit })
    }

    /// Accumulates parameter gradients of a loss whose derivative w.r.t. the logit is
    /// `grad_logit`.
    pub fn backward(
        &self,
        params: &[Tensor],
        inputs: &SampleInputs,
        fwd: &Forward,
        grad_logit: Real,
        grads: &mut [Tensor],
    ) -> Result<(), LearnError> {
        let mut g = Tensor::from_vec(&[1], vec![grad_logit])?;
        for (i, l) in self.head.iter().enumerate().rev() {
            if i + 1 < self.head.len() {
                g = relu_backward(&fwd.head_pre[i], &g);
            }
            let (gw, gb) = two_mut(grads, l.w, l.b);
            g = dense_backward(&fwd.head_inputs[i], &params[l.w], &g, gw, gb)?;
        }
        let mut offset = 0;
        for ((e, cache), x) in self.encoders.iter().zip(&fwd.encoders).zip(&inputs.images) {
            let gf = Tensor::from_vec(&[e.out_width], g.data()[offset..offset + e.out_width].to_vec())?;
            offset += e.out_width;
            let mut ga = global_avg_pool_backward(cache.last.shape(), &gf);
            for (blk, bc) in e.blocks.iter().zip(&cache.blocks).rev() {
                let gsum = relu_backward(&bc.sum, &ga);
                let mut gin = bc.input.zeros_like();
                match &blk.shortcut {
                    Some(sc) => conv_backward(params, grads, sc, &bc.input, &gsum, Some(&mut gin))?,
                    None => gin.add_assign(&gsum),
                }
                let mut gr = bc.r.zeros_like();
                conv_backward(params, grads, &blk.conv2, &bc.r, &gsum, Some(&mut gr))?;
                let gh = relu_backward(&bc.h, &gr);
                conv_backward(params, grads, &blk.conv1, &bc.input, &gh, Some(&mut gin))?;
                ga = gin;
            }
            let gstem = relu_backward(&cache.stem_pre, &ga);
            // the stem input is data; no gradient flows past it
            conv_backward(params, grads, &e.stem, x, &gstem, None)?;
        }
        Ok(())
    }

    pub fn predict(&self, params: &[Tensor], inputs: &SampleInputs) -> Result<Real, LearnError> {
        Ok(sigmoid(self.forward(params, inputs)?.logit))
    }
}

fn conv_backward(
    params: &[Tensor],
    grads: &mut [Tensor],
    l: &ConvLayer,
    input: &Tensor,
    grad_out: &Tensor,
    grad_input: Option<&mut Tensor>,
) -> Result<(), LearnError> {
    let (gw, gb) = two_mut(grads, l.w, l.b);
    conv2d_backward(input, &params[l.w], grad_out, l.stride, l.pad, grad_input, gw, Some(gb))
}

fn two_mut(v: &mut [Tensor], a: usize, b: usize) -> (&mut Tensor, &mut Tensor) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

/// Encoder inputs for one sample, one image per active modality in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInputs {
    pub images: Vec<Tensor>,
}

struct BlockCache {
    input: Tensor,
    h: Tensor,
    r: Tensor,
    sum: Tensor,
}

struct EncoderCache {
    stem_pre: Tensor,
    blocks: Vec<BlockCache>,
    last: Tensor,
}

pub struct Forward {
    encoders: Vec<EncoderCache>,
    head_inputs: Vec<Tensor>,
    head_pre: Vec<Tensor>,
    pub logit: Real,
}

impl Forward {
    pub fn prob(&self) -> Real {
        sigmoid(self.logit)
    }

    /// Hash of every ReLU on/off state; equal fingerprints mean the same linear region.
    pub fn relu_fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let mut feed = |t: &Tensor| {
            for v in t.data() {
                (*v > 0.0).hash(&mut h);
            }
        };
        for e in &self.encoders {
            feed(&e.stem_pre);
            for b in &e.blocks {
                feed(&b.h);
                feed(&b.sum);
            }
        }
        for z in &self.head_pre[..self.head_pre.len().saturating_sub(1)] {
            feed(z);
        }
        h.finish()
    }
}
