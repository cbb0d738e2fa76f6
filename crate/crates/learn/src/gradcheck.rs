//! Central finite-difference checks of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::layers::sigmoid;
use crate::model::{Network, SampleInputs};
use crate::tensor::Tensor;
use crate::train::mix;
use crate::{LearnError, Real};

/// Finite-difference formula; both are central.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+ε) − f(x−ε)) / 2ε`, error O(ε²).
    ThreePoint,
    /// `(f(x−2ε) − 8f(x−ε) + 8f(x+ε) − f(x+2ε)) / 12ε`, error O(ε⁴): lets a step large
    /// enough to rise above 32-bit rounding noise avoid the curvature error.
    FivePoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub stencil: Stencil,
    /// Entries checked per parameter tensor (all of them when the tensor is smaller).
    pub entries_per_tensor: usize,
    /// Relative error is `|a − n| / max(|a|, |n|, floor)`, so gradients far below the
    /// floating-point noise of the loss are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            stencil: Stencil::ThreePoint,
            entries_per_tensor: 8,
            floor: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(tensor, entry)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Entries whose ±ε probe crossed a ReLU kink.
    pub skipped_kinks: usize,
}

/// Compares `analytic` with central differences of `eval`, which returns the loss and a
/// fingerprint of the piecewise-linear region (probes that change it are skipped).
pub fn grad_check<F>(params: &[Tensor], analytic: &[Tensor], mut eval: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    F: FnMut(&[Tensor]) -> (f64, u64),
{
    let mut work = params.to_vec();
    let (_, base_region) = eval(&work);
    let mut report = GradCheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (ti, t) in params.iter().enumerate() {
        let n = t.len();
        let picks: Vec<usize> = if n <= cfg.entries_per_tensor {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, cfg.entries_per_tensor).into_vec();
            v.sort_unstable();
            v
        };
        for i in picks {
            let orig = t.data()[i];
            let offsets: &[(f64, f64)] = match cfg.stencil {
                Stencil::ThreePoint => &[(1.0, 0.5), (-1.0, -0.5)],
                Stencil::FivePoint => &[(2.0, -1.0 / 12.0), (1.0, 8.0 / 12.0), (-1.0, -8.0 / 12.0), (-2.0, 1.0 / 12.0)],
            };
            let (mut sum, mut span, mut reach) = (0.0, 0.0, 0.0);
            let mut crossed = false;
            for &(m, w) in offsets {
                let probe = (orig as f64 + m * cfg.epsilon) as Real;
                work[ti].data_mut()[i] = probe;
                let (l, region) = eval(&work);
                crossed |= region != base_region;
                sum += w * l;
                span += (probe as f64 - orig as f64).abs();
                reach += m.abs();
            }
            work[ti].data_mut()[i] = orig;
            if crossed {
                report.skipped_kinks += 1;
                continue;
            }
            // divide by the mean step actually representable in `Real`
            let numeric = sum / (span / reach);
            let a = analytic[ti].data()[i] as f64;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                report.worst = Some((ti, i));
            }
        }
    }
    report
}

/// Mean BCE of the model on `inputs`, computed from the logits in f64, with the combined
/// ReLU fingerprint.
pub fn model_loss(net: &Network, params: &[Tensor], inputs: &[SampleInputs], labels: &[Real]) -> Result<(f64, u64), LearnError> {
    let mut total = 0.0;
    let mut region = 0u64;
    for (k, (x, &y)) in inputs.iter().zip(labels).enumerate() {
        let f = net.forward(params, x)?;
        let z = f.logit as f64;
        // −[y ln σ(z) + (1−y) ln(1−σ(z))] = softplus(z) − y·z
        total += z.max(0.0) + (-z.abs()).exp().ln_1p() - y as f64 * z;
        region ^= mix(f.relu_fingerprint(), k as u64);
    }
    Ok((total / inputs.len() as f64, region))
}

/// Analytic gradient of `model_loss`.
pub fn model_gradient(net: &Network, params: &[Tensor], inputs: &[SampleInputs], labels: &[Real]) -> Result<Vec<Tensor>, LearnError> {
    let mut grads = net.zero_grads();
    let scale = 1.0 / inputs.len() as Real;
    for (x, &y) in inputs.iter().zip(labels) {
        let f = net.forward(params, x)?;
        net.backward(params, x, &f, (sigmoid(f.logit) - y) * scale, &mut grads)?;
    }
    Ok(grads)
}

/// Full-model check on the given samples.
pub fn check_model(
    net: &Network,
    params: &[Tensor],
    inputs: &[SampleInputs],
    labels: &[Real],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, LearnError> {
    let analytic = model_gradient(net, params, inputs, labels)?;
    let mut err = None;
    let report = grad_check(
        params,
        &analytic,
        |p| match model_loss(net, p, inputs, labels) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                (f64::NAN, 0)
            }
        },
        cfg,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{conv2d, conv2d_backward, dense, dense_backward, global_avg_pool, global_avg_pool_backward, relu, relu_backward};
    use crate::model::ModelConfig;
    use rand::Rng;
    use tactigrasp_core::dataset::ModalityMask;

    // Steps balance rounding noise (∝ u/ε) against truncation error. Layer probes are
    // exactly linear in the perturbed entry, so they take large steps at 32 bits; the
    // full model uses the fourth-order stencil so its step can be large too.
    #[cfg(not(feature = "f64"))]
    const TOL: f64 = 1e-3;
    #[cfg(not(feature = "f64"))]
    const EPS_LINEAR: f64 = 1e-1;
    #[cfg(not(feature = "f64"))]
    const EPS_MODEL: f64 = 8e-2;
    #[cfg(feature = "f64")]
    const TOL: f64 = 1e-6;
    #[cfg(feature = "f64")]
    const EPS_LINEAR: f64 = 1e-4;
    #[cfg(feature = "f64")]
    const EPS_MODEL: f64 = 1e-3;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Weighted sum `Σ wᵢ·yᵢ` as a scalar probe of a layer output.
    fn probe(y: &Tensor, w: &Tensor) -> f64 {
        y.data().iter().zip(w.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
    }

    #[test]
    fn dense_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[7], &mut rng);
        let params = vec![random(&[5, 7], &mut rng), random(&[5], &mut rng)];
        let g = random(&[5], &mut rng);
        let mut analytic = vec![params[0].zeros_like(), params[1].zeros_like()];
        let (a0, a1) = analytic.split_at_mut(1);
        dense_backward(&x, &params[0], &g, &mut a0[0], &mut a1[0]).unwrap();
        let cfg = GradCheckConfig { entries_per_tensor: 100, ..GradCheckConfig::default() };
        let r = grad_check(&params, &analytic, |p| (probe(&dense(&x, &p[0], &p[1]).unwrap(), &g), 0), &cfg);
        assert_eq!(r.checked, 40);
        assert!(r.max_rel_err < TOL, "{r:?}");
        // bias gradient equals the upstream gradient exactly
        assert_eq!(analytic[1].data(), g.data());
    }

    #[test]
    fn conv_layer_kernel_and_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (s, p) in [(1, 1), (2, 1), (2, 0)] {
            let x = random(&[2, 7, 6], &mut rng);
            let params = vec![random(&[3, 2, 3, 3], &mut rng), random(&[3], &mut rng), x.clone()];
            let y = conv2d(&x, &params[0], Some(&params[1]), s, p).unwrap();
            let g = random(y.shape(), &mut rng);
            let mut analytic: Vec<Tensor> = params.iter().map(Tensor::zeros_like).collect();
            let (k, rest) = analytic.split_at_mut(1);
            let (b, gx) = rest.split_at_mut(1);
            conv2d_backward(&x, &params[0], &g, s, p, Some(&mut gx[0]), &mut k[0], Some(&mut b[0])).unwrap();
            let cfg = GradCheckConfig { entries_per_tensor: 30, epsilon: EPS_LINEAR, ..GradCheckConfig::default() };
            let r = grad_check(&params, &analytic, |q| (probe(&conv2d(&q[2], &q[0], Some(&q[1]), s, p).unwrap(), &g), 0), &cfg);
            assert_eq!(r.checked, 63);
            assert!(r.max_rel_err < TOL, "stride {s} pad {p}: {r:?}");
        }
    }

    #[test]
    fn relu_and_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[3, 4, 5], &mut rng);
        let g = random(&[3], &mut rng);
        let pooled = |x: &Tensor| probe(&global_avg_pool(&relu(x)), &g);
        let analytic = relu_backward(&x, &global_avg_pool_backward(x.shape(), &g));
        let region = |x: &Tensor| x.data().iter().fold(0u64, |h, v| h.rotate_left(1) ^ (*v > 0.0) as u64);
        let cfg = GradCheckConfig { entries_per_tensor: 60, ..GradCheckConfig::default() };
        let r = grad_check(std::slice::from_ref(&x), &[analytic], |p| (pooled(&p[0]), region(&p[0])), &cfg);
        assert!(r.max_rel_err < TOL, "{r:?}");
    }

    fn small(mask: ModalityMask) -> ModelConfig {
        ModelConfig { input_size: 16, ..ModelConfig::new(mask) }
    }

    fn inputs_for(net: &Network, n: usize, rng: &mut ChaCha8Rng) -> Vec<SampleInputs> {
        let s = net.config().input_size;
        (0..n)
            .map(|_| SampleInputs {
                images: net.modalities().iter().map(|m| random(&[m.channels(), s, s], rng)).collect(),
            })
            .collect()
    }

    #[test]
    fn full_model_every_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (k, mask) in ModalityMask::ABLATION.iter().enumerate() {
            let net = Network::new(&small(*mask)).unwrap();
            let params = net.init_params(9 + k as u64);
            let x = inputs_for(&net, 2, &mut rng);
            let cfg = GradCheckConfig {
                epsilon: EPS_MODEL,
                stencil: Stencil::FivePoint,
                entries_per_tensor: 5,
                seed: k as u64,
                ..GradCheckConfig::default()
            };
            let r = check_model(&net, &params, &x, &[1.0, 0.0], &cfg).unwrap();
            // the fingerprint spans every ReLU, so large probes skip often; keep the check non-vacuous
            assert!(r.checked >= 40, "{mask}: too many kinks {r:?}");
            assert!(r.max_rel_err < TOL, "{mask}: {r:?} at {}", net.param_names()[r.worst.unwrap().0]);
        }
    }

    #[test]
    fn output_bias_gradient_is_mean_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Network::new(&small(ModalityMask::TOUCH_LEFT)).unwrap();
        let params = net.init_params(2);
        let x = inputs_for(&net, 4, &mut rng);
        let y = [1.0, 0.0, 0.0, 1.0];
        let g = model_gradient(&net, &params, &x, &y).unwrap();
        let upstream: Vec<Real> = x.iter().zip(&y).map(|(s, y)| net.forward(&params, s).unwrap().prob() - y).collect();
        // same summation order as the backward pass
        let mean = upstream.iter().fold(0.0 as Real, |acc, u| acc + u * 0.25);
        let bias = net.param_names().iter().position(|n| n == "head.out.bias").unwrap();
        assert_eq!(g[bias].data(), &[mean]);
    }

    #[test]
    fn stationary_point_has_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::new(&small(ModalityMask::DEPTH)).unwrap();
        let mut params = net.init_params(1);
        // saturate the output so σ(z) == 1 exactly, then label 1
        let last = params.len() - 1;
        params[last].data_mut()[0] = 100.0;
        let x = inputs_for(&net, 1, &mut rng);
        assert_eq!(net.forward(&params, &x[0]).unwrap().prob(), 1.0);
        let g = model_gradient(&net, &params, &x, &[1.0]).unwrap();
        assert!(g.iter().flat_map(|t| t.data()).all(|v| v.abs() < 1e-6));
    }
}

