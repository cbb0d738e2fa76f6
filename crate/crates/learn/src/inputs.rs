//! Sample → encoder inputs: RGB/255, range/far, gel displacement/thickness, bilinearly
//! resized to the square encoder resolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactigrasp_core::dataset::{Dataset, ModalityMask, Sample, SampleDims};

use crate::model::{Modality, SampleInputs};
use crate::tensor::Tensor;
use crate::{LearnError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub input_size: usize,
    /// Camera range that maps to 1.0.
    pub depth_far: f64,
    /// Gel displacement that maps to 1.0.
    pub gel_thickness: f64,
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            input_size: 64,
            depth_far: 2.0,
            gel_thickness: 0.002,
        }
    }
}

/// Bilinear resampling with pixel-center alignment and clamped borders.
pub fn resize_bilinear(src: &[f32], w: usize, h: usize, out_w: usize, out_h: usize, scale: f64) -> Vec<Real> {
    let mut out = Vec::with_capacity(out_w * out_h);
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let at = |x: usize, y: usize| src[y * w + x] as f64;
            let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
            let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
            out.push(((top * (1.0 - ty) + bottom * ty) * scale) as Real);
        }
    }
    out
}

fn modality_image(s: &Sample, dims: &SampleDims, m: Modality, spec: &InputSpec) -> Result<Tensor, LearnError> {
    let n = spec.input_size;
    let (cw, ch) = (dims.camera_width, dims.camera_height);
    let data = match m {
        Modality::Vision => {
            let mut data = Vec::with_capacity(3 * n * n);
            for c in 0..3 {
                let plane: Vec<f32> = s.rgb.iter().skip(c).step_by(3).map(|&v| v as f32).collect();
                data.extend(resize_bilinear(&plane, cw, ch, n, n, 1.0 / 255.0));
            }
            data
        }
        Modality::Depth => resize_bilinear(&s.depth, cw, ch, n, n, 1.0 / spec.depth_far),
        Modality::TouchLeft | Modality::TouchRight => {
            let f = if m == Modality::TouchLeft { &s.tactile_left } else { &s.tactile_right };
            resize_bilinear(&f.data, f.width, f.height, n, n, 1.0 / spec.gel_thickness)
        }
    };
    Tensor::from_vec(&[m.channels(), n, n], data)
}

pub fn sample_inputs(s: &Sample, dims: &SampleDims, mask: &ModalityMask, spec: &InputSpec) -> Result<SampleInputs, LearnError> {
    if !s.fits(dims) {
        return Err(LearnError::ShapeMismatch(format!("sample {} does not match dataset dims", s.attempt_index)));
    }
    let images = Modality::active(mask)
        .into_iter()
        .map(|m| modality_image(s, dims, m, spec))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampleInputs { images })
}

/// Encoder inputs and labels for a whole dataset, computed once per training run.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    pub inputs: Vec<SampleInputs>,
    pub labels: Vec<Real>,
    pub object_ids: Vec<String>,
}

impl PreparedSet {
    pub fn from_dataset(ds: &Dataset, mask: &ModalityMask, spec: &InputSpec) -> Result<Self, LearnError> {
        let inputs = ds
            .samples
            .par_iter()
            .map(|s| sample_inputs(s, &ds.dims, mask, spec))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            inputs,
            labels: ds.samples.iter().map(|s| s.label() as Real).collect(),
            object_ids: ds.samples.iter().map(|s| s.object_id.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_identity_and_constant() {
        let src: Vec<f32> = (0..12).map(|v| v as f32).collect();
        let same = resize_bilinear(&src, 4, 3, 4, 3, 1.0);
        assert!(same.iter().zip(&src).all(|(a, b)| (*a as f32 - b).abs() < 1e-6));
        let up = resize_bilinear(&[5.0; 6], 3, 2, 7, 9, 2.0);
        assert!(up.iter().all(|&v| (v - 10.0).abs() < 1e-6));
    }

    #[test]
    fn resize_preserves_linear_ramps() {
        // a horizontal ramp stays a ramp in the interior
        let src: Vec<f32> = (0..4).flat_map(|_| (0..8).map(|x| x as f32)).collect();
        let out = resize_bilinear(&src, 8, 4, 4, 2, 1.0);
        assert!((out[1] - out[0] - 2.0).abs() < 1e-6);
        assert!((out[2] - out[1] - 2.0).abs() < 1e-6);
    }
}
