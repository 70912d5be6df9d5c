//! Dense ReLU network with flat parameter storage and reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one dense layer: `outputs x inputs` weights plus `outputs` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Dense layers with ReLU between them and a linear final layer. Parameters
/// live in one flat vector: per layer, row-major weights then biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub shapes: Vec<LayerShape>,
    pub params: Vec<f64>,
}

/// Per-layer activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`
    /// (post-ReLU for hidden layers).
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        let shapes: Vec<LayerShape> = widths
            .windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect();
        let n = shapes.iter().map(LayerShape::len).sum();
        Self {
            shapes,
            params: vec![0.0; n],
        }
    }

    /// He-uniform weights, zero biases.
    pub fn init<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        let mut m = Self::zeros(widths);
        let mut off = 0;
        for shape in m.shapes.clone() {
            let bound = (6.0 / shape.inputs.max(1) as f64).sqrt();
            for w in &mut m.params[off..off + shape.inputs * shape.outputs] {
                *w = rng.random_range(-bound..bound);
            }
            off += shape.len();
        }
        m
    }

    pub fn input_width(&self) -> usize {
        self.shapes[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.shapes.last().map_or(0, |s| s.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// `(weights, biases)` ranges of layer `l` within `params`.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let off: usize = self.shapes[..l].iter().map(LayerShape::len).sum();
        let s = self.shapes[l];
        let w_end = off + s.inputs * s.outputs;
        (off..w_end, w_end..w_end + s.outputs)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)?;
        Ok(cache.acts.pop().unwrap_or_default())
    }

    pub fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::ShapeMismatch {
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        cache.acts.resize_with(self.shapes.len() + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        let last = self.shapes.len() - 1;
        let mut off = 0;
        for (l, s) in self.shapes.iter().enumerate() {
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let x = &before[l];
            let y = &mut after[0];
            y.clear();
            let w = &self.params[off..off + s.inputs * s.outputs];
            let b = &self.params[off + s.inputs * s.outputs..off + s.len()];
            for (row, &bias) in w.chunks_exact(s.inputs).zip(b) {
                let z = bias + dot(row, x);
                y.push(if l < last { z.max(0.0) } else { z });
            }
            off += s.len();
        }
        Ok(())
    }

    /// Accumulate `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward_accumulate(&self, cache: &ForwardCache, d_out: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        debug_assert_eq!(d_out.len(), self.output_width());
        let mut delta = d_out.to_vec();
        let mut off = self.params.len();
        for l in (0..self.shapes.len()).rev() {
            let s = self.shapes[l];
            off -= s.len();
            let x = &cache.acts[l];
            let w_len = s.inputs * s.outputs;
            {
                let (gw, gb) = grads[off..off + s.len()].split_at_mut(w_len);
                for ((g_row, g_b), &d) in
                    gw.chunks_exact_mut(s.inputs).zip(gb.iter_mut()).zip(&delta)
                {
                    if d == 0.0 {
                        continue;
                    }
                    *g_b += d;
                    for (g, &xi) in g_row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + w_len];
            let mut prev = vec![0.0; s.inputs];
            for (row, &d) in w.chunks_exact(s.inputs).zip(&delta) {
                if d == 0.0 {
                    continue;
                }
                for (p, &wi) in prev.iter_mut().zip(row) {
                    *p += d * wi;
                }
            }
            // ReLU derivative of the previous layer's output
            for (p, &a) in prev.iter_mut().zip(x) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
