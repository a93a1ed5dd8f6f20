//! Stacked affine layers with tanh between them; a single layer is linear regression.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub(crate) struct MlpTrace {
    /// `activations[0]` is the input, the last entry the (linear) output.
    activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub(crate) fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// `out += W x + b` for a row-major `W` of shape `out.len() × x.len()`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n).zip(b)) {
        *o += bias + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

pub(crate) fn forward(weights: &[f64], dims: &[usize], input: &[f64]) -> Result<MlpTrace> {
    if input.len() != dims[0] {
        return Err(Error::DimensionMismatch { expected: dims[0], got: input.len() });
    }
    let layers = dims.len() - 1;
    let mut activations = Vec::with_capacity(dims.len());
    activations.push(input.to_vec());
    let mut offset = 0;
    for (l, pair) in dims.windows(2).enumerate() {
        let (n_in, n_out) = (pair[0], pair[1]);
        let w = &weights[offset..offset + n_in * n_out];
        let b = &weights[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut z = alloc::vec![0.0; n_out];
        affine(w, b, &activations[l], &mut z);
        if l + 1 < layers {
            z.iter_mut().for_each(|v| *v = libm::tanh(*v));
        }
        activations.push(z);
    }
    Ok(MlpTrace { activations })
}

pub(crate) fn backward(weights: &[f64], dims: &[usize], trace: &MlpTrace, grad_output: &[f64], grad: &mut [f64]) {
    let offsets: Vec<usize> = dims
        .windows(2)
        .scan(0, |acc, p| {
            let start = *acc;
            *acc += p[0] * p[1] + p[1];
            Some(start)
        })
        .collect();
    let mut delta = grad_output.to_vec();
    for l in (0..dims.len() - 1).rev() {
        let (n_in, n_out) = (dims[l], dims[l + 1]);
        let off = offsets[l];
        let x = &trace.activations[l];
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
            row.iter_mut().zip(x).for_each(|(g, xi)| *g += d * xi);
            grad[off + n_in * n_out + o] += d;
        }
        if l > 0 {
            let w = &weights[off..off + n_in * n_out];
            let mut prev = alloc::vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                for (p, wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wv;
                }
            }
            // hidden activations are tanh outputs
            for (p, a) in prev.iter_mut().zip(x) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}
