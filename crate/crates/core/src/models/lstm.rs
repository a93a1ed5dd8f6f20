//! Single-layer LSTM over a flattened `steps × width` sequence, final hidden
//! state through a linear head. The reverse pass is backpropagation through time.

use alloc::vec;
use alloc::vec::Vec;

use super::mlp::affine;
use super::sigmoid;
use crate::error::{Error, Result};

pub(crate) struct LstmTrace {
    input: Vec<f64>,
    /// Per step: gate activations `[i, f, g, o]` (each `hidden` long).
    gates: Vec<Vec<f64>>,
    /// Cell states `c_0 = 0, c_1, ..., c_T`.
    cells: Vec<Vec<f64>>,
    /// Hidden states `h_0 = 0, h_1, ..., h_T`.
    hidden: Vec<Vec<f64>>,
    pub(crate) output: Vec<f64>,
}

struct Layout {
    wx: usize,
    wh: usize,
    b: usize,
    wy: usize,
    by: usize,
}

fn layout(width: usize, h: usize, outputs: usize) -> Layout {
    let wx = 0;
    let wh = wx + 4 * h * width;
    let b = wh + 4 * h * h;
    let wy = b + 4 * h;
    let by = wy + h * outputs;
    Layout { wx, wh, b, wy, by }
}

pub(crate) fn forward(weights: &[f64], width: usize, h: usize, outputs: usize, input: &[f64]) -> Result<LstmTrace> {
    if input.is_empty() || !input.len().is_multiple_of(width) {
        return Err(Error::DimensionMismatch { expected: width, got: input.len() });
    }
    let lay = layout(width, h, outputs);
    let wx = &weights[lay.wx..lay.wh];
    let wh = &weights[lay.wh..lay.b];
    let bias = &weights[lay.b..lay.wy];
    let steps = input.len() / width;

    let mut gates = Vec::with_capacity(steps);
    let mut cells = Vec::with_capacity(steps + 1);
    let mut hidden = Vec::with_capacity(steps + 1);
    cells.push(vec![0.0; h]);
    hidden.push(vec![0.0; h]);
    for x in input.chunks_exact(width) {
        let h_prev = &hidden[hidden.len() - 1];
        let c_prev = &cells[cells.len() - 1];
        let mut z = vec![0.0; 4 * h];
        affine(wx, bias, x, &mut z);
        let zeros = vec![0.0; 4 * h];
        affine(wh, &zeros, h_prev, &mut z);
        for k in 0..h {
            z[k] = sigmoid(z[k]);
            z[h + k] = sigmoid(z[h + k]);
            z[2 * h + k] = libm::tanh(z[2 * h + k]);
            z[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let c: Vec<f64> = (0..h).map(|k| z[h + k] * c_prev[k] + z[k] * z[2 * h + k]).collect();
        let hv: Vec<f64> = (0..h).map(|k| z[3 * h + k] * libm::tanh(c[k])).collect();
        gates.push(z);
        cells.push(c);
        hidden.push(hv);
    }
    let mut output = vec![0.0; outputs];
    affine(&weights[lay.wy..lay.by], &weights[lay.by..lay.by + outputs], &hidden[steps], &mut output);
    Ok(LstmTrace { input: input.to_vec(), gates, cells, hidden, output })
}

pub(crate) fn backward(
    weights: &[f64],
    width: usize,
    h: usize,
    outputs: usize,
    trace: &LstmTrace,
    grad_output: &[f64],
    grad: &mut [f64],
) {
    let lay = layout(width, h, outputs);
    let steps = trace.gates.len();
    let h_last = &trace.hidden[steps];

    let mut dh = vec![0.0; h];
    for (o, d) in grad_output.iter().enumerate() {
        for k in 0..h {
            grad[lay.wy + o * h + k] += d * h_last[k];
            dh[k] += d * weights[lay.wy + o * h + k];
        }
        grad[lay.by + o] += d;
    }

    let mut dc = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps).rev() {
        let g = &trace.gates[t];
        let c = &trace.cells[t + 1];
        let c_prev = &trace.cells[t];
        let h_prev = &trace.hidden[t];
        let x = &trace.input[t * width..(t + 1) * width];
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = libm::tanh(c[k]);
            dc[k] += dh[k] * o * (1.0 - tc * tc);
            dz[k] = dc[k] * gg * i * (1.0 - i);
            dz[h + k] = dc[k] * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dc[k] * i * (1.0 - gg * gg);
            dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
            dc[k] *= f;
        }
        let mut dh_prev = vec![0.0; h];
        for (r, d) in dz.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            for (j, xv) in x.iter().enumerate() {
                grad[lay.wx + r * width + j] += d * xv;
            }
            for j in 0..h {
                grad[lay.wh + r * h + j] += d * h_prev[j];
                dh_prev[j] += d * weights[lay.wh + r * h + j];
            }
            grad[lay.b + r] += d;
        }
        dh = dh_prev;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Architecture, ModelParams};
    use alloc::vec::Vec;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Hidden 2, width 1, three steps, unrolled by hand.
    #[test]
    fn tiny_lstm_matches_manual_recurrence() {
        let arch = Architecture::Lstm { input_width: 1, hidden: 2, outputs: 1 };
        // 4H×W = 8 input weights, 4H×H = 16 recurrent, 8 biases, head 2 + 1
        let wx = [0.5, -0.3, 0.8, 0.1, -0.6, 0.4, 0.2, -0.7];
        let wh = [
            0.1, 0.2, -0.1, 0.3, 0.05, -0.2, 0.4, 0.1, -0.3, 0.2, 0.1, -0.1, 0.2, 0.3, -0.4, 0.05,
        ];
        let b = [0.01, -0.02, 0.5, 0.3, 0.0, 0.1, -0.1, 0.2];
        let wy = [1.5, -0.8];
        let by = 0.05;
        let mut w = Vec::new();
        w.extend(wx);
        w.extend(wh);
        w.extend(b);
        w.extend(wy);
        w.push(by);
        let p = ModelParams::from_weights(arch, w, 0).unwrap();
        let xs = [0.3, -1.2, 0.7];

        let (mut h, mut c) = ([0.0f64; 2], [0.0f64; 2]);
        for &x in &xs {
            let mut z = [0.0; 8];
            for r in 0..8 {
                z[r] = wx[r] * x + wh[2 * r] * h[0] + wh[2 * r + 1] * h[1] + b[r];
            }
            let mut hn = [0.0; 2];
            for k in 0..2 {
                let i = sig(z[k]);
                let f = sig(z[2 + k]);
                let g = z[4 + k].tanh();
                let o = sig(z[6 + k]);
                c[k] = f * c[k] + i * g;
                hn[k] = o * c[k].tanh();
            }
            h = hn;
        }
        let expected = wy[0] * h[0] + wy[1] * h[1] + by;
        let got = p.forward(&xs).unwrap()[0];
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }
}
