//! Convolution over token positions: each window size has a bank of
//! filters spanning `window` consecutive rows, followed by ReLU, max-pooling
//! over valid positions and a dense projection.

use super::ops::{matvec_acc, matvec_t_acc, outer_acc};
use super::{ParamSet, Tensor2D};
use crate::util::{axpy, dot};

pub struct Cache {
    // per (window, filter): argmax position and pre-activation maximum
    argmax: Vec<usize>,
    zmax: Vec<f64>,
    pooled: Vec<f64>,
}

fn proj_index(windows: &[usize]) -> usize {
    2 * windows.len()
}

pub fn forward(
    params: &ParamSet,
    x: &Tensor2D,
    windows: &[usize],
    maps: usize,
    out_dim: usize,
) -> (Vec<f64>, Cache) {
    let d = x.cols();
    let n = windows.len() * maps;
    let mut argmax = vec![0; n];
    let mut zmax = vec![f64::NEG_INFINITY; n];
    for (k, &s) in windows.iter().enumerate() {
        let w = params.tensor(2 * k).data();
        let b = params.tensor(2 * k + 1).data();
        for t in 0..=x.rows() - s {
            let window = &x.data()[t * d..(t + s) * d];
            for f in 0..maps {
                let z = dot(&w[f * s * d..(f + 1) * s * d], window) + b[f];
                let slot = k * maps + f;
                if z > zmax[slot] {
                    zmax[slot] = z;
                    argmax[slot] = t;
                }
            }
        }
    }
    let pooled: Vec<f64> = zmax.iter().map(|&z| z.max(0.0)).collect();
    let p = proj_index(windows);
    let mut out = params.tensor(p + 1).data().to_vec();
    debug_assert_eq!(out.len(), out_dim);
    matvec_acc(params.tensor(p).data(), &pooled, &mut out);
    (out, Cache { argmax, zmax, pooled })
}

#[allow(clippy::too_many_arguments)]
pub fn backward(
    params: &ParamSet,
    x: &Tensor2D,
    cache: &Cache,
    windows: &[usize],
    maps: usize,
    upstream: &[f64],
    grads: &mut ParamSet,
    mut dx: Option<&mut Tensor2D>,
) {
    let d = x.cols();
    let p = proj_index(windows);
    outer_acc(grads.tensor_mut(p).data_mut(), upstream, &cache.pooled);
    axpy(grads.tensor_mut(p + 1).data_mut(), 1.0, upstream);
    let mut dpooled = vec![0.0; cache.pooled.len()];
    matvec_t_acc(params.tensor(p).data(), upstream, &mut dpooled);

    for (k, &s) in windows.iter().enumerate() {
        let span = s * d;
        for f in 0..maps {
            let slot = k * maps + f;
            // ReLU after max: gradient only flows through a positive maximum.
            if cache.zmax[slot] <= 0.0 || dpooled[slot] == 0.0 {
                continue;
            }
            let g = dpooled[slot];
            let t = cache.argmax[slot];
            let window = &x.data()[t * d..t * d + span];
            axpy(&mut grads.tensor_mut(2 * k).data_mut()[f * span..(f + 1) * span], g, window);
            grads.tensor_mut(2 * k + 1).data_mut()[f] += g;
            if let Some(dx) = dx.as_deref_mut() {
                let w = &params.tensor(2 * k).data()[f * span..(f + 1) * span];
                axpy(&mut dx.data_mut()[t * d..t * d + span], g, w);
            }
        }
    }
}
