//! Bidirectional LSTM over phrase rows with a dense projection of the
//! readout. Gate blocks are stacked in the order input, forget, cell,
//! output.

use super::model::Readout;
use super::ops::{is_zero, matvec_acc, matvec_t_acc, outer_acc};
use super::{ParamSet, Tensor2D};
use crate::util::{axpy, sigmoid};

pub const FWD: usize = 0;
pub const BWD: usize = 3;
pub const PROJ: usize = 6;

struct DirCache {
    order: Vec<usize>,
    // post-activation gates (i, f, g, o), T x 4H
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

pub struct Cache {
    dirs: [DirCache; 2],
    readout: Vec<f64>,
}

/// Number of timesteps the LSTM consumes.
fn effective_len(x: &Tensor2D, mask_padding: bool) -> usize {
    if !mask_padding {
        return x.rows();
    }
    (0..x.rows())
        .rev()
        .find(|&t| !is_zero(x.row(t)))
        .map_or(0, |t| t + 1)
}

fn run_direction(params: &ParamSet, base: usize, x: &Tensor2D, order: Vec<usize>, hid: usize) -> DirCache {
    let w_ih = params.tensor(base).data();
    let w_hh = params.tensor(base + 1).data();
    let bias = params.tensor(base + 2).data();
    let steps = order.len();
    let mut cache = DirCache {
        order,
        gates: vec![0.0; steps * 4 * hid],
        c: vec![0.0; steps * hid],
        tanh_c: vec![0.0; steps * hid],
        h: vec![0.0; steps * hid],
    };
    let zeros = vec![0.0; hid];
    for s in 0..steps {
        let t = cache.order[s];
        let (h_prev, c_prev) = if s == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &cache.h[(s - 1) * hid..s * hid],
                &cache.c[(s - 1) * hid..s * hid],
            )
        };
        let mut a = bias.to_vec();
        let xt = x.row(t);
        if !is_zero(xt) {
            matvec_acc(w_ih, xt, &mut a);
        }
        matvec_acc(w_hh, h_prev, &mut a);
        let (ai, rest) = a.split_at_mut(hid);
        let (af, rest) = rest.split_at_mut(hid);
        let (ag, ao) = rest.split_at_mut(hid);
        let mut c = vec![0.0; hid];
        let mut tc = vec![0.0; hid];
        let mut h = vec![0.0; hid];
        for j in 0..hid {
            ai[j] = sigmoid(ai[j]);
            af[j] = sigmoid(af[j]);
            ag[j] = ag[j].tanh();
            ao[j] = sigmoid(ao[j]);
            c[j] = af[j] * c_prev[j] + ai[j] * ag[j];
            tc[j] = c[j].tanh();
            h[j] = ao[j] * tc[j];
        }
        cache.gates[s * 4 * hid..(s + 1) * 4 * hid].copy_from_slice(&a);
        cache.c[s * hid..(s + 1) * hid].copy_from_slice(&c);
        cache.tanh_c[s * hid..(s + 1) * hid].copy_from_slice(&tc);
        cache.h[s * hid..(s + 1) * hid].copy_from_slice(&h);
    }
    cache
}

fn direction_readout(cache: &DirCache, hid: usize, readout: Readout, out: &mut [f64]) {
    let steps = cache.order.len();
    if steps == 0 {
        return;
    }
    match readout {
        Readout::Final => out.copy_from_slice(&cache.h[(steps - 1) * hid..steps * hid]),
        Readout::Mean => {
            for s in 0..steps {
                axpy(out, 1.0 / steps as f64, &cache.h[s * hid..(s + 1) * hid]);
            }
        }
    }
}

pub fn forward(
    params: &ParamSet,
    x: &Tensor2D,
    hid: usize,
    readout: Readout,
    mask_padding: bool,
) -> (Vec<f64>, Cache) {
    let len = effective_len(x, mask_padding);
    let fwd = run_direction(params, FWD, x, (0..len).collect(), hid);
    let bwd = run_direction(params, BWD, x, (0..len).rev().collect(), hid);
    let mut r = vec![0.0; 2 * hid];
    direction_readout(&fwd, hid, readout, &mut r[..hid]);
    direction_readout(&bwd, hid, readout, &mut r[hid..]);
    let mut out = params.tensor(PROJ + 1).data().to_vec();
    matvec_acc(params.tensor(PROJ).data(), &r, &mut out);
    (
        out,
        Cache {
            dirs: [fwd, bwd],
            readout: r,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn backward_direction(
    params: &ParamSet,
    base: usize,
    x: &Tensor2D,
    cache: &DirCache,
    hid: usize,
    readout: Readout,
    dr: &[f64],
    grads: &mut ParamSet,
    mut dx: Option<&mut Tensor2D>,
) {
    let steps = cache.order.len();
    if steps == 0 {
        return;
    }
    let w_ih = params.tensor(base).data();
    let w_hh = params.tensor(base + 1).data();
    let mut dh_next = vec![0.0; hid];
    let mut dc_next = vec![0.0; hid];
    let mut da = vec![0.0; 4 * hid];
    let zeros = vec![0.0; hid];
    for s in (0..steps).rev() {
        let t = cache.order[s];
        let mut dh = std::mem::replace(&mut dh_next, vec![0.0; hid]);
        match readout {
            Readout::Final if s == steps - 1 => axpy(&mut dh, 1.0, dr),
            Readout::Final => {}
            Readout::Mean => axpy(&mut dh, 1.0 / steps as f64, dr),
        }
        let gates = &cache.gates[s * 4 * hid..(s + 1) * 4 * hid];
        let tc = &cache.tanh_c[s * hid..(s + 1) * hid];
        let (c_prev, h_prev) = if s == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &cache.c[(s - 1) * hid..s * hid],
                &cache.h[(s - 1) * hid..s * hid],
            )
        };
        for j in 0..hid {
            let (i, f, g, o) = (gates[j], gates[hid + j], gates[2 * hid + j], gates[3 * hid + j]);
            let d_o = dh[j] * tc[j];
            let dc = dh[j] * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
            dc_next[j] = dc * f;
            da[j] = dc * g * i * (1.0 - i);
            da[hid + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * hid + j] = dc * i * (1.0 - g * g);
            da[3 * hid + j] = d_o * o * (1.0 - o);
        }
        let xt = x.row(t);
        if !is_zero(xt) {
            outer_acc(grads.tensor_mut(base).data_mut(), &da, xt);
        }
        if s > 0 {
            outer_acc(grads.tensor_mut(base + 1).data_mut(), &da, h_prev);
        }
        axpy(grads.tensor_mut(base + 2).data_mut(), 1.0, &da);
        if let Some(dx) = dx.as_deref_mut() {
            matvec_t_acc(w_ih, &da, dx.row_mut(t));
        }
        if s > 0 {
            matvec_t_acc(w_hh, &da, &mut dh_next);
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn backward(
    params: &ParamSet,
    x: &Tensor2D,
    cache: &Cache,
    hid: usize,
    readout: Readout,
    upstream: &[f64],
    grads: &mut ParamSet,
    mut dx: Option<&mut Tensor2D>,
) {
    outer_acc(grads.tensor_mut(PROJ).data_mut(), upstream, &cache.readout);
    axpy(grads.tensor_mut(PROJ + 1).data_mut(), 1.0, upstream);
    let mut dr = vec![0.0; 2 * hid];
    matvec_t_acc(params.tensor(PROJ).data(), upstream, &mut dr);
    let [fwd, bwd] = &cache.dirs;
    backward_direction(params, FWD, x, fwd, hid, readout, &dr[..hid], grads, dx.as_deref_mut());
    backward_direction(params, BWD, x, bwd, hid, readout, &dr[hid..], grads, dx);
}
