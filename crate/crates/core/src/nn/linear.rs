use super::ops::{matvec_acc, matvec_t_acc, outer_acc};
use super::{ParamSet, Tensor2D};

pub const WEIGHT: usize = 0;

pub fn forward(params: &ParamSet, x: &Tensor2D, out_dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_dim];
    matvec_acc(params.tensor(WEIGHT).data(), x.data(), &mut out);
    out
}

pub fn backward(
    params: &ParamSet,
    x: &Tensor2D,
    upstream: &[f64],
    grads: &mut ParamSet,
    dx: Option<&mut Tensor2D>,
) {
    outer_acc(grads.tensor_mut(WEIGHT).data_mut(), upstream, x.data());
    if let Some(dx) = dx {
        matvec_t_acc(params.tensor(WEIGHT).data(), upstream, dx.data_mut());
    }
}
