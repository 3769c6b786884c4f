use crate::util::{axpy, dot};

/// `out += W x` for a row-major `W` with `x.len()` columns.
#[inline]
pub fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ y` for a row-major `W` with `out.len()` columns.
#[inline]
pub fn matvec_t_acc(w: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&yr, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yr != 0.0 {
            axpy(out, yr, row);
        }
    }
}

/// `G += a bᵀ` for a row-major `G` with `b.len()` columns.
#[inline]
pub fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (&ar, row) in a.iter().zip(g.chunks_exact_mut(cols)) {
        if ar != 0.0 {
            axpy(row, ar, b);
        }
    }
}

pub fn is_zero(x: &[f64]) -> bool {
    x.iter().all(|&v| v == 0.0)
}
