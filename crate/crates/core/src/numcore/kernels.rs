//! Slice-level primitives used on the hot paths of the recurrent layers.
//!
//! Matrices are row-major `rows × cols` slices. The reductions keep four
//! independent accumulators so the optimizer can vectorize them; summation
//! order is fixed, so results are bit-reproducible.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[i] = bias[i] + Σ_j w[i, j] x[j]`.
#[inline]
pub fn affine_into(w: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (i, o) in out.iter_mut().enumerate() {
        *o = bias[i] + dot(&w[i * cols..(i + 1) * cols], x);
    }
}

/// `out[i] += Σ_j w[i, j] x[j]`.
#[inline]
pub fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(&w[i * cols..(i + 1) * cols], x);
    }
}

/// `out[j] += Σ_i w[i, j] dy[i]` (transposed product).
#[inline]
pub fn matvec_t_acc(w: &[f64], dy: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), dy.len() * cols);
    for (i, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, &w[i * cols..(i + 1) * cols], out);
        }
    }
}

/// `dw[i, j] += dy[i] x[j]`.
#[inline]
pub fn outer_acc(dy: &[f64], x: &[f64], dw: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(dw.len(), dy.len() * cols);
    for (i, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, x, &mut dw[i * cols..(i + 1) * cols]);
        }
    }
}

/// `y += a x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn add_into(x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax with max subtraction.
pub fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    x.iter_mut().for_each(|v| *v *= inv);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_for_odd_lengths() {
        for n in 0..13 {
            let a: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 - 1.0).collect();
            let b: Vec<f64> = (0..n).map(|i| 2.0 - i as f64).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_product_agrees_with_explicit_transpose() {
        // 2x3 matrix
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let dy = [1.0, -1.0];
        let mut out = [0.0; 3];
        matvec_t_acc(&w, &dy, &mut out);
        assert_eq!(out, [-3.0, -3.0, -3.0]);
    }
}
