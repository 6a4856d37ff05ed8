//! Gated recurrent unit with a hand-written backward pass.
//!
//! Gate order in the packed parameters is update (z), reset (r), candidate:
//!
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! ñ = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ h + z ⊙ ñ
//! ```
//!
//! `W` is `3H × D`, `U` is `3H × H` and `b` is `3H`.

use crate::numcore::kernels::{affine_into, axpy, matvec_acc, matvec_t_acc, outer_acc, sigmoid};

#[derive(Clone, Copy)]
pub(crate) struct GruWeights<'a> {
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
}

pub(crate) struct GruGrads<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Values saved by the forward pass.
#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn forward(p: GruWeights<'_>, x: Vec<f64>, h_prev: Vec<f64>) -> GruStep {
    let hsz = h_prev.len();
    let mut pre = vec![0.0; 3 * hsz];
    affine_into(p.w, p.b, &x, &mut pre);
    matvec_acc(&p.u[..2 * hsz * hsz], &h_prev, &mut pre[..2 * hsz]);

    let z: Vec<f64> = pre[..hsz].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = pre[hsz..2 * hsz].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(&h_prev).map(|(a, b)| a * b).collect();
    let cand = &mut pre[2 * hsz..];
    matvec_acc(&p.u[2 * hsz * hsz..], &rh, cand);
    let n: Vec<f64> = cand.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hsz).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * n[i]).collect();
    GruStep { x, h_prev, z, r, n, h }
}

/// Backpropagates `dh` through one step, accumulating parameter gradients
/// and adding the input and previous-state gradients into `dx` and
/// `dh_prev`.
pub(crate) fn backward(
    p: GruWeights<'_>,
    step: &GruStep,
    dh: &[f64],
    g: GruGrads<'_>,
    dx: &mut [f64],
    dh_prev: &mut [f64],
) {
    let hsz = dh.len();
    let mut da = vec![0.0; 3 * hsz];
    for i in 0..hsz {
        let (z, n, hp) = (step.z[i], step.n[i], step.h_prev[i]);
        dh_prev[i] += dh[i] * (1.0 - z);
        da[i] = dh[i] * (n - hp) * z * (1.0 - z);
        da[2 * hsz + i] = dh[i] * z * (1.0 - n * n);
    }
    let rh: Vec<f64> = step.r.iter().zip(&step.h_prev).map(|(a, b)| a * b).collect();
    let (u_zr, u_n) = p.u.split_at(2 * hsz * hsz);
    let (gu_zr, gu_n) = g.u.split_at_mut(2 * hsz * hsz);
    outer_acc(&da[2 * hsz..], &rh, gu_n);
    let mut drh = vec![0.0; hsz];
    matvec_t_acc(u_n, &da[2 * hsz..], &mut drh);
    for i in 0..hsz {
        let r = step.r[i];
        dh_prev[i] += drh[i] * r;
        da[hsz + i] = drh[i] * step.h_prev[i] * r * (1.0 - r);
    }
    outer_acc(&da, &step.x, g.w);
    axpy(1.0, &da, g.b);
    matvec_t_acc(p.w, &da, dx);
    outer_acc(&da[..2 * hsz], &step.h_prev, gu_zr);
    matvec_t_acc(u_zr, &da[..2 * hsz], dh_prev);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng::seeded;
    use rand::Rng;

    fn random(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect()
    }

    #[test]
    fn zero_parameters_keep_zero_state() {
        let (h, d) = (3, 2);
        let w = vec![0.0; 3 * h * d];
        let u = vec![0.0; 3 * h * h];
        let b = vec![0.0; 3 * h];
        let s = forward(GruWeights { w: &w, u: &u, b: &b }, vec![1.0, -1.0], vec![0.0; h]);
        assert_eq!(s.h, vec![0.0; h]);
        assert!(s.z.iter().all(|&z| z == 0.5));
    }

    #[test]
    fn new_state_is_convex_combination() {
        let mut rng = seeded(5);
        let (h, d) = (6, 4);
        let (w, u, b) = (
            random(3 * h * d, &mut rng),
            random(3 * h * h, &mut rng),
            random(3 * h, &mut rng),
        );
        let s = forward(
            GruWeights { w: &w, u: &u, b: &b },
            random(d, &mut rng),
            random(h, &mut rng),
        );
        for i in 0..h {
            let (lo, hi) = (s.h_prev[i].min(s.n[i]), s.h_prev[i].max(s.n[i]));
            assert!(s.h[i] >= lo - 1e-15 && s.h[i] <= hi + 1e-15);
        }
    }

    #[test]
    fn cell_gradient_matches_finite_differences() {
        // loss = Σ c_i h'_i for a fixed random c.
        let mut rng = seeded(17);
        let (h, d) = (5, 3);
        let mut params = [
            random(3 * h * d, &mut rng),
            random(3 * h * h, &mut rng),
            random(3 * h, &mut rng),
        ];
        let mut x = random(d, &mut rng);
        let mut hp = random(h, &mut rng);
        let c = random(h, &mut rng);
        let loss = |p: &[Vec<f64>; 3], x: &[f64], hp: &[f64]| -> f64 {
            let s = forward(
                GruWeights {
                    w: &p[0],
                    u: &p[1],
                    b: &p[2],
                },
                x.to_vec(),
                hp.to_vec(),
            );
            s.h.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let step = forward(
            GruWeights {
                w: &params[0],
                u: &params[1],
                b: &params[2],
            },
            x.clone(),
            hp.clone(),
        );
        let mut gw = vec![0.0; params[0].len()];
        let mut gu = vec![0.0; params[1].len()];
        let mut gb = vec![0.0; params[2].len()];
        let mut dx = vec![0.0; d];
        let mut dhp = vec![0.0; h];
        backward(
            GruWeights {
                w: &params[0],
                u: &params[1],
                b: &params[2],
            },
            &step,
            &c,
            GruGrads {
                w: &mut gw,
                u: &mut gu,
                b: &mut gb,
            },
            &mut dx,
            &mut dhp,
        );
        let eps = 1e-5;
        let mut worst = 0.0f64;
        let analytic = [gw, gu, gb];
        for t in 0..3 {
            for i in 0..params[t].len() {
                let orig = params[t][i];
                params[t][i] = orig + eps;
                let plus = loss(&params, &x, &hp);
                params[t][i] = orig - eps;
                let minus = loss(&params, &x, &hp);
                params[t][i] = orig;
                let num = (plus - minus) / (2.0 * eps);
                worst = worst.max(crate::numcore::relative_error(analytic[t][i], num));
            }
        }
        for i in 0..d {
            let orig = x[i];
            x[i] = orig + eps;
            let plus = loss(&params, &x, &hp);
            x[i] = orig - eps;
            let minus = loss(&params, &x, &hp);
            x[i] = orig;
            worst = worst.max(crate::numcore::relative_error(dx[i], (plus - minus) / (2.0 * eps)));
        }
        for i in 0..h {
            let orig = hp[i];
            hp[i] = orig + eps;
            let plus = loss(&params, &x, &hp);
            hp[i] = orig - eps;
            let minus = loss(&params, &x, &hp);
            hp[i] = orig;
            worst = worst.max(crate::numcore::relative_error(dhp[i], (plus - minus) / (2.0 * eps)));
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
