//! Shared test support: an independent tanh-sinh (double-exponential)
//! quadrature oracle for the prevertex-interval integrals.
//!
//! Deliberately a separate code path from the engine under test: no
//! endpoint substitution, no interval rescaling — the double-exponential
//! transform absorbs inverse-square-root endpoints on its own. Golden
//! values asserted elsewhere were cross-checked against a 50-digit
//! evaluation of the same integrals.

/// Integrand described by its singular points: `∏ |x - p_i|^(e_i/2)`.
/// Endpoint distances are supplied separately so the evaluation near an
/// endpoint does not cancel.
#[derive(Clone)]
pub struct PowerProduct {
    pub points: Vec<(f64, i32)>,
}

impl PowerProduct {
    /// Evaluate using exact distances to the interval ends [a, b] where a
    /// point coincides with an end.
    fn eval(&self, x: f64, a: f64, dist_a: f64, b: f64, dist_b: f64) -> f64 {
        let mut acc = 1.0;
        for &(p, e) in &self.points {
            let d = if p == a {
                dist_a
            } else if p == b {
                dist_b
            } else {
                (x - p).abs()
            };
            acc *= d.sqrt().powi(e);
        }
        acc
    }
}

/// Tanh-sinh quadrature of a power-product integrand over `[a, b]`.
pub fn tanh_sinh(f: &PowerProduct, a: f64, b: f64, levels: u32) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let tmax = 6.1f64;
    let eval = |u: f64| -> f64 {
        let s = std::f64::consts::FRAC_PI_2 * u.sinh();
        // distances to the two endpoints computed without cancellation:
        // 1 ∓ tanh(s) = 2 e^(∓2s) / (1 + e^(∓2s))
        let em = (-2.0 * s).exp();
        let one_minus = 2.0 * em / (1.0 + em);
        let ep = (2.0 * s).exp();
        let one_plus = 2.0 * ep / (1.0 + ep);
        let t = s.tanh();
        let x = c + r * t;
        let dist_b = r * one_minus;
        let dist_a = r * one_plus;
        let w = std::f64::consts::FRAC_PI_2 * u.cosh() / (s.cosh() * s.cosh());
        let v = f.eval(x, a, dist_a, b, dist_b) * w * r;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut h = 1.0f64;
    let mut total = {
        let mut acc = eval(0.0);
        let mut k = 1u64;
        while (k as f64) * h <= tmax {
            let u = (k as f64) * h;
            acc += eval(u) + eval(-u);
            k += 1;
        }
        acc * h
    };
    for _ in 0..levels {
        h *= 0.5;
        let mut new = 0.0;
        let mut k = 1u64;
        // only the odd multiples are new at this level
        while (k as f64) * h <= tmax {
            let u = (k as f64) * h;
            new += eval(u) + eval(-u);
            k += 2;
        }
        total = total * 0.5 + new * h;
    }
    total
}

/// All prevertex-interval integrals of the side-length integrand, by the
/// oracle path. Returns (A, B, C, P, Q, 1/J, left run, right run).
#[allow(clippy::too_many_arguments)]
pub fn oracle_bundle(xi1: f64, xi2: f64, xi3: f64, s: f64, t: f64) -> [f64; 8] {
    let eta1 = xi1 - s;
    let eta2 = xi2 - t;
    let mut pts = vec![(-1.0, -1), (1.0, -1), (xi3, -1)];
    if s > 0.0 {
        pts.push((xi1, -1));
        pts.push((eta1, 1));
    }
    if t > 0.0 {
        pts.push((xi2, -1));
        pts.push((eta2, 1));
    }
    let g = PowerProduct { points: pts };
    let finite = |a: f64, b: f64| tanh_sinh(&g, a, b, 11);

    // tails via x = ±1/u with the transformed power product in u:
    // |g(±1/u)|/u² = u^(-1/2) ∏_{v≠0} |v|^(e/2) |u - 1/(±v)|^(e/2)
    let tail = |sign: f64| -> f64 {
        let mut tp = vec![(0.0, -1)];
        let mut scale = 1.0f64;
        for &(v, e) in &g.points {
            if v == 0.0 {
                continue;
            }
            scale *= v.abs().sqrt().powi(e);
            tp.push((1.0 / (sign * v), e));
        }
        let tg = PowerProduct { points: tp };
        scale * tanh_sinh(&tg, 0.0, 1.0, 11)
    };

    let a_int = tail(-1.0);
    let jinv = tail(1.0);
    let d_left = finite(-1.0, eta1);
    let b_int = if s > 0.0 { finite(eta1, xi1) } else { 0.0 };
    let q_int = finite(xi1, eta2);
    let c_int = if t > 0.0 { finite(eta2, xi2) } else { 0.0 };
    let p_int = finite(xi2, xi3);
    let d_right = finite(xi3, 1.0);
    [a_int, b_int, c_int, p_int, q_int, jinv, d_left, d_right]
}
