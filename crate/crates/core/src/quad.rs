//! Adaptive Gauss-Legendre quadrature for integrands whose only
//! singularities are inverse-square-root (or square-root) endpoint factors.
//!
//! The caller describes an integral over `[0, len]` as a product of factors
//! `|pos - d_i|^(e_i/2)` plus a constant scale. Endpoint singularities are
//! removed by the substitution `pos = w^2` (from the left) and
//! `pos = len - w^2` (from the right), after which the transformed integrand
//! is analytic on the closed half-intervals and plain adaptive bisection
//! with an embedded pair of Gauss rules converges fast.
//!
//! Factor offsets are stored twice, once per endpoint frame, so that
//! distances to nearby singular points are formed from exact parameter
//! differences instead of a catastrophic subtraction.

use crate::real::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub struct GaussRule<R: Real> {
    pub nodes: Vec<R>,
    pub weights: Vec<R>,
}

impl<R: Real> GaussRule<R> {
    pub fn new(n: usize) -> GaussRule<R> {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let two = R::from_i32(2);
        for i in 0..n {
            let seed = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut x = R::from_f64(seed);
            let mut dp = R::one();
            // Newton on P_n; converges in a handful of steps from the cosine seed.
            for _ in 0..40 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / dp;
                x = x - dx;
                if dx.abs() <= R::epsilon() * (R::from_f64(4.0) * x.abs() + R::from_f64(1.0)) {
                    break;
                }
            }
            let w = two / ((R::one() - x * x) * dp * dp);
            nodes.push(x);
            weights.push(w);
        }
        GaussRule { nodes, weights }
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre<R: Real>(n: usize, x: R) -> (R, R) {
    let mut p0 = R::one();
    let mut p1 = x;
    for k in 1..n {
        let kf = R::from_i32(k as i32);
        let a = (R::from_i32(2 * k as i32 + 1) * x * p1 - kf * p0) / (kf + R::one());
        p0 = p1;
        p1 = a;
    }
    if n == 0 {
        return (p0, R::zero());
    }
    let d = R::from_i32(n as i32) * (x * p1 - p0) / (x * x - R::one());
    (p1, d)
}

/// Embedded pair of rules reused across every integral of one evaluation.
pub struct QuadCtx<R: Real> {
    low: GaussRule<R>,
    high: GaussRule<R>,
    pub max_depth: u32,
}

impl<R: Real> QuadCtx<R> {
    pub fn new(order: usize, max_depth: u32) -> QuadCtx<R> {
        QuadCtx {
            low: GaussRule::new(order),
            high: GaussRule::new(2 * order),
            max_depth,
        }
    }

    fn panel<F: Fn(R) -> R>(&self, f: &F, a: R, b: R) -> (R, R) {
        let half = R::from_f64(0.5);
        let c = (a + b) * half;
        let h = (b - a) * half;
        let mut lo = R::zero();
        for (x, w) in self.low.nodes.iter().zip(&self.low.weights) {
            lo = lo + *w * f(c + h * *x);
        }
        let mut hi = R::zero();
        for (x, w) in self.high.nodes.iter().zip(&self.high.weights) {
            hi = hi + *w * f(c + h * *x);
        }
        (hi * h, (hi - lo).abs() * h.abs())
    }

    /// Adaptive bisection; returns (value, error estimate, converged).
    pub fn adaptive<F: Fn(R) -> R>(&self, f: &F, a: R, b: R, tol: R) -> (R, R, bool) {
        self.adapt_rec(f, a, b, tol, self.max_depth)
    }

    fn adapt_rec<F: Fn(R) -> R>(&self, f: &F, a: R, b: R, tol: R, depth: u32) -> (R, R, bool) {
        let (val, err) = self.panel(f, a, b);
        if err <= tol {
            return (val, err, true);
        }
        if depth == 0 {
            return (val, err, false);
        }
        let m = (a + b) * R::from_f64(0.5);
        let half_tol = tol * R::from_f64(0.5);
        let (v1, e1, c1) = self.adapt_rec(f, a, m, half_tol, depth - 1);
        let (v2, e2, c2) = self.adapt_rec(f, m, b, half_tol, depth - 1);
        (v1 + v2, e1 + e2, c1 && c2)
    }
}

/// One singular factor `|pos - offset|^(half_exp / 2)`.
#[derive(Clone, Copy, Debug)]
pub struct Factor<R: Real> {
    pub offset: R,
    pub half_exp: i32,
}

/// `scale * ∫_0^len ∏ |pos - d_i|^(e_i/2) d pos`, with the factor offsets
/// expressed in both endpoint frames.
pub struct SingularInterval<R: Real> {
    pub len: R,
    pub scale: R,
    /// offsets relative to the left endpoint (pos measured from the left)
    pub from_left: Vec<Factor<R>>,
    /// offsets relative to the right endpoint (pos measured from the right)
    pub from_right: Vec<Factor<R>>,
}

fn eval_product<R: Real>(factors: &[Factor<R>], pos: R) -> R {
    let mut acc = R::one();
    for f in factors {
        let d = (pos - f.offset).abs();
        let root = d.sqrt();
        acc = acc * root.powi(f.half_exp);
    }
    acc
}

pub struct IntegralResult<R> {
    pub value: R,
    pub error: R,
    pub converged: bool,
}

impl<R: Real> SingularInterval<R> {
    /// Integrate with the u^2 endpoint substitution on each half.
    pub fn integrate(&self, ctx: &QuadCtx<R>, rel_tol: f64, abs_tol: f64) -> IntegralResult<R> {
        let half = self.len * R::from_f64(0.5);
        if half <= R::zero() {
            return IntegralResult {
                value: R::zero(),
                error: R::zero(),
                converged: true,
            };
        }
        let wmax = half.sqrt();
        let two = R::from_i32(2);

        let left = |w: R| eval_product(&self.from_left, w * w) * two * w;
        let right = |w: R| eval_product(&self.from_right, w * w) * two * w;

        // Probe pass fixes the absolute tolerance relative to the magnitude.
        let (rough_l, _) = ctx.panel(&left, R::zero(), wmax);
        let (rough_r, _) = ctx.panel(&right, R::zero(), wmax);
        let rough = (rough_l.abs() + rough_r.abs()) * self.scale.abs();
        let tol_each = (R::from_f64(rel_tol) * rough)
            .max(R::from_f64(abs_tol) / self.scale.abs().max(R::epsilon()))
            * R::from_f64(0.5);

        let (vl, el, cl) = ctx.adaptive(&left, R::zero(), wmax, tol_each);
        let (vr, er, cr) = ctx.adaptive(&right, R::zero(), wmax, tol_each);
        IntegralResult {
            value: (vl + vr) * self.scale,
            error: (el + er) * self.scale.abs(),
            converged: cl && cr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval_pow(len: f64, e_left: i32) -> SingularInterval<f64> {
        SingularInterval {
            len,
            scale: 1.0,
            from_left: vec![Factor {
                offset: 0.0,
                half_exp: e_left,
            }],
            from_right: vec![Factor {
                offset: len,
                half_exp: e_left,
            }],
        }
    }

    #[test]
    fn inverse_sqrt_endpoint() {
        // ∫_0^1 x^(-1/2) dx = 2
        let ctx = QuadCtx::new(15, 40);
        let r = interval_pow(1.0, -1).integrate(&ctx, 1e-13, 1e-15);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-12, "got {}", r.value);
    }

    #[test]
    fn sqrt_endpoint() {
        // ∫_0^1 x^(1/2) dx = 2/3
        let ctx = QuadCtx::new(15, 40);
        let r = interval_pow(1.0, 1).integrate(&ctx, 1e-13, 1e-15);
        assert!(r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12, "got {}", r.value);
    }

    #[test]
    fn beta_like_product() {
        // ∫_0^1 x^(-1/2) (1-x)^(-1/2) dx = pi
        let ctx = QuadCtx::new(15, 40);
        let iv = SingularInterval {
            len: 1.0,
            scale: 1.0,
            from_left: vec![
                Factor { offset: 0.0, half_exp: -1 },
                Factor { offset: 1.0, half_exp: -1 },
            ],
            from_right: vec![
                Factor { offset: 1.0, half_exp: -1 },
                Factor { offset: 0.0, half_exp: -1 },
            ],
        };
        let r = iv.integrate(&ctx, 1e-13, 1e-15);
        assert!((r.value - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn dd_precision_beats_f64() {
        use crate::dd::Dd;
        let ctx = QuadCtx::<Dd>::new(40, 60);
        let iv = SingularInterval {
            len: Dd::from_f64(1.0),
            scale: Dd::ONE,
            from_left: vec![Factor {
                offset: Dd::ZERO,
                half_exp: -1,
            }],
            from_right: vec![Factor {
                offset: Dd::ONE,
                half_exp: -1,
            }],
        };
        let r = iv.integrate(&ctx, 1e-25, 1e-28);
        let err = (r.value - Dd::from_f64(2.0)).abs();
        assert!(err.to_f64() < 1e-24, "err {:?}", err);
    }
}
