//! Side lengths of staircase polygons via the Schwarz-Christoffel map.
//!
//! The conformal map from the upper half-plane onto the staircase polygon
//! `L(a,b,c,p,q)` sends prevertices
//! `∞, -1, ξ₁-s, ξ₁, ξ₂-t, ξ₂, ξ₃, 1` to the polygon corners. Each polygon
//! side is `J` times the magnitude integral of
//!
//! ```text
//! g(x) = √(x-η₁)√(x-η₂) / (√(x-1)√(x+1)√(x-ξ₁)√(x-ξ₂)√(x-ξ₃)),
//! η₁ = ξ₁-s,  η₂ = ξ₂-t,
//! ```
//!
//! over the real interval between consecutive prevertices. The complex
//! prefactors that make the displayed side integrals real are equivalent to
//! taking magnitudes; `g` has constant phase (an integer power of i) on each
//! interval, which `side_integrals` asserts by sampling.

mod integrand;
mod solve;

pub use solve::{solve_accessory, SolveResult};
#[allow(unused_imports)]
pub(crate) use solve::{damped_newton, solve_accessory_generic, SolvePrecision, SolveResultR};

use crate::dd::Dd;
use crate::quad::QuadCtx;
use crate::real::Real;
use integrand::{build_interval, merged_points, phase_index, Interval};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prevertex data: `ξ₁ < ξ₂ < ξ₃` in `(-1, 1)` plus the gaps `s, t ≥ 0`
/// that pull the two reflex-corner prevertices off `ξ₁, ξ₂`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AccessoryConfig {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
    pub s: f64,
    pub t: f64,
}

/// Same data carried at generic precision (used by the extended pipeline).
#[derive(Clone, Copy, Debug)]
pub struct AccessoryConfigR<R: Real> {
    pub xi1: R,
    pub xi2: R,
    pub xi3: R,
    pub s: R,
    pub t: R,
}

impl AccessoryConfig {
    pub fn new(xi1: f64, xi2: f64, xi3: f64, s: f64, t: f64) -> AccessoryConfig {
        AccessoryConfig { xi1, xi2, xi3, s, t }
    }

    pub fn lift<R: Real>(&self) -> AccessoryConfigR<R> {
        AccessoryConfigR {
            xi1: R::from_f64(self.xi1),
            xi2: R::from_f64(self.xi2),
            xi3: R::from_f64(self.xi3),
            s: R::from_f64(self.s),
            t: R::from_f64(self.t),
        }
    }

    /// Ordering chain with minimum separation `eps` on the strict gaps.
    pub fn validate(&self, eps: f64) -> Result<(), ScError> {
        let AccessoryConfig { xi1, xi2, xi3, s, t } = *self;
        let eta1 = xi1 - s;
        let eta2 = xi2 - t;
        let checks = [
            (s >= 0.0, "s must be >= 0"),
            (t >= 0.0, "t must be >= 0"),
            (eta1 - (-1.0) >= eps, "eta1 = xi1 - s must exceed -1"),
            (eta2 - xi1 >= eps, "xi2 - t must exceed xi1"),
            (xi3 - xi2 >= eps, "xi3 must exceed xi2"),
            (1.0 - xi3 >= eps, "xi3 must be below 1"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(ScError::InvalidConfig(msg.into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Standard,
    Extended,
}

/// Tolerances and precision for quadrature and the accessory solver.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Settings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub precision: Precision,
    pub solver_tol: f64,
    pub solver_max_iters: u32,
    pub eps_sep: f64,
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_depth: 48,
            precision: Precision::Standard,
            solver_tol: 1e-8,
            solver_max_iters: 80,
            eps_sep: 1e-12,
        }
    }
}

impl Settings {
    pub fn extended() -> Settings {
        Settings {
            rel_tol: 1e-23,
            abs_tol: 1e-26,
            max_depth: 64,
            precision: Precision::Extended,
            solver_tol: 1e-18,
            ..Settings::default()
        }
    }

    pub fn gauss_order(&self) -> usize {
        match self.precision {
            Precision::Standard => 15,
            Precision::Extended => 40,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScError {
    #[error("invalid accessory configuration: {0}")]
    InvalidConfig(String),
    #[error("quadrature tolerance not met (error estimate {estimate:e})")]
    ToleranceNotMet { estimate: f64 },
    #[error("accessory solve did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: u32 },
    #[error("infeasible side-length target: {0}")]
    InfeasibleTarget(String),
    #[error("extended precision unavailable: {0}")]
    ExtendedUnavailable(String),
}

/// The six prevertex-interval integrals plus the two closure integrals,
/// all as magnitudes (the `J` factor is not applied).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegralBundle {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub q: f64,
    pub jinv: f64,
    /// `J·∫(ξ₃,1)|g| - (a+b+c)`: left polygon side against the step heights
    pub closure_vertical: f64,
    /// `J·∫(-1,η₁)|g| - (1-p-q)`: top-right run against the base remainder
    pub closure_horizontal: f64,
    /// worst per-integral error estimate (after multiplying by `J`)
    pub error_estimate: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct BundleR<R: Real> {
    pub a: R,
    pub b: R,
    pub c: R,
    pub p: R,
    pub q: R,
    pub jinv: R,
    pub d_left: R,
    pub d_right: R,
    pub error: R,
    pub converged: bool,
}

/// Polygon side lengths `(a, b, c, p, q)` with the base edge normalized to 1.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SideLengths {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub q: f64,
}

impl SideLengths {
    pub fn new(a: f64, b: f64, c: f64, p: f64, q: f64) -> SideLengths {
        SideLengths { a, b, c, p, q }
    }

    pub fn validate(&self) -> Result<(), ScError> {
        if !(self.a > 0.0) {
            return Err(ScError::InfeasibleTarget("a must be positive".into()));
        }
        if self.b < 0.0 || self.c < 0.0 {
            return Err(ScError::InfeasibleTarget("b, c must be nonnegative".into()));
        }
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(ScError::InfeasibleTarget("p, q must be positive".into()));
        }
        if self.p + self.q >= 1.0 {
            return Err(ScError::InfeasibleTarget(format!(
                "p + q = {} must stay below 1",
                self.p + self.q
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ForwardResult {
    pub sides: SideLengths,
    pub bundle: IntegralBundle,
}

pub(crate) struct ScCtx<R: Real> {
    pub quad: QuadCtx<R>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl<R: Real> ScCtx<R> {
    pub fn new(settings: &Settings) -> ScCtx<R> {
        ScCtx {
            quad: QuadCtx::new(settings.gauss_order(), settings.max_depth),
            rel_tol: settings.rel_tol,
            abs_tol: settings.abs_tol,
        }
    }
}

pub(crate) fn bundle_r<R: Real>(cfg: &AccessoryConfigR<R>, ctx: &ScCtx<R>) -> BundleR<R> {
    let pts = merged_points(cfg);
    assert_phase_pattern(&pts);

    let mut worst = R::zero();
    let mut converged = true;
    let mut run = |iv: Interval| -> R {
        match build_interval(cfg, &pts, iv) {
            None => R::zero(),
            Some(si) => {
                let r = si.integrate(&ctx.quad, ctx.rel_tol, ctx.abs_tol);
                worst = worst.max(r.error);
                converged &= r.converged;
                r.value
            }
        }
    };

    let a = run(Interval::TailLeft);
    let d_left = run(Interval::LeftRun);
    let b = run(Interval::StepB);
    let q = run(Interval::SideQ);
    let c = run(Interval::StepC);
    let p = run(Interval::SideP);
    let d_right = run(Interval::RightRun);
    let jinv = run(Interval::TailRight);

    BundleR {
        a,
        b,
        c,
        p,
        q,
        jinv,
        d_left,
        d_right,
        error: worst,
        converged,
    }
}

/// Constant-phase sanity check: on every open interval between consecutive
/// singular points, the integer `Σ e_i` over points to the right of x is
/// constant, i.e. the integrand's phase is a fixed power of i there.
fn assert_phase_pattern<R: Real>(pts: &[(R, i32)]) {
    for w in 0..=pts.len() {
        let lo = if w == 0 {
            R::from_f64(-1e9)
        } else {
            pts[w - 1].0
        };
        let hi = if w == pts.len() {
            R::from_f64(1e9)
        } else {
            pts[w].0
        };
        if !(hi > lo) {
            continue;
        }
        let mut seen: Option<i32> = None;
        for frac in [0.25, 0.5, 0.75] {
            let x = lo + (hi - lo) * R::from_f64(frac);
            let idx = phase_index(pts, x);
            match seen {
                None => seen = Some(idx),
                Some(prev) => assert_eq!(
                    prev, idx,
                    "integrand phase varies inside a prevertex interval"
                ),
            }
        }
    }
}

fn finalize(bundle: BundleR<f64>) -> IntegralBundle {
    let j = 1.0 / bundle.jinv;
    let (a, b, c, p, q) = (
        j * bundle.a,
        j * bundle.b,
        j * bundle.c,
        j * bundle.p,
        j * bundle.q,
    );
    IntegralBundle {
        a: bundle.a,
        b: bundle.b,
        c: bundle.c,
        p: bundle.p,
        q: bundle.q,
        jinv: bundle.jinv,
        closure_vertical: j * bundle.d_right - (a + b + c),
        closure_horizontal: j * bundle.d_left - (1.0 - p - q),
        error_estimate: j * bundle.error,
        converged: bundle.converged,
    }
}

/// Evaluate all prevertex-interval integrals for `cfg`.
pub fn side_integrals(cfg: &AccessoryConfig, settings: &Settings) -> Result<IntegralBundle, ScError> {
    cfg.validate(settings.eps_sep)?;
    let bundle = match settings.precision {
        Precision::Standard => {
            let ctx = ScCtx::<f64>::new(settings);
            bundle_r(&cfg.lift::<f64>(), &ctx)
        }
        Precision::Extended => {
            check_extended()?;
            let ctx = ScCtx::<Dd>::new(settings);
            let b = bundle_r(&cfg.lift::<Dd>(), &ctx);
            BundleR {
                a: b.a.to_f64(),
                b: b.b.to_f64(),
                c: b.c.to_f64(),
                p: b.p.to_f64(),
                q: b.q.to_f64(),
                jinv: b.jinv.to_f64(),
                d_left: b.d_left.to_f64(),
                d_right: b.d_right.to_f64(),
                error: b.error.to_f64(),
                converged: b.converged,
            }
        }
    };
    Ok(finalize(bundle))
}

/// Side lengths `(a,b,c,p,q) = J·(A,B,C,P,Q)` plus closure residuals.
pub fn forward(cfg: &AccessoryConfig, settings: &Settings) -> Result<ForwardResult, ScError> {
    let bundle = side_integrals(cfg, settings)?;
    let j = 1.0 / bundle.jinv;
    Ok(ForwardResult {
        sides: SideLengths {
            a: j * bundle.a,
            b: j * bundle.b,
            c: j * bundle.c,
            p: j * bundle.p,
            q: j * bundle.q,
        },
        bundle,
    })
}

pub(crate) fn forward_r<R: Real>(cfg: &AccessoryConfigR<R>, ctx: &ScCtx<R>) -> (SideLengthsR<R>, BundleR<R>) {
    let bundle = bundle_r(cfg, ctx);
    let j = R::one() / bundle.jinv;
    (
        SideLengthsR {
            a: j * bundle.a,
            b: j * bundle.b,
            c: j * bundle.c,
            p: j * bundle.p,
            q: j * bundle.q,
        },
        bundle,
    )
}

#[derive(Clone, Copy, Debug)]
pub struct SideLengthsR<R: Real> {
    pub a: R,
    pub b: R,
    pub c: R,
    pub p: R,
    pub q: R,
}

/// The positive constants `P = J(0,0)/(2√(1-ξ₂)√(1+ξ₂)√(ξ₃-ξ₂))` and
/// `Q = J(0,0)/(2√(1-ξ₁)√(1+ξ₁)√(ξ₃-ξ₁))` that govern the leading
/// behaviour of every small-`(s,t)` expansion of the side lengths.
pub fn constants_pq(base: &AccessoryConfig, settings: &Settings) -> Result<(f64, f64), ScError> {
    if base.s != 0.0 || base.t != 0.0 {
        return Err(ScError::InvalidConfig(
            "constants require the undeformed configuration (s = t = 0)".into(),
        ));
    }
    let bundle = side_integrals(base, settings)?;
    let j = 1.0 / bundle.jinv;
    let p_const = j
        / (2.0 * (1.0 - base.xi2).sqrt() * (1.0 + base.xi2).sqrt() * (base.xi3 - base.xi2).sqrt());
    let q_const = j
        / (2.0 * (1.0 - base.xi1).sqrt() * (1.0 + base.xi1).sqrt() * (base.xi3 - base.xi1).sqrt());
    Ok((p_const, q_const))
}

/// Extended precision requires a fused multiply-add; refuse to run (rather
/// than silently degrade) if the platform's `mul_add` double-rounds.
pub fn check_extended() -> Result<(), ScError> {
    if Dd::self_check() {
        Ok(())
    } else {
        Err(ScError::ExtendedUnavailable(
            "platform mul_add is not fused; double-double arithmetic would degrade".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> AccessoryConfig {
        AccessoryConfig::new(-0.5, 0.0, 0.5, 0.0, 0.0)
    }

    #[test]
    fn degenerate_gaps_give_exact_zero() {
        let bundle = side_integrals(&base(), &Settings::default()).unwrap();
        assert_eq!(bundle.b, 0.0);
        assert_eq!(bundle.c, 0.0);
    }

    #[test]
    fn ordering_violations_rejected() {
        let cfg = AccessoryConfig::new(0.5, 0.0, -0.5, 0.0, 0.0);
        assert!(cfg.validate(1e-12).is_err());
        let cfg = AccessoryConfig::new(-0.5, 0.0, 0.5, 0.6, 0.0); // eta1 below -1
        assert!(cfg.validate(1e-12).is_err());
        let cfg = AccessoryConfig::new(-0.5, 0.0, 0.5, 0.0, 0.6); // eta2 below xi1
        assert!(cfg.validate(1e-12).is_err());
    }

    #[test]
    fn forward_of_symmetric_base() {
        // golden values from an independent high-precision evaluation
        let fw = forward(&base(), &Settings::default()).unwrap();
        assert!((fw.sides.a - 0.7817009613480558).abs() < 1e-11);
        assert!((fw.sides.p - 0.5).abs() < 1e-11);
        assert!((fw.sides.q - 0.20036294702783367).abs() < 1e-11);
        assert!(fw.bundle.closure_vertical.abs() < 1e-10);
        assert!(fw.bundle.closure_horizontal.abs() < 1e-10);
    }

    #[test]
    fn constants_positive_and_symmetric_ratio() {
        let (p_const, q_const) = constants_pq(&base(), &Settings::default()).unwrap();
        assert!(p_const > 0.0 && q_const > 0.0);
        // at (-ξ, 0, ξ) the two closed forms give Q/P = 1/√(2(1-ξ²))
        let xi = 0.5f64;
        let expect = 1.0 / (2.0 * (1.0 - xi * xi)).sqrt();
        assert!((q_const / p_const - expect).abs() < 1e-10);
    }
}
