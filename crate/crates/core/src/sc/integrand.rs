//! Assembly of the prevertex-interval integrals.
//!
//! Distances from an evaluation point to each singular point are formed
//! from exact parameter differences: when a singular point coincides with
//! an interval endpoint the stored offset is exactly `0`, `s`, or `t`,
//! never the difference of two nearly equal coordinates. Coincident points
//! (`s = 0` or `t = 0`) merge and their square-root factors cancel exactly.

use super::AccessoryConfigR;
use crate::quad::{Factor, SingularInterval};
use crate::real::Real;

/// Singular points of the integrand, in increasing order on the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pt {
    MinusOne,
    Eta1,
    Xi1,
    Eta2,
    Xi2,
    Xi3,
    PlusOne,
}

const ALL: [Pt; 7] = [
    Pt::MinusOne,
    Pt::Eta1,
    Pt::Xi1,
    Pt::Eta2,
    Pt::Xi2,
    Pt::Xi3,
    Pt::PlusOne,
];

fn half_exp(p: Pt) -> i32 {
    match p {
        Pt::Eta1 | Pt::Eta2 => 1,
        _ => -1,
    }
}

/// `(anchor coordinate, subtracted gap)` so that `pos = anchor - gap`.
fn decompose<R: Real>(cfg: &AccessoryConfigR<R>, p: Pt) -> (R, R) {
    match p {
        Pt::MinusOne => (-R::one(), R::zero()),
        Pt::Eta1 => (cfg.xi1, cfg.s),
        Pt::Xi1 => (cfg.xi1, R::zero()),
        Pt::Eta2 => (cfg.xi2, cfg.t),
        Pt::Xi2 => (cfg.xi2, R::zero()),
        Pt::Xi3 => (cfg.xi3, R::zero()),
        Pt::PlusOne => (R::one(), R::zero()),
    }
}

fn position<R: Real>(cfg: &AccessoryConfigR<R>, p: Pt) -> R {
    let (anchor, gap) = decompose(cfg, p);
    anchor - gap
}

/// `pos(p) - pos(q)`, with the anchor difference taken first so that
/// points sharing an anchor produce `±s`, `±t`, or `0` exactly.
fn offset<R: Real>(cfg: &AccessoryConfigR<R>, p: Pt, q: Pt) -> R {
    let (ap, gp) = decompose(cfg, p);
    let (aq, gq) = decompose(cfg, q);
    let anchors = if ap == aq { R::zero() } else { ap - aq };
    anchors - gp + gq
}

/// Active singular points after cancelling coincident pairs, with their
/// positions (for the phase assertion) and merged exponents.
pub(super) fn merged_points<R: Real>(cfg: &AccessoryConfigR<R>) -> Vec<(R, i32)> {
    active(cfg)
        .into_iter()
        .map(|p| (position(cfg, p), half_exp(p)))
        .collect()
}

fn active<R: Real>(cfg: &AccessoryConfigR<R>) -> Vec<Pt> {
    let mut pts = Vec::with_capacity(7);
    let s_zero = cfg.s == R::zero();
    let t_zero = cfg.t == R::zero();
    for p in ALL {
        let drop = match p {
            Pt::Eta1 | Pt::Xi1 => s_zero,
            Pt::Eta2 | Pt::Xi2 => t_zero,
            _ => false,
        };
        if !drop {
            pts.push(p);
        }
    }
    pts
}

/// `Σ e_i` over singular points strictly to the right of `x`; the
/// integrand's phase on the interval containing `x` is `i` to this power.
pub(super) fn phase_index<R: Real>(pts: &[(R, i32)], x: R) -> i32 {
    pts.iter().filter(|(p, _)| *p > x).map(|(_, e)| e).sum()
}

/// The eight integration intervals, named by the polygon side they measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum Interval {
    /// `(-∞, -1]`: side `a`
    TailLeft,
    /// `(-1, η₁)`: the top-right run `1-p-q` (closure check)
    LeftRun,
    /// `(η₁, ξ₁)`: side `b`
    StepB,
    /// `(ξ₁, η₂)`: side `q`
    SideQ,
    /// `(η₂, ξ₂)`: side `c`
    StepC,
    /// `(ξ₂, ξ₃)`: side `p`
    SideP,
    /// `(ξ₃, 1)`: the left side `a+b+c` (closure check)
    RightRun,
    /// `[1, ∞)`: the unit base edge, i.e. `1/J`
    TailRight,
}

pub(super) fn build_interval<R: Real>(
    cfg: &AccessoryConfigR<R>,
    _pts: &[(R, i32)],
    iv: Interval,
) -> Option<SingularInterval<R>> {
    let acts = active(cfg);
    match iv {
        Interval::TailLeft => Some(tail(cfg, &acts, -1.0)),
        Interval::TailRight => Some(tail(cfg, &acts, 1.0)),
        Interval::StepB if cfg.s == R::zero() => None,
        Interval::StepC if cfg.t == R::zero() => None,
        _ => {
            let (lo, hi) = match iv {
                Interval::LeftRun => (Pt::MinusOne, Pt::Eta1),
                Interval::StepB => (Pt::Eta1, Pt::Xi1),
                Interval::SideQ => (Pt::Xi1, Pt::Eta2),
                Interval::StepC => (Pt::Eta2, Pt::Xi2),
                Interval::SideP => (Pt::Xi2, Pt::Xi3),
                Interval::RightRun => (Pt::Xi3, Pt::PlusOne),
                _ => unreachable!(),
            };
            Some(finite(cfg, &acts, lo, hi))
        }
    }
}

fn finite<R: Real>(cfg: &AccessoryConfigR<R>, acts: &[Pt], lo: Pt, hi: Pt) -> SingularInterval<R> {
    let len = offset(cfg, hi, lo);
    let mut from_left = Vec::with_capacity(acts.len());
    let mut from_right = Vec::with_capacity(acts.len());
    for &p in acts {
        let e = half_exp(p);
        from_left.push(Factor {
            offset: offset(cfg, p, lo),
            half_exp: e,
        });
        from_right.push(Factor {
            offset: offset(cfg, hi, p),
            half_exp: e,
        });
    }
    SingularInterval {
        len,
        scale: R::one(),
        from_left,
        from_right,
    }
}

/// Tail `x = sign/u`, `u ∈ (0, 1]`. With `Σ e_i = -3` the transformed
/// integrand is `u^(-1/2) ∏ |v|^(e/2) |u - 1/(sign·v)|^(e/2)` over the
/// nonzero singular positions `v`; only `v = sign` lands inside `[0, 1]`
/// (at `u = 1`), everything else stays smooth.
fn tail<R: Real>(cfg: &AccessoryConfigR<R>, acts: &[Pt], sign: f64) -> SingularInterval<R> {
    let sgn = R::from_f64(sign);
    let mut scale = R::one();
    let mut from_left = vec![Factor {
        offset: R::zero(),
        half_exp: -1,
    }];
    let mut from_right = vec![Factor {
        offset: R::one(),
        half_exp: -1,
    }];
    let mut exp_sum = 0;
    for &p in acts {
        let e = half_exp(p);
        exp_sum += e;
        let v = position(cfg, p);
        if v == R::zero() {
            continue;
        }
        let root = v.abs().sqrt();
        scale = scale * root.powi(e);
        let d = R::one() / (sgn * v);
        from_left.push(Factor { offset: d, half_exp: e });
        from_right.push(Factor {
            offset: R::one() - d,
            half_exp: e,
        });
    }
    debug_assert_eq!(exp_sum, -3, "tail power count depends on Σe = -3");
    SingularInterval {
        len: R::one(),
        scale,
        from_left,
        from_right,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: f64, t: f64) -> AccessoryConfigR<f64> {
        AccessoryConfigR {
            xi1: -0.5,
            xi2: 0.0,
            xi3: 0.5,
            s,
            t,
        }
    }

    #[test]
    fn offsets_of_coincident_anchors_are_exact() {
        let c = cfg(1e-9, 2e-9);
        assert_eq!(offset(&c, Pt::Xi1, Pt::Eta1), 1e-9);
        assert_eq!(offset(&c, Pt::Eta2, Pt::Xi2), -2e-9);
        assert_eq!(offset(&c, Pt::Xi2, Pt::Xi2), 0.0);
    }

    #[test]
    fn merge_drops_cancelled_pairs() {
        assert_eq!(merged_points(&cfg(0.0, 0.0)).len(), 3);
        assert_eq!(merged_points(&cfg(1e-3, 0.0)).len(), 5);
        assert_eq!(merged_points(&cfg(1e-3, 1e-3)).len(), 7);
    }

    #[test]
    fn phase_is_integer_steps() {
        let pts = merged_points(&cfg(1e-3, 1e-3));
        // on (ξ₂, ξ₃): remaining points ξ₃ and 1, both -1/2: index -2
        assert_eq!(phase_index(&pts, 0.25), -2);
        // on (ξ₁, η₂): η₂(+1), ξ₂(-1), ξ₃(-1), 1(-1): index -2
        assert_eq!(phase_index(&pts, -0.25), -2);
    }
}
