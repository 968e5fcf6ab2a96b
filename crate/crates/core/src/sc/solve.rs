//! Inverse problem: recover the prevertex configuration from target side
//! lengths.
//!
//! Unknowns are the positive gaps of the ordering chain
//! `-1 < η₁ ≤ ξ₁ < η₂ ≤ ξ₂ < ξ₃ < 1`:
//! `g₀ = η₁+1, g₁ = s, g₂ = η₂-ξ₁, g₃ = t, g₄ = ξ₃-ξ₂`, with `g₁`/`g₃`
//! pinned to zero when the target has `b = 0`/`c = 0`. The f64 stage runs a
//! damped Newton iteration in log-gap coordinates (iterates stay feasible
//! without constraints); the optional extended-precision stage re-polishes
//! in plain gap coordinates, where the double-double exponential is not
//! needed and the iteration is already local.

use super::{
    forward_r, AccessoryConfig, AccessoryConfigR, Precision, ScCtx, ScError, Settings, SideLengths,
};
use crate::dd::Dd;
use crate::real::Real;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveResult {
    pub cfg: AccessoryConfig,
    pub residual: f64,
    pub iterations: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveResultR<R: Real> {
    pub cfg: AccessoryConfigR<R>,
    pub residual: f64,
    pub iterations: u32,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    has_s: bool,
    has_t: bool,
}

impl Layout {
    fn cfg_from_gaps<R: Real>(&self, gaps: &[R]) -> AccessoryConfigR<R> {
        let mut it = gaps.iter().copied();
        let g0 = it.next().unwrap();
        let s = if self.has_s { it.next().unwrap() } else { R::zero() };
        let g2 = it.next().unwrap();
        let t = if self.has_t { it.next().unwrap() } else { R::zero() };
        let g4 = it.next().unwrap();
        let eta1 = -R::one() + g0;
        let xi1 = eta1 + s;
        let eta2 = xi1 + g2;
        let xi2 = eta2 + t;
        let xi3 = xi2 + g4;
        AccessoryConfigR { xi1, xi2, xi3, s, t }
    }

    fn gaps_from_cfg<R: Real>(&self, cfg: &AccessoryConfigR<R>) -> Vec<R> {
        let mut gaps = vec![cfg.xi1 - cfg.s + R::one()];
        if self.has_s {
            gaps.push(cfg.s);
        }
        gaps.push((cfg.xi2 - cfg.xi1) - cfg.t);
        if self.has_t {
            gaps.push(cfg.t);
        }
        gaps.push(cfg.xi3 - cfg.xi2);
        gaps
    }

    fn targets(&self, t: &SideLengths) -> Vec<f64> {
        let mut v = vec![t.a];
        if self.has_s {
            v.push(t.b);
        }
        v.push(t.q);
        if self.has_t {
            v.push(t.c);
        }
        v.push(t.p);
        v
    }

    fn produced<R: Real>(&self, s: &super::SideLengthsR<R>) -> Vec<R> {
        let mut v = vec![s.a];
        if self.has_s {
            v.push(s.b);
        }
        v.push(s.q);
        if self.has_t {
            v.push(s.c);
        }
        v.push(s.p);
        v
    }
}

/// Damped Newton with a central-difference Jacobian on `R^n`.
/// `resid` returns `None` for infeasible iterates; steps are halved until
/// the 2-norm of the residual decreases.
pub(crate) fn damped_newton<R: Real>(
    resid: &mut dyn FnMut(&[R]) -> Option<Vec<R>>,
    u0: Vec<R>,
    tol: f64,
    max_iters: u32,
    fd_step: f64,
) -> (Vec<R>, f64, u32, bool) {
    let n = u0.len();
    let mut u = u0;
    let mut r = match resid(&u) {
        Some(r) => r,
        None => return (u, f64::INFINITY, 0, false),
    };
    let mut best = (u.clone(), inf_norm(&r));
    for iter in 0..max_iters {
        let rn = inf_norm(&r);
        if rn <= tol {
            return (u, rn, iter, true);
        }
        if rn < best.1 {
            best = (u.clone(), rn);
        }
        // central-difference Jacobian, column by column
        let mut jac = vec![vec![R::zero(); n]; n];
        let mut ok = true;
        for col in 0..n {
            let h = R::from_f64(fd_step) * (R::one() + u[col].abs());
            let mut up = u.clone();
            up[col] = up[col] + h;
            let mut dn = u.clone();
            dn[col] = dn[col] - h;
            match (resid(&up), resid(&dn)) {
                (Some(rp), Some(rm)) => {
                    for row in 0..n {
                        jac[row][col] = (rp[row] - rm[row]) / (R::from_f64(2.0) * h);
                    }
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let neg_r: Vec<R> = r.iter().map(|x| -*x).collect();
        let delta = match solve_linear(jac, neg_r) {
            Some(d) => d,
            None => break,
        };
        // backtracking line search on the residual 2-norm
        let r2 = two_norm(&r);
        let mut alpha = R::one();
        let mut accepted = false;
        for _ in 0..24 {
            let trial: Vec<R> = u
                .iter()
                .zip(&delta)
                .map(|(ui, di)| *ui + alpha * *di)
                .collect();
            if let Some(rt) = resid(&trial) {
                if two_norm(&rt) < r2 {
                    u = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            alpha = alpha * R::from_f64(0.5);
        }
        if !accepted {
            break;
        }
    }
    let rn = inf_norm(&r);
    if rn < best.1 {
        best = (u, rn);
    }
    let converged = best.1 <= tol;
    (best.0, best.1, max_iters, converged)
}

fn inf_norm<R: Real>(v: &[R]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs().to_f64()))
}

fn two_norm<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |acc, x| acc + *x * *x)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear<R: Real>(mut a: Vec<Vec<R>>, mut b: Vec<R>) -> Option<Vec<R>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs().to_f64() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - f * v;
            }
            let v = b[col];
            b[row] = b[row] - f * v;
        }
    }
    let mut x = vec![R::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn rel_residual<R: Real>(produced: &[R], targets: &[f64]) -> Vec<R> {
    produced
        .iter()
        .zip(targets)
        .map(|(v, t)| (*v - R::from_f64(*t)) / R::from_f64(*t))
        .collect()
}

/// f64 stage: damped Newton in log-gap coordinates from a given gap seed.
fn newton_log_gaps(
    target: &SideLengths,
    layout: Layout,
    gaps0: &[f64],
    settings: &Settings,
    tol: f64,
) -> (Vec<f64>, f64, u32, bool) {
    let ctx = ScCtx::<f64>::new(settings);
    let targets = layout.targets(target);
    let eps = settings.eps_sep;
    let mut resid = |u: &[f64]| -> Option<Vec<f64>> {
        let gaps: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let cfg = layout.cfg_from_gaps(&gaps);
        let plain = AccessoryConfig {
            xi1: cfg.xi1,
            xi2: cfg.xi2,
            xi3: cfg.xi3,
            s: cfg.s,
            t: cfg.t,
        };
        plain.validate(eps).ok()?;
        let (sides, bundle) = forward_r(&cfg, &ctx);
        if !bundle.jinv.is_finite() || bundle.jinv <= 0.0 {
            return None;
        }
        Some(rel_residual(&layout.produced(&sides), &targets))
    };
    let u0: Vec<f64> = gaps0.iter().map(|g| g.ln()).collect();
    let fd = settings.rel_tol.sqrt();
    let (u, rn, iters, conv) = damped_newton(&mut resid, u0, tol, settings.solver_max_iters, fd);
    (u.iter().map(|x| x.exp()).collect(), rn, iters, conv)
}

/// Extended stage: plain-gap Newton in double-double arithmetic, seeded by
/// the f64 solution.
fn polish_dd(
    target: &SideLengths,
    layout: Layout,
    gaps0: &[f64],
    settings: &Settings,
) -> (Vec<Dd>, f64, u32, bool) {
    let ctx = ScCtx::<Dd>::new(settings);
    let targets = layout.targets(target);
    let mut resid = |gaps: &[Dd]| -> Option<Vec<Dd>> {
        if gaps.iter().any(|g| !(*g > Dd::ZERO)) {
            return None;
        }
        let cfg = layout.cfg_from_gaps(gaps);
        if !(cfg.xi3 < Dd::ONE) {
            return None;
        }
        let (sides, _) = forward_r(&cfg, &ctx);
        Some(rel_residual(&layout.produced(&sides), &targets))
    };
    let u0: Vec<Dd> = gaps0.iter().map(|g| Dd::from_f64(*g)).collect();
    damped_newton(&mut resid, u0, settings.solver_tol, 12, 3e-12)
}

fn seed_gaps(layout: Layout, xis: (f64, f64, f64), s: f64, t: f64) -> Vec<f64> {
    let cfg = AccessoryConfigR::<f64> {
        xi1: xis.0,
        xi2: xis.1,
        xi3: xis.2,
        s,
        t,
    };
    layout.gaps_from_cfg(&cfg)
}

const RECT_SEEDS: [(f64, f64, f64); 6] = [
    (-0.5, 0.0, 0.5),
    (-0.8, -0.3, 0.3),
    (-0.3, 0.2, 0.7),
    (-0.6, -0.1, 0.55),
    (-0.2, 0.35, 0.75),
    (-0.85, 0.05, 0.6),
];

/// Recover the accessory configuration for the given side lengths.
/// With extended precision the double-double polish runs before the
/// result is rounded back to f64.
pub fn solve_accessory(target: &SideLengths, settings: &Settings) -> Result<SolveResult, ScError> {
    let (cfg, residual, iterations) = match settings.precision {
        Precision::Standard => {
            let r = solve_accessory_generic::<f64>(target, settings, None)?;
            (r.cfg, r.residual, r.iterations)
        }
        Precision::Extended => {
            let r = solve_accessory_generic::<Dd>(target, settings, None)?;
            (
                AccessoryConfigR::<f64> {
                    xi1: r.cfg.xi1.to_f64(),
                    xi2: r.cfg.xi2.to_f64(),
                    xi3: r.cfg.xi3.to_f64(),
                    s: r.cfg.s.to_f64(),
                    t: r.cfg.t.to_f64(),
                },
                r.residual,
                r.iterations,
            )
        }
    };
    Ok(SolveResult {
        cfg: AccessoryConfig {
            xi1: cfg.xi1,
            xi2: cfg.xi2,
            xi3: cfg.xi3,
            s: cfg.s,
            t: cfg.t,
        },
        residual,
        iterations,
    })
}

/// Generic-precision entry point. `R = f64` runs the standard path;
/// `R = Dd` appends the extended polish. An optional warm start skips the
/// multi-seed search.
pub(crate) fn solve_accessory_generic<R: SolvePrecision>(
    target: &SideLengths,
    settings: &Settings,
    warm: Option<&AccessoryConfig>,
) -> Result<SolveResultR<R>, ScError> {
    target.validate()?;
    let layout = Layout {
        has_s: target.b > 0.0,
        has_t: target.c > 0.0,
    };

    // f64 stage
    let f64_tol = settings.solver_tol.max(5e-11);
    let mut best: Option<(Vec<f64>, f64, u32)> = None;
    let try_seed = |gaps0: &[f64], best: &mut Option<(Vec<f64>, f64, u32)>| -> bool {
        if gaps0.iter().any(|g| !(*g > 0.0)) {
            return false;
        }
        let (gaps, rn, iters, conv) = newton_log_gaps(target, layout, gaps0, settings, f64_tol);
        if best.as_ref().map_or(true, |(_, b, _)| rn < *b) {
            *best = Some((gaps, rn, iters));
        }
        conv
    };

    let mut converged = false;
    if let Some(w) = warm {
        let gaps0 = layout.gaps_from_cfg(&w.lift::<f64>());
        converged = try_seed(&gaps0, &mut best);
    }
    if !converged {
        for xis in RECT_SEEDS {
            // seed the rectangle problem first, then attach the gap guesses
            let (s0, t0) = initial_st(target, xis, layout, settings);
            let gaps0 = seed_gaps(layout, xis, s0, t0);
            if try_seed(&gaps0, &mut best) {
                converged = true;
                break;
            }
        }
    }
    let (gaps_f64, resid_f64, iters) = best.expect("at least one seed attempted");
    if !converged && settings.precision == Precision::Standard {
        return Err(ScError::NoConvergence {
            residual: resid_f64,
            iterations: iters,
        });
    }

    R::finish(target, layout, gaps_f64, resid_f64, iters, settings)
}

/// Leading-order gap guesses: `b ≈ πQ·s` and `c ≈ πP·t` at the seed.
fn initial_st(target: &SideLengths, xis: (f64, f64, f64), layout: Layout, settings: &Settings) -> (f64, f64) {
    let base = AccessoryConfig::new(xis.0, xis.1, xis.2, 0.0, 0.0);
    let (p_const, q_const) = match super::constants_pq(&base, &Settings {
        precision: Precision::Standard,
        ..*settings
    }) {
        Ok(v) => v,
        Err(_) => (1.0, 1.0),
    };
    let s0 = if layout.has_s {
        (target.b / (std::f64::consts::PI * q_const)).max(1e-14)
    } else {
        0.0
    };
    let t0 = if layout.has_t {
        (target.c / (std::f64::consts::PI * p_const)).max(1e-14)
    } else {
        0.0
    };
    (s0, t0)
}

/// Per-precision final stage of the accessory solve.
pub(crate) trait SolvePrecision: Real {
    fn finish(
        target: &SideLengths,
        layout: Layout,
        gaps: Vec<f64>,
        residual: f64,
        iterations: u32,
        settings: &Settings,
    ) -> Result<SolveResultR<Self>, ScError>;
}

impl SolvePrecision for f64 {
    fn finish(
        _target: &SideLengths,
        layout: Layout,
        gaps: Vec<f64>,
        residual: f64,
        iterations: u32,
        _settings: &Settings,
    ) -> Result<SolveResultR<f64>, ScError> {
        Ok(SolveResultR {
            cfg: layout.cfg_from_gaps(&gaps),
            residual,
            iterations,
        })
    }
}

impl SolvePrecision for Dd {
    fn finish(
        target: &SideLengths,
        layout: Layout,
        gaps: Vec<f64>,
        _residual: f64,
        iterations: u32,
        settings: &Settings,
    ) -> Result<SolveResultR<Dd>, ScError> {
        super::check_extended()?;
        let (gdd, rn, extra, conv) = polish_dd(target, layout, &gaps, settings);
        if !conv {
            return Err(ScError::NoConvergence {
                residual: rn,
                iterations: iterations + extra,
            });
        }
        Ok(SolveResultR {
            cfg: layout.cfg_from_gaps(&gdd),
            residual: rn,
            iterations: iterations + extra,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sc::forward;

    #[test]
    fn rect_solve_roundtrip() {
        let settings = Settings::default();
        let cfg = AccessoryConfig::new(-0.5, 0.0, 0.5, 0.0, 0.0);
        let fw = forward(&cfg, &settings).unwrap();
        let sol = solve_accessory(&fw.sides, &settings).unwrap();
        assert!(sol.residual <= settings.solver_tol);
        assert!((sol.cfg.xi1 - cfg.xi1).abs() < 1e-7, "{:?}", sol.cfg);
        assert!((sol.cfg.xi2 - cfg.xi2).abs() < 1e-7);
        assert!((sol.cfg.xi3 - cfg.xi3).abs() < 1e-7);
    }

    #[test]
    fn full_solve_roundtrip_small_gaps() {
        let settings = Settings::default();
        let cfg = AccessoryConfig::new(-0.5, 0.0, 0.5, 1e-2, 1e-2);
        let fw = forward(&cfg, &settings).unwrap();
        let sol = solve_accessory(&fw.sides, &settings).unwrap();
        for (got, want) in [
            (sol.cfg.xi1, cfg.xi1),
            (sol.cfg.xi2, cfg.xi2),
            (sol.cfg.xi3, cfg.xi3),
            (sol.cfg.s, cfg.s),
            (sol.cfg.t, cfg.t),
        ] {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn infeasible_target_is_reported() {
        let settings = Settings::default();
        let bad = SideLengths::new(1.0, 0.0, 0.0, 0.9, 0.2);
        match solve_accessory(&bad, &settings) {
            Err(ScError::InfeasibleTarget(_)) => {}
            other => panic!("expected infeasible target, got {:?}", other.map(|r| r.cfg)),
        }
    }
}
