//! Second-difference probe of the area function along rectangle families.
//!
//! For a base rectangle with marked top points at `p₀` and `p₀+q₀`, the
//! family shrinks the marks to `p₀-x`, `q₀-y` and asks for the unique
//! small-gap deformation `(s,t)` of that rectangle's prevertex data whose
//! side lengths restore `p = p₀`, `q = q₀`. The induced value
//!
//! ```text
//! F(x,y) = a(s,t) + b(s,t)(p₀+q₀) + c(s,t)·p₀
//! ```
//!
//! agrees with the normalized polygon area of the deformed staircase. Its
//! second differences `D(h) = F(2h,0) - 2F(h,0) + F(0,0)` divided by `h²`
//! grow like `1/(h ln²(1/h))` as `h → 0`; the scan tabulates them, checks
//! the growth, and fits the `x²/ln(1/x)` slice model whose quadratic-log
//! coefficient tends to `2π`.

use crate::dd::Dd;
use crate::real::Real;
use crate::sc::{
    forward_r, solve_accessory_generic, AccessoryConfig, AccessoryConfigR, Precision, ScCtx,
    ScError, Settings, SideLengths, SolvePrecision,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Sc(#[from] ScError),
    #[error("family parameters out of range: {0}")]
    OutOfRange(String),
    #[error("precision insufficient: F error estimate {f_err:e} exceeds a tenth of D(h) = {d:e} at the smallest step")]
    PrecisionInsufficient { f_err: f64, d: f64 },
}

/// Side lengths of the shrunken marked rectangle `(a₀, 0, 0, p₀-x, q₀-y)`.
pub fn family_target(a0: f64, p0: f64, q0: f64, x: f64, y: f64) -> Result<SideLengths, ProbeError> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(ProbeError::OutOfRange("x and y must be nonnegative".into()));
    }
    let (p, q) = (p0 - x, q0 - y);
    if !(p > 0.0 && q > 0.0 && p + q < 1.0) {
        return Err(ProbeError::OutOfRange(format!(
            "shrunken marks must satisfy 0 < p₀-x, 0 < q₀-y, sum < 1 (got {p}, {q})"
        )));
    }
    let target = SideLengths::new(a0, 0.0, 0.0, p, q);
    target.validate()?;
    Ok(target)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Located {
    pub s: f64,
    pub t: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// Deform the solved rectangle data until the marks return to `(p₀, q₀)`.
/// The prevertices `ξ` stay fixed; only the gaps `(s, t)` move. Returns
/// `(0,0)` exactly when the rectangle already matches.
pub fn locate_st(
    base: &AccessoryConfig,
    p0: f64,
    q0: f64,
    settings: &Settings,
) -> Result<Located, ProbeError> {
    match settings.precision {
        Precision::Standard => {
            let (s, t, residual, iterations) = locate_st_r::<f64>(&base.lift(), p0, q0, settings)?;
            Ok(Located { s: s.to_f64(), t: t.to_f64(), residual, iterations })
        }
        Precision::Extended => {
            let (s, t, residual, iterations) = locate_st_r::<Dd>(&base.lift(), p0, q0, settings)?;
            Ok(Located { s: s.to_f64(), t: t.to_f64(), residual, iterations })
        }
    }
}

pub(crate) fn locate_st_r<R: Real>(
    base: &AccessoryConfigR<R>,
    p0: f64,
    q0: f64,
    settings: &Settings,
) -> Result<(R, R, f64, u32), ProbeError> {
    let ctx = ScCtx::<R>::new(settings);
    let (sides0, _) = forward_r(base, &ctx);
    let x = p0 - sides0.p.to_f64();
    let y = q0 - sides0.q.to_f64();
    // mark displacements below the base solve's own residual scale count
    // as the undeformed rectangle
    let noise = 8.0 * settings.solver_tol * (p0 + q0);
    if x.abs() <= noise && y.abs() <= noise {
        return Ok((
            R::zero(),
            R::zero(),
            (x.abs() / p0).max(y.abs() / q0),
            0,
        ));
    }
    if x < -noise || y < -noise {
        return Err(ProbeError::OutOfRange(format!(
            "marks must shrink toward the located deformation (x = {x:e}, y = {y:e})"
        )));
    }
    let x = x.max(0.0);
    let y = y.max(0.0);
    // leading-order inversion of the mark displacements
    let (p_const, q_const) = constants_from(base, &ctx);
    let s0 = ((x + y) / (q_const * (1.0 / (x + y)).ln())).max(1e-300);
    let t0 = if x > 0.0 {
        x / (p_const * (1.0 / x).ln())
    } else {
        s0 * 1e-3
    };
    let xi = (base.xi1, base.xi2, base.xi3);
    let eps = settings.eps_sep;
    let mut resid = |u: &[R]| -> Option<Vec<R>> {
        let (s, t) = (u[0], u[1]);
        if !(s > R::zero()) || !(t > R::zero()) {
            return None;
        }
        let cfg = AccessoryConfigR { xi1: xi.0, xi2: xi.1, xi3: xi.2, s, t };
        // ordering: η₁ > -1 and η₂ > ξ₁ with margin
        if !(cfg.xi1 - s > R::from_f64(-1.0 + eps)) || !(cfg.xi2 - t > cfg.xi1 + R::from_f64(eps)) {
            return None;
        }
        let (sides, _) = forward_r(&cfg, &ctx);
        Some(vec![
            (sides.p - R::from_f64(p0)) / R::from_f64(p0),
            (sides.q - R::from_f64(q0)) / R::from_f64(q0),
        ])
    };
    let fd = match settings.precision {
        Precision::Standard => settings.rel_tol.sqrt(),
        Precision::Extended => 3e-12,
    };
    let (u, rn, iters, converged) = crate::sc::damped_newton(
        &mut resid,
        vec![R::from_f64(s0), R::from_f64(t0)],
        settings.solver_tol,
        settings.solver_max_iters,
        fd,
    );
    if !converged {
        return Err(ProbeError::Sc(ScError::NoConvergence {
            residual: rn,
            iterations: iters,
        }));
    }
    Ok((u[0], u[1], rn, iters))
}

fn constants_from<R: Real>(base: &AccessoryConfigR<R>, ctx: &ScCtx<R>) -> (f64, f64) {
    let (_, bundle) = forward_r(base, ctx);
    let j = 1.0 / bundle.jinv.to_f64();
    let (x1, x2, x3) = (base.xi1.to_f64(), base.xi2.to_f64(), base.xi3.to_f64());
    let p_const = j / (2.0 * (1.0 - x2).sqrt() * (1.0 + x2).sqrt() * (x3 - x2).sqrt());
    let q_const = j / (2.0 * (1.0 - x1).sqrt() * (1.0 + x1).sqrt() * (x3 - x1).sqrt());
    (p_const, q_const)
}

/// One evaluated family point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FSample {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub t: f64,
    pub locate_residual: f64,
    pub f: f64,
    pub f_err: f64,
}

/// Evaluate `F` at one `(x, y)` in the configured precision.
pub fn eval_f(
    a0: f64,
    p0: f64,
    q0: f64,
    x: f64,
    y: f64,
    settings: &Settings,
) -> Result<FSample, ProbeError> {
    match settings.precision {
        Precision::Standard => eval_f_r::<f64>(a0, p0, q0, x, y, settings, None).map(|(s, _)| s),
        Precision::Extended => eval_f_r::<Dd>(a0, p0, q0, x, y, settings, None).map(|(s, _)| s),
    }
}

/// Full pipeline: solve the shrunken rectangle, locate `(s,t)`, evaluate
/// the deformed sides and assemble `F`. Returns the sample and the `F`
/// value at working precision.
pub(crate) fn eval_f_r<R: SolvePrecision>(
    a0: f64,
    p0: f64,
    q0: f64,
    x: f64,
    y: f64,
    settings: &Settings,
    warm: Option<&AccessoryConfig>,
) -> Result<(FSample, R), ProbeError> {
    let target = family_target(a0, p0, q0, x, y)?;
    let solved = solve_accessory_generic::<R>(&target, settings, warm)?;
    let base = solved.cfg;
    let ctx = ScCtx::<R>::new(settings);
    let (s, t, locate_residual, _) = locate_st_r::<R>(&base, p0, q0, settings)?;
    let cfg = AccessoryConfigR { s, t, ..base };
    let (sides, bundle) = forward_r(&cfg, &ctx);
    let f = sides.a + sides.b * R::from_f64(p0 + q0) + sides.c * R::from_f64(p0);
    // error estimate: worst integral error scaled through J and the area
    // combination, plus the two solver residuals at first order
    let j = R::one() / bundle.jinv;
    let quad = (bundle.error * j).to_f64().abs() * (1.0 + p0 + q0);
    let f_err = quad + (locate_residual + solved.residual) * (p0 + q0 + 1.0);
    Ok((
        FSample {
            x,
            y,
            s: s.to_f64(),
            t: t.to_f64(),
            locate_residual,
            f: f.to_f64(),
            f_err,
        },
        f,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct DhRow {
    pub h: f64,
    pub d: f64,
    pub d_over_h2: f64,
    /// fitted `c/(h ln²(1/h))`
    pub model: f64,
    /// same second difference for the height-only control family
    pub control_d_over_h2: f64,
    pub control_err_bar: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceFit {
    /// `F(x,0) ≈ c₀ + c₁·x/ln(1/x) + c₂·x²/ln(1/x) + c₃·x`
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub condition: f64,
    pub c2: f64,
    pub c2_target: f64,
    pub c2_rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolyDiagnostic {
    /// quadratic-polynomial coefficients (δ₁, δ₂, δ₁₁, δ₁₂, δ₂₂)
    pub deltas: Vec<f64>,
    pub poly_residual: f64,
    pub log_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeScan {
    pub a0: f64,
    pub p0: f64,
    pub q0: f64,
    pub precision: Precision,
    pub k_min: u32,
    pub k_max: u32,
    pub f_zero: f64,
    pub samples: Vec<FSample>,
    pub dh: Vec<DhRow>,
    pub dh_increasing: bool,
    pub divergence_ratio: f64,
    /// 1-parameter fit of `D(h)/h²` against `1/(h ln²(1/h))`
    pub dh_model_coefficient: f64,
    pub slice_fit: SliceFit,
    pub poly_diagnostic: PolyDiagnostic,
}

/// Tabulate the second differences of `F` along the x-axis, with the
/// height-only control family, the slice fit and the polynomial-failure
/// diagnostic.
pub fn nonsmooth_scan(
    a0: f64,
    p0: f64,
    q0: f64,
    k_min: u32,
    k_max: u32,
    settings: &Settings,
) -> Result<ProbeScan, ProbeError> {
    match settings.precision {
        Precision::Standard => scan_r::<f64>(a0, p0, q0, k_min, k_max, settings),
        Precision::Extended => scan_r::<Dd>(a0, p0, q0, k_min, k_max, settings),
    }
}

fn scan_r<R: SolvePrecision + Send + Sync>(
    a0: f64,
    p0: f64,
    q0: f64,
    k_min: u32,
    k_max: u32,
    settings: &Settings,
) -> Result<ProbeScan, ProbeError> {
    assert!(k_min >= 2 && k_min < k_max, "need 2 <= k_min < k_max");
    // the base solve warms every sample's rectangle solve
    let base_target = family_target(a0, p0, q0, 0.0, 0.0)?;
    let base_solved = solve_accessory_generic::<f64>(&base_target, &Settings {
        precision: Precision::Standard,
        ..*settings
    }, None)?;
    let warm = AccessoryConfig {
        xi1: base_solved.cfg.xi1,
        xi2: base_solved.cfg.xi2,
        xi3: base_solved.cfg.xi3,
        s: 0.0,
        t: 0.0,
    };

    // F at 0 and on the dyadic grid (h and 2h share evaluations)
    let (zero_sample, f0) = eval_f_r::<R>(a0, p0, q0, 0.0, 0.0, settings, Some(&warm))?;
    let ks: Vec<u32> = (k_min - 1..=k_max).collect();
    let evals: Vec<Result<(FSample, R), ProbeError>> = run_grid(&ks, |k| {
        eval_f_r::<R>(a0, p0, q0, 2f64.powi(-(k as i32)), 0.0, settings, Some(&warm))
    });
    let mut f_at: std::collections::BTreeMap<u32, (FSample, R)> = std::collections::BTreeMap::new();
    for (k, r) in ks.iter().zip(evals) {
        f_at.insert(*k, r?);
    }

    // height-only control family: F(S(a₀+δ,0,0,p₀,q₀)) = a₀+δ exactly
    let ctrl: Vec<Result<(R, f64), ProbeError>> = run_grid(&ks, |k| {
        let delta = 2f64.powi(-(k as i32));
        let target = SideLengths::new(a0 + delta, 0.0, 0.0, p0, q0);
        let solved = solve_accessory_generic::<R>(&target, settings, Some(&warm))?;
        let ctx = ScCtx::<R>::new(settings);
        let (sides, bundle) = forward_r(&solved.cfg, &ctx);
        let f = sides.a + sides.b * R::from_f64(p0 + q0) + sides.c * R::from_f64(p0);
        let j = R::one() / bundle.jinv;
        let err = (bundle.error * j).to_f64().abs() * (1.0 + p0 + q0) + solved.residual;
        Ok((f, err))
    });
    let mut ctrl_at = std::collections::BTreeMap::new();
    for (k, r) in ks.iter().zip(ctrl) {
        ctrl_at.insert(*k, r?);
    }
    let (ctrl_f0, ctrl_err0) = {
        let solved = solve_accessory_generic::<R>(&base_target, settings, Some(&warm))?;
        let ctx = ScCtx::<R>::new(settings);
        let (sides, bundle) = forward_r(&solved.cfg, &ctx);
        let f = sides.a + sides.b * R::from_f64(p0 + q0) + sides.c * R::from_f64(p0);
        let j = R::one() / bundle.jinv;
        (f, (bundle.error * j).to_f64().abs() * (1.0 + p0 + q0) + solved.residual)
    };

    let mut dh = Vec::new();
    let mut ratios = Vec::new();
    for k in k_min..=k_max {
        let h = 2f64.powi(-(k as i32));
        let f_h = &f_at[&k];
        let f_2h = &f_at[&(k - 1)];
        let d = (f_2h.1 - (f_h.1 + f_h.1) + f0).to_f64();
        let (c_h, ce_h) = &ctrl_at[&k];
        let (c_2h, ce_2h) = &ctrl_at[&(k - 1)];
        let cd = (*c_2h - (*c_h + *c_h) + ctrl_f0).to_f64();
        let ctrl_bar = ce_2h + 2.0 * ce_h + ctrl_err0;
        ratios.push(d / (h * h));
        dh.push(DhRow {
            h,
            d,
            d_over_h2: d / (h * h),
            model: 0.0,
            control_d_over_h2: cd / (h * h),
            control_err_bar: ctrl_bar / (h * h),
        });
    }
    // precision guard at the smallest h
    let smallest = &f_at[&k_max].0;
    let d_last = dh.last().expect("nonempty grid").d.abs();
    if smallest.f_err > d_last / 10.0 {
        return Err(ProbeError::PrecisionInsufficient {
            f_err: smallest.f_err,
            d: d_last,
        });
    }

    let dh_increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let divergence_ratio = ratios.iter().cloned().fold(f64::MIN, f64::max)
        / ratios.iter().cloned().fold(f64::MAX, f64::min);

    // 1-parameter model D/h² ≈ c/(h ln²(1/h))
    let phi: Vec<f64> = dh.iter().map(|r| 1.0 / (r.h * (1.0 / r.h).ln().powi(2))).collect();
    let c_num: f64 = dh.iter().zip(&phi).map(|(r, p)| r.d_over_h2 * p).sum();
    let c_den: f64 = phi.iter().map(|p| p * p).sum();
    let dh_model_coefficient = c_num / c_den;
    for (row, p) in dh.iter_mut().zip(&phi) {
        row.model = dh_model_coefficient * p;
    }

    // slice fit F(x,0) = c0 + c1 x/ln(1/x) + c2 x²/ln(1/x) + c3 x
    let xs: Vec<f64> = ks.iter().map(|k| 2f64.powi(-(*k as i32))).collect();
    let mut fx: Vec<f64> = ks.iter().map(|k| f_at[k].0.f).collect();
    let mut xs_fit = xs.clone();
    xs_fit.push(0.0);
    fx.push(zero_sample.f);
    let b0 = |_: f64| 1.0;
    let b1 = |x: f64| if x > 0.0 { x / (1.0 / x).ln() } else { 0.0 };
    let b2 = |x: f64| if x > 0.0 { x * x / (1.0 / x).ln() } else { 0.0 };
    let b3 = |x: f64| x;
    let sfit = crate::asymptotics::fit_model(&xs_fit, &fx, &[&b0, &b1, &b2, &b3])
        .map_err(|e| ProbeError::OutOfRange(format!("slice fit failed: {e}")))?;
    let c2 = sfit.coefficients[2];
    let c2_target = 2.0 * std::f64::consts::PI;
    let slice_fit = SliceFit {
        coefficients: sfit.coefficients.clone(),
        residual_norm: sfit.residual_norm,
        condition: sfit.condition,
        c2,
        c2_target,
        c2_rel_err: (c2 - c2_target).abs() / c2_target,
    };

    // polynomial-failure diagnostic on a short two-axis grid at standard
    // precision: a genuine quadratic model leaves a far larger residual
    // than the logarithmic one
    let poly_diagnostic = poly_diagnostic(a0, p0, q0, k_min, settings, &warm)?;

    let samples: Vec<FSample> = std::iter::once(zero_sample)
        .chain(ks.iter().map(|k| f_at[k].0))
        .collect();

    Ok(ProbeScan {
        a0,
        p0,
        q0,
        precision: settings.precision,
        k_min,
        k_max,
        f_zero: f0.to_f64(),
        samples,
        dh,
        dh_increasing,
        divergence_ratio,
        dh_model_coefficient,
        slice_fit,
        poly_diagnostic,
    })
}

fn run_grid<T: Send, F: Fn(u32) -> T + Sync>(ks: &[u32], f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ks.par_iter().map(|k| f(*k)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ks.iter().map(|k| f(*k)).collect()
    }
}

fn poly_diagnostic(
    a0: f64,
    p0: f64,
    q0: f64,
    k_min: u32,
    settings: &Settings,
    warm: &AccessoryConfig,
) -> Result<PolyDiagnostic, ProbeError> {
    let std_settings = Settings {
        precision: Precision::Standard,
        ..*settings
    };
    let ks: Vec<u32> = (k_min..k_min + 4).collect();
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for &k in &ks {
        let h = 2f64.powi(-(k as i32));
        pts.push((h, 0.0));
        pts.push((0.0, h));
        pts.push((h, h));
    }
    let vals: Vec<Result<(FSample, f64), ProbeError>> = {
        let run = |&(x, y): &(f64, f64)| eval_f_r::<f64>(a0, p0, q0, x, y, &std_settings, Some(warm));
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            pts.par_iter().map(run).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            pts.iter().map(run).collect()
        }
    };
    let mut fs = Vec::new();
    for v in vals {
        fs.push(v?.0.f);
    }
    // quadratic polynomial in (x, y)
    let rows = pts.len();
    let poly = nalgebra::DMatrix::from_fn(rows, 6, |i, j| {
        let (x, y) = pts[i];
        match j {
            0 => 1.0,
            1 => x,
            2 => y,
            3 => x * x,
            4 => x * y,
            _ => y * y,
        }
    });
    let logm = nalgebra::DMatrix::from_fn(rows, 5, |i, j| {
        let (x, y) = pts[i];
        let u = x;
        let v = x + y;
        let l = |z: f64| if z > 0.0 { z / (1.0 / z).ln() } else { 0.0 };
        let l2 = |z: f64| if z > 0.0 { z * z / (1.0 / z).ln() } else { 0.0 };
        match j {
            0 => 1.0,
            1 => l(u),
            2 => l(v),
            3 => l2(u),
            _ => l2(v),
        }
    });
    let yv = nalgebra::DVector::from_column_slice(&fs);
    let lsq = |m: nalgebra::DMatrix<f64>| -> (Vec<f64>, f64) {
        let svd = m.clone().svd(true, true);
        let c = svd.solve(&yv, 0.0).expect("solvable least squares");
        let r = (&m * &c - &yv).norm();
        (c.iter().copied().collect(), r)
    };
    let (pc, pr) = lsq(poly);
    let (_, lr) = lsq(logm);
    Ok(PolyDiagnostic {
        deltas: pc[1..].to_vec(),
        poly_residual: pr,
        log_residual: lr,
    })
}
