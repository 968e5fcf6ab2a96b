//! Numerical extraction of the small-gap expansion coefficients of the
//! side-length integrals, compared against their closed forms.
//!
//! Along the axes the leading behaviour is
//!
//! * `B(s,0) ≈ K_B s` and `C(0,t) ≈ K_C t` with
//!   `K_B = π/(2√(1-ξ₁)√(1+ξ₁)√(ξ₃-ξ₁))`, `K_C` the same in `ξ₂`;
//! * `P(0,t) - P(0,0) ≈ α t ln(1/t)` with `α = K_C/π`;
//! * `Q(s,0) - Q(0,0) ≈ α' s ln(1/s)` with `α' = K_B/π`, while
//!   `Q(0,t) - Q(0,0) ≈ -α t ln(1/t)` (the sign flips);
//! * the normalized polygon area `a + b(p+q) + cp` carries the square-log
//!   terms `β₁₁ t² ln(1/t)` and `β₂₂ s² ln(1/s)` with `β₁₁ = π P²`,
//!   `β₂₂ = π Q²` built from the positive constants of `constants_pq`.
//!
//! Fits run on geometric grids `2^-k`, after dividing the samples by one
//! power of the variable so every decade carries comparable weight.

use crate::sc::{constants_pq, side_integrals, AccessoryConfig, ScError, Settings};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExpansionKind {
    B,
    C,
    P,
    Q,
    Area,
}

impl std::str::FromStr for ExpansionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "B" => Ok(ExpansionKind::B),
            "C" => Ok(ExpansionKind::C),
            "P" => Ok(ExpansionKind::P),
            "Q" => Ok(ExpansionKind::Q),
            "AREA" => Ok(ExpansionKind::Area),
            other => Err(format!("unknown expansion kind {other:?} (expected B|C|P|Q|AREA)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least twice as many samples as basis functions ({samples} samples, {basis} basis functions)")]
    TooFewSamples { samples: usize, basis: usize },
    #[error("basis is rank-deficient on the sample abscissae")]
    RankDeficient,
    #[error("fit ill-conditioned: normal-equation condition {0:.3e}")]
    IllConditioned(f64),
    #[error(transparent)]
    Sc(#[from] ScError),
    #[error("grid must satisfy 1 <= k_min < k_max")]
    InvalidGrid,
}

/// Least-squares result with a conditioning estimate.
#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// condition number of the design matrix (its square conditions the
    /// normal equations)
    pub condition: f64,
    pub singular_min: f64,
}

/// Plain linear least squares on explicit basis functions.
pub fn fit_model(
    xs: &[f64],
    ys: &[f64],
    basis: &[&dyn Fn(f64) -> f64],
) -> Result<FitResult, FitError> {
    assert_eq!(xs.len(), ys.len());
    let (n, m) = (xs.len(), basis.len());
    if n < 2 * m {
        return Err(FitError::TooFewSamples { samples: n, basis: m });
    }
    let a = DMatrix::from_fn(n, m, |i, j| basis[j](xs[i]));
    let y = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-14 {
        return Err(FitError::RankDeficient);
    }
    let condition = smax / smin;
    if condition * condition > 1e14 {
        return Err(FitError::IllConditioned(condition * condition));
    }
    let coef = svd.solve(&y, 0.0).map_err(|_| FitError::RankDeficient)?;
    let residual = (&a * &coef - &y).norm();
    Ok(FitResult {
        coefficients: coef.iter().copied().collect(),
        residual_norm: residual,
        condition,
        singular_min: smin,
    })
}

/// One fitted block of an expansion report.
#[derive(Clone, Debug, Serialize)]
pub struct FitBlock {
    pub label: String,
    pub basis: Vec<String>,
    pub fit: FitResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub label: String,
    pub fitted: f64,
    pub closed_form: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleRow {
    /// the grid variable (s or t)
    pub x: f64,
    /// measured value (integral or difference, per the fit label)
    pub raw: f64,
    /// fitted model evaluated at `x`
    pub model: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub which: ExpansionKind,
    pub base: AccessoryConfig,
    pub k_min: u32,
    pub k_max: u32,
    pub fits: Vec<FitBlock>,
    pub predictions: Vec<Prediction>,
    pub samples: Vec<SampleRow>,
}

#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub k_min: u32,
    pub k_max: u32,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        (self.k_min..=self.k_max).map(|k| 2f64.powi(-(k as i32))).collect()
    }
}

fn coefficient(xi_a: f64, xi3: f64) -> f64 {
    1.0 / (2.0 * (1.0 - xi_a).sqrt() * (1.0 + xi_a).sqrt() * (xi3 - xi_a).sqrt())
}

/// Evaluate the bundle on a grid of one deformation variable.
fn sample_axis(
    base: &AccessoryConfig,
    grid: &[f64],
    vary_s: bool,
    settings: &Settings,
) -> Result<Vec<crate::sc::IntegralBundle>, ScError> {
    let run = |&g: &f64| {
        let cfg = if vary_s {
            AccessoryConfig { s: g, ..*base }
        } else {
            AccessoryConfig { t: g, ..*base }
        };
        side_integrals(&cfg, settings)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grid.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        grid.iter().map(run).collect()
    }
}

/// Run one expansion check: sample along the axis, fit the stated model,
/// and compare the leading coefficient with its closed form.
pub fn run_expansion_check(
    which: ExpansionKind,
    base: &AccessoryConfig,
    grid: &GridSpec,
    settings: &Settings,
) -> Result<ExpansionReport, FitError> {
    if base.s != 0.0 || base.t != 0.0 {
        return Err(FitError::Sc(ScError::InvalidConfig(
            "expansion base must have s = t = 0".into(),
        )));
    }
    if grid.k_min < 1 || grid.k_min >= grid.k_max {
        return Err(FitError::InvalidGrid);
    }
    let xs = grid.values();
    let base_bundle = side_integrals(base, settings)?;
    let mut fits = Vec::new();
    let mut predictions = Vec::new();
    let mut samples = Vec::new();

    let lin = |x: f64| x;
    let one = |_: f64| 1.0;
    let loginv = |x: f64| (1.0 / x).ln();

    match which {
        ExpansionKind::B | ExpansionKind::C => {
            let vary_s = which == ExpansionKind::B;
            let bundles = sample_axis(base, &xs, vary_s, settings)?;
            let ys: Vec<f64> = bundles
                .iter()
                .map(|b| if vary_s { b.b } else { b.c })
                .collect();
            // value = K·x + K₂·x², fitted as value/x against {1, x}
            let normalized: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / x).collect();
            let fit = fit_model(&xs, &normalized, &[&one, &lin])?;
            let k_fit = fit.coefficients[0];
            let closed = if vary_s {
                std::f64::consts::PI * coefficient(base.xi1, base.xi3)
            } else {
                std::f64::consts::PI * coefficient(base.xi2, base.xi3)
            };
            for (x, y) in xs.iter().zip(&ys) {
                let model = (fit.coefficients[0] + fit.coefficients[1] * x) * x;
                samples.push(SampleRow { x: *x, raw: *y, model });
            }
            predictions.push(Prediction {
                label: "linear slope".into(),
                fitted: k_fit,
                closed_form: closed,
                rel_err: (k_fit - closed).abs() / closed.abs(),
            });
            fits.push(FitBlock {
                label: "value/x against {1, x}".into(),
                basis: vec!["1".into(), "x".into()],
                fit,
            });
        }
        ExpansionKind::P => {
            let bundles = sample_axis(base, &xs, false, settings)?;
            let ys: Vec<f64> = bundles.iter().map(|b| b.p - base_bundle.p).collect();
            let normalized: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / x).collect();
            let fit = fit_model(&xs, &normalized, &[&loginv, &one])?;
            let alpha = fit.coefficients[0];
            let closed = coefficient(base.xi2, base.xi3);
            for (x, y) in xs.iter().zip(&ys) {
                let model = (fit.coefficients[0] * (1.0 / x).ln() + fit.coefficients[1]) * x;
                samples.push(SampleRow { x: *x, raw: *y, model });
            }
            predictions.push(Prediction {
                label: "t·ln(1/t) coefficient".into(),
                fitted: alpha,
                closed_form: closed,
                rel_err: (alpha - closed).abs() / closed.abs(),
            });
            fits.push(FitBlock {
                label: "ΔP/t against {ln(1/t), 1}".into(),
                basis: vec!["ln(1/x)".into(), "1".into()],
                fit,
            });
        }
        ExpansionKind::Q => {
            // along s the log slope is +K_B/π, along t it is -K_C/π
            for (vary_s, label, closed) in [
                (true, "s·ln(1/s) coefficient", coefficient(base.xi1, base.xi3)),
                (
                    false,
                    "t·ln(1/t) coefficient (sign-flipped)",
                    -coefficient(base.xi2, base.xi3),
                ),
            ] {
                let bundles = sample_axis(base, &xs, vary_s, settings)?;
                let ys: Vec<f64> = bundles.iter().map(|b| b.q - base_bundle.q).collect();
                let normalized: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / x).collect();
                let fit = fit_model(&xs, &normalized, &[&loginv, &one])?;
                let alpha = fit.coefficients[0];
                if vary_s {
                    for (x, y) in xs.iter().zip(&ys) {
                        let model =
                            (fit.coefficients[0] * (1.0 / x).ln() + fit.coefficients[1]) * x;
                        samples.push(SampleRow { x: *x, raw: *y, model });
                    }
                }
                predictions.push(Prediction {
                    label: label.into(),
                    fitted: alpha,
                    closed_form: closed,
                    rel_err: (alpha - closed).abs() / closed.abs(),
                });
                fits.push(FitBlock {
                    label: format!(
                        "ΔQ/x against {{ln(1/x), 1}} along {}",
                        if vary_s { "s" } else { "t" }
                    ),
                    basis: vec!["ln(1/x)".into(), "1".into()],
                    fit,
                });
            }
        }
        ExpansionKind::Area => {
            let (p_const, q_const) = constants_pq(base, settings)?;
            let area = |b: &crate::sc::IntegralBundle| {
                let j = 1.0 / b.jinv;
                let (a, bb, c, p, q) = (j * b.a, j * b.b, j * b.c, j * b.p, j * b.q);
                a + bb * (p + q) + c * p
            };
            let area0 = area(&base_bundle);
            let xlog = |x: f64| x * (1.0 / x).ln();
            for (vary_s, label, closed) in [
                (
                    false,
                    "t²ln(1/t) coefficient",
                    std::f64::consts::PI * p_const * p_const,
                ),
                (
                    true,
                    "s²ln(1/s) coefficient",
                    std::f64::consts::PI * q_const * q_const,
                ),
            ] {
                let bundles = sample_axis(base, &xs, vary_s, settings)?;
                let ys: Vec<f64> = bundles.iter().map(|b| area(b) - area0).collect();
                let normalized: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / x).collect();
                // Δarea/x = β + β_sq·x·ln(1/x) + γ·x
                let fit = fit_model(&xs, &normalized, &[&one, &xlog, &lin])?;
                let beta_sq = fit.coefficients[1];
                if !vary_s {
                    for (x, y) in xs.iter().zip(&ys) {
                        let model = (fit.coefficients[0]
                            + fit.coefficients[1] * xlog(*x)
                            + fit.coefficients[2] * x)
                            * x;
                        samples.push(SampleRow { x: *x, raw: *y, model });
                    }
                }
                predictions.push(Prediction {
                    label: label.into(),
                    fitted: beta_sq,
                    closed_form: closed,
                    rel_err: (beta_sq - closed).abs() / closed.abs(),
                });
                fits.push(FitBlock {
                    label: format!(
                        "Δarea/x against {{1, x·ln(1/x), x}} along {}",
                        if vary_s { "s" } else { "t" }
                    ),
                    basis: vec!["1".into(), "x·ln(1/x)".into(), "x".into()],
                    fit,
                });
            }
        }
    }

    Ok(ExpansionReport {
        which,
        base: *base,
        k_min: grid.k_min,
        k_max: grid.k_max,
        fits,
        predictions,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomial_recovered() {
        let xs: Vec<f64> = (1..=12).map(|k| k as f64 / 12.0).collect();
        let ys: Vec<f64> = xs.iter().map(|s| 3.0 + 5.0 * s).collect();
        let one = |_: f64| 1.0;
        let lin = |x: f64| x;
        let fit = fit_model(&xs, &ys, &[&one, &lin]).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn exact_log_basis_recovered() {
        let xs: Vec<f64> = (10..=24).map(|k| 2f64.powi(-k)).collect();
        let ys: Vec<f64> = xs.iter().map(|s| s * (1.0 / s).ln()).collect();
        let loginv = |x: f64| (1.0 / x).ln();
        let one = |_: f64| 1.0;
        let normalized: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / x).collect();
        let fit = fit_model(&xs, &normalized, &[&loginv, &one]).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10);
        assert!(fit.coefficients[1].abs() < 1e-10);
    }

    #[test]
    fn noise_perturbation_bounded_by_conditioning() {
        let xs: Vec<f64> = (6..=20).map(|k| 2f64.powi(-k)).collect();
        let clean: Vec<f64> = xs.iter().map(|s| 2.0 + 0.5 * (1.0 / s).ln()).collect();
        let noise = 1e-12;
        let noisy: Vec<f64> = clean
            .iter()
            .enumerate()
            .map(|(i, y)| y + if i % 2 == 0 { noise } else { -noise })
            .collect();
        let loginv = |x: f64| (1.0 / x).ln();
        let one = |_: f64| 1.0;
        let f0 = fit_model(&xs, &clean, &[&one, &loginv]).unwrap();
        let f1 = fit_model(&xs, &noisy, &[&one, &loginv]).unwrap();
        // ‖Δcoef‖ ≤ ‖noise vector‖ / σ_min from the normal equations
        let bound = (xs.len() as f64).sqrt() * noise / f0.singular_min;
        for (a, b) in f0.coefficients.iter().zip(&f1.coefficients) {
            assert!((a - b).abs() <= bound * 1.000001, "{a} vs {b}, bound {bound:e}");
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let xs = [0.1, 0.2, 0.3];
        let ys = [1.0, 2.0, 3.0];
        let one = |_: f64| 1.0;
        let lin = |x: f64| x;
        assert!(matches!(
            fit_model(&xs, &ys, &[&one, &lin]),
            Err(FitError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn rank_deficiency_detected() {
        let xs: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let lin = |x: f64| x;
        let lin2 = |x: f64| 2.0 * x;
        assert!(matches!(
            fit_model(&xs, &ys, &[&lin, &lin2]),
            Err(FitError::RankDeficient) | Err(FitError::IllConditioned(_))
        ));
    }
}
