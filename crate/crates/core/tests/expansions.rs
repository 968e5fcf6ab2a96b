//! Expansion-coefficient extraction and retraction-probe checks at desk
//! scale (the full acceptance grid runs in the acceptance suite).

use staircase_core::asymptotics::{run_expansion_check, ExpansionKind, GridSpec};
use staircase_core::probe::{eval_f, family_target, locate_st, nonsmooth_scan};
use staircase_core::sc::{constants_pq, solve_accessory, AccessoryConfig, Settings, SideLengths};

const BASE: AccessoryConfig = AccessoryConfig {
    xi1: -0.5,
    xi2: 0.0,
    xi3: 0.5,
    s: 0.0,
    t: 0.0,
};

#[test]
fn b_slope_matches_closed_form() {
    let grid = GridSpec { k_min: 10, k_max: 24 };
    let r = run_expansion_check(ExpansionKind::B, &BASE, &grid, &Settings::default()).unwrap();
    let pred = &r.predictions[0];
    // K_B = π/(2·√(3/2)·√(1/2)·√1) = π/√3
    let expect = std::f64::consts::PI / 3f64.sqrt();
    assert!((pred.closed_form - expect).abs() < 1e-14);
    assert!(pred.rel_err < 1e-4, "rel err {:.2e}", pred.rel_err);
    assert!(pred.fitted > 0.0);
}

#[test]
fn c_slope_matches_closed_form() {
    let grid = GridSpec { k_min: 10, k_max: 24 };
    let r = run_expansion_check(ExpansionKind::C, &BASE, &grid, &Settings::default()).unwrap();
    assert!(r.predictions[0].rel_err < 1e-4);
}

#[test]
fn p_and_q_log_slopes() {
    let grid = GridSpec { k_min: 10, k_max: 30 };
    let rp = run_expansion_check(ExpansionKind::P, &BASE, &grid, &Settings::default()).unwrap();
    assert!(rp.predictions[0].rel_err < 0.05, "P: {:.3}", rp.predictions[0].rel_err);

    let rq = run_expansion_check(ExpansionKind::Q, &BASE, &grid, &Settings::default()).unwrap();
    // along s: positive slope; along t: the same magnitude as P's with the
    // opposite sign
    let along_s = &rq.predictions[0];
    let along_t = &rq.predictions[1];
    assert!(along_s.fitted > 0.0);
    assert!(along_t.fitted < 0.0, "sign flip expected, got {}", along_t.fitted);
    assert!(along_s.rel_err < 0.05);
    assert!(along_t.rel_err < 0.05);
    // cross-consistency of the magnitudes with P's fitted slope
    let ratio = (along_t.fitted.abs() - rp.predictions[0].fitted).abs() / rp.predictions[0].fitted;
    assert!(ratio < 0.05, "P vs Q magnitude mismatch {ratio:.3}");
}

#[test]
fn area_square_log_coefficients() {
    let grid = GridSpec { k_min: 10, k_max: 30 };
    let r = run_expansion_check(ExpansionKind::Area, &BASE, &grid, &Settings::default()).unwrap();
    let (p_const, q_const) = constants_pq(&BASE, &Settings::default()).unwrap();
    let b11 = &r.predictions[0];
    let b22 = &r.predictions[1];
    assert!((b11.closed_form - std::f64::consts::PI * p_const * p_const).abs() < 1e-12);
    assert!((b22.closed_form - std::f64::consts::PI * q_const * q_const).abs() < 1e-12);
    assert!(b11.rel_err < 0.10, "β11 rel err {:.3}", b11.rel_err);
    assert!(b22.rel_err < 0.10, "β22 rel err {:.3}", b22.rel_err);
    assert!(b11.fitted > 0.0 && b22.fitted > 0.0);
}

#[test]
fn family_target_validation() {
    assert_eq!(
        family_target(1.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0).unwrap(),
        SideLengths::new(1.0, 0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0)
    );
    assert!(family_target(1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0).is_err());
    let t = family_target(1.0, 1.0 / 3.0, 1.0 / 3.0, 1e-3, 0.0).unwrap();
    assert_eq!(t.p, 1.0 / 3.0 - 1e-3);
}

#[test]
fn locate_agrees_with_leading_order_inversion() {
    let settings = Settings::default();
    let (p0, q0) = (1.0 / 3.0, 1.0 / 3.0);
    let x = 1e-4;
    let target = family_target(1.0, p0, q0, x, x).unwrap();
    let base = solve_accessory(&target, &settings).unwrap().cfg;
    let loc = locate_st(&base, p0, q0, &settings).unwrap();
    assert!(loc.residual <= 1e-8);
    assert!(loc.s > 0.0 && loc.t > 0.0);
    let (p_const, q_const) = constants_pq(
        &AccessoryConfig { s: 0.0, t: 0.0, ..base },
        &settings,
    )
    .unwrap();
    let s_guess = (2.0 * x) / (q_const * (1.0 / (2.0 * x)).ln());
    let t_guess = x / (p_const * (1.0 / x).ln());
    assert!((loc.s - s_guess).abs() / s_guess < 0.30, "s {} vs guess {}", loc.s, s_guess);
    assert!((loc.t - t_guess).abs() / t_guess < 0.30, "t {} vs guess {}", loc.t, t_guess);
}

#[test]
fn locate_zero_is_exact() {
    let settings = Settings::default();
    let (p0, q0) = (1.0 / 3.0, 1.0 / 3.0);
    let target = family_target(1.0, p0, q0, 0.0, 0.0).unwrap();
    let base = solve_accessory(&target, &settings).unwrap().cfg;
    let loc = locate_st(&base, p0, q0, &settings).unwrap();
    assert_eq!(loc.s, 0.0);
    assert_eq!(loc.t, 0.0);
    assert_eq!(loc.iterations, 0);
}

#[test]
fn located_s_increases_with_y() {
    let settings = Settings::default();
    let (p0, q0) = (1.0 / 3.0, 1.0 / 3.0);
    let x = 1e-4;
    let mut last = 0.0;
    for (i, y) in [0.5e-4, 1e-4, 2e-4].into_iter().enumerate() {
        let target = family_target(1.0, p0, q0, x, y).unwrap();
        let base = solve_accessory(&target, &settings).unwrap().cfg;
        let loc = locate_st(&base, p0, q0, &settings).unwrap();
        if i > 0 {
            assert!(loc.s > last, "s not increasing in y: {} vs {last}", loc.s);
        }
        last = loc.s;
    }
}

#[test]
fn f_at_origin_is_base_height() {
    let settings = Settings::default();
    let s = eval_f(1.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, &settings).unwrap();
    assert!((s.f - 1.0).abs() < 1e-8, "F(0,0) = {}", s.f);
}

#[test]
fn f_grows_along_the_axis() {
    let settings = Settings::default();
    let mut prev = eval_f(1.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, &settings).unwrap().f;
    for k in [12u32, 10, 8, 6, 5] {
        let x = 2f64.powi(-(k as i32));
        let v = eval_f(1.0, 1.0 / 3.0, 1.0 / 3.0, x, 0.0, &settings).unwrap().f;
        assert!(v > prev, "F({x}) = {v} not above {prev}");
        prev = v;
    }
}

#[test]
fn scan_shows_divergent_second_difference() {
    let settings = Settings::default();
    let scan = nonsmooth_scan(1.0, 1.0 / 3.0, 1.0 / 3.0, 8, 13, &settings).unwrap();
    assert!(scan.dh_increasing, "D(h)/h² rows: {:?}", scan.dh.iter().map(|r| r.d_over_h2).collect::<Vec<_>>());
    assert!(scan.divergence_ratio > 1.4);
    // control family stays flat within its error bars
    for row in &scan.dh {
        assert!(
            row.control_d_over_h2.abs() <= row.control_err_bar,
            "control {} exceeds bar {}",
            row.control_d_over_h2,
            row.control_err_bar
        );
    }
    // the polynomial model must fit far worse than the logarithmic one
    assert!(
        scan.poly_diagnostic.poly_residual > 3.0 * scan.poly_diagnostic.log_residual,
        "poly {} vs log {}",
        scan.poly_diagnostic.poly_residual,
        scan.poly_diagnostic.log_residual
    );
}
