//! Engine-vs-oracle checks for the side-length integrals plus frozen
//! golden values computed by the independent oracle (cross-checked against
//! a 50-digit evaluation) before the engine was built.

mod common;

use staircase_core::sc::{
    forward, side_integrals, solve_accessory, AccessoryConfig, Precision, Settings,
};

const BASE: AccessoryConfig = AccessoryConfig {
    xi1: -0.5,
    xi2: 0.0,
    xi3: 0.5,
    s: 0.0,
    t: 0.0,
};

// frozen goldens at the symmetric base, s = t = 0
const GOLD_BASE_A: f64 = 2.384011014551230403152;
const GOLD_BASE_P: f64 = 1.524886838081896082232;
const GOLD_BASE_Q: f64 = 0.6110616415240874337936;
const GOLD_BASE_JINV: f64 = 3.049773676163792164464;

// frozen goldens at s = t = 1e-3
const GOLD_ST3: [f64; 6] = [
    2.382662813134002598857,    // A
    0.001812061375025314793798, // B
    0.002223107551048891741663, // C
    1.533030756667373130391,    // P
    0.6102034995032490415022,   // Q
    3.051095002578702423184,    // 1/J
];

// frozen golden side lengths at s = t = 1e-2
const GOLD_SIDES_ST2: [f64; 5] = [
    0.7739258835788208693905,  // a
    0.005864995328796883000108, // b
    0.00730693279042892396469,  // c
    0.5192090150632586808873,   // p
    0.1974891959224585093488,   // q
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn oracle_calibration() {
    // the oracle itself must reproduce ∫₀¹ x^(-1/2) dx = 2 and ∫₀¹ √x = 2/3
    let inv = common::PowerProduct { points: vec![(0.0, -1)] };
    let v = common::tanh_sinh(&inv, 0.0, 1.0, 11);
    assert!((v - 2.0).abs() < 1e-13, "oracle inverse sqrt: {v}");
    let sq = common::PowerProduct { points: vec![(0.0, 1)] };
    let v = common::tanh_sinh(&sq, 0.0, 1.0, 11);
    assert!((v - 2.0 / 3.0).abs() < 1e-13, "oracle sqrt: {v}");
}

#[test]
fn oracle_reproduces_frozen_goldens() {
    let o = common::oracle_bundle(-0.5, 0.0, 0.5, 0.0, 0.0);
    assert!(rel(o[0], GOLD_BASE_A) < 1e-12);
    assert!(rel(o[3], GOLD_BASE_P) < 1e-12);
    assert!(rel(o[4], GOLD_BASE_Q) < 1e-12);
    assert!(rel(o[5], GOLD_BASE_JINV) < 1e-12);
    let o = common::oracle_bundle(-0.5, 0.0, 0.5, 1e-3, 1e-3);
    for (got, want) in [o[0], o[1], o[2], o[3], o[4], o[5]].iter().zip(&GOLD_ST3) {
        assert!(rel(*got, *want) < 1e-11, "{got} vs {want}");
    }
}

#[test]
fn engine_matches_goldens_at_base() {
    let b = side_integrals(&BASE, &Settings::default()).unwrap();
    assert!(b.converged);
    assert!(rel(b.a, GOLD_BASE_A) < 2e-11);
    assert!(rel(b.p, GOLD_BASE_P) < 2e-11);
    assert!(rel(b.q, GOLD_BASE_Q) < 2e-11);
    assert!(rel(b.jinv, GOLD_BASE_JINV) < 2e-11);
}

#[test]
fn engine_matches_goldens_at_small_gaps() {
    let cfg = AccessoryConfig { s: 1e-3, t: 1e-3, ..BASE };
    let b = side_integrals(&cfg, &Settings::default()).unwrap();
    for (got, want) in [b.a, b.b, b.c, b.p, b.q, b.jinv].iter().zip(&GOLD_ST3) {
        assert!(rel(*got, *want) < 5e-11, "{got} vs {want}");
    }
}

#[test]
fn forward_matches_golden_sides() {
    let cfg = AccessoryConfig { s: 1e-2, t: 1e-2, ..BASE };
    let fw = forward(&cfg, &Settings::default()).unwrap();
    for (got, want) in [fw.sides.a, fw.sides.b, fw.sides.c, fw.sides.p, fw.sides.q]
        .iter()
        .zip(&GOLD_SIDES_ST2)
    {
        assert!(rel(*got, *want) < 5e-11, "{got} vs {want}");
    }
    assert!(fw.bundle.closure_vertical.abs() < 1e-10);
    assert!(fw.bundle.closure_horizontal.abs() < 1e-10);
}

#[test]
fn engine_agrees_with_oracle_off_base() {
    // a few asymmetric configurations, engine vs the independent path
    let cases = [
        (-0.7, -0.1, 0.4, 3e-3, 7e-4),
        (-0.3, 0.2, 0.75, 1e-5, 2e-2),
        (-0.55, 0.05, 0.6, 1e-7, 1e-7),
    ];
    for (x1, x2, x3, s, t) in cases {
        let cfg = AccessoryConfig::new(x1, x2, x3, s, t);
        let b = side_integrals(&cfg, &Settings::default()).unwrap();
        let o = common::oracle_bundle(x1, x2, x3, s, t);
        for (i, (got, want)) in [b.a, b.b, b.c, b.p, b.q, b.jinv].iter().zip(&o[..6]).enumerate() {
            assert!(
                rel(*got, *want) < 1e-9,
                "cfg {cfg:?} integral {i}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn closure_residuals_small_on_grid() {
    for &s in &[0.0, 1e-4, 1e-2] {
        for &t in &[0.0, 1e-3, 3e-2] {
            let cfg = AccessoryConfig { s, t, ..BASE };
            let b = side_integrals(&cfg, &Settings::default()).unwrap();
            assert!(b.closure_vertical.abs() < 1e-9, "s={s} t={t}");
            assert!(b.closure_horizontal.abs() < 1e-9, "s={s} t={t}");
        }
    }
}

#[test]
fn refinement_moves_less_than_previous_error() {
    let cfg = AccessoryConfig { s: 1e-4, t: 5e-4, ..BASE };
    let coarse = Settings {
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        ..Settings::default()
    };
    let fine = Settings {
        rel_tol: 5e-9,
        abs_tol: 5e-11,
        ..Settings::default()
    };
    let b0 = side_integrals(&cfg, &coarse).unwrap();
    let b1 = side_integrals(&cfg, &fine).unwrap();
    let j = 1.0 / b0.jinv;
    for (v0, v1) in [
        (b0.a, b1.a),
        (b0.b, b1.b),
        (b0.c, b1.c),
        (b0.p, b1.p),
        (b0.q, b1.q),
        (b0.jinv, b1.jinv),
    ] {
        assert!(
            (v0 - v1).abs() * j <= b0.error_estimate.max(1e-14),
            "{v0} -> {v1}, err {:e}",
            b0.error_estimate
        );
    }
}

#[test]
fn extended_precision_sharpens_the_base() {
    let b = side_integrals(&BASE, &Settings::extended()).unwrap();
    // goldens carry 22 significant digits; double-double resolves them
    assert!(rel(b.a, GOLD_BASE_A) < 1e-20, "A: {:.3e}", rel(b.a, GOLD_BASE_A));
    assert!(rel(b.jinv, GOLD_BASE_JINV) < 1e-20);
    assert_eq!(b.converged, true);
}

#[test]
fn solver_roundtrip_near_base() {
    let settings = Settings::default();
    let cfg = AccessoryConfig { s: 1e-2, t: 1e-2, ..BASE };
    let fw = forward(&cfg, &settings).unwrap();
    let sol = solve_accessory(&fw.sides, &settings).unwrap();
    assert!(sol.residual <= settings.solver_tol);
    for (got, want) in [
        (sol.cfg.xi1, cfg.xi1),
        (sol.cfg.xi2, cfg.xi2),
        (sol.cfg.xi3, cfg.xi3),
        (sol.cfg.s, cfg.s),
        (sol.cfg.t, cfg.t),
    ] {
        assert!((got - want).abs() < 1e-6);
    }
}

#[test]
fn extended_mode_is_available_here() {
    // the guard exists for platforms with double-rounding mul_add; on this
    // one it must pass, and extended requests must not silently downgrade
    assert!(staircase_core::sc::check_extended().is_ok());
    let s = Settings::extended();
    assert_eq!(s.precision, Precision::Extended);
}
