use staircase_core::probe::*;
use staircase_core::sc::*;

fn invert_xlog(u: f64) -> f64 {
    // solve s·ln(1/s) = u for small s
    let mut s = u / (1.0 / u).ln();
    for _ in 0..50 {
        let f = s * (1.0 / s).ln() - u;
        let d = (1.0 / s).ln() - 1.0;
        s -= f / d;
    }
    s
}

#[test]
fn guess_quality() {
    let settings = Settings { solver_tol: 1e-12, ..Settings::default() };
    let (p0, q0) = (1.0 / 3.0, 1.0 / 3.0);
    for k in 8..=16u32 {
        let x = 2f64.powi(-(k as i32));
        let target = family_target(1.0, p0, q0, x, x).unwrap();
        let base = solve_accessory(&target, &settings).unwrap().cfg;
        let loc = locate_st(&base, p0, q0, &settings).unwrap();
        let (pc, qc) = constants_pq(&AccessoryConfig { s: 0.0, t: 0.0, ..base }, &settings).unwrap();
        let s_direct = (2.0 * x) / (qc * (1.0 / (2.0 * x)).ln());
        let t_direct = x / (pc * (1.0 / x).ln());
        let s_exact = invert_xlog(2.0 * x / qc);
        let t_exact = invert_xlog(x / pc);
        let dev = |a: f64, b: f64| 100.0 * (a - b).abs() / b;
        println!(
            "k={k}: direct ({:.1}%, {:.1}%)  exact-inversion ({:.1}%, {:.1}%)",
            dev(loc.s, s_direct), dev(loc.t, t_direct),
            dev(loc.s, s_exact), dev(loc.t, t_exact),
        );
    }
}
