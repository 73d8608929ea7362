//! Production results against the brute-force references in `common`.

mod common;

use nalgebra::dmatrix;
use rtds::analysis::{gramians, h2_norm, GramianKind};
use rtds::benchmarks::hot_shower;
use rtds::freqresp::transfer;
use rtds::{random_rtds, QuadOptions, Rtds};

use common::*;

#[test]
fn scalar_lag_h2_is_one_over_root_two() {
    let sys = Rtds::delay_free(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0], None).unwrap();
    let h2 = h2_norm(&sys, &QuadOptions::default()).unwrap();
    OracleReport::new("h2 of 1/(s+1)", std::f64::consts::FRAC_1_SQRT_2, h2, 1e-8).assert();
}

#[test]
fn hot_shower_trapezoid_agrees_with_closed_form() {
    for h in [0.2, 0.5, 1.0] {
        let (sys, exact) = hot_shower(1.0, 1.0, 1.0, h).unwrap();
        let trap = trapezoid_h2(&sys, 1e4, 20_000, 1e-3).unwrap();
        OracleReport::new(format!("trapezoid hot shower h={h}"), exact, trap.value, 1e-5).assert();
        let prod = h2_norm(&sys, &QuadOptions::default()).unwrap();
        OracleReport::new(format!("adaptive hot shower h={h}"), exact, prod, 1e-6).assert();
    }
}

#[test]
fn random_systems_match_trapezoid() {
    let opts = QuadOptions::default();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let sys = random_rtds(20, seed).unwrap();
        let trap = trapezoid_h2(&sys, 1e4, 20_000, 1e-2).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let prod = h2_norm(&sys, &opts).unwrap();
        let r = OracleReport::new(format!("random_rtds(20, {seed})"), trap.value, prod, 1e-4);
        worst = worst.max(r.rel_error);
        r.assert();
    }
    assert!(worst <= 1e-4, "worst {worst:.2e}");
}

#[test]
fn delay_free_gramians_solve_lyapunov() {
    let opts = QuadOptions::default().with_tolerances(1e-9, 1e-12);
    for (n, seed) in [(2, 1), (5, 2), (12, 3)] {
        let sys = random_hurwitz(n, 2, 3, seed);
        let g = gramians(&sys, GramianKind::Both, &opts).unwrap();
        let (wc, wo) = (g.wc.unwrap(), g.wo.unwrap());
        let a = sys.a().total();
        let b = sys.b().total();
        let c = sys.c().total();
        let res_c = (&a * &wc + &wc * a.transpose() + &b * b.transpose()).norm() / (&b * b.transpose()).norm();
        let res_o = (a.transpose() * &wo + &wo * &a + c.transpose() * &c).norm() / (c.transpose() * &c).norm();
        assert!(res_c <= 1e-7 && res_o <= 1e-7, "n={n}: residuals {res_c:.2e} {res_o:.2e}");
        let (lc, lo) = lyapunov_gramians(&sys).unwrap();
        assert!(rel_err_mat(&lc, &wc) <= 1e-6, "n={n}: Wc {:.2e}", rel_err_mat(&lc, &wc));
        assert!(rel_err_mat(&lo, &wo) <= 1e-6, "n={n}: Wo {:.2e}", rel_err_mat(&lo, &wo));
    }
}

#[test]
fn lyapunov_oracle_residual() {
    let sys = random_hurwitz(20, 3, 2, 9);
    let (wc, _) = lyapunov_gramians(&sys).unwrap();
    let a = sys.a().total();
    let q = sys.b().total() * sys.b().total().transpose();
    let res = (&a * &wc + &wc * a.transpose() + &q).norm() / q.norm();
    assert!(res <= 1e-10, "{res:.2e}");
}

#[test]
fn transfer_matches_explicit_inverse() {
    let sys = random_stable_rtds(15, 4);
    for w in [0.0, 0.3, 2.0, 40.0, 1e3] {
        let e = rel_err_cmat(&direct_transfer(&sys, w), &transfer(&sys, w).unwrap());
        assert!(e <= 1e-12, "w={w}: {e:.2e}");
    }
}

#[test]
fn h2_equals_trace_of_gramian_products() {
    // ||G||^2 = trace(C Wc C^T) for a delay-free C.
    let sys = random_hurwitz(6, 2, 2, 11);
    let opts = QuadOptions::default().with_tolerances(1e-10, 1e-13);
    let wc = gramians(&sys, GramianKind::Controllability, &opts).unwrap().wc.unwrap();
    let c = sys.c().total();
    let expect = (&c * wc * c.transpose()).trace().sqrt();
    OracleReport::new("trace(C Wc C^T)", expect, h2_norm(&sys, &opts).unwrap(), 1e-8).assert();
}
