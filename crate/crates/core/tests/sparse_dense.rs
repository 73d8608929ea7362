mod common;

use rtds::analysis::{gramians, h2_norm, trace_integrand_with, GramianKind};
use rtds::benchmarks::heated_rod;
use rtds::freqresp::log_grid;
use rtds::{random_rtds, QuadOptions};

use common::*;

#[test]
fn integrands_agree_on_random_system() {
    let sys = random_rtds(50, 5).unwrap();
    for w in log_grid(1e-2, 1e4, 20).unwrap() {
        let d = trace_integrand_with(&sys, w, false).unwrap();
        let s = trace_integrand_with(&sys, w, true).unwrap();
        assert!(rel_err(d, s) <= 1e-10, "w={w}: {d} vs {s}");
    }
}

#[test]
fn gramians_agree_on_heated_rod() {
    let sys = heated_rod(40, 5.0, 1.0).unwrap();
    let opts = QuadOptions::default();
    let d = gramians(&sys, GramianKind::Both, &opts).unwrap();
    let s = gramians(&sys, GramianKind::Both, &opts.with_sparse(true)).unwrap();
    assert!(rel_err_mat(d.wc.as_ref().unwrap(), s.wc.as_ref().unwrap()) <= 1e-9);
    assert!(rel_err_mat(d.wo.as_ref().unwrap(), s.wo.as_ref().unwrap()) <= 1e-9);
}

/// Dense storage for n = 10000 needs about 1.6 GB per complex matrix, so
/// only the sparse path is exercised. Slow; run with `--ignored`.
#[test]
#[ignore]
fn large_heated_rod_h2_with_sparse_path() {
    let sys = heated_rod(10_000, 5.0, 1.0).unwrap();
    let opts = QuadOptions::default().with_tolerances(1e-4, 1e-3).with_sparse(true);
    let h2 = h2_norm(&sys, &opts).unwrap();
    // The output is the rod average; its H2 norm converges with the grid.
    let coarse = h2_norm(&heated_rod(1000, 5.0, 1.0).unwrap(), &opts).unwrap();
    assert!(h2.is_finite() && h2 > 0.0);
    assert!(rel_err(h2, coarse) <= 1e-2, "{h2} vs {coarse}");
}
