mod common;

use nalgebra::dmatrix;
use rtds::benchmarks::hot_shower;
use rtds::simulation::{step_response, step_responses, write_step_csv, StepOptions};
use rtds::Rtds;

use common::*;

#[test]
fn pure_delay_shifts_the_step() {
    // x' = -x + u(t - 1): y = 0 before t = 1, then 1 - exp(-(t - 1)).
    let sys = Rtds::new(
        vec![(0.0, dmatrix![-1.0])],
        vec![(1.0, dmatrix![1.0])],
        vec![(0.0, dmatrix![1.0])],
        None,
        None,
    )
    .unwrap();
    let r = step_response(&sys, 6.0, 1e-9, 1e-11).unwrap();
    for (t, y) in r.times.iter().zip(r.channel(0, 0)) {
        let exact = if *t < 1.0 { 0.0 } else { 1.0 - (-(t - 1.0)).exp() };
        assert!((y - exact).abs() <= 1e-7, "t={t}: {y} vs {exact}");
    }
}

#[test]
fn hot_shower_matches_method_of_steps() {
    // x' = -x(t - h) + 1 on [0, 2h] with x = 0 before 0: x = t on [0, h],
    // x = t - (t - h)^2 / 2 on [h, 2h].
    let h = 0.5;
    let (sys, _) = hot_shower(1.0, 1.0, 1.0, h).unwrap();
    let r = step_response(&sys, 2.0 * h, 1e-10, 1e-12).unwrap();
    for (t, y) in r.times.iter().zip(r.channel(0, 0)) {
        let exact = if *t <= h { *t } else { t - (t - h).powi(2) / 2.0 };
        assert!((y - exact).abs() <= 1e-8, "t={t}: {y} vs {exact}");
    }
}

#[test]
fn settles_to_dc_gain() {
    for seed in 0..3 {
        let sys = random_stable_rtds(6, 300 + seed);
        let r = rtds::step_response_with(&sys, &StepOptions::default()).unwrap();
        let dc = direct_transfer(&sys, 0.0).map(|z| z.re);
        assert!(rel_err_mat(&dc, r.final_value()) <= 1e-3, "seed {seed}");
    }
}

#[test]
fn overlay_csv_shares_the_grid() {
    let a = hot_shower(1.0, 1.0, 1.0, 0.5).unwrap().0;
    let b = random_stable_rtds(3, 5);
    let opts = StepOptions {
        t_final: Some(3.0),
        points: 31,
        ..StepOptions::default()
    };
    let rs = step_responses(&[a, b], &opts).unwrap();
    assert_eq!(rs[0].times, rs[1].times);
    let mut out = Vec::new();
    write_step_csv(&rs, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 1 + 4);
    assert_eq!(text.lines().count(), 32);
}
