//! Step responses by the method of steps.
//!
//! Each input channel is integrated separately with zero initial history and
//! a unit step on that input at `t = 0`. The integrator is the embedded
//! Dormand–Prince 5(4) pair with adaptive steps. Delayed states `x(t - h)`
//! are read from a cubic Hermite interpolant over the accepted steps, which
//! is always available because the step size never exceeds the smallest
//! positive state delay.
//!
//! Derivative discontinuities start at the input delays and propagate through
//! the state delays. Step endpoints are forced onto every sum of up to
//! `breakpoint_order` (default 3) positive `A`/`B` delays; within a step the
//! delayed input steps are therefore constant.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::freqresp::fmt_machine;
use crate::par;
use crate::system::Rtds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// `None` extends the horizon until the response settles.
    pub t_final: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of equally spaced output samples, both ends included.
    pub points: usize,
    pub breakpoint_order: usize,
    /// Settling is declared when every output varies by less than
    /// `settle_tol * max(1, |y(T)|)` over the last 10% of `[0, T]`.
    pub settle_tol: f64,
    /// First horizon tried by the settling search (doubled as needed).
    pub min_t_final: f64,
    pub max_t_final: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            t_final: None,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            points: 1001,
            breakpoint_order: 3,
            settle_tol: 1e-4,
            min_t_final: 20.0,
            max_t_final: 2000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeResponse {
    pub times: Vec<f64>,
    /// `outputs[k][(i, j)]`: output `i` at `times[k]` for a unit step on input `j`.
    pub outputs: Vec<DMatrix<f64>>,
    pub system_name: String,
}

impl TimeResponse {
    pub fn t_final(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Trajectory of one channel.
    pub fn channel(&self, output: usize, input: usize) -> Vec<f64> {
        self.outputs.iter().map(|y| y[(output, input)]).collect()
    }

    pub fn final_value(&self) -> &DMatrix<f64> {
        self.outputs.last().expect("responses are never empty")
    }
}

/// Step response on `[0, t_final]`.
pub fn step_response(sys: &Rtds, t_final: f64, rel_tol: f64, abs_tol: f64) -> Result<TimeResponse> {
    step_response_with(
        sys,
        &StepOptions {
            t_final: Some(t_final),
            rel_tol,
            abs_tol,
            ..StepOptions::default()
        },
    )
}

pub fn step_response_with(sys: &Rtds, opts: &StepOptions) -> Result<TimeResponse> {
    validate(opts)?;
    let horizon = opts.t_final.unwrap_or(opts.max_t_final);
    let breakpoints = breakpoints(sys, opts.breakpoint_order, horizon);
    let sims: Vec<Channel<'_>> = (0..sys.inputs())
        .map(|j| Channel::new(sys, j, &breakpoints, opts))
        .collect();

    let (sims, t_end) = match opts.t_final {
        Some(t) => (advance_all(sims, t)?, t),
        None => {
            let mut t = opts.min_t_final.max(20.0 * sys.max_delay()).min(opts.max_t_final);
            let mut sims = advance_all(sims, t)?;
            while !settled(&sims, t, opts.settle_tol) && t < opts.max_t_final {
                t = (2.0 * t).min(opts.max_t_final);
                sims = advance_all(sims, t)?;
            }
            (sims, t)
        }
    };

    let times = sample_times(t_end, opts.points);
    let per_channel: Vec<Vec<DVector<f64>>> = sims
        .iter()
        .map(|s| times.iter().map(|&t| s.output(t)).collect())
        .collect();
    let outputs = (0..times.len())
        .map(|k| {
            DMatrix::from_fn(sys.outputs(), sys.inputs(), |i, j| per_channel[j][k][i])
        })
        .collect();
    Ok(TimeResponse {
        times,
        outputs,
        system_name: sys.display_name().to_string(),
    })
}

/// Step responses of several systems on one shared time grid (the longest
/// settling horizon when `t_final` is automatic).
pub fn step_responses(systems: &[Rtds], opts: &StepOptions) -> Result<Vec<TimeResponse>> {
    let t_final = match opts.t_final {
        Some(t) => t,
        None => {
            let mut t: f64 = 0.0;
            for sys in systems {
                t = t.max(step_response_with(sys, opts)?.t_final());
            }
            t
        }
    };
    let fixed = StepOptions {
        t_final: Some(t_final),
        ..*opts
    };
    systems.iter().map(|s| step_response_with(s, &fixed)).collect()
}

fn validate(opts: &StepOptions) -> Result<()> {
    if let Some(t) = opts.t_final {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_final must be positive, got {t}")));
        }
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("integration tolerances must be positive".into()));
    }
    if opts.points < 2 {
        return Err(Error::InvalidArgument("need at least 2 output samples".into()));
    }
    if !(opts.max_t_final > 0.0 && opts.max_t_final.is_finite()) {
        return Err(Error::InvalidArgument("max_t_final must be positive and finite".into()));
    }
    Ok(())
}

fn sample_times(t_end: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| {
            if k + 1 == points {
                t_end
            } else {
                t_end * k as f64 / (points - 1) as f64
            }
        })
        .collect()
}

fn advance_all<'a>(sims: Vec<Channel<'a>>, t: f64) -> Result<Vec<Channel<'a>>> {
    par::map_vec(sims, |mut s| s.advance_to(t).map(|_| s))
        .into_iter()
        .collect()
}

fn settled(sims: &[Channel<'_>], t: f64, tol: f64) -> bool {
    let window: Vec<f64> = (0..=100).map(|k| t * (0.9 + 0.1 * k as f64 / 100.0)).collect();
    sims.iter().all(|s| {
        let ys: Vec<DVector<f64>> = window.iter().map(|&w| s.output(w)).collect();
        let last = ys.last().unwrap();
        (0..last.len()).all(|i| {
            let (lo, hi) = ys
                .iter()
                .map(|y| y[i])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            hi - lo < tol * last[i].abs().max(1.0)
        })
    })
}

/// Sums of 1..=order positive A/B delays not exceeding `horizon`, sorted.
pub fn breakpoints(sys: &Rtds, order: usize, horizon: f64) -> Vec<f64> {
    let mut base: Vec<f64> = sys
        .a()
        .delays()
        .chain(sys.b().delays())
        .filter(|&h| h > 0.0)
        .collect();
    base.sort_by(f64::total_cmp);
    base.dedup();
    let mut out = Vec::new();
    fn rec(base: &[f64], start: usize, sum: f64, depth: usize, horizon: f64, out: &mut Vec<f64>) {
        if depth == 0 {
            return;
        }
        for k in start..base.len() {
            let s = sum + base[k];
            if s > horizon {
                break;
            }
            out.push(s);
            rec(base, k, s, depth - 1, horizon, out);
        }
    }
    rec(&base, 0, 0.0, order, horizon, &mut out);
    out.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(out.len());
    for b in out {
        match merged.last() {
            Some(&last) if b - last <= 1e-12 * b.max(1.0) => {}
            _ => merged.push(b),
        }
    }
    merged
}

struct Segment {
    t0: f64,
    t1: f64,
    x0: DVector<f64>,
    x1: DVector<f64>,
    /// Right derivative at `t0`, left derivative at `t1`.
    f0: DVector<f64>,
    f1: DVector<f64>,
}

impl Segment {
    fn eval(&self, s: f64) -> DVector<f64> {
        let h = self.t1 - self.t0;
        if h <= 0.0 {
            return self.x1.clone();
        }
        let th = ((s - self.t0) / h).clamp(0.0, 1.0);
        let th2 = th * th;
        let th3 = th2 * th;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        &self.x0 * h00 + &self.f0 * (h10 * h) + &self.x1 * h01 + &self.f1 * (h11 * h)
    }
}

// Dormand–Prince 5(4).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One input channel being integrated.
struct Channel<'a> {
    sys: &'a Rtds,
    input: usize,
    breakpoints: &'a [f64],
    next_bp: usize,
    segments: Vec<Segment>,
    t: f64,
    x: DVector<f64>,
    dt: f64,
    max_dt: f64,
    rel_tol: f64,
    abs_tol: f64,
}

impl<'a> Channel<'a> {
    fn new(sys: &'a Rtds, input: usize, breakpoints: &'a [f64], opts: &StepOptions) -> Self {
        let min_state_delay = sys
            .a()
            .delays()
            .filter(|&h| h > 0.0)
            .fold(f64::INFINITY, f64::min);
        Self {
            sys,
            input,
            breakpoints,
            next_bp: 0,
            segments: Vec::new(),
            t: 0.0,
            x: DVector::zeros(sys.states()),
            dt: 1e-3f64.min(min_state_delay),
            max_dt: min_state_delay,
            rel_tol: opts.rel_tol,
            abs_tol: opts.abs_tol,
        }
    }

    /// History `x(s)`, zero for `s <= 0`.
    fn state_at(&self, s: f64) -> DVector<f64> {
        if s <= 0.0 || self.segments.is_empty() {
            return DVector::zeros(self.sys.states());
        }
        let k = self.segments.partition_point(|seg| seg.t1 < s);
        match self.segments.get(k) {
            Some(seg) => seg.eval(s),
            None => self.x.clone(),
        }
    }

    /// Sum of input columns whose delay has elapsed at `t` (right limit).
    fn forcing(&self, t: f64) -> DVector<f64> {
        let mut f = DVector::zeros(self.sys.states());
        for term in self.sys.b().terms() {
            if term.delay <= t {
                f += term.matrix.column(self.input);
            }
        }
        f
    }

    fn rhs(&self, tau: f64, x: &DVector<f64>, forcing: &DVector<f64>) -> DVector<f64> {
        let mut out = forcing.clone();
        for term in self.sys.a().terms() {
            if term.delay == 0.0 {
                out.gemv(1.0, &term.matrix, x, 1.0);
            } else {
                out.gemv(1.0, &term.matrix, &self.state_at(tau - term.delay), 1.0);
            }
        }
        out
    }

    fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.next_bp < self.breakpoints.len() && self.breakpoints[self.next_bp] <= self.t {
            self.next_bp += 1;
        }
        while self.t < t_end {
            let t0 = self.t;
            let forcing = self.forcing(t0);
            let k1 = self.rhs(t0, &self.x, &forcing);
            loop {
                let mut stop = t_end;
                if let Some(&bp) = self.breakpoints.get(self.next_bp) {
                    stop = stop.min(bp);
                }
                let mut dt = self.dt.min(self.max_dt);
                let mut lands = false;
                if t0 + dt >= stop || stop - (t0 + dt) < 1e-9 * dt {
                    dt = stop - t0;
                    lands = true;
                }
                if dt < 1e-12 * t0.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t: t0 });
                }

                let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
                k.push(k1.clone());
                for s in 1..7 {
                    let mut xs = self.x.clone();
                    for (m, km) in k.iter().enumerate() {
                        if A[s][m] != 0.0 {
                            xs.axpy(dt * A[s][m], km, 1.0);
                        }
                    }
                    k.push(self.rhs(t0 + C[s] * dt, &xs, &forcing));
                }
                let mut x1 = self.x.clone();
                for (m, km) in k.iter().take(6).enumerate() {
                    if A[6][m] != 0.0 {
                        x1.axpy(dt * A[6][m], km, 1.0);
                    }
                }
                let mut err_sq = 0.0;
                for i in 0..x1.len() {
                    let e: f64 = (0..7).map(|m| E[m] * k[m][i]).sum::<f64>() * dt;
                    let sc = self.abs_tol + self.rel_tol * self.x[i].abs().max(x1[i].abs());
                    err_sq += (e / sc).powi(2);
                }
                let err = (err_sq / x1.len() as f64).sqrt();
                if !err.is_finite() {
                    self.dt = 0.2 * dt;
                    continue;
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if err <= 1.0 {
                    let t1 = if lands { stop } else { t0 + dt };
                    let f1 = k.pop().expect("seven stages");
                    self.segments.push(Segment {
                        t0,
                        t1,
                        x0: self.x.clone(),
                        x1: x1.clone(),
                        f0: k1,
                        f1,
                    });
                    self.x = x1;
                    self.t = t1;
                    // Keep the unconstrained estimate when a landing shortened the step.
                    self.dt = if lands { self.dt.max(dt * factor) } else { dt * factor };
                    while self.next_bp < self.breakpoints.len() && self.breakpoints[self.next_bp] <= self.t {
                        self.next_bp += 1;
                    }
                    break;
                }
                self.dt = dt * factor;
            }
        }
        Ok(())
    }

    /// `y(t)` for this input channel; `t` must not exceed the integrated horizon.
    fn output(&self, t: f64) -> DVector<f64> {
        let mut y = DVector::zeros(self.sys.outputs());
        for term in self.sys.c().terms() {
            y.gemv(1.0, &term.matrix, &self.state_at(t - term.delay), 1.0);
        }
        for term in self.sys.d().terms() {
            if term.delay <= t {
                y += term.matrix.column(self.input);
            }
        }
        y
    }
}

/// CSV with a `t` column followed by `y_ij` (output `i`, input `j`,
/// column-major). Several responses on the same grid are overlaid side by
/// side with `<name>:y_ij` headers.
pub fn write_step_csv<W: Write>(responses: &[TimeResponse], out: W) -> Result<()> {
    let Some(first) = responses.first() else {
        return Err(Error::InvalidArgument("no responses to write".into()));
    };
    if responses.iter().any(|r| r.times != first.times) {
        return Err(Error::InvalidArgument(
            "overlaid step responses must share one time grid".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for r in responses {
        let (ny, nu) = r.outputs[0].shape();
        for j in 0..nu {
            for i in 0..ny {
                let ch = format!("y_{}{}", i + 1, j + 1);
                if responses.len() == 1 {
                    header.push(ch);
                } else {
                    header.push(format!("{}:{ch}", r.system_name.replace([',', '"', '\n'], "_")));
                }
            }
        }
    }
    w.write_record(&header)?;
    for (k, &t) in first.times.iter().enumerate() {
        let mut rec = vec![fmt_machine(t)];
        for r in responses {
            let y = &r.outputs[k];
            for j in 0..y.ncols() {
                for i in 0..y.nrows() {
                    rec.push(fmt_machine(y[(i, j)]));
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
