//! Benchmark systems, the benchmark registry, and the timing harness.
//!
//! Only the hot shower and the heated rod are generated here. The other
//! registered problems are published elsewhere; their matrices must be
//! supplied as system files (see `data/README.md`) and are checked against
//! the registered dimensions on load.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analysis::{h2_norm_report, QuadDiagnostics};
use crate::balancing::balanced_truncation;
use crate::error::{Error, Result};
use crate::freqresp::fmt_machine;
use crate::options::QuadOptions;
use crate::random::random_rtds;
use crate::system::{load_rtds, Rtds};

/// Closed-form H2 norm of the hot shower `x' = -a x(t - h) + b u, y = c x`.
pub fn hot_shower_h2(a: f64, b: f64, c: f64, h: f64) -> f64 {
    let ah = a * h;
    ((c * c * b * b / (2.0 * a)) * ah.cos() / (1.0 - ah.sin())).sqrt()
}

/// The hot shower system and its closed-form H2 norm. The system is
/// exponentially stable, and the formula valid, for `0 < a h < pi / 2`.
pub fn hot_shower(a: f64, b: f64, c: f64, h: f64) -> Result<(Rtds, f64)> {
    if !(a > 0.0 && b > 0.0 && c > 0.0 && h > 0.0) || !(a * h < FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "hot shower needs positive a, b, c, h with a*h < pi/2 (got a={a}, b={b}, c={c}, h={h})"
        )));
    }
    let sys = Rtds::new(
        vec![(0.0, DMatrix::zeros(1, 1)), (h, DMatrix::from_element(1, 1, -a))],
        vec![(0.0, DMatrix::from_element(1, 1, b))],
        vec![(0.0, DMatrix::from_element(1, 1, c))],
        None,
        Some(format!("HS_h{h}")),
    )?;
    Ok((sys, hot_shower_h2(a, b, c, h)))
}

pub const HEATED_ROD_GAIN: f64 = 5.0;
pub const HEATED_ROD_DELAY: f64 = 1.0;

/// Largest feedback gain for which the heated rod is stable for every
/// delay: the smallest eigenvalue magnitude of the scaled Laplacian.
pub fn heated_rod_safe_gain(n: usize) -> f64 {
    let m = (n + 1) as f64;
    4.0 * m * m * (std::f64::consts::PI / (2.0 * m)).sin().powi(2)
}

/// Heated rod on `n` interior grid points of `[0, 1]`.
///
/// `A_0` is the central-difference Laplacian with Dirichlet ends, scaled by
/// `(n + 1)^2`. The delayed term is pointwise distributed feedback
/// `A_1 = -gain * diag(sin(pi x_k))` at `delay`, which keeps `A(jw)`
/// tridiagonal. Heat enters uniformly (`B = 1`) and the output is the mean
/// temperature (`C = 1^T / n`). Stable for any delay when
/// `|gain| < heated_rod_safe_gain(n)` (about `pi^2`).
pub fn heated_rod(n: usize, gain: f64, delay: f64) -> Result<Rtds> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("heated rod needs n >= 2, got {n}")));
    }
    if !(delay > 0.0 && delay.is_finite() && gain.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "heated rod needs a positive delay and finite gain (got delay={delay}, gain={gain})"
        )));
    }
    let m = (n + 1) as f64;
    let s = m * m;
    let mut a0 = DMatrix::zeros(n, n);
    for i in 0..n {
        a0[(i, i)] = -2.0 * s;
        if i + 1 < n {
            a0[(i, i + 1)] = s;
            a0[(i + 1, i)] = s;
        }
    }
    let profile = DVector::from_fn(n, |k, _| -gain * (std::f64::consts::PI * (k + 1) as f64 / m).sin());
    let a1 = DMatrix::from_diagonal(&profile);
    Rtds::new(
        vec![(0.0, a0), (delay, a1)],
        vec![(0.0, DMatrix::from_element(n, 1, 1.0))],
        vec![(0.0, DMatrix::from_element(1, n, 1.0 / n as f64))],
        None,
        Some(format!("heated_rod_n{n}")),
    )
}

fn oscillator(w: f64, zeta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -w * w, -2.0 * zeta * w])
}

/// Two lightly damped modes at 1 and 30 rad/s with weak delayed position
/// feedback. Used to compare band-limited and standard reduction.
pub fn two_resonance() -> Rtds {
    let mut a0 = DMatrix::zeros(4, 4);
    a0.view_mut((0, 0), (2, 2)).copy_from(&oscillator(1.0, 0.05));
    a0.view_mut((2, 2), (2, 2)).copy_from(&oscillator(30.0, 0.05));
    let mut a1 = DMatrix::zeros(4, 4);
    a1[(1, 0)] = -0.05;
    a1[(3, 2)] = -0.05;
    Rtds::new(
        vec![(0.0, a0), (0.1, a1)],
        vec![(0.0, DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 30.0]))],
        vec![(0.0, DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 1.0, 0.0]))],
        None,
        Some("two_resonance".into()),
    )
    .expect("fixed shapes")
}

/// Two-state system with one state delay; the running example of the
/// README.
pub fn two_state_example() -> Rtds {
    Rtds::new(
        vec![
            (0.0, DMatrix::from_row_slice(2, 2, &[-2.0, -1.0, -1.5, -0.5])),
            (1.0, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 1.0, 0.0])),
        ],
        vec![(0.0, DMatrix::from_column_slice(2, 1, &[1.0, -1.0]))],
        vec![(0.0, DMatrix::from_row_slice(1, 2, &[2.0, 0.2]))],
        None,
        Some("two_state".into()),
    )
    .expect("fixed shapes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Generated,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Collection {
    ModelReduction,
    H2,
    Both,
}

impl Collection {
    pub fn label(self) -> &'static str {
        match self {
            Collection::ModelReduction => "model-reduction set",
            Collection::H2 => "H2 set",
            Collection::Both => "model-reduction and H2 sets",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkEntry {
    pub id: &'static str,
    pub source: Source,
    pub collection: Collection,
    /// `(n, n_y, n_u)`.
    pub dims: (usize, usize, usize),
    /// Mechanical models whose listed size is the second-order dimension;
    /// files may hold either `n` or `2n` states.
    pub second_order: bool,
    /// `(m_A, m_B, m_C, m_D)`.
    pub delay_counts: (usize, usize, usize, usize),
    /// `None` when the delay is a user parameter.
    pub max_delay: Option<f64>,
    pub closed_form_h2: bool,
    pub description: &'static str,
}

impl BenchmarkEntry {
    /// File name looked up in the data directory for file-sourced entries.
    pub fn file_name(&self) -> String {
        format!("{}.json", self.id.replace('.', ""))
    }

    /// Checks a generated or loaded system against this row.
    pub fn check(&self, sys: &Rtds) -> Result<()> {
        let (n, ny, nu) = sys.dims();
        let n_ok = n == self.dims.0 || (self.second_order && n == 2 * self.dims.0);
        let mut problems = Vec::new();
        if !n_ok || (ny, nu) != (self.dims.1, self.dims.2) {
            problems.push(format!("dims ({n},{ny},{nu}) != {:?}", self.dims));
        }
        if sys.delay_counts() != self.delay_counts {
            problems.push(format!("delay counts {:?} != {:?}", sys.delay_counts(), self.delay_counts));
        }
        if let Some(h) = self.max_delay {
            if (sys.max_delay() - h).abs() > 1e-12 * h {
                problems.push(format!("max delay {} != {h}", sys.max_delay()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Dimension(format!("benchmark {}: {}", self.id, problems.join("; "))))
        }
    }
}

pub fn registry() -> Vec<BenchmarkEntry> {
    use Collection::*;
    use Source::*;
    let row = |id, source, collection, dims, second_order, delay_counts, max_delay, description| BenchmarkEntry {
        id,
        source,
        collection,
        dims,
        second_order,
        delay_counts,
        max_delay,
        closed_form_h2: false,
        description,
    };
    vec![
        BenchmarkEntry {
            closed_form_h2: true,
            ..row("HS", Generated, H2, (1, 1, 1), false, (1, 0, 0, 0), None, "hot shower, delay chosen by the user")
        },
        row("Ex.2b", File, H2, (3, 1, 1), false, (2, 0, 0, 0), Some(1.0), "third-order synthetic model with two state delays"),
        row("Ex.3", File, H2, (9, 1, 1), false, (2, 0, 0, 0), Some(3.0), "discretized PDE with two state delays"),
        row("HE", File, H2, (5, 1, 5), false, (7, 0, 0, 0), Some(40.0), "heat exchanger with state feedback and PI control"),
        row("HR2", Generated, Both, (100, 1, 1), false, (1, 0, 0, 0), Some(1.0), "heated rod, 100 grid points"),
        row("HR4", Generated, H2, (10_000, 1, 1), false, (1, 0, 0, 0), Some(1.0), "heated rod, 10000 grid points"),
        row("MS", File, ModelReduction, (1000, 1, 1), true, (1, 0, 0, 0), Some(2.0), "coupled mass-spring-damper chain with delayed feedback"),
        row("P8V", File, ModelReduction, (23, 1, 1), false, (1, 0, 0, 0), Some(0.005), "platoon of eight vehicles"),
        row("Ex.1", File, ModelReduction, (6, 1, 1), false, (1, 0, 1, 0), Some(1.6), "sixth-order synthetic model with state and output delay"),
        row("SOSPD", File, ModelReduction, (2000, 1, 1), true, (1, 0, 0, 0), Some(1.0), "second-order system with proportional damping"),
    ]
}

pub fn lookup(id: &str) -> Result<BenchmarkEntry> {
    registry()
        .into_iter()
        .find(|e| e.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::UnknownBenchmark(id.to_string()))
}

/// Parameters of the generated benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchParams {
    /// Hot shower `(a, b, c, h)`.
    pub shower: (f64, f64, f64, f64),
    pub rod_gain: f64,
    pub rod_delay: f64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            shower: (1.0, 1.0, 1.0, 0.5),
            rod_gain: HEATED_ROD_GAIN,
            rod_delay: HEATED_ROD_DELAY,
        }
    }
}

/// Builds (or loads from `data_dir`) the system of a registered benchmark,
/// together with its closed-form H2 norm when one exists.
pub fn benchmark_system(entry: &BenchmarkEntry, params: &BenchParams, data_dir: &Path) -> Result<(Rtds, Option<f64>)> {
    let (sys, exact) = match entry.id {
        "HS" => {
            let (a, b, c, h) = params.shower;
            let (sys, v) = hot_shower(a, b, c, h)?;
            (sys, Some(v))
        }
        "HR2" => (heated_rod(100, params.rod_gain, params.rod_delay)?, None),
        "HR4" => (heated_rod(10_000, params.rod_gain, params.rod_delay)?, None),
        _ => {
            let path: PathBuf = data_dir.join(entry.file_name());
            if !path.exists() {
                return Err(Error::MissingBenchmarkData {
                    id: entry.id.to_string(),
                    collection: entry.collection.label(),
                    path,
                });
            }
            (load_rtds(&path)?, None)
        }
    };
    if entry.source == Source::File || entry.max_delay.is_some() {
        entry.check(&sys)?;
    }
    Ok((sys.with_name(entry.id), exact))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BenchTask {
    H2,
    Reduce { order: usize },
}

impl std::str::FromStr for BenchTask {
    type Err = Error;

    /// `h2` or `reduce:K`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("h2") {
            return Ok(BenchTask::H2);
        }
        if let Some(k) = s.strip_prefix("reduce:") {
            if let Ok(order) = k.parse() {
                return Ok(BenchTask::Reduce { order });
            }
        }
        Err(Error::InvalidArgument(format!("task must be h2 or reduce:K, got {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub id: String,
    pub dims: (usize, usize, usize),
    pub delay_counts: (usize, usize, usize, usize),
    pub max_delay: f64,
    pub task: BenchTask,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_h2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hsv: Option<Vec<f64>>,
    pub wall_time_s: f64,
    pub diagnostics: QuadDiagnostics,
    #[serde(skip)]
    pub reduced: Option<Rtds>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_benchmark(
    id: &str,
    task: BenchTask,
    opts: &QuadOptions,
    params: &BenchParams,
    data_dir: &Path,
) -> Result<BenchmarkReport> {
    let entry = lookup(id)?;
    let (sys, exact) = benchmark_system(&entry, params, data_dir)?;
    let start = Instant::now();
    let mut report = BenchmarkReport {
        id: entry.id.to_string(),
        dims: sys.dims(),
        delay_counts: sys.delay_counts(),
        max_delay: sys.max_delay(),
        task,
        h2: None,
        analytic_h2: None,
        relative_error: None,
        hsv: None,
        wall_time_s: 0.0,
        diagnostics: QuadDiagnostics::default(),
        reduced: None,
    };
    match task {
        BenchTask::H2 => {
            let r = h2_norm_report(&sys, opts)?;
            report.h2 = Some(r.value);
            report.diagnostics = r.diagnostics;
            if let Some(v) = exact {
                report.analytic_h2 = Some(v);
                report.relative_error = Some((r.value - v).abs() / v.abs().max(f64::MIN_POSITIVE));
            }
        }
        BenchTask::Reduce { order } => {
            let red = balanced_truncation(&sys, order, opts, None)?;
            report.hsv = Some(red.info.hsv.clone());
            report.diagnostics = red.info.gramians.diagnostics;
            report.reduced = Some(red.system.with_name(format!("{}_r{order}", entry.id)));
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// State dimensions of the scaling study, up to `max_n`:
/// 1..=10, 20..=100 step 10, 200..=500 step 100.
pub fn study_sizes(max_n: usize) -> Vec<usize> {
    (1..=10)
        .chain((20..=100).step_by(10))
        .chain((200..=500).step_by(100))
        .filter(|&n| n <= max_n)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepTask {
    H2,
    /// Both gramians, the cost that dominates balancing.
    Gram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub runs: usize,
}

/// Times `task` on `random_rtds(n, seed)` for every size and seed. Systems
/// run one after another; each run uses the data-parallel pool internally.
pub fn timing_sweep(sizes: &[usize], seeds: &[u64], task: SweepTask, opts: &QuadOptions) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("timing sweep needs at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut times = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let sys = random_rtds(n, seed)?;
            let start = Instant::now();
            match task {
                SweepTask::H2 => {
                    h2_norm_report(&sys, opts)?;
                }
                SweepTask::Gram => {
                    crate::analysis::gramians(&sys, crate::analysis::GramianKind::Both, opts)?;
                }
            }
            times.push(start.elapsed().as_secs_f64());
        }
        let (mean_s, std_s) = mean_std(&times);
        log::info!("sweep n={n}: mean {mean_s:.3e} s");
        rows.push(SweepRow {
            n,
            mean_s,
            std_s,
            runs: times.len(),
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation (zero for a single run).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `log(mean_s)` against `log(n)`, i.e. the
/// empirical scaling exponent. `None` with fewer than two usable rows.
pub fn loglog_slope(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_s > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean_s.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// `n,mean_s,std_s,runs`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "mean_s", "std_s", "runs"])?;
    for r in rows {
        w.write_record([r.n.to_string(), fmt_machine(r.mean_s), fmt_machine(r.std_s), r.runs.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
