//! `rtds` command-line tool.
//!
//! Machine-readable output (`key=value` lines, CSV, JSON) carries 17
//! significant digits; summary tables use 5. Failures print one line
//! `error: kind=<usage|data|numerical> reason=<text>` on stderr and exit
//! with 2, 3 or 4 respectively.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rtds::analysis::{gramians, h2_norm_report, GramianKind};
use rtds::balancing::{balanced_realization, balanced_truncation, balancing_info, BalancingInfo, RankPolicy};
use rtds::benchmarks::{run_benchmark, study_sizes, timing_sweep, write_sweep_csv, BenchParams, BenchTask, SweepTask};
use rtds::freqresp::{fmt_machine, freq_grid, log_grid, write_bode_csv, write_sigma_csv, DEFAULT_GRID_POINTS};
use rtds::simulation::{step_responses, write_step_csv, StepOptions};
use rtds::{load_rtds, random_rtds, save_rtds, Error, ErrorKind, FreqInterval, QuadOptions};

#[derive(Parser, Debug)]
#[command(name = "rtds", version, about = "Analysis and balanced reduction of retarded time-delay systems")]
struct Cli {
    /// Worker threads for the data-parallel loops (default: all cores)
    #[arg(long, global = true, env = "RTDS_THREADS", value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct QuadArgs {
    /// Use the sparse resolvent factorization
    #[arg(long)]
    sparse: bool,
    /// Relative quadrature tolerance
    #[arg(long, value_name = "R", default_value_t = 1e-6, allow_negative_numbers = true)]
    rel_tol: f64,
    /// Absolute quadrature tolerance
    #[arg(long, value_name = "A", default_value_t = 1e-10, allow_negative_numbers = true)]
    abs_tol: f64,
    /// Restrict the integrals to the band [LO, HI) rad/s; HI may be inf
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    freq_int: Option<Vec<f64>>,
}

impl QuadArgs {
    fn options(&self) -> rtds::Result<QuadOptions> {
        let mut opts = QuadOptions::default()
            .with_tolerances(self.rel_tol, self.abs_tol)
            .with_sparse(self.sparse);
        if let Some(b) = &self.freq_int {
            opts = opts.with_interval(FreqInterval::new(b[0], b[1])?);
        }
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Lowest frequency in rad/s
    #[arg(long, default_value_t = 1e-2)]
    wmin: f64,
    /// Highest frequency in rad/s
    #[arg(long, default_value_t = 1e2)]
    wmax: f64,
    /// Number of log-spaced frequencies
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    points: usize,
    /// Output CSV (default: stdout)
    #[arg(short, long, value_name = "CSV")]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Which {
    /// Both gramians
    Co,
    /// Controllability gramian
    C,
    /// Observability gramian
    O,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// H2 norm (frequency-limited with --freq-int)
    H2 {
        /// System file (JSON)
        system: PathBuf,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Controllability and/or observability gramians
    Gram {
        /// System file (JSON)
        system: PathBuf,
        /// Which gramians to compute
        #[arg(long, value_enum, default_value_t = Which::Co)]
        which: Which,
        /// Output file; .json writes the gramian record, anything else CSV
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Balanced realization
    Balreal {
        /// System file (JSON)
        system: PathBuf,
        /// Balanced system file to write
        #[arg(short, long, value_name = "JSON")]
        output: PathBuf,
        /// Also write the balancing info (gramians, T, T^-1, hsv)
        #[arg(long, value_name = "JSON")]
        info: Option<PathBuf>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Balanced truncation to a given order
    Balred {
        /// System file (JSON)
        system: PathBuf,
        /// Reduced order
        #[arg(long, value_name = "K")]
        order: usize,
        /// Balancing info: reused when the file exists, written otherwise
        #[arg(long, value_name = "JSON")]
        info: Option<PathBuf>,
        /// Reduced system file to write
        #[arg(short, long, value_name = "JSON")]
        output: PathBuf,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Bode magnitude (dB) and unwrapped phase (deg) as CSV
    Bode {
        /// System file (JSON)
        system: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Singular values of G(jw) as CSV
    Sigma {
        /// System file (JSON)
        system: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Step responses; several systems share one time grid in one CSV
    Step {
        /// System files (JSON)
        #[arg(required = true)]
        systems: Vec<PathBuf>,
        /// Final time (default: until the responses settle)
        #[arg(long, value_name = "T")]
        tfinal: Option<f64>,
        /// Number of output samples
        #[arg(long, default_value_t = 1001)]
        points: usize,
        /// Output CSV (default: stdout)
        #[arg(short, long, value_name = "CSV")]
        output: Option<PathBuf>,
    },
    /// Run a registered benchmark, or the scaling sweep with id `sweep`
    Bench {
        /// Benchmark id (HS, HR2, HR4, Ex.2b, Ex.3, HE, MS, P8V, Ex.1, SOSPD) or `sweep`
        id: String,
        /// h2 or reduce:K for benchmarks; h2 or gram for the sweep
        #[arg(long, default_value = "h2")]
        task: String,
        /// Directory holding the file-sourced benchmark systems
        #[arg(long, value_name = "DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Hot-shower delay
        #[arg(long, default_value_t = 0.5)]
        hs_delay: f64,
        /// Reduced system (reduce task) or timing CSV (sweep) to write
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Largest state dimension of the sweep
        #[arg(long, default_value_t = 100)]
        max_n: usize,
        /// Random systems per sweep size
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Random delay system for scaling studies
    Random {
        /// State dimension
        #[arg(long)]
        n: usize,
        /// Generator seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// System file to write
        #[arg(short, long, value_name = "JSON")]
        output: PathBuf,
    },
}

/// `println!` that exits quietly when stdout is closed (e.g. `| head`).
macro_rules! out {
    ($($t:tt)*) => {{
        if writeln!(io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

fn human(v: f64) -> String {
    format!("{v:.4e}")
}

fn create(path: &Path) -> rtds::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn sink(path: Option<&Path>) -> rtds::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn print_diagnostics(d: &rtds::QuadDiagnostics) {
    out!("evaluations={}", d.evaluations);
    out!("panels={}", d.panels);
    out!("abs_error_estimate={}", fmt_machine(d.abs_error_estimate));
}

fn print_matrix(label: &str, m: &DMatrix<f64>) {
    out!("{label} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>12}", human(m[(i, j)]))).collect();
        out!("  {}", row.join(" "));
    }
}

fn write_gramian_csv(path: &Path, pair: &rtds::GramianPair) -> rtds::Result<()> {
    let mut out = create(path)?;
    let n = pair.wc.as_ref().or(pair.wo.as_ref()).map_or(0, |m| m.nrows());
    let mut header = vec!["gramian".to_string(), "row".to_string()];
    header.extend((1..=n).map(|j| format!("col_{j}")));
    let io_err = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for (tag, m) in [("wc", &pair.wc), ("wo", &pair.wo)] {
        if let Some(m) = m {
            for i in 0..n {
                let vals: Vec<String> = (0..n).map(|j| fmt_machine(m[(i, j)])).collect();
                writeln!(out, "{tag},{},{}", i + 1, vals.join(",")).map_err(io_err)?;
            }
        }
    }
    out.flush().map_err(io_err)
}

fn print_hsv(info: &BalancingInfo) {
    out!("hsv:");
    for (k, (s, e)) in info.hsv.iter().zip(info.energy_fractions()).enumerate() {
        out!("  {:>3}  {:>12}  {:>12}", k + 1, human(*s), human(e));
    }
}

fn run(cli: Cli) -> rtds::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        if !rtds::par::configure_threads(t) {
            log::warn!("could not size the thread pool to {t}; using {}", rtds::par::current_threads());
        }
    }
    match cli.command {
        Command::H2 { system, quad } => {
            let opts = quad.options()?;
            let sys = load_rtds(&system)?;
            let r = h2_norm_report(&sys, &opts)?;
            out!("h2={}", fmt_machine(r.value));
            print_diagnostics(&r.diagnostics);
        }
        Command::Gram {
            system,
            which,
            output,
            quad,
        } => {
            let opts = quad.options()?;
            let sys = load_rtds(&system)?;
            let kind = match which {
                Which::Co => GramianKind::Both,
                Which::C => GramianKind::Controllability,
                Which::O => GramianKind::Observability,
            };
            let pair = gramians(&sys, kind, &opts)?;
            match output {
                Some(p) if p.extension().is_some_and(|e| e == "json") => {
                    let text = serde_json::to_string_pretty(&pair)?;
                    std::fs::write(&p, text).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                }
                Some(p) => write_gramian_csv(&p, &pair)?,
                None => {
                    if let Some(wc) = &pair.wc {
                        print_matrix("Wc", wc);
                    }
                    if let Some(wo) = &pair.wo {
                        print_matrix("Wo", wo);
                    }
                }
            }
            print_diagnostics(&pair.diagnostics);
        }
        Command::Balreal {
            system,
            output,
            info,
            quad,
        } => {
            let opts = quad.options()?;
            let sys = load_rtds(&system)?;
            let (bal, bal_info) = balanced_realization(&sys, &opts)?;
            save_rtds(&bal, &output)?;
            if let Some(p) = info {
                bal_info.save(&p)?;
            }
            print_hsv(&bal_info);
            print_diagnostics(&bal_info.gramians.diagnostics);
        }
        Command::Balred {
            system,
            order,
            info,
            output,
            quad,
        } => {
            let opts = quad.options()?;
            let sys = load_rtds(&system)?;
            let existing = match &info {
                Some(p) if p.exists() => Some(BalancingInfo::load(p)?),
                _ => None,
            };
            let red = match existing {
                Some(i) => balanced_truncation(&sys, order, &opts, Some(&i))?,
                None => {
                    let fresh = balancing_info(&sys, &opts, RankPolicy::default())?;
                    if let Some(p) = &info {
                        fresh.save(p)?;
                    }
                    let mut red = balanced_truncation(&sys, order, &opts, Some(&fresh))?;
                    red.evaluations = fresh.gramians.diagnostics.evaluations;
                    red
                }
            };
            let name = format!("{}_r{order}", sys.display_name());
            save_rtds(&red.system.with_name(name), &output)?;
            out!("order={order}");
            out!("evaluations={}", red.evaluations);
            print_hsv(&red.info);
        }
        Command::Bode { system, grid } => {
            let sys = load_rtds(&system)?;
            let fr = freq_grid(&sys, &log_grid(grid.wmin, grid.wmax, grid.points)?)?;
            write_bode_csv(&fr, sink(grid.output.as_deref())?)?;
        }
        Command::Sigma { system, grid } => {
            let sys = load_rtds(&system)?;
            let fr = freq_grid(&sys, &log_grid(grid.wmin, grid.wmax, grid.points)?)?;
            write_sigma_csv(&fr, sink(grid.output.as_deref())?)?;
        }
        Command::Step {
            systems,
            tfinal,
            points,
            output,
        } => {
            let mut loaded = Vec::with_capacity(systems.len());
            for (k, p) in systems.iter().enumerate() {
                let sys = load_rtds(p)?;
                // Overlaid columns need distinct names.
                let name = match &sys.name {
                    Some(n) if !loaded.iter().any(|s: &rtds::Rtds| s.name.as_deref() == Some(n)) => n.clone(),
                    _ => p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| format!("sys{}", k + 1)),
                };
                loaded.push(sys.with_name(name));
            }
            let opts = StepOptions {
                t_final: tfinal,
                points,
                ..StepOptions::default()
            };
            let responses = step_responses(&loaded, &opts)?;
            write_step_csv(&responses, sink(output.as_deref())?)?;
        }
        Command::Bench {
            id,
            task,
            data_dir,
            hs_delay,
            output,
            max_n,
            seeds,
            quad,
        } => {
            let opts = quad.options()?;
            if id.eq_ignore_ascii_case("sweep") {
                let task = match task.as_str() {
                    "h2" => SweepTask::H2,
                    "gram" => SweepTask::Gram,
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "sweep task must be h2 or gram, got {other:?}"
                        )))
                    }
                };
                if seeds == 0 {
                    return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
                }
                let seeds: Vec<u64> = (0..seeds).collect();
                let rows = timing_sweep(&study_sizes(max_n), &seeds, task, &opts)?;
                write_sweep_csv(&rows, sink(output.as_deref())?)?;
                if let Some(s) = rtds::benchmarks::loglog_slope(&rows) {
                    eprintln!("log-log slope {}", human(s));
                }
                return Ok(());
            }
            let task: BenchTask = task.parse()?;
            let params = BenchParams {
                shower: (1.0, 1.0, 1.0, hs_delay),
                ..BenchParams::default()
            };
            let report = run_benchmark(&id, task, &opts, &params, &data_dir)?;
            if let (Some(p), Some(red)) = (&output, &report.reduced) {
                save_rtds(red, p)?;
            }
            out!("{}", report.to_json());
        }
        Command::Random { n, seed, output } => {
            let sys = random_rtds(n, seed)?;
            save_rtds(&sys, &output)?;
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage reason={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Usage => ("usage", 2),
                ErrorKind::Data => ("data", 3),
                ErrorKind::Numerical => ("numerical", 4),
            };
            eprintln!("error: kind={kind} reason={}", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
