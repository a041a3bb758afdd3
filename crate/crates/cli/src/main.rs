//! `icfb`: rate regions and simulations for two-user interference channels
//! with generalized or intermittent feedback.
//!
//! Exit codes: 0 ok, 1 comparison negative, 2 parse, 3 semantic, 4 resource.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use icfb::bounds::{
    det_family, gf_family, search_union, BoundsError, DetIfInputDistribution, GfInputDistribution, SearchConfig,
    SystemOptions,
};
use icfb::channels::{ldic_build, ChannelError, FeedbackStateSpec, LdicParams};
use icfb::formats::{fmt_num, polyline_tsv, sha256_hex, ChannelConfig, FormatError, RegionFile, RegionMetadata};
use icfb::ldic_capacity::{capacity_region, capacity_sweep, sweep_table, CapacityError};
use icfb::probability::ProbabilityError;
use icfb::regions::{is_subset, max_violation, max_weighted, RateRegion};
use icfb::simulator::{
    covering_success_rate, sample_states, simulate_scheme, trial_log_tsv, CoveringConfig, CoveringDistribution,
    SchemeConfig, SchemeRates, SimError,
};

const REGION_TOL: f64 = 1e-9;

#[derive(Debug)]
enum CliError {
    Parse(String),
    Semantic(String),
    Resource(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Parse(_) => 2,
            Self::Semantic(_) => 3,
            Self::Resource(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Parse(m) | Self::Semantic(m) | Self::Resource(m) => m,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Parse(_) => Self::Parse(e.to_string()),
            _ => Self::Semantic(e.to_string()),
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        Self::Semantic(e.to_string())
    }
}

impl From<CapacityError> for CliError {
    fn from(e: CapacityError) -> Self {
        Self::Semantic(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Probability(ProbabilityError::CellCapExceeded { .. }) | BoundsError::TooManyEvaluations { .. } => {
                Self::Resource(e.to_string())
            }
            _ => Self::Semantic(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::CapExceeded { .. } | SimError::Probability(ProbabilityError::CellCapExceeded { .. }) => {
                Self::Resource(e.to_string())
            }
            SimError::Bounds(b) => b.into(),
            _ => Self::Semantic(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "icfb", version, about = "Rate regions for interference channels with feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity region of a linear deterministic channel.
    Capacity {
        config: PathBuf,
        /// Override the feedback probability of encoder 1.
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        /// Comma-separated feedback probabilities; evaluates the full grid.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        /// Only use grid points with `p1 = p2`.
        #[arg(long, requires = "sweep")]
        diagonal: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Vertex polyline for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Achievable region as a union over a family of input distributions.
    Inner {
        config: PathBuf,
        #[arg(long, value_enum)]
        theorem: Theorem,
        #[arg(long, value_enum, default_value = "grid")]
        search: Search,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random samples (defaults to 0 for `grid`, 64 for `random`).
        #[arg(long)]
        samples: Option<usize>,
        /// Simplex grid resolution used by `grid`.
        #[arg(long, default_value_t = 4)]
        grid: usize,
        /// JSON array of input distributions, used by `--search file`.
        #[arg(long)]
        family: Option<PathBuf>,
        /// Drop the rate-splitting side constraints.
        #[arg(long)]
        no_split_cap: bool,
        #[arg(long, default_value_t = 200_000)]
        max_evaluations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Compare two region files; exits 0 iff A ⊆ B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Monte Carlo runs on a linear deterministic channel.
    Simulate {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long = "B", default_value_t = 2)]
        blocks: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `R10,R11,R20,R22,Rhat1,Rhat2`
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        /// Compression rate for `covering`; defaults to `Rhat1` of `--rates`.
        #[arg(long)]
        rhat: Option<f64>,
        /// Test-channel flip probability for `covering`.
        #[arg(long, default_value_t = 0.1)]
        flip: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "schemeV")]
    SchemeV,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Search {
    Grid,
    Random,
    File,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Covering,
    Scheme,
    States,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Resource(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> CliResult<ChannelConfig> {
    Ok(ChannelConfig::parse(&read(path)?)?)
}

fn check_probability(p: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(CliError::Semantic(format!("feedback probability {p} outside [0, 1]")))
    }
}

fn feedback_with_overrides(cfg: &ChannelConfig, p1: Option<f64>, p2: Option<f64>) -> CliResult<FeedbackStateSpec> {
    let base = cfg.feedback()?;
    if p1.is_none() && p2.is_none() {
        return Ok(base);
    }
    let a = check_probability(p1.unwrap_or(base.p1()))?;
    let b = check_probability(p2.unwrap_or(base.p2()))?;
    let rho = match cfg {
        ChannelConfig::Ldic { state_correlation, .. } => *state_correlation,
        ChannelConfig::Table { .. } => 0.0,
    };
    Ok(FeedbackStateSpec::correlated(a, b, rho)?)
}

fn write_region(file: &RegionFile, out: Option<&Path>, plot: Option<&Path>) -> CliResult<()> {
    emit(out, &file.to_text())?;
    if let Some(p) = plot {
        write(p, &polyline_tsv(&file.region()))?;
    }
    Ok(())
}

fn cmd_capacity(
    config: &Path,
    p1: Option<f64>,
    p2: Option<f64>,
    sweep: Option<Vec<f64>>,
    diagonal: bool,
    out: Option<&Path>,
    plot: Option<&Path>,
) -> CliResult<u8> {
    let cfg = load_config(config)?;
    let params = cfg.ldic_params()?;
    if let Some(values) = sweep {
        let grid: Vec<(f64, f64)> = if diagonal {
            values.iter().map(|&v| (v, v)).collect()
        } else {
            values.iter().flat_map(|&a| values.iter().map(move |&b| (a, b))).collect()
        };
        let rows = capacity_sweep(&params, &grid)?;
        emit(out, &sweep_table(&rows))?;
        return Ok(0);
    }
    let fb = feedback_with_overrides(&cfg, p1, p2)?;
    let region = capacity_region(&params, fb.p1(), fb.p2())?;
    let meta = RegionMetadata {
        source: "capacity".into(),
        channel_hash: cfg.hash(),
        distribution_hash: sha256_hex(format!("{},{}", fmt_num(fb.p1()), fmt_num(fb.p2())).as_bytes()),
        tolerance: REGION_TOL,
    };
    write_region(&RegionFile::new(&region, meta), out, plot)?;
    Ok(0)
}

fn search_config(search: Search, seed: u64, samples: Option<usize>, grid: usize, no_split_cap: bool, max_evaluations: usize) -> SearchConfig {
    let (uniform, grid_resolution, samples) = match search {
        Search::Grid => (false, grid, samples.unwrap_or(0)),
        Search::Random => (false, 0, samples.unwrap_or(64)),
        Search::Uniform => (true, 0, 0),
        Search::File => (false, 0, 0),
    };
    SearchConfig {
        uniform,
        grid_resolution,
        samples,
        seed,
        max_evaluations,
        options: SystemOptions { split_cap: !no_split_cap },
        ..SearchConfig::default()
    }
}

fn read_family<D: serde::de::DeserializeOwned>(path: Option<&Path>) -> CliResult<Vec<D>> {
    let path = path.ok_or_else(|| CliError::Semantic("--search file needs --family".into()))?;
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn region_file<D: Serialize>(
    cfg: &ChannelConfig,
    source: &str,
    family: &[D],
    result: &icfb::bounds::SearchResult<D>,
) -> RegionFile {
    let family_hash = sha256_hex(serde_json::to_string(family).expect("serializable family").as_bytes());
    let meta = RegionMetadata {
        source: source.into(),
        channel_hash: cfg.hash(),
        distribution_hash: family_hash,
        tolerance: REGION_TOL,
    };
    RegionFile::new(&result.region, meta).with_witnesses(&result.witnesses)
}

#[allow(clippy::too_many_arguments)]
fn cmd_inner(
    config: &Path,
    theorem: Theorem,
    search: Search,
    scfg: SearchConfig,
    family_path: Option<&Path>,
    out: Option<&Path>,
    plot: Option<&Path>,
) -> CliResult<u8> {
    let cfg = load_config(config)?;
    let file = match theorem {
        Theorem::Two => {
            let params = cfg
                .ldic_params()
                .map_err(|_| CliError::Semantic("theorem 2 needs an ldic channel config".into()))?;
            let fb = cfg.feedback()?;
            let det = ldic_build(&params)?;
            let family: Vec<DetIfInputDistribution> = if search == Search::File {
                read_family(family_path)?
            } else {
                det_family([det.alphabets[0], det.alphabets[1]], &scfg)?
            };
            let opts = scfg.options;
            let result = search_union(family.clone(), |d| icfb::bounds::inner_region_det_if(&det, d, &fb, opts))?;
            region_file(&cfg, "inner:2", &family, &result)
        }
        Theorem::One | Theorem::SchemeV => {
            let ch = cfg
                .table_channel()
                .map_err(|_| CliError::Semantic("theorem 1 and schemeV need a table channel config".into()))?;
            let family: Vec<GfInputDistribution> = if search == Search::File {
                read_family(family_path)?
            } else {
                gf_family(&ch, &scfg)?
            };
            let opts = scfg.options;
            let scheme = matches!(theorem, Theorem::SchemeV);
            let result = search_union(family.clone(), |d| {
                if scheme {
                    icfb::bounds::scheme_v_region(d, &ch)
                } else {
                    icfb::bounds::inner_region_gf(d, &ch, opts)
                }
            })?;
            region_file(&cfg, if scheme { "inner:schemeV" } else { "inner:1" }, &family, &result)
        }
    };
    write_region(&file, out, plot)?;
    Ok(0)
}

fn load_region(path: &Path) -> CliResult<RateRegion> {
    let text = read(path)?;
    Ok(RegionFile::parse(&text)?.region())
}

fn cmd_compare(a: &Path, b: &Path, tol: f64) -> CliResult<u8> {
    let ra = load_region(a)?;
    let rb = load_region(b)?;
    let a_in_b = is_subset(&ra, &rb, tol);
    let b_in_a = is_subset(&rb, &ra, tol);
    let verdict = |v: bool| if v { "yes" } else { "no" };
    println!("A_subset_B\t{}", verdict(a_in_b));
    println!("B_subset_A\t{}", verdict(b_in_a));
    println!("max_violation_A_in_B\t{}", fmt_num(max_violation(&ra, &rb)));
    println!("max_violation_B_in_A\t{}", fmt_num(max_violation(&rb, &ra)));
    for (w1, w2) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        let best = |r: &RateRegion| max_weighted(r, w1, w2).map_or(0.0, |(v, _)| v);
        let (va, vb) = (best(&ra), best(&rb));
        println!(
            "gap_w{}_{}\tA={}\tB={}\tB_minus_A={}",
            w1 as u32,
            w2 as u32,
            fmt_num(va),
            fmt_num(vb),
            fmt_num(vb - va)
        );
    }
    Ok(if a_in_b { 0 } else { 1 })
}

/// Feedback observation of encoder 1 under uniform inputs, compressed
/// through a symmetric test channel that keeps the letter with probability
/// `1 - flip`.
fn feedback_covering_distribution(params: &LdicParams, fb: &FeedbackStateSpec, flip: f64) -> CliResult<CoveringDistribution> {
    if !(0.0..=1.0).contains(&flip) {
        return Err(CliError::Semantic(format!("flip probability {flip} outside [0, 1]")));
    }
    let det = ldic_build(params)?;
    let m = det.alphabets[1];
    let erasure = det.erasure2();
    let size = erasure + 1;
    let mut y = vec![0.0; size];
    for x2 in 0..m {
        y[det.t2(x2)] += fb.p1() / m as f64;
    }
    y[erasure] += 1.0 - fb.p1();
    let others = if size > 1 { flip / (size - 1) as f64 } else { 0.0 };
    let v_given_y: Vec<Vec<f64>> = (0..size)
        .map(|a| (0..size).map(|b| if size == 1 { 1.0 } else if a == b { 1.0 - flip } else { others }).collect())
        .collect();
    Ok(CoveringDistribution::new(vec![1.0], vec![y], vec![v_given_y])?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    config: &Path,
    mode: Mode,
    n: usize,
    blocks: usize,
    trials: usize,
    seed: u64,
    rates: Option<Vec<f64>>,
    rhat: Option<f64>,
    flip: f64,
    epsilon: f64,
    log: Option<&Path>,
) -> CliResult<u8> {
    let cfg = load_config(config)?;
    let params = cfg.ldic_params()?;
    let fb = cfg.feedback()?;
    if rates.as_ref().is_some_and(|r| r.len() != 6) {
        return Err(CliError::Parse("--rates takes six comma-separated values".into()));
    }
    let rates = rates.map(|r| SchemeRates {
        r10: r[0],
        r11: r[1],
        r20: r[2],
        r22: r[3],
        rhat1: r[4],
        rhat2: r[5],
    });
    match mode {
        Mode::States => {
            let trace = sample_states(n, &fb, seed)?;
            if let Some(path) = log {
                let mut text = String::from("i\ts1\ts2\n");
                for (i, (a, b)) in trace.states.iter().enumerate() {
                    text.push_str(&format!("{i}\t{}\t{}\n", *a as u8, *b as u8));
                }
                write(path, &text)?;
            }
            let [f1, f2] = trace.on_fractions();
            let se = |p: f64| (p * (1.0 - p) / n.max(1) as f64).sqrt();
            println!("p1_hat={} ± {}\tp2_hat={} ± {}\tn={n}", fmt_num(f1), fmt_num(se(f1)), fmt_num(f2), fmt_num(se(f2)));
        }
        Mode::Covering => {
            let rhat = rhat
                .or(rates.map(|r| r.rhat1))
                .ok_or_else(|| CliError::Semantic("covering needs --rhat or --rates".into()))?;
            let dist = feedback_covering_distribution(&params, &fb, flip)?;
            let report = covering_success_rate(&dist, &CoveringConfig::new(n, rhat, epsilon, trials, seed))?;
            if let Some(path) = log {
                let mut text = String::from("trial\tsuccess\n");
                for (i, ok) in report.outcomes.iter().enumerate() {
                    text.push_str(&format!("{i}\t{}\n", *ok as u8));
                }
                write(path, &text)?;
            }
            println!(
                "success_rate={} ± {}\ttrials={}\tI={}",
                fmt_num(report.rate),
                fmt_num(report.stderr),
                report.trials,
                fmt_num(dist.compression_rate()?)
            );
        }
        Mode::Scheme => {
            let rates = rates.ok_or_else(|| CliError::Semantic("scheme needs --rates".into()))?;
            let scfg = SchemeConfig::new(n, blocks, rates, epsilon, trials, seed);
            let report = simulate_scheme(&params, &fb, &scfg)?;
            if let Some(path) = log {
                write(path, &trial_log_tsv(&report.log))?;
            }
            println!("{}", report.summary());
        }
    }
    Ok(0)
}

fn init_workers() -> CliResult<()> {
    let Ok(v) = std::env::var("ICFB_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| CliError::Parse(format!("ICFB_WORKERS={v} is not a worker count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Resource(e.to_string()))
}

fn run(cli: Cli) -> CliResult<u8> {
    init_workers()?;
    match cli.command {
        Command::Capacity {
            config,
            p1,
            p2,
            sweep,
            diagonal,
            out,
            plot,
        } => cmd_capacity(&config, p1, p2, sweep, diagonal, out.as_deref(), plot.as_deref()),
        Command::Inner {
            config,
            theorem,
            search,
            seed,
            samples,
            grid,
            family,
            no_split_cap,
            max_evaluations,
            out,
            plot,
        } => {
            let scfg = search_config(search, seed, samples, grid, no_split_cap, max_evaluations);
            cmd_inner(&config, theorem, search, scfg, family.as_deref(), out.as_deref(), plot.as_deref())
        }
        Command::Compare { a, b, tol } => cmd_compare(&a, &b, tol),
        Command::Simulate {
            config,
            mode,
            n,
            blocks,
            trials,
            seed,
            rates,
            rhat,
            flip,
            epsilon,
            log,
        } => cmd_simulate(&config, mode, n, blocks, trials, seed, rates, rhat, flip, epsilon, log.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
