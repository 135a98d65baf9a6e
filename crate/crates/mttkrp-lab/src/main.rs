//! Command-line front end: sequential and parallel simulation runs, bound
//! reports, and strong-scaling sweeps, all emitted as CSV.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mttkrp_lab::bounds::{self, ProblemShape};
use mttkrp_lab::error::Error;
use mttkrp_lab::io;
use mttkrp_lab::memmodel::{ledger_csv_row, MemoryMachine, LEDGER_CSV_HEADER};
use mttkrp_lab::parsim::{
    par_general_mttkrp, par_stationary_mttkrp, ArithMode, CommLedger, ParRun, ProcCounters,
    ProcessorGrid,
};
use mttkrp_lab::planner::{self, choose_block_size, choose_grid, ParAlg, SweepSpec};
use mttkrp_lab::seq::{mttkrp_oracle, mttkrp_seq_blocked, mttkrp_seq_unblocked};
use mttkrp_lab::tensor::MttkrpProblem;
use mttkrp_lab::Result;

#[derive(Parser)]
#[command(
    name = "mttkrp-lab",
    version,
    about = "Dense MTTKRP algorithms with exact communication accounting",
    after_help = "Exit codes: 0 success, 2 invalid configuration, 3 infeasible plan, 4 verification failure."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sequential algorithm and print its load/store ledger.
    Seq(SeqArgs),
    /// Run a parallel algorithm and print per-processor word counts.
    Par(ParArgs),
    /// Evaluate the communication lower bounds for given parameters.
    Bounds(BoundsArgs),
    /// Model a strong-scaling sweep over processor counts.
    Sweep(SweepArgs),
    /// Run every algorithm against the direct-summation reference.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Synthetic problem spec `d1,...,dN:R[@seed]`
    #[arg(long)]
    synthetic: Option<String>,
    /// Problem file (header `N I_1 .. I_N R n`, then values)
    #[arg(long)]
    input: Option<String>,
    /// Shortcut: order-N cubical synthetic problem with dims 4^N, R = 2
    #[arg(short = 'N', long = "order")]
    order: Option<usize>,
    /// Target mode, 1-based (synthetic problems; files carry their own)
    #[arg(long)]
    mode: Option<usize>,
    /// Seed for synthetic values when the spec has no `@seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// key=value file supplying defaults for omitted flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeqArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Fast memory capacity in words
    #[arg(long = "M")]
    memory: Option<u128>,
    /// Block size (default: largest feasible for M)
    #[arg(long = "b")]
    block: Option<usize>,
    /// blocked | unblocked
    #[arg(long)]
    alg: Option<String>,
    /// Pre-populate fast memory with the first M words touched
    #[arg(long, default_value_t = false)]
    warm_start: bool,
    /// Also compare the result against the reference
    #[arg(long, default_value_t = false)]
    verify: bool,
}

#[derive(Args)]
struct ParArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Processor grid `P0xP1x...xPN`
    #[arg(long)]
    grid: Option<String>,
    /// Processor count (grid chosen by the planner)
    #[arg(long = "P")]
    procs: Option<u128>,
    /// stationary | general
    #[arg(long)]
    alg: Option<String>,
    /// atomic | krp
    #[arg(long)]
    arith: Option<String>,
    /// Also compare the gathered result against the reference
    #[arg(long, default_value_t = false)]
    verify: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Tensor order (validated against --dims)
    #[arg(short = 'N', long = "order")]
    order: Option<usize>,
    /// Dimensions, e.g. `4096^3` or `16,16,8`
    #[arg(long)]
    dims: String,
    /// Rank R
    #[arg(long = "R")]
    rank: u64,
    /// Fast/local memory M
    #[arg(long = "M")]
    memory: Option<u128>,
    /// Processor count P
    #[arg(long = "P")]
    procs: Option<u128>,
    /// Tensor-distribution imbalance (>= 1)
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Factor-distribution imbalance (>= 1)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// The 3-way strong-scaling configuration (I = 2^45, R = 2^15)
    #[arg(long, default_value_t = false)]
    fig3: bool,
    /// Dimensions for a custom sweep
    #[arg(long)]
    dims: Option<String>,
    /// Rank for a custom sweep
    #[arg(long = "R")]
    rank: Option<u64>,
    /// Sweep P over 2^0..=2^MAX
    #[arg(long)]
    p_pow2: Option<u32>,
    /// Explicit comma-separated list of processor counts
    #[arg(long)]
    p_list: Option<String>,
    /// Also write a space-separated table for plotting tools
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Fast memory capacity (default: fits block size 2)
    #[arg(long = "M")]
    memory: Option<u128>,
    /// Block size for the blocked algorithm
    #[arg(long = "b")]
    block: Option<usize>,
    /// Grid for the parallel algorithms (default 1x2x...x2 when feasible)
    #[arg(long)]
    grid: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::InvalidProblem(_) => 2,
        Error::InfeasibleMachine(_)
        | Error::InfeasibleBlock(_)
        | Error::InfeasiblePlan(_)
        | Error::Shape(_)
        | Error::Distribution(_) => 3,
        Error::CapacityViolation(_) | Error::SimulatorBug(_) => 1,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Seq(a) => cmd_seq(a),
        Cmd::Par(a) => cmd_par(a),
        Cmd::Bounds(a) => cmd_bounds(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Verify(a) => cmd_verify(a),
    }
}

type Config = HashMap<String, String>;

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        None => Ok(Config::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("cannot read config: {e}")))?;
            Ok(io::parse_config(&text)?.into_iter().collect())
        }
    }
}

/// Flags win over config values; config fills in what was omitted.
fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("config {key}={v}: unparsable value"))),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
    }
}

/// Resolves the problem source: --synthetic, --input, or the -N shortcut.
fn resolve_problem(args: &ProblemArgs, cfg: &Config) -> Result<(MttkrpProblem, String)> {
    let synthetic = pick(args.synthetic.clone(), cfg, "synthetic")?;
    let input = pick(args.input.clone(), cfg, "input")?;
    let order = pick(args.order, cfg, "order")?;
    let mode1 = pick(args.mode, cfg, "mode")?.unwrap_or(1);
    let seed = pick(args.seed, cfg, "seed")?.unwrap_or(42);
    match (synthetic, input, order) {
        (Some(s), None, _) => {
            let src = if s.starts_with("synthetic:") {
                s
            } else {
                format!("synthetic:{s}")
            };
            Ok((io::load_problem(&src, mode1, seed)?, src))
        }
        (None, Some(f), _) => Ok((io::load_problem(&f, mode1, seed)?, f)),
        (None, None, Some(n)) => {
            let src = format!("synthetic:{}:2@{seed}", vec!["4"; n].join(","));
            Ok((io::load_problem(&src, mode1, seed)?, src))
        }
        (Some(_), Some(_), _) => Err(Error::InvalidInput(
            "give exactly one of --synthetic and --input".into(),
        )),
        (None, None, None) => Err(Error::InvalidInput(
            "no problem source: use --synthetic, --input, or -N".into(),
        )),
    }
}

fn cmd_seq(args: SeqArgs) -> Result<i32> {
    let cfg = load_config(&args.common.config)?;
    let (problem, source) = resolve_problem(&args.problem, &cfg)?;
    let n = problem.order();
    let memory = pick(args.memory, &cfg, "M")?
        .ok_or_else(|| Error::InvalidInput("seq requires --M".into()))?;
    if memory < (n + 2) as u128 {
        return Err(Error::InfeasibleMachine(format!(
            "M = {memory} is below N + 2 = {}",
            n + 2
        )));
    }
    let alg = pick(args.alg.clone(), &cfg, "alg")?.unwrap_or_else(|| "blocked".into());
    let capacity = usize::try_from(memory)
        .map_err(|_| Error::InvalidInput("M too large to simulate".into()))?;

    let mut machine = MemoryMachine::for_problem(&problem, capacity);
    if args.warm_start || cfg.get("warm_start").map(|v| v == "true").unwrap_or(false) {
        machine.enable_warm_start();
    }

    let (result, ledger, block) = match alg.as_str() {
        "unblocked" => {
            let (r, l) = mttkrp_seq_unblocked(&problem, &mut machine)?;
            (r, l, None)
        }
        "blocked" => {
            let b = match pick(args.block, &cfg, "b")? {
                Some(b) => b,
                None => choose_block_size(n, memory)?,
            };
            let (r, l) = mttkrp_seq_blocked(&problem, &mut machine, b)?;
            (r, l, Some(b))
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown sequential algorithm {other:?}"
            )))
        }
    };

    let mut out = String::new();
    writeln!(
        out,
        "# params: cmd=seq source={source} mode={} M={memory} alg={alg} b={} warm_start={}",
        problem.mode + 1,
        block.map(|b| b.to_string()).unwrap_or_default(),
        args.warm_start
    )
    .unwrap();
    writeln!(out, "{LEDGER_CSV_HEADER}").unwrap();
    writeln!(
        out,
        "{}",
        ledger_csv_row(&alg, problem.dims(), problem.rank, capacity, block, &ledger)
    )
    .unwrap();

    let mut status = 0;
    if args.verify {
        let reference = mttkrp_oracle(&problem);
        let err = result.rel_error(&reference);
        let ok = err < 1e-12;
        writeln!(
            out,
            "# verify: rel_err={err:e} status={}",
            if ok { "ok" } else { "FAIL" }
        )
        .unwrap();
        if !ok {
            status = 4;
        }
    }
    emit(&args.common.out, &out)?;
    Ok(status)
}

fn parse_arith(s: &str) -> Result<ArithMode> {
    match s {
        "atomic" => Ok(ArithMode::Atomic),
        "krp" => Ok(ArithMode::KrpMatmul),
        other => Err(Error::InvalidInput(format!(
            "unknown arithmetic mode {other:?}"
        ))),
    }
}

fn par_csv(
    alg: &str,
    problem: &MttkrpProblem,
    grid: &ProcessorGrid,
    arith: &str,
    ledger: &CommLedger,
) -> String {
    let dims_s = problem
        .dims()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let mut out = String::new();
    writeln!(
        out,
        "alg,N,dims,R,mode,grid,arith,proc,words_sent,words_received,nary_multiplies,additions,scalar_multiplies,peak_words"
    )
    .unwrap();
    let prefix = format!(
        "{alg},{},{dims_s},{},{},{grid},{arith}",
        problem.order(),
        problem.rank,
        problem.mode + 1
    );
    for (id, p) in ledger.procs.iter().enumerate() {
        writeln!(
            out,
            "{prefix},{id},{},{},{},{},{},{}",
            p.words_sent,
            p.words_received,
            p.nary_multiplies,
            p.additions,
            p.scalar_multiplies,
            p.peak_words
        )
        .unwrap();
    }
    let max = |f: fn(&ProcCounters) -> u128| ledger.procs.iter().map(f).max().unwrap_or(0);
    writeln!(
        out,
        "{prefix},max,{},{},{},{},{},{}",
        max(|p| p.words_sent),
        max(|p| p.words_received),
        max(|p| p.nary_multiplies),
        max(|p| p.additions),
        max(|p| p.scalar_multiplies),
        max(|p| p.peak_words)
    )
    .unwrap();
    out
}

fn cmd_par(args: ParArgs) -> Result<i32> {
    let cfg = load_config(&args.common.config)?;
    let (problem, source) = resolve_problem(&args.problem, &cfg)?;
    let alg = pick(args.alg.clone(), &cfg, "alg")?.unwrap_or_else(|| "stationary".into());
    let arith_s = pick(args.arith.clone(), &cfg, "arith")?.unwrap_or_else(|| "atomic".into());
    let arith = parse_arith(&arith_s)?;

    let grid = match (
        pick(args.grid.clone(), &cfg, "grid")?,
        pick(args.procs, &cfg, "P")?,
    ) {
        (Some(g), _) => io::parse_grid(&g)?,
        (None, Some(p)) => {
            let dims64: Vec<u64> = problem.dims().iter().map(|&d| d as u64).collect();
            let pa = if alg == "general" {
                ParAlg::General
            } else {
                ParAlg::Stationary
            };
            choose_grid(&dims64, problem.rank as u64, p, pa)?.grid
        }
        (None, None) => {
            return Err(Error::InvalidInput("par requires --grid or --P".into()));
        }
    };

    let run: ParRun = match alg.as_str() {
        "stationary" => par_stationary_mttkrp(&problem, &grid, arith)?,
        "general" => par_general_mttkrp(&problem, &grid, arith)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown parallel algorithm {other:?}"
            )))
        }
    };

    let mut out = String::new();
    writeln!(
        out,
        "# params: cmd=par source={source} mode={} grid={grid} alg={alg} arith={arith_s}",
        problem.mode + 1
    )
    .unwrap();
    out.push_str(&par_csv(&alg, &problem, &grid, &arith_s, &run.ledger));

    let mut status = 0;
    if args.verify {
        let reference = mttkrp_oracle(&problem);
        let err = run.output.rel_error(&reference);
        let ok = err < 1e-12;
        writeln!(
            out,
            "# verify: rel_err={err:e} status={}",
            if ok { "ok" } else { "FAIL" }
        )
        .unwrap();
        if !ok {
            status = 4;
        }
    }
    emit(&args.common.out, &out)?;
    Ok(status)
}

fn cmd_bounds(args: BoundsArgs) -> Result<i32> {
    let dims = io::parse_dims(&args.dims)?;
    if let Some(n) = args.order {
        if n != dims.len() {
            return Err(Error::InvalidInput(format!(
                "-N {n} disagrees with --dims (order {})",
                dims.len()
            )));
        }
    }
    let dims64: Vec<u64> = dims.iter().map(|&d| d as u64).collect();
    let mut shape = ProblemShape::new(dims64, args.rank)?.with_balance(args.gamma, args.delta)?;
    if let Some(m) = args.memory {
        shape = shape.with_memory(m);
    }
    if let Some(p) = args.procs {
        shape = shape.with_procs(p);
    }
    let report = bounds::bounds_report(&shape);

    let dims_s = dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let m_s = args.memory.map(|m| m.to_string()).unwrap_or_default();
    let p_s = args.procs.map(|p| p.to_string()).unwrap_or_default();
    let mut out = String::new();
    writeln!(
        out,
        "# params: cmd=bounds dims={dims_s} R={} M={m_s} P={p_s} gamma={} delta={}",
        args.rank, args.gamma, args.delta
    )
    .unwrap();
    writeln!(out, "kind,value,raw,N,dims,R,M,P,gamma,delta,regime").unwrap();
    let tail = format!(
        "{},{dims_s},{},{m_s},{p_s},{},{}",
        dims.len(),
        args.rank,
        args.gamma,
        args.delta
    );
    let row = |out: &mut String, kind: &str, b: &bounds::Bound, regime: &str| {
        writeln!(out, "{kind},{},{},{tail},{regime}", b.value, b.raw).unwrap();
    };
    if let Some(b) = &report.seq_mem_dependent {
        row(&mut out, "seq_memdep", b, "");
    }
    if let Some(b) = &report.seq_trivial {
        row(&mut out, "seq_trivial", b, "");
    }
    if let Some(b) = &report.par_mem_dependent {
        row(&mut out, "par_memdep", b, "");
    }
    if let Some(b) = &report.par_mem_independent_general {
        row(&mut out, "par_memind_general", b, "");
    }
    if let Some(b) = &report.par_mem_independent_rect {
        row(&mut out, "par_memind_rect", b, "");
    }
    if let Some(c) = &report.par_combined {
        let regime = match c.regime {
            bounds::CombinedRegime::General => "general",
            bounds::CombinedRegime::Rect => "rect",
        };
        row(&mut out, "par_combined", &c.selected, regime);
    }
    emit(&args.common.out, &out)?;
    Ok(0)
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let spec = if args.fig3 {
        SweepSpec::fig3()
    } else {
        let dims = io::parse_dims(
            args.dims
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("sweep needs --fig3 or --dims".into()))?,
        )?;
        let rank = args
            .rank
            .ok_or_else(|| Error::InvalidInput("sweep needs --R".into()))?;
        let procs: Vec<u128> = match (&args.p_list, args.p_pow2) {
            (Some(list), _) => list
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u128>()
                        .map_err(|_| Error::InvalidInput(format!("bad P value {t:?}")))
                })
                .collect::<Result<_>>()?,
            (None, Some(maxq)) => (0..=maxq).map(|q| 1u128 << q).collect(),
            (None, None) => {
                return Err(Error::InvalidInput(
                    "sweep needs --p-pow2 or --p-list".into(),
                ))
            }
        };
        SweepSpec {
            dims: dims.iter().map(|&d| d as u64).collect(),
            rank,
            procs,
        }
    };

    let rows = planner::scaling_sweep(&spec)?;
    let dims_s = spec
        .dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let mut out = String::new();
    writeln!(out, "# params: cmd=sweep dims={dims_s} R={}", spec.rank).unwrap();
    out.push_str(&planner::sweep_table(&rows, ","));
    emit(&args.common.out, &out)?;
    if let Some(dat) = &args.dat {
        let table = format!(
            "# dims={dims_s} R={}\n{}",
            spec.rank,
            planner::sweep_table(&rows, " ")
        );
        std::fs::write(dat, table)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", dat.display())))?;
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let cfg = load_config(&args.common.config)?;
    let (problem, source) = resolve_problem(&args.problem, &cfg)?;
    let n = problem.order();
    let reference = mttkrp_oracle(&problem);
    let memory = pick(args.memory, &cfg, "M")?
        .unwrap_or_else(|| ((1u128 << n) + 2 * n as u128).max(n as u128 + 2));
    let capacity = usize::try_from(memory)
        .map_err(|_| Error::InvalidInput("M too large to simulate".into()))?;

    let mut out = String::new();
    writeln!(out, "# params: cmd=verify source={source} M={memory}").unwrap();
    let mut all_ok = true;

    if memory >= (n + 2) as u128 {
        let mut m1 = MemoryMachine::for_problem(&problem, capacity);
        let (b1, _) = mttkrp_seq_unblocked(&problem, &mut m1)?;
        let ok = b1.values() == reference.values();
        all_ok &= ok;
        writeln!(out, "unblocked: {} (bit-exact required)", if ok { "OK" } else { "FAIL" }).unwrap();
    }
    let block = match pick(args.block, &cfg, "b")? {
        Some(b) => b,
        None => choose_block_size(n, memory)?,
    };
    let mut m2 = MemoryMachine::for_problem(&problem, capacity);
    let (b2, _) = mttkrp_seq_blocked(&problem, &mut m2, block)?;
    let err = b2.rel_error(&reference);
    let ok = err < 1e-12;
    all_ok &= ok;
    writeln!(out, "blocked: {} (rel_err {err:e})", if ok { "OK" } else { "FAIL" }).unwrap();

    let grid = match pick(args.grid.clone(), &cfg, "grid")? {
        Some(g) => io::parse_grid(&g)?,
        None => {
            let modes: Vec<usize> = problem
                .dims()
                .iter()
                .map(|&d| if d >= 2 { 2 } else { 1 })
                .collect();
            ProcessorGrid::stationary(modes)?
        }
    };
    if grid.col == 1 {
        let run = par_stationary_mttkrp(&problem, &grid, ArithMode::Atomic)?;
        let err = run.output.rel_error(&reference);
        let ok = err < 1e-12;
        all_ok &= ok;
        writeln!(out, "stationary: {} (rel_err {err:e})", if ok { "OK" } else { "FAIL" }).unwrap();
    }
    let run = par_general_mttkrp(&problem, &grid, ArithMode::Atomic)?;
    let err = run.output.rel_error(&reference);
    let ok = err < 1e-12;
    all_ok &= ok;
    writeln!(out, "general: {} (rel_err {err:e})", if ok { "OK" } else { "FAIL" }).unwrap();

    writeln!(out, "# verify: status={}", if all_ok { "ok" } else { "FAIL" }).unwrap();
    emit(&args.common.out, &out)?;
    Ok(if all_ok { 0 } else { 4 })
}
