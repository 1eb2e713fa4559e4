use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isd_cli::experiment::{
    run_experiment, write_csv, write_json, Algo, ExperimentSpec, MRange, Preset,
};
use isd_core::oracles::{kd_profile, tnsp_gamma, GammaBar, KdParams, TnspMode};
use isd_core::signal::{gen_signal, read_signal, write_signal, SignalKind};

#[derive(Parser)]
#[command(name = "isd", about = "Sparse reconstruction experiments: ISD, BP, IRL1, IRLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test signal and write it to a file.
    Gen(GenArgs),
    /// Solve a single reconstruction instance and print metrics.
    Solve(SolveArgs),
    /// Run a desk-scale test-set sweep and emit CSV or JSON.
    Testset(TestsetArgs),
    /// Compute the truncated-NSP constant of a random Gaussian matrix.
    Tnsp(TnspArgs),
    /// Evaluate the k(d) sparsity-capacity profile.
    Kd(KdArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Gaussian,
    Bernoulli,
    PowerLawSparse,
    PowerLawCompressible,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "isd")]
    algo: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 25)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OperatorArg::Gaussian)]
    operator: OperatorArg,
    #[arg(long, value_enum, default_value_t = SignalArg::Gaussian)]
    signal: SignalArg,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Read the true signal from a file instead of generating it.
    #[arg(long)]
    signal_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    /// Write the reconstructed vector to this path (one value per line).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    Gaussian,
    PartialDct,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    Gaussian,
    Bernoulli,
    PowerLawSparse,
    PowerLawCompressible,
}

#[derive(Args)]
struct TestsetArgs {
    /// Test set id, 1-5.
    #[arg(long)]
    id: usize,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the measurement sweep, `m` or `start:step:stop`.
    #[arg(long)]
    m_range: Option<String>,
    /// Restrict to a comma-separated subset of bp,isd,irl1,irls.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count; defaults to ISD_BENCH_JOBS or the CPU count.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct TnspArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Window size t.
    #[arg(long)]
    t: usize,
    /// Order L.
    #[arg(long)]
    l: usize,
    #[arg(long, default_value = "exact")]
    mode: String,
    #[arg(long, default_value_t = 200)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct KdArgs {
    #[arg(long)]
    c: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Testset(args) => cmd_testset(args),
        Command::Tnsp(args) => cmd_tnsp(args),
        Command::Kd(args) => cmd_kd(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Box<dyn std::error::Error>> {
    let kind = match args.kind {
        KindArg::Gaussian => SignalKind::Gaussian,
        KindArg::Bernoulli => SignalKind::Bernoulli,
        KindArg::PowerLawSparse => SignalKind::PowerLaw {
            lambda: args.lambda,
            sparse: true,
        },
        KindArg::PowerLawCompressible => SignalKind::PowerLaw {
            lambda: args.lambda,
            sparse: false,
        },
    };
    let signal = gen_signal(kind, args.n, args.k, args.seed)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    write_signal(&mut out, &signal)?;
    out.flush()?;
    println!(
        "wrote {} values ({} nonzero) to {}",
        signal.n(),
        signal.true_support.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), Box<dyn std::error::Error>> {
    use isd_cli::experiment::evaluate;
    use isd_core::isd::{isd_run, IsdConfig};
    use isd_core::linop::SensingOperator;
    use isd_core::reweighted::{irl1_run, irls_run, ReweightConfig};
    use isd_core::rng::derive_seed;
    use isd_core::signal::add_noise;
    use isd_core::wl1::{solve_weighted_l1, SolverConfig, Weights};

    let algo = Algo::parse(&args.algo)?;
    let truth = match &args.signal_file {
        Some(path) => read_signal(BufReader::new(File::open(path)?))?,
        None => {
            let kind = match args.signal {
                SignalArg::Gaussian => SignalKind::Gaussian,
                SignalArg::Bernoulli => SignalKind::Bernoulli,
                SignalArg::PowerLawSparse => SignalKind::PowerLaw {
                    lambda: args.lambda,
                    sparse: true,
                },
                SignalArg::PowerLawCompressible => SignalKind::PowerLaw {
                    lambda: args.lambda,
                    sparse: false,
                },
            };
            gen_signal(kind, args.n, args.k, derive_seed(args.seed, &[2]))?
        }
    };
    let n = truth.n();
    let op = match args.operator {
        OperatorArg::Gaussian => SensingOperator::gaussian(args.m, n, derive_seed(args.seed, &[1]))?,
        OperatorArg::PartialDct => SensingOperator::partial_dct(n, args.m, derive_seed(args.seed, &[1]))?,
    };
    let clean = op.apply(&truth.values)?;
    let b = add_noise(&clean, args.sigma, derive_seed(args.seed, &[3]));
    let rho = if args.sigma > 0.0 {
        args.sigma * (args.m as f64).sqrt()
    } else {
        0.0
    };

    let (x, outer, inner) = match algo {
        Algo::Bp => {
            let out = solve_weighted_l1(
                &op,
                &b,
                &Weights::ones(n),
                &SolverConfig {
                    rho,
                    ..SolverConfig::default()
                },
                None,
            )?;
            (out.x, 1, out.iters)
        }
        Algo::Isd => {
            let rule = match truth.kind {
                SignalKind::PowerLaw { lambda, .. } => {
                    isd_core::isd::DetectionRule::first_jump_power_law(lambda)
                }
                _ => isd_core::isd::DetectionRule::first_jump_gaussian(),
            };
            let rep = isd_run(&op, &b, &rule, &IsdConfig::default(), args.sigma, Some(&truth.values))?;
            (rep.x_final, rep.outer_iters, rep.inner_iters_total)
        }
        Algo::Irl1 => {
            let rep = irl1_run(&op, &b, &ReweightConfig::default(), rho, Some(&truth.values))?;
            (rep.x_final, rep.outer_iters, rep.inner_iters_total)
        }
        Algo::Irls => {
            let rep = irls_run(&op, &b, &ReweightConfig::default(), Some(&truth.values))?;
            (rep.x_final, rep.outer_iters, rep.inner_iters_total)
        }
    };
    let metrics = evaluate(&x, &truth, args.threshold, None)?;
    println!(
        "algo={} n={} m={} k={} rel_err_l2={:.6e} rel_err_l1={:.6e} success={} outer={} inner={}",
        algo.name(),
        n,
        args.m,
        truth.true_support.len(),
        metrics.rel_err_l2,
        metrics.rel_err_l1,
        metrics.success,
        outer,
        inner
    );
    if let Some(path) = args.out {
        let mut f = BufWriter::new(File::create(path)?);
        for v in &x {
            writeln!(f, "{v:.16e}")?;
        }
    }
    Ok(())
}

fn default_jobs() -> usize {
    std::env::var("ISD_BENCH_JOBS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
}

fn cmd_testset(args: TestsetArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ExperimentSpec::preset_testset(args.id)?;
    if let Some(reps) = args.reps {
        spec.reps = reps;
    }
    if let Some(sigma) = args.sigma {
        spec.sigma = sigma;
        if sigma > 0.0 && spec.preset == Preset::Noiseless {
            spec.preset = Preset::Noisy;
        }
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(ref mr) = args.m_range {
        spec.m_range = MRange::parse(mr)?;
    }
    if let Some(ref algos) = args.algo {
        spec.algos = algos
            .split(',')
            .map(|t| Algo::parse(t.trim()))
            .collect::<Result<Vec<_>, _>>()?;
    }
    spec.validate()?;
    let jobs = args.jobs.unwrap_or_else(default_jobs);
    let rows = run_experiment(&spec, jobs)?;
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    match args.format.as_str() {
        "csv" => write_csv(&mut sink, &rows)?,
        "json" => write_json(&mut sink, &spec, &rows)?,
        other => return Err(format!("unknown format: {other}").into()),
    }
    sink.flush()?;
    Ok(())
}

fn cmd_tnsp(args: TnspArgs) -> Result<(), Box<dyn std::error::Error>> {
    use isd_core::linop::SensingOperator;
    let op = SensingOperator::gaussian(args.m, args.n, args.seed)?;
    let a = op.to_dense_matrix();
    let mode = match args.mode.as_str() {
        "exact" => TnspMode::Exact,
        "sampled" => TnspMode::Sampled {
            probes: args.probes,
            seed: args.seed,
        },
        other => return Err(format!("mode must be exact or sampled, got {other}").into()),
    };
    let report = tnsp_gamma(&a, args.t, args.l, mode)?;
    match report.gamma_bar {
        GammaBar::Bounded(g) => println!("t={} L={} gamma_bar={g:.12e}", report.t, report.l),
        GammaBar::Unbounded => println!("t={} L={} gamma_bar=unbounded", report.t, report.l),
    }
    if let Some(w) = report.witness {
        println!("witness T={:?} S={:?}", w.t_set, w.s_set);
    }
    Ok(())
}

fn cmd_kd(args: KdArgs) -> Result<(), Box<dyn std::error::Error>> {
    let profile = kd_profile(KdParams {
        c: args.c,
        n: args.n,
        m: args.m,
        d: args.d,
    })?;
    println!(
        "k={:.6} k_prime={:.6} premise_holds={} k_prime_in_unit_interval={} detection_gain={}",
        profile.k,
        profile.k_prime,
        profile.premise_holds,
        profile.k_prime_in_unit_interval,
        profile.detection_gain
    );
    Ok(())
}
