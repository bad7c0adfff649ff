use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use valor::estimators::{estimate_peak_time, estimate_valor, KnownChannel, DEFAULT_SMOOTHING_WINDOW};
use valor::harness::{parse_sweep_spec, reproduce_figure, run_sweep, write_sweep_csv, Figure, Scale};
use valor::io::{estimate_row, load_signal, save_signal, ESTIMATE_COLUMNS};
use valor::physics::{peclet, ChannelParams};
use valor::sim::{run_ensemble, SimConfig, SimDuration};
use valor::units::{parse_quantity, Dimension};
use valor::{Error, Result};

#[derive(Parser)]
#[command(name = "valor", version, about = "Vessel channel simulation and variance-based ranging")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "VALOR_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    /// JSON sweep configuration (for `sweep`, and as the base for `simulate`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Full,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3,
    Fig4a,
    Fig4b,
    Fig5,
    All,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Valor,
    PeakTime,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replications of one channel and write their signals.
    Simulate(SimulateArgs),
    /// Estimate the distance from recorded signals.
    Estimate(EstimateArgs),
    /// Run the sweep described by --config.
    Sweep,
    /// Rerun a figure's experiment and write plot-ready CSVs.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureArg,
    },
}

/// Physical values take unit suffixes, e.g. `--v-avg "2 mm/s"`.
#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "D", default_value = "300 um^2/s")]
    diffusion: String,
    #[arg(long, default_value = "5 um")]
    r_v: String,
    #[arg(long, default_value = "2000 um/s")]
    v_avg: String,
    #[arg(long, default_value = "1 mm")]
    l: String,
    #[arg(long, default_value = "1 um")]
    w: String,
    #[arg(long, default_value_t = 100_000)]
    molecules: u32,
    #[arg(long, default_value = "0.1 ms")]
    dt: String,
    /// `auto` or a time such as `2 s`.
    #[arg(long, default_value = "auto")]
    duration: String,
    #[arg(long, default_value_t = 1)]
    record_every: u32,
    #[arg(long, default_value = "0 um")]
    tx_radial_offset: String,
    #[arg(long, default_value = "0 s")]
    tau_offset: String,
    #[arg(long, default_value_t = 1)]
    reps: u32,
}

#[derive(Args)]
struct EstimateArgs {
    /// Signal CSVs, each with its `.meta.json` sidecar.
    #[arg(required = true)]
    signals: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Valor)]
    method: MethodArg,
    /// Emission time in the receiver's clock assumed by the peak-time
    /// baseline (default: the true one from the sidecar).
    #[arg(long)]
    emission_time: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SMOOTHING_WINDOW)]
    smoothing_window: usize,
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let q = parse_quantity;
    let params = ChannelParams::new(
        q(&args.diffusion, Dimension::Diffusivity)?,
        q(&args.r_v, Dimension::Length)?,
        q(&args.v_avg, Dimension::Velocity)?,
        q(&args.l, Dimension::Length)?,
        q(&args.w, Dimension::Length)?,
    )?;
    let duration = match args.duration.trim() {
        "auto" => SimDuration::Auto,
        t => SimDuration::Fixed(q(t, Dimension::Time)?),
    };
    let cfg = SimConfig {
        molecules: args.molecules,
        dt: q(&args.dt, Dimension::Time)?,
        duration,
        record_every: args.record_every,
        seed: cli.seed.unwrap_or(SimConfig::default().seed),
        tx_radial_offset: q(&args.tx_radial_offset, Dimension::Length)?,
        tau_offset: q(&args.tau_offset, Dimension::Time)?,
    };
    fs::create_dir_all(&cli.out_dir)?;
    for record in run_ensemble(&params, &cfg, args.reps)? {
        let path = cli
            .out_dir
            .join(format!("signal_rep{}.csv", record.meta.replication));
        save_signal(&path, &record)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let emission = args
        .emission_time
        .as_deref()
        .map(|t| parse_quantity(t, Dimension::Time))
        .transpose()?;
    println!("{ESTIMATE_COLUMNS}");
    for path in &args.signals {
        let rec = load_signal(path)?;
        let p = rec.meta.params;
        let (seed, rep) = (rec.meta.config.seed, rec.meta.replication);
        if args.method != MethodArg::PeakTime {
            let est = estimate_valor(&rec, &KnownChannel::from(&p))?.with_geometry(peclet(&p), p.vessel_radius);
            println!("{}", estimate_row(&est, Some(p.distance), seed, rep));
        }
        if args.method != MethodArg::Valor {
            let t0 = emission.unwrap_or(rec.meta.config.tau_offset);
            let est = estimate_peak_time(&rec, t0, p.mean_velocity, args.smoothing_window)?
                .with_geometry(peclet(&p), p.vessel_radius);
            println!("{}", estimate_row(&est, Some(p.distance), seed, rep));
        }
    }
    Ok(())
}

fn sweep(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidParams("sweep needs --config".into()))?;
    let mut spec = parse_sweep_spec(&fs::read_to_string(path)?)?;
    if let Some(seed) = cli.seed {
        spec.sim.seed = seed;
    }
    let result = run_sweep(&spec)?;
    fs::create_dir_all(&cli.out_dir)?;
    let out = cli.out_dir.join("sweep.csv");
    fs::write(&out, write_sweep_csv(&result))?;
    fs::write(
        cli.out_dir.join("sweep_result.json"),
        serde_json::to_string_pretty(&result)? + "\n",
    )?;
    for s in &result.series {
        println!(
            "v_avg={} r_v={} w={}: R² = {:?}, fitted/theory slope = {:.4}",
            s.mean_velocity,
            s.vessel_radius,
            s.receiver_width,
            s.r_squared,
            s.fitted_slope / s.theory_slope
        );
    }
    println!("{}", out.display());
    Ok(())
}

fn reproduce(cli: &Cli, which: FigureArg) -> Result<()> {
    let scale = match cli.scale {
        ScaleArg::Full => Scale::Full,
        ScaleArg::Desk => Scale::Desk,
    };
    let figures: Vec<Figure> = match which {
        FigureArg::All => Figure::ALL.to_vec(),
        FigureArg::Fig2 => vec![Figure::Fig2],
        FigureArg::Fig3 => vec![Figure::Fig3],
        FigureArg::Fig4a => vec![Figure::Fig4a],
        FigureArg::Fig4b => vec![Figure::Fig4b],
        FigureArg::Fig5 => vec![Figure::Fig5],
    };
    for f in figures {
        let report = reproduce_figure(f, scale, cli.seed, Path::new(&cli.out_dir))?;
        for line in &report.summary {
            println!("{}: {line}", f.as_str());
        }
        for file in &report.files {
            println!("{}", file.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::Estimate(args) => estimate(args),
        Command::Sweep => sweep(cli),
        Command::Reproduce { figure } => reproduce(cli, *figure),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
