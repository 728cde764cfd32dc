use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use vo2snn::exec::Execution;
use vo2snn::experiments::{self as ex, Artifacts};
use vo2snn::mnist::resolve_data_dir;
use vo2snn::oscillator::PRESET_NAMES;
use vo2snn::snn::TrainConfig;

#[derive(Debug, Parser)]
#[command(
    name = "vo2snn",
    version,
    about = "Oscillator-neuron experiments and the rate-coded spiking network"
)]
struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    outdir: PathBuf,
    /// Filename tag; defaults to the UNIX time in seconds.
    #[arg(long, global = true)]
    tag: Option<String>,
    /// Run sweeps and training on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quasi-static I-V sweep with threshold extraction.
    Iv {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..=5))]
        level: i64,
        /// Sweep peak; defaults to twice the threshold.
        #[arg(long, value_parser = positive)]
        v_max: Option<f64>,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
        steps: u64,
        #[arg(long, default_value_t = vo2snn::characterization::DEFAULT_LOAD_RESISTOR, value_parser = positive)]
        load: f64,
    },
    /// Threshold statistics over repeated switching cycles.
    Cycles {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..=5))]
        level: i64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long, default_value_t = ex::DEFAULT_SEED)]
        seed: u64,
        /// Threshold jitter as a fraction of v_th.
        #[arg(long, default_value_t = vo2snn::device::DEFAULT_JITTER_FRACTION, value_parser = positive)]
        jitter: f64,
    },
    /// Transient response of one neuron to a named drive.
    Oscillate {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..=5))]
        level: i64,
        #[command(flatten)]
        circuit: CircuitFlags,
        /// One of matching-pulse, constant, lif-pulse, sine.
        #[arg(long, default_value = "matching-pulse", value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        drive: String,
        #[arg(long, value_parser = positive)]
        amplitude: Option<f64>,
        #[arg(long, value_parser = positive)]
        dt: Option<f64>,
        /// Threshold jitter as a fraction of v_th.
        #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
        jitter: f64,
        #[arg(long, default_value_t = ex::DEFAULT_SEED)]
        seed: u64,
    },
    /// Tri-state response map over series resistance and drive.
    Phase {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..=5))]
        level: i64,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(2..))]
        nr: u64,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(2..))]
        nv: u64,
        #[arg(long, default_value_t = vo2snn::characterization::DEFAULT_R_RANGE.0, value_parser = positive)]
        r_min: f64,
        #[arg(long, default_value_t = vo2snn::characterization::DEFAULT_R_RANGE.1, value_parser = positive)]
        r_max: f64,
        #[arg(long, default_value_t = vo2snn::characterization::DEFAULT_V_RANGE.0, value_parser = positive)]
        v_min: f64,
        #[arg(long, default_value_t = vo2snn::characterization::DEFAULT_V_RANGE.1, value_parser = positive)]
        v_max: f64,
        #[arg(long, default_value_t = vo2snn::oscillator::DEFAULT_C_PAR, value_parser = positive)]
        c_par: f64,
    },
    /// Frequency against drive inside each level's oscillating band.
    Vf(CurveFlags),
    /// Average power against frequency, with a matched-frequency comparison.
    Power(CurveFlags),
    /// Time-domain run of the 2x2 demonstration network.
    Net2x2(TimeDomainFlags),
    /// Train the 784-128-10 network on MNIST.
    Train {
        #[command(flatten)]
        data: DataFlags,
        #[arg(long, default_value_t = TrainConfig::default().epochs as u64, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: u64,
        #[arg(long, default_value_t = TrainConfig::default().batch_size as u64, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: u64,
        #[arg(long, default_value_t = TrainConfig::default().learning_rate, value_parser = positive)]
        lr: f64,
        #[arg(long, default_value_t = TrainConfig::default().momentum, value_parser = non_negative)]
        momentum: f64,
        #[arg(long, default_value_t = TrainConfig::default().target_hi)]
        target_hi: f64,
        #[arg(long, default_value_t = TrainConfig::default().target_lo)]
        target_lo: f64,
        #[arg(long, default_value_t = TrainConfig::default().seed)]
        seed: u64,
        /// Also write the trained network here.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of a trained network.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataFlags,
    },
    /// Time-domain inference of one test digit.
    Infer(DigitFlags),
    /// Hidden and output spike rasters for one test digit.
    Raster(DigitFlags),
}

#[derive(Debug, Args)]
struct CircuitFlags {
    #[arg(long, default_value_t = vo2snn::oscillator::DEFAULT_R_SERIES, value_parser = positive)]
    r_series: f64,
    #[arg(long, default_value_t = vo2snn::oscillator::DEFAULT_C_PAR, value_parser = positive)]
    c_par: f64,
}

impl CircuitFlags {
    fn args(&self) -> ex::CircuitArgs {
        ex::CircuitArgs {
            r_series: self.r_series,
            c_par: self.c_par,
        }
    }
}

#[derive(Debug, Args)]
struct CurveFlags {
    /// Comma-separated device levels.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5], value_parser = clap::value_parser!(i64).range(1..=5))]
    levels: Vec<i64>,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u64).range(2..))]
    points: u64,
    #[command(flatten)]
    circuit: CircuitFlags,
    #[arg(long, default_value_t = ex::DEFAULT_SEED)]
    seed: u64,
    /// Simulated cross-checks per level.
    #[arg(long, default_value_t = 3)]
    checks: u64,
}

impl CurveFlags {
    fn args(&self) -> ex::CurveArgs {
        ex::CurveArgs {
            levels: self.levels.clone(),
            n_points: self.points as usize,
            circuit: self.circuit.args(),
            seed: self.seed,
            checks: self.checks as usize,
        }
    }
}

#[derive(Debug, Args)]
struct TimeDomainFlags {
    /// Observation window in seconds.
    #[arg(long, default_value_t = ex::TimeDomainArgs::default().window, value_parser = positive)]
    window: f64,
    #[arg(long, default_value_t = ex::TimeDomainArgs::default().dt, value_parser = positive)]
    dt: f64,
}

impl TimeDomainFlags {
    fn args(&self) -> ex::TimeDomainArgs {
        ex::TimeDomainArgs {
            window: self.window,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Args)]
struct DataFlags {
    /// MNIST directory; falls back to $MNIST_DIR, then data/mnist.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    train_limit: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    test_limit: Option<u64>,
}

impl DataFlags {
    fn args(&self) -> ex::DataArgs {
        ex::DataArgs {
            dir: resolve_data_dir(self.data_dir.as_deref()),
            train_limit: self.train_limit.map(|n| n as usize),
            test_limit: self.test_limit.map(|n| n as usize),
        }
    }
}

#[derive(Debug, Args)]
struct DigitFlags {
    #[arg(long)]
    model: PathBuf,
    /// Test-set index.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[command(flatten)]
    td: TimeDomainFlags,
}

impl DigitFlags {
    fn data(&self) -> ex::DataArgs {
        ex::DataArgs {
            dir: resolve_data_dir(self.data_dir.as_deref()),
            train_limit: None,
            test_limit: None,
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !x.is_finite() {
        return Err("must be finite".into());
    }
    Ok(x)
}

fn positive(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x <= 0.0 {
        return Err("must be > 0".into());
    }
    Ok(x)
}

fn non_negative(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x < 0.0 {
        return Err("must be >= 0".into());
    }
    Ok(x)
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Iv { .. } => "iv",
        Command::Cycles { .. } => "cycles",
        Command::Oscillate { .. } => "oscillate",
        Command::Phase { .. } => "phase",
        Command::Vf(_) => "vf",
        Command::Power(_) => "power",
        Command::Net2x2(_) => "net2x2",
        Command::Train { .. } => "train",
        Command::Eval { .. } => "eval",
        Command::Infer(_) => "infer",
        Command::Raster(_) => "raster",
    }
}

fn run(cmd: &Command, exec: Execution) -> vo2snn::Result<Artifacts> {
    match cmd {
        &Command::Iv {
            level,
            v_max,
            steps,
            load,
        } => ex::iv(&ex::IvArgs {
            level,
            v_max,
            steps: steps as usize,
            load_resistor: load,
        }),
        &Command::Cycles {
            level,
            n,
            seed,
            jitter,
        } => ex::cycles(
            &ex::CyclesArgs {
                level,
                n_cycles: n as usize,
                seed,
                jitter_fraction: jitter,
            },
            exec,
        ),
        Command::Oscillate {
            level,
            circuit,
            drive,
            amplitude,
            dt,
            jitter,
            seed,
        } => ex::oscillate(&ex::OscillateArgs {
            level: *level,
            circuit: circuit.args(),
            preset: drive.clone(),
            amplitude: *amplitude,
            dt: *dt,
            jitter_fraction: *jitter,
            seed: *seed,
        }),
        &Command::Phase {
            level,
            nr,
            nv,
            r_min,
            r_max,
            v_min,
            v_max,
            c_par,
        } => ex::phase(
            &ex::PhaseArgs {
                level,
                grid: (nr as usize, nv as usize),
                r_range: (r_min, r_max),
                v_range: (v_min, v_max),
                c_par,
            },
            exec,
        ),
        Command::Vf(f) => ex::vf(&f.args(), exec),
        Command::Power(f) => ex::power(&f.args(), exec),
        Command::Net2x2(f) => ex::net2x2(&f.args()),
        Command::Train {
            data,
            epochs,
            batch_size,
            lr,
            momentum,
            target_hi,
            target_lo,
            seed,
            model,
        } => {
            let cfg = TrainConfig {
                epochs: *epochs as usize,
                batch_size: *batch_size as usize,
                learning_rate: *lr,
                momentum: *momentum,
                seed: *seed,
                target_hi: *target_hi,
                target_lo: *target_lo,
            };
            let (net, artifacts) = ex::train_network(&data.args(), &cfg, exec)?;
            if let Some(path) = model {
                net.save(path)?;
            }
            Ok(artifacts)
        }
        Command::Eval { model, data } => ex::eval(model, &data.args(), exec),
        Command::Infer(f) => ex::infer(&f.model, &f.data(), f.index as usize, &f.td.args()),
        Command::Raster(f) => ex::raster(&f.model, &f.data(), f.index as usize, &f.td.args()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Command::Oscillate {
        drive, amplitude, ..
    } = &cli.command
    {
        if (drive == "matching-pulse") == amplitude.is_some() {
            let msg = if amplitude.is_some() {
                "--amplitude is fixed for the matching-pulse drive"
            } else {
                "--amplitude is required for this drive"
            };
            Cli::command()
                .error(ErrorKind::ArgumentConflict, msg)
                .exit();
        }
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let stage = name(&cli.command);
    let tag = cli.tag.clone().unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
            .to_string()
    });
    log::info!("running {stage} into {}", cli.outdir.display());
    let artifacts = match run(&cli.command, exec) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {stage} failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    match artifacts.write(&cli.outdir, &tag) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: writing {stage} artifacts failed: {e}");
            ExitCode::FAILURE
        }
    }
}
