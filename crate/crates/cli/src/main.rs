use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use softdec_cli::commands::{self, CmdResult};
use softdec_cli::config::parse_rounds;
use softdec_cli::{ModelKind, Overrides, PipelineConfig};
use softdec_core::analysis::PostselectMode;
use softdec_core::pipeline::DecodeMode;
use softdec_core::sim::DatasetFormat;

#[derive(Parser)]
#[command(name = "softdec", version, about = "Soft-information MWPM decoding for a distance-3 surface-code memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone)]
struct Rounds(Vec<usize>);

fn rounds_arg(s: &str) -> Result<Rounds, String> {
    parse_rounds(s).map(Rounds)
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Hard,
    Soft,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gaussian,
    Ampdamp,
    Histogram,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsModeArg {
    ConstantFraction,
    ConstantThreshold,
    Threshold,
}

#[derive(Args)]
struct Common {
    /// Pipeline config JSON; flags override its values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for every random stream
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Comma-separated round counts, e.g. 1,2,4,8,16
    #[arg(long, value_name = "LIST", value_parser = rounds_arg)]
    rounds: Option<Rounds>,
    /// Shots per (initial state, rounds) cell
    #[arg(long, value_name = "N")]
    shots: Option<u64>,
    /// Decoder weights
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Worker threads [default: available cores]
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset file format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit readout models to calibration clouds
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Calibration JSON: qubit -> state -> IQ samples
        #[arg(long, value_name = "PATH")]
        calib: PathBuf,
        /// Number of prepared states to model
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
        states: u8,
        /// Readout model family
        #[arg(long, value_enum, default_value_t = ModelArg::Gaussian)]
        model: ModelArg,
    },
    /// Sample synthetic calibration clouds from the configured readout models
    GenerateCalibration {
        #[command(flatten)]
        common: Common,
        /// Samples per qubit and state
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        /// Number of prepared states
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
        states: u8,
        /// Draw |1> samples with amplitude decay at this rate
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Simulate a memory-experiment dataset
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Split a dataset into train, validation and test sets
    Split {
        #[command(flatten)]
        common: Common,
        /// Dataset to split [default: <out>/dataset.<ext>]
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Estimate decoding graphs from training data
    BuildGraph {
        #[command(flatten)]
        common: Common,
        /// Training dataset [default: <out>/train.<ext>]
        #[arg(long, value_name = "PATH")]
        train: Option<PathBuf>,
        /// Write the noise-floor graphs without estimation
        #[arg(long)]
        floor: bool,
    },
    /// Decode a dataset
    Decode {
        #[command(flatten)]
        common: Common,
        /// Dataset to decode [default: <out>/test.<ext>]
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        /// Training dataset for soft weights [default: <out>/train.<ext>]
        #[arg(long, value_name = "PATH")]
        train: Option<PathBuf>,
        /// Graph file [default: <out>/graphs.json]
        #[arg(long, value_name = "PATH")]
        graphs: Option<PathBuf>,
    },
    /// Fit the logical error per round to decoded results
    Fit {
        #[command(flatten)]
        common: Common,
        /// Decoded results [default: <out>/decoded_<mode>.jsonl]
        #[arg(long, value_name = "PATH")]
        decoded: Option<PathBuf>,
    },
    /// Post-select decoded results on confidence, or a dataset on leakage
    Postselect {
        #[command(flatten)]
        common: Common,
        /// Decoded results [default: <out>/decoded_<mode>.jsonl]
        #[arg(long, value_name = "PATH")]
        decoded: Option<PathBuf>,
        /// Confidence post-selection rule
        #[arg(long, value_enum, requires = "budget")]
        ps_mode: Option<PsModeArg>,
        /// Discard count, or the threshold p_th in threshold mode
        #[arg(long, requires = "ps_mode")]
        budget: Option<f64>,
        /// Discard shots with a measurement classified as |2> instead
        #[arg(long, conflicts_with_all = ["decoded", "ps_mode"])]
        leakage: bool,
        /// Dataset for leakage post-selection [default: <out>/test.<ext>]
        #[arg(long, value_name = "PATH", requires = "leakage")]
        dataset: Option<PathBuf>,
    },
    /// Run simulate, split, build-graph, decode, fit and postselect
    Run {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> CmdResult<PipelineConfig> {
        let flags = Overrides {
            seed: self.seed,
            rounds: self.rounds.as_ref().map(|r| r.0.clone()),
            shots: self.shots,
            mode: self.mode.map(|m| match m {
                ModeArg::Hard => DecodeMode::Hard,
                ModeArg::Soft => DecodeMode::Soft,
            }),
            format: self.format.map(|f| match f {
                FormatArg::Jsonl => DatasetFormat::Jsonl,
                FormatArg::Binary => DatasetFormat::Binary,
            }),
            out: self.out.clone(),
        };
        if let Some(n) = self.jobs {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        Ok(PipelineConfig::load(self.config.as_deref(), &flags)?)
    }
}

fn budget_mode(mode: PsModeArg, budget: f64) -> CmdResult<PostselectMode> {
    let count = || -> CmdResult<usize> {
        if budget >= 0.0 && budget.fract() == 0.0 {
            Ok(budget as usize)
        } else {
            Err(softdec_core::Error::InvalidInput(format!("budget {budget} must be a whole number of runs")).into())
        }
    };
    Ok(match mode {
        PsModeArg::ConstantFraction => PostselectMode::ConstantFraction(count()?),
        PsModeArg::ConstantThreshold => PostselectMode::ConstantThreshold(count()?),
        PsModeArg::Threshold => PostselectMode::Threshold(budget),
    })
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Calibrate {
            common,
            calib,
            states,
            model,
        } => {
            let kind = match model {
                ModelArg::Gaussian => ModelKind::Gaussian,
                ModelArg::Ampdamp => ModelKind::Ampdamp,
                ModelArg::Histogram => ModelKind::Histogram,
            };
            commands::calibrate(&common.load()?, &calib, states as usize, kind)
        }
        Command::GenerateCalibration {
            common,
            samples,
            states,
            beta,
        } => commands::generate_calibration_data(&common.load()?, samples, states as usize, beta),
        Command::Simulate { common } => commands::simulate(&common.load()?),
        Command::Split { common, dataset } => commands::split(&common.load()?, dataset.as_deref()),
        Command::BuildGraph { common, train, floor } => commands::build_graph(&common.load()?, train.as_deref(), floor),
        Command::Decode {
            common,
            dataset,
            train,
            graphs,
        } => commands::decode(&common.load()?, dataset.as_deref(), train.as_deref(), graphs.as_deref()),
        Command::Fit { common, decoded } => commands::fit(&common.load()?, decoded.as_deref()),
        Command::Postselect {
            common,
            decoded,
            ps_mode,
            budget,
            leakage,
            dataset,
        } => {
            let cfg = common.load()?;
            if leakage {
                commands::postselect_leakage_cmd(&cfg, dataset.as_deref())
            } else {
                let mode = match (ps_mode, budget) {
                    (Some(m), Some(b)) => Some(budget_mode(m, b)?),
                    _ => None,
                };
                commands::postselect(&cfg, decoded.as_deref(), mode)
            }
        }
        Command::Run { common } => commands::run(&common.load()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOFTDEC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors exit 1; 2 is reserved for fit failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
