use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtdiag_cli::config::PipelineConfig;
use mtdiag_cli::pipeline::{self, TrainPaths};
use mtdiag_cli::CliError;
use mtdiag_core::explainer::{Method, TargetNeuron};
use mtdiag_core::sorter::{Activation, Direction, Neuron};
use mtdiag_core::stats::render_report;
use mtdiag_service::Store;

#[derive(Parser)]
#[command(name = "mtdiag", version, about = "Tell human from machine translations and show why")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON pipeline config; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding every artifact
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Word-vector file (text format, "count dim" header)
    #[arg(long, global = true)]
    vectors: Option<PathBuf>,
    /// Tokens per sentence; longer sentences are truncated
    #[arg(long, global = true)]
    max_len: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Log level: error, warn, info, debug
    #[arg(long, global = true, default_value = "info")]
    log: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    LrpEpsilon,
    PatternAttribution,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeyArg {
    Logit,
    Softmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum NeuronArg {
    Machine,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Descending,
    Ascending,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus with injected artifacts, plus vectors
    Synth {
        #[arg(long)]
        samples: Option<usize>,
        /// Machine side is a verbatim copy of the human side
        #[arg(long)]
        null_control: bool,
    },
    /// Load a line-aligned corpus and write the manifest and splits
    Ingest {
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        human: Option<PathBuf>,
        #[arg(long)]
        machine: Option<PathBuf>,
    },
    /// Train the discriminator
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        out_checkpoint: Option<PathBuf>,
    },
    /// Score the test split
    Eval,
    /// Estimate signal patterns on the pattern split
    Patterns,
    /// Explain the test split
    Explain {
        #[arg(long, value_enum)]
        target: Option<NeuronArg>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Order the test predictions by confidence
    Sort {
        #[arg(long, value_enum)]
        key: Option<KeyArg>,
        #[arg(long, value_enum)]
        neuron: Option<NeuronArg>,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
    /// Phenomenon χ² tests and discriminative n-grams
    Stats,
    /// Serve the explained corpus over HTTP
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Every stage from synth (when no corpus is configured) to stats
    All,
    /// Print the effective config and its checksum
    Config,
}

fn build_config(global: &GlobalArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &global.work_dir {
        cfg.work_dir = d.clone();
    }
    if let Some(v) = &global.vectors {
        cfg.vectors = Some(v.clone());
    }
    if let Some(l) = global.max_len {
        cfg.architecture.max_len = l;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(m) = global.method {
        cfg.method = match m {
            MethodArg::LrpEpsilon => Method::LrpEpsilon,
            MethodArg::PatternAttribution => Method::PatternAttribution,
        };
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = build_config(&cli.global)?;
    match cli.command {
        Command::Synth { samples, null_control } => {
            if let Some(n) = samples {
                cfg.synth.base.samples = n;
            }
            cfg.synth.null_control |= null_control;
            cfg.validate()?;
            print_json(&pipeline::synth(&cfg)?);
        }
        Command::Ingest { source, human, machine } => {
            cfg.corpus.source = source.or(cfg.corpus.source);
            cfg.corpus.human = human.or(cfg.corpus.human);
            cfg.corpus.machine = machine.or(cfg.corpus.machine);
            cfg.validate()?;
            print_json(&pipeline::ingest(&cfg)?);
        }
        Command::Train { train, valid, out_checkpoint } => {
            if out_checkpoint.is_some() {
                cfg.checkpoint = out_checkpoint;
            }
            cfg.validate()?;
            let summary = pipeline::train(&cfg, &TrainPaths { train, valid })?;
            print_json(&summary);
        }
        Command::Eval => {
            cfg.validate()?;
            print_json(&pipeline::eval(&cfg)?);
        }
        Command::Patterns => {
            cfg.validate()?;
            print_json(&pipeline::patterns(&cfg)?);
        }
        Command::Explain { target, epsilon } => {
            if let Some(t) = target {
                cfg.target = match t {
                    NeuronArg::Machine => TargetNeuron::Machine,
                    NeuronArg::Human => TargetNeuron::Human,
                };
            }
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            cfg.validate()?;
            print_json(&pipeline::explain(&cfg)?);
        }
        Command::Sort { key, neuron, direction } => {
            if let Some(k) = key {
                cfg.sort.activation = match k {
                    KeyArg::Logit => Activation::Logit,
                    KeyArg::Softmax => Activation::Softmax,
                };
            }
            if let Some(n) = neuron {
                cfg.sort.neuron = match n {
                    NeuronArg::Machine => Neuron::Machine,
                    NeuronArg::Human => Neuron::Human,
                };
            }
            if let Some(d) = direction {
                cfg.sort.direction = match d {
                    DirectionArg::Descending => Direction::Descending,
                    DirectionArg::Ascending => Direction::Ascending,
                };
            }
            cfg.validate()?;
            let sorted = pipeline::sort(&cfg)?;
            println!("{}", serde_json::to_string(&sorted.ids).expect("ids serialize"));
        }
        Command::Stats => {
            cfg.validate()?;
            let report = pipeline::stats(&cfg)?;
            print!("{}", render_report(&report));
        }
        Command::Serve { bind } => {
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let addr: SocketAddr = cfg
                .bind
                .parse()
                .map_err(|e| CliError::Usage(format!("bind address {:?}: {e}", cfg.bind)))?;
            let explanations = cfg.explanations_path();
            if !explanations.exists() {
                return Err(CliError::Data("explanations missing; run explain".into()));
            }
            let store = Store::load(&explanations, cfg.path("stats.json"))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
            runtime
                .block_on(mtdiag_service::serve(addr, store))
                .map_err(|e| CliError::Data(format!("serve on {addr}: {e}")))?;
        }
        Command::All => {
            cfg.validate()?;
            let summary = pipeline::all(&cfg)?;
            print!("{}", render_report(&summary.stats));
            print_json(&summary.eval);
        }
        Command::Config => {
            print_json(&cfg);
            println!("checksum {}", cfg.checksum());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.global.log).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
