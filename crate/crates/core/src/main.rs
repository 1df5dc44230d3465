use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use codesign::campaign::{self, CampaignConfig, OUT_DIR_ENV};
use codesign::hwcost::{analytical_energy, power_density, synthesize_proxy, SynthesisStrategy};
use codesign::mobo::{parse_objectives, run_campaign, CoDesignEvaluator, CoDesignSpace, SamplerKind, TrialLog};
use codesign::pulsegen::Dataset;
use codesign::qnn::{self, MlpSpec};
use codesign::Error;

#[derive(Parser)]
#[command(name = "codesign", version, about = "Hardware-aware search over quantized MLPs for pulse amplitude regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a detector stream and write the windowed dataset.
    Generate {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Number of windows (overrides the config).
        #[arg(long)]
        windows: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one network and print its metrics.
    Train {
        #[command(flatten)]
        common: ConfigArg,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trained parameters to this file.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// Cost one network with the synthesis proxy and the analytical model.
    Synth {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value = "AREA_0")]
        strategy: SynthesisStrategy,
        /// Cost-model parameter file.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run the optimizer and append to a trial log.
    Optimize {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long = "parallel")]
        parallel: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Co-design space file.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Objectives, e.g. "val_mse,area,power,delay".
        #[arg(long)]
        objectives: Option<String>,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Use uniform random search instead of the Parzen sampler.
        #[arg(long)]
        random: bool,
    },
    /// Rebuild front, convergence and summary files from a trial log.
    Report {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        objectives: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Theory-guided versus synthesis-guided search.
    Compare {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Full campaign: dataset, search, reports.
    Run {
        #[command(flatten)]
        common: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Campaign configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<CampaignConfig> {
        Ok(match &self.config {
            Some(p) => CampaignConfig::load(p)?,
            None => CampaignConfig::default(),
        })
    }
}

#[derive(Args)]
struct OutArg {
    /// Output directory; defaults to $CODESIGN_OUT_DIR, then ./codesign-out.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("codesign-out"))
    }
}

#[derive(Args)]
struct NetArgs {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    /// Bits per hidden weight matrix, comma separated. The output layer uses --io-bits.
    #[arg(long, value_delimiter = ',', required = true)]
    bits: Vec<u32>,
    #[arg(long)]
    io_bits: u32,
    #[arg(long, default_value_t = 9)]
    input_width: usize,
}

impl NetArgs {
    fn spec(&self) -> Result<MlpSpec> {
        let mut weight_bits = self.bits.clone();
        weight_bits.push(self.io_bits);
        let spec = MlpSpec {
            input_width: self.input_width,
            hidden_layer_widths: self.widths.clone(),
            weight_bits,
            io_bits: self.io_bits,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

fn load_dataset(cfg: &CampaignConfig, path: Option<&Path>) -> Result<Dataset> {
    Ok(match path {
        Some(p) => Dataset::read_from(p).with_context(|| format!("reading {}", p.display()))?,
        None => cfg.dataset.build()?,
    })
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, out, windows, seed } => {
            let mut cfg = common.load()?;
            if let Some(n) = windows {
                cfg.dataset.total_windows = n;
                cfg.dataset.stream.stream_length = codesign::pulsegen::required_stream_length(cfg.dataset.window_half, n);
            }
            if let Some(s) = seed {
                cfg.dataset.stream.rng_seed = s;
                cfg.dataset.shuffle_seed = s;
            }
            let ds = cfg.dataset.build()?;
            ds.write_to(&out)?;
            print_json(&json!({
                "path": out,
                "train": ds.train.len(),
                "val": ds.val.len(),
                "test": ds.test.len(),
                "window_len": ds.window_len(),
                "sha256": ds.digest()?,
            }))
        }
        Command::Train { common, net, dataset, seed, weights_out } => {
            let cfg = common.load()?;
            let spec = net.spec()?;
            let ds = load_dataset(&cfg, dataset.as_deref())?;
            let hp = qnn::TrainParams { seed, ..cfg.training.params() };
            let r = qnn::train(&spec, &ds, &hp)?;
            if let Some(p) = &weights_out {
                r.weights.to_container(&spec).write_to(p)?;
            }
            print_json(&json!({
                "spec": spec,
                "val_mse": r.val_mse,
                "train_mse": r.train_mse,
                "baseline_mse": r.baseline_mse,
                "eta": r.baseline_mse / r.val_mse,
                "best_epoch": r.best_epoch,
                "epochs_run": r.epochs_run,
            }))
        }
        Command::Synth { net, strategy, params } => {
            let spec = net.spec()?;
            let params = match params {
                Some(p) => codesign::hwcost::CostModelParams::load(&p)?,
                None => codesign::hwcost::CostModelParams::default(),
            };
            params.validate()?;
            let hw = synthesize_proxy(&spec, strategy, &params);
            print_json(&json!({
                "spec": spec,
                "hardware": hw,
                "power_density_w_per_cm2": power_density(&hw)?,
                "analytical_energy_j": analytical_energy(&spec, &params),
            }))
        }
        Command::Optimize { common, budget, parallel, seed, space, objectives, log, dataset, random } => {
            let mut cfg = common.load()?;
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(k) = parallel {
                cfg.parallelism = k;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = space {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                cfg.space = toml::from_str::<CoDesignSpace>(&text).map_err(|e| Error::Config(e.to_string()))?;
            }
            if let Some(o) = objectives {
                cfg.objectives = parse_objectives(&o)?;
            }
            if random {
                cfg.sampler = SamplerKind::Random;
            }
            cfg.validate()?;
            let ds = load_dataset(&cfg, dataset.as_deref())?;
            let evaluator = CoDesignEvaluator::new(&ds, cfg.training.params(), cfg.cost_params()?, cfg.backend)?;
            let (mut trial_log, prior) = TrialLog::open(&log)?;
            let trials = run_campaign(&cfg.space, &evaluator, &cfg.objectives, &cfg.options(), Some(&mut trial_log), prior)?;
            let completed = trials.iter().filter(|t| t.is_completed()).count();
            print_json(&json!({ "log": log, "trials": trials.len(), "completed": completed }))
        }
        Command::Report { common, log, objectives, out } => {
            let cfg = common.load()?;
            let objectives = match objectives {
                Some(o) => parse_objectives(&o)?,
                None => cfg.objectives.clone(),
            };
            let summary = campaign::report(&log, &objectives, &cfg.limits, &out.resolve())?;
            print_json(&serde_json::to_value(summary)?)
        }
        Command::Compare { common, budget, seed, out } => {
            let mut cfg = common.load()?;
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = campaign::compare(&cfg, &out.resolve())?;
            print_json(&json!({
                "final_proxy_hypervolume": r.proxy_hypervolume_curve.last(),
                "final_real_hypervolume": r.final_real_hypervolume(),
                "final_synthesis_hypervolume": r.final_synthesis_hypervolume(),
                "spearman_rho": r.spearman_rho,
            }))
        }
        Command::Run { common, out } => {
            let cfg = common.load()?;
            let outcome = campaign::run(&cfg, &out.resolve())?;
            print_json(&serde_json::to_value(outcome.summary)?)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::FailureBudget { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
