use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ganlab_cli::experiment::{
    self, Probe, CALIBRATION_SEEDS, CONVERGENCE_JS_THRESHOLD, CONVERGENCE_MAX_EPOCHS,
};
use ganlab_cli::{load_drawn, parse_loss, parse_noise, parse_optimizer, run, write_artifacts, LayerStack, RunSpec};
use ganlab_core::distributions::{Distribution, Preset};
use ganlab_core::gan::{GanConfig, LossKind, NoiseSpec};
use ganlab_core::nn::{OptimizerKind, OptimizerSpec};
use ganlab_core::Execution;

/// Headless GAN lab: train a 2D GAN and write its metrics and final frame.
#[derive(Parser, Debug)]
#[command(name = "ganlab", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Best JS per seed on two_gaussians and the 90th-percentile threshold.
    Calibrate(SweepArgs),
    /// Epochs to the convergence threshold with k_d=1 versus k_d=3.
    Unbalanced {
        #[command(flatten)]
        sweep: SweepArgs,
        /// JS threshold; defaults to the calibrated value.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = CALIBRATION_SEEDS)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = CONVERGENCE_MAX_EPOCHS, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    /// Epochs between JS measurements.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    probe_every: u64,
    /// Run seeds one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Built-in target distribution.
    #[arg(long, default_value = "two_gaussians", value_parser = parse_preset, conflicts_with = "drawn_file")]
    preset: Preset,
    /// File of "x y" lines defining a drawn distribution.
    #[arg(long)]
    drawn_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epochs between recorded frames.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    emit_every: u64,
    #[arg(long, default_value = "log", value_parser = parse_loss)]
    loss: LossKind,
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    opt_d: OptimizerKind,
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    opt_g: OptimizerKind,
    #[arg(long, default_value_t = 0.001)]
    lr_d: f64,
    #[arg(long, default_value_t = 0.001)]
    lr_g: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    kd: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    kg: u32,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value = "1x14")]
    gen_layers: LayerStack,
    #[arg(long, default_value = "1x14")]
    disc_layers: LayerStack,
    /// Noise dimension and distribution: 1u, 2u, 1g or 2g.
    #[arg(long, default_value = "2u", value_parser = parse_noise)]
    noise: NoiseSpec,
    #[arg(long, default_value = "ganlab-out")]
    out_dir: PathBuf,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset {s:?}; expected one of {}", names.join(", "))
    })
}

fn optimizer(kind: OptimizerKind, lr: f64) -> OptimizerSpec {
    match kind {
        OptimizerKind::Sgd => OptimizerSpec::sgd(lr),
        OptimizerKind::Adam => OptimizerSpec::adam(lr),
    }
}

impl RunArgs {
    fn spec(&self) -> Result<RunSpec, String> {
        let distribution = match &self.drawn_file {
            Some(path) => load_drawn(path).map_err(|e| e.to_string())?,
            None => Distribution::from(self.preset),
        };
        let config = GanConfig {
            gen_hidden: self.gen_layers.widths(),
            disc_hidden: self.disc_layers.widths(),
            optimizer_d: optimizer(self.opt_d, self.lr_d),
            optimizer_g: optimizer(self.opt_g, self.lr_g),
            loss: self.loss,
            k_d: self.kd,
            k_g: self.kg,
            batch_size: self.batch,
            noise: self.noise,
            saturating_generator_loss: false,
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(RunSpec {
            config,
            distribution,
            epochs: self.epochs,
            seed: self.seed,
            emit_every: self.emit_every,
            out_dir: Some(self.out_dir.clone()),
        })
    }
}

impl SweepArgs {
    fn probe(&self) -> Probe {
        Probe {
            every: self.probe_every,
            ..Probe::default()
        }
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::Calibrate(sweep)) => {
            match experiment::calibrate(&sweep.seeds, sweep.epochs, sweep.probe(), sweep.execution()) {
                Ok(cal) => {
                    print!("{}", cal.report());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Some(Command::Unbalanced { sweep, threshold }) => {
            let threshold = threshold.unwrap_or(CONVERGENCE_JS_THRESHOLD);
            if !(threshold > 0.0) {
                return usage_error("threshold must be positive");
            }
            match experiment::unbalanced(&sweep.seeds, threshold, sweep.epochs, sweep.probe(), sweep.execution()) {
                Ok(report) => {
                    print!("{}", report.render());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        None => {
            let spec = match cli.run.spec() {
                Ok(spec) => spec,
                Err(msg) => return usage_error(&msg),
            };
            let outcome = match run(&spec) {
                Ok(outcome) => outcome,
                Err(e) => return usage_error(&e.to_string()),
            };
            let dir = spec.out_dir.expect("out dir");
            if let Err(e) = write_artifacts(&outcome, &dir) {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::FAILURE;
            }
            let m = outcome.snapshot.metrics;
            match outcome.failure {
                Some(f) => {
                    eprintln!("numerical failure at epoch {}: {}", f.epoch, f.message);
                    ExitCode::FAILURE
                }
                None => {
                    println!(
                        "epoch {} d_loss {:.6} g_loss {:.6} kl {} js {:.6}",
                        m.epoch, m.d_loss, m.g_loss, m.kl, m.js
                    );
                    ExitCode::SUCCESS
                }
            }
        }
    }
}
