//! Headless training runs and the experiment harnesses built on them.
//!
//! A run drives the same [`Session`] the streaming service uses: one initial
//! frame, `Play`, then one tick per epoch. The metrics series of a CLI run is
//! therefore identical to that of a service session given the same seed,
//! configuration and frame interval.

pub mod experiment;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ganlab_core::distributions::{Distribution, DrawnDistribution, DEFAULT_DRAWN_JITTER};
use ganlab_core::gan::{GanConfig, LossKind, NoiseDist, NoiseSpec};
use ganlab_core::metrics::MetricsHistory;
use ganlab_core::nn::OptimizerKind;
use ganlab_core::session::{ServerMessage, Session, SessionCommand, SessionOptions, TrainingSnapshot};
use ganlab_core::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// Hidden-layer stack written as `NxW`: `N` layers of width `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerStack {
    pub count: usize,
    pub width: usize,
}

impl LayerStack {
    pub fn widths(self) -> Vec<usize> {
        vec![self.width; self.count]
    }
}

impl FromStr for LayerStack {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (n, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected NxW (e.g. 1x14), got {s:?}"))?;
        let count: usize = n.parse().map_err(|_| format!("bad layer count in {s:?}"))?;
        let width: usize = w.parse().map_err(|_| format!("bad layer width in {s:?}"))?;
        if count == 0 || width == 0 {
            return Err(format!("layer count and width must be at least 1, got {s:?}"));
        }
        Ok(Self { count, width })
    }
}

impl fmt::Display for LayerStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.count, self.width)
    }
}

/// Noise written as dimension plus `u` (uniform) or `g` (gaussian), e.g. `2u`.
pub fn parse_noise(s: &str) -> Result<NoiseSpec, String> {
    let dist = match s.get(1..) {
        Some("u") => NoiseDist::Uniform,
        Some("g") => NoiseDist::Gaussian,
        _ => return Err(format!("expected one of 1u, 2u, 1g, 2g, got {s:?}")),
    };
    let dim = match s.get(..1) {
        Some("1") => 1,
        Some("2") => 2,
        _ => return Err(format!("expected one of 1u, 2u, 1g, 2g, got {s:?}")),
    };
    Ok(NoiseSpec { dim, dist })
}

pub fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s {
        "log" => Ok(LossKind::LogLoss),
        "ls" => Ok(LossKind::LeastSquares),
        _ => Err(format!("expected log or ls, got {s:?}")),
    }
}

pub fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::Adam),
        _ => Err(format!("expected sgd or adam, got {s:?}")),
    }
}

/// Reads a drawn distribution from a file of `x y` lines.
pub fn load_drawn(path: &Path) -> Result<Distribution> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(Distribution::Drawn(DrawnDistribution::parse_text(&text, DEFAULT_DRAWN_JITTER)?))
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub config: GanConfig,
    pub distribution: Distribution,
    pub epochs: u64,
    pub seed: u64,
    pub emit_every: u64,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Failure {
    /// The epoch that failed (1-based); earlier epochs completed.
    pub epoch: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: MetricsHistory,
    /// The frame for the last completed epoch.
    pub snapshot: TrainingSnapshot,
    pub failure: Option<Failure>,
}

/// Trains `spec.epochs` epochs, emitting a frame every `spec.emit_every`
/// epochs. Stops early at the first numerical failure.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    if spec.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    let options = SessionOptions {
        frame_interval: spec.emit_every,
        ..SessionOptions::default()
    };
    let mut session = Session::new(spec.config.clone(), spec.distribution.clone(), spec.seed, options)?;
    let mut last = session.snapshot()?;
    session.handle(SessionCommand::Play)?;
    let mut failure = None;
    for _ in 0..spec.epochs {
        for msg in session.tick() {
            match msg {
                ServerMessage::Snapshot(s) => last = *s,
                ServerMessage::Error(e) => {
                    failure = Some(Failure {
                        epoch: e.epoch + 1,
                        message: e.message,
                    })
                }
                ServerMessage::Ack(_) => {}
            }
        }
        if failure.is_some() {
            break;
        }
    }
    if last.epoch != session.epoch() {
        last = session.snapshot()?;
    }
    Ok(RunOutcome {
        history: session.history().clone(),
        snapshot: last,
        failure,
    })
}

/// Writes the metrics CSV and the final snapshot document into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(METRICS_FILE), outcome.history.to_csv())?;
    let doc = serde_json::to_string_pretty(&outcome.snapshot).map_err(std::io::Error::other)?;
    fs::write(dir.join(SNAPSHOT_FILE), doc + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ganlab_core::distributions::Preset;

    #[test]
    fn layer_stack_parsing() {
        assert_eq!("3x32".parse::<LayerStack>().unwrap().widths(), vec![32, 32, 32]);
        assert_eq!("1x14".parse::<LayerStack>().unwrap().to_string(), "1x14");
        for bad in ["", "3", "0x4", "2x0", "ax3", "3x"] {
            assert!(bad.parse::<LayerStack>().is_err(), "{bad}");
        }
    }

    #[test]
    fn noise_parsing() {
        assert_eq!(parse_noise("1g").unwrap(), NoiseSpec { dim: 1, dist: NoiseDist::Gaussian });
        assert_eq!(parse_noise("2u").unwrap(), NoiseSpec::default());
        for bad in ["", "3u", "2", "2x", "12u"] {
            assert!(parse_noise(bad).is_err(), "{bad}");
        }
    }

    fn spec(epochs: u64, emit_every: u64) -> RunSpec {
        RunSpec {
            config: GanConfig::default(),
            distribution: Preset::TwoGaussians.into(),
            epochs,
            seed: 5,
            emit_every,
            out_dir: None,
        }
    }

    #[test]
    fn run_records_emission_epochs() {
        let out = run(&spec(25, 10)).unwrap();
        let epochs: Vec<u64> = out.history.iter().map(|p| p.epoch).collect();
        assert_eq!(epochs, [0, 10, 20, 25]);
        assert_eq!(out.snapshot.epoch, 25);
        assert!(out.failure.is_none());
    }

    #[test]
    fn zero_epochs_is_rejected() {
        assert!(matches!(run(&spec(0, 1)), Err(Error::Config(_))));
    }

    #[test]
    fn divergent_run_reports_failing_epoch() {
        let mut s = spec(500, 1);
        s.config.optimizer_d = ganlab_core::nn::OptimizerSpec::sgd(1000.0);
        s.config.optimizer_g = ganlab_core::nn::OptimizerSpec::sgd(1000.0);
        let out = run(&s).unwrap();
        let failure = out.failure.expect("lr=1000 diverges");
        assert_eq!(out.snapshot.epoch, failure.epoch - 1);
        assert_eq!(out.history.last().unwrap().epoch, failure.epoch - 1);
    }
}
