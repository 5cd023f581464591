//! The steering state machine: play/pause, epoch- and submodel-level steps,
//! slow-motion phase stepping, and live configuration edits.
//!
//! A [`Session`] is driven by two inputs: [`Session::handle`] for commands and
//! [`Session::tick`] for the passage of time. Both return the messages to
//! send to the client. The session is single-writer; nothing here spawns
//! threads except the data-parallel snapshot helpers.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{Batch, Point};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::gan::{
    discriminator_loss, generator_loss, ConfigChange, GanConfig, GanModel, NoiseSpec, Phase, StepStats, SubStep,
    Submodel,
};
use crate::metrics::{js_divergence, kl_divergence, MetricsHistory, MetricsPoint};
use crate::par::Execution;
use crate::viz::{
    compute_heatmap, density_grid, generator_manifold, DensityGrid, Heatmap, ManifoldGrid,
    DEFAULT_DENSITY_RESOLUTION, DEFAULT_HEATMAP_RESOLUTION, DEFAULT_MANIFOLD_RESOLUTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Running,
    Paused,
    SlowMotion,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Running => "running",
            Mode::Paused => "paused",
            Mode::SlowMotion => "slow_motion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "args")]
pub enum SessionCommand {
    Play,
    Pause,
    StepBoth,
    StepDiscriminator,
    StepGenerator,
    SlowMotionOn,
    SlowMotionOff,
    SetConfig(ConfigChange),
    SetDistribution(Distribution),
    Reset { seed: u64 },
    SetFrameInterval { epochs: u64 },
    SetSlowTick { millis: u64 },
}

impl SessionCommand {
    pub fn name(&self) -> &'static str {
        match self {
            SessionCommand::Play => "Play",
            SessionCommand::Pause => "Pause",
            SessionCommand::StepBoth => "StepBoth",
            SessionCommand::StepDiscriminator => "StepDiscriminator",
            SessionCommand::StepGenerator => "StepGenerator",
            SessionCommand::SlowMotionOn => "SlowMotionOn",
            SessionCommand::SlowMotionOff => "SlowMotionOff",
            SessionCommand::SetConfig(_) => "SetConfig",
            SessionCommand::SetDistribution(_) => "SetDistribution",
            SessionCommand::Reset { .. } => "Reset",
            SessionCommand::SetFrameInterval { .. } => "SetFrameInterval",
            SessionCommand::SetSlowTick { .. } => "SetSlowTick",
        }
    }
}

/// Position inside a slow-motion epoch: which submodel, which of its
/// `k` repetitions, and which of the five phases just ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlowPhase {
    pub submodel: Submodel,
    pub repeat: u32,
    pub phase: u8,
}

impl SlowPhase {
    /// Short label such as `D3` or `G5`.
    pub fn label(&self) -> String {
        let prefix = match self.submodel {
            Submodel::Discriminator => 'D',
            Submodel::Generator => 'G',
        };
        format!("{prefix}{}", self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSnapshot {
    pub epoch: u64,
    pub mode: Mode,
    pub real_samples: Vec<Point>,
    pub fake_samples: Vec<Point>,
    pub real_scores: Vec<f64>,
    pub fake_scores: Vec<f64>,
    pub fake_sample_movements: Vec<Point>,
    pub manifold: ManifoldGrid,
    pub heatmap: Heatmap,
    pub real_density: DensityGrid,
    pub fake_density: DensityGrid,
    pub metrics: MetricsPoint,
    pub slow_phase: Option<SlowPhase>,
    pub config: GanConfig,
    pub distribution: String,
    pub frame_interval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AckPayload {
    pub command: String,
    pub mode: Mode,
    pub epoch: u64,
}

/// Server-to-client envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum ServerMessage {
    Snapshot(Box<TrainingSnapshot>),
    Error(ErrorPayload),
    Ack(AckPayload),
}

impl ServerMessage {
    pub fn error(err: &Error, epoch: u64) -> Self {
        ServerMessage::Error(ErrorPayload {
            code: err.code().to_owned(),
            message: err.to_string(),
            epoch,
        })
    }

    pub fn as_snapshot(&self) -> Option<&TrainingSnapshot> {
        match self {
            ServerMessage::Snapshot(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOptions {
    pub manifold_resolution: usize,
    pub heatmap_resolution: usize,
    pub density_resolution: usize,
    /// Fresh samples drawn per side for each divergence estimate.
    pub metric_samples: usize,
    /// Size of the fixed real/noise batches shown in every frame.
    pub display_samples: usize,
    pub frame_interval: u64,
    pub slow_tick_millis: u64,
    pub execution: Execution,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            manifold_resolution: DEFAULT_MANIFOLD_RESOLUTION,
            heatmap_resolution: DEFAULT_HEATMAP_RESOLUTION,
            density_resolution: DEFAULT_DENSITY_RESOLUTION,
            metric_samples: 1000,
            display_samples: 64,
            frame_interval: 1,
            slow_tick_millis: 800,
            execution: Execution::default(),
        }
    }
}

/// An epoch being executed one phase per tick.
#[derive(Debug, Clone)]
struct SlowEpoch {
    /// Model state at the start of the epoch, restored if a phase fails.
    checkpoint: GanModel,
    pending: VecDeque<(Submodel, u32)>,
    current: Option<(SubStep, u32)>,
    last_phase: Option<SlowPhase>,
}

impl SlowEpoch {
    fn new(model: &GanModel) -> Self {
        let cfg = model.config();
        let pending = (0..cfg.k_d)
            .map(|r| (Submodel::Discriminator, r))
            .chain((0..cfg.k_g).map(|r| (Submodel::Generator, r)))
            .collect();
        Self {
            checkpoint: model.clone(),
            pending,
            current: None,
            last_phase: None,
        }
    }
}

pub struct Session {
    mode: Mode,
    model: GanModel,
    distribution: Distribution,
    history: MetricsHistory,
    options: SessionOptions,
    viz_rng: ChaCha8Rng,
    display_real: Vec<Point>,
    display_noise: Batch,
    last_d_loss: Option<f64>,
    last_g_loss: Option<f64>,
    slow: Option<SlowEpoch>,
}

/// Bins fresh draws from the real distribution and from the generator into
/// density grids, `samples` points per side.
pub fn sample_densities<R: Rng + ?Sized>(
    model: &GanModel,
    source: &Distribution,
    samples: usize,
    resolution: usize,
    rng: &mut R,
) -> Result<(DensityGrid, DensityGrid)> {
    let real = source.sample(samples, rng)?;
    let noise = model.config().noise.sample(samples, rng);
    let fake = model.generate(&noise)?;
    Ok((density_grid(&real, resolution)?, density_grid(&fake, resolution)?))
}

/// JS divergence between fresh real and generated samples.
pub fn sample_js<R: Rng + ?Sized>(
    model: &GanModel,
    source: &Distribution,
    samples: usize,
    resolution: usize,
    rng: &mut R,
) -> Result<f64> {
    let (real, fake) = sample_densities(model, source, samples, resolution, rng)?;
    js_divergence(&real, &fake)
}

fn viz_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // separate stream so visualization draws never perturb training draws
    rng.set_stream(1);
    rng
}

impl Session {
    pub fn new(config: GanConfig, distribution: Distribution, seed: u64, options: SessionOptions) -> Result<Self> {
        if options.frame_interval == 0 {
            return Err(Error::config("frame interval must be at least 1"));
        }
        if options.metric_samples == 0 || options.display_samples == 0 {
            return Err(Error::config("sample counts must be positive"));
        }
        let model = GanModel::new(config, seed)?;
        let mut rng = viz_rng(seed);
        let display_real = distribution.sample(options.display_samples, &mut rng)?;
        let display_noise = model.config().noise.sample(options.display_samples, &mut rng);
        Ok(Self {
            mode: Mode::Idle,
            model,
            distribution,
            history: MetricsHistory::new(),
            options,
            viz_rng: rng,
            display_real,
            display_noise,
            last_d_loss: None,
            last_g_loss: None,
            slow: None,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model(&self) -> &GanModel {
        &self.model
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    pub fn history(&self) -> &MetricsHistory {
        &self.history
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    pub fn epoch(&self) -> u64 {
        self.model.epoch()
    }

    pub fn display_noise(&self) -> &Batch {
        &self.display_noise
    }

    /// Current slow-motion position, present only in slow-motion mode.
    pub fn slow_phase(&self) -> Option<SlowPhase> {
        self.slow.as_ref().and_then(|s| s.last_phase)
    }

    fn reject(&self, cmd: &SessionCommand) -> Error {
        Error::InvalidTransition {
            command: cmd.name(),
            mode: self.mode.name(),
        }
    }

    fn ack(&self, cmd: &SessionCommand) -> ServerMessage {
        ServerMessage::Ack(AckPayload {
            command: cmd.name().to_owned(),
            mode: self.mode,
            epoch: self.model.epoch(),
        })
    }

    /// Applies one command. Rejected commands leave the session unchanged.
    ///
    /// Returns an ack, followed by a snapshot when the command changed what
    /// the client should be showing.
    pub fn handle(&mut self, cmd: SessionCommand) -> Result<Vec<ServerMessage>> {
        let mut redraw = false;
        match &cmd {
            SessionCommand::Play => match self.mode {
                Mode::Idle | Mode::Paused => self.mode = Mode::Running,
                _ => return Err(self.reject(&cmd)),
            },
            SessionCommand::Pause => match self.mode {
                Mode::Running => self.mode = Mode::Paused,
                Mode::SlowMotion => {
                    self.leave_slow_motion()?;
                    self.mode = Mode::Paused;
                    redraw = true;
                }
                _ => return Err(self.reject(&cmd)),
            },
            SessionCommand::StepBoth | SessionCommand::StepDiscriminator | SessionCommand::StepGenerator => {
                if !matches!(self.mode, Mode::Idle | Mode::Paused) {
                    return Err(self.reject(&cmd));
                }
                let stats = match cmd {
                    SessionCommand::StepBoth => self.model.train_epoch(&self.distribution)?,
                    SessionCommand::StepDiscriminator => self.model.train_discriminator_epoch(&self.distribution)?,
                    _ => self.model.train_generator_epoch()?,
                };
                self.note_losses(&stats);
                redraw = true;
            }
            SessionCommand::SlowMotionOn => match self.mode {
                Mode::Idle | Mode::Paused | Mode::Running => {
                    self.slow = Some(SlowEpoch::new(&self.model));
                    self.mode = Mode::SlowMotion;
                }
                Mode::SlowMotion => return Err(self.reject(&cmd)),
            },
            SessionCommand::SlowMotionOff => match self.mode {
                Mode::SlowMotion => {
                    self.leave_slow_motion()?;
                    self.mode = Mode::Running;
                }
                _ => return Err(self.reject(&cmd)),
            },
            SessionCommand::SetConfig(change) => {
                let noise_before = self.model.config().noise;
                // validate on a copy so a rejected edit cannot disturb an in-flight slow epoch
                let mut trial = self.model.clone();
                trial.apply_config_change(change)?;
                if self.mode == Mode::SlowMotion {
                    self.finish_slow_epoch()?;
                    self.model.apply_config_change(change)?;
                    self.slow = Some(SlowEpoch::new(&self.model));
                } else {
                    self.model = trial;
                }
                if self.model.config().noise != noise_before {
                    self.redraw_display_noise();
                }
                redraw = self.mode != Mode::Running;
            }
            SessionCommand::SetDistribution(dist) => {
                let display = dist.sample(self.options.display_samples, &mut self.viz_rng.clone())?;
                if self.mode == Mode::SlowMotion {
                    self.finish_slow_epoch()?;
                    self.slow = Some(SlowEpoch::new(&self.model));
                }
                // keep the rng advance identical to the trial draw above
                let _ = dist.sample(self.options.display_samples, &mut self.viz_rng)?;
                self.display_real = display;
                self.distribution = dist.clone();
                redraw = self.mode != Mode::Running;
            }
            SessionCommand::Reset { seed } => {
                let config = self.model.config().clone();
                let fresh = Session::new(config, self.distribution.clone(), *seed, self.options)?;
                *self = fresh;
                redraw = true;
            }
            SessionCommand::SetFrameInterval { epochs } => {
                if *epochs == 0 {
                    return Err(Error::config("frame interval must be at least 1"));
                }
                self.options.frame_interval = *epochs;
            }
            SessionCommand::SetSlowTick { millis } => {
                if *millis == 0 {
                    return Err(Error::config("slow-motion tick must be at least 1 ms"));
                }
                self.options.slow_tick_millis = *millis;
            }
        }
        let mut out = vec![self.ack(&cmd)];
        if redraw {
            out.push(ServerMessage::Snapshot(Box::new(self.snapshot()?)));
        }
        Ok(out)
    }

    fn redraw_display_noise(&mut self) {
        let noise = self.model.config().noise;
        self.display_noise = noise.sample(self.options.display_samples, &mut self.viz_rng);
    }

    fn note_losses(&mut self, stats: &StepStats) {
        if let Some(d) = stats.d_loss {
            self.last_d_loss = Some(d);
        }
        self.last_g_loss = Some(stats.g_loss);
    }

    /// Advances time by one tick. Running: one epoch, with a snapshot every
    /// `frame_interval` epochs. Slow motion: one phase, always with a
    /// snapshot. Idle and paused sessions do nothing.
    ///
    /// A training failure produces an error message and pauses the session.
    pub fn tick(&mut self) -> Vec<ServerMessage> {
        let result = match self.mode {
            Mode::Running => self.tick_running(),
            Mode::SlowMotion => self.tick_slow(),
            Mode::Idle | Mode::Paused => Ok(Vec::new()),
        };
        match result {
            Ok(out) => out,
            Err(err) => {
                if let Some(slow) = self.slow.take() {
                    self.model = slow.checkpoint;
                }
                self.mode = Mode::Paused;
                vec![ServerMessage::error(&err, self.model.epoch())]
            }
        }
    }

    fn tick_running(&mut self) -> Result<Vec<ServerMessage>> {
        let stats = self.model.train_epoch(&self.distribution)?;
        self.note_losses(&stats);
        if self.model.epoch() % self.options.frame_interval == 0 {
            Ok(vec![ServerMessage::Snapshot(Box::new(self.snapshot()?))])
        } else {
            Ok(Vec::new())
        }
    }

    fn tick_slow(&mut self) -> Result<Vec<ServerMessage>> {
        let finished = self.advance_slow_phase()?;
        let snapshot = self.snapshot()?;
        if finished {
            self.slow = Some(SlowEpoch::new(&self.model));
        }
        Ok(vec![ServerMessage::Snapshot(Box::new(snapshot))])
    }

    /// Runs one phase of the slow epoch. Returns true when that phase completed the epoch.
    fn advance_slow_phase(&mut self) -> Result<bool> {
        let mut slow = self.slow.take().ok_or_else(|| Error::contract("no slow-motion epoch in progress"))?;
        let result = self.advance_slow_inner(&mut slow);
        self.slow = Some(slow);
        result
    }

    fn advance_slow_inner(&mut self, slow: &mut SlowEpoch) -> Result<bool> {
        if slow.current.is_none() {
            let (submodel, repeat) = slow
                .pending
                .pop_front()
                .ok_or_else(|| Error::contract("slow-motion epoch has no remaining steps"))?;
            let step = match submodel {
                Submodel::Discriminator => {
                    let (real, noise) = self.model.draw_discriminator_batches(&self.distribution)?;
                    SubStep::discriminator(real, noise)
                }
                Submodel::Generator => SubStep::generator(self.model.draw_generator_batch()),
            };
            slow.current = Some((step, repeat));
        }
        let (step, repeat) = slow.current.as_mut().expect("current step");
        let phase = step.advance(&mut self.model)?;
        slow.last_phase = Some(SlowPhase {
            submodel: step.submodel(),
            repeat: *repeat,
            phase: phase.number(),
        });
        if phase == Phase::Update {
            let stats = step.stats()?;
            self.note_losses(&stats);
            slow.current = None;
            if slow.pending.is_empty() {
                self.model.finish_epoch();
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Runs the remaining phases of the in-flight slow epoch, if one has started.
    fn finish_slow_epoch(&mut self) -> Result<()> {
        let started = self
            .slow
            .as_ref()
            .is_some_and(|s| s.current.is_some() || s.last_phase.is_some());
        if !started {
            self.slow = None;
            return Ok(());
        }
        loop {
            match self.advance_slow_phase() {
                Ok(true) => break,
                Ok(false) => continue,
                Err(err) => {
                    let slow = self.slow.take().expect("slow epoch");
                    self.model = slow.checkpoint;
                    self.slow = Some(SlowEpoch::new(&self.model));
                    return Err(err);
                }
            }
        }
        self.slow = None;
        Ok(())
    }

    fn leave_slow_motion(&mut self) -> Result<()> {
        self.finish_slow_epoch()?;
        self.slow = None;
        Ok(())
    }

    /// Builds a frame from the current state and records its metrics point
    /// when the epoch is new.
    pub fn snapshot(&mut self) -> Result<TrainingSnapshot> {
        let opts = self.options;
        let exec = opts.execution;
        let model = &self.model;
        let noise_spec: NoiseSpec = model.config().noise;

        let fake_samples = model.generate(&self.display_noise)?;
        let real_scores = model.score(&self.display_real)?;
        let fake_scores = model.score(&fake_samples)?;
        let movements = model.movements(&fake_samples)?;

        let (manifold, heatmap) = exec.join(
            || generator_manifold(model.generator(), noise_spec, opts.manifold_resolution, exec),
            || compute_heatmap(model.discriminator(), opts.heatmap_resolution, exec),
        );
        let (manifold, heatmap) = (manifold?, heatmap?);
        let (real_density, fake_density) = sample_densities(
            model,
            &self.distribution,
            opts.metric_samples,
            opts.density_resolution,
            &mut self.viz_rng,
        )?;
        let kl = kl_divergence(&real_density, &fake_density)?;
        let js = js_divergence(&real_density, &fake_density)?;

        let cfg = model.config();
        let d_loss = match self.last_d_loss {
            Some(v) => v,
            None => discriminator_loss(&real_scores, &fake_scores, cfg.loss)?,
        };
        let g_loss = match self.last_g_loss {
            Some(v) => v,
            None => generator_loss(&fake_scores, cfg.loss, cfg.saturating_generator_loss)?,
        };
        let metrics = MetricsPoint {
            epoch: model.epoch(),
            d_loss,
            g_loss,
            kl,
            js,
        };
        if self.history.last().is_none_or(|p| p.epoch < metrics.epoch) {
            self.history.record(metrics)?;
        }

        Ok(TrainingSnapshot {
            epoch: self.model.epoch(),
            mode: self.mode,
            real_samples: self.display_real.clone(),
            fake_samples,
            real_scores,
            fake_scores,
            fake_sample_movements: movements,
            manifold,
            heatmap,
            real_density,
            fake_density,
            metrics,
            slow_phase: self.slow_phase().filter(|_| self.mode == Mode::SlowMotion),
            config: self.model.config().clone(),
            distribution: self.distribution.name().to_owned(),
            frame_interval: self.options.frame_interval,
        })
    }
}
