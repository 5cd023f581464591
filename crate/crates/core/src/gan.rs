//! Generator/discriminator assembly and the alternating training schedule.
//!
//! Every submodel update runs the same five phases: run the generator, run the
//! discriminator, compute the loss, compute gradients, apply the update.
//! [`SubStep`] executes them one at a time so a caller can observe the
//! intermediate state; [`GanModel::train_discriminator_step`] and
//! [`GanModel::train_generator_step`] run all five at once.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::{Batch, Point};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::nn::{Activation, ForwardCache, Gradients, LayerSpec, Mlp, OptimizerKind, OptimizerSpec};

pub const GAUSSIAN_NOISE_MEAN: f64 = 0.5;
pub const GAUSSIAN_NOISE_STDEV: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDist {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub dim: usize,
    pub dist: NoiseDist,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            dist: NoiseDist::Uniform,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::config(format!("noise dimension must be 1 or 2, got {}", self.dim)));
        }
        Ok(())
    }

    /// Draws `n` noise vectors in `[0, 1]^dim`. Gaussian draws are clamped.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n * self.dim {
            let v = match self.dist {
                NoiseDist::Uniform => rng.random::<f64>(),
                NoiseDist::Gaussian => {
                    let z: f64 = rng.sample(StandardNormal);
                    (GAUSSIAN_NOISE_MEAN + GAUSSIAN_NOISE_STDEV * z).clamp(0.0, 1.0)
                }
            };
            data.push(v);
        }
        Batch::new(n, self.dim, data).expect("noise batch shape")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LogLoss,
    LeastSquares,
}

fn require_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::contract(format!("{what} scores are empty")));
    }
    Ok(())
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Loss of the discriminator on one batch of real and one of fake scores.
pub fn discriminator_loss(real_scores: &[f64], fake_scores: &[f64], loss: LossKind) -> Result<f64> {
    require_scores(real_scores, "real")?;
    require_scores(fake_scores, "fake")?;
    Ok(match loss {
        LossKind::LogLoss => {
            mean(real_scores.iter().map(|s| -s.ln())) + mean(fake_scores.iter().map(|s| -(1.0 - s).ln()))
        }
        LossKind::LeastSquares => {
            0.5 * mean(real_scores.iter().map(|s| (s - 1.0).powi(2)))
                + 0.5 * mean(fake_scores.iter().map(|s| s * s))
        }
    })
}

/// Generator loss. With `saturating` set, log loss uses the minimax form
/// `log(1 - D(G(z)))`, which is non-positive.
pub fn generator_loss(fake_scores: &[f64], loss: LossKind, saturating: bool) -> Result<f64> {
    require_scores(fake_scores, "fake")?;
    Ok(match (loss, saturating) {
        (LossKind::LogLoss, false) => mean(fake_scores.iter().map(|s| -s.ln())),
        (LossKind::LogLoss, true) => mean(fake_scores.iter().map(|s| (1.0 - s).ln())),
        (LossKind::LeastSquares, _) => 0.5 * mean(fake_scores.iter().map(|s| (s - 1.0).powi(2))),
    })
}

/// Per-example derivatives of the discriminator loss terms with respect to
/// the real and fake scores.
pub fn discriminator_score_grads(real: &[f64], fake: &[f64], loss: LossKind) -> (Vec<f64>, Vec<f64>) {
    match loss {
        LossKind::LogLoss => (
            real.iter().map(|s| -1.0 / s).collect(),
            fake.iter().map(|s| 1.0 / (1.0 - s)).collect(),
        ),
        LossKind::LeastSquares => (real.iter().map(|s| s - 1.0).collect(), fake.to_vec()),
    }
}

/// Per-example derivatives of the generator loss with respect to the fake scores.
pub fn generator_score_grads(fake: &[f64], loss: LossKind, saturating: bool) -> Vec<f64> {
    fake.iter()
        .map(|s| match (loss, saturating) {
            (LossKind::LogLoss, false) => -1.0 / s,
            (LossKind::LogLoss, true) => -1.0 / (1.0 - s),
            (LossKind::LeastSquares, _) => s - 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub optimizer_d: OptimizerSpec,
    pub optimizer_g: OptimizerSpec,
    pub loss: LossKind,
    pub k_d: u32,
    pub k_g: u32,
    pub batch_size: usize,
    pub noise: NoiseSpec,
    /// Use the minimax generator objective instead of the non-saturating one.
    #[serde(default)]
    pub saturating_generator_loss: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            gen_hidden: vec![14],
            disc_hidden: vec![14],
            optimizer_d: OptimizerSpec::adam(0.001),
            optimizer_g: OptimizerSpec::adam(0.001),
            loss: LossKind::LogLoss,
            k_d: 1,
            k_g: 1,
            batch_size: 64,
            noise: NoiseSpec::default(),
            saturating_generator_loss: false,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.optimizer_d.validate()?;
        self.optimizer_g.validate()?;
        if self.k_d == 0 || self.k_g == 0 {
            return Err(Error::config("loop counts k_d and k_g must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config(format!("batch size must be at least 2, got {}", self.batch_size)));
        }
        if self.gen_hidden.iter().chain(&self.disc_hidden).any(|&w| w == 0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    /// noise.dim -> hidden (ReLU) ... -> 2 (sigmoid)
    pub fn generator_layers(&self) -> Vec<LayerSpec> {
        chain(self.noise.dim, &self.gen_hidden, 2)
    }

    /// 2 -> hidden (ReLU) ... -> 1 (sigmoid)
    pub fn discriminator_layers(&self) -> Vec<LayerSpec> {
        chain(2, &self.disc_hidden, 1)
    }
}

fn chain(input: usize, hidden: &[usize], output: usize) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut width = input;
    for &h in hidden {
        layers.push(LayerSpec::new(width, h, Activation::Relu));
        width = h;
    }
    layers.push(LayerSpec::new(width, output, Activation::Sigmoid));
    layers
}

/// A single-field edit to [`GanConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", content = "value", rename_all = "snake_case")]
pub enum ConfigChange {
    LrD(f64),
    LrG(f64),
    OptimizerD(OptimizerKind),
    OptimizerG(OptimizerKind),
    Loss(LossKind),
    KD(u32),
    KG(u32),
    BatchSize(usize),
    NoiseDist(NoiseDist),
    NoiseDim(usize),
    GenLayers(Vec<usize>),
    DiscLayers(Vec<usize>),
    SaturatingGeneratorLoss(bool),
}

impl ConfigChange {
    pub fn field_name(&self) -> &'static str {
        match self {
            ConfigChange::LrD(_) => "lr_d",
            ConfigChange::LrG(_) => "lr_g",
            ConfigChange::OptimizerD(_) => "optimizer_d",
            ConfigChange::OptimizerG(_) => "optimizer_g",
            ConfigChange::Loss(_) => "loss",
            ConfigChange::KD(_) => "k_d",
            ConfigChange::KG(_) => "k_g",
            ConfigChange::BatchSize(_) => "batch_size",
            ConfigChange::NoiseDist(_) => "noise_dist",
            ConfigChange::NoiseDim(_) => "noise_dim",
            ConfigChange::GenLayers(_) => "gen_layers",
            ConfigChange::DiscLayers(_) => "disc_layers",
            ConfigChange::SaturatingGeneratorLoss(_) => "saturating_generator_loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Submodel {
    Discriminator,
    Generator,
}

/// The five phases of one submodel update, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    RunGenerator,
    RunDiscriminator,
    ComputeLoss,
    ComputeGradients,
    Update,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::RunGenerator,
        Phase::RunDiscriminator,
        Phase::ComputeLoss,
        Phase::ComputeGradients,
        Phase::Update,
    ];

    /// 1-based position in the sequence.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    fn next(self) -> Option<Phase> {
        Phase::ALL.get(self as usize + 1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Absent for a generator-only step, which sees no real batch.
    pub d_loss: Option<f64>,
    pub g_loss: f64,
    pub fake_samples: Vec<Point>,
    pub real_scores: Vec<f64>,
    pub fake_scores: Vec<f64>,
    /// Negative gradient of the generator loss at each fake sample.
    pub fake_sample_movements: Vec<Point>,
}

/// One submodel update, executable phase by phase.
#[derive(Debug, Clone)]
pub struct SubStep {
    submodel: Submodel,
    real: Option<Batch>,
    noise: Batch,
    completed: Option<Phase>,
    fake: Option<Batch>,
    generator_cache: Option<ForwardCache>,
    real_pass: Option<(Vec<f64>, ForwardCache)>,
    fake_pass: Option<(Vec<f64>, ForwardCache)>,
    d_loss: Option<f64>,
    g_loss: Option<f64>,
    grads: Option<Gradients>,
    movements: Option<Vec<Point>>,
}

impl SubStep {
    pub fn discriminator(real: Batch, noise: Batch) -> Self {
        Self::new(Submodel::Discriminator, Some(real), noise)
    }

    pub fn generator(noise: Batch) -> Self {
        Self::new(Submodel::Generator, None, noise)
    }

    fn new(submodel: Submodel, real: Option<Batch>, noise: Batch) -> Self {
        Self {
            submodel,
            real,
            noise,
            completed: None,
            fake: None,
            generator_cache: None,
            real_pass: None,
            fake_pass: None,
            d_loss: None,
            g_loss: None,
            grads: None,
            movements: None,
        }
    }

    pub fn submodel(&self) -> Submodel {
        self.submodel
    }

    /// Last phase executed, if any.
    pub fn completed_phase(&self) -> Option<Phase> {
        self.completed
    }

    pub fn is_complete(&self) -> bool {
        self.completed == Some(Phase::Update)
    }

    pub fn noise(&self) -> &Batch {
        &self.noise
    }

    pub fn real(&self) -> Option<&Batch> {
        self.real.as_ref()
    }

    /// Runs the next phase. Only the update phase mutates `model`, and it
    /// leaves `model` untouched on error.
    pub fn advance(&mut self, model: &mut GanModel) -> Result<Phase> {
        let phase = match self.completed {
            None => Phase::RunGenerator,
            Some(p) => p
                .next()
                .ok_or_else(|| Error::contract("sub-step already completed all five phases"))?,
        };
        match phase {
            Phase::RunGenerator => self.run_generator(model)?,
            Phase::RunDiscriminator => self.run_discriminator(model)?,
            Phase::ComputeLoss => self.compute_loss(model)?,
            Phase::ComputeGradients => self.compute_gradients(model)?,
            Phase::Update => self.update(model)?,
        }
        self.completed = Some(phase);
        Ok(phase)
    }

    /// Runs all remaining phases and returns the step statistics.
    pub fn run(mut self, model: &mut GanModel) -> Result<StepStats> {
        while !self.is_complete() {
            self.advance(model)?;
        }
        self.stats()
    }

    fn run_generator(&mut self, model: &GanModel) -> Result<()> {
        check_batch(&self.noise, model.config.noise.dim, "noise")?;
        match self.submodel {
            Submodel::Discriminator => {
                self.fake = Some(model.generator.predict(&self.noise)?);
            }
            Submodel::Generator => {
                let (fake, cache) = model.generator.forward(&self.noise)?;
                self.fake = Some(fake);
                self.generator_cache = Some(cache);
            }
        }
        Ok(())
    }

    fn run_discriminator(&mut self, model: &GanModel) -> Result<()> {
        let fake = self.fake.as_ref().expect("generator ran");
        if !fake.is_finite() {
            return Err(Error::numerical("generator produced non-finite samples"));
        }
        if let Some(real) = &self.real {
            check_batch(real, 2, "real")?;
            let (scores, cache) = model.discriminator.forward(real)?;
            self.real_pass = Some((scores.into_vec(), cache));
        }
        let (scores, cache) = model.discriminator.forward(fake)?;
        self.fake_pass = Some((scores.into_vec(), cache));
        Ok(())
    }

    fn compute_loss(&mut self, model: &GanModel) -> Result<()> {
        let cfg = &model.config;
        let (fake_scores, _) = self.fake_pass.as_ref().expect("discriminator ran");
        let g_loss = generator_loss(fake_scores, cfg.loss, cfg.saturating_generator_loss)?;
        let d_loss = match &self.real_pass {
            Some((real_scores, _)) => Some(discriminator_loss(real_scores, fake_scores, cfg.loss)?),
            None => None,
        };
        let watched = match self.submodel {
            Submodel::Discriminator => d_loss.unwrap_or(f64::NAN),
            Submodel::Generator => g_loss,
        };
        if !watched.is_finite() {
            return Err(Error::numerical(format!("{:?} loss is not finite", self.submodel)));
        }
        self.d_loss = d_loss;
        self.g_loss = Some(g_loss);
        Ok(())
    }

    fn compute_gradients(&mut self, model: &GanModel) -> Result<()> {
        let cfg = &model.config;
        let (fake_scores, fake_cache) = self.fake_pass.as_ref().expect("discriminator ran");
        let n = fake_scores.len();

        // Movement of each fake sample: -d(g_loss_i)/d(sample_i) through the current discriminator.
        let g_out = generator_score_grads(fake_scores, cfg.loss, cfg.saturating_generator_loss);
        let (_, sample_grads) = model
            .discriminator
            .backward(fake_cache, &Batch::new(n, 1, g_out)?)?;
        self.movements = Some(sample_grads.iter_rows().map(|g| [-g[0], -g[1]]).collect());

        let grads = match self.submodel {
            Submodel::Discriminator => {
                let (real_scores, real_cache) = self.real_pass.as_ref().expect("real batch scored");
                let (dr, df) = discriminator_score_grads(real_scores, fake_scores, cfg.loss);
                let (mut total, _) = model
                    .discriminator
                    .backward(real_cache, &Batch::new(dr.len(), 1, dr)?)?;
                let (fake_part, _) = model.discriminator.backward(fake_cache, &Batch::new(n, 1, df)?)?;
                for (acc, part) in total.layers.iter_mut().zip(&fake_part.layers) {
                    acc.weights.iter_mut().zip(&part.weights).for_each(|(a, b)| *a += b);
                    acc.biases.iter_mut().zip(&part.biases).for_each(|(a, b)| *a += b);
                }
                total
            }
            Submodel::Generator => {
                let cache = self.generator_cache.as_ref().expect("generator forward cached");
                let (grads, _) = model.generator.backward(cache, &sample_grads)?;
                grads
            }
        };
        if !grads.is_finite() {
            return Err(Error::numerical(format!("{:?} gradients are not finite", self.submodel)));
        }
        self.grads = Some(grads);
        Ok(())
    }

    fn update(&mut self, model: &mut GanModel) -> Result<()> {
        let grads = self.grads.as_ref().expect("gradients computed");
        match self.submodel {
            Submodel::Discriminator => {
                let spec = model.config.optimizer_d;
                model.discriminator.apply_update(grads, &spec)
            }
            Submodel::Generator => {
                let spec = model.config.optimizer_g;
                model.generator.apply_update(grads, &spec)
            }
        }
    }

    /// Statistics gathered so far; requires the gradient phase to have run.
    pub fn stats(&self) -> Result<StepStats> {
        let movements = self
            .movements
            .clone()
            .ok_or_else(|| Error::contract("statistics are available after the gradient phase"))?;
        let fake = self.fake.as_ref().expect("generator ran");
        Ok(StepStats {
            d_loss: self.d_loss,
            g_loss: self.g_loss.expect("loss computed"),
            fake_samples: fake.to_points(),
            real_scores: self.real_pass.as_ref().map(|(s, _)| s.clone()).unwrap_or_default(),
            fake_scores: self.fake_pass.as_ref().expect("discriminator ran").0.clone(),
            fake_sample_movements: movements,
        })
    }

    /// Parameter gradients of the stepped submodel, once the gradient phase has run.
    pub fn gradients(&self) -> Option<&Gradients> {
        self.grads.as_ref()
    }

    /// Fake samples from the generator phase, once it has run.
    pub fn fake_samples(&self) -> Option<Vec<Point>> {
        self.fake.as_ref().map(Batch::to_points)
    }
}

fn check_batch(batch: &Batch, width: usize, what: &'static str) -> Result<()> {
    if batch.cols() != width {
        return Err(Error::Shape {
            context: what,
            expected: width,
            actual: batch.cols(),
        });
    }
    if batch.rows() == 0 {
        return Err(Error::contract(format!("{what} batch is empty")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GanModel {
    generator: Mlp,
    discriminator: Mlp,
    config: GanConfig,
    epoch: u64,
    rng: ChaCha8Rng,
}

impl GanModel {
    pub fn new(config: GanConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generator = Mlp::new(&config.generator_layers(), rng.next_u64())?;
        let discriminator = Mlp::new(&config.discriminator_layers(), rng.next_u64())?;
        Ok(Self {
            generator,
            discriminator,
            config,
            epoch: 0,
            rng,
        })
    }

    /// Assembles a model from explicit networks. Widths must agree with `config`.
    pub fn from_parts(config: GanConfig, generator: Mlp, discriminator: Mlp, seed: u64) -> Result<Self> {
        config.validate()?;
        if generator.input_width() != config.noise.dim || generator.output_width() != 2 {
            return Err(Error::config("generator must map noise.dim inputs to 2 outputs"));
        }
        if discriminator.input_width() != 2 || discriminator.output_width() != 1 {
            return Err(Error::config("discriminator must map 2 inputs to 1 output"));
        }
        Ok(Self {
            generator,
            discriminator,
            config,
            epoch: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn generator(&self) -> &Mlp {
        &self.generator
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.discriminator
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn sample_noise(&mut self, n: usize) -> Batch {
        self.config.noise.sample(n, &mut self.rng)
    }

    /// Draws the batches for one discriminator update: real first, then noise.
    pub fn draw_discriminator_batches(&mut self, source: &Distribution) -> Result<(Batch, Batch)> {
        let n = self.config.batch_size;
        let real = Batch::from_points(&source.sample(n, &mut self.rng)?);
        let noise = self.sample_noise(n);
        Ok((real, noise))
    }

    pub fn draw_generator_batch(&mut self) -> Batch {
        self.sample_noise(self.config.batch_size)
    }

    /// Generator output for explicit noise.
    pub fn generate(&self, noise: &Batch) -> Result<Vec<Point>> {
        Ok(self.generator.predict(noise)?.to_points())
    }

    /// Discriminator scores for explicit points.
    pub fn score(&self, points: &[Point]) -> Result<Vec<f64>> {
        Ok(self.discriminator.predict(&Batch::from_points(points))?.into_vec())
    }

    /// Negative generator-loss gradient at each point, through the current discriminator.
    pub fn movements(&self, points: &[Point]) -> Result<Vec<Point>> {
        let (scores, cache) = self.discriminator.forward(&Batch::from_points(points))?;
        let g = generator_score_grads(scores.as_slice(), self.config.loss, self.config.saturating_generator_loss);
        let (_, grads) = self
            .discriminator
            .backward(&cache, &Batch::new(points.len(), 1, g)?)?;
        Ok(grads.iter_rows().map(|g| [-g[0], -g[1]]).collect())
    }

    /// One discriminator update with the generator frozen.
    /// On error the model is unchanged.
    pub fn train_discriminator_step(&mut self, real: Batch, noise: Batch) -> Result<StepStats> {
        SubStep::discriminator(real, noise).run(self)
    }

    /// One generator update with the discriminator frozen.
    /// On error the model is unchanged.
    pub fn train_generator_step(&mut self, noise: Batch) -> Result<StepStats> {
        SubStep::generator(noise).run(self)
    }

    /// `k_d` discriminator updates on fresh batches. Does not touch the epoch counter.
    fn discriminator_round(&mut self, source: &Distribution) -> Result<StepStats> {
        let mut last = None;
        for _ in 0..self.config.k_d {
            let (real, noise) = self.draw_discriminator_batches(source)?;
            last = Some(self.train_discriminator_step(real, noise)?);
        }
        Ok(last.expect("k_d >= 1"))
    }

    fn generator_round(&mut self) -> Result<StepStats> {
        let mut last = None;
        for _ in 0..self.config.k_g {
            let noise = self.draw_generator_batch();
            last = Some(self.train_generator_step(noise)?);
        }
        Ok(last.expect("k_g >= 1"))
    }

    /// One epoch: `k_d` discriminator updates then `k_g` generator updates.
    /// Transactional: on error the model, including its rng, is unchanged.
    pub fn train_epoch(&mut self, source: &Distribution) -> Result<StepStats> {
        let mut next = self.clone();
        let d_stats = next.discriminator_round(source)?;
        let mut stats = next.generator_round()?;
        stats.d_loss = d_stats.d_loss;
        stats.real_scores = d_stats.real_scores;
        next.epoch += 1;
        *self = next;
        Ok(stats)
    }

    /// `k_d` discriminator updates only, counted as one epoch.
    pub fn train_discriminator_epoch(&mut self, source: &Distribution) -> Result<StepStats> {
        let mut next = self.clone();
        let stats = next.discriminator_round(source)?;
        next.epoch += 1;
        *self = next;
        Ok(stats)
    }

    /// `k_g` generator updates only, counted as one epoch.
    pub fn train_generator_epoch(&mut self) -> Result<StepStats> {
        let mut next = self.clone();
        let stats = next.generator_round()?;
        next.epoch += 1;
        *self = next;
        Ok(stats)
    }

    /// Marks an epoch completed by externally sequenced sub-steps.
    pub(crate) fn finish_epoch(&mut self) {
        self.epoch += 1;
    }

    /// Applies a single-field configuration edit. Structural edits reinitialize
    /// only the affected submodel, seeded from the model's rng. Invalid edits
    /// leave the model unchanged.
    pub fn apply_config_change(&mut self, change: &ConfigChange) -> Result<()> {
        let mut cfg = self.config.clone();
        let mut reinit_generator = false;
        let mut reinit_discriminator = false;
        let mut reset_d_moments = false;
        let mut reset_g_moments = false;
        match change {
            ConfigChange::LrD(lr) => cfg.optimizer_d.learning_rate = *lr,
            ConfigChange::LrG(lr) => cfg.optimizer_g.learning_rate = *lr,
            ConfigChange::OptimizerD(kind) => {
                reset_d_moments = cfg.optimizer_d.kind != *kind;
                cfg.optimizer_d.kind = *kind;
            }
            ConfigChange::OptimizerG(kind) => {
                reset_g_moments = cfg.optimizer_g.kind != *kind;
                cfg.optimizer_g.kind = *kind;
            }
            ConfigChange::Loss(loss) => cfg.loss = *loss,
            ConfigChange::KD(k) => cfg.k_d = *k,
            ConfigChange::KG(k) => cfg.k_g = *k,
            ConfigChange::BatchSize(n) => cfg.batch_size = *n,
            ConfigChange::NoiseDist(dist) => cfg.noise.dist = *dist,
            ConfigChange::NoiseDim(dim) => {
                reinit_generator = cfg.noise.dim != *dim;
                cfg.noise.dim = *dim;
            }
            ConfigChange::GenLayers(widths) => {
                reinit_generator = true;
                cfg.gen_hidden = widths.clone();
            }
            ConfigChange::DiscLayers(widths) => {
                reinit_discriminator = true;
                cfg.disc_hidden = widths.clone();
            }
            ConfigChange::SaturatingGeneratorLoss(on) => cfg.saturating_generator_loss = *on,
        }
        cfg.validate()?;

        if reinit_generator {
            self.generator = Mlp::new(&cfg.generator_layers(), self.rng.next_u64())?;
        }
        if reinit_discriminator {
            self.discriminator = Mlp::new(&cfg.discriminator_layers(), self.rng.next_u64())?;
        }
        if reset_d_moments {
            self.discriminator.reset_optimizer();
        }
        if reset_g_moments {
            self.generator.reset_optimizer();
        }
        self.config = cfg;
        Ok(())
    }
}
