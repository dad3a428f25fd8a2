use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamParams, AdamState};
use super::config::{lr_at, Profile, TrainConfig};
use crate::data::{
    augment, image_tensor, low_res_target, AugmentConfig, FlipSwap, Sample, FIGURE_CLASSES,
    MEAN_PIXEL,
};
use crate::error::{Error, Result};
use crate::losses::{
    adver_loss_graph, mce_loss, mman_loss, weighted_sum, DiscScores, MmanInputs, Side,
};
use crate::metrics::{ConvergenceTrace, TraceRow};
use crate::models::{
    build_variant, Attachment, DiscMode, GeneratorOutput, ModelSet, TraceSlot, VariantKind,
    VariantSpec, LOW_RES_FACTOR, MID_RES_FACTOR,
};
use crate::nn::{Bound, ForwardCtx};
use crate::tensor::{Graph, Real, Tensor, Var};

/// Mean over `factor×factor` blocks of an `N×C×H×W` tensor.
pub fn area_downsample<T: Real>(t: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = t.dims4()?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::shape(
            "area_downsample",
            format!("{h}×{w} is not divisible by {factor}"),
        ));
    }
    if factor == 1 {
        return Ok(t.clone());
    }
    let (oh, ow) = (h / factor, w / factor);
    let inv = T::from_f64(1.0 / (factor * factor) as f64);
    let src = t.data();
    Tensor::new(
        &[n, c, oh, ow],
        (0..n * c * oh * ow)
            .map(|i| {
                let (plane, y, x) = (i / (oh * ow), (i / ow) % oh, i % ow);
                let base = plane * h * w;
                let mut s = T::zero();
                for yy in y * factor..(y + 1) * factor {
                    for xx in x * factor..(x + 1) * factor {
                        s += src[base + yy * w + xx];
                    }
                }
                s * inv
            })
            .collect(),
    )
}

/// Visiting order of the training set in `epoch`; depends only on the seed.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{} = {v}", what())))
    }
}

fn slot_name(slot: TraceSlot) -> &'static str {
    match slot {
        TraceSlot::Macro => "macro",
        TraceSlot::Micro => "micro",
        TraceSlot::Mid => "mid",
    }
}

/// One iteration's generator forward pass and its targets. The discriminator
/// phase reads the outputs as constants, the generator phase differentiates
/// through them.
pub struct Prepared<T: Real> {
    graph: Graph<T>,
    gen_bound: Bound,
    out: GeneratorOutput,
    y_high: Tensor<T>,
    y_low: Tensor<T>,
    y_mid: Option<Tensor<T>>,
    /// Input image at each discriminator's resolution.
    pair_images: Vec<Tensor<T>>,
    lr: f64,
}

impl<T: Real> Prepared<T> {
    fn output(&self, attach: Attachment) -> Result<Var> {
        match attach {
            Attachment::Low => Ok(self.out.low),
            Attachment::High => Ok(self.out.high),
            Attachment::Mid => self
                .out
                .mid
                .ok_or_else(|| Error::InvalidArgument("generator has no mid head".into())),
        }
    }

    fn target(&self, attach: Attachment) -> Result<&Tensor<T>> {
        match attach {
            Attachment::Low => Ok(&self.y_low),
            Attachment::High => Ok(&self.y_high),
            Attachment::Mid => self
                .y_mid
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("no mid target".into())),
        }
    }
}

/// Discriminator-phase measurements, one entry per attached discriminator.
#[derive(Clone, Debug, Default)]
pub struct DiscPhase {
    pub scores: Vec<(f64, f64)>,
    pub loss: Option<f64>,
}

/// Alternating optimizer state for one variant.
#[derive(Clone, Debug)]
pub struct Trainer<T: Real> {
    pub(crate) config: TrainConfig,
    pub(crate) models: ModelSet<T>,
    pub(crate) gen_opt: AdamState<T>,
    pub(crate) disc_opts: Vec<AdamState<T>>,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) iteration: usize,
    pub(crate) trace: ConvergenceTrace,
}

impl<T: Real> Trainer<T> {
    /// Builds and initializes the variant's networks from `config.seed`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.precision.to_string() != T::NAME {
            return Err(Error::config(
                "precision",
                format!(
                    "config asks for {}, trainer runs in {}",
                    config.precision,
                    T::NAME
                ),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let models = build_variant(
            &VariantSpec::new(config.variant),
            &config.generator_config(),
            config.profile.extent(),
            &mut rng,
        )?;
        let gen_opt = AdamState::new(models.generator.store());
        let disc_opts = models
            .discs
            .iter()
            .map(|d| AdamState::new(d.disc.store()))
            .collect();
        Ok(Self {
            config,
            models,
            gen_opt,
            disc_opts,
            rng,
            iteration: 0,
            trace: ConvergenceTrace::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn models(&self) -> &ModelSet<T> {
        &self.models
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn total_iterations(&self) -> usize {
        self.config.total_iterations()
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.total_iterations()
    }

    fn adam(&self, lr: f64) -> AdamParams {
        AdamParams {
            lr,
            beta1: self.config.beta1,
            beta2: self.config.beta2,
            eps: self.config.adam_eps,
            weight_decay: self.config.weight_decay,
        }
    }

    fn augment_config(&self) -> AugmentConfig {
        let swap = if self.config.classes == FIGURE_CLASSES {
            FlipSwap::figure()
        } else {
            FlipSwap::identity(self.config.classes)
        };
        match self.config.profile {
            Profile::Desk => AugmentConfig {
                swap,
                ..AugmentConfig::desk()
            },
            Profile::Full => AugmentConfig::full(swap),
        }
    }

    /// Picks this iteration's sample, augments it and runs the generator.
    pub fn prepare(&mut self, samples: &[Sample]) -> Result<Prepared<T>> {
        let n = samples.len();
        if n != self.config.samples {
            return Err(Error::config(
                "samples",
                format!("config says {}, training set has {n}", self.config.samples),
            ));
        }
        if self.is_finished() {
            return Err(Error::InvalidArgument(format!(
                "training already ran its {} iterations",
                self.total_iterations()
            )));
        }
        let epoch = self.iteration / n;
        let lr = lr_at(epoch, &self.config)?;
        let index = epoch_order(self.config.seed, epoch, n)[self.iteration % n];
        let sample = if self.config.augment {
            augment(&samples[index], &self.augment_config(), &mut self.rng)?
        } else {
            samples[index].clone()
        };
        let extent = self.models.input_extent;
        let label = &sample.label;
        if (label.height(), label.width()) != (extent, extent) {
            return Err(Error::shape(
                "training sample",
                format!(
                    "{}×{} does not match the {extent}×{extent} input",
                    label.height(),
                    label.width()
                ),
            ));
        }
        if label.classes() != self.config.classes {
            return Err(Error::config(
                "classes",
                format!(
                    "config says {}, sample {index} has {}",
                    self.config.classes,
                    label.classes()
                ),
            ));
        }
        let rule = self.config.low_res_rule;
        let image = image_tensor::<T>(&sample.image, MEAN_PIXEL);
        let y_high = label.one_hot::<T>();
        let y_low = low_res_target(label, LOW_RES_FACTOR, rule)?.one_hot::<T>();
        let y_mid = match self.models.generator.config().mid_head {
            true => Some(low_res_target(label, MID_RES_FACTOR, rule)?.one_hot::<T>()),
            false => None,
        };
        let pair_images = self
            .models
            .discs
            .iter()
            .map(|d| area_downsample(&image, d.spec.attach.factor()))
            .collect::<Result<Vec<_>>>()?;

        let mut graph = Graph::new();
        let gen_bound = self.models.generator.store().bind(&mut graph, true);
        let x = graph.constant(image);
        let mut ctx = ForwardCtx {
            training: true,
            rng: &mut self.rng,
        };
        let out = self
            .models
            .generator
            .forward(&mut graph, &gen_bound, x, &mut ctx)?;
        Ok(Prepared {
            graph,
            gen_bound,
            out,
            y_high,
            y_low,
            y_mid,
            pair_images,
            lr,
        })
    }

    /// `d_steps` updates of every discriminator on (real, detached fake)
    /// pairs. Scores and loss are those of the first step, before its update.
    pub fn discriminator_phase(&mut self, prep: &Prepared<T>) -> Result<DiscPhase> {
        let mut phase = DiscPhase::default();
        if self.models.discs.is_empty() {
            return Ok(phase);
        }
        let hp = self.adam(prep.lr);
        for step in 0..self.config.d_steps {
            let mut g = Graph::new();
            let mut terms = Vec::new();
            let mut bounds = Vec::new();
            for (i, d) in self.models.discs.iter().enumerate() {
                let bound = d.disc.store().bind(&mut g, true);
                let image = g.constant(prep.pair_images[i].clone());
                let real = g.constant(prep.target(d.spec.attach)?.clone());
                let fake = g.constant(prep.graph.value(prep.output(d.spec.attach)?).clone());
                let mut ctx = ForwardCtx {
                    training: true,
                    rng: &mut self.rng,
                };
                let r = d.disc.forward(&mut g, &bound, real, image, &mut ctx)?.score;
                let f = d.disc.forward(&mut g, &bound, fake, image, &mut ctx)?.score;
                let loss = adver_loss_graph(
                    &mut g,
                    DiscScores {
                        real: Some(r),
                        fake: f,
                    },
                    Side::Discriminator,
                )?;
                let name = slot_name(d.spec.slot);
                finite(g.value(loss).item().as_f64(), || {
                    format!("{name} discriminator loss")
                })?;
                if step == 0 {
                    phase
                        .scores
                        .push((g.value(r).item().as_f64(), g.value(f).item().as_f64()));
                }
                terms.push((1.0, loss));
                bounds.push(bound);
            }
            let total = weighted_sum(&mut g, &terms)?;
            if step == 0 {
                phase.loss = Some(g.value(total).item().as_f64());
            }
            let grads = g.backward(total)?;
            for ((d, bound), opt) in self
                .models
                .discs
                .iter_mut()
                .zip(&bounds)
                .zip(&mut self.disc_opts)
            {
                let store = d.disc.store_mut();
                store.accumulate(&grads, bound)?;
                if !store.grads_finite() {
                    store.zero_grad();
                    return Err(Error::NonFinite(format!(
                        "{} discriminator gradient",
                        slot_name(d.spec.slot)
                    )));
                }
                adam_step(store, opt, &hp)?;
            }
        }
        Ok(phase)
    }

    /// One generator update against the frozen discriminators. Returns the
    /// trace row with the discriminator-phase values filled in from `disc`.
    pub fn generator_phase(&mut self, mut prep: Prepared<T>, disc: &DiscPhase) -> Result<TraceRow> {
        let hp = self.adam(prep.lr);
        let weights = self.config.weights;
        let g = &mut prep.graph;
        let mut fake_scores = Vec::new();
        for (i, d) in self.models.discs.iter().enumerate() {
            let bound = d.disc.store().bind(g, false);
            let image = g.constant(prep.pair_images[i].clone());
            let map = match d.spec.attach {
                Attachment::Low => prep.out.low,
                Attachment::High => prep.out.high,
                Attachment::Mid => prep
                    .out
                    .mid
                    .ok_or_else(|| Error::InvalidArgument("generator has no mid head".into()))?,
            };
            let mut ctx = ForwardCtx {
                training: true,
                rng: &mut self.rng,
            };
            fake_scores.push(d.disc.forward(g, &bound, map, image, &mut ctx)?.score);
        }
        let y_low = g.constant(prep.y_low.clone());
        let y_high = g.constant(prep.y_high.clone());

        let mut row = TraceRow {
            iter: self.iteration,
            loss_dis: disc.loss,
            ..TraceRow::default()
        };
        let slots: Vec<TraceSlot> = self.models.discs.iter().map(|d| d.spec.slot).collect();
        let total = if self.config.variant == VariantKind::Mman {
            let slot_score = |s: TraceSlot| {
                slots
                    .iter()
                    .position(|&x| x == s)
                    .map(|i| fake_scores[i])
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "mman variant lacks the {} discriminator",
                            slot_name(s)
                        ))
                    })
            };
            let inputs = MmanInputs {
                low_pred: prep.out.low,
                high_pred: prep.out.high,
                low_target: y_low,
                high_target: y_high,
                macro_scores: DiscScores {
                    real: None,
                    fake: slot_score(TraceSlot::Macro)?,
                },
                micro_scores: DiscScores {
                    real: None,
                    fake: slot_score(TraceSlot::Micro)?,
                },
            };
            let loss = mman_loss(g, inputs, &weights, Side::Generator)?;
            let b = loss.breakdown(g);
            row.ce_low = b.low_ce;
            row.ce_high = b.high_ce;
            row.adv_macro = Some(b.macro_adv);
            row.adv_micro = Some(b.micro_adv);
            loss.total
        } else {
            let ce_low = mce_loss(g, prep.out.low, y_low)?;
            let ce_high = mce_loss(g, prep.out.high, y_high)?;
            row.ce_low = g.value(ce_low).item().as_f64();
            row.ce_high = g.value(ce_high).item().as_f64();
            let mut terms = vec![(weights.low_ce, ce_low), (weights.high_ce, ce_high)];
            if let (Some(mid), Some(y_mid)) = (prep.out.mid, prep.y_mid.as_ref()) {
                let y_mid = g.constant(y_mid.clone());
                terms.push((weights.low_ce, mce_loss(g, mid, y_mid)?));
            }
            for (d, &fake) in self.models.discs.iter().zip(&fake_scores) {
                let adv = adver_loss_graph(g, DiscScores { real: None, fake }, Side::Generator)?;
                let value = Some(g.value(adv).item().as_f64());
                match d.spec.slot {
                    TraceSlot::Macro => row.adv_macro = value,
                    TraceSlot::Micro => row.adv_micro = value,
                    TraceSlot::Mid => row.adv_mid = value,
                }
                let w = match d.spec.mode {
                    DiscMode::Macro => weights.mix_adv,
                    DiscMode::Micro => weights.micro_adv,
                };
                terms.push((w, adv));
            }
            weighted_sum(g, &terms)?
        };
        row.loss_gen = g.value(total).item().as_f64();
        for (slot, scores) in slots.iter().zip(&disc.scores) {
            match slot {
                TraceSlot::Macro => row.d_macro = Some(*scores),
                TraceSlot::Micro => row.d_micro = Some(*scores),
                TraceSlot::Mid => row.d_mid = Some(*scores),
            }
        }
        finite(row.ce_low, || "low-resolution cross-entropy".into())?;
        finite(row.ce_high, || "full-resolution cross-entropy".into())?;
        for (name, v) in [
            ("macro", row.adv_macro),
            ("micro", row.adv_micro),
            ("mid", row.adv_mid),
        ] {
            if let Some(v) = v {
                finite(v, || format!("{name} adversarial loss (generator side)"))?;
            }
        }
        finite(row.loss_gen, || "generator loss".into())?;

        let grads = g.backward(total)?;
        let store = self.models.generator.store_mut();
        store.accumulate(&grads, &prep.gen_bound)?;
        if !store.grads_finite() {
            store.zero_grad();
            return Err(Error::NonFinite("generator gradient".into()));
        }
        adam_step(store, &mut self.gen_opt, &hp)?;
        Ok(row)
    }

    /// One full iteration: discriminator phase, generator phase, trace row.
    pub fn step(&mut self, samples: &[Sample]) -> Result<TraceRow> {
        let prep = self.prepare(samples)?;
        let disc = self.discriminator_phase(&prep)?;
        let row = self.generator_phase(prep, &disc)?;
        self.trace.push(row.clone())?;
        self.iteration += 1;
        Ok(row)
    }

    /// Runs up to `limit` more iterations, stopping at the end of training.
    pub fn run(&mut self, samples: &[Sample], limit: Option<usize>) -> Result<()> {
        let end = match limit {
            Some(k) => (self.iteration + k).min(self.total_iterations()),
            None => self.total_iterations(),
        };
        while self.iteration < end {
            let row = self.step(samples)?;
            if row.iter % 100 == 0 {
                log::info!(
                    "iter {} ce_low {:.4} ce_high {:.4} L_gen {:.4}",
                    row.iter,
                    row.ce_low,
                    row.ce_high,
                    row.loss_gen
                );
            }
        }
        Ok(())
    }
}

/// Trains `config.variant` on `samples` to completion.
pub fn train_alternating<T: Real>(config: TrainConfig, samples: &[Sample]) -> Result<Trainer<T>> {
    let mut trainer = Trainer::new(config)?;
    trainer.run(samples, None)?;
    Ok(trainer)
}
