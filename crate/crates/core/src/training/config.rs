use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::config::{parse_map, parse_value};
use crate::data::{synth_set, DownsampleRule, Sample};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::models::{GeneratorConfig, VariantKind};

const HELD_OUT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Resolution profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// 64×64 canvas, 7 classes.
    Desk,
    /// 256×256 crops.
    Full,
}

impl Profile {
    pub fn extent(self) -> usize {
        match self {
            Profile::Desk => 64,
            Profile::Full => 256,
        }
    }

    /// Shorter side before the random crop.
    pub fn resize_short(self) -> usize {
        match self {
            Profile::Desk => 72,
            Profile::Full => 288,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

macro_rules! named_enum {
    ($t:ty, $field:literal, $($v:path => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($v => $s),+ })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::config($field, format!("unknown value `{s}`"))),
                }
            }
        }
    };
}

named_enum!(Profile, "profile", Profile::Desk => "desk", Profile::Full => "full");
named_enum!(Precision, "precision", Precision::F32 => "f32", Precision::F64 => "f64");

fn rule_name(r: DownsampleRule) -> &'static str {
    match r {
        DownsampleRule::Majority => "majority",
        DownsampleRule::Nearest => "nearest",
    }
}

/// Every hyperparameter of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    pub decay_epoch: usize,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub seed: u64,
    pub precision: Precision,
    pub variant: VariantKind,
    pub profile: Profile,
    pub classes: usize,
    /// Synthetic training samples.
    pub samples: usize,
    /// Seed of the synthetic training set.
    pub data_seed: u64,
    pub augment: bool,
    pub low_res_rule: DownsampleRule,
    pub scales: Vec<f64>,
    pub widths: [usize; 4],
    pub dropout: f64,
    pub init_std: f64,
}

impl TrainConfig {
    pub fn new(profile: Profile) -> Self {
        Self {
            weights: LossWeights::default(),
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 1e-4,
            batch: 1,
            epochs: 30,
            decay_epoch: 15,
            d_steps: 1,
            seed: 0,
            precision: Precision::F32,
            variant: VariantKind::Mman,
            profile,
            classes: crate::data::FIGURE_CLASSES,
            samples: 200,
            data_seed: 0,
            augment: true,
            low_res_rule: DownsampleRule::Majority,
            scales: vec![0.8, 1.0, 1.2],
            widths: [32, 64, 128, 256],
            dropout: crate::nn::DROPOUT_RATE,
            init_std: 0.001,
        }
    }

    /// The 50-epoch schedule with the drop at epoch 25.
    pub fn long_schedule(mut self) -> Self {
        self.epochs = 50;
        self.decay_epoch = 25;
        self
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            classes: self.classes,
            widths: self.widths,
            bridge_dilations: [1, 2, 4],
            dropout: self.dropout,
            init_std: self.init_std,
            mid_head: false,
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs * self.samples.div_ceil(self.batch)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let positive = [
            ("lr", self.lr),
            ("adam_eps", self.adam_eps),
            ("init_std", self.init_std),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        for (field, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("dropout", self.dropout),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(field, format!("must lie in [0, 1), got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(
                "weight_decay",
                format!("must be >= 0, got {}", self.weight_decay),
            ));
        }
        if self.batch != 1 {
            return Err(Error::config(
                "batch",
                "only a batch size of 1 is supported",
            ));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.decay_epoch >= self.epochs {
            return Err(Error::config(
                "decay_epoch",
                format!("{} is not below epochs = {}", self.decay_epoch, self.epochs),
            ));
        }
        if self.d_steps == 0 {
            return Err(Error::config("d_steps", "must be positive"));
        }
        if self.samples == 0 {
            return Err(Error::config("samples", "must be positive"));
        }
        if self.classes < 2 || self.classes > 256 {
            return Err(Error::config(
                "classes",
                format!("{} not in 2..=256", self.classes),
            ));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("scales", "need one or more positive scales"));
        }
        if self.widths.contains(&0) {
            return Err(Error::config("widths", "widths must be positive"));
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it back gives an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("profile", self.profile.to_string());
        put("variant", self.variant.to_string());
        put("precision", self.precision.to_string());
        put("seed", self.seed.to_string());
        put("data_seed", self.data_seed.to_string());
        put("classes", self.classes.to_string());
        put("samples", self.samples.to_string());
        put("epochs", self.epochs.to_string());
        put("decay_epoch", self.decay_epoch.to_string());
        put("batch", self.batch.to_string());
        put("d_steps", self.d_steps.to_string());
        put("lr", self.lr.to_string());
        put("beta1", self.beta1.to_string());
        put("beta2", self.beta2.to_string());
        put("adam_eps", self.adam_eps.to_string());
        put("weight_decay", self.weight_decay.to_string());
        put("weight.low_ce", self.weights.low_ce.to_string());
        put("weight.micro_adv", self.weights.micro_adv.to_string());
        put("weight.high_ce", self.weights.high_ce.to_string());
        put("weight.mix_adv", self.weights.mix_adv.to_string());
        put("augment", self.augment.to_string());
        put("low_res_rule", rule_name(self.low_res_rule).to_string());
        put("scales", join(&self.scales));
        put("widths", join(&self.widths));
        put("dropout", self.dropout.to_string());
        put("init_std", self.init_std.to_string());
        s
    }

    /// Applies `key = value` overrides on top of `self`.
    pub fn apply_map(mut self, map: &BTreeMap<String, String>) -> Result<Self> {
        for (k, v) in map {
            let f = k.as_str();
            match f {
                "profile" => self.profile = v.parse()?,
                "variant" => self.variant = v.parse()?,
                "precision" => self.precision = v.parse()?,
                "seed" => self.seed = parse_value(f, v)?,
                "data_seed" => self.data_seed = parse_value(f, v)?,
                "classes" => self.classes = parse_value(f, v)?,
                "samples" => self.samples = parse_value(f, v)?,
                "epochs" => self.epochs = parse_value(f, v)?,
                "decay_epoch" => self.decay_epoch = parse_value(f, v)?,
                "batch" => self.batch = parse_value(f, v)?,
                "d_steps" => self.d_steps = parse_value(f, v)?,
                "lr" => self.lr = parse_value(f, v)?,
                "beta1" => self.beta1 = parse_value(f, v)?,
                "beta2" => self.beta2 = parse_value(f, v)?,
                "adam_eps" => self.adam_eps = parse_value(f, v)?,
                "weight_decay" => self.weight_decay = parse_value(f, v)?,
                "weight.low_ce" => self.weights.low_ce = parse_value(f, v)?,
                "weight.micro_adv" => self.weights.micro_adv = parse_value(f, v)?,
                "weight.high_ce" => self.weights.high_ce = parse_value(f, v)?,
                "weight.mix_adv" => self.weights.mix_adv = parse_value(f, v)?,
                "augment" => self.augment = parse_value(f, v)?,
                "low_res_rule" => {
                    self.low_res_rule = match v.as_str() {
                        "majority" => DownsampleRule::Majority,
                        "nearest" => DownsampleRule::Nearest,
                        _ => return Err(Error::config(f, format!("unknown rule `{v}`"))),
                    }
                }
                "scales" => self.scales = split(f, v)?,
                "widths" => {
                    let w: Vec<usize> = split(f, v)?;
                    self.widths = w
                        .try_into()
                        .map_err(|_| Error::config(f, "expected four comma-separated widths"))?;
                }
                "dropout" => self.dropout = parse_value(f, v)?,
                "init_std" => self.init_std = parse_value(f, v)?,
                _ => return Err(Error::config(f, "unknown field")),
            }
        }
        Ok(self)
    }

    /// Parses a config file. `profile` picks the defaults the other keys
    /// override.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(&parse_map(text)?)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let profile = match map.get("profile") {
            Some(p) => p.parse()?,
            None => Profile::Desk,
        };
        let config = Self::new(profile).apply_map(map)?;
        config.validate()?;
        Ok(config)
    }

    /// The synthetic training set named by `data_seed` and `samples`.
    pub fn training_set(&self) -> Result<Vec<Sample>> {
        synth_set(self.data_seed, self.samples, self.profile.extent())
    }

    /// `count` synthetic figures drawn independently of the training set.
    pub fn held_out_set(&self, count: usize) -> Result<Vec<Sample>> {
        synth_set(self.data_seed ^ HELD_OUT_SALT, count, self.profile.extent())
    }

    /// SHA-256 of the canonical text.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        hex(&self.digest())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn join<V: fmt::Display>(v: &[V]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn split<V: FromStr>(field: &str, v: &str) -> Result<Vec<V>> {
    v.split(',').map(|p| parse_value(field, p.trim())).collect()
}

/// Learning rate for `epoch`: the base rate, divided by 10 from
/// `decay_epoch` on.
pub fn lr_at(epoch: usize, config: &TrainConfig) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside 0..{}",
            config.epochs
        )));
    }
    Ok(if epoch < config.decay_epoch {
        config.lr
    } else {
        config.lr / 10.0
    })
}
