//! The dual-output generator, the two discriminator families, and the
//! assembly of the compared adversarial variants.

mod discriminator;
mod generator;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use discriminator::{
    macro_stack, micro_stack, DiscMode, DiscOutput, Discriminator, MICRO_DEPTH,
};
pub use generator::{
    DualOutputGenerator, GeneratorConfig, GeneratorOutput, LOW_RES_FACTOR, MID_RES_FACTOR,
};

use crate::error::{Error, Result};
use crate::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariantKind {
    /// Dual-output generator, cross-entropy only.
    Baseline,
    /// One global discriminator on the full-resolution map.
    SingleAn,
    /// Global and patch discriminators, both on the full-resolution map.
    DoubleAn,
    /// MMAN plus a patch discriminator after the third deconvolution.
    MultipleAn,
    /// Global discriminator on the 1/16 map, patch discriminator on the full map.
    Mman,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::Baseline,
        VariantKind::SingleAn,
        VariantKind::DoubleAn,
        VariantKind::MultipleAn,
        VariantKind::Mman,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Baseline => "baseline",
            VariantKind::SingleAn => "single_an",
            VariantKind::DoubleAn => "double_an",
            VariantKind::MultipleAn => "multiple_an",
            VariantKind::Mman => "mman",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("variant", format!("unknown variant `{s}`")))
    }
}

/// Which generator output a discriminator reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attachment {
    Low,
    Mid,
    High,
}

impl Attachment {
    /// Downsampling factor relative to the input image.
    pub fn factor(self) -> usize {
        match self {
            Attachment::Low => LOW_RES_FACTOR,
            Attachment::Mid => MID_RES_FACTOR,
            Attachment::High => 1,
        }
    }
}

/// Trace column group a discriminator reports into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceSlot {
    Macro,
    Micro,
    Mid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscAttachment {
    pub attach: Attachment,
    pub mode: DiscMode,
    pub slot: TraceSlot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantSpec {
    pub kind: VariantKind,
    pub attachments: Vec<DiscAttachment>,
}

impl VariantSpec {
    pub fn new(kind: VariantKind) -> Self {
        let d = |attach, mode, slot| DiscAttachment { attach, mode, slot };
        use Attachment::*;
        use DiscMode::{Macro as Global, Micro as Patch};
        let attachments = match kind {
            VariantKind::Baseline => vec![],
            VariantKind::SingleAn => vec![d(High, Global, TraceSlot::Macro)],
            VariantKind::DoubleAn => vec![
                d(High, Global, TraceSlot::Macro),
                d(High, Patch, TraceSlot::Micro),
            ],
            VariantKind::MultipleAn => vec![
                d(Low, Global, TraceSlot::Macro),
                d(High, Patch, TraceSlot::Micro),
                d(Mid, Patch, TraceSlot::Mid),
            ],
            VariantKind::Mman => vec![
                d(Low, Global, TraceSlot::Macro),
                d(High, Patch, TraceSlot::Micro),
            ],
        };
        Self { kind, attachments }
    }

    pub fn needs_mid_head(&self) -> bool {
        self.attachments.iter().any(|a| a.attach == Attachment::Mid)
    }
}

#[derive(Clone, Debug)]
pub struct AttachedDisc<T> {
    pub disc: Discriminator<T>,
    pub spec: DiscAttachment,
    /// Side length of the map this discriminator reads.
    pub extent: usize,
}

impl<T: Real> AttachedDisc<T> {
    /// Global FOV (whole map) for macro mode, patch FOV for micro mode.
    pub fn fov(&self) -> usize {
        match self.disc.mode() {
            DiscMode::Macro => self.extent,
            DiscMode::Micro => self.disc.receptive_field(),
        }
    }
}

/// Generator plus the discriminators a variant attaches to it.
#[derive(Clone, Debug)]
pub struct ModelSet<T> {
    pub variant: VariantSpec,
    pub input_extent: usize,
    pub generator: DualOutputGenerator<T>,
    pub discs: Vec<AttachedDisc<T>>,
}

impl<T: Real> ModelSet<T> {
    /// Architecture manifest of every network in the set.
    pub fn manifest(&self) -> String {
        let mut s = format!(
            "# variant {}\n# input {}\n",
            self.variant.kind, self.input_extent
        );
        s.push_str(&self.generator.manifest());
        for (i, d) in self.discs.iter().enumerate() {
            s.push_str(&format!(
                "# disc {i} attach={:?} mode={:?}\n",
                d.spec.attach, d.spec.mode
            ));
            s.push_str(&d.disc.stack().manifest());
        }
        s
    }

    pub fn disc(&self, slot: TraceSlot) -> Option<&AttachedDisc<T>> {
        self.discs.iter().find(|d| d.spec.slot == slot)
    }
}

/// Assembles a variant for square inputs of side `input_extent`.
pub fn build_variant<T: Real, R: Rng + ?Sized>(
    spec: &VariantSpec,
    gen_config: &GeneratorConfig,
    input_extent: usize,
    rng: &mut R,
) -> Result<ModelSet<T>> {
    if input_extent == 0 || !input_extent.is_multiple_of(LOW_RES_FACTOR) {
        return Err(Error::InvalidArgument(format!(
            "input extent {input_extent} is not divisible by {LOW_RES_FACTOR}"
        )));
    }
    let mut config = gen_config.clone();
    config.mid_head = spec.needs_mid_head();
    let generator = DualOutputGenerator::new(config, rng)?;
    let classes = generator.classes();
    let mut discs = Vec::new();
    for a in &spec.attachments {
        let extent = input_extent / a.attach.factor();
        let disc = match a.mode {
            DiscMode::Macro => Discriminator::new_macro(classes, extent, gen_config.init_std, rng)?,
            DiscMode::Micro => Discriminator::new_micro(classes, gen_config.init_std, rng)?,
        };
        discs.push(AttachedDisc {
            disc,
            spec: *a,
            extent,
        });
    }
    Ok(ModelSet {
        variant: spec.clone(),
        input_extent,
        generator,
        discs,
    })
}
