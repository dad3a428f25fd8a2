//! Pixel-wise cross-entropy, the adversarial objective, and their weighted
//! combinations for the generator and discriminator phases.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Real, Var};

/// Probabilities are clamped to this floor before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Weights of the combined objective. The macro adversarial term always has
/// weight 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Cross-entropy on the 1/16 output.
    pub low_ce: f64,
    /// Micro adversarial term.
    pub micro_adv: f64,
    /// Cross-entropy on the full-resolution output.
    pub high_ce: f64,
    /// Adversarial weight of the single-discriminator mixed loss.
    pub mix_adv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            low_ce: 25.0,
            micro_adv: 1.0,
            high_ce: 100.0,
            mix_adv: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("low_ce", self.low_ce),
            ("micro_adv", self.micro_adv),
            ("high_ce", self.high_ce),
            ("mix_adv", self.mix_adv),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(
                    field,
                    format!("weight must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Which player an adversarial loss is minimized by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Discriminator,
    Generator,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Discriminator => "discriminator",
            Side::Generator => "generator",
        })
    }
}

fn check_score(name: &str, s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} = {s} is outside (0, 1)"
        )))
    }
}

/// `ln d_real + ln(1 − d_fake)`, the quantity the discriminator maximizes.
pub fn adversarial_objective(d_real: f64, d_fake: f64) -> Result<f64> {
    check_score("d_real", d_real)?;
    check_score("d_fake", d_fake)?;
    Ok(d_real.ln() + (1.0 - d_fake).ln())
}

/// Scalar adversarial loss. The discriminator minimizes the negated
/// objective; the generator minimizes `−ln d_fake`.
pub fn adver_loss(d_real: f64, d_fake: f64, side: Side) -> Result<f64> {
    match side {
        Side::Discriminator => Ok(-adversarial_objective(d_real, d_fake)?),
        Side::Generator => {
            check_score("d_real", d_real)?;
            check_score("d_fake", d_fake)?;
            Ok(-d_fake.ln())
        }
    }
}

/// Mean over pixels of `−Σ_c target·ln(pred)`. Both `N×C×H×W`.
pub fn mce_loss<T: Real>(g: &mut Graph<T>, pred: Var, target: Var) -> Result<Var> {
    let (n, _, h, w) = g.value(pred).dims4()?;
    if g.value(pred).shape() != g.value(target).shape() {
        return Err(Error::shape(
            "mce_loss",
            format!(
                "prediction {:?} vs target {:?}",
                g.value(pred).shape(),
                g.value(target).shape()
            ),
        ));
    }
    let pixels = n * h * w;
    if pixels == 0 {
        return Err(Error::shape("mce_loss", "empty label map"));
    }
    let logp = g.ln_clamped(pred, PROB_FLOOR)?;
    let picked = g.mul(target, logp)?;
    let total = g.sum(picked)?;
    g.scale(total, -1.0 / pixels as f64)
}

/// Discriminator outputs for one real and one fake pair.
#[derive(Clone, Copy, Debug)]
pub struct DiscScores {
    /// Needed on the discriminator side only.
    pub real: Option<Var>,
    pub fake: Var,
}

/// Graph form of [`adver_loss`].
pub fn adver_loss_graph<T: Real>(g: &mut Graph<T>, scores: DiscScores, side: Side) -> Result<Var> {
    match side {
        Side::Discriminator => {
            let real = scores.real.ok_or_else(|| {
                Error::InvalidArgument("discriminator loss needs a real score".into())
            })?;
            let ln_real = g.ln_clamped(real, PROB_FLOOR)?;
            let not_fake = g.affine(scores.fake, -1.0, 1.0)?;
            let ln_not_fake = g.ln_clamped(not_fake, PROB_FLOOR)?;
            let objective = g.add(ln_real, ln_not_fake)?;
            g.scale(objective, -1.0)
        }
        Side::Generator => {
            let ln_fake = g.ln_clamped(scores.fake, PROB_FLOOR)?;
            g.scale(ln_fake, -1.0)
        }
    }
}

pub(crate) fn weighted_sum<T: Real>(g: &mut Graph<T>, terms: &[(f64, Var)]) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for &(w, v) in terms {
        let t = g.scale(v, w)?;
        acc = Some(match acc {
            Some(a) => g.add(a, t)?,
            None => t,
        });
    }
    acc.ok_or_else(|| Error::InvalidArgument("empty loss".into()))
}

/// `L_mce + λ·L_adv` for a single discriminator.
pub fn mix_loss<T: Real>(
    g: &mut Graph<T>,
    pred: Var,
    target: Var,
    scores: DiscScores,
    side: Side,
    lambda: f64,
) -> Result<Var> {
    let ce = mce_loss(g, pred, target)?;
    let adv = adver_loss_graph(g, scores, side)?;
    weighted_sum(g, &[(1.0, ce), (lambda, adv)])
}

/// Inputs of the combined macro/micro objective.
#[derive(Clone, Copy, Debug)]
pub struct MmanInputs {
    pub low_pred: Var,
    pub high_pred: Var,
    pub low_target: Var,
    pub high_target: Var,
    pub macro_scores: DiscScores,
    pub micro_scores: DiscScores,
}

/// The total and each unweighted component, as graph nodes.
#[derive(Clone, Copy, Debug)]
pub struct MmanLoss {
    pub total: Var,
    pub macro_adv: Var,
    pub low_ce: Var,
    pub micro_adv: Var,
    pub high_ce: Var,
}

/// Component values of one evaluation, for tracing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub macro_adv: f64,
    pub low_ce: f64,
    pub micro_adv: f64,
    pub high_ce: f64,
}

impl MmanLoss {
    pub fn breakdown<T: Real>(&self, g: &Graph<T>) -> LossBreakdown {
        let v = |x: Var| g.value(x).item().as_f64();
        LossBreakdown {
            total: v(self.total),
            macro_adv: v(self.macro_adv),
            low_ce: v(self.low_ce),
            micro_adv: v(self.micro_adv),
            high_ce: v(self.high_ce),
        }
    }
}

/// `L_adv(macro) + w_low·L_mce(low) + w_micro·L_adv(micro) + w_high·L_mce(high)`,
/// with the adversarial terms taken from `side`.
pub fn mman_loss<T: Real>(
    g: &mut Graph<T>,
    inputs: MmanInputs,
    weights: &LossWeights,
    side: Side,
) -> Result<MmanLoss> {
    let macro_adv = adver_loss_graph(g, inputs.macro_scores, side)?;
    let low_ce = mce_loss(g, inputs.low_pred, inputs.low_target)?;
    let micro_adv = adver_loss_graph(g, inputs.micro_scores, side)?;
    let high_ce = mce_loss(g, inputs.high_pred, inputs.high_target)?;
    let total = weighted_sum(
        g,
        &[
            (1.0, macro_adv),
            (weights.low_ce, low_ce),
            (weights.micro_adv, micro_adv),
            (weights.high_ce, high_ce),
        ],
    )?;
    Ok(MmanLoss {
        total,
        macro_adv,
        low_ce,
        micro_adv,
        high_ce,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::gradcheck;
    use crate::tensor::Tensor;

    fn one_hot(classes: &[usize], c: usize, h: usize, w: usize) -> Tensor<f64> {
        let mut t = Tensor::zeros(&[1, c, h, w]);
        for (p, &k) in classes.iter().enumerate() {
            t.data_mut()[k * h * w + p] = 1.0;
        }
        t
    }

    fn random_dist(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let mut t = Tensor::from_fn(&[1, c, h, w], |_| rng.random_range(0.05..1.0));
        for p in 0..h * w {
            let s: f64 = (0..c).map(|k| t.data()[k * h * w + p]).sum();
            for k in 0..c {
                t.data_mut()[k * h * w + p] /= s;
            }
        }
        t
    }

    fn ce_value(pred: &Tensor<f64>, target: &Tensor<f64>) -> f64 {
        let mut g = Graph::new();
        let p = g.constant(pred.clone());
        let t = g.constant(target.clone());
        let l = mce_loss(&mut g, p, t).unwrap();
        g.value(l).item()
    }

    #[test]
    fn ce_of_exact_prediction_is_zero() {
        let y = one_hot(&[0, 2, 1, 1], 3, 2, 2);
        assert!(ce_value(&y, &y).abs() < 1e-9);
    }

    #[test]
    fn ce_of_uniform_binary_prediction_is_ln2() {
        let y = one_hot(&[0, 1, 1, 0, 0, 1], 2, 2, 3);
        let pred = Tensor::full(&[1, 2, 2, 3], 0.5);
        assert!((ce_value(&pred, &y) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn ce_single_pixel() {
        let y = one_hot(&[0], 3, 1, 1);
        let pred = Tensor::new(&[1, 3, 1, 1], vec![0.7, 0.2, 0.1]).unwrap();
        assert!((ce_value(&pred, &y) - 0.356_674_943_938_732_4).abs() < 1e-12);
    }

    #[test]
    fn ce_rejects_shape_mismatch() {
        let mut g = Graph::<f64>::new();
        let p = g.constant(Tensor::zeros(&[1, 3, 2, 2]));
        let t = g.constant(Tensor::zeros(&[1, 2, 2, 2]));
        assert!(mce_loss(&mut g, p, t).is_err());
    }

    #[test]
    fn adversarial_values() {
        assert!((adversarial_objective(0.5, 0.5).unwrap() + 1.386_294_361_119_890_6).abs() < 1e-12);
        assert!(
            (adver_loss(0.5, 0.5, Side::Discriminator).unwrap() - 1.386_294_361_119_890_6).abs()
                < 1e-12
        );
        // ln 0.8 + ln 0.7
        assert!((adversarial_objective(0.8, 0.3).unwrap() + 0.579_818_495_252_942).abs() < 1e-12);
        assert!(adver_loss(0.5, 1.0 - 1e-12, Side::Generator).unwrap() < 1e-11);
        assert!(adver_loss(1.0, 0.5, Side::Discriminator).is_err());
        assert!(adver_loss(0.5, 0.0, Side::Generator).is_err());
    }

    #[test]
    fn discriminator_loss_is_monotone_on_a_grid() {
        let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        for &f in &grid {
            for w in grid.windows(2) {
                let a = adver_loss(w[0], f, Side::Discriminator).unwrap();
                let b = adver_loss(w[1], f, Side::Discriminator).unwrap();
                assert!(b < a);
                let a = adver_loss(f, w[0], Side::Discriminator).unwrap();
                let b = adver_loss(f, w[1], Side::Discriminator).unwrap();
                assert!(b > a);
            }
        }
    }

    #[test]
    fn graph_adversarial_matches_scalar_form() {
        let mut g = Graph::<f64>::new();
        let real = g.constant(Tensor::scalar(0.8));
        let fake = g.constant(Tensor::scalar(0.3));
        let d = adver_loss_graph(
            &mut g,
            DiscScores {
                real: Some(real),
                fake,
            },
            Side::Discriminator,
        )
        .unwrap();
        let gen =
            adver_loss_graph(&mut g, DiscScores { real: None, fake }, Side::Generator).unwrap();
        assert!(
            (g.value(d).item() - adver_loss(0.8, 0.3, Side::Discriminator).unwrap()).abs() < 1e-15
        );
        assert!((g.value(gen).item() + 0.3f64.ln()).abs() < 1e-15);
        assert!(
            adver_loss_graph(&mut g, DiscScores { real: None, fake }, Side::Discriminator).is_err()
        );
    }

    fn mix_value(lambda: f64, pred: &Tensor<f64>, y: &Tensor<f64>, real: f64, fake: f64) -> f64 {
        let mut g = Graph::new();
        let p = g.constant(pred.clone());
        let t = g.constant(y.clone());
        let r = g.constant(Tensor::scalar(real));
        let f = g.constant(Tensor::scalar(fake));
        let l = mix_loss(
            &mut g,
            p,
            t,
            DiscScores {
                real: Some(r),
                fake: f,
            },
            Side::Discriminator,
            lambda,
        )
        .unwrap();
        g.value(l).item()
    }

    #[test]
    fn mix_loss_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pred = random_dist(3, 3, 3, &mut rng);
        let y = one_hot(&[0, 1, 2, 0, 1, 2, 0, 1, 2], 3, 3, 3);
        let ce = ce_value(&pred, &y);
        assert_eq!(mix_value(0.0, &pred, &y, 0.6, 0.2), ce);
        assert!((mix_value(1.0, &y, &y, 0.5, 0.5) - 1.386_294_361_119_890_6).abs() < 1e-9);
        let adv1 = mix_value(1.0, &pred, &y, 0.6, 0.2) - ce;
        let adv2 = mix_value(2.0, &pred, &y, 0.6, 0.2) - ce;
        assert!((adv2 - 2.0 * adv1).abs() < 1e-12);
    }

    struct Instance {
        low: Tensor<f64>,
        high: Tensor<f64>,
        y_low: Tensor<f64>,
        y: Tensor<f64>,
        scores: [f64; 4],
    }

    fn instance(rng: &mut ChaCha8Rng) -> Instance {
        let c = 4;
        let low_classes: Vec<usize> = (0..4).map(|_| rng.random_range(0..c)).collect();
        let high_classes: Vec<usize> = (0..64).map(|_| rng.random_range(0..c)).collect();
        Instance {
            low: random_dist(c, 2, 2, rng),
            high: random_dist(c, 8, 8, rng),
            y_low: one_hot(&low_classes, c, 2, 2),
            y: one_hot(&high_classes, c, 8, 8),
            scores: [0.0; 4].map(|_| rng.random_range(0.05..0.95)),
        }
    }

    fn eval_mman(inst: &Instance, weights: &LossWeights, side: Side) -> LossBreakdown {
        let mut g = Graph::new();
        let low_pred = g.constant(inst.low.clone());
        let high_pred = g.constant(inst.high.clone());
        let low_target = g.constant(inst.y_low.clone());
        let high_target = g.constant(inst.y.clone());
        let s: Vec<Var> = inst
            .scores
            .iter()
            .map(|&v| g.constant(Tensor::scalar(v)))
            .collect();
        let inputs = MmanInputs {
            low_pred,
            high_pred,
            low_target,
            high_target,
            macro_scores: DiscScores {
                real: Some(s[0]),
                fake: s[1],
            },
            micro_scores: DiscScores {
                real: Some(s[2]),
                fake: s[3],
            },
        };
        mman_loss(&mut g, inputs, weights, side)
            .unwrap()
            .breakdown(&g)
    }

    #[test]
    fn mman_loss_equals_independent_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = LossWeights::default();
        for _ in 0..10 {
            let inst = instance(&mut rng);
            for side in [Side::Discriminator, Side::Generator] {
                let b = eval_mman(&inst, &w, side);
                let hand = adver_loss(inst.scores[0], inst.scores[1], side).unwrap()
                    + 25.0 * ce_value(&inst.low, &inst.y_low)
                    + adver_loss(inst.scores[2], inst.scores[3], side).unwrap()
                    + 100.0 * ce_value(&inst.high, &inst.y);
                assert!((b.total - hand).abs() < 1e-9, "{} vs {hand}", b.total);
            }
        }
    }

    #[test]
    fn mman_loss_degenerate_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = instance(&mut rng);
        let zero = LossWeights {
            low_ce: 0.0,
            micro_adv: 0.0,
            high_ce: 0.0,
            mix_adv: 0.0,
        };
        let b = eval_mman(&inst, &zero, Side::Discriminator);
        assert!(
            (b.total - adver_loss(inst.scores[0], inst.scores[1], Side::Discriminator).unwrap())
                .abs()
                < 1e-12
        );

        let perfect = Instance {
            low: inst.y_low.clone(),
            high: inst.y.clone(),
            ..inst
        };
        let b = eval_mman(&perfect, &LossWeights::default(), Side::Discriminator);
        assert!((b.total - b.macro_adv - b.micro_adv).abs() < 1e-9);
    }

    #[test]
    fn mman_loss_is_affine_in_each_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = instance(&mut rng);
        let base = LossWeights::default();
        let at = |f: &dyn Fn(&mut LossWeights, f64), x: f64| {
            let mut w = base;
            f(&mut w, x);
            eval_mman(&inst, &w, Side::Generator).total
        };
        let setters: [&dyn Fn(&mut LossWeights, f64); 3] =
            [&|w, x| w.low_ce = x, &|w, x| w.micro_adv = x, &|w, x| {
                w.high_ce = x
            }];
        for set in setters {
            let (a, b, c) = (at(set, 0.0), at(set, 1.0), at(set, 3.0));
            assert!(((c - a) - 3.0 * (b - a)).abs() < 1e-9);
        }
    }

    #[test]
    fn ce_gradient_through_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let logits = Tensor::from_fn(&[1, 3, 3, 3], |_| rng.random_range(-2.0..2.0));
            let classes: Vec<usize> = (0..9).map(|_| rng.random_range(0..3)).collect();
            let y = one_hot(&classes, 3, 3, 3);
            let report = gradcheck::check("mce_loss", &[logits], |g, v| {
                let p = g.softmax_channels(v[0])?;
                let t = g.constant(y.clone());
                mce_loss(g, p, t)
            })
            .unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn adversarial_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let a = Tensor::from_fn(&[1], |_| rng.random_range(-2.0..2.0));
            let b = Tensor::from_fn(&[1], |_| rng.random_range(-2.0..2.0));
            for side in [Side::Discriminator, Side::Generator] {
                let report = gradcheck::check("adver_loss", &[a.clone(), b.clone()], |g, v| {
                    let real = g.sigmoid(v[0])?;
                    let fake = g.sigmoid(v[1])?;
                    adver_loss_graph(
                        g,
                        DiscScores {
                            real: Some(real),
                            fake,
                        },
                        side,
                    )
                })
                .unwrap();
                assert!(report.passed(), "{report:?}");
            }
        }
    }
}
