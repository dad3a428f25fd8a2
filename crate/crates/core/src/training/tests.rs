use super::*;
use crate::data::{synth_figure, Sample};
use crate::error::Error;
use crate::models::VariantKind;
use crate::nn::ParamStore;
use crate::tensor::Tensor;

fn hp(lr: f64, wd: f64) -> AdamParams {
    AdamParams {
        lr,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        weight_decay: wd,
    }
}

fn tiny(variant: VariantKind) -> TrainConfig {
    let mut c = TrainConfig::new(Profile::Desk);
    c.variant = variant;
    c.precision = Precision::F64;
    c.samples = 2;
    c.epochs = 2;
    c.decay_epoch = 1;
    c.widths = [4, 8, 8, 8];
    c.seed = 11;
    c
}

fn figures(n: usize) -> Vec<Sample> {
    (0..n as u64)
        .map(|s| synth_figure(100 + s, 64).unwrap())
        .collect()
}

fn values(store: &ParamStore<f64>) -> Vec<Vec<f64>> {
    store
        .params()
        .iter()
        .map(|p| p.value.data().to_vec())
        .collect()
}

#[test]
fn adam_first_step_moves_by_lr() {
    let mut theta = vec![0.5, -2.0, 3.0];
    let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
    adam_update(
        &mut theta,
        &[1.0; 3],
        &mut m,
        &mut v,
        1,
        &hp(2e-4, 0.0),
        false,
    )
    .unwrap();
    for (t, t0) in theta.iter().zip([0.5f64, -2.0, 3.0]) {
        assert!(((t0 - t) - 2e-4).abs() < 1e-9);
    }
}

#[test]
fn adam_matches_hand_rolled_recurrence() {
    let grads = [[0.3, -1.2], [0.1, 0.4], [-0.7, 0.0]];
    let mut theta = vec![1.0, -1.0];
    let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
    let (mut om, mut ov, mut ot) = ([0.0f64; 2], [0.0f64; 2], [1.0f64, -1.0]);
    for (k, g) in grads.iter().enumerate() {
        adam_update(
            &mut theta,
            g,
            &mut m,
            &mut v,
            k as u64 + 1,
            &hp(0.01, 0.1),
            true,
        )
        .unwrap();
        for i in 0..2 {
            let gi = g[i] + 0.1 * ot[i];
            om[i] = 0.9 * om[i] + 0.1 * gi;
            ov[i] = 0.999 * ov[i] + 0.001 * gi * gi;
            let mh = om[i] / (1.0 - 0.9f64.powi(k as i32 + 1));
            let vh = ov[i] / (1.0 - 0.999f64.powi(k as i32 + 1));
            ot[i] -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
    }
    for i in 0..2 {
        assert!((theta[i] - ot[i]).abs() < 1e-15);
    }
}

#[test]
fn adam_store_step_rules() {
    let mut store = ParamStore::<f64>::new();
    store.add("w", Tensor::full(&[2], 1.0), true);
    store.add("b", Tensor::full(&[2], 1.0), false);
    let mut state = AdamState::new(&store);
    // zero gradients: only the decayed tensor moves
    adam_step(&mut store, &mut state, &hp(1e-3, 1e-4)).unwrap();
    assert!(store.params()[0].value.data().iter().all(|&v| v < 1.0));
    assert_eq!(store.params()[1].value.data(), &[1.0, 1.0]);
    assert_eq!(state.step, 1);
    assert!(adam_step(&mut store, &mut state, &hp(0.0, 0.0)).is_err());
    let mut wrong = AdamState::new(&ParamStore::<f64>::new());
    assert!(matches!(
        adam_step(&mut store, &mut wrong, &hp(1e-3, 0.0)),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn adam_zero_gradient_without_decay_is_identity() {
    let mut theta = vec![0.25, 4.0];
    let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
    adam_update(
        &mut theta,
        &[0.0, 0.0],
        &mut m,
        &mut v,
        1,
        &hp(1e-3, 0.0),
        true,
    )
    .unwrap();
    assert_eq!(theta, vec![0.25, 4.0]);
}

#[test]
fn learning_rate_schedule() {
    let c = TrainConfig::new(Profile::Full);
    assert_eq!(lr_at(0, &c).unwrap(), 0.0002);
    assert_eq!(lr_at(14, &c).unwrap(), 0.0002);
    assert!((lr_at(15, &c).unwrap() - 0.00002).abs() < 1e-18);
    assert!(lr_at(30, &c).is_err());
    let long = TrainConfig::new(Profile::Full).long_schedule();
    assert_eq!(lr_at(24, &long).unwrap(), 0.0002);
    assert!(lr_at(25, &long).unwrap() < 0.0002);
    let jumps = (1..30)
        .filter(|&e| lr_at(e, &c).unwrap() != lr_at(e - 1, &c).unwrap())
        .count();
    assert_eq!(jumps, 1);
}

#[test]
fn config_text_round_trip_and_field_errors() {
    let mut c = tiny(VariantKind::MultipleAn);
    c.scales = vec![0.75, 1.0];
    c.weights.high_ce = 50.0;
    let back = TrainConfig::parse(&c.to_text()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.digest(), c.digest());
    assert_ne!(TrainConfig::new(Profile::Desk).digest(), c.digest());

    let field = |text: &str| match TrainConfig::parse(text) {
        Err(Error::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert_eq!(field("epochs = 10\ndecay_epoch = 10"), "decay_epoch");
    assert_eq!(field("lr = -1"), "lr");
    assert_eq!(field("variant = quad_an"), "variant");
    assert_eq!(field("learning_rate = 0.1"), "learning_rate");
    assert_eq!(field("widths = 1,2,3"), "widths");
}

#[test]
fn snapping_scales() {
    assert_eq!(snap_extent(256, 0.8), Some(208));
    assert_eq!(snap_extent(256, 1.2), Some(304));
    assert_eq!(snap_extent(64, 1.0), Some(64));
    assert_eq!(snap_extent(64, 0.1), None);
}

#[test]
fn area_downsample_means_blocks() {
    let t = Tensor::<f64>::from_fn(&[1, 1, 4, 4], |i| i as f64);
    let d = area_downsample(&t, 2).unwrap();
    assert_eq!(d.data(), &[2.5, 4.5, 10.5, 12.5]);
    assert!(area_downsample(&t, 3).is_err());
}

#[test]
fn epoch_order_is_a_seeded_permutation() {
    let a = epoch_order(3, 0, 20);
    let mut sorted = a.clone();
    sorted.sort();
    assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    assert_eq!(a, epoch_order(3, 0, 20));
    assert_ne!(a, epoch_order(3, 1, 20));
}

#[test]
fn single_scale_inference_equals_plain_forward() {
    let t = Trainer::<f64>::new(tiny(VariantKind::Baseline)).unwrap();
    let img = crate::data::image_tensor::<f64>(
        &synth_figure(1, 64).unwrap().image,
        crate::data::MEAN_PIXEL,
    );
    let plain = predict(&t.models().generator, &img).unwrap();
    let ms = multi_scale_infer(&t.models().generator, &img, &[1.0]).unwrap();
    assert!(ms.high.max_abs_diff(&plain.high) < 1e-12);
    assert!(ms.low.max_abs_diff(&plain.low) < 1e-12);
    let twice = multi_scale_infer(&t.models().generator, &img, &[1.0, 1.0]).unwrap();
    assert!(twice.high.max_abs_diff(&plain.high) < 1e-12);
}

#[test]
fn multi_scale_output_is_a_distribution() {
    let t = Trainer::<f64>::new(tiny(VariantKind::Baseline)).unwrap();
    let img = Tensor::<f64>::full(&[1, 3, 64, 64], 0.2);
    let ms = multi_scale_infer(&t.models().generator, &img, &[0.8, 1.0, 1.2]).unwrap();
    for maps in [&ms.high, &ms.low] {
        let (_, c, h, w) = maps.dims4().unwrap();
        for p in 0..h * w {
            let s: f64 = (0..c).map(|k| maps.data()[k * h * w + p]).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
    assert_eq!(ms.high.shape(), &[1, 7, 64, 64]);
    assert_eq!(ms.low.shape(), &[1, 7, 4, 4]);
    // 0.1 is skipped, 1.0 is kept
    assert!(multi_scale_infer(&t.models().generator, &img, &[0.1, 1.0]).is_ok());
    assert!(multi_scale_infer(&t.models().generator, &img, &[0.1]).is_err());
}

#[test]
fn phases_touch_only_their_own_parameters() {
    let data = figures(2);
    for kind in [VariantKind::Mman, VariantKind::MultipleAn] {
        let mut t = Trainer::<f64>::new(tiny(kind)).unwrap();
        let gen_before = values(t.models().generator.store());
        let prep = t.prepare(&data).unwrap();
        let phase = t.discriminator_phase(&prep).unwrap();
        assert_eq!(values(t.models().generator.store()), gen_before);
        assert_eq!(phase.scores.len(), t.models().discs.len());

        let discs_before: Vec<_> = t
            .models()
            .discs
            .iter()
            .map(|d| values(d.disc.store()))
            .collect();
        let row = t.generator_phase(prep, &phase).unwrap();
        let discs_after: Vec<_> = t
            .models()
            .discs
            .iter()
            .map(|d| values(d.disc.store()))
            .collect();
        assert_eq!(discs_after, discs_before);
        assert_ne!(values(t.models().generator.store()), gen_before);
        assert!(row.d_macro.is_some() && row.d_micro.is_some());
        assert_eq!(row.d_mid.is_some(), kind == VariantKind::MultipleAn);
    }
}

#[test]
fn discriminator_phase_updates_discriminators() {
    let data = figures(2);
    let mut t = Trainer::<f64>::new(tiny(VariantKind::SingleAn)).unwrap();
    let before = values(t.models().discs[0].disc.store());
    let prep = t.prepare(&data).unwrap();
    t.discriminator_phase(&prep).unwrap();
    assert_ne!(values(t.models().discs[0].disc.store()), before);
}

#[test]
fn fixed_seed_runs_give_identical_traces() {
    let data = figures(2);
    let run = || {
        let mut t = Trainer::<f64>::new(tiny(VariantKind::Mman)).unwrap();
        t.run(&data, Some(3)).unwrap();
        t
    };
    let (a, b) = (run(), run());
    assert_eq!(a.trace(), b.trace());
    assert_eq!(a.trace().len(), 3);
    assert_eq!(
        values(a.models().generator.store()),
        values(b.models().generator.store())
    );
}

#[test]
fn every_variant_trains_and_fills_its_columns() {
    let data = figures(2);
    for kind in VariantKind::ALL {
        let mut t = Trainer::<f64>::new(tiny(kind)).unwrap();
        let row = t.step(&data).unwrap();
        assert_eq!(row.loss_dis.is_some(), kind != VariantKind::Baseline);
        assert_eq!(row.adv_macro.is_some(), kind != VariantKind::Baseline);
        assert_eq!(
            row.adv_micro.is_some(),
            !matches!(kind, VariantKind::Baseline | VariantKind::SingleAn)
        );
        if kind == VariantKind::Baseline {
            let w = t.config().weights;
            assert!(
                (row.loss_gen - (w.low_ce * row.ce_low + w.high_ce * row.ce_high)).abs() < 1e-9
            );
        }
        if kind == VariantKind::Mman {
            let w = t.config().weights;
            let sum = row.adv_macro.unwrap()
                + w.low_ce * row.ce_low
                + w.micro_adv * row.adv_micro.unwrap()
                + w.high_ce * row.ce_high;
            assert!((row.loss_gen - sum).abs() < 1e-9);
        }
    }
}

#[test]
fn training_stops_at_the_configured_length() {
    let data = figures(2);
    let mut t = Trainer::<f64>::new(tiny(VariantKind::Baseline)).unwrap();
    t.run(&data, None).unwrap();
    assert_eq!(t.iteration(), 4);
    assert!(t.step(&data).is_err());
    assert!(Trainer::<f64>::new(tiny(VariantKind::Baseline))
        .unwrap()
        .step(&figures(3))
        .is_err());
}

#[test]
fn non_finite_values_abort_with_a_name() {
    let data = figures(2);
    let mut t = Trainer::<f64>::new(tiny(VariantKind::Baseline)).unwrap();
    t.models.generator.store_mut().params_mut()[0]
        .value
        .data_mut()[0] = f64::NAN;
    match t.step(&data) {
        Err(Error::NonFinite(what)) => assert!(
            what.contains("cross-entropy") || what.contains("gradient"),
            "{what}"
        ),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn precision_must_match_the_element_type() {
    assert!(Trainer::<f32>::new(tiny(VariantKind::Baseline)).is_err());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let data = figures(2);
    let mut t = Trainer::<f64>::new(tiny(VariantKind::Mman)).unwrap();
    t.run(&data, Some(2)).unwrap();
    let bytes = checkpoint::to_bytes(&t);
    let back = checkpoint::from_bytes::<f64>(&bytes).unwrap();
    assert_eq!(checkpoint::to_bytes(&back), bytes);
    assert_eq!(back.trace(), t.trace());
    assert_eq!(back.iteration(), 2);
    assert!(checkpoint::from_bytes::<f32>(&bytes).is_err());
}

#[test]
fn resumed_run_reproduces_the_uninterrupted_trace() {
    let data = figures(2);
    let mut whole = Trainer::<f64>::new(tiny(VariantKind::Mman)).unwrap();
    whole.run(&data, None).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt/run.bin");
    let mut first = Trainer::<f64>::new(tiny(VariantKind::Mman)).unwrap();
    first.run(&data, Some(3)).unwrap();
    first.save(&path).unwrap();
    drop(first);
    let mut resumed = Trainer::<f64>::load(&path).unwrap();
    resumed.run(&data, None).unwrap();
    assert_eq!(resumed.trace(), whole.trace());
    assert_eq!(checkpoint::to_bytes(&resumed), checkpoint::to_bytes(&whole));
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let t = Trainer::<f64>::new(tiny(VariantKind::SingleAn)).unwrap();
    let bytes = checkpoint::to_bytes(&t);
    for pos in [0, 9, bytes.len() / 2, bytes.len() - 1] {
        let mut b = bytes.clone();
        b[pos] ^= 0x40;
        assert!(
            matches!(checkpoint::from_bytes::<f64>(&b), Err(Error::Checkpoint(_))),
            "flip at {pos}"
        );
    }
    assert!(checkpoint::from_bytes::<f64>(&bytes[..bytes.len() - 5]).is_err());

    // a consistent file with a different version tag
    let mut b = bytes[..bytes.len() - 32].to_vec();
    b[8] = 9;
    let sum = <sha2::Sha256 as sha2::Digest>::digest(&b);
    b.extend_from_slice(&sum);
    match checkpoint::from_bytes::<f64>(&b) {
        Err(Error::Checkpoint(msg)) => assert!(msg.contains("version"), "{msg}"),
        other => panic!("expected a version error, got {:?}", other.map(|_| ())),
    }
}
