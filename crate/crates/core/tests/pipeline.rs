use mman_core::data::{
    corrupt_map, load_dataset, synth_set, write_dataset, Corruption, DownsampleRule,
};
use mman_core::metrics::{iou, ipr, Connectivity};
use mman_core::models::VariantKind;
use mman_core::training::{
    checkpoint, evaluate, segment, Precision, Profile, TrainConfig, Trainer,
};

fn small(variant: VariantKind) -> TrainConfig {
    let mut c = TrainConfig::new(Profile::Desk);
    c.variant = variant;
    c.samples = 3;
    c.epochs = 2;
    c.decay_epoch = 1;
    c.widths = [4, 8, 8, 8];
    c
}

#[test]
fn dataset_on_disk_trains_like_the_in_memory_set() {
    let config = small(VariantKind::Mman);
    let samples = config.training_set().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &samples).unwrap();
    let loaded = load_dataset(&manifest, config.classes).unwrap();
    for (a, b) in samples.iter().zip(&loaded) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.label, b.label);
    }

    let mut from_memory = Trainer::<f32>::new(config.clone()).unwrap();
    from_memory.run(&samples, None).unwrap();
    let mut from_disk = Trainer::<f32>::new(config).unwrap();
    from_disk.run(&loaded, None).unwrap();
    assert_eq!(from_memory.trace(), from_disk.trace());
}

#[test]
fn trained_generator_segments_and_reports() {
    let config = small(VariantKind::DoubleAn);
    let samples = config.training_set().unwrap();
    let mut trainer = Trainer::<f32>::new(config.clone()).unwrap();
    trainer.run(&samples, None).unwrap();
    assert!(trainer.is_finished());

    let gen = &trainer.models().generator;
    let (high, low) = segment(gen, &samples[0], &config.scales).unwrap();
    assert_eq!((high.height(), high.width()), (64, 64));
    assert_eq!((low.height(), low.width()), (4, 4));

    let report = evaluate(gen, &samples, &config.scales, DownsampleRule::Majority).unwrap();
    assert_eq!(report.images, samples.len());
    for v in [report.miou, report.low_res_miou, report.pixel_accuracy] {
        assert!((0.0..=1.0).contains(&v), "{report:?}");
    }
    assert!((0.0..=100.0).contains(&report.ipr));
}

#[test]
fn f32_checkpoint_survives_disk() {
    let mut config = small(VariantKind::MultipleAn);
    config.precision = Precision::F32;
    let samples = config.training_set().unwrap();
    let mut trainer = Trainer::<f32>::new(config).unwrap();
    trainer.run(&samples, Some(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/ckpt.bin");
    trainer.save(&path).unwrap();
    assert_eq!(checkpoint::stored_precision(&path).unwrap(), "f32");
    let back = Trainer::<f32>::load(&path).unwrap();
    assert_eq!(back.iteration(), 4);
    assert_eq!(checkpoint::to_bytes(&back), checkpoint::to_bytes(&trainer));
    assert!(Trainer::<f64>::load(&path).is_err());
}

#[test]
fn corruptions_move_the_metrics_they_target() {
    for sample in synth_set(9, 4, 64).unwrap() {
        let clean = &sample.label;
        assert_eq!(ipr(clean, Connectivity::Four).unwrap(), 0.0);

        let holed = corrupt_map(
            clean,
            Corruption::Holes {
                count: 30,
                radius: 1,
            },
            5,
        )
        .unwrap();
        assert!(ipr(&holed, Connectivity::Four).unwrap() > 0.0);
        assert!(iou(&holed, clean).unwrap().miou < 1.0);

        // a swap relabels whole regions: the arm pair keeps its pixels, IoU drops
        let swapped = corrupt_map(clean, Corruption::LimbSwap, 0).unwrap();
        let (before, after) = (clean.class_counts(), swapped.class_counts());
        assert_eq!(before[3] + before[4], after[3] + after[4]);
        assert!(ipr(&swapped, Connectivity::Four).unwrap() < ipr(&holed, Connectivity::Four).unwrap());
        assert!(iou(&swapped, clean).unwrap().miou < 1.0);
    }
}
