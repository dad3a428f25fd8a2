use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Union-find component count of `class` under 4-adjacency.
fn components(map: &LabelMap, class: u8) -> usize {
    let (h, w) = (map.height(), map.width());
    let mut parent: Vec<usize> = (0..h * w).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if map.get(y, x) != class {
                continue;
            }
            for (ny, nx) in [(y + 1, x), (y, x + 1)] {
                if ny < h && nx < w && map.get(ny, nx) == class {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, ny * w + nx));
                    parent[a] = b;
                }
            }
        }
    }
    let mut roots = std::collections::HashSet::new();
    for i in 0..h * w {
        if map.data()[i] == class {
            roots.insert(find(&mut parent, i));
        }
    }
    roots.len()
}

fn random_map(h: usize, w: usize, classes: usize, rng: &mut ChaCha8Rng) -> LabelMap {
    LabelMap::new(
        h,
        w,
        classes,
        (0..h * w)
            .map(|_| rng.random_range(0..classes) as u8)
            .collect(),
    )
    .unwrap()
}

fn isolated_count(map: &LabelMap) -> usize {
    let (h, w) = (map.height() as isize, map.width() as isize);
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            let c = map.get(y as usize, x as usize);
            let shared = [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|&(dy, dx)| {
                let (ny, nx) = (y + dy, x + dx);
                ny >= 0 && nx >= 0 && ny < h && nx < w && map.get(ny as usize, nx as usize) == c
            });
            n += usize::from(!shared);
        }
    }
    n
}

#[test]
fn synth_is_deterministic() {
    assert_eq!(synth_figure(11, 64).unwrap(), synth_figure(11, 64).unwrap());
    assert_ne!(
        synth_figure(11, 64).unwrap().image,
        synth_figure(12, 64).unwrap().image
    );
}

#[test]
fn synth_parts_are_present_and_four_connected() {
    for seed in 0..40 {
        let s = synth_figure(seed, 64).unwrap();
        for class in 1..FIGURE_CLASSES as u8 {
            assert_eq!(components(&s.label, class), 1, "seed {seed} class {class}");
        }
        let bg = s.label.class_counts()[0] as f64 / s.label.len() as f64;
        assert!(bg > 0.0 && bg < 1.0);
    }
}

#[test]
fn synth_rejects_small_canvas_and_degenerate_pose() {
    assert!(synth_figure(0, 16).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut spec = FigureSpec::random(&mut rng, 64);
    spec.arms[0].lower_len = 0.0;
    assert!(render(&spec, 64, &mut rng).is_err());
}

#[test]
fn low_res_target_rules() {
    let c = LabelMap::filled(32, 32, 4, 3).unwrap();
    assert_eq!(
        low_res_target(&c, 16, DownsampleRule::Majority).unwrap(),
        LabelMap::filled(2, 2, 4, 3).unwrap()
    );

    let mut one = LabelMap::filled(16, 16, 7, 0).unwrap();
    one.set(5, 5, 4);
    assert_eq!(
        low_res_target(&one, 16, DownsampleRule::Majority)
            .unwrap()
            .data(),
        &[0]
    );

    let tie = LabelMap::new(
        16,
        16,
        7,
        (0..256).map(|i| if i < 128 { 5 } else { 2 }).collect(),
    )
    .unwrap();
    assert_eq!(
        low_res_target(&tie, 16, DownsampleRule::Majority)
            .unwrap()
            .data(),
        &[2]
    );

    assert!(low_res_target(&c, 5, DownsampleRule::Majority).is_err());
    assert_eq!(
        low_res_target(&tie, 16, DownsampleRule::Nearest)
            .unwrap()
            .data(),
        &[2]
    );
}

#[test]
fn low_res_of_nearest_upsample_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let small = random_map(3, 4, 5, &mut rng);
    let big = LabelMap::new(
        48,
        64,
        5,
        (0..48 * 64)
            .map(|i| small.get(i / 64 / 16, i % 64 / 16))
            .collect(),
    )
    .unwrap();
    assert_eq!(
        low_res_target(&big, 16, DownsampleRule::Majority).unwrap(),
        small
    );
}

#[test]
fn one_hot_and_argmax_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_map(5, 6, 4, &mut rng);
    let t = m.one_hot::<f64>();
    assert_eq!(t.shape(), &[1, 4, 5, 6]);
    assert_eq!(t.sum(), 30.0);
    assert_eq!(LabelMap::from_probs(&t).unwrap(), m);
}

#[test]
fn holes_with_zero_count_is_identity() {
    let s = synth_figure(3, 64).unwrap();
    let out = corrupt_map(
        &s.label,
        Corruption::Holes {
            count: 0,
            radius: 3,
        },
        9,
    )
    .unwrap();
    assert_eq!(out, s.label);
    assert!(corrupt_map(
        &s.label,
        Corruption::Holes {
            count: 1,
            radius: 65
        },
        9
    )
    .is_err());
}

#[test]
fn holes_increase_isolated_pixels() {
    for seed in 0..20 {
        let s = synth_figure(seed, 64).unwrap();
        let out = corrupt_map(
            &s.label,
            Corruption::Holes {
                count: 5,
                radius: 1,
            },
            seed,
        )
        .unwrap();
        assert!(
            isolated_count(&out) > isolated_count(&s.label),
            "seed {seed}"
        );
    }
}

#[test]
fn limb_swap_conserves_pair_total() {
    for seed in 0..10 {
        let s = synth_figure(seed, 64).unwrap();
        let out = corrupt_map(&s.label, Corruption::LimbSwap, 0).unwrap();
        let (a, b) = (s.label.class_counts(), out.class_counts());
        assert_eq!(a[3] + a[4], b[3] + b[4]);
        for c in [0, 1, 2, 5, 6] {
            assert_eq!(a[c], b[c]);
        }
        assert_ne!(out, s.label);
    }
}

#[test]
fn flip_twice_is_identity() {
    let s = synth_figure(4, 64).unwrap();
    let once = flip_sample(&s, &FlipSwap::figure()).unwrap();
    assert_ne!(once, s);
    assert_eq!(flip_sample(&once, &FlipSwap::figure()).unwrap(), s);
}

#[test]
fn flip_swaps_sides() {
    let s = synth_figure(5, 64).unwrap();
    let f = flip_sample(&s, &FlipSwap::figure()).unwrap();
    let (a, b) = (s.label.class_counts(), f.label.class_counts());
    assert_eq!((a[3], a[4], a[5], a[6]), (b[4], b[3], b[6], b[5]));
    assert_eq!(
        s.label.get(10, 3),
        FlipSwap::figure().apply(f.label.get(10, 60))
    );
}

#[test]
fn flip_table_validation() {
    assert!(FlipSwap::from_pairs(4, &[(1, 2), (2, 3)]).is_err());
    assert!(FlipSwap::from_pairs(4, &[(1, 4)]).is_err());
    let t = FlipSwap::parse(20, DEFAULT_FLIP).unwrap();
    assert_eq!((t.apply(14), t.apply(19), t.apply(0)), (15, 18, 0));
}

#[test]
fn augment_extents_and_one_hot() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = synth_figure(6, 64).unwrap();
    let a = augment(&s, &AugmentConfig::desk(), &mut rng).unwrap();
    assert_eq!(
        (a.image.width(), a.label.width(), a.label.height()),
        (64, 64, 64)
    );
    let t = a.label.one_hot::<f64>();
    for p in 0..64 * 64 {
        let sum: f64 = (0..7).map(|c| t.data()[c * 4096 + p]).sum();
        assert_eq!(sum, 1.0);
    }

    let full = synth_figure(6, 256).unwrap();
    let a = augment(&full, &AugmentConfig::full(FlipSwap::figure()), &mut rng).unwrap();
    assert_eq!((a.image.width(), a.image.height()), (256, 256));

    let bad = AugmentConfig {
        crop: 80,
        ..AugmentConfig::desk()
    };
    assert!(augment(&s, &bad, &mut rng).is_err());
}

#[test]
fn augment_is_deterministic() {
    let s = synth_figure(7, 64).unwrap();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        (0..4)
            .map(|_| augment(&s, &AugmentConfig::desk(), &mut rng).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn label_png_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.png");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_map(9, 13, 7, &mut rng);
    save_label_image(&m, &path).unwrap();
    assert_eq!(load_label_image(&path, 7).unwrap(), m);

    let mut raw = vec![0u8; 12];
    raw[6] = 7;
    image::GrayImage::from_raw(4, 3, raw)
        .unwrap()
        .save(&path)
        .unwrap();
    match load_label_image(&path, 7) {
        Err(crate::Error::ClassOutOfRange { x, y, value, .. }) => {
            assert_eq!((x, y, value), (2, 1, 7))
        }
        other => panic!("expected a range error, got {other:?}"),
    }

    image::GrayImage::new(5, 5).save(&path).unwrap();
    assert_eq!(
        load_label_image(&path, 3).unwrap(),
        LabelMap::filled(5, 5, 3, 0).unwrap()
    );
}

#[test]
fn taxonomy_merge() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = random_map(8, 8, 5, &mut rng);
    assert_eq!(merge_taxonomy(&m, &TaxonomyMap::identity(5)).unwrap(), m);

    let t = TaxonomyMap::new(vec![0, 1, 1, 2, 3]).unwrap();
    let merged = merge_taxonomy(&m, &t).unwrap();
    let (a, b) = (m.class_counts(), merged.class_counts());
    assert_eq!(b, vec![a[0], a[1] + a[2], a[3], a[4]]);

    assert!(TaxonomyMap::new(vec![0, 2]).is_err());
    assert!(TaxonomyMap::parse("0=0\n2=1").is_err());
    assert!(TaxonomyMap::parse("0=0\n0=1").is_err());
}

#[test]
fn default_merge_table() {
    let t = TaxonomyMap::default_merge();
    assert_eq!((t.sources(), t.targets()), (20, 8));
    assert_eq!(t.map(0), 0);
    assert_eq!((t.map(14), t.map(15)), (4, 4));
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<Sample> = (0..3).map(|s| synth_figure(s, 64).unwrap()).collect();
    let manifest = write_dataset(dir.path(), &samples).unwrap();
    let back = load_dataset(&manifest, FIGURE_CLASSES).unwrap();
    for (a, b) in samples.iter().zip(&back) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.label, b.label);
    }
}

#[test]
fn image_tensor_subtracts_mean() {
    let img = image::RgbImage::from_pixel(2, 2, image::Rgb([255, 0, 128]));
    let t = image_tensor::<f64>(&img, MEAN_PIXEL);
    assert_eq!(t.shape(), &[1, 3, 2, 2]);
    assert_eq!(t.at4(0, 0, 1, 1), 0.5);
    assert_eq!(t.at4(0, 1, 0, 0), -0.5);
    assert!((t.at4(0, 2, 0, 1) - (128.0 / 255.0 - 0.5)).abs() < 1e-15);
}
