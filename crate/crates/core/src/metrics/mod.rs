//! Segmentation quality (IoU, isolated-pixel rate) and adversarial
//! convergence diagnostics.

mod trace;

use std::fmt::Write as _;

pub use trace::{
    classify_convergence, classify_pairs, ConvergenceTrace, TraceRow, Verdict, TRACE_COLUMNS,
};

use crate::data::LabelMap;
use crate::error::{Error, Result};

/// How classes absent from both maps enter the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AbsentClass {
    #[default]
    Exclude,
    CountAsOne,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IouReport {
    /// `None` where the class is in neither map.
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
}

/// Per-class intersection and union counts, summable over a dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IouCounts {
    pub intersection: Vec<u64>,
    pub union: Vec<u64>,
}

impl IouCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            intersection: vec![0; classes],
            union: vec![0; classes],
        }
    }

    pub fn add(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        check_pair(pred, gt)?;
        if pred.classes() != self.intersection.len() {
            return Err(Error::InvalidArgument(format!(
                "{} classes, accumulator has {}",
                pred.classes(),
                self.intersection.len()
            )));
        }
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if p == g {
                self.intersection[p as usize] += 1;
                self.union[p as usize] += 1;
            } else {
                self.union[p as usize] += 1;
                self.union[g as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn report(&self, absent: AbsentClass) -> IouReport {
        let per_class: Vec<Option<f64>> = self
            .intersection
            .iter()
            .zip(&self.union)
            .map(|(&i, &u)| (u > 0).then(|| i as f64 / u as f64))
            .collect();
        let values: Vec<f64> = per_class
            .iter()
            .filter_map(|v| match (v, absent) {
                (Some(v), _) => Some(*v),
                (None, AbsentClass::CountAsOne) => Some(1.0),
                (None, AbsentClass::Exclude) => None,
            })
            .collect();
        let miou = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        IouReport { per_class, miou }
    }
}

fn check_pair(pred: &LabelMap, gt: &LabelMap) -> Result<()> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(Error::shape(
            "iou",
            format!(
                "prediction {}×{} vs ground truth {}×{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            ),
        ));
    }
    if pred.classes() != gt.classes() {
        return Err(Error::InvalidArgument(format!(
            "prediction has {} classes, ground truth {}",
            pred.classes(),
            gt.classes()
        )));
    }
    Ok(())
}

/// Per-class IoU and their mean over classes present in either map.
pub fn iou(pred: &LabelMap, gt: &LabelMap) -> Result<IouReport> {
    iou_with(pred, gt, AbsentClass::Exclude)
}

pub fn iou_with(pred: &LabelMap, gt: &LabelMap, absent: AbsentClass) -> Result<IouReport> {
    let mut counts = IouCounts::new(pred.classes());
    counts.add(pred, gt)?;
    Ok(counts.report(absent))
}

/// mIoU of two maps already at the 1/16 extent.
pub fn low_res_miou(pred_low: &LabelMap, gt_low: &LabelMap) -> Result<f64> {
    Ok(iou(pred_low, gt_low)?.miou)
}

pub fn pixel_accuracy(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    check_pair(pred, gt)?;
    let hits = pred
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / pred.len().max(1) as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Pixels with no same-label neighbor under `conn`.
pub fn isolated_pixels(map: &LabelMap, conn: Connectivity) -> usize {
    const FOUR: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const EIGHT: [(isize, isize); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    let offsets: &[(isize, isize)] = match conn {
        Connectivity::Four => &FOUR,
        Connectivity::Eight => &EIGHT,
    };
    let (h, w) = (map.height() as isize, map.width() as isize);
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            let c = map.get(y as usize, x as usize);
            let alone = offsets.iter().all(|&(dy, dx)| {
                let (ny, nx) = (y + dy, x + dx);
                ny < 0 || nx < 0 || ny >= h || nx >= w || map.get(ny as usize, nx as usize) != c
            });
            count += usize::from(alone);
        }
    }
    count
}

/// Isolated-pixel rate in percent.
pub fn ipr(map: &LabelMap, conn: Connectivity) -> Result<f64> {
    if map.is_empty() {
        return Err(Error::InvalidArgument(
            "isolated-pixel rate of an empty map".into(),
        ));
    }
    Ok(100.0 * isolated_pixels(map, conn) as f64 / map.len() as f64)
}

/// Evaluation summary over one or more images.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub low_res_miou: f64,
    /// Percent.
    pub ipr: f64,
    pub pixel_accuracy: f64,
    pub images: usize,
}

/// Dataset-level accumulation: IoU from summed counts, IPR and accuracy
/// from summed pixels.
#[derive(Clone, Debug)]
pub struct MetricsAccumulator {
    high: IouCounts,
    low: IouCounts,
    isolated: u64,
    correct: u64,
    pixels: u64,
    images: usize,
    conn: Connectivity,
}

impl MetricsAccumulator {
    pub fn new(classes: usize, conn: Connectivity) -> Self {
        Self {
            high: IouCounts::new(classes),
            low: IouCounts::new(classes),
            isolated: 0,
            correct: 0,
            pixels: 0,
            images: 0,
            conn,
        }
    }

    pub fn add(
        &mut self,
        pred: &LabelMap,
        gt: &LabelMap,
        pred_low: &LabelMap,
        gt_low: &LabelMap,
    ) -> Result<()> {
        self.high.add(pred, gt)?;
        self.low.add(pred_low, gt_low)?;
        self.isolated += isolated_pixels(pred, self.conn) as u64;
        self.correct += pred
            .data()
            .iter()
            .zip(gt.data())
            .filter(|(a, b)| a == b)
            .count() as u64;
        self.pixels += pred.len() as u64;
        self.images += 1;
        Ok(())
    }

    pub fn report(&self) -> MetricsReport {
        let high = self.high.report(AbsentClass::Exclude);
        let px = self.pixels.max(1) as f64;
        MetricsReport {
            per_class_iou: high.per_class,
            miou: high.miou,
            low_res_miou: self.low.report(AbsentClass::Exclude).miou,
            ipr: 100.0 * self.isolated as f64 / px,
            pixel_accuracy: self.correct as f64 / px,
            images: self.images,
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl MetricsReport {
    /// `metric,value` rows; absent classes have an empty value.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in [
            ("images", self.images as f64),
            ("pixel_accuracy", self.pixel_accuracy),
            ("miou", self.miou),
            ("low_res_miou", self.low_res_miou),
            ("ipr_percent", self.ipr),
        ] {
            let _ = writeln!(s, "{k},{v}");
        }
        for (c, v) in self.per_class_iou.iter().enumerate() {
            let _ = writeln!(s, "iou_class_{c},{}", cell(*v));
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "images          {}", self.images);
        let _ = writeln!(s, "pixel accuracy  {:.4}", self.pixel_accuracy);
        let _ = writeln!(s, "mIoU            {:.4}", self.miou);
        let _ = writeln!(s, "low-res mIoU    {:.4}", self.low_res_miou);
        let _ = writeln!(s, "IPR (%)         {:.3}", self.ipr);
        for (c, v) in self.per_class_iou.iter().enumerate() {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "  class {c:<3}     {v:.4}");
                }
                None => {
                    let _ = writeln!(s, "  class {c:<3}     absent");
                }
            }
        }
        s
    }
}
