//! Overlap (Dice, IoU) and boundary (95th-percentile Hausdorff, average
//! surface distance) metrics, in percent and voxel units.

mod surface;

pub use surface::{asd, directed_distances, extract_surface, hd95, nearest_rank_p95, SurfacePointSet};

use crate::data::LabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// One-vs-rest pixel counts for `class_id`.
pub fn confusion(pred: &LabelMap, gt: &LabelMap, class_id: u8) -> Result<ConfusionCounts> {
    if !pred.same_shape(gt) {
        return Err(Error::shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p == class_id, g == class_id) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `100 * 2tp / (fp + 2tp + fn)`; 100 when both masks are empty.
pub fn dice(c: &ConfusionCounts) -> f64 {
    let denom = c.fp + 2 * c.tp + c.fn_;
    if denom == 0 {
        100.0
    } else {
        100.0 * (2 * c.tp) as f64 / denom as f64
    }
}

/// `100 * tp / (tp + fn + fp)`; 100 when both masks are empty.
pub fn iou(c: &ConfusionCounts) -> f64 {
    let denom = c.tp + c.fn_ + c.fp;
    if denom == 0 {
        100.0
    } else {
        100.0 * c.tp as f64 / denom as f64
    }
}

/// Why surface distances are (un)defined for a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceFlag {
    Defined,
    BothEmpty,
    PredEmpty,
    GtEmpty,
}

impl SurfaceFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SurfaceFlag::Defined => "ok",
            SurfaceFlag::BothEmpty => "both_empty",
            SurfaceFlag::PredEmpty => "pred_empty",
            SurfaceFlag::GtEmpty => "gt_empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class_id: u8,
    pub dice: f64,
    pub iou: f64,
    pub hd95: Option<f64>,
    pub asd: Option<f64>,
    pub flag: SurfaceFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub mean_dice: f64,
    pub mean_iou: f64,
    pub mean_hd95: Option<f64>,
    pub mean_asd: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// All four metrics for every non-background class, plus means over the
/// classes where each value is defined.
pub fn evaluate(pred: &LabelMap, gt: &LabelMap, num_classes: usize) -> Result<MetricsReport> {
    if !pred.same_shape(gt) {
        return Err(Error::shape("prediction and ground truth differ in shape"));
    }
    if num_classes < 2 || num_classes > 256 {
        return Err(Error::invalid("num_classes must be in 2..=256"));
    }
    let mut per_class = Vec::with_capacity(num_classes - 1);
    for class_id in 1..num_classes as u8 {
        let counts = confusion(pred, gt, class_id)?;
        let a = extract_surface(&pred.binary(class_id));
        let b = extract_surface(&gt.binary(class_id));
        let flag = match (a.is_empty(), b.is_empty()) {
            (false, false) => SurfaceFlag::Defined,
            (true, true) => SurfaceFlag::BothEmpty,
            (true, false) => SurfaceFlag::PredEmpty,
            (false, true) => SurfaceFlag::GtEmpty,
        };
        let (hd, sd) = if flag == SurfaceFlag::Defined {
            (Some(hd95(&a, &b)?), Some(asd(&a, &b)?))
        } else {
            (None, None)
        };
        per_class.push(ClassMetrics {
            class_id,
            dice: dice(&counts),
            iou: iou(&counts),
            hd95: hd,
            asd: sd,
            flag,
        });
    }
    Ok(MetricsReport {
        mean_dice: mean_of(per_class.iter().map(|c| c.dice)).unwrap_or(100.0),
        mean_iou: mean_of(per_class.iter().map(|c| c.iou)).unwrap_or(100.0),
        mean_hd95: mean_of(per_class.iter().filter_map(|c| c.hd95)),
        mean_asd: mean_of(per_class.iter().filter_map(|c| c.asd)),
        per_class,
    })
}

/// Case-level aggregate: each report's class means averaged over cases
/// (distance means over the cases where they are defined).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub dice: f64,
    pub iou: f64,
    pub hd95: Option<f64>,
    pub asd: Option<f64>,
    pub cases: usize,
}

pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    Aggregate {
        dice: mean_of(reports.iter().map(|r| r.mean_dice)).unwrap_or(f64::NAN),
        iou: mean_of(reports.iter().map(|r| r.mean_iou)).unwrap_or(f64::NAN),
        hd95: mean_of(reports.iter().filter_map(|r| r.mean_hd95)),
        asd: mean_of(reports.iter().filter_map(|r| r.mean_asd)),
        cases: reports.len(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: &str = "sample_id,class,dice,iou,hd95,asd,flags";

/// One CSV row per class of one sample.
pub fn csv_rows(sample_id: &str, report: &MetricsReport) -> Vec<String> {
    report
        .per_class
        .iter()
        .map(|c| {
            format!(
                "{sample_id},{},{},{},{},{},{}",
                c.class_id,
                c.dice,
                c.iou,
                fmt_opt(c.hd95),
                fmt_opt(c.asd),
                c.flag.as_str()
            )
        })
        .collect()
}
