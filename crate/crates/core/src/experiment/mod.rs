//! Reproducible experiment commands shared by the `segssl` binary and the
//! examples: dataset generation, training, evaluation, dataset analysis
//! and the SL / SSL / SSL_AL ablation.
//!
//! Commands map failures onto stable exit codes through [`exit_code`].

mod config;

pub use config::{ExperimentConfig, KEYS};

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{generate_synthetic, load_dataset, save_dataset, split_dataset, DatasetSplit, Sample};
use crate::datastats::{analyze_dataset, DatasetStats};
use crate::error::{Error, Result};
use crate::metrics::{self, aggregate, Aggregate, MetricsReport};
use crate::network::{load_checkpoint, save_checkpoint, NetworkParams};
use crate::preprocess::PreprocessPlan;
use crate::ssl::{filter_events_csv, history_csv, segment, EpochRecord, Mode, TrainConfig, TrainOutcome, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_DATA: i32 = 4;

/// Environment variable capping evaluation worker threads.
pub const THREADS_ENV: &str = "SEGSSL_THREADS";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::NonFinite { .. } => EXIT_NUMERIC,
        Error::Shape(_)
        | Error::Dataset(_)
        | Error::TensorKind(_)
        | Error::BadMagic { .. }
        | Error::UnsupportedVersion(_)
        | Error::UnknownDtype(_)
        | Error::Truncated { .. }
        | Error::EmptySurface => EXIT_DATA,
        Error::Io { .. } | Error::Generation(_) => EXIT_FAILURE,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Builds the configured synthetic corpus and partitions it.
pub fn build_split(cfg: &ExperimentConfig) -> Result<DatasetSplit> {
    let samples = generate_synthetic(&cfg.gen, cfg.gen_seed)?;
    split_dataset(
        samples,
        cfg.gen.num_classes,
        cfg.labeled_ratio,
        cfg.val_count,
        cfg.test_count,
        cfg.split_seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub labeled: usize,
    pub unlabeled: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn of(split: &DatasetSplit) -> Self {
        Self {
            labeled: split.labeled.len(),
            unlabeled: split.unlabeled.len(),
            validation: split.validation.len(),
            test: split.test.len(),
        }
    }
}

/// `gen`: writes the dataset directory under `out`.
pub fn run_gen(cfg: &ExperimentConfig, out: &Path) -> Result<SplitCounts> {
    let split = build_split(cfg)?;
    save_dataset(&split, out)?;
    Ok(SplitCounts::of(&split))
}

pub const PLAN_FILE: &str = "plan.txt";

/// `train`: runs the configured mode on the dataset at `data` and writes
/// `checkpoint/` (with the normalization plan), `history.csv`,
/// `filter_events.csv` and `train.log` under `out`. In SL mode the
/// unlabeled split is not read from disk.
pub fn run_train(
    train: &TrainConfig,
    data: &Path,
    out: &Path,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let split = load_dataset(data, train.mode.uses_unlabeled())?;
    let mut trainer = Trainer::new(train, &split)?;
    let mut log = String::new();
    let result = (|| {
        while !trainer.is_done() {
            let r = trainer.run_epoch()?;
            writeln!(
                log,
                "epoch {} total_loss {} active_unlabeled {}",
                r.epoch, r.total_loss, r.active_unlabeled
            )
            .unwrap();
            on_epoch(r);
        }
        Ok(())
    })();
    if let Err(e) = result {
        writeln!(log, "aborted: {e}").unwrap();
        write_file(&out.join("train.log"), &log)?;
        return Err(e);
    }
    let outcome = trainer.finish();
    save_outputs(&outcome, out)?;
    write_file(&out.join("train.log"), &log)?;
    Ok(outcome)
}

fn save_outputs(outcome: &TrainOutcome, out: &Path) -> Result<()> {
    let ckpt = out.join("checkpoint");
    save_checkpoint(&outcome.params, &ckpt)?;
    write_file(&ckpt.join(PLAN_FILE), outcome.plan.to_string())?;
    write_file(&out.join("history.csv"), history_csv(&outcome.history))?;
    write_file(&out.join("filter_events.csv"), filter_events_csv(&outcome.filter_events))
}

pub fn load_model(checkpoint: &Path) -> Result<(NetworkParams, PreprocessPlan)> {
    let params = load_checkpoint(checkpoint)?;
    let plan_path = checkpoint.join(PLAN_FILE);
    let text = fs::read_to_string(&plan_path).map_err(|e| Error::io(&plan_path, e))?;
    Ok((params, text.parse()?))
}

/// Thread pool honoring [`THREADS_ENV`]; unset means rayon's default.
pub fn eval_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::invalid(e.to_string()))
}

/// Normalizes, segments and scores each sample against its label.
pub fn evaluate_samples(
    params: &NetworkParams,
    plan: &PreprocessPlan,
    samples: &[Sample],
    num_classes: usize,
) -> Result<Vec<(String, MetricsReport)>> {
    if params.spec.num_classes != num_classes {
        return Err(Error::Dataset(format!(
            "checkpoint predicts {} classes, dataset has {}",
            params.spec.num_classes, num_classes
        )));
    }
    samples
        .par_iter()
        .map(|s| {
            let gt = s
                .label()
                .ok_or_else(|| Error::Dataset(format!("sample {:?} has no label", s.id)))?;
            let pred = segment(params, &plan.apply_image(&s.image)?)?;
            Ok((s.id.clone(), metrics::evaluate(&pred, gt, num_classes)?))
        })
        .collect()
}

pub const EVAL_HEADER: &str = "sample_id,dice,iou,hd95,asd";
pub const AGGREGATE_ID: &str = "mean";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-sample class means followed by one aggregate row.
pub fn eval_csv(reports: &[(String, MetricsReport)]) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for (id, r) in reports {
        writeln!(out, "{id},{},{},{},{}", r.mean_dice, r.mean_iou, opt(r.mean_hd95), opt(r.mean_asd)).unwrap();
    }
    let a = aggregate(&reports.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>());
    writeln!(out, "{AGGREGATE_ID},{},{},{},{}", a.dice, a.iou, opt(a.hd95), opt(a.asd)).unwrap();
    out
}

pub fn per_class_csv(reports: &[(String, MetricsReport)]) -> String {
    let mut out = format!("{}\n", metrics::CSV_HEADER);
    for (id, r) in reports {
        for row in metrics::csv_rows(id, r) {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

/// `eval`: scores the checkpoint on the test split; writes `metrics.csv`
/// and `metrics_per_class.csv` under `out`.
pub fn run_eval(checkpoint: &Path, data: &Path, out: &Path) -> Result<Aggregate> {
    let (params, plan) = load_model(checkpoint)?;
    let split = load_dataset(data, false)?;
    let pool = eval_pool()?;
    let reports = pool.install(|| evaluate_samples(&params, &plan, &split.test, split.num_classes))?;
    write_file(&out.join("metrics.csv"), eval_csv(&reports))?;
    write_file(&out.join("metrics_per_class.csv"), per_class_csv(&reports))?;
    Ok(aggregate(&reports.into_iter().map(|(_, r)| r).collect::<Vec<_>>()))
}

/// `analyze`: CNR / SNR / FBR over every labeled image (labeled,
/// validation and test splits; unlabeled samples are excluded). Writes
/// `analysis.csv` (one row) and `analysis_per_image.csv`.
pub fn run_analyze(data: &Path, name: &str, out: &Path) -> Result<DatasetStats> {
    let split = load_dataset(data, false)?;
    let samples: Vec<Sample> = [&split.labeled, &split.validation, &split.test]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    let stats = analyze_dataset(&samples)?;
    write_file(
        &out.join("analysis.csv"),
        format!("{}\n{}\n", DatasetStats::CSV_HEADER, stats.csv_row(name)),
    )?;
    let mut per = String::from("sample_id,cnr,snr,fbr_percent,note\n");
    for p in &stats.per_image {
        match &p.stats {
            Ok(s) => writeln!(per, "{},{},{},{},", p.sample_id, s.cnr, s.snr, s.fbr).unwrap(),
            Err(e) => writeln!(per, "{},,,,{}", p.sample_id, e.replace(',', ";")).unwrap(),
        }
    }
    write_file(&out.join("analysis_per_image.csv"), per)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    /// `None` for the median row.
    pub seed: Option<u64>,
    pub mode: Mode,
    pub labeled: usize,
    pub result: Aggregate,
}

pub const ABLATION_HEADER: &str = "seed,method,labeled,dice,iou,hd95,asd";

impl AblationRow {
    pub fn csv(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "median".to_string());
        let r = &self.result;
        format!(
            "{seed},{},{},{},{},{},{}",
            self.mode,
            self.labeled,
            r.dice,
            r.iou,
            opt(r.hd95),
            opt(r.asd)
        )
    }
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn median_row(rows: &[AblationRow], mode: Mode) -> AblationRow {
    let of = |f: &dyn Fn(&Aggregate) -> Option<f64>| {
        median(&rows.iter().filter(|r| r.mode == mode).filter_map(|r| f(&r.result)).collect::<Vec<_>>())
    };
    let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.mode == mode).collect();
    AblationRow {
        seed: None,
        mode,
        labeled: mine.first().map(|r| r.labeled).unwrap_or(0),
        result: Aggregate {
            dice: of(&|a| Some(a.dice)).unwrap_or(f64::NAN),
            iou: of(&|a| Some(a.iou)).unwrap_or(f64::NAN),
            hd95: of(&|a| a.hd95),
            asd: of(&|a| a.asd),
            cases: mine.first().map(|r| r.result.cases).unwrap_or(0),
        },
    }
}

/// `ablate`: one shared split from the config; for each training seed,
/// SL, SSL and SSL_AL are trained and scored on the test split. Rows are
/// appended to `ablation.csv` as they finish, so a failure keeps earlier
/// results; the three median rows close the file.
pub fn run_ablate(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out: &Path,
    mut on_row: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let split = build_split(cfg)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join("ablation.csv");
    let mut csv = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut append = |line: &str| writeln!(csv, "{line}").map_err(|e| Error::io(&csv_path, e));
    append(ABLATION_HEADER)?;
    let pool = eval_pool()?;
    let mut rows = Vec::new();
    for &seed in seeds {
        for mode in Mode::ALL {
            let train = TrainConfig {
                mode,
                seed,
                ..cfg.train.clone()
            };
            let outcome = crate::ssl::train(&train, &split)?;
            save_outputs(&outcome, &out.join(format!("seed_{seed}")).join(mode.as_str()))?;
            let reports =
                pool.install(|| evaluate_samples(&outcome.params, &outcome.plan, &split.test, split.num_classes))?;
            let row = AblationRow {
                seed: Some(seed),
                mode,
                labeled: split.labeled.len(),
                result: aggregate(&reports.into_iter().map(|(_, r)| r).collect::<Vec<_>>()),
            };
            append(&row.csv())?;
            on_row(&row);
            rows.push(row);
        }
    }
    for mode in Mode::ALL {
        let m = median_row(&rows, mode);
        append(&m.csv())?;
        on_row(&m);
        rows.push(m);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(exit_code(&Error::Config { line: 1, message: String::new() }), 2);
        assert_eq!(
            exit_code(&Error::NonFinite {
                epoch: 1,
                batch: 1,
                what: String::new()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Shape(String::new())), 4);
        assert_eq!(exit_code(&Error::Dataset(String::new())), 4);
    }

    #[test]
    fn eval_csv_aggregate_row() {
        let gt = crate::data::LabelMap::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let a = metrics::evaluate(&gt, &gt, 2).unwrap();
        let b = metrics::evaluate(&crate::data::LabelMap::new(2, 2, vec![1, 0, 0, 0]).unwrap(), &gt, 2).unwrap();
        let csv = eval_csv(&[("a".into(), a), ("b".into(), b.clone())]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let dice: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert!((dice - (100.0 + b.mean_dice) / 2.0).abs() < 1e-9);
    }
}
