use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Mode, TrainConfig};
use super::loss::segmentation_loss;
use super::pseudo::{filter_unlabeled, image_entropy, make_pseudo_label, UncertaintyScore};
use crate::augment::{strong_augment, transport_label, weak_augment, WeakAugConfig};
use crate::data::{DatasetSplit, Image, LabelMap, ProbMap, Sample};
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{backward, forward, init_network, predict, sgd_step, Gradients, NetworkParams, NetworkSpec, OptimState};
use crate::preprocess::{compute_plan, PreprocessPlan};

/// Largest `|sum_c p_c - 1|` over the pixels of one map.
pub fn softmax_deviation(p: &ProbMap) -> f64 {
    p.pixels().map(|px| (px.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

/// One element of a joint batch: an input and the target it is trained
/// against (a ground-truth label or a transported pseudo-label).
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub image: Image,
    pub target: LabelMap,
    pub pseudo: bool,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub loss: f64,
    pub per_sample: Vec<f64>,
    pub grads: Gradients,
    pub max_softmax_deviation: f64,
}

/// Unified loss over the batch and its exact parameter gradient. Per-item
/// work runs in parallel; gradients are summed in batch order.
pub fn batch_loss_and_grad(params: &NetworkParams, items: &[BatchItem]) -> Result<BatchResult> {
    if items.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let b = items.len() as f64;
    let parts: Vec<Result<(f64, Gradients, f64)>> = items
        .par_iter()
        .map(|it| {
            let (p, cache) = forward(params, &it.image)?;
            let (loss, mut g) = segmentation_loss(&p, &it.target)?;
            g.iter_mut().for_each(|v| *v /= b);
            Ok((loss, backward(params, &cache, &g)?, softmax_deviation(&p)))
        })
        .collect();
    let mut grads = params.zeros_like();
    let mut per_sample = Vec::with_capacity(items.len());
    let mut dev: f64 = 0.0;
    for part in parts {
        let (loss, g, d) = part?;
        grads.add_assign(&g);
        per_sample.push(loss);
        dev = dev.max(d);
    }
    Ok(BatchResult {
        loss: per_sample.iter().sum::<f64>() / b,
        per_sample,
        grads,
        max_softmax_deviation: dev,
    })
}

/// Loss only, for finite-difference checks.
pub fn batch_loss(params: &NetworkParams, items: &[BatchItem]) -> Result<f64> {
    let mut total = 0.0;
    for it in items {
        total += segmentation_loss(&predict(params, &it.image)?, &it.target)?.0;
    }
    Ok(total / items.len().max(1) as f64)
}

/// Builds the strong-view training pair for one unlabeled image: weak view,
/// argmax pseudo-label from a no-gradient forward pass, strong geometric
/// view of the weak image, and the pseudo-label moved onto that view.
/// The returned map is the pseudo-label prediction, for diagnostics.
pub fn pseudo_label_pair<R: Rng + ?Sized>(
    params: &NetworkParams,
    image: &Image,
    weak: &WeakAugConfig,
    rng: &mut R,
) -> Result<(BatchItem, ProbMap)> {
    let (x_w, _) = weak_augment(image, None, weak, rng)?;
    let p_w = predict(params, &x_w)?;
    let y_u = make_pseudo_label(&p_w);
    let (x_s, t) = strong_augment(&x_w, rng)?;
    let target = transport_label(&y_u, &t)?;
    Ok((
        BatchItem {
            image: x_s,
            target,
            pseudo: true,
        },
        p_w,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss of the labeled items seen this epoch.
    pub supervised_loss: f64,
    /// Mean loss of the pseudo-labeled items; 0 when none were trained.
    pub unlabeled_loss: f64,
    /// Mean of the per-batch unified losses.
    pub total_loss: f64,
    /// Active unlabeled set size after any filtering this epoch. SL runs
    /// report the unlabeled split size they were given and never shrink.
    pub active_unlabeled: usize,
    /// Mean validation Dice in percent, when a validation split exists.
    pub val_dice: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEvent {
    pub epoch: usize,
    pub dropped: Vec<UncertaintyScore>,
}

pub const HISTORY_HEADER: &str = "epoch,supervised_loss,unlabeled_loss_component,total_loss,active_unlabeled,val_dice";
pub const FILTER_HEADER: &str = "epoch,sample_id,score";

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in history {
        let val = r.val_dice.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{val}",
            r.epoch, r.supervised_loss, r.unlabeled_loss, r.total_loss, r.active_unlabeled
        )
        .unwrap();
    }
    out
}

pub fn filter_events_csv(events: &[FilterEvent]) -> String {
    let mut out = format!("{FILTER_HEADER}\n");
    for e in events {
        for d in &e.dropped {
            writeln!(out, "{},{},{}", e.epoch, d.sample_id, d.score).unwrap();
        }
    }
    out
}

/// Loop state between epochs.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Last completed epoch (0 before training).
    pub epoch: usize,
    /// Indices into the unlabeled split, in split order.
    pub active: Vec<usize>,
    pub params: NetworkParams,
    pub optim: OptimState,
    pub history: Vec<EpochRecord>,
    pub filter_events: Vec<FilterEvent>,
    pub max_softmax_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub plan: PreprocessPlan,
    pub history: Vec<EpochRecord>,
    pub filter_events: Vec<FilterEvent>,
    /// Ids still in the active unlabeled set at the end.
    pub active_unlabeled: Vec<String>,
    pub max_softmax_deviation: f64,
}

/// Epoch-by-epoch driver. [`train`] runs it to completion.
pub struct Trainer {
    config: TrainConfig,
    plan: PreprocessPlan,
    labeled: Vec<Sample>,
    unlabeled: Vec<Sample>,
    validation: Vec<Sample>,
    /// Size of the unlabeled split as given, reported in SL histories.
    unlabeled_total: usize,
    num_classes: usize,
    rng: ChaCha8Rng,
    state: TrainState,
}

impl Trainer {
    /// Plans normalization on the labeled split and applies it to every
    /// split. In [`Mode::Sl`] the unlabeled split is never touched.
    pub fn new(config: &TrainConfig, split: &DatasetSplit) -> Result<Self> {
        config.validate()?;
        split.validate()?;
        let plan = compute_plan(&split.labeled)?;
        let labeled = plan.apply_all(&split.labeled)?;
        let unlabeled = if config.mode.uses_unlabeled() {
            plan.apply_all(&split.unlabeled)?
        } else {
            Vec::new()
        };
        let validation = plan.apply_all(&split.validation)?;
        let input_channels = labeled[0].image.channels();
        let spec = NetworkSpec::new(input_channels, split.num_classes, config.stage_channels.clone())?;
        spec.check_input(plan.target_height, plan.target_width, input_channels)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = init_network(&spec, rng.random())?;
        let optim = OptimState::new(
            &params,
            config.lr0,
            config.weight_decay,
            config.momentum,
            Some(config.max_epochs),
        );
        let active = (0..unlabeled.len()).collect();
        Ok(Self {
            config: config.clone(),
            plan,
            labeled,
            unlabeled,
            validation,
            unlabeled_total: split.unlabeled.len(),
            num_classes: split.num_classes,
            rng,
            state: TrainState {
                epoch: 0,
                active,
                params,
                optim,
                history: Vec::new(),
                filter_events: Vec::new(),
                max_softmax_deviation: 0.0,
            },
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn plan(&self) -> &PreprocessPlan {
        &self.plan
    }

    pub fn is_done(&self) -> bool {
        self.state.epoch >= self.config.max_epochs
    }

    fn active_count(&self) -> usize {
        match self.config.mode {
            Mode::Sl => self.unlabeled_total,
            _ => self.state.active.len(),
        }
    }

    /// Runs the next epoch and returns its history record.
    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        if self.is_done() {
            return Err(Error::invalid("training already finished"));
        }
        let epoch = self.state.epoch + 1;
        let cfg = &self.config;
        let mixed = cfg.mode.uses_unlabeled() && epoch > cfg.warmup_epochs && !self.state.active.is_empty();
        let (n_lab, n_unl) = if mixed {
            (cfg.batch_size.div_ceil(2), cfg.batch_size / 2)
        } else {
            (cfg.batch_size, 0)
        };
        let (mut sup_sum, mut sup_n, mut unl_sum, mut unl_n, mut total_sum) = (0.0, 0usize, 0.0, 0usize, 0.0);

        for batch in 0..cfg.iters_per_epoch {
            let lab_idx: Vec<usize> = (0..n_lab).map(|_| self.rng.random_range(0..self.labeled.len())).collect();
            let unl_idx: Vec<usize> = (0..n_unl)
                .map(|_| self.state.active[self.rng.random_range(0..self.state.active.len())])
                .collect();
            let seeds: Vec<u64> = (0..n_lab + n_unl).map(|_| self.rng.random()).collect();

            let params = &self.state.params;
            let weak = &cfg.weak_aug;
            let built: Vec<Result<(BatchItem, f64)>> = lab_idx
                .iter()
                .map(|&i| (&self.labeled[i], false))
                .chain(unl_idx.iter().map(|&i| (&self.unlabeled[i], true)))
                .zip(&seeds)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|((s, is_unl), &seed)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    if is_unl {
                        let (item, p_w) = pseudo_label_pair(params, &s.image, weak, &mut rng)?;
                        Ok((item, softmax_deviation(&p_w)))
                    } else {
                        let label = s.label().expect("labeled split holds labels");
                        let (image, target) = weak_augment(&s.image, Some(label), weak, &mut rng)?;
                        Ok((
                            BatchItem {
                                image,
                                target: target.expect("label was given"),
                                pseudo: false,
                            },
                            0.0,
                        ))
                    }
                })
                .collect();
            let mut items = Vec::with_capacity(built.len());
            for b in built {
                let (item, dev) = b?;
                self.state.max_softmax_deviation = self.state.max_softmax_deviation.max(dev);
                items.push(item);
            }

            let res = batch_loss_and_grad(&self.state.params, &items)?;
            self.state.max_softmax_deviation = self.state.max_softmax_deviation.max(res.max_softmax_deviation);
            if !res.loss.is_finite() || !res.grads.all_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch + 1,
                    what: if res.loss.is_finite() { "gradient" } else { "loss" }.to_string(),
                });
            }
            for (it, l) in items.iter().zip(&res.per_sample) {
                if it.pseudo {
                    unl_sum += l;
                    unl_n += 1;
                } else {
                    sup_sum += l;
                    sup_n += 1;
                }
            }
            total_sum += res.loss;
            sgd_step(&mut self.state.params, &res.grads, &mut self.state.optim, epoch - 1)?;
        }

        if cfg.mode == Mode::SslAl && epoch % cfg.filter_interval == 0 && epoch > cfg.warmup_epochs {
            self.filter(epoch)?;
        }

        let val_dice = self.validation_dice()?;
        let record = EpochRecord {
            epoch,
            supervised_loss: sup_sum / sup_n.max(1) as f64,
            unlabeled_loss: if unl_n == 0 { 0.0 } else { unl_sum / unl_n as f64 },
            total_loss: total_sum / self.config.iters_per_epoch as f64,
            active_unlabeled: self.active_count(),
            val_dice,
        };
        self.state.epoch = epoch;
        self.state.history.push(record);
        Ok(self.state.history.last().expect("just pushed"))
    }

    /// Entropy-scores the active set on the un-augmented images and drops
    /// the most confident fraction.
    fn filter(&mut self, epoch: usize) -> Result<()> {
        let params = &self.state.params;
        let scored: Vec<Result<(UncertaintyScore, f64)>> = self
            .state
            .active
            .par_iter()
            .map(|&i| {
                let s = &self.unlabeled[i];
                let p = predict(params, &s.image)?;
                Ok((UncertaintyScore::new(s.id.clone(), image_entropy(&p)), softmax_deviation(&p)))
            })
            .collect();
        let mut scores = Vec::with_capacity(scored.len());
        for s in scored {
            let (score, dev) = s?;
            self.state.max_softmax_deviation = self.state.max_softmax_deviation.max(dev);
            scores.push(score);
        }
        let outcome = filter_unlabeled(&scores, self.config.drop_fraction);
        let dropped: std::collections::HashSet<&str> = outcome.dropped.iter().map(|d| d.sample_id.as_str()).collect();
        let unlabeled = &self.unlabeled;
        self.state.active.retain(|&i| !dropped.contains(unlabeled[i].id.as_str()));
        self.state.filter_events.push(FilterEvent {
            epoch,
            dropped: outcome.dropped,
        });
        Ok(())
    }

    fn validation_dice(&mut self) -> Result<Option<f64>> {
        if self.validation.is_empty() {
            return Ok(None);
        }
        let params = &self.state.params;
        let c = self.num_classes;
        let parts: Vec<Result<(f64, f64)>> = self
            .validation
            .par_iter()
            .map(|s| {
                let p = predict(params, &s.image)?;
                let gt = s.label().expect("validation samples are labeled");
                let r = metrics::evaluate(&make_pseudo_label(&p), gt, c)?;
                Ok((r.mean_dice, softmax_deviation(&p)))
            })
            .collect();
        let mut sum = 0.0;
        for part in parts {
            let (d, dev) = part?;
            sum += d;
            self.state.max_softmax_deviation = self.state.max_softmax_deviation.max(dev);
        }
        Ok(Some(sum / self.validation.len() as f64))
    }

    pub fn finish(self) -> TrainOutcome {
        let active_unlabeled = self.state.active.iter().map(|&i| self.unlabeled[i].id.clone()).collect();
        TrainOutcome {
            params: self.state.params,
            plan: self.plan,
            history: self.state.history,
            filter_events: self.state.filter_events,
            active_unlabeled,
            max_softmax_deviation: self.state.max_softmax_deviation,
        }
    }
}

/// Full training run: `max_epochs` epochs of supervised warm-up followed
/// by mixed labeled/pseudo-labeled batches, with entropy filtering in
/// [`Mode::SslAl`]. Deterministic given `config.seed`.
pub fn train(config: &TrainConfig, split: &DatasetSplit) -> Result<TrainOutcome> {
    let mut t = Trainer::new(config, split)?;
    while !t.is_done() {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

/// Argmax prediction for an already-normalized image.
pub fn segment(params: &NetworkParams, image: &Image) -> Result<LabelMap> {
    Ok(make_pseudo_label(&predict(params, image)?))
}
