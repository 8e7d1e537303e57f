use super::*;
use crate::augment::WeakAugConfig;
use crate::data::{generate_synthetic, split_dataset, DatasetSplit, GenConfig, Image, LabelMap};
use crate::network::{init_network, NetworkSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_split(unlabeled: usize, seed: u64) -> DatasetSplit {
    let gen = GenConfig {
        count: 4 + unlabeled + 2,
        height: 8,
        width: 8,
        min_axis_frac: 0.2,
        max_axis_frac: 0.4,
        ..GenConfig::default()
    };
    let samples = generate_synthetic(&gen, seed).unwrap();
    let n = samples.len();
    let split = split_dataset(samples, 3, 4.0 / (n - 2) as f64, 1, 1, seed).unwrap();
    assert_eq!(split.unlabeled.len(), unlabeled);
    split
}

fn tiny_config(mode: Mode) -> TrainConfig {
    TrainConfig {
        mode,
        max_epochs: 6,
        warmup_epochs: 2,
        filter_interval: 2,
        batch_size: 4,
        iters_per_epoch: 2,
        stage_channels: vec![2, 4],
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn warmup_gate_makes_modes_identical() {
    let split = tiny_split(6, 1);
    let cfg = TrainConfig {
        warmup_epochs: 6,
        ..tiny_config(Mode::Sl)
    };
    let sl = train(&cfg, &split).unwrap();
    for mode in [Mode::Ssl, Mode::SslAl] {
        let other = train(&TrainConfig { mode, ..cfg.clone() }, &split).unwrap();
        assert_eq!(sl.params, other.params);
        assert!(other.filter_events.is_empty());
    }
}

#[test]
fn warmup_ignores_unlabeled_pool() {
    let split = tiny_split(6, 2);
    let cfg = TrainConfig {
        warmup_epochs: 6,
        ..tiny_config(Mode::SslAl)
    };
    let full = train(&cfg, &split).unwrap();
    let stripped = DatasetSplit {
        unlabeled: Vec::new(),
        ..split
    };
    let none = train(&cfg, &stripped).unwrap();
    assert_eq!(full.params, none.params);
    let losses = |o: &TrainOutcome| o.history.iter().map(|r| r.total_loss).collect::<Vec<_>>();
    assert_eq!(losses(&full), losses(&none));
}

#[test]
fn training_is_deterministic_and_uses_pseudo_labels() {
    let split = tiny_split(6, 3);
    let cfg = tiny_config(Mode::Ssl);
    let a = train(&cfg, &split).unwrap();
    let b = train(&cfg, &split).unwrap();
    assert_eq!(history_csv(&a.history), history_csv(&b.history));
    assert_eq!(a.params, b.params);
    assert!(a.history[..2].iter().all(|r| r.unlabeled_loss == 0.0));
    assert!(a.history[2..].iter().all(|r| r.unlabeled_loss > 0.0));
    assert!(a.max_softmax_deviation < 1e-9);
    let sl = train(&tiny_config(Mode::Sl), &split).unwrap();
    assert_ne!(sl.params, a.params);
}

#[test]
fn filtering_shrinks_only_in_ssl_al() {
    let split = tiny_split(10, 4);
    let cfg = TrainConfig {
        drop_fraction: 0.3,
        ..tiny_config(Mode::SslAl)
    };
    let al = train(&cfg, &split).unwrap();
    let sizes: Vec<usize> = al.history.iter().map(|r| r.active_unlabeled).collect();
    // filters at epochs 4 and 6 (epoch 2 is still warm-up): 10 -> 7 -> 5
    assert_eq!(sizes, vec![10, 10, 10, 7, 7, 5]);
    assert_eq!(al.filter_events.len(), 2);
    assert_eq!(al.active_unlabeled.len(), 5);
    for e in &al.filter_events {
        assert!(e.dropped.iter().all(|d| (0.0..=3f64.ln()).contains(&d.score)));
    }
    let ssl = train(&TrainConfig { mode: Mode::Ssl, ..cfg.clone() }, &split).unwrap();
    assert!(ssl.history.iter().all(|r| r.active_unlabeled == 10));
    let sl = train(&TrainConfig { mode: Mode::Sl, ..cfg }, &split).unwrap();
    assert!(sl.history.iter().all(|r| r.active_unlabeled == 10));
}

#[test]
fn filter_round_drops_the_most_confident() {
    let split = tiny_split(10, 5);
    let cfg = TrainConfig {
        max_epochs: 4,
        filter_interval: 4,
        drop_fraction: 0.5,
        ..tiny_config(Mode::SslAl)
    };
    let mut t = Trainer::new(&cfg, &split).unwrap();
    for _ in 0..3 {
        t.run_epoch().unwrap();
    }
    let before = t.state().active.len();
    t.run_epoch().unwrap();
    let params = t.state().params.clone();
    let plan = *t.plan();
    let out = t.finish();
    assert_eq!(out.active_unlabeled.len(), before - 5);
    // rescore independently with the final parameters
    let score = |id: &str| {
        let s = split.unlabeled.iter().find(|s| s.id == id).unwrap();
        image_entropy(&crate::network::predict(&params, &plan.apply_image(&s.image).unwrap()).unwrap())
    };
    let dropped_max = out.filter_events[0].dropped.iter().map(|d| d.score).fold(f64::MIN, f64::max);
    for d in &out.filter_events[0].dropped {
        assert_eq!(d.score, score(&d.sample_id));
    }
    for id in &out.active_unlabeled {
        assert!(score(id) >= dropped_max);
    }
}

#[test]
fn non_finite_loss_aborts_with_location() {
    let split = tiny_split(2, 6);
    let cfg = TrainConfig {
        lr0: 1e6,
        momentum: 0.0,
        ..tiny_config(Mode::Sl)
    };
    match train(&cfg, &split) {
        Err(crate::Error::NonFinite { epoch, batch, .. }) => assert!(epoch >= 1 && batch >= 1),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

fn items_16(params_seed: u64) -> (crate::network::NetworkParams, Vec<BatchItem>) {
    let spec = NetworkSpec::new(1, 3, vec![2, 3]).unwrap();
    let params = init_network(&spec, params_seed).unwrap();
    let split = generate_synthetic(
        &GenConfig {
            count: 2,
            height: 8,
            width: 8,
            ..GenConfig::default()
        },
        params_seed,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let labeled = BatchItem {
        image: split[0].image.clone(),
        target: split[0].label().unwrap().clone(),
        pseudo: false,
    };
    let (pseudo, _) = pseudo_label_pair(&params, &split[1].image, &WeakAugConfig::default(), &mut rng).unwrap();
    (params, vec![labeled, pseudo])
}

#[test]
fn mixed_batch_gradient_matches_finite_differences() {
    let (params, items) = items_16(21);
    let r = gradcheck::check_gradients(&params, &items, 1e-5).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn batch_loss_equals_unified_loss() {
    let (params, items) = items_16(22);
    let res = batch_loss_and_grad(&params, &items).unwrap();
    let preds: Vec<_> = items.iter().map(|it| crate::network::predict(&params, &it.image).unwrap()).collect();
    let u = unified_loss(&preds.iter().collect::<Vec<_>>(), &items.iter().map(|i| &i.target).collect::<Vec<_>>()).unwrap();
    assert!((u.total - res.loss).abs() < 1e-14);
    assert!((batch_loss(&params, &items).unwrap() - res.loss).abs() < 1e-14);
}

#[test]
fn pseudo_label_generation_is_outside_the_gradient() {
    let (params, items) = items_16(23);
    let base = batch_loss_and_grad(&params, &items).unwrap();
    // same pseudo target produced from a nudged snapshot
    let mut nudged = params.clone();
    nudged.values_mut().for_each(|v| *v *= 1.0 + 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let image = &items[1];
    let src = generate_synthetic(
        &GenConfig {
            count: 2,
            height: 8,
            width: 8,
            ..GenConfig::default()
        },
        23,
    )
    .unwrap();
    let (again, _) = pseudo_label_pair(&nudged, &src[1].image, &WeakAugConfig::default(), &mut rng).unwrap();
    assert_eq!(again.target, image.target);
    assert_eq!(again.image, image.image);
    let other = batch_loss_and_grad(&params, &[items[0].clone(), again]).unwrap();
    assert_eq!(base.grads, other.grads);
    // and a hand-fixed constant target gives the same gradient
    let fixed = BatchItem {
        image: image.image.clone(),
        target: LabelMap::new(8, 8, image.target.data().to_vec()).unwrap(),
        pseudo: false,
    };
    let constant = batch_loss_and_grad(&params, &[items[0].clone(), fixed]).unwrap();
    assert_eq!(base.grads, constant.grads);
}

#[test]
fn csv_shapes() {
    let h = vec![EpochRecord {
        epoch: 1,
        supervised_loss: 0.5,
        unlabeled_loss: 0.0,
        total_loss: 0.5,
        active_unlabeled: 3,
        val_dice: None,
    }];
    assert_eq!(history_csv(&h), format!("{HISTORY_HEADER}\n1,0.5,0,0.5,3,\n"));
    let e = vec![FilterEvent {
        epoch: 100,
        dropped: vec![UncertaintyScore::new("s1", 0.25)],
    }];
    assert_eq!(filter_events_csv(&e), format!("{FILTER_HEADER}\n100,s1,0.25\n"));
}

#[test]
fn segment_returns_argmax() {
    let spec = NetworkSpec::new(1, 3, vec![2]).unwrap();
    let params = init_network(&spec, 1).unwrap();
    let img = Image::zeros(4, 4, 1);
    let p = crate::network::predict(&params, &img).unwrap();
    assert_eq!(segment(&params, &img).unwrap(), make_pseudo_label(&p));
}
