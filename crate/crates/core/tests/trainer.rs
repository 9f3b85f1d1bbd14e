mod common;

use common::{fgn_config, Variant};
use gnqa::dataset::Dataset;
use gnqa::heads::QaModel;
use gnqa::synth::{build_corpus, Corpus, Splits, SynthConfig};
use gnqa::trainer::{
    evaluate, fit, fit_with, load_checkpoint, log_to_jsonl, save_checkpoint, LrSchedule,
    TrainConfig,
};
use gnqa::Rng;
use rand::SeedableRng;

fn small() -> (Corpus, Dataset, Dataset) {
    let c = build_corpus(&SynthConfig {
        sizes: Splits {
            train: 250,
            val: 60,
            test: 60,
        },
        seed: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = fgn_config(Variant::full());
    let ctx = c.context();
    let train = Dataset::new(c.train.clone(), &ctx, &c.embeddings, &cfg).unwrap();
    let val = Dataset::new(c.val.clone(), &ctx, &c.embeddings, &cfg).unwrap();
    (c, train, val)
}

fn model(seed: u64) -> QaModel {
    QaModel::new(fgn_config(Variant::full()), &mut Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn fixed_schedule_decays_on_its_period() {
    let (_, train, val) = small();
    let cfg = TrainConfig {
        max_epochs: 7,
        schedule: LrSchedule::Fixed { every: 3 },
        ..TrainConfig::default()
    };
    let log = fit(model(1), &train, &val, &cfg).unwrap().log;
    let lrs: Vec<f64> = log.iter().map(|r| r.lr).collect();
    let (a, b, c) = (1e-3, 1e-3 / 10.0, 1e-3 / 10.0 / 10.0);
    assert_eq!(lrs, vec![a, a, a, b, b, b, c]);
}

#[test]
fn batches_hold_four_instances_per_triplet() {
    let (_, train, val) = small();
    let cfg = TrainConfig {
        max_epochs: 1,
        ..TrainConfig::default()
    };
    let r = &fit(model(2), &train, &val, &cfg).unwrap().log[0];
    assert_eq!(r.triplets, 250);
    assert_eq!(r.batches, 3);
    assert_eq!(r.instances, 1000);
    assert_eq!((r.max_batch_triplets, r.max_batch_instances), (100, 400));
}

#[test]
fn the_best_validation_model_is_returned() {
    let (_, train, val) = small();
    let cfg = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let out = fit(model(3), &train, &val, &cfg).unwrap();
    let best = out
        .log
        .iter()
        .map(|r| r.val_accuracy)
        .fold(f64::MIN, f64::max);
    assert_eq!(out.best_val_accuracy, best);
    assert_eq!(out.log[out.best_epoch - 1].val_accuracy, best);
    assert_eq!(evaluate(&out.model, &val).unwrap().overall_accuracy, best);
}

#[test]
fn callback_sees_every_epoch() {
    let (_, train, val) = small();
    let cfg = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let mut seen = Vec::new();
    let out = fit_with(model(4), &train, &val, &cfg, |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    assert_eq!(log_to_jsonl(&out.log).lines().count(), 3);
}

#[test]
fn checkpoints_restore_identical_scores() {
    let (c, train, val) = small();
    let cfg = TrainConfig {
        max_epochs: 2,
        ..TrainConfig::default()
    };
    let trained = fit(model(5), &train, &val, &cfg).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_checkpoint(&trained, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let test = Dataset::new(
        c.test.clone(),
        &c.context(),
        &c.embeddings,
        trained.config(),
    )
    .unwrap();
    assert_eq!(
        evaluate(&trained, &test).unwrap(),
        evaluate(&back, &test).unwrap()
    );
}

#[test]
fn invalid_configs_are_refused() {
    let (_, train, val) = small();
    for cfg in [
        TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            lr_decay_factor: 1.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            schedule: LrSchedule::Fixed { every: 0 },
            ..TrainConfig::default()
        },
    ] {
        assert!(fit(model(6), &train, &val, &cfg).is_err());
    }
}
