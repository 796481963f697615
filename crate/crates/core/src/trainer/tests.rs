use super::*;
use crate::dataio::{generate_toy, DatasetManifest, Shape};
use crate::diffcore::grad_check;
use crate::tsd::ViewConfig;

fn micro_dataset() -> Dataset {
    generate_toy(&DatasetManifest {
        known: vec![Shape::Sphere, Shape::Cube, Shape::Cone],
        unknown: vec![Shape::Torus],
        per_class: 10,
        points: 16,
        seed: 11,
        ..DatasetManifest::default()
    })
    .unwrap()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        point_widths: vec![8, 16],
        feature_dim: 8,
        pretrain_epochs: 3,
        epochs: 2,
        batch_size: 4,
        views: ViewConfig { count: 3, ..ViewConfig::default() },
        ..TrainConfig::default()
    }
}

#[test]
fn cls_loss_examples() {
    assert!((cls_loss(&[0.3; 5], 2).unwrap() - 5f64.ln()).abs() < 1e-12);
    let l = cls_loss(&[1.0, -1.0, -1.0, -1.0, -1.0], 0).unwrap();
    let e = std::f64::consts::E;
    assert!((l + (e / (e + 4.0 / e)).ln()).abs() < 1e-12);
    assert!((l - 0.432653).abs() < 1e-6);
    assert!(cls_loss(&[0.0; 5], 4).is_err());
}

#[test]
fn cls_loss_is_shift_invariant() {
    let z = [0.2, -0.7, 0.9, 0.1];
    let shifted: Vec<f64> = z.iter().map(|v| v + 37.5).collect();
    for c in 0..3 {
        assert!((cls_loss(&z, c).unwrap() - cls_loss(&shifted, c).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn total_loss_examples() {
    let t = LossTerms { cls: 1.0, high: 0.5, synth: 0.7, margin: 2.0 };
    let w = LossWeights { alpha: 0.1, beta: 0.01, gamma: 0.3 };
    assert!((total_loss(&t, &w) - 1.657).abs() < 1e-12);
    assert_eq!(total_loss(&t, &LossWeights::CLOSED_SET), 1.0);
    assert_eq!(total_loss(&LossTerms::default(), &w), 0.0);
}

#[test]
fn high_part_loss_matches_full_object_and_gradients() {
    let d = micro_dataset();
    let model = Model::new(small_config().encoder(3), 5).unwrap();
    let s = d.known(Split::Train).next().unwrap();
    let c = s.label().unwrap();
    let full = cls_loss(&model.infer(&s.cloud).unwrap().logits, c).unwrap();
    assert_eq!(high_saliency_loss(&model, &s.cloud, c).unwrap(), full);

    let part = s.cloud.subset(&(0..10).collect::<Vec<_>>());
    let mut tape = Tape::new();
    let fw = model.forward(&mut tape, &part).unwrap();
    let loss = tape.soft_cross_entropy(fw.logits, SoftLabel::one_hot(c, 4).probs()).unwrap();
    let mut acc = model.params().zeros_like();
    tape.backward(loss).unwrap().accumulate_params(&tape, &mut acc, 1.0);
    for id in model.params().ids() {
        let err = grad_check(
            |theta| {
                let mut m = model.clone();
                *m.params_mut().get_mut(id) = theta.clone();
                high_saliency_loss(&m, &part, c).unwrap()
            },
            model.params().get(id),
            &acc[id.index()],
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-4, "{err}");
    }
}

#[test]
fn adam_minimises_a_quadratic() {
    let mut store = ParamStore::new();
    let id = store.add("x", Array::vector(vec![3.0, -2.0]));
    let mut adam = Adam::new(&store);
    for _ in 0..2000 {
        let g = Array::vector(store.get(id).data().iter().map(|x| 2.0 * x).collect());
        adam.step(&mut store, &[g], 0.01);
    }
    assert!(store.get(id).data().iter().all(|x| x.abs() < 1e-2));
    assert_eq!(cosine_lr(1e-3, 0, 10), 1e-3);
    assert!(cosine_lr(1e-3, 10, 10).abs() < 1e-18);
}

#[test]
fn full_pipeline_gradient_matches_finite_differences() {
    let d = micro_dataset();
    let mut config = small_config();
    config.point_widths = vec![8];
    config.p_replace = 1.0;
    config.mix_count = 2;
    config.synth_ratio = 1.0;
    let model = Model::new(config.encoder(3), 9).unwrap();
    let mut trainer = Trainer::new(&d, config.clone()).unwrap();
    trainer.refresh_saliency(&model).unwrap();
    // One object from each of two classes.
    let first = trainer.train_objects()[0];
    let other = (0..trainer.train_objects().len())
        .find(|&p| d.samples[trainer.train_objects()[p]].label() != d.samples[first].label())
        .unwrap();
    let weights = LossWeights { alpha: config.alpha, beta: config.beta, gamma: config.gamma };
    let mut plan = trainer.plan_batch(&[0, other], weights, &mut stream_rng(3, 0)).unwrap();
    let eval = trainer.batch_eval(&model, &mut plan).unwrap();
    assert!(eval.terms.high > 0.0 && eval.terms.synth > 0.0 && eval.terms.margin > 0.0);
    assert_eq!(plan.synthetic().len(), 2);
    let mut worst: f64 = 0.0;
    for id in model.params().ids() {
        let err = grad_check(
            |theta| {
                let mut m = model.clone();
                *m.params_mut().get_mut(id) = theta.clone();
                trainer.batch_loss(&m, &mut plan.clone()).unwrap()
            },
            model.params().get(id),
            &eval.grads[id.index()],
            1e-6,
        )
        .unwrap();
        worst = worst.max(err);
    }
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn training_is_deterministic() {
    let d = micro_dataset();
    let config = small_config();
    let (a, ra) = train(&d, &config).unwrap();
    let (b, rb) = train(&d, &config).unwrap();
    assert_eq!(a.to_checkpoint().to_text(), b.to_checkpoint().to_text());
    assert_eq!(ra.to_csv(), rb.to_csv());
    assert_eq!(ra.rows.len(), 5);
    assert!(ra.rows.iter().all(|r| r.total.is_finite()));
}

#[test]
fn zero_weights_repeat_closed_set_training() {
    let d = micro_dataset();
    let mut config = small_config();
    let (model, _) = pretrain(&d, &config).unwrap();
    config.alpha = 0.0;
    config.beta = 0.0;
    config.gamma = 0.0;
    let mut a = model.clone();
    let ra = continue_closed_set(&mut a, &d, &config, config.epochs).unwrap();
    let mut b = model.clone();
    let rb = train_sasep(&mut b, &d, &config, None).unwrap();
    assert_eq!(ra.step_losses, rb.step_losses);
    assert_eq!(a.to_checkpoint().to_text(), b.to_checkpoint().to_text());
}

#[test]
fn two_class_pretraining_separates() {
    let d = generate_toy(&DatasetManifest {
        known: vec![Shape::Sphere, Shape::Cube],
        unknown: vec![Shape::Torus],
        per_class: 50,
        points: 128,
        seed: 5,
        ..DatasetManifest::default()
    })
    .unwrap();
    let config = TrainConfig {
        point_widths: vec![16, 32, 64],
        feature_dim: 32,
        pretrain_epochs: 60,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let init = Model::new(config.encoder(2), config.seed).unwrap();
    let val_loss = |m: &Model| -> f64 {
        let v: Vec<f64> =
            d.known(Split::Val).map(|s| cls_loss(&m.infer(&s.cloud).unwrap().logits, s.label().unwrap()).unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (model, report) = pretrain(&d, &config).unwrap();
    assert!(val_loss(&model) < val_loss(&init));
    let m = evaluate_split(&model, &d, Split::Test, Scorer::Mls).unwrap();
    assert!(m.acc >= 0.99, "{m:?} {report:?}");
}

#[test]
fn missing_or_stale_saliency_is_rejected() {
    let d = micro_dataset();
    let config = small_config();
    let (mut model, _) = pretrain(&d, &config).unwrap();
    assert!(matches!(train_sasep(&mut model.clone(), &d, &config, None), Err(Error::NotFound(_))));
    let cache = cache_saliency(&model, &d).unwrap();
    assert_eq!(cache.len(), d.known(Split::Train).count());
    let stale = cache_saliency(&Model::new(config.encoder(3), 99).unwrap(), &d).unwrap();
    assert!(matches!(train_sasep(&mut model, &d, &config, Some(&stale)), Err(Error::ChecksumMismatch { .. })));
}

#[test]
fn divergence_names_the_epoch() {
    let d = micro_dataset();
    let config = TrainConfig { lr: 1e300, ..small_config() };
    match pretrain(&d, &config) {
        Err(Error::Diverged { phase, epoch, .. }) => assert_eq!((phase, epoch >= 1), ("pretrain", true)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn report_csv_schema() {
    let r = TrainReport {
        rows: vec![EpochRow { epoch: 1, terms: LossTerms::default(), total: 0.5, val_acc: 1.0 }],
        step_losses: vec![0.5],
    };
    let csv = r.to_csv();
    assert_eq!(csv.lines().next(), Some("epoch,l_cls,l_h,l_s,l_m,total,val_acc"));
    assert_eq!(csv.lines().nth(1), Some("1,0.000000,0.000000,0.000000,0.000000,0.500000,1.000000"));
}
