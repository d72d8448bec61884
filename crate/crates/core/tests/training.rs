use hogrl::metrics::auc;
use hogrl::model::predict_proba;
use hogrl::synth::{generate, CamouflageSpec, SyntheticGraph};
use hogrl::training::{prepare_inputs, split_for, train, BatchSize, TrainConfig};

fn toy() -> SyntheticGraph {
    generate(&CamouflageSpec {
        n_benign: 120,
        n_rings: 8,
        ring_size: 3,
        depth: 1,
        benign_density: 2.0,
        feature_dim: 4,
        class_separation: 4.0,
        noise_sigma: 0.5,
        seed: 5,
    })
    .unwrap()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        eval_every: 10,
        batch_size: BatchSize::Full,
        layers: 3,
        hidden_dim: 8,
        head_hidden: vec![8],
        lr: 1e-2,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_toy_is_fit() {
    let data = toy();
    let cfg = small_config();
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let out = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    let probs = predict_proba(&inputs, &out.checkpoint.params, &out.checkpoint.model).unwrap();
    let scores: Vec<f64> = masks.train.iter().map(|&v| probs[v]).collect();
    let train_auc = auc(&scores, &data.labels.targets(&masks.train).unwrap()).unwrap();
    assert!(train_auc >= 0.99, "train AUC {train_auc}");
}

#[test]
fn loss_decreases_early() {
    let data = toy();
    let cfg = TrainConfig { epochs: 21, dropout: 0.0, ..small_config() };
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let out = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    let h = &out.loss_history;
    let rises = h.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 5, "{h:?}");
    assert!(h[20] < h[0]);
}

#[test]
fn best_checkpoint_holds_the_maximum_validation_auc() {
    let data = toy();
    let cfg = TrainConfig { epochs: 60, eval_every: 5, ..small_config() };
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let out = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    let best = out.checkpoint.best.unwrap();
    let max = out.reports.iter().map(|r| r.val.auc).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best.val.auc, max);
    let first = out.reports.iter().find(|r| r.val.auc == max).unwrap();
    assert_eq!(best.epoch, first.epoch);
    assert_eq!(out.reports.len(), 12);

    // The stored parameters reproduce the stored validation metrics.
    let again = hogrl::training::evaluate_nodes(
        &inputs,
        &out.checkpoint.params,
        &out.checkpoint.model,
        &data.labels,
        &masks.val,
        cfg.threshold,
    )
    .unwrap();
    assert_eq!(again, best.val);
}

#[test]
fn zero_epochs_returns_initialization() {
    let data = toy();
    let cfg = TrainConfig { epochs: 0, ..small_config() };
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let out = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    assert!(out.reports.is_empty());
    assert!(out.checkpoint.best.is_none());
    let init = hogrl::ModelParams::init(&out.checkpoint.model, cfg.seed).unwrap();
    assert_eq!(out.checkpoint.params, init);
}

#[test]
fn runs_are_deterministic() {
    let data = toy();
    let cfg = TrainConfig { epochs: 30, batch_size: BatchSize::Nodes(20), ..small_config() };
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let a = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    let b = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.loss_history, b.loss_history);
    let strip = |r: &hogrl::training::EpochReport| (r.epoch, r.train_loss.to_bits(), r.val);
    assert_eq!(
        a.reports.iter().map(strip).collect::<Vec<_>>(),
        b.reports.iter().map(strip).collect::<Vec<_>>()
    );
}

#[test]
fn class_weighting_trains() {
    let data = toy();
    let cfg = TrainConfig { epochs: 20, class_weighting: true, ..small_config() };
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let out = train(&inputs, &data.labels, &masks, &cfg).unwrap();
    assert!(out.loss_history.iter().all(|l| l.is_finite()));
}

#[test]
fn mismatched_layers_are_rejected() {
    let data = toy();
    let cfg = small_config();
    let inputs = prepare_inputs(&data.graphs, &data.features, &cfg).unwrap();
    let masks = split_for(&data.labels, &cfg).unwrap();
    let other = TrainConfig { layers: 4, ..cfg };
    assert!(train(&inputs, &data.labels, &masks, &other).is_err());
}
