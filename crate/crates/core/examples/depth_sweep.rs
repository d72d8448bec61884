//! Test AUC of the full model and the aggregator-only model on camouflage
//! graphs, averaged over seeds.
//!
//! `cargo run --release --example depth_sweep -- [walk|hop] [separation] [epochs]`

use hogrl::propagation::PropagationMode;
use hogrl::synth::{generate, CamouflageSpec};
use hogrl::training::{evaluate_nodes, prepare_inputs, split_for, train, BatchSize, TrainConfig};

fn main() -> hogrl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mode: PropagationMode = args.get(1).map_or("walk", String::as_str).parse()?;
    let separation: f64 = args.get(2).map_or(0.6, |s| s.parse().expect("separation"));
    let epochs: usize = args.get(3).map_or(200, |s| s.parse().expect("epochs"));

    let variants = [("aggregator-only", 4, 0.0), ("full L=4", 4, 1.0), ("full L=7", 7, 1.0)];
    let mut sums = [0.0; 3];
    let seeds = 5;
    for seed in 0..seeds {
        let data = generate(&CamouflageSpec {
            n_rings: 40,
            ring_size: 4,
            depth: 3,
            class_separation: separation,
            seed,
            ..CamouflageSpec::default()
        })?;
        for (i, &(name, layers, gamma)) in variants.iter().enumerate() {
            let cfg = TrainConfig {
                epochs,
                batch_size: BatchSize::Full,
                hidden_dim: 32,
                head_hidden: vec![32],
                layers,
                gamma,
                mode,
                seed,
                ..TrainConfig::default()
            };
            let inputs = prepare_inputs(&data.graphs, &data.features, &cfg)?;
            let masks = split_for(&data.labels, &cfg)?;
            let out = train(&inputs, &data.labels, &masks, &cfg)?;
            let ck = &out.checkpoint;
            let test = evaluate_nodes(&inputs, &ck.params, &ck.model, &data.labels, &masks.test, cfg.threshold)?;
            println!("seed {seed} {name:16} val {:.4} test {:.4}", ck.best.map_or(f64::NAN, |b| b.val.auc), test.auc);
            sums[i] += test.auc;
        }
    }
    for (i, (name, _, _)) in variants.iter().enumerate() {
        println!("mean {name:16} {:.4}", sums[i] / seeds as f64);
    }
    Ok(())
}
