use hogrl::graph::{homophily_distribution, node_homophily, FRAUD};
use hogrl::propagation::{hop_rings, layerwise_homophily};
use hogrl::synth::{describe, generate, CamouflageSpec};

fn spec(depth: usize, ring_size: usize, seed: u64) -> CamouflageSpec {
    CamouflageSpec {
        n_benign: 150,
        n_rings: 6,
        ring_size,
        depth,
        benign_density: 2.5,
        feature_dim: 3,
        seed,
        ..CamouflageSpec::default()
    }
}

#[test]
fn fraud_pairs_sit_at_the_described_distance() {
    for depth in 0..4 {
        let spec = spec(depth, 3, depth as u64);
        let data = generate(&spec).unwrap();
        let g = &data.graphs.relations()[0];
        let d = describe(&spec).fraud_pair_distance;
        let rings = hop_rings(g, d + 1).unwrap();
        for r in 0..spec.n_rings {
            for a in spec.ring(r) {
                for b in spec.ring(r) {
                    if a != b {
                        assert!(rings.exact(a, d).contains(&b), "depth {depth}: {a} -> {b}");
                    }
                }
                if depth >= 1 {
                    assert_eq!(node_homophily(g, &data.labels, a).unwrap(), Some(0.0));
                }
            }
        }
    }
}

#[test]
fn ring_partners_appear_in_the_third_order_ring() {
    let spec = spec(2, 4, 9);
    let data = generate(&spec).unwrap();
    let rings = hop_rings(&data.graphs.relations()[0], 3).unwrap();
    for v in spec.ring(0) {
        let ring = rings.ring(v, 3);
        assert!(spec.ring(0).all(|u| ring.contains(&u)));
    }
}

#[test]
fn decoupled_beats_mixed_at_the_ring_distance() {
    for seed in 0..5 {
        let spec = spec(3, 4, seed);
        let data = generate(&spec).unwrap();
        let g = &data.graphs.relations()[0];
        let layers = layerwise_homophily(g, &data.labels, 4, 10).unwrap();
        let at = layers.layer(4);
        assert!(at.decoupled.mean.unwrap() > at.mixed.mean.unwrap(), "seed {seed}");
        assert_eq!(layers.fraud_nodes, data.labels.count(FRAUD));
    }
}

#[test]
fn default_spec_matches_the_camouflage_pattern() {
    let data = generate(&CamouflageSpec::default()).unwrap();
    let report = homophily_distribution(&data.graphs.relations()[0], &data.labels, 10).unwrap();
    assert!(report.benign.mean.unwrap() >= 0.8);
    assert_eq!(report.fraud.mean, Some(0.0));
    assert_eq!(report.fraud.histogram.counts[0], data.labels.count(FRAUD));
}
