use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{LabelVector, SplitMasks, BENIGN, FRAUD};

/// Train/validation/test fractions.
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.4, 0.4, 0.2);

/// Per-class proportional split of the labeled nodes.
///
/// Each class contributes `floor(train · n_c)` train and `floor(val · n_c)`
/// validation nodes; the rounding residue goes to test. Deterministic for a
/// fixed seed.
pub fn stratified_split(
    labels: &LabelVector,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitMasks> {
    let (train_frac, val_frac, test_frac) = fractions;
    if [train_frac, val_frac, test_frac].iter().any(|f| !(0.0..=1.0).contains(f))
        || (train_frac + val_frac + test_frac - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidConfig(format!(
            "split fractions {train_frac}, {val_frac}, {test_frac} must be in [0, 1] and sum to 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = SplitMasks {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in [BENIGN, FRAUD] {
        let mut nodes = labels.nodes_of(class);
        if nodes.len() < 3 {
            return Err(Error::TooFewInClass {
                class,
                count: nodes.len(),
            });
        }
        nodes.shuffle(&mut rng);
        let n = nodes.len() as f64;
        let n_train = (train_frac * n + 1e-9).floor() as usize;
        let n_val = (val_frac * n + 1e-9).floor() as usize;
        masks.train.extend_from_slice(&nodes[..n_train]);
        masks.val.extend_from_slice(&nodes[n_train..n_train + n_val]);
        masks.test.extend_from_slice(&nodes[n_train + n_val..]);
    }
    masks.train.sort_unstable();
    masks.val.sort_unstable();
    masks.test.sort_unstable();
    Ok(masks)
}
