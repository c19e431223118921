//! Seeded train/dev/test partitioning of document ids.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for ratio sums and for flooring `n * ratio`.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl CorpusSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }
}

/// Partition sizes: `floor(n * ratio)` each, then the leftover documents go
/// to train, then dev, one at a time.
pub fn partition_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    // `as usize` truncates, which is floor for the non-negative products here.
    let mut sizes = ratios.map(|r| (n as f64 * r + EPS) as usize);
    let mut remainder = n.saturating_sub(sizes.iter().sum());
    let mut slot = 0;
    while remainder > 0 {
        sizes[slot % 2] += 1;
        remainder -= 1;
        slot += 1;
    }
    sizes
}

/// Deterministic split. Ids are sorted before shuffling, so the result only
/// depends on the id set, the ratios and the seed.
pub fn split_corpus<S: AsRef<str>>(doc_ids: &[S], ratios: [f64; 3], seed: u64) -> Result<CorpusSplit> {
    if doc_ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::InvalidRatios(format!("{ratios:?}: every ratio must be positive")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > EPS {
        return Err(Error::InvalidRatios(format!("{ratios:?} sum to {sum}, not 1")));
    }
    let mut seen = BTreeSet::new();
    for id in doc_ids {
        if !seen.insert(id.as_ref()) {
            return Err(Error::DuplicateDocument(id.as_ref().into()));
        }
    }

    let mut ids: Vec<String> = seen.into_iter().map(String::from).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let [n_train, n_dev, _] = partition_sizes(ids.len(), ratios);
    let test = ids.split_off(n_train + n_dev);
    let dev = ids.split_off(n_train);
    Ok(CorpusSplit {
        seed,
        ratios,
        train: ids,
        dev,
        test,
    })
}
