//! Fixed, seeded train/test split shared by every model in an experiment.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("need at least 2 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("fraction {fraction} of {n} samples leaves an empty {side} set")]
    Degenerate { n: usize, fraction: f64, side: &'static str },
}

/// Disjoint, exhaustive train/test index sets over `[0, n)`. Both index lists
/// are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitSpec {
    pub fn len(&self) -> usize {
        self.train_indices.len() + self.test_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stable hash of the sample count and test indices; two evaluations are
    /// comparable only when their fingerprints match.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 * (self.test_indices.len() + 1));
        bytes.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for &i in &self.test_indices {
            bytes.extend_from_slice(&(i as u64).to_le_bytes());
        }
        crate::fnv1a64(&bytes)
    }
}

/// Number of training samples: `round(fraction * n)`, half away from zero.
pub fn train_count(n: usize, fraction: f64) -> usize {
    libm::round(fraction * n as f64) as usize
}

fn validate(n: usize, fraction: f64) -> Result<usize, SplitError> {
    if n < 2 {
        return Err(SplitError::TooFewSamples(n));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError::BadFraction(fraction));
    }
    let n_train = train_count(n, fraction);
    if n_train == 0 {
        return Err(SplitError::Degenerate { n, fraction, side: "train" });
    }
    if n_train == n {
        return Err(SplitError::Degenerate { n, fraction, side: "test" });
    }
    Ok(n_train)
}

/// Unstratified split from a seeded shuffle of `0..n`.
pub fn fixed_split(n: usize, seed: u64, fraction: f64) -> Result<SplitSpec, SplitError> {
    let n_train = validate(n, fraction)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(n_train);
    Ok(finish(seed, fraction, false, train.to_vec(), test.to_vec()))
}

/// Split that keeps class proportions. Per-class train counts are allocated
/// by largest remainder so the total still equals `round(fraction * n)`.
pub fn stratified_split(
    labels: &[usize],
    num_classes: usize,
    seed: u64,
    fraction: f64,
) -> Result<SplitSpec, SplitError> {
    let n = labels.len();
    let n_train = validate(n, fraction)?;
    let mut by_class: Vec<Vec<usize>> = (0..num_classes).map(|_| Vec::new()).collect();
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut quota: Vec<usize> = Vec::with_capacity(num_classes);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(num_classes);
    for (c, members) in by_class.iter().enumerate() {
        let ideal = fraction * members.len() as f64;
        let base = libm::floor(ideal) as usize;
        quota.push(base);
        remainders.push((ideal - base as f64, c));
    }
    let mut missing = n_train - quota.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            missing -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (members, &q) in by_class.iter_mut().zip(&quota) {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..q]);
        test.extend_from_slice(&members[q..]);
    }
    Ok(finish(seed, fraction, true, train, test))
}

fn finish(
    seed: u64,
    train_fraction: f64,
    stratified: bool,
    mut train_indices: Vec<usize>,
    mut test_indices: Vec<usize>,
) -> SplitSpec {
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    SplitSpec { seed, train_fraction, stratified, train_indices, test_indices }
}
