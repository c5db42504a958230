//! Deterministic stratified train/dev/test splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::corpus::{Cascade, LabelSet};
use super::{DataError, DataResult};

/// Positions into the cascade list for each part, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

const MIN_CASCADES: usize = 8;

/// Split cascades into train/dev/test: 10% (floored) to dev, then 3:1
/// train:test over the remainder, so train gets ⌊3r/4⌋ of the r leftovers.
/// Each class is shuffled and apportioned by largest remainder, keeping every
/// part's label mix within one cascade of proportional.
pub fn split(cascades: &[Cascade], seed: u64) -> DataResult<SplitIndices> {
    let n = cascades.len();
    if n < MIN_CASCADES {
        return Err(DataError::TooFewCascades {
            n,
            min: MIN_CASCADES,
        });
    }
    let dev_total = n / 10;
    let rest = n - dev_total;
    let train_total = 3 * rest / 4;
    let test_total = rest - train_total;
    for (which, size) in [("dev", dev_total), ("train", train_total), ("test", test_total)] {
        if size == 0 {
            return Err(DataError::EmptySplit { which, n });
        }
    }

    let label_set = LabelSet::covering(cascades.iter().map(|c| c.label));
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); label_set.n_classes()];
    for (i, cascade) in cascades.iter().enumerate() {
        let class = label_set
            .class_index(cascade.label)
            .expect("covering label set includes every label");
        pools[class].push(i);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }

    let class_sizes: Vec<usize> = pools.iter().map(Vec::len).collect();
    let dev_per_class = apportion(&class_sizes, dev_total);
    let leftovers: Vec<usize> = class_sizes
        .iter()
        .zip(&dev_per_class)
        .map(|(&size, &d)| size - d)
        .collect();
    let train_per_class = apportion(&leftovers, train_total);

    let mut out = SplitIndices {
        train: Vec::with_capacity(train_total),
        dev: Vec::with_capacity(dev_total),
        test: Vec::with_capacity(test_total),
    };
    for (class, pool) in pools.iter().enumerate() {
        let dev_end = dev_per_class[class];
        let train_end = dev_end + train_per_class[class];
        out.dev.extend_from_slice(&pool[..dev_end]);
        out.train.extend_from_slice(&pool[dev_end..train_end]);
        out.test.extend_from_slice(&pool[train_end..]);
    }
    out.train.sort_unstable();
    out.dev.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Largest-remainder apportionment of `target` items over pools, so each
/// share is the exact proportional quota rounded down or up. Ties go to the
/// earlier pool.
fn apportion(pool_sizes: &[usize], target: usize) -> Vec<usize> {
    let total: usize = pool_sizes.iter().sum();
    debug_assert!(target <= total);
    let mut shares: Vec<usize> = Vec::with_capacity(pool_sizes.len());
    let mut fractions: Vec<(usize, usize)> = Vec::with_capacity(pool_sizes.len());
    let mut assigned = 0;
    for (i, &size) in pool_sizes.iter().enumerate() {
        let numerator = target * size;
        shares.push(numerator / total);
        assigned += numerator / total;
        fractions.push((i, numerator % total));
    }
    fractions.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for &(i, _) in fractions.iter().take(target - assigned) {
        shares[i] += 1;
    }
    shares
}
