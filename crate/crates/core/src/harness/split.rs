use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::models::Dataset;
use crate::rng;

const TAG_SPLIT: u64 = 0x5311;

/// Shuffled train/test partition with round(fraction·N) training
/// observations, clamped so both parts are nonempty. Each part keeps the
/// original observation order.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("split", format!("must lie in (0, 1), got {fraction}")));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("split", format!("need at least 2 observations, got {n}")));
    }
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::substream(seed, &[TAG_SPLIT]));
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(train), data.subset(test)))
}
