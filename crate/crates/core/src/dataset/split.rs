use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("need at least 2 items to split, got {0}")]
    TooFew(usize),
    #[error("split ratio must be in (0, 1), got {0}")]
    Ratio(f64),
}

/// Seeded shuffle, then the first `round(ratio * n)` items become the train set.
pub fn split_dataset<T>(mut items: Vec<T>, ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), SplitError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::Ratio(ratio));
    }
    if items.len() < 2 {
        return Err(SplitError::TooFew(items.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let n_train = (ratio * items.len() as f64).round() as usize;
    let test = items.split_off(n_train);
    Ok((items, test))
}
