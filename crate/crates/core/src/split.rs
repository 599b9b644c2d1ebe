//! Seeded train/test splits of question ids.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("split ratio {0} outside [0, 1]")]
    BadRatio(f64),
    #[error("id {0} is in both the training and the test split")]
    Overlap(String),
    #[error("id {0} is not a known question")]
    UnknownId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffles ids with a seeded generator and puts `round(ratio · m)` of them
/// in the training part. Both parts keep the input order.
pub fn random_split(ids: &[String], train_ratio: f64, seed: u64) -> Result<Split, SplitError> {
    if !(0.0..=1.0).contains(&train_ratio) {
        return Err(SplitError::BadRatio(train_ratio));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_ratio * ids.len() as f64).round() as usize;
    let mut in_train = vec![false; ids.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = ids.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok(Split {
        train: train.into_iter().map(|(id, _)| id).collect(),
        test: test.into_iter().map(|(id, _)| id).collect(),
    })
}

/// Checks an explicit split against the known ids.
pub fn explicit_split(
    known: &[String],
    train: Vec<String>,
    test: Vec<String>,
) -> Result<Split, SplitError> {
    let known: HashSet<&str> = known.iter().map(String::as_str).collect();
    for id in train.iter().chain(&test) {
        if !known.contains(id.as_str()) {
            return Err(SplitError::UnknownId(id.clone()));
        }
    }
    let train_set: HashSet<&str> = train.iter().map(String::as_str).collect();
    if let Some(id) = test.iter().find(|id| train_set.contains(id.as_str())) {
        return Err(SplitError::Overlap(id.clone()));
    }
    Ok(Split { train, test })
}
