use rand::seq::SliceRandom;

use super::QAItem;
use crate::error::{Result, VrnError};
use crate::rng;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<QAItem>,
    pub valid: Vec<QAItem>,
    pub test: Vec<QAItem>,
}

/// Seeded shuffle, then `floor(ratio * n)` items to validation and test and
/// the remainder to train.
pub fn split(items: Vec<QAItem>, ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !(0.0..=1.0).contains(r)) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(VrnError::Config(format!("split ratios {tr}, {va}, {te} must be in [0, 1] and sum to 1")));
    }
    let mut items = items;
    items.shuffle(&mut rng::substream(seed, rng::stream::SPLIT));
    let n = items.len() as f64;
    let n_valid = (va * n).floor() as usize;
    let n_test = (te * n).floor() as usize;
    let test = items.split_off(items.len() - n_test);
    let valid = items.split_off(items.len() - n_valid);
    Ok(DatasetSplit { train: items, valid, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;

    fn items(n: usize) -> Vec<QAItem> {
        (0..n)
            .map(|i| QAItem {
                tokens: vec![format!("w{i}")],
                mention: None,
                source: None,
                topic: None,
                answers: vec![EntityId(i)],
                hops: 1,
                type_id: String::new(),
            })
            .collect()
    }

    #[test]
    fn all_to_train() {
        let s = split(items(7), (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (7, 0, 0));
    }

    #[test]
    fn floor_sizes_and_remainder() {
        let s = split(items(11), (0.5, 0.25, 0.25), 1).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (7, 2, 2));
        let mut all: Vec<_> = s.train.iter().chain(&s.valid).chain(&s.test).map(|i| i.answers[0]).collect();
        all.sort();
        assert_eq!(all, (0..11).map(EntityId).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_and_validated() {
        assert_eq!(split(items(20), (0.8, 0.1, 0.1), 4).unwrap(), split(items(20), (0.8, 0.1, 0.1), 4).unwrap());
        assert!(split(items(3), (0.5, 0.2, 0.2), 1).is_err());
    }
}
