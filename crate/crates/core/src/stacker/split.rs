use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StackError;

/// Minimum dataset size accepted by [`split_base_stack`].
pub const MIN_SPLIT_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitProtocol {
    pub base_fraction: f64,
    pub stack_folds: usize,
    pub seed: u64,
}

impl Default for SplitProtocol {
    fn default() -> Self {
        SplitProtocol {
            base_fraction: 0.6,
            stack_folds: 5,
            seed: 0,
        }
    }
}

/// Disjoint base-learner and stacker id sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStackSplit {
    pub protocol: SplitProtocol,
    pub base_ids: Vec<String>,
    pub stack_ids: Vec<String>,
}

impl BaseStackSplit {
    /// Both sides duplicate-free and disjoint.
    pub fn validate(&self) -> Result<(), StackError> {
        let mut base = HashSet::new();
        for id in &self.base_ids {
            if !base.insert(id.as_str()) {
                return Err(StackError::Protocol(format!(
                    "id {id:?} repeated in base set"
                )));
            }
        }
        let mut stack = HashSet::new();
        for id in &self.stack_ids {
            if !stack.insert(id.as_str()) {
                return Err(StackError::Protocol(format!(
                    "id {id:?} repeated in stack set"
                )));
            }
            if base.contains(id.as_str()) {
                return Err(StackError::Protocol(format!(
                    "id {id:?} is in both the base and the stack set"
                )));
            }
        }
        Ok(())
    }
}

/// Seeded shuffle, then the first `round(base_fraction · N)` ids go to the
/// base learner.
pub fn split_base_stack(
    ids: &[String],
    protocol: &SplitProtocol,
) -> Result<BaseStackSplit, StackError> {
    if ids.len() < MIN_SPLIT_SIZE {
        return Err(StackError::TooFew {
            what: "ids to split",
            got: ids.len(),
            min: MIN_SPLIT_SIZE,
        });
    }
    if !(protocol.base_fraction > 0.0 && protocol.base_fraction < 1.0) {
        return Err(StackError::Config(format!(
            "base_fraction must be in (0, 1), got {}",
            protocol.base_fraction
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(StackError::Protocol(format!("duplicate id {dup:?}")));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(protocol.seed));
    let n_base = (protocol.base_fraction * ids.len() as f64).round() as usize;
    let stack_ids = shuffled.split_off(n_base);
    Ok(BaseStackSplit {
        protocol: *protocol,
        base_ids: shuffled,
        stack_ids,
    })
}

/// Partition into `k` folds whose sizes differ by at most one.
pub fn make_folds(
    stack_ids: &[String],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, StackError> {
    if k < 2 {
        return Err(StackError::Config(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if stack_ids.len() < k {
        return Err(StackError::TooFew {
            what: "stack ids for the fold count",
            got: stack_ids.len(),
            min: k,
        });
    }
    let mut shuffled = stack_ids.to_vec();
    // Separate stream from the base/stack shuffle.
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f01d));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in shuffled.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("id{i}")).collect()
    }

    #[test]
    fn ten_ids_split_six_four() {
        let s = split_base_stack(&ids(10), &SplitProtocol::default()).unwrap();
        assert_eq!(s.base_ids.len(), 6);
        assert_eq!(s.stack_ids.len(), 4);
        s.validate().unwrap();
        let mut all: Vec<_> = s.base_ids.iter().chain(&s.stack_ids).cloned().collect();
        all.sort();
        let mut expected = ids(10);
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let p = SplitProtocol {
            seed: 9,
            ..SplitProtocol::default()
        };
        assert_eq!(
            split_base_stack(&ids(50), &p).unwrap(),
            split_base_stack(&ids(50), &p).unwrap()
        );
        let q = SplitProtocol { seed: 10, ..p };
        assert_ne!(
            split_base_stack(&ids(50), &p).unwrap().base_ids,
            split_base_stack(&ids(50), &q).unwrap().base_ids
        );
    }

    #[test]
    fn split_guards() {
        assert!(matches!(
            split_base_stack(&ids(9), &SplitProtocol::default()),
            Err(StackError::TooFew { .. })
        ));
        let mut dup = ids(12);
        dup[3] = dup[0].clone();
        assert!(matches!(
            split_base_stack(&dup, &SplitProtocol::default()),
            Err(StackError::Protocol(_))
        ));
    }

    #[test]
    fn fold_sizes() {
        let folds = make_folds(&ids(40), 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 8));
        let folds = make_folds(&ids(42), 5, 1).unwrap();
        let mut sizes: Vec<_> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![8, 8, 8, 9, 9]);
        assert!(make_folds(&ids(4), 5, 1).is_err());
    }

    #[test]
    fn overlapping_split_rejected() {
        let s = BaseStackSplit {
            protocol: SplitProtocol::default(),
            base_ids: vec!["a".into(), "b".into()],
            stack_ids: vec!["b".into(), "c".into()],
        };
        assert!(matches!(s.validate(), Err(StackError::Protocol(_))));
    }

    proptest::proptest! {
        #[test]
        fn folds_partition(n in 5usize..200, k in 2usize..6, seed in 0u64..50) {
            let all = ids(n);
            let folds = make_folds(&all, k, seed).unwrap();
            let mut union: Vec<String> = folds.concat();
            union.sort();
            let mut sorted = all.clone();
            sorted.sort();
            proptest::prop_assert_eq!(union, sorted);
            let max = folds.iter().map(Vec::len).max().unwrap();
            let min = folds.iter().map(Vec::len).min().unwrap();
            proptest::prop_assert!(max - min <= 1);
        }

        #[test]
        fn split_disjoint_cover(n in 10usize..300, seed in 0u64..50) {
            let s = split_base_stack(&ids(n), &SplitProtocol { seed, ..SplitProtocol::default() }).unwrap();
            s.validate().unwrap();
            proptest::prop_assert_eq!(s.base_ids.len() + s.stack_ids.len(), n);
            proptest::prop_assert_eq!(s.base_ids.len(), (0.6 * n as f64).round() as usize);
        }
    }
}
