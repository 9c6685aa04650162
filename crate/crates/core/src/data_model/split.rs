//! Seeded train/test partitioning.

use rand::seq::SliceRandom;

use super::{CohortDataset, DataError};
use crate::rng::seeded_rng;

/// Shuffles with a seeded generator and cuts at `round(ratio * n)`.
///
/// With at least two records both partitions are non-empty.
pub fn split(
    data: &CohortDataset,
    ratio: f64,
    seed: u64,
) -> Result<(CohortDataset, CohortDataset), DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidRatio(ratio));
    }
    if data.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, 0));

    let mut cut = (ratio * n as f64).round() as usize;
    if n >= 2 {
        cut = cut.clamp(1, n - 1);
    } else {
        cut = n;
    }
    let take = |idx: &[usize]| CohortDataset {
        records: idx.iter().map(|&i| data.records[i].clone()).collect(),
        provenance: data.provenance,
    };
    Ok((take(&order[..cut]), take(&order[cut..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::PatientRecord;

    fn cohort(n: usize) -> CohortDataset {
        CohortDataset::from_patients(
            (0..n)
                .map(|i| PatientRecord::with_dose(format!("p{i}"), 10.0 + i as f64))
                .collect(),
        )
        .unwrap()
    }

    fn ids(d: &CohortDataset) -> Vec<String> {
        d.records.iter().map(|r| r.subject.id().to_string()).collect()
    }

    #[test]
    fn cardinalities() {
        let (train, test) = split(&cohort(10), 0.8, 7).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all = ids(&train);
        all.extend(ids(&test));
        all.sort();
        let mut expected = ids(&cohort(10));
        expected.sort();
        assert_eq!(all, expected);

        let (train, test) = split(&cohort(5700), 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (4560, 1140));
    }

    #[test]
    fn same_seed_same_partition() {
        let data = cohort(50);
        let a = split(&data, 0.8, 3).unwrap();
        let b = split(&data, 0.8, 3).unwrap();
        assert_eq!(a, b);
        let c = split(&data, 0.8, 4).unwrap();
        assert_ne!(ids(&a.0), ids(&c.0));
    }

    #[test]
    fn ratio_domain() {
        for r in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(split(&cohort(4), r, 1), Err(DataError::InvalidRatio(_))));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn disjoint_exhaustive(n in 1usize..200, ratio in 0.01f64..0.99, seed in 0u64..1000) {
                let data = cohort(n);
                let (train, test) = split(&data, ratio, seed).unwrap();
                prop_assert_eq!(train.len() + test.len(), n);
                let mut all = ids(&train);
                all.extend(ids(&test));
                all.sort();
                all.dedup();
                prop_assert_eq!(all.len(), n);
            }
        }
    }
}
