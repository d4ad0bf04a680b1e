use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_synthetic, DataError, Recording, SynthConfig};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.72, val: 0.18, test: 0.10 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), DataError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DataError::Config(format!("split ratios {r:?} must be non-negative")));
        }
        let s: f64 = r.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(DataError::Config(format!("split ratios sum to {s}, not 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Largest-remainder apportionment of `n` subjects; ties in the fractional
/// part go to the earlier split (train, then val, then test).
pub fn split_sizes(n: usize, ratios: &SplitRatios) -> Result<[usize; 3], DataError> {
    ratios.validate()?;
    let quotas = [ratios.train, ratios.val, ratios.test].map(|r| r * n as f64);
    let mut sizes = quotas.map(|q| q.floor() as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
    let assigned: usize = sizes.iter().sum();
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub seed: u64,
    pub n_epochs: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Recording>,
    pub val: Vec<Recording>,
    pub test: Vec<Recording>,
    /// In subject order.
    pub manifest: Vec<ManifestEntry>,
}

/// Generates `n_subjects` synthetic recordings (subject seeds drawn from
/// `master_seed`) and assigns them to disjoint splits.
pub fn make_dataset(
    n_subjects: usize,
    base: &SynthConfig,
    ratios: &SplitRatios,
    master_seed: u64,
) -> Result<Dataset, DataError> {
    let sizes = split_sizes(n_subjects, ratios)?;
    base.validate()?;
    let mut rng = SeededRng::new(master_seed);
    let seeds: Vec<u64> = (0..n_subjects).map(|_| rng.next_u64()).collect();
    let mut order: Vec<usize> = (0..n_subjects).collect();
    rng.shuffle(&mut order);
    let mut split_of = vec![Split::Train; n_subjects];
    for (pos, &subject) in order.iter().enumerate() {
        split_of[subject] = if pos < sizes[0] {
            Split::Train
        } else if pos < sizes[0] + sizes[1] {
            Split::Val
        } else {
            Split::Test
        };
    }

    let recordings: Vec<Recording> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut rec = generate_synthetic(&SynthConfig { seed, ..base.clone() })?;
            rec.subject_id = format!("subj{i:03}");
            Ok(rec)
        })
        .collect::<Result<_, DataError>>()?;

    let mut ds = Dataset { train: Vec::new(), val: Vec::new(), test: Vec::new(), manifest: Vec::new() };
    for ((rec, seed), split) in recordings.into_iter().zip(seeds).zip(split_of) {
        ds.manifest.push(ManifestEntry { subject_id: rec.subject_id.clone(), seed, n_epochs: rec.n_epochs(), split });
        match split {
            Split::Train => ds.train.push(rec),
            Split::Val => ds.val.push(rec),
            Split::Test => ds.test.push(rec),
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_split_of_twenty() {
        assert_eq!(split_sizes(20, &SplitRatios::default()).unwrap(), [14, 4, 2]);
        assert_eq!(split_sizes(2056, &SplitRatios::default()).unwrap(), [1480, 370, 206]);
    }

    #[test]
    fn all_train() {
        let r = SplitRatios { train: 1.0, val: 0.0, test: 0.0 };
        assert_eq!(split_sizes(7, &r).unwrap(), [7, 0, 0]);
    }

    #[test]
    fn bad_ratios() {
        let r = SplitRatios { train: 0.5, val: 0.2, test: 0.2 };
        assert!(matches!(split_sizes(10, &r), Err(DataError::Config(_))));
    }

    #[test]
    fn dataset_deterministic_and_disjoint() {
        let base = SynthConfig { n_epochs: 2, ..Default::default() };
        let a = make_dataset(20, &base, &SplitRatios::default(), 5).unwrap();
        let b = make_dataset(20, &base, &SplitRatios::default(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (14, 4, 2));
        let mut ids: Vec<&str> =
            a.train.iter().chain(&a.val).chain(&a.test).map(|r| r.subject_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
        let c = make_dataset(20, &base, &SplitRatios::default(), 6).unwrap();
        assert_ne!(a.manifest, c.manifest);
    }

    proptest! {
        #[test]
        fn sizes_exhaustive(n in 0usize..500, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (t, v) = (a, (1.0 - a) * b);
            let r = SplitRatios { train: t, val: v, test: 1.0 - t - v };
            let s = split_sizes(n, &r).unwrap();
            prop_assert_eq!(s.iter().sum::<usize>(), n);
            for (size, q) in s.iter().zip([r.train, r.val, r.test]) {
                prop_assert!((*size as f64 - q * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
