use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{normalize_apply, normalize_fit, Dataset, Label};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub fraction: f64,
    /// False when a class had fewer than two rows and the split fell back to
    /// an unstratified shuffle.
    pub stratified: bool,
}

impl SplitPair {
    /// Fit min-max statistics on the training partition and apply them to
    /// both partitions.
    pub fn normalized(self) -> Result<SplitPair> {
        let stats = normalize_fit(&self.train)?;
        Ok(SplitPair {
            train: normalize_apply(&self.train, &stats)?,
            test: normalize_apply(&self.test, &stats)?,
            ..self
        })
    }
}

/// Seeded, label-stratified train/test split.
///
/// The training partition receives `round(fraction * rows)` rows. Within each
/// class the quota is `fraction * class_rows`, floored, with leftover rows
/// handed to the classes with the largest fractional remainder. Both
/// partitions are shuffled so classes are interleaved.
pub fn train_test_split(d: &Dataset, fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let rows = d.rows();
    if rows < 2 {
        return Err(Error::Argument(format!(
            "splitting needs at least 2 rows, got {rows}"
        )));
    }
    let n_train = (fraction * rows as f64).round() as usize;
    if n_train == 0 || n_train == rows {
        return Err(Error::Argument(format!(
            "fraction {fraction} of {rows} rows leaves an empty partition"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Vec<usize>> = [Label::Good, Label::Poor]
        .iter()
        .map(|&l| (0..rows).filter(|&i| d.labels()[i] == l).collect())
        .collect();
    let stratified = groups.iter().all(|g| g.len() >= 2);

    let (mut train, mut test) = if stratified {
        let quotas: Vec<f64> = groups.iter().map(|g| fraction * g.len() as f64).collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut leftover = n_train - take.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra)
        });
        for c in order {
            if leftover == 0 {
                break;
            }
            if take[c] < groups[c].len() {
                take[c] += 1;
                leftover -= 1;
            }
        }
        let mut train = Vec::with_capacity(n_train);
        let mut test = Vec::with_capacity(rows - n_train);
        for (g, k) in groups.iter_mut().zip(take) {
            g.shuffle(&mut rng);
            train.extend_from_slice(&g[..k]);
            test.extend_from_slice(&g[k..]);
        }
        (train, test)
    } else {
        log::warn!(
            "class counts {}/{} too small to stratify; using an unstratified split",
            groups[0].len(),
            groups[1].len()
        );
        let mut all: Vec<usize> = (0..rows).collect();
        all.shuffle(&mut rng);
        let test = all.split_off(n_train);
        (all, test)
    };
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);

    Ok(SplitPair {
        train: d.select(&train),
        test: d.select(&test),
        seed,
        fraction,
        stratified,
    })
}
