use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Self {
        SplitSpec { test_fraction, seed }
    }

    /// `floor(fraction · n + 0.5)`, with the product snapped to 1e-9 so
    /// decimal fractions such as 0.3 · 905 land on the exact half.
    pub fn test_size(&self, n: usize) -> usize {
        let x = ((self.test_fraction * n as f64) * 1e9).round() / 1e9;
        (x + 0.5).floor() as usize
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.3,
            seed: 0,
        }
    }
}

/// Seeded, unstratified train/test split. Rows keep their original
/// relative order inside each part.
pub fn split(d: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::Config(format!("cannot split a dataset with {n} rows")));
    }
    if !(s.test_fraction > 0.0 && s.test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {} is outside (0, 1)", s.test_fraction)));
    }
    let k = s.test_size(n);
    if k == 0 || k == n {
        return Err(Error::Config(format!(
            "test fraction {} leaves an empty part for n = {n}",
            s.test_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(s.seed));
    let mut test = perm[..k].to_vec();
    let mut train = perm[k..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((d.select_rows(&train), d.select_rows(&test)))
}
