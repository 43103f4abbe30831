use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::dataset::{Cell, ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum Encoding {
    Scaled { mean: f64, std: f64 },
    OneHot { categories: Vec<String> },
}

/// Standard scaling for numericals and one-hot encoding for categoricals,
/// fit on training data. Unseen test categories encode as all zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub columns: Vec<(String, Encoding)>,
    pub width: usize,
}

impl Preprocessor {
    pub fn fit(train: &Dataset) -> Result<Preprocessor> {
        require_complete(train)?;
        if train.n_rows() == 0 {
            return Err(Error::Contract("cannot fit preprocessing on zero rows".into()));
        }
        let mut columns = Vec::with_capacity(train.n_cols());
        let mut width = 0;
        for j in 0..train.n_cols() {
            let cs = train.column_schema(j);
            let enc = match cs.kind {
                ColumnKind::Numerical => {
                    let v = train.observed_numbers(j);
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    width += 1;
                    Encoding::Scaled { mean, std: var.sqrt() }
                }
                ColumnKind::Categorical => {
                    let categories = cs.category_list().to_vec();
                    width += categories.len();
                    Encoding::OneHot { categories }
                }
            };
            columns.push((cs.name.clone(), enc));
        }
        Ok(Preprocessor { columns, width })
    }

    pub fn apply(&self, d: &Dataset) -> Result<Matrix> {
        require_complete(d)?;
        if d.n_cols() != self.columns.len() {
            return Err(Error::Contract(format!(
                "dataset has {} feature columns, preprocessing expects {}",
                d.n_cols(),
                self.columns.len()
            )));
        }
        let mut m = Matrix::zeros(d.n_rows(), self.width);
        let mut offset = 0;
        for (j, (name, enc)) in self.columns.iter().enumerate() {
            if &d.column_schema(j).name != name {
                return Err(Error::Contract(format!("column {j} is `{}`, expected `{name}`", d.column_schema(j).name)));
            }
            match enc {
                Encoding::Scaled { mean, std } => {
                    for r in 0..d.n_rows() {
                        if let Cell::Num(x) = d.cell(r, j) {
                            let z = if *std < 1e-12 { 0.0 } else { (x - mean) / std };
                            m.set(r, offset, z);
                        }
                    }
                    offset += 1;
                }
                Encoding::OneHot { categories } => {
                    let index: HashMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
                    // Map the dataset's codes onto the fitted layout by label.
                    let local: Vec<Option<usize>> = d
                        .column_schema(j)
                        .category_list()
                        .iter()
                        .map(|l| index.get(l.as_str()).copied())
                        .collect();
                    for r in 0..d.n_rows() {
                        if let Cell::Cat(code) = d.cell(r, j) {
                            if let Some(k) = local[code as usize] {
                                m.set(r, offset + k, 1.0);
                            }
                        }
                    }
                    offset += categories.len();
                }
            }
        }
        Ok(m)
    }
}

fn require_complete(d: &Dataset) -> Result<()> {
    if let Some(j) = (0..d.n_cols()).find(|&j| d.mask().column_count(j) > 0) {
        return Err(Error::Contract(format!(
            "column `{}` contains nulls; impute before preprocessing",
            d.column_schema(j).name
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        Dataset::builder()
            .numerical("x", [Some(0.0), Some(2.0)])
            .numerical("k", [Some(5.0), Some(5.0)])
            .categorical("c", ["a", "b", "c"], [Some("a"), Some("c")])
            .target("y", ["n", "p"], [0, 1])
            .build()
            .unwrap()
    }

    #[test]
    fn scaling_and_one_hot() {
        let d = data();
        let p = Preprocessor::fit(&d).unwrap();
        let m = p.apply(&d).unwrap();
        assert_eq!(p.width, 5);
        assert_eq!(m.row(0), &[-1.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn unseen_category_is_zero_block() {
        let p = Preprocessor::fit(&data()).unwrap();
        let test = Dataset::builder()
            .numerical("x", [Some(1.0)])
            .numerical("k", [Some(1.0)])
            .categorical("c", ["z"], [Some("z")])
            .target("y", ["n", "p"], [0])
            .build()
            .unwrap();
        assert_eq!(p.apply(&test).unwrap().row(0), &[0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nulls_are_a_contract_error() {
        let d = Dataset::builder()
            .numerical("x", [Some(0.0), None])
            .target("y", ["n", "p"], [0, 1])
            .build()
            .unwrap();
        assert!(matches!(Preprocessor::fit(&d), Err(Error::Contract(_))));
    }
}
