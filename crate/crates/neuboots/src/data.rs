//! Datasets: feature matrix, targets, and task kind.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// What the model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Real-valued targets of the given dimension.
    Regression { output_dim: usize },
    /// `classes`-way classification with integer labels.
    Classification { classes: usize },
}

impl Task {
    /// Width of the network output for this task.
    pub fn output_dim(&self) -> usize {
        match self {
            Task::Regression { output_dim } => *output_dim,
            Task::Classification { classes } => *classes,
        }
    }
}

/// Targets, matching the task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Real(Matrix),
    Class(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(m) => m.rows(),
            Targets::Class(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Real(m) => Targets::Real(m.gather_rows(indices)),
            Targets::Class(c) => Targets::Class(indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Class labels, when this is a classification target.
    pub fn class_labels(&self) -> Option<&[usize]> {
        match self {
            Targets::Real(_) => None,
            Targets::Class(c) => Some(c),
        }
    }
}

/// A validated dataset: `n` feature rows plus targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Targets,
    task: Task,
}

impl Dataset {
    /// Regression dataset. Validates shapes and finiteness.
    pub fn regression(x: Matrix, y: Matrix) -> Result<Self> {
        let task = Task::Regression {
            output_dim: y.cols(),
        };
        Self::new(x, Targets::Real(y), task)
    }

    /// Classification dataset with labels in `[0, classes)`.
    pub fn classification(x: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let task = Task::Classification { classes };
        Self::new(x, Targets::Class(labels), task)
    }

    pub fn new(x: Matrix, y: Targets, task: Task) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if y.len() != x.rows() {
            return Err(Error::InvalidData(format!(
                "{} feature rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if !x.all_finite() {
            return Err(Error::InvalidData(
                "feature matrix contains non-finite values".into(),
            ));
        }
        match (&y, task) {
            (Targets::Real(t), Task::Regression { output_dim }) => {
                if t.cols() != output_dim {
                    return Err(Error::InvalidData(format!(
                        "target width {} does not match output_dim {}",
                        t.cols(),
                        output_dim
                    )));
                }
                if !t.all_finite() {
                    return Err(Error::InvalidData(
                        "targets contain non-finite values".into(),
                    ));
                }
            }
            (Targets::Class(labels), Task::Classification { classes }) => {
                if classes < 2 {
                    return Err(Error::InvalidData("classification needs >= 2 classes".into()));
                }
                if let Some((i, &l)) = labels.iter().enumerate().find(|&(_, &l)| l >= classes) {
                    return Err(Error::InvalidData(format!(
                        "label {} at row {} out of range for {} classes",
                        l, i, classes
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidData(
                    "target kind does not match task kind".into(),
                ));
            }
        }
        Ok(Self { x, y, task })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Targets {
        &self.y
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Class labels for classification tasks, `None` for regression.
    pub fn class_labels(&self) -> Option<&[usize]> {
        self.y.class_labels()
    }

    /// New dataset holding the listed rows (duplicates allowed, e.g. for
    /// with-replacement resamples).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidData("subset of zero rows".into()));
        }
        Ok(Self {
            x: self.x.gather_rows(indices),
            y: self.y.gather(indices),
            task: self.task,
        })
    }

    /// Shuffled split into (train, test) with `test_fraction` of rows held out.
    pub fn split(&self, test_fraction: f64, rng: &mut ChaCha8Rng) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must be in [0,1), got {test_fraction}"
            )));
        }
        let n = self.len();
        let n_test = ((n as f64) * test_fraction).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::InvalidConfig(format!(
                "split of {n} rows at fraction {test_fraction} leaves an empty side"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let (test_idx, train_idx) = order.split_at(n_test);
        Ok((self.subset(train_idx)?, self.subset(test_idx)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let err = Dataset::classification(x, vec![0, 3], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn rejects_non_finite_features() {
        let x = Matrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(Dataset::regression(x, Matrix::column(&[0.0])).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let x = Matrix::column(&(0..10).map(f64::from).collect::<Vec<_>>());
        let y = Matrix::column(&[0.0; 10]);
        let ds = Dataset::regression(x, y).unwrap();
        let (train, test) = ds.split(0.3, &mut seeded_rng(1)).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);
    }
}
