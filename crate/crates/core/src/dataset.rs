//! Tabular datasets: a covariate matrix with an optional response vector.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// An n x d design matrix with optional length-n responses. The universal
/// I/O unit for fitting, selection, and the experiment harness.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Array2<f64>,
    responses: Option<Array1<f64>>,
}

impl Dataset {
    pub fn new(covariates: Array2<f64>, responses: Option<Array1<f64>>) -> Result<Self> {
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariates contain non-finite entries".into()));
        }
        if let Some(y) = &responses {
            if y.len() != covariates.nrows() {
                return Err(Error::Dimension(format!(
                    "{} responses for {} rows",
                    y.len(),
                    covariates.nrows()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("responses contain non-finite entries".into()));
            }
        }
        Ok(Dataset {
            covariates,
            responses,
        })
    }

    pub fn unlabeled(covariates: Array2<f64>) -> Result<Self> {
        Dataset::new(covariates, None)
    }

    /// Convenience constructor for one-dimensional covariates.
    pub fn from_scalars(xs: &[f64], ys: Option<&[f64]>) -> Result<Self> {
        let x = Array2::from_shape_vec((xs.len(), 1), xs.to_vec())
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Dataset::new(x, ys.map(|v| Array1::from_vec(v.to_vec())))
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn y(&self) -> Option<ArrayView1<'_, f64>> {
        self.responses.as_ref().map(|y| y.view())
    }

    pub fn require_y(&self) -> Result<ArrayView1<'_, f64>> {
        self.y()
            .ok_or_else(|| Error::Domain("dataset has no responses".into()))
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.covariates.row(i)
    }

    pub fn is_labeled(&self) -> bool {
        self.responses.is_some()
    }

    /// Extracts the rows at `indices`, keeping responses when present.
    /// Indices may repeat; each must be in range.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let n = self.n();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Dimension(format!("row index {bad} out of range {n}")));
        }
        let mut x = Array2::zeros((indices.len(), self.dim()));
        for (k, &i) in indices.iter().enumerate() {
            x.row_mut(k).assign(&self.covariates.row(i));
        }
        let y = self
            .responses
            .as_ref()
            .map(|y| Array1::from_iter(indices.iter().map(|&i| y[i])));
        Ok(Dataset {
            covariates: x,
            responses: y,
        })
    }

    /// Drops the response vector, e.g. to treat labeled data as covariates only.
    pub fn without_responses(&self) -> Dataset {
        Dataset {
            covariates: self.covariates.clone(),
            responses: None,
        }
    }
}
