//! Positive semi-definite kernels and Gram-matrix assembly.
//!
//! Four kernels are supported: linear `x'z`, affine `1 + x'z`, inhomogeneous
//! polynomial `(1 + x'z)^m`, and the first-order Sobolev kernel
//! `min(x, z)` on scalar covariates in [0,1]. Gram matrices are assembled
//! densely in memory; each unordered pair is evaluated once so the result is
//! exactly symmetric.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Linear,
    Affine,
    /// Inhomogeneous polynomial of the given positive degree.
    Polynomial(u32),
    /// First-order Sobolev kernel; defined only for d = 1 covariates in [0,1].
    Sobolev1,
}

impl Kernel {
    /// Evaluates K(x, z). Sobolev1 rejects non-scalar inputs or entries
    /// outside [0,1].
    pub fn eval(self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::Dimension(format!(
                "kernel arguments of length {} and {}",
                x.len(),
                z.len()
            )));
        }
        match self {
            Kernel::Linear => Ok(x.dot(&z)),
            Kernel::Affine => Ok(1.0 + x.dot(&z)),
            Kernel::Polynomial(m) => {
                if m == 0 {
                    return Err(Error::Domain("polynomial degree must be positive".into()));
                }
                Ok((1.0 + x.dot(&z)).powi(m as i32))
            }
            Kernel::Sobolev1 => {
                let (a, b) = (sobolev_point(x)?, sobolev_point(z)?);
                Ok(a.min(b))
            }
        }
    }

    /// Gram matrix K[i,j] = K(x_i, x_j); exactly symmetric by construction.
    pub fn gram(self, data: &Dataset) -> Result<Array2<f64>> {
        let n = data.n();
        if n == 0 {
            return Err(Error::Dimension("gram of an empty dataset".into()));
        }
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = self.eval(data.row(i), data.row(j))?;
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        Ok(k)
    }

    /// Rectangular kernel matrix with entry (i, j) = K(x_i, z_j).
    pub fn cross_gram(self, rows: &Dataset, cols: &Dataset) -> Result<Array2<f64>> {
        let mut k = Array2::zeros((rows.n(), cols.n()));
        for i in 0..rows.n() {
            for j in 0..cols.n() {
                k[[i, j]] = self.eval(rows.row(i), cols.row(j))?;
            }
        }
        Ok(k)
    }
}

fn sobolev_point(x: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != 1 {
        return Err(Error::Domain(format!(
            "sobolev kernel requires scalar covariates, got d = {}",
            x.len()
        )));
    }
    let v = x[0];
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!(
            "sobolev kernel requires covariates in [0,1], got {v}"
        )));
    }
    Ok(v)
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => f.write_str("linear"),
            Kernel::Affine => f.write_str("affine"),
            Kernel::Polynomial(m) => write!(f, "polynomial:{m}"),
            Kernel::Sobolev1 => f.write_str("sobolev1"),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// Parses `linear`, `affine`, `sobolev1`, or `polynomial:<degree>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(deg) = lower.strip_prefix("polynomial:") {
            let m: u32 = deg
                .parse()
                .map_err(|_| Error::Domain(format!("bad polynomial degree '{deg}'")))?;
            if m == 0 {
                return Err(Error::Domain("polynomial degree must be positive".into()));
            }
            return Ok(Kernel::Polynomial(m));
        }
        match lower.as_str() {
            "linear" => Ok(Kernel::Linear),
            "affine" => Ok(Kernel::Affine),
            "sobolev1" => Ok(Kernel::Sobolev1),
            other => Err(Error::Domain(format!("unknown kernel '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Dataset::new(Array2::from_shape_vec((rows.len(), d), flat).unwrap(), None).unwrap()
    }

    #[test]
    fn eval_values() {
        let x = Array1::from_vec(vec![0.3]);
        let z = Array1::from_vec(vec![0.7]);
        assert_eq!(Kernel::Sobolev1.eval(x.view(), z.view()).unwrap(), 0.3);

        let x = Array1::from_vec(vec![1.0, 1.0]);
        let z = Array1::from_vec(vec![1.0, -1.0]);
        // (1 + 0)^2, by hand
        assert_eq!(Kernel::Polynomial(2).eval(x.view(), z.view()).unwrap(), 1.0);

        let zero = Array1::zeros(2);
        assert_eq!(Kernel::Linear.eval(x.view(), zero.view()).unwrap(), 0.0);
        assert_eq!(Kernel::Affine.eval(zero.view(), z.view()).unwrap(), 1.0);
    }

    #[test]
    fn sobolev_domain_errors() {
        let x2 = Array1::from_vec(vec![0.1, 0.2]);
        assert!(Kernel::Sobolev1.eval(x2.view(), x2.view()).is_err());
        let bad = Array1::from_vec(vec![1.5]);
        let ok = Array1::from_vec(vec![0.5]);
        assert!(Kernel::Sobolev1.eval(bad.view(), ok.view()).is_err());
    }

    #[test]
    fn gram_values() {
        // elementwise min table
        let k = Kernel::Sobolev1.gram(&ds(vec![vec![0.2], vec![0.5]])).unwrap();
        assert_eq!(k, array![[0.2, 0.2], [0.2, 0.5]]);

        // orthonormal inputs give the identity
        let k = Kernel::Linear
            .gram(&ds(vec![vec![1.0, 0.0], vec![0.0, 1.0]]))
            .unwrap();
        assert_eq!(k, array![[1.0, 0.0], [0.0, 1.0]]);

        // 1x1 case
        let k = Kernel::Affine.gram(&ds(vec![vec![2.0, 3.0]])).unwrap();
        assert_eq!(k, array![[14.0]]);
    }

    #[test]
    fn cross_gram_values() {
        let x = ds(vec![vec![0.4]]);
        let z = ds(vec![vec![0.1], vec![0.9]]);
        let k = Kernel::Sobolev1.cross_gram(&x, &z).unwrap();
        assert_eq!(k, array![[0.1, 0.4]]);

        let x = ds(vec![vec![0.0, 0.0]]);
        let z = ds(vec![vec![3.0, -1.0], vec![2.0, 5.0], vec![0.0, 0.0]]);
        let k = Kernel::Affine.cross_gram(&x, &z).unwrap();
        assert_eq!(k, array![[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn cross_gram_self_matches_gram() {
        let x = ds(vec![vec![0.1], vec![0.8], vec![0.3]]);
        let g = Kernel::Sobolev1.gram(&x).unwrap();
        let c = Kernel::Sobolev1.cross_gram(&x, &x).unwrap();
        assert_eq!(g, c);
    }

    fn random_dataset(rng: &mut ChaCha8Rng, kind: Kernel, n: usize) -> Dataset {
        match kind {
            Kernel::Sobolev1 => {
                let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                Dataset::from_scalars(&xs, None).unwrap()
            }
            _ => {
                let d = 1 + rng.random_range(0..3usize);
                let flat: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
                Dataset::new(Array2::from_shape_vec((n, d), flat).unwrap(), None).unwrap()
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let kinds = [
            Kernel::Linear,
            Kernel::Affine,
            Kernel::Polynomial(3),
            Kernel::Sobolev1,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in kinds {
            for _ in 0..100 {
                let n = 2 + rng.random_range(0..39usize);
                let data = random_dataset(&mut rng, kind, n);
                let k = kind.gram(&data).unwrap();
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| k[[i, j]]);
                let eigs = m.symmetric_eigenvalues();
                let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(
                    min >= -1e-8 * max.max(1e-300),
                    "{kind:?}: min eig {min}, max eig {max}"
                );
            }
        }
    }

    #[test]
    fn cross_gram_transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_dataset(&mut rng, Kernel::Sobolev1, 9);
        let z = random_dataset(&mut rng, Kernel::Sobolev1, 5);
        let a = Kernel::Sobolev1.cross_gram(&x, &z).unwrap();
        let b = Kernel::Sobolev1.cross_gram(&z, &x).unwrap();
        assert_eq!(a, b.t());
    }

    #[test]
    fn polynomial_degree_one_matches_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_dataset(&mut rng, Kernel::Affine, 12);
        let a = Kernel::Polynomial(1).gram(&x).unwrap();
        let b = Kernel::Affine.gram(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_parse_round_trip() {
        for k in [
            Kernel::Linear,
            Kernel::Affine,
            Kernel::Polynomial(4),
            Kernel::Sobolev1,
        ] {
            assert_eq!(k.to_string().parse::<Kernel>().unwrap(), k);
        }
        assert!("polynomial:0".parse::<Kernel>().is_err());
        assert!("rbf".parse::<Kernel>().is_err());
    }
}
