//! Ridge-regularized kernel GLM fitting.
//!
//! The optimizer is Fisher scoring in function space: at scores f the GLM
//! weights w = a''(f_i) and pseudo-responses z_i = f_i + (y_i - a'(f_i))/a''(f_i)
//! define the update (KW + n*lambda*I) f_new = K W z, which is solved through
//! the equivalent symmetric positive definite system
//!
//!     (S K S + n*lambda*I) u = S K W z,      S = W^{1/2},  f_new = S^{-1} u
//!
//! by conjugate gradients. Scores are recovered with clipped weights so the
//! symmetrization stays well-defined when logistic scores saturate. The
//! representer coefficients are recovered at the end from one jittered solve
//! of (K + jitter*I) alpha = f.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::family::{self, Family};
use crate::kernel::Kernel;

/// Iteration and tolerance controls for [`fit_krglm`].
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Maximum Fisher-scoring iterations.
    pub irls_max_iter: usize,
    /// Stop when the sup-norm relative change of the fitted scores drops
    /// below this.
    pub irls_tol: f64,
    /// Inner CG iteration cap; `None` means `min(10 n, 2000)`.
    pub cg_max_iter: Option<usize>,
    /// CG relative-residual tolerance.
    pub cg_tol: f64,
    /// Lower clip for IRLS weights inside the symmetrized system.
    pub weight_floor: f64,
    /// Keep the accepted score iterates on the fitted model (diagnostics
    /// and convergence tests).
    pub record_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            irls_max_iter: 50,
            irls_tol: 1e-8,
            cg_max_iter: None,
            cg_tol: 1e-10,
            weight_floor: family::WEIGHT_FLOOR,
            record_iterates: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.irls_max_iter == 0 || self.cg_max_iter == Some(0) {
            return Err(Error::Domain("iteration caps must be at least 1".into()));
        }
        if !(self.irls_tol > 0.0 && self.cg_tol > 0.0 && self.weight_floor > 0.0) {
            return Err(Error::Domain("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    fn cg_iters(&self, n: usize) -> usize {
        self.cg_max_iter.unwrap_or_else(|| (10 * n).min(2000).max(1))
    }
}

/// A fitted kernel GLM: representer coefficients over retained training
/// covariates. Immutable once constructed.
#[derive(Debug, Clone)]
pub struct FittedModel {
    alpha: Array1<f64>,
    train_x: Array2<f64>,
    kernel: Kernel,
    family: Family,
    lambda: f64,
    fitted_scores: Array1<f64>,
    converged: bool,
    iterations: usize,
    trace: Option<Vec<Array1<f64>>>,
}

impl FittedModel {
    /// Reassembles a model from stored parts (e.g. a deserialized artifact).
    /// Fitted scores are recomputed as `K alpha` on the training covariates.
    pub fn from_parts(
        alpha: Array1<f64>,
        train_x: Array2<f64>,
        kernel: Kernel,
        family: Family,
        lambda: f64,
        converged: bool,
        iterations: usize,
    ) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if alpha.len() != train_x.nrows() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} training rows",
                alpha.len(),
                train_x.nrows()
            )));
        }
        let data = Dataset::new(train_x, None)?;
        let k = kernel.gram(&data)?;
        let fitted_scores = k.dot(&alpha);
        Ok(FittedModel {
            alpha,
            train_x: data.x().to_owned(),
            kernel,
            family,
            lambda,
            fitted_scores,
            converged,
            iterations,
            trace: None,
        })
    }

    pub fn alpha(&self) -> ArrayView1<'_, f64> {
        self.alpha.view()
    }

    pub fn train_x(&self) -> ArrayView2<'_, f64> {
        self.train_x.view()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn fitted_scores(&self) -> ArrayView1<'_, f64> {
        self.fitted_scores.view()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Accepted score iterates, present when the fit ran with
    /// `record_iterates`. The initial state is included.
    pub fn irls_trace(&self) -> Option<&[Array1<f64>]> {
        self.trace.as_deref()
    }

    /// Representer-expansion scores `sum_i alpha_i K(x_i, z)` at new points.
    pub fn predict_score(&self, z: &Dataset) -> Result<Array1<f64>> {
        predict_scores_shared(self.kernel, self.train_x.view(), &[self.alpha.view()], z)
            .map(|mut v| v.pop().unwrap())
    }

    /// Predicted conditional means `a'(score)` at new points.
    pub fn predict_mean(&self, z: &Dataset) -> Result<Array1<f64>> {
        let scores = self.predict_score(z)?;
        let mut out = Array1::zeros(scores.len());
        for (o, s) in out.iter_mut().zip(scores.iter()) {
            *o = self.family.mean(*s)?;
        }
        Ok(out)
    }
}

/// Scores for several coefficient vectors sharing one training set, computed
/// with a single kernel-row pass per prediction point.
pub(crate) fn predict_scores_shared(
    kernel: Kernel,
    train_x: ArrayView2<'_, f64>,
    alphas: &[ArrayView1<'_, f64>],
    z: &Dataset,
) -> Result<Vec<Array1<f64>>> {
    let n = train_x.nrows();
    for a in alphas {
        if a.len() != n {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} training rows",
                a.len(),
                n
            )));
        }
    }
    let m = z.n();
    let mut out: Vec<Array1<f64>> = alphas.iter().map(|_| Array1::zeros(m)).collect();
    let mut krow = vec![0.0f64; n];
    for j in 0..m {
        let zj = z.row(j);
        for (i, slot) in krow.iter_mut().enumerate() {
            *slot = kernel.eval(train_x.row(i), zj)?;
        }
        for (c, a) in alphas.iter().enumerate() {
            let mut acc = 0.0;
            for (ki, ai) in krow.iter().zip(a.iter()) {
                acc += ki * ai;
            }
            out[c][j] = acc;
        }
    }
    Ok(out)
}

/// Conjugate gradients for symmetric positive definite operators.
///
/// Returns `x` with `||Ax - b|| <= tol * ||b||`, starting from zero. Errors on
/// indefiniteness (`p'Ap <= 0`), on a residual that fails to improve over 50
/// consecutive iterations, and on exceeding `max_iter`.
pub fn cg_solve<F>(apply_a: F, b: &Array1<f64>, tol: f64, max_iter: usize) -> Result<Array1<f64>>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    cg_solve_from(&apply_a, b, None, tol, max_iter)
}

fn cg_solve_from<F>(
    apply_a: &F,
    b: &Array1<f64>,
    x0: Option<&Array1<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<Array1<f64>>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let n = b.len();
    let threshold = tol * b.dot(b).sqrt();
    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => Array1::zeros(n),
    };
    let mut r = b - &apply_a(&x);
    let mut rs = r.dot(&r);
    if rs.sqrt() <= threshold {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut best = rs.sqrt();
    let mut stale = 0usize;

    for it in 0..max_iter {
        let ap = apply_a(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::Solver(format!(
                "CG breakdown at iteration {it}: p'Ap = {pap:e}, operator not positive definite"
            )));
        }
        let step = rs / pap;
        x.scaled_add(step, &p);
        r.scaled_add(-step, &ap);
        let rs_new = r.dot(&r);
        let rnorm = rs_new.sqrt();
        if rnorm <= threshold {
            // Confirm against the true residual; the recursive one can drift.
            let true_r = b - &apply_a(&x);
            let true_norm = true_r.dot(&true_r).sqrt();
            if true_norm <= threshold {
                return Ok(x);
            }
            r = true_r;
            rs = r.dot(&r);
            p = r.clone();
            continue;
        }
        if rnorm < best {
            best = rnorm;
            stale = 0;
        } else {
            stale += 1;
            if stale >= 50 {
                return Err(Error::Solver(format!(
                    "CG stagnated: residual {rnorm:e} has not improved on {best:e} \
                     for 50 iterations (target {threshold:e}, iteration {it})"
                )));
            }
        }
        let beta = rs_new / rs;
        rs = rs_new;
        p = &r + &(beta * &p);
    }
    Err(Error::Solver(format!(
        "CG did not reach tolerance in {max_iter} iterations: residual {:e} vs target {threshold:e}",
        rs.sqrt()
    )))
}

/// The ridge-penalized negative log-likelihood
/// `(1/n) sum_i [a((K alpha)_i) - y_i (K alpha)_i] + (lambda/2) alpha' K alpha`.
pub fn regularized_objective(
    data: &Dataset,
    family: Family,
    kernel: Kernel,
    alpha: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<f64> {
    let y = data.require_y()?;
    if alpha.len() != data.n() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} rows",
            alpha.len(),
            data.n()
        )));
    }
    let k = kernel.gram(data)?;
    let f = k.dot(&alpha.to_owned());
    objective_value(family, y, &f, &alpha.to_owned(), lambda)
}

fn objective_value(
    family: Family,
    y: ArrayView1<'_, f64>,
    f: &Array1<f64>,
    alpha: &Array1<f64>,
    lambda: f64,
) -> Result<f64> {
    let n = y.len() as f64;
    let mut fit = 0.0;
    for (fi, yi) in f.iter().zip(y.iter()) {
        fit += family.log_partition(*fi)? - yi * fi;
    }
    Ok(fit / n + 0.5 * lambda * alpha.dot(f))
}

/// Fits the ridge-regularized kernel GLM at penalty `lambda`.
///
/// Non-convergence within the iteration budget is reported through the
/// `converged` flag, not an error; CG failures are errors.
pub fn fit_krglm(
    data: &Dataset,
    family: Family,
    kernel: Kernel,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<FittedModel> {
    let k = kernel.gram(data)?;
    fit_with_gram(&k, data, family, kernel, lambda, opts, None)
}

/// Warm-startable fit on a precomputed Gram matrix. `init` carries the
/// scores and coefficients of a previous fit on the same training rows.
pub(crate) fn fit_with_gram(
    k: &Array2<f64>,
    data: &Dataset,
    family: Family,
    kernel: Kernel,
    lambda: f64,
    opts: &SolverOptions,
    init: Option<(&Array1<f64>, &Array1<f64>)>,
) -> Result<FittedModel> {
    opts.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let y = data.require_y()?;
    for v in y.iter() {
        family.validate_response(*v)?;
    }
    let n = data.n();
    let nf = n as f64;
    let nl = nf * lambda;
    let cg_iters = opts.cg_iters(n);

    let (mut f, mut alpha) = match init {
        Some((f0, a0)) => (f0.clone(), a0.clone()),
        None => (Array1::zeros(n), Array1::zeros(n)),
    };
    let mut obj = objective_value(family, y, &f, &alpha, lambda)?;
    let mut trace: Option<Vec<Array1<f64>>> =
        opts.record_iterates.then(|| vec![f.clone()]);

    let mut prev_wz: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut last_wz: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..opts.irls_max_iter {
        let mut w = Array1::zeros(n);
        let mut z = Array1::zeros(n);
        for i in 0..n {
            let (wi, zi) = family.irls_step_terms(f[i], y[i])?;
            w[i] = wi;
            z[i] = zi;
        }
        // The update map depends on f only through (w, z); if they repeat,
        // the next solve would reproduce the current scores. This is what
        // ends the Gaussian fit after its single least-squares solve.
        if let Some((pw, pz)) = &prev_wz {
            if w == *pw && z == *pz {
                converged = true;
                break;
            }
        }

        let s = w.mapv(|wi| wi.max(opts.weight_floor).sqrt());
        let wz = &w * &z;
        let b = &s * &k.dot(&wz);
        let apply_a = |v: &Array1<f64>| {
            let sv = &s * v;
            let ksv = k.dot(&sv);
            &s * &ksv + &(nl * v)
        };
        let u0 = &s * &f;
        let u = cg_solve_from(&apply_a, &b, Some(&u0), opts.cg_tol, cg_iters)?;
        let f_new = &u / &s;
        let alpha_new = &w * &(&z - &f_new) / nl;

        // Plain Fisher scoring, halving the step when the objective rises
        // (Poisson with large responses needs this; a domain error during
        // evaluation counts as a rise).
        let mut accepted = None;
        let mut t = 1.0f64;
        for _ in 0..=20 {
            let f_try = &f + &((&f_new - &f) * t);
            let a_try = &alpha + &((&alpha_new - &alpha) * t);
            match objective_value(family, y, &f_try, &a_try, lambda) {
                Ok(o) if o <= obj + 1e-12 * (1.0 + obj.abs()) => {
                    accepted = Some((f_try, a_try, o));
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some((f_acc, a_acc, o_acc)) = accepted else {
            // No step length decreases the objective: already at the floor.
            break;
        };
        iterations += 1;
        let sup_new = f_acc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sup_delta = f_acc
            .iter()
            .zip(f.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        f = f_acc;
        alpha = a_acc;
        obj = o_acc;
        if let Some(tr) = trace.as_mut() {
            tr.push(f.clone());
        }
        prev_wz = Some((w.clone(), z.clone()));
        last_wz = Some((w, z));
        if sup_delta <= opts.irls_tol * (1.0 + sup_new) {
            converged = true;
            break;
        }
    }

    // Recover alpha from f with one jittered solve of (K + jitter I) a = f.
    // The IRLS fixed point satisfies f = K w (z - f) / (n lambda), so that
    // expression seeds the solve.
    let jitter = 1e-10 * k.diag().sum() / nf;
    let apply_k = |v: &Array1<f64>| k.dot(v) + &(jitter * v);
    let alpha0 = match &last_wz {
        Some((w, z)) => w * &(z - &f) / nl,
        None => alpha.clone(),
    };
    let alpha_final = cg_solve_from(&apply_k, &f, Some(&alpha0), opts.cg_tol, cg_iters)?;

    Ok(FittedModel {
        alpha: alpha_final,
        train_x: data.x().to_owned(),
        kernel,
        family,
        lambda,
        fitted_scores: f,
        converged,
        iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
        let n = b.len();
        let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
        let rhs = DVector::from_iterator(n, b.iter().cloned());
        let sol = m.cholesky().expect("SPD").solve(&rhs);
        Array1::from_iter(sol.iter().cloned())
    }

    /// Closed-form kernel ridge scores f = K (K + n lambda I)^{-1} y via a
    /// dense factorization, independent of the CG path.
    fn krr_closed_form(k: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Array1<f64> {
        let n = y.len();
        let mut a = k.clone();
        for i in 0..n {
            a[[i, i]] += n as f64 * lambda;
        }
        k.dot(&dense_solve(&a, y))
    }

    #[test]
    fn cg_identity_in_one_step() {
        let b = array![3.0, -1.0, 2.5];
        let x = cg_solve(|v| v.clone(), &b, 1e-12, 5).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn cg_diagonal_inverse() {
        let d = array![1.0, 2.0, 4.0];
        let b = array![1.0, 1.0, 1.0];
        let x = cg_solve(|v| &d * v, &b, 1e-14, 50).unwrap();
        for (xi, want) in x.iter().zip([1.0, 0.5, 0.25]) {
            assert!((xi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_matches_dense_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 30;
        let g = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        // A = G'G + I is SPD
        let a = g.t().dot(&g) + Array2::<f64>::eye(n);
        let b = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let x = cg_solve(|v| a.dot(v), &b, 1e-12, 10 * n).unwrap();
        let want = dense_solve(&a, &b);
        for (xi, wi) in x.iter().zip(want.iter()) {
            assert!((xi - wi).abs() < 1e-8, "{xi} vs {wi}");
        }
    }

    #[test]
    fn cg_rejects_indefinite_operators() {
        let b = array![1.0, 1.0];
        let err = cg_solve(|v| -1.0 * v, &b, 1e-10, 10).unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
    }

    fn random_labeled(
        rng: &mut ChaCha8Rng,
        kernel: Kernel,
        family: Family,
        n: usize,
    ) -> Dataset {
        let x: Vec<f64> = match kernel {
            Kernel::Sobolev1 => (0..n).map(|_| rng.random::<f64>()).collect(),
            _ => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let y: Vec<f64> = (0..n)
            .map(|_| match family {
                Family::Gaussian => rng.random_range(-2.0..2.0),
                Family::Logistic => f64::from(rng.random::<bool>()),
                Family::Poisson => rng.random_range(0..6u32) as f64,
            })
            .collect();
        Dataset::from_scalars(&x, Some(&y)).unwrap()
    }

    #[test]
    fn gaussian_fit_matches_closed_form_krr() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kernel in [Kernel::Linear, Kernel::Affine, Kernel::Polynomial(3), Kernel::Sobolev1] {
            let data = random_labeled(&mut rng, kernel, Family::Gaussian, 40);
            for lambda in [1e-3, 0.1, 1.0] {
                let model =
                    fit_krglm(&data, Family::Gaussian, kernel, lambda, &SolverOptions::default())
                        .unwrap();
                assert!(model.converged());
                assert_eq!(model.iterations(), 1);
                let k = kernel.gram(&data).unwrap();
                let want = krr_closed_form(&k, &data.require_y().unwrap().to_owned(), lambda);
                let gap = model
                    .fitted_scores()
                    .iter()
                    .zip(want.iter())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(gap <= 1e-8, "{kernel:?} lambda={lambda}: gap {gap:e}");
            }
        }
    }

    #[test]
    fn logistic_balanced_repeated_point_shrinks_to_half() {
        // one repeated covariate, labels balanced: the optimum score is 0
        // and the predicted mean 1/2 for any penalty.
        let x = vec![0.5; 10];
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let data = Dataset::from_scalars(&x, Some(&y)).unwrap();
        for lambda in [1e-3, 1.0, 1e6] {
            let model =
                fit_krglm(&data, Family::Logistic, Kernel::Sobolev1, lambda, &SolverOptions::default())
                    .unwrap();
            let score = model.fitted_scores()[0];
            assert!(score.abs() < 1e-6, "lambda={lambda}: score {score}");
            let mean = model.predict_mean(&data.without_responses()).unwrap();
            assert!((mean[0] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn poisson_unit_problem_has_zero_solution() {
        // n=1, K(x,x)=1, y=1, lambda=1: stationarity e^a - 1 + a = 0 at a=0.
        let data = Dataset::from_scalars(&[1.0], Some(&[1.0])).unwrap();
        let model =
            fit_krglm(&data, Family::Poisson, Kernel::Sobolev1, 1.0, &SolverOptions::default())
                .unwrap();
        assert!(model.alpha()[0].abs() < 1e-10);
        assert!(model.converged());
    }

    #[test]
    fn predict_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data = random_labeled(&mut rng, Kernel::Sobolev1, Family::Logistic, 25);
        let model =
            fit_krglm(&data, Family::Logistic, Kernel::Sobolev1, 0.05, &SolverOptions::default())
                .unwrap();
        let again = model.predict_score(&data.without_responses()).unwrap();
        for (a, b) in again.iter().zip(model.fitted_scores().iter()) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn predict_zero_alpha_and_single_point() {
        let data = Dataset::new(array![[2.0, -1.0]], None).unwrap();
        let model = FittedModel::from_parts(
            array![0.0],
            array![[2.0, -1.0]],
            Kernel::Linear,
            Family::Gaussian,
            1.0,
            true,
            0,
        )
        .unwrap();
        let z = Dataset::new(array![[1.0, 1.0], [0.0, 3.0]], None).unwrap();
        assert_eq!(model.predict_score(&z).unwrap(), array![0.0, 0.0]);

        let model = FittedModel::from_parts(
            array![0.75],
            data.x().to_owned(),
            Kernel::Linear,
            Family::Gaussian,
            1.0,
            true,
            0,
        )
        .unwrap();
        // score(z) = alpha * x' z by hand: 0.75 * (2*1 + -1*1) = 0.75
        let got = model.predict_score(&z).unwrap();
        assert!((got[0] - 0.75).abs() < 1e-14);
        assert!((got[1] - 0.75 * -3.0).abs() < 1e-14);
    }

    #[test]
    fn predict_mean_values() {
        let z = Dataset::from_scalars(&[0.5], None).unwrap();
        let logit = FittedModel::from_parts(
            array![0.0],
            array![[0.5]],
            Kernel::Sobolev1,
            Family::Logistic,
            1.0,
            true,
            0,
        )
        .unwrap();
        assert_eq!(logit.predict_mean(&z).unwrap()[0], 0.5);

        // Poisson: score log 3 maps to mean 3
        let alpha = 3f64.ln() / 0.5;
        let pois = FittedModel::from_parts(
            array![alpha],
            array![[0.5]],
            Kernel::Sobolev1,
            Family::Poisson,
            1.0,
            true,
            0,
        )
        .unwrap();
        assert!((pois.predict_mean(&z).unwrap()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn objective_at_zero_is_family_constant() {
        let data = Dataset::from_scalars(&[0.2, 0.7, 0.4], Some(&[1.0, 0.0, 1.0])).unwrap();
        let zero = Array1::zeros(3);
        let logit =
            regularized_objective(&data, Family::Logistic, Kernel::Sobolev1, zero.view(), 0.3)
                .unwrap();
        assert!((logit - 2f64.ln()).abs() < 1e-15);
        let pois =
            regularized_objective(&data, Family::Poisson, Kernel::Sobolev1, zero.view(), 0.3)
                .unwrap();
        assert!((pois - 1.0).abs() < 1e-15);
        let gauss =
            regularized_objective(&data, Family::Gaussian, Kernel::Sobolev1, zero.view(), 0.3)
                .unwrap();
        assert_eq!(gauss, 0.0);
    }

    #[test]
    fn objective_penalty_is_monotone_in_lambda() {
        let data = Dataset::from_scalars(&[0.2, 0.9], Some(&[1.0, 0.0])).unwrap();
        let alpha = array![0.5, -0.25];
        let lo = regularized_objective(&data, Family::Logistic, Kernel::Sobolev1, alpha.view(), 0.1)
            .unwrap();
        let hi = regularized_objective(&data, Family::Logistic, Kernel::Sobolev1, alpha.view(), 0.2)
            .unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn gaussian_objective_minimal_at_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_labeled(&mut rng, Kernel::Sobolev1, Family::Gaussian, 20);
        let lambda = 0.05;
        let k = Kernel::Sobolev1.gram(&data).unwrap();
        let n = data.n();
        let mut a = k.clone();
        for i in 0..n {
            a[[i, i]] += n as f64 * lambda;
        }
        let alpha = dense_solve(&a, &data.require_y().unwrap().to_owned());
        let at_opt =
            regularized_objective(&data, Family::Gaussian, Kernel::Sobolev1, alpha.view(), lambda)
                .unwrap();
        for _ in 0..100 {
            let delta = Array1::from_shape_fn(n, |_| rng.random_range(-0.5..0.5));
            let perturbed = &alpha + &delta;
            let off = regularized_objective(
                &data,
                Family::Gaussian,
                Kernel::Sobolev1,
                perturbed.view(),
                lambda,
            )
            .unwrap();
            assert!(off >= at_opt - 1e-12);
        }
    }

    #[test]
    fn objective_non_increasing_along_irls_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let opts = SolverOptions {
            record_iterates: true,
            ..SolverOptions::default()
        };
        for family in [Family::Logistic, Family::Poisson] {
            let data = random_labeled(&mut rng, Kernel::Sobolev1, family, 60);
            let model = fit_krglm(&data, family, Kernel::Sobolev1, 0.02, &opts).unwrap();
            let k = Kernel::Sobolev1.gram(&data).unwrap();
            let n = data.n();
            let jitter = 1e-10 * k.diag().sum() / n as f64;
            let mut kj = k.clone();
            for i in 0..n {
                kj[[i, i]] += jitter;
            }
            let trace = model.irls_trace().unwrap();
            assert!(trace.len() >= 2);
            let mut prev = f64::INFINITY;
            for f in trace {
                let alpha = dense_solve(&kj, f);
                let obj =
                    regularized_objective(&data, family, Kernel::Sobolev1, alpha.view(), 0.02)
                        .unwrap();
                assert!(
                    obj <= prev + 1e-10,
                    "{family:?}: objective rose from {prev} to {obj}"
                );
                prev = obj;
            }
        }
    }

    #[test]
    fn stationarity_of_returned_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for family in [Family::Logistic, Family::Poisson] {
            let data = random_labeled(&mut rng, Kernel::Sobolev1, family, 50);
            let lambda = 0.05;
            let model =
                fit_krglm(&data, family, Kernel::Sobolev1, lambda, &SolverOptions::default())
                    .unwrap();
            let k = Kernel::Sobolev1.gram(&data).unwrap();
            let y = data.require_y().unwrap();
            let f = k.dot(&model.alpha().to_owned());
            let mut inner = Array1::zeros(data.n());
            for i in 0..data.n() {
                inner[i] = family.mean(f[i]).unwrap() - y[i];
            }
            let n = data.n() as f64;
            let grad = k.dot(&inner) / n + lambda * &k.dot(&model.alpha().to_owned());
            let gsup = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let ysup = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(
                gsup <= 1e-6 * (1.0 + ysup),
                "{family:?}: gradient sup {gsup:e}"
            );
        }
    }

    #[test]
    fn gaussian_shrinkage_monotone_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data = random_labeled(&mut rng, Kernel::Sobolev1, Family::Gaussian, 30);
        let mut prev = f64::INFINITY;
        for j in 0..10 {
            let lambda = 1e-4 * 4f64.powi(j);
            let model =
                fit_krglm(&data, Family::Gaussian, Kernel::Sobolev1, lambda, &SolverOptions::default())
                    .unwrap();
            let norm = model.fitted_scores().dot(&model.fitted_scores()).sqrt();
            assert!(norm <= prev + 1e-10, "lambda={lambda}: {norm} > {prev}");
            prev = norm;
        }
    }

    #[test]
    fn invalid_options_and_inputs_are_rejected() {
        let data = Dataset::from_scalars(&[0.5], Some(&[1.0])).unwrap();
        let bad = SolverOptions {
            irls_tol: 0.0,
            ..SolverOptions::default()
        };
        assert!(fit_krglm(&data, Family::Gaussian, Kernel::Sobolev1, 1.0, &bad).is_err());
        assert!(fit_krglm(
            &data,
            Family::Gaussian,
            Kernel::Sobolev1,
            0.0,
            &SolverOptions::default()
        )
        .is_err());
        let unlabeled = Dataset::from_scalars(&[0.5], None).unwrap();
        assert!(fit_krglm(
            &unlabeled,
            Family::Gaussian,
            Kernel::Sobolev1,
            1.0,
            &SolverOptions::default()
        )
        .is_err());
    }
}
