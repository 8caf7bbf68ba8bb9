//! Penalty selection for kernel GLMs on an unlabeled target domain.
//!
//! The source data is split in two: candidates are trained on the first half
//! over a penalty grid, an imputation model is trained on the second half,
//! and each candidate is scored on the target covariates against the
//! imputer's soft pseudo-labels. Oracle (noiseless-label) and naive
//! (source hold-out) rules share the same candidate fits and serve as the
//! brackets for that risk proxy.

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::family::Family;
use crate::kernel::Kernel;
use crate::solver::{fit_with_gram, predict_scores_shared, FittedModel, SolverOptions};

/// How a candidate is scored.
#[derive(Debug, Clone)]
pub enum SelectionRule {
    /// Soft pseudo-labels from an imputation model trained on the held-out
    /// source half.
    Pseudo,
    /// Pseudo-labeling with externally supplied imputation scores on the
    /// target rows, bypassing the imputer fit (e.g. a known truth).
    PseudoWithScores(Array1<f64>),
    /// Noiseless selection: targets are the conditional means of the given
    /// true scores on the target rows.
    Oracle(Array1<f64>),
    /// Hold-out validation on the labeled second source half; never looks
    /// at the target data.
    NaiveHoldout,
}

/// Shared configuration for a selection run.
#[derive(Debug, Clone)]
pub struct SelectionSpec<'a> {
    pub family: Family,
    pub kernel: Kernel,
    pub grid: &'a [f64],
    pub imputer_lambda: f64,
    /// Size of the candidate-training half.
    pub n1: usize,
    pub seed: u64,
}

/// Outcome of one selection rule: per-candidate risks aligned with `grid`,
/// the winner, and the models involved.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub grid: Vec<f64>,
    pub risks: Vec<f64>,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    pub chosen_model: FittedModel,
    /// The fitted imputation model; present only for the `Pseudo` rule.
    pub imputer: Option<FittedModel>,
    pub split_seed: u64,
    /// One line per fit that did not converge.
    pub warnings: Vec<String>,
}

/// Empirical GLM risk `(1/m) sum_i [a(s_i) - t_i s_i]` of scores against
/// (possibly soft) targets.
///
/// Terms are accumulated in value-sorted order, so the result is invariant
/// to a joint permutation of the rows, bit for bit.
pub fn glm_risk(
    scores: ArrayView1<'_, f64>,
    targets: ArrayView1<'_, f64>,
    family: Family,
) -> Result<f64> {
    if scores.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} targets",
            scores.len(),
            targets.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Dimension("risk of an empty sample".into()));
    }
    let mut terms = Vec::with_capacity(scores.len());
    for (s, t) in scores.iter().zip(targets.iter()) {
        family.validate_response(*t)?;
        terms.push(family.log_partition(*s)? - t * s);
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>() / scores.len() as f64)
}

/// Disjoint uniform-random partition of the rows into sizes `(n1, n - n1)`,
/// reproducible from the seed. Row order within each part follows the
/// original dataset.
pub fn split_source(data: &Dataset, n1: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if n1 == 0 || n1 >= n {
        return Err(Error::Domain(format!(
            "split size n1={n1} must satisfy 1 <= n1 < n={n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut first = idx[..n1].to_vec();
    let mut second = idx[n1..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((data.subset(&first)?, data.subset(&second)?))
}

/// Grid flavours for [`default_candidate_grid`].
#[derive(Debug, Clone, Copy)]
pub enum GridStyle {
    /// `{2^k / (10 n) : k = 0..=ceil(log2(10 n))}`.
    Experiment,
    /// `{2^(j-1) mu^2 / n : 1 <= j <= ceil(log2 n) + 1}`.
    Theorem { mu2: f64 },
}

fn ceil_log2(m: u64) -> u32 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros()
    }
}

/// Geometric candidate grid, ascending and deduplicated.
pub fn default_candidate_grid(n: usize, style: GridStyle) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain(format!("grid needs n >= 2, got {n}")));
    }
    let mut grid: Vec<f64> = match style {
        GridStyle::Experiment => {
            let m = 10 * n as u64;
            let kmax = ceil_log2(m);
            (0..=kmax).map(|k| 2f64.powi(k as i32) / m as f64).collect()
        }
        GridStyle::Theorem { mu2 } => {
            if !(mu2 > 0.0 && mu2.is_finite()) {
                return Err(Error::Domain(format!("mu2 must be positive, got {mu2}")));
            }
            let jmax = ceil_log2(n as u64) + 1;
            (1..=jmax)
                .map(|j| 2f64.powi(j as i32 - 1) * mu2 / n as f64)
                .collect()
        }
    };
    grid.dedup();
    Ok(grid)
}

/// Imputer-penalty flavours for [`default_imputer_lambda`].
#[derive(Debug, Clone, Copy)]
pub enum ImputerStyle {
    /// `1 / (10 n)`.
    Experiment,
    /// `mu^2 log^7(n) log(n0 / delta) / n` with natural logs.
    Theorem { mu2: f64, n0: usize, delta: f64 },
}

pub(crate) fn theorem_imputer_lambda(n: f64, mu2: f64, n0: f64, delta: f64) -> f64 {
    mu2 * n.ln().powi(7) * (n0 / delta).ln() / n
}

pub fn default_imputer_lambda(n: usize, style: ImputerStyle) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "imputer penalty needs n >= 2, got {n}"
        )));
    }
    match style {
        ImputerStyle::Experiment => Ok(1.0 / (10.0 * n as f64)),
        ImputerStyle::Theorem { mu2, n0, delta } => {
            if !(mu2 > 0.0 && mu2.is_finite()) {
                return Err(Error::Domain(format!("mu2 must be positive, got {mu2}")));
            }
            if n0 == 0 {
                return Err(Error::Domain("n0 must be positive".into()));
            }
            if !(delta > 0.0 && delta <= 1.0 / std::f64::consts::E) {
                return Err(Error::Domain(format!(
                    "delta must lie in (0, 1/e], got {delta}"
                )));
            }
            Ok(theorem_imputer_lambda(n as f64, mu2, n0 as f64, delta))
        }
    }
}

/// Runs one selection rule. See [`select_multi`] for several rules sharing
/// the candidate fits.
pub fn select(
    source: &Dataset,
    target_x: &Dataset,
    spec: &SelectionSpec<'_>,
    rule: SelectionRule,
    opts: &SolverOptions,
) -> Result<SelectionReport> {
    let mut reports = select_multi(source, target_x, spec, &[rule], opts)?;
    Ok(reports.pop().unwrap())
}

/// Trains the candidate grid once on the first source half and scores it
/// under each requested rule. Ties in risk break toward the smallest
/// penalty. Non-converged candidates are kept but reported in `warnings`;
/// if every candidate diverged the run is an error.
pub fn select_multi(
    source: &Dataset,
    target_x: &Dataset,
    spec: &SelectionSpec<'_>,
    rules: &[SelectionRule],
    opts: &SolverOptions,
) -> Result<Vec<SelectionReport>> {
    if spec.grid.is_empty() {
        return Err(Error::Domain("candidate grid is empty".into()));
    }
    if rules.is_empty() {
        return Err(Error::Domain("no selection rule requested".into()));
    }
    for &l in spec.grid {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("grid penalty {l} must be positive")));
        }
    }
    let wants_pseudo = rules.iter().any(|r| matches!(r, SelectionRule::Pseudo));
    if wants_pseudo && !(spec.imputer_lambda > 0.0 && spec.imputer_lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "imputer penalty {} must be positive",
            spec.imputer_lambda
        )));
    }
    for rule in rules {
        let len = match rule {
            SelectionRule::PseudoWithScores(s) => s.len(),
            SelectionRule::Oracle(s) => s.len(),
            _ => continue,
        };
        if len != target_x.n() {
            return Err(Error::Dimension(format!(
                "{len} rule scores for {} target rows",
                target_x.n()
            )));
        }
    }

    let (d1, d2) = split_source(source, spec.n1, spec.seed)?;
    let candidates = fit_candidate_grid(&d1, spec.family, spec.kernel, spec.grid, opts)?;

    let mut warnings: Vec<String> = candidates
        .iter()
        .filter(|m| !m.converged())
        .map(|m| {
            format!(
                "candidate lambda={:e} did not converge within {} iterations",
                m.lambda(),
                m.iterations()
            )
        })
        .collect();
    if candidates.iter().all(|m| !m.converged()) {
        return Err(Error::Solver(
            "every candidate fit diverged; widen the iteration budget or the grid".into(),
        ));
    }

    let alpha_views: Vec<ArrayView1<'_, f64>> = candidates.iter().map(|m| m.alpha()).collect();
    // Target-side predictions happen only for rules that use the target;
    // the naive rule never evaluates the kernel there.
    let needs_target = rules
        .iter()
        .any(|r| !matches!(r, SelectionRule::NaiveHoldout));
    let target_scores = if needs_target {
        Some(predict_scores_shared(
            spec.kernel,
            d1.x(),
            &alpha_views,
            target_x,
        )?)
    } else {
        None
    };
    let needs_holdout = rules
        .iter()
        .any(|r| matches!(r, SelectionRule::NaiveHoldout));
    let holdout_scores = if needs_holdout {
        Some(predict_scores_shared(spec.kernel, d1.x(), &alpha_views, &d2)?)
    } else {
        None
    };

    let imputer = if wants_pseudo {
        let k2 = spec.kernel.gram(&d2)?;
        let model = fit_with_gram(
            &k2,
            &d2,
            spec.family,
            spec.kernel,
            spec.imputer_lambda,
            opts,
            None,
        )?;
        if !model.converged() {
            warnings.push(format!(
                "imputer fit at lambda={:e} did not converge within {} iterations",
                model.lambda(),
                model.iterations()
            ));
        }
        Some(model)
    } else {
        None
    };
    let pseudo_targets = match &imputer {
        Some(model) => Some(model.predict_mean(target_x)?),
        None => None,
    };

    let mut reports = Vec::with_capacity(rules.len());
    for rule in rules {
        let (scores, targets, keep_imputer) = match rule {
            SelectionRule::Pseudo => (
                target_scores.as_ref().unwrap(),
                pseudo_targets.clone().unwrap(),
                true,
            ),
            SelectionRule::PseudoWithScores(s) => {
                (target_scores.as_ref().unwrap(), means_of(spec.family, s)?, false)
            }
            SelectionRule::Oracle(truth) => {
                (target_scores.as_ref().unwrap(), means_of(spec.family, truth)?, false)
            }
            SelectionRule::NaiveHoldout => (
                holdout_scores.as_ref().unwrap(),
                d2.require_y()?.to_owned(),
                false,
            ),
        };
        let mut risks = Vec::with_capacity(candidates.len());
        for s in scores {
            let r = glm_risk(s.view(), targets.view(), spec.family)?;
            if !r.is_finite() {
                return Err(Error::Solver(format!("non-finite candidate risk {r}")));
            }
            risks.push(r);
        }
        let chosen_index = argmin_smallest_lambda(&risks, spec.grid);
        reports.push(SelectionReport {
            grid: spec.grid.to_vec(),
            risks,
            chosen_lambda: spec.grid[chosen_index],
            chosen_index,
            chosen_model: candidates[chosen_index].clone(),
            imputer: if keep_imputer { imputer.clone() } else { None },
            split_seed: spec.seed,
            warnings: warnings.clone(),
        });
    }
    Ok(reports)
}

fn means_of(family: Family, scores: &Array1<f64>) -> Result<Array1<f64>> {
    let mut t = Array1::zeros(scores.len());
    for (ti, si) in t.iter_mut().zip(scores.iter()) {
        *ti = family.mean(*si)?;
    }
    Ok(t)
}

/// Fits the grid on one dataset, sharing its Gram matrix and warm-starting
/// each fit from the next-larger penalty.
pub(crate) fn fit_candidate_grid(
    data: &Dataset,
    family: Family,
    kernel: Kernel,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<FittedModel>> {
    let k = kernel.gram(data)?;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut fits: Vec<Option<FittedModel>> = (0..grid.len()).map(|_| None).collect();
    let mut warm: Option<(Array1<f64>, Array1<f64>)> = None;
    for &gi in &order {
        let init = warm.as_ref().map(|(f, a)| (f, a));
        let model = fit_with_gram(&k, data, family, kernel, grid[gi], opts, init)?;
        warm = Some((model.fitted_scores().to_owned(), model.alpha().to_owned()));
        fits[gi] = Some(model);
    }
    Ok(fits.into_iter().map(Option::unwrap).collect())
}

fn argmin_smallest_lambda(risks: &[f64], grid: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..risks.len() {
        if risks[i] < risks[best] || (risks[i] == risks[best] && grid[i] < grid[best]) {
            best = i;
        }
    }
    best
}
