//! Repeated stratified K-fold pseudo-labeling.
//!
//! The small-sample variant of the selection procedure: per repeat, a fresh
//! stratified K-fold partition of the labeled in-distribution data is drawn.
//! Each fold trains the candidate grid, the complement trains the imputer,
//! and three risk curves are computed per fold (naive on the held-out ID
//! complement, pseudo and oracle on the out-of-distribution selection set).
//! Curves are averaged over all folds and repeats, the penalty minimizing
//! each averaged curve is selected, and final models are refit on all
//! labeled ID data.

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::family::Family;
use crate::kernel::Kernel;
use crate::selection::{fit_candidate_grid, glm_risk};
use crate::solver::{fit_krglm, predict_scores_shared, FittedModel, SolverOptions};

/// Fold assignments for `repeats` independent K-fold partitions of `[n]`.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub repeats: usize,
    pub folds: usize,
    /// `assignments[r][k]` holds the sorted row indices of fold k in repeat r.
    pub assignments: Vec<Vec<Vec<usize>>>,
    pub seed: u64,
}

impl FoldPlan {
    /// Draws `repeats` fresh partitions. Binary labels are stratified;
    /// anything else falls back to plain shuffled folds.
    pub fn new(
        n: usize,
        labels: Option<ArrayView1<'_, f64>>,
        folds: usize,
        repeats: usize,
        seed: u64,
    ) -> Result<Self> {
        if repeats == 0 {
            return Err(Error::Domain("fold plan needs at least one repeat".into()));
        }
        let stratify_on = labels.filter(|y| y.iter().all(|&v| v == 0.0 || v == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignments = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            assignments.push(kfold_with_rng(n, stratify_on, folds, &mut rng)?);
        }
        Ok(FoldPlan {
            repeats,
            folds,
            assignments,
            seed,
        })
    }

    fn complement(&self, r: usize, k: usize, n: usize) -> Vec<usize> {
        let mut in_fold = vec![false; n];
        for &i in &self.assignments[r][k] {
            in_fold[i] = true;
        }
        (0..n).filter(|&i| !in_fold[i]).collect()
    }
}

/// One stratified K-fold partition: per-class seeded shuffle, then a single
/// round-robin cursor over classes so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[f64], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if labels.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain("stratification requires binary 0/1 labels".into()));
    }
    let view = ArrayView1::from(labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kfold_with_rng(labels.len(), Some(view), folds, &mut rng)
}

fn kfold_with_rng(
    n: usize,
    labels: Option<ArrayView1<'_, f64>>,
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Domain(format!("{n} rows cannot fill {folds} folds")));
    }
    if let Some(y) = labels {
        if y.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} rows", y.len())));
        }
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); folds];
    let mut cursor = 0usize;
    let classes: Vec<Vec<usize>> = match labels {
        Some(y) => {
            let zeros = (0..n).filter(|&i| y[i] == 0.0).collect();
            let ones = (0..n).filter(|&i| y[i] == 1.0).collect();
            vec![zeros, ones]
        }
        None => vec![(0..n).collect()],
    };
    for mut members in classes {
        members.shuffle(rng);
        for i in members {
            out[cursor % folds].push(i);
            cursor += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Configuration of a cross-validated selection run.
#[derive(Debug, Clone)]
pub struct CvSpec<'a> {
    pub family: Family,
    pub kernel: Kernel,
    pub grid: &'a [f64],
    pub imputer_lambda: f64,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// When set, pseudo-labels come from `a'` of these fixed target scores
    /// instead of per-fold imputer fits (external imputers, validation).
    pub imputer_score_override: Option<Array1<f64>>,
}

/// Per-rule outcome: the fold-averaged risk curve, the winning penalty, and
/// the model refit on all labeled ID data.
#[derive(Debug, Clone)]
pub struct CvRuleResult {
    pub averaged_risks: Vec<f64>,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    pub refit_model: FittedModel,
}

/// Raw per-fold risk curves, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct FoldCurves {
    pub repeat: usize,
    pub fold: usize,
    pub naive: Vec<f64>,
    pub pseudo: Vec<f64>,
    pub oracle: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub naive: CvRuleResult,
    pub pseudo: CvRuleResult,
    /// Present when OOD selection labels were supplied.
    pub oracle: Option<CvRuleResult>,
    pub per_fold: Vec<FoldCurves>,
    pub warnings: Vec<String>,
}

/// Runs the repeated K-fold procedure with a freshly drawn fold plan.
pub fn cv_select(
    id_data: &Dataset,
    ood_sel_x: &Dataset,
    ood_sel_y: Option<ArrayView1<'_, f64>>,
    spec: &CvSpec<'_>,
    opts: &SolverOptions,
) -> Result<CvReport> {
    let y = id_data.require_y()?;
    let plan = FoldPlan::new(id_data.n(), Some(y), spec.folds, spec.repeats, spec.seed)?;
    cv_select_with_plan(id_data, ood_sel_x, ood_sel_y, spec, &plan, opts)
}

/// As [`cv_select`] but with a caller-supplied fold plan.
pub fn cv_select_with_plan(
    id_data: &Dataset,
    ood_sel_x: &Dataset,
    ood_sel_y: Option<ArrayView1<'_, f64>>,
    spec: &CvSpec<'_>,
    plan: &FoldPlan,
    opts: &SolverOptions,
) -> Result<CvReport> {
    if spec.grid.is_empty() {
        return Err(Error::Domain("candidate grid is empty".into()));
    }
    for &l in spec.grid {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("grid penalty {l} must be positive")));
        }
    }
    if spec.imputer_score_override.is_none()
        && !(spec.imputer_lambda > 0.0 && spec.imputer_lambda.is_finite())
    {
        return Err(Error::Domain(format!(
            "imputer penalty {} must be positive",
            spec.imputer_lambda
        )));
    }
    if let Some(y0) = &ood_sel_y {
        if y0.len() != ood_sel_x.n() {
            return Err(Error::Dimension(format!(
                "{} OOD labels for {} rows",
                y0.len(),
                ood_sel_x.n()
            )));
        }
    }
    let n = id_data.n();
    id_data.require_y()?;

    let fixed_pseudo = match &spec.imputer_score_override {
        Some(scores) => {
            if scores.len() != ood_sel_x.n() {
                return Err(Error::Dimension(format!(
                    "{} override scores for {} OOD rows",
                    scores.len(),
                    ood_sel_x.n()
                )));
            }
            let mut t = Array1::zeros(scores.len());
            for (ti, si) in t.iter_mut().zip(scores.iter()) {
                *ti = spec.family.mean(*si)?;
            }
            Some(t)
        }
        None => None,
    };

    let mut per_fold = Vec::with_capacity(plan.repeats * plan.folds);
    let mut warnings = Vec::new();
    for r in 0..plan.repeats {
        for k in 0..plan.folds {
            let cand_idx = &plan.assignments[r][k];
            let imp_idx = plan.complement(r, k, n);
            let cand_data = id_data.subset(cand_idx)?;
            let imp_data = id_data.subset(&imp_idx)?;

            let candidates =
                fit_candidate_grid(&cand_data, spec.family, spec.kernel, spec.grid, opts)?;
            for m in candidates.iter().filter(|m| !m.converged()) {
                warnings.push(format!(
                    "repeat {r} fold {k}: candidate lambda={:e} did not converge",
                    m.lambda()
                ));
            }
            if candidates.iter().all(|m| !m.converged()) {
                return Err(Error::Solver(format!(
                    "repeat {r} fold {k}: every candidate fit diverged"
                )));
            }
            let alphas: Vec<ArrayView1<'_, f64>> =
                candidates.iter().map(|m| m.alpha()).collect();

            let pseudo_targets = match &fixed_pseudo {
                Some(t) => t.clone(),
                None => {
                    let imputer = fit_krglm(
                        &imp_data,
                        spec.family,
                        spec.kernel,
                        spec.imputer_lambda,
                        opts,
                    )?;
                    if !imputer.converged() {
                        warnings.push(format!(
                            "repeat {r} fold {k}: imputer did not converge"
                        ));
                    }
                    imputer.predict_mean(ood_sel_x)?
                }
            };

            let holdout_scores =
                predict_scores_shared(spec.kernel, cand_data.x(), &alphas, &imp_data)?;
            let ood_scores =
                predict_scores_shared(spec.kernel, cand_data.x(), &alphas, ood_sel_x)?;

            let imp_y = imp_data.require_y()?;
            let mut naive = Vec::with_capacity(spec.grid.len());
            let mut pseudo = Vec::with_capacity(spec.grid.len());
            let mut oracle = ood_sel_y.as_ref().map(|_| Vec::with_capacity(spec.grid.len()));
            for c in 0..candidates.len() {
                naive.push(glm_risk(holdout_scores[c].view(), imp_y, spec.family)?);
                pseudo.push(glm_risk(
                    ood_scores[c].view(),
                    pseudo_targets.view(),
                    spec.family,
                )?);
                if let (Some(curve), Some(y0)) = (oracle.as_mut(), ood_sel_y.as_ref()) {
                    curve.push(glm_risk(ood_scores[c].view(), y0.view(), spec.family)?);
                }
            }
            per_fold.push(FoldCurves {
                repeat: r,
                fold: k,
                naive,
                pseudo,
                oracle,
            });
        }
    }

    // Fold averages are taken per repeat first, then across repeats; every
    // repeat holds exactly K folds, so this is the plain mean over all K*R
    // curves while keeping duplicated repeats exactly idempotent.
    let average = |pick: &dyn Fn(&FoldCurves) -> &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0f64; spec.grid.len()];
        for r in 0..plan.repeats {
            let mut rep = vec![0.0f64; spec.grid.len()];
            for fc in per_fold.iter().filter(|fc| fc.repeat == r) {
                for (a, v) in rep.iter_mut().zip(pick(fc)) {
                    *a += v;
                }
            }
            for (a, v) in acc.iter_mut().zip(rep.iter()) {
                *a += v / plan.folds as f64;
            }
        }
        acc.iter().map(|a| a / plan.repeats as f64).collect()
    };
    let naive_avg = average(&|fc| &fc.naive);
    let pseudo_avg = average(&|fc| &fc.pseudo);
    let oracle_avg = ood_sel_y
        .as_ref()
        .map(|_| average(&|fc| fc.oracle.as_deref().unwrap()));

    // Refit once per distinct winning penalty on all labeled ID data, so
    // rules that agree share bitwise-identical refits.
    let naive_ix = argmin_smallest(&naive_avg, spec.grid);
    let pseudo_ix = argmin_smallest(&pseudo_avg, spec.grid);
    let oracle_ix = oracle_avg.as_ref().map(|c| argmin_smallest(c, spec.grid));
    let mut refits: Vec<(usize, FittedModel)> = Vec::new();
    for ix in [Some(naive_ix), Some(pseudo_ix), oracle_ix].into_iter().flatten() {
        if !refits.iter().any(|(i, _)| *i == ix) {
            let model = fit_krglm(id_data, spec.family, spec.kernel, spec.grid[ix], opts)?;
            if !model.converged() {
                warnings.push(format!(
                    "final refit at lambda={:e} did not converge",
                    model.lambda()
                ));
            }
            refits.push((ix, model));
        }
    }
    let refit_for = |ix: usize| -> FittedModel {
        refits.iter().find(|(i, _)| *i == ix).unwrap().1.clone()
    };

    Ok(CvReport {
        grid: spec.grid.to_vec(),
        naive: CvRuleResult {
            averaged_risks: naive_avg,
            chosen_lambda: spec.grid[naive_ix],
            chosen_index: naive_ix,
            refit_model: refit_for(naive_ix),
        },
        pseudo: CvRuleResult {
            averaged_risks: pseudo_avg,
            chosen_lambda: spec.grid[pseudo_ix],
            chosen_index: pseudo_ix,
            refit_model: refit_for(pseudo_ix),
        },
        oracle: oracle_avg.map(|curve| {
            let ix = oracle_ix.unwrap();
            CvRuleResult {
                averaged_risks: curve,
                chosen_lambda: spec.grid[ix],
                chosen_index: ix,
                refit_model: refit_for(ix),
            }
        }),
        per_fold,
        warnings,
    })
}

fn argmin_smallest(risks: &[f64], grid: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..risks.len() {
        if risks[i] < risks[best] || (risks[i] == risks[best] && grid[i] < grid[best]) {
            best = i;
        }
    }
    best
}
