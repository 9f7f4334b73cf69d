use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{compute_metrics, kfold, Averaging, Dataset, Metrics, MetricsSummary, NormalizationStats};
use crate::error::{Error, Result};
use crate::nn::ModelDocument;
use crate::seed;

use super::train::{evaluate, train, TrainingLog};
use super::{Classifier, GridSpec, MdnC1Model, MdnC2Model, TrainConfig, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub config: TrainConfig,
    pub validation_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub best_config: TrainConfig,
    pub best_validation_loss: f64,
    pub grid: Vec<GridPointResult>,
    pub test_metrics: Metrics,
}

/// The selected model of one fold with the statistics its inputs were scaled by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFold {
    pub document: ModelDocument,
    pub normalization: NormalizationStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub variant: Variant,
    pub folds: usize,
    pub seed: u64,
    pub averaging: Averaging,
    pub fold_reports: Vec<FoldReport>,
    pub summary: MetricsSummary,
}

struct Fitted {
    point: GridPointResult,
    document: ModelDocument,
    predicted_test: Vec<usize>,
}

fn fit_one<M: Classifier>(
    model: M,
    train_set: &Dataset,
    val_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<Fitted> {
    let outcome = train(model, train_set, val_set, cfg)?;
    let predicted_test = evaluate(&outcome.model, test_set)?.predicted;
    let TrainingLog {
        best_epoch,
        best_validation_loss,
        epochs,
        ..
    } = outcome.log;
    Ok(Fitted {
        point: GridPointResult {
            config: *cfg,
            validation_loss: best_validation_loss,
            best_epoch,
            epochs_run: epochs.len(),
        },
        document: outcome.model.to_document(),
        predicted_test,
    })
}

fn fit_point(variant: Variant, cfg: &TrainConfig, train_set: &Dataset, val_set: &Dataset, test_set: &Dataset) -> Result<Fitted> {
    let (d, c) = (train_set.dim(), train_set.class_count());
    let arch = cfg.architecture();
    match variant {
        Variant::C1 => fit_one(MdnC1Model::new(d, c, &arch, cfg.seed)?, train_set, val_set, test_set, cfg),
        Variant::C2 => fit_one(MdnC2Model::new(d, c, &arch, cfg.seed)?, train_set, val_set, test_set, cfg),
        Variant::P2b => Err(Error::validation("grid search covers the c1 and c2 classifiers")),
    }
}

/// k-fold evaluation with a per-fold hyperparameter search. Each fold
/// z-normalizes with its training statistics, trains every grid point and
/// scores the point with the lowest validation cross-entropy on the held-out
/// fold. Results do not depend on the rayon thread count.
pub fn grid_search(
    dataset: &Dataset,
    variant: Variant,
    grid: &GridSpec,
    base: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<(GridReport, Vec<FittedFold>)> {
    let points = grid.points(base, variant)?;
    let plan = kfold(dataset.len(), folds, seed)?;
    let classes = dataset.class_count();

    let per_fold = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| -> Result<(FoldReport, FittedFold)> {
            let stats = NormalizationStats::fit(&dataset.subset(&fold.train))?;
            let train_set = stats.apply(&dataset.subset(&fold.train))?;
            let val_set = stats.apply(&dataset.subset(&fold.validation))?;
            let test_set = stats.apply(&dataset.subset(&fold.test))?;
            let fold_seed = seed::derive(seed, f as u64);
            let fitted = points
                .par_iter()
                .map(|p| {
                    let cfg = TrainConfig { seed: fold_seed, ..*p };
                    fit_point(variant, &cfg, &train_set, &val_set, &test_set)
                })
                .collect::<Result<Vec<_>>>()?;
            // first minimum wins, so ties resolve in grid order
            let best = fitted
                .iter()
                .enumerate()
                .fold(0, |b, (i, r)| {
                    if r.point.validation_loss < fitted[b].point.validation_loss {
                        i
                    } else {
                        b
                    }
                });
            let truth: Vec<usize> = test_set.labels().to_vec();
            let test_metrics = compute_metrics(&fitted[best].predicted_test, &truth, classes)?;
            log::info!(
                "{variant} fold {f}: best {:?} val {:.4} test acc {:.4}",
                fitted[best].point.config.architecture(),
                fitted[best].point.validation_loss,
                test_metrics.accuracy
            );
            let report = FoldReport {
                fold: f,
                best_config: fitted[best].point.config,
                best_validation_loss: fitted[best].point.validation_loss,
                grid: fitted.iter().map(|r| r.point.clone()).collect(),
                test_metrics,
            };
            let document = fitted.into_iter().nth(best).map(|r| r.document).unwrap();
            Ok((report, FittedFold { document, normalization: stats }))
        })
        .collect::<Result<Vec<_>>>()?;

    let (fold_reports, fitted): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    let summary = MetricsSummary::of(&fold_reports.iter().map(|r| r.test_metrics.clone()).collect::<Vec<_>>());
    Ok((
        GridReport {
            variant,
            folds,
            seed,
            averaging: Averaging::Weighted,
            fold_reports,
            summary,
        },
        fitted,
    ))
}
