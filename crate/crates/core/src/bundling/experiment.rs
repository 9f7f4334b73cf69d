use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MeanStd;
use crate::error::{Error, Result};
use crate::mixture::{GaussianMixture, GroundTruthWtp};
use crate::seed;

use super::{
    bundle_from_mixtures, generate_sales, mixture_purchase_curve, revenue_from_probabilities, sup_distance,
    train_p2b, true_curves, MdnP2bModel, P2bConfig, PriceGrid, PriceRange,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleExperiment {
    pub rate1: f64,
    pub rate2: f64,
    /// Records simulated per product and seed.
    pub records: usize,
    pub seeds: Vec<u64>,
    pub price_range: PriceRange,
    pub grid: PriceGrid,
    pub model: P2bConfig,
}

impl Default for BundleExperiment {
    fn default() -> Self {
        Self {
            rate1: 0.03,
            rate2: 0.02,
            records: 100_000,
            seeds: (0..5).collect(),
            price_range: PriceRange::default(),
            grid: PriceGrid::default(),
            model: P2bConfig::default(),
        }
    }
}

impl BundleExperiment {
    pub fn validate(&self) -> Result<()> {
        GroundTruthWtp::new(self.rate1)?;
        GroundTruthWtp::new(self.rate2)?;
        if self.rate1 == self.rate2 {
            return Err(Error::domain("product rates must differ"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("at least one seed is required"));
        }
        PriceRange::new(self.price_range.lo, self.price_range.hi)?;
        self.grid.points()?;
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductFit {
    pub mixture: GaussianMixture,
    pub mean: f64,
    pub test_accuracy: Option<f64>,
    pub left_tail_mass: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Sup-norm gap between the fitted and true purchase-probability curves.
    pub curve_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub product1: ProductFit,
    pub product2: ProductFit,
    pub bundle_mean: f64,
    pub bundle_left_tail_mass: f64,
    pub bundle_curve_error: f64,
    pub optimal_price: f64,
    pub optimal_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub true_mean: f64,
    pub estimated_mean: MeanStd,
    pub absolute_error: f64,
    pub test_accuracy: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub experiment: BundleExperiment,
    pub runs: Vec<SeedRun>,
    pub rows: Vec<SummaryRow>,
    pub true_optimal_price: f64,
    pub true_optimal_revenue: f64,
    pub optimal_price: MeanStd,
}

impl BundleSummary {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Fits both products for every seed and summarizes the learned means.
/// Returns the summary and the fitted `[product1, product2]` models per seed.
pub fn run_bundle_experiment(exp: &BundleExperiment) -> Result<(BundleSummary, Vec<[MdnP2bModel; 2]>)> {
    exp.validate()?;
    let truth = [GroundTruthWtp::new(exp.rate1)?, GroundTruthWtp::new(exp.rate2)?];
    let reference = true_curves(exp.rate1, exp.rate2, &exp.grid)?;

    let fits = exp
        .seeds
        .par_iter()
        .map(|&s| -> Result<(SeedRun, [MdnP2bModel; 2])> {
            let fit_product = |i: usize| -> Result<(ProductFit, MdnP2bModel)> {
                let records = generate_sales(&truth[i], exp.records, exp.price_range, seed::derive(s, i as u64 + 1))?;
                let cfg = P2bConfig {
                    seed: seed::derive(s, 100 + i as u64),
                    ..exp.model
                };
                let fit = train_p2b(&records, &cfg)?;
                let mixture = fit.model.mixture()?;
                let true_curve = if i == 0 { &reference.product1 } else { &reference.product2 };
                let product = ProductFit {
                    mean: mixture.mean(),
                    test_accuracy: fit.test_accuracy,
                    left_tail_mass: mixture.cdf(0.0),
                    best_epoch: fit.best_epoch,
                    epochs_run: fit.epochs_run,
                    curve_error: sup_distance(&mixture_purchase_curve(&mixture, &reference.prices), true_curve),
                    mixture,
                };
                Ok((product, fit.model))
            };
            let (p1, m1) = fit_product(0)?;
            let (p2, m2) = fit_product(1)?;
            let bundle = bundle_from_mixtures(&p1.mixture, &p2.mixture, &exp.grid)?;
            log::info!(
                "seed {s}: means {:.2} / {:.2} / {:.2}",
                p1.mean,
                p2.mean,
                bundle.bundle_mixture.mean()
            );
            let run = SeedRun {
                seed: s,
                bundle_mean: bundle.bundle_mixture.mean(),
                bundle_left_tail_mass: bundle.left_tail_mass(),
                bundle_curve_error: sup_distance(&bundle.purchase_probability, &reference.bundle),
                optimal_price: bundle.revenue.optimal_price,
                optimal_revenue: bundle.revenue.optimal_revenue,
                product1: p1,
                product2: p2,
            };
            Ok((run, [m1, m2]))
        })
        .collect::<Result<Vec<_>>>()?;
    let (runs, models): (Vec<_>, Vec<_>) = fits.into_iter().unzip();

    let row = |name: &str, true_mean: f64, mean_of: fn(&SeedRun) -> f64, acc_of: Option<fn(&SeedRun) -> Option<f64>>| {
        let estimated_mean = MeanStd::of(&runs.iter().map(mean_of).collect::<Vec<_>>());
        let test_accuracy = acc_of.and_then(|f| {
            runs.iter()
                .map(f)
                .collect::<Option<Vec<_>>>()
                .map(|v| MeanStd::of(&v))
        });
        SummaryRow {
            name: name.to_string(),
            true_mean,
            absolute_error: (estimated_mean.mean - true_mean).abs(),
            estimated_mean,
            test_accuracy,
        }
    };
    let rows = vec![
        row("Product-1", truth[0].mean(), |r| r.product1.mean, Some(|r| r.product1.test_accuracy)),
        row("Product-2", truth[1].mean(), |r| r.product2.mean, Some(|r| r.product2.test_accuracy)),
        row("Bundle", truth[0].mean() + truth[1].mean(), |r| r.bundle_mean, None),
    ];
    let summary = BundleSummary {
        optimal_price: MeanStd::of(&runs.iter().map(|r| r.optimal_price).collect::<Vec<_>>()),
        true_optimal_price: reference.revenue.optimal_price,
        true_optimal_revenue: reference.revenue.optimal_revenue,
        experiment: exp.clone(),
        runs,
        rows,
    };
    Ok((summary, models))
}

/// One curve on the price grid next to its ground-truth counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub name: String,
    pub prices: Vec<f64>,
    pub true_values: Vec<f64>,
    pub estimated_values: Vec<f64>,
}

impl CurveSet {
    /// Purchase probabilities of both products and the bundle, and bundle revenue.
    pub fn for_models(exp: &BundleExperiment, product1: &MdnP2bModel, product2: &MdnP2bModel) -> Result<Vec<CurveSet>> {
        let reference = true_curves(exp.rate1, exp.rate2, &exp.grid)?;
        let (m1, m2) = (product1.mixture()?, product2.mixture()?);
        let bundle = bundle_from_mixtures(&m1, &m2, &exp.grid)?;
        let prices = reference.prices.clone();
        let est_revenue = revenue_from_probabilities(&prices, &bundle.purchase_probability)?.revenue;
        let set = |name: &str, true_values: Vec<f64>, estimated_values: Vec<f64>| CurveSet {
            name: name.to_string(),
            prices: prices.clone(),
            true_values,
            estimated_values,
        };
        Ok(vec![
            set("product1_purchase", reference.product1.clone(), mixture_purchase_curve(&m1, &prices)),
            set("product2_purchase", reference.product2.clone(), mixture_purchase_curve(&m2, &prices)),
            set("bundle_purchase", reference.bundle.clone(), bundle.purchase_probability.clone()),
            set("bundle_revenue", reference.revenue.revenue.clone(), est_revenue),
        ])
    }
}

/// Writes `price,true_value,estimated_value` rows with a header.
pub fn write_curve_csv(path: &Path, curve: &CurveSet) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::validation(format!("{other:?}")),
        })?;
    writer.write_record(["price", "true_value", "estimated_value"])?;
    for ((p, t), e) in curve.prices.iter().zip(&curve.true_values).zip(&curve.estimated_values) {
        writer.write_record([p.to_string(), t.to_string(), e.to_string()])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<CurveSet> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::validation(format!("{other:?}")),
    })?;
    let mut curve = CurveSet {
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        prices: Vec::new(),
        true_values: Vec::new(),
        estimated_values: Vec::new(),
    };
    for (i, record) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        let (p, t, e) = record.map_err(|err| Error::MalformedRow {
            path: path.to_path_buf(),
            row: i + 2,
            detail: err.to_string(),
        })?;
        curve.prices.push(p);
        curve.true_values.push(t);
        curve.estimated_values.push(e);
    }
    Ok(curve)
}
