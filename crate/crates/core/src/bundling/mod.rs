//! Willingness-to-pay learning from binary sales data and bundle pricing.
//!
//! Sales are simulated from exponential valuations, an [`MdnP2bModel`] per
//! product learns a Gaussian-mixture valuation law, and the bundle law is the
//! closed-form convolution of the two mixtures.

mod experiment;
mod model;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{exp_survival, hypoexp_survival, GaussianMixture, GroundTruthWtp};
use crate::seed;

pub use experiment::{
    read_curve_csv, run_bundle_experiment, write_curve_csv, BundleExperiment, BundleSummary, CurveSet, ProductFit,
    SeedRun, SummaryRow,
};
pub use model::{
    estimated_purchase_prob, train_p2b, MdnP2bModel, P2bConfig, P2bFit, DUMMY_INPUT, NO_SALE, P2B_MIXTURE_CHOICES,
    SALE,
};

/// One offer: the price shown and whether the customer bought.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalesRecord {
    pub price: f64,
    pub sold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRange {
    pub lo: f64,
    pub hi: f64,
}

impl PriceRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < 0.0 {
            return Err(Error::domain(format!("price range [{lo}, {hi}] is empty or invalid")));
        }
        Ok(Self { lo, hi })
    }
}

impl Default for PriceRange {
    fn default() -> Self {
        Self { lo: 0.0, hi: 300.0 }
    }
}

/// Offers at uniform prices; a record is a sale iff the sampled valuation is
/// at least the price.
pub fn generate_sales(truth: &GroundTruthWtp, n: usize, range: PriceRange, seed: u64) -> Result<Vec<SalesRecord>> {
    if n == 0 {
        return Err(Error::validation("need at least one sales record"));
    }
    let range = PriceRange::new(range.lo, range.hi)?;
    let mut rng = seed::rng(seed);
    Ok((0..n)
        .map(|_| {
            let price = if range.lo == range.hi {
                range.lo
            } else {
                rng.gen_range(range.lo..range.hi)
            };
            let wtp = truth.sample(&mut rng);
            SalesRecord {
                price,
                sold: wtp >= price,
            }
        })
        .collect())
}

/// Evenly spaced prices `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for PriceGrid {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 300.0,
            step: 0.5,
        }
    }
}

impl PriceGrid {
    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.hi >= self.lo) || self.lo < 0.0 || !self.hi.is_finite() {
            return Err(Error::domain(format!("bad price grid {self:?}")));
        }
        Ok((0..self.len()).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueCurve {
    pub revenue: Vec<f64>,
    pub optimal_price: f64,
    pub optimal_revenue: f64,
}

/// `p · V(p)` on the grid with its first maximizer.
pub fn revenue_from_probabilities(prices: &[f64], probabilities: &[f64]) -> Result<RevenueCurve> {
    if prices.len() != probabilities.len() || prices.is_empty() {
        return Err(Error::shape("prices and probabilities must be nonempty and aligned"));
    }
    let revenue: Vec<f64> = prices.iter().zip(probabilities).map(|(p, v)| p * v).collect();
    let best = crate::classifier::argmax(&revenue);
    Ok(RevenueCurve {
        optimal_price: prices[best],
        optimal_revenue: revenue[best],
        revenue,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEstimate {
    pub bundle_mixture: GaussianMixture,
    pub grid: PriceGrid,
    pub prices: Vec<f64>,
    pub purchase_probability: Vec<f64>,
    pub revenue: RevenueCurve,
}

impl BundleEstimate {
    /// Mixture mass below zero; valuations are nonnegative but the Gaussians are not.
    pub fn left_tail_mass(&self) -> f64 {
        self.bundle_mixture.cdf(0.0)
    }
}

/// Survival curve `1 − F(p)` of a mixture on the grid.
pub fn mixture_purchase_curve(mixture: &GaussianMixture, prices: &[f64]) -> Vec<f64> {
    prices.iter().map(|&p| 1.0 - mixture.cdf(p)).collect()
}

pub fn bundle_distribution(a: &MdnP2bModel, b: &MdnP2bModel, grid: &PriceGrid) -> Result<BundleEstimate> {
    bundle_from_mixtures(&a.mixture()?, &b.mixture()?, grid)
}

pub fn bundle_from_mixtures(a: &GaussianMixture, b: &GaussianMixture, grid: &PriceGrid) -> Result<BundleEstimate> {
    let bundle_mixture = a.convolve(b);
    let prices = grid.points()?;
    let purchase_probability = mixture_purchase_curve(&bundle_mixture, &prices);
    let revenue = revenue_from_probabilities(&prices, &purchase_probability)?;
    Ok(BundleEstimate {
        bundle_mixture,
        grid: *grid,
        prices,
        purchase_probability,
        revenue,
    })
}

pub fn revenue_curve(estimate: &BundleEstimate) -> Result<RevenueCurve> {
    revenue_from_probabilities(&estimate.prices, &estimate.purchase_probability)
}

/// Closed-form purchase probabilities of the exponential ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueCurves {
    pub prices: Vec<f64>,
    pub product1: Vec<f64>,
    pub product2: Vec<f64>,
    pub bundle: Vec<f64>,
    pub revenue: RevenueCurve,
}

pub fn true_curves(rate1: f64, rate2: f64, grid: &PriceGrid) -> Result<TrueCurves> {
    if rate1 == rate2 {
        return Err(Error::domain(format!("bundle ground truth needs distinct rates, got {rate1} twice")));
    }
    let prices = grid.points()?;
    let product1 = prices.iter().map(|&p| exp_survival(rate1, p)).collect::<Result<Vec<_>>>()?;
    let product2 = prices.iter().map(|&p| exp_survival(rate2, p)).collect::<Result<Vec<_>>>()?;
    let bundle = prices
        .iter()
        .map(|&p| hypoexp_survival(rate1, rate2, p))
        .collect::<Result<Vec<_>>>()?;
    let revenue = revenue_from_probabilities(&prices, &bundle)?;
    Ok(TrueCurves {
        prices,
        product1,
        product2,
        bundle,
        revenue,
    })
}

/// Largest absolute gap between two curves.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
