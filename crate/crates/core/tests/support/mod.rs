#![allow(dead_code)]

pub mod waveform;

use std::path::PathBuf;

use mdnc::bundling::MdnP2bModel;
use mdnc::classifier::{Architecture, Classifier, MdnC1Model, MdnC2Model};
use mdnc::data::{load_csv, CsvSchema, Dataset};
use mdnc::mixture::GaussianMixture;
use mdnc::seed;
use rand::Rng;

pub fn pima_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/pima.csv")
}

pub fn pima() -> Dataset {
    load_csv(&pima_path(), &CsvSchema::default()).expect("bundled pima csv")
}

/// Two well separated Gaussian blobs in `dim` dimensions.
pub fn blobs(n: usize, dim: usize, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let centre = if y == 0 { -2.0 } else { 2.0 };
        rows.push((0..dim).map(|_| centre + rng.gen_range(-1.0..1.0)).collect());
        labels.push(y);
    }
    Dataset::from_rows(&rows, &labels, 2).unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Compares analytic gradients with five-point central differences of the evaluation
/// loss. Entries where both magnitudes are below `floor` are skipped, since
/// their relative error measures only rounding noise.
pub fn gradient_check<M: Classifier>(model: &M, xs: &[Vec<f64>], labels: &[usize], sparsity: f64) -> GradCheck {
    const STEP: f64 = 1e-4;
    const FLOOR: f64 = 1e-7;
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let (_, analytic) = model.batch_loss_grad(&refs, labels, sparsity, None).unwrap();
    let base = model.parameters();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut loss_at = |i: usize, offset: f64| {
        let mut shifted = base.clone();
        shifted.as_mut_slice()[i] += offset;
        probe.set_parameters(&shifted).unwrap();
        probe.batch_loss(&refs, labels, sparsity).unwrap()
    };
    for i in 0..base.len() {
        // fourth-order central difference
        let numeric = (-loss_at(i, 2.0 * STEP) + 8.0 * loss_at(i, STEP) - 8.0 * loss_at(i, -STEP)
            + loss_at(i, -2.0 * STEP))
            / (12.0 * STEP);
        let a = analytic.as_slice()[i];
        let scale = a.abs().max(numeric.abs());
        if scale < FLOOR {
            continue;
        }
        worst = worst.max((a - numeric).abs() / scale);
        checked += 1;
    }
    GradCheck {
        max_relative_error: worst,
        checked,
    }
}

fn random_batch(rng: &mut seed::Rng, n: usize, dim: usize, classes: usize, scale: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let xs = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()).collect();
    let ys = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    (xs, ys)
}

/// Gradient checks over `configs` random models cycling through C1, C2 and
/// P2B; returns a description and the worst relative error of each.
pub fn gradient_suite(configs: usize, seed_value: u64) -> Vec<(String, GradCheck)> {
    let mut rng = seed::rng(seed_value);
    (0..configs)
        .map(|i| {
            let arch = Architecture {
                layers: rng.gen_range(1..=2),
                units: rng.gen_range(2..=6),
                mixtures: rng.gen_range(1..=3),
            };
            let dim = rng.gen_range(1..=4);
            let classes = rng.gen_range(2..=4);
            let init = rng.gen();
            match i % 3 {
                0 => {
                    let m = MdnC1Model::new(dim, classes, &arch, init).unwrap();
                    let (xs, ys) = random_batch(&mut rng, 5, dim, classes, 2.0);
                    let sparsity = if rng.gen_bool(0.5) { 0.01 } else { 0.0 };
                    (format!("c1 d={dim} C={classes} {arch:?} λ={sparsity}"), gradient_check(&m, &xs, &ys, sparsity))
                }
                1 => {
                    let m = MdnC2Model::new(dim, classes, &arch, init).unwrap();
                    let (xs, ys) = random_batch(&mut rng, 5, dim, classes, 2.0);
                    (format!("c2 d={dim} C={classes} {arch:?}"), gradient_check(&m, &xs, &ys, 0.0))
                }
                _ => {
                    let m = MdnP2bModel::new(&arch, 100.0, init).unwrap();
                    let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(0.0..300.0)]).collect();
                    let ys = (0..8).map(|_| rng.gen_range(0..2)).collect::<Vec<_>>();
                    (format!("p2b {arch:?}"), gradient_check(&m, &xs, &ys, 0.0))
                }
            }
        })
        .collect()
}

pub fn random_mixture(rng: &mut seed::Rng, k: usize) -> GaussianMixture {
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let means: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let stds: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..3.0)).collect();
    GaussianMixture::from_parts(&weights, &means, &stds).unwrap()
}

/// For each of `cases` random mixture pairs, the closed-form convolution CDF at
/// the sum mean against the empirical CDF of `samples` simulated sums, as a
/// z-score in units of the binomial standard error.
pub fn convolution_z_scores(cases: usize, samples: usize, seed_value: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_value);
    (0..cases)
        .map(|_| {
            let ka = rng.gen_range(1..=3);
            let kb = rng.gen_range(1..=3);
            let a = random_mixture(&mut rng, ka);
            let b = random_mixture(&mut rng, kb);
            let h = a.convolve(&b);
            let t = h.mean();
            let hits = (0..samples)
                .filter(|_| a.sample(&mut rng) + b.sample(&mut rng) <= t)
                .count();
            let expected = h.cdf(t);
            let se = (expected * (1.0 - expected) / samples as f64).sqrt();
            (hits as f64 / samples as f64 - expected) / se
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ConvolutionVerdict {
    pub beyond_three_se: usize,
    pub mean_square_z: f64,
    pub worst: f64,
}

impl ConvolutionVerdict {
    /// Each case is held to three standard errors; with 100 independent cases
    /// about 0.27 exceedances are expected by chance, so up to two are allowed
    /// (P(≥3) ≈ 0.0025). A mean squared z far from 1 signals bias.
    pub fn passes(&self) -> bool {
        self.beyond_three_se <= 2 && (0.6..1.5).contains(&self.mean_square_z)
    }
}

pub fn convolution_monte_carlo(cases: usize, samples: usize, seed_value: u64) -> ConvolutionVerdict {
    let z = convolution_z_scores(cases, samples, seed_value);
    ConvolutionVerdict {
        beyond_three_se: z.iter().filter(|v| v.abs() > 3.0).count(),
        mean_square_z: z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64,
        worst: z.iter().fold(0.0, |a, v| a.max(v.abs())),
    }
}

/// Forward passes of random C1/C2/P2B models on random (occasionally extreme)
/// inputs; returns the number of passes that broke the simplex or positivity
/// invariants.
pub fn simplex_violations(passes: usize, seed_value: u64) -> usize {
    let mut rng = seed::rng(seed_value);
    let mut bad = 0;
    let mut i = 0;
    while i < passes {
        let arch = Architecture {
            layers: rng.gen_range(1..=2),
            units: rng.gen_range(2..=8),
            mixtures: rng.gen_range(1..=5),
        };
        let dim = rng.gen_range(1..=6);
        let classes = rng.gen_range(2..=5);
        let init: u64 = rng.gen();
        let c1 = MdnC1Model::new(dim, classes, &arch, init).unwrap();
        let c2 = MdnC2Model::new(dim, classes, &arch, init).unwrap();
        let p2b = MdnP2bModel::new(&Architecture { mixtures: arch.mixtures.min(3), ..arch }, 100.0, init).unwrap();
        for _ in 0..10 {
            let scale = if rng.gen_bool(0.1) { 1e3 } else { 3.0 };
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
            let price = [rng.gen_range(-50.0..500.0)];
            for p in [c1.forward(&x).unwrap(), c2.forward(&x).unwrap(), p2b.forward(&price).unwrap()] {
                let sum: f64 = p.class_scores.iter().sum();
                let weights: f64 = p.mixture.weights().iter().sum();
                let ok = (sum - 1.0).abs() <= 1e-9
                    && p.class_scores.iter().all(|s| (0.0..=1.0).contains(s))
                    && (weights - 1.0).abs() <= 1e-9
                    && p.mixture.stds().iter().all(|s| *s > 0.0);
                if !ok {
                    bad += 1;
                }
            }
            i += 3;
        }
    }
    bad
}
