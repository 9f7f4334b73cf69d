//! Breiman's waveform generator with 19 extra noise features (the 40-attribute
//! version): each class is a random convex mix of two of three shifted
//! triangular waves plus unit Gaussian noise.

use mdnc::data::Dataset;
use mdnc::seed;
use rand::Rng;
use rand_distr::StandardNormal;

pub const SIGNAL: usize = 21;
pub const NOISE: usize = 19;

fn triangle(peak: f64, i: usize) -> f64 {
    (6.0 - (i as f64 - peak).abs()).max(0.0)
}

pub fn waveform(n: usize, seed_value: u64) -> Dataset {
    let waves: [[f64; SIGNAL]; 3] = [7.0, 15.0, 11.0].map(|peak| std::array::from_fn(|i| triangle(peak, i + 1)));
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut rng = seed::rng(seed_value);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = rng.gen_range(0..3);
        let (a, b) = pairs[class];
        let u: f64 = rng.gen();
        let mut row: Vec<f64> = (0..SIGNAL)
            .map(|i| u * waves[a][i] + (1.0 - u) * waves[b][i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        row.extend((0..NOISE).map(|_| rng.sample::<f64, _>(StandardNormal)));
        rows.push(row);
        labels.push(class);
    }
    Dataset::from_rows(&rows, &labels, 3).unwrap()
}
