//! Univariate Gaussian mixtures and the exponential ground-truth WTP laws.
//!
//! Everything here is a pure function of immutable values. Mixtures are the
//! currency passed between the classifier heads, the bundling pipeline and
//! the curve exporters: weights on the simplex, strictly positive stds.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest standard deviation a component may carry.
pub const STD_FLOOR: f64 = 1e-6;

/// Maximum deviation of the weight sum from one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Weight sums further than this from one are rejected instead of renormalized.
const WEIGHT_SUM_REJECT: f64 = 1e-6;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, defined for every `x` including the infinities.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub(crate) fn normal_density(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x), computed through the complementary error function.
pub fn standard_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("standard normal cdf of non-finite {x}")));
    }
    Ok(phi(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

impl GaussianComponent {
    /// Builds a component, flooring `std` at [`STD_FLOOR`].
    pub fn new(weight: f64, mean: f64, std: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::domain(format!("component weight {weight} outside [0, 1]")));
        }
        if !mean.is_finite() {
            return Err(Error::domain(format!("component mean {mean} is not finite")));
        }
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::domain(format!("component std {std} must be positive and finite")));
        }
        Ok(Self {
            weight,
            mean,
            std: std.max(STD_FLOOR),
        })
    }

    #[inline]
    pub fn weighted_cdf(&self, x: f64) -> f64 {
        self.weight * phi((x - self.mean) / self.std)
    }

    #[inline]
    pub fn weighted_pdf(&self, x: f64) -> f64 {
        self.weight * normal_density((x - self.mean) / self.std) / self.std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GaussianComponent>", into = "Vec<GaussianComponent>")]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    /// Validates and renormalizes the weights so they sum to one.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("a mixture needs at least one component"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !total.is_finite() || (total - 1.0).abs() > WEIGHT_SUM_REJECT {
            return Err(Error::domain(format!("mixture weights sum to {total}, expected 1")));
        }
        let components = components
            .into_iter()
            .map(|c| GaussianComponent {
                weight: c.weight / total,
                ..c
            })
            .collect();
        Ok(Self { components })
    }

    /// Builds a mixture from parallel weight/mean/std slices.
    pub fn from_parts(weights: &[f64], means: &[f64], stds: &[f64]) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != stds.len() {
            return Err(Error::shape(format!(
                "mixture parts have lengths {}/{}/{}",
                weights.len(),
                means.len(),
                stds.len()
            )));
        }
        let components = weights
            .iter()
            .zip(means)
            .zip(stds)
            .map(|((&w, &m), &s)| GaussianComponent::new(w, m, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![GaussianComponent::new(1.0, mean, std)?])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mean).collect()
    }

    pub fn stds(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.std).collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let value: f64 = self.components.iter().map(|c| c.weighted_cdf(x)).sum();
        value.clamp(0.0, 1.0)
    }

    /// Per-component `weight * Φ((x - mean) / std)`.
    pub fn weighted_component_cdf(&self, x: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.weighted_cdf(x)).collect()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weighted_pdf(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.std * c.std + (c.mean - mean).powi(2)))
            .sum()
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    ///
    /// Component `(k, j)` sits at index `k * other.len() + j`.
    pub fn convolve(&self, other: &GaussianMixture) -> GaussianMixture {
        let mut components = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                components.push(GaussianComponent {
                    weight: a.weight * b.weight,
                    mean: a.mean + b.mean,
                    std: a.std.hypot(b.std).max(STD_FLOOR),
                });
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= total;
        }
        GaussianMixture { components }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        Normal::new(chosen.mean, chosen.std)
            .expect("component std is positive")
            .sample(rng)
    }
}

impl TryFrom<Vec<GaussianComponent>> for GaussianMixture {
    type Error = Error;

    fn try_from(components: Vec<GaussianComponent>) -> Result<Self> {
        let components = components
            .into_iter()
            .map(|c| GaussianComponent::new(c.weight, c.mean, c.std))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }
}

impl From<GaussianMixture> for Vec<GaussianComponent> {
    fn from(mix: GaussianMixture) -> Self {
        mix.components
    }
}

pub fn mixture_cdf(mix: &GaussianMixture, x: f64) -> f64 {
    mix.cdf(x)
}

pub fn mixture_pdf(mix: &GaussianMixture, x: f64) -> f64 {
    mix.pdf(x)
}

pub fn weighted_component_cdf(mix: &GaussianMixture, x: f64) -> Vec<f64> {
    mix.weighted_component_cdf(x)
}

pub fn mixture_mean(mix: &GaussianMixture) -> f64 {
    mix.mean()
}

pub fn convolve(a: &GaussianMixture, b: &GaussianMixture) -> GaussianMixture {
    a.convolve(b)
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rate {rate} must be positive and finite")))
    }
}

fn check_price(p: f64) -> Result<()> {
    if p >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("price {p} must be nonnegative")))
    }
}

/// `P(T >= p)` for `T ~ Exponential(rate)`.
pub fn exp_survival(rate: f64, p: f64) -> Result<f64> {
    check_rate(rate)?;
    check_price(p)?;
    Ok((-rate * p).exp())
}

/// `P(T1 + T2 >= p)` for independent exponentials with distinct rates.
pub fn hypoexp_survival(rate1: f64, rate2: f64, p: f64) -> Result<f64> {
    check_rate(rate1)?;
    check_rate(rate2)?;
    check_price(p)?;
    if rate1 == rate2 {
        return Err(Error::domain(
            "hypo-exponential survival needs distinct rates (equal rates give an Erlang law)",
        ));
    }
    let gap = rate2 - rate1;
    let value = rate2 / gap * (-rate1 * p).exp() - rate1 / gap * (-rate2 * p).exp();
    Ok(value.clamp(0.0, 1.0))
}

/// Exponential willingness-to-pay law used to simulate sales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWtp {
    rate: f64,
}

impl GroundTruthWtp {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn survival(&self, p: f64) -> Result<f64> {
        exp_survival(self.rate, p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Exp::new(self.rate).expect("rate validated").sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Adaptive Simpson quadrature; independent of erfc.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn step(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                left + right + delta / 15.0
            } else {
                step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn quadrature_phi(x: f64) -> f64 {
        let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // half the mass lies below zero
        0.5 + adaptive_simpson(&density, 0.0, x, 1e-15)
    }

    #[test]
    fn phi_at_zero_and_symmetry() {
        assert_eq!(standard_normal_cdf(0.0).unwrap(), 0.5);
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.5] {
            let s = standard_normal_cdf(x).unwrap() + standard_normal_cdf(-x).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_matches_quadrature() {
        let q = quadrature_phi(1.96);
        assert!((q - 0.975_002_104_851_780).abs() < 1e-12, "oracle drifted: {q}");
        for i in 0..=80 {
            let x = -8.0 + 0.2 * i as f64;
            let got = standard_normal_cdf(x).unwrap();
            let want = quadrature_phi(x);
            assert!((got - want).abs() <= 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn phi_rejects_non_finite() {
        assert!(matches!(standard_normal_cdf(f64::NAN), Err(Error::Domain(_))));
        assert!(standard_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn mixture_cdf_examples() {
        let std_normal = GaussianMixture::normal(0.0, 1.0).unwrap();
        assert_eq!(std_normal.cdf(0.0), 0.5);
        let two = GaussianMixture::from_parts(&[0.5, 0.5], &[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!((two.cdf(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(two.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(two.cdf(f64::INFINITY), 1.0);
        assert!(two.cdf(-60.0) < 1e-300);
        assert_eq!(two.cdf(60.0), 1.0);
    }

    #[test]
    fn weighted_component_cdf_examples() {
        let mix = GaussianMixture::from_parts(&[0.3, 0.7], &[0.0, 5.0], &[1.0, 2.0]).unwrap();
        let w = mix.weighted_component_cdf(0.0);
        assert!((w[0] - 0.15).abs() < 1e-15);
        assert!((w[1] - 0.7 * quadrature_phi(-2.5)).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - mix.cdf(0.0)).abs() < 1e-15);

        let single = GaussianMixture::normal(1.5, 0.5).unwrap();
        assert_eq!(single.weighted_component_cdf(2.0), vec![phi(1.0)]);
    }

    #[test]
    fn pdf_examples() {
        let std_normal = GaussianMixture::normal(0.0, 1.0).unwrap();
        assert!((std_normal.pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);

        let mix =
            GaussianMixture::from_parts(&[0.2, 0.5, 0.3], &[-1.0, 2.0, 4.0], &[0.5, 1.5, 0.8])
                .unwrap();
        let integral = adaptive_simpson(&|x| mix.pdf(x), -1.0 - 10.0 * 1.5, 4.0 + 10.0 * 1.5, 1e-12);
        assert!((integral - 1.0).abs() < 1e-6);
    }

    #[test]
    fn convolution_examples() {
        let n = GaussianMixture::normal(0.0, 1.0).unwrap();
        let c = n.convolve(&n);
        assert_eq!(c.len(), 1);
        assert_eq!(c.components()[0].mean, 0.0);
        assert!((c.components()[0].std - 2f64.sqrt()).abs() < 1e-15);

        let a = GaussianMixture::from_parts(&[0.5, 0.5], &[1.0, 3.0], &[1.0, 2.0]).unwrap();
        let c = a.convolve(&n);
        assert_eq!(c.weights(), vec![0.5, 0.5]);
        assert_eq!(c.means(), vec![1.0, 3.0]);
        assert!((c.stds()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((c.stds()[1] - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn convolution_matches_monte_carlo() {
        let a = GaussianMixture::from_parts(&[0.4, 0.6], &[-1.0, 2.0], &[0.5, 1.0]).unwrap();
        let b = GaussianMixture::from_parts(&[0.7, 0.3], &[0.5, 4.0], &[1.2, 0.3]).unwrap();
        let c = a.convolve(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let xs = [-1.0, 1.0, 2.5, 4.0, 6.0];
        let mut hits = [0usize; 5];
        for _ in 0..n {
            let s = a.sample(&mut rng) + b.sample(&mut rng);
            for (h, &x) in hits.iter_mut().zip(&xs) {
                if s <= x {
                    *h += 1;
                }
            }
        }
        for (&h, &x) in hits.iter().zip(&xs) {
            let p = h as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-6);
            assert!((c.cdf(x) - p).abs() <= 3.0 * se, "x={x}: {} vs {p}", c.cdf(x));
        }
    }

    #[test]
    fn means_are_linear() {
        assert_eq!(GaussianMixture::normal(5.0, 2.0).unwrap().mean(), 5.0);
        let a = GaussianMixture::from_parts(&[0.5, 0.5], &[2.0, 4.0], &[1.0, 3.0]).unwrap();
        assert_eq!(a.mean(), 3.0);
        let b = GaussianMixture::from_parts(&[0.1, 0.9], &[-7.0, 11.0], &[1.0, 0.2]).unwrap();
        assert!((a.convolve(&b).mean() - (a.mean() + b.mean())).abs() < 1e-9);
    }

    #[test]
    fn construction_invariants() {
        assert!(GaussianMixture::new(vec![]).is_err());
        assert!(GaussianMixture::from_parts(&[0.5, 0.4], &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(GaussianComponent::new(1.2, 0.0, 1.0).is_err());
        assert!(GaussianComponent::new(1.0, 0.0, 0.0).is_err());
        assert_eq!(GaussianComponent::new(1.0, 0.0, 1e-9).unwrap().std, STD_FLOOR);
        let nearly = GaussianMixture::from_parts(&[0.5, 0.5 + 1e-8], &[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((nearly.weights().iter().sum::<f64>() - 1.0).abs() < WEIGHT_SUM_TOLERANCE);
    }

    #[test]
    fn json_round_trip_revalidates() {
        let mix = GaussianMixture::from_parts(&[0.25, 0.75], &[1.0, 2.0], &[0.5, 0.1]).unwrap();
        let text = serde_json::to_string(&mix).unwrap();
        let back: GaussianMixture = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mix);
        assert!(serde_json::from_str::<GaussianMixture>(
            r#"[{"weight":0.5,"mean":0.0,"std":1.0}]"#
        )
        .is_err());
    }

    #[test]
    fn exponential_survival() {
        assert_eq!(exp_survival(0.03, 0.0).unwrap(), 1.0);
        assert!((exp_survival(0.03, 100.0).unwrap() - 0.049_787_068_367_863_944).abs() < 1e-15);
        assert!(exp_survival(0.03, -1.0).is_err());
        assert!(exp_survival(0.0, 1.0).is_err());
        let mut last = 1.0;
        for i in 1..300 {
            let v = exp_survival(0.03, i as f64).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn hypoexponential_survival() {
        assert_eq!(hypoexp_survival(0.03, 0.02, 0.0).unwrap(), 1.0);
        let want = -2.0 * (-3.0f64).exp() + 3.0 * (-2.0f64).exp();
        let got = hypoexp_survival(0.03, 0.02, 100.0).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.30643).abs() < 1e-5);
        assert!(matches!(hypoexp_survival(0.02, 0.02, 1.0), Err(Error::Domain(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t1, t2) = (GroundTruthWtp::new(0.03).unwrap(), GroundTruthWtp::new(0.02).unwrap());
        let n = 400_000;
        let mut above = 0usize;
        let mut total = 0.0;
        for _ in 0..n {
            let s = t1.sample(&mut rng) + t2.sample(&mut rng);
            total += s;
            if s >= 100.0 {
                above += 1;
            }
        }
        let p = above as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - got).abs() < 3.0 * se);
        assert!((total / n as f64 - 83.333).abs() < 0.5);
        assert!((t1.mean() + t2.mean() - 83.333_333).abs() < 1e-3);
    }

    fn small_mixture() -> impl Strategy<Value = GaussianMixture> {
        prop::collection::vec((0.05f64..1.0, -5.0f64..5.0, 0.1f64..3.0), 1..=3).prop_map(|parts| {
            let total: f64 = parts.iter().map(|p| p.0).sum();
            let comps = parts
                .into_iter()
                .map(|(w, m, s)| GaussianComponent::new(w / total, m, s).unwrap())
                .collect();
            GaussianMixture::new(comps).unwrap()
        })
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(mix in small_mixture(), x1 in -20.0f64..20.0, dx in 0.0f64..10.0) {
            prop_assert!(mix.cdf(x1) <= mix.cdf(x1 + dx));
        }

        #[test]
        fn convolution_keeps_simplex_and_commutes(a in small_mixture(), b in small_mixture()) {
            let ab = a.convolve(&b);
            let ba = b.convolve(&a);
            prop_assert_eq!(ab.len(), a.len() * b.len());
            prop_assert!((ab.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..1000 {
                let x = -20.0 + 0.04 * i as f64;
                prop_assert!((ab.cdf(x) - ba.cdf(x)).abs() < 1e-12);
            }
        }

        #[test]
        fn pdf_is_derivative_of_cdf(mix in small_mixture(), x in -8.0f64..8.0) {
            let h = 1e-5;
            let fd = (mix.cdf(x + h) - mix.cdf(x - h)) / (2.0 * h);
            prop_assert!((fd - mix.pdf(x)).abs() < 1e-6);
        }
    }
}
