//! Smoothed sparsity objectives on the sphere.
//!
//! `h_μ(t) = μ log cosh(t/μ)` is a smoothed `|t|`. The separable objective sums
//! it over coordinates, the dictionary-learning objective averages it over the
//! projections `qᵀy_k` of the data columns. The population version of the
//! latter (data drawn Bernoulli-Gaussian) is only available through Monte-Carlo
//! estimators.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sphere::{chart_to_sphere, tangent_project, ChartVector, TangentVector, UnitVector};
use crate::stats::{McEstimate, RunningStats};
use crate::tolerances;

/// Smoothing scale `μ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(domain(format!("smoothing parameter must be positive, got {mu}")));
        }
        if mu >= tolerances::MU_WARN_THRESHOLD {
            log::warn!("smoothing parameter {mu} is at or above 1/16; landscape guarantees do not apply");
        }
        Ok(Self(mu))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Default for the separable problem: `0.1/(√n ln n)`.
    pub fn separable_default(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(domain("separable default smoothing needs n ≥ 2"));
        }
        let n = n as f64;
        Self::new(0.1 / (n.sqrt() * n.ln()))
    }

    /// Default for dictionary learning.
    pub fn dictionary_default() -> Self {
        Self(0.01)
    }
}

impl TryFrom<f64> for SmoothingParam {
    type Error = Error;
    fn try_from(mu: f64) -> Result<Self> {
        Self::new(mu)
    }
}

impl From<SmoothingParam> for f64 {
    fn from(mu: SmoothingParam) -> f64 {
        mu.0
    }
}

/// Bernoulli rate `θ ∈ (0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SparsityParam(f64);

impl SparsityParam {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 0.5) {
            return Err(domain(format!("sparsity must lie in (0, 1/2), got {theta}")));
        }
        Ok(Self(theta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SparsityParam {
    type Error = Error;
    fn try_from(theta: f64) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<SparsityParam> for f64 {
    fn from(theta: SparsityParam) -> f64 {
        theta.0
    }
}

/// `μ log cosh(t/μ)`, evaluated as `|t| − μ ln 2 + μ ln(1 + e^{−2|t|/μ})`.
pub fn h_mu(t: f64, mu: SmoothingParam) -> f64 {
    let mu = mu.get();
    let a = t.abs();
    a - mu * std::f64::consts::LN_2 + mu * (-2.0 * a / mu).exp().ln_1p()
}

/// `sech²(t)`, safe for large `|t|`.
fn sech2(t: f64) -> f64 {
    let e = (-2.0 * t.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Objective on the sphere exposing a value and a Euclidean gradient.
pub trait SphereObjective: Sync {
    /// Ambient dimension `n`.
    fn dim(&self) -> usize;

    fn value(&self, q: &UnitVector) -> f64;

    fn euclidean_gradient(&self, q: &UnitVector) -> DVector<f64>;

    fn value_and_gradient(&self, q: &UnitVector) -> (f64, DVector<f64>) {
        (self.value(q), self.euclidean_gradient(q))
    }

    fn riemannian_gradient(&self, q: &UnitVector) -> TangentVector {
        tangent_project(q, &self.euclidean_gradient(q))
    }
}

pub fn sep_value(q: &UnitVector, mu: SmoothingParam) -> f64 {
    q.coords().iter().map(|&t| h_mu(t, mu)).sum()
}

pub fn sep_euclid_grad(q: &UnitVector, mu: SmoothingParam) -> DVector<f64> {
    let m = mu.get();
    q.coords().map(|t| (t / m).tanh())
}

/// `⟨u⁽ⁱ⁾, grad f_Sep(q(w))⟩ = tanh(|wᵢ|/μ) − tanh(q_n/μ)|wᵢ|/q_n`.
pub fn sep_projected_grad(w: &ChartVector, i: usize, mu: SmoothingParam) -> Result<f64> {
    let wi = chart_coord(w, i)?.abs();
    let m = mu.get();
    let qn = w.qn();
    Ok((wi / m).tanh() - (qn / m).tanh() * wi / qn)
}

fn chart_coord(w: &ChartVector, i: usize) -> Result<f64> {
    let len = w.w().len();
    if i >= len {
        return Err(domain(format!("chart index {i} out of range for {len} coordinates")));
    }
    let wi = w.w()[i];
    if wi == 0.0 {
        return Err(domain("projection direction undefined at w_i = 0"));
    }
    Ok(wi)
}

#[derive(Debug, Clone, Copy)]
pub struct Separable {
    n: usize,
    mu: SmoothingParam,
}

impl Separable {
    pub fn new(n: usize, mu: SmoothingParam) -> Self {
        Self { n, mu }
    }

    pub fn mu(&self) -> SmoothingParam {
        self.mu
    }
}

impl SphereObjective for Separable {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, q: &UnitVector) -> f64 {
        sep_value(q, self.mu)
    }

    fn euclidean_gradient(&self, q: &UnitVector) -> DVector<f64> {
        sep_euclid_grad(q, self.mu)
    }
}

fn check_rows(q: &UnitVector, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: y.nrows(),
        });
    }
    if y.ncols() == 0 {
        return Err(domain("data matrix has no columns"));
    }
    Ok(())
}

/// `(1/p) Σ_k h_μ(qᵀy_k)`.
pub fn dl_value(q: &UnitVector, y: &DMatrix<f64>, mu: SmoothingParam) -> Result<f64> {
    check_rows(q, y)?;
    let proj = y.tr_mul(q.coords());
    Ok(proj.iter().map(|&t| h_mu(t, mu)).sum::<f64>() / y.ncols() as f64)
}

/// `(1/p) Σ_k tanh(qᵀy_k/μ) y_k`.
pub fn dl_euclid_grad(q: &UnitVector, y: &DMatrix<f64>, mu: SmoothingParam) -> Result<DVector<f64>> {
    check_rows(q, y)?;
    let m = mu.get();
    let weights = y.tr_mul(q.coords()).map(|t| (t / m).tanh());
    Ok(y * weights / y.ncols() as f64)
}

/// Finite-sample dictionary-learning objective over a fixed data matrix.
#[derive(Debug, Clone)]
pub struct DictionaryLearning {
    y: DMatrix<f64>,
    mu: SmoothingParam,
}

impl DictionaryLearning {
    pub fn new(y: DMatrix<f64>, mu: SmoothingParam) -> Result<Self> {
        if y.ncols() == 0 || y.nrows() == 0 {
            return Err(domain("data matrix must be nonempty"));
        }
        Ok(Self { y, mu })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn mu(&self) -> SmoothingParam {
        self.mu
    }
}

impl SphereObjective for DictionaryLearning {
    fn dim(&self) -> usize {
        self.y.nrows()
    }

    fn value(&self, q: &UnitVector) -> f64 {
        self.value_and_gradient(q).0
    }

    fn euclidean_gradient(&self, q: &UnitVector) -> DVector<f64> {
        self.value_and_gradient(q).1
    }

    fn value_and_gradient(&self, q: &UnitVector) -> (f64, DVector<f64>) {
        assert_eq!(q.dim(), self.y.nrows(), "dictionary objective: dimension mismatch");
        let m = self.mu.get();
        let p = self.y.ncols() as f64;
        let proj = self.y.tr_mul(q.coords());
        let value = proj.iter().map(|&t| h_mu(t, self.mu)).sum::<f64>() / p;
        let weights = proj.map(|t| (t / m).tanh());
        (value, &self.y * weights / p)
    }
}

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss-Legendre rule for `∫_0^{panels·width} f`.
fn gauss_legendre(f: impl Fn(f64) -> f64, panels: usize, width: f64) -> f64 {
    let half = 0.5 * width;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * width;
        let mut acc = 0.0;
        for (x, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            acc += wt * (f(mid - half * x) + f(mid + half * x));
        }
        total += acc * half;
    }
    total
}

/// `E[sech²(G/μ)]` for `G ∼ N(0, s²)`.
pub(crate) fn gaussian_sech2_mean(s: f64, mu: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let inv_sqrt_2pi = 0.398_942_280_401_432_7;
    let a = mu / s;
    if a <= 1.0 {
        // Substitute u = G/μ; the sech² factor sets the integration range.
        let integral = gauss_legendre(|u| sech2(u) * (-0.5 * a * a * u * u).exp(), 40, 0.5);
        2.0 * a * inv_sqrt_2pi * integral
    } else {
        // Standardize G; the Gaussian factor sets the integration range.
        let integral = gauss_legendre(|t| sech2(t / a) * (-0.5 * t * t).exp(), 20, 0.5);
        2.0 * inv_sqrt_2pi * integral
    }
}

/// Monte-Carlo estimate of `⟨u⁽ⁱ⁾, grad f_DL^pop(q(w))⟩` under `x ∼ BG(θ)`.
///
/// Conditioning on the Bernoulli pattern of the coordinates other than `i`
/// and `n` leaves a Gaussian sum, whose `sech²` expectation is integrated by
/// quadrature. Only the pattern is sampled, so each draw has low variance.
/// `theta` is taken as a raw rate so that `θ = 0` can be probed.
pub fn dl_pop_projected_grad_estimate<R: Rng + ?Sized>(
    w: &ChartVector,
    i: usize,
    mu: SmoothingParam,
    theta: f64,
    num_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let wi = chart_coord(w, i)?.abs();
    if num_samples == 0 {
        return Err(domain("num_samples must be at least 1"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(domain(format!("Bernoulli rate must lie in [0, 1], got {theta}")));
    }
    if theta == 0.0 || theta == 1.0 {
        return Ok(McEstimate {
            mean: 0.0,
            std_error: 0.0,
            samples: num_samples as u64,
        });
    }
    let m = mu.get();
    let qn = w.qn();
    let others: Vec<f64> = w
        .w()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v * v)
        .collect();
    let prefactor = wi * theta * (1.0 - theta) / m;
    let draw_value = |sigma2: f64| {
        let s1 = (sigma2 + wi * wi).sqrt();
        let s2 = (sigma2 + qn * qn).sqrt();
        prefactor * (gaussian_sech2_mean(s1, m) - gaussian_sech2_mean(s2, m))
    };

    let mut stats = RunningStats::new();
    if others.len() <= 63 {
        let mut cache: HashMap<u64, f64> = HashMap::new();
        for _ in 0..num_samples {
            let mut mask = 0u64;
            let mut sigma2 = 0.0;
            for (j, &v2) in others.iter().enumerate() {
                if rng.random::<f64>() < theta {
                    mask |= 1 << j;
                    sigma2 += v2;
                }
            }
            let value = *cache.entry(mask).or_insert_with(|| draw_value(sigma2));
            stats.push(value);
        }
    } else {
        for _ in 0..num_samples {
            let sigma2: f64 = others.iter().filter(|_| rng.random::<f64>() < theta).sum();
            stats.push(draw_value(sigma2));
        }
    }
    Ok(stats.estimate())
}

/// Componentwise Monte-Carlo mean and standard error of a random vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorEstimate {
    pub mean: DVector<f64>,
    pub std_error: DVector<f64>,
    pub samples: u64,
}

fn sample_bg<R: Rng + ?Sized>(x: &mut DVector<f64>, theta: f64, rng: &mut R) {
    for v in x.iter_mut() {
        *v = if rng.random::<f64>() < theta {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
    }
}

fn check_sampling(num_samples: usize, theta: f64) -> Result<()> {
    if num_samples == 0 {
        return Err(domain("num_samples must be at least 1"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(domain(format!("Bernoulli rate must lie in [0, 1], got {theta}")));
    }
    Ok(())
}

/// Naive Monte-Carlo estimate of `E[tanh(qᵀx/μ) x]`, `x ∼ BG(θ)`.
pub fn dl_pop_grad_estimate<R: Rng + ?Sized>(
    q: &UnitVector,
    mu: SmoothingParam,
    theta: f64,
    num_samples: usize,
    rng: &mut R,
) -> Result<VectorEstimate> {
    check_sampling(num_samples, theta)?;
    let n = q.dim();
    let m = mu.get();
    let mut stats = vec![RunningStats::new(); n];
    let mut x = DVector::zeros(n);
    for _ in 0..num_samples {
        sample_bg(&mut x, theta, rng);
        let t = (q.coords().dot(&x) / m).tanh();
        for (s, &xj) in stats.iter_mut().zip(x.iter()) {
            s.push(t * xj);
        }
    }
    Ok(VectorEstimate {
        mean: DVector::from_iterator(n, stats.iter().map(|s| s.mean())),
        std_error: DVector::from_iterator(n, stats.iter().map(|s| s.std_error())),
        samples: num_samples as u64,
    })
}

/// Naive Monte-Carlo estimate of `⟨d, E[tanh(qᵀx/μ) x]⟩` for a fixed direction.
pub fn dl_pop_directional_estimate<R: Rng + ?Sized>(
    q: &UnitVector,
    direction: &DVector<f64>,
    mu: SmoothingParam,
    theta: f64,
    num_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_sampling(num_samples, theta)?;
    if direction.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: direction.len(),
        });
    }
    let m = mu.get();
    let mut stats = RunningStats::new();
    let mut x = DVector::zeros(q.dim());
    for _ in 0..num_samples {
        sample_bg(&mut x, theta, rng);
        stats.push((q.coords().dot(&x) / m).tanh() * direction.dot(&x));
    }
    Ok(stats.estimate())
}

/// `⟨u⁽ⁱ⁾, grad f_DL(q(w))⟩` on a finite data matrix.
pub fn dl_projected_grad(w: &ChartVector, i: usize, y: &DMatrix<f64>, mu: SmoothingParam) -> Result<f64> {
    let wi = chart_coord(w, i)?;
    let q = chart_to_sphere(w);
    let g = dl_euclid_grad(&q, y, mu)?;
    let n = q.dim();
    // u is tangent, so projecting g first would not change the inner product.
    Ok(wi.signum() * g[i] - wi.abs() / q.last() * g[n - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::sphere::{exp_map, sample_uniform_sphere};

    fn mu(v: f64) -> SmoothingParam {
        SmoothingParam::new(v).unwrap()
    }

    fn random_tangent(q: &UnitVector, rng: &mut ChaCha8Rng) -> TangentVector {
        let g = DVector::from_fn(q.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = tangent_project(q, &g);
        let len = t.norm();
        t.scaled(1.0 / len)
    }

    /// Central difference of `f ∘ exp_q` along a unit tangent direction.
    fn geodesic_derivative(f: impl Fn(&UnitVector) -> f64, d: &TangentVector, h: f64) -> f64 {
        let plus = exp_map(&d.scaled(h));
        let minus = exp_map(&d.scaled(-h));
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    #[test]
    fn h_mu_examples() {
        assert_eq!(h_mu(0.0, mu(0.1)), 0.0);
        // μ ln cosh(1/μ) with cosh expanded exactly in terms of e^{-2/μ}.
        let m = 0.01;
        let oracle = 1.0 - m * 2f64.ln() + m * (-2.0f64 / m).exp().ln_1p();
        assert_relative_eq!(h_mu(1.0, mu(m)), oracle, max_relative = 1e-15);
        assert_relative_eq!(h_mu(1.0, mu(m)), 0.993_068_528_194_400_5, max_relative = 1e-12);
        // Moderate arguments against the textbook form.
        for &t in &[0.013, -0.2, 0.37] {
            assert_relative_eq!(h_mu(t, mu(0.1)), 0.1 * (t / 0.1f64).cosh().ln(), max_relative = 1e-13);
        }
        assert!(h_mu(5000.0, mu(1e-3)).is_finite());
    }

    #[test]
    fn h_mu_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t: f64 = rng.random_range(-3.0..3.0);
            assert_eq!(h_mu(t, mu(0.05)), h_mu(-t, mu(0.05)));
        }
    }

    #[test]
    fn separable_gradient_vanishes_at_critical_points() {
        let n = 6;
        let f = Separable::new(n, mu(0.05));
        let at_min = f.riemannian_gradient(&UnitVector::basis(n, n - 1));
        assert!(at_min.norm() < 1e-12);
        let flat = UnitVector::normalize(DVector::from_element(n, 1.0)).unwrap();
        assert!(f.riemannian_gradient(&flat).norm() < 1e-12);
    }

    #[test]
    fn separable_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[3usize, 10] {
            let f = Separable::new(n, mu(0.1));
            for _ in 0..10 {
                let q = sample_uniform_sphere(n, &mut rng);
                let grad = f.riemannian_gradient(&q);
                for _ in 0..5 {
                    let d = random_tangent(&q, &mut rng);
                    let fd = geodesic_derivative(|p| f.value(p), &d, 1e-5);
                    let exact = grad.dir().dot(d.dir());
                    let scale = exact.abs().max(grad.norm());
                    assert!((fd - exact).abs() / scale < 1e-6, "n={n}: fd {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn projected_gradient_examples() {
        let w = ChartVector::from_slice(&[0.3, 0.2]).unwrap();
        let qn = 0.87f64.sqrt();
        let oracle = 3f64.tanh() - (qn / 0.1).tanh() * 0.3 / qn;
        let v = sep_projected_grad(&w, 0, mu(0.1)).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-14);
        assert!((v - 0.6734).abs() < 5e-5);

        let s = 0.5f64.sqrt();
        let tied = ChartVector::from_slice(&[s, 0.0]).unwrap();
        assert!(sep_projected_grad(&tied, 0, mu(0.1)).unwrap().abs() < 1e-12);

        let neg = ChartVector::from_slice(&[-0.3, 0.2]).unwrap();
        assert_eq!(sep_projected_grad(&neg, 0, mu(0.1)).unwrap(), v);
        assert!(sep_projected_grad(&w, 1, mu(0.1)).is_ok());
        let zero = ChartVector::from_slice(&[0.0, 0.2]).unwrap();
        assert!(sep_projected_grad(&zero, 0, mu(0.1)).is_err());
    }

    #[test]
    fn projected_gradient_matches_tangent_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = mu(0.05);
        for _ in 0..100 {
            let n = 5;
            let raw = DVector::from_fn(n - 1, |_, _| rng.random_range(-0.45..0.45));
            let w = ChartVector::new(raw).unwrap();
            let i = rng.random_range(0..n - 1);
            let q = chart_to_sphere(&w);
            let mut u = DVector::zeros(n);
            u[i] = w.w()[i].signum();
            u[n - 1] = -w.w()[i].abs() / q.last();
            let g = tangent_project(&q, &sep_euclid_grad(&q, m));
            let direct = u.dot(g.dir());
            assert!((sep_projected_grad(&w, i, m).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn dictionary_trivial_cases() {
        let n = 4;
        let q = UnitVector::basis(n, n - 1);
        let y = DMatrix::from_column_slice(n, 1, q.coords().as_slice());
        let g = dl_euclid_grad(&q, &y, mu(0.1)).unwrap();
        assert!(tangent_project(&q, &g).norm() < 1e-12);

        let zero = DMatrix::zeros(n, 7);
        assert_eq!(dl_value(&q, &zero, mu(0.1)).unwrap(), 0.0);
        assert_eq!(dl_euclid_grad(&q, &zero, mu(0.1)).unwrap().norm(), 0.0);

        let wrong = DMatrix::zeros(n + 1, 3);
        assert!(matches!(
            dl_value(&q, &wrong, mu(0.1)),
            Err(Error::DimensionMismatch { expected: 4, found: 5 })
        ));
        assert!(dl_euclid_grad(&q, &wrong, mu(0.1)).is_err());
    }

    #[test]
    fn dictionary_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, p) = (5, 20);
        let y = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = DictionaryLearning::new(y.clone(), mu(0.1)).unwrap();
        for _ in 0..10 {
            let q = sample_uniform_sphere(n, &mut rng);
            let (v, g) = f.value_and_gradient(&q);
            assert_eq!(v, dl_value(&q, &y, mu(0.1)).unwrap());
            assert_eq!(g, dl_euclid_grad(&q, &y, mu(0.1)).unwrap());
            let grad = tangent_project(&q, &g);
            for _ in 0..5 {
                let d = random_tangent(&q, &mut rng);
                let fd = geodesic_derivative(|p| f.value(p), &d, 1e-5);
                let exact = grad.dir().dot(d.dir());
                assert!((fd - exact).abs() / exact.abs().max(grad.norm()) < 1e-6);
            }
        }
    }

    #[test]
    fn sech2_quadrature_matches_brute_force() {
        // Midpoint rule on a fine grid over ±12 standard deviations.
        let oracle = |s: f64, m: f64| {
            let steps = 400_000;
            let lim = 12.0 * s;
            let h = 2.0 * lim / steps as f64;
            let mut acc = 0.0;
            for k in 0..steps {
                let g = -lim + (k as f64 + 0.5) * h;
                acc += sech2(g / m) * (-0.5 * g * g / (s * s)).exp();
            }
            acc * h / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        for &(s, m) in &[(1.0, 0.005), (0.3, 0.1), (0.05, 0.1), (0.9, 0.9), (2.0, 0.01)] {
            assert_relative_eq!(gaussian_sech2_mean(s, m), oracle(s, m), max_relative = 1e-9);
        }
        assert_eq!(gaussian_sech2_mean(0.0, 0.1), 1.0);
    }

    #[test]
    fn population_projection_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = ChartVector::from_slice(&[0.4, 0.1, -0.3]).unwrap();
        let est = dl_pop_projected_grad_estimate(&w, 0, mu(0.01), 0.0, 100, &mut rng).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);

        let s = 0.5f64.sqrt();
        let tied = ChartVector::from_slice(&[s, 0.0, 0.0]).unwrap();
        let est = dl_pop_projected_grad_estimate(&tied, 0, mu(0.01), 0.25, 10_000, &mut rng).unwrap();
        assert!(est.mean.abs() <= 4.0 * est.std_error + 1e-15);
        assert!(dl_pop_projected_grad_estimate(&w, 0, mu(0.01), 0.25, 0, &mut rng).is_err());
    }

    #[test]
    fn population_projection_agrees_with_naive_estimator() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = mu(0.1);
        let theta = 0.3;
        let w = ChartVector::from_slice(&[0.5, -0.2, 0.1, 0.3]).unwrap();
        let q = chart_to_sphere(&w);
        let i = 0;
        let mut u = DVector::zeros(5);
        u[i] = 1.0;
        u[4] = -0.5 / q.last();
        let smart = dl_pop_projected_grad_estimate(&w, i, m, theta, 20_000, &mut rng).unwrap();
        let naive = dl_pop_directional_estimate(&q, &u, m, theta, 200_000, &mut rng).unwrap();
        let sigma = (smart.std_error.powi(2) + naive.std_error.powi(2)).sqrt();
        assert!((smart.mean - naive.mean).abs() < 4.0 * sigma, "{smart:?} vs {naive:?}");
        assert!(smart.std_error < naive.std_error);
    }

    #[test]
    fn naive_estimator_zero_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = sample_uniform_sphere(4, &mut rng);
        let est = dl_pop_grad_estimate(&q, mu(0.1), 0.0, 50, &mut rng).unwrap();
        assert_eq!(est.mean.norm(), 0.0);
        assert_eq!(est.std_error.norm(), 0.0);
    }

    #[test]
    fn finite_projection_matches_tangent_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = DMatrix::from_fn(4, 30, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = ChartVector::from_slice(&[-0.3, 0.2, 0.1]).unwrap();
        let q = chart_to_sphere(&w);
        let g = tangent_project(&q, &dl_euclid_grad(&q, &y, mu(0.1)).unwrap());
        let u = DVector::from_column_slice(&[-1.0, 0.0, 0.0, -0.3 / q.last()]);
        let direct = u.dot(g.dir());
        assert!((dl_projected_grad(&w, 0, &y, mu(0.1)).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        assert!(SmoothingParam::new(0.0).is_err());
        assert!(SmoothingParam::new(f64::NAN).is_err());
        assert!(SmoothingParam::new(0.5).is_ok());
        assert!(SparsityParam::new(0.5).is_err());
        assert!(SparsityParam::new(0.0).is_err());
        assert!(SparsityParam::new(0.25).is_ok());
        let d = SmoothingParam::separable_default(10).unwrap().get();
        assert_relative_eq!(d, 0.1 / (10f64.sqrt() * 10f64.ln()), max_relative = 1e-15);
    }
}
