//! Geometry of the separable landscape and probes of the dictionary-learning one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::gen_bg_matrix;
use crate::error::{domain, Error, Result};
use crate::objectives::{dl_pop_projected_grad_estimate, dl_projected_grad, sep_projected_grad, SmoothingParam};
use crate::optimizer::section_map;
use crate::sphere::{chart_to_sphere, point_on_zeta_boundary, ChartVector, TangentVector, UnitVector};
use crate::stats::{ols_slope, proportion, McEstimate, RunningStats};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimizer,
    Saddle,
    Maximizer,
    /// `n = 1`, where `±1` are the only points.
    MinimizerAndMaximizer,
}

impl CriticalKind {
    fn classify(support: usize, n: usize) -> Self {
        match (support == 1, support == n) {
            (true, true) => CriticalKind::MinimizerAndMaximizer,
            (true, false) => CriticalKind::Minimizer,
            (false, true) => CriticalKind::Maximizer,
            (false, false) => CriticalKind::Saddle,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CriticalKind::Minimizer => "minimizer",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Maximizer => "maximizer",
            CriticalKind::MinimizerAndMaximizer => "minimizer_and_maximizer",
        }
    }
}

/// A critical point of the separable objective: a normalized sign pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub pattern: Vec<i8>,
    pub point: UnitVector,
    pub support_size: usize,
    pub kind: CriticalKind,
}

impl CriticalPoint {
    pub fn from_pattern(pattern: Vec<i8>) -> Result<Self> {
        if pattern.iter().any(|&a| !(-1..=1).contains(&a)) {
            return Err(domain("pattern entries must be -1, 0 or 1"));
        }
        let support_size = pattern.iter().filter(|&&a| a != 0).count();
        if support_size == 0 {
            return Err(domain("pattern must be nonzero"));
        }
        let n = pattern.len();
        let raw = DVector::from_iterator(n, pattern.iter().map(|&a| a as f64));
        Ok(Self {
            point: UnitVector::normalize(raw)?,
            support_size,
            kind: CriticalKind::classify(support_size, n),
            pattern,
        })
    }
}

/// All `3ⁿ − 1` sign patterns, in base-3 order with digits `(0, 1, −1)`.
pub fn enumerate_critical_points(n: usize) -> Result<Vec<CriticalPoint>> {
    if n > tolerances::MAX_ENUMERATION_DIM {
        return Err(Error::TooLarge {
            n,
            max: tolerances::MAX_ENUMERATION_DIM,
        });
    }
    if n == 0 {
        return Err(domain("dimension must be positive"));
    }
    let total = 3usize.pow(n as u32);
    (1..total)
        .map(|mut code| {
            let pattern = (0..n)
                .map(|_| {
                    let digit = code % 3;
                    code /= 3;
                    [0i8, 1, -1][digit]
                })
                .collect();
            CriticalPoint::from_pattern(pattern)
        })
        .collect()
}

/// Sign pattern of the coordinates tied (within [`tolerances::MAGNITUDE_TIE`])
/// with the largest magnitude.
fn max_pattern(q: &UnitVector) -> Vec<i8> {
    let max = q.inf_norm();
    q.coords()
        .iter()
        .map(|&v| {
            if v.abs() >= max - tolerances::MAGNITUDE_TIE {
                if v > 0.0 {
                    1
                } else {
                    -1
                }
            } else {
                0
            }
        })
        .collect()
}

/// The critical point gradient flow from `q` converges to: keep the signs of
/// the maximal-magnitude coordinates, zero the rest.
pub fn predict_flow_limit(q: &UnitVector) -> CriticalPoint {
    CriticalPoint::from_pattern(max_pattern(q)).expect("a unit vector has a nonzero maximal coordinate")
}

/// Whether `q` lies on the stable manifold of `cp`: its maximal-magnitude
/// coordinates are exactly the support of `cp`, with matching signs.
pub fn stable_manifold_membership(q: &UnitVector, cp: &CriticalPoint) -> bool {
    q.dim() == cp.pattern.len() && max_pattern(q) == cp.pattern
}

/// The tangent direction `u⁽ⁱ⁾` at `q(w)` that moves `|wᵢ|` toward `q_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegCurvDirection {
    pub base: ChartVector,
    pub index: usize,
    pub dir: TangentVector,
}

/// `uᵢ = sign(wᵢ)`, `u_n = −|wᵢ|/q_n`, zero elsewhere.
pub fn u_direction(w: &ChartVector, i: usize) -> Result<NegCurvDirection> {
    let m = w.w().len();
    if i >= m {
        return Err(domain(format!("chart index {i} out of range for {m} coordinates")));
    }
    let wi = w.w()[i];
    if wi == 0.0 {
        return Err(domain("u direction undefined at w_i = 0"));
    }
    let q = chart_to_sphere(w);
    let mut u = DVector::zeros(m + 1);
    u[i] = wi.signum();
    u[m] = -wi.abs() / q.last();
    Ok(NegCurvDirection {
        base: w.clone(),
        index: i,
        dir: TangentVector::new(q, u)?,
    })
}

/// Margin of a raw Gaussian draw in the section `C`, scale-free:
/// `g_n/‖g_{1..n-1}‖∞ − 1`, or `−∞` when `g_n ≤ 0`.
fn raw_margin(g: &[f64]) -> f64 {
    let (last, rest) = g.split_last().expect("nonempty");
    if *last <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let inf = rest.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if inf == 0.0 {
        f64::INFINITY
    } else {
        last / inf - 1.0
    }
}

fn check_volume_args(n: usize, num_samples: usize) -> Result<()> {
    if n < 2 {
        return Err(domain("volume estimates need n ≥ 2"));
    }
    if num_samples < tolerances::MIN_VOLUME_SAMPLES {
        return Err(domain(format!(
            "volume estimates need at least {} samples",
            tolerances::MIN_VOLUME_SAMPLES
        )));
    }
    Ok(())
}

/// Fraction of the sphere inside the single section `C_ζ₀`, with its binomial
/// standard error.
pub fn volume_estimate<R: Rng + ?Sized>(n: usize, zeta0: f64, num_samples: usize, rng: &mut R) -> Result<McEstimate> {
    check_volume_args(n, num_samples)?;
    let mut g = vec![0.0; n];
    let mut hits = 0u64;
    for _ in 0..num_samples {
        g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        if raw_margin(&g) >= zeta0 {
            hits += 1;
        }
    }
    Ok(proportion(hits, num_samples as u64))
}

/// Number of independent sampling streams used by the sharded estimators.
/// Fixed so results do not depend on the thread count.
pub const SHARDS: u64 = 16;

/// Seed for shard `k` of a sharded estimator.
pub fn shard_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k)
}

/// Volume fractions for a grid of margins, all from the same sample pool.
///
/// Sampling is split into [`SHARDS`] seeded streams run in parallel, so every
/// estimate in the profile is monotone in `ζ` by construction.
pub fn volume_profile(n: usize, zetas: &[f64], num_samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_volume_args(n, num_samples)?;
    let counts: Vec<Vec<u64>> = (0..SHARDS)
        .into_par_iter()
        .map(|k| {
            let share = num_samples as u64 / SHARDS + u64::from(k < num_samples as u64 % SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(shard_seed(seed, k));
            let mut g = vec![0.0; n];
            let mut hits = vec![0u64; zetas.len()];
            for _ in 0..share {
                g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let margin = raw_margin(&g);
                for (h, &z) in hits.iter_mut().zip(zetas) {
                    if margin >= z {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .collect();
    Ok((0..zetas.len())
        .map(|j| proportion(counts.iter().map(|c| c[j]).sum(), num_samples as u64))
        .collect())
}

/// Lower bound `1/(2n) − ζ ln(n)/n` on the section volume.
pub fn volume_lower_bound(n: usize, zeta: f64) -> f64 {
    let nf = n as f64;
    1.0 / (2.0 * nf) - zeta * nf.ln() / nf
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationRow {
    pub p: usize,
    pub mean_abs_deviation: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationProbe {
    pub reference: McEstimate,
    pub rows: Vec<FluctuationRow>,
}

impl FluctuationProbe {
    /// Log-log slope of the mean deviation against `p`.
    pub fn slope(&self) -> f64 {
        let x: Vec<f64> = self.rows.iter().map(|r| (r.p as f64).ln()).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.mean_abs_deviation.ln()).collect();
        ols_slope(&x, &y)
    }
}

/// Deviation of the finite-sample projection `⟨u⁽ⁱ⁾, grad f_DL⟩` from its
/// population value as the sample count `p` grows.
///
/// Instances use the identity dictionary. The population value comes from one
/// run of the conditioned estimator with `reference_samples` draws.
#[allow(clippy::too_many_arguments)]
pub fn fluctuation_probe<R: Rng + ?Sized>(
    w: &ChartVector,
    i: usize,
    mu: SmoothingParam,
    theta: f64,
    p_list: &[usize],
    trials: usize,
    reference_samples: usize,
    rng: &mut R,
) -> Result<FluctuationProbe> {
    if p_list.windows(2).any(|pair| pair[0] >= pair[1]) || p_list.is_empty() {
        return Err(domain("p_list must be nonempty and strictly increasing"));
    }
    if trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    let n = w.ambient_dim();
    let reference = dl_pop_projected_grad_estimate(w, i, mu, theta, reference_samples, rng)?;
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let mut stats = RunningStats::new();
        for _ in 0..trials {
            let x = gen_bg_matrix(n, p, theta, rng)?;
            let finite = dl_projected_grad(w, i, &x, mu)?;
            stats.push((finite - reference.mean).abs());
        }
        rows.push(FluctuationRow {
            p,
            mean_abs_deviation: stats.mean(),
            std_error: stats.std_error(),
        });
    }
    Ok(FluctuationProbe { reference, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub zeta: f64,
    pub w_inf: f64,
    pub projection: f64,
    /// `projection / (‖w‖∞ ζ)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionProbe {
    pub rows: Vec<ProjectionRow>,
    /// Smallest observed ratio: the empirical constant of the linear lower envelope.
    pub fitted_c: f64,
    /// `((1−μ²)/(1+μ²) − 8μ)/2`.
    pub explicit_c: f64,
    pub explicit_bound_holds: bool,
}

/// `((1−μ²)/(1+μ²) − 8μ)/2`, positive for `μ < 1/16`.
pub fn separable_projection_constant(mu: f64) -> f64 {
    ((1.0 - mu * mu) / (1.0 + mu * mu) - 8.0 * mu) / 2.0
}

/// Samples points on `∂C_ζ` for each margin and records the separable
/// projection along `u⁽ⁱ⁾` at the largest coordinate. Points whose largest
/// coordinate is below `μ ln(1/μ)` are skipped.
pub fn projection_probe<R: Rng + ?Sized>(
    n: usize,
    mu: SmoothingParam,
    zetas: &[f64],
    samples_per_zeta: usize,
    rng: &mut R,
) -> Result<ProjectionProbe> {
    if n < 2 {
        return Err(domain("projection probe needs n ≥ 2"));
    }
    let m = mu.get();
    let floor = m * (1.0 / m).ln();
    let mut rows = Vec::new();
    for &z in zetas {
        if !(z > 0.0) {
            return Err(domain("margins must be positive"));
        }
        for _ in 0..samples_per_zeta {
            let d = DVector::from_fn(n - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = point_on_zeta_boundary(&d, z)?;
            let i = w.argmax_abs().expect("n ≥ 2");
            let w_inf = w.inf_norm();
            if w_inf < floor {
                continue;
            }
            let projection = sep_projected_grad(&w, i, mu)?;
            rows.push(ProjectionRow {
                zeta: z,
                w_inf,
                projection,
                ratio: projection / (w_inf * z),
            });
        }
    }
    let fitted_c = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let explicit_c = separable_projection_constant(m);
    let explicit_bound_holds = rows
        .iter()
        .all(|r| r.projection >= explicit_c * r.w_inf * r.zeta - tolerances::INEQUALITY_SLACK);
    Ok(ProjectionProbe {
        rows,
        fitted_c,
        explicit_c,
        explicit_bound_holds,
    })
}

/// Hessian of `w ↦ f_Sep(q(w))` in chart coordinates.
pub fn sep_chart_hessian(w: &ChartVector, mu: SmoothingParam) -> DMatrix<f64> {
    let m = mu.get();
    let qn = w.qn();
    let sech2 = |t: f64| 1.0 / (t / m).cosh().powi(2);
    let t_n = (qn / m).tanh();
    let diag_shift = t_n / qn;
    let rank_one = sech2(qn) / (m * qn * qn) - t_n / (qn * qn * qn);
    let v = w.w();
    let mut h = v * v.transpose() * rank_one;
    for i in 0..v.len() {
        h[(i, i)] += sech2(v[i]) / m - diag_shift;
    }
    h
}

/// Counts of (negative, positive) eigenvalues of the chart Hessian at a
/// critical point, computed in the chart of its own section.
pub fn hessian_signature(cp: &CriticalPoint, mu: SmoothingParam) -> (usize, usize) {
    let (w, _) = section_map(&cp.point);
    let eig = SymmetricEigen::new(sep_chart_hessian(&w, mu));
    let neg = eig.eigenvalues.iter().filter(|&&e| e < 0.0).count();
    let pos = eig.eigenvalues.iter().filter(|&&e| e > 0.0).count();
    (neg, pos)
}
