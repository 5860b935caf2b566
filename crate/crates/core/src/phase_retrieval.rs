//! Population least-squares phase retrieval over `Cⁿ`.
//!
//! With Gaussian measurements the expected objective is
//! `‖x‖⁴ + ‖z‖⁴ − ‖x‖²‖z‖² − |x*z|²`. Writing `z = w + ζe^{iφ}x/‖x‖` with
//! `w ⊥ x`, a gradient step rescales `ζ` and `w` independently, which makes
//! the dynamics two-dimensional and the per-step updates exactly checkable.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::optimizer::TraceRecord;
use crate::stats::{proportion, McEstimate};

pub type C64 = Complex64;

/// `a*b = Σ conj(aᵢ) bᵢ`.
pub fn hermitian_dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(u, v)| u.conj() * v).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

/// The signal `x` to recover, with its squared norm cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PRSignal {
    x: Vec<C64>,
    norm_sq: f64,
}

impl PRSignal {
    pub fn new(x: Vec<C64>) -> Result<Self> {
        let norm_sq = norm_sq(&x);
        if !(norm_sq > 0.0 && norm_sq.is_finite()) {
            return Err(domain("signal must be nonzero and finite"));
        }
        Ok(Self { x, norm_sq })
    }

    /// A standard complex Gaussian signal.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let x = (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        Self::new(x)
    }

    pub fn x(&self) -> &[C64] {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

/// An iterate `z ∈ Cⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PRState {
    pub z: Vec<C64>,
}

/// `z = w + ζe^{iφ}x/‖x‖` with `w ⊥ x`, `ζ ≥ 0`, `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PRDecomposition {
    pub w: Vec<C64>,
    pub zeta: f64,
    pub phi: f64,
}

fn check_dim(z: &[C64], x: &PRSignal) {
    assert_eq!(z.len(), x.dim(), "iterate and signal dimensions differ");
}

pub fn pr_value(z: &[C64], x: &PRSignal) -> f64 {
    check_dim(z, x);
    let xx = x.norm_sq;
    let zz = norm_sq(z);
    xx * xx + zz * zz - xx * zz - hermitian_dot(x.x(), z).norm_sqr()
}

/// `((2‖z‖² − ‖x‖²)I − xx*)z`.
pub fn pr_gradient(z: &[C64], x: &PRSignal) -> Vec<C64> {
    check_dim(z, x);
    let scale = 2.0 * norm_sq(z) - x.norm_sq;
    let xz = hermitian_dot(x.x(), z);
    z.iter().zip(x.x()).map(|(zi, xi)| zi * scale - xi * xz).collect()
}

pub fn pr_decompose(z: &[C64], x: &PRSignal) -> PRDecomposition {
    check_dim(z, x);
    let norm = x.norm();
    let xz = hermitian_dot(x.x(), z);
    let zeta = xz.norm() / norm;
    let phi = if zeta == 0.0 {
        0.0
    } else {
        xz.arg().rem_euclid(std::f64::consts::TAU)
    };
    // ζe^{iφ}/‖x‖ = (x*z)/‖x‖².
    let coef = xz / x.norm_sq;
    let w = z.iter().zip(x.x()).map(|(zi, xi)| zi - xi * coef).collect();
    PRDecomposition { w, zeta, phi }
}

pub fn pr_reconstruct(d: &PRDecomposition, x: &PRSignal) -> Vec<C64> {
    assert_eq!(d.w.len(), x.dim(), "decomposition and signal dimensions differ");
    let coef = C64::from_polar(d.zeta / x.norm(), d.phi);
    d.w.iter().zip(x.x()).map(|(wi, xi)| wi + xi * coef).collect()
}

/// `z' = z − η∇_z`.
pub fn pr_step(z: &[C64], x: &PRSignal, eta: f64) -> Result<PRState> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(domain(format!("step size must be positive, got {eta}")));
    }
    let g = pr_gradient(z, x);
    Ok(PRState {
        z: z.iter().zip(&g).map(|(zi, gi)| zi - gi * eta).collect(),
    })
}

/// `dist²(z, {e^{iθ}x}) = ‖z‖² + ‖x‖² − 2ζ‖x‖`.
pub fn pr_dist_sq(z: &[C64], x: &PRSignal) -> f64 {
    let zeta = hermitian_dot(x.x(), z).norm() / x.norm();
    (norm_sq(z) + x.norm_sq - 2.0 * zeta * x.norm()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PrRegion {
    S1,
    S2,
    S3,
    S4,
    Outside,
}

impl PrRegion {
    pub fn is_inside(self) -> bool {
        self != PrRegion::Outside
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 0.25) {
        return Err(domain(format!("region constant must lie in (0, 1/4), got {c}")));
    }
    Ok(())
}

/// Shell of `‖z‖²` relative to `½‖x‖²`, `(1−c)‖x‖²`, `‖x‖²`, `(1+c)‖x‖²`;
/// each shell is open on the left and closed on the right.
pub fn pr_region(z: &[C64], x: &PRSignal, c: f64) -> Result<PrRegion> {
    check_c(c)?;
    check_dim(z, x);
    let r = norm_sq(z) / x.norm_sq;
    Ok(if r <= 0.5 {
        PrRegion::S1
    } else if r <= 1.0 - c {
        PrRegion::S2
    } else if r <= 1.0 {
        PrRegion::S3
    } else if r <= 1.0 + c {
        PrRegion::S4
    } else {
        PrRegion::Outside
    })
}

/// Largest step size covered by the convergence guarantee: `√c/(4‖x‖²)`.
pub fn pr_max_step(x: &PRSignal, c: f64) -> f64 {
    c.sqrt() / (4.0 * x.norm_sq)
}

/// Iteration bound for a start with margin `ζ`, summing the time spent in
/// `S₁`, in `S₂`, and in `S₃ ∪ S₄` including returns to `S₂`.
pub fn pr_iteration_bound(x_norm: f64, zeta: f64, eta: f64, c: f64) -> f64 {
    let a = eta * x_norm * x_norm;
    let grow = (1.0 + 2.0 * c * a).ln();
    let t1 = (x_norm / (zeta * std::f64::consts::SQRT_2)).ln().max(0.0) / a.ln_1p();
    let t2 = std::f64::consts::LN_2 / (2.0 * grow);
    let t34 = (2.0 * c).ln() * (4.0 / 7f64.sqrt()).ln() / ((-(1.0 - 2.0 * c) * a).ln_1p() * grow);
    t1 + t2 + t34
}

/// `√(8/π)·erf(√(2n)ζ₀/‖x‖)`, the bound on the chance of a uniform `S₁`
/// start landing in the band `ζ < ζ₀`.
pub fn pr_failure_bound(n: usize, zeta0: f64, x_norm: f64) -> f64 {
    (8.0 / std::f64::consts::PI).sqrt() * statrs::function::erf::erf((2.0 * n as f64).sqrt() * zeta0 / x_norm)
}

/// Uniform draw from the ball `‖z‖ ≤ ‖x‖/√2` of `Cⁿ ≅ R^{2n}`.
pub fn sample_uniform_s1<R: Rng + ?Sized>(x: &PRSignal, rng: &mut R) -> Vec<C64> {
    let n = x.dim();
    loop {
        let g: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let len = norm_sq(&g).sqrt();
        if len == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let radius = x.norm() * std::f64::consts::FRAC_1_SQRT_2 * u.powf(1.0 / (2 * n) as f64);
        return g.into_iter().map(|v| v * (radius / len)).collect();
    }
}

/// Fraction of uniform `S₁` draws with `ζ < ζ₀`.
pub fn pr_band_fraction<R: Rng + ?Sized>(x: &PRSignal, zeta0: f64, samples: usize, rng: &mut R) -> McEstimate {
    let hits = (0..samples)
        .filter(|_| {
            let z = sample_uniform_s1(x, rng);
            hermitian_dot(x.x(), &z).norm() / x.norm() < zeta0
        })
        .count();
    proportion(hits as u64, samples as u64)
}

fn relative_gap(measured: f64, predicted: f64) -> f64 {
    let scale = measured.abs().max(predicted.abs());
    if scale == 0.0 {
        0.0
    } else {
        (measured - predicted).abs() / scale
    }
}

/// Relative deviations of the measured `ζ'` and `‖w'‖` from
/// `(1 − 2η(‖z‖² − ‖x‖²))ζ` and `|1 − η(2‖z‖² − ‖x‖²)|·‖w‖`, plus the phase
/// change (zero whenever `ζ > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepIdentityCheck {
    pub zeta_rel: f64,
    pub w_rel: f64,
    pub phi_change: f64,
}

pub fn step_identity_check(z: &[C64], x: &PRSignal, eta: f64) -> Result<(PRState, StepIdentityCheck)> {
    let before = pr_decompose(z, x);
    let next = pr_step(z, x, eta)?;
    let after = pr_decompose(&next.z, x);
    let zz = norm_sq(z);
    let zeta_pred = ((1.0 - 2.0 * eta * (zz - x.norm_sq)) * before.zeta).abs();
    let w_pred = (1.0 - eta * (2.0 * zz - x.norm_sq)).abs() * norm_sq(&before.w).sqrt();
    let phi_change = if before.zeta > 0.0 && after.zeta > 0.0 {
        let d = (after.phi - before.phi).rem_euclid(std::f64::consts::TAU);
        d.min(std::f64::consts::TAU - d)
    } else {
        0.0
    };
    let check = StepIdentityCheck {
        zeta_rel: relative_gap(after.zeta, zeta_pred),
        w_rel: relative_gap(norm_sq(&after.w).sqrt(), w_pred),
        phi_change,
    };
    Ok((next, check))
}

/// Outcome of one gradient-descent run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrRun {
    pub initial_zeta: f64,
    pub initial_region: PrRegion,
    pub iterations: usize,
    pub success: bool,
    pub final_dist: f64,
    pub final_zeta: f64,
    pub max_identity_rel: f64,
    pub region_violations: usize,
    pub zeta_floor_violations: usize,
    pub w_growth_outside_s1: usize,
    pub s1_growth_violations: usize,
}

/// Runs until `dist(z, Ă) < √(5c)‖x‖` or `budget` steps, checking the exact
/// step identities and the region and margin invariants on every step.
/// When `trace` is given, one record per visited iterate is appended.
pub fn pr_run(
    z0: &[C64],
    x: &PRSignal,
    eta: f64,
    c: f64,
    budget: usize,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<PrRun> {
    check_c(c)?;
    let target = (5.0 * c).sqrt() * x.norm();
    let initial = pr_decompose(z0, x);
    let zeta_floor = initial.zeta.min(7f64.sqrt() / 4.0 * x.norm());
    let mut z = z0.to_vec();
    let mut region = pr_region(&z, x, c)?;
    let mut run = PrRun {
        initial_zeta: initial.zeta,
        initial_region: region,
        iterations: 0,
        success: false,
        final_dist: pr_dist_sq(&z, x).sqrt(),
        final_zeta: initial.zeta,
        max_identity_rel: 0.0,
        region_violations: 0,
        zeta_floor_violations: 0,
        w_growth_outside_s1: 0,
        s1_growth_violations: 0,
    };
    let slack = 1e-12;
    loop {
        let dist = pr_dist_sq(&z, x).sqrt();
        run.final_dist = dist;
        if let Some(records) = trace.as_deref_mut() {
            let d = pr_decompose(&z, x);
            records.push(TraceRecord {
                iter: run.iterations,
                f: pr_value(&z, x),
                grad_norm: norm_sq(&pr_gradient(&z, x)).sqrt(),
                zeta: d.zeta,
                w_inf: d.w.iter().fold(0.0f64, |a, v| a.max(v.norm())),
                dist_target: dist,
            });
        }
        if dist < target {
            run.success = true;
            break;
        }
        if run.iterations == budget {
            break;
        }
        let before = pr_decompose(&z, x);
        let (next, check) = step_identity_check(&z, x, eta)?;
        run.max_identity_rel = run.max_identity_rel.max(check.zeta_rel).max(check.w_rel);
        let after = pr_decompose(&next.z, x);
        let next_region = pr_region(&next.z, x, c)?;
        let allowed = match region {
            PrRegion::S1 => matches!(next_region, PrRegion::S1 | PrRegion::S2),
            PrRegion::Outside => true,
            _ => !matches!(next_region, PrRegion::S1 | PrRegion::Outside),
        };
        if !allowed {
            run.region_violations += 1;
        }
        if after.zeta < zeta_floor * (1.0 - slack) {
            run.zeta_floor_violations += 1;
        }
        let (w0, w1) = (norm_sq(&before.w).sqrt(), norm_sq(&after.w).sqrt());
        if region != PrRegion::S1 && w1 > w0 * (1.0 + slack) {
            run.w_growth_outside_s1 += 1;
        }
        if region == PrRegion::S1 && after.zeta < (1.0 + eta * x.norm_sq) * before.zeta * (1.0 - slack) {
            run.s1_growth_violations += 1;
        }
        z = next.z;
        region = next_region;
        run.iterations += 1;
        run.final_zeta = after.zeta;
    }
    Ok(run)
}

/// How starting points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Uniform in `S₁`.
    Uniform,
    /// Uniform in `S₁` conditioned on `ζ ≥ ζ₀`.
    AboveMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrExperimentSummary {
    pub n: usize,
    pub eta: f64,
    pub c: f64,
    pub zeta0: f64,
    pub budget: usize,
    pub runs: Vec<PrRun>,
    pub success_fraction: f64,
    pub band_fraction: f64,
    pub failure_bound: f64,
    pub median_iterations: usize,
    pub max_iterations: usize,
}

/// Gradient descent from `num_seeds` random `S₁` starts with the iteration
/// budget evaluated at `ζ₀`.
#[allow(clippy::too_many_arguments)]
pub fn pr_experiment<R: Rng + ?Sized>(
    x: &PRSignal,
    eta: f64,
    c: f64,
    zeta0: f64,
    num_seeds: usize,
    init: InitMode,
    rng: &mut R,
) -> Result<PrExperimentSummary> {
    check_c(c)?;
    let max_eta = pr_max_step(x, c);
    if !(eta > 0.0 && eta < max_eta) {
        return Err(domain(format!("step size must lie in (0, {max_eta}), got {eta}")));
    }
    if !(zeta0 > 0.0 && zeta0 < x.norm() / std::f64::consts::SQRT_2) {
        return Err(domain("zeta0 must lie in (0, ‖x‖/√2)"));
    }
    if num_seeds == 0 {
        return Err(domain("num_seeds must be at least 1"));
    }
    let budget = pr_iteration_bound(x.norm(), zeta0, eta, c).ceil() as usize;
    let mut runs = Vec::with_capacity(num_seeds);
    for _ in 0..num_seeds {
        let z0 = loop {
            let z = sample_uniform_s1(x, rng);
            let zeta = hermitian_dot(x.x(), &z).norm() / x.norm();
            if init == InitMode::Uniform || zeta >= zeta0 {
                break z;
            }
        };
        runs.push(pr_run(&z0, x, eta, c, budget, None)?);
    }
    let successes = runs.iter().filter(|r| r.success).count();
    let in_band = runs.iter().filter(|r| r.initial_zeta < zeta0).count();
    let mut iters: Vec<usize> = runs.iter().map(|r| r.iterations).collect();
    iters.sort_unstable();
    Ok(PrExperimentSummary {
        n: x.dim(),
        eta,
        c,
        zeta0,
        budget,
        success_fraction: successes as f64 / num_seeds as f64,
        band_fraction: in_band as f64 / num_seeds as f64,
        failure_bound: pr_failure_bound(x.dim(), zeta0, x.norm()),
        median_iterations: iters[iters.len() / 2],
        max_iterations: *iters.last().expect("nonempty"),
        runs,
    })
}
