//! Geometry of the unit sphere `S^{n-1}`.
//!
//! Points are [`UnitVector`]s. The chart `w ↦ (w, √(1 − ‖w‖²))` over the open
//! unit ball covers the hemisphere `q_n > 0`; [`ChartVector`] holds `w`. The
//! margin `ζ = q_n/‖w‖∞ − 1` measures how far a point in the section
//! `C = {q_n ≥ ‖w‖∞}` sits from the boundary where the last coordinate stops
//! being the dominant one, and `C_ζ` is the set with margin at least `ζ`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::tolerances;

/// A point on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    /// Wraps a vector that is already unit norm (within [`tolerances::UNIT_NORM`]).
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > tolerances::UNIT_NORM {
            return Err(domain(format!("vector norm {norm} is not one")));
        }
        Ok(Self(coords))
    }

    /// Scales a nonzero finite vector onto the sphere.
    pub fn normalize(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// Standard basis vector `e_i` (0-based).
    pub fn basis(n: usize, i: usize) -> Self {
        assert!(i < n, "basis index {i} out of range for dimension {n}");
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.amax()
    }
}

/// Chart coordinates `w ∈ B₁(0) ⊂ R^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartVector(DVector<f64>);

impl ChartVector {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        let norm_sq = w.norm_squared();
        if !norm_sq.is_finite() || norm_sq >= 1.0 {
            return Err(domain(format!(
                "chart vector must satisfy ‖w‖ < 1, got ‖w‖ = {}",
                norm_sq.sqrt()
            )));
        }
        Ok(Self(w))
    }

    pub fn from_slice(w: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(w))
    }

    /// The chart center `w = 0` in ambient dimension `n`.
    pub fn origin(n: usize) -> Self {
        Self(DVector::zeros(n - 1))
    }

    /// Chart coordinates of a point on the open upper hemisphere.
    pub fn from_sphere(q: &UnitVector) -> Result<Self> {
        if q.last() <= 0.0 {
            return Err(domain("point is outside the chart (q_n ≤ 0)"));
        }
        let n = q.dim();
        Self::new(q.coords().rows(0, n - 1).into_owned())
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.0
    }

    /// Ambient dimension `n` (one more than the chart dimension).
    pub fn ambient_dim(&self) -> usize {
        self.0.len() + 1
    }

    /// Last sphere coordinate `q_n = √(1 − ‖w‖²)`.
    pub fn qn(&self) -> f64 {
        (1.0 - self.0.norm_squared()).sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.amax()
    }

    /// Index of the largest-magnitude coordinate; ties go to the smallest index.
    pub fn argmax_abs(&self) -> Option<usize> {
        argmax_abs(self.0.as_slice())
    }
}

/// A tangent vector `dir` at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    dir: DVector<f64>,
}

impl TangentVector {
    /// Checks tangency within [`tolerances::TANGENCY`].
    pub fn new(base: UnitVector, dir: DVector<f64>) -> Result<Self> {
        if dir.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: dir.len(),
            });
        }
        let radial = base.coords().dot(&dir);
        if radial.abs() > tolerances::TANGENCY * dir.norm().max(1.0) {
            return Err(domain(format!("direction is not tangent: ⟨q, v⟩ = {radial}")));
        }
        Ok(Self { base, dir })
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn dir(&self) -> &DVector<f64> {
        &self.dir
    }

    pub fn norm(&self) -> f64 {
        self.dir.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base: self.base.clone(),
            dir: &self.dir * factor,
        }
    }

    pub fn into_dir(self) -> DVector<f64> {
        self.dir
    }
}

pub(crate) fn argmax_abs(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let a = v.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best.map(|(i, _)| i)
}

/// `q(w) = (w, √(1 − ‖w‖²))`.
pub fn chart_to_sphere(w: &ChartVector) -> UnitVector {
    let m = w.0.len();
    let mut q = DVector::zeros(m + 1);
    q.rows_mut(0, m).copy_from(&w.0);
    q[m] = w.qn();
    UnitVector(q)
}

/// Projection onto `T_q S^{n-1}`: `g − ⟨q, g⟩ q`.
pub fn tangent_project(q: &UnitVector, g: &DVector<f64>) -> TangentVector {
    assert_eq!(q.dim(), g.len(), "tangent_project: dimension mismatch");
    let radial = q.0.dot(g);
    TangentVector {
        base: q.clone(),
        dir: g - &q.0 * radial,
    }
}

/// Exponential map `exp_q(v) = cos‖v‖ q + sin‖v‖ v/‖v‖`.
///
/// The result is renormalized so rounding never accumulates along long runs.
pub fn exp_map(v: &TangentVector) -> UnitVector {
    let q = &v.base;
    let len = v.norm();
    if len == 0.0 {
        return q.clone();
    }
    let next = &q.0 * len.cos() + &v.dir * (len.sin() / len);
    let norm = next.norm();
    UnitVector(next / norm)
}

/// Margin `ζ = q_n/‖w‖∞ − 1`; `+∞` at the chart center.
pub fn zeta(w: &ChartVector) -> f64 {
    let inf = w.inf_norm();
    if inf == 0.0 {
        return f64::INFINITY;
    }
    w.qn() / inf - 1.0
}

/// Membership in `C_ζ₀ = {q_n ≥ (1 + ζ₀)‖w‖∞}`.
pub fn in_c_zeta(w: &ChartVector, zeta0: f64) -> bool {
    debug_assert!(zeta0 >= 0.0, "zeta0 must be nonnegative");
    w.qn() + tolerances::SECTION_BOUNDARY >= (1.0 + zeta0) * w.inf_norm()
}

/// Half-width `s(ζ) = 1/√((2+ζ)ζ + n)` of the largest `L∞` ball inside `C_ζ`.
pub fn inner_inf_radius(n: usize, zeta: f64) -> f64 {
    1.0 / ((2.0 + zeta) * zeta + n as f64).sqrt()
}

/// Radius `√(n−1)·s(ζ)` of the smallest `L²` ball containing `C_ζ`.
pub fn outer_l2_radius(n: usize, zeta: f64) -> f64 {
    ((n - 1) as f64).sqrt() * inner_inf_radius(n, zeta)
}

/// The point of `∂C_ζ` along a ray: `w = t·d` with `q_n = (1+ζ)‖w‖∞`.
pub fn point_on_zeta_boundary(direction: &DVector<f64>, zeta: f64) -> Result<ChartVector> {
    let inf = direction.amax();
    if inf == 0.0 || !inf.is_finite() {
        return Err(domain("boundary direction must be nonzero and finite"));
    }
    if zeta < 0.0 {
        return Err(domain("zeta must be nonnegative"));
    }
    let scale = 1.0 / (direction.norm_squared() + (1.0 + zeta).powi(2) * inf * inf).sqrt();
    ChartVector::new(direction * scale)
}

/// Uniform sample on `S^{n-1}` by normalizing an i.i.d. standard normal vector.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitVector {
    assert!(n >= 2, "sphere sampling needs n ≥ 2");
    loop {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(q) = UnitVector::normalize(g) {
            return q;
        }
    }
}
