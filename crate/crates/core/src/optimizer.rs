//! Riemannian gradient descent with per-iteration tracing.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::objectives::SphereObjective;
use crate::sphere::{argmax_abs, exp_map, tangent_project, zeta, ChartVector, UnitVector};

/// A coordinate index with a sign; displayed 1-based, e.g. `+3` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedIndex {
    /// 0-based coordinate.
    pub index: usize,
    pub positive: bool,
}

impl SignedIndex {
    pub fn sign(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    /// `±(index + 1)`.
    pub fn one_based(self) -> i64 {
        let k = self.index as i64 + 1;
        if self.positive {
            k
        } else {
            -k
        }
    }
}

impl fmt::Display for SignedIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.positive { '+' } else { '-' }, self.index + 1)
    }
}

impl Serialize for SignedIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.one_based())
    }
}

/// Maps `q` into the canonical section: the largest-magnitude coordinate
/// (smallest index on ties) is swapped to the last slot and made positive.
pub fn section_map(q: &UnitVector) -> (ChartVector, SignedIndex) {
    let n = q.dim();
    let coords = q.coords();
    let k = argmax_abs(coords.as_slice()).expect("unit vector is nonempty");
    let positive = coords[k] >= 0.0;
    let s = if positive { 1.0 } else { -1.0 };
    let mut moved = coords * s;
    moved.swap_rows(k, n - 1);
    let w = ChartVector::new(moved.rows(0, n - 1).into_owned()).expect("max coordinate is nonzero on the sphere");
    (w, SignedIndex { index: k, positive })
}

/// Closest signed column of an orthogonal dictionary and the distance `‖q ∓ aₖ‖₂`.
pub fn recovery_error(q: &UnitVector, a0: &DMatrix<f64>) -> (SignedIndex, f64) {
    let (best, diff) = closest_signed_column(q, a0);
    (best, diff.norm())
}

fn closest_signed_column(q: &UnitVector, a0: &DMatrix<f64>) -> (SignedIndex, DVector<f64>) {
    assert_eq!(a0.nrows(), q.dim(), "dictionary row count must match the dimension");
    let corr = a0.tr_mul(q.coords());
    let k = argmax_abs(corr.as_slice()).expect("dictionary has columns");
    let positive = corr[k] >= 0.0;
    let s = if positive { 1.0 } else { -1.0 };
    let diff = q.coords() - a0.column(k) * s;
    (SignedIndex { index: k, positive }, diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallNorm {
    L2,
    Linf,
}

impl BallNorm {
    fn of(self, v: &DVector<f64>) -> f64 {
        match self {
            BallNorm::L2 => v.norm(),
            BallNorm::Linf => v.amax(),
        }
    }
}

/// Where the stopping ball is centered.
#[derive(Debug, Clone, PartialEq)]
pub enum BallCenter {
    /// The chart origin of the iterate's own section, i.e. the nearest signed basis vector.
    ChartOrigin,
    /// The nearest signed column of the given orthogonal dictionary.
    BestSignedColumn(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopBall {
    pub norm: BallNorm,
    pub radius: f64,
    pub center: BallCenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub stop_grad_tol: f64,
    pub stop_ball: Option<StopBall>,
    /// Keep every iteration's record; otherwise only the final one is kept.
    pub record_trace: bool,
}

impl DescentConfig {
    pub fn new(eta: f64, max_iters: usize) -> Self {
        Self {
            eta,
            max_iters,
            stop_grad_tol: 0.0,
            stop_ball: None,
            record_trace: true,
        }
    }

    pub fn with_ball(mut self, ball: StopBall) -> Self {
        self.stop_ball = Some(ball);
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.stop_grad_tol = tol;
        self
    }

    pub fn with_record_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(domain(format!("step size must be positive, got {}", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(domain("max_iters must be at least 1"));
        }
        if !(self.stop_grad_tol >= 0.0) {
            return Err(domain("gradient tolerance must be nonnegative"));
        }
        if let Some(ball) = &self.stop_ball {
            if !(ball.radius > 0.0) {
                return Err(domain("stopping radius must be positive"));
            }
        }
        Ok(())
    }
}

/// Step size for the separable problem: `min(0.01/n, μ/2)`.
pub fn separable_default_eta(n: usize, mu: f64) -> f64 {
    (0.01 / n as f64).min(mu / 2.0)
}

/// Step size for dictionary learning: `0.05·θ·s/(n ln(np))`.
pub fn dictionary_default_eta(n: usize, p: usize, theta: f64, s: f64) -> f64 {
    0.05 * theta * s / (n as f64 * ((n * p) as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub zeta: f64,
    pub w_inf: f64,
    pub dist_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    BallEntered,
    GradTol,
    MaxIters,
    NumericalAbort { iteration: usize, reason: String },
}

impl TerminalStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TerminalStatus::BallEntered => "ball_entered",
            TerminalStatus::GradTol => "grad_tol",
            TerminalStatus::MaxIters => "max_iters",
            TerminalStatus::NumericalAbort { .. } => "numerical_abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub records: Vec<TraceRecord>,
    pub status: TerminalStatus,
    pub final_point: UnitVector,
}

impl DescentTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace always has a record")
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.last().iter
    }

    /// `f(q₀) − f(q_T) − (η/2)Σ_{t<T}‖grad f(q_t)‖²`; nonnegative when the
    /// sufficient-decrease bound holds.
    pub fn descent_gap(&self, eta: f64) -> f64 {
        let first = self.records.first().expect("nonempty trace");
        let last = self.last();
        let sum: f64 = self.records[..self.records.len() - 1]
            .iter()
            .map(|r| r.grad_norm * r.grad_norm)
            .sum();
        first.f - last.f - 0.5 * eta * sum
    }
}

fn observe(q: &UnitVector, center: Option<&StopBall>) -> (f64, f64, f64) {
    let (frame_q, dist) = match center {
        Some(StopBall {
            norm,
            center: BallCenter::BestSignedColumn(a0),
            ..
        }) => {
            let (_, diff) = closest_signed_column(q, a0);
            let rotated = UnitVector::normalize(a0.tr_mul(q.coords())).expect("orthogonal dictionary");
            (Some(rotated), Some(norm.of(&diff)))
        }
        _ => (None, None),
    };
    let (w, _) = section_map(frame_q.as_ref().unwrap_or(q));
    let dist = dist.unwrap_or_else(|| match center {
        Some(ball) => ball.norm.of(w.w()),
        None => w.w().norm(),
    });
    (zeta(&w), w.inf_norm(), dist)
}

/// Runs `q ← exp_q(−η grad f(q))` until a stopping rule fires.
///
/// Non-finite values abort the run with [`TerminalStatus::NumericalAbort`].
pub fn riemannian_gd<O: SphereObjective + ?Sized>(
    objective: &O,
    q0: &UnitVector,
    cfg: &DescentConfig,
) -> Result<DescentTrace> {
    cfg.validate()?;
    if q0.dim() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            found: q0.dim(),
        });
    }
    let ball = cfg.stop_ball.as_ref();
    let mut records = Vec::new();
    let mut q = q0.clone();
    let mut t = 0;
    let status = loop {
        let (f, g) = objective.value_and_gradient(&q);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            break TerminalStatus::NumericalAbort {
                iteration: t,
                reason: "non-finite objective value or gradient".into(),
            };
        }
        let grad = tangent_project(&q, &g);
        let grad_norm = grad.norm();
        let (z, w_inf, dist) = observe(&q, ball);
        if !cfg.record_trace {
            records.clear();
        }
        records.push(TraceRecord {
            iter: t,
            f,
            grad_norm,
            zeta: z,
            w_inf,
            dist_target: dist,
        });
        if let Some(b) = ball {
            if dist < b.radius {
                break TerminalStatus::BallEntered;
            }
        }
        if grad_norm <= cfg.stop_grad_tol {
            break TerminalStatus::GradTol;
        }
        if t == cfg.max_iters {
            break TerminalStatus::MaxIters;
        }
        q = exp_map(&grad.scaled(-cfg.eta));
        t += 1;
    };
    if let TerminalStatus::NumericalAbort { iteration, reason } = &status {
        log::warn!("descent aborted at iteration {iteration}: {reason}");
    }
    Ok(DescentTrace {
        records,
        status,
        final_point: q,
    })
}
