//! Numerical tolerances shared by the library and its tests.
//!
//! Every threshold that decides a boolean outcome (membership, tie detection,
//! pass/fail of a statistical gate) lives here so the library and the test
//! suites always agree on the same numbers.

/// Deviation of `‖q‖₂` from one accepted for a [`crate::sphere::UnitVector`].
pub const UNIT_NORM: f64 = 1e-12;

/// Largest `|⟨q, v⟩|` accepted for a tangent vector at `q`.
pub const TANGENCY: f64 = 1e-10;

/// Two coordinate magnitudes closer than this are treated as tied.
pub const MAGNITUDE_TIE: f64 = 1e-9;

/// Slack on the section inequality `q_n ≥ (1+ζ)‖w‖∞`, so points built
/// exactly on `∂C_ζ` are members despite rounding.
pub const SECTION_BOUNDARY: f64 = 1e-12;

/// Riemannian gradient norm below which a point counts as critical.
pub const CRITICAL_GRADIENT: f64 = 1e-10;

/// Slack allowed on exactly-provable inequalities evaluated in floating point.
pub const INEQUALITY_SLACK: f64 = 1e-10;

/// Relative tolerance for the closed-form phase retrieval update identities.
pub const PR_IDENTITY_REL: f64 = 1e-10;

/// Number of standard errors used by statistical "must be positive" gates.
pub const SIGMA_GATE: f64 = 4.0;

/// Number of binomial standard deviations used for probability bounds.
pub const BINOMIAL_GATE: f64 = 3.0;

/// Smoothing parameters at or above this value trigger a warning.
pub const MU_WARN_THRESHOLD: f64 = 1.0 / 16.0;

/// Largest dimension for which critical points are enumerated (3ⁿ − 1 points).
pub const MAX_ENUMERATION_DIM: usize = 12;

/// Minimum sample count accepted by the volume estimator.
pub const MIN_VOLUME_SAMPLES: usize = 10_000;
