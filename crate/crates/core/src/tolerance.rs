use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module. Exact operator equalities are
/// compared through these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Hermiticity, proportionality and reconstruction checks.
    pub herm: f64,
    /// Relative eigenvalue floor for positive semidefiniteness.
    pub psd: f64,
    /// Residual bound for linear-program solutions.
    pub lp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            psd: 1e-9,
            lp: 1e-8,
        }
    }
}
