//! Edge-weight solvers on a fixed candidate support.
//!
//! * [`learn_log_graph`]: log-degree barrier plus Frobenius penalty, solved by
//!   forward-backward primal-dual splitting.
//! * [`learn_l2_graph`]: squared-degree penalty with the total weight pinned
//!   to `n`, same scheme with a simplex projection.
//! * [`learn_daitch_hard`] / [`learn_daitch_soft`]: `‖LX‖_F²` fits with a hard
//!   or quadratically penalized minimum-degree constraint.

mod daitch;
mod l2;
mod log_model;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use daitch::{learn_daitch_hard, learn_daitch_soft};
pub use l2::{l2_objective, learn_l2_graph};
pub use log_model::{kkt_residual_log, learn_log_graph, log_objective};
pub use simplex::project_simplex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Fraction of the largest admissible step size.
    pub step_scale: f64,
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-4,
            step_scale: 0.9,
            record_objective: false,
        }
    }
}

impl SolverOptions {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.step_scale > 0.0 && self.step_scale < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step_scale must lie in (0, 1), got {}",
                self.step_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_objective: f64,
    pub rel_change: f64,
    /// Seconds.
    pub wall_time: f64,
    /// Only set by the log model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `‖new − old‖ / ‖new‖`, with `0/0 = 0`.
fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (a, b) in new.iter().zip(old) {
        diff += (a - b) * (a - b);
        norm += a * a;
    }
    if diff == 0.0 {
        0.0
    } else if norm == 0.0 {
        f64::INFINITY
    } else {
        (diff / norm).sqrt()
    }
}
