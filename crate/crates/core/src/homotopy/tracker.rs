//! Predictor-corrector path tracking.
//!
//! Paths run from `t = 1` (start) to `t = 0` (target), so that the target end
//! can be approached without losing precision in `t`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TrackerConfig;
use crate::linalg::C64;

/// A homotopy `H(x, t)` with its derivatives.
pub(crate) trait Homotopy: Sync {
    /// `(H, dH/dx, dH/dt)` at `(x, t)`.
    fn evaluate(&self, x: &DVector<C64>, t: f64) -> (DVector<C64>, DMatrix<C64>, DVector<C64>);

    /// Magnitude compared against the divergence bound.
    fn escape(&self, x: &DVector<C64>) -> f64 {
        x.norm()
    }

    /// Chart coordinates of a tracked point.
    fn affine(&self, x: &DVector<C64>) -> Vec<C64> {
        x.as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    Converged,
    Diverged,
    Singular,
    StepFailure,
}

#[derive(Debug, Clone)]
pub(crate) struct PathOutcome {
    pub status: PathStatus,
    pub x: DVector<C64>,
    pub t: f64,
    pub steps: usize,
}

fn newton_step(h: &impl Homotopy, x: &DVector<C64>, t: f64) -> Option<DVector<C64>> {
    let (v, j, _) = h.evaluate(x, t);
    j.lu().solve(&(-v))
}

fn correct(
    h: &impl Homotopy,
    mut x: DVector<C64>,
    t: f64,
    cfg: &TrackerConfig,
) -> Option<DVector<C64>> {
    let mut previous = f64::INFINITY;
    for it in 0..cfg.max_corrector_iterations {
        let dx = newton_step(h, &x, t)?;
        let nd = dx.norm();
        if !nd.is_finite() {
            return None;
        }
        x += dx;
        let scale = x.norm().max(1.0);
        // a large first correction means the predictor left the path's basin
        if it == 0 && nd > cfg.max_first_correction * scale {
            return None;
        }
        if it > 0 && nd > 0.5 * previous {
            return None;
        }
        if nd <= cfg.corrector_tolerance * scale {
            return Some(x);
        }
        previous = nd;
    }
    None
}

/// Tracks one path from `t = 1` to `t = 0`.
pub(crate) fn track(h: &impl Homotopy, start: DVector<C64>, cfg: &TrackerConfig) -> PathOutcome {
    let mut x = start;
    let mut t = 1.0_f64;
    let mut step = cfg.initial_step;
    let mut streak = 0;
    let mut steps = 0;
    loop {
        if t <= 0.0 {
            return PathOutcome {
                status: PathStatus::Converged,
                x,
                t: 0.0,
                steps,
            };
        }
        if steps >= cfg.max_steps {
            return PathOutcome {
                status: PathStatus::StepFailure,
                x,
                t,
                steps,
            };
        }
        steps += 1;
        let h_eff = step.min(t);
        let t_new = if h_eff >= t { 0.0 } else { t - h_eff };
        let (_, j, ht) = h.evaluate(&x, t);
        let accepted = j
            .lu()
            .solve(&(-ht))
            .and_then(|dxdt| {
                let predicted = &x + dxdt * C64::new(t_new - t, 0.0);
                correct(h, predicted, t_new, cfg)
            });
        match accepted {
            Some(next) => {
                x = next;
                t = t_new;
                streak += 1;
                if streak >= 5 {
                    step = (step * 2.0).min(cfg.max_step);
                    streak = 0;
                }
                if h.escape(&x) > cfg.divergence_bound {
                    return PathOutcome {
                        status: PathStatus::Diverged,
                        x,
                        t,
                        steps,
                    };
                }
            }
            None => {
                step *= 0.5;
                streak = 0;
                if step < cfg.min_step {
                    return PathOutcome {
                        status: PathStatus::StepFailure,
                        x,
                        t,
                        steps,
                    };
                }
            }
        }
    }
}
