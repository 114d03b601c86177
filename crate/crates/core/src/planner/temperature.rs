//! Temperature adaptation: pick `τ` so the mean policy entropy over the
//! tree's internal nodes hits a target, then smooth it in log space.

use log::debug;
use serde::{Deserialize, Serialize};

use super::tree::SearchTree;
use super::PlannerError;
use crate::entropy::{self, EntropyKind};
use crate::root::{brent, Tolerance};

/// Largest upper bracket tried when `H⁺` keeps the same sign.
pub const BRACKET_CEILING: f64 = 1e9;

/// Smallest `τ_min` accepted. Keeps `τ̃·τ_sel` well inside the entropy
/// functions' domain.
pub const TAU_MIN_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemperatureConfig {
    pub tau0: f64,
    pub tau_min: f64,
    /// Target mean entropy `H_avg`.
    pub target_entropy: f64,
    /// Weight on the old temperature in the log-space average.
    pub alpha: f64,
    pub adaptation_frequency: usize,
    pub bracket_hi: f64,
    /// Treat `alpha` as the decay over one planning call of `n_passes`
    /// passes, i.e. smooth with `alpha^(adaptation_frequency / n_passes)`
    /// at each adaptation.
    pub alpha_per_call: bool,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        TemperatureConfig {
            tau0: 10.0,
            tau_min: 0.01,
            target_entropy: 0.2,
            alpha: 0.9,
            adaptation_frequency: 50,
            bracket_hi: 1e6,
            alpha_per_call: false,
        }
    }
}

impl TemperatureConfig {
    /// Checks everything except the entropy target.
    pub fn validate_schedule(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if !(self.tau_min.is_finite() && self.tau_min >= TAU_MIN_FLOOR) {
            return bad("tau_min must be >= 1e-9");
        }
        if !(self.tau0.is_finite() && self.tau0 >= self.tau_min) {
            return bad("tau0 must be finite and >= tau_min");
        }
        if !(self.bracket_hi.is_finite() && self.bracket_hi > self.tau_min) {
            return bad("bracket_hi must exceed tau_min");
        }
        Ok(())
    }

    /// Full validation for adaptive mode with `k` actions.
    pub fn validate(&self, kind: EntropyKind, k: usize) -> Result<(), PlannerError> {
        self.validate_schedule()?;
        let h_max = entropy::max_entropy(kind, k)?;
        if !(self.target_entropy > 0.0 && self.target_entropy < h_max) {
            return Err(PlannerError::Config(format!(
                "target entropy {} must lie in (0, {h_max})",
                self.target_entropy
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PlannerError::Config("alpha must lie in (0, 1)".into()));
        }
        if self.adaptation_frequency == 0 {
            return Err(PlannerError::Config(
                "adaptation_frequency must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Smoothing weight applied at each adaptation of a search with
    /// `n_passes` passes per call.
    pub fn step_alpha(&self, n_passes: usize) -> f64 {
        if self.alpha_per_call {
            self.alpha
                .powf(self.adaptation_frequency as f64 / n_passes as f64)
        } else {
            self.alpha
        }
    }
}

/// Result of one root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptation {
    /// `max(τ_min, root)`, before smoothing.
    pub tau: f64,
    /// True when Brent found a sign change strictly inside the bracket.
    pub interior: bool,
    pub internal_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureController {
    pub config: TemperatureConfig,
    /// Current smoothed temperature `τ̃`.
    pub tau: f64,
    /// Weight on the old temperature used by [`TemperatureController::smooth`].
    pub alpha: f64,
}

impl TemperatureController {
    pub fn new(config: TemperatureConfig) -> Self {
        TemperatureController {
            config,
            tau: config.tau0,
            alpha: config.alpha,
        }
    }

    pub fn reset(&mut self) {
        self.tau = self.config.tau0;
    }

    /// `τ̃ ← exp(α ln τ̃ + (1 - α) ln τ_new)`, kept at or above `τ_min`.
    pub fn smooth(&mut self, tau_new: f64) -> f64 {
        self.tau = smooth_temperature(self.tau, tau_new, self.alpha).max(self.config.tau_min);
        self.tau
    }
}

pub fn smooth_temperature(tau: f64, tau_new: f64, alpha: f64) -> f64 {
    (alpha * tau.ln() + (1.0 - alpha) * tau_new.ln()).exp()
}

/// Mean entropy of the soft policies of `qs` at temperature `tau`.
pub fn mean_entropy(qs: &[Vec<f64>], kind: EntropyKind, tau: f64) -> Result<f64, PlannerError> {
    let mut total = 0.0;
    for q in qs {
        total += entropy::policy_entropy(q, kind, tau)?;
    }
    Ok(total / qs.len() as f64)
}

/// Finds `τ` with mean entropy over `qs` equal to `target`.
///
/// The search runs in `ln τ` over `[τ_min, bracket_hi]`. Without a sign
/// change the upper end grows tenfold up to [`BRACKET_CEILING`]; if there is
/// still none the endpoint with the smaller excess entropy is returned.
pub fn solve_temperature(
    qs: &[Vec<f64>],
    kind: EntropyKind,
    target: f64,
    tau_min: f64,
    bracket_hi: f64,
) -> Result<(f64, bool), PlannerError> {
    let excess = |log_tau: f64| mean_entropy(qs, kind, log_tau.exp()).map(|h| h - target);
    let lo = tau_min.ln();
    let f_lo = excess(lo)?;
    if f_lo == 0.0 {
        return Ok((tau_min, false));
    }
    let mut hi_tau = bracket_hi;
    let mut f_hi = excess(hi_tau.ln())?;
    while f_lo.signum() == f_hi.signum() && hi_tau < BRACKET_CEILING {
        hi_tau = (hi_tau * 10.0).min(BRACKET_CEILING);
        f_hi = excess(hi_tau.ln())?;
    }
    if f_hi == 0.0 {
        return Ok((hi_tau, false));
    }
    if f_lo.signum() == f_hi.signum() {
        let tau = if f_hi.abs() < f_lo.abs() {
            hi_tau
        } else {
            tau_min
        };
        return Ok((tau, false));
    }
    // Errors inside the closure cannot escape brent; entropies of finite
    // q-vectors at positive temperature are always finite.
    let tol = Tolerance {
        xtol: 1e-13,
        ..Tolerance::default()
    };
    let root = brent(|x| excess(x).unwrap_or(f64::NAN), lo, hi_tau.ln(), tol)?;
    Ok((root.x.exp().max(tau_min), true))
}

/// Root search over the internal nodes of `tree`.
///
/// Returns the current `τ̃` unchanged when the tree has no internal node.
pub fn adapt_temperature<S: Clone>(
    tree: &SearchTree<S>,
    ctl: &TemperatureController,
    kind: EntropyKind,
) -> Result<Adaptation, PlannerError> {
    let qs: Vec<Vec<f64>> = tree
        .internal_nodes()
        .map(|id| tree.child_qvalues(id))
        .collect();
    if qs.is_empty() {
        debug!("no internal nodes; keeping tau = {}", ctl.tau);
        return Ok(Adaptation {
            tau: ctl.tau,
            interior: false,
            internal_nodes: 0,
        });
    }
    let cfg = &ctl.config;
    let (tau, interior) =
        solve_temperature(&qs, kind, cfg.target_entropy, cfg.tau_min, cfg.bracket_hi)?;
    Ok(Adaptation {
        tau,
        interior,
        internal_nodes: qs.len(),
    })
}
