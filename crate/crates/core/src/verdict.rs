//! Structured results of evaluating the critical-threshold predicates.

use serde::Serialize;

use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Every threshold condition holds: global regularity is predicted.
    SubCritical,
    /// The divergence (or spectral-gap) condition fails somewhere.
    SuperCritical,
    /// Divergence and gap conditions hold but the variation bound on `V0`
    /// does not; the conditions are inconclusive.
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::SubCritical => "SubCritical",
            Verdict::SuperCritical => "SuperCritical",
            Verdict::Indeterminate => "Indeterminate",
        })
    }
}

/// Where a threshold functional attains its extremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Location {
    Particle { index: usize, x: f64 },
    Cell { i: usize, j: usize, x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdVerdict {
    pub model: Model,
    pub verdict: Verdict,
    /// `min (d0 + phi*rho0)` (CS) or `min (d0 + 1)` (MT) over the evaluation set.
    pub divergence_margin: f64,
    pub divergence_argmin: Option<Location>,
    /// Spectral-gap slack `bound - max eta_S0`; 2D only.
    pub gap_margin: Option<f64>,
    pub max_eta_s0: Option<f64>,
    /// Variation-bound slack `bound - V0`; `None` when no finite `D_inf` exists.
    pub variation_slack: Option<f64>,
    /// Cell or particle where a failing condition is worst.
    pub violation: Option<Location>,
    /// Divergence margin over the whole computational domain rather than the
    /// horizon mask; 2D only.
    pub global_divergence_margin: Option<f64>,
    pub d_inf: Option<f64>,
    pub phi_inf: Option<f64>,
}

impl ThresholdVerdict {
    pub fn is_subcritical(&self) -> bool {
        self.verdict == Verdict::SubCritical
    }
}

impl std::fmt::Display for ThresholdVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"));
        writeln!(f, "model = {}", self.model)?;
        writeln!(f, "verdict = {}", self.verdict)?;
        writeln!(f, "divergence_margin = {:.6e}", self.divergence_margin)?;
        writeln!(f, "gap_margin = {}", opt(self.gap_margin))?;
        writeln!(f, "max_eta_s0 = {}", opt(self.max_eta_s0))?;
        writeln!(f, "variation_slack = {}", opt(self.variation_slack))?;
        writeln!(f, "global_divergence_margin = {}", opt(self.global_divergence_margin))?;
        writeln!(f, "d_inf = {}", opt(self.d_inf))?;
        writeln!(f, "phi_inf = {}", opt(self.phi_inf))?;
        match self.violation {
            Some(Location::Particle { index, x }) => writeln!(f, "violation = particle {index} at x = {x:.6}"),
            Some(Location::Cell { i, j, x, y }) => writeln!(f, "violation = cell ({i}, {j}) at ({x:.6}, {y:.6})"),
            None => writeln!(f, "violation = none"),
        }
    }
}

/// Which trigger declared a blowup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlowupReason {
    /// Some carried gradient fell below `-1 / eps_blow`.
    GradientBlowup,
    /// Two particles met or crossed.
    ParticleCrossing,
    /// The adaptive step fell below its floor.
    StepCollapse,
    /// A grid velocity gradient exceeded the cap.
    GradientCap,
    /// A field became NaN or infinite.
    NonFinite,
}

/// How a time integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    Completed,
    BlewUp { t: f64, reason: BlowupReason },
}

impl Outcome {
    pub fn blew_up(&self) -> bool {
        matches!(self, Outcome::BlewUp { .. })
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match *self {
            Outcome::BlewUp { t, .. } => Some(t),
            Outcome::Completed => None,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Completed => f.write_str("Completed"),
            Outcome::BlewUp { t, .. } => write!(f, "BlewUp({t})"),
        }
    }
}

