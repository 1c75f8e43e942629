//! Decision tree mapping a model to an absorption verdict.
//!
//! Rules are tried in a fixed order and the first one that applies wins:
//!
//! 1. drifts to `+inf` → not absorbed with probability one;
//! 2. no downward creeping and `0 < pi(-inf, 0) < inf` → conservative;
//! 3. 0 not regular for `(-inf, 0)` → conservative;
//! 4. no negative jumps and no drift to `+inf` → absorbed;
//! 5. creeps downward, and `-X` is a subordinator or the downward ladder
//!    height has finite mean → absorbed;
//! 6. 0 regular downward, drift to `-inf`, `sup U* pi_bar < kappa = 1`
//!    (negative subordinators only) → absorbed;
//! 7. stable family: sign of the Lamperti mean bracket.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{hinf_supremum, stable_mean_xi};
use crate::models::{LevyModel, LongRun, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    AbsorbedAS,
    Conservative,
    /// `X` drifts to `+inf`: `P_x(zeta < inf) < 1`.
    NotAbsorbedWProb1,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DriftsToPlusInfinity,
    InfiniteLifetimeFiniteActivity,
    InfiniteLifetimeIrregular,
    NoNegativeJumps,
    CreepingTheorem,
    HinfTheorem,
    StableCriterion,
    NoRuleApplies,
}

impl Rule {
    pub fn id(&self) -> &'static str {
        match self {
            Rule::DriftsToPlusInfinity => "drifts-to-plus-infinity",
            Rule::InfiniteLifetimeFiniteActivity => "prop-infinite-a",
            Rule::InfiniteLifetimeIrregular => "prop-infinite-b",
            Rule::NoNegativeJumps => "no-negative-jumps",
            Rule::CreepingTheorem => "thm-creeping",
            Rule::HinfTheorem => "thm-hinf",
            Rule::StableCriterion => "stable-criterion",
            Rule::NoRuleApplies => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationVerdict {
    pub verdict: Verdict,
    pub rule: Rule,
    pub evidence: BTreeMap<String, f64>,
}

impl ClassificationVerdict {
    fn new(verdict: Verdict, rule: Rule) -> Self {
        ClassificationVerdict {
            verdict,
            rule,
            evidence: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.evidence.insert(key.to_string(), value);
        self
    }
}

/// Treat `|B|` below this as the boundary case `B = 0`.
const BOUNDARY_TOL: f64 = 1e-12;

/// Classify a model by the fixed rule order.
pub fn classify(model: &LevyModel) -> ClassificationVerdict {
    let f = &model.flags;
    if f.long_run == LongRun::DriftsPlus {
        return ClassificationVerdict::new(Verdict::NotAbsorbedWProb1, Rule::DriftsToPlusInfinity);
    }
    if !f.creeps_down && f.has_neg_jumps && f.finite_neg_activity {
        return ClassificationVerdict::new(
            Verdict::Conservative,
            Rule::InfiniteLifetimeFiniteActivity,
        )
        .with("neg_jump_rate", model.total_neg_rate());
    }
    if !f.zero_regular_down {
        return ClassificationVerdict::new(Verdict::Conservative, Rule::InfiniteLifetimeIrregular);
    }
    if !f.has_neg_jumps {
        return ClassificationVerdict::new(Verdict::AbsorbedAS, Rule::NoNegativeJumps);
    }
    if f.creeps_down && (f.is_neg_subordinator || f.down_ladder_finite_mean) {
        return ClassificationVerdict::new(Verdict::AbsorbedAS, Rule::CreepingTheorem);
    }
    let mut hinf_evidence = None;
    if f.zero_regular_down && f.long_run == LongRun::DriftsMinus {
        if let Ok(h) = hinf_supremum(model) {
            if h.sup_value < 1.0 {
                return ClassificationVerdict::new(Verdict::AbsorbedAS, Rule::HinfTheorem)
                    .with("hinf_sup", h.sup_value)
                    .with("kappa", 1.0);
            }
            hinf_evidence = Some(h);
        }
    }
    if let ModelSpec::Stable { alpha, rho_bar, .. } = model.spec {
        let v = classify_stable_params(alpha, rho_bar);
        if v.verdict != Verdict::Unknown {
            return v;
        }
    }
    let mut v = ClassificationVerdict::new(Verdict::Unknown, Rule::NoRuleApplies);
    if let Some(h) = hinf_evidence {
        v = v
            .with("hinf_sup", h.sup_value)
            .with("hinf_grid_sup", h.grid_sup)
            .with("kappa", 1.0);
    }
    v
}

/// Stable criterion on raw `(alpha, rho_bar)`, valid whenever
/// `0 < alpha rho_bar < 1`. `B = 0` is mapped to conservative.
pub fn classify_stable_params(alpha: f64, rho_bar: f64) -> ClassificationVerdict {
    match stable_mean_xi(alpha, rho_bar) {
        Ok(b) => {
            let (verdict, boundary) = if b.abs() <= BOUNDARY_TOL {
                (Verdict::Conservative, 1.0)
            } else if b < 0.0 {
                (Verdict::AbsorbedAS, 0.0)
            } else {
                (Verdict::Conservative, 0.0)
            };
            ClassificationVerdict::new(verdict, Rule::StableCriterion)
                .with("mean_xi_bracket", b)
                .with("boundary", boundary)
                .with("alpha_rho_bar", alpha * rho_bar)
        }
        Err(_) => ClassificationVerdict::new(Verdict::Unknown, Rule::NoRuleApplies),
    }
}
