//! Tunable thresholds and timings for aggregation and escalation.

use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::signal::Strength;

/// Tolerance for comparing scores against fractional thresholds, so that
/// e.g. `0.1 * 30` behaves like exactly 3.
pub const SCORE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub weight_weak: f64,
    pub weight_normal: f64,
    pub level1_abs: f64,
    pub level2_abs: f64,
    pub level2_frac: f64,
    pub level3_abs: f64,
    pub level3_frac: f64,
    pub weak_gate_frac: f64,
    pub yield_frac: f64,
    pub dwell_ms: u64,
    pub decay_ms: u64,
    pub ttl_ms: u64,
    pub cancel_divisor: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            weight_weak: 0.5,
            weight_normal: 1.0,
            level1_abs: 1.0,
            level2_abs: 2.0,
            level2_frac: 0.10,
            level3_abs: 3.0,
            level3_frac: 0.20,
            weak_gate_frac: 0.50,
            yield_frac: 0.50,
            dwell_ms: 4000,
            decay_ms: 10000,
            ttl_ms: 120_000,
            cancel_divisor: 2,
        }
    }
}

fn check_score(field: &'static str, v: f64) -> Result<(), PolicyError> {
    if !v.is_finite() || v < 0.0 {
        return Err(PolicyError {
            field,
            reason: format!("must be a finite nonnegative score, got {v}"),
        });
    }
    Ok(())
}

fn check_fraction(field: &'static str, v: f64) -> Result<(), PolicyError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(PolicyError {
            field,
            reason: format!("must lie in [0, 1], got {v}"),
        });
    }
    Ok(())
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        check_score("weight_weak", self.weight_weak)?;
        check_score("weight_normal", self.weight_normal)?;
        check_score("level1_abs", self.level1_abs)?;
        check_score("level2_abs", self.level2_abs)?;
        check_score("level3_abs", self.level3_abs)?;
        check_fraction("level2_frac", self.level2_frac)?;
        check_fraction("level3_frac", self.level3_frac)?;
        check_fraction("weak_gate_frac", self.weak_gate_frac)?;
        check_fraction("yield_frac", self.yield_frac)?;
        if self.weight_weak > self.weight_normal {
            return Err(PolicyError {
                field: "weight_weak",
                reason: "must not exceed weight_normal".into(),
            });
        }
        if self.cancel_divisor == 0 {
            return Err(PolicyError {
                field: "cancel_divisor",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Applies overrides on top of `self` and validates the result.
    pub fn with_overrides(&self, o: &PolicyOverrides) -> Result<PolicyConfig, PolicyError> {
        fn duration(field: &'static str, v: i64) -> Result<u64, PolicyError> {
            u64::try_from(v).map_err(|_| PolicyError {
                field,
                reason: format!("must be a nonnegative duration, got {v}"),
            })
        }
        let mut p = self.clone();
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { p.$f = v; })* };
        }
        set!(
            weight_weak,
            weight_normal,
            level1_abs,
            level2_abs,
            level2_frac,
            level3_abs,
            level3_frac,
            weak_gate_frac,
            yield_frac
        );
        if let Some(v) = o.dwell_ms {
            p.dwell_ms = duration("dwell_ms", v)?;
        }
        if let Some(v) = o.decay_ms {
            p.decay_ms = duration("decay_ms", v)?;
        }
        if let Some(v) = o.ttl_ms {
            p.ttl_ms = duration("ttl_ms", v)?;
        }
        if let Some(v) = o.cancel_divisor {
            p.cancel_divisor = u32::try_from(v).map_err(|_| PolicyError {
                field: "cancel_divisor",
                reason: format!("out of range: {v}"),
            })?;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Partial policy as supplied by clients and config files. Durations are
/// signed here so that a negative value is reported as an invalid policy
/// rather than a parse failure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_weak: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_normal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level1_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level2_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level2_frac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level3_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level3_frac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_gate_frac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yield_frac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dwell_ms: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_ms: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttl_ms: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cancel_divisor: Option<i64>,
}

impl PolicyOverrides {
    pub fn is_empty(&self) -> bool {
        *self == PolicyOverrides::default()
    }

    /// Overrides that reproduce `policy` exactly when applied to the defaults.
    pub fn from_policy(policy: &PolicyConfig) -> Self {
        let d = PolicyConfig::default();
        macro_rules! diff {
            ($($f:ident),*) => { PolicyOverrides {
                $($f: (policy.$f != d.$f).then_some(policy.$f),)*
                dwell_ms: (policy.dwell_ms != d.dwell_ms).then_some(policy.dwell_ms as i64),
                decay_ms: (policy.decay_ms != d.decay_ms).then_some(policy.decay_ms as i64),
                ttl_ms: (policy.ttl_ms != d.ttl_ms).then_some(policy.ttl_ms as i64),
                cancel_divisor: (policy.cancel_divisor != d.cancel_divisor)
                    .then_some(i64::from(policy.cancel_divisor)),
            } };
        }
        diff!(
            weight_weak,
            weight_normal,
            level1_abs,
            level2_abs,
            level2_frac,
            level3_abs,
            level3_frac,
            weak_gate_frac,
            yield_frac
        )
    }
}

/// Additive weight of one signal, and whether it is a strong override.
/// Strong signals carry zero additive weight; they act categorically.
pub fn weight_of(strength: Strength, policy: &PolicyConfig) -> (f64, bool) {
    match strength {
        Strength::Weak => (policy.weight_weak, false),
        Strength::Normal => (policy.weight_normal, false),
        Strength::Strong => (0.0, true),
    }
}
