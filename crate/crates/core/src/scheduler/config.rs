use crate::env::{self, EnvError};

/// Probe and guardrail settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Fraction of rows in the probe sample.
    pub frac: f64,
    /// Lower bound on the sample size (capped at the row count).
    pub min_rows: usize,
    /// Timed iterations per target, after one warm-up.
    pub iters: usize,
    /// Cumulative timed wall-time cap per target.
    pub cap_ms: f64,
    /// Shortlisted candidates actually timed.
    pub top_k: usize,
    /// Accept the best candidate iff `t_star <= alpha * t_b`.
    pub alpha: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            frac: 0.02,
            min_rows: 512,
            iters: 5,
            cap_ms: 1.0,
            top_k: 3,
            alpha: 0.95,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.frac > 0.0 && self.frac <= 1.0) {
            return Err(format!("probe fraction {} not in (0, 1]", self.frac));
        }
        if self.iters == 0 {
            return Err("probe iterations must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("guardrail alpha {} not in (0, 1]", self.alpha));
        }
        if self.top_k == 0 {
            return Err("top_k must be at least 1".into());
        }
        if self.cap_ms.is_nan() || self.cap_ms < 0.0 {
            return Err(format!("probe cap {} ms is negative", self.cap_ms));
        }
        Ok(())
    }

    /// Defaults overridden by `AUTOSAGE_PROBE_*` and `AUTOSAGE_GUARDRAIL`.
    pub fn from_env() -> Result<Self, EnvError> {
        let mut c = Self::default();
        if let Some(v) = env::parse(env::PROBE_FRAC)? {
            c.frac = v;
        }
        if let Some(v) = env::parse(env::PROBE_MIN_ROWS)? {
            c.min_rows = v;
        }
        if let Some(v) = env::positive(env::PROBE_ITERS)? {
            c.iters = v;
        }
        if let Some(v) = env::parse(env::PROBE_CAP_MS)? {
            c.cap_ms = v;
        }
        if let Some(v) = env::positive(env::PROBE_TOPK)? {
            c.top_k = v;
        }
        if let Some(v) = env::parse(env::GUARDRAIL)? {
            c.alpha = v;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert_eq!(ProbeConfig::default().validate(), Ok(()));
    }

    #[test]
    fn invariants_are_enforced() {
        let d = ProbeConfig::default();
        for bad in [
            ProbeConfig { frac: 0.0, ..d },
            ProbeConfig { frac: 1.5, ..d },
            ProbeConfig { iters: 0, ..d },
            ProbeConfig { alpha: 1.01, ..d },
            ProbeConfig { alpha: 0.0, ..d },
            ProbeConfig { top_k: 0, ..d },
            ProbeConfig {
                cap_ms: f64::NAN,
                ..d
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(ProbeConfig {
            frac: 1.0,
            alpha: 1.0,
            ..d
        }
        .validate()
        .is_ok());
    }
}
