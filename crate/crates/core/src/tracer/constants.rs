use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `r'` for which the tracer expands the `r'`-fold products of
/// Steps 3 and 4.
pub const MAX_EXPANDED_R: u64 = 1024;

/// Resolved constants of one increment step. Scales are dilate factors
/// relative to the radius of the input Bohr set `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r: u64,
    pub r_prime: u64,
    /// Step 1 descent factor; also `μ ∈ [κλ, 2κλ]`.
    pub kappa: f64,
    /// `ν` is searched in `[ν*/2, ν*]` with `ν* = nu_ratio · μ`.
    pub nu_ratio: f64,
    /// Scale of the smallness condition `|B_{μ₀}| ≥ smallness_factor · α⁻²δ⁻²`.
    pub mu0: f64,
    pub smallness_factor: f64,
    /// The absolute constant `C` of the increment conclusion.
    pub big_c: f64,
    /// Required relative density gain of the final sub-box.
    pub increment: f64,
    /// Most extra frequencies tried by the almost-periodicity search.
    pub ap_max_extra: usize,
    /// Radii `ρ_ν 2^{-k}`, `k < ap_radius_steps`, tried by that search.
    pub ap_radius_steps: usize,
    pub step1_max_iters: usize,
    /// Use a seeded uniformly random `Y'` in Step 5 instead of the greedy one.
    pub y_prime_seed: Option<u64>,
    /// Names of the fields that depart from the defaults.
    pub overrides: BTreeSet<String>,
}

/// Partial constants as read from a JSON file; missing fields take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsOverride {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub r: Option<u64>,
    pub r_prime: Option<u64>,
    pub kappa: Option<f64>,
    pub nu_ratio: Option<f64>,
    pub mu0: Option<f64>,
    pub smallness_factor: Option<f64>,
    pub big_c: Option<f64>,
    pub increment: Option<f64>,
    pub ap_max_extra: Option<usize>,
    pub ap_radius_steps: Option<usize>,
    pub step1_max_iters: Option<usize>,
    pub y_prime_seed: Option<u64>,
    /// Ignored on input; present so a resolved constants file reads back.
    #[serde(default, skip_serializing)]
    pub overrides: Option<BTreeSet<String>>,
}

impl ConstantsOverride {
    /// `c₁ = c₂ = c₃ = ¼`, `r = r' = 2`, generous scales and no smallness
    /// requirement: the setting in which desk-sized planted instances run
    /// through all six steps.
    pub fn friendly() -> Self {
        Self {
            c1: Some(0.25),
            c2: Some(0.25),
            c3: Some(0.25),
            r: Some(2),
            r_prime: Some(2),
            kappa: Some(0.5),
            nu_ratio: Some(1.0),
            mu0: Some(1.0),
            smallness_factor: Some(0.0),
            increment: Some(0.25),
            ..Self::default()
        }
    }
}

fn log2_ceil(v: f64) -> u64 {
    v.log2().ceil().max(0.0) as u64
}

impl IncrementConstants {
    /// Defaults for relative densities `α`, `δ` and rank `d`, with `o` applied.
    pub fn resolve(o: &ConstantsOverride, alpha: f64, delta: f64, d: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0 && delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("α = {alpha} and δ = {delta} must lie in (0, 1]")));
        }
        let dd = d.max(1) as f64;
        let mut overrides = BTreeSet::new();
        let mut mark = |name: &str, set: bool| {
            if set {
                overrides.insert(name.to_string());
            }
        };
        let r = match o.r {
            Some(v) => v,
            None => 2 * log2_ceil(2.0 / delta) + (1 << 30),
        };
        mark("r", o.r.is_some());
        let r_prime = o.r_prime.unwrap_or(64 * r);
        mark("r_prime", o.r_prime.is_some());
        let base = alpha.powi(4) * delta / 32.0;
        let kappa = o.kappa.unwrap_or_else(|| base.powf(64.0 * r as f64) / (2f64.powi(20) * (r as f64).powi(2) * dd));
        mark("kappa", o.kappa.is_some());
        let nu_ratio = o
            .nu_ratio
            .unwrap_or_else(|| (alpha.powi(4) * delta / 8.0).powf(r_prime as f64) / (2f64.powi(40) * (r_prime + 1) as f64 * dd));
        mark("nu_ratio", o.nu_ratio.is_some());
        let big_c = o.big_c.unwrap_or(1.0);
        mark("big_c", o.big_c.is_some());
        let mu0 = o
            .mu0
            .unwrap_or_else(|| (alpha * delta / (2.0 * dd)).powf(big_c * (2.0 / delta).ln().powi(2)));
        mark("mu0", o.mu0.is_some());
        let c = Self {
            c1: o.c1.unwrap_or(2f64.powi(-13)),
            c2: o.c2.unwrap_or(2f64.powi(-14)),
            c3: o.c3.unwrap_or(2f64.powi(-12)),
            r,
            r_prime,
            kappa,
            nu_ratio,
            mu0,
            smallness_factor: o.smallness_factor.unwrap_or(9.0),
            big_c,
            increment: o.increment.unwrap_or(2f64.powi(-13)),
            ap_max_extra: o.ap_max_extra.unwrap_or(2),
            ap_radius_steps: o.ap_radius_steps.unwrap_or(6),
            step1_max_iters: o.step1_max_iters.unwrap_or(64),
            y_prime_seed: o.y_prime_seed,
            overrides: BTreeSet::new(),
        };
        for (name, set) in [
            ("c1", o.c1.is_some()),
            ("c2", o.c2.is_some()),
            ("c3", o.c3.is_some()),
            ("smallness_factor", o.smallness_factor.is_some()),
            ("increment", o.increment.is_some()),
            ("ap_max_extra", o.ap_max_extra.is_some()),
            ("ap_radius_steps", o.ap_radius_steps.is_some()),
            ("step1_max_iters", o.step1_max_iters.is_some()),
            ("y_prime_seed", o.y_prime_seed.is_some()),
        ] {
            mark(name, set);
        }
        let c = Self { overrides, ..c };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        for (name, v) in [("r", self.r), ("r_prime", self.r_prime)] {
            if v == 0 || v % 2 == 1 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be even and positive")));
            }
        }
        if self.r > i32::MAX as u64 {
            return Err(Error::InvalidParameter(format!("r = {} is too large", self.r)));
        }
        for (name, v) in [("kappa", self.kappa), ("nu_ratio", self.nu_ratio), ("mu0", self.mu0)] {
            if !(v >= 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if !(self.smallness_factor >= 0.0 && self.big_c >= 1.0 && self.increment > 0.0) {
            return Err(Error::InvalidParameter(
                "smallness_factor must be ≥ 0, big_c ≥ 1 and increment > 0".into(),
            ));
        }
        Ok(())
    }

    /// True when `C` was left at its placeholder default.
    pub fn default_big_c(&self) -> bool {
        !self.overrides.contains("big_c")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_defaults() {
        let c = IncrementConstants::resolve(&ConstantsOverride::default(), 0.5, 0.25, 2).unwrap();
        assert_eq!(c.c1, 1.0 / 8192.0);
        assert_eq!(c.c2, 1.0 / 16384.0);
        assert_eq!(c.c3, 1.0 / 4096.0);
        // 2⌈log₂ 8⌉ + 2³⁰
        assert_eq!(c.r, 6 + (1 << 30));
        assert_eq!(c.r_prime, 64 * c.r);
        assert_eq!(c.kappa, 0.0);
        assert!(c.overrides.is_empty());
        assert!(c.default_big_c());
    }

    #[test]
    fn overrides_are_recorded_and_checked() {
        let c = IncrementConstants::resolve(&ConstantsOverride::friendly(), 0.5, 0.5, 0).unwrap();
        assert_eq!((c.r, c.r_prime), (2, 2));
        assert!(c.overrides.contains("c1") && c.overrides.contains("kappa"));
        assert!(!c.overrides.contains("big_c"));
        let odd = ConstantsOverride { r: Some(3), ..ConstantsOverride::default() };
        assert!(IncrementConstants::resolve(&odd, 0.5, 0.5, 1).is_err());
        assert!(IncrementConstants::resolve(&ConstantsOverride::default(), 0.0, 0.5, 1).is_err());
    }

    #[test]
    fn resolved_constants_read_back_as_overrides() {
        let c = IncrementConstants::resolve(&ConstantsOverride::friendly(), 0.5, 0.5, 1).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let o: ConstantsOverride = serde_json::from_str(&text).unwrap();
        let again = IncrementConstants::resolve(&o, 0.5, 0.5, 1).unwrap();
        assert_eq!(again.c1, c.c1);
        assert_eq!(again.kappa, c.kappa);
        assert!(serde_json::from_str::<ConstantsOverride>(r#"{"bogus": 1}"#).is_err());
    }
}
