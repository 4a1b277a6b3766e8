//! Instrumented execution of one density-increment step on a concrete
//! `A ⊆ X × B` over `(Z/NZ)²`, and the iteration that repeats it.
//!
//! Each step is a pure function of the previous outputs and returns a
//! [`StepReport`] listing every quantity it measured, every inequality it
//! checked and every translate it selected. "There exists by averaging"
//! is realized as a deterministic argmax (first maximizer in ascending
//! residue order), and each such selection is checked against the average
//! it came from. Verdicts that hold unconditionally are hard; those that
//! depend on the asymptotic hypotheses are soft reports.

mod columns;
mod constants;
mod iterate;
mod step1;
mod steps;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bohr::{certify_regular, BohrDescriptor, BohrSet};
use crate::error::{Error, Result};
use crate::grid::{count_skew_corners, find_skew_corner, PointSet2, SkewCornerWitness};
use crate::lab::InequalityVerdict;
use crate::norms::column_density;

pub use columns::{Columns, MAX_TRACE_MODULUS};
pub use constants::{ConstantsOverride, IncrementConstants, MAX_EXPANDED_R};
pub use iterate::{iterate_theorem, nine_box, IterationLog, IterationRow};
pub use step1::{step1_regularize, Frame};
pub use steps::{Step2, Step4, Step5, Tracer};

/// Measured quantities, verdicts and selected witnesses of one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: String,
    pub measured: BTreeMap<String, f64>,
    pub verdicts: Vec<InequalityVerdict>,
    pub witnesses: BTreeMap<String, Vec<i64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Clamps infinities so every report survives a JSON round trip.
pub(crate) fn fin(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-f64::MAX, f64::MAX)
    }
}

impl StepReport {
    pub fn new(step: impl Into<String>) -> Self {
        Self { step: step.into(), ..Self::default() }
    }

    pub fn measure(&mut self, name: &str, v: f64) {
        if v.is_nan() {
            self.notes.push(format!("{name} is undefined"));
        } else {
            self.measured.insert(name.to_string(), fin(v));
        }
    }

    pub fn witness(&mut self, name: &str, v: Vec<i64>) {
        self.witnesses.insert(name.to_string(), v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn check(&mut self, mut v: InequalityVerdict) {
        v.lhs = fin(v.lhs);
        v.rhs = fin(v.rhs);
        v.slack = fin(v.slack);
        self.verdicts.push(v);
    }

    /// Records that the `selected` maximizer is at least the `average` it
    /// was drawn from.
    pub fn argmax(&mut self, name: &str, selected: f64, average: f64) {
        self.check(InequalityVerdict::at_least(format!("argmax_{name}"), selected, average));
    }

    pub fn verdict(&self, name: &str) -> Option<&InequalityVerdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn hard_failures(&self) -> impl Iterator<Item = &InequalityVerdict> {
        self.verdicts.iter().filter(|v| v.is_hard_failure())
    }
}

/// The sub-box found by a successful step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementWitness {
    /// `B'`.
    pub bohr: BohrDescriptor,
    /// Horizontal translate `t₀` of `B'`.
    pub x_translate: usize,
    /// Vertical translate `w₀` of `B'`.
    pub y_translate: usize,
    /// `X̃'' ⊆ X ∩ (t₀ + B')`.
    pub columns: Vec<usize>,
    /// Relative density of `A` in `X̃'' × (w₀ + B')`.
    pub density: f64,
    /// Relative density of `A` in `X × B` before the step.
    pub alpha: f64,
    pub delta: f64,
    /// Required factor `1 + increment`.
    pub factor: f64,
    /// `C⁻¹ α^C δ |B'|`.
    pub size_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum IncrementOutcome {
    DensityIncrement(IncrementWitness),
    Step1ColumnIncrement { columns: Vec<usize>, density: f64, alpha: f64 },
    SmallnessViolation { bohr_mu0_size: usize, required: f64, mu0: f64 },
    SkewCornerPresent { witness: SkewCornerWitness, count: u64 },
    ChainBreak { step: String, reason: String },
}

impl IncrementOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DensityIncrement(_) => "DensityIncrement",
            Self::Step1ColumnIncrement { .. } => "Step1ColumnIncrement",
            Self::SmallnessViolation { .. } => "SmallnessViolation",
            Self::SkewCornerPresent { .. } => "SkewCornerPresent",
            Self::ChainBreak { .. } => "ChainBreak",
        }
    }

    pub(crate) fn chain_break(step: &str, reason: impl Into<String>) -> Self {
        Self::ChainBreak { step: step.into(), reason: reason.into() }
    }
}

/// Either the bindings handed to the next step, or an early exit.
#[derive(Clone, Debug)]
pub enum Flow<T> {
    Next(T),
    Stop(IncrementOutcome),
}

/// Everything one call of [`run_increment`] produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementTrace {
    pub constants: IncrementConstants,
    pub reports: Vec<StepReport>,
    pub outcome: IncrementOutcome,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl IncrementTrace {
    pub fn hard_failures(&self) -> Vec<&InequalityVerdict> {
        self.reports.iter().flat_map(|r| r.hard_failures()).collect()
    }
}

/// Validates `A ⊆ X × B` with `X ⊆ B`, `B` regular and `A` nonempty, and
/// returns `(α, δ)`.
pub fn check_instance(a: &PointSet2, x: &[usize], b: &BohrSet) -> Result<(f64, f64)> {
    let dens = column_density(a, x, b)?;
    if a.is_empty() {
        return Err(Error::Precondition("A must be nonempty".into()));
    }
    if let Some(v) = x.iter().find(|&&v| !b.contains(v)) {
        return Err(Error::Precondition(format!("X element {v} is outside B")));
    }
    let reg = certify_regular(b);
    if !reg.regular {
        return Err(Error::Precondition(format!(
            "B is not regular{}",
            reg.reason.map(|r| format!(": {r}")).unwrap_or_default()
        )));
    }
    if b.modulus() > MAX_TRACE_MODULUS {
        return Err(Error::TooLarge(format!("N = {} exceeds {MAX_TRACE_MODULUS}", b.modulus())));
    }
    Ok((dens.alpha, dens.delta))
}

/// Runs the smallness check, the skew-corner short circuit and Steps 1–6.
pub fn run_increment(a: &PointSet2, x: &[usize], b: &BohrSet, o: &ConstantsOverride) -> Result<IncrementTrace> {
    let (alpha, delta) = check_instance(a, x, b)?;
    let consts = IncrementConstants::resolve(o, alpha, delta, b.rank())?;
    let mut warnings = Vec::new();
    if consts.default_big_c() {
        warnings.push("C is a placeholder (1); the conclusion's size bound uses it".to_string());
    }
    let mut reports = Vec::new();
    let outcome = increment_chain(a, x, b, &consts, alpha, delta, &mut reports)?;
    Ok(IncrementTrace { constants: consts, reports, outcome, warnings })
}

fn increment_chain(
    a: &PointSet2,
    x: &[usize],
    b: &BohrSet,
    consts: &IncrementConstants,
    alpha: f64,
    delta: f64,
    reports: &mut Vec<StepReport>,
) -> Result<IncrementOutcome> {
    let mut pre = StepReport::new("preconditions");
    pre.measure("alpha", alpha);
    pre.measure("delta", delta);
    pre.measure("rank", b.rank() as f64);
    pre.measure("radius", b.radius());
    if alpha >= 1.0 {
        reports.push(pre);
        return Ok(IncrementOutcome::chain_break("preconditions", "α = 1: A fills X × B, no increment is possible"));
    }
    let b_mu0 = b.dilate(consts.mu0).len();
    let required = consts.smallness_factor / (alpha * alpha * delta * delta);
    pre.measure("mu0", consts.mu0);
    pre.measure("bohr_mu0_size", b_mu0 as f64);
    pre.check(InequalityVerdict::at_least("smallness", b_mu0 as f64, required).soft());
    if (b_mu0 as f64) < required {
        reports.push(pre);
        return Ok(IncrementOutcome::SmallnessViolation { bohr_mu0_size: b_mu0, required: fin(required), mu0: consts.mu0 });
    }
    let corners = count_skew_corners(a);
    pre.measure("skew_corners", corners as f64);
    if corners > 0 {
        let witness = find_skew_corner(a).expect("a positive count has a witness");
        reports.push(pre);
        return Ok(IncrementOutcome::SkewCornerPresent { witness, count: corners });
    }
    reports.push(pre);

    let (r1, flow) = step1_regularize(a, x, b, consts)?;
    reports.push(r1);
    let frame = match flow {
        Flow::Next(f) => f,
        Flow::Stop(o) => return Ok(o),
    };
    let tracer = Tracer::new(&frame, consts)?;
    let (r2, flow) = tracer.step2_imbalance()?;
    reports.extend(r2);
    let s2 = match flow {
        Flow::Next(s) => s,
        Flow::Stop(o) => return Ok(o),
    };
    let (r3, flow) = tracer.step3_unbalance(&s2)?;
    reports.push(r3);
    if let Flow::Stop(o) = flow {
        return Ok(o);
    }
    let (r4, flow) = tracer.step4_sift(&s2)?;
    reports.push(r4);
    let s4 = match flow {
        Flow::Next(s) => s,
        Flow::Stop(o) => return Ok(o),
    };
    let (r5, flow) = tracer.step5_ap(&s2, &s4)?;
    reports.push(r5);
    let s5 = match flow {
        Flow::Next(s) => s,
        Flow::Stop(o) => return Ok(o),
    };
    let (r6, outcome) = tracer.step6_complete(&s2, &s4, &s5)?;
    reports.push(r6);
    Ok(outcome)
}
