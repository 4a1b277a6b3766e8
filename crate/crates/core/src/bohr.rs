//! Bohr sets in `Z/NZ`.
//!
//! Membership is decided through the critical value
//! `t(x) = max_{r∈Γ} |e(rx/N) − 1| = max_{r∈Γ} 2|sin(π (rx mod N)/N)|`,
//! cached per residue so that every dilate shares one table.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::Accumulator;

/// Comparison guard band for `t(x) ≤ ρ`; ties resolve to membership.
pub const GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySet {
    modulus: usize,
    freqs: Vec<usize>,
}

impl FrequencySet {
    /// Frequencies are reduced mod `N`, sorted and deduplicated.
    pub fn new(modulus: usize, freqs: impl IntoIterator<Item = i64>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidParameter("modulus must be positive".into()));
        }
        let mut f: Vec<usize> =
            freqs.into_iter().map(|r| r.rem_euclid(modulus as i64) as usize).collect();
        f.sort_unstable();
        f.dedup();
        Ok(Self { modulus, freqs: f })
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn freqs(&self) -> &[usize] {
        &self.freqs
    }

    pub fn rank(&self) -> usize {
        self.freqs.len()
    }

    pub fn union(&self, other: &[usize]) -> Self {
        let mut f = self.freqs.clone();
        f.extend_from_slice(other);
        f.sort_unstable();
        f.dedup();
        Self { modulus: self.modulus, freqs: f }
    }

    pub fn critical_value(&self, x: usize) -> f64 {
        let n = self.modulus as u128;
        self.freqs
            .iter()
            .map(|&r| {
                let k = (r as u128 * x as u128) % n;
                2.0 * (std::f64::consts::PI * k as f64 / n as f64).sin().abs()
            })
            .fold(0.0, f64::max)
    }
}

/// JSON form `{"N": N, "freqs": [...], "radius": ρ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrDescriptor {
    #[serde(rename = "N")]
    pub n: usize,
    pub freqs: Vec<i64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BohrDescriptor", into = "BohrDescriptor")]
pub struct BohrSet {
    freq: FrequencySet,
    radius: f64,
    elements: Vec<usize>,
    critical: Arc<Vec<f64>>,
}

impl PartialEq for BohrSet {
    fn eq(&self, o: &Self) -> bool {
        self.freq == o.freq && self.radius == o.radius
    }
}

impl TryFrom<BohrDescriptor> for BohrSet {
    type Error = Error;

    fn try_from(d: BohrDescriptor) -> Result<Self> {
        build_bohr(d.n, d.freqs, d.radius)
    }
}

impl From<BohrSet> for BohrDescriptor {
    fn from(b: BohrSet) -> Self {
        b.descriptor()
    }
}

pub fn build_bohr(n: usize, freqs: impl IntoIterator<Item = i64>, radius: f64) -> Result<BohrSet> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be finite and >= 0, got {radius}")));
    }
    let freq = FrequencySet::new(n, freqs)?;
    let critical: Vec<f64> = (0..n).map(|x| freq.critical_value(x)).collect();
    Ok(BohrSet::with_table(freq, radius, Arc::new(critical)))
}

impl BohrSet {
    fn with_table(freq: FrequencySet, radius: f64, critical: Arc<Vec<f64>>) -> Self {
        let elements = (0..freq.modulus).filter(|&x| critical[x] <= radius + GUARD).collect();
        Self { freq, radius, elements, critical }
    }

    pub fn from_frequencies(freq: FrequencySet, radius: f64) -> Result<Self> {
        build_bohr(freq.modulus, freq.freqs.iter().map(|&r| r as i64), radius)
    }

    pub fn full(n: usize) -> Result<Self> {
        build_bohr(n, [], 1.0)
    }

    pub fn descriptor(&self) -> BohrDescriptor {
        BohrDescriptor {
            n: self.freq.modulus,
            freqs: self.freq.freqs.iter().map(|&r| r as i64).collect(),
            radius: self.radius,
        }
    }

    pub fn modulus(&self) -> usize {
        self.freq.modulus
    }

    pub fn frequencies(&self) -> &FrequencySet {
        &self.freq
    }

    pub fn rank(&self) -> usize {
        self.freq.rank()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn critical_values(&self) -> &[f64] {
        &self.critical
    }

    pub fn contains(&self, x: usize) -> bool {
        self.critical[x % self.freq.modulus] <= self.radius + GUARD
    }

    pub fn contains_i(&self, x: i64) -> bool {
        self.contains(x.rem_euclid(self.freq.modulus as i64) as usize)
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.modulus()];
        for &x in &self.elements {
            m[x] = true;
        }
        m
    }

    /// The Bohr set on the same frequencies with radius `δρ`.
    pub fn dilate(&self, delta: f64) -> BohrSet {
        assert!(delta >= 0.0 && delta.is_finite(), "dilate factor must be finite and >= 0");
        Self::with_table(self.freq.clone(), delta * self.radius, Arc::clone(&self.critical))
    }

    /// Bohr set with the given radius on the same frequencies.
    pub fn with_radius(&self, radius: f64) -> BohrSet {
        Self::with_table(self.freq.clone(), radius, Arc::clone(&self.critical))
    }

    /// `(ρ/2π)^d N`.
    pub fn size_lower_bound(&self) -> f64 {
        (self.radius / (2.0 * std::f64::consts::PI)).powi(self.rank() as i32) * self.modulus() as f64
    }

    /// Number of residues with `t(x) ≤ R` (with the guard band).
    pub fn count_at_radius(&self, radius: f64) -> usize {
        self.critical.iter().filter(|&&t| t <= radius + GUARD).count()
    }

    /// Mean of `f` over the elements.
    pub fn average(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut acc = Accumulator::new();
        for &x in &self.elements {
            acc.add(f(x));
        }
        acc.value() / self.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Breakpoint with the smallest slack (0 when none were checked).
    pub worst_delta: f64,
    /// `|B_{1+δ}|/|B|` (one-sided limit) at the worst breakpoint.
    pub worst_ratio: f64,
    /// Smallest `bound − ratio` margin, normalized by `|B|`; negative on failure.
    pub worst_slack: f64,
    pub breakpoints_checked: usize,
    pub reason: Option<String>,
}

/// Exact regularity certificate.
///
/// `δ ↦ |B_{1+δ}|` is a right-continuous step function jumping where
/// `(1+δ)ρ + GUARD` crosses a critical value. Checking the upper bound at each
/// jump for `δ > 0` and the lower bound at each left limit for `δ ≤ 0` decides
/// the condition on the whole window `|δ| ≤ 1/(12d)`.
pub fn certify_regular(b: &BohrSet) -> RegularityReport {
    let d = b.rank();
    if d == 0 {
        return RegularityReport {
            regular: true,
            worst_delta: 0.0,
            worst_ratio: 1.0,
            worst_slack: 0.0,
            breakpoints_checked: 0,
            reason: Some("rank 0: the full group is regular by convention".into()),
        };
    }
    let rho = b.radius();
    if rho <= 0.0 {
        return RegularityReport {
            regular: false,
            worst_delta: 0.0,
            worst_ratio: f64::NAN,
            worst_slack: f64::NEG_INFINITY,
            breakpoints_checked: 0,
            reason: Some("radius 0 with positive rank: dilate growth is undefined".into()),
        };
    }
    let size = b.len() as f64;
    let window = 1.0 / (12.0 * d as f64);
    let dd = 12.0 * d as f64;
    let mut ts: Vec<f64> = b.critical_values().to_vec();
    ts.sort_by(f64::total_cmp);

    let mut worst = (f64::INFINITY, 0.0, 1.0);
    let mut checked = 0;
    let mut i = 0;
    while i < ts.len() {
        let v = ts[i];
        let mut j = i;
        while j < ts.len() && ts[j] == v {
            j += 1;
        }
        // Count strictly below v is i, count up to v is j.
        let delta = (v - GUARD) / rho - 1.0;
        if delta.abs() <= window {
            checked += 1;
            let bound = (1.0 + dd * delta) * size;
            let (count, slack) = if delta > 0.0 {
                (j as f64, (bound - j as f64) / size)
            } else {
                (i as f64, (i as f64 - bound) / size)
            };
            if slack < worst.0 {
                worst = (slack, delta, count / size);
            }
        }
        i = j;
    }
    let slack = if checked == 0 { 0.0 } else { worst.0 };
    RegularityReport {
        regular: slack >= -1e-12,
        worst_delta: worst.1,
        worst_ratio: worst.2,
        worst_slack: slack,
        breakpoints_checked: checked,
        reason: None,
    }
}

/// A `δ ∈ [1/2, 1]` for which `B_δ` is regular.
///
/// Candidate radii are the midpoints between consecutive critical values in
/// `[ρ/2, ρ]` (largest first), followed by the critical values and endpoints.
pub fn find_regular_dilate(b: &BohrSet) -> Result<f64> {
    if b.rank() == 0 {
        return Ok(1.0);
    }
    let rho = b.radius();
    let lo = rho / 2.0;
    let mut levels: Vec<f64> = b
        .critical_values()
        .iter()
        .copied()
        .filter(|&t| t > lo && t < rho)
        .collect();
    levels.push(lo);
    levels.push(rho);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut candidates: Vec<f64> = levels.windows(2).map(|w| (w[0] + w[1]) / 2.0).rev().collect();
    candidates.extend(levels.iter().rev());
    let mut scanned = Vec::new();
    for radius in candidates {
        if rho <= 0.0 {
            break;
        }
        let delta = (radius / rho).clamp(0.5, 1.0);
        scanned.push(delta);
        if certify_regular(&b.dilate(delta)).regular {
            return Ok(delta);
        }
    }
    Err(Error::NoRegularDilate { candidates: scanned })
}

/// Largest regular radius in `[lo, hi]` on the frequencies of `b`, scanning
/// interval midpoints and critical values downward.
pub fn largest_regular_radius(b: &BohrSet, lo: f64, hi: f64) -> Option<f64> {
    if b.rank() == 0 {
        return (hi > 0.0 && hi >= lo).then_some(hi);
    }
    if !(hi > 0.0) || lo > hi {
        return None;
    }
    let mut levels: Vec<f64> = b
        .critical_values()
        .iter()
        .copied()
        .filter(|&t| t > lo && t < hi)
        .collect();
    levels.push(lo.max(0.0));
    levels.push(hi);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut cands: Vec<f64> = Vec::with_capacity(2 * levels.len());
    for w in levels.windows(2).rev() {
        cands.push(w[1]);
        cands.push((w[0] + w[1]) / 2.0);
    }
    cands.push(levels[0]);
    cands.into_iter().filter(|&r| r > 0.0).find(|&r| certify_regular(&b.with_radius(r)).regular)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub containment: bool,
    /// `(u, v)` with `u ∈ B_δ`, `v ∈ B_δ'` and `u + v ∉ B_{δ+δ'}`.
    pub counterexample: Option<(usize, usize)>,
    pub size: usize,
    pub size_bound: f64,
    pub size_ok: bool,
    pub doubled_size: usize,
    pub doubling_bound: f64,
    pub doubling_ok: bool,
}

impl StructureReport {
    pub fn all_ok(&self) -> bool {
        self.containment && self.size_ok && self.doubling_ok
    }
}

/// Sumset containment `B_δ + B_δ' ⊆ B_{δ+δ'}`, the size estimate and the
/// doubling estimate `|B_2| ≤ 6^d |B|`.
pub fn check_structure(b: &BohrSet, delta: f64, delta_p: f64) -> Result<StructureReport> {
    if !(delta >= 0.0 && delta_p >= 0.0) {
        return Err(Error::InvalidParameter("dilate factors must be >= 0".into()));
    }
    let n = b.modulus();
    let (u, v, w) = (b.dilate(delta), b.dilate(delta_p), b.dilate(delta + delta_p));
    let mut counterexample = None;
    'outer: for &p in u.elements() {
        for &q in v.elements() {
            if !w.contains((p + q) % n) {
                counterexample = Some((p, q));
                break 'outer;
            }
        }
    }
    let doubled = b.dilate(2.0).len();
    let doubling_bound = 6f64.powi(b.rank() as i32) * b.len() as f64;
    let size_bound = b.size_lower_bound();
    Ok(StructureReport {
        containment: counterexample.is_none(),
        counterexample,
        size: b.len(),
        size_bound,
        size_ok: b.radius() > 2.0 || b.len() as f64 >= size_bound,
        doubled_size: doubled,
        doubling_bound,
        doubling_ok: doubled as f64 <= doubling_bound,
    })
}

/// Inputs of the change-of-variables bound: `x_i ∈ B^{(i)}`, dummies
/// `y_j ∈ Y_j ⊆ ∩_i B^{(i)}_scale`, free `z_l ∈ Z_l`, and the shift matrix ν.
#[derive(Clone, Copy, Debug)]
pub struct ChangeOfVariables<'a> {
    pub bohrs: &'a [BohrSet],
    pub dummies: &'a [Vec<usize>],
    pub free: &'a [Vec<usize>],
    pub nu: &'a [Vec<i64>],
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|E F(x, y, z) − E F(x + νy, y, z)|` against `50 · scale · k ℓ d ‖ν‖_∞`.
///
/// `f` receives the `x`, `y` and `z` tuples as residues and must satisfy
/// `|F| ≤ 1`.
pub fn change_of_vars_gap(
    inst: ChangeOfVariables<'_>,
    f: impl Fn(&[usize], &[usize], &[usize]) -> f64,
) -> Result<GapReport> {
    let k = inst.bohrs.len();
    let l = inst.dummies.len();
    if k == 0 {
        return Err(Error::Precondition("at least one Bohr set is required".into()));
    }
    let n = inst.bohrs[0].modulus();
    if inst.bohrs.iter().any(|b| b.modulus() != n) {
        return Err(Error::DomainMismatch("Bohr sets have different moduli".into()));
    }
    if inst.nu.len() != k || inst.nu.iter().any(|row| row.len() != l) {
        return Err(Error::Shape(format!("ν must be {k}x{l}")));
    }
    if !(inst.scale >= 0.0) {
        return Err(Error::InvalidParameter("scale must be >= 0".into()));
    }
    for (i, b) in inst.bohrs.iter().enumerate() {
        if !certify_regular(b).regular {
            return Err(Error::Precondition(format!("Bohr set {i} is not regular")));
        }
        let narrow = b.dilate(inst.scale);
        for (j, y) in inst.dummies.iter().enumerate() {
            if let Some(v) = y.iter().find(|&&v| !narrow.contains(v)) {
                return Err(Error::Precondition(format!(
                    "dummy set {j} element {v} is outside dilate {} of Bohr set {i}",
                    inst.scale
                )));
            }
        }
    }
    let ranges: Vec<&[usize]> = inst
        .bohrs
        .iter()
        .map(BohrSet::elements)
        .chain(inst.dummies.iter().map(Vec::as_slice))
        .chain(inst.free.iter().map(Vec::as_slice))
        .collect();
    if ranges.iter().any(|r| r.is_empty()) {
        return Err(Error::Precondition("all variable ranges must be nonempty".into()));
    }
    let m = inst.free.len();
    let mut idx = vec![0usize; k + l + m];
    let mut plain = Accumulator::new();
    let mut moved = Accumulator::new();
    let mut count = 0usize;
    let mut cur = vec![0usize; k + l + m];
    let mut shifted = vec![0usize; k];
    loop {
        for (c, (&i, r)) in cur.iter_mut().zip(idx.iter().zip(&ranges)) {
            *c = r[i];
        }
        let (xs, rest) = cur.split_at(k);
        let (ys, zs) = rest.split_at(l);
        for (i, s) in shifted.iter_mut().enumerate() {
            let off: i64 = (0..l).map(|j| inst.nu[i][j] * ys[j] as i64).sum();
            *s = (xs[i] as i64 + off).rem_euclid(n as i64) as usize;
        }
        let a = f(xs, ys, zs);
        let b = f(&shifted, ys, zs);
        if a.abs() > 1.0 + 1e-12 || b.abs() > 1.0 + 1e-12 {
            return Err(Error::Precondition("|F| must be at most 1".into()));
        }
        plain.add(a);
        moved.add(b);
        count += 1;
        // Odometer over all index tuples.
        let mut p = idx.len();
        loop {
            if p == 0 {
                let gap = (plain.value() - moved.value()).abs() / count as f64;
                let d = inst.bohrs.iter().map(BohrSet::rank).max().unwrap_or(0);
                let nu_max = inst.nu.iter().flatten().map(|v| v.unsigned_abs()).max().unwrap_or(0);
                let bound = 50.0 * inst.scale * (k * l * d) as f64 * nu_max as f64;
                return Ok(GapReport { gap, bound, holds: gap <= bound + 1e-12 });
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < ranges[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslateHit {
    pub t: usize,
    pub average: f64,
    pub baseline: f64,
    pub scanned: usize,
}

/// Finds `t ∈ B_{1−λ}` with `t + S ⊆ B` and `avg_{t+S} f ≥ avg_B f − ε`.
pub fn translate_average(
    f: impl Fn(usize) -> f64,
    b: &BohrSet,
    s: &[usize],
    lambda: f64,
    eps: f64,
) -> Result<TranslateHit> {
    let n = b.modulus();
    if s.is_empty() {
        return Err(Error::Precondition("S must be nonempty".into()));
    }
    if !(lambda > 0.0 && eps > 0.0) {
        return Err(Error::Precondition("λ and ε must be positive".into()));
    }
    let d = b.rank();
    if d > 0 && lambda > eps / (200.0 * d as f64) {
        return Err(Error::Precondition(format!("λ = {lambda} exceeds ε/(200d)")));
    }
    let narrow = b.dilate(lambda);
    if let Some(v) = s.iter().find(|&&v| !narrow.contains(v)) {
        return Err(Error::Precondition(format!("S element {v} is outside B_λ")));
    }
    for &x in b.elements() {
        let v = f(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Precondition(format!("f({x}) = {v} is outside [0, 1]")));
        }
    }
    let baseline = b.average(&f);
    let inner = if lambda <= 1.0 { b.dilate(1.0 - lambda) } else { b.dilate(0.0) };
    let mut scanned = 0;
    for &t in inner.elements() {
        scanned += 1;
        if !s.iter().all(|&v| b.contains((t + v) % n)) {
            continue;
        }
        let avg = crate::sum::mean(s.iter().map(|&v| f((t + v) % n)));
        if avg >= baseline - eps {
            return Ok(TranslateHit { t, average: avg, baseline, scanned });
        }
    }
    Err(Error::TranslateExhausted { scanned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_examples() {
        let full = build_bohr(12, [], 0.3).unwrap();
        assert_eq!(full.len(), 12);
        let b = build_bohr(12, [1], 0.6).unwrap();
        assert_eq!(b.elements(), &[0, 1, 11]);
        assert!(b.len() as f64 >= b.size_lower_bound());
        assert!((b.size_lower_bound() - 0.6 / (2.0 * std::f64::consts::PI) * 12.0).abs() < 1e-12);
        assert_eq!(b.dilate(2.0).elements(), &[0, 1, 2, 10, 11]);
        assert_eq!(b.dilate(1.0).elements(), b.elements());
        assert_eq!(b.dilate(0.0).elements(), &[0]);
    }

    fn brute_ratio(b: &BohrSet, delta: f64) -> f64 {
        b.count_at_radius((1.0 + delta) * b.radius()) as f64 / b.len() as f64
    }

    #[test]
    fn certificate_agrees_with_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..80 {
            let n = rng.gen_range(8..160);
            let d = rng.gen_range(1..=3);
            let freqs: Vec<i64> = (0..d).map(|_| rng.gen_range(1..n as i64)).collect();
            let b = build_bohr(n, freqs, rng.gen_range(0.05..1.5)).unwrap();
            let rep = certify_regular(&b);
            let w = 1.0 / (12.0 * b.rank() as f64);
            let dd = 12.0 * b.rank() as f64;
            let mut violated = false;
            for _ in 0..1000 {
                let delta: f64 = rng.gen_range(-w..=w);
                let r = brute_ratio(&b, delta);
                if r > 1.0 + dd * delta.abs() + 1e-12 || r < 1.0 - dd * delta.abs() - 1e-12 {
                    violated = true;
                }
            }
            if rep.regular {
                assert!(!violated, "certificate says regular but sampling found a violation");
            }
        }
    }

    #[test]
    fn find_regular_dilate_is_recertified() {
        let b = build_bohr(128, [1, 5], 0.9).unwrap();
        let delta = find_regular_dilate(&b).unwrap();
        assert!((0.5..=1.0).contains(&delta));
        assert!(certify_regular(&b.dilate(delta)).regular);
        assert!(!certify_regular(&build_bohr(12, [1], 0.0).unwrap()).regular);
        assert!(certify_regular(&build_bohr(12, [], 0.5).unwrap()).regular);
    }

    #[test]
    fn structure_examples() {
        let b = build_bohr(60, [1], 0.5).unwrap();
        assert!(check_structure(&b, 0.5, 0.5).unwrap().containment);
        assert!(check_structure(&b, 0.0, 0.0).unwrap().containment);
        let b = build_bohr(60, [7], 0.4).unwrap();
        assert!(check_structure(&b, 1.0, 1.0).unwrap().doubling_ok);
    }

    #[test]
    fn change_of_variables_trivial_cases() {
        let b = build_bohr(64, [1], 1.0).unwrap();
        let b = b.dilate(find_regular_dilate(&b).unwrap());
        let y = b.dilate(0.1).elements().to_vec();
        let bohrs = [b.clone()];
        let dummies = [y];
        let zero = [vec![0i64]];
        let one = [vec![1i64]];
        let inst = ChangeOfVariables { bohrs: &bohrs, dummies: &dummies, free: &[], nu: &zero, scale: 0.1 };
        let rep = change_of_vars_gap(inst, |x, _, _| ((x[0] * 7) % 5) as f64 / 5.0).unwrap();
        assert_eq!(rep.gap, 0.0);
        let inst = ChangeOfVariables { nu: &one, ..inst };
        let rep = change_of_vars_gap(inst, |_, _, _| 0.5).unwrap();
        assert!(rep.gap.abs() < 1e-15);
        let rep = change_of_vars_gap(inst, |x, y, _| if (x[0] + y[0]) % 3 == 0 { 1.0 } else { -1.0 }).unwrap();
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn translate_average_examples() {
        let b = build_bohr(128, [3], 1.8).unwrap();
        let b = b.dilate(find_regular_dilate(&b).unwrap());
        let hit = translate_average(|_| 0.25, &b, &[0], 0.004, 1.0).unwrap();
        assert_eq!(hit.t, b.dilate(1.0 - 0.004).elements()[0]);
        let f = |x: usize| ((x * 37) % 11) as f64 / 10.0;
        let hit = translate_average(f, &b, &[0], 0.004, 1.0).unwrap();
        assert!(f(hit.t) >= hit.baseline - 1.0);
        assert!(translate_average(f, &b, &[0], 0.5, 0.1).is_err());
    }
}
