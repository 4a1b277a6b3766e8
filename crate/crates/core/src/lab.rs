//! Verifiers for the inequalities relating the norms, plus the
//! almost-periodicity conclusion checker and an exhaustive witness search.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::bohr::{build_bohr, certify_regular, BohrSet};
use crate::error::{Error, Result};
use crate::norms::{
    directional_norm_vertical, grid_inner_product, grid_norm, u2_norm, u2_norm_2d, vs_inner_product,
};
use crate::sum::Accumulator;
use crate::table::FunctionTable2;

/// Relative slack allowed before a verdict counts as a violation.
pub const REL_TOL: f64 = 1e-9;

/// Outcome of one inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs − lhs`.
    pub slack: f64,
    /// Seed and dimensions, or any other identification of the instance.
    pub instance: String,
    /// Soft verdicts are reported but never fail a run.
    pub soft: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InequalityVerdict {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs + REL_TOL * rhs.abs().max(1.0),
            slack: rhs - lhs,
            instance: String::new(),
            soft: false,
            note: None,
        }
    }

    /// `lhs ≥ rhs`, stored with the sides swapped so `holds` keeps its meaning.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let mut v = Self::new(name, bound, value);
        v.note = Some("lower bound: lhs is the bound, rhs the measured value".into());
        v
    }

    pub fn soft(mut self) -> Self {
        self.soft = true;
        self
    }

    pub fn with_instance(mut self, s: impl Into<String>) -> Self {
        self.instance = s.into();
        self
    }

    pub fn with_note(mut self, s: impl Into<String>) -> Self {
        self.note = Some(s.into());
        self
    }

    /// True when this verdict should fail a run.
    pub fn is_hard_failure(&self) -> bool {
        !self.soft && !self.holds
    }
}

/// `|⟨f⃗, g⃗⟩|^r ≤ Πᵢ ⟨fᵢ..fᵢ, gᵢ..gᵢ⟩` for even `r`.
pub fn check_gowers_holder_i(
    fs: &[&FunctionTable2],
    gs: &[&FunctionTable2],
    b: &[usize],
    bp: &[usize],
) -> Result<InequalityVerdict> {
    let r = fs.len();
    if r == 0 || r % 2 == 1 {
        return Err(Error::InvalidParameter(format!("r = {r} must be positive and even")));
    }
    let lhs = vs_inner_product(fs, gs, b, bp)?.abs().powi(r as i32);
    let mut rhs = 1.0;
    for i in 0..r {
        rhs *= vs_inner_product(&vec![fs[i]; r], &vec![gs[i]; r], b, bp)?;
    }
    Ok(InequalityVerdict::new("gowers_holder_i", lhs, rhs)
        .with_instance(format!("r={r} |B|={} |B'|={}", b.len(), bp.len())))
}

/// `|⟨f⃗, g⃗⟩|² ≤ ⟨f⃗, f⃗⟩ ⟨g⃗, g⃗⟩`.
pub fn check_gowers_holder_ii(
    fs: &[&FunctionTable2],
    gs: &[&FunctionTable2],
    b: &[usize],
    bp: &[usize],
) -> Result<InequalityVerdict> {
    let lhs = vs_inner_product(fs, gs, b, bp)?.powi(2);
    let ff = vs_inner_product(fs, fs, b, bp)?;
    let gg = vs_inner_product(gs, gs, b, bp)?;
    Ok(InequalityVerdict::new("gowers_holder_ii", lhs, ff * gg)
        .with_instance(format!("r={} |B|={} |B'|={}", fs.len(), b.len(), bp.len())))
}

/// `|E Π f_{ij}(xᵢ, yⱼ)| ≤ Π ‖f_{ij}‖_{U_{k,ℓ}}`.
pub fn check_grid_gcs(fm: &[Vec<&FunctionTable2>]) -> Result<InequalityVerdict> {
    let k = fm.len();
    let l = fm.first().map_or(0, Vec::len);
    let lhs = grid_inner_product(fm)?.abs();
    let mut rhs = 1.0;
    for t in fm.iter().flatten() {
        rhs *= grid_norm(t, k, l)?.value;
    }
    Ok(InequalityVerdict::new("grid_gcs", lhs, rhs).with_instance(format!(
        "k={k} l={l} shape={}x{}",
        fm[0][0].rows(),
        fm[0][0].cols()
    )))
}

/// Largest `r'` compared in exact rational arithmetic.
pub const EXACT_BINOMIAL_LIMIT: u64 = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialVerdict {
    pub verdict: InequalityVerdict,
    /// `r' ≥ 2r/ε`, the premise under which the inequality is claimed.
    pub premise_met: bool,
    pub exact: bool,
}

/// `(1 + ε/2)^{r'} ≤ Σ_{d even, r ≤ d ≤ r'} C(r', d) ε^d`.
///
/// For `r' ≤ EXACT_BINOMIAL_LIMIT` both sides are compared exactly, with `ε`
/// taken as the exact rational value of its binary representation; beyond that
/// the comparison happens in log space. A failure only counts when the premise
/// `r' ≥ 2r/ε` is met.
pub fn binomial_sum_check(r: u64, r_prime: u64, eps: f64) -> Result<BinomialVerdict> {
    if r == 0 || r_prime < r || !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter("need r' ≥ r ≥ 1 and ε > 0".into()));
    }
    let premise_met = r_prime as f64 >= 2.0 * r as f64 / eps;
    let instance = format!("r={r} r'={r_prime} eps={eps}");
    let (lhs, rhs, holds, exact) = if r_prime <= EXACT_BINOMIAL_LIMIT {
        let e = BigRational::from_float(eps).expect("finite ε");
        let two = BigRational::from_integer(BigInt::from(2));
        let lhs = num_traits::pow(BigRational::one() + &e / two, r_prime as usize);
        let mut rhs = BigRational::zero();
        let mut binom = BigInt::one();
        let mut pow = BigRational::one();
        for d in 0..=r_prime {
            if d > 0 {
                binom = binom * BigInt::from(r_prime - d + 1) / BigInt::from(d);
                pow *= &e;
            }
            if d >= r && d % 2 == 0 {
                rhs += BigRational::from_integer(binom.clone()) * &pow;
            }
        }
        let holds = lhs <= rhs;
        (
            lhs.to_f64().unwrap_or(f64::INFINITY),
            rhs.to_f64().unwrap_or(f64::INFINITY),
            holds,
            true,
        )
    } else {
        let ln_lhs = r_prime as f64 * (eps / 2.0).ln_1p();
        let mut terms = Vec::new();
        let mut ln_binom = 0.0;
        for d in 0..=r_prime {
            if d > 0 {
                ln_binom += ((r_prime - d + 1) as f64).ln() - (d as f64).ln();
            }
            if d >= r && d % 2 == 0 {
                terms.push(ln_binom + d as f64 * eps.ln());
            }
        }
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ln_rhs = m + crate::sum::sum(terms.iter().map(|t| (t - m).exp())).ln();
        (ln_lhs, ln_rhs, ln_lhs <= ln_rhs + 1e-12 * ln_rhs.abs().max(1.0), false)
    };
    let mut verdict = InequalityVerdict::new("binomial_sum", lhs, rhs).with_instance(instance);
    verdict.holds = holds;
    if !exact {
        verdict.note = Some("log-space comparison: lhs and rhs are natural logarithms".into());
    }
    if !premise_met {
        verdict.soft = true;
    }
    Ok(BinomialVerdict { verdict, premise_met, exact })
}

fn check_unit(tables: &[&[f64]]) -> Result<()> {
    if tables.iter().flat_map(|t| t.iter()).any(|v| v.abs() > 1.0 + 1e-12) {
        return Err(Error::Precondition("functions must be bounded by 1".into()));
    }
    Ok(())
}

/// `|E_{x,a} f₁(x) f₂(x+a) f₃(x+2a)| ≤ ‖f₃‖_{U²}` for odd `N`.
pub fn check_u2_control(f1: &[f64], f2: &[f64], f3: &[f64]) -> Result<InequalityVerdict> {
    let n = f1.len();
    if f2.len() != n || f3.len() != n || n == 0 {
        return Err(Error::Shape("tables must share one modulus".into()));
    }
    if n % 2 == 0 {
        return Err(Error::Precondition(format!("N = {n} is even; 2 is not invertible")));
    }
    check_unit(&[f1, f2, f3])?;
    let mut acc = Accumulator::new();
    for x in 0..n {
        for a in 0..n {
            acc.add(f1[x] * f2[(x + a) % n] * f3[(x + 2 * a) % n]);
        }
    }
    let lhs = (acc.value() / (n * n) as f64).abs();
    Ok(InequalityVerdict::new("u2_control", lhs, u2_norm(f3)?.value).with_instance(format!("N={n}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewControlReport {
    /// The skew-corner form `Λ(f₁, f₂, f₃)`.
    pub form: f64,
    pub directional: [f64; 2],
    pub u2_f3: f64,
    pub verdicts: Vec<InequalityVerdict>,
}

/// The two skew-corner control bounds, with every norm taken as the 1/4-root
/// of its raw average. All verdicts are soft.
pub fn check_skew_control(
    f1: &FunctionTable2,
    f2: &FunctionTable2,
    f3: &FunctionTable2,
) -> Result<SkewControlReport> {
    check_unit(&[f1.values(), f2.values(), f3.values()])?;
    let form = crate::grid::skew_form(f1, f2, f3)?;
    let lambda = form.abs();
    let dir = |f: &FunctionTable2| -> Result<f64> {
        Ok(directional_norm_vertical(f)?.root.unwrap_or(0.0))
    };
    let d1 = dir(f1)?;
    let d2 = dir(f2)?;
    let u3 = u2_norm_2d(f3)?.value;
    let inst = format!("N={}", f1.rows());
    let verdicts = vec![
        InequalityVerdict::new("skew_control_f1_u2", lambda, d1 * u3).soft().with_instance(&inst),
        InequalityVerdict::new("skew_control_f2_u2", lambda, d2 * u3).soft().with_instance(&inst),
        InequalityVerdict::new("skew_control_f1_f2", lambda, d1 * d2).soft().with_instance(&inst),
    ];
    Ok(SkewControlReport { form, directional: [d1, d2], u2_f3: u3, verdicts })
}

/// Inputs of the almost-periodicity conclusion: `Y ⊆ B⁽¹⁾`, `Z ⊆ B⁽²⁾`,
/// `D ⊆ Z/NZ` and the tolerance `ε`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApInstance {
    pub b1: BohrSet,
    pub b2: BohrSet,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub d: Vec<usize>,
    pub eps: f64,
}

impl ApInstance {
    pub fn modulus(&self) -> usize {
        self.b1.modulus()
    }

    pub fn beta(&self) -> f64 {
        self.y.len() as f64 / self.b1.len() as f64
    }

    pub fn gamma(&self) -> f64 {
        self.z.len() as f64 / self.b2.len() as f64
    }

    /// `|Y| ≤ |D| ≤ 2|B⁽¹⁾|`.
    pub fn theorem_shaped(&self) -> bool {
        self.y.len() <= self.d.len() && self.d.len() <= 2 * self.b1.len()
    }

    fn validate(&self) -> Result<Vec<bool>> {
        let n = self.modulus();
        if self.b2.modulus() != n {
            return Err(Error::DomainMismatch("B1 and B2 have different moduli".into()));
        }
        if self.y.is_empty() || self.z.is_empty() {
            return Err(Error::Precondition("Y and Z must be nonempty".into()));
        }
        if let Some(v) = self.y.iter().find(|&&v| v >= n || !self.b1.contains(v)) {
            return Err(Error::Precondition(format!("Y element {v} is outside B1")));
        }
        if let Some(v) = self.z.iter().find(|&&v| v >= n || !self.b2.contains(v)) {
            return Err(Error::Precondition(format!("Z element {v} is outside B2")));
        }
        let mut mask = vec![false; n];
        for &v in &self.d {
            if v >= n {
                return Err(Error::DomainMismatch(format!("D element {v} outside Z/{n}Z")));
            }
            mask[v] = true;
        }
        Ok(mask)
    }

    /// `h(u) = #{(y, z) ∈ Y × Z : z − y = u}`.
    fn difference_counts(&self) -> Vec<u64> {
        let n = self.modulus();
        let mut h = vec![0u64; n];
        for &y in &self.y {
            for &z in &self.z {
                h[(z + n - y) % n] += 1;
            }
        }
        h
    }
}

/// Exact `|E_{b∈B'} Σ 1_D(z−y+b) − Σ 1_D(z−y)| / (|B⁽¹⁾||B⁽²⁾|)` against `εβγ`.
pub fn ap_conclusion_check(inst: &ApInstance, b_prime: &[usize]) -> Result<InequalityVerdict> {
    let dmask = inst.validate()?;
    if b_prime.is_empty() {
        return Err(Error::Precondition("B' must be nonempty".into()));
    }
    let n = inst.modulus();
    let h = inst.difference_counts();
    let shifted = |b: usize| -> u64 { (0..n).filter(|&u| dmask[(u + b) % n]).map(|u| h[u]).sum() };
    let base = shifted(0) as f64;
    let mut acc = Accumulator::new();
    for &b in b_prime {
        acc.add(shifted(b % n) as f64);
    }
    let norm = (inst.b1.len() * inst.b2.len()) as f64;
    let lhs = (acc.value() / b_prime.len() as f64 - base).abs() / norm;
    let rhs = inst.eps * inst.beta() * inst.gamma();
    Ok(InequalityVerdict::new("ap_conclusion", lhs, rhs)
        .with_instance(format!("N={n} |Y|={} |Z|={} |D|={} |B'|={}", inst.y.len(), inst.z.len(), inst.d.len(), b_prime.len())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApHit {
    pub bohr: BohrSet,
    /// Frequencies added to those of `B⁽²⁾`.
    pub extra: Vec<usize>,
    pub verdict: InequalityVerdict,
    pub candidates_scanned: usize,
}

/// Scans `B' = Bohr(Γ(B⁽²⁾) ∪ E, ρ')` over extra frequency sets `E` with
/// `|E| ≤ max_extra` (by size, then lexicographically) and radii from
/// `radius_grid` (largest first), keeping regular candidates with
/// `B' ⊆ B⁽²⁾`, and returns the first one passing [`ap_conclusion_check`].
pub fn ap_search(inst: &ApInstance, max_extra: usize, radius_grid: &[f64]) -> Result<Option<ApHit>> {
    inst.validate()?;
    let n = inst.modulus();
    let base = inst.b2.frequencies().clone();
    let pool: Vec<usize> = (1..n).filter(|r| !base.freqs().contains(r)).collect();
    let mut radii: Vec<f64> = radius_grid.iter().copied().filter(|r| *r > 0.0).collect();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    let mut scanned = 0;
    for size in 0..=max_extra.min(pool.len()) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let extra: Vec<usize> = combo.iter().map(|&i| pool[i]).collect();
            let freqs = base.union(&extra);
            for &radius in &radii {
                scanned += 1;
                let cand = build_bohr(n, freqs.freqs().iter().map(|&r| r as i64), radius)?;
                if !cand.elements().iter().all(|&v| inst.b2.contains(v)) {
                    continue;
                }
                if !certify_regular(&cand).regular {
                    continue;
                }
                let verdict = ap_conclusion_check(inst, cand.elements())?;
                if verdict.holds {
                    return Ok(Some(ApHit { bohr: cand, extra, verdict, candidates_scanned: scanned }));
                }
            }
            if !next_combination(&mut combo, pool.len()) {
                break;
            }
        }
    }
    Ok(None)
}

/// Advances `c` to the next `|c|`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomial_examples() {
        let v = binomial_sum_check(2, 4, 1.0).unwrap();
        assert_eq!(v.verdict.rhs, 7.0);
        assert_eq!(v.verdict.lhs, 5.0625);
        assert!(v.verdict.holds && v.premise_met && v.exact);
        let v = binomial_sum_check(2, 8, 0.5).unwrap();
        let rhs = 28.0 / 4.0 + 70.0 / 16.0 + 28.0 / 64.0 + 1.0 / 256.0;
        assert!((v.verdict.rhs - rhs).abs() < 1e-12);
        assert!((v.verdict.lhs - 1.25f64.powi(8)).abs() < 1e-12);
        assert!(v.verdict.holds);
        let big = binomial_sum_check(4, 5000, 0.01).unwrap();
        assert!(!big.exact && big.verdict.holds);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut e: Vec<usize> = vec![];
        assert!(!next_combination(&mut e, 4));
    }

    #[test]
    fn holder_equality_and_zero() {
        let f = FunctionTable2::torus(5, |x, y| ((x * 2 + y) % 3) as f64 - 1.0).unwrap();
        let z = FunctionTable2::constant(5, 5, 0.0).unwrap();
        let b = [0, 1, 4];
        let bp = [0, 2];
        let v = check_gowers_holder_i(&[&f, &f], &[&f, &f], &b, &bp).unwrap();
        assert!((v.lhs - v.rhs).abs() < 1e-12);
        let v = check_gowers_holder_i(&[&f, &f], &[&f, &z], &b, &bp).unwrap();
        assert_eq!(v.lhs, 0.0);
        assert!(check_gowers_holder_i(&[&f], &[&f], &b, &bp).is_err());
        let v = check_gowers_holder_ii(&[&f, &f, &f], &[&z, &z, &z], &b, &bp).unwrap();
        assert!(v.holds && v.lhs == 0.0);
    }

    #[test]
    fn u2_control_cases() {
        let one = vec![1.0; 9];
        let zero = vec![0.0; 9];
        let v = check_u2_control(&one, &one, &one).unwrap();
        assert!((v.lhs - 1.0).abs() < 1e-12 && v.holds);
        assert_eq!(check_u2_control(&one, &one, &zero).unwrap().lhs, 0.0);
        assert!(check_u2_control(&[1.0; 8], &[1.0; 8], &[1.0; 8]).is_err());
    }

    #[test]
    fn skew_control_constant() {
        let one = FunctionTable2::constant(4, 4, 1.0).unwrap();
        let rep = check_skew_control(&one, &one, &one).unwrap();
        assert!((rep.form - 1.0).abs() < 1e-12);
        assert!(rep.verdicts.iter().all(|v| v.soft && (v.rhs - 1.0).abs() < 1e-12));
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> ApInstance {
        let b1 = build_bohr(n, [1], 1.2).unwrap();
        let b2 = build_bohr(n, [1], 0.9).unwrap();
        let pick = |rng: &mut ChaCha8Rng, s: &[usize]| -> Vec<usize> {
            let v: Vec<usize> = s.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
            if v.is_empty() { vec![s[0]] } else { v }
        };
        let y = pick(rng, b1.elements());
        let z = pick(rng, b2.elements());
        let d = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        ApInstance { b1, b2, y, z, d, eps: 0.5 }
    }

    #[test]
    fn ap_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(&mut rng, 32);
        assert_eq!(ap_conclusion_check(&inst, &[0]).unwrap().lhs, 0.0);
        let full = ApInstance { d: (0..32).collect(), ..inst.clone() };
        assert_eq!(ap_conclusion_check(&full, inst.b2.elements()).unwrap().lhs, 0.0);
        let hit = ap_search(&full, 1, &[0.9, 0.5]).unwrap().unwrap();
        assert!(hit.extra.is_empty());
        if let Some(hit) = ap_search(&inst, 1, &[0.8, 0.4, 0.2, 0.1]).unwrap() {
            assert!(ap_conclusion_check(&inst, hit.bohr.elements()).unwrap().holds);
            assert!(hit.bohr.elements().iter().all(|&v| inst.b2.contains(v)));
        }
    }
}
