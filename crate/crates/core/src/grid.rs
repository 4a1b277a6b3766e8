//! Point sets on `[n]×[n]` or `(Z/NZ)^2`, skew-corner detection, and the
//! reduction from six-point configurations in `[n]` to skew corners.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::Accumulator;
use crate::table::FunctionTable2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// `[n] = {1, …, n}`, no wraparound.
    Grid,
    /// `Z/NZ` with residues `0..N`.
    Cyclic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub size: u64,
}

impl Domain {
    pub fn grid(n: u64) -> Self {
        Self { kind: DomainKind::Grid, size: n }
    }

    pub fn cyclic(n: u64) -> Self {
        Self { kind: DomainKind::Cyclic, size: n }
    }

    pub fn contains(&self, c: i64) -> bool {
        let n = self.size as i64;
        match self.kind {
            DomainKind::Grid => (1..=n).contains(&c),
            DomainKind::Cyclic => (0..n).contains(&c),
        }
    }

    /// `c + a` in the domain: `None` when a grid coordinate leaves `[n]`.
    #[inline]
    pub fn shift(&self, c: i64, a: i64) -> Option<i64> {
        match self.kind {
            DomainKind::Grid => Some(c + a).filter(|v| self.contains(*v)),
            DomainKind::Cyclic => Some((c + a).rem_euclid(self.size as i64)),
        }
    }

    /// All nonzero offsets in increasing order (residues `1..N` on the torus).
    pub fn offsets(&self) -> Vec<i64> {
        let n = self.size as i64;
        match self.kind {
            DomainKind::Grid => (1 - n..n).filter(|&a| a != 0).collect(),
            DomainKind::Cyclic => (1..n).collect(),
        }
    }

    /// Reflection `y ↦ n + 1 − y` on the grid, `y ↦ −y` on the torus.
    pub fn reflect(&self, c: i64) -> i64 {
        let n = self.size as i64;
        match self.kind {
            DomainKind::Grid => n + 1 - c,
            DomainKind::Cyclic => (-c).rem_euclid(n),
        }
    }

    fn describe(&self) -> String {
        match self.kind {
            DomainKind::Grid => format!("grid [{}]", self.size),
            DomainKind::Cyclic => format!("cyclic Z/{}Z", self.size),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct Point2 {
    pub x: i64,
    pub y: i64,
}

impl From<[i64; 2]> for Point2 {
    fn from([x, y]: [i64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [i64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// A finite set of points with a column index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PointSetRepr", into = "PointSetRepr")]
pub struct PointSet2 {
    domain: Domain,
    points: BTreeSet<Point2>,
    columns: BTreeMap<i64, BTreeSet<i64>>,
}

#[derive(Serialize, Deserialize)]
struct PointSetRepr {
    domain: Domain,
    points: Vec<Point2>,
}

impl TryFrom<PointSetRepr> for PointSet2 {
    type Error = Error;

    fn try_from(r: PointSetRepr) -> Result<Self> {
        PointSet2::new(r.domain, r.points)
    }
}

impl From<PointSet2> for PointSetRepr {
    fn from(s: PointSet2) -> Self {
        PointSetRepr { domain: s.domain, points: s.points.into_iter().collect() }
    }
}

impl PointSet2 {
    /// Builds a set, rejecting invalid coordinates; duplicates collapse.
    pub fn new(domain: Domain, points: impl IntoIterator<Item = Point2>) -> Result<Self> {
        if domain.size == 0 {
            return Err(Error::InvalidParameter("domain size must be positive".into()));
        }
        let mut set = BTreeSet::new();
        let mut columns: BTreeMap<i64, BTreeSet<i64>> = BTreeMap::new();
        for p in points {
            if !domain.contains(p.x) || !domain.contains(p.y) {
                return Err(Error::PointOutOfDomain { x: p.x, y: p.y, domain: domain.describe() });
            }
            if set.insert(p) {
                columns.entry(p.x).or_default().insert(p.y);
            }
        }
        Ok(Self { domain, points: set, columns })
    }

    pub fn from_pairs(domain: Domain, pts: &[(i64, i64)]) -> Result<Self> {
        Self::new(domain, pts.iter().map(|&(x, y)| Point2 { x, y }))
    }

    pub fn empty(domain: Domain) -> Self {
        Self { domain, points: BTreeSet::new(), columns: BTreeMap::new() }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.columns.get(&x).is_some_and(|c| c.contains(&y))
    }

    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.points.iter().copied()
    }

    /// Nonempty columns in increasing order with their sorted y-values.
    pub fn columns(&self) -> impl Iterator<Item = (i64, &BTreeSet<i64>)> + '_ {
        self.columns.iter().map(|(x, c)| (*x, c))
    }

    pub fn column(&self, x: i64) -> Option<&BTreeSet<i64>> {
        self.columns.get(&x)
    }

    pub fn column_count(&self, x: i64) -> usize {
        self.columns.get(&x).map_or(0, BTreeSet::len)
    }

    /// Image under the y-reflection of the domain.
    pub fn reflect_y(&self) -> Self {
        let d = self.domain;
        let pts = self.points.iter().map(|p| Point2 { x: p.x, y: d.reflect(p.y) });
        Self::new(d, pts).expect("reflection preserves the domain")
    }

    /// Dense membership bitmap on the torus, indexed `x * N + y`.
    pub fn torus_mask(&self) -> Result<Vec<bool>> {
        if self.domain.kind != DomainKind::Cyclic {
            return Err(Error::DomainMismatch("expected a cyclic point set".into()));
        }
        let n = self.domain.size as usize;
        let mut m = vec![false; n * n];
        for p in &self.points {
            m[p.x as usize * n + p.y as usize] = true;
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewCornerWitness {
    pub x: i64,
    pub y: i64,
    pub a: i64,
    pub y_prime: i64,
}

impl SkewCornerWitness {
    /// The three points `(x,y), (x,y+a), (x+a,y')` in the given domain.
    pub fn points(&self, d: Domain) -> Option<[Point2; 3]> {
        Some([
            Point2 { x: self.x, y: self.y },
            Point2 { x: self.x, y: d.shift(self.y, self.a)? },
            Point2 { x: d.shift(self.x, self.a)?, y: self.y_prime },
        ])
    }

    pub fn is_valid_in(&self, a: &PointSet2) -> bool {
        let d = a.domain();
        let nonzero = match d.kind {
            DomainKind::Grid => self.a != 0,
            DomainKind::Cyclic => self.a.rem_euclid(d.size as i64) != 0,
        };
        nonzero
            && self
                .points(d)
                .is_some_and(|ps| ps.iter().all(|p| a.contains(p.x, p.y)))
    }
}

/// Lexicographically least witness `(x, y, a, y')`.
pub fn find_skew_corner(a: &PointSet2) -> Option<SkewCornerWitness> {
    let d = a.domain();
    let offsets = d.offsets();
    for (x, col) in a.columns() {
        for &y in col {
            for &off in &offsets {
                let Some(y2) = d.shift(y, off) else { continue };
                if !col.contains(&y2) {
                    continue;
                }
                let Some(x2) = d.shift(x, off) else { continue };
                if let Some(&y_prime) = a.column(x2).and_then(|c| c.first()) {
                    return Some(SkewCornerWitness { x, y, a: off, y_prime });
                }
            }
        }
    }
    None
}

/// Number of tuples `(x, y, a, y')` with `a ≠ 0` and all three points in `A`.
pub fn count_skew_corners(a: &PointSet2) -> u64 {
    let d = a.domain();
    let offsets = d.offsets();
    let mut total = 0u64;
    for (x, col) in a.columns() {
        for &off in &offsets {
            let Some(x2) = d.shift(x, off) else { continue };
            let third = a.column_count(x2) as u64;
            if third == 0 {
                continue;
            }
            let pairs = col
                .iter()
                .filter(|&&y| d.shift(y, off).is_some_and(|y2| col.contains(&y2)))
                .count() as u64;
            total += pairs * third;
        }
    }
    total
}

/// `E_{x,y,a,y'} f1(x,y) f2(x,y+a) f3(x+a,y')` over `(Z/NZ)^4`.
pub fn skew_form(f1: &FunctionTable2, f2: &FunctionTable2, f3: &FunctionTable2) -> Result<f64> {
    let n = f1.rows();
    for f in [f1, f2, f3] {
        if !f.is_torus() || f.rows() != n {
            return Err(Error::DomainMismatch(
                "skew_form needs three tables on the same torus".into(),
            ));
        }
    }
    // Row means of f3 absorb the y' average.
    let m3: Vec<f64> = (0..n).map(|x| crate::sum::mean(f3.row(x).iter().copied())).collect();
    let mut acc = Accumulator::new();
    for x in 0..n {
        for a in 0..n {
            let w = m3[(x + a) % n];
            if w == 0.0 {
                continue;
            }
            let mut inner = Accumulator::new();
            for y in 0..n {
                inner.add(f1.get(x, y) * f2.get(x, (y + a) % n));
            }
            acc.add(inner.value() * w);
        }
    }
    Ok(acc.value() / (n as f64).powi(3))
}

/// A subset of `[n]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OneDimRepr", into = "OneDimRepr")]
pub struct OneDimSet {
    n: i64,
    elements: BTreeSet<i64>,
}

#[derive(Serialize, Deserialize)]
struct OneDimRepr {
    n: i64,
    elements: Vec<i64>,
}

impl TryFrom<OneDimRepr> for OneDimSet {
    type Error = Error;

    fn try_from(r: OneDimRepr) -> Result<Self> {
        OneDimSet::new(r.n, r.elements)
    }
}

impl From<OneDimSet> for OneDimRepr {
    fn from(s: OneDimSet) -> Self {
        OneDimRepr { n: s.n, elements: s.elements.into_iter().collect() }
    }
}

impl OneDimSet {
    pub fn new(n: i64, elements: impl IntoIterator<Item = i64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for v in elements {
            if !(1..=n).contains(&v) {
                return Err(Error::ElementOutOfRange { value: v, n });
            }
            set.insert(v);
        }
        Ok(Self { n, elements: set })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, v: i64) -> bool {
        self.elements.contains(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.elements.iter().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SixPointWitness {
    pub x: i64,
    pub y: i64,
    pub a: i64,
}

impl SixPointWitness {
    /// `x, x+y, x+2y, x+y+a, x+2y+2a, x+a`.
    pub fn values(&self) -> [i64; 6] {
        let Self { x, y, a } = *self;
        [x, x + y, x + 2 * y, x + y + a, x + 2 * y + 2 * a, x + a]
    }

    pub fn is_valid_in(&self, b: &OneDimSet) -> bool {
        self.a != 0 && self.values().iter().all(|&v| b.contains(v))
    }
}

/// Finds a six-point configuration with `a ≠ 0`.
///
/// Configurations with `y ≠ 0` are preferred; among them the least `(x, y, a)`
/// is returned. Only if none exists is a `y = 0` configuration reported.
pub fn find_six_point_config(b: &OneDimSet) -> Option<SixPointWitness> {
    let span = b.n() - 1;
    let try_y = |x: i64, y: i64| {
        if !(b.contains(x + y) && b.contains(x + 2 * y)) {
            return None;
        }
        (-span..=span)
            .filter(|&a| a != 0)
            .map(|a| SixPointWitness { x, y, a })
            .find(|w| w.is_valid_in(b))
    };
    for x in b.iter() {
        for y in (-span..=span).filter(|&y| y != 0) {
            if let Some(w) = try_y(x, y) {
                return Some(w);
            }
        }
    }
    b.iter().find_map(|x| try_y(x, 0))
}

/// `{(x, y) ∈ [n]^2 : y ≥ 1, x + 2y ≤ n, x, x+y, x+2y ∈ B}`.
pub fn lift_to_skew_instance(b: &OneDimSet) -> PointSet2 {
    let n = b.n();
    let mut pts = Vec::new();
    for x in b.iter() {
        for y in 1..=n {
            if x + 2 * y > n {
                break;
            }
            if b.contains(x + y) && b.contains(x + 2 * y) {
                pts.push(Point2 { x, y });
            }
        }
    }
    PointSet2::new(Domain::grid(n as u64), pts).expect("lifted points lie in [n]^2")
}

fn in_lift(b: &OneDimSet, x: i64, y: i64) -> bool {
    y >= 1 && x + 2 * y <= b.n() && b.contains(x) && b.contains(x + y) && b.contains(x + 2 * y)
}

/// Translates a skew corner of the lifted instance into a six-point witness.
pub fn map_witness(w: &SkewCornerWitness, b: &OneDimSet) -> Result<SixPointWitness> {
    let ok = w.a != 0
        && in_lift(b, w.x, w.y)
        && in_lift(b, w.x, w.y + w.a)
        && in_lift(b, w.x + w.a, w.y_prime);
    if !ok {
        return Err(Error::NotALiftedCorner(format!("{w:?}")));
    }
    let out = SixPointWitness { x: w.x, y: w.y, a: w.a };
    if !out.is_valid_in(b) {
        return Err(Error::NotALiftedCorner(format!("{w:?} maps outside B")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: u64, pts: &[(i64, i64)]) -> PointSet2 {
        PointSet2::from_pairs(Domain::grid(n), pts).unwrap()
    }

    fn oracle_count(a: &PointSet2) -> u64 {
        let d = a.domain();
        let n = d.size as i64;
        let coords: Vec<i64> = (0..n).map(|i| if d.kind == DomainKind::Grid { i + 1 } else { i }).collect();
        let mut c = 0;
        for &x in &coords {
            for &y in &coords {
                for &yp in &coords {
                    for off in d.offsets() {
                        let (Some(y2), Some(x2)) = (d.shift(y, off), d.shift(x, off)) else { continue };
                        if a.contains(x, y) && a.contains(x, y2) && a.contains(x2, yp) {
                            c += 1;
                        }
                    }
                }
            }
        }
        c
    }

    #[test]
    fn worked_examples() {
        let a = grid(3, &[(1, 1), (1, 2), (2, 3)]);
        assert_eq!(
            find_skew_corner(&a),
            Some(SkewCornerWitness { x: 1, y: 1, a: 1, y_prime: 3 })
        );
        assert_eq!(find_skew_corner(&grid(3, &[(1, 1), (1, 2), (1, 3)])), None);
        assert_eq!(count_skew_corners(&grid(2, &[(1, 1), (1, 2), (2, 1), (2, 2)])), 4);
        assert_eq!(count_skew_corners(&PointSet2::empty(Domain::grid(4))), 0);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(PointSet2::from_pairs(Domain::grid(3), &[(0, 1)]).is_err());
        assert!(PointSet2::from_pairs(Domain::cyclic(3), &[(3, 0)]).is_err());
        assert!(OneDimSet::new(5, [6]).is_err());
    }

    #[test]
    fn count_matches_oracle_both_domains() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..60 {
            let d = if trial % 2 == 0 { Domain::grid(5) } else { Domain::cyclic(5) };
            let off = if d.kind == DomainKind::Grid { 1 } else { 0 };
            let pts: Vec<_> = (0..5)
                .flat_map(|x| (0..5).map(move |y| (x + off, y + off)))
                .filter(|_| rng.gen_bool(0.3))
                .collect();
            let a = PointSet2::from_pairs(d, &pts).unwrap();
            let c = count_skew_corners(&a);
            assert_eq!(c, oracle_count(&a));
            assert_eq!(c == 0, find_skew_corner(&a).is_none());
            if let Some(w) = find_skew_corner(&a) {
                assert!(w.is_valid_in(&a));
            }
        }
    }

    #[test]
    fn skew_form_matches_loop_and_count() {
        let n = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .filter(|_| rng.gen_bool(0.4))
            .collect();
        let a = PointSet2::from_pairs(Domain::cyclic(n as u64), &pts).unwrap();
        let ind = FunctionTable2::torus(n as usize, |x, y| a.contains(x as i64, y as i64) as u8 as f64).unwrap();
        let form = skew_form(&ind, &ind, &ind).unwrap();
        // The a = 0 terms contribute |col x|^2 per column.
        let trivial: u64 = a.columns().map(|(_, c)| (c.len() * c.len()) as u64).sum();
        let total = form * (n as f64).powi(4);
        assert!((total - (count_skew_corners(&a) + trivial) as f64).abs() < 1e-9);
        let one = FunctionTable2::constant(4, 4, 1.0).unwrap();
        assert!((skew_form(&one, &one, &one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn six_point_examples() {
        let b = OneDimSet::new(5, [1, 2, 3, 5]).unwrap();
        assert_eq!(find_six_point_config(&b), Some(SixPointWitness { x: 1, y: 1, a: 1 }));
        assert_eq!(find_six_point_config(&OneDimSet::new(5, [1]).unwrap()), None);
        let lifted = lift_to_skew_instance(&OneDimSet::new(3, [1, 2, 3]).unwrap());
        assert_eq!(lifted.points().collect::<Vec<_>>(), vec![Point2 { x: 1, y: 1 }]);
        assert!(lift_to_skew_instance(&OneDimSet::new(4, []).unwrap()).is_empty());
    }

    #[test]
    fn map_witness_unfolds_definitions() {
        let b = OneDimSet::new(5, [1, 2, 3, 4, 5]).unwrap();
        let w = SkewCornerWitness { x: 1, y: 1, a: 1, y_prime: 1 };
        assert_eq!(map_witness(&w, &b).unwrap(), SixPointWitness { x: 1, y: 1, a: 1 });
        let b2 = OneDimSet::new(5, [1, 2, 3, 5]).unwrap();
        assert!(map_witness(&w, &b2).is_err());
    }

    #[test]
    fn reflection_preserves_count() {
        let a = grid(4, &[(1, 1), (1, 3), (3, 2), (2, 4), (2, 2)]);
        assert_eq!(count_skew_corners(&a), count_skew_corners(&a.reflect_y()));
    }
}
