//! Exact values of `s(n)`, the largest skew-corner-free subset of `[n]×[n]`,
//! and simple lower-bound constructions.
//!
//! Column `x` is stored as a bit mask with bit `j` standing for `y = j + 1`.
//! A pair at vertical gap `g` in column `x` forbids every point of columns
//! `x ± g`, which is all the search needs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{find_skew_corner, Domain, DomainKind, OneDimSet, Point2, PointSet2};

/// Largest `n` accepted by the exhaustive search.
pub const BRUTE_FORCE_MAX: usize = 5;
/// Largest `n` accepted by branch and bound (column masks are `u32`).
pub const BRANCH_AND_BOUND_MAX: usize = 16;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub time_budget: Duration,
    /// Restrict the first nonempty column to masks no larger than their
    /// y-reflection.
    pub symmetry_breaking: bool,
    /// Worker count; `1` runs sequentially and deterministically.
    pub threads: usize,
    pub incumbent: Option<PointSet2>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { time_budget: Duration::from_secs(60), symmetry_breaking: true, threads: 1, incumbent: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalResult {
    pub n: usize,
    pub value: usize,
    pub witness: PointSet2,
    pub optimal: bool,
    pub nodes_explored: u64,
}

/// Bit `g − 1` is set when the column contains two points at gap `g`.
fn gap_table(n: usize) -> Vec<u32> {
    (0u32..1 << n)
        .map(|m| (1..n).filter(|&g| m & (m >> g) != 0).fold(0, |acc, g| acc | 1 << (g - 1)))
        .collect()
}

fn masks_corner_free(cols: &[u32], gaps: &[u32]) -> bool {
    let n = cols.len();
    for x in 0..n {
        let mut gs = gaps[cols[x] as usize];
        while gs != 0 {
            let g = gs.trailing_zeros() as usize + 1;
            gs &= gs - 1;
            if (x + g < n && cols[x + g] != 0) || (x >= g && cols[x - g] != 0) {
                return false;
            }
        }
    }
    true
}

fn to_point_set(n: usize, cols: &[u32]) -> PointSet2 {
    let pts = cols.iter().enumerate().flat_map(|(x, &m)| {
        (0..n).filter(move |j| m >> j & 1 == 1).map(move |j| Point2 { x: x as i64 + 1, y: j as i64 + 1 })
    });
    PointSet2::new(Domain::grid(n as u64), pts).expect("masks stay inside the grid")
}

fn to_masks(a: &PointSet2) -> Vec<u32> {
    let n = a.domain().size as usize;
    let mut cols = vec![0u32; n];
    for p in a.points() {
        cols[p.x as usize - 1] |= 1 << (p.y - 1);
    }
    cols
}

/// Exhaustive enumeration of all `2^{n²}` subsets.
pub fn brute_force_s(n: usize) -> Result<ExtremalResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge(format!(
            "brute force is limited to n ≤ {BRUTE_FORCE_MAX}; use branch_and_bound_s"
        )));
    }
    let gaps = gap_table(n);
    let cells = n * n;
    let mut best = (0usize, 0u64);
    let mut cols = vec![0u32; n];
    let full = (1u32 << n) - 1;
    for bits in 0u64..1 << cells {
        let size = bits.count_ones() as usize;
        if size <= best.0 {
            continue;
        }
        for (x, c) in cols.iter_mut().enumerate() {
            *c = (bits >> (x * n)) as u32 & full;
        }
        if masks_corner_free(&cols, &gaps) {
            best = (size, bits);
        }
    }
    for (x, c) in cols.iter_mut().enumerate() {
        *c = (best.1 >> (x * n)) as u32 & full;
    }
    let witness = to_point_set(n, &cols);
    debug_assert!(find_skew_corner(&witness).is_none());
    Ok(ExtremalResult { n, value: best.0, witness, optimal: true, nodes_explored: 1 << cells })
}

struct Shared {
    best: AtomicUsize,
    witness: Mutex<Option<Vec<u32>>>,
    nodes: AtomicU64,
    aborted: AtomicBool,
    deadline: Instant,
}

impl Shared {
    fn offer(&self, value: usize, cols: &[u32]) {
        let mut w = self.witness.lock().expect("witness lock");
        if value > self.best.load(Ordering::SeqCst) || w.is_none() {
            self.best.fetch_max(value, Ordering::SeqCst);
            *w = Some(cols.to_vec());
        }
    }
}

struct Searcher<'a> {
    n: usize,
    gaps: &'a [u32],
    order: &'a [u32],
    symmetry: bool,
    cap: HashMap<u32, usize>,
    shared: &'a Shared,
    local_nodes: u64,
}

impl Searcher<'_> {
    /// Most points a column can hold when the gaps in `forbidden` are banned.
    fn capacity(&mut self, forbidden: u32) -> usize {
        if let Some(&c) = self.cap.get(&forbidden) {
            return c;
        }
        let c = self
            .order
            .iter()
            .find(|&&m| self.gaps[m as usize] & forbidden == 0)
            .map_or(0, |m| m.count_ones() as usize);
        self.cap.insert(forbidden, c);
        c
    }

    fn reversed(&self, m: u32) -> u32 {
        m.reverse_bits() >> (32 - self.n)
    }

    fn allowed(&self, m: u32, x: usize, forced: u32, forbidden: &[u32], seen: bool) -> bool {
        if m == 0 {
            return true;
        }
        if forced >> x & 1 == 1 || self.gaps[m as usize] & forbidden[x] != 0 {
            return false;
        }
        !(self.symmetry && !seen && m > self.reversed(m))
    }

    fn tick(&mut self) -> bool {
        self.local_nodes += 1;
        if self.local_nodes % 1024 == 0 {
            self.shared.nodes.fetch_add(1024, Ordering::Relaxed);
            if Instant::now() >= self.shared.deadline {
                self.shared.aborted.store(true, Ordering::Relaxed);
            }
        }
        !self.shared.aborted.load(Ordering::Relaxed)
    }

    /// Applies column `x = m`; returns the updated constraint state.
    fn apply(&self, x: usize, m: u32, forced: u32, forbidden: &[u32]) -> (u32, Vec<u32>) {
        let mut forced = forced;
        let mut forb = forbidden.to_vec();
        if m != 0 {
            let gs = self.gaps[m as usize];
            for (c, f) in forb.iter_mut().enumerate().skip(x + 1) {
                let g = c - x;
                *f |= 1 << (g - 1);
                if gs >> (g - 1) & 1 == 1 {
                    forced |= 1 << c;
                }
            }
        }
        (forced, forb)
    }

    fn search(&mut self, x: usize, cols: &mut Vec<u32>, size: usize, forced: u32, forbidden: &[u32], seen: bool) {
        if !self.tick() {
            return;
        }
        if x == self.n {
            if size > self.shared.best.load(Ordering::SeqCst) {
                self.shared.offer(size, cols);
            }
            return;
        }
        let mut bound = size;
        for c in x..self.n {
            if forced >> c & 1 == 0 {
                bound += self.capacity(forbidden[c]);
            }
        }
        if bound <= self.shared.best.load(Ordering::SeqCst) {
            return;
        }
        for i in 0..self.order.len() {
            let m = self.order[i];
            if !self.allowed(m, x, forced, forbidden, seen) {
                continue;
            }
            let (f2, forb2) = self.apply(x, m, forced, forbidden);
            cols.push(m);
            self.search(x + 1, cols, size + m.count_ones() as usize, f2, &forb2, seen || m != 0);
            cols.pop();
            if self.shared.aborted.load(Ordering::Relaxed) {
                return;
            }
        }
    }
}

/// Branch and bound over columns, left to right.
pub fn branch_and_bound_s(n: usize, config: &SearchConfig) -> Result<ExtremalResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if n > BRANCH_AND_BOUND_MAX {
        return Err(Error::TooLarge(format!("branch and bound supports n ≤ {BRANCH_AND_BOUND_MAX}")));
    }
    if config.time_budget.is_zero() {
        return Err(Error::InvalidParameter("time budget must be positive".into()));
    }
    let gaps = gap_table(n);
    let mut order: Vec<u32> = (0u32..1 << n).collect();
    order.sort_by_key(|&m| (std::cmp::Reverse(m.count_ones()), m));

    let start = Instant::now();
    let shared = Shared {
        best: AtomicUsize::new(0),
        witness: Mutex::new(None),
        nodes: AtomicU64::new(0),
        aborted: AtomicBool::new(false),
        deadline: start + config.time_budget,
    };
    if let Some(inc) = &config.incumbent {
        let d = inc.domain();
        if d.kind != DomainKind::Grid || d.size as usize != n {
            return Err(Error::DomainMismatch(format!("incumbent must live on grid [{n}]")));
        }
        if find_skew_corner(inc).is_some() {
            return Err(Error::Precondition("incumbent contains a skew corner".into()));
        }
        shared.best.store(inc.len(), Ordering::SeqCst);
        *shared.witness.lock().expect("witness lock") = Some(to_masks(inc));
    }

    let searcher = || Searcher {
        n,
        gaps: &gaps,
        order: &order,
        symmetry: config.symmetry_breaking,
        cap: HashMap::new(),
        shared: &shared,
        local_nodes: 0,
    };
    let root_forb = vec![0u32; n];
    if config.threads <= 1 {
        let mut s = searcher();
        s.search(0, &mut Vec::with_capacity(n), 0, 0, &root_forb, false);
        shared.nodes.fetch_add(s.local_nodes % 1024, Ordering::Relaxed);
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let first: Vec<u32> = {
            let s = searcher();
            order.iter().copied().filter(|&m| s.allowed(m, 0, 0, &root_forb, false)).collect()
        };
        pool.install(|| {
            first.par_iter().for_each(|&m| {
                let mut s = searcher();
                let (f2, forb2) = s.apply(0, m, 0, &root_forb);
                let mut cols = vec![m];
                s.search(1, &mut cols, m.count_ones() as usize, f2, &forb2, m != 0);
                shared.nodes.fetch_add(s.local_nodes % 1024, Ordering::Relaxed);
            })
        });
    }
    let value = shared.best.load(Ordering::SeqCst);
    let cols = shared.witness.into_inner().expect("witness lock").unwrap_or_else(|| vec![0; n]);
    let witness = to_point_set(n, &cols);
    debug_assert_eq!(witness.len(), value);
    Ok(ExtremalResult {
        n,
        value,
        witness,
        optimal: !shared.aborted.load(Ordering::SeqCst),
        nodes_explored: shared.nodes.load(Ordering::SeqCst),
    })
}

/// `{(x, 1) : x ∈ [n]}`.
pub fn construct_one_per_column(n: usize) -> PointSet2 {
    let pts = (1..=n as i64).map(|x| Point2 { x, y: 1 });
    PointSet2::new(Domain::grid(n as u64), pts).expect("inside the grid")
}

/// `{(1, y) : y ∈ [n]}`.
pub fn construct_single_column(n: usize) -> PointSet2 {
    let pts = (1..=n as i64).map(|y| Point2 { x: 1, y });
    PointSet2::new(Domain::grid(n as u64), pts).expect("inside the grid")
}

/// Behrend's sphere construction, shifted into `[n]`.
///
/// For each digit bound `m`, the numbers below `n` whose base-`(2m−1)` digits
/// are all below `m` are grouped by the sum of squared digits; since sums of
/// two such numbers never carry, each group is free of three-term progressions.
/// The largest group over all `m` is returned.
pub fn construct_behrend(n: usize) -> Result<OneDimSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mut best: Vec<i64> = vec![1];
    let mut m = 2;
    while m <= n {
        let base = 2 * m - 1;
        let mut groups: HashMap<usize, Vec<i64>> = HashMap::new();
        'num: for v in 0..n {
            let (mut rest, mut norm) = (v, 0);
            while rest > 0 {
                let dgt = rest % base;
                if dgt >= m {
                    continue 'num;
                }
                norm += dgt * dgt;
                rest /= base;
            }
            groups.entry(norm).or_default().push(v as i64 + 1);
        }
        let mut keys: Vec<_> = groups.keys().copied().collect();
        keys.sort_unstable();
        for k in keys {
            if groups[&k].len() > best.len() {
                best = groups[&k].clone();
            }
        }
        if base > n {
            break;
        }
        m += 1;
    }
    OneDimSet::new(n as i64, best)
}

/// CSV rows `n,s,witness_size,optimal` for plotting.
pub fn sequence_csv(results: &[ExtremalResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "s", "witness_size", "optimal"])?;
    for r in results {
        w.write_record([
            r.n.to_string(),
            r.value.to_string(),
            r.witness.len().to_string(),
            r.optimal.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mask_check_matches_detector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=6 {
            let gaps = gap_table(n);
            for _ in 0..200 {
                let cols: Vec<u32> = (0..n).map(|_| rng.gen_range(0..1u32 << n) & rng.gen_range(0..1u32 << n)).collect();
                let a = to_point_set(n, &cols);
                assert_eq!(masks_corner_free(&cols, &gaps), find_skew_corner(&a).is_none());
                assert_eq!(to_masks(&a), cols);
            }
        }
    }

    #[test]
    fn small_values() {
        assert_eq!(brute_force_s(1).unwrap().value, 1);
        assert_eq!(brute_force_s(2).unwrap().value, 2);
        let r = brute_force_s(3).unwrap();
        assert_eq!(r.value, 4);
        assert!(find_skew_corner(&r.witness).is_none());
        let known = PointSet2::from_pairs(Domain::grid(3), &[(1, 1), (1, 2), (3, 1), (3, 2)]).unwrap();
        assert!(find_skew_corner(&known).is_none());
        assert!(brute_force_s(6).is_err());
    }

    #[test]
    fn branch_and_bound_agrees() {
        for n in 1..=4 {
            let exact = brute_force_s(n).unwrap().value;
            for (sym, threads) in [(true, 1), (false, 1), (true, 3)] {
                let cfg = SearchConfig { symmetry_breaking: sym, threads, ..Default::default() };
                let r = branch_and_bound_s(n, &cfg).unwrap();
                assert!(r.optimal);
                assert_eq!(r.value, exact, "n={n} sym={sym} threads={threads}");
                assert_eq!(r.witness.len(), r.value);
                assert!(find_skew_corner(&r.witness).is_none());
            }
        }
    }

    #[test]
    fn incumbent_and_budget() {
        let cfg = SearchConfig { incumbent: Some(construct_one_per_column(5)), ..Default::default() };
        let r = branch_and_bound_s(5, &cfg).unwrap();
        assert!(r.value >= 5);
        let bad = PointSet2::from_pairs(Domain::grid(3), &[(1, 1), (1, 2), (2, 1)]).unwrap();
        let cfg = SearchConfig { incumbent: Some(bad), ..Default::default() };
        assert!(branch_and_bound_s(3, &cfg).is_err());
    }

    #[test]
    fn constructions() {
        for n in 1..=12 {
            assert!(find_skew_corner(&construct_one_per_column(n)).is_none());
            assert!(find_skew_corner(&construct_single_column(n)).is_none());
            assert_eq!(construct_one_per_column(n).len(), n);
        }
        assert_eq!(construct_behrend(1).unwrap().iter().collect::<Vec<_>>(), vec![1]);
        for n in [10, 100, 1000] {
            let b = construct_behrend(n).unwrap();
            let v: Vec<i64> = b.iter().collect();
            for &x in &v {
                for &z in &v {
                    if x < z && (x + z) % 2 == 0 {
                        assert!(!b.contains((x + z) / 2));
                    }
                }
            }
        }
    }
}
