//! Per-column pair counts shared by Steps 2–6.

use crate::bohr::BohrSet;
use crate::grid::PointSet2;

/// Largest modulus for which the `N × N` per-column tables are built.
pub const MAX_TRACE_MODULUS: usize = 512;

/// For every column `c` with `A_c ≠ ∅`:
/// `cnt_c(u, v) = Σ_{y∈B} 1_A(c, y+u) 1_A(c, y+v)` and
/// `col_c(u) = Σ_{y∈B} 1_A(c, y+u)`.
#[derive(Clone, Debug)]
pub struct Columns {
    n: usize,
    b_len: usize,
    in_a: Vec<bool>,
    in_x: Vec<bool>,
    vd: Vec<f64>,
    cnt: Vec<Option<Vec<u32>>>,
    col: Vec<Option<Vec<u32>>>,
}

impl Columns {
    pub fn new(a: &PointSet2, x: &[usize], b: &BohrSet) -> Self {
        let n = b.modulus();
        let mut in_a = vec![false; n * n];
        for p in a.points() {
            in_a[p.x as usize * n + p.y as usize] = true;
        }
        let mut in_x = vec![false; n];
        for &c in x {
            in_x[c] = true;
        }
        let mut vd = vec![0.0; n];
        let mut cnt = vec![None; n];
        let mut col = vec![None; n];
        for (c, ys) in a.columns() {
            let c = c as usize;
            vd[c] = ys.len() as f64 / b.len() as f64;
            let ys: Vec<usize> = ys.iter().map(|&y| y as usize).collect();
            let mut t = vec![0u32; n * n];
            let mut k = vec![0u32; n];
            for &y in b.elements() {
                for &p in &ys {
                    let u = (p + n - y) % n;
                    k[u] += 1;
                    for &q in &ys {
                        t[u * n + (q + n - y) % n] += 1;
                    }
                }
            }
            cnt[c] = Some(t);
            col[c] = Some(k);
        }
        Self { n, b_len: b.len(), in_a, in_x, vd, cnt, col }
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn b_len(&self) -> usize {
        self.b_len
    }

    pub fn a(&self, c: usize, y: usize) -> bool {
        self.in_a[(c % self.n) * self.n + y % self.n]
    }

    pub fn x(&self, c: usize) -> bool {
        self.in_x[c % self.n]
    }

    pub fn vd(&self, c: usize) -> f64 {
        self.vd[c % self.n]
    }

    pub fn cnt(&self, c: usize, u: usize, v: usize) -> u32 {
        match &self.cnt[c % self.n] {
            Some(t) => t[(u % self.n) * self.n + v % self.n],
            None => 0,
        }
    }

    pub fn col(&self, c: usize, u: usize) -> u32 {
        match &self.col[c % self.n] {
            Some(k) => k[u % self.n],
            None => 0,
        }
    }

    /// `E_{y∈B} bal(c, y+u) bal(c, y+v)` with `bal = 1_A − vd`.
    pub fn cbal(&self, c: usize, u: usize, v: usize) -> f64 {
        let c = c % self.n;
        if self.cnt[c].is_none() {
            return 0.0;
        }
        let w = self.vd[c];
        let bl = self.b_len as f64;
        (self.cnt(c, u, v) as f64 - w * (self.col(c, u) + self.col(c, v)) as f64) / bl + w * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::build_bohr;
    use crate::grid::Domain;

    #[test]
    fn counts_match_definition() {
        let n = 12;
        let b = build_bohr(n, [1], 1.0).unwrap();
        let pts = [(0, 0), (0, 1), (0, 11), (3, 2), (3, 0)];
        let a = PointSet2::from_pairs(Domain::cyclic(n as u64), &pts).unwrap();
        let cols = Columns::new(&a, &[0, 3, 5], &b);
        for c in [0usize, 3, 5] {
            for u in 0..n {
                let col: u32 = b.elements().iter().filter(|&&y| a.contains(c as i64, ((y + u) % n) as i64)).count() as u32;
                assert_eq!(cols.col(c, u), col);
                for v in 0..n {
                    let want = b
                        .elements()
                        .iter()
                        .filter(|&&y| {
                            a.contains(c as i64, ((y + u) % n) as i64) && a.contains(c as i64, ((y + v) % n) as i64)
                        })
                        .count() as u32;
                    assert_eq!(cols.cnt(c, u, v), want);
                    let vd = cols.vd(c);
                    let bal = |y: usize| a.contains(c as i64, (y % n) as i64) as u8 as f64 - vd;
                    let direct: f64 =
                        b.elements().iter().map(|&y| bal(y + u) * bal(y + v)).sum::<f64>() / b.len() as f64;
                    assert!((cols.cbal(c, u, v) - direct).abs() < 1e-12);
                }
            }
        }
        assert!(cols.x(5) && !cols.x(4));
        assert_eq!(cols.vd(5), 0.0);
    }
}
