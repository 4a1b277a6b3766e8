use serde::{Deserialize, Serialize};

use super::{check_instance, run_increment, ConstantsOverride, IncrementOutcome, IncrementTrace};
use crate::bohr::{build_bohr, BohrSet};
use crate::error::{Error, Result};
use crate::grid::{Domain, DomainKind, Point2, PointSet2};
use crate::lab::InequalityVerdict;

/// One state `(δᵢ, dᵢ, ρᵢ, αᵢ)` and what the increment step made of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub i: usize,
    pub delta: f64,
    pub d: usize,
    pub rho: f64,
    pub outcome: String,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub n: usize,
    /// Density of `A` in `[N]×[N]`.
    pub initial_alpha: f64,
    /// `(i, j)` of the densest box `[iN/3, (i+1)N/3) × [jN/3, (j+1)N/3)`.
    pub box_index: (usize, usize),
    pub rows: Vec<IterationRow>,
    /// Bookkeeping bounds on `δᵢ`, `dᵢ`, `ρᵢ` (reports).
    pub bullets: Vec<InequalityVerdict>,
    pub traces: Vec<IncrementTrace>,
}

impl IterationLog {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Restricts `A ⊆ [N]×[N]` to its densest ninth, box index `⌊3(x−1)/N⌋`,
/// and views it in `(Z/NZ)²` via `(x, y) ↦ (x−1, y−1)`.
pub fn nine_box(a: &PointSet2) -> Result<(PointSet2, (usize, usize))> {
    let d = a.domain();
    if d.kind != DomainKind::Grid {
        return Err(Error::DomainMismatch("the nine-box passage starts from a grid [N]×[N]".into()));
    }
    let n = d.size as i64;
    let idx = |v: i64| (3 * (v - 1) / n) as usize;
    let mut counts = [[0usize; 3]; 3];
    for p in a.points() {
        counts[idx(p.x)][idx(p.y)] += 1;
    }
    let mut best = (0, 0);
    for i in 0..3 {
        for j in 0..3 {
            if counts[i][j] > counts[best.0][best.1] {
                best = (i, j);
            }
        }
    }
    let pts: Vec<Point2> = a
        .points()
        .filter(|p| (idx(p.x), idx(p.y)) == best)
        .map(|p| Point2 { x: p.x - 1, y: p.y - 1 })
        .collect();
    Ok((PointSet2::new(Domain::cyclic(d.size), pts)?, best))
}

fn bullet_bounds(i: usize, alpha: f64, big_c: f64, delta: f64, d: usize, rho: f64) -> Vec<InequalityVerdict> {
    let k = big_c.powf(big_c + 1.0) * ((i + 1) as f64).powf(big_c + 1.0) * (2.0 * big_c / alpha).ln().powf(2.0 * big_c);
    let tag = format!("i={i}");
    vec![
        InequalityVerdict::at_least("delta_bound", delta, alpha.powf(big_c * i as f64) / big_c.powi(i as i32))
            .soft()
            .with_instance(tag.clone()),
        InequalityVerdict::new("rank_bound", d as f64, k).soft().with_instance(tag.clone()),
        InequalityVerdict::at_least("radius_bound", rho, (-k).exp() / k.powf(3.0 * i as f64))
            .soft()
            .with_instance(tag),
    ]
}

/// Nine-box passage, then repeated increment steps until one of them does
/// not return a density increment (or `max_steps` is reached). A Step 1
/// column increment keeps `B` and restricts `X` to the dense columns.
pub fn iterate_theorem(a: &PointSet2, o: &ConstantsOverride, max_steps: usize) -> Result<IterationLog> {
    if a.is_empty() {
        return Err(Error::Precondition("A must be nonempty".into()));
    }
    let n = a.domain().size as usize;
    let initial_alpha = a.len() as f64 / (n * n) as f64;
    let (mut cur, box_index) = nine_box(a)?;
    let mut b: BohrSet = build_bohr(n, [], 1.0)?;
    let mut x: Vec<usize> = (0..n).collect();
    let mut log = IterationLog { n, initial_alpha, box_index, rows: Vec::new(), bullets: Vec::new(), traces: Vec::new() };
    for i in 0..=max_steps {
        let (alpha, delta) = check_instance(&cur, &x, &b)?;
        let big_c = o.big_c.unwrap_or(1.0);
        log.bullets.extend(bullet_bounds(i, initial_alpha, big_c, delta, b.rank(), b.radius()));
        let mut row = IterationRow { i, delta, d: b.rank(), rho: b.radius(), outcome: String::new(), alpha };
        if i == max_steps {
            row.outcome = "StepLimit".into();
            log.rows.push(row);
            break;
        }
        let trace = run_increment(&cur, &x, &b, o)?;
        row.outcome = trace.outcome.kind().to_string();
        log.rows.push(row);
        let next = match &trace.outcome {
            IncrementOutcome::DensityIncrement(w) => Some(w.clone()),
            IncrementOutcome::Step1ColumnIncrement { columns, .. } => {
                // Same B, fewer columns: restrict and carry on.
                let cols = columns.clone();
                cur = PointSet2::new(
                    Domain::cyclic(n as u64),
                    cur.points().filter(|p| cols.binary_search(&(p.x as usize)).is_ok()).collect::<Vec<_>>(),
                )?;
                x = cols;
                log.traces.push(trace);
                continue;
            }
            _ => None,
        };
        log.traces.push(trace);
        let Some(w) = next else { break };
        let nb = build_bohr(n, w.bohr.freqs.iter().copied(), w.bohr.radius)?;
        let cols: Vec<usize> = w.columns.clone();
        let in_cols = |c: usize| cols.binary_search(&c).is_ok();
        let pts: Vec<Point2> = cur
            .points()
            .filter(|p| in_cols(p.x as usize) && nb.contains((p.y as usize + n - w.y_translate) % n))
            .map(|p| Point2 {
                x: ((p.x as usize + n - w.x_translate) % n) as i64,
                y: ((p.y as usize + n - w.y_translate) % n) as i64,
            })
            .collect();
        x = cols.iter().map(|&c| (c + n - w.x_translate) % n).collect();
        x.sort_unstable();
        cur = PointSet2::new(Domain::cyclic(n as u64), pts)?;
        b = nb;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_box_picks_densest() {
        let a = PointSet2::from_pairs(Domain::grid(9), &[(1, 1), (4, 7), (5, 8), (6, 9), (9, 9)]).unwrap();
        let (t, idx) = nine_box(&a).unwrap();
        assert_eq!(idx, (1, 2));
        assert_eq!(t.len(), 3);
        assert!(t.contains(3, 6) && t.contains(5, 8));
        assert!(nine_box(&t).is_err());
    }

    #[test]
    fn one_per_column_stops_on_smallness() {
        let pts: Vec<(i64, i64)> = (1..=30).map(|x| (x, 1)).collect();
        let a = PointSet2::from_pairs(Domain::grid(30), &pts).unwrap();
        let log = iterate_theorem(&a, &ConstantsOverride::default(), 4).unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].outcome, "SmallnessViolation");
        assert_eq!((log.rows[0].d, log.rows[0].rho, log.rows[0].delta), (0, 1.0, 1.0));
        let csv = log.to_csv().unwrap();
        assert!(csv.starts_with("i,delta,d,rho,outcome,alpha\n0,1.0,0,1.0,SmallnessViolation,"));
    }
}
