use serde::{Deserialize, Serialize};

use crate::bohr::BohrSet;
use crate::error::{Error, Result};
use crate::grid::{DomainKind, PointSet2};
use crate::table::FunctionTable2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDensityTable {
    /// `vd(x) = E_{y∈B} 1_A(x, y)`, zero off `X`; indexed by residue.
    pub vd: Vec<f64>,
    /// Relative density of `A` in `X × B`.
    pub alpha: f64,
    /// `|X| / |B|`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancedTable {
    /// `bal(x, y) = 1_A(x, y) − vd(x)` on the whole torus.
    pub bal: FunctionTable2,
    pub density: ColumnDensityTable,
}

pub(crate) fn check_inside(a: &PointSet2, x: &[usize], b: &BohrSet) -> Result<usize> {
    let d = a.domain();
    if d.kind != DomainKind::Cyclic || d.size as usize != b.modulus() {
        return Err(Error::DomainMismatch(format!(
            "A must live on (Z/{}Z)^2 to match the Bohr set",
            b.modulus()
        )));
    }
    if x.is_empty() || b.is_empty() {
        return Err(Error::Precondition("X and B must be nonempty".into()));
    }
    let n = b.modulus();
    let mut in_x = vec![false; n];
    for &v in x {
        if v >= n {
            return Err(Error::DomainMismatch(format!("X element {v} outside Z/{n}Z")));
        }
        in_x[v] = true;
    }
    if let Some(p) = a.points().find(|p| !in_x[p.x as usize] || !b.contains(p.y as usize)) {
        return Err(Error::Precondition(format!("point ({}, {}) is not in X × B", p.x, p.y)));
    }
    Ok(n)
}

pub fn column_density(a: &PointSet2, x: &[usize], b: &BohrSet) -> Result<ColumnDensityTable> {
    let n = check_inside(a, x, b)?;
    let mut vd = vec![0.0; n];
    for (c, col) in a.columns() {
        vd[c as usize] = col.len() as f64 / b.len() as f64;
    }
    let mut xs = x.to_vec();
    xs.sort_unstable();
    xs.dedup();
    Ok(ColumnDensityTable {
        vd,
        alpha: a.len() as f64 / (xs.len() * b.len()) as f64,
        delta: xs.len() as f64 / b.len() as f64,
    })
}

pub fn balanced(a: &PointSet2, x: &[usize], b: &BohrSet) -> Result<BalancedTable> {
    let density = column_density(a, x, b)?;
    let n = b.modulus();
    let bal = FunctionTable2::torus(n, |i, j| {
        a.contains(i as i64, j as i64) as u8 as f64 - density.vd[i]
    })?;
    Ok(BalancedTable { bal, density })
}
