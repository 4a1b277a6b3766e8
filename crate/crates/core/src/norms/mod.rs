//! Uniformity-type norms and inner products.
//!
//! Every evaluator returns the raw multilinear average alongside the rooted
//! value `|raw|^{1/p}`, so signed quantities are never hidden behind a root.

mod density;
mod mc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{mean, Accumulator};
use crate::table::FunctionTable2;

pub use density::{balanced, column_density, BalancedTable, ColumnDensityTable};
pub use mc::{mc_grid_norm, mc_km_norm, mc_vs_inner_product};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    /// `|raw|^{1/p}` for the norm's exponent `p`.
    pub value: f64,
    /// The multilinear average before taking the root.
    pub raw: f64,
    pub method: Method,
    pub stderr: Option<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

impl NormValue {
    pub(crate) fn exact(raw: f64, p: f64) -> Self {
        Self { value: root(raw, p), raw, method: Method::Exact, stderr: None, samples: None, seed: None }
    }
}

pub(crate) fn root(raw: f64, p: f64) -> f64 {
    raw.abs().powf(1.0 / p)
}

fn check_torus_1d(f: &[f64]) -> Result<usize> {
    if f.is_empty() {
        return Err(Error::Shape("empty table".into()));
    }
    Ok(f.len())
}

/// `C(h) = E_x f(x) f(x+h)` for every `h`.
pub fn autocorrelation(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n).map(|h| mean((0..n).map(|x| f[x] * f[(x + h) % n]))).collect()
}

/// `‖f‖_{U²} = (E_{x,a,b} f(x)f(x+a)f(x+b)f(x+a+b))^{1/4}` via `E_h C(h)²`.
pub fn u2_norm(f: &[f64]) -> Result<NormValue> {
    check_torus_1d(f)?;
    let raw = mean(autocorrelation(f).into_iter().map(|c| c * c));
    Ok(NormValue::exact(raw, 4.0))
}

/// Kelley–Meka norm `(E_{x,a₁,a₂,b₁..b_r} Π f(x+a₁+bᵢ) f(x+a₂+bᵢ))^{1/2r}`.
///
/// The inner average only depends on `a₂ − a₁`, so it collapses to
/// `E_h C(h)^r`.
pub fn km_norm(f: &[f64], r: u32) -> Result<NormValue> {
    check_torus_1d(f)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let raw = mean(autocorrelation(f).into_iter().map(|c| c.powi(r as i32)));
    Ok(NormValue::exact(raw, 2.0 * r as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalValue {
    pub raw: f64,
    /// `raw^{1/4}` when `raw ≥ 0`.
    pub root: Option<f64>,
}

impl DirectionalValue {
    fn new(raw: f64) -> Self {
        Self { raw, root: (raw >= 0.0).then(|| raw.powf(0.25)) }
    }
}

fn check_direction_set(h: &[(usize, usize)], n: usize, name: &str) -> Result<Vec<(usize, usize)>> {
    let mut v: Vec<(usize, usize)> = h.iter().map(|&(a, b)| (a % n, b % n)).collect();
    v.sort_unstable();
    v.dedup();
    if v.binary_search(&(0, 0)).is_err() {
        return Err(Error::Precondition(format!("{name} must contain 0")));
    }
    for &(a, b) in &v {
        if v.binary_search(&((n - a) % n, (n - b) % n)).is_err() {
            return Err(Error::Precondition(format!("{name} is not closed under negation")));
        }
    }
    Ok(v)
}

/// `E_{x, a₁∈H₁, a₂∈H₂} f(x) f(x+a₁) f(x+a₂) f(x+a₁+a₂)` on `(Z/NZ)^2`.
pub fn directional_norm_raw(
    f: &FunctionTable2,
    h1: &[(usize, usize)],
    h2: &[(usize, usize)],
) -> Result<DirectionalValue> {
    if !f.is_torus() {
        return Err(Error::DomainMismatch("directional norm needs a torus table".into()));
    }
    let n = f.rows();
    let h1 = check_direction_set(h1, n, "H1")?;
    let h2 = check_direction_set(h2, n, "H2")?;
    let mut outer = Accumulator::new();
    let mut g = vec![0.0; n * n];
    for &(p, q) in &h1 {
        for x in 0..n {
            for y in 0..n {
                g[x * n + y] = f.get(x, y) * f.get((x + p) % n, (y + q) % n);
            }
        }
        let mut acc = Accumulator::new();
        for &(u, v) in &h2 {
            for x in 0..n {
                for y in 0..n {
                    acc.add(g[x * n + y] * g[((x + u) % n) * n + (y + v) % n]);
                }
            }
        }
        outer.add(acc.value() / (h2.len() * n * n) as f64);
    }
    Ok(DirectionalValue::new(outer.value() / h1.len() as f64))
}

/// `U(G×G, {0}×G)`: `E_{a₁} E_{x₁} (E_y f(x)f(x+a₁))²`, never negative.
pub fn directional_norm_vertical(f: &FunctionTable2) -> Result<DirectionalValue> {
    if !f.is_torus() {
        return Err(Error::DomainMismatch("directional norm needs a torus table".into()));
    }
    let n = f.rows();
    let mut acc = Accumulator::new();
    for p in 0..n {
        for q in 0..n {
            for x in 0..n {
                let s = mean((0..n).map(|y| f.get(x, y) * f.get((x + p) % n, (y + q) % n)));
                acc.add(s * s);
            }
        }
    }
    Ok(DirectionalValue::new(acc.value() / (n * n * n) as f64))
}

/// `‖f‖_{U²}` of a torus table: `E_h C(h)²` over `h ∈ (Z/NZ)^2`.
pub fn u2_norm_2d(f: &FunctionTable2) -> Result<NormValue> {
    if !f.is_torus() {
        return Err(Error::DomainMismatch("U² on (Z/NZ)^2 needs a torus table".into()));
    }
    let n = f.rows();
    let mut acc = Accumulator::new();
    for p in 0..n {
        for q in 0..n {
            let mut c = Accumulator::new();
            for x in 0..n {
                for y in 0..n {
                    c.add(f.get(x, y) * f.get((x + p) % n, (y + q) % n));
                }
            }
            let c = c.value() / (n * n) as f64;
            acc.add(c * c);
        }
    }
    Ok(NormValue::exact(acc.value() / (n * n) as f64, 4.0))
}

/// Calls `visit` with every tuple in `[0, base)^len`, in lexicographic order.
pub(crate) fn for_each_tuple(base: usize, len: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; len];
    loop {
        visit(&idx);
        let mut p = len;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < base {
                break;
            }
            idx[p] = 0;
        }
    }
}

fn check_even(k: usize, l: usize) -> Result<()> {
    if k == 0 || l == 0 || k % 2 == 1 || l % 2 == 1 {
        return Err(Error::InvalidParameter(format!("k = {k} and l = {l} must be positive and even")));
    }
    Ok(())
}

/// `E_{x₁..x_k, y₁..y_ℓ} Π_{i,j} f_{ij}(xᵢ, yⱼ)` for a `k × ℓ` matrix of tables
/// sharing one shape, summing over whichever tuple side is cheaper.
pub fn grid_inner_product(fm: &[Vec<&FunctionTable2>]) -> Result<f64> {
    let k = fm.len();
    let l = fm.first().map_or(0, Vec::len);
    if k == 0 || l == 0 || fm.iter().any(|row| row.len() != l) {
        return Err(Error::Shape("table matrix must be a nonempty k×ℓ array".into()));
    }
    let (rows, cols) = (fm[0][0].rows(), fm[0][0].cols());
    if fm.iter().flatten().any(|t| t.rows() != rows || t.cols() != cols) {
        return Err(Error::Shape("all grid factors must share one shape".into()));
    }
    let cost_y = (cols as f64).powi(l as i32) * (rows * k * l) as f64;
    let cost_x = (rows as f64).powi(k as i32) * (cols * k * l) as f64;
    if cost_y.min(cost_x) > 5e9 {
        return Err(Error::TooLarge(format!("grid product of {k}x{l} on {rows}x{cols}")));
    }
    let mut acc = Accumulator::new();
    let mut count = 0usize;
    if cost_y <= cost_x {
        for_each_tuple(cols, l, |ys| {
            let mut prod = 1.0;
            for row in fm {
                prod *= mean((0..rows).map(|x| ys.iter().zip(row).map(|(&y, f)| f.get(x, y)).product::<f64>()));
            }
            acc.add(prod);
            count += 1;
        });
    } else {
        for_each_tuple(rows, k, |xs| {
            let mut prod = 1.0;
            for j in 0..l {
                prod *= mean((0..cols).map(|y| xs.iter().zip(fm).map(|(&x, row)| row[j].get(x, y)).product::<f64>()));
            }
            acc.add(prod);
            count += 1;
        });
    }
    Ok(acc.value() / count as f64)
}

/// `‖f‖_{U_{k,ℓ}} = |E Π_{i,j} f(xᵢ, yⱼ)|^{1/kℓ}` for even `k, ℓ`.
pub fn grid_norm(f: &FunctionTable2, k: usize, l: usize) -> Result<NormValue> {
    check_even(k, l)?;
    let (rows, cols) = (f.rows(), f.cols());
    let raw = if l == 2 && (cols * cols) as f64 * rows as f64 <= (rows as f64).powi(k as i32) * cols as f64 {
        // Gram form: M(y, y') = E_x f(x,y) f(x,y').
        let mut acc = Accumulator::new();
        for y in 0..cols {
            for y2 in 0..cols {
                let m = mean((0..rows).map(|x| f.get(x, y) * f.get(x, y2)));
                acc.add(m.powi(k as i32));
            }
        }
        acc.value() / (cols * cols) as f64
    } else {
        let fm = vec![vec![f; l]; k];
        grid_inner_product(&fm)?
    };
    Ok(NormValue::exact(raw, (k * l) as f64))
}

fn check_vs_tables(tables: &[&FunctionTable2], b: &[usize], bp: &[usize]) -> Result<usize> {
    let n = tables.first().map(|t| t.rows()).ok_or_else(|| Error::Shape("no tables".into()))?;
    if tables.iter().any(|t| !t.is_torus() || t.rows() != n) {
        return Err(Error::DomainMismatch("vertical-segment tables must share one torus".into()));
    }
    if b.is_empty() || bp.is_empty() {
        return Err(Error::Precondition("B and B' must be nonempty".into()));
    }
    if b.iter().chain(bp).any(|&v| v >= n) {
        return Err(Error::DomainMismatch(format!("index set element outside Z/{n}Z")));
    }
    Ok(n)
}

/// `F(s, s') = E_{a∈B', y∈B} f(a, y+s) g(a, y+s')` as a `|B'| × |B'|` matrix.
pub fn vs_kernel(f: &FunctionTable2, g: &FunctionTable2, b: &[usize], bp: &[usize]) -> Result<Vec<f64>> {
    let n = check_vs_tables(&[f, g], b, bp)?;
    let m = bp.len();
    let mut out = vec![0.0; m * m];
    for (i, &s) in bp.iter().enumerate() {
        for (j, &s2) in bp.iter().enumerate() {
            let mut acc = Accumulator::new();
            for &a in bp {
                for &y in b {
                    acc.add(f.get(a, (y + s) % n) * g.get(a, (y + s2) % n));
                }
            }
            out[i * m + j] = acc.value() / (m * b.len()) as f64;
        }
    }
    Ok(out)
}

/// `⟨f₁..f_r, g₁..g_r⟩_{VS(B,B')} = E_{s,s'∈B'} Πᵢ Fᵢ(s, s')`.
pub fn vs_inner_product(
    fs: &[&FunctionTable2],
    gs: &[&FunctionTable2],
    b: &[usize],
    bp: &[usize],
) -> Result<f64> {
    if fs.len() != gs.len() || fs.is_empty() {
        return Err(Error::Shape(format!("need r ≥ 1 matching tables, got {} and {}", fs.len(), gs.len())));
    }
    let kernels = fs
        .iter()
        .zip(gs)
        .map(|(f, g)| vs_kernel(f, g, b, bp))
        .collect::<Result<Vec<_>>>()?;
    let m2 = bp.len() * bp.len();
    Ok(mean((0..m2).map(|p| kernels.iter().map(|k| k[p]).product::<f64>())))
}

/// `‖f‖_{VS_r(B,B')}`, the `2r`-th root of the inner product of `2r` copies.
pub fn vs_norm(f: &FunctionTable2, r: u32, b: &[usize], bp: &[usize]) -> Result<NormValue> {
    if r == 0 {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let k = vs_kernel(f, f, b, bp)?;
    let raw = mean(k.into_iter().map(|v| v.powi(r as i32)));
    Ok(NormValue::exact(raw, 2.0 * r as f64))
}

/// `F((a, y), z) = f(a, y + z)` on `(B' × B) × B'`; row index `i_a |B| + i_y`.
pub fn vs_to_grid_lift(f: &FunctionTable2, b: &[usize], bp: &[usize]) -> Result<FunctionTable2> {
    let n = check_vs_tables(&[f], b, bp)?;
    FunctionTable2::from_fn(bp.len() * b.len(), bp.len(), |row, z| {
        let (a, y) = (bp[row / b.len()], b[row % b.len()]);
        f.get(a, (y + bp[z]) % n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rand_table(rng: &mut ChaCha8Rng, r: usize, c: usize) -> FunctionTable2 {
        FunctionTable2::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn u2_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = rand_vec(&mut rng, 16);
        let n = 16;
        let mut s = 0.0;
        for x in 0..n {
            for a in 0..n {
                for b in 0..n {
                    s += f[x] * f[(x + a) % n] * f[(x + b) % n] * f[(x + a + b) % n];
                }
            }
        }
        let v = u2_norm(&f).unwrap();
        assert!((v.raw - s / (n * n * n) as f64).abs() < 1e-12);
        assert!((km_norm(&f, 2).unwrap().value - v.value).abs() < 1e-12);
        let mut single = vec![0.0; 8];
        single[3] = 1.0;
        assert!((u2_norm(&single).unwrap().value - (8f64).powf(-0.75)).abs() < 1e-15);
        assert!((u2_norm(&[0.3; 5]).unwrap().value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn km_r3_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 6;
        let f = rand_vec(&mut rng, n);
        let mut acc = 0.0;
        for_each_tuple(n, 6, |v| {
            let (x, a1, a2) = (v[0], v[1], v[2]);
            acc += v[3..]
                .iter()
                .map(|&b| f[(x + a1 + b) % n] * f[(x + a2 + b) % n])
                .product::<f64>();
        });
        let raw = acc / (n as f64).powi(6);
        assert!((km_norm(&f, 3).unwrap().raw - raw).abs() < 1e-12);
    }

    #[test]
    fn directional_matches_enumeration_and_vertical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let f = rand_table(&mut rng, n, n);
        let all: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
        let vert: Vec<(usize, usize)> = (0..n).map(|b| (0, b)).collect();
        let mut acc = 0.0;
        for &(x, y) in &all {
            for &(p, q) in &all {
                for &(u, v) in &vert {
                    acc += f.get(x, y)
                        * f.get((x + p) % n, (y + q) % n)
                        * f.get((x + u) % n, (y + v) % n)
                        * f.get((x + p + u) % n, (y + q + v) % n);
                }
            }
        }
        let raw = acc / (n.pow(5)) as f64;
        assert!((directional_norm_raw(&f, &all, &vert).unwrap().raw - raw).abs() < 1e-12);
        assert!((directional_norm_vertical(&f).unwrap().raw - raw).abs() < 1e-12);
        assert!(directional_norm_raw(&f, &[(0, 0), (0, 1)], &vert).is_err());
        let pm = FunctionTable2::torus(n, |x, y| if (x + y) % 3 == 0 { 1.0 } else { -1.0 }).unwrap();
        assert!((directional_norm_raw(&pm, &[(0, 0)], &[(0, 0)]).unwrap().raw - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_norm_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = rand_table(&mut rng, 5, 4);
        let mut acc = 0.0;
        for_each_tuple(5, 2, |xs| {
            for_each_tuple(4, 2, |ys| {
                acc += xs.iter().map(|&x| ys.iter().map(|&y| f.get(x, y)).product::<f64>()).product::<f64>();
            })
        });
        let raw = acc / 400.0;
        assert!((grid_norm(&f, 2, 2).unwrap().raw - raw).abs() < 1e-12);
        let via_product = grid_inner_product(&[vec![&f, &f], vec![&f, &f]]).unwrap();
        assert!((via_product - raw).abs() < 1e-12);
        assert!(grid_norm(&f, 3, 2).is_err());
        // Product functions separate.
        let u = [0.5, 1.0, 0.2];
        let v = [0.3, 0.9];
        let p = FunctionTable2::from_fn(3, 2, |x, y| u[x] * v[y]).unwrap();
        let (k, l) = (4, 2);
        let expect = mean(u.iter().map(|a: &f64| a.powi(l))).powf(1.0 / l as f64)
            * mean(v.iter().map(|a: &f64| a.powi(k))).powf(1.0 / k as f64);
        assert!((grid_norm(&p, k as usize, l as usize).unwrap().value - expect).abs() < 1e-12);
    }

    #[test]
    fn vs_matches_six_fold_loop_and_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 7;
        let b = [0, 1, 6];
        let bp = [0, 2];
        let f: Vec<_> = (0..2).map(|_| rand_table(&mut rng, n, n)).collect();
        let g: Vec<_> = (0..2).map(|_| rand_table(&mut rng, n, n)).collect();
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for &y1 in &b {
            for &y2 in &b {
                for &a1 in &bp {
                    for &a2 in &bp {
                        for &s in &bp {
                            for &s2 in &bp {
                                acc += f[0].get(a1, (y1 + s) % n)
                                    * g[0].get(a1, (y1 + s2) % n)
                                    * f[1].get(a2, (y2 + s) % n)
                                    * g[1].get(a2, (y2 + s2) % n);
                                cnt += 1.0;
                            }
                        }
                    }
                }
            }
        }
        let got = vs_inner_product(&[&f[0], &f[1]], &[&g[0], &g[1]], &b, &bp).unwrap();
        assert!((got - acc / cnt).abs() < 1e-12);
        let lifted = vs_to_grid_lift(&f[0], &b, &bp).unwrap();
        for r in [2u32, 4] {
            let a = vs_norm(&f[0], r, &b, &bp).unwrap().value;
            let c = grid_norm(&lifted, r as usize, 2).unwrap().value;
            assert!((a - c).abs() < 1e-9, "{a} vs {c}");
        }
        assert!(vs_inner_product(&[&f[0]], &[&g[0], &g[1]], &b, &bp).is_err());
    }

    #[test]
    fn homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = rand_vec(&mut rng, 9);
        let t = rand_table(&mut rng, 9, 9);
        let b = [0, 1, 8];
        for c in [-2.0, 0.0, 3.0] {
            let fc: Vec<f64> = f.iter().map(|v| c * v).collect();
            let tc = t.scaled(c).unwrap();
            let abs: f64 = f64::abs(c);
            assert!((u2_norm(&fc).unwrap().value - abs * u2_norm(&f).unwrap().value).abs() < 1e-12);
            assert!((km_norm(&fc, 3).unwrap().value - abs * km_norm(&f, 3).unwrap().value).abs() < 1e-12);
            assert!((grid_norm(&tc, 2, 4).unwrap().value - abs * grid_norm(&t, 2, 4).unwrap().value).abs() < 1e-12);
            assert!((vs_norm(&tc, 2, &b, &b).unwrap().value - abs * vs_norm(&t, 2, &b, &b).unwrap().value).abs() < 1e-12);
        }
    }
}
