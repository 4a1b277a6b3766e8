//! Seeded Monte Carlo estimators.
//!
//! Samples are split into fixed-size shards; shard `i` draws from a ChaCha8
//! stream `i` keyed by the seed, and shard statistics are merged in shard
//! order. The estimate is therefore independent of the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{root, Method, NormValue};
use crate::error::{Error, Result};
use crate::table::FunctionTable2;

const SHARD: u64 = 1 << 14;

#[derive(Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = if d == 0.0 { self.mean } else { self.mean + d * o.n as f64 / n as f64 };
        let m2 = self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        Self { n, mean, m2 }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
    }
}

fn run<F>(samples: u64, seed: u64, p: f64, integrand: F) -> Result<NormValue>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let shards = samples.div_ceil(SHARD);
    let parts: Vec<Welford> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let mut w = Welford::default();
            for _ in s * SHARD..((s + 1) * SHARD).min(samples) {
                w.push(integrand(&mut rng));
            }
            w
        })
        .collect();
    let w = parts.into_iter().fold(Welford::default(), Welford::merge);
    Ok(NormValue {
        value: root(w.mean, p),
        raw: w.mean,
        method: Method::MonteCarlo,
        stderr: Some(w.stderr()),
        samples: Some(samples),
        seed: Some(seed),
    })
}

/// Estimates the Kelley–Meka average by sampling `x, a₁, a₂, b₁..b_r`.
pub fn mc_km_norm(f: &[f64], r: u32, samples: u64, seed: u64) -> Result<NormValue> {
    let n = f.len();
    if n == 0 || r == 0 {
        return Err(Error::InvalidParameter("need a nonempty table and r ≥ 1".into()));
    }
    run(samples, seed, 2.0 * r as f64, |rng| {
        let (x, a1, a2) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        (0..r)
            .map(|_| {
                let b = rng.gen_range(0..n);
                f[(x + a1 + b) % n] * f[(x + a2 + b) % n]
            })
            .product()
    })
}

/// Estimates the `U_{k,ℓ}` average by sampling `x₁..x_k, y₁..y_ℓ`.
pub fn mc_grid_norm(f: &FunctionTable2, k: usize, l: usize, samples: u64, seed: u64) -> Result<NormValue> {
    super::check_even(k, l)?;
    let (rows, cols) = (f.rows(), f.cols());
    run(samples, seed, (k * l) as f64, |rng| {
        let xs: Vec<usize> = (0..k).map(|_| rng.gen_range(0..rows)).collect();
        let ys: Vec<usize> = (0..l).map(|_| rng.gen_range(0..cols)).collect();
        xs.iter().map(|&x| ys.iter().map(|&y| f.get(x, y)).product::<f64>()).product()
    })
}

/// Estimates the vertical-segments inner product by sampling
/// `y₁..y_r ∈ B`, `a₁..a_r, s, s' ∈ B'`. The returned `value` is the
/// `2r`-th root of `|raw|`.
pub fn mc_vs_inner_product(
    fs: &[&FunctionTable2],
    gs: &[&FunctionTable2],
    b: &[usize],
    bp: &[usize],
    samples: u64,
    seed: u64,
) -> Result<NormValue> {
    if fs.len() != gs.len() || fs.is_empty() {
        return Err(Error::Shape("need r ≥ 1 matching tables".into()));
    }
    let all: Vec<&FunctionTable2> = fs.iter().chain(gs).copied().collect();
    let n = super::check_vs_tables(&all, b, bp)?;
    let r = fs.len();
    run(samples, seed, 2.0 * r as f64, |rng| {
        let s = bp[rng.gen_range(0..bp.len())];
        let s2 = bp[rng.gen_range(0..bp.len())];
        (0..r)
            .map(|i| {
                let a = bp[rng.gen_range(0..bp.len())];
                let y = b[rng.gen_range(0..b.len())];
                fs[i].get(a, (y + s) % n) * gs[i].get(a, (y + s2) % n)
            })
            .product()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{grid_norm, km_norm, vs_inner_product};

    #[test]
    fn constant_is_exact() {
        let one = FunctionTable2::constant(5, 5, 1.0).unwrap();
        let v = mc_grid_norm(&one, 2, 2, 1000, 3).unwrap();
        assert_eq!(v.raw, 1.0);
        assert_eq!(v.stderr, Some(0.0));
        let v = mc_km_norm(&[1.0; 7], 3, 40_000, 1).unwrap();
        assert_eq!((v.raw, v.stderr), (1.0, Some(0.0)));
    }

    #[test]
    fn close_to_exact_and_deterministic() {
        let f: Vec<f64> = (0..11).map(|i| ((i * 7) % 5) as f64 / 4.0 - 0.3).collect();
        let exact = km_norm(&f, 2).unwrap().raw;
        let est = mc_km_norm(&f, 2, 100_000, 42).unwrap();
        assert!((est.raw - exact).abs() <= 4.0 * est.stderr.unwrap());
        assert_eq!(est, mc_km_norm(&f, 2, 100_000, 42).unwrap());

        let t = FunctionTable2::torus(6, |x, y| ((x * 3 + y * 5) % 7) as f64 / 7.0 - 0.4).unwrap();
        let exact = grid_norm(&t, 2, 2).unwrap().raw;
        let est = mc_grid_norm(&t, 2, 2, 100_000, 7).unwrap();
        assert!((est.raw - exact).abs() <= 4.0 * est.stderr.unwrap());

        let b = [0, 1, 5];
        let bp = [0, 2, 4];
        let exact = vs_inner_product(&[&t, &t], &[&t, &t], &b, &bp).unwrap();
        let est = mc_vs_inner_product(&[&t, &t], &[&t, &t], &b, &bp, 100_000, 9).unwrap();
        assert!((est.raw - exact).abs() <= 4.0 * est.stderr.unwrap());
    }
}
