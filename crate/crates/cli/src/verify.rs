use anyhow::Result;
use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use skewcorner::bohr::{build_bohr, check_structure, find_regular_dilate, BohrSet};
use skewcorner::lab::{
    binomial_sum_check, check_gowers_holder_i, check_gowers_holder_ii, check_grid_gcs, check_skew_control,
    check_u2_control, InequalityVerdict,
};
use skewcorner::table::FunctionTable2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Binomial,
    U2Control,
    GowersHolder,
    GridGcs,
    SkewControl,
    BohrStructure,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyParams {
    pub family: Family,
    pub r: Option<u64>,
    pub eps: Option<f64>,
    pub r_prime: Option<u64>,
    pub k: usize,
    pub l: usize,
    pub instances: usize,
    pub size: Option<usize>,
    pub seed: u64,
}

fn unit_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<FunctionTable2> {
    Ok(FunctionTable2::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))?)
}

fn random_bohr(rng: &mut ChaCha8Rng, n: usize, max_rank: usize) -> Result<BohrSet> {
    let d = rng.gen_range(0..=max_rank);
    let freqs: Vec<i64> = (0..d).map(|_| rng.gen_range(1..n as i64)).collect();
    Ok(build_bohr(n, freqs, rng.gen_range(0.05..=1.0))?)
}

fn binomial(p: &VerifyParams) -> Result<Vec<InequalityVerdict>> {
    let mut out = Vec::new();
    if let (Some(r), Some(eps), Some(rp)) = (p.r, p.eps, p.r_prime) {
        out.push(binomial_sum_check(r, rp, eps)?.verdict);
        return Ok(out);
    }
    // Sweep whatever was not pinned down.
    let rs = p.r.map_or(vec![2, 4, 8], |r| vec![r]);
    let es = p.eps.map_or(vec![1.0, 0.5, 0.25, 0.125], |e| vec![e]);
    for &r in &rs {
        for &eps in &es {
            let base = (2.0 * r as f64 / eps).ceil() as u64;
            let rps = p.r_prime.map_or(vec![base, base + 2, 64.max(r)], |v| vec![v]);
            for rp in rps {
                out.push(binomial_sum_check(r, rp, eps)?.verdict);
            }
        }
    }
    Ok(out)
}

pub fn run(p: &VerifyParams) -> Result<Vec<InequalityVerdict>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut out = Vec::new();
    match p.family {
        Family::Binomial => return binomial(p),
        Family::U2Control => {
            for i in 0..p.instances {
                let n = p.size.unwrap_or_else(|| 2 * rng.gen_range(1..=12) + 1);
                let f: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
                out.push(check_u2_control(&f[0], &f[1], &f[2])?.with_instance(format!("seed={} #{i} N={n}", p.seed)));
            }
        }
        Family::GowersHolder => {
            let r = p.r.unwrap_or(2) as usize;
            for i in 0..p.instances {
                let n = p.size.unwrap_or_else(|| rng.gen_range(4..=10));
                let fs: Vec<FunctionTable2> = (0..r).map(|_| unit_table(&mut rng, n, n)).collect::<Result<_>>()?;
                let gs: Vec<FunctionTable2> = (0..r).map(|_| unit_table(&mut rng, n, n)).collect::<Result<_>>()?;
                let b = random_bohr(&mut rng, n, 2)?;
                let bp = random_bohr(&mut rng, n, 2)?;
                let (fr, gr): (Vec<&FunctionTable2>, Vec<&FunctionTable2>) = (fs.iter().collect(), gs.iter().collect());
                let tag = format!("seed={} #{i} N={n}", p.seed);
                out.push(check_gowers_holder_i(&fr, &gr, b.elements(), bp.elements())?.with_instance(&tag));
                out.push(check_gowers_holder_ii(&fr, &gr, b.elements(), bp.elements())?.with_instance(&tag));
            }
        }
        Family::GridGcs => {
            for i in 0..p.instances {
                let rows = p.size.unwrap_or_else(|| rng.gen_range(2..=5));
                let cols = p.size.unwrap_or_else(|| rng.gen_range(2..=5));
                let tables: Vec<Vec<FunctionTable2>> = (0..p.k)
                    .map(|_| (0..p.l).map(|_| unit_table(&mut rng, rows, cols)).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                let fm: Vec<Vec<&FunctionTable2>> = tables.iter().map(|row| row.iter().collect()).collect();
                out.push(check_grid_gcs(&fm)?.with_instance(format!("seed={} #{i}", p.seed)));
            }
        }
        Family::SkewControl => {
            for _ in 0..p.instances {
                let n = p.size.unwrap_or_else(|| rng.gen_range(3..=9));
                let t: Vec<FunctionTable2> = (0..3).map(|_| unit_table(&mut rng, n, n)).collect::<Result<_>>()?;
                out.extend(check_skew_control(&t[0], &t[1], &t[2])?.verdicts);
            }
        }
        Family::BohrStructure => {
            for i in 0..p.instances {
                let n = p.size.unwrap_or_else(|| rng.gen_range(2..=128));
                let b = random_bohr(&mut rng, n, 3)?;
                let (d1, d2) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
                let s = check_structure(&b, d1, d2)?;
                let tag = format!("seed={} #{i} {}", p.seed, serde_json::to_string(&b.descriptor())?);
                let fails = |ok: bool| if ok { 0.0 } else { 1.0 };
                out.push(InequalityVerdict::new("sumset_containment", fails(s.containment), 0.0).with_instance(&tag));
                let mut size = InequalityVerdict::at_least("size_estimate", s.size as f64, s.size_bound);
                size.holds = s.size_ok;
                out.push(size.with_instance(&tag));
                out.push(InequalityVerdict::new("doubling", s.doubled_size as f64, s.doubling_bound).with_instance(&tag));
                let found = find_regular_dilate(&b).is_ok();
                out.push(InequalityVerdict::new("regular_dilate_found", fails(found), 0.0).with_instance(&tag));
            }
        }
    }
    Ok(out)
}
