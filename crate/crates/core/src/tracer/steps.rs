use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    fin, Columns, Flow, Frame, IncrementConstants, IncrementOutcome, IncrementWitness, StepReport, MAX_EXPANDED_R,
};
use crate::bohr::{largest_regular_radius, translate_average, BohrSet};
use crate::error::Result;
use crate::lab::{ap_search, binomial_sum_check, ApInstance, InequalityVerdict};
use crate::norms::vs_norm;
use crate::table::FunctionTable2;

/// Outputs of Step 2 consumed by later steps.
#[derive(Clone, Debug)]
pub struct Step2 {
    pub x0: usize,
    pub s0: usize,
    pub t0: usize,
    pub mu: f64,
    pub b_mu: BohrSet,
    pub delta_mu: f64,
    /// `K₁(s, s') = E_{a∈B_μ, y∈B} bal(x₀+a, y+s) bal(x₀+a, y+s')`, row-major over `B_μ`.
    pub k1: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Step4 {
    pub y0p: usize,
    pub d: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub nu: f64,
    pub b_nu: BohrSet,
}

#[derive(Clone, Debug)]
pub struct Step5 {
    pub y: Vec<usize>,
    pub b_prime: BohrSet,
}

/// Steps 2–6 over a regularized [`Frame`].
pub struct Tracer<'a> {
    frame: &'a Frame,
    consts: &'a IncrementConstants,
    cols: Columns,
    b_lambda: BohrSet,
}

#[derive(Clone, Debug, Default)]
struct Partial {
    h: f64,
    chi: u64,
    bal3: f64,
    count: u128,
    avg1: f64,
    avg2: f64,
    avg3: f64,
    k_pow: f64,
}

/// Sums of the Step 2 scan over `x ∈ B_λ, s, t ∈ B_μ` (and `a ∈ B_μ`, `y ∈ B`).
#[derive(Clone, Debug)]
struct Scan {
    h: Vec<f64>,
    chi_mean: f64,
    bal3: f64,
    count: u128,
    avg1: f64,
    avg2: f64,
    avg3: f64,
    k_pow_mean: f64,
}

fn first_max<T: Copy>(items: impl IntoIterator<Item = (T, f64)>) -> Option<(T, f64)> {
    let mut best: Option<(T, f64)> = None;
    for (k, v) in items {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    crate::sum::mean(v)
}

fn as_i64(v: &[usize]) -> Vec<i64> {
    v.iter().map(|&x| x as i64).collect()
}

impl<'a> Tracer<'a> {
    pub fn new(frame: &'a Frame, consts: &'a IncrementConstants) -> Result<Self> {
        consts.validate()?;
        let cols = Columns::new(&frame.a, &frame.x, &frame.b);
        Ok(Self { frame, consts, cols, b_lambda: frame.b_lambda() })
    }

    fn n(&self) -> usize {
        self.frame.modulus()
    }

    fn rank(&self) -> f64 {
        self.frame.b.rank() as f64
    }

    fn scan(&self, b_mu: &BohrSet, r: i32) -> Scan {
        let n = self.n();
        let bm = b_mu.elements();
        let m = bm.len() as f64;
        let blen = self.cols.b_len() as f64;
        let cols = &self.cols;
        let parts: Vec<Partial> = self
            .b_lambda
            .elements()
            .par_iter()
            .map(|&x| {
                let mut p = Partial::default();
                for &s in bm {
                    for &t in bm {
                        let chi = cols.x((x + s + n - t) % n);
                        let (mut k, mut cnt, mut v2, mut c2, mut c3) = (0.0, 0u64, 0.0, 0.0, 0.0);
                        for &a in bm {
                            let c = x + a;
                            let at = a + t;
                            k += cols.cbal(c, s, at);
                            if chi {
                                let w = cols.vd(c);
                                cnt += cols.cnt(c, s, at) as u64;
                                v2 += w * w;
                                c2 += cols.col(c, s) as f64 * w;
                                c3 += cols.col(c, at) as f64 * w;
                            }
                        }
                        k /= m;
                        let kr = k.powi(r);
                        p.h += kr;
                        p.k_pow += kr.abs();
                        if chi {
                            p.chi += 1;
                            p.bal3 += k;
                            p.count += cnt as u128;
                            p.avg1 += v2 / m;
                            p.avg2 += c2 / (m * blen);
                            p.avg3 += c3 / (m * blen);
                        }
                    }
                }
                p
            })
            .collect();
        let total = parts.len() as f64 * m * m;
        let sum = |f: fn(&Partial) -> f64| crate::sum::sum(parts.iter().map(f)) / total;
        Scan {
            h: parts.iter().map(|p| p.h / (m * m)).collect(),
            chi_mean: parts.iter().map(|p| p.chi).sum::<u64>() as f64 / total,
            bal3: sum(|p| p.bal3),
            count: parts.iter().map(|p| p.count).sum(),
            avg1: sum(|p| p.avg1),
            avg2: sum(|p| p.avg2),
            avg3: sum(|p| p.avg3),
            k_pow_mean: sum(|p| p.k_pow),
        }
    }

    /// The three averages bounding simpler configurations, against
    /// `(10/9)α²δ²` and `(8/9)α²δ²` (reports).
    pub fn claim_bounds(&self, b_mu: &BohrSet) -> StepReport {
        let s = self.scan(b_mu, 2);
        self.claim_report(&s)
    }

    fn claim_report(&self, s: &Scan) -> StepReport {
        let (alpha, delta) = (self.frame.alpha, self.frame.delta);
        let target = alpha * alpha * delta * delta;
        let mut rep = StepReport::new("claim_bounds");
        rep.measure("avg_vd_squared", s.avg1);
        rep.measure("avg_shift_s", s.avg2);
        rep.measure("avg_shift_a_t", s.avg3);
        rep.check(InequalityVerdict::new("avg_vd_squared", s.avg1, 10.0 / 9.0 * target).soft());
        rep.check(InequalityVerdict::at_least("avg_shift_s", s.avg2, 8.0 / 9.0 * target).soft());
        rep.check(InequalityVerdict::at_least("avg_shift_a_t", s.avg3, 8.0 / 9.0 * target).soft());
        rep.note("verdicts are reports: they rest on no-increment hypotheses that small N need not satisfy");
        rep
    }

    /// Finds the imbalance: exact corner average, the balanced-function
    /// average, the Hölder and Cauchy–Schwarz steps, `x₀, s₀, t₀`, `δ_μ` and
    /// `‖T_{(x₀,0)} bal‖^{2r}_{VS_r(B, B_μ)}`.
    pub fn step2_imbalance(&self) -> Result<(Vec<StepReport>, Flow<Step2>)> {
        let c = self.consts;
        let (alpha, delta) = (self.frame.alpha, self.frame.delta);
        let d = self.rank();
        let rho = self.frame.b.radius();
        let lambda = self.frame.lambda;
        let mut rep = StepReport::new("step2");
        let hi = (2.0 * c.kappa * lambda).min(lambda);
        let Some(radius) = largest_regular_radius(&self.frame.b, c.kappa * lambda * rho, hi * rho) else {
            rep.note("no regular B_μ with μ ∈ [κλ, 2κλ]");
            return Ok((vec![rep], Flow::Stop(IncrementOutcome::chain_break("step2", "no regular B_μ in the window"))));
        };
        let mu = if rho > 0.0 { radius / rho } else { hi };
        let b_mu = self.frame.b.with_radius(radius);
        rep.measure("mu", mu);
        rep.measure("bohr_mu_size", b_mu.len() as f64);
        let r = c.r as i32;
        let s = self.scan(&b_mu, r);
        let claim = self.claim_report(&s);

        let n = self.n();
        let bm = b_mu.elements();
        let m = bm.len();
        let mf = m as f64;
        let bl_len = self.b_lambda.len() as u128;
        let b_len = self.cols.b_len() as u128;
        let p_sk = s.count as f64 / (bl_len as f64 * b_len as f64 * mf * mf * mf);
        rep.measure("corner_average", p_sk);
        let mut v = InequalityVerdict::new("corner_average", p_sk, 1.0 / mf);
        v.holds = s.count <= bl_len * b_len * (m * m) as u128;
        let corners = crate::grid::count_skew_corners(&self.frame.a);
        rep.measure("skew_corners", corners as f64);
        if corners > 0 {
            v = v.soft().with_note("A has skew corners; the bound is only claimed for corner-free A");
        }
        rep.check(v);
        rep.measure("balanced_average", s.bal3);
        let identity = s.count as f64 / (bl_len as f64 * b_len as f64 * mf * mf * mf) - s.avg2 - s.avg3 + s.avg1;
        rep.check(InequalityVerdict::new("balanced_expansion", (s.bal3 - identity).abs(), 1e-9));
        rep.check(InequalityVerdict::at_least("balanced_average", s.bal3.abs(), 0.5 * alpha * alpha * delta * delta).soft());

        // Hölder with L^{r/(r−1)} and L^r on B_λ × B_μ × B_μ; χ is an indicator.
        let q = c.r as f64 / (c.r as f64 - 1.0);
        let chi_q = s.chi_mean.powf(1.0 / q);
        let chi_l1 = s.chi_mean;
        let chi_l2 = s.chi_mean.sqrt();
        rep.measure("chi_l1", chi_l1);
        rep.measure("chi_lq", chi_q);
        rep.check(InequalityVerdict::new("holder", s.bal3.abs(), chi_q * s.k_pow_mean.powf(1.0 / r as f64)));
        rep.check(InequalityVerdict::new("chi_l2_identity", (chi_l2 - chi_l1.sqrt()).abs(), 0.0));
        if chi_l1 > 0.0 {
            rep.check(InequalityVerdict::new("chi_log_convexity", chi_q, chi_l1 * (chi_l2 / chi_l1).powf(2.0 / c.r as f64)));
        }
        rep.check(InequalityVerdict::new("chi_lq_bound", chi_q, 4.0 * delta).soft());

        let mean_h = mean(s.h.iter().copied());
        rep.measure("holder_lifted_average", mean_h);
        rep.check(InequalityVerdict::at_least("holder_lifted_average", mean_h, (alpha * alpha * delta / 8.0).powi(r)).soft());
        let bl = self.b_lambda.elements();
        let (ix, h0) = first_max(s.h.iter().copied().enumerate()).expect("B_λ is nonempty");
        let x0 = bl[ix];
        rep.witness("x0", vec![x0 as i64]);
        rep.measure("h_x0", h0);
        rep.argmax("x0", h0, mean_h);

        let cols = &self.cols;
        let kernel = |u: &dyn Fn(usize) -> usize, v: &dyn Fn(usize) -> usize| -> Vec<f64> {
            let mut out = vec![0.0; m * m];
            for (i, &p) in bm.iter().enumerate() {
                for (j, &p2) in bm.iter().enumerate() {
                    out[i * m + j] = mean(bm.iter().map(|&a| cols.cbal(x0 + a, u(p) + v(a), u(p2) + v(a))));
                }
            }
            out
        };
        // K(x₀, s, t) = E_a Cbal_{x₀+a}(s, a+t).
        let mut kx0 = vec![0.0; m * m];
        for (i, &sv) in bm.iter().enumerate() {
            for (j, &tv) in bm.iter().enumerate() {
                kx0[i * m + j] = mean(bm.iter().map(|&a| cols.cbal(x0 + a, sv, a + tv)));
            }
        }
        let (kst, kmax) = first_max(kx0.iter().map(|v| v.abs()).enumerate()).expect("B_μ is nonempty");
        let (s0, t0) = (bm[kst / m], bm[kst % m]);
        rep.witness("s0", vec![s0 as i64]);
        rep.witness("t0", vec![t0 as i64]);
        rep.argmax("s0_t0", kmax.powi(r), h0);
        let x_density = |c: usize| bm.iter().filter(|&&a| cols.x(c + a)).count() as f64 / mf;
        let delta_mu = x_density(x0);
        rep.measure("delta_mu", delta_mu);
        rep.check(InequalityVerdict::new("kernel_support", kmax, delta_mu));
        rep.check(InequalityVerdict::at_least("delta_mu_lower", delta_mu, alpha * alpha * delta / 8.0).soft());
        rep.check(InequalityVerdict::new("delta_mu_upper", delta_mu, (1.0 + c.c2) * delta).soft());

        let k1 = kernel(&|p| p, &|_| 0);
        let k2 = kernel(&|p| p, &|a| a);
        let q1 = mean(k1.iter().map(|v| v.powi(r)));
        let q2 = mean(k2.iter().map(|v| v.powi(r)));
        rep.measure("vs_bal_norm", q1);
        rep.measure("shifted_factor", q2);
        rep.check(InequalityVerdict::new("cauchy_schwarz", h0 * h0, q1 * q2));
        rep.check(InequalityVerdict::new("change_of_variables", (q2 - q1).abs(), 50.0 * mu * (r as f64).powi(2) * d).soft());
        rep.check(InequalityVerdict::at_least("imbalance", q1, (alpha * alpha * delta / 16.0).powi(r)).soft());

        let bal = FunctionTable2::torus(n, |i, j| {
            let c = (x0 + i) % n;
            cols.a(c, j) as u8 as f64 - cols.vd(c)
        })?;
        let independent = vs_norm(&bal, c.r as u32, self.frame.b.elements(), bm)?.raw;
        rep.check(InequalityVerdict::new("vs_norm_agreement", (independent - q1).abs(), 1e-9 * q1.abs().max(1.0)));
        if corners > 0 {
            rep.note("A contains skew corners; the imbalance chain does not apply");
        }
        let out = Step2 { x0, s0, t0, mu, b_mu, delta_mu, k1 };
        Ok((vec![claim, rep], Flow::Next(out)))
    }

    /// `Π_k` for every `k`, the binomial aggregation and the mixed-slot bound.
    pub fn step3_unbalance(&self, s2: &Step2) -> Result<(StepReport, Flow<()>)> {
        let c = self.consts;
        let mut rep = StepReport::new("step3");
        let rp = c.r_prime;
        if rp > MAX_EXPANDED_R {
            rep.note(format!("r' = {rp} is beyond the expanded range {MAX_EXPANDED_R}"));
            return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step3", "r' too large to expand"))));
        }
        let rpi = rp as i32;
        let (alpha, delta_mu, mu, d) = (self.frame.alpha, s2.delta_mu, s2.mu, self.rank());
        let bm = s2.b_mu.elements();
        let m = bm.len();
        let x0 = s2.x0;
        let cols = &self.cols;
        let blen = cols.b_len() as f64;
        let f_vv = mean(bm.iter().map(|&a| cols.vd(x0 + a).powi(2)));
        let f_bv: Vec<f64> = bm
            .iter()
            .map(|&sv| mean(bm.iter().map(|&a| (cols.col(x0 + a, sv) as f64 / blen - cols.vd(x0 + a)) * cols.vd(x0 + a))))
            .collect();
        let mut f_aa = vec![0.0; m * m];
        for (i, &sv) in bm.iter().enumerate() {
            for (j, &s2v) in bm.iter().enumerate() {
                f_aa[i * m + j] = mean(bm.iter().map(|&a| cols.cnt(x0 + a, sv, s2v) as f64 / blen));
            }
        }
        let split_err = (0..m * m)
            .map(|p| (f_aa[p] - (s2.k1[p] + f_bv[p / m] + f_bv[p % m] + f_vv)).abs())
            .fold(0.0, f64::max);
        rep.check(InequalityVerdict::new("kernel_split", split_err, 1e-9));
        rep.measure("f_vv", f_vv);

        let pi: Vec<f64> = (0..=rpi).map(|k| mean(s2.k1.iter().map(|v| v.powi(k))) * f_vv.powi(rpi - k)).collect();
        let min_pi = pi.iter().copied().fold(f64::INFINITY, f64::min);
        for (k, v) in pi.iter().enumerate() {
            rep.measure(&format!("pi_{k:04}"), *v);
        }
        rep.check(InequalityVerdict::at_least("pi_nonnegative", min_pi, -1e-12));
        let mut binom = 1.0f64;
        let mut aggregated = 0.0;
        for (k, v) in pi.iter().enumerate() {
            aggregated += binom * v;
            binom = binom * (rp - k as u64) as f64 / (k + 1) as f64;
        }
        let direct = mean(s2.k1.iter().map(|v| (v + f_vv).powi(rpi)));
        rep.measure("binomial_aggregate", aggregated);
        rep.check(InequalityVerdict::new("binomial_aggregate", (aggregated - direct).abs(), 1e-9 * direct.abs().max(1.0)));

        let norm_a = mean(f_aa.iter().map(|v| v.powi(rpi)));
        rep.measure("vs_indicator_norm", norm_a);
        let mixed = f_bv.iter().map(|v| v.abs()).fold(0.0, f64::max);
        rep.measure("mixed_slot_max", mixed);
        rep.check(InequalityVerdict::new("mixed_slot", mixed, 24.0 * d * mu).soft());
        rep.check(InequalityVerdict::new("mixed_total", (norm_a - aggregated).abs(), 4f64.powi(rpi) * 24.0 * d * mu).soft());

        let base = alpha.powi(2) * delta_mu;
        let mut short = 0usize;
        let mut k = c.r as usize;
        while k <= rp as usize {
            let bound = (1.0 / 32f64).powi(k as i32) * (1.0 - c.c1).powi(2 * rpi) * base.powi(rpi);
            if pi[k] < bound {
                short += 1;
            }
            k += 2;
        }
        rep.measure("pi_below_lower_bound", short as f64);
        rep.check(InequalityVerdict::new("pi_lower_bounds", short as f64, 0.0).soft());
        if let Ok(bv) = binomial_sum_check(c.r, rp, 1.0 / 32.0) {
            rep.check(bv.verdict.soft());
        }
        rep.check(InequalityVerdict::at_least("indicator_norm", norm_a, (1.0f64 + 1.0 / 256.0).powi(rpi) * base.powi(rpi)).soft());
        Ok((rep, Flow::Next(())))
    }

    /// Picks `y'₀`, builds `D`, selects `(aᵢ, tᵢ)` and materializes `Y`, `Z`.
    pub fn step4_sift(&self, s2: &Step2) -> Result<(StepReport, Flow<Step4>)> {
        let c = self.consts;
        let mut rep = StepReport::new("step4");
        let rp = c.r_prime;
        if rp > MAX_EXPANDED_R {
            return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step4", "r' too large to expand"))));
        }
        let rpi = rp as i32;
        let n = self.n();
        let (alpha, delta_mu) = (self.frame.alpha, s2.delta_mu);
        let cols = &self.cols;
        let blen = cols.b_len() as f64;
        let bm = s2.b_mu.elements();
        let m = bm.len();
        let x0 = s2.x0;
        let p = |y: usize, yp: usize| mean(bm.iter().map(|&a| cols.cnt(x0 + a, y, yp) as f64 / blen));
        let col_means: Vec<f64> = bm.iter().map(|&yp| mean(bm.iter().map(|&y| p(y, yp).powi(rpi)))).collect();
        let norm_a = mean(col_means.iter().copied());
        let (iy, best) = first_max(col_means.iter().copied().enumerate()).expect("B_μ is nonempty");
        let y0p = bm[iy];
        rep.witness("y0_prime", vec![y0p as i64]);
        rep.argmax("y0_prime", best, norm_a);

        let threshold = (1.0 + 1.0 / 512.0) * alpha * alpha * delta_mu;
        let pv: Vec<f64> = bm.iter().map(|&y| p(y, y0p)).collect();
        let d_set: Vec<usize> = bm.iter().zip(&pv).filter(|(_, &v)| v >= threshold).map(|(&y, _)| y).collect();
        rep.measure("d_relative_size", d_set.len() as f64 / m as f64);
        rep.witness("d", as_i64(&d_set));
        let in_d: Vec<bool> = {
            let mut v = vec![false; n];
            for &y in &d_set {
                v[y] = true;
            }
            v
        };
        let over_d: f64 = bm.iter().zip(&pv).filter(|(&y, _)| in_d[y]).map(|(_, v)| v.powi(rpi)).sum();
        let over_all: f64 = pv.iter().map(|v| v.powi(rpi)).sum();
        rep.check(
            InequalityVerdict::at_least(
                "sifting",
                over_d - (1.0 - c.c3) * over_all,
                alpha.powi(2 * rpi) * delta_mu.powi(rpi) * m as f64,
            )
            .soft(),
        );

        let nu_star = c.nu_ratio * s2.mu;
        let rho = self.frame.b.radius();
        let Some(radius) = largest_regular_radius(&self.frame.b, nu_star * rho / 2.0, nu_star * rho) else {
            rep.note("no regular B_ν in the window");
            return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step4", "no regular B_ν in the window"))));
        };
        let nu = if rho > 0.0 { radius / rho } else { nu_star };
        let b_nu = self.frame.b.with_radius(radius);
        rep.measure("nu", nu);
        rep.measure("bohr_nu_size", b_nu.len() as f64);
        let bn = b_nu.elements();

        // Conditional expectations over (aᵢ, tᵢ) ∈ B_μ × B: the weight of an
        // active (y, z) is w(y, z) Πᵢ 1_A(x₀+aᵢ, tᵢ+y) 1_A(x₀+aᵢ, y'₀+tᵢ+z),
        // and each free pair contributes a factor g(y, z).
        let g = |y: usize, z: usize| mean(bm.iter().map(|&a| cols.cnt(x0 + a, y, y0p + z) as f64 / blen));
        let mut active: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(m * bn.len());
        for &y in bm {
            for &z in bn {
                let w = in_d[(y + n - z) % n] as u8 as f64 - (1.0 - c.c3);
                active.push((y, z, w, g(y, z)));
            }
        }
        let total = (m * bn.len()) as f64;
        let phi = |act: &[(usize, usize, f64, f64)], free: i32| -> f64 {
            crate::sum::sum(act.iter().map(|&(_, _, w, gv)| w * gv.powi(free))) / total
        };
        let phi0 = phi(&active, rpi);
        rep.measure("selection_initial", phi0);
        rep.check(
            InequalityVerdict::at_least("selection_initial", phi0, 0.5 * alpha.powi(2 * rpi) * delta_mu.powi(rpi)).soft(),
        );
        let cands: Vec<(usize, usize)> =
            bm.iter().flat_map(|&a| self.frame.b.elements().iter().map(move |&t| (a, t))).collect();
        let mut pairs = Vec::with_capacity(rp as usize);
        let mut current = phi0;
        for j in 0..rpi {
            let free = rpi - j - 1;
            let values: Vec<f64> = cands
                .par_iter()
                .map(|&(a, t)| {
                    let col = x0 + a;
                    crate::sum::sum(
                        active
                            .iter()
                            .filter(|&&(y, z, _, _)| cols.a(col, t + y) && cols.a(col, y0p + t + z))
                            .map(|&(_, _, w, gv)| w * gv.powi(free)),
                    ) / total
                })
                .collect();
            let (ic, v) = first_max(values.iter().copied().enumerate()).expect("B_μ × B is nonempty");
            let (a, t) = cands[ic];
            rep.argmax(&format!("pair_{j:04}"), v, current);
            current = v;
            pairs.push((a, t));
            active.retain(|&(y, z, _, _)| cols.a(x0 + a, t + y) && cols.a(x0 + a, y0p + t + z));
        }
        rep.argmax("pairs_total", current, phi0);
        rep.witness("a_i", pairs.iter().map(|p| p.0 as i64).collect());
        rep.witness("t_i", pairs.iter().map(|p| p.1 as i64).collect());

        let y_set: Vec<usize> = bm
            .iter()
            .copied()
            .filter(|&y| pairs.iter().all(|&(a, t)| cols.a(x0 + a, y + t)))
            .collect();
        let z_set: Vec<usize> = bn
            .iter()
            .copied()
            .filter(|&z| pairs.iter().all(|&(a, t)| cols.a(x0 + a, y0p + t + z)))
            .collect();
        rep.witness("y", as_i64(&y_set));
        rep.witness("z", as_i64(&z_set));
        let beta = y_set.len() as f64 / m as f64;
        let gamma = z_set.len() as f64 / bn.len() as f64;
        rep.measure("beta", beta);
        rep.measure("gamma", gamma);
        let joint = joint_density(&y_set, &z_set, &in_d, n, 0) / total;
        rep.measure("joint_density", joint);
        rep.check(InequalityVerdict::at_least("joint_density", joint, (1.0 - c.c3) * beta * gamma).soft());
        let floor = 0.5 * alpha.powi(2 * rpi) * delta_mu.powi(rpi);
        rep.check(InequalityVerdict::at_least("beta_floor", beta, floor).soft());
        rep.check(InequalityVerdict::at_least("gamma_floor", gamma, floor).soft());
        rep.check(InequalityVerdict::at_least("d_floor", d_set.len() as f64 / m as f64, floor).soft());
        if y_set.is_empty() || z_set.is_empty() || d_set.is_empty() {
            return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step4", "Y, Z or D is empty"))));
        }
        let out = Step4 { y0p, d: d_set, pairs, y: y_set, z: z_set, nu, b_nu };
        Ok((rep, Flow::Next(out)))
    }

    /// Trims `Y` to `|D|` elements and searches for `B'` by almost-periodicity.
    pub fn step5_ap(&self, s2: &Step2, s4: &Step4) -> Result<(StepReport, Flow<Step5>)> {
        let c = self.consts;
        let n = self.n();
        let mut rep = StepReport::new("step5");
        let in_d = mask(&s4.d, n);
        let total = (s2.b_mu.len() * s4.b_nu.len()) as f64;
        let ratio = |y: &[usize]| {
            let beta_gamma = (y.len() * s4.z.len()) as f64 / total;
            joint_density(y, &s4.z, &in_d, n, 0) / total / beta_gamma
        };
        let before = ratio(&s4.y);
        let y = if s4.y.len() > s4.d.len() {
            let score = |y: usize| s4.z.iter().filter(|&&z| in_d[(y + n - z) % n]).count();
            let mut chosen = match c.y_prime_seed {
                Some(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    s4.y.choose_multiple(&mut rng, s4.d.len()).copied().collect::<Vec<_>>()
                }
                None => {
                    let mut ranked: Vec<(usize, usize)> = s4.y.iter().map(|&y| (score(y), y)).collect();
                    ranked.sort_by(|p, q| q.0.cmp(&p.0).then(p.1.cmp(&q.1)));
                    ranked.into_iter().take(s4.d.len()).map(|p| p.1).collect()
                }
            };
            chosen.sort_unstable();
            let after = ratio(&chosen);
            let v = InequalityVerdict::at_least("trim_ratio", after, before - 1e-12);
            rep.check(if c.y_prime_seed.is_some() { v.soft().with_note("random subset") } else { v });
            chosen
        } else {
            rep.note("|Y| ≤ |D|: no trimming");
            s4.y.clone()
        };
        rep.witness("y_trimmed", as_i64(&y));
        let beta = y.len() as f64 / s2.b_mu.len() as f64;
        let gamma = s4.z.len() as f64 / s4.b_nu.len() as f64;
        rep.measure("beta_trimmed", beta);
        rep.check(InequalityVerdict::at_least("trimmed_joint", ratio(&y), 1.0 - c.c3).soft());

        // The almost-periodicity statement is phrased with 1_D(z − y + b);
        // here the sifted differences are y − z, so it is applied to −D.
        let neg_d: Vec<usize> = s4.d.iter().map(|&v| (n - v) % n).collect();
        let inst = ApInstance { b1: s2.b_mu.clone(), b2: s4.b_nu.clone(), y: y.clone(), z: s4.z.clone(), d: neg_d, eps: c.c3 };
        let radii: Vec<f64> = (0..c.ap_radius_steps.max(1)).map(|k| s4.b_nu.radius() / 2f64.powi(k as i32)).collect();
        let Some(hit) = ap_search(&inst, c.ap_max_extra, &radii)? else {
            rep.note("almost-periodicity search exhausted");
            return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step5", "no B' found by the almost-periodicity search"))));
        };
        rep.measure("candidates_scanned", hit.candidates_scanned as f64);
        rep.measure("bohr_prime_size", hit.bohr.len() as f64);
        rep.measure("bohr_prime_rank", hit.bohr.rank() as f64);
        rep.measure("bohr_prime_radius", hit.bohr.radius());
        rep.witness("extra_frequencies", as_i64(&hit.extra));
        rep.check(hit.verdict.clone());
        let bp = hit.bohr.elements();
        let mut acc = 0.0;
        for &w in bp {
            acc += joint_density(&y, &s4.z, &in_d, n, w);
        }
        let after = acc / bp.len() as f64 / total;
        rep.measure("joint_density_shifted", after);
        rep.check(InequalityVerdict::at_least("joint_density_shifted", after, (1.0 - 2.0 * c.c3) * beta * gamma).soft());
        let d = self.rank();
        let dprime = hit.extra.len() as f64;
        if d > 0.0 && dprime > 0.0 {
            let bound = s4.nu * self.frame.b.radius() * c.c3 * beta / (24.0 * d.powi(3) * dprime);
            rep.check(InequalityVerdict::at_least("bohr_prime_radius", hit.bohr.radius(), bound).soft());
        }
        Ok((rep, Flow::Next(Step5 { y, b_prime: hit.bohr })))
    }

    /// Selects `y₀, z₀, b₀`, builds `G, X̃, X̃', X̃''` and measures the
    /// conclusion.
    pub fn step6_complete(&self, s2: &Step2, s4: &Step4, s5: &Step5) -> Result<(StepReport, IncrementOutcome)> {
        let c = self.consts;
        let n = self.n();
        let cols = &self.cols;
        let blen = cols.b_len() as f64;
        let (alpha, delta_mu) = (self.frame.alpha, s2.delta_mu);
        let bm = s2.b_mu.elements();
        let bp = s5.b_prime.elements();
        let (x0, y0p) = (s2.x0, s4.y0p);
        let mut rep = StepReport::new("step6");
        let h: Vec<f64> = (0..n).map(|u| mean(bm.iter().map(|&a| cols.cnt(x0 + a, u, y0p) as f64 / blen))).collect();
        let q = |y: usize, z: usize| mean(bp.iter().map(|&w| h[(y + n - z + w) % n]));
        let grid: Vec<((usize, usize), f64)> =
            s5.y.iter().flat_map(|&y| s4.z.iter().map(move |&z| (y, z))).map(|(y, z)| ((y, z), q(y, z))).collect();
        let avg = mean(grid.iter().map(|p| p.1));
        let ((y0, z0), qmax) = first_max(grid.iter().copied()).expect("Y and Z are nonempty");
        rep.witness("y0", vec![y0 as i64]);
        rep.witness("z0", vec![z0 as i64]);
        rep.argmax("y0_z0", qmax, avg);
        rep.check(InequalityVerdict::at_least("y0_z0_density", qmax, (1.0 + 2f64.powi(-10)) * alpha * alpha * delta_mu).soft());

        let e = |b: usize| mean(bm.iter().map(|&a| cols.a(x0 + a, y0p + b) as u8 as f64));
        let shift = (y0 + n - z0) % n;
        let num = |b: usize| {
            mean(bm.iter().map(|&a| {
                if !cols.a(x0 + a, y0p + b) {
                    return 0.0;
                }
                mean(bp.iter().map(|&w| cols.a(x0 + a, shift + b + w) as u8 as f64))
            }))
        };
        let g_thr = 2f64.powi(-11) * alpha * alpha * delta_mu;
        let g_set: Vec<(usize, f64, f64)> = self
            .frame
            .b
            .elements()
            .iter()
            .map(|&b| (b, e(b)))
            .filter(|&(_, ev)| ev >= g_thr && ev > 0.0)
            .map(|(b, ev)| (b, ev, num(b)))
            .collect();
        rep.measure("g_size", g_set.len() as f64);
        rep.witness("g", g_set.iter().map(|p| p.0 as i64).collect());
        if g_set.is_empty() {
            return Ok((rep, IncrementOutcome::chain_break("step6", "G is empty")));
        }
        let pooled = g_set.iter().map(|p| p.2).sum::<f64>() / g_set.iter().map(|p| p.1).sum::<f64>();
        let (b0, ratio) = first_max(g_set.iter().map(|&(b, ev, nv)| (b, nv / ev))).expect("G is nonempty");
        rep.witness("b0", vec![b0 as i64]);
        rep.argmax("b0", ratio, pooled);
        rep.check(InequalityVerdict::at_least("b0_ratio", ratio, (1.0 + 2f64.powi(-12)) * alpha).soft());

        let x_tilde: Vec<usize> = bm.iter().map(|&a| (x0 + a) % n).filter(|&x| cols.a(x, y0p + b0)).collect();
        let delta_p = x_tilde.len() as f64 / bm.len() as f64;
        rep.measure("delta_prime", delta_p);
        rep.check(InequalityVerdict::at_least("delta_prime", delta_p, 2f64.powi(-11) * alpha * alpha * delta_mu).soft());
        let w0 = (shift + b0) % n;
        rep.witness("w0", vec![w0 as i64]);
        let col_density = |x: usize| mean(bp.iter().map(|&w| cols.a(x, w0 + w) as u8 as f64));
        let factor = 1.0 + c.increment;
        let x_tp: Vec<usize> = x_tilde.iter().copied().filter(|&x| col_density(x) >= factor * alpha).collect();
        rep.measure("x_tilde_prime_size", x_tp.len() as f64);
        rep.witness("x_tilde_prime", as_i64(&x_tp));
        rep.check(
            InequalityVerdict::at_least(
                "x_tilde_prime_size",
                x_tp.len() as f64,
                2f64.powi(-13) * alpha * delta_p * bm.len() as f64,
            )
            .soft(),
        );
        if x_tp.is_empty() {
            return Ok((rep, IncrementOutcome::chain_break("step6", "no column of X̃ gains density on w₀ + B'")));
        }
        let in_xtp = mask(&x_tp, n);
        let f = |a: usize| in_xtp[(x0 + a) % n] as u8 as f64;
        let lam = if s2.mu > 0.0 { s4.nu / s2.mu } else { 1.0 };
        let baseline = s2.b_mu.average(f);
        let t0 = match translate_average(f, &s2.b_mu, bp, lam, baseline / 2.0) {
            Ok(hit) => {
                rep.measure("translate_average", hit.average);
                (x0 + hit.t) % n
            }
            Err(err) => {
                rep.note(format!("translate lemma not applicable ({err}); using the densest translate"));
                let (t, _) = first_max((0..n).map(|t| (t, bp.iter().filter(|&&v| in_xtp[(t + v) % n]).count() as f64)))
                    .expect("N ≥ 1");
                t
            }
        };
        let x_pp: Vec<usize> = {
            let mut v: Vec<usize> = bp.iter().map(|&w| (t0 + w) % n).filter(|&x| in_xtp[x]).collect();
            v.sort_unstable();
            v
        };
        rep.witness("t0_final", vec![t0 as i64]);
        rep.witness("x_tilde_double_prime", as_i64(&x_pp));
        let delta_tilde = x_pp.len() as f64 / bp.len() as f64;
        rep.measure("delta_tilde", delta_tilde);
        rep.check(InequalityVerdict::at_least("delta_tilde", delta_tilde, 2f64.powi(-14) * alpha * delta_p).soft());
        if x_pp.is_empty() {
            return Ok((rep, IncrementOutcome::chain_break("step6", "X̃'' is empty")));
        }
        let hits: usize = x_pp.iter().map(|&x| bp.iter().filter(|&&w| cols.a(x, w0 + w)).count()).sum();
        let density = hits as f64 / (x_pp.len() * bp.len()) as f64;
        rep.measure("final_density", density);
        let size_bound = alpha.powf(c.big_c) * self.frame.input_delta * bp.len() as f64 / c.big_c;
        let v1 = InequalityVerdict::at_least("final_density", density, factor * alpha);
        let v2 = InequalityVerdict::at_least("final_size", x_pp.len() as f64, size_bound);
        let ok = v1.holds && v2.holds;
        rep.check(v1.soft());
        rep.check(v2.soft());
        if !ok {
            return Ok((rep, IncrementOutcome::chain_break("step6", "conclusion inequalities fail as measured")));
        }
        let shift_back = self.frame.shift;
        let columns: Vec<usize> = {
            let mut v: Vec<usize> = x_pp.iter().map(|&x| (x + shift_back) % n).collect();
            v.sort_unstable();
            v
        };
        Ok((
            rep,
            IncrementOutcome::DensityIncrement(IncrementWitness {
                bohr: s5.b_prime.descriptor(),
                x_translate: (t0 + shift_back) % n,
                y_translate: w0,
                columns,
                density,
                alpha,
                delta: self.frame.input_delta,
                factor,
                size_bound: fin(size_bound),
            }),
        ))
    }
}

fn mask(v: &[usize], n: usize) -> Vec<bool> {
    let mut m = vec![false; n];
    for &x in v {
        m[x % n] = true;
    }
    m
}

/// `Σ_{y∈Y, z∈Z} 1_D(y − z + w)`.
fn joint_density(y: &[usize], z: &[usize], in_d: &[bool], n: usize, w: usize) -> f64 {
    let mut k = 0usize;
    for &a in y {
        for &b in z {
            k += in_d[(a + n - b + w) % n] as usize;
        }
    }
    k as f64
}
