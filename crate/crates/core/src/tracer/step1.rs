use serde::{Deserialize, Serialize};

use super::{check_instance, Flow, IncrementConstants, IncrementOutcome, StepReport};
use crate::bohr::{certify_regular, BohrSet};
use crate::error::{Error, Result};
use crate::grid::{Domain, Point2, PointSet2};
use crate::lab::InequalityVerdict;

/// Bindings after regularization: `A ⊆ X × B` with `X ⊆ B_λ`, both shifted
/// by `(−shift, 0)`. The input is never mutated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub a: PointSet2,
    pub x: Vec<usize>,
    pub b: BohrSet,
    pub lambda: f64,
    pub shift: usize,
    /// Relative density of `A` in `X × B` before regularization.
    pub alpha: f64,
    /// `|X| / |B_λ|` for the regularized `X`.
    pub delta: f64,
    /// `|X| / |B|` before regularization.
    pub input_delta: f64,
}

impl Frame {
    /// The frame with no regularization applied (`λ = 1`, no shift).
    pub fn identity(a: &PointSet2, x: &[usize], b: &BohrSet) -> Result<Self> {
        let (alpha, delta) = check_instance(a, x, b)?;
        let mut xs = x.to_vec();
        xs.sort_unstable();
        xs.dedup();
        Ok(Self { a: a.clone(), x: xs, b: b.clone(), lambda: 1.0, shift: 0, alpha, delta, input_delta: delta })
    }

    pub fn b_lambda(&self) -> BohrSet {
        self.b.dilate(self.lambda)
    }

    pub fn modulus(&self) -> usize {
        self.b.modulus()
    }
}

fn count_in(mask: &[bool], t: usize, set: &BohrSet) -> usize {
    let n = mask.len();
    set.elements().iter().filter(|&&v| mask[(t + v) % n]).count()
}

/// Column partition `X₁/X₂/X₃` and the dilate descent.
pub fn step1_regularize(
    a: &PointSet2,
    x: &[usize],
    b: &BohrSet,
    consts: &IncrementConstants,
) -> Result<(StepReport, Flow<Frame>)> {
    let (alpha, delta) = check_instance(a, x, b)?;
    let n = b.modulus();
    let bl = b.len() as f64;
    let mut xs = x.to_vec();
    xs.sort_unstable();
    xs.dedup();
    let c1 = consts.c1;
    let hi = (1.0 + c1 * c1) * alpha * bl;
    let lo = (1.0 - c1) * alpha * bl;
    let (mut x1, mut x2, mut x3) = (Vec::new(), Vec::new(), Vec::new());
    for &c in &xs {
        let k = a.column_count(c as i64) as f64;
        if k >= hi {
            x1.push(c);
        } else if k >= lo {
            x2.push(c);
        } else {
            x3.push(c);
        }
    }
    let mut rep = StepReport::new("step1");
    rep.measure("alpha", alpha);
    rep.measure("delta", delta);
    rep.measure("x1_size", x1.len() as f64);
    rep.measure("x2_size", x2.len() as f64);
    rep.measure("x3_size", x3.len() as f64);
    rep.measure("threshold_high", hi);
    rep.measure("threshold_low", lo);
    rep.witness("x1", x1.iter().map(|&v| v as i64).collect());

    let x1_bound = c1 * c1 * alpha * xs.len() as f64;
    if x1.len() as f64 >= x1_bound && !x1.is_empty() {
        let pts: usize = x1.iter().map(|&c| a.column_count(c as i64)).sum();
        let density = pts as f64 / (x1.len() as f64 * bl);
        rep.measure("x1_density", density);
        rep.check(InequalityVerdict::at_least("x1_density", density, (1.0 + c1 * c1) * alpha));
        return Ok((rep, Flow::Stop(IncrementOutcome::Step1ColumnIncrement { columns: x1, density, alpha })));
    }
    rep.check(InequalityVerdict::at_least(
        "x2_size",
        x2.len() as f64,
        (c1 - c1 * c1) / (c1 + c1 * c1) * xs.len() as f64,
    ));
    if x2.is_empty() {
        return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step1", "X₂ is empty"))));
    }

    let mut mask = vec![false; n];
    for &c in &x2 {
        mask[c] = true;
    }
    let rho = b.radius();
    let mut levels: Vec<f64> = b.critical_values().to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut t, mut lambda) = (0usize, 1.0f64);
    let mut density = count_in(&mask, 0, b) as f64 / bl;
    rep.measure("x2_density_initial", density);
    let mut iters = 0;
    let mut capped = false;
    loop {
        if iters == consts.step1_max_iters {
            capped = true;
            break;
        }
        let top = lambda * rho;
        let bottom = consts.kappa * lambda * rho;
        // B_r is constant between consecutive critical values and a critical
        // value itself is never regular, so midpoints represent each set.
        let mut radii: Vec<f64> =
            levels.windows(2).map(|w| (w[0] + w[1]) / 2.0).filter(|&v| v >= bottom && v < top).collect();
        radii.push(top);
        radii.sort_by(|p, q| q.total_cmp(p));
        let mut best: Option<(f64, usize, f64)> = None;
        for &radius in &radii {
            if radius <= 0.0 && b.rank() > 0 {
                continue;
            }
            let cand = b.with_radius(radius);
            if !certify_regular(&cand).regular {
                continue;
            }
            let size = cand.len() as f64;
            for shift in 0..n {
                let dens = count_in(&mask, shift, &cand) as f64 / size;
                if dens >= (1.0 + consts.c2) * density && best.is_none_or(|(_, _, d)| dens > d) {
                    best = Some((radius, shift, dens));
                }
            }
        }
        let Some((radius, shift, dens)) = best else { break };
        iters += 1;
        t = shift;
        lambda = if rho > 0.0 { radius / rho } else { 1.0 };
        density = dens;
    }
    rep.measure("descent_steps", iters as f64);
    rep.measure("lambda", lambda);
    rep.witness("t", vec![t as i64]);
    if capped {
        rep.note(format!("descent stopped after {} iterations", consts.step1_max_iters));
    }
    rep.check(InequalityVerdict::at_least("lambda_floor", lambda, consts.kappa.powi(iters as i32)).soft());

    let b_lambda = b.dilate(lambda);
    let new_x: Vec<usize> = b_lambda.elements().iter().map(|&v| (t + v) % n).filter(|&c| mask[c]).collect();
    let mut shifted: Vec<usize> = new_x.iter().map(|&c| (c + n - t) % n).collect();
    shifted.sort_unstable();
    let pts: Vec<Point2> = a
        .points()
        .filter(|p| mask[p.x as usize] && b_lambda.contains((p.x as usize + n - t) % n))
        .map(|p| Point2 { x: ((p.x as usize + n - t) % n) as i64, y: p.y })
        .collect();
    let new_a = PointSet2::new(Domain::cyclic(n as u64), pts).map_err(|e| Error::Precondition(e.to_string()))?;
    let new_delta = shifted.len() as f64 / b_lambda.len() as f64;
    rep.measure("delta_regularized", new_delta);
    rep.check(InequalityVerdict::at_least("delta_regularized", new_delta, delta / 2.0).soft());
    if new_a.is_empty() {
        return Ok((rep, Flow::Stop(IncrementOutcome::chain_break("step1", "regularized A is empty"))));
    }
    let frame = Frame { a: new_a, x: shifted, b: b.clone(), lambda, shift: t, alpha, delta: new_delta, input_delta: delta };
    Ok((rep, Flow::Next(frame)))
}
