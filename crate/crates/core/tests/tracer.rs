use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewcorner::bohr::{build_bohr, largest_regular_radius, BohrSet};
use skewcorner::grid::{count_skew_corners, Domain, PointSet2};
use skewcorner::tracer::{
    iterate_theorem, run_increment, ConstantsOverride, IncrementTrace, Flow, Frame, IncrementConstants, IncrementOutcome, Tracer,
};

/// Columns `0, w, 2w, …` each holding `{0, …, w−1}`: skew-corner-free
/// because every vertical gap is below `w` and every column gap a multiple of `w`.
fn planted(n: usize, w: usize) -> (PointSet2, Vec<usize>) {
    let x: Vec<usize> = (0..n).step_by(w).collect();
    let pts: Vec<(i64, i64)> = x.iter().flat_map(|&c| (0..w).map(move |y| (c as i64, y as i64))).collect();
    (PointSet2::from_pairs(Domain::cyclic(n as u64), &pts).unwrap(), x)
}

fn regular(n: usize, freqs: &[i64], radius: f64) -> BohrSet {
    let b = build_bohr(n, freqs.iter().copied(), radius).unwrap();
    let r = largest_regular_radius(&b, radius / 2.0, radius).expect("a regular radius");
    b.with_radius(r)
}

fn random_set(rng: &mut ChaCha8Rng, x: &[usize], b: &BohrSet, p: f64) -> PointSet2 {
    let n = b.modulus() as u64;
    let mut pts = Vec::new();
    for &c in x {
        for &y in b.elements() {
            if rng.gen_bool(p) {
                pts.push((c as i64, y as i64));
            }
        }
    }
    if pts.is_empty() {
        pts.push((x[0] as i64, b.elements()[0] as i64));
    }
    PointSet2::from_pairs(Domain::cyclic(n), &pts).unwrap()
}

#[test]
fn planted_box_gives_increment() {
    let (a, x) = planted(48, 6);
    assert_eq!(count_skew_corners(&a), 0);
    let b = build_bohr(48, [], 1.0).unwrap();
    let trace = run_increment(&a, &x, &b, &ConstantsOverride::friendly()).unwrap();
    assert!(trace.hard_failures().is_empty(), "{:?}", trace.hard_failures());
    let IncrementOutcome::DensityIncrement(w) = &trace.outcome else { panic!("{:?}", trace.outcome) };
    assert!(w.density >= w.factor * w.alpha);
    // Re-measure the density from the witness.
    let bp = build_bohr(48, w.bohr.freqs.iter().copied(), w.bohr.radius).unwrap();
    let hits: usize = w
        .columns
        .iter()
        .map(|&c| bp.elements().iter().filter(|&&v| a.contains(c as i64, ((w.y_translate + v) % 48) as i64)).count())
        .sum();
    assert_eq!(hits as f64 / (w.columns.len() * bp.len()) as f64, w.density);
    assert!(w.columns.iter().all(|&c| bp.contains((c + 48 - w.x_translate) % 48)));
}

#[test]
fn corners_short_circuit() {
    let b = build_bohr(12, [], 1.0).unwrap();
    let a = PointSet2::from_pairs(Domain::cyclic(12), &[(0, 0), (0, 1), (1, 5), (4, 4)]).unwrap();
    let o = ConstantsOverride::friendly();
    let trace = run_increment(&a, &[0, 1, 4], &b, &o).unwrap();
    let IncrementOutcome::SkewCornerPresent { witness, count } = trace.outcome else { panic!() };
    assert!(witness.is_valid_in(&a));
    assert!(count > 0);
}

#[test]
fn one_per_column_violates_smallness() {
    let b = build_bohr(20, [], 1.0).unwrap();
    let pts: Vec<(i64, i64)> = (0..20).map(|x| (x, 3)).collect();
    let a = PointSet2::from_pairs(Domain::cyclic(20), &pts).unwrap();
    let trace = run_increment(&a, b.elements(), &b, &ConstantsOverride::default()).unwrap();
    let IncrementOutcome::SmallnessViolation { bohr_mu0_size, required, .. } = trace.outcome else { panic!() };
    assert_eq!(bohr_mu0_size, 20);
    assert!((required - 9.0 * 400.0).abs() < 1e-6);
}

#[test]
fn full_set_reports_no_increment() {
    let b = regular(10, &[1], 1.2);
    let pts: Vec<(i64, i64)> = b
        .elements()
        .iter()
        .flat_map(|&u| b.elements().iter().map(move |&v| (u as i64, v as i64)))
        .collect();
    let a = PointSet2::from_pairs(Domain::cyclic(10), &pts).unwrap();
    let trace = run_increment(&a, b.elements(), &b, &ConstantsOverride::friendly()).unwrap();
    assert!(matches!(trace.outcome, IncrementOutcome::ChainBreak { ref step, .. } if step == "preconditions"));
}

#[test]
fn pi_k_nonnegative_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let o = ConstantsOverride { r_prime: Some(4), ..ConstantsOverride::friendly() };
    for _ in 0..10 {
        let n = rng.gen_range(8..=20);
        let b = regular(n, &[1], rng.gen_range(0.8..2.0));
        let a = random_set(&mut rng, b.elements(), &b, 0.5);
        let frame = Frame::identity(&a, b.elements(), &b).unwrap();
        let c = IncrementConstants::resolve(&o, frame.alpha, frame.delta, b.rank()).unwrap();
        let t = Tracer::new(&frame, &c).unwrap();
        let (reps, flow) = t.step2_imbalance().unwrap();
        for r in &reps {
            assert!(r.hard_failures().next().is_none(), "{:?}", r.hard_failures().collect::<Vec<_>>());
        }
        let Flow::Next(s2) = flow else { continue };
        let (r3, _) = t.step3_unbalance(&s2).unwrap();
        assert!(r3.verdict("pi_nonnegative").unwrap().holds);
        assert!(r3.hard_failures().next().is_none(), "{:?}", r3.hard_failures().collect::<Vec<_>>());
    }
}

#[test]
fn trace_round_trips_through_json() {
    let (a, x) = planted(48, 6);
    let b = build_bohr(48, [], 1.0).unwrap();
    let trace = run_increment(&a, &x, &b, &ConstantsOverride::friendly()).unwrap();
    let back: IncrementTrace = serde_json::from_str(&serde_json::to_string(&trace).unwrap()).unwrap();
    assert_eq!(back, trace);
    let steps: Vec<&str> = trace.reports.iter().map(|r| r.step.as_str()).collect();
    assert_eq!(steps, ["preconditions", "step1", "claim_bounds", "step2", "step3", "step4", "step5", "step6"]);
    for r in &trace.reports {
        for v in r.verdicts.iter().filter(|v| v.name.starts_with("argmax_")) {
            assert!(v.holds, "{} in {}", v.name, r.step);
        }
    }
}

#[test]
fn iteration_on_planted_grid() {
    // The planted pattern sits in the lower-left ninth of [3·48]².
    let n = 144;
    let pts: Vec<(i64, i64)> = (0..48).step_by(6).flat_map(|c| (0..6).map(move |y| (c + 1, y + 1))).collect();
    let a = PointSet2::from_pairs(Domain::grid(n), &pts).unwrap();
    let o = ConstantsOverride::friendly();
    let log = iterate_theorem(&a, &o, 3).unwrap();
    assert_eq!(log.box_index, (0, 0));
    assert!(log.rows.iter().any(|r| r.outcome == "DensityIncrement"));
    for w in log.rows.windows(2) {
        assert!(["DensityIncrement", "Step1ColumnIncrement"].contains(&w[0].outcome.as_str()));
        assert!(w[1].alpha > w[0].alpha);
    }
    let csv = log.to_csv().unwrap();
    assert_eq!(csv.lines().count(), log.rows.len() + 1);
    for t in &log.traces {
        assert!(t.hard_failures().is_empty(), "{:?}", t.hard_failures());
    }
}

/// Five nested loops straight from the definitions of the three averages
/// and the (unnormalized) corner count.
fn naive_claims(a: &PointSet2, x: &[usize], b: &BohrSet, b_mu: &BohrSet) -> [f64; 4] {
    let n = b.modulus();
    let in_x = |c: usize| x.contains(&(c % n));
    let col = |c: usize| if in_x(c) { a.column_count((c % n) as i64) as f64 / b.len() as f64 } else { 0.0 };
    let has = |c: usize, y: usize| a.contains((c % n) as i64, (y % n) as i64);
    let mut acc = [0.0; 4];
    let mut total = 0.0;
    for &xx in b.elements() {
        for &s in b_mu.elements() {
            for &t in b_mu.elements() {
                let chi = if in_x(xx + s + n - t) { 1.0 } else { 0.0 };
                for &aa in b_mu.elements() {
                    let c = xx + aa;
                    let f = col(c);
                    for &y in b.elements() {
                        total += 1.0;
                        let p = if has(c, y + s) { 1.0 } else { 0.0 };
                        let q = if has(c, y + aa + t) { 1.0 } else { 0.0 };
                        acc[0] += chi * f * f;
                        acc[1] += chi * p * f;
                        acc[2] += chi * q * f;
                        acc[3] += chi * p * q;
                    }
                }
            }
        }
    }
    acc.map(|v| v / total)
}

#[test]
fn claim_averages_match_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [9usize, 12, 14] {
        let b = regular(n, &[1], 1.9);
        let x: Vec<usize> = b.elements().iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
        let x = if x.is_empty() { vec![0] } else { x };
        let a = random_set(&mut rng, &x, &b, 0.4);
        let frame = Frame::identity(&a, &x, &b).unwrap();
        let c = IncrementConstants::resolve(&ConstantsOverride::friendly(), frame.alpha, frame.delta, 1).unwrap();
        let t = Tracer::new(&frame, &c).unwrap();
        let b_mu = b.with_radius(0.9);
        let rep = t.claim_bounds(&b_mu);
        let [v, s, at, _] = naive_claims(&a, &x, &b, &b_mu);
        assert!((rep.measured["avg_vd_squared"] - v).abs() < 1e-12);
        assert!((rep.measured["avg_shift_s"] - s).abs() < 1e-12);
        assert!((rep.measured["avg_shift_a_t"] - at).abs() < 1e-12);
        // The balanced average expands into the corner average and the three claims.
        let (reps, _) = t.step2_imbalance().unwrap();
        let s2 = reps.iter().find(|r| r.step == "step2").unwrap();
        assert!(s2.verdict("balanced_expansion").unwrap().holds);
        let step_mu = b.dilate(s2.measured["mu"]);
        let [_, _, _, p2] = naive_claims(&a, &x, &b, &step_mu);
        assert!((s2.measured["corner_average"] - p2).abs() < 1e-12);
    }
}

#[test]
fn sifted_sets_match_their_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let o = ConstantsOverride { r_prime: Some(4), ..ConstantsOverride::friendly() };
    let mut checked = 0;
    for _ in 0..12 {
        let n = rng.gen_range(10..=18);
        let b = regular(n, &[1], rng.gen_range(1.0..2.0));
        let a = random_set(&mut rng, b.elements(), &b, 0.5);
        let frame = Frame::identity(&a, b.elements(), &b).unwrap();
        let c = IncrementConstants::resolve(&o, frame.alpha, frame.delta, 1).unwrap();
        let t = Tracer::new(&frame, &c).unwrap();
        let Flow::Next(s2) = t.step2_imbalance().unwrap().1 else { continue };
        let (rep4, flow) = t.step4_sift(&s2).unwrap();
        assert!(rep4.hard_failures().next().is_none());
        let Flow::Next(s4) = flow else { continue };
        let has = |x: usize, y: usize| a.contains((x % n) as i64, (y % n) as i64);
        let bm = s2.b_mu.elements();
        // Mean over a ∈ B_μ of |A_{x₀+a} ∩ (B+y) ∩ (B+y')| / |B|.
        let p = |y: usize, yp: usize| {
            bm.iter()
                .map(|&aa| b.elements().iter().filter(|&&v| has(s2.x0 + aa, v + y) && has(s2.x0 + aa, v + yp)).count())
                .sum::<usize>() as f64
                / (bm.len() * b.len()) as f64
        };
        let col = |yp: usize| bm.iter().map(|&y| p(y, yp).powi(4)).sum::<f64>();
        let best = bm.iter().map(|&yp| col(yp)).fold(f64::MIN, f64::max);
        assert!((col(s4.y0p) - best).abs() < 1e-9);
        let thr = (1.0 + 1.0 / 512.0) * frame.alpha * frame.alpha * s2.delta_mu;
        let d: Vec<usize> = bm.iter().copied().filter(|&y| p(y, s4.y0p) >= thr).collect();
        assert_eq!(d, s4.d);
        let y: Vec<usize> =
            bm.iter().copied().filter(|&y| s4.pairs.iter().all(|&(aa, tt)| has(s2.x0 + aa, y + tt))).collect();
        let z: Vec<usize> = s4
            .b_nu
            .elements()
            .iter()
            .copied()
            .filter(|&z| s4.pairs.iter().all(|&(aa, tt)| has(s2.x0 + aa, s4.y0p + tt + z)))
            .collect();
        assert_eq!(y, s4.y);
        assert_eq!(z, s4.z);

        let (rep5, flow) = t.step5_ap(&s2, &s4).unwrap();
        assert!(rep5.hard_failures().next().is_none());
        if let Flow::Next(s5) = flow {
            assert_eq!(s5.y.len(), s4.y.len().min(s4.d.len()));
            assert!(s5.y.iter().all(|v| s4.y.contains(v)));
        }
        checked += 1;
    }
    assert!(checked >= 6);
}
