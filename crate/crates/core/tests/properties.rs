use proptest::prelude::*;

use skewcorner::bohr::{build_bohr, check_structure};
use skewcorner::grid::{
    count_skew_corners, find_skew_corner, lift_to_skew_instance, map_witness, skew_form, Domain, OneDimSet, PointSet2,
};
use skewcorner::norms::{grid_norm, km_norm, u2_norm, vs_norm, vs_to_grid_lift};
use skewcorner::table::FunctionTable2;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn point_set(cyclic: bool) -> impl Strategy<Value = PointSet2> {
    (2u64..=7).prop_flat_map(move |n| {
        let lo = if cyclic { 0 } else { 1 };
        let hi = if cyclic { n as i64 - 1 } else { n as i64 };
        prop::collection::vec((lo..=hi, lo..=hi), 0..=(n * n) as usize).prop_map(move |pts| {
            let d = if cyclic { Domain::cyclic(n) } else { Domain::grid(n) };
            PointSet2::from_pairs(d, &pts).unwrap()
        })
    })
}

fn any_set() -> impl Strategy<Value = PointSet2> {
    prop_oneof![point_set(false), point_set(true)]
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..=1.0, 1..=6)
}

fn table(max: usize) -> impl Strategy<Value = FunctionTable2> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1.0f64..=1.0, r * c).prop_map(move |v| FunctionTable2::new(r, c, v).unwrap())
    })
}

fn subset(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(any::<bool>(), n).prop_map(|m| {
        let s: Vec<usize> = m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        if s.is_empty() {
            vec![0]
        } else {
            s
        }
    })
}

proptest! {
    #[test]
    fn detection_agrees_with_count(a in any_set()) {
        let w = find_skew_corner(&a);
        prop_assert_eq!(w.is_none(), count_skew_corners(&a) == 0);
        if let Some(w) = w {
            prop_assert!(w.is_valid_in(&a));
        }
    }

    #[test]
    fn one_point_per_column_is_corner_free(n in 2u64..=12, ys in prop::collection::vec(prop::option::of(0i64..12), 12)) {
        let pts: Vec<(i64, i64)> = ys
            .iter()
            .take(n as usize)
            .enumerate()
            .filter_map(|(x, y)| y.map(|y| (x as i64, y % n as i64)))
            .collect();
        let a = PointSet2::from_pairs(Domain::cyclic(n), &pts).unwrap();
        prop_assert_eq!(count_skew_corners(&a), 0);
    }

    #[test]
    fn reflection_preserves_corner_count(a in any_set()) {
        prop_assert_eq!(count_skew_corners(&a.reflect_y()), count_skew_corners(&a));
    }

    #[test]
    fn skew_form_counts_corners_and_degenerate_tuples(a in point_set(true)) {
        let n = a.domain().size as usize;
        let ind = FunctionTable2::torus(n, |x, y| if a.contains(x as i64, y as i64) { 1.0 } else { 0.0 }).unwrap();
        let form = skew_form(&ind, &ind, &ind).unwrap() * (n as f64).powi(4);
        let degenerate: u64 = a.columns().map(|(_, c)| (c.len() * c.len()) as u64).sum();
        prop_assert!(close(form, (count_skew_corners(&a) + degenerate) as f64));
    }

    #[test]
    fn lifted_corners_map_to_six_point_configurations(m in prop::collection::vec(any::<bool>(), 12)) {
        let b = OneDimSet::new(12, (1..=12).filter(|&v| m[v as usize - 1])).unwrap();
        if let Some(w) = find_skew_corner(&lift_to_skew_instance(&b)) {
            prop_assert!(map_witness(&w, &b).unwrap().is_valid_in(&b));
        }
    }

    #[test]
    fn dilates_add(n in 2usize..=96, freqs in prop::collection::vec(1i64..96, 0..=3), rho in 0.01f64..=1.0,
                   d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0) {
        let b = build_bohr(n, freqs.iter().map(|f| f % n as i64), rho).unwrap();
        let s = check_structure(&b, d1, d2).unwrap();
        prop_assert!(s.containment && s.size_ok && s.doubling_ok);
        let (u, v, w) = (b.dilate(d1), b.dilate(d2), b.dilate(d1 + d2));
        for &p in u.elements() {
            for &q in v.elements() {
                prop_assert!(w.contains((p + q) % n));
            }
        }
    }

    #[test]
    fn norms_are_homogeneous(f in vector(), c in -3.0f64..=3.0, t in table(4)) {
        let g: Vec<f64> = f.iter().map(|v| c * v).collect();
        prop_assert!(close(u2_norm(&g).unwrap().value, c.abs() * u2_norm(&f).unwrap().value));
        prop_assert!(close(km_norm(&g, 3).unwrap().value, c.abs() * km_norm(&f, 3).unwrap().value));
        let s = t.scaled(c).unwrap();
        prop_assert!(close(grid_norm(&s, 2, 2).unwrap().value, c.abs() * grid_norm(&t, 2, 2).unwrap().value));
    }

    #[test]
    fn km_two_is_u2(f in vector()) {
        prop_assert!(close(km_norm(&f, 2).unwrap().value, u2_norm(&f).unwrap().value));
    }

    #[test]
    fn vs_norm_is_a_lifted_grid_norm((f, b, bp) in (2usize..=5).prop_flat_map(|n| {
        (prop::collection::vec(-1.0f64..=1.0, n * n).prop_map(move |v| FunctionTable2::new(n, n, v).unwrap()),
         subset(n), subset(n))
    }), r in prop::sample::select(vec![2u32, 4])) {
        let lifted = vs_to_grid_lift(&f, &b, &bp).unwrap();
        let vs = vs_norm(&f, r, &b, &bp).unwrap().value;
        prop_assert!(close(vs, grid_norm(&lifted, r as usize, 2).unwrap().value));
    }
}
