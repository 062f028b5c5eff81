use std::sync::Arc;

use proptest::prelude::*;

use bicombing_lab::boundary::{d_o_metric, TruncatedRay};
use bicombing_lab::engine::{distance, geodesic, Bicombing, EngineBicombing, EngineOptions};
use bicombing_lab::families::{build_family, lsp, plane};
use bicombing_lab::helly::{build_grid_graph, helly_check, HellyOptions};
use bicombing_lab::suite::run_suite;
use bicombing_lab::{lp_norm, ChartAtlas, PExponent, SpacePoint};

fn exponent() -> impl Strategy<Value = PExponent> {
    prop_oneof![Just(PExponent::ONE), Just(PExponent::TWO), Just(PExponent::INF), (1.2f64..6.0).prop_map(|p| PExponent::new(p).unwrap())]
}

fn lsp2_point() -> impl Strategy<Value = (usize, f64, f64)> {
    (0usize..4, -2.0f64..2.0, -2.0f64..2.0)
}

fn mk(a: &ChartAtlas, (c, x, y): (usize, f64, f64)) -> SpacePoint {
    let name = a.charts()[c % a.charts().len()].name.clone();
    a.point(&name, &[x, y]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_norm_triangle_and_homogeneity(
        u in prop::collection::vec(-5.0f64..5.0, 3),
        v in prop::collection::vec(-5.0f64..5.0, 3),
        k in -4.0f64..4.0,
        p in exponent(),
    ) {
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        prop_assert!(lp_norm(&w, p) <= lp_norm(&u, p) + lp_norm(&v, p) + 1e-12);
        let ku: Vec<f64> = u.iter().map(|a| k * a).collect();
        prop_assert!((lp_norm(&ku, p) - k.abs() * lp_norm(&u, p)).abs() <= 1e-12 * (1.0 + lp_norm(&ku, p)));
    }

    #[test]
    fn distance_is_a_metric(a in lsp2_point(), b in lsp2_point(), c in lsp2_point(), p in exponent()) {
        let s = lsp(2).unwrap();
        let o = EngineOptions::default();
        let (x, y, z) = (mk(&s, a), mk(&s, b), mk(&s, c));
        let dxy = distance(&s, &x, &y, p, &o).unwrap();
        let dyx = distance(&s, &y, &x, p, &o).unwrap();
        let dyz = distance(&s, &y, &z, p, &o).unwrap();
        let dxz = distance(&s, &x, &z, p, &o).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - dyx).abs() <= 1e-9 * (1.0 + dxy));
        prop_assert!(dxz <= dxy + dyz + 1e-9);
    }

    #[test]
    fn geodesic_length_matches_distance(a in lsp2_point(), b in lsp2_point(), p in exponent()) {
        let s = lsp(2).unwrap();
        let o = EngineOptions::default();
        let (x, y) = (mk(&s, a), mk(&s, b));
        let d = distance(&s, &x, &y, p, &o).unwrap();
        let path = geodesic(&s, &x, &y, p, &o).unwrap();
        prop_assert!((path.length(&s, p) - d).abs() <= 1e-9 * (1.0 + d));
        let h = EngineBicombing::new(Arc::new(s.clone()), p);
        prop_assert!(s.same_point(&h.eval(&x, &y, 0.0).unwrap(), &x));
        prop_assert!(s.same_point(&h.eval(&x, &y, 1.0).unwrap(), &y));
    }

    #[test]
    fn d_o_is_symmetric_and_satisfies_triangle(
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3),
        p in prop_oneof![Just(PExponent::TWO), Just(PExponent::INF)],
    ) {
        let s = Arc::new(plane());
        let h: Arc<dyn Bicombing> = Arc::new(EngineBicombing::new(s.clone(), p));
        let o = s.point(&s.charts()[0].name, &[0.0, 0.0]).unwrap();
        let rays: Vec<TruncatedRay> = angles
            .iter()
            .map(|t| {
                let far = s.point(&s.charts()[0].name, &[100.0 * t.cos(), 100.0 * t.sin()]).unwrap();
                TruncatedRay::new(h.clone(), o.clone(), far, 100.0).unwrap()
            })
            .collect();
        let d = |i: usize, j: usize| d_o_metric(&o, &rays[i], &rays[j], 40).unwrap().value;
        let slack = 3.0 * 0.5f64.powi(40) + 1e-12;
        prop_assert!((d(0, 1) - d(1, 0)).abs() <= slack);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + slack);
        prop_assert!(d(0, 0) <= slack);
    }

    #[test]
    fn helly_balls_grow_with_radius(x in -3i64..=3, y in -3i64..=3, r in 0u32..3) {
        let g = build_grid_graph(&lsp(3).unwrap(), 5).unwrap();
        let v = g.vertex("P1", x, y).unwrap();
        let small = g.ball(v, r);
        let big = g.ball(v, r + 1);
        prop_assert!(small.iter().all(|w| big.binary_search(w).is_ok()));
        let dv = g.distances_from(v);
        for &w in &big {
            prop_assert_eq!(g.distances_from(w)[v], dv[w]);
        }
    }

    #[test]
    fn helly_balls_do_not_depend_on_window(x in -2i64..=2, y in -2i64..=2, r in 0u32..3) {
        // A ball of radius r around a point at depth >= r sees no window edge.
        let labels = |w: i64| {
            let g = build_grid_graph(&lsp(3).unwrap(), w).unwrap();
            let v = g.vertex("P1", x, y).unwrap();
            let mut l: Vec<String> = g.ball(v, r).into_iter().map(|u| g.label(u)).collect();
            l.sort();
            l
        };
        prop_assert_eq!(labels(5), labels(6));
    }
}

#[test]
fn helly_verdicts_are_stable_across_windows() {
    for w in [3, 4] {
        let g = build_grid_graph(&build_family("gamma45").unwrap(), w).unwrap();
        assert!(!helly_check(&g, &HellyOptions::new(1, 1)).unwrap().all.is_empty(), "window {w}");
    }
    for w in [7, 8] {
        let g = build_grid_graph(&plane(), w).unwrap();
        assert!(helly_check(&g, &HellyOptions::new(2, 3)).unwrap().all.is_empty(), "window {w}");
    }
}

#[test]
fn suites_are_deterministic_for_a_seed() {
    for name in ["halfplane", "midpoint"] {
        let a = run_suite(name, 11).unwrap();
        let b = run_suite(name, 11).unwrap();
        let key = |r: &bicombing_lab::suite::SuiteResult| {
            r.cases.iter().map(|c| (c.id.clone(), c.status, c.value.to_bits())).collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b), "{name}");
    }
}
