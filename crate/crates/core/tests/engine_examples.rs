use std::sync::Arc;

use bicombing_lab::cube::{build_cube_complex, f_times_interval, CubeSpec};
use bicombing_lab::engine::{
    canonical_trajectory, certify, direct_geodesic, distance, geodesic, grid_oracle_distance, local_geodesic_check,
    midpoint, sigma_eval, Bicombing, EngineBicombing, EngineOptions,
};
use bicombing_lab::families::{build_family, lsp};
use bicombing_lab::{ChartAtlas, PExponent, SpacePoint};

const PS: [PExponent; 3] = [PExponent::ONE, PExponent::TWO, PExponent::INF];

fn pt(a: &ChartAtlas, c: &str, x: &[f64]) -> SpacePoint {
    a.point(c, x).unwrap()
}

/// Height of the path where it first reaches the hinge fibre (the vertex of F
/// times the interval).
fn hinge_height(a: &ChartAtlas, path: &bicombing_lab::engine::PolyPath) -> f64 {
    let hinge = a.chart_by_name("Q*I").unwrap();
    for b in &path.breakpoints {
        for r in a.representatives(b) {
            if r.chart == hinge && r.coords[0].abs() < 1e-12 && r.coords[1].abs() < 1e-12 {
                return r.coords[2];
            }
        }
    }
    panic!("path never meets the hinge fibre");
}

#[test]
fn distance_examples() {
    let o = EngineOptions::default();
    let a = lsp(2).unwrap();
    let x = pt(&a, "P1", &[0.0, 1.0]);
    let y = pt(&a, "P2", &[0.0, 1.0]);
    assert_eq!(distance(&a, &x, &x, PExponent::INF, &o).unwrap(), 0.0);
    assert!((distance(&a, &x, &y, PExponent::INF, &o).unwrap() - 2.0).abs() < 1e-9);

    let a = lsp(4).unwrap();
    let x = pt(&a, "P1", &[0.0, -1.0]);
    let y = pt(&a, "P3", &[-1.0, 0.0]);
    let d = distance(&a, &x, &y, PExponent::TWO, &o).unwrap();
    assert!((d - 2.0).abs() < 1e-9, "{d}");
    let g = grid_oracle_distance(&a, &x, &y, PExponent::TWO, 1.0 / 128.0).unwrap();
    assert!(g >= d - 1e-9 && g <= d * (1.0 + 0.1), "oracle {g}");
}

#[test]
fn lsp4_chain_passes_through_origin() {
    let o = EngineOptions::default();
    let a = lsp(4).unwrap();
    let x = pt(&a, "P1", &[0.0, -1.0]);
    let y = pt(&a, "P3", &[-1.0, 0.0]);
    for p in PS {
        let path = geodesic(&a, &x, &y, p, &o).unwrap();
        assert_eq!(path.breakpoints.len(), 3);
        assert!(path.breakpoints[1].coords.max_abs_diff(&bicombing_lab::CoordVec::zeros(2)) < 1e-9);
        assert!(local_geodesic_check(&a, &path, p, 0.1, &o).unwrap().ok);
        let h = EngineBicombing::new(Arc::new(a.clone()), p);
        let m = sigma_eval(&h, &x, &y, 0.5).unwrap();
        assert!(a.same_point(&m, &pt(&a, "P1", &[0.0, 0.0])), "{}", a.format_point(&m));
    }
}

#[test]
fn plane_sigma_and_midpoint() {
    let a = Arc::new(build_family("plane").unwrap());
    let x = pt(&a, "P", &[0.0, 0.0]);
    let y = pt(&a, "P", &[2.0, 4.0]);
    for p in PS {
        let h = EngineBicombing::new(a.clone(), p);
        assert_eq!(h.eval(&x, &y, 0.0).unwrap(), x);
        assert_eq!(h.eval(&x, &y, 1.0).unwrap(), y);
        let m = h.eval(&x, &y, 0.5).unwrap();
        assert!(m.coords.max_abs_diff(&pt(&a, "P", &[1.0, 2.0]).coords) < 1e-12);
        let tr = midpoint(&h, &x, &y, 1e-9).unwrap();
        assert!(tr.point.coords.max_abs_diff(&m.coords) < 1e-12);
        assert_eq!(tr.gaps.len(), 2);
    }
}

#[test]
fn fxi_hinge_heights() {
    let o = EngineOptions::default();
    let a = f_times_interval().unwrap();
    let x = pt(&a, "I*I", &[1.0, 0.0]);
    let y = pt(&a, "Q*I", &[1.0, 1.0, 1.0]);
    let p2 = canonical_trajectory(&a, &x, &y, PExponent::TWO, &o).unwrap();
    let pinf = canonical_trajectory(&a, &x, &y, PExponent::INF, &o).unwrap();
    let h2 = hinge_height(&a, &p2);
    let hinf = hinge_height(&a, &pinf);
    assert!((h2 - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-9, "{h2}");
    assert!((hinf - 0.5).abs() < 1e-9, "{hinf}");
    // both are geodesics for their own exponent
    certify(&a, &p2, PExponent::TWO, &o).unwrap();
    certify(&a, &pinf, PExponent::INF, &o).unwrap();
    // the direct ℓ² optimum agrees with the product trajectory
    let d2 = direct_geodesic(&a, &x, &y, PExponent::TWO, &o).unwrap();
    assert!((hinge_height(&a, &d2) - h2).abs() < 1e-6);
}

#[test]
fn cube_chart_distance_is_lp() {
    let o = EngineOptions::default();
    let f5 = build_cube_complex(&CubeSpec::F5).unwrap();
    let a = f5.atlas();
    let x = pt(a, "Q0", &[0.2, 0.9]);
    let y = pt(a, "Q0", &[0.7, 0.1]);
    for p in PS {
        let d = distance(a, &x, &y, p, &o).unwrap();
        let e = bicombing_lab::lp_norm(&[0.5, 0.8], p);
        assert!((d - e).abs() < 1e-12, "{p}: {d} vs {e}");
    }
    // across the central vertex of F5 between opposite squares
    let x = pt(a, "Q0", &[1.0, 1.0]);
    let y = pt(a, "Q2", &[1.0, 1.0]);
    let d = distance(a, &x, &y, PExponent::INF, &o).unwrap();
    assert!(d <= 2.0 + 1e-9);
}
