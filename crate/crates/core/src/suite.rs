//! Named property suites with pinned tolerances.
//!
//! Every suite is a pure function of its seed. Cases report a measured value,
//! the bound it is compared with, and a provenance tag: `claim:<slug>` for a
//! property of the spaces under study, `oracle:<slug>` for a value fixed by an
//! independent computation, `plumbing` for checks of the tooling itself.

use std::collections::HashSet;
use std::fmt::Display;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::atlas::{ChartAtlas, SpacePoint};
use crate::boundary::{
    asymptotic_verdict, coverage_radius, d_o_metric, d_oc_metric, halfplane_probe, product_ray, sample_directions,
    BoundaryError, CoverageOptions, HalfPlaneOptions, TruncatedRay, Verdict,
};
use crate::cube::{build_cube_family, f_times_interval, lp_product};
use crate::engine::oracle::oracle_constant;
use crate::engine::{
    canonical_trajectory, direct_geodesic, distance, midpoint, reversibilize, Bicombing, EngineBicombing, EngineError,
    EngineOptions, GridOracle, OracleError, PolyPath,
};
use crate::families::{build_family, ck_patch, line, lsp, plane};
use crate::helly::{build_grid_graph, helly_check, HellyOptions};
use crate::lp::{lp_norm, CoordVec, PExponent};
use crate::verify::{
    check_axioms, check_projection_inequality, nudged, projection_terms, Axiom, AxiomReport, Isometry, Sampler,
    CCC_FLOOR,
};

const PS: [PExponent; 3] = [PExponent::ONE, PExponent::TWO, PExponent::INF];

/// Suite names with one-line descriptions, in run order.
pub const SUITES: [(&str, &str); 12] = [
    ("lemma5sp-trajectories", "p=2 and p=inf geodesics share trajectories on the five model spaces"),
    ("fxi-divergence", "p=2 and p=inf trajectories cross the hinge of FxI at different heights"),
    ("helly", "the diagonal grid patch has a non-Helly triple, the axis patch passes"),
    ("axioms", "bicombing axioms of engine handles, with negative controls"),
    ("ccc-implication", "convexity violation bounded by twice the conicality violation"),
    ("projection", "projection inequality on sampled tuples"),
    ("boundary-metrics", "triangle inequalities and comparability bounds of the boundary metrics"),
    ("join", "product rays form pairwise divergent unit-speed families"),
    ("halfplane", "Cesaro oscillation and recurring gaps in the half-plane complex"),
    ("oracle-agreement", "engine distances against the grid oracle"),
    ("midpoint", "midpoint symmetry, contraction and reversibilization"),
    ("coverage", "almost geodesic completeness probe"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// How a case value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Bound {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub id: String,
    pub status: Status,
    /// Measured value; NaN (null in JSON) for errored cases.
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub cases: Vec<CaseResult>,
    pub seed: u64,
    /// Wall-clock seconds.
    pub elapsed: f64,
    /// Wall-clock seconds per suite, in run order.
    pub timings: Vec<(String, f64)>,
    pub passed: bool,
}

impl SuiteResult {
    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| c.status != Status::Pass)
    }

    /// Per-suite (name, passed, total), in run order.
    pub fn summary(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for c in &self.cases {
            let name = c.id.split('/').next().unwrap_or("").to_string();
            if out.last().map_or(true, |l| l.0 != name) {
                out.push((name, 0, 0));
            }
            let last = out.last_mut().unwrap();
            last.2 += 1;
            if c.status == Status::Pass {
                last.1 += 1;
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown suite '{0}'; known suites: all, {}", SUITES.map(|s| s.0).join(", "))]
    Unknown(String),
}

/// Runs one suite, or every suite for `all`.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteResult, SuiteError> {
    let names: Vec<&'static str> = if name == "all" {
        SUITES.iter().map(|s| s.0).collect()
    } else if let Some(s) = SUITES.iter().find(|s| s.0 == name) {
        vec![s.0]
    } else {
        return Err(SuiteError::Unknown(name.into()));
    };
    let start = Instant::now();
    let mut survey: Option<Vec<HandleSurvey>> = None;
    let mut cases = Vec::new();
    let mut timings = Vec::new();
    for n in names {
        let t0 = Instant::now();
        let mut c = Cases::new(n);
        match n {
            "lemma5sp-trajectories" => trajectories(seed, &mut c),
            "fxi-divergence" => fxi_divergence(&mut c),
            "helly" => helly(&mut c),
            "axioms" | "ccc-implication" => {
                let s = survey.get_or_insert_with(|| axiom_survey(seed));
                if n == "axioms" {
                    axioms(seed, s, &mut c)
                } else {
                    ccc(s, &mut c)
                }
            }
            "projection" => projection(seed, &mut c),
            "boundary-metrics" => boundary_metrics(seed, &mut c),
            "join" => join(&mut c),
            "halfplane" => halfplane(&mut c),
            "oracle-agreement" => oracle_agreement(seed, &mut c),
            "midpoint" => midpoints(seed, &mut c),
            "coverage" => coverage(seed, &mut c),
            _ => unreachable!(),
        }
        cases.extend(c.out);
        timings.push((n.to_string(), t0.elapsed().as_secs_f64()));
    }
    let passed = cases.iter().all(|c| c.status == Status::Pass);
    Ok(SuiteResult {
        suite: name.into(),
        cases,
        seed,
        elapsed: start.elapsed().as_secs_f64(),
        timings,
        passed,
    })
}

struct Cases {
    prefix: &'static str,
    out: Vec<CaseResult>,
}

impl Cases {
    fn new(prefix: &'static str) -> Self {
        Cases { prefix, out: Vec::new() }
    }

    fn push(&mut self, id: &str, value: f64, bound: Bound, tolerance: f64, provenance: &str, detail: Option<String>) {
        let ok = match bound {
            Bound::AtMost => value <= tolerance,
            Bound::AtLeast => value >= tolerance,
        };
        self.out.push(CaseResult {
            id: format!("{}/{}", self.prefix, id),
            status: if ok { Status::Pass } else { Status::Fail },
            value,
            tolerance,
            bound,
            provenance: provenance.into(),
            detail,
        });
    }

    fn at_most(&mut self, id: &str, value: f64, tol: f64, prov: &str) {
        self.push(id, value, Bound::AtMost, tol, prov, None);
    }

    fn at_least(&mut self, id: &str, value: f64, tol: f64, prov: &str) {
        self.push(id, value, Bound::AtLeast, tol, prov, None);
    }

    fn error(&mut self, id: &str, bound: Bound, tol: f64, prov: &str, e: impl Display) {
        self.out.push(CaseResult {
            id: format!("{}/{}", self.prefix, id),
            status: Status::Error,
            value: f64::NAN,
            tolerance: tol,
            bound,
            provenance: prov.into(),
            detail: Some(e.to_string()),
        });
    }

    fn check<E: Display>(&mut self, id: &str, r: Result<f64, E>, bound: Bound, tol: f64, prov: &str) {
        match r {
            Ok(v) => self.push(id, v, bound, tol, prov, None),
            Err(e) => self.error(id, bound, tol, prov, e),
        }
    }
}

fn p_label(p: PExponent) -> String {
    format!("p{p}")
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// trajectories

const TRAJECTORY_PAIRS: u64 = 200;
const TRAJECTORY_TOL: f64 = 1e-6;

fn trajectories(seed: u64, c: &mut Cases) {
    let opts = EngineOptions::default();
    for k in 1..=5u8 {
        let a = lsp(k).expect("model space");
        let sampler = Sampler::new(seed.wrapping_add(k as u64));
        let r: Result<Vec<(f64, f64)>, EngineError> = (0..TRAJECTORY_PAIRS)
            .into_par_iter()
            .map(|i| {
                let mut rng = sampler.stream(i);
                let x = sampler.point(&a, &mut rng);
                let y = sampler.point(&a, &mut rng);
                let two = canonical_trajectory(&a, &x, &y, PExponent::TWO, &opts)?;
                let sup = direct_geodesic(&a, &x, &y, PExponent::INF, &opts)?;
                let len = two.length(&a, PExponent::TWO);
                let h = two.local_hausdorff(&sup, &a, PExponent::TWO, 8);
                // the ℓ² trajectory is itself an ℓ^∞ geodesic
                let d = distance(&a, &x, &y, PExponent::INF, &opts)?;
                let excess = (two.length(&a, PExponent::INF) - d).max(0.0) / (1.0 + d);
                Ok((h / (1.0 + len), excess))
            })
            .collect();
        let id = format!("lsp{k}");
        match r {
            Ok(v) => {
                c.at_most(&format!("{id}/hausdorff"), max_of(v.iter().map(|t| t.0)), TRAJECTORY_TOL, "claim:same-trajectories");
                c.at_most(&format!("{id}/sup-length-excess"), max_of(v.iter().map(|t| t.1)), 1e-9, "claim:same-trajectories");
            }
            Err(e) => c.error(&id, Bound::AtMost, TRAJECTORY_TOL, "claim:same-trajectories", e),
        }
    }
}

// ---------------------------------------------------------------------------
// F × I

const HINGE_TOL: f64 = 1e-6;
const FXI_SEPARATION: f64 = 0.05;
const FXI_GRID: f64 = 1.0 / 64.0;

/// Height at which a path first meets the fibre over the shared vertex.
fn hinge_height(a: &ChartAtlas, path: &PolyPath) -> Option<f64> {
    let hinge = a.chart_by_name("Q*I").ok()?;
    path.breakpoints.iter().find_map(|b| {
        a.representatives(b)
            .into_iter()
            .find(|r| r.chart == hinge && r.coords[0].abs() < 1e-12 && r.coords[1].abs() < 1e-12)
            .map(|r| r.coords[2])
    })
}

/// Gluing distance from `x` to a geodesic, by golden-section search along
/// it. Exact for CAT(0) metrics, where the distance is convex along geodesics.
fn distance_to_geodesic(a: &ChartAtlas, x: &SpacePoint, path: &PolyPath, p: PExponent) -> Result<f64, EngineError> {
    let opts = EngineOptions::default();
    let f = |u: f64| distance(a, x, &path.point_at(a, u, p), p, &opts);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut u, mut v) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fu, mut fv) = (f(u)?, f(v)?);
    for _ in 0..60 {
        if fu <= fv {
            hi = v;
            v = u;
            fv = fu;
            u = hi - g * (hi - lo);
            fu = f(u)?;
        } else {
            lo = u;
            u = v;
            fu = fv;
            v = lo + g * (hi - lo);
            fv = f(v)?;
        }
    }
    Ok(f(0.0)?.min(f(1.0)?).min(fu).min(fv))
}

fn fxi_divergence(c: &mut Cases) {
    let prov_h = "oracle:flat-strip-unfolding";
    let a = match f_times_interval() {
        Ok(a) => a,
        Err(e) => return c.error("build", Bound::AtMost, 0.0, "plumbing", e),
    };
    let opts = EngineOptions::default();
    let x = a.point("I*I", &[1.0, 0.0]).expect("free end");
    let y = a.point("Q*I", &[1.0, 1.0, 1.0]).expect("far corner");
    let two = canonical_trajectory(&a, &x, &y, PExponent::TWO, &opts);
    let sup = canonical_trajectory(&a, &x, &y, PExponent::INF, &opts);
    let (two, sup) = match (two, sup) {
        (Ok(t), Ok(s)) => (t, s),
        (Err(e), _) | (_, Err(e)) => return c.error("trajectories", Bound::AtMost, HINGE_TOL, prov_h, e),
    };
    let heights = [
        ("p2-hinge-height", &two, 1.0 / (1.0 + 2f64.sqrt())),
        ("pinf-hinge-height", &sup, 0.5),
    ];
    for (id, path, exact) in heights {
        match hinge_height(&a, path) {
            Some(h) => c.at_most(id, (h - exact).abs(), HINGE_TOL, prov_h),
            None => c.error(id, Bound::AtMost, HINGE_TOL, prov_h, "trajectory never meets the hinge fibre"),
        }
    }

    // ℓ² Hausdorff distance, sampled: every probe gives a lower bound.
    let probes = |path: &PolyPath| -> Vec<SpacePoint> { (0..=64).map(|i| path.point_at(&a, i as f64 / 64.0, PExponent::TWO)).collect() };
    let sep: Result<Vec<f64>, EngineError> = probes(&sup)
        .par_iter()
        .map(|q| distance_to_geodesic(&a, q, &two, PExponent::TWO))
        .chain(probes(&two).par_iter().map(|q| distance_to_geodesic(&a, q, &sup, PExponent::TWO)))
        .collect();
    let prov_o = "oracle:grid-h64";
    c.check("hausdorff", sep.map(max_of), Bound::AtLeast, FXI_SEPARATION, "claim:traj-fails-fxi");

    // the same separation read off the grid oracle at the p=inf hinge point
    let hinge = a.point("Q*I", &[0.0, 0.0, 0.5]).expect("hinge point");
    let oracle = GridOracle::build(&a, FXI_GRID, 1.0).map_err(|e| e.to_string()).and_then(|g| {
        let field = g.field(&hinge, PExponent::TWO).map_err(|e| e.to_string())?;
        let mut best = f64::INFINITY;
        for i in 0..=1024 {
            let q = two.point_at(&a, i as f64 / 1024.0, PExponent::TWO);
            best = best.min(g.read(&field, &hinge, &q, PExponent::TWO).map_err(|e| e.to_string())?);
        }
        Ok(best)
    });
    c.check("hausdorff-grid-oracle", oracle, Bound::AtLeast, FXI_SEPARATION, prov_o);
}

// ---------------------------------------------------------------------------
// Helly

fn helly(c: &mut Cases) {
    let prov = "claim:gamma45-not-helly";
    let r = (|| -> Result<(), String> {
        let a = build_family("gamma45").map_err(|e| e.to_string())?;
        let g = build_grid_graph(&a, 3).map_err(|e| e.to_string())?;
        let v = |ch: &str, x: i64, y: i64| g.vertex(ch, x, y).map_err(|e| e.to_string());
        let (a1, a2, a3) = (v("P1", -1, 0)?, v("P1", 1, 2)?, v("P2", 1, 0)?);
        let report = helly_check(&g, &HellyOptions::new(1, 1)).map_err(|e| e.to_string())?;
        c.at_least("gamma45/counterexamples", report.counterexamples_found as f64, 1.0, prov);
        let found = report.contains(&[a1, a2, a3], &[1, 1, 1]);
        c.at_least("gamma45/triple-found", found as u8 as f64, 1.0, prov);
        let ball = |w: usize| -> HashSet<usize> { g.ball(w, 1).into_iter().collect() };
        let (b1, b2, b3) = (ball(a1), ball(a2), ball(a3));
        let pair13: HashSet<usize> = b1.intersection(&b3).copied().collect();
        let origin = v("P1", 0, 0)?;
        let expected: HashSet<usize> = [origin].into();
        c.at_most("gamma45/pair13-is-origin", pair13.symmetric_difference(&expected).count() as f64, 0.0, prov);
        c.at_most("gamma45/triple-intersection", pair13.intersection(&b2).count() as f64, 0.0, prov);
        let pairs_meet = !b1.is_disjoint(&b2) && !b2.is_disjoint(&b3) && !b1.is_disjoint(&b3);
        c.at_least("gamma45/pairs-intersect", pairs_meet as u8 as f64, 1.0, prov);

        let prov = "oracle:brute-force";
        let a = build_family("gamma90").map_err(|e| e.to_string())?;
        let g = build_grid_graph(&a, 7).map_err(|e| e.to_string())?;
        let report = helly_check(&g, &HellyOptions::new(2, 3)).map_err(|e| e.to_string())?;
        c.at_most("gamma90/counterexamples", report.counterexamples_found as f64, 0.0, prov);
        let g = build_grid_graph(&plane(), 7).map_err(|e| e.to_string())?;
        let report = helly_check(&g, &HellyOptions::new(2, 3)).map_err(|e| e.to_string())?;
        c.at_most("plane/counterexamples", report.counterexamples_found as f64, 0.0, prov);
        Ok(())
    })();
    if let Err(e) = r {
        c.error("run", Bound::AtMost, 0.0, prov, e);
    }
}

// ---------------------------------------------------------------------------
// axioms

const AXIOM_SAMPLES: usize = 1000;
const AXIOM_TOL: f64 = 1e-7;
const CONTROL_FLOOR: f64 = 1e-3;

struct HandleSurvey {
    id: String,
    reports: Result<Vec<AxiomReport>, EngineError>,
}

fn survey_spaces() -> Vec<ChartAtlas> {
    let mut out: Vec<ChartAtlas> = (1..=5).map(|k| lsp(k).expect("model space")).collect();
    out.push(build_cube_family("F").expect("F"));
    out.push(build_cube_family("F5").expect("F5"));
    out.push(ck_patch(90, 2).expect("patch"));
    out.push(ck_patch(45, 2).expect("patch"));
    out
}

fn axiom_survey(seed: u64) -> Vec<HandleSurvey> {
    let mut out = Vec::new();
    for a in survey_spaces() {
        let a = Arc::new(a);
        for p in PS {
            let h = EngineBicombing::new(a.clone(), p);
            out.push(HandleSurvey {
                id: format!("{}/{}", a.name, p_label(p)),
                reports: check_axioms(&h, &Axiom::BICOMBING, &Sampler::new(seed), AXIOM_SAMPLES, None),
            });
        }
    }
    out
}

fn axioms(seed: u64, survey: &[HandleSurvey], c: &mut Cases) {
    let prov = "claim:bicombing-axioms";
    for s in survey {
        match &s.reports {
            Ok(rs) => {
                for r in rs {
                    c.at_most(&format!("{}/{}", s.id, r.axiom.name()), r.max_violation, AXIOM_TOL, prov);
                }
            }
            Err(e) => c.error(&s.id, Bound::AtMost, AXIOM_TOL, prov, e),
        }
    }
    let a = Arc::new(lsp(2).expect("model space"));
    let glide = Isometry::translation(&a, &[3.0, 0.0]);
    for p in PS {
        let h = EngineBicombing::new(a.clone(), p);
        let r = check_axioms(&h, &[Axiom::Equivariant], &Sampler::new(seed), AXIOM_SAMPLES, Some(&glide));
        c.check(
            &format!("lsp2-glide/{}/equivariant", p_label(p)),
            r.map(|v| v[0].max_violation),
            Bound::AtMost,
            AXIOM_TOL,
            prov,
        );
    }
    // same trajectories at the wrong speed
    let h = nudged(EngineBicombing::new(Arc::new(plane()), PExponent::TWO));
    match check_axioms(&h, &Axiom::BICOMBING, &Sampler::new(seed), AXIOM_SAMPLES, None) {
        Ok(rs) => {
            for r in rs {
                c.at_least(&format!("control-nudged/{}", r.axiom.name()), r.max_violation, CONTROL_FLOOR, "plumbing");
            }
        }
        Err(e) => c.error("control-nudged", Bound::AtLeast, CONTROL_FLOOR, "plumbing", e),
    }
}

fn ccc(survey: &[HandleSurvey], c: &mut Cases) {
    let prov = "claim:conical-consistent-convex";
    for s in survey {
        let Ok(rs) = &s.reports else {
            c.error(&s.id, Bound::AtMost, CCC_FLOOR, prov, "axiom survey failed");
            continue;
        };
        let get = |a: Axiom| rs.iter().find(|r| r.axiom == a).map_or(f64::NAN, |r| r.max_violation);
        let (conical, consistent, convex) = (get(Axiom::Conical), get(Axiom::Consistent), get(Axiom::Convex));
        if conical <= AXIOM_TOL && consistent <= AXIOM_TOL {
            c.at_most(&format!("{}/convex-vs-2conical", s.id), convex, 2.0 * conical + CCC_FLOOR, prov);
        }
    }
}

// ---------------------------------------------------------------------------
// projection

const PROJECTION_TOL: f64 = 1e-9;

fn projection(seed: u64, c: &mut Cases) {
    let prov = "claim:projection-inequality";
    for a in survey_spaces() {
        let a = Arc::new(a);
        for p in PS {
            let h = EngineBicombing::new(a.clone(), p);
            let r = check_projection_inequality(&h, &Sampler::new(seed), AXIOM_SAMPLES);
            c.check(&format!("{}/{}", a.name, p_label(p)), r.map(|r| r.max_violation), Bound::AtMost, PROJECTION_TOL, prov);
        }
    }
    let a = Arc::new(plane());
    let h = EngineBicombing::new(a.clone(), PExponent::TWO);
    let pt = |x: f64, y: f64| a.point("P", &[x, y]).expect("plane point");
    match projection_terms(&h, &pt(0.0, 0.0), &pt(10.0, 0.0), &pt(10.0, 1.0), 5.0) {
        Ok((lhs, bound)) => {
            let s = 101f64.sqrt();
            let exact = lp_norm(&[5.0 - 50.0 / s, 5.0 / s], PExponent::TWO);
            c.at_most("plane-closed-form/lhs", (lhs - exact).abs(), 1e-9, "oracle:closed-form");
            c.at_most("plane-closed-form/bound", (bound - 1.0).abs(), 1e-9, "oracle:closed-form");
            c.at_most("plane-closed-form/lhs-minus-bound", lhs - bound, 0.0, prov);
        }
        Err(e) => c.error("plane-closed-form", Bound::AtMost, 1e-9, "oracle:closed-form", e),
    }
}

// ---------------------------------------------------------------------------
// boundary metrics

const RAY_POOL: usize = 20;
const RAY_TRIPLES: usize = 1000;
const RAY_HORIZON: f64 = 1000.0;
const DO_TERMS: u32 = 40;
const DOC_TOL: f64 = 1e-9;

/// Pairwise boundary data for a pool of rays from `o` and from a nearby `o2`.
struct PairData {
    d_o: f64,
    c1: Option<f64>,
    c2: Option<f64>,
    /// d_{o2,1} of the rays from `o2` to the same targets.
    shifted: Option<f64>,
}

fn separated(r: Result<f64, BoundaryError>) -> Result<Option<f64>, BoundaryError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(BoundaryError::NotSeparated { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn boundary_space(seed: u64, atlas: ChartAtlas, p: PExponent, label: &str, c: &mut Cases) -> Result<(), BoundaryError> {
    let atlas = Arc::new(atlas);
    let handle: Arc<dyn Bicombing> = Arc::new(EngineBicombing::new(atlas.clone(), p));
    let first = atlas.charts()[0].name.clone();
    let o = atlas.point(&first, &[0.0, 0.5]).map_err(EngineError::from)?;
    let sampler = Sampler::new(seed);
    let mut rng = sampler.stream(0);
    // second base point at chart distance 0.35
    let shift = &sample_directions(2, 1, p, &mut rng)[0];
    let o2 = atlas
        .point(&first, &[0.35 * shift[0], 0.5 + 0.35 * shift[1]])
        .map_err(EngineError::from)?;
    let delta = handle.distance(&o, &o2)?;

    let charts = atlas.charts().len();
    let dirs = sample_directions(2, RAY_POOL, PExponent::TWO, &mut rng);
    let targets: Vec<SpacePoint> = dirs
        .iter()
        .map(|d| {
            let ch = rng.gen_range(0..charts);
            atlas
                .point_in(atlas.charts()[ch].id, CoordVec::from_slice_unchecked(&[RAY_HORIZON * d[0], RAY_HORIZON * d[1]]))
                .map_err(EngineError::from)
        })
        .collect::<Result<_, _>>()?;
    let ray = |base: &SpacePoint, t: &SpacePoint| -> Result<TruncatedRay, BoundaryError> {
        let r = TruncatedRay::new(handle.clone(), base.clone(), t.clone(), 1.0)?;
        TruncatedRay::new(handle.clone(), base.clone(), t.clone(), r.reach)
    };
    let rays: Vec<TruncatedRay> = targets.iter().map(|t| ray(&o, t)).collect::<Result<_, _>>()?;
    let rays2: Vec<TruncatedRay> = targets.iter().map(|t| ray(&o2, t)).collect::<Result<_, _>>()?;

    let pairs: Vec<(usize, usize)> = (0..RAY_POOL).flat_map(|i| (i + 1..RAY_POOL).map(move |j| (i, j))).collect();
    let data: Vec<PairData> = pairs
        .par_iter()
        .map(|&(i, j)| {
            Ok(PairData {
                d_o: d_o_metric(&o, &rays[i], &rays[j], DO_TERMS)?.value,
                c1: separated(d_oc_metric(&o, 1.0, &rays[i], &rays[j], 0.0))?,
                c2: separated(d_oc_metric(&o, 2.0, &rays[i], &rays[j], 0.0))?,
                shifted: separated(d_oc_metric(&o2, 1.0, &rays2[i], &rays2[j], 0.0))?,
            })
        })
        .collect::<Result<_, BoundaryError>>()?;
    let at = |i: usize, j: usize| -> &PairData {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let k = pairs.binary_search(&(i, j)).expect("pair index");
        &data[k]
    };

    // triples with every side separated at both scales
    let mut triples: Vec<(usize, usize, usize)> = (0..RAY_POOL)
        .flat_map(|i| (i + 1..RAY_POOL).flat_map(move |j| (j + 1..RAY_POOL).map(move |k| (i, j, k))))
        .filter(|&(i, j, k)| [at(i, j), at(j, k), at(i, k)].iter().all(|d| d.c1.is_some()))
        .collect();
    triples.shuffle(&mut rng);
    triples.truncate(RAY_TRIPLES);
    c.at_least(&format!("{label}/triples"), triples.len() as f64, RAY_TRIPLES as f64, "plumbing");

    let excess = |f: &dyn Fn(usize, usize) -> f64| {
        max_of(triples.iter().flat_map(|&(i, j, k)| {
            [(i, j, k), (j, k, i), (k, i, j)].map(|(a, b, m)| f(a, m) - f(a, b) - f(b, m))
        }))
    };
    let prov = "claim:boundary-metric";
    let tri_o = excess(&|i, j| at(i, j).d_o);
    c.at_most(&format!("{label}/do-triangle"), tri_o, 3.0 * 0.5f64.powi(DO_TERMS as i32), prov);
    let tri_c = excess(&|i, j| at(i, j).c1.unwrap());
    c.at_most(&format!("{label}/doc-triangle"), tri_c, DOC_TOL, prov);

    let prov = "claim:quasisymmetry";
    // C = 1 ≤ C' = 2: d_{o,2} ≤ d_{o,1} ≤ 2 d_{o,2}
    let scale = max_of(data.iter().filter_map(|d| Some((d.c1?, d.c2?))).map(|(a, b)| (b - a).max(a - 2.0 * b)));
    c.at_most(&format!("{label}/doc-scale-comparability"), scale, DOC_TOL, prov);
    let k = 1.0 / (1.0 - 2.0 * delta);
    let base = max_of(
        data.iter()
            .filter_map(|d| Some((d.c1?, d.shifted?)))
            .map(|(a, b)| (a - k * b).max(b - k * a)),
    );
    c.at_most(&format!("{label}/doc-basepoint-comparability"), base, DOC_TOL, prov);
    Ok(())
}

fn boundary_metrics(seed: u64, c: &mut Cases) {
    let spaces = [
        (plane(), PExponent::TWO, "plane/p2"),
        (plane(), PExponent::INF, "plane/pinf"),
        (lsp(2).expect("model space"), PExponent::TWO, "lsp2/p2"),
        (lsp(2).expect("model space"), PExponent::INF, "lsp2/pinf"),
    ];
    for (a, p, label) in spaces {
        if let Err(e) = boundary_space(seed, a, p, label, c) {
            c.error(label, Bound::AtMost, DOC_TOL, "claim:boundary-metric", e);
        }
    }
    // D(t) = t√2 for the coordinate rays of the ℓ² plane
    let a = Arc::new(plane());
    let h: Arc<dyn Bicombing> = Arc::new(EngineBicombing::new(a.clone(), PExponent::TWO));
    let o = a.point("P", &[0.0, 0.0]).expect("origin");
    let v = TruncatedRay::along(h.clone(), o.clone(), &[1.0, 0.0], RAY_HORIZON, RAY_HORIZON)
        .and_then(|e1| {
            let e2 = TruncatedRay::along(h.clone(), o.clone(), &[0.0, 1.0], RAY_HORIZON, RAY_HORIZON)?;
            d_oc_metric(&o, 1.0, &e1, &e2, 0.0)
        })
        .map(|v| (v - 2f64.sqrt()).abs());
    c.check("plane/p2/doc-coordinate-rays", v, Bound::AtMost, 1e-9, "oracle:closed-form");
}

// ---------------------------------------------------------------------------
// join

const JOIN_RAYS: usize = 50;
const JOIN_TOL: f64 = 1e-9;

/// Unit-norm parameters (a, b) spread over the quarter circle.
fn unit_params(p: PExponent, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
            let (a, b) = (th.cos().max(0.0), th.sin().max(0.0));
            let s = lp_norm(&[a, b], p);
            (a / s, b / s)
        })
        .collect()
}

fn join_space(x: Arc<ChartAtlas>, y: Arc<ChartAtlas>, rx_target: (&str, &[f64]), p: PExponent, label: &str, c: &mut Cases) -> Result<(), BoundaryError> {
    let hx: Arc<dyn Bicombing> = Arc::new(EngineBicombing::new(x.clone(), p));
    let hy: Arc<dyn Bicombing> = Arc::new(EngineBicombing::new(y.clone(), p));
    let prod = Arc::new(lp_product(x.clone(), y.clone(), p).map_err(EngineError::from)?);
    let hp: Arc<dyn Bicombing> = Arc::new(EngineBicombing::new(prod.clone(), p));
    let xs = x.charts()[0].name.clone();
    let bx = x.point(&xs, &vec![0.0; x.charts()[0].dim()]).map_err(EngineError::from)?;
    let tx = x.point(rx_target.0, rx_target.1).map_err(EngineError::from)?;
    let rx = TruncatedRay::new(hx.clone(), bx.clone(), tx.clone(), 1.0)?;
    let rx = TruncatedRay::new(hx, bx, tx, rx.reach)?;
    let by = y.point("L", &[0.0]).map_err(EngineError::from)?;
    let ry = TruncatedRay::along(hy, by, &[1.0], RAY_HORIZON, RAY_HORIZON)?;

    let rays: Vec<(f64, f64, TruncatedRay)> = unit_params(p, JOIN_RAYS)
        .into_iter()
        .map(|(a, b)| Ok((a, b, product_ray(hp.clone(), &rx, &ry, a, b)?)))
        .collect::<Result<_, BoundaryError>>()?;

    let prov = "claim:join";
    let checks: Vec<(f64, f64)> = rays
        .par_iter()
        .map(|(a, b, r)| {
            let speed = r.speed_gap(9)?;
            let top = r.horizon.min(r.reach);
            let mut factor: f64 = 0.0;
            let structure = prod.product().expect("product atlas");
            for i in 0..=8 {
                let t = top * i as f64 / 8.0;
                let (px, py) = structure.split(&r.eval(t)?);
                factor = factor.max(rx.handle().distance(&px, &rx.eval(a * t)?)?);
                factor = factor.max(ry.handle().distance(&py, &ry.eval(b * t)?)?);
            }
            Ok((speed, factor))
        })
        .collect::<Result<_, BoundaryError>>()?;
    c.at_most(&format!("{label}/speed-gap"), max_of(checks.iter().map(|v| v.0)), JOIN_TOL, prov);
    c.at_most(&format!("{label}/factor-gap"), max_of(checks.iter().map(|v| v.1)), JOIN_TOL, prov);

    let pairs: Vec<(usize, usize)> = (0..rays.len()).flat_map(|i| (i + 1..rays.len()).map(move |j| (i, j))).collect();
    let verdicts: Vec<Verdict> = pairs
        .par_iter()
        .map(|&(i, j)| Ok(asymptotic_verdict(&rays[i].2, &rays[j].2, 1e-6, 1e-6)?.verdict))
        .collect::<Result<_, BoundaryError>>()?;
    let bad = verdicts.iter().filter(|v| **v != Verdict::Divergent).count();
    c.at_most(&format!("{label}/non-divergent-pairs"), bad as f64, 0.0, prov);
    Ok(())
}

fn join(c: &mut Cases) {
    let l = Arc::new(line());
    let l2 = Arc::new(lsp(2).expect("model space"));
    for p in PS {
        let label = format!("line*line/{}", p_label(p));
        if let Err(e) = join_space(l.clone(), l.clone(), ("L", &[RAY_HORIZON]), p, &label, c) {
            c.error(&label, Bound::AtMost, JOIN_TOL, "claim:join", e);
        }
        let label = format!("lsp2*line/{}", p_label(p));
        if let Err(e) = join_space(l2.clone(), l.clone(), ("P2", &[600.0, 800.0]), p, &label, c) {
            c.error(&label, Bound::AtMost, JOIN_TOL, "claim:join", e);
        }
    }
}

// ---------------------------------------------------------------------------
// half-plane complex

fn halfplane(c: &mut Cases) {
    let prov = "claim:halfplane-nonconvergence";
    let opts = HalfPlaneOptions::default();
    match halfplane_probe(&opts) {
        Ok(r) => {
            c.at_least("cesaro-oscillation", r.oscillation, 0.3, prov);
            let worst = r.gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
            c.at_least("recurring-gap", worst, opts.gap, prov);
            c.at_most("engine-vs-closed-form", r.engine_gap, 1e-9, "oracle:closed-form");
        }
        Err(e) => c.error("probe", Bound::AtLeast, 0.3, prov, e),
    }
}

// ---------------------------------------------------------------------------
// oracle agreement

const ORACLE_H: f64 = 1.0 / 64.0;
const ORACLE_SOURCES: u64 = 10;
const ORACLE_TARGETS: u64 = 10;
const ORACLE_RADIUS: f64 = 1.0;
const ORACLE_WINDOW: f64 = 3.0;

fn oracle_spaces() -> Vec<ChartAtlas> {
    let mut out = vec![plane()];
    out.extend((1..=5).map(|k| lsp(k).expect("model space")));
    out.push(ck_patch(90, 1).expect("patch"));
    out.push(ck_patch(45, 1).expect("patch"));
    out.push(build_cube_family("F").expect("F"));
    out.push(build_cube_family("F5").expect("F5"));
    out.push(f_times_interval().expect("FxI"));
    out
}

/// max |d − d_grid| / (h d) over the pairs; zero-distance pairs must match
/// exactly. The grid window grows until every query clears it.
fn oracle_ratio(a: &ChartAtlas, sampler: &Sampler, p: PExponent) -> Result<f64, String> {
    let mut window = ORACLE_WINDOW;
    loop {
        match oracle_ratio_in(a, sampler, p, window) {
            Err(OracleFailure::Oracle(OracleError::WindowTooSmall { .. })) if window < 4.0 * ORACLE_WINDOW => {
                window += ORACLE_WINDOW
            }
            r => return r.map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Error)]
enum OracleFailure {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn oracle_ratio_in(a: &ChartAtlas, sampler: &Sampler, p: PExponent, window: f64) -> Result<f64, OracleFailure> {
    let grid = GridOracle::build(a, ORACLE_H, window)?;
    let opts = EngineOptions::default();
    let mut worst: f64 = 0.0;
    for s in 0..ORACLE_SOURCES {
        let mut rng = sampler.stream(s);
        let x = sampler.point(a, &mut rng);
        let field = grid.field(&x, p)?;
        let ys: Vec<SpacePoint> = (0..ORACLE_TARGETS).map(|_| sampler.point(a, &mut rng)).collect();
        let rows: Vec<(f64, f64)> = ys
            .par_iter()
            .map(|y| {
                let d = distance(a, &x, y, p, &opts)?;
                Ok((d, grid.read(&field, &x, y, p)?))
            })
            .collect::<Result<_, OracleFailure>>()?;
        for (d, g) in rows {
            grid.check_window(field.boundary, g, p)?;
            let r = if d > 0.0 {
                (d - g).abs() / (ORACLE_H * d)
            } else if g == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

fn oracle_agreement(seed: u64, c: &mut Cases) {
    let sampler = Sampler::new(seed).with_radius(ORACLE_RADIUS);
    for a in oracle_spaces() {
        for p in PS {
            c.check(
                &format!("{}/{}", a.name, p_label(p)),
                oracle_ratio(&a, &sampler, p),
                Bound::AtMost,
                oracle_constant(p),
                "plumbing",
            );
        }
    }
}

// ---------------------------------------------------------------------------
// midpoints

const MIDPOINT_PAIRS: u64 = 100;
const MIDPOINT_TOL: f64 = 1e-12;
const REVERSIBLE_SAMPLES: usize = 200;

fn midpoints(seed: u64, c: &mut Cases) {
    let prov = "claim:midpoint-limit";
    for (label, atlas) in [("plane", plane()), ("lsp2", lsp(2).expect("model space"))] {
        let a = Arc::new(atlas);
        for p in [PExponent::TWO, PExponent::INF] {
            let id = format!("{label}/{}", p_label(p));
            let h = nudged(EngineBicombing::new(a.clone(), p));
            let sampler = Sampler::new(seed);
            let rows: Result<Vec<(f64, bool)>, EngineError> = (0..MIDPOINT_PAIRS)
                .into_par_iter()
                .map(|i| {
                    let mut rng = sampler.stream(i);
                    let x = sampler.point(&a, &mut rng);
                    let y = sampler.point(&a, &mut rng);
                    let m1 = midpoint(&h, &x, &y, MIDPOINT_TOL)?;
                    let m2 = midpoint(&h, &y, &x, MIDPOINT_TOL)?;
                    let gap = h.distance(&m1.point, &m2.point)?;
                    Ok((gap, m1.contracting() && m2.contracting()))
                })
                .collect();
            match rows {
                Ok(rows) => {
                    c.at_most(&format!("{id}/symmetry"), max_of(rows.iter().map(|r| r.0)), 1e-9, prov);
                    let bad = rows.iter().filter(|r| !r.1).count();
                    c.at_most(&format!("{id}/non-contracting"), bad as f64, 0.0, prov);
                }
                Err(e) => c.error(&format!("{id}/symmetry"), Bound::AtMost, 1e-9, prov, e),
            }
            let r = reversibilize(nudged(EngineBicombing::new(a.clone(), p)), MIDPOINT_TOL);
            let rep = check_axioms(&r, &[Axiom::Reversible], &sampler, REVERSIBLE_SAMPLES, None);
            c.check(&format!("{id}/reversibilized"), rep.map(|v| v[0].max_violation), Bound::AtMost, AXIOM_TOL, prov);
        }
    }
}

// ---------------------------------------------------------------------------
// coverage

fn coverage(seed: u64, c: &mut Cases) {
    let prov = "claim:almost-complete";
    let sampler = Sampler::new(seed);
    let opts = CoverageOptions::default();
    let run = |a: ChartAtlas, p: PExponent| {
        let first = a.charts()[0].name.clone();
        let a = Arc::new(a);
        let o = a.point(&first, &[0.0, 0.0]).expect("origin");
        coverage_radius(&EngineBicombing::new(a.clone(), p), &o, 8.0, &sampler, &opts)
    };
    match run(plane(), PExponent::TWO) {
        Ok(r) => c.at_most("plane/p2/coverage", r.coverage, r.resolution, prov),
        Err(e) => c.error("plane/p2/coverage", Bound::AtMost, 0.0, prov, e),
    }
    for (label, a) in [("lsp2", lsp(2).expect("model space")), ("ck_patch(90,2)", ck_patch(90, 2).expect("patch"))] {
        match run(a, PExponent::TWO) {
            Ok(r) => c.push(
                &format!("{label}/p2/coverage"),
                r.coverage,
                Bound::AtLeast,
                0.0,
                "plumbing",
                Some(format!("resolution {}, {} rays, {} samples", r.resolution, r.rays, r.samples)),
            ),
            Err(e) => c.error(&format!("{label}/p2/coverage"), Bound::AtLeast, 0.0, "plumbing", e),
        }
    }
}
