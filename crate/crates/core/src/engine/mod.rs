//! Distances and geodesics in chart atlases.
//!
//! The distance between two points is the least total length of a path that
//! hops through a sequence of charts, crossing each consecutive pair on one of
//! their gluing faces. For a fixed chart sequence the crossing points solve a
//! convex problem (see [`solver`]). Sequences are simple paths in the chart
//! graph, enumerated depth-first and pruned with cheap lower bounds.

mod handle;
pub mod midpoint;
pub mod oracle;
pub mod path;
pub(crate) mod solver;

use std::collections::HashSet;

use thiserror::Error;

pub use handle::{sigma_eval, Bicombing, EngineBicombing, Method};
pub use midpoint::{midpoint, reversibilize, MidpointTrace, Reversibilized};
pub use oracle::{grid_oracle_distance, GridOracle, OracleError};
pub use path::{PathSegment, PolyPath};

use crate::atlas::{AtlasError, ChartAtlas, ChartId, SpacePoint};
use crate::lp::{CoordVec, PExponent, DEFAULT_TOL};
use solver::{CrossingProblem, Segment, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("no chart sequence of length <= {0} connects the endpoints")]
    SearchExhausted(usize),
    #[error("certificate failure for p={p}: trajectory length {length} exceeds distance {distance}")]
    Certificate { p: PExponent, length: f64, distance: f64 },
    #[error("midpoint iteration did not converge after {iterations} steps (gap {gap})")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("parameter {t} outside [0, 1]")]
    BadParameter { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Longest admissible chart sequence, counted in charts.
    pub max_chart_seq_len: usize,
    pub tol: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            max_chart_seq_len: 8,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Hop {
    gluing: usize,
    from_a: bool,
}

#[derive(Debug, Clone)]
struct Candidate {
    start: SpacePoint,
    end: SpacePoint,
    charts: Vec<ChartId>,
    hops: Vec<Hop>,
    lower_bound: f64,
}

/// Gluing-metric distance.
pub fn distance(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    opts: &EngineOptions,
) -> Result<f64, EngineError> {
    Ok(optimize(atlas, x, y, p, false, opts)?.0)
}

/// Canonical geodesic with the runtime length certificate.
pub fn geodesic(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    opts: &EngineOptions,
) -> Result<PolyPath, EngineError> {
    let path = canonical_trajectory(atlas, x, y, p, opts)?;
    certify(atlas, &path, p, opts)?;
    Ok(path)
}

/// Checks that the d_p length of `path` equals the d_p distance of its ends.
pub fn certify(
    atlas: &ChartAtlas,
    path: &PolyPath,
    p: PExponent,
    opts: &EngineOptions,
) -> Result<(), EngineError> {
    let length = path.length(atlas, p);
    let d = distance(atlas, path.start(), path.end(), p, opts)?;
    if length - d > opts.tol * (1.0 + d) {
        return Err(EngineError::Certificate {
            p,
            length,
            distance: d,
        });
    }
    Ok(())
}

/// The canonical trajectory without the certificate: the ℓ² geodesic; on
/// product atlases the product of the factors' canonical trajectories, each
/// factor run at constant d_p speed.
pub fn canonical_trajectory(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    opts: &EngineOptions,
) -> Result<PolyPath, EngineError> {
    if let Some(prod) = atlas.product() {
        let (xa, xb) = prod.split(&atlas.canonicalize(x));
        let (ya, yb) = prod.split(&atlas.canonicalize(y));
        let pa = canonical_trajectory(&prod.left, &xa, &ya, p, opts)?;
        let pb = canonical_trajectory(&prod.right, &xb, &yb, p, opts)?;
        return Ok(product_path(atlas, &pa, &pb, p));
    }
    Ok(optimize(atlas, x, y, PExponent::TWO, false, opts)?.1)
}

/// Geodesic from the direct ℓ^p optimization; for p ∈ {1, ∞} the least-ℓ²
/// path among the ℓ^p minimizers.
pub fn direct_geodesic(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    opts: &EngineOptions,
) -> Result<PolyPath, EngineError> {
    Ok(optimize(atlas, x, y, p, true, opts)?.1)
}

/// Distance in a product atlas computed from the factors.
pub fn product_distance(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    opts: &EngineOptions,
) -> Result<Option<f64>, EngineError> {
    let Some(prod) = atlas.product() else {
        return Ok(None);
    };
    let (xa, xb) = prod.split(&atlas.canonicalize(x));
    let (ya, yb) = prod.split(&atlas.canonicalize(y));
    let da = distance(&prod.left, &xa, &ya, p, opts)?;
    let db = distance(&prod.right, &xb, &yb, p, opts)?;
    Ok(Some(p.combine(da, db)))
}

fn product_path(atlas: &ChartAtlas, a: &PolyPath, b: &PolyPath, p: PExponent) -> PolyPath {
    let prod = atlas.product().expect("product atlas");
    let fa = fractions(&prod.left, a, p);
    let fb = fractions(&prod.right, b, p);
    let mut cuts: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|u, v| (*u - *v).abs() < 1e-15);
    let piece = |path: &PolyPath, fr: &[f64], lo: f64, hi: f64| -> (ChartId, CoordVec, CoordVec) {
        if path.segments.is_empty() {
            let x = &path.breakpoints[0];
            return (x.chart, x.coords.clone(), x.coords.clone());
        }
        let mid = 0.5 * (lo + hi);
        let j = fr[1..]
            .iter()
            .position(|&f| f >= mid)
            .unwrap_or(path.segments.len() - 1);
        let s = &path.segments[j];
        let span = fr[j + 1] - fr[j];
        let at = |f: f64| {
            let u = if span > 0.0 { ((f - fr[j]) / span).clamp(0.0, 1.0) } else { 0.0 };
            crate::lp::lerp(&s.from, &s.to, u).unwrap()
        };
        (s.chart, at(lo), at(hi))
    };
    let mut segs = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let (ca, a0, a1) = piece(a, &fa, lo, hi);
        let (cb, b0, b1) = piece(b, &fb, lo, hi);
        segs.push(PathSegment {
            chart: prod.index[&(ca, cb)],
            from: a0.concat(&b0),
            to: a1.concat(&b1),
        });
    }
    if segs.is_empty() {
        return PolyPath::constant(prod.join(&a.breakpoints[0], &b.breakpoints[0]));
    }
    PolyPath::from_segments(atlas, segs, 0.0)
}

/// Breakpoint positions as d_p arclength fractions.
fn fractions(atlas: &ChartAtlas, path: &PolyPath, p: PExponent) -> Vec<f64> {
    let cum = path.cumulative(atlas, p);
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![0.0, 1.0];
    }
    let mut f: Vec<f64> = cum.iter().map(|c| c / total).collect();
    *f.last_mut().unwrap() = 1.0;
    f
}

/// Core search. Returns the optimal ℓ^p value and the selected path.
fn optimize(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    lex: bool,
    opts: &EngineOptions,
) -> Result<(f64, PolyPath), EngineError> {
    let x = atlas.canonicalize(x);
    let y = atlas.canonicalize(y);
    if atlas.same_point(&x, &y) {
        return Ok((0.0, PolyPath::constant(x)));
    }
    let reps_x = atlas.representatives(&x);
    let reps_y = atlas.representatives(&y);
    if atlas.convex_charts() {
        for rx in &reps_x {
            if let Some(ry) = reps_y.iter().find(|r| r.chart == rx.chart) {
                let d = atlas.chart_distance(rx.chart, &rx.coords, &ry.coords, p);
                let seg = PathSegment {
                    chart: rx.chart,
                    from: rx.coords.clone(),
                    to: ry.coords.clone(),
                };
                return Ok((d, PolyPath::from_segments(atlas, vec![seg], 0.0)));
            }
        }
    }
    let mut cands = enumerate(atlas, &reps_x, &reps_y, opts.max_chart_seq_len);
    if cands.is_empty() {
        return Err(EngineError::SearchExhausted(opts.max_chart_seq_len));
    }
    for c in &mut cands {
        c.lower_bound = lower_bound(atlas, c, p);
    }
    cands.sort_by(|a, b| {
        a.lower_bound
            .total_cmp(&b.lower_bound)
            .then(a.hops.len().cmp(&b.hops.len()))
    });

    // stage one: least ℓ^p value
    let mut best = f64::INFINITY;
    let mut solved: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    for (i, c) in cands.iter().enumerate() {
        let slack = if lex { opts.tol * (1.0 + best) } else { -opts.tol * (1.0 + best.min(1e300)) };
        if c.lower_bound > best + slack {
            continue;
        }
        let prob = build_problem(atlas, c);
        let theta = prob.minimize(p)?;
        let v = prob.objective(&theta, p);
        if v < best {
            best = v;
        }
        solved.push((i, v, theta));
    }
    if !lex || !p.is_polyhedral() {
        // near-ties usually mean a longer sequence retraced the same path
        // with a degenerate detour; the shorter one is solved more accurately
        let near = best + 1e-12 * (1.0 + best);
        let (i, v, theta) = solved
            .into_iter()
            .filter(|s| s.1 <= near)
            .min_by(|a, b| {
                cands[a.0]
                    .hops
                    .len()
                    .cmp(&cands[b.0].hops.len())
                    .then(a.1.total_cmp(&b.1))
            })
            .expect("at least one candidate is solved");
        return Ok((v, assemble(atlas, &cands[i], &theta, opts)));
    }
    // stage two: among near-optimal sequences, least ℓ² length of the tie-broken path
    let mut choice: Option<(f64, usize, Vec<f64>)> = None;
    for (i, v, _) in solved {
        if v > best + opts.tol * (1.0 + best) {
            continue;
        }
        let prob = build_problem(atlas, &cands[i]);
        let theta = prob.minimize_lex(p)?;
        let l2 = prob.objective(&theta, PExponent::TWO);
        if choice.as_ref().map_or(true, |c| l2 < c.0) {
            choice = Some((l2, i, theta));
        }
    }
    let (_, i, theta) = choice.expect("a near-optimal sequence exists");
    Ok((best, assemble(atlas, &cands[i], &theta, opts)))
}

/// Simple chart paths from any chart of `reps_x` to any chart of `reps_y`.
fn enumerate(
    atlas: &ChartAtlas,
    reps_x: &[SpacePoint],
    reps_y: &[SpacePoint],
    max_len: usize,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut seen_starts = HashSet::new();
    for rx in reps_x {
        if !seen_starts.insert(rx.chart) {
            continue;
        }
        let mut charts = vec![rx.chart];
        let mut hops = Vec::new();
        dfs(atlas, rx, reps_y, max_len, &mut charts, &mut hops, &mut out);
    }
    out
}

fn dfs(
    atlas: &ChartAtlas,
    rx: &SpacePoint,
    reps_y: &[SpacePoint],
    max_len: usize,
    charts: &mut Vec<ChartId>,
    hops: &mut Vec<Hop>,
    out: &mut Vec<Candidate>,
) {
    let cur = *charts.last().unwrap();
    for ry in reps_y.iter().filter(|r| r.chart == cur) {
        out.push(Candidate {
            start: rx.clone(),
            end: ry.clone(),
            charts: charts.clone(),
            hops: hops.clone(),
            lower_bound: 0.0,
        });
    }
    if charts.len() >= max_len {
        return;
    }
    for &(g, from_a) in atlas.adjacency(cur) {
        let next = atlas.gluings()[g].sides(from_a).1;
        if charts.contains(&next) {
            continue;
        }
        charts.push(next);
        hops.push(Hop { gluing: g, from_a });
        dfs(atlas, rx, reps_y, max_len, charts, hops, out);
        charts.pop();
        hops.pop();
    }
}

/// Offsets of each hop's parameters inside θ.
fn param_offsets(atlas: &ChartAtlas, c: &Candidate) -> (Vec<usize>, usize) {
    let mut offs = Vec::with_capacity(c.hops.len());
    let mut n = 0;
    for h in &c.hops {
        offs.push(n);
        n += atlas.gluings()[h.gluing].param_dim();
    }
    (offs, n)
}

fn build_problem(atlas: &ChartAtlas, c: &Candidate) -> CrossingProblem {
    let (offs, n) = param_offsets(atlas, c);
    let mut bounds = Vec::with_capacity(n);
    for h in &c.hops {
        bounds.extend_from_slice(&atlas.gluings()[h.gluing].param_bounds);
    }
    let k = c.hops.len();
    let mut segs = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let chart = atlas.chart(c.charts[j]);
        let d = chart.dim();
        let mut rows = vec![0.0; d * n];
        let mut offset = vec![0.0; d];
        // + end point of the segment
        if j < k {
            let g = &atlas.gluings()[c.hops[j].gluing];
            let (face, _, _) = g.sides(c.hops[j].from_a);
            add_face(&mut rows, &mut offset, n, offs[j], face, 1.0);
        } else {
            for (o, v) in offset.iter_mut().zip(c.end.coords.iter()) {
                *o += v;
            }
        }
        // − start point of the segment
        if j > 0 {
            let g = &atlas.gluings()[c.hops[j - 1].gluing];
            let (_, _, face) = g.sides(c.hops[j - 1].from_a);
            add_face(&mut rows, &mut offset, n, offs[j - 1], face, -1.0);
        } else {
            for (o, v) in offset.iter_mut().zip(c.start.coords.iter()) {
                *o -= v;
            }
        }
        segs.push(Segment {
            rows,
            offset,
            weights: chart.weights.clone(),
        });
    }
    CrossingProblem { n, bounds, segs }
}

fn add_face(
    rows: &mut [f64],
    offset: &mut [f64],
    n: usize,
    off: usize,
    face: &crate::atlas::Face,
    sign: f64,
) {
    for (o, v) in offset.iter_mut().zip(face.base.iter()) {
        *o += sign * v;
    }
    for (k, dir) in face.dirs.iter().enumerate() {
        for (r, v) in dir.iter().enumerate() {
            rows[r * n + off + k] += sign * v;
        }
    }
}

fn assemble(atlas: &ChartAtlas, c: &Candidate, theta: &[f64], opts: &EngineOptions) -> PolyPath {
    let (offs, _) = param_offsets(atlas, c);
    let mut pts_before = Vec::new();
    let mut pts_after = Vec::new();
    for (j, h) in c.hops.iter().enumerate() {
        let g = &atlas.gluings()[h.gluing];
        let th = &theta[offs[j]..offs[j] + g.param_dim()];
        let (fa, _, fb) = g.sides(h.from_a);
        pts_before.push(fa.eval(th));
        pts_after.push(fb.eval(th));
    }
    let k = c.hops.len();
    let mut segs = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let from = if j == 0 { c.start.coords.clone() } else { pts_after[j - 1].clone() };
        let to = if j == k { c.end.coords.clone() } else { pts_before[j].clone() };
        segs.push(PathSegment {
            chart: c.charts[j],
            from,
            to,
        });
    }
    let scale = 1.0
        + segs
            .iter()
            .flat_map(|s| s.from.iter().chain(s.to.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()));
    PolyPath::from_segments(atlas, segs, opts.tol.min(1e-11) * scale)
}

/// Distance from the start to the first face plus from the last face to the end.
fn lower_bound(atlas: &ChartAtlas, c: &Candidate, p: PExponent) -> f64 {
    if c.hops.is_empty() {
        return atlas.chart_distance(c.start.chart, &c.start.coords, &c.end.coords, p);
    }
    let first = c.hops[0];
    let last = *c.hops.last().unwrap();
    let g0 = &atlas.gluings()[first.gluing];
    let g1 = &atlas.gluings()[last.gluing];
    let a = point_face_distance(atlas, c.charts[0], &c.start.coords, g0.sides(first.from_a).0, &g0.param_bounds, p);
    let b = point_face_distance(atlas, *c.charts.last().unwrap(), &c.end.coords, g1.sides(last.from_a).2, &g1.param_bounds, p);
    a + b
}

fn point_face_distance(
    atlas: &ChartAtlas,
    chart: ChartId,
    q: &CoordVec,
    face: &crate::atlas::Face,
    bounds: &[(f64, f64)],
    p: PExponent,
) -> f64 {
    let k = face.dirs.len();
    if k > 1 {
        return 0.0;
    }
    let d = q.dim();
    let mut rows = vec![0.0; d * k];
    let mut offset = vec![0.0; d];
    add_face(&mut rows, &mut offset, k, 0, face, 1.0);
    for (o, v) in offset.iter_mut().zip(q.iter()) {
        *o -= v;
    }
    let prob = CrossingProblem {
        n: k,
        bounds: bounds.to_vec(),
        segs: vec![Segment {
            rows,
            offset,
            weights: atlas.chart(chart).weights.clone(),
        }],
    };
    match prob.minimize(p) {
        Ok(th) => prob.objective(&th, p),
        Err(_) => 0.0,
    }
}

/// Outcome of [`local_geodesic_check`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LocalCheck {
    pub ok: bool,
    /// Worst (s, t, sub-path length, distance) over the probed windows.
    pub worst: Option<(f64, f64, f64, f64)>,
}

/// Tests whether every sub-path of d_p arclength at most `eps` is distance
/// realizing. Windows are probed on a regular grid and around every breakpoint.
pub fn local_geodesic_check(
    atlas: &ChartAtlas,
    path: &PolyPath,
    p: PExponent,
    eps: f64,
    opts: &EngineOptions,
) -> Result<LocalCheck, EngineError> {
    let cum = path.cumulative(atlas, p);
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return Ok(LocalCheck { ok: true, worst: None });
    }
    let eps = eps.min(total);
    let mut starts: Vec<f64> = Vec::new();
    let steps = ((total - eps) / (eps / 4.0)).ceil().max(0.0) as usize;
    for i in 0..=steps {
        starts.push((i as f64 * eps / 4.0).min(total - eps));
    }
    for &b in &cum[1..cum.len() - 1] {
        starts.push((b - eps / 2.0).clamp(0.0, total - eps));
    }
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    let mut worst_excess = f64::NEG_INFINITY;
    for s in starts {
        let t = s + eps;
        let a = path.point_at_arclength(atlas, s, p);
        let b = path.point_at_arclength(atlas, t, p);
        let d = distance(atlas, &a, &b, p, opts)?;
        let excess = (t - s) - d;
        if excess > worst_excess {
            worst_excess = excess;
            worst = Some((s, t, t - s, d));
        }
    }
    Ok(LocalCheck {
        ok: worst_excess <= opts.tol * (1.0 + eps),
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::build_family;

    fn opts() -> EngineOptions {
        EngineOptions::default()
    }

    #[test]
    fn lsp2_examples() {
        let a = build_family("lsp2").unwrap();
        let x = a.point("P1", &[0.0, 1.0]).unwrap();
        let y = a.point("P2", &[0.0, 1.0]).unwrap();
        assert_eq!(distance(&a, &x, &x, PExponent::INF, &opts()).unwrap(), 0.0);
        let d = distance(&a, &x, &y, PExponent::INF, &opts()).unwrap();
        assert!((d - 2.0).abs() < 1e-12, "{d}");
        let g = geodesic(&a, &x, &y, PExponent::INF, &opts()).unwrap();
        assert_eq!(g.segments.len(), 2);
        assert_eq!(a.format_point(&g.breakpoints[1]), "P1:0,0");
    }

    #[test]
    fn lsp4_corner_chain() {
        let a = build_family("lsp4").unwrap();
        let x = a.point("P1", &[0.0, -1.0]).unwrap();
        let y = a.point("P3", &[-1.0, 0.0]).unwrap();
        for p in [PExponent::ONE, PExponent::TWO, PExponent::INF] {
            let d = distance(&a, &x, &y, p, &opts()).unwrap();
            assert!((d - 2.0).abs() < 1e-9, "{p}: {d}");
            let g = geodesic(&a, &x, &y, p, &opts()).unwrap();
            assert_eq!(g.breakpoints.len(), 3);
            assert!(g.breakpoints[1].coords.max_abs_diff(&[0.0, 0.0].into()) < 1e-9);
            let mid = g.point_at(&a, 0.5, p);
            assert!(a.same_point(&mid, &a.point("P1", &[0.0, 0.0]).unwrap()) || mid.coords.max_abs_diff(&[0.0, 0.0].into()) < 1e-9);
            let lc = local_geodesic_check(&a, &g, p, 0.1, &opts()).unwrap();
            assert!(lc.ok, "{lc:?}");
        }
    }

    #[test]
    fn bent_path_is_not_locally_geodesic() {
        let a = build_family("plane").unwrap();
        let c = a.chart_by_name("P").unwrap();
        let path = PolyPath::from_segments(
            &a,
            vec![
                PathSegment { chart: c, from: [0.0, 0.0].into(), to: [1.0, 0.0].into() },
                PathSegment { chart: c, from: [1.0, 0.0].into(), to: [1.0, 1.0].into() },
            ],
            0.0,
        );
        let lc = local_geodesic_check(&a, &path, PExponent::TWO, 0.2, &opts()).unwrap();
        assert!(!lc.ok);
        let (s, t, len, d) = lc.worst.unwrap();
        assert!(s < 1.0 && t > 1.0 && d < len);
    }
}
