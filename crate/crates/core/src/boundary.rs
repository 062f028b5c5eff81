//! Truncated rays, the boundary metrics d_o and d_{o,C}, asymptotics of ray
//! pairs, rays in ℓ^p products, reparametrization between exponents, the
//! coverage probe and the half-plane divergence probe.
//!
//! A ray is always a proxy: the geodesic of a handle from its base to a far
//! anchor, followed with the stopping convention ρ(t) = σ(min(t/d, 1)).

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::atlas::{ChartAtlas, ChartId, SpacePoint};
use crate::engine::{canonical_trajectory, distance, Bicombing, EngineError, EngineOptions, PathSegment, PolyPath};
use crate::families::{block_sequence, halfplane_complex};
use crate::lp::{lp_norm, CoordVec, PExponent};
use crate::verify::Sampler;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("t = {t} lies beyond the ray horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("horizon {horizon} is too small: {needed} is required")]
    HorizonTooSmall { needed: f64, horizon: f64 },
    #[error("rays are only {separation} apart at the horizon {horizon}, below C = {c}")]
    NotSeparated { c: f64, separation: f64, horizon: f64 },
    #[error("factor weights ({a}, {b}) must be nonnegative with unit ℓ^{p} norm")]
    NotUnit { a: f64, b: f64, p: PExponent },
    #[error("{0}")]
    Invalid(String),
}

/// Geodesic from `base` towards `target`, stopped at the target and defined
/// on `[0, horizon]`.
#[derive(Clone)]
pub struct TruncatedRay {
    pub base: SpacePoint,
    pub target: SpacePoint,
    pub horizon: f64,
    /// d(base, target).
    pub reach: f64,
    handle: Arc<dyn Bicombing>,
    path: Option<PolyPath>,
}

impl fmt::Debug for TruncatedRay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.handle.atlas();
        f.debug_struct("TruncatedRay")
            .field("base", &a.format_point(&self.base))
            .field("target", &a.format_point(&self.target))
            .field("horizon", &self.horizon)
            .field("reach", &self.reach)
            .finish()
    }
}

impl TruncatedRay {
    pub fn new(handle: Arc<dyn Bicombing>, base: SpacePoint, target: SpacePoint, horizon: f64) -> Result<Self, BoundaryError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(BoundaryError::Invalid(format!("horizon must be positive and finite, got {horizon}")));
        }
        let atlas = handle.atlas();
        let base = atlas.canonicalize(&base);
        let target = atlas.canonicalize(&target);
        let reach = handle.distance(&base, &target)?;
        let path = handle.trajectory(&base, &target)?;
        Ok(TruncatedRay {
            base,
            target,
            horizon,
            reach,
            handle,
            path,
        })
    }

    /// Ray from `base` along the chart direction `dir` (taken in `base`'s
    /// chart), anchored at chart distance `anchor` and truncated at `horizon`.
    pub fn along(
        handle: Arc<dyn Bicombing>,
        base: SpacePoint,
        dir: &[f64],
        anchor: f64,
        horizon: f64,
    ) -> Result<Self, BoundaryError> {
        let atlas = handle.atlas();
        let chart = atlas.chart(base.chart);
        let n = chart.norm(dir, handle.exponent());
        if dir.len() != chart.dim() || n == 0.0 || !n.is_finite() {
            return Err(BoundaryError::Invalid("direction must be a nonzero vector of the base chart".into()));
        }
        let coords: Vec<f64> = base.coords.iter().zip(dir).map(|(b, d)| b + anchor * d / n).collect();
        let target = atlas
            .point_in(base.chart, CoordVec::from_slice_unchecked(&coords))
            .map_err(EngineError::from)?;
        Self::new(handle, base, target, horizon)
    }

    pub fn handle(&self) -> &Arc<dyn Bicombing> {
        &self.handle
    }

    pub fn atlas(&self) -> &ChartAtlas {
        self.handle.atlas()
    }

    pub fn exponent(&self) -> PExponent {
        self.handle.exponent()
    }

    /// The geodesic from the base to the target, when the handle exposes it.
    pub fn trajectory(&self) -> Option<&PolyPath> {
        self.path.as_ref()
    }

    pub fn eval(&self, t: f64) -> Result<SpacePoint, BoundaryError> {
        Ok(self.eval_many(&[t])?.pop().expect("one parameter"))
    }

    pub fn eval_many(&self, ts: &[f64]) -> Result<Vec<SpacePoint>, BoundaryError> {
        if let Some(&t) = ts.iter().find(|&&t| !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12))) {
            return Err(BoundaryError::BeyondHorizon { t, horizon: self.horizon });
        }
        let fr: Vec<f64> = ts
            .iter()
            .map(|&t| if self.reach == 0.0 { 0.0 } else { (t / self.reach).min(1.0) })
            .collect();
        match &self.path {
            Some(path) => Ok(fr
                .iter()
                .map(|&f| {
                    if f == 0.0 {
                        self.base.clone()
                    } else if f == 1.0 {
                        self.target.clone()
                    } else {
                        path.point_at(self.atlas(), f, self.exponent())
                    }
                })
                .collect()),
            None => Ok(self.handle.eval_many(&self.base, &self.target, &fr)?),
        }
    }

    /// Largest |d(ρ(s), ρ(t)) − |s − t|| over a grid of `k` parameters on
    /// `[0, min(horizon, reach)]`.
    pub fn speed_gap(&self, k: usize) -> Result<f64, BoundaryError> {
        let top = self.horizon.min(self.reach);
        let ts: Vec<f64> = (0..k).map(|i| top * i as f64 / (k.max(2) - 1) as f64).collect();
        let pts = self.eval_many(&ts)?;
        let mut worst: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = self.handle.distance(&pts[i], &pts[j])?;
                worst = worst.max((d - (ts[j] - ts[i])).abs());
            }
        }
        Ok(worst)
    }
}

/// Separation D(t) = d(ρ₁(t), ρ₂(t)) at each parameter.
pub fn separation(r1: &TruncatedRay, r2: &TruncatedRay, ts: &[f64]) -> Result<Vec<f64>, BoundaryError> {
    let a = r1.eval_many(ts)?;
    let b = r2.eval_many(ts)?;
    a.iter()
        .zip(&b)
        .map(|(x, y)| r1.handle.distance(x, y).map_err(BoundaryError::from))
        .collect()
}

/// Argument of [`exp_map`]: a point or a ray from the base point.
#[derive(Debug, Clone, Copy)]
pub enum ExpTarget<'a> {
    Point(&'a SpacePoint),
    Ray(&'a TruncatedRay),
}

/// exp_o(x)(t): the stopped geodesic from `o` to a point, or a ray from `o`.
pub fn exp_map(handle: &dyn Bicombing, o: &SpacePoint, x: ExpTarget<'_>, t: f64) -> Result<SpacePoint, BoundaryError> {
    match x {
        ExpTarget::Point(x) => {
            if !(t >= 0.0) {
                return Err(BoundaryError::Invalid(format!("t must be nonnegative, got {t}")));
            }
            Ok(crate::verify::stopped_geodesic(handle, o, x, t)?)
        }
        ExpTarget::Ray(r) => {
            check_base(o, &[r])?;
            r.eval(t)
        }
    }
}

fn check_base(o: &SpacePoint, rays: &[&TruncatedRay]) -> Result<(), BoundaryError> {
    for r in rays {
        if !r.atlas().same_point(o, &r.base) {
            return Err(BoundaryError::Invalid(format!(
                "ray starts at {}, not at the base point {}",
                r.atlas().format_point(&r.base),
                r.atlas().format_point(o)
            )));
        }
    }
    Ok(())
}

/// A truncated series together with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundaryMetricValue {
    pub value: f64,
    pub truncation_bound: f64,
}

/// Σ_{n=1}^{N} 2^{-n} min(D(n), 1); the tail is at most 2^{-N}.
pub fn d_o_metric(o: &SpacePoint, r1: &TruncatedRay, r2: &TruncatedRay, n: u32) -> Result<BoundaryMetricValue, BoundaryError> {
    check_base(o, &[r1, r2])?;
    let needed = n as f64;
    let horizon = r1.horizon.min(r2.horizon);
    if needed > horizon {
        return Err(BoundaryError::HorizonTooSmall { needed, horizon });
    }
    let ts: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let ds = separation(r1, r2, &ts)?;
    let value = ds
        .iter()
        .enumerate()
        .map(|(k, d)| 0.5f64.powi(k as i32 + 1) * d.min(1.0))
        .sum();
    Ok(BoundaryMetricValue {
        value,
        truncation_bound: 0.5f64.powi(n as i32),
    })
}

pub const DOC_MAX_ITER: usize = 200;
pub const DOC_T_TOL: f64 = 1e-12;

/// 1/t for the time t at which the rays reach separation `c`.
pub fn d_oc_metric(o: &SpacePoint, c: f64, r1: &TruncatedRay, r2: &TruncatedRay, tol: f64) -> Result<f64, BoundaryError> {
    check_base(o, &[r1, r2])?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(BoundaryError::Invalid(format!("C must be positive, got {c}")));
    }
    let horizon = r1.horizon.min(r2.horizon);
    let d = |t: f64| -> Result<f64, BoundaryError> { Ok(separation(r1, r2, &[t])?[0]) };
    let far = d(horizon)?;
    if far <= tol {
        return Ok(0.0);
    }
    if far < c {
        return Err(BoundaryError::NotSeparated {
            c,
            separation: far,
            horizon,
        });
    }
    let (mut lo, mut hi) = (0.0, horizon);
    for _ in 0..DOC_MAX_ITER {
        if hi - lo <= DOC_T_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if d(mid)? >= c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(2.0 / (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Asymptotic,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AsymptoticReport {
    pub verdict: Verdict,
    pub horizon: f64,
    pub start_separation: f64,
    pub end_separation: f64,
    pub max_separation: f64,
}

/// Grid on which D is sampled by [`asymptotic_verdict`].
pub const ASYMPTOTIC_GRID: usize = 65;
/// Relative slack of the monotonicity test.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Asymptotic when D never increases and stays below `bound` on the shared
/// horizon; divergent when D grows by more than `tol` (convexity then makes it
/// unbounded); inconclusive otherwise.
pub fn asymptotic_verdict(r1: &TruncatedRay, r2: &TruncatedRay, bound: f64, tol: f64) -> Result<AsymptoticReport, BoundaryError> {
    let horizon = r1.horizon.min(r2.horizon);
    let ts: Vec<f64> = (0..ASYMPTOTIC_GRID)
        .map(|i| horizon * i as f64 / (ASYMPTOTIC_GRID - 1) as f64)
        .collect();
    let ds = separation(r1, r2, &ts)?;
    let monotone = ds.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK * (1.0 + w[0]));
    let max = ds.iter().fold(0.0f64, |m, &d| m.max(d));
    let (first, last) = (ds[0], *ds.last().unwrap());
    let verdict = if monotone && max <= bound {
        Verdict::Asymptotic
    } else if last > first + tol {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(AsymptoticReport {
        verdict,
        horizon,
        start_separation: first,
        end_separation: last,
        max_separation: max,
    })
}

/// t ↦ (ρ_X(a t), ρ_Y(b t)) in the ℓ^p product served by `product`.
pub fn product_ray(
    product: Arc<dyn Bicombing>,
    rx: &TruncatedRay,
    ry: &TruncatedRay,
    a: f64,
    b: f64,
) -> Result<TruncatedRay, BoundaryError> {
    let p = product.exponent();
    if !(a >= 0.0 && b >= 0.0) || (lp_norm(&[a, b], p) - 1.0).abs() > 1e-12 {
        return Err(BoundaryError::NotUnit { a, b, p });
    }
    let prod = product
        .atlas()
        .product()
        .ok_or_else(|| BoundaryError::Invalid("the handle's space is not an ℓ^p product".into()))?;
    let limit = |r: &TruncatedRay, w: f64| if w > 0.0 { r.horizon / w } else { f64::INFINITY };
    let horizon = limit(rx, a).min(limit(ry, b));
    let base = prod.join(&rx.base, &ry.base);
    let target = prod.join(&rx.eval(a * horizon)?, &ry.eval(b * horizon)?);
    TruncatedRay::new(product, base, target, horizon)
}

/// The same trajectory followed at constant speed for the exponent of
/// `target`; fails when the trajectory is not a geodesic for that exponent.
pub fn reparametrize_ray(ray: &TruncatedRay, target: Arc<dyn Bicombing>, tol: f64) -> Result<TruncatedRay, BoundaryError> {
    let path = ray
        .trajectory()
        .ok_or_else(|| BoundaryError::Invalid("the ray's handle exposes no trajectory".into()))?;
    let atlas = ray.atlas();
    let p = ray.exponent();
    let q = target.exponent();
    let cut = if ray.reach == 0.0 { 0.0 } else { (ray.horizon / ray.reach).min(1.0) };
    let piece = path.sub_path(atlas, 0.0, cut, p);
    let length = piece.length(atlas, q);
    let d = target.distance(piece.start(), piece.end())?;
    if length - d > tol * (1.0 + d) {
        return Err(EngineError::Certificate { p: q, length, distance: d }.into());
    }
    let end = piece.end().clone();
    Ok(TruncatedRay {
        base: ray.base.clone(),
        target: end,
        horizon: length.max(f64::MIN_POSITIVE),
        reach: d,
        handle: target,
        path: Some(piece),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOptions {
    /// Anchor directions per unbounded chart.
    pub directions: usize,
    /// Points sampled in the ball B(o, ¾R).
    pub samples: usize,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        CoverageOptions {
            directions: 32,
            samples: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub radius: f64,
    /// Max over samples of the distance to the nearest ray proxy.
    pub coverage: f64,
    /// ¾ of the anchor spacing on the sphere of radius R (with a 25% margin).
    pub resolution: f64,
    pub rays: usize,
    pub samples: usize,
    pub compact: bool,
    pub worst_point: Option<String>,
    pub note: Option<String>,
}

/// Empirical upper estimate of how far points of B(o, ¾R) lie from geodesics
/// running from `o` to anchors at distance about `radius`.
pub fn coverage_radius(
    handle: &dyn Bicombing,
    o: &SpacePoint,
    radius: f64,
    sampler: &Sampler,
    opts: &CoverageOptions,
) -> Result<CoverageReport, BoundaryError> {
    let atlas = handle.atlas();
    let p = handle.exponent();
    let o = atlas.canonicalize(o);
    let open: Vec<ChartId> = atlas
        .charts()
        .iter()
        .filter(|c| c.bounds.iter().any(|(l, u)| !l.is_finite() || !u.is_finite()))
        .map(|c| c.id)
        .collect();
    if open.is_empty() {
        return Ok(CoverageReport {
            radius,
            coverage: 0.0,
            resolution: 0.0,
            rays: 0,
            samples: 0,
            compact: true,
            worst_point: None,
            note: Some("compact space: every ray is eventually constant, coverage is not meaningful".into()),
        });
    }
    let dirs = opts.directions.max(4);
    let mut rng = sampler.stream(u64::MAX);
    let mut segments: Vec<PathSegment> = Vec::new();
    let mut rays = 0;
    let mut gap: f64 = 0.0;
    for &c in &open {
        let chart = atlas.chart(c);
        let centre = atlas.coords_in(&o, c).unwrap_or_else(|| CoordVec::zeros(chart.dim()));
        let unit = |v: Vec<f64>| -> Vec<f64> {
            let n = chart.norm(&v, p);
            v.into_iter().map(|x| x / n).collect()
        };
        let directions = |k: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
            match chart.dim() {
                1 => vec![vec![1.0], vec![-1.0]],
                2 => (0..k)
                    .map(|i| {
                        let a = std::f64::consts::TAU * i as f64 / k as f64;
                        unit(vec![a.cos(), a.sin()])
                    })
                    .collect(),
                d => (0..k * (d - 1))
                    .map(|_| unit((0..d).map(|_| StandardNormal.sample(rng)).collect()))
                    .collect(),
            }
        };
        let at = |u: &[f64]| -> Option<CoordVec> {
            let mut v: Vec<f64> = centre.iter().zip(u).map(|(c, u)| c + radius * u).collect();
            for (x, &(l, h)) in v.iter_mut().zip(&chart.bounds) {
                *x = x.clamp(l, h);
            }
            let v = CoordVec::from_slice_unchecked(&v);
            (v.max_abs_diff(&centre) > 0.0).then_some(v)
        };
        let anchors: Vec<CoordVec> = directions(dirs, &mut rng).iter().filter_map(|u| at(u)).collect();
        for probe in directions(8 * dirs, &mut rng).iter().filter_map(|u| at(u)) {
            let near = anchors
                .iter()
                .map(|a| chart.distance(a, &probe, p))
                .fold(f64::INFINITY, f64::min);
            gap = gap.max(near);
        }
        for a in anchors {
            let target = atlas.point_in(c, a).map_err(EngineError::from)?;
            rays += 1;
            match handle.trajectory(&o, &target)? {
                Some(path) => segments.extend(path.segments),
                None => {
                    let ts: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
                    let pts = handle.eval_many(&o, &target, &ts)?;
                    for w in pts.windows(2) {
                        if let Some(b) = atlas.coords_in(&w[1], w[0].chart) {
                            segments.push(PathSegment {
                                chart: w[0].chart,
                                from: w[0].coords.clone(),
                                to: b,
                            });
                        }
                    }
                }
            }
        }
    }
    let wide = sampler.with_radius(radius);
    let mut worst: (f64, Option<SpacePoint>) = (0.0, None);
    let mut taken = 0;
    let mut index = 0u64;
    while taken < opts.samples && index < 50 * opts.samples as u64 {
        let mut r = wide.stream(index);
        index += 1;
        let x = wide.point(atlas, &mut r);
        if handle.distance(&o, &x)? > 0.75 * radius {
            continue;
        }
        taken += 1;
        let mut best = f64::INFINITY;
        for rep in atlas.representatives(&x) {
            let chart = atlas.chart(rep.chart);
            for s in segments.iter().filter(|s| s.chart == rep.chart) {
                best = best.min(crate::engine::path::point_segment_distance(chart, &rep.coords, &s.from, &s.to, p));
            }
        }
        if !best.is_finite() {
            // no proxy enters x's charts: fall back to glued distances to breakpoints
            for s in &segments {
                let y = atlas.canonicalize(&SpacePoint::new(s.chart, s.from.clone()));
                best = best.min(handle.distance(&x, &y)?);
            }
        }
        if best > worst.0 || worst.1.is_none() {
            worst = (best, Some(x));
        }
    }
    Ok(CoverageReport {
        radius,
        coverage: worst.0,
        resolution: 0.75 * 1.25 * gap,
        rays,
        samples: taken,
        compact: false,
        worst_point: worst.1.map(|x| atlas.format_point(&x)),
        note: (taken < opts.samples).then(|| format!("only {taken} samples fell in the ball")),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneOptions {
    pub ratio: usize,
    /// Slope a of the ray t ↦ (t, a t).
    pub slope: f64,
    /// Cesàro means are compared over n ∈ [n_min, n_max].
    pub n_min: usize,
    pub n_max: usize,
    pub gap: f64,
    /// Gaps must recur beyond each of these indices.
    pub checkpoints: Vec<usize>,
    /// Number of leading cubes checked against the engine.
    pub prefix: usize,
}

impl Default for HalfPlaneOptions {
    fn default() -> Self {
        HalfPlaneOptions {
            ratio: 10,
            slope: 0.5,
            n_min: 10,
            n_max: 10_000,
            gap: 0.1,
            checkpoints: vec![10, 100, 1000],
            prefix: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HalfPlaneReport {
    pub ratio: usize,
    pub n_max: usize,
    pub mean_min: f64,
    pub mean_max: f64,
    /// mean_max − mean_min over [n_min, n_max].
    pub oscillation: f64,
    /// (checkpoint m, largest d_∞ gap between projected points with index > m).
    pub gaps: Vec<(usize, f64)>,
    pub recurring: bool,
    /// Largest disagreement between the engine and the closed form on the prefix.
    pub engine_gap: f64,
}

/// Running means (Σ_{i≤n} x_i)/n for n = 1..len.
pub fn cesaro_means(xs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            acc += x;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Blocks of 1's and √2's whose Cesàro means keep oscillating, and the
/// projected points (1, a·mean_n) that the d_∞ geodesics towards
/// (n, a·Σx_i) pass through.
pub fn halfplane_probe(opts: &HalfPlaneOptions) -> Result<HalfPlaneReport, BoundaryError> {
    if opts.ratio < 2 || opts.n_min == 0 || opts.n_min > opts.n_max {
        return Err(BoundaryError::Invalid("need ratio >= 2 and 1 <= n_min <= n_max".into()));
    }
    let mut blocks = 1;
    while block_sequence(opts.ratio, blocks).len() < opts.n_max {
        blocks += 1;
    }
    let xs = block_sequence(opts.ratio, blocks);
    let means = cesaro_means(&xs[..opts.n_max]);
    let window = &means[opts.n_min - 1..];
    let mean_min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<(usize, f64)> = opts
        .checkpoints
        .iter()
        .map(|&m| {
            let tail = &means[m.min(opts.n_max)..];
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            (m, if tail.is_empty() { 0.0 } else { opts.slope.abs() * (hi - lo) })
        })
        .collect();
    let recurring = gaps.iter().all(|&(_, g)| g >= opts.gap);
    let engine_gap = halfplane_engine_gap(&xs[..opts.prefix.min(xs.len())], opts.slope)?;
    Ok(HalfPlaneReport {
        ratio: opts.ratio,
        n_max: opts.n_max,
        mean_min,
        mean_max,
        oscillation: mean_max - mean_min,
        gaps,
        recurring,
        engine_gap,
    })
}

/// Builds the half-plane complex on each prefix of `xs` and compares the
/// engine's d_∞ trajectory and distances with the closed forms.
fn halfplane_engine_gap(xs: &[f64], slope: f64) -> Result<f64, BoundaryError> {
    let opts = EngineOptions::default();
    let mut worst: f64 = 0.0;
    for n in 1..=xs.len() {
        let total: f64 = xs[..n].iter().sum();
        let height = slope * total;
        let atlas = halfplane_complex(&xs[..n], height.abs() + 1.0).map_err(EngineError::from)?;
        let start = atlas.point("c0*S", &[0.0, 0.0]).map_err(EngineError::from)?;
        let end = atlas
            .point(&format!("c{}*S", n - 1), &[1.0, height])
            .map_err(EngineError::from)?;
        let d_inf = distance(&atlas, &start, &end, PExponent::INF, &opts)?;
        let d_two = distance(&atlas, &start, &end, PExponent::TWO, &opts)?;
        worst = worst.max((d_inf - (n as f64).max(height.abs())).abs());
        worst = worst.max((d_two - total.hypot(height)).abs());
        let path = canonical_trajectory(&atlas, &start, &end, PExponent::INF, &opts)?;
        let at = path.point_at(&atlas, 1.0 / n as f64, PExponent::INF);
        let expect = atlas.point("c0*S", &[1.0, height / n as f64]).map_err(EngineError::from)?;
        worst = worst.max(distance(&atlas, &at, &expect, PExponent::INF, &opts)?);
    }
    Ok(worst)
}

/// Random directions of unit ℓ^p norm.
pub fn sample_directions(dim: usize, count: usize, p: PExponent, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
            let n = lp_norm(&v, p);
            if n > 1e-6 {
                break v.into_iter().map(|x| x / n).collect();
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineBicombing;
    use crate::families::plane;

    fn plane_handle(p: PExponent) -> Arc<dyn Bicombing> {
        Arc::new(EngineBicombing::new(Arc::new(plane()), p))
    }

    fn ray(h: &Arc<dyn Bicombing>, base: [f64; 2], dir: [f64; 2], horizon: f64) -> TruncatedRay {
        let b = h.atlas().point("P", &base).unwrap();
        TruncatedRay::along(h.clone(), b, &dir, horizon, horizon).unwrap()
    }

    #[test]
    fn exp_map_examples() {
        let h = plane_handle(PExponent::TWO);
        let a = h.atlas();
        let o = a.point("P", &[0.0, 0.0]).unwrap();
        let x = a.point("P", &[10.0, 0.0]).unwrap();
        assert_eq!(exp_map(&*h, &o, ExpTarget::Point(&x), 0.0).unwrap(), o);
        assert_eq!(exp_map(&*h, &o, ExpTarget::Point(&x), 12.0).unwrap(), x);
        let m = exp_map(&*h, &o, ExpTarget::Point(&x), 3.0).unwrap();
        assert!(m.coords.max_abs_diff(&a.point("P", &[3.0, 0.0]).unwrap().coords) < 1e-12);
        let r = ray(&h, [0.0, 0.0], [1.0, 0.0], 5.0);
        assert!(matches!(
            exp_map(&*h, &o, ExpTarget::Ray(&r), 6.0),
            Err(BoundaryError::BeyondHorizon { .. })
        ));
    }

    #[test]
    fn d_o_closed_forms() {
        let h = plane_handle(PExponent::INF);
        let o = h.atlas().point("P", &[0.0, 0.0]).unwrap();
        let e1 = ray(&h, [0.0, 0.0], [1.0, 0.0], 64.0);
        let e2 = ray(&h, [0.0, 0.0], [0.0, 1.0], 64.0);
        let v = d_o_metric(&o, &e1, &e2, 40).unwrap();
        assert!((v.value - (1.0 - 0.5f64.powi(40))).abs() <= 1e-15);
        assert_eq!(v.truncation_bound, 0.5f64.powi(40));
        assert!(d_o_metric(&o, &e1, &e1, 40).unwrap().value.abs() <= 0.5f64.powi(40));
        assert!(matches!(d_o_metric(&o, &e1, &e2, 80), Err(BoundaryError::HorizonTooSmall { .. })));
    }

    #[test]
    fn d_oc_closed_forms() {
        let h = plane_handle(PExponent::TWO);
        let o = h.atlas().point("P", &[0.0, 0.0]).unwrap();
        let e1 = ray(&h, [0.0, 0.0], [1.0, 0.0], 100.0);
        let e2 = ray(&h, [0.0, 0.0], [0.0, 1.0], 100.0);
        assert!((d_oc_metric(&o, 1.0, &e1, &e2, 1e-9).unwrap() - 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(d_oc_metric(&o, 1.0, &e1, &e1, 1e-9).unwrap(), 0.0);
        let h = plane_handle(PExponent::INF);
        let e1 = ray(&h, [0.0, 0.0], [1.0, 0.0], 100.0);
        let e2 = ray(&h, [0.0, 0.0], [0.0, 1.0], 100.0);
        assert!((d_oc_metric(&o, 1.0, &e1, &e2, 1e-9).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            d_oc_metric(&o, 500.0, &e1, &e2, 1e-9),
            Err(BoundaryError::NotSeparated { .. })
        ));
    }

    #[test]
    fn verdicts() {
        let h = plane_handle(PExponent::TWO);
        let a = ray(&h, [0.0, 0.0], [1.0, 0.0], 50.0);
        let b = ray(&h, [0.0, 1.0], [1.0, 0.0], 50.0);
        assert_eq!(asymptotic_verdict(&a, &b, 2.0, 1e-9).unwrap().verdict, Verdict::Asymptotic);
        let c = ray(&h, [0.0, 0.0], [0.0, 1.0], 50.0);
        assert_eq!(asymptotic_verdict(&a, &c, 2.0, 1e-9).unwrap().verdict, Verdict::Divergent);
        let th: f64 = 1e-9;
        let a = ray(&h, [0.0, 0.0], [1.0, 0.0], 0.5);
        let d = ray(&h, [0.0, 0.0], [th.cos(), th.sin()], 0.5);
        assert_eq!(asymptotic_verdict(&a, &d, 2.0, 1e-9).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn reparametrized_diagonal() {
        let h = plane_handle(PExponent::TWO);
        let r = ray(&h, [0.0, 0.0], [1.0, 1.0], 10.0);
        let s = reparametrize_ray(&r, plane_handle(PExponent::INF), 1e-9).unwrap();
        assert!((s.horizon - 10.0 / 2f64.sqrt()).abs() < 1e-12);
        let m = s.eval(1.0).unwrap();
        assert!(m.coords.max_abs_diff(&h.atlas().point("P", &[1.0, 1.0]).unwrap().coords) < 1e-12);
        let r = ray(&h, [0.0, 0.0], [1.0, 0.0], 10.0);
        let s = reparametrize_ray(&r, plane_handle(PExponent::ONE), 1e-9).unwrap();
        assert!((s.horizon - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cesaro_default_oscillates() {
        let r = halfplane_probe(&HalfPlaneOptions::default()).unwrap();
        assert!(r.oscillation >= 0.3, "{r:?}");
        assert!(r.recurring, "{r:?}");
        assert!(r.engine_gap < 1e-9, "{r:?}");
    }
}
