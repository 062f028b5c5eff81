//! Statistical checks of bicombing axioms and related inequalities.
//!
//! Every check draws tuples from a seeded [`Sampler`]. Sample `i` uses its own
//! ChaCha stream, so reports do not depend on evaluation order and batches
//! can run on the rayon pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::atlas::{AtlasError, ChartAtlas, ChartId, SpacePoint};
use crate::engine::{Bicombing, EngineError, Method};
use crate::lp::{CoordVec, PExponent};

/// Bicombing properties and the inequalities checked like them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    Conical,
    Consistent,
    Convex,
    Reversible,
    Equivariant,
    /// d(ρ_o^x(r), ρ_o^y(r)) ≤ 2·d(x, y)·r/d(o, x).
    Projection,
}

impl Axiom {
    pub const BICOMBING: [Axiom; 4] = [Axiom::Conical, Axiom::Consistent, Axiom::Convex, Axiom::Reversible];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::Conical => "conical",
            Axiom::Consistent => "consistent",
            Axiom::Convex => "convex",
            Axiom::Reversible => "reversible",
            Axiom::Equivariant => "equivariant",
            Axiom::Projection => "projection",
        }
    }
}

/// A sampled tuple: points (formatted `CHART:c0,c1`) and parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub points: Vec<String>,
    pub params: Vec<f64>,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub samples: usize,
    pub seed: u64,
    /// Largest excess over the bound, never negative.
    pub max_violation: f64,
    pub witness: Option<Witness>,
}

/// Seeded generator of sample points and tuples.
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    pub seed: u64,
    /// Coordinates of unbounded charts are drawn from [−radius, radius].
    pub radius: f64,
    /// Probability that a sampled point is moved onto a gluing face.
    pub face_prob: f64,
    /// Probability of a degenerate tuple (repeated points).
    pub degenerate_prob: f64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            seed,
            radius: 2.5,
            face_prob: 0.15,
            degenerate_prob: 0.1,
        }
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    /// The random stream of sample `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    fn coord_range(&self, (l, u): (f64, f64)) -> (f64, f64) {
        (l.max(-self.radius), u.min(self.radius))
    }

    /// A point of the atlas: uniform chart, uniform coordinates in the
    /// clipped chart box, sometimes snapped onto a gluing face.
    pub fn point(&self, atlas: &ChartAtlas, rng: &mut ChaCha8Rng) -> SpacePoint {
        let n = atlas.charts().len();
        let chart = &atlas.charts()[rng.gen_range(0..n)];
        let adj = atlas.adjacency(chart.id);
        if !adj.is_empty() && rng.gen_bool(self.face_prob) {
            let (g, from_a) = adj[rng.gen_range(0..adj.len())];
            let gl = &atlas.gluings()[g];
            let theta: Vec<f64> = gl
                .param_bounds
                .iter()
                .map(|&b| {
                    let (l, u) = self.coord_range(b);
                    if u > l {
                        rng.gen_range(l..=u)
                    } else {
                        l
                    }
                })
                .collect();
            let (face, _, _) = gl.sides(from_a);
            let mut c = face.eval(&theta);
            chart.clamp(&mut c);
            if let Ok(x) = atlas.point_in(chart.id, c) {
                return x;
            }
        }
        let coords: Vec<f64> = chart
            .bounds
            .iter()
            .map(|&b| {
                let (l, u) = self.coord_range(b);
                rng.gen_range(l..=u)
            })
            .collect();
        atlas
            .point_in(chart.id, CoordVec::from_slice_unchecked(&coords))
            .expect("sampled coordinates lie in the chart")
    }

    /// Two to four points with occasional repetitions.
    fn points(&self, atlas: &ChartAtlas, rng: &mut ChaCha8Rng, n: usize) -> Vec<SpacePoint> {
        let mut pts: Vec<SpacePoint> = (0..n).map(|_| self.point(atlas, rng)).collect();
        if rng.gen_bool(self.degenerate_prob) {
            match (n, rng.gen_range(0..3)) {
                (4, 0) => pts[2] = pts[0].clone(),
                (4, 1) => {
                    pts[2] = pts[0].clone();
                    pts[3] = pts[0].clone();
                }
                _ => pts[1] = pts[0].clone(),
            }
        }
        pts
    }

    fn tuple(&self, atlas: &ChartAtlas, axiom: Axiom, index: u64) -> Tuple {
        let mut rng = self.stream(index);
        match axiom {
            Axiom::Conical => Tuple {
                pts: self.points(atlas, &mut rng, 4),
                params: vec![rng.gen_range(0.0..=1.0)],
            },
            Axiom::Convex => {
                let pts = self.points(atlas, &mut rng, 4);
                let k = rng.gen_range(1..=4);
                let m = 1u32 << k;
                let i = rng.gen_range(0..m);
                let j = rng.gen_range(i + 1..=m);
                Tuple {
                    pts,
                    params: vec![i as f64 / m as f64, j as f64 / m as f64],
                }
            }
            Axiom::Consistent => {
                let pts = self.points(atlas, &mut rng, 2);
                let a: f64 = rng.gen_range(0.0..=1.0);
                let b: f64 = rng.gen_range(0.0..=1.0);
                let (s, t) = if rng.gen_bool(0.1) { (0.0, a.max(b)) } else { (a.min(b), a.max(b)) };
                Tuple { pts, params: vec![s, t] }
            }
            Axiom::Reversible | Axiom::Equivariant => Tuple {
                pts: self.points(atlas, &mut rng, 2),
                params: vec![rng.gen_range(0.0..=1.0)],
            },
            Axiom::Projection => {
                let pts = self.points(atlas, &mut rng, 3);
                Tuple {
                    pts,
                    params: vec![rng.gen_range(0.0..=1.0)],
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Tuple {
    pts: Vec<SpacePoint>,
    params: Vec<f64>,
}

/// Parameters at which consistency is compared.
pub const CONSISTENCY_GRID: usize = 32;

/// ρ_o^x(r) = σ_ox(min(r/d(o,x), 1)).
pub fn stopped_geodesic(
    handle: &dyn Bicombing,
    o: &SpacePoint,
    x: &SpacePoint,
    r: f64,
) -> Result<SpacePoint, EngineError> {
    let d = handle.distance(o, x)?;
    if d == 0.0 {
        return Ok(handle.atlas().canonicalize(o));
    }
    handle.eval(o, x, (r / d).min(1.0))
}

fn violation(handle: &dyn Bicombing, axiom: Axiom, t: &Tuple, iso: Option<&Isometry>) -> Result<f64, EngineError> {
    let d = |a: &SpacePoint, b: &SpacePoint| handle.distance(a, b);
    let v = match axiom {
        Axiom::Conical => {
            let (x, y, x2, y2) = (&t.pts[0], &t.pts[1], &t.pts[2], &t.pts[3]);
            let s = t.params[0];
            let a = handle.eval(x, y, s)?;
            let b = handle.eval(x2, y2, s)?;
            d(&a, &b)? - ((1.0 - s) * d(x, x2)? + s * d(y, y2)?)
        }
        Axiom::Convex => {
            let (x, y, x2, y2) = (&t.pts[0], &t.pts[1], &t.pts[2], &t.pts[3]);
            let (s, u) = (t.params[0], t.params[1]);
            let ts = [s, 0.5 * (s + u), u];
            let a = handle.eval_many(x, y, &ts)?;
            let b = handle.eval_many(x2, y2, &ts)?;
            let ds: Vec<f64> = a.iter().zip(&b).map(|(p, q)| d(p, q)).collect::<Result<_, _>>()?;
            ds[1] - 0.5 * (ds[0] + ds[2])
        }
        Axiom::Consistent => {
            let (x, y) = (&t.pts[0], &t.pts[1]);
            let (s, u) = (t.params[0], t.params[1]);
            let grid: Vec<f64> = (0..CONSISTENCY_GRID)
                .map(|k| k as f64 / (CONSISTENCY_GRID - 1) as f64)
                .collect();
            let outer: Vec<f64> = grid.iter().map(|g| s + (u - s) * g).collect();
            let along = handle.eval_many(x, y, &outer)?;
            let a = &along[0];
            let b = &along[CONSISTENCY_GRID - 1];
            let inner = handle.eval_many(a, b, &grid)?;
            let mut worst: f64 = 0.0;
            for (p, q) in along.iter().zip(&inner) {
                worst = worst.max(d(p, q)?);
            }
            worst
        }
        Axiom::Reversible => {
            let (x, y) = (&t.pts[0], &t.pts[1]);
            let s = t.params[0];
            d(&handle.eval(x, y, s)?, &handle.eval(y, x, 1.0 - s)?)?
        }
        Axiom::Equivariant => {
            let g = iso.expect("equivariance needs an isometry");
            let (x, y) = (&t.pts[0], &t.pts[1]);
            let s = t.params[0];
            let atlas = handle.atlas();
            let gx = g.apply(atlas, x)?;
            let gy = g.apply(atlas, y)?;
            let lhs = g.apply(atlas, &handle.eval(x, y, s)?)?;
            d(&lhs, &handle.eval(&gx, &gy, s)?)?
        }
        Axiom::Projection => {
            let (o, x, y) = (&t.pts[0], &t.pts[1], &t.pts[2]);
            let dox = d(o, x)?;
            let doy = d(o, y)?;
            if dox == 0.0 {
                return Ok(0.0);
            }
            let r = t.params[0] * dox.max(doy);
            if r <= 0.0 {
                return Ok(0.0);
            }
            let (lhs, bound) = projection_terms(handle, o, x, y, r)?;
            lhs - bound
        }
    };
    Ok(v.max(0.0))
}

/// Both sides of the projection inequality at radius `r`.
pub fn projection_terms(
    handle: &dyn Bicombing,
    o: &SpacePoint,
    x: &SpacePoint,
    y: &SpacePoint,
    r: f64,
) -> Result<(f64, f64), EngineError> {
    let a = stopped_geodesic(handle, o, x, r)?;
    let b = stopped_geodesic(handle, o, y, r)?;
    let lhs = handle.distance(&a, &b)?;
    let bound = 2.0 * handle.distance(x, y)? * r / handle.distance(o, x)?;
    Ok((lhs, bound))
}

fn witness(atlas: &ChartAtlas, t: &Tuple, v: f64) -> Witness {
    Witness {
        points: t.pts.iter().map(|p| atlas.format_point(p)).collect(),
        params: t.params.clone(),
        violation: v,
    }
}

fn run(
    handle: &dyn Bicombing,
    axiom: Axiom,
    sampler: &Sampler,
    samples: usize,
    iso: Option<&Isometry>,
) -> Result<AxiomReport, EngineError> {
    let atlas = handle.atlas();
    let results: Vec<(u64, f64, Tuple)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let t = sampler.tuple(atlas, axiom, i);
            violation(handle, axiom, &t, iso).map(|v| (i, v, t))
        })
        .collect::<Result<_, _>>()?;
    // largest violation, earliest sample on ties
    let worst = results
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    let (max_violation, witness) = match worst {
        Some((_, v, t)) => (v, Some(witness(atlas, &t, v))),
        None => (0.0, None),
    };
    Ok(AxiomReport {
        axiom,
        samples,
        seed: sampler.seed,
        max_violation,
        witness,
    })
}

/// One report per requested axiom. Equivariance needs `iso`.
pub fn check_axioms(
    handle: &dyn Bicombing,
    axioms: &[Axiom],
    sampler: &Sampler,
    samples: usize,
    iso: Option<&Isometry>,
) -> Result<Vec<AxiomReport>, EngineError> {
    axioms
        .iter()
        .map(|&a| {
            if a == Axiom::Equivariant && iso.is_none() {
                return Err(EngineError::Atlas(AtlasError::BadParams {
                    family: handle.atlas().name.clone(),
                    reason: "equivariance check needs an isometry".into(),
                }));
            }
            run(handle, a, sampler, samples, iso)
        })
        .collect()
}

/// Recomputes the violation of a report's witness.
pub fn reevaluate(
    handle: &dyn Bicombing,
    axiom: Axiom,
    w: &Witness,
    iso: Option<&Isometry>,
) -> Result<f64, EngineError> {
    let atlas = handle.atlas();
    let pts = w
        .points
        .iter()
        .map(|s| atlas.parse_point(s))
        .collect::<Result<Vec<_>, _>>()?;
    violation(
        handle,
        axiom,
        &Tuple {
            pts,
            params: w.params.clone(),
        },
        iso,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CccReport {
    pub conical: AxiomReport,
    pub consistent: AxiomReport,
    /// Present when the preconditions hold.
    pub convex: Option<AxiomReport>,
    pub precondition_ok: bool,
    /// Convex violation ≤ 2 × conical violation (with an absolute floor).
    pub holds: Option<bool>,
    pub note: Option<String>,
}

/// Absolute floor added to the factor-two comparison, so that rounding noise
/// on a handle with zero conical violation does not count.
pub const CCC_FLOOR: f64 = 1e-9;

/// For a consistent conical handle, compares the convexity violation with
/// twice the conical one.
pub fn check_ccc_implication(
    handle: &dyn Bicombing,
    sampler: &Sampler,
    samples: usize,
    tol: f64,
) -> Result<CccReport, EngineError> {
    let conical = run(handle, Axiom::Conical, sampler, samples, None)?;
    let consistent = run(handle, Axiom::Consistent, sampler, samples, None)?;
    if conical.max_violation > tol || consistent.max_violation > tol {
        return Ok(CccReport {
            conical,
            consistent,
            convex: None,
            precondition_ok: false,
            holds: None,
            note: Some(format!("skipped: handle is not consistent and conical within {tol}")),
        });
    }
    let convex = run(handle, Axiom::Convex, sampler, samples, None)?;
    let holds = convex.max_violation <= 2.0 * conical.max_violation + CCC_FLOOR;
    Ok(CccReport {
        conical,
        consistent,
        convex: Some(convex),
        precondition_ok: true,
        holds: Some(holds),
        note: None,
    })
}

pub fn check_projection_inequality(
    handle: &dyn Bicombing,
    sampler: &Sampler,
    samples: usize,
) -> Result<AxiomReport, EngineError> {
    run(handle, Axiom::Projection, sampler, samples, None)
}

/// Handle whose geodesics are reparametrized by t ↦ t + δ(x)·4t(1−t) with
/// δ(x) = 0.05·(1 + ½·tanh(x₀)): same trajectories, wrong speeds.
pub struct Nudged<B> {
    inner: B,
}

pub fn nudged<B: Bicombing>(inner: B) -> Nudged<B> {
    Nudged { inner }
}

impl<B: Bicombing> Bicombing for Nudged<B> {
    fn atlas(&self) -> &ChartAtlas {
        self.inner.atlas()
    }

    fn exponent(&self) -> PExponent {
        self.inner.exponent()
    }

    fn method(&self) -> Method {
        Method::Custom("nudged".into())
    }

    fn eval_many(&self, x: &SpacePoint, y: &SpacePoint, ts: &[f64]) -> Result<Vec<SpacePoint>, EngineError> {
        let x0 = self.atlas().canonicalize(x).coords[0];
        let delta = 0.05 * (1.0 + 0.5 * x0.tanh());
        let warped: Vec<f64> = ts
            .iter()
            .map(|&t| {
                if (0.0..=1.0).contains(&t) {
                    t + delta * 4.0 * t * (1.0 - t)
                } else {
                    t
                }
            })
            .collect();
        self.inner.eval_many(x, y, &warped)
    }

    fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, EngineError> {
        self.inner.distance(x, y)
    }
}

/// Affine map from one chart to another: x ↦ matrix·x + offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartMap {
    pub from: ChartId,
    pub to: ChartId,
    /// Row-major, dim × dim.
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

/// An isometry given chart by chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    pub maps: Vec<ChartMap>,
}

impl Isometry {
    pub fn identity(atlas: &ChartAtlas) -> Isometry {
        Isometry::translation(atlas, &vec![0.0; atlas.max_dim()])
    }

    /// Translation by `v` in every chart.
    pub fn translation(atlas: &ChartAtlas, v: &[f64]) -> Isometry {
        let maps = atlas
            .charts()
            .iter()
            .map(|c| {
                let d = c.dim();
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = 1.0;
                }
                ChartMap {
                    from: c.id,
                    to: c.id,
                    matrix: m,
                    offset: v[..d].to_vec(),
                }
            })
            .collect();
        Isometry { maps }
    }

    pub fn apply(&self, atlas: &ChartAtlas, x: &SpacePoint) -> Result<SpacePoint, AtlasError> {
        for r in atlas.representatives(x) {
            if let Some(m) = self.maps.iter().find(|m| m.from == r.chart) {
                let d = r.coords.dim();
                let out: Vec<f64> = (0..d)
                    .map(|i| m.offset[i] + (0..d).map(|j| m.matrix[i * d + j] * r.coords[j]).sum::<f64>())
                    .collect();
                return atlas.point_in(m.to, CoordVec::new(&out)?);
            }
        }
        Err(AtlasError::NotInChart(atlas.format_point(x)))
    }

    /// Largest |d(gx, gy) − d(x, y)| over sampled pairs.
    pub fn distortion(
        &self,
        handle: &dyn Bicombing,
        sampler: &Sampler,
        samples: usize,
    ) -> Result<f64, EngineError> {
        let atlas = handle.atlas();
        let mut worst: f64 = 0.0;
        for i in 0..samples as u64 {
            let mut rng = sampler.stream(i);
            let x = sampler.point(atlas, &mut rng);
            let y = sampler.point(atlas, &mut rng);
            let a = handle.distance(&x, &y)?;
            let b = handle.distance(&self.apply(atlas, &x)?, &self.apply(atlas, &y)?)?;
            worst = worst.max((a - b).abs());
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementReport {
    pub inf_estimate: f64,
    /// Points whose displacement is within `tol` of the estimate.
    pub near_min_points: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("map is not an isometry: distances change by up to {0}")]
    NotIsometric(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Estimates inf_x d(x, g x) from samples refined by compass search.
pub fn displacement(
    handle: &dyn Bicombing,
    iso: &Isometry,
    sampler: &Sampler,
    samples: usize,
    refine_iters: usize,
    tol: f64,
) -> Result<DisplacementReport, VerifyError> {
    let atlas = handle.atlas();
    let distortion = iso.distortion(handle, sampler, samples.min(64))?;
    if distortion > 1e-9 {
        return Err(VerifyError::NotIsometric(distortion));
    }
    let disp = |x: &SpacePoint| -> Result<f64, EngineError> { handle.distance(x, &iso.apply(atlas, x)?) };
    let mut pts = Vec::new();
    for i in 0..samples as u64 {
        let mut rng = sampler.stream(i);
        let x = sampler.point(atlas, &mut rng);
        let v = disp(&x)?;
        pts.push((v, x));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // refine the best few
    let keep = pts.len().min(8);
    for item in pts.iter_mut().take(keep) {
        let mut step = sampler.radius / 8.0;
        for _ in 0..refine_iters {
            let mut improved = false;
            let d = item.1.coords.dim();
            for k in 0..d {
                for s in [-step, step] {
                    let mut c = item.1.coords.clone();
                    c.as_mut_slice()[k] += s;
                    let chart = atlas.chart(item.1.chart);
                    if !chart.contains(&c, 0.0) {
                        continue;
                    }
                    let cand = atlas.point_in(item.1.chart, c).map_err(EngineError::from)?;
                    let v = disp(&cand)?;
                    if v < item.0 {
                        *item = (v, cand);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    let inf_estimate = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let near_min_points = pts
        .iter()
        .filter(|p| p.0 <= inf_estimate + tol)
        .map(|p| atlas.format_point(&p.1))
        .collect();
    Ok(DisplacementReport {
        inf_estimate,
        near_min_points,
    })
}

/// A unit-speed line t ↦ base + t·dir inside one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartLine {
    pub base: SpacePoint,
    pub dir: CoordVec,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisReport {
    pub holds: bool,
    /// Worst |g γ(t) − γ(t + T)|.
    pub translation_gap: f64,
    /// Worst |d(γ(s), γ(t)) − |t − s||.
    pub distance_gap: f64,
    /// Worst parameter-matched gap between γ|[s,t] and the handle geodesic.
    pub trajectory_gap: f64,
}

/// Checks whether `line` is a σ-axis of `iso` with period `line.period`.
pub fn axis_check(
    handle: &dyn Bicombing,
    iso: &Isometry,
    line: &ChartLine,
    tol: f64,
) -> Result<AxisReport, EngineError> {
    let atlas = handle.atlas();
    let p = handle.exponent();
    let chart = atlas.chart(line.base.chart);
    let unit = line.dir.scale(1.0 / chart.norm(line.dir.as_slice(), p));
    let gamma = |t: f64| -> Result<SpacePoint, AtlasError> {
        let c = line.base.coords.add(&unit.scale(t))?;
        atlas.point_in(line.base.chart, c)
    };
    let ts: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
    let mut translation_gap: f64 = 0.0;
    for &t in &ts {
        let a = iso.apply(atlas, &gamma(t)?)?;
        translation_gap = translation_gap.max(handle.distance(&a, &gamma(t + line.period)?)?);
    }
    let mut distance_gap: f64 = 0.0;
    let mut trajectory_gap: f64 = 0.0;
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    for w in ts.windows(3) {
        let (s, t) = (w[0], w[2]);
        let (a, b) = (gamma(s)?, gamma(t)?);
        distance_gap = distance_gap.max((handle.distance(&a, &b)? - (t - s)).abs());
        let along = handle.eval_many(&a, &b, &grid)?;
        for (g, q) in grid.iter().zip(&along) {
            trajectory_gap = trajectory_gap.max(handle.distance(&gamma(s + g * (t - s))?, q)?);
        }
    }
    Ok(AxisReport {
        holds: translation_gap <= tol && distance_gap <= tol && trajectory_gap <= tol,
        translation_gap,
        distance_gap,
        trajectory_gap,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::EngineBicombing;
    use crate::families::{lsp, plane};

    #[test]
    fn plane_axioms_exact() {
        let a = Arc::new(plane());
        let h = EngineBicombing::new(a.clone(), PExponent::TWO);
        let iso = Isometry::translation(&a, &[2.0, -1.0]);
        let all = [
            Axiom::Conical,
            Axiom::Consistent,
            Axiom::Convex,
            Axiom::Reversible,
            Axiom::Equivariant,
        ];
        for r in check_axioms(&h, &all, &Sampler::new(3), 200, Some(&iso)).unwrap() {
            assert!(r.max_violation <= 1e-12, "{:?}", r);
        }
    }

    #[test]
    fn witness_reproduces() {
        let a = Arc::new(plane());
        let h = nudged(EngineBicombing::new(a, PExponent::INF));
        let r = &check_axioms(&h, &[Axiom::Convex], &Sampler::new(9), 200, None).unwrap()[0];
        assert!(r.max_violation > 1e-3);
        let w = r.witness.as_ref().unwrap();
        let again = reevaluate(&h, Axiom::Convex, w, None).unwrap();
        assert!((again - r.max_violation).abs() <= 1e-12 * (1.0 + again));
    }

    #[test]
    fn projection_closed_form() {
        let a = Arc::new(plane());
        let h = EngineBicombing::new(a.clone(), PExponent::TWO);
        let o = a.point("P", &[0.0, 0.0]).unwrap();
        let x = a.point("P", &[10.0, 0.0]).unwrap();
        let y = a.point("P", &[10.0, 1.0]).unwrap();
        let (lhs, bound) = projection_terms(&h, &o, &x, &y, 5.0).unwrap();
        let s = 101f64.sqrt();
        let exact = crate::lp::lp_norm(&[5.0 - 50.0 / s, 5.0 / s], PExponent::TWO);
        assert!((lhs - exact).abs() < 1e-12 && (lhs - 0.498).abs() < 1e-3);
        assert!((bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glide_on_lsp2() {
        let a = Arc::new(lsp(2).unwrap());
        let h = EngineBicombing::new(a.clone(), PExponent::INF);
        let g = Isometry::translation(&a, &[3.0, 0.0]);
        let d = displacement(&h, &g, &Sampler::new(1), 32, 5, 1e-9).unwrap();
        assert!((d.inf_estimate - 3.0).abs() < 1e-9);
        let line = ChartLine {
            base: a.point("P1", &[0.0, 0.0]).unwrap(),
            dir: CoordVec::from([1.0, 0.0]),
            period: 3.0,
        };
        let r = axis_check(&h, &g, &line, 1e-9).unwrap();
        assert!(r.holds, "{r:?}");
        let perp = ChartLine {
            dir: CoordVec::from([0.0, 1.0]),
            ..line
        };
        assert!(!axis_check(&h, &g, &perp, 1e-9).unwrap().holds);
    }
}
