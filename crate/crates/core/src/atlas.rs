//! Spaces built from flat charts glued along affine faces.
//!
//! A [`Gluing`] identifies an affine parameter box inside one chart with an
//! affine parameter box inside another. Lines in planes (optionally bounded),
//! faces of cubes and single vertices are all special cases.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{weighted_lp_norm, CoordVec, GeometryError, PExponent};

/// Coordinate tolerance for point equality.
pub const POINT_TOL: f64 = 1e-12;
/// Relative tolerance for deciding that a point lies on a gluing face.
pub const FACE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("unknown chart {0:?}")]
    UnknownChart(String),
    #[error("coordinates {coords} lie outside chart {chart}")]
    OutOfBounds { chart: String, coords: String },
    #[error("coordinates {coords} have dimension {got}, chart {chart} has dimension {want}")]
    WrongDimension {
        chart: String,
        coords: String,
        got: usize,
        want: usize,
    },
    #[error("invalid gluing #{index} ({a} ~ {b}): {reason}")]
    InvalidGluing {
        index: usize,
        a: String,
        b: String,
        reason: String,
    },
    #[error("point does not lie in chart {0}")]
    NotInChart(String),
    #[error("invalid chart {0}: {1}")]
    InvalidChart(String, String),
    #[error("unknown space family {0:?}")]
    UnknownFamily(String),
    #[error("bad parameters for {family}: {reason}")]
    BadParams { family: String, reason: String },
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartId(pub u32);

impl ChartId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    /// Unbounded two-dimensional chart.
    Plane,
    /// The unit interval.
    Interval,
    /// A bounded box of any dimension.
    Box,
    /// Any other (partially) unbounded chart, e.g. products with a plane or a line.
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub id: ChartId,
    pub name: String,
    pub kind: ChartKind,
    /// Per-coordinate bounds; infinite entries for unbounded directions.
    pub bounds: Vec<(f64, f64)>,
    /// Optional per-coordinate multiplicities of the norm, see [`weighted_lp_norm`].
    pub weights: Option<Vec<f64>>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds.iter().all(|(l, u)| l.is_finite() && u.is_finite())
    }

    pub fn norm(&self, v: &[f64], p: PExponent) -> f64 {
        weighted_lp_norm(v, self.weights.as_deref(), p)
    }

    pub fn distance(&self, a: &CoordVec, b: &CoordVec, p: PExponent) -> f64 {
        let d: smallvec::SmallVec<[f64; 4]> =
            a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        self.norm(&d, p)
    }

    pub fn contains(&self, c: &CoordVec, tol: f64) -> bool {
        c.dim() == self.dim()
            && c
                .iter()
                .zip(&self.bounds)
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    }

    /// Snaps coordinates that are within `tol` outside the bounds back onto them.
    pub fn clamp(&self, c: &mut CoordVec) {
        for (x, (l, u)) in c.as_mut_slice().iter_mut().zip(&self.bounds) {
            *x = x.clamp(*l, *u);
        }
    }
}

/// Affine map from a parameter box into one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub base: CoordVec,
    pub dirs: Vec<CoordVec>,
}

impl Face {
    pub fn eval(&self, theta: &[f64]) -> CoordVec {
        let mut out = self.base.clone();
        for (t, d) in theta.iter().zip(&self.dirs) {
            for (o, v) in out.as_mut_slice().iter_mut().zip(d.iter()) {
                *o += t * v;
            }
        }
        out
    }

    /// Least-squares parameters of `c`, together with the residual (max norm).
    pub fn locate(&self, c: &CoordVec) -> (Vec<f64>, f64) {
        let k = self.dirs.len();
        let rhs: Vec<f64> = c
            .iter()
            .zip(self.base.iter())
            .map(|(a, b)| a - b)
            .collect();
        if k == 0 {
            let r = rhs.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            return (vec![], r);
        }
        let mut gram = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] = dot(self.dirs[i].as_slice(), self.dirs[j].as_slice());
            }
            b[i] = dot(self.dirs[i].as_slice(), &rhs);
        }
        let theta = solve_small(&mut gram, &mut b, k);
        let back = self.eval(&theta);
        let r = back.max_abs_diff(c);
        (theta, r)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting for tiny dense systems.
pub(crate) fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Vec<f64> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        if d == 0.0 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for j in row + 1..n {
            s -= a[row * n + j] * x[j];
        }
        let d = a[row * n + row];
        x[row] = if d == 0.0 { 0.0 } else { s / d };
    }
    x
}

/// Identification of `face_a(θ)` in chart `a` with `face_b(θ)` in chart `b`
/// for θ in the parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Gluing {
    pub a: ChartId,
    pub b: ChartId,
    pub face_a: Face,
    pub face_b: Face,
    pub param_bounds: Vec<(f64, f64)>,
}

impl Gluing {
    /// The classic line gluing `baseA + t·dirA ∼ baseB + orientation·t·dirB`.
    pub fn line(
        a: ChartId,
        base_a: CoordVec,
        dir_a: CoordVec,
        b: ChartId,
        base_b: CoordVec,
        dir_b: CoordVec,
        orientation: i8,
    ) -> Gluing {
        let s = if orientation < 0 { -1.0 } else { 1.0 };
        Gluing {
            a,
            b,
            face_a: Face {
                base: base_a,
                dirs: vec![dir_a],
            },
            face_b: Face {
                base: base_b,
                dirs: vec![dir_b.scale(s)],
            },
            param_bounds: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    pub fn param_dim(&self) -> usize {
        self.param_bounds.len()
    }

    /// Face and opposite face/chart as seen from chart `c`.
    pub fn sides(&self, from_a: bool) -> (&Face, ChartId, &Face) {
        if from_a {
            (&self.face_a, self.b, &self.face_b)
        } else {
            (&self.face_b, self.a, &self.face_a)
        }
    }

    fn in_param_box(&self, theta: &mut [f64], tol: f64) -> bool {
        for (t, (l, u)) in theta.iter_mut().zip(&self.param_bounds) {
            if *t < l - tol || *t > u + tol {
                return false;
            }
            *t = t.clamp(*l, *u);
        }
        true
    }

    /// Maps coordinates from one side to the other if they lie on the face.
    pub fn transfer(&self, from_a: bool, c: &CoordVec) -> Option<CoordVec> {
        let (face, _, other) = self.sides(from_a);
        let (mut theta, resid) = face.locate(c);
        let scale = 1.0 + c.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let tol = FACE_TOL * scale;
        if resid > tol || !self.in_param_box(&mut theta, tol) {
            return None;
        }
        Some(other.eval(&theta))
    }
}

/// A point of the space: chart plus coordinates in that chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacePoint {
    pub chart: ChartId,
    pub coords: CoordVec,
}

impl SpacePoint {
    pub fn new(chart: ChartId, coords: CoordVec) -> Self {
        SpacePoint { chart, coords }
    }
}

/// Product bookkeeping for atlases built by `lp_product`.
#[derive(Debug, Clone)]
pub struct ProductStructure {
    pub left: Arc<ChartAtlas>,
    pub right: Arc<ChartAtlas>,
    /// For each product chart, the pair of factor charts.
    pub pairs: Vec<(ChartId, ChartId)>,
    pub index: HashMap<(ChartId, ChartId), ChartId>,
}

impl ProductStructure {
    pub fn split(&self, x: &SpacePoint) -> (SpacePoint, SpacePoint) {
        let (ca, cb) = self.pairs[x.chart.index()];
        let da = self.left.chart(ca).dim();
        let s = x.coords.as_slice();
        (
            SpacePoint::new(ca, CoordVec::from_slice_unchecked(&s[..da])),
            SpacePoint::new(cb, CoordVec::from_slice_unchecked(&s[da..])),
        )
    }

    pub fn join(&self, a: &SpacePoint, b: &SpacePoint) -> SpacePoint {
        let c = self.index[&(a.chart, b.chart)];
        SpacePoint::new(c, a.coords.concat(&b.coords))
    }
}

/// A validated space: charts, gluings, declared exponents and the chart graph.
#[derive(Debug, Clone)]
pub struct ChartAtlas {
    pub name: String,
    charts: Vec<Chart>,
    gluings: Vec<Gluing>,
    declared_p: Vec<PExponent>,
    /// For each chart: (gluing index, whether the chart is side `a`).
    adjacency: Vec<Vec<(usize, bool)>>,
    convex_charts: bool,
    product: Option<ProductStructure>,
    names: HashMap<String, ChartId>,
}

/// Incremental constructor for [`ChartAtlas`].
#[derive(Debug, Clone, Default)]
pub struct AtlasBuilder {
    name: String,
    charts: Vec<Chart>,
    gluings: Vec<Gluing>,
    declared_p: Vec<PExponent>,
    convex_charts: bool,
}

pub fn default_exponents() -> Vec<PExponent> {
    vec![PExponent::ONE, PExponent::TWO, PExponent::INF]
}

impl AtlasBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        AtlasBuilder {
            name: name.into(),
            declared_p: default_exponents(),
            convex_charts: true,
            ..Default::default()
        }
    }

    pub fn exponents(mut self, ps: Vec<PExponent>) -> Self {
        self.declared_p = ps;
        self
    }

    /// Declares whether every chart is isometrically embedded and geodesically convex.
    /// Enables the same-chart shortcut in the engine.
    pub fn convex_charts(mut self, yes: bool) -> Self {
        self.convex_charts = yes;
        self
    }

    pub fn chart(
        &mut self,
        name: impl Into<String>,
        kind: ChartKind,
        bounds: Vec<(f64, f64)>,
        weights: Option<Vec<f64>>,
    ) -> ChartId {
        let id = ChartId(self.charts.len() as u32);
        self.charts.push(Chart {
            id,
            name: name.into(),
            kind,
            bounds,
            weights,
        });
        id
    }

    pub fn plane(&mut self, name: impl Into<String>) -> ChartId {
        let inf = (f64::NEG_INFINITY, f64::INFINITY);
        self.chart(name, ChartKind::Plane, vec![inf, inf], None)
    }

    pub fn unit_box(&mut self, name: impl Into<String>, dim: usize) -> ChartId {
        let kind = if dim == 1 {
            ChartKind::Interval
        } else {
            ChartKind::Box
        };
        self.chart(name, kind, vec![(0.0, 1.0); dim], None)
    }

    pub fn glue(&mut self, g: Gluing) {
        self.gluings.push(g);
    }

    /// Glues two plane lines given by base points and directions (orientation +1).
    pub fn glue_lines(&mut self, a: ChartId, base_a: [f64; 2], dir_a: [f64; 2], b: ChartId, base_b: [f64; 2], dir_b: [f64; 2]) {
        self.gluings.push(Gluing::line(
            a,
            base_a.into(),
            dir_a.into(),
            b,
            base_b.into(),
            dir_b.into(),
            1,
        ));
    }

    pub fn build(self) -> Result<ChartAtlas, AtlasError> {
        ChartAtlas::from_parts(
            self.name,
            self.charts,
            self.gluings,
            self.declared_p,
            self.convex_charts,
            None,
        )
    }
}

impl ChartAtlas {
    pub(crate) fn from_parts(
        name: String,
        charts: Vec<Chart>,
        gluings: Vec<Gluing>,
        declared_p: Vec<PExponent>,
        convex_charts: bool,
        product: Option<ProductStructure>,
    ) -> Result<ChartAtlas, AtlasError> {
        let mut names = HashMap::new();
        for (i, c) in charts.iter().enumerate() {
            if c.id.index() != i {
                return Err(AtlasError::InvalidChart(c.name.clone(), "ids must be dense and ordered".into()));
            }
            validate_chart(c)?;
            if names.insert(c.name.clone(), c.id).is_some() {
                return Err(AtlasError::InvalidChart(c.name.clone(), "duplicate chart name".into()));
            }
        }
        let mut adjacency = vec![Vec::new(); charts.len()];
        for (i, g) in gluings.iter().enumerate() {
            validate_gluing(i, g, &charts, &declared_p)?;
            adjacency[g.a.index()].push((i, true));
            if g.b != g.a {
                adjacency[g.b.index()].push((i, false));
            }
        }
        Ok(ChartAtlas {
            name,
            charts,
            gluings,
            declared_p,
            adjacency,
            convex_charts,
            product,
            names,
        })
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, id: ChartId) -> &Chart {
        &self.charts[id.index()]
    }

    pub fn chart_by_name(&self, name: &str) -> Result<ChartId, AtlasError> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| AtlasError::UnknownChart(name.to_string()))
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    pub fn declared_p(&self) -> &[PExponent] {
        &self.declared_p
    }

    pub fn adjacency(&self, c: ChartId) -> &[(usize, bool)] {
        &self.adjacency[c.index()]
    }

    /// Distinct neighbouring charts.
    pub fn neighbours(&self, c: ChartId) -> Vec<ChartId> {
        let mut out: Vec<ChartId> = self.adjacency[c.index()]
            .iter()
            .map(|&(g, from_a)| self.gluings[g].sides(from_a).1)
            .filter(|&o| o != c)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn convex_charts(&self) -> bool {
        self.convex_charts
    }

    pub fn product(&self) -> Option<&ProductStructure> {
        self.product.as_ref()
    }

    pub fn max_dim(&self) -> usize {
        self.charts.iter().map(Chart::dim).max().unwrap_or(0)
    }

    /// Validated, canonicalized point from a chart name and coordinates.
    pub fn point(&self, chart: &str, coords: &[f64]) -> Result<SpacePoint, AtlasError> {
        let id = self.chart_by_name(chart)?;
        self.point_in(id, CoordVec::new(coords)?)
    }

    pub fn point_in(&self, id: ChartId, coords: CoordVec) -> Result<SpacePoint, AtlasError> {
        let c = self
            .charts
            .get(id.index())
            .ok_or_else(|| AtlasError::UnknownChart(id.to_string()))?;
        if coords.dim() != c.dim() {
            return Err(AtlasError::WrongDimension {
                chart: c.name.clone(),
                coords: coords.to_string(),
                got: coords.dim(),
                want: c.dim(),
            });
        }
        if !c.contains(&coords, 1e-9) {
            return Err(AtlasError::OutOfBounds {
                chart: c.name.clone(),
                coords: coords.to_string(),
            });
        }
        let mut coords = coords;
        c.clamp(&mut coords);
        Ok(self.canonicalize(&SpacePoint::new(id, coords)))
    }

    /// All (chart, coordinates) pairs identified with `x`, starting with `x` itself.
    pub fn representatives(&self, x: &SpacePoint) -> Vec<SpacePoint> {
        let mut out = vec![x.clone()];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i].clone();
            for &(g, from_a) in &self.adjacency[cur.chart.index()] {
                let gl = &self.gluings[g];
                // self-gluings are tried in both directions
                let dirs: &[bool] = if gl.a == gl.b { &[true, false] } else { std::slice::from_ref(&from_a) };
                for &fa in dirs {
                    let Some(mut c) = gl.transfer(fa, &cur.coords) else {
                        continue;
                    };
                    let target = gl.sides(fa).1;
                    self.charts[target.index()].clamp(&mut c);
                    if !out
                        .iter()
                        .any(|q| q.chart == target && q.coords.approx_eq(&c, POINT_TOL * (1.0 + scale(&c))))
                    {
                        out.push(SpacePoint::new(target, c));
                    }
                }
            }
            i += 1;
        }
        out
    }

    /// Coordinates of `x` in chart `c`, if `x` lies in that chart.
    pub fn coords_in(&self, x: &SpacePoint, c: ChartId) -> Option<CoordVec> {
        if x.chart == c {
            return Some(x.coords.clone());
        }
        self.representatives(x)
            .into_iter()
            .find(|r| r.chart == c)
            .map(|r| r.coords)
    }

    /// Representative with the least chart id (ties broken lexicographically).
    pub fn canonicalize(&self, x: &SpacePoint) -> SpacePoint {
        if self.adjacency[x.chart.index()].is_empty() {
            return x.clone();
        }
        let reps = self.representatives(x);
        reps.into_iter()
            .min_by(|a, b| {
                a.chart.cmp(&b.chart).then_with(|| {
                    a.coords
                        .iter()
                        .zip(b.coords.iter())
                        .map(|(u, v)| u.total_cmp(v))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
            })
            .unwrap()
    }

    /// Canonical-form equality with coordinate tolerance [`POINT_TOL`].
    pub fn same_point(&self, x: &SpacePoint, y: &SpacePoint) -> bool {
        let (a, b) = (self.canonicalize(x), self.canonicalize(y));
        a.chart == b.chart && a.coords.approx_eq(&b.coords, POINT_TOL * (1.0 + scale(&a.coords)))
    }

    pub fn chart_distance(&self, c: ChartId, a: &CoordVec, b: &CoordVec, p: PExponent) -> f64 {
        self.charts[c.index()].distance(a, b, p)
    }

    /// Length of a chain of chart-internal hops; `chart_seq[j]` must contain
    /// both `pts[j]` and `pts[j+1]`.
    pub fn gluing_path_length(
        &self,
        pts: &[SpacePoint],
        chart_seq: &[ChartId],
        p: PExponent,
    ) -> Result<f64, AtlasError> {
        if pts.len() <= 1 {
            return Ok(0.0);
        }
        if chart_seq.len() + 1 != pts.len() {
            return Err(AtlasError::MalformedPath(format!(
                "{} points need {} charts, got {}",
                pts.len(),
                pts.len() - 1,
                chart_seq.len()
            )));
        }
        let mut total = 0.0;
        for (j, &c) in chart_seq.iter().enumerate() {
            let name = &self.chart(c).name;
            let a = self
                .coords_in(&pts[j], c)
                .ok_or_else(|| AtlasError::MalformedPath(format!("point {j} is not in chart {name}")))?;
            let b = self
                .coords_in(&pts[j + 1], c)
                .ok_or_else(|| AtlasError::MalformedPath(format!("point {} is not in chart {name}", j + 1)))?;
            total += self.chart_distance(c, &a, &b, p);
        }
        Ok(total)
    }

    /// Human-readable form `NAME:c0,c1`.
    pub fn format_point(&self, x: &SpacePoint) -> String {
        let coords: Vec<String> = x.coords.iter().map(|v| format!("{v}")).collect();
        format!("{}:{}", self.chart(x.chart).name, coords.join(","))
    }

    /// Parses the command-line point syntax `CHART:coord,coord`.
    pub fn parse_point(&self, s: &str) -> Result<SpacePoint, AtlasError> {
        let (name, coords) = s
            .rsplit_once(':')
            .ok_or_else(|| AtlasError::MalformedPath(format!("expected CHART:coords, got {s:?}")))?;
        let vals: Result<Vec<f64>, _> = coords.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|_| AtlasError::MalformedPath(format!("bad coordinates in {s:?}")))?;
        self.point(name, &vals)
    }

    pub fn named(&self, x: &SpacePoint) -> NamedPoint {
        NamedPoint {
            chart: self.chart(x.chart).name.clone(),
            coords: x.coords.as_slice().to_vec(),
        }
    }
}

/// Serialization-friendly point with the chart name instead of its index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPoint {
    pub chart: String,
    pub coords: Vec<f64>,
}

fn scale(c: &CoordVec) -> f64 {
    c.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn validate_chart(c: &Chart) -> Result<(), AtlasError> {
    let bad = |r: &str| Err(AtlasError::InvalidChart(c.name.clone(), r.to_string()));
    if c.bounds.is_empty() {
        return bad("dimension must be positive");
    }
    if c.bounds.iter().any(|(l, u)| l.is_nan() || u.is_nan() || l >= u) {
        return bad("empty or NaN bounds");
    }
    match c.kind {
        ChartKind::Plane => {
            if c.dim() != 2 || c.is_bounded() || c.bounds.iter().any(|(l, u)| l.is_finite() || u.is_finite()) {
                return bad("plane charts are unbounded and two-dimensional");
            }
        }
        ChartKind::Interval => {
            if c.dim() != 1 || c.bounds[0] != (0.0, 1.0) {
                return bad("interval charts are [0,1]");
            }
        }
        ChartKind::Box => {
            if !c.is_bounded() {
                return bad("box charts need finite bounds");
            }
        }
        ChartKind::Flat => {}
    }
    if let Some(w) = &c.weights {
        if w.len() != c.dim() || w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("weights must be positive, one per coordinate");
        }
    }
    Ok(())
}

fn validate_gluing(
    index: usize,
    g: &Gluing,
    charts: &[Chart],
    declared_p: &[PExponent],
) -> Result<(), AtlasError> {
    let name = |c: ChartId| {
        charts
            .get(c.index())
            .map(|c| c.name.clone())
            .unwrap_or_else(|| c.to_string())
    };
    let fail = |reason: String| AtlasError::InvalidGluing {
        index,
        a: name(g.a),
        b: name(g.b),
        reason,
    };
    let (Some(ca), Some(cb)) = (charts.get(g.a.index()), charts.get(g.b.index())) else {
        return Err(fail("references a missing chart".into()));
    };
    let k = g.param_dim();
    if g.face_a.dirs.len() != k || g.face_b.dirs.len() != k {
        return Err(fail("face dimension differs from parameter dimension".into()));
    }
    if g.face_a.base.dim() != ca.dim() || g.face_b.base.dim() != cb.dim() {
        return Err(fail("face base has the wrong dimension".into()));
    }
    if g.face_a.dirs.iter().any(|d| d.dim() != ca.dim()) || g.face_b.dirs.iter().any(|d| d.dim() != cb.dim()) {
        return Err(fail("face direction has the wrong dimension".into()));
    }
    for (side, f) in [("first", &g.face_a), ("second", &g.face_b)] {
        if f.dirs.iter().any(|d| d.iter().all(|v| *v == 0.0)) {
            return Err(fail(format!("zero direction on the {side} side")));
        }
        // linear independence through the Gram determinant
        if k == 2 {
            let (u, v) = (f.dirs[0].as_slice(), f.dirs[1].as_slice());
            let det = dot(u, u) * dot(v, v) - dot(u, v).powi(2);
            if det <= 1e-12 * dot(u, u) * dot(v, v) {
                return Err(fail(format!("dependent directions on the {side} side")));
            }
        }
    }
    if g.param_bounds.iter().any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
        return Err(fail("bad parameter bounds".into()));
    }
    // the face must stay inside both charts: check the parameter box corners
    // (for unbounded parameters, check the base point and far points)
    let corners = box_probe_points(&g.param_bounds);
    for theta in &corners {
        for (f, c) in [(&g.face_a, ca), (&g.face_b, cb)] {
            let pt = f.eval(theta);
            if !c.contains(&pt, 1e-9 * (1.0 + scale(&pt))) {
                return Err(fail(format!("face leaves chart {} at {}", c.name, pt)));
            }
        }
    }
    // isometry of the induced metrics, per declared exponent
    let probes = if k == 0 { Vec::new() } else { difference_probes(k) };
    for &p in declared_p {
        for delta in &probes {
            let va = lin(&g.face_a.dirs, delta);
            let vb = lin(&g.face_b.dirs, delta);
            let na = ca.norm(&va, p);
            let nb = cb.norm(&vb, p);
            if (na - nb).abs() > 1e-12 * (1.0 + na.max(nb)) {
                return Err(fail(format!(
                    "not isometric for p={p}: parameter step {delta:?} has lengths {na} and {nb}"
                )));
            }
        }
    }
    Ok(())
}

fn lin(dirs: &[CoordVec], delta: &[f64]) -> Vec<f64> {
    let dim = dirs.first().map(CoordVec::dim).unwrap_or(0);
    let mut v = vec![0.0; dim];
    for (d, t) in dirs.iter().zip(delta) {
        for (o, x) in v.iter_mut().zip(d.iter()) {
            *o += t * x;
        }
    }
    v
}

fn box_probe_points(bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![]];
    for &(l, u) in bounds {
        let vals: Vec<f64> = [l, u, 0.0f64.clamp(l, u)]
            .into_iter()
            .map(|v| if v.is_finite() { v } else { v.signum() * 1e3 })
            .collect();
        pts = pts
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Deterministic parameter differences used to test isometry of gluings.
fn difference_probes(k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        out.push(e);
    }
    let mut seed = 0x9e3779b97f4a7c15u64;
    for _ in 0..16 {
        let v: Vec<f64> = (0..k)
            .map(|_| {
                seed ^= seed << 13;
                seed ^= seed >> 7;
                seed ^= seed << 17;
                (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            })
            .collect();
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_planes() -> ChartAtlas {
        let mut b = AtlasBuilder::new("test");
        let p1 = b.plane("P1");
        let p2 = b.plane("P2");
        b.glue_lines(p1, [0.0, 0.0], [1.0, 0.0], p2, [0.0, 0.0], [1.0, 0.0]);
        b.build().unwrap()
    }

    #[test]
    fn canonical_form_prefers_least_chart() {
        let a = two_planes();
        let x = a.point("P2", &[3.0, 0.0]).unwrap();
        assert_eq!(a.format_point(&x), "P1:3,0");
        let y = a.point("P1", &[1.0, 2.0]).unwrap();
        assert_eq!(a.format_point(&y), "P1:1,2");
        assert_eq!(a.canonicalize(&x), x);
    }

    #[test]
    fn rejects_non_isometric_gluing() {
        let mut b = AtlasBuilder::new("bad");
        let p1 = b.plane("P1");
        let p2 = b.plane("P2");
        // axis line against a diagonal: lengths differ in every p except ∞
        b.glue_lines(p1, [0.0, 0.0], [1.0, 0.0], p2, [0.0, 0.0], [1.0, 1.0]);
        let err = b.build().unwrap_err();
        match err {
            AtlasError::InvalidGluing { index, a, b, .. } => {
                assert_eq!((index, a.as_str(), b.as_str()), (0, "P1", "P2"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn gluing_path_length_examples() {
        let a = two_planes();
        let pts = vec![
            a.point("P1", &[0.0, 1.0]).unwrap(),
            a.point("P1", &[0.0, 0.0]).unwrap(),
            a.point("P2", &[0.0, 1.0]).unwrap(),
        ];
        let seq = vec![a.chart_by_name("P1").unwrap(), a.chart_by_name("P2").unwrap()];
        assert_eq!(a.gluing_path_length(&pts, &seq, PExponent::INF).unwrap(), 2.0);
        assert_eq!(a.gluing_path_length(&pts, &seq, PExponent::TWO).unwrap(), 2.0);
        assert_eq!(a.gluing_path_length(&pts[..1], &[], PExponent::TWO).unwrap(), 0.0);
        let bad = vec![seq[1], seq[1]];
        assert!(a.gluing_path_length(&pts, &bad, PExponent::TWO).is_err());
    }

    #[test]
    fn parse_point_syntax() {
        let a = two_planes();
        let x = a.parse_point("P2:1.5,-2").unwrap();
        assert_eq!(a.format_point(&x), "P2:1.5,-2");
        assert!(a.parse_point("P9:0,0").is_err());
        assert!(a.parse_point("P1:0").is_err());
        assert!(a.parse_point("garbage").is_err());
    }

    #[test]
    fn small_solver() {
        let mut m = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        let x = solve_small(&mut m, &mut b, 2);
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }
}
