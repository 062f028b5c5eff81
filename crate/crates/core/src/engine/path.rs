//! Piecewise-linear paths through a chart atlas.

use serde::Serialize;

use crate::atlas::{Chart, ChartAtlas, ChartId, NamedPoint, SpacePoint};
use crate::export::fmt_sig12;
use crate::lp::{lerp, CoordVec, PExponent};

/// A straight piece inside one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub chart: ChartId,
    pub from: CoordVec,
    pub to: CoordVec,
}

/// Chain of breakpoints; segment `j` joins breakpoints `j` and `j+1` inside
/// chart `chart_seq()[j]`. A path with one breakpoint and no segments is the
/// constant path.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPath {
    pub breakpoints: Vec<SpacePoint>,
    pub segments: Vec<PathSegment>,
}

impl PolyPath {
    pub fn constant(x: SpacePoint) -> Self {
        PolyPath {
            breakpoints: vec![x],
            segments: vec![],
        }
    }

    /// Builds a path from raw segments, dropping pieces shorter than `eps`
    /// (measured in the max norm of the coordinate difference).
    pub fn from_segments(atlas: &ChartAtlas, segs: Vec<PathSegment>, eps: f64) -> Self {
        let first = segs
            .first()
            .map(|s| SpacePoint::new(s.chart, s.from.clone()));
        let mut kept: Vec<PathSegment> = segs
            .into_iter()
            .filter(|s| s.from.max_abs_diff(&s.to) > eps)
            .collect();
        for s in &mut kept {
            let c = atlas.chart(s.chart);
            c.clamp(&mut s.from);
            c.clamp(&mut s.to);
        }
        if kept.is_empty() {
            return PolyPath::constant(atlas.canonicalize(&first.expect("path needs a point")));
        }
        let mut breakpoints = Vec::with_capacity(kept.len() + 1);
        breakpoints.push(atlas.canonicalize(&SpacePoint::new(kept[0].chart, kept[0].from.clone())));
        for s in &kept {
            breakpoints.push(atlas.canonicalize(&SpacePoint::new(s.chart, s.to.clone())));
        }
        PolyPath {
            breakpoints,
            segments: kept,
        }
    }

    pub fn chart_seq(&self) -> Vec<ChartId> {
        self.segments.iter().map(|s| s.chart).collect()
    }

    pub fn start(&self) -> &SpacePoint {
        &self.breakpoints[0]
    }

    pub fn end(&self) -> &SpacePoint {
        self.breakpoints.last().unwrap()
    }

    pub fn segment_lengths(&self, atlas: &ChartAtlas, p: PExponent) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| atlas.chart_distance(s.chart, &s.from, &s.to, p))
            .collect()
    }

    pub fn length(&self, atlas: &ChartAtlas, p: PExponent) -> f64 {
        self.segment_lengths(atlas, p).iter().sum()
    }

    /// Cumulative d_p arclength at each breakpoint.
    pub fn cumulative(&self, atlas: &ChartAtlas, p: PExponent) -> Vec<f64> {
        let mut acc = vec![0.0];
        for l in self.segment_lengths(atlas, p) {
            acc.push(acc.last().unwrap() + l);
        }
        acc
    }

    /// Point at d_p arclength fraction `t ∈ [0,1]`; endpoints are returned exactly.
    pub fn point_at(&self, atlas: &ChartAtlas, t: f64, p: PExponent) -> SpacePoint {
        self.points_at(atlas, &[t], p).pop().unwrap()
    }

    pub fn points_at(&self, atlas: &ChartAtlas, ts: &[f64], p: PExponent) -> Vec<SpacePoint> {
        if self.segments.is_empty() {
            return vec![self.breakpoints[0].clone(); ts.len()];
        }
        let cum = self.cumulative(atlas, p);
        let total = *cum.last().unwrap();
        ts.iter()
            .map(|&t| {
                if t <= 0.0 {
                    return self.breakpoints[0].clone();
                }
                if t >= 1.0 {
                    return self.end().clone();
                }
                self.point_at_arclength_with(atlas, t * total, &cum)
            })
            .collect()
    }

    /// Point at absolute d_p arclength `s` (clamped to the path).
    pub fn point_at_arclength(&self, atlas: &ChartAtlas, s: f64, p: PExponent) -> SpacePoint {
        if self.segments.is_empty() {
            return self.breakpoints[0].clone();
        }
        let cum = self.cumulative(atlas, p);
        if s <= 0.0 {
            return self.breakpoints[0].clone();
        }
        if s >= *cum.last().unwrap() {
            return self.end().clone();
        }
        self.point_at_arclength_with(atlas, s, &cum)
    }

    fn point_at_arclength_with(&self, atlas: &ChartAtlas, s: f64, cum: &[f64]) -> SpacePoint {
        let j = match cum[1..].iter().position(|&c| c >= s) {
            Some(j) => j,
            None => self.segments.len() - 1,
        };
        let seg = &self.segments[j];
        let len = cum[j + 1] - cum[j];
        let local = if len > 0.0 { ((s - cum[j]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let c = lerp(&seg.from, &seg.to, local).expect("segment endpoints share a chart");
        atlas.canonicalize(&SpacePoint::new(seg.chart, c))
    }

    /// Restriction to the d_p arclength fractions `[s, t]`.
    pub fn sub_path(&self, atlas: &ChartAtlas, s: f64, t: f64, p: PExponent) -> PolyPath {
        if self.segments.is_empty() {
            return self.clone();
        }
        let cum = self.cumulative(atlas, p);
        let total = *cum.last().unwrap();
        let (a, b) = (s.clamp(0.0, 1.0) * total, t.clamp(0.0, 1.0) * total);
        let mut segs = Vec::new();
        for (j, seg) in self.segments.iter().enumerate() {
            let (c0, c1) = (cum[j], cum[j + 1]);
            if c1 < a || c0 > b || c1 <= c0 {
                continue;
            }
            let len = c1 - c0;
            let u0 = ((a.max(c0) - c0) / len).clamp(0.0, 1.0);
            let u1 = ((b.min(c1) - c0) / len).clamp(0.0, 1.0);
            segs.push(PathSegment {
                chart: seg.chart,
                from: lerp(&seg.from, &seg.to, u0).unwrap(),
                to: lerp(&seg.from, &seg.to, u1).unwrap(),
            });
        }
        if segs.is_empty() {
            return PolyPath::constant(self.point_at(atlas, s, p));
        }
        PolyPath::from_segments(atlas, segs, 0.0)
    }

    /// Points on the path: every breakpoint and `k` interior points per segment.
    fn probe_points(&self, k: usize) -> Vec<SpacePoint> {
        let mut out = self.breakpoints.clone();
        for s in &self.segments {
            for i in 1..=k {
                let u = i as f64 / (k + 1) as f64;
                out.push(SpacePoint::new(s.chart, lerp(&s.from, &s.to, u).expect("same chart")));
            }
        }
        out
    }

    /// Chart-local distance from `x` to the path: the least d_p distance from
    /// a representative of `x` to a segment in the same chart. It bounds the
    /// gluing distance from above; infinite when no segment shares a chart.
    pub fn local_distance_to(&self, atlas: &ChartAtlas, x: &SpacePoint, p: PExponent) -> f64 {
        let reps = atlas.representatives(x);
        if self.segments.is_empty() {
            return reps
                .iter()
                .flat_map(|r| {
                    atlas
                        .representatives(&self.breakpoints[0])
                        .into_iter()
                        .filter(move |q| q.chart == r.chart)
                        .map(move |q| atlas.chart_distance(r.chart, &r.coords, &q.coords, p))
                })
                .fold(f64::INFINITY, f64::min);
        }
        let mut best = f64::INFINITY;
        for s in &self.segments {
            for r in reps.iter().filter(|r| r.chart == s.chart) {
                best = best.min(point_segment_distance(atlas.chart(s.chart), &r.coords, &s.from, &s.to, p));
            }
        }
        best
    }

    /// Symmetric Hausdorff estimate from chart-local distances, probing
    /// breakpoints and `k` interior points per segment of each path.
    pub fn local_hausdorff(&self, other: &PolyPath, atlas: &ChartAtlas, p: PExponent, k: usize) -> f64 {
        let one = |a: &PolyPath, b: &PolyPath| {
            a.probe_points(k)
                .iter()
                .map(|x| b.local_distance_to(atlas, x, p))
                .fold(0.0f64, f64::max)
        };
        one(self, other).max(one(other, self))
    }

    /// Reversed path.
    pub fn reversed(&self) -> PolyPath {
        PolyPath {
            breakpoints: self.breakpoints.iter().rev().cloned().collect(),
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| PathSegment {
                    chart: s.chart,
                    from: s.to.clone(),
                    to: s.from.clone(),
                })
                .collect(),
        }
    }

    /// Rows `(chart, coordinates, cumulative d_p arclength)` for export. Each
    /// breakpoint is written in the chart of the segment that leaves it (the
    /// last one in the chart of the segment that reaches it).
    pub fn rows(&self, atlas: &ChartAtlas, p: PExponent) -> Vec<PathRow> {
        let cum = self.cumulative(atlas, p);
        if self.segments.is_empty() {
            return vec![PathRow {
                point: atlas.named(&self.breakpoints[0]),
                arclength: 0.0,
            }];
        }
        let mut rows = Vec::new();
        for (j, s) in self.segments.iter().enumerate() {
            rows.push(PathRow {
                point: atlas.named(&SpacePoint::new(s.chart, s.from.clone())),
                arclength: cum[j],
            });
        }
        let last = self.segments.last().unwrap();
        rows.push(PathRow {
            point: atlas.named(&SpacePoint::new(last.chart, last.to.clone())),
            arclength: *cum.last().unwrap(),
        });
        rows
    }

    pub fn to_csv(&self, atlas: &ChartAtlas, p: PExponent) -> String {
        let rows = self.rows(atlas, p);
        let dim = rows.iter().map(|r| r.point.coords.len()).max().unwrap_or(0);
        let names = coord_names(dim);
        let mut out = format!("chart,{},arclength\n", names.join(","));
        for r in rows {
            let mut cells = vec![r.point.chart.clone()];
            for i in 0..dim {
                cells.push(r.point.coords.get(i).map(|v| fmt_sig12(*v)).unwrap_or_default());
            }
            cells.push(fmt_sig12(r.arclength));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, atlas: &ChartAtlas, p: PExponent) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows(atlas, p)
            .into_iter()
            .map(|r| {
                let coords: Vec<serde_json::Value> = r
                    .point
                    .coords
                    .iter()
                    .map(|v| number_value(*v))
                    .collect();
                serde_json::json!({
                    "chart": r.point.chart,
                    "coords": coords,
                    "arclength": number_value(r.arclength),
                })
            })
            .collect();
        serde_json::json!({
            "p": p.to_string(),
            "length": number_value(self.length(atlas, p)),
            "rows": rows,
        })
    }
}

/// JSON number carrying the 12-significant-digit rendering.
fn number_value(v: f64) -> serde_json::Value {
    fmt_sig12(v)
        .parse::<serde_json::Number>()
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

fn coord_names(dim: usize) -> Vec<String> {
    match dim {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        d => (1..=d).map(|i| format!("x{i}")).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathRow {
    pub point: NamedPoint,
    pub arclength: f64,
}
/// Distance in one chart from `x` to the segment `[a, b]`.
pub fn point_segment_distance(chart: &Chart, x: &CoordVec, a: &CoordVec, b: &CoordVec, p: PExponent) -> f64 {
    let f = |u: f64| chart.distance(x, &lerp(a, b, u).expect("same chart"), p);
    // golden-section search on a convex function of u ∈ [0, 1]
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    f(0.0).min(f(1.0)).min(fc).min(fd)
}

