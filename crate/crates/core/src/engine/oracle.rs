//! Brute-force distance oracle: Dijkstra on a lattice in every chart.
//!
//! Each chart carries the lattice hℤ^d (clipped to its bounds, or to the box
//! [−W, W]^d in unbounded directions). Lattice points identified by a gluing
//! are merged. Edges join lattice points whose coordinates differ by at most
//! one step in every direction (8 neighbours in a plane, 26 in a 3-cube) and
//! weigh the exact chart d_p length of the straight step. Endpoints are joined
//! to the corners of their lattice cells.
//!
//! Every grid path is a gluing path, so the oracle never undershoots the true
//! distance. The overshoot is bounded by `c_p·h·d` with the constants in
//! [`oracle_constant`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::atlas::{AtlasError, ChartAtlas, SpacePoint};
use crate::lp::PExponent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("window too small: endpoint clearance {clearance} is below half the estimate {best}")]
    WindowTooSmall { clearance: f64, best: f64 },
    #[error("chart {chart} bounds are not aligned with resolution {h}")]
    Misaligned { chart: String, h: f64 },
    #[error("point {0} lies outside the oracle window")]
    OutsideWindow(String),
    #[error("endpoints are not connected inside the window")]
    Disconnected,
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

/// Documented overshoot constants: `oracle ≤ d·(1 + c_p·h)` for the pairs
/// used in the test suites (separation at least 1/2). For ℓ^1 and ℓ^∞ the
/// king-move lattice is exact between lattice points, so only the snapping of
/// endpoints and crossing points contributes. For ℓ² the worst direction of
/// the 8-neighbour stencil adds a factor ≈ 1.0824 (26-neighbour: ≈ 1.13).
pub fn oracle_constant(p: PExponent) -> f64 {
    match p {
        PExponent::Infinity => 8.0,
        PExponent::Finite(q) if q == 1.0 => 8.0,
        _ => 12.0,
    }
}

struct ChartGrid {
    lo: Vec<f64>,
    counts: Vec<usize>,
    ids: Vec<u32>,
    unbounded: Vec<bool>,
}

impl ChartGrid {
    fn len(&self) -> usize {
        self.counts.iter().product()
    }

    fn unflatten(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        for (k, c) in self.counts.iter().enumerate().rev() {
            out[k] = i % c;
            i /= c;
        }
        out
    }

    fn flatten(&self, idx: &[i64]) -> Option<usize> {
        let mut out = 0usize;
        for (k, &c) in self.counts.iter().enumerate() {
            let v = idx[k];
            if v < 0 || v as usize >= c {
                return None;
            }
            out = out * c + v as usize;
        }
        Some(out)
    }
}

/// Lattice graph over a whole atlas; reusable for many queries and exponents.
pub struct GridOracle<'a> {
    atlas: &'a ChartAtlas,
    h: f64,
    grids: Vec<ChartGrid>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    classes: Vec<u16>,
    /// (chart, step vector) per edge class.
    class_steps: Vec<(usize, Vec<f64>)>,
    boundary: Vec<bool>,
    nodes: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct State(f64, u32);
impl Eq for State {}
impl Ord for State {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}
impl PartialOrd for State {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Dsu(Vec<u32>);
impl Dsu {
    fn find(&mut self, mut a: u32) -> u32 {
        while self.0[a as usize] != a {
            let p = self.0[a as usize];
            self.0[a as usize] = self.0[p as usize];
            a = p;
        }
        a
    }
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi as usize] = lo;
        }
    }
}

/// Field of grid distances from one endpoint.
pub struct SourceField {
    dist: Vec<f64>,
    /// Grid distance to the nearest window-boundary node (∞ if none).
    pub boundary: f64,
}

impl<'a> GridOracle<'a> {
    /// `window` is the half-width used for unbounded coordinates; it must be a
    /// multiple of `h`, as must all finite chart bounds.
    pub fn build(atlas: &'a ChartAtlas, h: f64, window: f64) -> Result<Self, OracleError> {
        let aligned = |v: f64| ((v / h).round() * h - v).abs() < 1e-9;
        let mut grids = Vec::new();
        let mut total = 0usize;
        for c in atlas.charts() {
            let mut lo = Vec::new();
            let mut counts = Vec::new();
            let mut unbounded = Vec::new();
            for &(l, u) in &c.bounds {
                let (l2, u2) = (if l.is_finite() { l } else { -window }, if u.is_finite() { u } else { window });
                if !aligned(l2) || !aligned(u2) {
                    return Err(OracleError::Misaligned { chart: c.name.clone(), h });
                }
                lo.push(l2);
                counts.push(((u2 - l2) / h).round() as usize + 1);
                unbounded.push(!l.is_finite() || !u.is_finite());
            }
            let n: usize = counts.iter().product();
            grids.push(ChartGrid {
                lo,
                counts,
                ids: (total as u32..(total + n) as u32).collect(),
                unbounded,
            });
            total += n;
        }
        let mut dsu = Dsu((0..total as u32).collect());
        for g in atlas.gluings() {
            let (ga, gb) = (&grids[g.a.index()], &grids[g.b.index()]);
            for local in 0..ga.len() {
                let idx = ga.unflatten(local);
                let coords: Vec<f64> = idx.iter().zip(&ga.lo).map(|(i, l)| l + *i as f64 * h).collect();
                let cv = crate::lp::CoordVec::from_slice_unchecked(&coords);
                let Some(other) = g.transfer(true, &cv) else { continue };
                let lat: Vec<i64> = other
                    .iter()
                    .zip(&gb.lo)
                    .map(|(v, l)| ((v - l) / h).round() as i64)
                    .collect();
                let snapped_ok = other
                    .iter()
                    .zip(&gb.lo)
                    .zip(&lat)
                    .all(|((v, l), i)| (l + *i as f64 * h - v).abs() < 1e-9);
                if !snapped_ok {
                    continue;
                }
                if let Some(j) = gb.flatten(&lat) {
                    dsu.union(ga.ids[local], gb.ids[j]);
                }
            }
        }
        // compress
        let mut remap = vec![u32::MAX; total];
        let mut nodes = 0u32;
        for i in 0..total as u32 {
            let r = dsu.find(i) as usize;
            if remap[r] == u32::MAX {
                remap[r] = nodes;
                nodes += 1;
            }
            remap[i as usize] = remap[r];
        }
        for g in &mut grids {
            for id in &mut g.ids {
                *id = remap[*id as usize];
            }
        }
        let nodes = nodes as usize;
        let mut boundary = vec![false; nodes];
        let mut class_steps = Vec::new();
        let mut class_base = Vec::new();
        for (ci, g) in grids.iter().enumerate() {
            let d = g.counts.len();
            class_base.push(class_steps.len());
            for st in stencil(d) {
                class_steps.push((ci, st.iter().map(|s| *s as f64 * h).collect()));
            }
            for local in 0..g.len() {
                let idx = g.unflatten(local);
                let on_edge = idx
                    .iter()
                    .zip(&g.counts)
                    .zip(&g.unbounded)
                    .any(|((i, c), u)| *u && (*i == 0 || *i + 1 == *c));
                if on_edge {
                    boundary[g.ids[local] as usize] = true;
                }
            }
        }
        // CSR in two passes
        let mut degree = vec![0u32; nodes + 1];
        let emit = |mut f: Box<dyn FnMut(u32, u32, u16) + '_>| {
            for (ci, g) in grids.iter().enumerate() {
                let d = g.counts.len();
                let st = stencil(d);
                for local in 0..g.len() {
                    let idx = g.unflatten(local);
                    for (k, s) in st.iter().enumerate() {
                        let nb: Vec<i64> = idx.iter().zip(s).map(|(i, s)| *i as i64 + *s as i64).collect();
                        if let Some(j) = g.flatten(&nb) {
                            f(g.ids[local], g.ids[j], (class_base[ci] + k) as u16);
                        }
                    }
                }
            }
        };
        emit(Box::new(|u, _, _| degree[u as usize + 1] += 1));
        let mut offsets = degree;
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        let m = offsets[nodes] as usize;
        let mut targets = vec![0u32; m];
        let mut classes = vec![0u16; m];
        let mut fill = offsets.clone();
        emit(Box::new(|u, v, c| {
            let pos = fill[u as usize] as usize;
            targets[pos] = v;
            classes[pos] = c;
            fill[u as usize] += 1;
        }));
        Ok(GridOracle {
            atlas,
            h,
            grids,
            offsets,
            targets,
            classes,
            class_steps,
            boundary,
            nodes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Lattice corners of the cells containing `x`, with exact chart distances.
    fn seeds(&self, x: &SpacePoint, p: PExponent) -> Result<Vec<(u32, f64)>, OracleError> {
        let mut out = Vec::new();
        for r in self.atlas.representatives(x) {
            let g = &self.grids[r.chart.index()];
            let chart = self.atlas.chart(r.chart);
            let d = g.counts.len();
            let base: Vec<i64> = r
                .coords
                .iter()
                .zip(&g.lo)
                .map(|(v, l)| ((v - l) / self.h).floor() as i64)
                .collect();
            let mut any = false;
            for mask in 0..(1usize << d) {
                let idx: Vec<i64> = (0..d).map(|k| base[k] + ((mask >> k) & 1) as i64).collect();
                if let Some(j) = g.flatten(&idx) {
                    let corner: Vec<f64> = idx.iter().zip(&g.lo).map(|(i, l)| l + *i as f64 * self.h).collect();
                    let cv = crate::lp::CoordVec::from_slice_unchecked(&corner);
                    out.push((g.ids[j], chart.distance(&r.coords, &cv, p)));
                    any = true;
                }
            }
            if !any {
                return Err(OracleError::OutsideWindow(self.atlas.format_point(x)));
            }
        }
        Ok(out)
    }

    pub fn field(&self, x: &SpacePoint, p: PExponent) -> Result<SourceField, OracleError> {
        let weights: Vec<f64> = self
            .class_steps
            .iter()
            .map(|(ci, st)| self.atlas.charts()[*ci].norm(st, p))
            .collect();
        let mut dist = vec![f64::INFINITY; self.nodes];
        let mut heap = BinaryHeap::new();
        for (n, d) in self.seeds(x, p)? {
            if d < dist[n as usize] {
                dist[n as usize] = d;
                heap.push(State(d, n));
            }
        }
        let mut boundary = f64::INFINITY;
        while let Some(State(d, u)) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            if self.boundary[u as usize] && d < boundary {
                boundary = d;
            }
            let (a, b) = (self.offsets[u as usize] as usize, self.offsets[u as usize + 1] as usize);
            for e in a..b {
                let v = self.targets[e] as usize;
                let nd = d + weights[self.classes[e] as usize];
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(State(nd, v as u32));
                }
            }
        }
        Ok(SourceField { dist, boundary })
    }

    /// Grid distance from the source of `field` to `y`.
    pub fn read(&self, field: &SourceField, x: &SpacePoint, y: &SpacePoint, p: PExponent) -> Result<f64, OracleError> {
        let mut best = f64::INFINITY;
        for (n, d) in self.seeds(y, p)? {
            best = best.min(field.dist[n as usize] + d);
        }
        // direct edge when both endpoints share a lattice cell neighbourhood
        for rx in self.atlas.representatives(x) {
            for ry in self.atlas.representatives(y) {
                if rx.chart == ry.chart && rx.coords.max_abs_diff(&ry.coords) <= self.h * (1.0 + 1e-9) {
                    best = best.min(self.atlas.chart_distance(rx.chart, &rx.coords, &ry.coords, p));
                }
            }
        }
        if !best.is_finite() {
            return Err(OracleError::Disconnected);
        }
        Ok(best)
    }

    /// Single query with the window check on both endpoints.
    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint, p: PExponent) -> Result<f64, OracleError> {
        if self.atlas.same_point(x, y) {
            return Ok(0.0);
        }
        let fx = self.field(x, p)?;
        let best = self.read(&fx, x, y, p)?;
        let fy = self.field(y, p)?;
        self.check_window(fx.boundary.min(fy.boundary), best, p)?;
        Ok(best)
    }

    /// Errors when an endpoint is closer to the window boundary than half the estimate.
    pub fn check_window(&self, clearance: f64, best: f64, p: PExponent) -> Result<(), OracleError> {
        let lower = clearance / (1.0 + oracle_constant(p) * self.h);
        if lower < best / 2.0 {
            return Err(OracleError::WindowTooSmall { clearance: lower, best });
        }
        Ok(())
    }
}

/// All steps in {−1,0,1}^d except zero.
fn stencil(d: usize) -> Vec<Vec<i8>> {
    let mut out: Vec<Vec<i8>> = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v| {
                [-1i8, 0, 1].into_iter().map(move |s| {
                    let mut w = v.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| v.iter().any(|s| *s != 0));
    out
}

/// One-shot oracle. The window half-width for unbounded charts is chosen
/// from the endpoint coordinates.
pub fn grid_oracle_distance(
    atlas: &ChartAtlas,
    x: &SpacePoint,
    y: &SpacePoint,
    p: PExponent,
    h: f64,
) -> Result<f64, OracleError> {
    let reach = atlas
        .representatives(x)
        .iter()
        .chain(atlas.representatives(y).iter())
        .flat_map(|r| r.coords.iter().copied().collect::<Vec<_>>())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let window = ((2.0 * reach + 2.0) / h).ceil() * h;
    GridOracle::build(atlas, h, window)?.distance(x, y, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::build_family;

    #[test]
    fn plane_three_four_five() {
        let a = build_family("plane").unwrap();
        let x = a.point("P", &[0.0, 0.0]).unwrap();
        let y = a.point("P", &[3.0, 4.0]).unwrap();
        let h = 1.0 / 64.0;
        let d = grid_oracle_distance(&a, &x, &y, PExponent::TWO, h).unwrap();
        assert!(d >= 5.0 - 1e-12 && d <= 5.0 * 1.09, "{d}");
        assert_eq!(grid_oracle_distance(&a, &x, &x, PExponent::TWO, h).unwrap(), 0.0);
        let d = grid_oracle_distance(&a, &x, &y, PExponent::INF, h).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        let d = grid_oracle_distance(&a, &x, &y, PExponent::ONE, h).unwrap();
        assert!((d - 7.0).abs() < 1e-12);
    }

    #[test]
    fn lsp2_sup_norm() {
        let a = build_family("lsp2").unwrap();
        let x = a.point("P1", &[0.0, 1.0]).unwrap();
        let y = a.point("P2", &[0.0, 1.0]).unwrap();
        let h = 1.0 / 64.0;
        let d = grid_oracle_distance(&a, &x, &y, PExponent::INF, h).unwrap();
        assert!((d - 2.0).abs() <= 2.0 * h * oracle_constant(PExponent::INF), "{d}");
    }

    #[test]
    fn window_check_fires() {
        let a = build_family("plane").unwrap();
        let x = a.point("P", &[0.0, 0.0]).unwrap();
        let y = a.point("P", &[1.5, 0.0]).unwrap();
        let o = GridOracle::build(&a, 0.25, 1.75).unwrap();
        assert!(matches!(o.distance(&x, &y, PExponent::TWO), Err(OracleError::WindowTooSmall { .. })));
    }
}
