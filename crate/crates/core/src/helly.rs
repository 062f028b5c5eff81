//! Lattice graphs of plane patches and a brute-force Helly check.
//!
//! Each plane chart contributes the integer points of a square window. Two
//! vertices of one chart are adjacent when both coordinates differ by at most
//! one (king moves, the unit ball of ℓ^∞ on ℤ²). Lattice points on a gluing
//! line are identified with their images in the other chart, so the graph
//! metric is the combinatorial ℓ^∞ metric of the glued patch.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::atlas::{ChartAtlas, ChartId, ChartKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HellyError {
    #[error("chart {0} is not a plane")]
    NotPlane(String),
    #[error("gluing #{index} is not a lattice line: {reason}")]
    NonLattice { index: usize, reason: String },
    #[error("window [-{window}, {window}]^2 leaves no center at distance >= {margin} from its boundary")]
    WindowTooSmall { window: i64, margin: u32 },
    #[error("margin {margin} is smaller than the largest radius {max_radius}")]
    MarginTooSmall { margin: u32, max_radius: u32 },
    #[error("family size must be at least 2, got {0}")]
    FamilySize(usize),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
}

/// A lattice point of one chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticePoint {
    pub chart: ChartId,
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone)]
pub struct GridGraph {
    pub window: i64,
    chart_names: Vec<String>,
    /// All lattice points of every window, each mapped to its vertex.
    index: BTreeMap<LatticePoint, usize>,
    /// Representatives of each vertex, smallest first.
    reps: Vec<Vec<LatticePoint>>,
    adj: Vec<Vec<usize>>,
    /// Graph distance to the nearest vertex on a window edge.
    depth: Vec<u32>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn lattice_value(v: f64, what: &str, index: usize) -> Result<i64, HellyError> {
    let r = v.round();
    if (v - r).abs() > 1e-9 {
        return Err(HellyError::NonLattice {
            index,
            reason: format!("{what} {v} is not an integer"),
        });
    }
    Ok(r as i64)
}

/// Lattice graph of the plane charts of `atlas` on the window `[-w, w]²`.
pub fn build_grid_graph(atlas: &ChartAtlas, window: i64) -> Result<GridGraph, HellyError> {
    for c in atlas.charts() {
        if c.kind != ChartKind::Plane || c.dim() != 2 || c.weights.is_some() {
            return Err(HellyError::NotPlane(c.name.clone()));
        }
    }
    let mut points = Vec::new();
    for c in atlas.charts() {
        for x in -window..=window {
            for y in -window..=window {
                points.push(LatticePoint { chart: c.id, x, y });
            }
        }
    }
    let slot: BTreeMap<LatticePoint, usize> = points.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mut uf = UnionFind((0..points.len()).collect());
    for (gi, g) in atlas.gluings().iter().enumerate() {
        if g.param_dim() != 1 {
            return Err(HellyError::NonLattice {
                index: gi,
                reason: "only line gluings are supported".into(),
            });
        }
        // lattice step along the line in chart a, and its image in chart b
        let da = &g.face_a.dirs[0];
        let db = &g.face_b.dirs[0];
        let step = match (da[0].abs() > 1e-12, da[1].abs() > 1e-12) {
            (true, false) => 1.0 / da[0].abs(),
            (false, true) => 1.0 / da[1].abs(),
            (true, true) if (da[0].abs() - da[1].abs()).abs() < 1e-12 => 1.0 / da[0].abs(),
            _ => {
                return Err(HellyError::NonLattice {
                    index: gi,
                    reason: "line is neither axis-parallel nor diagonal".into(),
                })
            }
        };
        for v in [da, db] {
            for k in 0..2 {
                lattice_value(v[k] * step, "direction step", gi)?;
            }
        }
        // parameter of a lattice point on the line in chart a
        let k = if da[0].abs() > 1e-12 { 0 } else { 1 };
        let base = g.face_a.base[k];
        let t0 = (base.ceil() - base) / da[k];
        let first = g.face_a.eval(&[t0]);
        if first.iter().any(|v| (v - v.round()).abs() > 1e-9) {
            return Err(HellyError::NonLattice {
                index: gi,
                reason: "the line misses the integer lattice".into(),
            });
        }
        // coordinate k moves by exactly one per step
        let fk = first[k].round() as i64;
        let sign = da[k].signum();
        for j in (-window - fk)..=(window - fk) {
            let t = t0 + j as f64 * step * sign;
            let a = g.face_a.eval(&[t]);
            let b = g.face_b.eval(&[t]);
            let pa = LatticePoint {
                chart: g.a,
                x: lattice_value(a[0], "coordinate", gi)?,
                y: lattice_value(a[1], "coordinate", gi)?,
            };
            let pb = LatticePoint {
                chart: g.b,
                x: lattice_value(b[0], "coordinate", gi)?,
                y: lattice_value(b[1], "coordinate", gi)?,
            };
            if let (Some(&ia), Some(&ib)) = (slot.get(&pa), slot.get(&pb)) {
                uf.union(ia, ib);
            }
        }
    }
    // vertices numbered by their smallest representative
    let mut root_to_vertex = BTreeMap::new();
    let mut reps: Vec<Vec<LatticePoint>> = Vec::new();
    let mut index = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let r = uf.find(i);
        let v = *root_to_vertex.entry(r).or_insert_with(|| {
            reps.push(Vec::new());
            reps.len() - 1
        });
        reps[v].push(*p);
        index.insert(*p, v);
    }
    let n = reps.len();
    let mut adj = vec![Vec::new(); n];
    for p in &points {
        let v = index[p];
        for dx in -1..=1 {
            for dy in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let q = LatticePoint {
                    chart: p.chart,
                    x: p.x + dx,
                    y: p.y + dy,
                };
                if let Some(&w) = index.get(&q) {
                    if w != v {
                        adj[v].push(w);
                    }
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let edge: Vec<usize> = (0..n)
        .filter(|&v| reps[v].iter().any(|p| p.x.abs() == window || p.y.abs() == window))
        .collect();
    let depth = bfs(&adj, &edge, u32::MAX);
    Ok(GridGraph {
        window,
        chart_names: atlas.charts().iter().map(|c| c.name.clone()).collect(),
        index,
        reps,
        adj,
        depth,
    })
}

/// Multi-source BFS distances, capped at `limit` (unreached vertices get u32::MAX).
fn bfs(adj: &[Vec<usize>], sources: &[usize], limit: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] >= limit {
            continue;
        }
        for &w in &adj[v] {
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

impl GridGraph {
    pub fn vertex_count(&self) -> usize {
        self.reps.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    /// Every lattice point that represents `v`.
    pub fn representatives(&self, v: usize) -> &[LatticePoint] {
        &self.reps[v]
    }

    pub fn vertex(&self, chart: &str, x: i64, y: i64) -> Result<usize, HellyError> {
        let id = self
            .chart_names
            .iter()
            .position(|n| n == chart)
            .ok_or_else(|| HellyError::UnknownVertex(format!("{chart}:{x},{y}")))?;
        self.index
            .get(&LatticePoint {
                chart: ChartId(id as u32),
                x,
                y,
            })
            .copied()
            .ok_or_else(|| HellyError::UnknownVertex(format!("{chart}:{x},{y}")))
    }

    /// Parses `CHART:x,y`.
    pub fn parse_vertex(&self, s: &str) -> Result<usize, HellyError> {
        let bad = || HellyError::UnknownVertex(s.to_string());
        let (chart, rest) = s.split_once(':').ok_or_else(bad)?;
        let (x, y) = rest.split_once(',').ok_or_else(bad)?;
        let x = x.trim().parse().map_err(|_| bad())?;
        let y = y.trim().parse().map_err(|_| bad())?;
        self.vertex(chart.trim(), x, y)
    }

    /// `CHART:x,y` of the smallest representative.
    pub fn label(&self, v: usize) -> String {
        let p = self.reps[v][0];
        format!("{}:{},{}", self.chart_names[p.chart.index()], p.x, p.y)
    }

    /// Graph distance to the window edge.
    pub fn depth(&self, v: usize) -> u32 {
        self.depth[v]
    }

    pub fn distances_from(&self, v: usize) -> Vec<u32> {
        bfs(&self.adj, &[v], u32::MAX)
    }

    /// Closed ball of radius `r`, as sorted vertex indices.
    pub fn ball(&self, v: usize, r: u32) -> Vec<usize> {
        let d = bfs(&self.adj, &[v], r);
        (0..d.len()).filter(|&w| d[w] <= r).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HellyOptions {
    pub max_radius: u32,
    pub margin: u32,
    /// Largest number of balls in a family.
    pub family_size: usize,
    /// Restricts centers to vertices with a representative in `[-b, b]²`.
    pub center_box: Option<i64>,
}

impl HellyOptions {
    pub fn new(max_radius: u32, margin: u32) -> Self {
        HellyOptions {
            max_radius,
            margin,
            family_size: 3,
            center_box: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairWitness {
    pub pair: (usize, usize),
    pub distance: u32,
    pub common: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Exclusion {
    pub vertex: String,
    /// Index of a center whose ball misses the vertex.
    pub excluded_by: usize,
    pub distance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Counterexample {
    pub centers: Vec<String>,
    pub radii: Vec<u32>,
    pub pairwise: Vec<PairWitness>,
    /// Every vertex of the first ball, with a ball that excludes it.
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HellyReport {
    pub pass: bool,
    pub vertices: usize,
    pub centers: usize,
    pub families_checked: u64,
    pub counterexamples_found: u64,
    pub counterexample: Option<Counterexample>,
    #[serde(skip)]
    pub all: Vec<(Vec<usize>, Vec<u32>)>,
}

impl HellyReport {
    /// Whether the given centers and radii are among the failing families.
    pub fn contains(&self, centers: &[usize], radii: &[u32]) -> bool {
        let mut key: Vec<(usize, u32)> = centers.iter().copied().zip(radii.iter().copied()).collect();
        key.sort_unstable();
        self.all.iter().any(|(c, r)| {
            let mut k: Vec<(usize, u32)> = c.iter().copied().zip(r.iter().copied()).collect();
            k.sort_unstable();
            k == key
        })
    }
}

type Bits = Vec<u64>;

fn bits_of(set: &[usize], words: usize) -> Bits {
    let mut b = vec![0u64; words];
    for &v in set {
        b[v / 64] |= 1 << (v % 64);
    }
    b
}

/// Exhaustive search over families of 2..=`family_size` closed balls with
/// admissible centers and radii `0..=max_radius` that pairwise intersect.
/// Every failing family is recorded; the reported one is the first in
/// enumeration order.
pub fn helly_check(g: &GridGraph, opts: &HellyOptions) -> Result<HellyReport, HellyError> {
    if opts.margin < opts.max_radius {
        return Err(HellyError::MarginTooSmall {
            margin: opts.margin,
            max_radius: opts.max_radius,
        });
    }
    if opts.family_size < 2 {
        return Err(HellyError::FamilySize(opts.family_size));
    }
    let n = g.vertex_count();
    let centers: Vec<usize> = (0..n)
        .filter(|&v| g.depth[v] >= opts.margin && g.depth[v] != u32::MAX)
        .filter(|&v| {
            opts.center_box
                .map_or(true, |b| g.reps[v].iter().any(|p| p.x.abs() <= b && p.y.abs() <= b))
        })
        .collect();
    if centers.is_empty() {
        return Err(HellyError::WindowTooSmall {
            window: g.window,
            margin: opts.margin,
        });
    }
    let words = n.div_ceil(64);
    let radii = opts.max_radius as usize + 1;
    let dist: Vec<Vec<u32>> = centers.iter().map(|&c| g.distances_from(c)).collect();
    // balls[i][r] for center i
    let balls: Vec<Vec<Bits>> = dist
        .iter()
        .map(|d| {
            (0..radii)
                .map(|r| bits_of(&(0..n).filter(|&w| d[w] <= r as u32).collect::<Vec<_>>(), words))
                .collect()
        })
        .collect();
    let m = centers.len();
    let pair_d = |i: usize, j: usize| dist[i][centers[j]];
    // families are strictly increasing center indices; radii odometer per family
    let results: Vec<(u64, Vec<(Vec<usize>, Vec<u32>)>)> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut checked = 0u64;
            let mut bad = Vec::new();
            let mut stack = vec![first];
            search(&mut stack, m, opts.family_size, &mut |fam: &[usize]| {
                if fam.len() < 2 {
                    return;
                }
                let k = fam.len();
                let mut rs = vec![0u32; k];
                loop {
                    let ok = (0..k).all(|a| (a + 1..k).all(|b| pair_d(fam[a], fam[b]) <= rs[a] + rs[b]));
                    if ok {
                        checked += 1;
                        let empty = (0..words).all(|w| fam.iter().zip(&rs).fold(u64::MAX, |acc, (&c, &r)| acc & balls[c][r as usize][w]) == 0);
                        if empty {
                            bad.push((fam.to_vec(), rs.clone()));
                        }
                    }
                    // next radius vector
                    let mut i = k;
                    loop {
                        if i == 0 {
                            return;
                        }
                        i -= 1;
                        if rs[i] < opts.max_radius {
                            rs[i] += 1;
                            for r in &mut rs[i + 1..] {
                                *r = 0;
                            }
                            break;
                        }
                    }
                }
            });
            (checked, bad)
        })
        .collect();
    let mut families_checked = 0;
    let mut all = Vec::new();
    for (c, bad) in results {
        families_checked += c;
        for (fam, rs) in bad {
            all.push((fam.iter().map(|&i| centers[i]).collect::<Vec<_>>(), rs));
        }
    }
    let counterexample = all.first().map(|(c, r)| certificate(g, c, r));
    Ok(HellyReport {
        pass: all.is_empty(),
        vertices: n,
        centers: m,
        families_checked,
        counterexamples_found: all.len() as u64,
        counterexample,
        all,
    })
}

/// Depth-first enumeration of increasing index sequences extending `stack`.
fn search(stack: &mut Vec<usize>, m: usize, max_len: usize, visit: &mut impl FnMut(&[usize])) {
    visit(stack);
    if stack.len() == max_len {
        return;
    }
    let last = *stack.last().unwrap();
    for next in last + 1..m {
        stack.push(next);
        search(stack, m, max_len, visit);
        stack.pop();
    }
}

/// Pairwise witnesses and per-vertex exclusions for a family of balls.
pub fn certificate(g: &GridGraph, centers: &[usize], radii: &[u32]) -> Counterexample {
    let dist: Vec<Vec<u32>> = centers.iter().map(|&c| g.distances_from(c)).collect();
    let k = centers.len();
    let mut pairwise = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let common = (0..g.vertex_count()).find(|&w| dist[a][w] <= radii[a] && dist[b][w] <= radii[b]);
            pairwise.push(PairWitness {
                pair: (a, b),
                distance: dist[a][centers[b]],
                common: common.map_or_else(|| "-".into(), |w| g.label(w)),
            });
        }
    }
    let exclusions = g
        .ball(centers[0], radii[0])
        .into_iter()
        .filter_map(|w| {
            (0..k).find(|&j| dist[j][w] > radii[j]).map(|j| Exclusion {
                vertex: g.label(w),
                excluded_by: j,
                distance: dist[j][w],
            })
        })
        .collect();
    Counterexample {
        centers: centers.iter().map(|&c| g.label(c)).collect(),
        radii: radii.to_vec(),
        pairwise,
        exclusions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_family, plane};

    #[test]
    fn single_plane_shape() {
        let g = build_grid_graph(&plane(), 3).unwrap();
        assert_eq!(g.vertex_count(), 49);
        let o = g.vertex("P", 0, 0).unwrap();
        assert_eq!(g.ball(o, 0), vec![o]);
        assert_eq!(g.ball(o, 1).len(), 9);
    }

    #[test]
    fn gamma_patches_share_lines() {
        let g = build_grid_graph(&build_family("gamma45").unwrap(), 3).unwrap();
        assert_eq!(g.vertex_count(), 2 * 49 - 7);
        assert_eq!(g.vertex("P1", 2, 2).unwrap(), g.vertex("P2", 2, 2).unwrap());
        let o = g.vertex("P1", 0, 0).unwrap();
        // both king neighbourhoods, the three diagonal points counted once
        assert_eq!(g.ball(o, 1).len(), 9 + 9 - 3);
        let g = build_grid_graph(&build_family("gamma90").unwrap(), 3).unwrap();
        assert_eq!(g.vertex("P1", -3, 0).unwrap(), g.vertex("P2", -3, 0).unwrap());
        assert_ne!(g.vertex("P1", 0, 1).unwrap(), g.vertex("P2", 0, 1).unwrap());
    }

    #[test]
    fn gamma45_triple() {
        let g = build_grid_graph(&build_family("gamma45").unwrap(), 3).unwrap();
        let r = helly_check(&g, &HellyOptions::new(1, 1)).unwrap();
        assert!(!r.pass);
        let c = [
            g.vertex("P1", -1, 0).unwrap(),
            g.vertex("P1", 1, 2).unwrap(),
            g.vertex("P2", 1, 0).unwrap(),
        ];
        assert!(r.contains(&c, &[1, 1, 1]));
    }

    #[test]
    fn plane_and_gamma90_pass() {
        let g = build_grid_graph(&plane(), 5).unwrap();
        assert!(helly_check(&g, &HellyOptions::new(2, 2)).unwrap().pass);
        let g = build_grid_graph(&build_family("gamma90").unwrap(), 7).unwrap();
        assert!(helly_check(&g, &HellyOptions::new(2, 3)).unwrap().pass);
    }

    #[test]
    fn rejects_off_lattice_and_small_windows() {
        let g = build_grid_graph(&plane(), 1).unwrap();
        assert!(matches!(helly_check(&g, &HellyOptions::new(1, 2)), Err(HellyError::WindowTooSmall { .. })));
        assert!(matches!(helly_check(&g, &HellyOptions::new(2, 1)), Err(HellyError::MarginTooSmall { .. })));
        let spec = r#"{"charts":[{"name":"A","kind":"plane"},{"name":"B","kind":"plane"}],
            "gluings":[{"a":"A","b":"B","line_a":{"base":[0,0.5],"dir":[1,0]},"line_b":{"base":[0,0.5],"dir":[1,0]}}]}"#;
        let atlas = crate::space_spec::build_space(&crate::space_spec::SpaceSpec::parse(spec).unwrap()).unwrap();
        assert!(matches!(build_grid_graph(&atlas, 3), Err(HellyError::NonLattice { .. })));
    }
}
