//! Cube complexes with the piecewise ℓ^p metric, and ℓ^p products of atlases.
//!
//! A complex is given by its maximal cubes, each a list of 2^k vertex labels
//! in binary order: vertex `j` of a k-cube sits at the corner whose
//! coordinate `i` is bit `i` of `j`. Every maximal cube becomes a unit box
//! chart and every pair of maximal cubes that meet is glued along the shared
//! face.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::atlas::{
    AtlasBuilder, AtlasError, Chart, ChartAtlas, ChartId, ChartKind, Face, Gluing, ProductStructure, SpacePoint,
};
use crate::lp::{CoordVec, PExponent};

/// One maximal cube: a chart name and its vertices in binary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeDef {
    pub name: String,
    pub vertices: Vec<String>,
}

/// Inputs accepted by [`build_cube_complex`].
#[derive(Debug, Clone, PartialEq)]
pub enum CubeSpec {
    /// A square and an interval sharing one vertex.
    F,
    /// Five squares around a central vertex, consecutive squares sharing an edge.
    F5,
    /// Cubes of dimension x_i² for the first `length` terms, far corner glued to origin.
    NChain { terms: Vec<f64>, length: usize },
    Square,
    Interval,
    Cubes(Vec<CubeDef>),
}

#[derive(Debug, Clone)]
pub struct CubeComplex {
    vertices: Vec<String>,
    /// Maximal cubes as vertex index lists in binary order.
    maximal: Vec<Vec<usize>>,
    /// Every cube (all faces of maximal cubes) as a sorted vertex set.
    cubes: BTreeSet<Vec<usize>>,
    atlas: Arc<ChartAtlas>,
}

/// Local complexity (n, m) of a point: n = dim X_x − dim C(x), m = dim C(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PointType {
    pub n: usize,
    pub m: usize,
}

fn bad(family: &str, reason: impl Into<String>) -> AtlasError {
    AtlasError::BadParams {
        family: family.into(),
        reason: reason.into(),
    }
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn spec_cubes(spec: &CubeSpec) -> Result<(String, Vec<CubeDef>), AtlasError> {
    let cube = |name: &str, v: &[&str]| CubeDef {
        name: name.into(),
        vertices: v.iter().map(|s| s.to_string()).collect(),
    };
    Ok(match spec {
        CubeSpec::F => ("F".into(), vec![cube("Q", &["o", "a", "b", "c"]), cube("I", &["o", "e"])]),
        CubeSpec::F5 => {
            let e = labels("e", 5);
            let d = labels("d", 5);
            let cubes = (0..5)
                .map(|i| CubeDef {
                    name: format!("Q{i}"),
                    vertices: vec!["c".into(), e[i].clone(), e[(i + 1) % 5].clone(), d[i].clone()],
                })
                .collect();
            ("F5".into(), cubes)
        }
        CubeSpec::Square => ("square".into(), vec![cube("Q", &["v0", "v1", "v2", "v3"])]),
        CubeSpec::Interval => ("interval".into(), vec![cube("I", &["v0", "v1"])]),
        CubeSpec::NChain { terms, length } => {
            if *length == 0 || *length > terms.len() {
                return Err(bad("n_chain", format!("length {length} not in 1..={}", terms.len())));
            }
            let mut cubes = Vec::new();
            let mut origin = "w0".to_string();
            for (i, x) in terms[..*length].iter().enumerate() {
                let k = (x * x).round();
                if !(k >= 1.0 && (x * x - k).abs() < 1e-9 && k <= 8.0) {
                    return Err(bad("n_chain", format!("term {x} is not √k for an integer 1 ≤ k ≤ 8")));
                }
                let k = k as usize;
                let far = format!("w{}", i + 1);
                let mut vs: Vec<String> = (0..1usize << k).map(|j| format!("c{i}.{j}")).collect();
                vs[0] = origin.clone();
                vs[(1 << k) - 1] = far.clone();
                cubes.push(CubeDef {
                    name: format!("C{i}"),
                    vertices: vs,
                });
                origin = far;
            }
            ("n_chain".into(), cubes)
        }
        CubeSpec::Cubes(c) => ("cubes".into(), c.clone()),
    })
}

/// Sub-faces of a cube with `k` axes: (fixed mask, fixed values) pairs.
fn face_vertices(cube: &[usize], k: usize, free: usize, fixed_vals: usize) -> Vec<usize> {
    (0..1usize << k)
        .filter(|j| j & !free == fixed_vals & !free)
        .map(|j| cube[j])
        .collect()
}

fn cube_dim(len: usize) -> Option<usize> {
    if len.is_power_of_two() {
        Some(len.trailing_zeros() as usize)
    } else {
        None
    }
}

pub fn build_cube_complex(spec: &CubeSpec) -> Result<CubeComplex, AtlasError> {
    let (name, defs) = spec_cubes(spec)?;
    from_cubes(&name, &defs)
}

fn from_cubes(name: &str, defs: &[CubeDef]) -> Result<CubeComplex, AtlasError> {
    if defs.is_empty() {
        return Err(bad(name, "no cubes"));
    }
    let mut vertices: Vec<String> = Vec::new();
    let mut vindex: HashMap<String, usize> = HashMap::new();
    let mut maximal = Vec::new();
    let mut dims = Vec::new();
    for d in defs {
        let k = cube_dim(d.vertices.len())
            .filter(|k| *k >= 1)
            .ok_or_else(|| bad(name, format!("cube {} needs 2^k vertices, k ≥ 1", d.name)))?;
        let mut ids = Vec::new();
        for v in &d.vertices {
            let id = *vindex.entry(v.clone()).or_insert_with(|| {
                vertices.push(v.clone());
                vertices.len() - 1
            });
            ids.push(id);
        }
        if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
            return Err(bad(name, format!("cube {} repeats a vertex", d.name)));
        }
        maximal.push(ids);
        dims.push(k);
    }
    // all faces
    let mut cubes = BTreeSet::new();
    let mut faces_of: Vec<BTreeSet<Vec<usize>>> = Vec::new();
    for (c, &k) in maximal.iter().zip(&dims) {
        let mut mine = BTreeSet::new();
        for free in 0..1usize << k {
            for vals in 0..1usize << k {
                if vals & free != 0 {
                    continue;
                }
                let mut f = face_vertices(c, k, free, vals);
                f.sort_unstable();
                mine.insert(f);
            }
        }
        cubes.extend(mine.iter().cloned());
        faces_of.push(mine);
    }
    // maximality and intersections
    for i in 0..maximal.len() {
        let si: BTreeSet<usize> = maximal[i].iter().copied().collect();
        for j in 0..maximal.len() {
            if i == j {
                continue;
            }
            let sj: BTreeSet<usize> = maximal[j].iter().copied().collect();
            if si.is_subset(&sj) {
                return Err(bad(name, format!("cube {} is a face of cube {}", defs[i].name, defs[j].name)));
            }
            if j < i {
                continue;
            }
            let common: Vec<usize> = si.intersection(&sj).copied().collect();
            if !common.is_empty() && !(faces_of[i].contains(&common) && faces_of[j].contains(&common)) {
                return Err(bad(
                    name,
                    format!("cubes {} and {} overlap in a non-face", defs[i].name, defs[j].name),
                ));
            }
        }
    }
    // atlas
    let mut b = AtlasBuilder::new(name);
    let ids: Vec<ChartId> = defs
        .iter()
        .zip(&dims)
        .map(|(d, &k)| b.unit_box(d.name.clone(), k))
        .collect();
    let corner = |k: usize, j: usize| -> Vec<f64> { (0..k).map(|i| ((j >> i) & 1) as f64).collect() };
    for i in 0..maximal.len() {
        for j in i + 1..maximal.len() {
            let pos_j: HashMap<usize, usize> = maximal[j].iter().enumerate().map(|(a, v)| (*v, a)).collect();
            let shared: Vec<usize> = (0..maximal[i].len()).filter(|a| pos_j.contains_key(&maximal[i][*a])).collect();
            if shared.is_empty() {
                continue;
            }
            let (ki, kj) = (dims[i], dims[j]);
            // origin of the face in cube i: the shared corner with the fewest bits set
            let o_i = *shared.iter().min_by_key(|a| a.count_ones()).unwrap();
            let o_j = pos_j[&maximal[i][o_i]];
            let free: Vec<usize> = (0..ki)
                .filter(|ax| shared.contains(&(o_i | (1 << ax))) && o_i & (1 << ax) == 0)
                .collect();
            let mut dirs_i = Vec::new();
            let mut dirs_j = Vec::new();
            for &ax in &free {
                let nb_j = pos_j[&maximal[i][o_i | (1 << ax)]];
                let diff = nb_j ^ o_j;
                if diff.count_ones() != 1 {
                    return Err(bad(name, format!("cubes {} and {} meet in a twisted face", defs[i].name, defs[j].name)));
                }
                let mut di = vec![0.0; ki];
                di[ax] = 1.0;
                let mut dj = vec![0.0; kj];
                let bj = diff.trailing_zeros() as usize;
                dj[bj] = if nb_j > o_j { 1.0 } else { -1.0 };
                dirs_i.push(CoordVec::from_slice_unchecked(&di));
                dirs_j.push(CoordVec::from_slice_unchecked(&dj));
            }
            b.glue(Gluing {
                a: ids[i],
                b: ids[j],
                face_a: Face {
                    base: CoordVec::from_slice_unchecked(&corner(ki, o_i)),
                    dirs: dirs_i,
                },
                face_b: Face {
                    base: CoordVec::from_slice_unchecked(&corner(kj, o_j)),
                    dirs: dirs_j,
                },
                param_bounds: vec![(0.0, 1.0); free.len()],
            });
        }
    }
    let atlas = Arc::new(b.build()?);
    Ok(CubeComplex {
        vertices,
        maximal,
        cubes,
        atlas,
    })
}

impl CubeComplex {
    pub fn atlas(&self) -> &ChartAtlas {
        &self.atlas
    }

    pub fn shared_atlas(&self) -> Arc<ChartAtlas> {
        self.atlas.clone()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn maximal_cubes(&self) -> usize {
        self.maximal.len()
    }

    /// Number of cubes of every dimension, vertices included.
    pub fn cube_count(&self) -> usize {
        self.cubes.len()
    }

    pub fn dim(&self) -> usize {
        self.atlas.max_dim()
    }

    /// Whether the cube (as a vertex set) belongs to the complex.
    pub fn has_cube(&self, vertices: &[&str]) -> bool {
        let mut ids = Vec::new();
        for v in vertices {
            match self.vertices.iter().position(|w| w == v) {
                Some(i) => ids.push(i),
                None => return false,
            }
        }
        ids.sort_unstable();
        self.cubes.contains(&ids)
    }

    /// The carrier cube C(x) as a sorted vertex set, with its dimension.
    fn carrier(&self, x: &SpacePoint) -> (Vec<usize>, usize) {
        let cube = &self.maximal[x.chart.index()];
        let k = x.coords.dim();
        let mut free = 0usize;
        let mut vals = 0usize;
        for (i, c) in x.coords.iter().enumerate() {
            if *c >= 1.0 - 1e-12 {
                vals |= 1 << i;
            } else if *c > 1e-12 {
                free |= 1 << i;
            }
        }
        let mut f = face_vertices(cube, k, free, vals);
        f.sort_unstable();
        (f, free.count_ones() as usize)
    }

    pub fn point_type(&self, x: &SpacePoint) -> PointType {
        let (carrier, m) = self.carrier(x);
        let star_dim = self
            .maximal
            .iter()
            .filter(|c| carrier.iter().all(|v| c.contains(v)))
            .map(|c| c.len().trailing_zeros() as usize)
            .max()
            .unwrap_or(m);
        PointType { n: star_dim - m, m }
    }
}

pub fn point_type(cx: &CubeComplex, x: &SpacePoint) -> PointType {
    cx.point_type(x)
}

fn product_kind(a: &Chart, b: &Chart) -> ChartKind {
    if a.is_bounded() && b.is_bounded() {
        ChartKind::Box
    } else {
        ChartKind::Flat
    }
}

fn lift_face(f: &Face, own_first: bool, other: &Chart) -> Face {
    let od = other.dim();
    let zeros = CoordVec::zeros(od);
    let pad = |v: &CoordVec, lead: bool| {
        if lead == own_first {
            v.concat(&zeros)
        } else {
            zeros.concat(v)
        }
    };
    let fd = f.base.dim();
    let mut dirs: Vec<CoordVec> = f.dirs.iter().map(|d| pad(d, true)).collect();
    for j in 0..od {
        let mut e = vec![0.0; fd + od];
        let at = if own_first { fd + j } else { j };
        e[at] = 1.0;
        dirs.push(CoordVec::from_slice_unchecked(&e));
    }
    Face {
        base: pad(&f.base, true),
        dirs,
    }
}

/// The ℓ^p product A × B. Product charts `A*B` carry concatenated
/// coordinates, bounds and weights; every gluing of one factor is lifted by
/// the identity on the other. Evaluated with exponent q the atlas is the ℓ^q
/// product for every q both factors declare; `p` must be one of them.
pub fn lp_product(a: Arc<ChartAtlas>, b: Arc<ChartAtlas>, p: PExponent) -> Result<ChartAtlas, AtlasError> {
    let declared: Vec<PExponent> = a
        .declared_p()
        .iter()
        .copied()
        .filter(|q| b.declared_p().contains(q))
        .collect();
    if !declared.contains(&p) {
        return Err(bad("lp_product", format!("exponent {p} is not declared by both factors")));
    }
    let mut charts = Vec::new();
    let mut pairs = Vec::new();
    let mut index = HashMap::new();
    for ca in a.charts() {
        for cb in b.charts() {
            let id = ChartId(charts.len() as u32);
            let weights = match (&ca.weights, &cb.weights) {
                (None, None) => None,
                (wa, wb) => {
                    let mut w = wa.clone().unwrap_or_else(|| vec![1.0; ca.dim()]);
                    w.extend(wb.clone().unwrap_or_else(|| vec![1.0; cb.dim()]));
                    Some(w)
                }
            };
            charts.push(Chart {
                id,
                name: format!("{}*{}", ca.name, cb.name),
                kind: product_kind(ca, cb),
                bounds: ca.bounds.iter().chain(&cb.bounds).copied().collect(),
                weights,
            });
            pairs.push((ca.id, cb.id));
            index.insert((ca.id, cb.id), id);
        }
    }
    let mut gluings = Vec::new();
    for g in a.gluings() {
        for cb in b.charts() {
            let mut pb = g.param_bounds.clone();
            pb.extend(cb.bounds.iter().copied());
            gluings.push(Gluing {
                a: index[&(g.a, cb.id)],
                b: index[&(g.b, cb.id)],
                face_a: lift_face(&g.face_a, true, cb),
                face_b: lift_face(&g.face_b, true, cb),
                param_bounds: pb,
            });
        }
    }
    for g in b.gluings() {
        for ca in a.charts() {
            let mut pb = g.param_bounds.clone();
            pb.extend(ca.bounds.iter().copied());
            gluings.push(Gluing {
                a: index[&(ca.id, g.a)],
                b: index[&(ca.id, g.b)],
                face_a: lift_face(&g.face_a, false, ca),
                face_b: lift_face(&g.face_b, false, ca),
                param_bounds: pb,
            });
        }
    }
    let convex = a.convex_charts() && b.convex_charts();
    let product = ProductStructure {
        left: a.clone(),
        right: b.clone(),
        pairs,
        index,
    };
    ChartAtlas::from_parts(
        format!("{}*{}", a.name, b.name),
        charts,
        gluings,
        declared,
        convex,
        Some(product),
    )
}

/// The space F × [0, 1].
pub fn f_times_interval() -> Result<ChartAtlas, AtlasError> {
    let f = build_cube_complex(&CubeSpec::F)?.shared_atlas();
    let i = build_cube_complex(&CubeSpec::Interval)?.shared_atlas();
    let mut atlas = lp_product(f, i, PExponent::TWO)?;
    atlas.name = "FxI".into();
    Ok(atlas)
}

/// Cube-complex families available by plain name.
pub fn build_cube_family(name: &str) -> Result<ChartAtlas, AtlasError> {
    let spec = match name {
        "F" => CubeSpec::F,
        "F5" => CubeSpec::F5,
        "square" => CubeSpec::Square,
        "interval" => CubeSpec::Interval,
        "FxI" => return f_times_interval(),
        other => return Err(AtlasError::UnknownFamily(other.into())),
    };
    Ok(build_cube_complex(&spec)?.atlas().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders() {
        let f = build_cube_complex(&CubeSpec::F).unwrap();
        assert_eq!((f.maximal_cubes(), f.dim()), (2, 2));
        assert_eq!(f.atlas().gluings().len(), 1);
        // Q: 4 vertices, 4 edges, 1 square; I adds 1 vertex, 1 edge
        assert_eq!(f.cube_count(), 11);
        let f5 = build_cube_complex(&CubeSpec::F5).unwrap();
        assert_eq!(f5.maximal_cubes(), 5);
        // 5 edge gluings and 5 vertex gluings
        assert_eq!(f5.atlas().gluings().len(), 10);
        let e = f5.atlas().point("Q1", &[0.5, 0.0]).unwrap();
        assert_eq!(f5.atlas().format_point(&e), "Q0:0,0.5");
        assert_eq!(build_cube_complex(&CubeSpec::Square).unwrap().maximal_cubes(), 1);
        let s2 = 2f64.sqrt();
        let n = build_cube_complex(&CubeSpec::NChain {
            terms: vec![1.0, s2, s2],
            length: 3,
        })
        .unwrap();
        assert_eq!(n.maximal_cubes(), 3);
        assert_eq!(n.atlas().chart_by_name("C1").map(|c| n.atlas().chart(c).dim()), Ok(2));
        assert_eq!(n.atlas().gluings().len(), 2);
        let far = n.atlas().point("C1", &[1.0, 1.0]).unwrap();
        assert_eq!(n.atlas().format_point(&far), "C1:1,1");
        assert!(n.atlas().same_point(&far, &n.atlas().point("C2", &[0.0, 0.0]).unwrap()));
    }

    #[test]
    fn rejects_bad_cubes() {
        let c = |n: &str, v: &[&str]| CubeDef {
            name: n.into(),
            vertices: v.iter().map(|s| s.to_string()).collect(),
        };
        // three vertices
        assert!(build_cube_complex(&CubeSpec::Cubes(vec![c("A", &["a", "b", "c"])])).is_err());
        // two squares sharing a diagonal pair of vertices
        let r = build_cube_complex(&CubeSpec::Cubes(vec![
            c("A", &["a", "b", "c", "d"]),
            c("B", &["a", "x", "y", "d"]),
        ]));
        assert!(r.is_err());
        // an edge that is a face of a square is not maximal
        let r = build_cube_complex(&CubeSpec::Cubes(vec![c("A", &["a", "b", "c", "d"]), c("B", &["a", "b"])]));
        assert!(r.is_err());
    }

    #[test]
    fn point_types() {
        let f = build_cube_complex(&CubeSpec::F).unwrap();
        let a = f.atlas();
        let t = |c: &str, x: &[f64]| f.point_type(&a.point(c, x).unwrap());
        assert_eq!(t("Q", &[0.5, 0.5]), PointType { n: 0, m: 2 });
        assert_eq!(t("Q", &[0.0, 0.0]), PointType { n: 2, m: 0 });
        assert_eq!(t("I", &[0.0]), PointType { n: 2, m: 0 });
        assert_eq!(t("I", &[0.5]), PointType { n: 0, m: 1 });
        let sq = build_cube_complex(&CubeSpec::Square).unwrap();
        let x = sq.atlas().point("Q", &[0.5, 0.0]).unwrap();
        assert_eq!(sq.point_type(&x), PointType { n: 1, m: 1 });
    }

    #[test]
    fn product_shape() {
        let fxi = f_times_interval().unwrap();
        assert_eq!(fxi.charts().len(), 2);
        assert_eq!(fxi.gluings().len(), 1);
        assert_eq!(fxi.gluings()[0].param_dim(), 1);
        let x = fxi.point("Q*I", &[0.0, 0.0, 0.3]).unwrap();
        assert_eq!(fxi.format_point(&x), "Q*I:0,0,0.3");
        assert!(fxi.same_point(&x, &fxi.point("I*I", &[0.0, 0.3]).unwrap()));
        let prod = fxi.product().unwrap();
        let (l, r) = prod.split(&x);
        assert_eq!(prod.join(&l, &r), x);
    }
}
