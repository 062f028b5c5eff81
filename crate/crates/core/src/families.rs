//! Built-in spaces made of planes and lines.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::atlas::{AtlasBuilder, AtlasError, ChartAtlas, ChartId, ChartKind, Face, Gluing};
use crate::cube::lp_product;
use crate::lp::{CoordVec, PExponent};

/// Builds a parameterless family by name.
pub fn build_family(name: &str) -> Result<ChartAtlas, AtlasError> {
    match name {
        "plane" => Ok(plane()),
        "line" => Ok(line()),
        "lsp1" | "lsp2" | "lsp3" | "lsp4" | "lsp5" => lsp(name[3..].parse().unwrap()),
        "gamma45" | "gamma90" => {
            // two planes glued along the diagonal, or along the x-axis
            let mut a = lsp(if name == "gamma45" { 3 } else { 2 })?;
            a.name = name.into();
            Ok(a)
        }
        other => crate::cube::build_cube_family(other),
    }
}

pub fn plane() -> ChartAtlas {
    let mut b = AtlasBuilder::new("plane");
    b.plane("P");
    b.build().expect("single plane is valid")
}

/// The real line as a single unbounded chart.
pub fn line() -> ChartAtlas {
    let mut b = AtlasBuilder::new("line");
    b.chart("L", ChartKind::Flat, vec![(f64::NEG_INFINITY, f64::INFINITY)], None);
    b.build().expect("line is valid")
}

const X_AXIS: ([f64; 2], [f64; 2]) = ([0.0, 0.0], [1.0, 0.0]);
const Y_AXIS: ([f64; 2], [f64; 2]) = ([0.0, 0.0], [0.0, 1.0]);
const DIAGONAL: ([f64; 2], [f64; 2]) = ([0.0, 0.0], [1.0, 1.0]);

/// The five model spaces: one plane, two planes glued along the x-axis or
/// the diagonal, and three planes in a chain (x-axis then y-axis, or x-axis
/// then diagonal).
pub fn lsp(k: u8) -> Result<ChartAtlas, AtlasError> {
    let mut b = AtlasBuilder::new(format!("lsp{k}"));
    let p1 = b.plane("P1");
    if k == 1 {
        return b.build();
    }
    let p2 = b.plane("P2");
    let first = if k == 3 { DIAGONAL } else { X_AXIS };
    b.glue_lines(p1, first.0, first.1, p2, first.0, first.1);
    if k == 4 || k == 5 {
        let p3 = b.plane("P3");
        let second = if k == 4 { Y_AXIS } else { DIAGONAL };
        b.glue_lines(p2, second.0, second.1, p3, second.0, second.1);
    }
    if !(1..=5).contains(&k) {
        return Err(AtlasError::UnknownFamily(format!("lsp{k}")));
    }
    b.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlaneType {
    /// Carries horizontal lines only.
    T1,
    /// Carries horizontal and transverse lines.
    T2,
    /// Carries transverse lines only.
    T3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Horizontal,
    Vertical,
    Diagonal,
}

fn line_geometry(kind: LineKind, offset: f64) -> ([f64; 2], [f64; 2]) {
    match kind {
        LineKind::Horizontal => ([0.0, offset], [1.0, 0.0]),
        LineKind::Vertical => ([offset, 0.0], [0.0, 1.0]),
        LineKind::Diagonal => ([0.0, offset], [1.0, 1.0]),
    }
}

fn line_label(kind: LineKind, offset: u8) -> String {
    let c = match kind {
        LineKind::Horizontal => 'h',
        LineKind::Vertical => 'v',
        LineKind::Diagonal => 'd',
    };
    format!("{c}{offset}")
}

/// A finite patch of the tree of planes covering three tori glued along
/// curves. Planes of type T2 carry the horizontal lines y ∈ {0, 1} and either
/// the vertical lines x ∈ {0, 1} (`angle = 90`) or the diagonals
/// y = x + k, k ∈ {0, 1} (`angle = 45`). Across a horizontal line a T2 plane
/// meets a T1 plane, across a transverse line a T3 plane. T1 and T3 planes
/// carry two parallel lines at offsets 0 and 1, each leading back to a T2
/// plane. Planes are added breadth-first up to `depth` gluing steps from the
/// root T2 plane.
///
/// Every point then has a neighbourhood modelled on one plane, two planes
/// glued along a line, or (at crossings inside a T2 plane) three planes glued
/// along a horizontal and a transverse line.
pub fn ck_patch(angle: u32, depth: usize) -> Result<ChartAtlas, AtlasError> {
    let transverse = match angle {
        90 => LineKind::Vertical,
        45 => LineKind::Diagonal,
        _ => {
            return Err(AtlasError::BadParams {
                family: "ck_patch".into(),
                reason: format!("angle must be 45 or 90, got {angle}"),
            })
        }
    };
    let mut b = AtlasBuilder::new(format!("ck_patch({angle},{depth})"));
    struct Node {
        id: ChartId,
        ty: PlaneType,
        name: String,
        depth: usize,
        /// Line through which the plane was reached (kind, offset).
        parent_line: Option<(LineKind, u8)>,
    }
    let root = b.plane("R");
    let mut queue = VecDeque::from([Node {
        id: root,
        ty: PlaneType::T2,
        name: "R".into(),
        depth: 0,
        parent_line: None,
    }]);
    while let Some(node) = queue.pop_front() {
        if node.depth >= depth {
            continue;
        }
        let lines: Vec<(LineKind, u8)> = match node.ty {
            PlaneType::T1 => vec![(LineKind::Horizontal, 0), (LineKind::Horizontal, 1)],
            PlaneType::T3 => vec![(transverse, 0), (transverse, 1)],
            PlaneType::T2 => vec![
                (LineKind::Horizontal, 0),
                (LineKind::Horizontal, 1),
                (transverse, 0),
                (transverse, 1),
            ],
        };
        for (kind, off) in lines {
            if node.parent_line == Some((kind, off)) {
                continue;
            }
            let child_ty = match (node.ty, kind) {
                (PlaneType::T2, LineKind::Horizontal) => PlaneType::T1,
                (PlaneType::T2, _) => PlaneType::T3,
                _ => PlaneType::T2,
            };
            // the child meets its parent along its own line at offset 0 of the same kind
            let name = format!("{}.{}", node.name, line_label(kind, off));
            let child = b.plane(name.clone());
            let (pb, pd) = line_geometry(kind, off as f64);
            let (cb, cd) = line_geometry(kind, 0.0);
            b.glue_lines(node.id, pb, pd, child, cb, cd);
            queue.push_back(Node {
                id: child,
                ty: child_ty,
                name,
                depth: node.depth + 1,
                parent_line: Some((kind, 0)),
            });
        }
    }
    b.build()
}

/// Values x = √k of a chain sequence, as the squared lengths k.
fn squared_terms(family: &str, terms: &[f64]) -> Result<Vec<usize>, AtlasError> {
    terms
        .iter()
        .map(|x| {
            let k = (x * x).round();
            if k >= 1.0 && (x * x - k).abs() < 1e-9 {
                Ok(k as usize)
            } else {
                Err(AtlasError::BadParams {
                    family: family.into(),
                    reason: format!("sequence entries must be square roots of positive integers, got {x}"),
                })
            }
        })
        .collect()
}

/// The chain of unit segments in which segment i is a main diagonal of a
/// k_i-cube (x_i = √k_i); consecutive segments meet at endpoints. Segment i
/// carries weight k_i, so its d_p length is k_i^{1/p}.
pub fn diagonal_chain(terms: &[f64]) -> Result<ChartAtlas, AtlasError> {
    let ks = squared_terms("diagonal_chain", terms)?;
    if ks.is_empty() {
        return Err(AtlasError::BadParams {
            family: "diagonal_chain".into(),
            reason: "empty sequence".into(),
        });
    }
    let mut b = AtlasBuilder::new("diagonal_chain");
    let ids: Vec<ChartId> = ks
        .iter()
        .enumerate()
        .map(|(i, k)| b.chart(format!("c{i}"), ChartKind::Interval, vec![(0.0, 1.0)], Some(vec![*k as f64])))
        .collect();
    for w in ids.windows(2) {
        b.glue(Gluing {
            a: w[0],
            b: w[1],
            face_a: Face { base: CoordVec::from_slice_unchecked(&[1.0]), dirs: vec![] },
            face_b: Face { base: CoordVec::from_slice_unchecked(&[0.0]), dirs: vec![] },
            param_bounds: vec![],
        });
    }
    b.build()
}

/// A segment [−h, h] of the real line.
pub fn segment(half: f64) -> ChartAtlas {
    let mut b = AtlasBuilder::new("segment");
    b.chart("S", ChartKind::Box, vec![(-half, half)], None);
    b.build().expect("segment is valid")
}

/// The half-plane complex L × [−h, h]: the diagonal chain of `terms` times a
/// vertical segment.
pub fn halfplane_complex(terms: &[f64], half_height: f64) -> Result<ChartAtlas, AtlasError> {
    let chain = Arc::new(diagonal_chain(terms)?);
    let fibre = Arc::new(segment(half_height));
    let mut atlas = lp_product(chain, fibre, PExponent::INF)?;
    atlas.name = format!("halfplane_complex({})", terms.len());
    Ok(atlas)
}

/// Block sequence alternating 1 and √2, block `i` having `ratio^i` terms.
pub fn block_sequence(ratio: usize, blocks: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut len = 1usize;
    for i in 0..blocks {
        let v = if i % 2 == 0 { 1.0 } else { 2f64.sqrt() };
        out.extend(std::iter::repeat(v).take(len));
        len *= ratio;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lsp_shapes() {
        let a = lsp(2).unwrap();
        assert_eq!((a.charts().len(), a.gluings().len()), (2, 1));
        let a = lsp(4).unwrap();
        assert_eq!((a.charts().len(), a.gluings().len()), (3, 2));
        let a = lsp(5).unwrap();
        let x = a.point("P3", &[2.0, 2.0]).unwrap();
        assert_eq!(a.format_point(&x), "P2:2,2");
        let x = a.point("P2", &[3.0, 0.0]).unwrap();
        assert_eq!(a.format_point(&x), "P1:3,0");
        // the origin of lsp5 lies on both lines
        let o = a.point("P3", &[0.0, 0.0]).unwrap();
        assert_eq!(a.representatives(&o).len(), 3);
        assert!(lsp(6).is_err());
    }

    #[test]
    fn ck_patch_sizes() {
        assert_eq!(ck_patch(90, 0).unwrap().charts().len(), 1);
        assert_eq!(ck_patch(90, 0).unwrap().gluings().len(), 0);
        assert_eq!(ck_patch(90, 1).unwrap().charts().len(), 5);
        assert_eq!(ck_patch(45, 2).unwrap().charts().len(), 9);
        assert_eq!(ck_patch(90, 3).unwrap().charts().len(), 21);
        assert!(ck_patch(60, 1).is_err());
    }

    #[test]
    fn blocks() {
        let s = block_sequence(10, 3);
        assert_eq!(s.len(), 111);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 2f64.sqrt());
        assert_eq!(s[11], 1.0);
        let h = halfplane_complex(&s[..4], 3.0).unwrap();
        assert_eq!(h.charts().len(), 4);
        assert!(diagonal_chain(&[1.5]).is_err());
    }
}
