//! JSON descriptions of spaces.
//!
//! Two shapes are accepted: a named family with parameters,
//! `{"family": "ck_patch", "params": {"angle": 45, "depth": 2}}`, and an
//! explicit atlas, `{"charts": [...], "gluings": [...], "p": [1, 2, "inf"]}`.
//! Emitting a parsed document reproduces it byte for byte when the input was
//! itself produced by [`SpaceSpec::to_json`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::atlas::{default_exponents, AtlasBuilder, AtlasError, ChartAtlas, ChartKind, Face, Gluing};
use crate::cube::{build_cube_complex, lp_product, CubeDef, CubeSpec};
use crate::families::{block_sequence, build_family, ck_patch, halfplane_complex};
use crate::lp::{CoordVec, PExponent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSpec {
    Family {
        family: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
    Explicit(ExplicitSpace),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpace {
    pub charts: Vec<ChartSpec>,
    #[serde(default)]
    pub gluings: Vec<GluingSpec>,
    #[serde(default = "default_exponents")]
    pub p: Vec<PExponent>,
    /// Whether every chart is geodesically convex in the glued space.
    #[serde(default)]
    pub convex_charts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub name: String,
    pub kind: ChartKindSpec,
    /// Per-coordinate `[lower, upper]`; `null` stands for an infinite end.
    /// Omitted for planes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(Option<f64>, Option<f64>)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKindSpec {
    Plane,
    Interval,
    Box,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub base: Vec<f64>,
    pub dir: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceSpec {
    pub base: Vec<f64>,
    pub dirs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GluingSpec {
    Line {
        a: String,
        b: String,
        line_a: LineSpec,
        line_b: LineSpec,
        #[serde(default = "plus_one")]
        orientation: i8,
    },
    Face {
        a: String,
        b: String,
        face_a: FaceSpec,
        face_b: FaceSpec,
        /// Parameter box, `null` for infinite ends.
        params: Vec<(Option<f64>, Option<f64>)>,
    },
}

fn plus_one() -> i8 {
    1
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("malformed space document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

impl SpaceSpec {
    pub fn family(name: &str) -> SpaceSpec {
        SpaceSpec::Family {
            family: name.into(),
            params: Map::new(),
        }
    }

    pub fn with_params(name: &str, params: Value) -> SpaceSpec {
        SpaceSpec::Family {
            family: name.into(),
            params: params.as_object().cloned().unwrap_or_default(),
        }
    }

    pub fn parse(text: &str) -> Result<SpaceSpec, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical text: two-space indentation, sorted parameter keys, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("specs serialize");
        s.push('\n');
        s
    }

    /// Parses a command-line shorthand: a family name (`lsp4`, `F5`), a call
    /// such as `ck_patch(45,2)`, or inline JSON.
    pub fn from_arg(arg: &str) -> Result<SpaceSpec, SpecError> {
        let arg = arg.trim();
        if arg.starts_with('{') {
            return SpaceSpec::parse(arg);
        }
        if let Some(rest) = arg.strip_prefix("ck_patch(") {
            let inner = rest.strip_suffix(')').ok_or_else(|| bad_arg(arg))?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            let [angle, depth] = parts[..] else {
                return Err(bad_arg(arg));
            };
            let angle: u64 = angle.parse().map_err(|_| bad_arg(arg))?;
            let depth: u64 = depth.parse().map_err(|_| bad_arg(arg))?;
            return Ok(SpaceSpec::with_params(
                "ck_patch",
                serde_json::json!({"angle": angle, "depth": depth}),
            ));
        }
        Ok(SpaceSpec::family(arg))
    }
}

fn bad_arg(arg: &str) -> SpecError {
    SpecError::Atlas(AtlasError::BadParams {
        family: arg.into(),
        reason: "expected NAME, ck_patch(ANGLE,DEPTH) or a JSON document".into(),
    })
}

fn param_err(family: &str, reason: impl Into<String>) -> AtlasError {
    AtlasError::BadParams {
        family: family.into(),
        reason: reason.into(),
    }
}

fn get_u64(family: &str, params: &Map<String, Value>, key: &str, default: Option<u64>) -> Result<u64, AtlasError> {
    match params.get(key) {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| param_err(family, format!("{key} must be a nonnegative integer"))),
        None => default.ok_or_else(|| param_err(family, format!("missing parameter {key}"))),
    }
}

fn get_f64(family: &str, params: &Map<String, Value>, key: &str, default: f64) -> Result<f64, AtlasError> {
    match params.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| param_err(family, format!("{key} must be a number"))),
        None => Ok(default),
    }
}

fn get_terms(family: &str, params: &Map<String, Value>) -> Result<Vec<f64>, AtlasError> {
    if let Some(v) = params.get("terms") {
        return serde_json::from_value(v.clone()).map_err(|e| param_err(family, format!("terms: {e}")));
    }
    let blocks = get_u64(family, params, "blocks", Some(5))? as usize;
    let ratio = get_u64(family, params, "ratio", Some(10))? as usize;
    if blocks == 0 || ratio == 0 || (ratio as f64).powi(blocks as i32) > 1e6 {
        return Err(param_err(family, "need 1 ≤ ratio^blocks ≤ 10^6 and blocks ≥ 1"));
    }
    Ok(block_sequence(ratio, blocks))
}

fn check_keys(family: &str, params: &Map<String, Value>, allowed: &[&str]) -> Result<(), AtlasError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(param_err(family, format!("unknown parameter {k}"))),
        None => Ok(()),
    }
}

/// Builds and validates the atlas described by `spec`.
pub fn build_space(spec: &SpaceSpec) -> Result<ChartAtlas, AtlasError> {
    match spec {
        SpaceSpec::Explicit(e) => build_explicit(e),
        SpaceSpec::Family { family, params } => {
            let f = family.as_str();
            match f {
                "ck_patch" => {
                    check_keys(f, params, &["angle", "depth"])?;
                    let angle = get_u64(f, params, "angle", None)?;
                    let depth = get_u64(f, params, "depth", Some(0))?;
                    ck_patch(angle as u32, depth as usize)
                }
                "halfplane_complex" => {
                    check_keys(f, params, &["terms", "blocks", "ratio", "half_height", "length"])?;
                    let mut terms = get_terms(f, params)?;
                    if let Some(n) = params.get("length") {
                        let n = n.as_u64().ok_or_else(|| param_err(f, "length must be an integer"))? as usize;
                        terms.truncate(n);
                    }
                    halfplane_complex(&terms, get_f64(f, params, "half_height", 4.0)?)
                }
                "n_chain" => {
                    check_keys(f, params, &["terms", "blocks", "ratio", "length"])?;
                    let terms = get_terms(f, params)?;
                    let length = get_u64(f, params, "length", Some(terms.len() as u64))? as usize;
                    Ok(build_cube_complex(&CubeSpec::NChain { terms, length })?.atlas().clone())
                }
                "cubes" => {
                    check_keys(f, params, &["cubes", "cat0"])?;
                    let cubes: Vec<CubeDef> = serde_json::from_value(
                        params.get("cubes").cloned().ok_or_else(|| param_err(f, "missing parameter cubes"))?,
                    )
                    .map_err(|e| param_err(f, format!("cubes: {e}")))?;
                    Ok(build_cube_complex(&CubeSpec::Cubes(cubes))?.atlas().clone())
                }
                "product" => {
                    check_keys(f, params, &["left", "right", "p"])?;
                    let side = |k: &str| -> Result<Arc<ChartAtlas>, AtlasError> {
                        let v = params.get(k).cloned().ok_or_else(|| param_err(f, format!("missing {k}")))?;
                        let s: SpaceSpec = serde_json::from_value(v).map_err(|e| param_err(f, format!("{k}: {e}")))?;
                        Ok(Arc::new(build_space(&s)?))
                    };
                    let p: PExponent = match params.get("p") {
                        Some(v) => serde_json::from_value(v.clone()).map_err(|e| param_err(f, format!("p: {e}")))?,
                        None => PExponent::TWO,
                    };
                    lp_product(side("left")?, side("right")?, p)
                }
                _ => {
                    check_keys(f, params, &[])?;
                    build_family(f)
                }
            }
        }
    }
}

fn bounds_of(v: &[(Option<f64>, Option<f64>)]) -> Vec<(f64, f64)> {
    v.iter()
        .map(|(l, u)| (l.unwrap_or(f64::NEG_INFINITY), u.unwrap_or(f64::INFINITY)))
        .collect()
}

fn coords(v: &[f64]) -> Result<CoordVec, AtlasError> {
    Ok(CoordVec::new(v)?)
}

fn build_explicit(e: &ExplicitSpace) -> Result<ChartAtlas, AtlasError> {
    let mut b = AtlasBuilder::new("explicit")
        .exponents(e.p.clone())
        .convex_charts(e.convex_charts);
    for c in &e.charts {
        let (kind, default_bounds) = match c.kind {
            ChartKindSpec::Plane => (ChartKind::Plane, Some(vec![(None, None); 2])),
            ChartKindSpec::Interval => (ChartKind::Interval, Some(vec![(Some(0.0), Some(1.0))])),
            ChartKindSpec::Box => (ChartKind::Box, None),
            ChartKindSpec::Flat => (ChartKind::Flat, None),
        };
        let bounds = c
            .bounds
            .clone()
            .or(default_bounds)
            .ok_or_else(|| AtlasError::InvalidChart(c.name.clone(), "bounds required".into()))?;
        b.chart(c.name.clone(), kind, bounds_of(&bounds), c.weights.clone());
    }
    let probe = b.clone().build()?;
    for g in &e.gluings {
        let gl = match g {
            GluingSpec::Line {
                a,
                b: bn,
                line_a,
                line_b,
                orientation,
            } => Gluing::line(
                probe.chart_by_name(a)?,
                coords(&line_a.base)?,
                coords(&line_a.dir)?,
                probe.chart_by_name(bn)?,
                coords(&line_b.base)?,
                coords(&line_b.dir)?,
                *orientation,
            ),
            GluingSpec::Face {
                a,
                b: bn,
                face_a,
                face_b,
                params,
            } => {
                let face = |f: &FaceSpec| -> Result<Face, AtlasError> {
                    Ok(Face {
                        base: coords(&f.base)?,
                        dirs: f.dirs.iter().map(|d| coords(d)).collect::<Result<_, _>>()?,
                    })
                };
                Gluing {
                    a: probe.chart_by_name(a)?,
                    b: probe.chart_by_name(bn)?,
                    face_a: face(face_a)?,
                    face_b: face(face_b)?,
                    param_bounds: bounds_of(params),
                }
            }
        };
        b.glue(gl);
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_round_trip() {
        let s = SpaceSpec::from_arg("ck_patch(45, 2)").unwrap();
        let text = s.to_json();
        assert_eq!(SpaceSpec::parse(&text).unwrap().to_json(), text);
        assert_eq!(build_space(&s).unwrap().charts().len(), 9);
        let plain = SpaceSpec::parse(r#"{"family":"lsp4"}"#).unwrap();
        assert_eq!(build_space(&plain).unwrap().gluings().len(), 2);
    }

    #[test]
    fn explicit_round_trip() {
        let text = r#"{
  "charts": [
    {
      "name": "A",
      "kind": "plane"
    },
    {
      "name": "B",
      "kind": "plane"
    }
  ],
  "gluings": [
    {
      "a": "A",
      "b": "B",
      "line_a": {
        "base": [
          0.0,
          0.0
        ],
        "dir": [
          1.0,
          0.0
        ]
      },
      "line_b": {
        "base": [
          0.0,
          0.0
        ],
        "dir": [
          1.0,
          0.0
        ]
      },
      "orientation": -1
    }
  ],
  "p": [
    1,
    2,
    "inf"
  ],
  "convex_charts": false
}
"#;
        let s = SpaceSpec::parse(text).unwrap();
        assert_eq!(s.to_json(), text);
        let a = build_space(&s).unwrap();
        let x = a.point("B", &[-2.0, 0.0]).unwrap();
        assert_eq!(a.format_point(&x), "A:2,0");
    }

    #[test]
    fn rejects_non_isometric_gluing() {
        let text = r#"{"charts":[{"name":"A","kind":"plane"},{"name":"B","kind":"plane"}],
            "gluings":[{"a":"A","b":"B","line_a":{"base":[0,0],"dir":[1,0]},"line_b":{"base":[0,0],"dir":[1,1]}}]}"#;
        let err = build_space(&SpaceSpec::parse(text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("#0 (A ~ B)"), "{err}");
        // the diagonal is fine when only p = ∞ is declared
        let text = r#"{"charts":[{"name":"A","kind":"plane"},{"name":"B","kind":"plane"}], "p": ["inf"],
            "gluings":[{"a":"A","b":"B","line_a":{"base":[0,0],"dir":[1,0]},"line_b":{"base":[0,0],"dir":[1,1]}}]}"#;
        let s = SpaceSpec::parse(text).unwrap();
        assert!(build_space(&s).is_ok());
    }

    #[test]
    fn params_are_checked() {
        assert!(build_space(&SpaceSpec::from_arg("nope").unwrap()).is_err());
        let s = SpaceSpec::with_params("ck_patch", serde_json::json!({"angle": 90, "width": 3}));
        assert!(build_space(&s).is_err());
        let s = SpaceSpec::with_params("halfplane_complex", serde_json::json!({"blocks": 2, "ratio": 3}));
        assert_eq!(build_space(&s).unwrap().charts().len(), 4);
    }
}
