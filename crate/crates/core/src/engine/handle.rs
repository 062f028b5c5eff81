use std::sync::Arc;

use serde::Serialize;

use super::{canonical_trajectory, certify, direct_geodesic, distance, EngineError, EngineOptions, PolyPath};
use crate::atlas::{ChartAtlas, SpacePoint};
use crate::lp::PExponent;

/// How a bicombing computes its geodesics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cat0Trajectory,
    DirectLp,
    MidpointReversibilized,
    /// Hand-built handles such as test fixtures and negative controls.
    Custom(String),
}

/// An evaluator `(x, y, t) ↦ σ_xy(t)` on a fixed space and exponent.
pub trait Bicombing: Send + Sync {
    fn atlas(&self) -> &ChartAtlas;
    fn exponent(&self) -> PExponent;
    fn method(&self) -> Method;

    /// σ_xy at each parameter of `ts`.
    fn eval_many(&self, x: &SpacePoint, y: &SpacePoint, ts: &[f64]) -> Result<Vec<SpacePoint>, EngineError>;

    fn eval(&self, x: &SpacePoint, y: &SpacePoint, t: f64) -> Result<SpacePoint, EngineError> {
        Ok(self.eval_many(x, y, &[t])?.pop().expect("one parameter"))
    }

    /// The metric d_p of the underlying space.
    fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, EngineError>;

    /// The whole geodesic from `x` to `y` as a path, for handles that have one.
    fn trajectory(&self, _x: &SpacePoint, _y: &SpacePoint) -> Result<Option<PolyPath>, EngineError> {
        Ok(None)
    }
}

/// Bicombing backed by the geodesic engine.
#[derive(Debug, Clone)]
pub struct EngineBicombing {
    atlas: Arc<ChartAtlas>,
    p: PExponent,
    direct: bool,
    certify: bool,
    opts: EngineOptions,
}

impl EngineBicombing {
    /// Canonical trajectories at constant d_p speed.
    pub fn new(atlas: Arc<ChartAtlas>, p: PExponent) -> Self {
        EngineBicombing {
            atlas,
            p,
            direct: false,
            certify: false,
            opts: EngineOptions::default(),
        }
    }

    /// Geodesics from the direct ℓ^p optimization.
    pub fn direct(atlas: Arc<ChartAtlas>, p: PExponent) -> Self {
        EngineBicombing {
            direct: true,
            ..Self::new(atlas, p)
        }
    }

    /// Runs the length certificate on every geodesic (slower).
    pub fn certified(mut self) -> Self {
        self.certify = true;
        self
    }

    pub fn with_options(mut self, opts: EngineOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn options(&self) -> &EngineOptions {
        &self.opts
    }

    pub fn shared_atlas(&self) -> Arc<ChartAtlas> {
        self.atlas.clone()
    }

    pub fn path(&self, x: &SpacePoint, y: &SpacePoint) -> Result<PolyPath, EngineError> {
        let path = if self.direct {
            direct_geodesic(&self.atlas, x, y, self.p, &self.opts)?
        } else {
            canonical_trajectory(&self.atlas, x, y, self.p, &self.opts)?
        };
        if self.certify {
            certify(&self.atlas, &path, self.p, &self.opts)?;
        }
        Ok(path)
    }
}

impl Bicombing for EngineBicombing {
    fn atlas(&self) -> &ChartAtlas {
        &self.atlas
    }

    fn exponent(&self) -> PExponent {
        self.p
    }

    fn method(&self) -> Method {
        if self.direct {
            Method::DirectLp
        } else {
            Method::Cat0Trajectory
        }
    }

    fn eval_many(&self, x: &SpacePoint, y: &SpacePoint, ts: &[f64]) -> Result<Vec<SpacePoint>, EngineError> {
        if let Some(&t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(EngineError::BadParameter { t });
        }
        let x = self.atlas.canonicalize(x);
        let y = self.atlas.canonicalize(y);
        let needs_path = ts.iter().any(|&t| t > 0.0 && t < 1.0);
        let path = if needs_path { Some(self.path(&x, &y)?) } else { None };
        Ok(ts
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    x.clone()
                } else if t == 1.0 {
                    y.clone()
                } else {
                    path.as_ref().unwrap().point_at(&self.atlas, t, self.p)
                }
            })
            .collect())
    }

    fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, EngineError> {
        distance(&self.atlas, x, y, self.p, &self.opts)
    }

    fn trajectory(&self, x: &SpacePoint, y: &SpacePoint) -> Result<Option<PolyPath>, EngineError> {
        let x = self.atlas.canonicalize(x);
        let y = self.atlas.canonicalize(y);
        if self.atlas.same_point(&x, &y) {
            return Ok(Some(PolyPath::constant(x)));
        }
        self.path(&x, &y).map(Some)
    }
}

/// Shorthand for the point at parameter `t` of a handle's geodesic.
pub fn sigma_eval(handle: &dyn Bicombing, x: &SpacePoint, y: &SpacePoint, t: f64) -> Result<SpacePoint, EngineError> {
    handle.eval(x, y, t)
}
