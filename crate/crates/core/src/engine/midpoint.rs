//! Midpoint iteration and the reversibilized bicombing built from it.

use serde::Serialize;

use super::{Bicombing, EngineError, Method};
use crate::atlas::{ChartAtlas, SpacePoint};
use crate::lp::PExponent;

pub const MIDPOINT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct MidpointTrace {
    pub point: SpacePoint,
    /// d(x_n, y_n) for every iterate, starting with d(x, y).
    pub gaps: Vec<f64>,
}

impl MidpointTrace {
    /// Whether the gaps never increased (up to rounding).
    pub fn contracting(&self) -> bool {
        self.gaps
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0]))
    }
}

/// Iterates x ← σ(x, y, ½), y ← σ(y, x, ½) until the iterates are closer than `tol`.
pub fn midpoint(
    handle: &dyn Bicombing,
    x: &SpacePoint,
    y: &SpacePoint,
    tol: f64,
) -> Result<MidpointTrace, EngineError> {
    let mut xn = handle.atlas().canonicalize(x);
    let mut yn = handle.atlas().canonicalize(y);
    let mut gaps = Vec::new();
    for _ in 0..=MIDPOINT_MAX_ITER {
        let gap = handle.distance(&xn, &yn)?;
        gaps.push(gap);
        if gap < tol {
            return Ok(MidpointTrace { point: xn, gaps });
        }
        let nx = handle.eval(&xn, &yn, 0.5)?;
        let ny = handle.eval(&yn, &xn, 0.5)?;
        xn = nx;
        yn = ny;
    }
    Err(EngineError::NonConvergence {
        iterations: MIDPOINT_MAX_ITER,
        gap: *gaps.last().unwrap(),
    })
}

/// σ^R_xy(t) = m(σ_xy(t), σ_yx(1−t)).
pub struct Reversibilized<B> {
    inner: B,
    tol: f64,
}

pub fn reversibilize<B: Bicombing>(inner: B, tol: f64) -> Reversibilized<B> {
    Reversibilized { inner, tol }
}

impl<B: Bicombing> Reversibilized<B> {
    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Bicombing> Bicombing for Reversibilized<B> {
    fn atlas(&self) -> &ChartAtlas {
        self.inner.atlas()
    }

    fn exponent(&self) -> PExponent {
        self.inner.exponent()
    }

    fn method(&self) -> Method {
        Method::MidpointReversibilized
    }

    fn eval_many(&self, x: &SpacePoint, y: &SpacePoint, ts: &[f64]) -> Result<Vec<SpacePoint>, EngineError> {
        let fwd = self.inner.eval_many(x, y, ts)?;
        let rev_ts: Vec<f64> = ts.iter().map(|t| 1.0 - t).collect();
        let bwd = self.inner.eval_many(y, x, &rev_ts)?;
        fwd.iter()
            .zip(&bwd)
            .zip(ts)
            .map(|((a, b), &t)| {
                // endpoints are fixed exactly
                if t == 0.0 || t == 1.0 {
                    Ok(a.clone())
                } else {
                    Ok(midpoint(&self.inner, a, b, self.tol)?.point)
                }
            })
            .collect()
    }

    fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, EngineError> {
        self.inner.distance(x, y)
    }
}
