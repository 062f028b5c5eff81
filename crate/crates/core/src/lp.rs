//! ℓ^p norms and straight-line operations inside one flat chart.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

/// Default comparison tolerance used throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("exponent must be >= 1 or inf, got {0}")]
    BadExponent(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite coordinate in {0:?}")]
    NonFinite(Vec<f64>),
    #[error("empty coordinate vector")]
    Empty,
}

/// The exponent of an ℓ^p norm. `Infinity` is its own variant so that
/// max semantics never go through a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PExponent {
    Finite(f64),
    Infinity,
}

impl PExponent {
    pub const ONE: PExponent = PExponent::Finite(1.0);
    pub const TWO: PExponent = PExponent::Finite(2.0);
    pub const INF: PExponent = PExponent::Infinity;

    pub fn new(p: f64) -> Result<Self, GeometryError> {
        if p.is_infinite() && p > 0.0 {
            Ok(PExponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(PExponent::Finite(p))
        } else {
            Err(GeometryError::BadExponent(p.to_string()))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PExponent::Infinity)
    }

    pub fn is_two(self) -> bool {
        self == PExponent::TWO
    }

    /// Exponents 1 and ∞ give polyhedral norms whose geodesics are not unique.
    pub fn is_polyhedral(self) -> bool {
        self == PExponent::ONE || self.is_infinite()
    }

    /// `p` as a float, with ∞ mapped to `f64::INFINITY` (for display and ordering only).
    pub fn as_f64(self) -> f64 {
        match self {
            PExponent::Finite(p) => p,
            PExponent::Infinity => f64::INFINITY,
        }
    }

    /// Norm of a pair of nonnegative numbers, used for ℓ^p products.
    pub fn combine(self, a: f64, b: f64) -> f64 {
        lp_norm(&[a, b], self)
    }
}

impl Eq for PExponent {}

impl std::hash::Hash for PExponent {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.as_f64().to_bits().hash(state);
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PExponent::Finite(p) => write!(f, "{p}"),
            PExponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for PExponent {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(PExponent::Infinity),
            other => other
                .parse::<f64>()
                .map_err(|_| GeometryError::BadExponent(other.to_string()))
                .and_then(PExponent::new),
        }
    }
}

impl Serialize for PExponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PExponent::Finite(p) if p.fract() == 0.0 && *p < 1e15 => s.serialize_u64(*p as u64),
            PExponent::Finite(p) => s.serialize_f64(*p),
            PExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => PExponent::new(p),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// A finite coordinate vector. Charts in this crate have at most a handful of
/// coordinates, so the storage is inline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoordVec(SmallVec<[f64; 4]>);

impl CoordVec {
    pub fn new(entries: &[f64]) -> Result<Self, GeometryError> {
        if entries.is_empty() {
            return Err(GeometryError::Empty);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(entries.to_vec()));
        }
        Ok(CoordVec(SmallVec::from_slice(entries)))
    }

    /// Builds a vector without the finiteness check. Callers guarantee finite input.
    pub(crate) fn from_slice_unchecked(entries: &[f64]) -> Self {
        CoordVec(SmallVec::from_slice(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        CoordVec(SmallVec::from_elem(0.0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn sub(&self, other: &CoordVec) -> Result<CoordVec, GeometryError> {
        check_dims(self, other)?;
        Ok(CoordVec(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &CoordVec) -> Result<CoordVec, GeometryError> {
        check_dims(self, other)?;
        Ok(CoordVec(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, k: f64) -> CoordVec {
        CoordVec(self.0.iter().map(|a| a * k).collect())
    }

    /// Concatenation, used for product charts.
    pub fn concat(&self, other: &CoordVec) -> CoordVec {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        CoordVec(out)
    }

    pub fn max_abs_diff(&self, other: &CoordVec) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &CoordVec, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

impl std::ops::Index<usize> for CoordVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<[f64; 2]> for CoordVec {
    fn from(v: [f64; 2]) -> Self {
        CoordVec(SmallVec::from_slice(&v))
    }
}

impl fmt::Display for CoordVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v}")).collect();
        write!(f, "({})", parts.join(","))
    }
}

fn check_dims(a: &CoordVec, b: &CoordVec) -> Result<(), GeometryError> {
    if a.dim() != b.dim() {
        Err(GeometryError::DimensionMismatch(a.dim(), b.dim()))
    } else {
        Ok(())
    }
}

/// (Σ|v_i|^p)^{1/p}, or max|v_i| for p = ∞.
pub fn lp_norm(v: &[f64], p: PExponent) -> f64 {
    match p {
        PExponent::Infinity => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        PExponent::Finite(q) if q == 1.0 => v.iter().map(|x| x.abs()).sum(),
        PExponent::Finite(q) if q == 2.0 => {
            // hypot-style scaling keeps tiny and huge inputs accurate
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
        }
        PExponent::Finite(q) => {
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|x| (x.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }
}

/// Weighted variant (Σ w_i|v_i|^p)^{1/p}; weights multiply coordinates' p-th powers.
/// For p = ∞ the weights only matter through being nonzero.
pub fn weighted_lp_norm(v: &[f64], weights: Option<&[f64]>, p: PExponent) -> f64 {
    let Some(w) = weights else {
        return lp_norm(v, p);
    };
    debug_assert_eq!(v.len(), w.len());
    match p {
        PExponent::Infinity => v
            .iter()
            .zip(w)
            .filter(|(_, w)| **w > 0.0)
            .fold(0.0, |m, (x, _)| m.max(x.abs())),
        PExponent::Finite(q) => {
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * v
                .iter()
                .zip(w)
                .map(|(x, w)| w * (x.abs() / m).powf(q))
                .sum::<f64>()
                .powf(1.0 / q)
        }
    }
}

/// (1−t)a + tb.
pub fn lerp(a: &CoordVec, b: &CoordVec, t: f64) -> Result<CoordVec, GeometryError> {
    check_dims(a, b)?;
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    Ok(CoordVec(
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[f64]) -> CoordVec {
        CoordVec::new(v).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(lp_norm(&[1.0, 1.0], PExponent::INF), 1.0);
        assert!((lp_norm(&[1.0, 1.0], PExponent::TWO) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&[3.0, 4.0], PExponent::ONE), 7.0);
        assert_eq!(lp_norm(&[3.0, 4.0], PExponent::TWO), 5.0);
        assert_eq!(lp_norm(&[0.0, 0.0], PExponent::Finite(3.0)), 0.0);
    }

    #[test]
    fn lerp_examples() {
        assert_eq!(lerp(&cv(&[0.0, 0.0]), &cv(&[2.0, 2.0]), 0.5).unwrap(), cv(&[1.0, 1.0]));
        let x = cv(&[0.3, -2.0]);
        assert_eq!(lerp(&x, &x, 0.7).unwrap(), x);
        assert_eq!(lerp(&cv(&[0.0, 0.0]), &cv(&[1.0, 0.0]), 0.25).unwrap(), cv(&[0.25, 0.0]));
        assert!(matches!(
            lerp(&cv(&[0.0]), &cv(&[1.0, 0.0]), 0.5),
            Err(GeometryError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<PExponent>().unwrap(), PExponent::INF);
        assert_eq!("2".parse::<PExponent>().unwrap(), PExponent::TWO);
        assert!("0.5".parse::<PExponent>().is_err());
        assert!(PExponent::new(f64::NAN).is_err());
        let js = serde_json::to_string(&vec![PExponent::ONE, PExponent::INF]).unwrap();
        assert_eq!(js, "[1,\"inf\"]");
        let back: Vec<PExponent> = serde_json::from_str(&js).unwrap();
        assert_eq!(back, vec![PExponent::ONE, PExponent::INF]);
    }

    #[test]
    fn weighted_norm_matches_duplicated_coordinates() {
        // weight 2 on a coordinate behaves like that coordinate appearing twice
        let v = [0.7, -1.3];
        for p in [PExponent::ONE, PExponent::TWO, PExponent::Finite(3.5), PExponent::INF] {
            let a = weighted_lp_norm(&v, Some(&[2.0, 1.0]), p);
            let b = lp_norm(&[0.7, 0.7, -1.3], p);
            assert!((a - b).abs() < 1e-14, "{p}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(CoordVec::new(&[f64::NAN]).is_err());
        assert!(CoordVec::new(&[]).is_err());
    }
}
