//! Convex crossing-point problems.
//!
//! For a fixed chart sequence the unknowns are the parameters θ of the
//! crossing points on each gluing face. Every segment of the path is an
//! affine function of θ, and the path length is a sum of (weighted) ℓ^p norms
//! of those affine functions.
//!
//! One-parameter problems are solved exactly by bisection on one-sided
//! derivatives. Larger problems go to the clarabel interior-point solver as
//! second-order, linear or power-cone programs.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use smallvec::SmallVec;
use thiserror::Error;

use crate::lp::{weighted_lp_norm, PExponent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("conic solver finished with status {0}")]
    Status(String),
    #[error("conic solver setup failed: {0}")]
    Setup(String),
}

type Vec4 = SmallVec<[f64; 4]>;

/// One segment v(θ) = offset + rows·θ.
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    /// Row-major `dim × n` matrix.
    pub rows: Vec<f64>,
    pub offset: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Segment {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn value(&self, theta: &[f64]) -> Vec4 {
        let n = theta.len();
        (0..self.dim())
            .map(|j| {
                self.offset[j]
                    + self.rows[j * n..(j + 1) * n]
                        .iter()
                        .zip(theta)
                        .map(|(a, t)| a * t)
                        .sum::<f64>()
            })
            .collect()
    }

    fn column(&self, n: usize, k: usize) -> Vec4 {
        (0..self.dim()).map(|j| self.rows[j * n + k]).collect()
    }

    fn weight(&self, j: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[j])
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CrossingProblem {
    pub n: usize,
    pub bounds: Vec<(f64, f64)>,
    pub segs: Vec<Segment>,
}

impl CrossingProblem {
    pub fn segment_lengths(&self, theta: &[f64], p: PExponent) -> Vec<f64> {
        self.segs
            .iter()
            .map(|s| weighted_lp_norm(&s.value(theta), s.weights.as_deref(), p))
            .collect()
    }

    pub fn objective(&self, theta: &[f64], p: PExponent) -> f64 {
        self.segment_lengths(theta, p).iter().sum()
    }

    /// One-sided directional derivative of the objective along `sign·e_k`.
    fn dir_deriv(&self, theta: &[f64], k: usize, sign: f64, p: PExponent) -> f64 {
        self.segs
            .iter()
            .map(|s| {
                let v = s.value(theta);
                let w: Vec4 = s.column(self.n, k).iter().map(|c| c * sign).collect();
                norm_dir_deriv(&v, &w, s.weights.as_deref(), p)
            })
            .sum()
    }

    pub fn minimize(&self, p: PExponent) -> Result<Vec<f64>, SolverError> {
        match self.n {
            0 => Ok(vec![]),
            1 => Ok(vec![self.argmin_1d(&[0.0], 0, p, self.bounds[0]).0]),
            _ => {
                let mut theta = conic_minimize(self, p, None)?;
                if p.is_two() {
                    if !self.newton_l2(&mut theta) {
                        self.polish(&mut theta, p);
                    }
                } else if !p.is_polyhedral() {
                    self.polish(&mut theta, p);
                }
                Ok(theta)
            }
        }
    }

    /// Least ℓ² objective among the minimizers of the ℓ^p objective. Only
    /// meaningful for polyhedral p, where minimizers need not be unique.
    pub fn minimize_lex(&self, p: PExponent) -> Result<Vec<f64>, SolverError> {
        if !p.is_polyhedral() {
            return self.minimize(p);
        }
        match self.n {
            0 => Ok(vec![]),
            1 => {
                let (lo, hi) = self.argmin_1d(&[0.0], 0, p, self.bounds[0]);
                Ok(vec![self.argmin_1d(&[0.0], 0, PExponent::TWO, (lo, hi)).0])
            }
            _ => {
                let theta = conic_minimize(self, p, None)?;
                let v = self.objective(&theta, p);
                conic_minimize(self, PExponent::TWO, Some((p, v + 1e-10 * (1.0 + v))))
            }
        }
    }

    /// Cyclic exact line searches; refines interior-point output in smooth directions.
    /// Damped Newton iteration on the gradient of the ℓ² objective, restricted
    /// to coordinates not held by an active bound. Returns false when some
    /// segment has (nearly) zero length, where the objective has a kink.
    fn newton_l2(&self, theta: &mut [f64]) -> bool {
        let n = self.n;
        let two = PExponent::TWO;
        let scale = 1.0 + theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        // A degenerate segment whose crossings all sit on bounds: freeze those
        // crossings and drop the (then constant) segment.
        let start = theta.to_vec();
        for (t, &(lo, hi)) in theta.iter_mut().zip(&self.bounds) {
            if (*t - lo).abs() <= 1e-9 * scale {
                *t = lo;
            } else if (*t - hi).abs() <= 1e-9 * scale {
                *t = hi;
            }
        }
        let mut frozen = vec![false; n];
        let mut dropped = vec![false; self.segs.len()];
        let mut pinned: Vec<(usize, Vec<usize>, Vec<f64>)> = Vec::new();
        for (i, s) in self.segs.iter().enumerate() {
            let v = s.value(theta);
            let len = (0..v.len()).map(|j| s.weight(j) * v[j] * v[j]).sum::<f64>().sqrt();
            if len >= 1e-8 * scale {
                continue;
            }
            let d = v.len();
            let vars: Vec<usize> = (0..n).filter(|&k| (0..d).any(|j| s.rows[j * n + k] != 0.0)).collect();
            if !vars.iter().all(|&k| theta[k] == self.bounds[k].0 || theta[k] == self.bounds[k].1) {
                // two crossing lines meeting in a point: pin the crossings there
                let m = vars.len();
                let a: Vec<f64> = (0..d).flat_map(|j| vars.iter().map(move |&k| (j, k))).map(|(j, k)| s.rows[j * n + k]).collect();
                let shift = if m == d { square_solve(&a, &v, m) } else { None };
                let Some(shift) = shift else {
                    theta.copy_from_slice(&start);
                    return false;
                };
                for (i, &k) in vars.iter().enumerate() {
                    theta[k] -= shift[i];
                }
                if vars.iter().any(|&k| theta[k] < self.bounds[k].0 || theta[k] > self.bounds[k].1) {
                    theta.copy_from_slice(&start);
                    return false;
                }
                pinned.push((i, vars.clone(), a));
            }
            for k in vars {
                frozen[k] = true;
            }
            dropped[i] = true;
        }
        let grad_hess = |th: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            for (i, s) in self.segs.iter().enumerate() {
                if dropped[i] {
                    continue;
                }
                let v = s.value(th);
                let d = v.len();
                let wv: Vec4 = (0..d).map(|j| s.weight(j) * v[j]).collect();
                let len = v.iter().zip(&wv).map(|(a, b)| a * b).sum::<f64>().sqrt();
                if len < 1e-12 * scale {
                    return None;
                }
                // A^T W v / |v|
                let mut at_wv = vec![0.0; n];
                for k in 0..n {
                    for j in 0..d {
                        at_wv[k] += s.rows[j * n + k] * wv[j];
                    }
                    g[k] += at_wv[k] / len;
                }
                // A^T W A / |v| − (A^T W v)(A^T W v)^T / |v|^3
                for a in 0..n {
                    for b in 0..n {
                        let mut awa = 0.0;
                        for j in 0..d {
                            awa += s.rows[j * n + a] * s.weight(j) * s.rows[j * n + b];
                        }
                        h[a * n + b] += awa / len - at_wv[a] * at_wv[b] / (len * len * len);
                    }
                }
            }
            Some((g, h))
        };
        let free_norm = |th: &[f64], g: &[f64]| -> f64 {
            (0..n)
                .filter(|&k| !frozen[k] && !self.held(th, g, k))
                .map(|k| g[k] * g[k])
                .sum::<f64>()
                .sqrt()
        };
        let Some((mut g, mut h)) = grad_hess(theta) else {
            theta.copy_from_slice(&start);
            return false;
        };
        let mut f = self.objective(theta, two);
        let mut gn = free_norm(theta, &g);
        let mut lambda = 0.0;
        for _ in 0..60 {
            if gn <= 1e-15 * (1.0 + f) {
                break;
            }
            let free: Vec<usize> = (0..n).filter(|&k| !frozen[k] && !self.held(theta, &g, k)).collect();
            let m = free.len();
            if m == 0 {
                break;
            }
            let mut a = vec![0.0; m * m];
            let mut rhs = vec![0.0; m];
            for (i, &ki) in free.iter().enumerate() {
                for (j, &kj) in free.iter().enumerate() {
                    a[i * m + j] = h[ki * n + kj];
                }
                a[i * m + i] += lambda;
                rhs[i] = -g[ki];
            }
            let step = crate::atlas::solve_small(&mut a, &mut rhs, m);
            let mut cand = theta.to_vec();
            for (i, &k) in free.iter().enumerate() {
                cand[k] = (cand[k] + step[i]).clamp(self.bounds[k].0, self.bounds[k].1);
            }
            let moved = cand.iter().zip(theta.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if !moved.is_finite() {
                lambda = if lambda == 0.0 { 1e-12 } else { lambda * 100.0 };
                continue;
            }
            let Some((g2, h2)) = grad_hess(&cand) else {
                return false;
            };
            let f2 = self.objective(&cand, two);
            let gn2 = free_norm(&cand, &g2);
            if f2 <= f + 4.0 * f64::EPSILON * (1.0 + f) && (gn2 < gn || f2 < f) {
                theta.copy_from_slice(&cand);
                (g, h, f, gn) = (g2, h2, f2, gn2);
                lambda *= 0.1;
                if moved <= 1e-16 * scale {
                    break;
                }
            } else {
                lambda = if lambda == 0.0 { 1e-9 * (1.0 + h.iter().fold(0.0f64, |m, v| m.max(v.abs()))) } else { lambda * 10.0 };
                if lambda > 1e12 {
                    break;
                }
            }
        }
        // a pinned crossing is optimal when the pull of the other segments is
        // absorbed by the subdifferential of the degenerate one
        for (i, vars, a) in &pinned {
            let m = vars.len();
            let mut at = vec![0.0; m * m];
            for r in 0..m {
                for c in 0..m {
                    at[r * m + c] = a[c * m + r];
                }
            }
            let rhs: Vec<f64> = vars.iter().map(|&k| -g[k]).collect();
            let Some(y) = square_solve(&at, &rhs, m) else {
                return false;
            };
            let seg = &self.segs[*i];
            let z = (0..m).map(|j| y[j] * y[j] / seg.weight(j)).sum::<f64>().sqrt();
            if z > 1.0 + 1e-9 {
                return false;
            }
        }
        // frozen crossings must not want to leave their bound
        (0..n).filter(|&k| frozen[k] && !pinned.iter().any(|(_, v, _)| v.contains(&k))).all(|k| {
            let into = if theta[k] == self.bounds[k].0 { 1.0 } else { -1.0 };
            self.bounds[k].0 == self.bounds[k].1 || self.dir_deriv(theta, k, into, two) >= -1e-13 * (1.0 + f)
        })
    }

    /// Whether coordinate `k` sits on a bound that the gradient pushes against.
    fn held(&self, theta: &[f64], g: &[f64], k: usize) -> bool {
        let (lo, hi) = self.bounds[k];
        (theta[k] <= lo && g[k] > 0.0) || (theta[k] >= hi && g[k] < 0.0)
    }

    fn polish(&self, theta: &mut [f64], p: PExponent) {
        let mut best = self.objective(theta, p);
        for _ in 0..4 {
            let before = best;
            for k in 0..self.n {
                let old = theta[k];
                let (t, _) = self.argmin_1d(theta, k, p, self.bounds[k]);
                theta[k] = t;
                let val = self.objective(theta, p);
                if val > best {
                    theta[k] = old;
                } else {
                    best = val;
                }
            }
            if before - best <= 1e-15 * (1.0 + best) {
                break;
            }
        }
    }

    /// Minimizer interval of the objective restricted to coordinate `k`
    /// (other coordinates fixed at `theta`), clamped to `range`.
    fn argmin_1d(&self, theta: &[f64], k: usize, p: PExponent, range: (f64, f64)) -> (f64, f64) {
        let mut th: Vec<f64> = theta.to_vec();
        let mut at = |t: f64, sign: f64| {
            th[k] = t;
            self.dir_deriv(&th, k, sign, p)
        };
        // left end: first point where the right derivative is >= 0
        let lo = bisect_predicate(range, theta[k].clamp(range.0, range.1), |t| at(t, 1.0) >= 0.0);
        // right end: first point where the left derivative is > 0
        let hi = bisect_predicate(range, lo, |t| -at(t, -1.0) > 0.0);
        (lo, hi.max(lo))
    }
}

/// Solves the `m × m` system `a x = b`, or `None` when it is (nearly) singular.
fn square_solve(a: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let (mut aa, mut bb) = (a.to_vec(), b.to_vec());
    let x = crate::atlas::solve_small(&mut aa, &mut bb, m);
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let ok = x.iter().all(|v| v.is_finite())
        && (0..m).all(|r| ((0..m).map(|c| a[r * m + c] * x[c]).sum::<f64>() - b[r]).abs() <= 1e-12 * scale);
    ok.then_some(x)
}

/// Smallest point of `range` where the monotone predicate becomes true
/// (the upper bound of `range` if it never does).
fn bisect_predicate(range: (f64, f64), start: f64, mut pred: impl FnMut(f64) -> bool) -> f64 {
    let (lo_b, hi_b) = range;
    const FAR: f64 = 1e12;
    let start = if start.is_finite() { start } else { 0.0 };
    // bracket [a, b] with pred(a) false, pred(b) true
    let (mut a, mut b);
    if pred(start) {
        b = start;
        let mut step = 1.0;
        loop {
            let cand = (start - step).max(lo_b);
            if !pred(cand) {
                a = cand;
                break;
            }
            if cand <= lo_b || step > FAR {
                return cand;
            }
            b = cand;
            step *= 2.0;
        }
    } else {
        a = start;
        let mut step = 1.0;
        loop {
            let cand = (start + step).min(hi_b);
            if pred(cand) {
                b = cand;
                break;
            }
            if cand >= hi_b || step > FAR {
                return cand;
            }
            a = cand;
            step *= 2.0;
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if pred(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

/// One-sided directional derivative of the weighted ℓ^p norm at `v` along `w`.
pub(crate) fn norm_dir_deriv(v: &[f64], w: &[f64], weights: Option<&[f64]>, p: PExponent) -> f64 {
    let n = weighted_lp_norm(v, weights, p);
    if n == 0.0 {
        return weighted_lp_norm(w, weights, p);
    }
    let wt = |j: usize| weights.map_or(1.0, |m| m[j]);
    match p {
        PExponent::Infinity => {
            let thresh = n * (1.0 - 4.0 * f64::EPSILON);
            v.iter()
                .zip(w)
                .enumerate()
                .filter(|(j, (x, _))| x.abs() >= thresh && wt(*j) > 0.0)
                .map(|(_, (x, d))| x.signum() * d)
                .fold(f64::NEG_INFINITY, f64::max)
        }
        PExponent::Finite(q) if q == 1.0 => v
            .iter()
            .zip(w)
            .enumerate()
            .map(|(j, (x, d))| {
                if *x == 0.0 {
                    wt(j) * d.abs()
                } else {
                    wt(j) * x.signum() * d
                }
            })
            .sum(),
        PExponent::Finite(q) => {
            let s: f64 = v
                .iter()
                .zip(w)
                .enumerate()
                .map(|(j, (x, d))| wt(j) * (x.abs() / n).powf(q - 1.0) * x.signum() * d)
                .sum();
            s
        }
    }
}

/// Affine expression `constant + Σ coeff·x_var`, used as one cone coordinate.
#[derive(Debug, Clone, Default)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    fn var(i: usize) -> Self {
        Affine {
            constant: 0.0,
            terms: vec![(i, 1.0)],
        }
    }
    fn scaled(mut self, k: f64) -> Self {
        self.constant *= k;
        for t in &mut self.terms {
            t.1 *= k;
        }
        self
    }
    fn plus(mut self, other: &Affine, k: f64) -> Self {
        self.constant += k * other.constant;
        self.terms.extend(other.terms.iter().map(|(i, c)| (*i, c * k)));
        self
    }
}

#[derive(Default)]
struct ConeProgram {
    nvars: usize,
    cost: Vec<f64>,
    zero: Vec<Affine>,
    nonneg: Vec<Affine>,
    soc: Vec<Vec<Affine>>,
    power: Vec<(f64, [Affine; 3])>,
}

impl ConeProgram {
    fn new_var(&mut self, cost: f64) -> usize {
        self.nvars += 1;
        self.cost.push(cost);
        self.nvars - 1
    }

    fn solve(self) -> Result<Vec<f64>, SolverError> {
        let mut rows: Vec<&Affine> = Vec::new();
        let mut cones = Vec::new();
        if !self.zero.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.zero.len()));
            rows.extend(self.zero.iter());
        }
        if !self.nonneg.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.nonneg.len()));
            rows.extend(self.nonneg.iter());
        }
        for s in &self.soc {
            cones.push(SupportedConeT::SecondOrderConeT(s.len()));
            rows.extend(s.iter());
        }
        for (alpha, triple) in &self.power {
            cones.push(SupportedConeT::PowerConeT(*alpha));
            rows.extend(triple.iter());
        }
        // cone slack = b − A x = constant + Σ terms  ⇒  A = −terms, b = constant
        let m = rows.len();
        let n = self.nvars;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut b = Vec::with_capacity(m);
        for (r, a) in rows.iter().enumerate() {
            b.push(a.constant);
            for &(i, c) in &a.terms {
                if c != 0.0 {
                    cols[i].push((r, -c));
                }
            }
        }
        let mut colptr = vec![0usize];
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            // merge duplicates
            let mut last: Option<usize> = None;
            for &(r, c) in col.iter() {
                if last == Some(r) {
                    *nzval.last_mut().unwrap() += c;
                } else {
                    rowval.push(r);
                    nzval.push(c);
                    last = Some(r);
                }
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let pmat = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(300)
            .tol_gap_abs(1e-12)
            .tol_gap_rel(1e-12)
            .tol_feas(1e-12)
            .tol_ktratio(1e-9)
            .build()
            .map_err(|e| SolverError::Setup(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&pmat, &self.cost, &a, &b, &cones, settings)
            .map_err(|e| SolverError::Setup(format!("{e:?}")))?;
        solver.solve();
        match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(solver.solution.x.clone()),
            other => Err(SolverError::Status(format!("{other:?}"))),
        }
    }
}

/// Minimizes the ℓ^p objective; with `cap = Some((q, v))` the ℓ^q objective
/// is additionally constrained to be at most `v` (q polyhedral).
fn conic_minimize(
    prob: &CrossingProblem,
    p: PExponent,
    cap: Option<(PExponent, f64)>,
) -> Result<Vec<f64>, SolverError> {
    let mut cp = ConeProgram::default();
    let theta: Vec<usize> = (0..prob.n).map(|_| cp.new_var(0.0)).collect();
    for (k, &(l, u)) in prob.bounds.iter().enumerate() {
        if l.is_finite() {
            cp.nonneg.push(Affine::var(theta[k]).plus(&Affine { constant: -l, terms: vec![] }, 1.0));
        }
        if u.is_finite() {
            cp.nonneg.push(Affine {
                constant: u,
                terms: vec![(theta[k], -1.0)],
            });
        }
    }
    let comps: Vec<Vec<Affine>> = prob
        .segs
        .iter()
        .map(|s| {
            (0..s.dim())
                .map(|j| Affine {
                    constant: s.offset[j],
                    terms: (0..prob.n).map(|k| (theta[k], s.rows[j * prob.n + k])).collect(),
                })
                .collect()
        })
        .collect();
    let objective_vars = add_norm_epigraphs(&mut cp, prob, &comps, p, 1.0);
    let _ = objective_vars;
    if let Some((q, v)) = cap {
        let caps = add_norm_epigraphs(&mut cp, prob, &comps, q, 0.0);
        let mut total = Affine {
            constant: v,
            terms: vec![],
        };
        for (var, k) in caps {
            total.terms.push((var, -k));
        }
        cp.nonneg.push(total);
    }
    let x = cp.solve()?;
    Ok(theta.iter().map(|&i| x[i]).collect())
}

/// Adds variables bounding each segment norm; returns (variable, coefficient)
/// pairs whose weighted sum equals the total length at the optimum.
fn add_norm_epigraphs(
    cp: &mut ConeProgram,
    prob: &CrossingProblem,
    comps: &[Vec<Affine>],
    p: PExponent,
    cost: f64,
) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (s, comp) in prob.segs.iter().zip(comps) {
        match p {
            PExponent::Infinity => {
                let t = cp.new_var(cost);
                for a in comp {
                    cp.nonneg.push(Affine::var(t).plus(a, -1.0));
                    cp.nonneg.push(Affine::var(t).plus(a, 1.0));
                }
                out.push((t, 1.0));
            }
            PExponent::Finite(q) if q == 1.0 => {
                for (j, a) in comp.iter().enumerate() {
                    let w = s.weight(j);
                    let t = cp.new_var(cost * w);
                    cp.nonneg.push(Affine::var(t).plus(a, -1.0));
                    cp.nonneg.push(Affine::var(t).plus(a, 1.0));
                    out.push((t, w));
                }
            }
            PExponent::Finite(q) if q == 2.0 => {
                let t = cp.new_var(cost);
                let mut cone = vec![Affine::var(t)];
                for (j, a) in comp.iter().enumerate() {
                    cone.push(a.clone().scaled(s.weight(j).sqrt()));
                }
                cp.soc.push(cone);
                out.push((t, 1.0));
            }
            PExponent::Finite(q) => {
                // |v_j| ≤ r_j^{1/q} t^{1−1/q},  Σ w_j r_j = t
                let t = cp.new_var(cost);
                let mut sum = Affine::var(t).scaled(-1.0);
                for (j, a) in comp.iter().enumerate() {
                    let r = cp.new_var(0.0);
                    sum.terms.push((r, s.weight(j)));
                    cp.power.push((1.0 / q, [Affine::var(r), Affine::var(t), a.clone()]));
                }
                cp.zero.push(sum);
                out.push((t, 1.0));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path from a=(0.5,−1)∈P1 to b=(−1,0.5)∈P3 in the three-plane space glued
    /// along the x-axis and then the y-axis; the optimum passes the origin.
    fn corner_problem() -> CrossingProblem {
        CrossingProblem {
            n: 2,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); 2],
            segs: vec![
                Segment { rows: vec![1.0, 0.0, 0.0, 0.0], offset: vec![-0.5, 1.0], weights: None },
                Segment { rows: vec![-1.0, 0.0, 0.0, 1.0], offset: vec![0.0, 0.0], weights: None },
                Segment { rows: vec![0.0, 0.0, 0.0, -1.0], offset: vec![-1.0, 0.5], weights: None },
            ],
        }
    }

    #[test]
    fn conic_solution_at_corner() {
        let prob = corner_problem();
        let th = prob.minimize(PExponent::TWO).unwrap();
        assert!(th[0].abs() < 1e-9 && th[1].abs() < 1e-9, "{th:?}");
        let v = prob.objective(&th, PExponent::TWO);
        assert!((v - 2.0 * 1.25f64.sqrt()).abs() < 1e-10);
        for p in [PExponent::ONE, PExponent::INF, PExponent::Finite(3.0)] {
            let th = prob.minimize(p).unwrap();
            let exact = 2.0 * crate::lp::lp_norm(&[0.5, 1.0], p);
            assert!((prob.objective(&th, p) - exact).abs() < 1e-8, "{p}");
        }
    }

    #[test]
    fn one_dimensional_exact() {
        // |(θ,−1)| + |(−θ,1)| in ℓ^∞: flat on [−1,1]; ℓ² tie break picks 0
        let prob = CrossingProblem {
            n: 1,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY)],
            segs: vec![
                Segment { rows: vec![1.0, 0.0], offset: vec![0.0, -1.0], weights: None },
                Segment { rows: vec![-1.0, 0.0], offset: vec![0.0, 1.0], weights: None },
            ],
        };
        let (lo, hi) = prob.argmin_1d(&[0.0], 0, PExponent::INF, prob.bounds[0]);
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12, "{lo} {hi}");
        assert_eq!(prob.minimize_lex(PExponent::INF).unwrap(), vec![0.0]);
        // asymmetric: a=(0,1), b=(3,−2) across the x-axis; ℓ² crossing at 1
        let prob = CrossingProblem {
            n: 1,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY)],
            segs: vec![
                Segment { rows: vec![1.0, 0.0], offset: vec![0.0, -1.0], weights: None },
                Segment { rows: vec![-1.0, 0.0], offset: vec![3.0, -2.0], weights: None },
            ],
        };
        let th = prob.minimize(PExponent::TWO).unwrap()[0];
        assert!((th - 1.0).abs() < 1e-14, "{th}");
        let th = prob.minimize_lex(PExponent::INF).unwrap()[0];
        assert!((th - 1.0).abs() < 1e-14, "{th}");
    }

    #[test]
    fn lex_two_dimensional_matches_euclidean() {
        let prob = corner_problem();
        let th = prob.minimize_lex(PExponent::INF).unwrap();
        assert!(th[0].abs() < 1e-7 && th[1].abs() < 1e-7, "{th:?}");
    }

    #[test]
    fn bisect_respects_bounds() {
        assert_eq!(bisect_predicate((0.0, 1.0), 0.5, |_| true), 0.0);
        assert_eq!(bisect_predicate((0.0, 1.0), 0.5, |_| false), 1.0);
        let r = bisect_predicate((f64::NEG_INFINITY, f64::INFINITY), 0.0, |t| t >= 37.25);
        assert_eq!(r, 37.25);
    }
}
