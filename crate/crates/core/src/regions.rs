//! Linear inequality systems over rate variables and two-dimensional rate
//! regions.
//!
//! A [`LinearRateSystem`] keeps exact rational coefficients and floating
//! point right-hand sides, so Fourier–Motzkin combination is exact in the
//! coefficients. Projection onto `(R1, R2)` produces a [`RateRegion`], a
//! bounded polygon in the nonnegative quadrant kept in canonical form.

use std::collections::HashMap;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute feasibility tolerance used throughout the region engine.
pub const FEAS_TOL: f64 = 1e-9;

pub const R1: &str = "R1";
pub const R2: &str = "R2";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("unknown rate variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate rate variable `{0}`")]
    DuplicateVariable(String),
    #[error("row has {got} coefficients, system has {expected} variables")]
    RowLength { expected: usize, got: usize },
    #[error("right-hand side {0} is not finite")]
    NonFinite(f64),
}

pub type Result<T> = std::result::Result<T, RegionError>;

/// `coeffs · vars ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub coeffs: Vec<Rational64>,
    pub rhs: f64,
    // Original rows combined into this one; `None` once there are too many
    // originals to track, which disables the Kohler test for the row.
    origin: Option<u128>,
}

impl Inequality {
    fn is_trivial(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Rescales to primitive integer coefficients (positive factor).
    fn normalized(mut self) -> Self {
        if self.is_trivial() {
            return self;
        }
        let lcm = self.coeffs.iter().fold(1i64, |acc, c| acc.lcm(c.denom()));
        let ints: Vec<i64> = self.coeffs.iter().map(|c| (c * lcm).to_integer()).collect();
        let gcd = ints.iter().fold(0i64, |acc, &v| acc.gcd(&v));
        let factor = Rational64::new(lcm, gcd);
        self.coeffs = ints.iter().map(|&v| Rational64::from_integer(v / gcd)).collect();
        self.rhs *= factor.to_f64().unwrap_or(1.0);
        self
    }

    fn lhs(&self, point: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(point)
            .map(|(c, x)| c.to_f64().unwrap_or(0.0) * x)
            .sum()
    }
}

/// A system of linear inequalities over named rate variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRateSystem {
    variables: Vec<String>,
    rows: Vec<Inequality>,
    originals: usize,
    eliminated: usize,
}

impl LinearRateSystem {
    pub fn new(variables: &[&str]) -> Result<Self> {
        let mut vars: Vec<String> = Vec::with_capacity(variables.len());
        for v in variables {
            if vars.iter().any(|x| x == v) {
                return Err(RegionError::DuplicateVariable(v.to_string()));
            }
            vars.push(v.to_string());
        }
        Ok(Self {
            variables: vars,
            rows: Vec::new(),
            originals: 0,
            eliminated: 0,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[Inequality] {
        &self.rows
    }

    pub fn index_of(&self, var: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| RegionError::UnknownVariable(var.to_string()))
    }

    /// Adds `Σ coef·var ≤ rhs`.
    pub fn add_le(&mut self, terms: &[(&str, i64)], rhs: f64) -> Result<()> {
        let mut coeffs = vec![Rational64::zero(); self.variables.len()];
        for &(v, c) in terms {
            let i = self.index_of(v)?;
            coeffs[i] += Rational64::from_integer(c);
        }
        self.add_row(coeffs, rhs)
    }

    /// Adds `Σ coef·var ≥ rhs`.
    pub fn add_ge(&mut self, terms: &[(&str, i64)], rhs: f64) -> Result<()> {
        let negated: Vec<(&str, i64)> = terms.iter().map(|&(v, c)| (v, -c)).collect();
        self.add_le(&negated, -rhs)
    }

    pub fn add_row(&mut self, coeffs: Vec<Rational64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.variables.len() {
            return Err(RegionError::RowLength {
                expected: self.variables.len(),
                got: coeffs.len(),
            });
        }
        if !rhs.is_finite() {
            return Err(RegionError::NonFinite(rhs));
        }
        let origin = (self.originals < 128).then(|| 1u128 << self.originals);
        self.originals += 1;
        self.rows.push(
            Inequality {
                coeffs,
                rhs,
                origin,
            }
            .normalized(),
        );
        Ok(())
    }

    /// Whether `point` (one value per variable) satisfies every row within
    /// `tol`.
    pub fn satisfied_by(&self, point: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.lhs(point) <= r.rhs + tol)
    }

    /// True when a row `0 ≤ c` with `c < -FEAS_TOL` is present.
    pub fn is_trivially_infeasible(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.is_trivial() && r.rhs < -FEAS_TOL)
    }

    /// Fourier–Motzkin elimination of `var`.
    pub fn fm_eliminate(&self, var: &str) -> Result<Self> {
        let k = self.index_of(var)?;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut out = Vec::new();
        for r in &self.rows {
            let c = r.coeffs[k];
            if c.is_positive() {
                pos.push(r);
            } else if c.is_negative() {
                neg.push(r);
            } else {
                out.push(drop_column(r, k));
            }
        }
        for p in &pos {
            let a = p.coeffs[k];
            for n in &neg {
                let b = n.coeffs[k].abs();
                let coeffs: Vec<Rational64> = p
                    .coeffs
                    .iter()
                    .zip(&n.coeffs)
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, (cp, cn))| b * cp + a * cn)
                    .collect();
                let rhs = b.to_f64().unwrap_or(0.0) * p.rhs + a.to_f64().unwrap_or(0.0) * n.rhs;
                let origin = match (p.origin, n.origin) {
                    (Some(x), Some(y)) => Some(x | y),
                    _ => None,
                };
                out.push(
                    Inequality {
                        coeffs,
                        rhs,
                        origin,
                    }
                    .normalized(),
                );
            }
        }
        let mut variables = self.variables.clone();
        variables.remove(k);
        let eliminated = self.eliminated + 1;
        Ok(Self {
            variables,
            rows: prune(out, eliminated),
            originals: self.originals,
            eliminated,
        })
    }

    /// Eliminates every variable not listed in `keep`, in declaration order.
    pub fn eliminate_all_except(&self, keep: &[&str]) -> Result<Self> {
        for k in keep {
            self.index_of(k)?;
        }
        let mut sys = self.clone();
        let drop: Vec<String> = self
            .variables
            .iter()
            .filter(|v| !keep.contains(&v.as_str()))
            .cloned()
            .collect();
        for v in drop {
            sys = sys.fm_eliminate(&v)?;
        }
        Ok(sys)
    }
}

fn drop_column(r: &Inequality, k: usize) -> Inequality {
    let mut coeffs = r.coeffs.clone();
    coeffs.remove(k);
    Inequality {
        coeffs,
        rhs: r.rhs,
        origin: r.origin,
    }
}

/// Removes vacuous rows, duplicate rows (keeping the tightest) and rows that
/// fail Kohler's test: after `eliminated` steps, a row built from more than
/// `eliminated + 1` original rows is implied by the others.
fn prune(rows: Vec<Inequality>, eliminated: usize) -> Vec<Inequality> {
    let mut infeasible: Option<f64> = None;
    let mut by_coeffs: HashMap<Vec<Rational64>, Inequality> = HashMap::new();
    let mut order: Vec<Vec<Rational64>> = Vec::new();
    for r in rows {
        if r.is_trivial() {
            if r.rhs < -FEAS_TOL {
                infeasible = Some(infeasible.map_or(r.rhs, |c: f64| c.min(r.rhs)));
            }
            continue;
        }
        if let Some(o) = r.origin {
            if o.count_ones() as usize > eliminated + 1 {
                continue;
            }
        }
        match by_coeffs.get_mut(&r.coeffs) {
            Some(existing) => {
                let smaller_origin = match (r.origin, existing.origin) {
                    (Some(a), Some(b)) => a.count_ones() < b.count_ones(),
                    (Some(_), None) => true,
                    _ => false,
                };
                if r.rhs < existing.rhs || (r.rhs == existing.rhs && smaller_origin) {
                    *existing = r;
                }
            }
            None => {
                order.push(r.coeffs.clone());
                by_coeffs.insert(r.coeffs.clone(), r);
            }
        }
    }
    let width = order.first().map_or(0, |c| c.len());
    let mut out: Vec<Inequality> = order
        .into_iter()
        .filter_map(|c| by_coeffs.remove(&c))
        .collect();
    if let Some(rhs) = infeasible {
        out.push(Inequality {
            coeffs: vec![Rational64::zero(); width],
            rhs,
            origin: None,
        });
    }
    out
}

/// `a·R1 + b·R2 ≤ c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn slack(&self, p: [f64; 2]) -> f64 {
        self.c - self.a * p[0] - self.b * p[1]
    }

    fn norm(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// Bounded polygon `{R1, R2 ≥ 0, a·R ≤ c for each half-plane}`.
///
/// Vertices are stored counter-clockwise starting from the lowest-left
/// point; an empty vertex list means the region is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    halfplanes: Vec<HalfPlane>,
    vertices: Vec<[f64; 2]>,
}

impl RateRegion {
    /// Builds the canonical region from half-planes plus per-rate caps.
    pub fn from_halfplanes(halfplanes: &[HalfPlane], caps: [f64; 2]) -> Self {
        let mut hps: Vec<HalfPlane> = halfplanes.to_vec();
        hps.push(HalfPlane::new(1.0, 0.0, caps[0]));
        hps.push(HalfPlane::new(0.0, 1.0, caps[1]));
        canonical(hps)
    }

    pub fn empty() -> Self {
        Self {
            halfplanes: Vec::new(),
            vertices: Vec::new(),
        }
    }

    /// Convex hull of the down-closure of `points` in the quadrant.
    pub fn from_points(points: &[[f64; 2]]) -> Self {
        if points.is_empty() {
            return Self::empty();
        }
        let mut all = vec![[0.0, 0.0]];
        for p in points {
            let p = [p[0].max(0.0), p[1].max(0.0)];
            all.extend([p, [p[0], 0.0], [0.0, p[1]]]);
        }
        let vertices = convex_hull(all);
        let n = vertices.len();
        let mut halfplanes = Vec::new();
        if n == 1 {
            halfplanes.push(HalfPlane::new(1.0, 0.0, 0.0));
            halfplanes.push(HalfPlane::new(0.0, 1.0, 0.0));
        } else {
            for i in 0..n {
                let p = vertices[i];
                let q = vertices[(i + 1) % n];
                let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                let (mut a, mut b) = (dy, -dx);
                let scale = a.abs().max(b.abs());
                a /= scale;
                b /= scale;
                // nonnegativity edges are implicit
                if (b.abs() < 1e-12 && a < 0.0) || (a.abs() < 1e-12 && b < 0.0) {
                    continue;
                }
                let a = if a.abs() < 1e-12 { 0.0 } else { a };
                let b = if b.abs() < 1e-12 { 0.0 } else { b };
                halfplanes.push(HalfPlane::new(a, b, a * p[0] + b * p[1]));
            }
            if n == 2 {
                // segment on an axis: the edges pin one coordinate, add the extent
                if vertices.iter().all(|v| v[0].abs() < 1e-12) {
                    halfplanes.push(HalfPlane::new(0.0, 1.0, vertices[0][1].max(vertices[1][1])));
                }
                if vertices.iter().all(|v| v[1].abs() < 1e-12) {
                    halfplanes.push(HalfPlane::new(1.0, 0.0, vertices[0][0].max(vertices[1][0])));
                }
            }
        }
        Self {
            halfplanes,
            vertices,
        }
    }

    /// Reassembles a region from stored parts without recomputing anything.
    pub fn from_parts(halfplanes: Vec<HalfPlane>, vertices: Vec<[f64; 2]>) -> Self {
        Self {
            halfplanes,
            vertices,
        }
    }

    pub fn halfplanes(&self) -> &[HalfPlane] {
        &self.halfplanes
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        !self.is_empty()
            && p[0] >= -tol
            && p[1] >= -tol
            && self.halfplanes.iter().all(|h| h.slack(p) >= -tol)
    }

    /// Rebuilds the region from its own half-planes (idempotent on canonical
    /// regions).
    pub fn recanonicalized(&self) -> Self {
        if self.is_empty() {
            return Self::empty();
        }
        canonical(self.halfplanes.clone())
    }
}

/// Vertices of `{R ≥ 0, h(R) ≤ c ∀h}`, counter-clockwise.
pub fn vertices(r: &RateRegion) -> Vec<[f64; 2]> {
    r.vertices.clone()
}

fn canonical(mut hps: Vec<HalfPlane>) -> RateRegion {
    for h in &mut hps {
        let s = h.a.abs().max(h.b.abs());
        if s > 0.0 {
            h.a /= s;
            h.b /= s;
            h.c /= s;
        }
    }
    if hps
        .iter()
        .any(|h| h.a == 0.0 && h.b == 0.0 && h.c < -FEAS_TOL)
    {
        return RateRegion::empty();
    }
    hps.retain(|h| h.a != 0.0 || h.b != 0.0);
    let mut lines = hps.clone();
    lines.push(HalfPlane::new(-1.0, 0.0, 0.0));
    lines.push(HalfPlane::new(0.0, -1.0, 0.0));
    let mut points = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (l, m) = (lines[i], lines[j]);
            let det = l.a * m.b - l.b * m.a;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (l.c * m.b - l.b * m.c) / det;
            let y = (l.a * m.c - l.c * m.a) / det;
            let p = [clean(x), clean(y)];
            if lines.iter().all(|h| h.slack(p) >= -FEAS_TOL) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return RateRegion::empty();
    }
    let vertices = convex_hull(points);
    let degenerate = vertices.len() < 3;
    let tight = |h: &HalfPlane| {
        vertices
            .iter()
            .filter(|&&v| h.slack(v).abs() <= FEAS_TOL * h.norm().max(1.0))
            .count()
    };
    let mut kept: Vec<HalfPlane> = Vec::new();
    for h in hps {
        let t = tight(&h);
        if t >= 2 || (degenerate && t >= 1) {
            let dup = kept.iter().any(|k| {
                (k.a - h.a).abs() < 1e-12 && (k.b - h.b).abs() < 1e-12 && (k.c - h.c).abs() < FEAS_TOL
            });
            if !dup {
                kept.push(h);
            }
        }
    }
    kept.sort_by(|x, y| {
        x.a.partial_cmp(&y.a)
            .unwrap()
            .then(x.b.partial_cmp(&y.b).unwrap())
            .then(x.c.partial_cmp(&y.c).unwrap())
    });
    RateRegion {
        halfplanes: kept,
        vertices,
    }
}

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-13 {
        0.0
    } else {
        v
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|p, q| p[0].partial_cmp(&q[0]).unwrap().then(p[1].partial_cmp(&q[1]).unwrap()));
    pts.dedup_by(|p, q| (p[0] - q[0]).abs() <= FEAS_TOL && (p[1] - q[1]).abs() <= FEAS_TOL);
    if pts.len() <= 2 {
        return pts;
    }
    let eps = 1e-12;
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && (lower[0][0] - lower[1][0]).abs() <= FEAS_TOL && (lower[0][1] - lower[1][1]).abs() <= FEAS_TOL {
        lower.pop();
    }
    lower
}

/// Eliminates every variable except `R1`, `R2` and intersects with the
/// nonnegative quadrant and the given caps.
pub fn project_to_rate_plane(s: &LinearRateSystem, caps: [f64; 2]) -> Result<RateRegion> {
    let proj = s.eliminate_all_except(&[R1, R2])?;
    let i1 = proj.index_of(R1)?;
    let i2 = proj.index_of(R2)?;
    let mut hps = Vec::with_capacity(proj.rows.len());
    for r in &proj.rows {
        let a = r.coeffs[i1].to_f64().unwrap_or(0.0);
        let b = r.coeffs[i2].to_f64().unwrap_or(0.0);
        if a == 0.0 && b == 0.0 {
            if r.rhs < -FEAS_TOL {
                return Ok(RateRegion::empty());
            }
            continue;
        }
        hps.push(HalfPlane::new(a, b, r.rhs));
    }
    Ok(RateRegion::from_halfplanes(&hps, caps))
}

/// True iff every vertex of `a` satisfies every constraint of `b` with slack
/// at least `-tol`.
pub fn is_subset(a: &RateRegion, b: &RateRegion, tol: f64) -> bool {
    if a.is_empty() {
        return true;
    }
    if b.is_empty() {
        return false;
    }
    a.vertices.iter().all(|&v| b.contains(v, tol))
}

/// Largest violation of `b`'s constraints by a vertex of `a` (0 when
/// `a ⊆ b`).
pub fn max_violation(a: &RateRegion, b: &RateRegion) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    a.vertices
        .iter()
        .map(|&v| {
            let mut worst = (-v[0]).max(-v[1]).max(0.0);
            for h in &b.halfplanes {
                worst = worst.max(-h.slack(v));
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// Maximum of `w1·R1 + w2·R2` over the region and a maximizing vertex; ties
/// go to the larger `R1`. Returns `None` for an empty region.
pub fn max_weighted(r: &RateRegion, w1: f64, w2: f64) -> Option<(f64, [f64; 2])> {
    let mut best: Option<(f64, [f64; 2])> = None;
    for &v in &r.vertices {
        let val = w1 * v[0] + w2 * v[1];
        best = match best {
            None => Some((val, v)),
            Some((bv, bp)) => {
                if val > bv + 1e-12 || ((val - bv).abs() <= 1e-12 && v[0] > bp[0]) {
                    Some((val.max(bv), v))
                } else {
                    Some((bv, bp))
                }
            }
        };
    }
    best
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    (p[0] - cx).hypot(p[1] - cy)
}

fn distance_to_region(p: [f64; 2], r: &RateRegion) -> f64 {
    let v = &r.vertices;
    match v.len() {
        0 => f64::INFINITY,
        1 => (p[0] - v[0][0]).hypot(p[1] - v[0][1]),
        2 => point_segment_distance(p, v[0], v[1]),
        n => {
            let inside = (0..n).all(|i| cross(v[i], v[(i + 1) % n], p) >= -1e-12);
            if inside {
                return 0.0;
            }
            (0..n)
                .map(|i| point_segment_distance(p, v[i], v[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Hausdorff distance between two polygons (attained at vertices for convex
/// sets).
pub fn hausdorff(a: &RateRegion, b: &RateRegion) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let one_way = |x: &RateRegion, y: &RateRegion| {
        x.vertices
            .iter()
            .map(|&p| distance_to_region(p, y))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}
