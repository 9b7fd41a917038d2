//! Tagged point measures on `M = {(x, v) : v > -a x}` and the boundary-absorbing
//! transport distance between them.
//!
//! Two points of the same generation cost `min(|X - Y|^p, d^p(X) + d^p(Y))`,
//! points of different generations cost `d^p(X) + d^p(Y)`, and a point matched
//! with the boundary point Δ costs `d^p(X)`, where `d` is the distance to `∂M`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tdmc::Ensemble;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedPoint {
    pub x: f64,
    pub v: f64,
    pub n: u32,
}

impl TaggedPoint {
    pub fn new(x: f64, v: f64, n: u32) -> Self {
        Self { x, v, n }
    }

    /// Strictly inside `M`.
    pub fn in_domain(&self, a: f64) -> bool {
        self.v > -a * self.x
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryForm {
    /// Euclidean distance to the line `v = -a x`.
    #[default]
    Euclidean,
    /// `|x + v/a|`, the horizontal distance to the barrier.
    Barrier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub a: f64,
    pub p: f64,
    #[serde(default)]
    pub boundary: BoundaryForm,
}

impl Geometry {
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid("a", "barrier slope must be finite and ≥ 0"));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid("p", format!("exponent must lie in (0, 1], got {p}")));
        }
        Ok(Self { a, p, boundary: BoundaryForm::Euclidean })
    }

    pub fn with_boundary(mut self, boundary: BoundaryForm) -> Result<Self> {
        if boundary == BoundaryForm::Barrier && self.a == 0.0 {
            return Err(Error::invalid("boundary", "barrier form needs a > 0"));
        }
        self.boundary = boundary;
        Ok(self)
    }
}

pub fn dist_to_boundary(x: &TaggedPoint, geom: &Geometry) -> f64 {
    let a = geom.a;
    match geom.boundary {
        BoundaryForm::Euclidean => (x.v + a * x.x).abs() / (1.0 + a * a).sqrt(),
        BoundaryForm::Barrier => (x.x + x.v / a).abs(),
    }
}

/// `d_p` between two sites, `None` standing for Δ.
pub fn dp(x: Option<&TaggedPoint>, y: Option<&TaggedPoint>, geom: &Geometry) -> f64 {
    let b = |z: &TaggedPoint| dist_to_boundary(z, geom).powf(geom.p);
    match (x, y) {
        (None, None) => 0.0,
        (Some(x), None) | (None, Some(x)) => b(x),
        (Some(x), Some(y)) => {
            let via = b(x) + b(y);
            if x.n != y.n {
                via
            } else {
                let direct = (x.x - y.x).hypot(x.v - y.v).powf(geom.p);
                direct.min(via)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    points: Vec<TaggedPoint>,
}

impl PointMeasure {
    pub fn new(points: Vec<TaggedPoint>) -> Self {
        Self { points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[TaggedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `‖μ‖_p = Σ d^p(X, ∂M)`.
    pub fn norm(&self, geom: &Geometry) -> f64 {
        self.points.iter().map(|x| dist_to_boundary(x, geom).powf(geom.p)).sum()
    }

    /// Tagged points `(x, V(x) - ln θ, n)` of a TDMC ensemble with `V(x) = -a x`.
    /// Particles sitting exactly on the boundary carry no mass and are dropped.
    pub fn from_ensemble(ens: &Ensemble, a: f64) -> Result<Self> {
        let mut points = Vec::with_capacity(ens.len());
        for p in &ens.particles {
            if p.is_immortal() {
                return Err(Error::invalid("ensemble", "immortal particles have no finite tag"));
            }
            let pt = TaggedPoint::new(p.x, -a * p.x - p.ticket.ln(), p.generation);
            if pt.in_domain(a) {
                points.push(pt);
            }
        }
        Ok(Self { points })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let points = r.deserialize().collect::<std::result::Result<Vec<TaggedPoint>, _>>()?;
        Ok(Self { points })
    }
}

/// Optimal pairing between two measures; `None` entries are Δ.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(Option<usize>, Option<usize>)>,
    pub cost: f64,
}

fn cost_matrix(mu: &PointMeasure, nu: &PointMeasure, geom: &Geometry) -> (usize, Vec<f64>) {
    let n = mu.len().max(nu.len());
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = dp(mu.points.get(i), nu.points.get(j), geom);
        }
    }
    (n, c)
}

/// Minimum-cost perfect assignment on a square row-major matrix.
///
/// Shortest augmenting paths with dual potentials, `O(n³)`. Returns the column
/// assigned to each row.
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays, column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    assign
}

fn assignment_cost(n: usize, cost: &[f64], assign: &[usize]) -> f64 {
    (0..n).map(|i| cost[i * n + assign[i]]).sum()
}

/// `‖μ - ν‖_p`. The pair is put in a canonical order first, so the result is
/// bitwise symmetric in its arguments.
pub fn lp_distance(mu: &PointMeasure, nu: &PointMeasure, geom: &Geometry) -> f64 {
    let (mu, nu) = if canonical_order(mu, nu) == std::cmp::Ordering::Greater { (nu, mu) } else { (mu, nu) };
    let (n, c) = cost_matrix(mu, nu, geom);
    assignment_cost(n, &c, &hungarian(n, &c))
}

fn canonical_order(mu: &PointMeasure, nu: &PointMeasure) -> std::cmp::Ordering {
    let key = |p: &TaggedPoint| (p.x.to_bits(), p.v.to_bits(), p.n);
    mu.len().cmp(&nu.len()).then_with(|| mu.points.iter().map(key).cmp(nu.points.iter().map(key)))
}

/// Above this size the lexicographic tie-break is skipped (it costs `O(n⁵)`).
const TIE_BREAK_LIMIT: usize = 48;

/// Optimal matching, ties broken towards the lexicographically smallest
/// assignment (row 0 takes the smallest feasible column, then row 1, ...).
pub fn optimal_matching(mu: &PointMeasure, nu: &PointMeasure, geom: &Geometry) -> Matching {
    let (n, c) = cost_matrix(mu, nu, geom);
    let base = hungarian(n, &c);
    let best = assignment_cost(n, &c, &base);
    let assign = if n <= TIE_BREAK_LIMIT { lexicographic(n, &c, best) } else { base };
    let pairs = assign
        .iter()
        .enumerate()
        .map(|(i, &j)| ((i < mu.len()).then_some(i), (j < nu.len()).then_some(j)))
        .filter(|p| *p != (None, None))
        .collect();
    Matching { pairs, cost: best }
}

fn lexicographic(n: usize, c: &[f64], best: f64) -> Vec<usize> {
    let tol = 1e-12 * (1.0 + best.abs());
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut fixed_cost = 0.0;
    let mut assign = vec![usize::MAX; n];
    while let Some(&i) = rows.first() {
        let rest_rows = &rows[1..];
        let mut chosen = None;
        for (k, &j) in cols.iter().enumerate() {
            let rest_cols: Vec<usize> = cols.iter().enumerate().filter(|(m, _)| *m != k).map(|(_, c)| *c).collect();
            let m = rest_rows.len();
            let sub: Vec<f64> = rest_rows.iter().flat_map(|&r| rest_cols.iter().map(move |&cc| c[r * n + cc])).collect();
            let sub_cost = assignment_cost(m, &sub, &hungarian(m, &sub));
            if fixed_cost + c[i * n + j] + sub_cost <= best + tol {
                chosen = Some((k, j));
                break;
            }
        }
        // Some column always attains the optimum; fall back to the cheapest if rounding disagrees.
        let (k, j) = chosen.unwrap_or_else(|| {
            cols.iter().enumerate().min_by(|a, b| c[i * n + a.1].total_cmp(&c[i * n + b.1])).map(|(k, j)| (k, *j)).unwrap()
        });
        assign[i] = j;
        fixed_cost += c[i * n + j];
        rows.remove(0);
        cols.remove(k);
    }
    assign
}

/// Foot of the perpendicular from `z` to the line `v = -a x`.
fn projection(z: &TaggedPoint, a: f64) -> TaggedPoint {
    let s = (z.x - a * z.v) / (1.0 + a * a);
    TaggedPoint::new(s, -a * s, z.n)
}

fn lerp(from: &TaggedPoint, to: &TaggedPoint, t: f64, n: u32) -> TaggedPoint {
    // Exact endpoints: for small p even a rounding error is visible in d_p.
    if t == 1.0 {
        return TaggedPoint::new(to.x, to.v, n);
    }
    TaggedPoint::new(from.x + t * (to.x - from.x), from.v + t * (to.v - from.v), n)
}

/// Linear interpolation `L_t(μ, ν)` along the optimal matching.
///
/// Same-generation pairs whose direct cost is smaller than the route through the
/// boundary move in a straight line. All other points travel to or from their
/// orthogonal projection on `∂M`; points that sit on `∂M` are dropped.
pub fn interpolate(mu: &PointMeasure, nu: &PointMeasure, t: f64, geom: &Geometry) -> Result<PointMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("t", format!("interpolation time must lie in [0, 1], got {t}")));
    }
    let a = geom.a;
    let matching = optimal_matching(mu, nu, geom);
    let mut out = Vec::new();
    let mut push = |z: TaggedPoint| {
        if z.in_domain(a) {
            out.push(z);
        }
    };
    for (i, j) in matching.pairs {
        let x = i.map(|i| &mu.points[i]);
        let y = j.map(|j| &nu.points[j]);
        let direct = match (x, y) {
            (Some(x), Some(y)) if x.n == y.n => {
                let d = (x.x - y.x).hypot(x.v - y.v).powf(geom.p);
                d <= dp(Some(x), None, geom) + dp(Some(y), None, geom)
            }
            _ => false,
        };
        if direct {
            let (x, y) = (x.unwrap(), y.unwrap());
            push(lerp(x, y, t, x.n));
            continue;
        }
        if let Some(x) = x {
            if t < 1.0 {
                push(lerp(x, &projection(x, a), t, x.n));
            }
        }
        if let Some(y) = y {
            if t > 0.0 {
                push(lerp(&projection(y, a), y, t, y.n));
            }
        }
    }
    Ok(PointMeasure::new(out))
}
