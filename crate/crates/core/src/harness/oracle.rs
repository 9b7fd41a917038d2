use crate::error::{Error, Result};
use crate::lp::{dp, Geometry, PointMeasure};

/// Largest `N + M` accepted by [`brute_force_distance`].
pub const BRUTE_FORCE_MAX: usize = 9;

/// `‖μ - ν‖_p` by enumerating every bijection after padding each side with
/// `N + M` total slots (`μ` gets `M` copies of `Δ`, `ν` gets `N`).
pub fn brute_force_distance(mu: &PointMeasure, nu: &PointMeasure, geom: &Geometry) -> Result<f64> {
    let (n, m) = (mu.len(), nu.len());
    let size = n + m;
    if size > BRUTE_FORCE_MAX {
        return Err(Error::invalid("mu", format!("brute force limited to {BRUTE_FORCE_MAX} points, got {size}")));
    }
    if size == 0 {
        return Ok(0.0);
    }
    let left: Vec<_> = mu.points().iter().map(Some).chain(std::iter::repeat_n(None, m)).collect();
    let right: Vec<_> = nu.points().iter().map(Some).chain(std::iter::repeat_n(None, n)).collect();
    let cost: Vec<f64> = left.iter().flat_map(|x| right.iter().map(move |y| dp(*x, *y, geom))).collect();
    let mut perm: Vec<usize> = (0..size).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i * size + j]).sum();
        best = best.min(c);
    });
    Ok(best)
}

fn permute(v: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::TaggedPoint;

    #[test]
    fn visits_every_permutation() {
        let mut v: Vec<usize> = (0..5).collect();
        let mut seen = std::collections::HashSet::new();
        permute(&mut v, 0, &mut |p| {
            seen.insert(p.to_vec());
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn single_point_against_empty() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let mu = PointMeasure::new(vec![TaggedPoint::new(0.0, 1.0, 0)]);
        let d = brute_force_distance(&mu, &PointMeasure::empty(), &g).unwrap();
        assert!((d - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(brute_force_distance(&PointMeasure::empty(), &PointMeasure::empty(), &g).unwrap(), 0.0);
    }

    #[test]
    fn size_limit() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let mu = PointMeasure::new(vec![TaggedPoint::new(0.0, 1.0, 0); 10]);
        assert!(brute_force_distance(&mu, &PointMeasure::empty(), &g).is_err());
    }
}
