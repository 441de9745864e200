use rand::Rng;

use super::{GridField, NodeSet};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point};

/// A finite-difference result, flagged when a one-sided stencil was used
/// because the node touches the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil<T> {
    pub value: T,
    pub one_sided: bool,
}

/// Max of |Δvalue|/h over axis-adjacent node pairs. A lower bound of the
/// Lipschitz constant of any function through the samples.
pub fn discrete_lipschitz(field: &GridField) -> f64 {
    adjacent_max(field, |_| true)
}

/// As [`discrete_lipschitz`], restricted to pairs with both nodes in `nodes`.
pub fn discrete_lipschitz_within(field: &GridField, nodes: &NodeSet) -> f64 {
    adjacent_max(field, |i| nodes.contains(i))
}

fn adjacent_max(field: &GridField, keep: impl Fn(usize) -> bool) -> f64 {
    let g = &field.grid;
    let v = &field.values;
    let mut best = 0.0f64;
    for axis in 0..g.dim() {
        let stride = g.stride(axis);
        let n = g.shape()[axis];
        let inv_h = 1.0 / g.spacing()[axis];
        for i in 0..v.len() {
            // Skip nodes on the last layer of this axis.
            if (i / stride) % n + 1 == n || !keep(i) || !keep(i + stride) {
                continue;
            }
            best = best.max((v[i + stride] - v[i]).abs() * inv_h);
        }
    }
    best
}

/// Max over `pairs` random node pairs of |Δvalue|/‖Δx‖.
pub fn discrete_lipschitz_random<R: Rng>(field: &GridField, pairs: usize, rng: &mut R) -> f64 {
    let g = &field.grid;
    let n = g.len();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let (a, b) = (g.node(i), g.node(j));
        let d: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        best = best.max((field.values[i] - field.values[j]).abs() / d);
    }
    best
}

/// Max of |f(p) − f(q)|/d(p, q) over the supplied pairs, skipping pairs
/// at distance zero.
pub fn pairwise_lipschitz(model: &ManifoldModel, f: &dyn Fn(&Point) -> f64, pairs: &[(Point, Point)]) -> Result<f64> {
    let mut best = 0.0f64;
    let mut used = 0usize;
    for (p, q) in pairs {
        let d = model.distance(p, q);
        if d == 0.0 {
            continue;
        }
        used += 1;
        best = best.max((f(p) - f(q)).abs() / d);
    }
    if used == 0 {
        return Err(Error::Estimation(format!("all {} pairs are degenerate", pairs.len())));
    }
    Ok(best)
}

/// Central-difference gradient at `node`; one-sided where a neighbour is
/// missing.
pub fn discrete_gradient(field: &GridField, node: usize) -> Stencil<Vec<f64>> {
    let g = &field.grid;
    let idx = g.multi_index(node);
    let v = &field.values;
    let mut out = Vec::with_capacity(g.dim());
    let mut one_sided = false;
    for axis in 0..g.dim() {
        let s = g.stride(axis);
        let h = g.spacing()[axis];
        let i = idx[axis];
        let last = g.shape()[axis] - 1;
        let d = if i > 0 && i < last {
            (v[node + s] - v[node - s]) / (2.0 * h)
        } else if i == 0 {
            one_sided = true;
            (v[node + s] - v[node]) / h
        } else {
            one_sided = true;
            (v[node] - v[node - s]) / h
        };
        out.push(d);
    }
    Stencil { value: out, one_sided }
}

/// (v[i+1] − 2v[i] + v[i−1])/h² along `axis`, shifted inward at faces.
pub fn second_difference(field: &GridField, node: usize, axis: usize) -> Result<Stencil<f64>> {
    let g = &field.grid;
    if axis >= g.dim() {
        return Err(Error::Grid(format!("axis {axis} on a {}-dimensional grid", g.dim())));
    }
    let n = g.shape()[axis];
    if n < 3 {
        return Err(Error::Grid(format!("axis {axis} has {n} nodes, a second difference needs 3")));
    }
    let s = g.stride(axis);
    let h = g.spacing()[axis];
    let i = g.multi_index(node)[axis];
    let (mid, one_sided) = if i == 0 {
        (node + s, true)
    } else if i == n - 1 {
        (node - s, true)
    } else {
        (node, false)
    };
    let v = &field.values;
    Ok(Stencil { value: (v[mid + s] - 2.0 * v[mid] + v[mid - s]) / (h * h), one_sided })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TangentGrid;
    use crate::manifold::Region;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lipschitz_examples() {
        let g = TangentGrid::centered(2, 1.0, 4).unwrap();
        assert_eq!(discrete_lipschitz(&GridField::constant(g, 4.0).unwrap()), 0.0);
        let g = TangentGrid::new(&[101], &[0.013], &[-0.4]).unwrap();
        let f = GridField::from_fn(g, |x| 2.0 * x[0]).unwrap();
        assert!((discrete_lipschitz(&f) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn within_ignores_outside_pairs() {
        let g = TangentGrid::centered(1, 1.0, 3).unwrap();
        let mut f = GridField::from_fn(g.clone(), |x| x[0]).unwrap();
        f.values[0] = 100.0;
        let inner = NodeSet::interior(&g, 1);
        assert!((discrete_lipschitz_within(&f, &inner) - 1.0).abs() < 1e-12);
        assert!(discrete_lipschitz(&f) > 100.0);
    }

    #[test]
    fn sphere_distance_estimate() {
        let m = ManifoldModel::sphere(2, 1.0).unwrap();
        let p = Point::new(&[0.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Region::Whole.sample_random(&m, 10_000, &mut rng).unwrap();
        let b = Region::Whole.sample_random(&m, 10_000, &mut rng).unwrap();
        let pairs: Vec<_> = a.into_iter().zip(b).collect();
        let est = pairwise_lipschitz(&m, &|q| m.distance(q, &p), &pairs).unwrap();
        assert!((0.99..=1.0 + 1e-12).contains(&est), "{est}");
        let degenerate = vec![(p, p)];
        assert!(matches!(pairwise_lipschitz(&m, &|_| 0.0, &degenerate), Err(Error::Estimation(_))));
    }

    #[test]
    fn difference_stencils() {
        let g = TangentGrid::centered(2, 1.0, 4).unwrap();
        let f = GridField::from_fn(g.clone(), |x| 0.5 - 3.0 * x[0] + 0.25 * x[1]).unwrap();
        let mid = g.nearest(&[0.25, -0.5]).unwrap();
        let grad = discrete_gradient(&f, mid);
        assert!(!grad.one_sided);
        assert!((grad.value[0] + 3.0).abs() < 1e-12 && (grad.value[1] - 0.25).abs() < 1e-12);
        assert!(discrete_gradient(&f, 0).one_sided);

        let q = GridField::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        for axis in 0..2 {
            for node in [mid, 0] {
                let s = second_difference(&q, node, axis).unwrap();
                assert!((s.value - 1.0).abs() < 1e-10);
            }
        }

        let g = TangentGrid::centered(1, 1.0, 5).unwrap();
        let h = g.spacing()[0];
        let abs = GridField::from_fn(g.clone(), |x| x[0].abs()).unwrap();
        let kink = g.nearest(&[0.0]).unwrap();
        let s = second_difference(&abs, kink, 0).unwrap();
        assert!((s.value - 2.0 / h).abs() < 1e-9);
    }
}
