//! Discrete mollification with the bump kernel exp(−1/(1 − t²)).

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{GridField, NodeSet, TangentGrid};

/// Kernel floor on K when choosing the radius.
pub const K_FLOOR: f64 = 1e-6;

/// Radial kernel of support radius `radius`, tabulated on a grid's offsets and
/// normalised so the discrete weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    pub radius: f64,
    pub offsets: Vec<[isize; 3]>,
    pub weights: Vec<f64>,
    /// Largest |offset| per axis, in nodes.
    pub reach: [usize; 3],
}

fn profile(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

impl Mollifier {
    pub fn new(grid: &TangentGrid, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("mollifier radius must be positive, got {radius}")));
        }
        let dim = grid.dim();
        let h = grid.spacing();
        let mut span = [0isize; 3];
        for k in 0..dim {
            span[k] = (radius / h[k]).floor() as isize;
        }
        let mut offsets = Vec::new();
        let mut raw = Vec::new();
        let mut o = [0isize; 3];
        let range = |k: usize| -span[k]..=span[k];
        for a in range(0) {
            o[0] = a;
            for b in if dim > 1 { range(1) } else { 0..=0 } {
                o[1] = b;
                for c in if dim > 2 { range(2) } else { 0..=0 } {
                    o[2] = c;
                    let r2: f64 = (0..dim).map(|k| (o[k] as f64 * h[k]).powi(2)).sum();
                    let w = profile(r2.sqrt() / radius);
                    if w > 0.0 {
                        offsets.push(o);
                        raw.push(w);
                    }
                }
            }
        }
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut reach = [0usize; 3];
        for off in &offsets {
            for k in 0..dim {
                reach[k] = reach[k].max(off[k].unsigned_abs());
            }
        }
        Ok(Mollifier { radius, offsets, weights, reach })
    }

    pub fn is_identity(&self) -> bool {
        self.offsets.len() == 1
    }
}

pub fn mollify(field: &GridField, m: &Mollifier, region: &NodeSet) -> Result<GridField> {
    mollify_with(Execution::default(), field, m, region)
}

/// Replaces the values on `region` by their discrete convolution with the
/// kernel; other nodes are copied. Every region node needs the full kernel
/// support inside the grid.
pub fn mollify_with(exec: Execution, field: &GridField, m: &Mollifier, region: &NodeSet) -> Result<GridField> {
    let g = &field.grid;
    if region.mask.len() != g.len() {
        return Err(Error::Grid("region does not belong to the field's grid".into()));
    }
    let dim = g.dim();
    for &i in &region.members {
        let idx = g.multi_index(i);
        for k in 0..dim {
            let available = idx[k].min(g.shape()[k] - 1 - idx[k]);
            if available < m.reach[k] {
                return Err(Error::Margin { axis: k, required: m.reach[k], available });
            }
        }
    }
    if m.is_identity() {
        return Ok(field.clone());
    }
    let strides: Vec<isize> = (0..dim).map(|k| g.stride(k) as isize).collect();
    let flat: Vec<isize> = m.offsets.iter().map(|o| (0..dim).map(|k| o[k] * strides[k]).sum()).collect();
    let values = exec.map(g.len(), |i| {
        if !region.contains(i) {
            return field.values[i];
        }
        let mut acc = 0.0;
        for (off, w) in flat.iter().zip(&m.weights) {
            acc += w * field.values[(i as isize + off) as usize];
        }
        acc
    });
    GridField::new(g.clone(), values)
}

/// ρ = min(eps/max(K, κ), margin, cap); then |mollify(f) − f| ≤ Kρ ≤ eps.
pub fn choose_radius(field: &GridField, eps: f64, k: f64, margin: f64, cap: f64) -> Result<f64> {
    if !(eps > 0.0) || !(k >= 0.0) || !(cap > 0.0) {
        return Err(Error::Parameter(format!("need eps > 0, K >= 0, cap > 0 (got {eps}, {k}, {cap})")));
    }
    let spacing = field.grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    if margin < spacing {
        return Err(Error::Radius { margin, spacing });
    }
    Ok((eps / k.max(K_FLOOR)).min(margin).min(cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{lasry_lions, EnvelopeParams};
    use crate::field::{discrete_gradient, discrete_lipschitz_within};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fitted_region(g: &TangentGrid, m: &Mollifier) -> NodeSet {
        NodeSet::interior(g, *m.reach[..g.dim()].iter().max().unwrap())
    }

    #[test]
    fn kernel_weights() {
        for (shape, h) in [(vec![101], vec![0.01]), (vec![41, 41], vec![0.02, 0.03]), (vec![15, 15, 15], vec![0.05; 3])] {
            let g = TangentGrid::new(&shape, &h, &vec![0.0; shape.len()]).unwrap();
            let m = Mollifier::new(&g, 0.2).unwrap();
            let s: f64 = m.weights.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(m.weights.iter().all(|&w| w >= 0.0));
            for (o, w) in m.offsets.iter().zip(&m.weights) {
                let neg = [-o[0], -o[1], -o[2]];
                let j = m.offsets.iter().position(|x| *x == neg).unwrap();
                assert_eq!(m.weights[j], *w);
                let r: f64 = (0..g.dim()).map(|k| (o[k] as f64 * h[k]).powi(2)).sum::<f64>().sqrt();
                assert!(r < 0.2);
            }
        }
    }

    #[test]
    fn reproduces_constants_and_affine() {
        let g = TangentGrid::new(&[41, 37], &[0.025, 0.03], &[-0.5, -0.5]).unwrap();
        let m = Mollifier::new(&g, 0.15).unwrap();
        let region = fitted_region(&g, &m);
        let c = GridField::constant(g.clone(), 3.25).unwrap();
        let out = mollify(&c, &m, &region).unwrap();
        assert!(out.max_abs_diff(&c) <= 1e-12);
        let a = GridField::from_fn(g.clone(), |x| 0.3 + 1.7 * x[0] - 0.9 * x[1]).unwrap();
        let out = mollify(&a, &m, &region).unwrap();
        assert!(out.max_abs_diff(&a) <= 1e-12);
    }

    #[test]
    fn abs_at_kink_matches_quadrature() {
        let g = TangentGrid::new(&[1001], &[0.001], &[-0.5]).unwrap();
        let m = Mollifier::new(&g, 0.1).unwrap();
        let f = GridField::from_fn(g.clone(), |x| x[0].abs()).unwrap();
        let region = fitted_region(&g, &m);
        let out = mollify(&f, &m, &region).unwrap();
        let zero = g.nearest(&[0.0]).unwrap();
        let v = out.values[zero];
        assert!(v > 0.0 && v <= 0.1);
        // Midpoint rule on the continuum integral.
        let n = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let y = -0.1 + (i as f64 + 0.5) * 0.2 / n as f64;
            let w = profile(y / 0.1);
            num += y.abs() * w;
            den += w;
        }
        assert!((v - num / den).abs() < 1e-5, "{v} vs {}", num / den);
        assert!(discrete_lipschitz_within(&out, &region) <= 1.0 + 1e-9);
    }

    #[test]
    fn lipschitz_non_expansion_and_value_closeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let g = TangentGrid::new(&[33, 33], &[0.03, 0.03], &[0.0, 0.0]).unwrap();
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = GridField::new(g.clone(), vals).unwrap();
            let m = Mollifier::new(&g, rng.gen_range(0.03..0.2)).unwrap();
            let region = fitted_region(&g, &m);
            let out = mollify(&f, &m, &region).unwrap();
            assert!(discrete_lipschitz_within(&out, &region) <= discrete_lipschitz_within(&f, &region) + 1e-9);
        }
        let g = TangentGrid::new(&[201, 201], &[0.005, 0.005], &[-0.5, -0.5]).unwrap();
        let f = GridField::from_fn(g.clone(), |x| (x[0] * x[0] + x[1] * x[1]).sqrt() + 0.5 * x[0].abs()).unwrap();
        let k = 1.5;
        let rho = 0.05;
        let m = Mollifier::new(&g, rho).unwrap();
        let region = fitted_region(&g, &m);
        let out = mollify(&f, &m, &region).unwrap();
        assert!(out.max_abs_diff(&f) <= k * rho + 0.005 * k);
    }

    #[test]
    fn gradient_closeness_on_envelope_output() {
        let g = TangentGrid::new(&[2001], &[0.001], &[-1.0]).unwrap();
        let f = GridField::from_fn(g.clone(), |x| x[0].abs() - (2.0 * x[0]).sin() * 0.3).unwrap();
        let p = EnvelopeParams::new(0.1, 0.05).unwrap();
        let ll = lasry_lions(&f, &p).unwrap();
        let rho = 0.01;
        let m = Mollifier::new(&g, rho).unwrap();
        let region = fitted_region(&g, &m);
        let out = mollify(&ll, &m, &region).unwrap();
        let bound = rho * (1.0 / p.mu).max(1.0 / p.lambda) + 1e-6;
        for &i in NodeSet::interior(&g, m.reach[0] + 1).members.iter() {
            let a = discrete_gradient(&out, i).value[0];
            let b = discrete_gradient(&ll, i).value[0];
            assert!((a - b).abs() <= bound, "{} > {bound}", (a - b).abs());
        }
    }

    #[test]
    fn margin_and_radius_errors() {
        let g = TangentGrid::new(&[21], &[0.05], &[0.0]).unwrap();
        let f = GridField::constant(g.clone(), 0.0).unwrap();
        let m = Mollifier::new(&g, 0.2).unwrap();
        assert!(matches!(mollify(&f, &m, &NodeSet::all(&g)), Err(Error::Margin { axis: 0, .. })));
        assert!((choose_radius(&f, 0.01, 1.0, 0.5, 1.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(choose_radius(&f, 0.01, 0.0, 0.5, 0.25).unwrap(), 0.25);
        assert_eq!(choose_radius(&f, 1e9, 1.0, 0.5, 1.0).unwrap(), 0.5);
        assert!(matches!(choose_radius(&f, 0.01, 1.0, 0.01, 1.0), Err(Error::Radius { .. })));
    }

    #[test]
    fn tiny_radius_is_identity() {
        let g = TangentGrid::new(&[11, 11], &[0.1, 0.1], &[0.0, 0.0]).unwrap();
        let m = Mollifier::new(&g, 0.05).unwrap();
        assert!(m.is_identity());
        let f = GridField::from_fn(g.clone(), |x| x[0] * x[1]).unwrap();
        assert_eq!(mollify(&f, &m, &NodeSet::all(&g)).unwrap(), f);
    }
}
