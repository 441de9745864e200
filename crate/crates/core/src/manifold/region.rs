use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;

use super::{ManifoldModel, Point, Tangent};
use crate::error::{Error, Result};

/// A compact piece of a model manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// The model's natural compact domain: the whole sphere or torus, or the
    /// bounding box of a Euclidean model. Not available for the Poincaré ball.
    Whole,
    /// Closed geodesic ball.
    Ball { center: Point, radius: f64 },
    /// Coordinate box (Euclidean, torus or Poincaré coordinates).
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn validate(&self, model: &ManifoldModel) -> Result<()> {
        match self {
            Region::Whole => match model {
                ManifoldModel::PoincareDisk { .. } => Err(Error::Parameter(
                    "the Poincaré ball is not compact; use a ball or box region".into(),
                )),
                _ => Ok(()),
            },
            Region::Ball { center, radius } => {
                model.check_point(center)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Parameter(format!("region radius must be positive, got {radius}")));
                }
                Ok(())
            }
            Region::Box { lo, hi } => {
                if matches!(model, ManifoldModel::Sphere { .. }) {
                    return Err(Error::Parameter("box regions are not defined on the sphere".into()));
                }
                if lo.len() != model.dim() || hi.len() != model.dim() {
                    return Err(Error::Parameter("region box has the wrong dimension".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Parameter("region box bounds must satisfy lo < hi".into()));
                }
                if let ManifoldModel::PoincareDisk { .. } = model {
                    let far: f64 = lo.iter().zip(hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum();
                    if far.sqrt() >= 1.0 {
                        return Err(Error::Parameter("region box leaves the unit ball".into()));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, model: &ManifoldModel, p: &Point) -> bool {
        match self {
            Region::Whole => match model {
                ManifoldModel::Euclidean { lo, hi } => in_box(p, lo, hi),
                _ => true,
            },
            Region::Ball { center, radius } => model.distance(center, p) <= *radius,
            Region::Box { lo, hi } => in_box(p, lo, hi),
        }
    }

    fn coordinate_box(&self, model: &ManifoldModel) -> Option<(Vec<f64>, Vec<f64>)> {
        match (self, model) {
            (Region::Box { lo, hi }, _) => Some((lo.clone(), hi.clone())),
            (Region::Whole, ManifoldModel::Euclidean { lo, hi }) => Some((lo.clone(), hi.clone())),
            (Region::Whole, ManifoldModel::FlatTorus { periods }) => {
                Some((vec![0.0; periods.len()], periods.clone()))
            }
            _ => None,
        }
    }

    /// Deterministic, roughly uniform point set of about `n` points: a
    /// Fibonacci lattice on the 2-sphere, a tensor grid on boxes, and the
    /// image of a tangent-ball grid for geodesic balls.
    pub fn sample_lattice(&self, model: &ManifoldModel, n: usize) -> Result<Vec<Point>> {
        self.validate(model)?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let dim = model.dim();
        if let Some((lo, hi)) = self.coordinate_box(model) {
            let per_axis = ((n as f64).powf(1.0 / dim as f64).round() as usize).max(1);
            let wrap = matches!(model, ManifoldModel::FlatTorus { .. });
            let mut out = Vec::new();
            for idx in tensor_indices(dim, per_axis) {
                let mut p = Point::zeros(dim);
                for k in 0..dim {
                    // Cell centres; they avoid duplicating seam points on the torus.
                    let t = if wrap || per_axis == 1 {
                        (idx[k] as f64 + 0.5) / per_axis as f64
                    } else {
                        idx[k] as f64 / (per_axis - 1) as f64
                    };
                    p.as_mut_slice()[k] = lo[k] + t * (hi[k] - lo[k]);
                }
                if let ManifoldModel::FlatTorus { periods } = model {
                    for (x, l) in p.as_mut_slice().iter_mut().zip(periods) {
                        *x = x.rem_euclid(*l);
                    }
                }
                out.push(p);
            }
            return Ok(out);
        }
        match (self, model) {
            (Region::Whole, ManifoldModel::Sphere { dim: 2, radius }) => {
                let golden = PI * (3.0 - 5f64.sqrt());
                Ok((0..n)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * i as f64;
                        Point::new(&[radius * r * phi.cos(), radius * r * phi.sin(), radius * z])
                    })
                    .collect())
            }
            (Region::Whole, ManifoldModel::Sphere { dim: 1, radius }) => Ok((0..n)
                .map(|i| {
                    let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                    Point::new(&[radius * t.cos(), radius * t.sin()])
                })
                .collect()),
            (Region::Whole, ManifoldModel::Sphere { dim, radius }) => {
                // No simple lattice on S^3; a fixed-seed draw keeps it deterministic.
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                sphere_random(*dim, *radius, n, &mut rng)
            }
            (Region::Ball { center, radius }, _) => {
                let per_axis = ((n as f64 * ball_fraction(dim).recip()).powf(1.0 / dim as f64).ceil() as usize).max(2);
                let frame = model.frame_at(center);
                let mut out = vec![*center];
                for idx in tensor_indices(dim, per_axis) {
                    let mut v = Tangent::zeros(dim);
                    for k in 0..dim {
                        v.as_mut_slice()[k] = radius * (2.0 * idx[k] as f64 / (per_axis - 1) as f64 - 1.0);
                    }
                    let len = v.norm();
                    if len > 0.0 && len <= *radius {
                        out.push(model.exp(center, &frame, &v));
                    }
                }
                Ok(out)
            }
            _ => unreachable!("validated regions always have a sampler"),
        }
    }

    /// `n` independent random points. Boxes and spheres are sampled
    /// uniformly; geodesic balls through exp of a uniform tangent ball.
    pub fn sample_random<R: Rng>(&self, model: &ManifoldModel, n: usize, rng: &mut R) -> Result<Vec<Point>> {
        self.validate(model)?;
        let dim = model.dim();
        if let Some((lo, hi)) = self.coordinate_box(model) {
            return Ok((0..n)
                .map(|_| {
                    let mut p = Point::zeros(dim);
                    for k in 0..dim {
                        p.as_mut_slice()[k] = rng.gen_range(lo[k]..hi[k]);
                    }
                    p
                })
                .collect());
        }
        match (self, model) {
            (Region::Whole, ManifoldModel::Sphere { dim, radius }) => sphere_random(*dim, *radius, n, rng),
            (Region::Ball { center, radius }, _) => {
                let frame = model.frame_at(center);
                Ok((0..n)
                    .map(|_| {
                        let v = uniform_ball(dim, *radius, rng);
                        model.exp(center, &frame, &v)
                    })
                    .collect())
            }
            _ => unreachable!("validated regions always have a sampler"),
        }
    }
}

fn in_box(p: &Point, lo: &[f64], hi: &[f64]) -> bool {
    p.as_slice().iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| a <= x && x <= b)
}

/// Volume of the unit ball relative to its bounding cube.
fn ball_fraction(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => PI / 4.0,
        _ => PI / 6.0,
    }
}

pub(crate) fn tensor_indices(dim: usize, per_axis: usize) -> impl Iterator<Item = [usize; 3]> {
    let total = per_axis.pow(dim as u32);
    (0..total).map(move |mut flat| {
        let mut idx = [0usize; 3];
        for k in (0..dim).rev() {
            idx[k] = flat % per_axis;
            flat /= per_axis;
        }
        idx
    })
}

fn sphere_random<R: Rng>(dim: usize, radius: f64, n: usize, rng: &mut R) -> Result<Vec<Point>> {
    Ok((0..n)
        .map(|_| loop {
            let mut p = Point::zeros(dim + 1);
            for x in p.as_mut_slice() {
                *x = rng.sample(StandardNormal);
            }
            let len = p.norm();
            if len > 1e-12 {
                for x in p.as_mut_slice() {
                    *x *= radius / len;
                }
                break p;
            }
        })
        .collect())
}

pub(crate) fn uniform_ball<R: Rng>(dim: usize, radius: f64, rng: &mut R) -> Tangent {
    loop {
        let mut v = Tangent::zeros(dim);
        for x in v.as_mut_slice() {
            *x = rng.gen_range(-radius..radius);
        }
        if v.norm() < radius {
            return v;
        }
    }
}
