use serde::Serialize;

use super::{dot, ManifoldModel, Point, Tangent, MAX_AMBIENT, MAX_DIM};
use crate::error::{Error, Result};

/// Orthonormal basis of a tangent space, stored as ambient vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    vectors: [[f64; MAX_AMBIENT]; MAX_DIM],
    dim: u8,
    ambient: u8,
}

impl Frame {
    pub fn identity(dim: usize) -> Self {
        let mut vectors = [[0.0; MAX_AMBIENT]; MAX_DIM];
        for (k, v) in vectors.iter_mut().enumerate().take(dim) {
            v[k] = 1.0;
        }
        Frame { vectors, dim: dim as u8, ambient: dim as u8 }
    }

    /// Gram-Schmidt on the coordinate axes, dropping the axis most aligned
    /// with `p` so the remaining ones are well conditioned.
    pub(crate) fn sphere(p: &Point, dim: usize, radius: f64) -> Self {
        let n = dim + 1;
        let mut normal = [0.0; MAX_AMBIENT];
        for i in 0..n {
            normal[i] = p[i] / radius;
        }
        let drop = (0..n)
            .max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()))
            .unwrap_or(0);
        let mut basis: Vec<[f64; MAX_AMBIENT]> = vec![normal];
        for axis in (0..n).filter(|&i| i != drop) {
            let mut v = [0.0; MAX_AMBIENT];
            v[axis] = 1.0;
            // Two passes keep the basis orthonormal to rounding.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v[..n], &b[..n]);
                    for i in 0..n {
                        v[i] -= c * b[i];
                    }
                }
            }
            let len = dot(&v[..n], &v[..n]).sqrt();
            for x in v.iter_mut().take(n) {
                *x /= len;
            }
            basis.push(v);
        }
        let mut vectors = [[0.0; MAX_AMBIENT]; MAX_DIM];
        vectors[..dim].copy_from_slice(&basis[1..]);
        Frame { vectors, dim: dim as u8, ambient: n as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k][..self.ambient as usize]
    }

    pub fn to_ambient(&self, v: &Tangent) -> [f64; MAX_AMBIENT] {
        let mut out = [0.0; MAX_AMBIENT];
        for (k, c) in v.as_slice().iter().enumerate() {
            for (o, e) in out.iter_mut().zip(self.vector(k)) {
                *o += c * e;
            }
        }
        out
    }
}

/// Exponential chart centered at `center`; the chart ball has radius 3δ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chart {
    #[serde(skip)]
    pub model: ManifoldModel,
    pub center: Point,
    #[serde(skip)]
    pub frame: Frame,
    pub delta: f64,
    /// The bi-Lipschitz constant 1+ε' of exp on the chart ball.
    pub distortion: f64,
}

impl Chart {
    pub fn new(model: &ManifoldModel, center: Point, delta: f64, eps_prime: f64) -> Result<Self> {
        model.check_point(&center)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("chart radius must be positive, got {delta}")));
        }
        if model.distortion(3.0 * delta) > 1.0 + eps_prime {
            return Err(Error::Parameter(format!(
                "chart radius {delta} exceeds the distortion radius for eps' = {eps_prime}"
            )));
        }
        Ok(Chart {
            model: model.clone(),
            frame: model.frame_at(&center),
            center,
            delta,
            distortion: 1.0 + eps_prime,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn eps_prime(&self) -> f64 {
        self.distortion - 1.0
    }

    pub fn ball_radius(&self) -> f64 {
        3.0 * self.delta
    }

    pub fn exp(&self, v: &Tangent) -> Result<Point> {
        let n = v.norm();
        if v.len() != self.dim() {
            return Err(Error::Domain(format!("tangent vector of length {} in a {}-dimensional chart", v.len(), self.dim())));
        }
        if n >= self.ball_radius() {
            return Err(Error::OutOfChart { what: "tangent vector", norm: n, limit: self.ball_radius() });
        }
        Ok(self.exp_unchecked(v))
    }

    pub fn log(&self, q: &Point) -> Result<Tangent> {
        self.model.check_point(q)?;
        let d = self.model.distance(&self.center, q);
        if d >= self.ball_radius() {
            return Err(Error::OutOfChart { what: "point", norm: d, limit: self.ball_radius() });
        }
        Ok(self.log_unchecked(q))
    }

    #[inline]
    pub fn exp_unchecked(&self, v: &Tangent) -> Point {
        self.model.exp(&self.center, &self.frame, v)
    }

    #[inline]
    pub fn log_unchecked(&self, q: &Point) -> Tangent {
        self.model.log(&self.center, &self.frame, q)
    }

    #[inline]
    pub fn distance_to_center(&self, q: &Point) -> f64 {
        self.model.distance(&self.center, q)
    }
}

/// Largest δ ≤ `max_radius` such that exp is (1+ε')-bi-Lipschitz on the
/// 3δ tangent ball. The closed-form radii do not depend on the center.
pub fn chart_radius(model: &ManifoldModel, eps_prime: f64, max_radius: f64) -> Result<f64> {
    if !(eps_prime > 0.0) {
        return Err(Error::Parameter(format!("eps' must be positive, got {eps_prime}")));
    }
    if !(max_radius > 0.0) {
        return Err(Error::Parameter(format!("radius cap must be positive, got {max_radius}")));
    }
    let rho = model.distortion_radius(eps_prime);
    let mut delta = (rho / 3.0).min(max_radius);
    // 3·(ρ/3) can round above ρ.
    while model.distortion(3.0 * delta) > 1.0 + eps_prime {
        delta *= 1.0 - 1e-15;
    }
    Ok(delta)
}
