//! Analytic model manifolds: Euclidean boxes, round spheres, flat tori and the
//! Poincaré ball, each with closed-form distance, exponential and logarithm.
//!
//! Tangent vectors are always expressed in an orthonormal frame, so the
//! Euclidean norm of a [`Tangent`] is its Riemannian length.

mod chart;
mod cover;
mod region;

pub use chart::{chart_radius, Chart, Frame};
pub use cover::{build_cover, CoverAtlas, CoverParams};
pub use region::Region;
pub(crate) use region::uniform_ball;

use serde::{Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Largest coordinate tuple length (the 3-sphere lives in R^4).
pub const MAX_AMBIENT: usize = 4;
/// Largest intrinsic dimension.
pub const MAX_DIM: usize = 3;

macro_rules! small_vector {
    ($(#[$meta:meta])* $name:ident, $cap:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq)]
        pub struct $name {
            buf: [f64; $cap],
            len: u8,
        }

        impl $name {
            /// Panics if `values` is longer than the fixed capacity.
            pub fn new(values: &[f64]) -> Self {
                assert!(
                    values.len() <= $cap,
                    concat!(stringify!($name), " holds at most {} components, got {}"),
                    $cap,
                    values.len()
                );
                let mut buf = [0.0; $cap];
                buf[..values.len()].copy_from_slice(values);
                Self { buf, len: values.len() as u8 }
            }

            pub fn zeros(len: usize) -> Self {
                assert!(len <= $cap);
                Self { buf: [0.0; $cap], len: len as u8 }
            }

            #[inline]
            pub fn len(&self) -> usize {
                self.len as usize
            }

            #[inline]
            pub fn is_empty(&self) -> bool {
                self.len == 0
            }

            #[inline]
            pub fn as_slice(&self) -> &[f64] {
                &self.buf[..self.len as usize]
            }

            #[inline]
            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.buf[..self.len as usize]
            }

            pub fn norm(&self) -> f64 {
                dot(self.as_slice(), self.as_slice()).sqrt()
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{:?}", stringify!($name), self.as_slice())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                self.as_slice().serialize(s)
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.as_slice()[i]
            }
        }
    };
}

small_vector!(
    /// A point in the model's coordinates: Cartesian for Euclidean space and the
    /// Poincaré ball, wrapped coordinates for the torus, ambient coordinates on
    /// the sphere of the model's radius.
    Point,
    MAX_AMBIENT
);

small_vector!(
    /// A tangent vector in an orthonormal frame.
    Tangent,
    MAX_DIM
);

impl Point {
    pub fn coords(&self) -> &[f64] {
        self.as_slice()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldModel {
    /// R^dim; `lo`/`hi` bound the default region.
    Euclidean { lo: Vec<f64>, hi: Vec<f64> },
    /// Round sphere S^dim of the given radius embedded in R^(dim+1).
    Sphere { dim: usize, radius: f64 },
    /// R^d modulo the period lattice.
    FlatTorus { periods: Vec<f64> },
    /// Poincaré ball model of hyperbolic space with curvature -1/scale².
    PoincareDisk { dim: usize, scale: f64 },
}

impl ManifoldModel {
    pub fn euclidean(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let m = ManifoldModel::Euclidean { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        let m = ManifoldModel::Sphere { dim, radius };
        m.validate()?;
        Ok(m)
    }

    pub fn flat_torus(periods: Vec<f64>) -> Result<Self> {
        let m = ManifoldModel::FlatTorus { periods };
        m.validate()?;
        Ok(m)
    }

    pub fn poincare_disk(dim: usize, scale: f64) -> Result<Self> {
        let m = ManifoldModel::PoincareDisk { dim, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Parameter(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            ManifoldModel::Euclidean { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::Parameter("box bounds differ in length".into()));
                }
                for (a, b) in lo.iter().zip(hi) {
                    positive("box width", b - a)?;
                }
                Ok(())
            }
            ManifoldModel::Sphere { radius, .. } => positive("sphere radius", *radius),
            ManifoldModel::FlatTorus { periods } => {
                periods.iter().try_for_each(|&p| positive("torus period", p))
            }
            ManifoldModel::PoincareDisk { scale, .. } => positive("disk scale", *scale),
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            ManifoldModel::Euclidean { lo, .. } => lo.len(),
            ManifoldModel::Sphere { dim, .. } | ManifoldModel::PoincareDisk { dim, .. } => *dim,
            ManifoldModel::FlatTorus { periods } => periods.len(),
        }
    }

    /// Length of a coordinate tuple.
    pub fn coord_len(&self) -> usize {
        match self {
            ManifoldModel::Sphere { dim, .. } => dim + 1,
            _ => self.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldModel::Euclidean { .. } => "euclidean",
            ManifoldModel::Sphere { .. } => "sphere",
            ManifoldModel::FlatTorus { .. } => "flat_torus",
            ManifoldModel::PoincareDisk { .. } => "poincare_disk",
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.len() != self.coord_len() {
            return Err(Error::Domain(format!(
                "{} expects {} coordinates, got {}",
                self.name(),
                self.coord_len(),
                p.len()
            )));
        }
        if p.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinates {p:?}")));
        }
        match self {
            ManifoldModel::Sphere { radius, .. } => {
                let n = p.norm();
                if (n - radius).abs() > 1e-9 * radius {
                    return Err(Error::Domain(format!(
                        "point {p:?} has norm {n}, not on the sphere of radius {radius}"
                    )));
                }
            }
            ManifoldModel::PoincareDisk { .. } => {
                if p.norm() >= 1.0 {
                    return Err(Error::Domain(format!("point {p:?} is outside the unit ball")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Closed-form geodesic distance; no validation.
    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        let (a, b) = (p.as_slice(), q.as_slice());
        match self {
            ManifoldModel::Euclidean { .. } => euclid(a, b),
            ManifoldModel::Sphere { radius, .. } => {
                // Half-angle form stays accurate near 0 and near antipodes.
                let mut diff = 0.0;
                let mut sum = 0.0;
                for (x, y) in a.iter().zip(b) {
                    diff += (x - y) * (x - y);
                    sum += (x + y) * (x + y);
                }
                radius * 2.0 * diff.sqrt().atan2(sum.sqrt())
            }
            ManifoldModel::FlatTorus { periods } => {
                let mut s = 0.0;
                for ((x, y), l) in a.iter().zip(b).zip(periods) {
                    let d = wrap_centered(y - x, *l);
                    s += d * d;
                }
                s.sqrt()
            }
            ManifoldModel::PoincareDisk { scale, .. } => {
                let xy = dot(a, b);
                let xx = dot(a, a);
                let yy = dot(b, b);
                let num = euclid(a, b);
                let den = (1.0 - 2.0 * xy + xx * yy).max(0.0).sqrt();
                if num == 0.0 {
                    return 0.0;
                }
                2.0 * scale * (num / den).min(1.0).atanh()
            }
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldModel::Euclidean { .. } | ManifoldModel::PoincareDisk { .. } => f64::INFINITY,
            ManifoldModel::Sphere { radius, .. } => PI * radius,
            ManifoldModel::FlatTorus { periods } => {
                periods.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0
            }
        }
    }

    /// Default chart-radius cap: a third of the injectivity radius where it is
    /// finite, else 1.
    pub fn default_max_radius(&self) -> f64 {
        let inj = self.injectivity_radius();
        if inj.is_finite() {
            inj / 3.0
        } else {
            1.0
        }
    }

    /// Bi-Lipschitz constant of the exponential map on the tangent ball of
    /// radius `rho`.
    pub fn distortion(&self, rho: f64) -> f64 {
        match self {
            ManifoldModel::Euclidean { .. } => 1.0,
            ManifoldModel::FlatTorus { periods } => {
                let lmin = periods.iter().cloned().fold(f64::INFINITY, f64::min);
                if rho <= lmin / 4.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            ManifoldModel::Sphere { radius, .. } => {
                let t = rho / radius;
                if t == 0.0 {
                    1.0
                } else if t > PI / 2.0 {
                    f64::INFINITY
                } else {
                    t / t.sin()
                }
            }
            ManifoldModel::PoincareDisk { scale, .. } => {
                let t = rho / scale;
                if t == 0.0 {
                    1.0
                } else {
                    t.sinh() / t
                }
            }
        }
    }

    /// Largest tangent-ball radius on which exp is (1+ε')-bi-Lipschitz,
    /// before any cap.
    pub fn distortion_radius(&self, eps_prime: f64) -> f64 {
        let target = 1.0 + eps_prime;
        match self {
            ManifoldModel::Euclidean { .. } => f64::INFINITY,
            ManifoldModel::FlatTorus { periods } => {
                periods.iter().cloned().fold(f64::INFINITY, f64::min) / 4.0
            }
            ManifoldModel::Sphere { radius, .. } => {
                // Geodesic balls stay convex up to a quarter great circle.
                if PI / 2.0 <= target {
                    return radius * PI / 2.0;
                }
                radius * bisect_increasing(|t| t / t.sin(), target, 0.0, PI / 2.0)
            }
            ManifoldModel::PoincareDisk { scale, .. } => {
                let mut hi: f64 = 1.0;
                while hi.sinh() / hi < target {
                    hi *= 2.0;
                }
                scale * bisect_increasing(|t| t.sinh() / t, target, 0.0, hi)
            }
        }
    }

    /// Orthonormal tangent frame at `p`.
    pub fn frame_at(&self, p: &Point) -> Frame {
        match self {
            ManifoldModel::Sphere { dim, radius } => Frame::sphere(p, *dim, *radius),
            _ => Frame::identity(self.dim()),
        }
    }

    /// Exponential map at `base` in `frame`; no validation.
    pub fn exp(&self, base: &Point, frame: &Frame, v: &Tangent) -> Point {
        let b = base.as_slice();
        match self {
            ManifoldModel::Euclidean { .. } => {
                let mut out = *base;
                for (o, x) in out.as_mut_slice().iter_mut().zip(v.as_slice()) {
                    *o += x;
                }
                out
            }
            ManifoldModel::FlatTorus { periods } => {
                let mut out = *base;
                for ((o, x), l) in out.as_mut_slice().iter_mut().zip(v.as_slice()).zip(periods) {
                    *o = (*o + x).rem_euclid(*l);
                }
                out
            }
            ManifoldModel::Sphere { radius, .. } => {
                let t = v.norm();
                if t == 0.0 {
                    return *base;
                }
                let amb = frame.to_ambient(v);
                let (s, c) = (t / radius).sin_cos();
                let mut out = Point::zeros(b.len());
                for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
                    *o = c * b[i] + radius * s * amb[i] / t;
                }
                let n = out.norm();
                for o in out.as_mut_slice() {
                    *o *= radius / n;
                }
                out
            }
            ManifoldModel::PoincareDisk { scale, .. } => {
                let t = v.norm();
                if t == 0.0 {
                    return *base;
                }
                let k = (t / (2.0 * scale)).tanh() / t;
                let mut y = Point::zeros(b.len());
                for (o, x) in y.as_mut_slice().iter_mut().zip(v.as_slice()) {
                    *o = k * x;
                }
                mobius_add(base, &y)
            }
        }
    }

    /// Logarithm map at `base` in `frame`; no validation.
    pub fn log(&self, base: &Point, frame: &Frame, q: &Point) -> Tangent {
        let (b, c) = (base.as_slice(), q.as_slice());
        match self {
            ManifoldModel::Euclidean { .. } => {
                let mut out = Tangent::zeros(b.len());
                for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
                    *o = c[i] - b[i];
                }
                out
            }
            ManifoldModel::FlatTorus { periods } => {
                let mut out = Tangent::zeros(b.len());
                for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
                    *o = wrap_centered(c[i] - b[i], periods[i]);
                }
                out
            }
            ManifoldModel::Sphere { radius, dim } => {
                let r2 = radius * radius;
                let pq = dot(b, c) / r2;
                let mut u = [0.0; MAX_AMBIENT];
                for i in 0..b.len() {
                    u[i] = c[i] - pq * b[i];
                }
                let un = dot(&u[..b.len()], &u[..b.len()]).sqrt();
                let mut out = Tangent::zeros(*dim);
                if un == 0.0 {
                    return out;
                }
                let len = self.distance(base, q);
                for (k, o) in out.as_mut_slice().iter_mut().enumerate() {
                    *o = dot(&u[..b.len()], frame.vector(k)) / un * len;
                }
                out
            }
            ManifoldModel::PoincareDisk { scale, dim } => {
                let mut neg = *base;
                for x in neg.as_mut_slice() {
                    *x = -*x;
                }
                let y = mobius_add(&neg, q);
                let n = y.norm();
                let mut out = Tangent::zeros(*dim);
                if n == 0.0 {
                    return out;
                }
                let k = 2.0 * scale * n.min(1.0).atanh() / n;
                for (o, x) in out.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *o = k * x;
                }
                out
            }
        }
    }
}

/// Checked geodesic distance.
pub fn geodesic_distance(model: &ManifoldModel, p: &Point, q: &Point) -> Result<f64> {
    model.check_point(p)?;
    model.check_point(q)?;
    Ok(model.distance(p, q))
}

#[inline]
fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Representative of `d` modulo `l` in [-l/2, l/2).
#[inline]
fn wrap_centered(d: f64, l: f64) -> f64 {
    let w = (d + l / 2.0).rem_euclid(l) - l / 2.0;
    // rem_euclid can round up to l itself.
    if w >= l / 2.0 {
        w - l
    } else {
        w
    }
}

fn mobius_add(x: &Point, y: &Point) -> Point {
    let (a, b) = (x.as_slice(), y.as_slice());
    let xy = dot(a, b);
    let xx = dot(a, a);
    let yy = dot(b, b);
    let ca = 1.0 + 2.0 * xy + yy;
    let cb = 1.0 - xx;
    let den = 1.0 + 2.0 * xy + xx * yy;
    let mut out = Point::zeros(a.len());
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        *o = (ca * a[i] + cb * b[i]) / den;
    }
    out
}

/// Largest `t` in [lo, hi] with `f(t) <= target` for increasing `f`.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<ManifoldModel> {
        vec![
            ManifoldModel::euclidean(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            ManifoldModel::sphere(2, 1.0).unwrap(),
            ManifoldModel::sphere(2, 2.5).unwrap(),
            ManifoldModel::flat_torus(vec![2.0 * PI, 3.0]).unwrap(),
            ManifoldModel::poincare_disk(2, 1.0).unwrap(),
            ManifoldModel::poincare_disk(3, 0.7).unwrap(),
        ]
    }

    fn random_point(model: &ManifoldModel, rng: &mut ChaCha8Rng) -> Point {
        Region::Whole
            .sample_random(model, 1, rng)
            .or_else(|_| {
                let c = Point::zeros(model.coord_len());
                Region::Ball { center: c, radius: 2.0 }.sample_random(model, 1, rng)
            })
            .unwrap()[0]
    }

    #[test]
    fn distance_examples() {
        let e = ManifoldModel::euclidean(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let d = geodesic_distance(&e, &Point::new(&[0.0, 0.0]), &Point::new(&[3.0, 4.0])).unwrap();
        assert_eq!(d, 5.0);

        let s = ManifoldModel::sphere(2, 1.0).unwrap();
        let n = Point::new(&[0.0, 0.0, 1.0]);
        let south = Point::new(&[0.0, 0.0, -1.0]);
        assert!((geodesic_distance(&s, &n, &south).unwrap() - PI).abs() < 1e-15);

        let h = ManifoldModel::poincare_disk(2, 1.0).unwrap();
        let d = geodesic_distance(&h, &Point::new(&[0.0, 0.0]), &Point::new(&[0.5, 0.0])).unwrap();
        // Midpoint-rule quadrature of 2/(1-t²) along the radius.
        let n = 200_000;
        let quad: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * 0.5 / n as f64;
                2.0 / (1.0 - t * t) * 0.5 / n as f64
            })
            .sum();
        assert!((d - quad).abs() < 1e-9, "{d} vs {quad}");
        assert!((d - 1.098612).abs() < 1e-6);
    }

    #[test]
    fn invalid_points_are_rejected() {
        let s = ManifoldModel::sphere(2, 1.0).unwrap();
        assert!(matches!(s.check_point(&Point::new(&[0.0, 0.0, 1.1])), Err(Error::Domain(_))));
        assert!(s.check_point(&Point::new(&[0.0, 1.0])).is_err());
        let h = ManifoldModel::poincare_disk(2, 1.0).unwrap();
        assert!(h.check_point(&Point::new(&[0.8, 0.7])).is_err());
        assert!(ManifoldModel::sphere(4, 1.0).is_err());
        assert!(ManifoldModel::sphere(2, -1.0).is_err());
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in models() {
            for _ in 0..1000 {
                let p = random_point(&model, &mut rng);
                let q = random_point(&model, &mut rng);
                let w = random_point(&model, &mut rng);
                let pq = model.distance(&p, &q);
                let qp = model.distance(&q, &p);
                assert!((pq - qp).abs() <= 1e-12, "{model:?} symmetry {pq} {qp}");
                let pw = model.distance(&p, &w);
                let wq = model.distance(&w, &q);
                assert!(pq <= pw + wq + 1e-9, "{model:?} triangle");
                assert_eq!(model.distance(&p, &p), 0.0);
            }
        }
    }

    #[test]
    fn random_sphere_pair_distance_matches_arccos() {
        let s = ManifoldModel::sphere(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_point(&s, &mut rng);
            let q = random_point(&s, &mut rng);
            let c = dot(p.as_slice(), q.as_slice()).clamp(-1.0, 1.0);
            assert!((s.distance(&p, &q) - c.acos()).abs() < 1e-7);
        }
        let _ = rng.gen::<f64>();
    }

    #[test]
    fn torus_wrap_is_centered() {
        assert_eq!(wrap_centered(0.75, 1.0), -0.25);
        assert_eq!(wrap_centered(-0.75, 1.0), 0.25);
        assert!(wrap_centered(0.5, 1.0) >= -0.5 && wrap_centered(0.5, 1.0) < 0.5);
    }
}
