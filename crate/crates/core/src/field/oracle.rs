use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point};

pub type CustomFn = Arc<dyn Fn(&ManifoldModel, &Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FunctionKind {
    Constant(f64),
    DistanceToPoint(Point),
    /// Distance to the nearest point of a finite set.
    DistanceToSet(Vec<Point>),
    /// `clamp(offset + slope·d(p, center), lo, hi)`.
    Ramp { center: Point, offset: f64, slope: f64, lo: f64, hi: f64 },
    /// Piecewise-linear profile of `d(p, center)` through `knots` (sorted by
    /// abscissa), constant beyond the first and last knot.
    PiecewiseLinear { center: Point, knots: Vec<(f64, f64)> },
    Custom(CustomFn),
}

impl fmt::Debug for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionKind::Constant(c) => write!(f, "Constant({c})"),
            FunctionKind::DistanceToPoint(p) => write!(f, "DistanceToPoint({p:?})"),
            FunctionKind::DistanceToSet(s) => write!(f, "DistanceToSet({s:?})"),
            FunctionKind::Ramp { center, offset, slope, lo, hi } => {
                write!(f, "Ramp {{ center: {center:?}, offset: {offset}, slope: {slope}, lo: {lo}, hi: {hi} }}")
            }
            FunctionKind::PiecewiseLinear { center, knots } => {
                write!(f, "PiecewiseLinear {{ center: {center:?}, knots: {knots:?} }}")
            }
            FunctionKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A deterministic function on a model manifold together with its declared
/// Lipschitz constant.
#[derive(Debug, Clone)]
pub struct FunctionOracle {
    pub kind: FunctionKind,
    pub lipschitz: f64,
}

impl FunctionOracle {
    pub fn constant(c: f64) -> Self {
        FunctionOracle { kind: FunctionKind::Constant(c), lipschitz: 0.0 }
    }

    pub fn distance_to_point(p: Point) -> Self {
        FunctionOracle { kind: FunctionKind::DistanceToPoint(p), lipschitz: 1.0 }
    }

    pub fn distance_to_set(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("distance to an empty set".into()));
        }
        Ok(FunctionOracle { kind: FunctionKind::DistanceToSet(points), lipschitz: 1.0 })
    }

    pub fn ramp(center: Point, offset: f64, slope: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Parameter(format!("ramp clamp [{lo}, {hi}] is empty")));
        }
        Ok(FunctionOracle {
            kind: FunctionKind::Ramp { center, offset, slope, lo, hi },
            lipschitz: slope.abs(),
        })
    }

    pub fn piecewise_linear(center: Point, knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Parameter("piecewise-linear profile needs at least one knot".into()));
        }
        let mut k = 0.0f64;
        for w in knots.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if !(x1 > x0) {
                return Err(Error::Parameter("knot abscissae must increase strictly".into()));
            }
            k = k.max(((y1 - y0) / (x1 - x0)).abs());
        }
        Ok(FunctionOracle { kind: FunctionKind::PiecewiseLinear { center, knots }, lipschitz: k })
    }

    pub fn custom(lipschitz: f64, f: impl Fn(&ManifoldModel, &Point) -> f64 + Send + Sync + 'static) -> Self {
        FunctionOracle { kind: FunctionKind::Custom(Arc::new(f)), lipschitz }
    }

    pub fn with_lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = k;
        self
    }

    pub fn validate(&self, model: &ManifoldModel) -> Result<()> {
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::Parameter(format!("declared Lipschitz constant {} is invalid", self.lipschitz)));
        }
        match &self.kind {
            FunctionKind::DistanceToPoint(p) => model.check_point(p),
            FunctionKind::DistanceToSet(s) => s.iter().try_for_each(|p| model.check_point(p)),
            FunctionKind::Ramp { center, .. } | FunctionKind::PiecewiseLinear { center, .. } => {
                model.check_point(center)
            }
            FunctionKind::Constant(c) if !c.is_finite() => Err(Error::Parameter("constant must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, model: &ManifoldModel, p: &Point) -> f64 {
        match &self.kind {
            FunctionKind::Constant(c) => *c,
            FunctionKind::DistanceToPoint(q) => model.distance(p, q),
            FunctionKind::DistanceToSet(s) => s.iter().map(|q| model.distance(p, q)).fold(f64::INFINITY, f64::min),
            FunctionKind::Ramp { center, offset, slope, lo, hi } => {
                (offset + slope * model.distance(p, center)).clamp(*lo, *hi)
            }
            FunctionKind::PiecewiseLinear { center, knots } => profile(knots, model.distance(p, center)),
            FunctionKind::Custom(f) => f(model, p),
        }
    }
}

fn profile(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let j = knots.partition_point(|k| k.0 <= t);
    let (x0, y0) = knots[j - 1];
    let (x1, y1) = knots[j];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::pairwise_lipschitz;
    use crate::manifold::Region;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn declared_constants_bound_sampled_ones() {
        let m = ManifoldModel::sphere(2, 1.0).unwrap();
        let c = Point::new(&[0.0, 0.6, 0.8]);
        let oracles = vec![
            FunctionOracle::constant(3.0),
            FunctionOracle::distance_to_point(c),
            FunctionOracle::distance_to_set(vec![c, Point::new(&[1.0, 0.0, 0.0])]).unwrap(),
            FunctionOracle::ramp(c, 1.0, -2.0, 0.0, 1.0).unwrap(),
            FunctionOracle::piecewise_linear(c, vec![(0.0, 0.0), (0.5, 1.5), (1.0, 1.0), (2.0, 3.0)]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = Region::Whole.sample_random(&m, 4000, &mut rng).unwrap();
        let pairs: Vec<_> = pts.chunks(2).map(|w| (w[0], w[1])).collect();
        for o in &oracles {
            o.validate(&m).unwrap();
            let est = pairwise_lipschitz(&m, &|p| o.eval(&m, p), &pairs).unwrap_or(0.0);
            assert!(est <= o.lipschitz + 1e-9, "{:?}: {est} > {}", o.kind, o.lipschitz);
        }
        assert_eq!(oracles[4].lipschitz, 3.0);
    }

    #[test]
    fn profile_evaluation() {
        let k = [(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)];
        assert_eq!(profile(&k, -1.0), 1.0);
        assert_eq!(profile(&k, 0.5), 2.0);
        assert_eq!(profile(&k, 1.0), 3.0);
        assert_eq!(profile(&k, 1.5), 2.5);
        assert_eq!(profile(&k, 5.0), 2.0);
    }
}
