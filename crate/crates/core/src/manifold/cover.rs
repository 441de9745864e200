use serde::Serialize;

use super::{chart_radius, Chart, ManifoldModel, Point};
use crate::error::{Error, Result};
use crate::unity::PartitionBudget;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverParams {
    pub eps_prime: f64,
    /// Cap on δ; see [`ManifoldModel::default_max_radius`].
    pub max_radius: f64,
    /// Floor below which oscillation shrinking is reported as a failure.
    pub min_radius: f64,
    /// A sample counts as covered by chart n only when it lies within
    /// (1 − margin)·δ_n, so points between samples are covered too.
    pub coverage_margin: f64,
    /// Also shrink δ until |f(q) − f(p)| ≤ ε(p)/2 on the 3δ ball.
    pub value_oscillation: bool,
}

impl CoverParams {
    pub fn new(model: &ManifoldModel, eps_prime: f64) -> Self {
        CoverParams {
            eps_prime,
            max_radius: model.default_max_radius(),
            min_radius: 1e-4,
            coverage_margin: 0.15,
            value_oscillation: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverAtlas {
    pub charts: Vec<Chart>,
    /// ε(p_n) per chart.
    pub eps_center: Vec<f64>,
    pub budget: PartitionBudget,
    pub eps_prime: f64,
}

impl CoverAtlas {
    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    /// Index of the first chart whose δ-ball contains `p`.
    pub fn first_cover(&self, p: &Point) -> Option<usize> {
        self.charts.iter().position(|c| c.distance_to_center(p) < c.delta)
    }

    pub fn covers(&self, p: &Point) -> bool {
        self.first_cover(p).is_some()
    }
}

/// Greedy farthest-point cover of `samples`. Each radius starts at the
/// distortion radius and is shrunk so that ε(q) ≥ ε(p)/2 (and, if enabled,
/// |f(q) − f(p)| ≤ ε(p)/2) for every sample q in the 3δ ball.
pub fn build_cover(
    model: &ManifoldModel,
    samples: &[Point],
    params: &CoverParams,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    eps: &(dyn Fn(&Point) -> f64 + Sync),
) -> Result<CoverAtlas> {
    if !(0.0..1.0).contains(&params.coverage_margin) {
        return Err(Error::Parameter(format!("coverage margin {} outside [0, 1)", params.coverage_margin)));
    }
    let base = chart_radius(model, params.eps_prime, params.max_radius)?;
    for s in samples {
        model.check_point(s)?;
    }
    let fv: Vec<f64> = samples.iter().map(f).collect();
    let ev: Vec<f64> = samples.iter().map(eps).collect();
    if let Some(i) = ev.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Parameter(format!("tolerance at sample {i} is {}, must be positive", ev[i])));
    }

    let n = samples.len();
    // Distance to the nearest centre, in units of that centre's inner radius.
    let mut reach = vec![f64::INFINITY; n];
    let mut charts = Vec::new();
    let mut eps_center = Vec::new();
    let mut next = if n > 0 { Some(0) } else { None };

    while let Some(ci) = next {
        let p = samples[ci];
        let mut delta = base;
        let mut dist = Vec::with_capacity(n);
        for (j, q) in samples.iter().enumerate() {
            let d = model.distance(&p, q);
            dist.push(d);
            if d >= 3.0 * base || d == 0.0 {
                continue;
            }
            let bad_eps = ev[j] < ev[ci] / 2.0;
            let bad_f = params.value_oscillation && (fv[j] - fv[ci]).abs() > ev[ci] / 2.0;
            if bad_eps || bad_f {
                delta = delta.min(d / 3.0 * (1.0 - 4.0 * f64::EPSILON));
            }
        }
        if delta < params.min_radius {
            return Err(Error::CoverFailure { sample: ci, delta, floor: params.min_radius });
        }
        let inner = (1.0 - params.coverage_margin) * delta;
        for j in 0..n {
            reach[j] = reach[j].min(dist[j] / inner);
        }
        charts.push(Chart::new(model, p, delta, params.eps_prime)?);
        eps_center.push(ev[ci]);

        next = None;
        let mut far = 1.0;
        for (j, r) in reach.iter().enumerate() {
            if *r >= far {
                far = *r;
                next = Some(j);
            }
        }
    }
    log::debug!("cover: {} charts over {} samples, base radius {base}", charts.len(), n);
    let budget = PartitionBudget::from_charts(&charts);
    Ok(CoverAtlas { charts, eps_center, budget, eps_prime: params.eps_prime })
}
