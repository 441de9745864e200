use serde::Serialize;

use super::ApproxSettings;
use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point};
use crate::unity::uniform_bump;

#[derive(Debug, Clone)]
pub struct DgzSettings {
    /// Required gap between the best and second-best sample value.
    pub eta: f64,
    pub max_iter: usize,
    /// Bumpability constant R of the bumps.
    pub radius_constant: f64,
    /// Radius of the first bump; the i-th has radius δ₀·2^{-i}.
    pub radius0: f64,
    pub bump_eps: f64,
    pub approx: ApproxSettings,
}

impl Default for DgzSettings {
    fn default() -> Self {
        let mut approx = ApproxSettings::default();
        approx.verify.samples = 0;
        approx.verify.local_pairs = 0;
        approx.verify.global_pairs = 0;
        DgzSettings { eta: 1e-6, max_iter: 30, radius_constant: 1.2, radius0: 0.5, bump_eps: 0.25, approx }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlacedBump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
    pub lipschitz_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DgzResult {
    pub minimizer: Point,
    pub index: usize,
    pub margin: f64,
    pub iterations: usize,
    pub bumps: Vec<PlacedBump>,
    /// Σ c_i, a bound on ‖φ‖∞.
    pub phi_sup_bound: f64,
    /// Σ c_i·Lip(b_i).
    pub phi_lipschitz_bound: f64,
    pub phi_sup: f64,
    pub phi_lipschitz: f64,
    /// F − φ at every sample.
    #[serde(skip)]
    pub values: Vec<f64>,
}

fn best_two(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    let second = values.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    (best, second - values[best])
}

/// Subtracts small bumps φ = Σ c_i b_i from F until F − φ has a unique
/// minimiser over `samples` with gap at least η, keeping ‖φ‖∞ and Lip(φ)
/// below `delta`.
pub fn dgz_perturb(
    model: &ManifoldModel,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    samples: &[Point],
    delta: f64,
    settings: &DgzSettings,
) -> Result<DgzResult> {
    if samples.is_empty() {
        return Err(Error::Parameter("perturbation search needs samples".into()));
    }
    if !(delta > 0.0) || !(settings.eta > 0.0) || !(settings.radius0 > 0.0) {
        return Err(Error::Parameter(format!("need delta, eta, radius0 > 0 (got {delta}, {}, {})", settings.eta, settings.radius0)));
    }
    let rc = settings.radius_constant;
    let c0 = 0.5 * (0.75 * delta).min(delta * settings.radius0 / (2.0 * rc));
    let exec = settings.approx.exec;
    let base: Vec<f64> = exec.map(samples.len(), |i| f(&samples[i]));
    let mut phi = vec![0.0; samples.len()];
    let mut placed = Vec::new();

    for iter in 0..=settings.max_iter {
        let values: Vec<f64> = base.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let (best, margin) = best_two(&values);
        if margin >= settings.eta {
            let phi_sup = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let phi_lipschitz = sampled_lipschitz(model, samples, &phi);
            return Ok(DgzResult {
                minimizer: samples[best],
                index: best,
                margin,
                iterations: iter,
                phi_sup_bound: placed.iter().map(|b: &PlacedBump| b.amplitude).sum(),
                phi_lipschitz_bound: placed.iter().map(|b: &PlacedBump| b.amplitude * b.lipschitz_bound).sum(),
                bumps: placed,
                phi_sup,
                phi_lipschitz,
                values,
            });
        }
        if iter == settings.max_iter {
            return Err(Error::Search { iterations: iter, best_margin: margin });
        }
        let radius = settings.radius0 * 0.5f64.powi(iter as i32);
        let amplitude = c0 * 0.25f64.powi(iter as i32);
        let bump = uniform_bump(model, samples[best], radius, rc, settings.bump_eps, &settings.approx)?;
        log::debug!("bump {iter}: centre {:?}, radius {radius:e}, amplitude {amplitude:e}", samples[best].as_slice());
        let add: Vec<f64> = exec.map(samples.len(), |i| amplitude * bump.eval(&samples[i]));
        for (p, a) in phi.iter_mut().zip(add) {
            *p += a;
        }
        placed.push(PlacedBump { center: samples[best], radius, amplitude, lipschitz_bound: bump.lip_bound });
    }
    unreachable!()
}

/// Largest slope of φ between sample pairs that are nearest neighbours in
/// index order, plus all pairs when the set is small.
fn sampled_lipschitz(model: &ManifoldModel, samples: &[Point], phi: &[f64]) -> f64 {
    let mut out: f64 = 0.0;
    let mut visit = |i: usize, j: usize| {
        let d = model.distance(&samples[i], &samples[j]);
        if d > 0.0 {
            out = out.max((phi[i] - phi[j]).abs() / d);
        }
    };
    if samples.len() <= 2000 {
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                visit(i, j);
            }
        }
    } else {
        for i in 1..samples.len() {
            visit(i - 1, i);
        }
    }
    out
}
