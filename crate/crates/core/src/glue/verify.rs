use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ApproxRequest, ChartBudget, GluedFunction};
use crate::error::Result;
use crate::manifold::{Point, Tangent};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub samples: usize,
    pub local_pairs: usize,
    pub global_pairs: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { samples: 10_000, local_pairs: 2_000, global_pairs: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PassFlags {
    pub error: bool,
    pub lipschitz: bool,
    pub coverage: bool,
    pub budgets: bool,
    pub implied: bool,
    pub all: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub schema: u32,
    pub manifold: &'static str,
    pub k: f64,
    pub r: f64,
    pub eps_prime: f64,
    pub charts: usize,
    pub samples: usize,
    pub local_pairs: usize,
    pub global_pairs: usize,
    pub sup_error: f64,
    /// max |g − f| / ε over the samples.
    pub worst_ratio: f64,
    pub uncovered_points: usize,
    pub lipschitz_local: f64,
    pub lipschitz_global: f64,
    pub lipschitz_estimate: f64,
    /// K + r.
    pub lipschitz_bound: f64,
    /// Worst chart nodal error relative to ε_n/2.
    pub implied_error_ratio: f64,
    /// The gluing estimate evaluated with per-chart budgets.
    pub implied_lipschitz_budget: f64,
    /// The same estimate with the measured per-chart errors and slopes.
    pub implied_lipschitz_measured: f64,
    pub budget: Vec<ChartBudget>,
    pub offending_charts: Vec<usize>,
    pub pass: PassFlags,
}

/// max over k of Σ_{m≤k} e_m·C_m + s_k(1+ε').
fn gluing_chain(budgets: &[ChartBudget], eps_prime: f64, err: impl Fn(&ChartBudget) -> f64, slope: impl Fn(&ChartBudget) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut worst_slope: f64 = 0.0;
    let mut out: f64 = 0.0;
    for b in budgets {
        acc += err(b) * b.c_n;
        worst_slope = worst_slope.max(slope(b));
        out = out.max(acc + worst_slope * (1.0 + eps_prime));
    }
    out
}

fn ball_point(req: &ApproxRequest, a: &Point, radius: f64, rng: &mut ChaCha8Rng) -> Point {
    let model = &req.model;
    let frame = model.frame_at(a);
    let v: Tangent = crate::manifold::uniform_ball(model.dim(), radius, rng);
    model.exp(a, &frame, &v)
}

/// Samples the error and Lipschitz constant of g against the request.
pub fn verify_approx(req: &ApproxRequest, g: &GluedFunction) -> Result<LipschitzReport> {
    verify_with_evaluator(req, g, &|p| g.eval(p))
}

/// As [`verify_approx`], but values come from `eval`; `g` still supplies the
/// atlas for pair localisation and the budget table.
pub fn verify_with_evaluator(
    req: &ApproxRequest,
    g: &GluedFunction,
    eval: &(dyn Fn(&Point) -> Result<f64> + Sync),
) -> Result<LipschitzReport> {
    let model = &req.model;
    let s = &req.settings.verify;
    let exec = req.settings.exec;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let points = req.region.sample_random(model, s.samples, &mut rng)?;

    let evals: Vec<(f64, Option<f64>)> = exec.map(points.len(), |i| {
        let p = &points[i];
        (req.f.eval(model, p), eval(p).ok())
    });
    let mut sup_error: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut uncovered = 0;
    let mut offending = Vec::new();
    for (p, (fv, gv)) in points.iter().zip(&evals) {
        let Some(gv) = gv else {
            uncovered += 1;
            continue;
        };
        let e = (gv - fv).abs();
        let ratio = e / req.eps.eval(model, p);
        sup_error = sup_error.max(e);
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 1.0 {
            let worst = g
                .chart_contributions(p, *fv)
                .into_iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k);
            if let Some(k) = worst {
                if !offending.contains(&k) {
                    offending.push(k);
                }
            }
        }
    }
    offending.sort_unstable();

    // Local pairs stay inside the first core ball containing the anchor.
    let mut local = Vec::with_capacity(s.local_pairs);
    let mut attempts = 0;
    while local.len() < s.local_pairs && attempts < 20 * s.local_pairs.max(1) && !points.is_empty() {
        attempts += 1;
        let a = points[rng.gen_range(0..points.len())];
        let Some(k) = g.partition.first_cover(&a) else { continue };
        let chart = &g.atlas.charts[k];
        let min_delta = g.atlas.charts[..=k].iter().map(|c| c.delta).fold(f64::INFINITY, f64::min);
        let radius = min_delta.min(chart.delta - chart.distance_to_center(&a));
        if radius < 1e-6 {
            continue;
        }
        let b = ball_point(req, &a, radius, &mut rng);
        local.push((a, b));
    }
    let mut global = Vec::with_capacity(s.global_pairs);
    if points.len() >= 2 {
        for _ in 0..s.global_pairs {
            let i = rng.gen_range(0..points.len());
            let j = rng.gen_range(0..points.len());
            global.push((points[i], points[j]));
        }
    }
    let slope = |pairs: &[(Point, Point)]| -> f64 {
        exec.map(pairs.len(), |i| {
            let (a, b) = &pairs[i];
            let d = model.distance(a, b);
            if d < 1e-9 {
                return 0.0;
            }
            match (eval(a), eval(b)) {
                (Ok(x), Ok(y)) => (x - y).abs() / d,
                _ => 0.0,
            }
        })
        .into_iter()
        .fold(0.0, f64::max)
    };
    let lipschitz_local = slope(&local);
    let lipschitz_global = slope(&global);
    let lipschitz_estimate = lipschitz_local.max(lipschitz_global);
    let bound = req.f.lipschitz + req.r;

    let eps_prime = g.atlas.eps_prime;
    let implied_error_ratio = g.budgets.iter().map(|b| b.sup_error / (b.eps_n / 2.0)).fold(0.0, f64::max);
    let implied_lipschitz_budget = gluing_chain(&g.budgets, eps_prime, |b| b.tolerance, |b| b.lipschitz_bound);
    let implied_lipschitz_measured = gluing_chain(&g.budgets, eps_prime, |b| b.sup_error, |b| b.lipschitz_estimate);

    let error = worst_ratio <= 1.0;
    let lipschitz = lipschitz_estimate <= bound;
    let coverage = uncovered == 0;
    let budgets = g.budgets.iter().all(|b| b.pass_tolerance && b.pass_lipschitz);
    let implied = implied_error_ratio <= 1.0 && implied_lipschitz_budget <= bound && implied_lipschitz_measured <= bound;
    let pass = PassFlags { error, lipschitz, coverage, budgets, implied, all: error && lipschitz && coverage && budgets && implied };

    Ok(LipschitzReport {
        schema: 1,
        manifold: model.name(),
        k: req.f.lipschitz,
        r: req.r,
        eps_prime,
        charts: g.charts(),
        samples: points.len(),
        local_pairs: local.len(),
        global_pairs: global.len(),
        sup_error,
        worst_ratio,
        uncovered_points: uncovered,
        lipschitz_local,
        lipschitz_global,
        lipschitz_estimate,
        lipschitz_bound: bound,
        implied_error_ratio,
        implied_lipschitz_budget,
        implied_lipschitz_measured,
        budget: g.budgets.clone(),
        offending_charts: offending,
        pass,
    })
}
