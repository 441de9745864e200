//! The end-to-end approximation g = Σ ψ_n·(g_n ∘ log_{p_n}), its sampled
//! verification and the bump-perturbation search.

mod dgz;
mod verify;

pub use dgz::{dgz_perturb, DgzResult, DgzSettings, PlacedBump};
pub use verify::{verify_approx, verify_with_evaluator, LipschitzReport, PassFlags, VerifySettings};

use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::envelope::{lasry_lions_with, pick_lambda_mu, EnvelopeSettings};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::extend::{mcshane_extend_with, truncate};
use crate::field::{discrete_lipschitz_within, sample_on_nodes, FunctionOracle, GridField, NodeSet, TangentGrid};
use crate::manifold::{build_cover, chart_radius, CoverAtlas, CoverParams, ManifoldModel, Point, Region};
use crate::smooth::{choose_radius, mollify_with, Mollifier};
use crate::unity::{partition, Partition};

/// Largest ε' = 2^{-m}, m = 1..=64, with (K(1+ε') + ε')(1+ε') < K + r/2.
pub fn pick_eps_prime(k: f64, r: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) || !(r > 0.0) {
        return Err(Error::Parameter(format!("need K >= 0 and r > 0, got K = {k}, r = {r}")));
    }
    for m in 1..=64 {
        let e = 0.5f64.powi(m);
        if eps_prime_condition(k, r, e) {
            return Ok(e);
        }
    }
    Err(Error::Parameter(format!("no dyadic eps' satisfies the slack condition for K = {k}, r = {r}")))
}

pub fn eps_prime_condition(k: f64, r: f64, e: f64) -> bool {
    (k * (1.0 + e) + e) * (1.0 + e) < k + r / 2.0
}

/// The pointwise tolerance ε(·).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    Constant(f64),
    /// `near` at `center`, growing linearly to `far` at distance `radius`.
    Radial { center: Point, near: f64, far: f64, radius: f64 },
}

impl Tolerance {
    pub fn eval(&self, model: &ManifoldModel, p: &Point) -> f64 {
        match self {
            Tolerance::Constant(e) => *e,
            Tolerance::Radial { center, near, far, radius } => {
                let t = (model.distance(p, center) / radius).min(1.0);
                near + (far - near) * t
            }
        }
    }

    pub fn validate(&self, model: &ManifoldModel) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self {
            Tolerance::Constant(e) if positive(*e) => Ok(()),
            Tolerance::Radial { center, near, far, radius } if positive(*near) && positive(*far) && positive(*radius) => {
                model.check_point(center)
            }
            _ => Err(Error::Parameter(format!("tolerance must be positive: {self:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxSettings {
    /// Nodes per axis are 2^k + 1; `None` picks 8 in 1-D and 2-D, 6 in 3-D.
    pub resolution: Option<u32>,
    /// Cover sample size; `None` derives it from the chart radius so the
    /// lattice is fine compared with the coverage margin.
    pub cover_samples: Option<usize>,
    pub max_radius: Option<f64>,
    pub min_radius: f64,
    pub coverage_margin: f64,
    /// Enforce |f(q) − f(p)| ≤ ε(p)/2 on chart balls while covering.
    pub value_oscillation: bool,
    pub envelope: EnvelopeSettings,
    pub mollifier_cap: f64,
    pub verify: VerifySettings,
    pub exec: Execution,
}

impl Default for ApproxSettings {
    fn default() -> Self {
        ApproxSettings {
            resolution: None,
            cover_samples: None,
            max_radius: None,
            min_radius: 1e-4,
            coverage_margin: 0.15,
            value_oscillation: false,
            envelope: EnvelopeSettings::default(),
            mollifier_cap: 1.0,
            verify: VerifySettings::default(),
            exec: Execution::default(),
        }
    }
}

impl ApproxSettings {
    pub fn resolution_for(&self, dim: usize) -> u32 {
        self.resolution.unwrap_or(if dim >= 3 { 6 } else { 8 })
    }
}

#[derive(Debug, Clone)]
pub struct ApproxRequest {
    pub model: ManifoldModel,
    pub f: FunctionOracle,
    pub eps: Tolerance,
    pub r: f64,
    pub region: Region,
    pub settings: ApproxSettings,
}

impl ApproxRequest {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.f.validate(&self.model)?;
        self.eps.validate(&self.model)?;
        self.region.validate(&self.model)?;
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Parameter(format!("slack r must be positive, got {}", self.r)));
        }
        Ok(())
    }

    /// ε clamped to r/2.
    pub fn clamped_eps(&self, p: &Point) -> f64 {
        self.eps.eval(&self.model, p).min(self.r / 2.0)
    }
}

/// Budget bookkeeping for one chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartBudget {
    pub chart: usize,
    pub center: Point,
    pub delta: f64,
    pub eps_n: f64,
    pub c_n: f64,
    pub lip_phi: f64,
    /// ε_n / (2^{n+2}(C_n + 1)).
    pub tolerance: f64,
    pub sup_error: f64,
    /// K(1+ε') + ε'.
    pub lipschitz_bound: f64,
    pub lipschitz_estimate: f64,
    pub truncation: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub pass_tolerance: bool,
    pub pass_lipschitz: bool,
}

/// The assembled approximation.
#[derive(Debug, Clone)]
pub struct GluedFunction {
    pub model: ManifoldModel,
    pub atlas: CoverAtlas,
    pub partition: Partition,
    pub fields: Vec<GridField>,
    pub budgets: Vec<ChartBudget>,
    pub declared_k: f64,
    pub r: f64,
    lookups: Arc<AtomicUsize>,
}

impl GluedFunction {
    pub fn new(model: ManifoldModel, atlas: CoverAtlas, fields: Vec<GridField>, budgets: Vec<ChartBudget>, k: f64, r: f64) -> Result<Self> {
        let partition = partition(&atlas, &[])?;
        Ok(GluedFunction { model, atlas, partition, fields, budgets, declared_k: k, r, lookups: Arc::new(AtomicUsize::new(0)) })
    }

    pub fn eval(&self, p: &Point) -> Result<f64> {
        self.eval_inner(p, |_| {})
    }

    /// Value together with the charts whose fields were read.
    pub fn eval_traced(&self, p: &Point) -> Result<(f64, Vec<usize>)> {
        let mut used = Vec::new();
        let v = self.eval_inner(p, |k| used.push(k))?;
        Ok((v, used))
    }

    fn eval_inner(&self, p: &Point, mut touch: impl FnMut(usize)) -> Result<f64> {
        let mut acc = 0.0;
        let mut rest = 1.0;
        for (k, b) in self.partition.bumps.iter().enumerate() {
            let phi = b.eval(p);
            if phi == 0.0 {
                continue;
            }
            let x = b.chart.log_unchecked(p);
            let v = self.fields[k].interpolate(x.as_slice())?;
            self.lookups.fetch_add(1, Ordering::Relaxed);
            touch(k);
            acc += phi * rest * v;
            rest *= 1.0 - phi;
            if rest == 0.0 {
                return Ok(acc);
            }
        }
        Err(Error::Partition { point: p.as_slice().to_vec() })
    }

    /// ψ_m(p)·|g_m(log p) − target| per chart with ψ_m(p) > 0.
    pub fn chart_contributions(&self, p: &Point, target: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.partition.for_each_weight(p, |k, psi| {
            let x = self.partition.bumps[k].chart.log_unchecked(p);
            if let Ok(v) = self.fields[k].interpolate(x.as_slice()) {
                out.push((k, psi * (v - target).abs()));
            }
        });
        out
    }

    pub fn lookups(&self) -> usize {
        self.lookups.load(Ordering::Relaxed)
    }

    pub fn reset_lookups(&self) {
        self.lookups.store(0, Ordering::Relaxed);
    }

    /// Multiplies one chart's field; used for fault injection.
    pub fn scale_chart_field(&mut self, chart: usize, factor: f64) {
        for v in &mut self.fields[chart].values {
            *v *= factor;
        }
    }

    pub fn charts(&self) -> usize {
        self.atlas.len()
    }
}

/// Lattice size giving a sample spacing of about `spacing` on `region`.
fn lattice_size(model: &ManifoldModel, region: &Region, spacing: f64) -> usize {
    let d = model.dim() as i32;
    let volume = match (region, model) {
        (Region::Box { lo, hi }, _) | (Region::Whole, ManifoldModel::Euclidean { lo, hi }) => {
            lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()
        }
        (Region::Whole, ManifoldModel::FlatTorus { periods }) => periods.iter().product(),
        (Region::Whole, ManifoldModel::Sphere { radius, dim }) => match dim {
            1 => 2.0 * std::f64::consts::PI * radius,
            2 => 4.0 * std::f64::consts::PI * radius * radius,
            _ => 2.0 * std::f64::consts::PI.powi(2) * radius.powi(3),
        },
        (Region::Ball { radius, .. }, _) => {
            // The tangent lattice is stretched by up to the distortion at the rim.
            let stretch = model.distortion(*radius).min(8.0).max(1.0);
            (2.0 * radius * stretch).powi(d)
        }
        _ => 1.0,
    };
    (volume / spacing.powi(d)).ceil() as usize
}

/// Smooths one chart. `n` is the 1-based chart index.
#[allow(clippy::too_many_arguments)]
fn smooth_chart(
    req: &ApproxRequest,
    atlas: &CoverAtlas,
    idx: usize,
    resolution: u32,
    k_prime: f64,
    exec: Execution,
) -> Result<(GridField, ChartBudget)> {
    let chart = &atlas.charts[idx];
    let n = idx + 1;
    let delta = chart.delta;
    let eps_prime = atlas.eps_prime;
    let pipeline = |stage: &'static str, e: Error| Error::Pipeline { chart: idx, stage, reason: e.to_string() };

    let grid = TangentGrid::for_chart(chart, resolution).map_err(|e| pipeline("grid", e))?;
    let ball3 = NodeSet::ball(&grid, 3.0 * delta);
    let ball4 = NodeSet::ball(&grid, 4.0 * delta);
    let f_n = sample_on_nodes(&req.f, chart, &grid, &ball3).map_err(|e| pipeline("sample", e))?;
    let f_hat = mcshane_extend_with(exec, &f_n, &ball3, k_prime).map_err(|e| pipeline("extend", e))?;
    let (f_tilde, trunc) = truncate(&f_hat, &ball4).map_err(|e| pipeline("truncate", e))?;

    let eps_n = atlas.eps_center[idx];
    let c_n = atlas.budget.running[idx];
    let tol = eps_n / (2f64.powi(n as i32 + 2) * (c_n + 1.0));
    // Deep in the schedule the budget underflows; the stages then reduce to
    // the nodal identity, which still meets a zero budget.
    let half = (tol / 2.0).max(f64::MIN_POSITIVE);
    let params = pick_lambda_mu(k_prime, half, &req.settings.envelope).map_err(|e| pipeline("envelope", e))?;
    let ll = lasry_lions_with(exec, &f_tilde, &params).map_err(|e| pipeline("envelope", e))?;
    let rho = choose_radius(&ll, half / 2.0, k_prime, delta, req.settings.mollifier_cap).map_err(|e| pipeline("mollify", e))?;
    let m = Mollifier::new(&grid, rho).map_err(|e| pipeline("mollify", e))?;
    let reach = *m.reach[..grid.dim()].iter().max().unwrap();
    let region = NodeSet::interior(&grid, reach);
    let g_n = mollify_with(exec, &ll, &m, &region).map_err(|e| pipeline("mollify", e))?;

    let sup_error = ball3.members.iter().map(|&i| (g_n.values[i] - f_n.values[i]).abs()).fold(0.0, f64::max);
    let lip = discrete_lipschitz_within(&g_n, &ball3);
    let lip_bound = req.f.lipschitz * (1.0 + eps_prime) + eps_prime;
    let budget = ChartBudget {
        chart: idx,
        center: chart.center,
        delta,
        eps_n,
        c_n,
        lip_phi: atlas.budget.lip_phi[idx],
        tolerance: tol,
        sup_error,
        lipschitz_bound: lip_bound,
        lipschitz_estimate: lip,
        truncation: trunc,
        lambda: params.lambda,
        mu: params.mu,
        rho,
        pass_tolerance: sup_error <= tol,
        pass_lipschitz: lip <= lip_bound + 1e-6,
    };
    if !budget.pass_tolerance {
        return Err(Error::Pipeline {
            chart: idx,
            stage: "tolerance",
            reason: format!("nodal error {sup_error:e} exceeds the budget {tol:e}"),
        });
    }
    if !budget.pass_lipschitz {
        return Err(Error::Pipeline {
            chart: idx,
            stage: "lipschitz",
            reason: format!("discrete Lipschitz {lip} exceeds {lip_bound}"),
        });
    }
    Ok((g_n, budget))
}

/// Builds g and verifies it. Per-chart budget misses are errors; failed
/// verification is reported through the pass flags.
pub fn smooth_lipschitz_approx(req: &ApproxRequest) -> Result<(GluedFunction, LipschitzReport)> {
    let g = build_glued(req)?;
    let report = verify_approx(req, &g)?;
    Ok((g, report))
}

/// The cover the pipeline would use for `req`.
pub fn build_atlas(req: &ApproxRequest) -> Result<CoverAtlas> {
    req.validate()?;
    let model = &req.model;
    let s = &req.settings;
    let eps_prime = pick_eps_prime(req.f.lipschitz, req.r)?;
    let mut cover = CoverParams::new(model, eps_prime);
    if let Some(m) = s.max_radius {
        cover.max_radius = m;
    }
    cover.min_radius = s.min_radius;
    cover.coverage_margin = s.coverage_margin;
    cover.value_oscillation = s.value_oscillation;

    let base = chart_radius(model, eps_prime, cover.max_radius)?;
    let count = s
        .cover_samples
        .unwrap_or_else(|| lattice_size(model, &req.region, s.coverage_margin.max(0.05) * base / 1.5).clamp(1, 400_000));
    let samples = req.region.sample_lattice(model, count)?;
    let f = |p: &Point| req.f.eval(model, p);
    let eps = |p: &Point| req.clamped_eps(p);
    let atlas = build_cover(model, &samples, &cover, &f, &eps)?;
    log::info!(
        "eps' = {eps_prime}, {} charts from {} cover samples, base radius {base:.4}",
        atlas.len(),
        samples.len()
    );
    Ok(atlas)
}

pub fn build_glued(req: &ApproxRequest) -> Result<GluedFunction> {
    let atlas = build_atlas(req)?;
    let model = &req.model;
    let s = &req.settings;
    let k = req.f.lipschitz;
    let eps_prime = atlas.eps_prime;
    let resolution = s.resolution_for(model.dim());
    let k_prime = k * (1.0 + eps_prime);
    let inner = match s.exec {
        Execution::Sequential => Execution::Sequential,
        #[cfg(feature = "parallel")]
        Execution::Parallel => Execution::Sequential,
    };
    let results = s.exec.map(atlas.len(), |i| smooth_chart(req, &atlas, i, resolution, k_prime, inner));
    let mut fields = Vec::with_capacity(atlas.len());
    let mut budgets = Vec::with_capacity(atlas.len());
    for r in results {
        let (g, b) = r?;
        log::debug!(
            "chart {}: delta {:.4}, tol {:e}, err {:e}, lip {:.6} <= {:.6}",
            b.chart,
            b.delta,
            b.tolerance,
            b.sup_error,
            b.lipschitz_estimate,
            b.lipschitz_bound
        );
        fields.push(g);
        budgets.push(b);
    }
    GluedFunction::new(model.clone(), atlas, fields, budgets, k, req.r)
}
