//! Cutoffs, chart bumps, the telescoped partition of unity and uniform bumps.
//!
//! All cutoffs are built from the smooth step S(u) = s(u)/(s(u) + s(1 − u)),
//! s(t) = exp(−1/t), whose steepest slope is S'(1/2) = 2. That fixes the
//! project-wide profile constant c₀ = 2: Lip(θ) = 2/(b − a).

use serde::Serialize;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::field::FunctionOracle;
use crate::glue::{build_glued, ApproxRequest, ApproxSettings, GluedFunction, Tolerance};
use crate::manifold::{Chart, CoverAtlas, ManifoldModel, Point, Region};

/// Maximal slope of the standard smooth step.
pub const C0: f64 = 2.0;

fn s(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// The smooth step: 0 for u ≤ 0, 1 for u ≥ 1, S(1/2) = 1/2.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = s(u);
    a / (a + s(1.0 - u))
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 16;
        let mut x = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x.push(z);
            w.push(2.0 / ((1.0 - z * z) * dp * dp));
        }
        (x, w)
    })
}

const PANELS: usize = 16;

fn gl(a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * smooth_step(m + r * xi)).sum::<f64>() * r
}

/// Cumulative integrals of S over fixed panels of [0, 1/2].
fn panel_sums() -> &'static Vec<f64> {
    static SUMS: OnceLock<Vec<f64>> = OnceLock::new();
    SUMS.get_or_init(|| {
        let step = 0.5 / PANELS as f64;
        let mut acc = vec![0.0];
        for j in 0..PANELS {
            let last = *acc.last().unwrap();
            acc.push(last + gl(j as f64 * step, (j + 1) as f64 * step));
        }
        acc
    })
}

/// I(v) = ∫₀ᵛ S, with I(v) = v − 1/2 + I(1 − v) above 1/2.
fn step_integral(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return v - 0.5;
    }
    if v > 0.5 {
        return v - 0.5 + step_integral(1.0 - v);
    }
    let step = 0.5 / PANELS as f64;
    let j = ((v / step) as usize).min(PANELS - 1);
    panel_sums()[j] + gl(j as f64 * step, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    SmoothStep,
    /// Linear core of slope 1/(1 − w) with smooth shoulders of relative
    /// width `shoulder`; the derivative is the slope times a smooth step.
    LinearCore { shoulder: f64 },
}

impl Profile {
    /// Increasing transition [0, 1] → [0, 1].
    fn rise(&self, u: f64) -> f64 {
        match *self {
            Profile::SmoothStep => smooth_step(u),
            Profile::LinearCore { shoulder: w } => {
                if u <= 0.0 {
                    return 0.0;
                }
                if u >= 1.0 {
                    return 1.0;
                }
                if u > 0.5 {
                    return 1.0 - self.rise(1.0 - u);
                }
                let m = 1.0 / (1.0 - w);
                if u <= w {
                    m * w * step_integral(u / w)
                } else {
                    m * (w / 2.0 + u - w)
                }
            }
        }
    }

    fn max_slope(&self) -> f64 {
        match *self {
            Profile::SmoothStep => C0,
            Profile::LinearCore { shoulder } => 1.0 / (1.0 - shoulder),
        }
    }
}

/// A C^∞ transition between the plateaus `t ≤ a` and `t ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    /// Increasing cutoffs go 0 → 1, decreasing ones 1 → 0.
    pub increasing: bool,
    pub lipschitz: f64,
}

impl Cutoff {
    pub fn new(a: f64, b: f64, profile: Profile, increasing: bool) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!("cutoff needs a < b, got [{a}, {b}]")));
        }
        if let Profile::LinearCore { shoulder } = profile {
            if !(shoulder > 0.0 && shoulder <= 0.5) {
                return Err(Error::Parameter(format!("shoulder width {shoulder} outside (0, 1/2]")));
            }
        }
        Ok(Cutoff { a, b, profile, increasing, lipschitz: profile.max_slope() / (b - a) })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let r = self.profile.rise((t - self.a) / (self.b - self.a));
        if self.increasing {
            r
        } else {
            1.0 - r
        }
    }

    /// Largest difference quotient over `n` equal steps of [a, b].
    pub fn measured_lipschitz(&self, n: usize) -> f64 {
        let h = (self.b - self.a) / n as f64;
        (0..n)
            .map(|i| {
                let t = self.a + i as f64 * h;
                (self.eval(t + h) - self.eval(t)).abs() / h
            })
            .fold(0.0, f64::max)
    }
}

/// θ = 1 on (−∞, a], 0 on [b, ∞), Lipschitz 2/(b − a).
pub fn make_cutoff(a: f64, b: f64) -> Result<Cutoff> {
    Cutoff::new(a, b, Profile::SmoothStep, false)
}

/// θ = 0 on t ≤ ε, 1 on t ≥ 1 − ε, Lip(θ) ≤ (1 + ε)/(1 − 2ε). The plain step
/// has slope 2/(1 − 2ε), so the shoulders are narrowed until the linear-core
/// slope 1/((1 − w)(1 − 2ε)) meets the bound.
pub fn make_bump_cutoff(eps: f64) -> Result<Cutoff> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Parameter(format!("bump cutoff needs 0 < eps < 1/2, got {eps}")));
    }
    let bound = (1.0 + eps) / (1.0 - 2.0 * eps);
    let mut w: f64 = 0.5;
    loop {
        let c = Cutoff::new(eps, 1.0 - eps, Profile::LinearCore { shoulder: w }, true)?;
        if c.lipschitz <= bound {
            return Ok(c);
        }
        w /= 2.0;
        if w < 1e-12 {
            return Err(Error::Parameter(format!("no shoulder width meets the slope bound for eps = {eps}")));
        }
    }
}

/// φ_n(p) = θ_n(‖log_{p_n} p‖) on the chart ball and 0 outside, with θ_n the
/// cutoff on [δ_n, 2δ_n]. For the analytic models ‖log_{p_n} p‖ = d(p, p_n).
#[derive(Debug, Clone)]
pub struct ChartBump {
    pub chart: Chart,
    pub theta: Cutoff,
    /// Lip(θ_n)·(1 + ε').
    pub lipschitz: f64,
}

impl ChartBump {
    pub fn new(chart: &Chart) -> Result<Self> {
        let theta = make_cutoff(chart.delta, 2.0 * chart.delta)?;
        Ok(ChartBump { lipschitz: theta.lipschitz * chart.distortion, theta, chart: chart.clone() })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.eval_at_distance(self.chart.distance_to_center(p))
    }

    #[inline]
    pub fn eval_at_distance(&self, d: f64) -> f64 {
        if d >= 3.0 * self.chart.delta {
            0.0
        } else {
            self.theta.eval(d)
        }
    }
}

/// Recorded Lip(φ_j) and their running sums C_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionBudget {
    pub lip_phi: Vec<f64>,
    pub running: Vec<f64>,
}

impl PartitionBudget {
    pub fn from_lipschitz(lip_phi: Vec<f64>) -> Self {
        let mut running = Vec::with_capacity(lip_phi.len());
        let mut acc = 0.0;
        for l in &lip_phi {
            acc += l;
            running.push(acc);
        }
        PartitionBudget { lip_phi, running }
    }

    pub fn from_charts(charts: &[Chart]) -> Self {
        PartitionBudget::from_lipschitz(charts.iter().map(|c| C0 / c.delta * c.distortion).collect())
    }
}

/// ψ_k = φ_k ∏_{j<k} (1 − φ_j), evaluated on demand.
#[derive(Debug, Clone)]
pub struct Partition {
    pub bumps: Vec<ChartBump>,
    pub budget: PartitionBudget,
}

pub fn partition(atlas: &CoverAtlas, samples: &[Point]) -> Result<Partition> {
    for p in samples {
        if !atlas.covers(p) {
            return Err(Error::Partition { point: p.as_slice().to_vec() });
        }
    }
    let bumps = atlas.charts.iter().map(ChartBump::new).collect::<Result<Vec<_>>>()?;
    Ok(Partition { bumps, budget: atlas.budget.clone() })
}

impl Partition {
    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }

    /// Calls `visit(k, ψ_k(p))` for every k with ψ_k(p) > 0 and returns the
    /// leftover product ∏(1 − φ_j), which is 0 on the covered region.
    pub fn for_each_weight(&self, p: &Point, mut visit: impl FnMut(usize, f64)) -> f64 {
        let mut rest = 1.0;
        for (k, b) in self.bumps.iter().enumerate() {
            let phi = b.eval(p);
            if phi > 0.0 {
                visit(k, phi * rest);
                rest *= 1.0 - phi;
                if rest == 0.0 {
                    break;
                }
            }
        }
        rest
    }

    pub fn weights(&self, p: &Point) -> Vec<f64> {
        let mut w = vec![0.0; self.bumps.len()];
        self.for_each_weight(p, |k, v| w[k] = v);
        w
    }

    pub fn psi(&self, k: usize, p: &Point) -> f64 {
        let mut rest = 1.0;
        for b in &self.bumps[..k] {
            rest *= 1.0 - b.eval(p);
            if rest == 0.0 {
                return 0.0;
            }
        }
        self.bumps[k].eval(p) * rest
    }

    pub fn sum(&self, p: &Point) -> f64 {
        let mut s = 0.0;
        self.for_each_weight(p, |_, v| s += v);
        s
    }

    /// First k with p in the core ball B(p_k, δ_k).
    pub fn first_cover(&self, p: &Point) -> Option<usize> {
        self.bumps.iter().position(|b| b.chart.distance_to_center(p) < b.chart.delta)
    }
}

/// b = θ∘g for the smooth approximation g of the cone 1 − d(·, p)/δ.
#[derive(Debug, Clone)]
pub struct UniformBump {
    pub center: Point,
    pub delta: f64,
    pub radius_constant: f64,
    /// The tolerance actually used after halving.
    pub eps: f64,
    pub theta: Cutoff,
    pub g: GluedFunction,
    /// Lip(θ)·(1/δ + eps).
    pub lip_bound: f64,
}

impl UniformBump {
    pub fn eval(&self, q: &Point) -> f64 {
        if self.g.model.distance(q, &self.center) >= self.delta {
            return 0.0;
        }
        match self.g.eval(q) {
            Ok(v) => self.theta.eval(v),
            // Inside the δ-ball the approximation region always covers q.
            Err(e) => panic!("uniform bump evaluated off its cover: {e}"),
        }
    }
}

/// The largest eps in {eps₀/2^j} with ((1+e)/(1−2e))·(1/δ + e) ≤ R/δ.
pub fn bump_tolerance(delta: f64, r_const: f64, eps0: f64) -> Result<f64> {
    if !(r_const > 1.0) {
        return Err(Error::Bumpability(format!("R must exceed 1, got {r_const}")));
    }
    if !(delta > 0.0) || !(eps0 > 0.0 && eps0 < 0.5) {
        return Err(Error::Bumpability(format!("need delta > 0 and 0 < eps < 1/2, got {delta}, {eps0}")));
    }
    let mut e = eps0;
    for _ in 0..64 {
        if (1.0 + e) / (1.0 - 2.0 * e) * (1.0 / delta + e) <= r_const / delta {
            return Ok(e);
        }
        e /= 2.0;
    }
    Err(Error::Bumpability(format!("no eps below {eps0} satisfies the gradient bound for R = {r_const}")))
}

pub fn uniform_bump(
    model: &ManifoldModel,
    p: Point,
    delta: f64,
    r_const: f64,
    eps0: f64,
    settings: &ApproxSettings,
) -> Result<UniformBump> {
    model.check_point(&p)?;
    let eps = bump_tolerance(delta, r_const, eps0)?;
    let theta = make_bump_cutoff(eps)?;
    let seed = FunctionOracle::ramp(p, 1.0, -1.0 / delta, 0.0, 1.0)?;
    let req = ApproxRequest {
        model: model.clone(),
        f: seed,
        eps: Tolerance::Constant(eps),
        r: eps,
        region: Region::Ball { center: p, radius: 1.1 * delta },
        settings: settings.clone(),
    };
    let g = build_glued(&req)?;
    Ok(UniformBump {
        center: p,
        delta,
        radius_constant: r_const,
        eps,
        lip_bound: theta.lipschitz * (1.0 / delta + eps),
        theta,
        g,
    })
}
