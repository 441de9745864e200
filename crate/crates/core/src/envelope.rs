//! Quadratic inf/sup convolutions over grid nodes.
//!
//! `inf_conv(f, λ)(x) = min_y f(y) + ‖x − y‖²/(2λ)` with the min over grid
//! nodes. The squared norm splits over axes, so the d-dimensional transform is
//! d passes of the one-dimensional lower envelope of parabolas, each linear in
//! the row length. λ and μ carry units of length² per value unit; everything
//! is handled as plain doubles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::GridField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeParams {
    pub lambda: f64,
    pub mu: f64,
}

impl EnvelopeParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let p = EnvelopeParams { lambda, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < self.lambda && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < mu < lambda, got lambda = {}, mu = {}",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }

    /// The uniform error bound (λ + μ)K²/2 for a K-Lipschitz input.
    pub fn error_bound(&self, k: f64) -> f64 {
        (self.lambda + self.mu) * k * k / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeSettings {
    /// Floor on K when choosing λ, so constant inputs get a finite scale.
    pub k_floor: f64,
    pub lambda_cap: f64,
}

impl Default for EnvelopeSettings {
    fn default() -> Self {
        EnvelopeSettings { k_floor: 1e-6, lambda_cap: 1.0 }
    }
}

/// λ = eps/(2·max(K, κ)²) (capped), μ = λ/2; then (λ + μ)K²/2 ≤ eps/2.
pub fn pick_lambda_mu(k: f64, eps: f64, settings: &EnvelopeSettings) -> Result<EnvelopeParams> {
    if !(k >= 0.0) || !(eps > 0.0) {
        return Err(Error::Parameter(format!("need K >= 0 and eps > 0, got K = {k}, eps = {eps}")));
    }
    let kk = k.max(settings.k_floor);
    let lambda = (eps / (2.0 * kk * kk)).min(settings.lambda_cap);
    EnvelopeParams::new(lambda, lambda / 2.0)
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Per-worker buffers for the one-dimensional pass.
struct Scratch {
    row: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { row: vec![0.0; n], v: vec![0; n], z: vec![0.0; n + 1] }
    }
}

/// Lower envelope of the parabolas `f[q] + (p − q)²/(2·lam)` in index units,
/// evaluated at every index p.
#[inline]
fn envelope_1d(f: &[f64], lam: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q];
        loop {
            let p = v[k];
            // Abscissa where parabola q overtakes parabola p.
            let s = 0.5 * (q + p) as f64 + lam * (fq - f[p]) / (q - p) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    let inv = 0.5 / lam;
    for (p, o) in out.iter_mut().enumerate() {
        while z[k + 1] < p as f64 {
            k += 1;
        }
        let d = p as f64 - v[k] as f64;
        // d = 0 must not meet inv = ∞ when λ underflows.
        *o = if d == 0.0 { f[v[k]] } else { f[v[k]] + d * d * inv };
    }
}

/// Applies the 1-D pass along the last (contiguous) axis of `data`, whose
/// shape is `shape`, then moves that axis to the front.
fn pass_and_rotate(exec: Execution, data: &mut Vec<f64>, shape: &mut Vec<usize>, lam: f64, spacing: f64) {
    let n = *shape.last().unwrap();
    let lam_idx = lam / (spacing * spacing);
    exec.chunks_mut(data, n, || Scratch::new(n), |_, row, s| {
        s.row.copy_from_slice(row);
        envelope_1d(&s.row, lam_idx, row, &mut s.v, &mut s.z);
    });
    if shape.len() == 1 {
        return;
    }
    let rows = data.len() / n;
    let mut rotated = vec![0.0; data.len()];
    let src = &*data;
    exec.chunks_mut(&mut rotated, rows, || (), |j, col, _| {
        for (r, c) in col.iter_mut().enumerate() {
            *c = src[r * n + j];
        }
    });
    *data = rotated;
    let last = shape.pop().unwrap();
    shape.insert(0, last);
}

pub fn inf_conv_quadratic(field: &GridField, lambda: f64) -> Result<GridField> {
    inf_conv_quadratic_with(Execution::default(), field, lambda)
}

pub fn inf_conv_quadratic_with(exec: Execution, field: &GridField, lambda: f64) -> Result<GridField> {
    check_scale("lambda", lambda)?;
    let g = &field.grid;
    let mut data = field.values.clone();
    let mut shape = g.shape().to_vec();
    // Axis d-1 first; after each rotation the next axis back is last.
    for axis in (0..g.dim()).rev() {
        pass_and_rotate(exec, &mut data, &mut shape, lambda, g.spacing()[axis]);
    }
    GridField::new(g.clone(), data)
}

pub fn sup_conv_quadratic(field: &GridField, mu: f64) -> Result<GridField> {
    sup_conv_quadratic_with(Execution::default(), field, mu)
}

/// `−inf_conv(−f, μ)`.
pub fn sup_conv_quadratic_with(exec: Execution, field: &GridField, mu: f64) -> Result<GridField> {
    let neg = field.map(|v| -v)?;
    let mut out = inf_conv_quadratic_with(exec, &neg, mu)?;
    for v in &mut out.values {
        *v = -*v;
    }
    Ok(out)
}

pub fn lasry_lions(field: &GridField, params: &EnvelopeParams) -> Result<GridField> {
    lasry_lions_with(Execution::default(), field, params)
}

/// `sup_conv(inf_conv(f, λ), μ)`.
pub fn lasry_lions_with(exec: Execution, field: &GridField, params: &EnvelopeParams) -> Result<GridField> {
    params.validate()?;
    let inner = inf_conv_quadratic_with(exec, field, params.lambda)?;
    sup_conv_quadratic_with(exec, &inner, params.mu)
}

/// The O(N²) double loop over node pairs. Reference for tests and benches.
pub fn inf_conv_bruteforce(exec: Execution, field: &GridField, lambda: f64) -> Result<GridField> {
    check_scale("lambda", lambda)?;
    let g = &field.grid;
    let n = g.len();
    let dim = g.dim();
    let idx: Vec<[usize; 3]> = (0..n).map(|i| g.multi_index(i)).collect();
    let h = g.spacing();
    let inv = 0.5 / lambda;
    let values = exec.map(n, |i| {
        let a = idx[i];
        let mut best = f64::INFINITY;
        for (j, b) in idx.iter().enumerate() {
            let mut d2 = 0.0;
            for k in 0..dim {
                let d = (a[k] as f64 - b[k] as f64) * h[k];
                d2 += d * d;
            }
            let c = field.values[j] + d2 * inv;
            if c < best {
                best = c;
            }
        }
        best
    });
    GridField::new(g.clone(), values)
}
