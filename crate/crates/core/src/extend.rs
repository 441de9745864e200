//! McShane extension `f̂(x) = min_y f(y) + K'‖x − y‖` over inner nodes, and
//! truncation to a bounded field.
//!
//! The exact extension is computed line by line along the last axis. For a
//! fixed query line and a fixed inner line at perpendicular distance D, the
//! candidates `c_j + K'·sqrt(D² + h²(t − j)²)` are translates of one convex
//! function, so their lower envelope has the same stack structure as the
//! parabola envelope and the crossing of two candidates has a closed form.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{GridField, NodeSet};

/// Inner nodes grouped by line along the last axis.
struct Lines {
    /// Index offsets of the first node of each line.
    starts: Vec<usize>,
    /// Per line: (position along the line, value), increasing position.
    nodes: Vec<Vec<(usize, f64)>>,
    min_value: Vec<f64>,
    /// Multi-index of each line over the leading axes.
    coords: Vec<[usize; 3]>,
}

fn collect_lines(field: &GridField, inner: &NodeSet) -> Lines {
    let g = &field.grid;
    let n = *g.shape().last().unwrap();
    let count = g.len() / n;
    let mut lines = Lines { starts: Vec::new(), nodes: Vec::new(), min_value: Vec::new(), coords: Vec::new() };
    for l in 0..count {
        let start = l * n;
        let row: Vec<(usize, f64)> = (0..n)
            .filter(|&t| inner.contains(start + t))
            .map(|t| (t, field.values[start + t]))
            .collect();
        if row.is_empty() {
            continue;
        }
        lines.min_value.push(row.iter().map(|r| r.1).fold(f64::INFINITY, f64::min));
        lines.nodes.push(row);
        lines.starts.push(start);
        lines.coords.push(g.multi_index(start));
    }
    lines
}

struct Scratch {
    order: Vec<(f64, usize)>,
    v: Vec<usize>,
    z: Vec<f64>,
}

/// Crossing abscissa (index units) where candidate 2 drops below candidate 1,
/// for positions `i1 < i2`, values `c1`, `c2`, perpendicular distance `dn`
/// in index units and slope `kh = K'·h`.
#[inline]
fn crossing(i1: usize, c1: f64, i2: usize, c2: f64, dn2: f64, kh: f64) -> f64 {
    let w = (i2 - i1) as f64;
    let k = (c2 - c1) / kh;
    if k >= w {
        return f64::INFINITY;
    }
    if k <= -w {
        return f64::NEG_INFINITY;
    }
    0.5 * (i1 + i2) as f64 + 0.5 * k * (1.0 + 4.0 * dn2 / (w * w - k * k)).sqrt()
}

pub fn mcshane_extend(inner: &GridField, nodes: &NodeSet, k_prime: f64) -> Result<GridField> {
    mcshane_extend_with(Execution::default(), inner, nodes, k_prime)
}

/// Exact McShane extension of the values on `nodes` to every grid node.
/// Values off `nodes` are ignored. Fails if the extension undercuts an inner
/// value, which happens exactly when the inner data is not K'-Lipschitz.
pub fn mcshane_extend_with(exec: Execution, inner: &GridField, nodes: &NodeSet, k_prime: f64) -> Result<GridField> {
    check_inputs(inner, nodes, k_prime)?;
    let g = &inner.grid;
    let dim = g.dim();
    let n = *g.shape().last().unwrap();
    let h = g.spacing();
    let hl = h[dim - 1];
    let lines = collect_lines(inner, nodes);
    let global_min = lines.min_value.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = vec![0.0; g.len()];
    let mut args = vec![0usize; g.len()];

    if k_prime == 0.0 {
        let (arg, _) = nodes
            .members
            .iter()
            .map(|&i| (i, inner.values[i]))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        out.iter_mut().for_each(|o| *o = global_min);
        args.iter_mut().for_each(|a| *a = arg);
    } else {
        let kh = k_prime * hl;
        let mut packed: Vec<(f64, usize)> = vec![(0.0, 0); g.len()];
        exec.chunks_mut(
            &mut packed,
            n,
            || Scratch { order: Vec::new(), v: vec![0; n], z: vec![0.0; n + 1] },
            |qi, row, s| {
                let qc = g.multi_index(qi * n);
                s.order.clear();
                for (li, c) in lines.coords.iter().enumerate() {
                    let mut d2 = 0.0;
                    for k in 0..dim - 1 {
                        let d = (qc[k] as f64 - c[k] as f64) * h[k];
                        d2 += d * d;
                    }
                    s.order.push((d2, li));
                }
                s.order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for r in row.iter_mut() {
                    *r = (f64::INFINITY, usize::MAX);
                }
                let mut worst = f64::INFINITY;
                let order = std::mem::take(&mut s.order);
                for &(d2, li) in &order {
                    let reach = k_prime * d2.sqrt();
                    if global_min + reach >= worst {
                        break;
                    }
                    if lines.min_value[li] + reach >= worst {
                        continue;
                    }
                    line_envelope(&lines.nodes[li], d2 / (hl * hl), kh, &mut s.v, &mut s.z);
                    let cand = &lines.nodes[li];
                    let mut k = 0usize;
                    let z = &s.z;
                    for (t, r) in row.iter_mut().enumerate() {
                        while z[k + 1] < t as f64 {
                            k += 1;
                        }
                        let (j, c) = cand[s.v[k]];
                        let d = (t as f64 - j as f64) * hl;
                        let val = c + k_prime * (d2 + d * d).sqrt();
                        if val < r.0 {
                            *r = (val, lines.starts[li] + j);
                        }
                    }
                    worst = row.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
                }
                s.order = order;
            },
        );
        for (i, (v, a)) in packed.into_iter().enumerate() {
            out[i] = v;
            args[i] = a;
        }
    }
    finish(inner, nodes, k_prime, out, &args)
}

/// Fills `v` / `z` with the envelope of one inner line's candidates.
/// `v` holds indices into `cand`.
fn line_envelope(cand: &[(usize, f64)], dn2: f64, kh: f64, v: &mut [usize], z: &mut [f64]) {
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..cand.len() {
        let (iq, cq) = cand[q];
        loop {
            let (ip, cp) = cand[v[k]];
            let x = crossing(ip, cp, iq, cq, dn2, kh);
            if x == f64::INFINITY {
                break;
            }
            if x <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = x;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
}

fn check_inputs(inner: &GridField, nodes: &NodeSet, k_prime: f64) -> Result<()> {
    if !(k_prime >= 0.0 && k_prime.is_finite()) {
        return Err(Error::Parameter(format!("extension constant must be finite and >= 0, got {k_prime}")));
    }
    if nodes.mask.len() != inner.grid.len() {
        return Err(Error::Grid("node set does not belong to the field's grid".into()));
    }
    if nodes.is_empty() {
        return Err(Error::Grid("cannot extend from an empty node set".into()));
    }
    Ok(())
}

fn finish(inner: &GridField, nodes: &NodeSet, k_prime: f64, mut out: Vec<f64>, args: &[usize]) -> Result<GridField> {
    for &i in &nodes.members {
        let v = inner.values[i];
        if out[i] < v - 1e-12 * (1.0 + v.abs()) {
            return Err(Error::Extension { node: i, via: args[i], value: v, extended: out[i], k_prime });
        }
        out[i] = v;
    }
    GridField::new(inner.grid.clone(), out)
}

/// Direct O(N·M) minimisation; the reference for the line-envelope method.
pub fn mcshane_extend_bruteforce(exec: Execution, inner: &GridField, nodes: &NodeSet, k_prime: f64) -> Result<GridField> {
    check_inputs(inner, nodes, k_prime)?;
    let g = &inner.grid;
    let dim = g.dim();
    let h = g.spacing();
    let idx: Vec<[usize; 3]> = nodes.members.iter().map(|&i| g.multi_index(i)).collect();
    let res = exec.map(g.len(), |x| {
        let a = g.multi_index(x);
        let mut best = (f64::INFINITY, 0usize);
        for (m, b) in idx.iter().enumerate() {
            let mut d2 = 0.0;
            for k in 0..dim {
                let d = (a[k] as f64 - b[k] as f64) * h[k];
                d2 += d * d;
            }
            let j = nodes.members[m];
            let v = inner.values[j] + k_prime * d2.sqrt();
            if v < best.0 {
                best = (v, j);
            }
        }
        best
    });
    let args: Vec<usize> = res.iter().map(|r| r.1).collect();
    finish(inner, nodes, k_prime, res.into_iter().map(|r| r.0).collect(), &args)
}

/// `max |value| + 1` over `subset`.
pub fn truncation_bound(field: &GridField, subset: &NodeSet) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Grid("truncation subset is empty".into()));
    }
    Ok(subset.members.iter().map(|&i| field.values[i].abs()).fold(0.0, f64::max) + 1.0)
}

/// Clamps every node to `[-C, C]` with C from [`truncation_bound`].
pub fn truncate(field: &GridField, subset: &NodeSet) -> Result<(GridField, f64)> {
    let c = truncation_bound(field, subset)?;
    Ok((field.map(|v| v.clamp(-c, c))?, c))
}
