//! Projected L-BFGS on a box, used as the inner solver of the augmented
//! Lagrangian loop.

use std::collections::VecDeque;

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct InnerOptions {
    pub max_iters: usize,
    /// Stop when `||x - P(x - g)||_inf` falls below this.
    pub tol: f64,
    pub memory: usize,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub proj_grad: f64,
    pub iters: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((x, g), (l, h))| (x - (x - g).clamp(*l, *h)).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` over `lo <= x <= hi`. `value` returns `f(x)`, `value_grad`
/// returns `(f(x), grad f(x))`.
pub fn minimize_box(
    value: impl Fn(&[f64]) -> Result<f64>,
    value_grad: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opt: &InnerOptions,
) -> Result<InnerResult> {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut f, mut g) = value_grad(&x)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opt.memory);
    let mut iters = 0;
    let mut stalled = 0;
    loop {
        let pg = projected_gradient_norm(&x, &g, lo, hi);
        if pg <= opt.tol || !f.is_finite() {
            return Ok(InnerResult {
                x,
                f,
                proj_grad: pg,
                iters,
                converged: pg <= opt.tol,
            });
        }
        if iters >= opt.max_iters || stalled >= 3 {
            return Ok(InnerResult {
                x,
                f,
                proj_grad: pg,
                iters,
                converged: false,
            });
        }
        iters += 1;

        // variables pinned at a bound with the gradient pushing outward
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lo = x[i] <= lo[i] && g[i] > 0.0;
                let at_hi = x[i] >= hi[i] && g[i] < 0.0;
                lo[i] < hi[i] && !(at_lo || at_hi)
            })
            .collect();
        let mask = |v: &mut Vec<f64>| {
            for (a, &fr) in v.iter_mut().zip(&free) {
                if !fr {
                    *a = 0.0;
                }
            }
        };

        let mut d = two_loop(&g, &mem, &free);
        mask(&mut d);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            mask(&mut d);
            slope = dot(&g, &d);
        }
        let mut alpha = if mem.is_empty() {
            (1.0 / d.iter().fold(0.0f64, |a, v| a.max(v.abs()))).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            project(&mut xn, lo, hi);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let fn_ = value(&xn)?;
            if fn_.is_finite() && fn_ <= f + 1e-4 * decrease {
                accepted = Some((xn, fn_));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            if mem.is_empty() {
                stalled = 3;
            } else {
                mem.clear();
                stalled += 1;
            }
            continue;
        };
        let (fv, gn) = value_grad(&xn)?;
        debug_assert!((fv - fn_).abs() <= 1e-9 * (1.0 + fv.abs()));
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opt.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        stalled = if (f - fv).abs() <= 1e-14 * (1.0 + f.abs()) { stalled + 1 } else { 0 };
        x = xn;
        f = fv;
        g = gn;
    }
}

/// `-H g` from the stored pairs, restricted to the free variables.
fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let restrict = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(free).map(|(a, &f)| if f { *a } else { 0.0 }).collect()
    };
    let mut q = restrict(g);
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(&restrict(s), &q);
        for (qi, yi) in q.iter_mut().zip(&restrict(y)) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let (s, y) = (restrict(s), restrict(y));
        let yy = dot(&y, &y);
        if yy > 0.0 {
            let gamma = dot(&s, &y) / yy;
            if gamma > 0.0 {
                q.iter_mut().for_each(|v| *v *= gamma);
            }
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(&restrict(y), &q);
        for (qi, si) in q.iter_mut().zip(&restrict(s)) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}
