//! Projected limited-memory BFGS for box-constrained smooth minimisation.
//!
//! Search directions come from the two-loop recursion restricted to the
//! variables that are not pinned at a bound; steps backtrack along the
//! projected path until the Armijo condition holds.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Relative decrease below which the run stops.
    pub ftol: f64,
    /// Projected-gradient infinity norm below which the run stops.
    pub gtol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 300,
            ftol: 2.2e-10,
            gtol: 1e-7,
        }
    }
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn minimize<F>(mut fg: F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &LbfgsConfig) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut f, mut g) = fg(&x);
    let mut evals = 1;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for _ in 0..cfg.max_iters {
        let free: Vec<bool> = (0..dim)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg = (0..dim)
            .map(|i| if free[i] { g[i].abs() } else { 0.0 })
            .fold(0.0, f64::max);
        if pg < cfg.gtol {
            break;
        }
        let mut d = direction(&g, &free, &mem);
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = (0..dim).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        if mem.is_empty() {
            // First step or after a reset: cap the move at 0.1 rad.
            let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale > 0.1 {
                d.iter_mut().for_each(|v| *v *= 0.1 / scale);
            }
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = (0..dim).map(|i| x[i] + t * d[i]).collect();
            project(&mut xn, lo, hi);
            let step: Vec<f64> = (0..dim).map(|i| xn[i] - x[i]).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 {
                t *= 0.5;
                continue;
            }
            let (fnew, gnew) = fg(&xn);
            evals += 1;
            if fnew <= f + 1e-4 * decrease {
                accepted = Some((xn, fnew, gnew, step));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew, s)) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        let y: Vec<f64> = (0..dim).map(|i| gnew[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let rel = (f - fnew) / f.abs().max(fnew.abs()).max(1.0);
        x = xn;
        f = fnew;
        g = gnew;
        if rel <= cfg.ftol {
            break;
        }
    }
    Minimum { x, f, evals }
}

fn direction(g: &[f64], free: &[bool], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let dim = g.len();
    let mask = |v: &[f64]| -> Vec<f64> { (0..dim).map(|i| if free[i] { v[i] } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alpha = vec![0.0; mem.len()];
    for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
        let a = rho * dot(&mask(s), &q);
        alpha[k] = a;
        let ym = mask(y);
        for i in 0..dim {
            q[i] -= a * ym[i];
        }
    }
    if let Some((s, y, _)) = mem.back() {
        let (sm, ym) = (mask(s), mask(y));
        let yy = dot(&ym, &ym);
        let sy = dot(&sm, &ym);
        if yy > 0.0 && sy > 0.0 {
            q.iter_mut().for_each(|v| *v *= sy / yy);
        }
    }
    for (k, (s, y, rho)) in mem.iter().enumerate() {
        let b = rho * dot(&mask(y), &q);
        let sm = mask(s);
        for i in 0..dim {
            q[i] += (alpha[k] - b) * sm[i];
        }
    }
    (0..dim).map(|i| if free[i] { -q[i] } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let cfg = LbfgsConfig {
            max_iters: 2000,
            ftol: 0.0,
            ..Default::default()
        };
        let m = minimize(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &cfg);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        // Minimum of (x - 3)^2 + (y + 2)^2 on [0, 1]^2 is at (1, 0).
        let f = |x: &[f64]| {
            (
                (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 2.0)],
            )
        };
        let m = minimize(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &LbfgsConfig::default());
        assert_eq!(m.x, vec![1.0, 0.0]);
    }
}
