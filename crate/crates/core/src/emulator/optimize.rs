//! Multi-start bounded angle optimisation.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kernel::Kernel;
use super::lbfgs::{minimize, LbfgsConfig};
use super::QaoaParams;
use crate::problem::CostDiagonal;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    /// Number of generated starting points: one linear ramp plus
    /// `restarts - 1` uniform random points in the box.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Additional starting points tried on top of the generated ones.
    pub extra_starts: Vec<QaoaParams>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            restarts: 5,
            seed: 0,
            max_iters: 300,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub params: QaoaParams,
    pub energy: f64,
    /// Energy-and-gradient evaluations across all starts.
    pub evaluations: usize,
}

/// Locally minimises the QAOA energy over `gamma in [-pi, pi]`,
/// `beta in [-pi/2, pi/2]`, keeping the best of several starts.
///
/// The returned angles are sign-normalised so that `gamma_1 >= 0`; negating
/// every angle conjugates the state and leaves the energy unchanged.
pub fn optimize_params(diag: &CostDiagonal, p: usize, cfg: &OptimizeConfig) -> Result<OptimizeResult> {
    optimize_params_multi(&[diag], p, cfg)
}

/// Like [`optimize_params`] but minimises the mean energy over several
/// diagonals, which is how angle tables for a whole graph family are built.
pub fn optimize_params_multi(diags: &[&CostDiagonal], p: usize, cfg: &OptimizeConfig) -> Result<OptimizeResult> {
    if p == 0 {
        return Err(Error::param("p must be at least 1"));
    }
    if cfg.restarts == 0 && cfg.extra_starts.is_empty() {
        return Err(Error::param("need at least one restart"));
    }
    if diags.is_empty() {
        return Err(Error::param("no instances to optimise over"));
    }
    if let Some(bad) = cfg.extra_starts.iter().find(|s| s.p() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.p(),
        });
    }
    let kernels: Vec<Kernel> = diags.iter().map(|d| Kernel::new(d.values())).collect();
    let m = kernels.len() as f64;
    let energy = |x: &[f64]| -> f64 {
        kernels.iter().map(|k| k.energy(&x[..p], &x[p..])).sum::<f64>() / m
    };
    let energy_grad = |x: &[f64]| -> (f64, Vec<f64>) {
        let mut e = 0.0;
        let mut g = vec![0.0; 2 * p];
        for k in &kernels {
            let (ek, gg, gb) = k.energy_and_grad(&x[..p], &x[p..]);
            e += ek / m;
            for i in 0..p {
                g[i] += gg[i] / m;
                g[p + i] += gb[i] / m;
            }
        }
        (e, g)
    };

    let lo: Vec<f64> = (0..2 * p).map(|i| if i < p { -PI } else { -FRAC_PI_2 }).collect();
    let hi: Vec<f64> = lo.iter().map(|v| -v).collect();

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if cfg.restarts >= 1 {
        starts.push(linear_ramp(diags, p, &energy));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 1..cfg.restarts {
        starts.push((0..2 * p).map(|i| rng.gen_range(lo[i]..hi[i])).collect());
    }
    for s in &cfg.extra_starts {
        starts.push(s.gammas().iter().chain(s.betas()).copied().collect());
    }

    let lcfg = LbfgsConfig {
        max_iters: cfg.max_iters,
        ..Default::default()
    };
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| minimize(energy_grad, x0, &lo, &hi, &lcfg))
        .collect();
    let evaluations = runs.iter().map(|r| r.evals).sum();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("at least one start");
    let mut x = best.x;
    if x[0] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(OptimizeResult {
        params: QaoaParams::new(x[..p].to_vec(), x[p..].to_vec())?,
        energy: best.f,
        evaluations,
    })
}

/// Annealing-like start `gamma_k = a s_k`, `beta_k = -b (1 - s_k)` with
/// `s_k = (k - 1/2) / p`; the amplitudes are picked from a small grid
/// scaled to the spread of the cost values.
fn linear_ramp(diags: &[&CostDiagonal], p: usize, energy: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let d = diags[0];
    let n = d.num_qubits().max(1) as f64;
    let vals = d.values();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    let field = (var / n).sqrt().max(1e-9);
    let mut best = (f64::INFINITY, Vec::new());
    for a in [0.1, 0.2, 0.35, 0.5, 0.8] {
        for b in [0.3, 0.6, 0.9] {
            for sign in [-1.0, 1.0] {
                let ga = (a / field).min(PI);
                let x: Vec<f64> = (0..2 * p)
                    .map(|i| {
                        let k = i % p;
                        let s = (k as f64 + 0.5) / p as f64;
                        if i < p {
                            ga * s
                        } else {
                            sign * b * (1.0 - s)
                        }
                    })
                    .collect();
                let e = energy(&x);
                if e < best.0 {
                    best = (e, x);
                }
            }
        }
    }
    best.1
}
