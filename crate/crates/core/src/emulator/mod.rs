//! Noiseless QAOA statevector emulation.
//!
//! The state after `p` layers is
//! `prod_k e^{i beta_k sum_j X_j} e^{i gamma_k C} |+>^n`, layer 1 applied
//! first, where `C` is the cost diagonal. Diagonals fed to the emulator are
//! in minimisation form (see [`CostDiagonal::for_qaoa`]), so low energy is
//! good throughout.

pub mod circuit;
mod kernel;
mod lbfgs;
mod optimize;
mod sample;

pub use optimize::{optimize_params, optimize_params_multi, OptimizeConfig, OptimizeResult};
pub use sample::{inject_readout_noise, sample, SampleSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::problem::CostDiagonal;
use crate::{Error, Result};
use kernel::Kernel;

/// QAOA angles for `p` layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::param("QAOA needs at least one layer"));
        }
        if gammas.len() != betas.len() {
            return Err(Error::DimensionMismatch {
                expected: gammas.len(),
                got: betas.len(),
            });
        }
        if gammas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(Error::param("QAOA angles must be finite"));
        }
        Ok(QaoaParams { gammas, betas })
    }

    /// Parses `gamma1,beta1,gamma2,beta2,...`.
    pub fn parse_interleaved(s: &str) -> Result<Self> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::param(format!("bad angle {t:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() % 2 != 0 {
            return Err(Error::param("angles must come in gamma,beta pairs"));
        }
        let gammas = vals.iter().step_by(2).copied().collect();
        let betas = vals.iter().skip(1).step_by(2).copied().collect();
        Self::new(gammas, betas)
    }

    pub fn to_interleaved(&self) -> String {
        self.gammas
            .iter()
            .zip(&self.betas)
            .map(|(g, b)| format!("{g},{b}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn p(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Angles with every `gamma` divided by `factor`.
    pub fn scale_gammas(&self, factor: f64) -> QaoaParams {
        QaoaParams {
            gammas: self.gammas.iter().map(|g| g / factor).collect(),
            betas: self.betas.clone(),
        }
    }

    /// `(1 - alpha) * self + alpha * other`, coordinatewise.
    pub fn lerp(&self, other: &QaoaParams, alpha: f64) -> Result<QaoaParams> {
        if self.p() != other.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: other.p(),
            });
        }
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| (1.0 - alpha) * x + alpha * y).collect()
        };
        Ok(QaoaParams {
            gammas: mix(&self.gammas, &other.gammas),
            betas: mix(&self.betas, &other.betas),
        })
    }
}

/// `2^n` complex amplitudes, basis index bit `i` = qubit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::param("amplitude count must be a power of two"));
        }
        let n = amps.len().trailing_zeros() as usize;
        Ok(Statevector { n, amps })
    }

    /// `|k>` on `n` qubits.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[k] = Complex64::new(1.0, 0.0);
        Statevector { n, amps }
    }

    /// `|+>^n`.
    pub fn uniform(n: usize) -> Self {
        let a = (0.5f64).powf(n as f64 / 2.0);
        Statevector {
            n,
            amps: vec![Complex64::new(a, 0.0); 1 << n],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Prepares the QAOA state for `params` on the cost diagonal.
pub fn qaoa_state(diag: &CostDiagonal, params: &QaoaParams) -> Statevector {
    let amps = Kernel::new(diag.values()).state(params.gammas(), params.betas());
    Statevector {
        n: diag.num_qubits(),
        amps,
    }
}

/// `<psi| C |psi>` straight from the parameters, without materialising the
/// full state when the diagonal is spin-flip symmetric.
pub fn qaoa_energy(diag: &CostDiagonal, params: &QaoaParams) -> f64 {
    Kernel::new(diag.values()).energy(params.gammas(), params.betas())
}

/// Energy with its exact gradient: `(E, dE/dgamma, dE/dbeta)`.
pub fn qaoa_energy_and_gradient(diag: &CostDiagonal, params: &QaoaParams) -> (f64, Vec<f64>, Vec<f64>) {
    Kernel::new(diag.values()).energy_and_grad(params.gammas(), params.betas())
}

/// `sum_k |amp_k|^2 values[k]`.
pub fn expectation(state: &Statevector, diag: &CostDiagonal) -> Result<f64> {
    if state.amps.len() != diag.values().len() {
        return Err(Error::DimensionMismatch {
            expected: diag.values().len(),
            got: state.amps.len(),
        });
    }
    Ok(state
        .amps
        .iter()
        .zip(diag.values())
        .map(|(a, &v)| a.norm_sqr() * v)
        .sum())
}

/// Rescaled approximation ratio `1 - (E - min) / (max - min)`; 1 for a
/// constant spectrum.
pub fn ar_star(energy: f64, diag: &CostDiagonal) -> f64 {
    let (lo, hi) = (diag.min_value(), diag.max_value());
    if hi <= lo {
        return 1.0;
    }
    1.0 - (energy - lo) / (hi - lo)
}
