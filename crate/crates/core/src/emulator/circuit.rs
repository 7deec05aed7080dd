//! Gate-level register for executing routed circuits on physical qubits.
//!
//! Only the gates a routed QAOA layer needs are provided: diagonal phases,
//! swaps and the `e^{i beta X}` mixer rotation.

use num_complex::Complex64;

use super::Statevector;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Register {
    n: usize,
    amps: Vec<Complex64>,
}

impl Register {
    /// `|0...0>` on `n` qubits.
    pub fn zeros(n: usize) -> Result<Self> {
        if n > crate::DEFAULT_EMULATION_CAP {
            return Err(Error::CapExceeded {
                n,
                cap: crate::DEFAULT_EMULATION_CAP,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Register { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn hadamard(&mut self, q: usize) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        self.pairs(q, |a, b| ((a + b) * h, (a - b) * h));
    }

    /// `e^{i beta X}` on qubit `q`.
    pub fn x_rotation(&mut self, q: usize, beta: f64) {
        let (s, c) = beta.sin_cos();
        let is = Complex64::new(0.0, s);
        self.pairs(q, |a, b| (a * c + b * is, a * is + b * c));
    }

    /// Multiplies amplitudes with qubit `q` set by `e^{i theta}`.
    pub fn phase(&mut self, q: usize, theta: f64) {
        let ph = Complex64::from_polar(1.0, theta);
        let bit = 1usize << q;
        for (k, a) in self.amps.iter_mut().enumerate() {
            if k & bit != 0 {
                *a *= ph;
            }
        }
    }

    /// Multiplies amplitudes with both `a` and `b` set by `e^{i theta}`.
    pub fn pair_phase(&mut self, a: usize, b: usize, theta: f64) {
        let ph = Complex64::from_polar(1.0, theta);
        let mask = (1usize << a) | (1usize << b);
        for (k, amp) in self.amps.iter_mut().enumerate() {
            if k & mask == mask {
                *amp *= ph;
            }
        }
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (ba, bb) = (1usize << a, 1usize << b);
        for k in 0..self.amps.len() {
            if k & ba != 0 && k & bb == 0 {
                self.amps.swap(k, k ^ ba ^ bb);
            }
        }
    }

    pub fn into_statevector(self) -> Statevector {
        Statevector::from_amplitudes(self.amps).expect("power-of-two length")
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn pairs(&mut self, q: usize, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) {
        let stride = 1usize << q;
        for chunk in self.amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = f(*x, *y);
                *x = a;
                *y = b;
            }
        }
    }
}
