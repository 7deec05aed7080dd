//! Statevector kernels shared by evolution and the adjoint gradient.
//!
//! When the diagonal is invariant under flipping every bit (Max-Cut and any
//! other spin-flip symmetric cost) the QAOA state is too, so only the half
//! of the amplitudes with the top qubit at 0 is stored. Flipping the top
//! qubit of a stored index lands on the complement of another stored index,
//! so the top qubit's mixer rotation pairs `k` with `k ^ mask`.

use num_complex::Complex64;

pub(crate) type Amps = Vec<Complex64>;

/// Phase lookup: a few distinct cost values shared by many basis states.
struct Levels {
    values: Vec<f64>,
    index: Vec<u32>,
}

pub(crate) struct Kernel<'a> {
    diag: &'a [f64],
    /// Qubits actually simulated (n - 1 when folded).
    qubits: usize,
    folded: bool,
    levels: Option<Levels>,
}

const MAX_LEVELS: usize = 4096;

impl<'a> Kernel<'a> {
    pub(crate) fn new(values: &'a [f64]) -> Self {
        let n = values.len().trailing_zeros() as usize;
        let folded = n >= 2 && {
            let mask = values.len() - 1;
            let half = values.len() / 2;
            (0..half).all(|k| values[k] == values[k ^ mask])
        };
        let diag = if folded { &values[..values.len() / 2] } else { values };
        let qubits = if folded { n - 1 } else { n };
        Kernel {
            diag,
            qubits,
            folded,
            levels: Levels::build(diag),
        }
    }

    /// Final-state amplitudes over the full space.
    pub(crate) fn state(&self, gammas: &[f64], betas: &[f64]) -> Amps {
        let half = self.evolve(gammas, betas);
        if !self.folded {
            return half;
        }
        let mut full = Vec::with_capacity(half.len() * 2);
        full.extend_from_slice(&half);
        // amp(k with top bit set) = amp(k xor all-ones) = amp of the complement
        let mask = half.len() - 1;
        full.extend((0..half.len()).map(|k| half[k ^ mask]));
        full
    }

    fn evolve(&self, gammas: &[f64], betas: &[f64]) -> Amps {
        let dim = self.diag.len();
        let full_qubits = self.qubits + self.folded as usize;
        let a0 = (0.5f64).powf(full_qubits as f64 / 2.0);
        let mut psi = vec![Complex64::new(a0, 0.0); dim];
        for (&g, &b) in gammas.iter().zip(betas) {
            self.phase(&mut psi, g);
            self.mixer(&mut psi, b);
        }
        psi
    }

    /// Norm-weighted factor converting sums over the stored half into sums
    /// over the full space.
    fn fold_factor(&self) -> f64 {
        if self.folded {
            2.0
        } else {
            1.0
        }
    }

    pub(crate) fn energy(&self, gammas: &[f64], betas: &[f64]) -> f64 {
        let psi = self.evolve(gammas, betas);
        self.fold_factor() * expect(&psi, self.diag)
    }

    /// Energy and its gradient `(d/dgamma, d/dbeta)` by reverse-mode
    /// propagation through the layers.
    pub(crate) fn energy_and_grad(&self, gammas: &[f64], betas: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let p = gammas.len();
        let mut psi = self.evolve(gammas, betas);
        let f = self.fold_factor();
        let energy = f * expect(&psi, self.diag);
        let mut lam: Amps = psi.iter().zip(self.diag).map(|(a, &d)| a * d).collect();
        let mut gg = vec![0.0; p];
        let mut gb = vec![0.0; p];
        for k in (0..p).rev() {
            gb[k] = -2.0 * f * self.unmix_pair(&mut lam, &mut psi, betas[k]).im;
            gg[k] = -2.0 * f * self.unphase_pair(&mut lam, &mut psi, gammas[k]).im;
        }
        (energy, gg, gb)
    }

    fn phase(&self, psi: &mut [Complex64], gamma: f64) {
        if gamma == 0.0 {
            return;
        }
        match &self.levels {
            Some(lv) => {
                let table: Vec<Complex64> = lv
                    .values
                    .iter()
                    .map(|&v| Complex64::from_polar(1.0, gamma * v))
                    .collect();
                for (a, &i) in psi.iter_mut().zip(&lv.index) {
                    *a *= table[i as usize];
                }
            }
            None => {
                for (a, &v) in psi.iter_mut().zip(self.diag) {
                    let (s, c) = (gamma * v).sin_cos();
                    *a *= Complex64::new(c, s);
                }
            }
        }
    }

    /// `e^{i beta sum X_j}` applied qubit by qubit.
    fn mixer(&self, psi: &mut [Complex64], beta: f64) {
        if beta == 0.0 {
            return;
        }
        let (s, c) = beta.sin_cos();
        for j in 0..self.qubits {
            let stride = 1usize << j;
            for chunk in psi.chunks_exact_mut(2 * stride) {
                let (lo, hi) = chunk.split_at_mut(stride);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = Complex64::new(c * x.re - s * y.im, c * x.im + s * y.re);
                    *b = Complex64::new(c * y.re - s * x.im, c * y.im + s * x.re);
                }
            }
        }
        if self.folded {
            let mask = psi.len() - 1;
            for k in 0..psi.len() / 2 {
                let m = k ^ mask;
                let (x, y) = (psi[k], psi[m]);
                psi[k] = Complex64::new(c * x.re - s * y.im, c * x.im + s * y.re);
                psi[m] = Complex64::new(c * y.re - s * x.im, c * y.im + s * x.re);
            }
        }
    }

    /// Returns `<lam| sum_j X_j |psi>` and undoes the mixer on both
    /// vectors in the same sweep. The rotations on other qubits commute with
    /// `X_j`, so each qubit's term can be read off just before its own
    /// rotation is undone.
    fn unmix_pair(&self, lam: &mut [Complex64], psi: &mut [Complex64], beta: f64) -> Complex64 {
        let (s, c) = (-beta).sin_cos();
        let rot = |x: Complex64, y: Complex64| {
            (
                Complex64::new(c * x.re - s * y.im, c * x.im + s * y.re),
                Complex64::new(c * y.re - s * x.im, c * y.im + s * x.re),
            )
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.qubits {
            let stride = 1usize << j;
            for (lc, pc) in lam.chunks_exact_mut(2 * stride).zip(psi.chunks_exact_mut(2 * stride)) {
                let (l0, l1) = lc.split_at_mut(stride);
                let (p0, p1) = pc.split_at_mut(stride);
                for k in 0..stride {
                    acc += l0[k].conj() * p1[k] + l1[k].conj() * p0[k];
                    (l0[k], l1[k]) = rot(l0[k], l1[k]);
                    (p0[k], p1[k]) = rot(p0[k], p1[k]);
                }
            }
        }
        if self.folded {
            let mask = psi.len() - 1;
            for k in 0..psi.len() / 2 {
                let m = k ^ mask;
                acc += lam[k].conj() * psi[m] + lam[m].conj() * psi[k];
                (lam[k], lam[m]) = rot(lam[k], lam[m]);
                (psi[k], psi[m]) = rot(psi[k], psi[m]);
            }
        }
        acc
    }

    /// Returns `<lam| C |psi>` and undoes the phase layer on both vectors.
    fn unphase_pair(&self, lam: &mut [Complex64], psi: &mut [Complex64], gamma: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        match &self.levels {
            Some(lv) => {
                let table: Vec<Complex64> = lv
                    .values
                    .iter()
                    .map(|&v| Complex64::from_polar(1.0, -gamma * v))
                    .collect();
                for ((l, a), (&i, &d)) in lam.iter_mut().zip(psi.iter_mut()).zip(lv.index.iter().zip(self.diag)) {
                    acc += l.conj() * *a * d;
                    let t = table[i as usize];
                    *l *= t;
                    *a *= t;
                }
            }
            None => {
                for ((l, a), &d) in lam.iter_mut().zip(psi.iter_mut()).zip(self.diag) {
                    acc += l.conj() * *a * d;
                    let (s, c) = (-gamma * d).sin_cos();
                    let t = Complex64::new(c, s);
                    *l *= t;
                    *a *= t;
                }
            }
        }
        acc
    }
}

impl Levels {
    fn build(diag: &[f64]) -> Option<Levels> {
        let mut values: Vec<f64> = Vec::new();
        let mut index = Vec::with_capacity(diag.len());
        let mut lookup = std::collections::HashMap::new();
        for &v in diag {
            let id = match lookup.get(&v.to_bits()) {
                Some(&id) => id,
                None => {
                    if values.len() == MAX_LEVELS {
                        return None;
                    }
                    values.push(v);
                    lookup.insert(v.to_bits(), (values.len() - 1) as u32);
                    (values.len() - 1) as u32
                }
            };
            index.push(id);
        }
        Some(Levels { values, index })
    }
}

fn expect(psi: &[Complex64], diag: &[f64]) -> f64 {
    psi.iter().zip(diag).map(|(a, &d)| a.norm_sqr() * d).sum()
}
