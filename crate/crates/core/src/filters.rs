//! Readout correction and the energy, frequency and Hamming filters.
//!
//! Filter fractions count shot occurrences, not distinct strings. All
//! filters are deterministic; ties are broken by energy and then by the
//! text form of the bit-string (variable 0 first).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::emulator::SampleSet;
use crate::problem::QuboInstance;
use crate::{bits, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitReadout {
    /// P(read 1 | prepared 0).
    pub p: f64,
    /// P(read 0 | prepared 1).
    pub q: f64,
}

/// Independent per-qubit readout errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub qubits: Vec<QubitReadout>,
}

impl ReadoutModel {
    pub fn new(qubits: Vec<QubitReadout>) -> Result<Self> {
        for (i, r) in qubits.iter().enumerate() {
            if !(0.0..1.0).contains(&r.p) || !(0.0..1.0).contains(&r.q) {
                return Err(Error::param(format!("qubit {i}: flip probabilities must lie in [0, 1)")));
            }
            if r.p + r.q >= 1.0 {
                return Err(Error::param(format!("qubit {i}: p + q >= 1 makes the confusion matrix singular")));
            }
        }
        Ok(ReadoutModel { qubits })
    }

    pub fn uniform(n: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(vec![QubitReadout { p, q }; n])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ReadoutModel = serde_json::from_str(text)?;
        Self::new(m.qubits)
    }

    /// Flip pairs in the form [`crate::emulator::inject_readout_noise`] takes.
    pub fn flips(&self) -> Vec<(f64, f64)> {
        self.qubits.iter().map(|r| (r.p, r.q)).collect()
    }

    /// Rows of the per-qubit inverse `[[a00, a01], [a10, a11]]`, indexed
    /// `[true][read]`.
    fn inverse(&self) -> Vec<[[f64; 2]; 2]> {
        self.qubits
            .iter()
            .map(|r| {
                let det = 1.0 - r.p - r.q;
                [[(1.0 - r.q) / det, -r.q / det], [-r.p / det, (1.0 - r.p) / det]]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub energy_keep: f64,
    pub frequency_threshold: f64,
    pub hamming_seed: f64,
    pub hamming_expansion: f64,
    /// Hamming radius of the support used by readout correction.
    pub readout_radius: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            energy_keep: 0.10,
            frequency_threshold: 0.0005,
            hamming_seed: 0.01,
            hamming_expansion: 0.09,
            readout_radius: 2,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.energy_keep) || !unit(self.frequency_threshold) {
            return Err(Error::param("filter fractions must lie in (0, 1]"));
        }
        if !unit(self.hamming_seed) || !unit(self.hamming_expansion) {
            return Err(Error::param("Hamming fractions must lie in (0, 1]"));
        }
        if self.hamming_seed + self.hamming_expansion > 1.0 + 1e-12 {
            return Err(Error::param("Hamming seed and expansion fractions exceed 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: FilterConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Readout,
    Energy,
    Frequency,
    Hamming,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "readout" => Ok(FilterKind::Readout),
            "energy" => Ok(FilterKind::Energy),
            "frequency" => Ok(FilterKind::Frequency),
            "hamming" => Ok(FilterKind::Hamming),
            _ => Err(Error::param(format!("unknown filter {s:?}"))),
        }
    }
}

/// Key whose numeric order is the lexicographic order of the text form.
fn lex_key(k: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        k.reverse_bits() >> (64 - n)
    }
}

fn ceil_frac(f: f64, shots: u64) -> u64 {
    ((f * shots as f64) - 1e-9).ceil().max(0.0) as u64
}

fn check_width(s: &SampleSet, q: &QuboInstance) -> Result<()> {
    if s.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: s.n(),
        });
    }
    Ok(())
}

/// Distinct strings with minimisation-form energies, best first.
fn ranked(s: &SampleSet, q: &QuboInstance) -> Vec<(u64, f64)> {
    let mut v: Vec<(u64, f64)> = s
        .counts()
        .keys()
        .map(|&k| (k, q.min_energy(&bits::from_index(k, s.n()))))
        .collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(lex_key(a.0, s.n()).cmp(&lex_key(b.0, s.n()))));
    v
}

fn take(order: impl IntoIterator<Item = u64>, avail: &BTreeMap<u64, u64>, mut budget: u64, out: &mut BTreeMap<u64, u64>) {
    for k in order {
        if budget == 0 {
            break;
        }
        let have = avail[&k] - out.get(&k).copied().unwrap_or(0);
        let t = have.min(budget);
        if t > 0 {
            *out.entry(k).or_insert(0) += t;
            budget -= t;
        }
    }
}

/// Keeps the `ceil(energy_keep * shots)` lowest-energy occurrences.
pub fn energy_filter(s: &SampleSet, q: &QuboInstance, cfg: &FilterConfig) -> Result<SampleSet> {
    cfg.validate()?;
    check_width(s, q)?;
    if s.is_empty() {
        return Err(Error::param("cannot filter an empty sample set"));
    }
    let mut out = BTreeMap::new();
    take(
        ranked(s, q).into_iter().map(|e| e.0),
        s.counts(),
        ceil_frac(cfg.energy_keep, s.shots()),
        &mut out,
    );
    SampleSet::new(s.n(), out)
}

/// Keeps strings whose frequency reaches the threshold, halving the
/// threshold until at least one does. Uniform histograms pass through.
/// The rule is reapplied until the output no longer changes, so the
/// filter is idempotent.
pub fn frequency_filter(s: &SampleSet, cfg: &FilterConfig) -> Result<SampleSet> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::param("cannot filter an empty sample set"));
    }
    let mut cur = s.clone();
    loop {
        let next = frequency_step(&cur, cfg.frequency_threshold)?;
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
}

fn frequency_step(s: &SampleSet, threshold: f64) -> Result<SampleSet> {
    let counts = s.counts();
    let first = *counts.values().next().expect("nonempty");
    if counts.values().all(|&c| c == first) {
        return Ok(s.clone());
    }
    let max = *counts.values().max().expect("nonempty");
    let shots = s.shots() as f64;
    let mut t = threshold;
    while (max as f64) / shots < t {
        t /= 2.0;
    }
    let kept = counts
        .iter()
        .filter(|&(_, &c)| c as f64 / shots >= t)
        .map(|(&k, &c)| (k, c))
        .collect();
    SampleSet::new(s.n(), kept)
}

/// Seeds are the `ceil(hamming_seed * shots)` lowest-energy occurrences;
/// then `ceil(hamming_expansion * shots)` further occurrences are added by
/// smallest Hamming distance to any seed string (ties by energy, then
/// lexicographically).
pub fn hamming_filter(s: &SampleSet, q: &QuboInstance, cfg: &FilterConfig) -> Result<SampleSet> {
    cfg.validate()?;
    check_width(s, q)?;
    if s.is_empty() {
        return Err(Error::param("cannot filter an empty sample set"));
    }
    let rank = ranked(s, q);
    let mut out = BTreeMap::new();
    take(rank.iter().map(|e| e.0), s.counts(), ceil_frac(cfg.hamming_seed, s.shots()), &mut out);
    let seeds: Vec<u64> = out.keys().copied().collect();
    let dist = |k: u64| seeds.iter().map(|&t| bits::hamming(k, t)).min().unwrap_or(u32::MAX);
    let mut by_dist: Vec<(u32, usize, u64)> = rank.iter().enumerate().map(|(r, &(k, _))| (dist(k), r, k)).collect();
    by_dist.sort_unstable();
    take(
        by_dist.into_iter().map(|e| e.2),
        s.counts(),
        ceil_frac(cfg.hamming_expansion, s.shots()),
        &mut out,
    );
    SampleSet::new(s.n(), out)
}

/// Euclidean projection onto `{x >= 0, sum x = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Integer counts summing to `total`, proportional to `weights` by the
/// largest-remainder method. Ties go to the earlier entry.
pub fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

fn neighbourhood(k: u64, n: usize, radius: usize, out: &mut Vec<u64>) {
    out.push(k);
    if radius >= 1 {
        for i in 0..n {
            out.push(k ^ (1 << i));
            if radius >= 2 {
                for j in i + 1..n {
                    out.push(k ^ (1 << i) ^ (1 << j));
                }
            }
        }
    }
    if radius >= 3 {
        // Rarely used; enumerate the remaining shells directly.
        for m in 3..=radius.min(n) {
            let mut combo: Vec<usize> = (0..m).collect();
            loop {
                out.push(combo.iter().fold(k, |acc, &i| acc ^ (1 << i)));
                let mut i = m;
                while i > 0 && combo[i - 1] == n - m + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                combo[i - 1] += 1;
                for j in i..m {
                    combo[j] = combo[j - 1] + 1;
                }
            }
        }
    }
}

/// Applies the tensored inverse confusion matrix on the observed support
/// widened to Hamming radius `cfg.readout_radius`, with entries between
/// strings further apart than the radius dropped. The quasi-distribution
/// is projected onto the probability simplex and rounded back to the
/// original shot count.
pub fn readout_correct(s: &SampleSet, model: &ReadoutModel, cfg: &FilterConfig) -> Result<SampleSet> {
    let n = s.n();
    if model.qubits.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: model.qubits.len(),
        });
    }
    let model = ReadoutModel::new(model.qubits.clone())?;
    if s.is_empty() {
        return Ok(s.clone());
    }
    let inv = model.inverse();
    let shots = s.shots() as f64;
    let mut quasi: HashMap<u64, f64> = HashMap::new();
    let mut near = Vec::new();
    for (&t, &c) in s.counts() {
        near.clear();
        neighbourhood(t, n, cfg.readout_radius, &mut near);
        for &k in &near {
            let mut w = c as f64 / shots;
            for (i, m) in inv.iter().enumerate() {
                w *= m[((k >> i) & 1) as usize][((t >> i) & 1) as usize];
            }
            *quasi.entry(k).or_insert(0.0) += w;
        }
    }
    let mut keys: Vec<u64> = quasi.keys().copied().collect();
    keys.sort_unstable();
    let vals: Vec<f64> = keys.iter().map(|k| quasi[k]).collect();
    let probs = project_simplex(&vals);
    let counts = largest_remainder(&probs, s.shots());
    SampleSet::new(n, keys.into_iter().zip(counts).filter(|e| e.1 > 0).collect())
}

/// Runs one filter by kind. `model` is required for readout correction and
/// `q` for the energy and Hamming filters.
pub fn apply_filter(
    kind: FilterKind,
    s: &SampleSet,
    q: Option<&QuboInstance>,
    model: Option<&ReadoutModel>,
    cfg: &FilterConfig,
) -> Result<SampleSet> {
    let need_q = || q.ok_or_else(|| Error::param("this filter needs the problem instance"));
    match kind {
        FilterKind::Readout => readout_correct(s, model.ok_or_else(|| Error::param("readout correction needs a model"))?, cfg),
        FilterKind::Energy => energy_filter(s, need_q()?, cfg),
        FilterKind::Frequency => frequency_filter(s, cfg),
        FilterKind::Hamming => hamming_filter(s, need_q()?, cfg),
    }
}

/// Total variation distance between two empirical distributions.
pub fn tv_distance(a: &SampleSet, b: &SampleSet) -> f64 {
    let fa: HashMap<u64, f64> = a.frequencies().into_iter().collect();
    let fb: HashMap<u64, f64> = b.frequencies().into_iter().collect();
    let mut keys: Vec<u64> = fa.keys().chain(fb.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (fa.get(k).unwrap_or(&0.0) - fb.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}
