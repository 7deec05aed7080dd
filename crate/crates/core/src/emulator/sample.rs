//! Measurement sampling and the SampleSet interchange format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Statevector;
use crate::{bits, Error, Result};

/// Histogram of measured bit-strings. Keys are packed indices (variable `i`
/// in bit `i`), so widths up to 64 are supported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    counts: BTreeMap<u64, u64>,
    shots: u64,
}

#[derive(Serialize, Deserialize)]
struct SampleSetJson {
    n: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl SampleSet {
    pub fn new(n: usize, counts: BTreeMap<u64, u64>) -> Result<Self> {
        if n > 64 {
            return Err(Error::param("sample width above 64 bits"));
        }
        if n < 64 {
            if let Some(&k) = counts.keys().find(|&&k| k >> n != 0) {
                return Err(Error::param(format!("key {k} wider than {n} bits")));
            }
        }
        let counts: BTreeMap<u64, u64> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let shots = counts.values().sum();
        Ok(SampleSet { n, counts, shots })
    }

    pub fn from_bitstrings<'a>(n: usize, strings: impl IntoIterator<Item = &'a [u8]>) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for s in strings {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
            *counts.entry(bits::to_index(s)).or_insert(0) += 1;
        }
        Self::new(n, counts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots == 0
    }

    /// Every occurrence as a bit-string, in key order.
    pub fn expand(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::with_capacity(self.shots as usize);
        for (&k, &c) in &self.counts {
            let b = bits::from_index(k, self.n);
            for _ in 0..c {
                out.push(b.clone());
            }
        }
        out
    }

    /// Empirical distribution as `(index, frequency)` pairs.
    pub fn frequencies(&self) -> Vec<(u64, f64)> {
        self.counts
            .iter()
            .map(|(&k, &c)| (k, c as f64 / self.shots as f64))
            .collect()
    }

    /// Relabels bit positions: output bit `perm[i]` takes input bit `i`.
    pub fn permute_bits(&self, perm: &[usize]) -> Result<SampleSet> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let mut counts = BTreeMap::new();
        for (&k, &c) in &self.counts {
            let mut out = 0u64;
            for (i, &t) in perm.iter().enumerate() {
                out |= ((k >> i) & 1) << t;
            }
            *counts.entry(out).or_insert(0) += c;
        }
        SampleSet::new(self.n, counts)
    }

    /// Lines `bitstring count`, variable 0 first, in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&k, &c) in &self.counts {
            writeln!(out, "{} {c}", bits::index_to_string(k, self.n)).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = SampleSetJson {
            n: self.n,
            shots: self.shots,
            counts: self
                .counts
                .iter()
                .map(|(&k, &c)| (bits::index_to_string(k, self.n), c))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serialisable")
    }

    /// Parses either the text or JSON form.
    pub fn parse(text: &str) -> Result<SampleSet> {
        if text.trim_start().starts_with('{') {
            let doc: SampleSetJson = serde_json::from_str(text)?;
            let mut counts = BTreeMap::new();
            for (s, c) in doc.counts {
                if s.len() != doc.n {
                    return Err(Error::param(format!("bit-string {s:?} is not {} wide", doc.n)));
                }
                counts.insert(bits::to_index(&bits::parse(&s)?), c);
            }
            let set = SampleSet::new(doc.n, counts)?;
            if set.shots != doc.shots {
                return Err(Error::param(format!(
                    "shots field {} disagrees with counts total {}",
                    doc.shots, set.shots
                )));
            }
            return Ok(set);
        }
        let mut n = None;
        let mut counts = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(s), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: "expected `bitstring count`".into(),
                });
            };
            let b = bits::parse(s).map_err(|e| Error::Parse {
                line: k + 1,
                msg: e.to_string(),
            })?;
            if *n.get_or_insert(b.len()) != b.len() || b.len() > 64 {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: "inconsistent bit-string width".into(),
                });
            }
            let c: u64 = c.parse().map_err(|_| Error::Parse {
                line: k + 1,
                msg: format!("bad count {c:?}"),
            })?;
            *counts.entry(bits::to_index(&b)).or_insert(0) += c;
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            msg: "no samples".into(),
        })?;
        SampleSet::new(n, counts)
    }
}

/// Draws `shots` i.i.d. measurements of `state` by inverse-CDF lookup.
pub fn sample(state: &Statevector, shots: u64, seed: u64) -> SampleSet {
    let mut cdf = Vec::with_capacity(state.amplitudes().len());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(k as u64).or_insert(0) += 1;
    }
    SampleSet::new(state.num_qubits(), counts).expect("indices fit the width")
}

/// Flips each bit independently: 0 to 1 with probability `p[i]`, 1 to 0
/// with probability `q[i]`.
pub fn inject_readout_noise(s: &SampleSet, flips: &[(f64, f64)], seed: u64) -> Result<SampleSet> {
    if flips.len() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            got: flips.len(),
        });
    }
    if flips
        .iter()
        .any(|&(p, q)| !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q))
    {
        return Err(Error::param("flip probabilities must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for (&k, &c) in s.counts() {
        for _ in 0..c {
            let mut out = k;
            for (i, &(p, q)) in flips.iter().enumerate() {
                let one = (k >> i) & 1 == 1;
                let flip = if one { q } else { p };
                if flip > 0.0 && rng.gen::<f64>() < flip {
                    out ^= 1 << i;
                }
            }
            *counts.entry(out).or_insert(0) += 1;
        }
    }
    SampleSet::new(s.n(), counts)
}
