//! Bit-string helpers.
//!
//! Bit-strings are stored as `u8` slices holding 0 or 1, one entry per
//! variable. When packed into an integer index, variable `i` is bit `i` of
//! the index. The text form writes variable 0 first.

use crate::{Error, Result};

/// Unpacks `index` into `n` bits, variable `i` taken from bit `i`.
pub fn from_index(index: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

/// Packs a bit-string into an index. Panics if `bits.len() > 64`.
pub fn to_index(bits: &[u8]) -> u64 {
    assert!(bits.len() <= 64, "bit-string longer than 64 bits");
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (((b & 1) as u64) << i))
}

/// Text form, variable 0 first.
pub fn to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn index_to_string(index: u64, n: usize) -> String {
    (0..n)
        .map(|i| if (index >> i) & 1 == 0 { '0' } else { '1' })
        .collect()
}

pub fn parse(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::param(format!("invalid bit character {other:?}"))),
        })
        .collect()
}

pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// Stable 64-bit FNV-1a hash of a bit-string, used to tag warm starts.
pub fn hash(bits: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bits {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Spin value `z = 1 - 2x`.
pub fn spins(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| 1 - 2 * (b as i8)).collect()
}

pub fn from_spins(z: &[i8]) -> Vec<u8> {
    z.iter().map(|&s| if s < 0 { 1 } else { 0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let b = vec![1, 0, 1, 1, 0];
        assert_eq!(to_index(&b), 0b01101);
        assert_eq!(from_index(0b01101, 5), b);
        assert_eq!(to_string(&b), "10110");
        assert_eq!(index_to_string(0b01101, 5), "10110");
        assert_eq!(parse("10110").unwrap(), b);
    }

    #[test]
    fn parse_rejects_junk() {
        assert!(parse("10x").is_err());
    }

    #[test]
    fn spin_conversion() {
        assert_eq!(spins(&[0, 1]), vec![1, -1]);
        assert_eq!(from_spins(&[1, -1]), vec![0, 1]);
    }
}
