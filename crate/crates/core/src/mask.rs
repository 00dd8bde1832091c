//! Vertices of the Boolean cube, i.e. subsets of a dataset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// A length-`n` bit-vector. Bit `i` set means point `i` is in the subset.
///
/// The textual form writes bit 0 first, so `"11110"` is the subset
/// `{0, 1, 2, 3}` of a five point dataset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    len: usize,
    count: usize,
    words: Vec<u64>,
}

impl SubsetMask {
    pub fn empty(len: usize) -> Self {
        SubsetMask {
            len,
            count: 0,
            words: vec![0; len.div_ceil(WORD)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut mask = Self::empty(len);
        for (w, word) in mask.words.iter_mut().enumerate() {
            let bits = (len - w * WORD).min(WORD);
            *word = if bits == WORD { u64::MAX } else { (1u64 << bits) - 1 };
        }
        mask.count = len;
        mask
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = Self::empty(len);
        for i in indices {
            if i >= len {
                return Err(Error::invalid(format!("index {i} out of range for mask of length {len}")));
            }
            mask.set(i);
        }
        Ok(mask)
    }

    /// Builds a mask from the low `len` bits of `bits` (bit `i` = point `i`).
    pub fn from_bits(len: usize, bits: u64) -> Self {
        debug_assert!(len <= WORD);
        let bits = if len == WORD { bits } else { bits & ((1u64 << len) - 1) };
        let mut mask = Self::empty(len);
        if len > 0 {
            mask.words[0] = bits;
        }
        mask.count = bits.count_ones() as usize;
        mask
    }

    /// Low 64 bits as an integer. Only meaningful for `len <= 64`.
    pub fn to_bits(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of set bits, the Hamming weight `‖x‖₁`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for mask of length {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for mask of length {}", self.len);
        let word = &mut self.words[i / WORD];
        let bit = 1u64 << (i % WORD);
        if *word & bit == 0 {
            *word |= bit;
            self.count += 1;
        }
    }

    pub fn clear(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for mask of length {}", self.len);
        let word = &mut self.words[i / WORD];
        let bit = 1u64 << (i % WORD);
        if *word & bit != 0 {
            *word &= !bit;
            self.count -= 1;
        }
    }

    pub fn assign(&mut self, i: usize, value: bool) {
        if value {
            self.set(i)
        } else {
            self.clear(i)
        }
    }

    /// `x^{⊕i}`: a copy with bit `i` flipped.
    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.assign(i, !self.get(i));
        out
    }

    pub fn with(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.set(i);
        out
    }

    pub fn without(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.clear(i);
        out
    }

    /// Indices of set bits in ascending order.
    pub fn ones(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            word_idx: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    /// Indices of unset bits in ascending order.
    pub fn zeros(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| !self.get(i))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.ones().collect()
    }

    /// Partial order of the cube: `self ≼ other` iff every bit of `self` is
    /// set in `other`.
    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn intersection_count(&self, other: &SubsetMask) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

pub struct Ones<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * WORD + bit);
            }
            self.word_idx += 1;
            self.current = *self.words.get(self.word_idx)?;
        }
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetMask({self})")
    }
}

impl FromStr for SubsetMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut mask = Self::empty(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => mask.set(i),
                other => return Err(Error::invalid(format!("invalid mask character {other:?}"))),
            }
        }
        Ok(mask)
    }
}

/// Serialised as `{ "len": n, "indices": [...] }`.
#[derive(Serialize, Deserialize)]
struct MaskRepr {
    len: usize,
    indices: Vec<usize>,
}

impl Serialize for SubsetMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRepr {
            len: self.len,
            indices: self.indices(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubsetMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MaskRepr::deserialize(deserializer)?;
        SubsetMask::from_indices(repr.len, repr.indices).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_and_empty() {
        for len in [0, 1, 63, 64, 65, 130] {
            let full = SubsetMask::full(len);
            assert_eq!(full.count(), len);
            assert_eq!(full.ones().count(), len);
            assert_eq!(SubsetMask::empty(len).ones().count(), 0);
        }
    }

    #[test]
    fn string_form_is_bit_zero_first() {
        let mask: SubsetMask = "11110".parse().unwrap();
        assert_eq!(mask.indices(), vec![0, 1, 2, 3]);
        assert_eq!(mask.to_string(), "11110");
        assert_eq!(SubsetMask::from_bits(5, 0b01111), mask);
        assert!("1102".parse::<SubsetMask>().is_err());
    }

    #[test]
    fn flip_updates_count() {
        let mask: SubsetMask = "10100".parse().unwrap();
        let f = mask.flipped(1);
        assert_eq!(f.to_string(), "11100");
        assert_eq!(f.count(), 3);
        assert_eq!(f.flipped(1), mask);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(SubsetMask::from_indices(4, [4]).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip(len in 1usize..200, seed in any::<u64>()) {
            let mut mask = SubsetMask::empty(len);
            let mut s = seed;
            for i in 0..len {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if s >> 63 == 1 { mask.set(i); }
            }
            let back: SubsetMask = serde_json::from_str(&serde_json::to_string(&mask).unwrap()).unwrap();
            prop_assert_eq!(back.count(), mask.count());
            prop_assert_eq!(back, mask);
        }

        #[test]
        fn subset_order_matches_indices(a in any::<u16>(), b in any::<u16>()) {
            let ma = SubsetMask::from_bits(16, a as u64);
            let mb = SubsetMask::from_bits(16, b as u64);
            prop_assert_eq!(ma.is_subset_of(&mb), a & !b == 0);
            prop_assert_eq!(ma.intersection_count(&mb), (a & b).count_ones() as usize);
        }
    }
}
