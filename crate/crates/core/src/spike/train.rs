use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary event record over `len` timesteps, bit-packed 64 steps per word.
///
/// Bits past `len` in the last word are always zero, so word-level popcounts
/// equal spike counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeTrain {
    words: Vec<u64>,
    len: usize,
}

pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl SpikeTrain {
    pub fn zeros(len: usize) -> Self {
        SpikeTrain {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut words = vec![u64::MAX; words_for(len)];
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        SpikeTrain { words, len }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if bit {
                *words.last_mut().unwrap() |= 1 << (len % 64);
            }
            len += 1;
        }
        SpikeTrain { words, len }
    }

    /// Builds a train from packed words, masking off bits past `len`.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != words_for(len) {
            return Err(Error::domain(format!(
                "{} words cannot hold exactly {len} timesteps",
                words.len()
            )));
        }
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Ok(SpikeTrain { words, len })
    }

    /// Number of timesteps `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, t: usize) -> bool {
        assert!(t < self.len, "timestep {t} out of range 0..{}", self.len);
        self.words[t / 64] >> (t % 64) & 1 == 1
    }

    pub fn set(&mut self, t: usize, spike: bool) {
        assert!(t < self.len, "timestep {t} out of range 0..{}", self.len);
        let mask = 1u64 << (t % 64);
        if spike {
            self.words[t / 64] |= mask;
        } else {
            self.words[t / 64] &= !mask;
        }
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |t| self.words[t / 64] >> (t % 64) & 1 == 1)
    }

    /// In-place coincidence with `other`.
    pub fn and_assign(&mut self, other: &SpikeTrain) -> Result<()> {
        self.check_len(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
        Ok(())
    }

    /// Number of timesteps where both trains spike.
    pub fn coincidences(&self, other: &SpikeTrain) -> Result<u64> {
        self.check_len(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum())
    }

    fn check_len(&self, other: &SpikeTrain) -> Result<()> {
        if self.len != other.len {
            return Err(Error::domain(format!(
                "spike train length mismatch: {} vs {}",
                self.len, other.len
            )));
        }
        Ok(())
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }
}

/// JSON debug form: a `0`/`1` string.
impl Serialize for SpikeTrain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        text.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpikeTrain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!(
                    "invalid spike character {other:?}"
                ))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(SpikeTrain::from_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_masks_tail() {
        let t = SpikeTrain::ones(70);
        assert_eq!(t.count(), 70);
        assert_eq!(t.words()[1], (1 << 6) - 1);
    }

    #[test]
    fn from_bits_roundtrip() {
        let bits = [true, false, true, true, false];
        let t = SpikeTrain::from_bits(bits);
        assert_eq!(t.len(), 5);
        assert_eq!(t.iter().collect::<Vec<_>>(), bits);
        assert_eq!(t.count(), 3);
    }

    #[test]
    fn from_words_rejects_wrong_size_and_masks() {
        assert!(SpikeTrain::from_words(vec![0, 0], 10).is_err());
        let t = SpikeTrain::from_words(vec![u64::MAX], 3).unwrap();
        assert_eq!(t.count(), 3);
    }

    #[test]
    fn coincidence_length_mismatch() {
        let a = SpikeTrain::ones(8);
        let b = SpikeTrain::ones(9);
        assert!(a.coincidences(&b).is_err());
        let mut c = a.clone();
        assert!(c.and_assign(&b).is_err());
    }

    #[test]
    fn set_and_get() {
        let mut t = SpikeTrain::zeros(130);
        t.set(129, true);
        t.set(3, true);
        t.set(3, false);
        assert!(t.get(129));
        assert!(!t.get(3));
        assert_eq!(t.count(), 1);
    }

    #[test]
    fn json_form() {
        let t = SpikeTrain::from_bits([true, false, true]);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, "\"101\"");
        let back: SpikeTrain = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<SpikeTrain>("\"102\"").is_err());
    }
}
