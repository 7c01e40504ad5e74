//! Code-offset secure sketch over a repetition code.
//!
//! Enrollment draws a random key, repeats each key bit `2t+1` times and
//! publishes `helper = signature ⊕ codeword`. Reproduction XORs a fresh
//! signature with the helper and majority-decodes each block, recovering
//! the key whenever at most `t` bits of any block flipped (in particular
//! whenever the total Hamming distance is at most `t`).
//!
//! Nothing in the helper authenticates the result: beyond `t` errors a wrong
//! key can come back, and callers compare against the enrolled copy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BinarySignature, DevfingError};

/// Public helper data produced at enrollment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzySketch {
    #[serde(with = "bitstring")]
    pub helper: Vec<bool>,
    pub t: usize,
    pub key_bits: usize,
}

impl FuzzySketch {
    pub fn block_len(&self) -> usize {
        2 * self.t + 1
    }
}

pub fn fe_generate(
    sig: &BinarySignature,
    t: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<bool>, FuzzySketch), DevfingError> {
    let bits = sig.bits();
    let block = 2 * t + 1;
    if bits.len() < block {
        return Err(DevfingError::SignatureTooShort {
            bits: bits.len(),
            block,
        });
    }
    let key_bits = bits.len() / block;
    let key: Vec<bool> = (0..key_bits).map(|_| rng.random()).collect();
    // Codeword is zero over the trailing bits that do not fill a block.
    let helper = bits
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let code = if i < key_bits * block { key[i / block] } else { false };
            b ^ code
        })
        .collect();
    Ok((
        key,
        FuzzySketch {
            helper,
            t,
            key_bits,
        },
    ))
}

pub fn fe_reproduce(noisy: &BinarySignature, sketch: &FuzzySketch) -> Result<Vec<bool>, DevfingError> {
    let bits = noisy.bits();
    if bits.len() != sketch.helper.len() {
        return Err(DevfingError::LengthMismatch {
            expected: sketch.helper.len(),
            actual: bits.len(),
        });
    }
    let block = sketch.block_len();
    let offset: Vec<bool> = bits.iter().zip(&sketch.helper).map(|(a, b)| a ^ b).collect();
    Ok(offset[..sketch.key_bits * block]
        .chunks_exact(block)
        .map(|c| 2 * c.iter().filter(|&&b| b).count() > block)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthDecision {
    Accept,
    Reject,
}

/// Exact comparison against the enrolled (golden) key.
pub fn authenticate(claimed: &[bool], enrolled: &[bool]) -> AuthDecision {
    if claimed == enrolled {
        AuthDecision::Accept
    } else {
        AuthDecision::Reject
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>, DevfingError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(DevfingError::InvalidBits),
        })
        .collect()
}

mod bitstring {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::bits_to_string(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_bits(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devfing::reference_board_matrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flip(sig: &BinarySignature, positions: &[usize]) -> BinarySignature {
        let mut bits = sig.bits();
        for &p in positions {
            bits[p] = !bits[p];
        }
        BinarySignature::from_bits(&bits).unwrap()
    }

    #[test]
    fn degenerate_t_zero() {
        let sig = reference_board_matrix().binarize();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (key, sketch) = fe_generate(&sig, 0, &mut rng).unwrap();
        assert_eq!(sketch.key_bits, 24);
        let expected: Vec<bool> = sig.bits().iter().zip(&key).map(|(a, b)| a ^ b).collect();
        assert_eq!(sketch.helper, expected);
        assert_eq!(fe_reproduce(&sig, &sketch).unwrap(), key);
        assert_ne!(fe_reproduce(&flip(&sig, &[5]), &sketch).unwrap(), key);
    }

    #[test]
    fn key_length_for_six_points() {
        let sig = reference_board_matrix().binarize();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (key, sketch) = fe_generate(&sig, 3, &mut rng).unwrap();
        assert_eq!(key.len(), 3);
        assert_eq!(sketch.key_bits, 3);
        assert_eq!(sketch.helper.len(), 24);
        // The three trailing bits are stored as-is.
        assert_eq!(&sketch.helper[21..], &sig.bits()[21..]);
        assert_eq!(fe_reproduce(&sig, &sketch).unwrap(), key);
    }

    #[test]
    fn too_short_and_length_mismatch() {
        let tiny = BinarySignature::from_bits(&[true, false, true, true]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            fe_generate(&tiny, 2, &mut rng),
            Err(DevfingError::SignatureTooShort { bits: 4, block: 5 })
        );
        let sig = reference_board_matrix().binarize();
        let (_, sketch) = fe_generate(&sig, 1, &mut rng).unwrap();
        assert!(matches!(
            fe_reproduce(&tiny, &sketch),
            Err(DevfingError::LengthMismatch { expected: 24, actual: 4 })
        ));
    }

    #[test]
    fn exhaustive_up_to_t_flips() {
        // Independent oracle: enumerate every flip set of weight 1..=t.
        let sig = reference_board_matrix().binarize();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (key, sketch) = fe_generate(&sig, 3, &mut rng).unwrap();
        let mut patterns = 0;
        for a in 0..24 {
            assert_eq!(fe_reproduce(&flip(&sig, &[a]), &sketch).unwrap(), key);
            patterns += 1;
            for b in a + 1..24 {
                assert_eq!(fe_reproduce(&flip(&sig, &[a, b]), &sketch).unwrap(), key);
                patterns += 1;
                for c in b + 1..24 {
                    assert_eq!(fe_reproduce(&flip(&sig, &[a, b, c]), &sketch).unwrap(), key);
                    patterns += 1;
                }
            }
        }
        assert_eq!(patterns, 2324);
    }

    #[test]
    fn t_plus_one_flips_in_one_block_corrupt_the_key() {
        let sig = reference_board_matrix().binarize();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (key, sketch) = fe_generate(&sig, 3, &mut rng).unwrap();
        let got = fe_reproduce(&flip(&sig, &[7, 8, 9, 10]), &sketch).unwrap();
        assert_ne!(got[1], key[1]);
        assert_eq!((got[0], got[2]), (key[0], key[2]));
        assert_eq!(authenticate(&got, &key), AuthDecision::Reject);
    }

    #[test]
    fn authenticate_cases() {
        assert_eq!(authenticate(&[true, false], &[true, false]), AuthDecision::Accept);
        assert_eq!(authenticate(&[true, true], &[true, false]), AuthDecision::Reject);
        assert_eq!(authenticate(&[], &[]), AuthDecision::Accept);
    }

    #[test]
    fn sketch_serialises_bits_as_text() {
        let sketch = FuzzySketch {
            helper: vec![true, false, true],
            t: 1,
            key_bits: 1,
        };
        let json = serde_json::to_string(&sketch).unwrap();
        assert_eq!(json, r#"{"helper":"101","t":1,"key_bits":1}"#);
        assert_eq!(serde_json::from_str::<FuzzySketch>(&json).unwrap(), sketch);
        assert!(parse_bits("10x").is_err());
    }

    proptest! {
        #[test]
        fn code_offset_correctness(bits in proptest::collection::vec(any::<bool>(), 8..40),
                                   t in 0usize..4, seed in any::<u64>(),
                                   flips in proptest::collection::btree_set(0usize..40, 0..4)) {
            let n = bits.len() / 4 * 4;
            let sig = BinarySignature::from_bits(&bits[..n]).unwrap();
            prop_assume!(n > 2 * t);
            let flips: Vec<usize> = flips.into_iter().filter(|&p| p < n).take(t).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (key, sketch) = fe_generate(&sig, t, &mut rng).unwrap();
            prop_assert_eq!(fe_reproduce(&flip(&sig, &flips), &sketch).unwrap(), key);
        }
    }
}
