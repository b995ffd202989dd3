//! Exact summation of nonnegative `f64` values.
//!
//! [`ExactSum`] is a fixed-point superaccumulator whose least significant bit
//! is the smallest subnormal, `2^-1074`. Every finite nonnegative double is an
//! integer multiple of that unit, so additions are exact integer additions and
//! the final rounding to `f64` happens exactly once. The result is therefore
//! independent of summation order and of how the inputs were partitioned
//! before merging.

use std::cmp::Ordering;
use std::fmt;

/// 2098 significant bit positions for finite doubles plus 78 bits of carry room.
const WORDS: usize = 34;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactSum {
    words: [u64; WORDS],
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ExactSum").field(&self.value()).finish()
    }
}

impl ExactSum {
    pub const fn new() -> Self {
        Self { words: [0; WORDS] }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Adds a finite, nonnegative value. Callers validate inputs; a negative
    /// or non-finite value is a logic error.
    #[inline]
    pub fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite() && x >= 0.0, "ExactSum::add({x})");
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as usize;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, offset) = if biased == 0 {
            if frac == 0 {
                return;
            }
            (frac, 0)
        } else {
            (frac | (1u64 << 52), biased - 1)
        };
        let word = offset / 64;
        let shifted = (mantissa as u128) << (offset % 64);
        self.add_at(word, shifted as u64);
        let hi = (shifted >> 64) as u64;
        if hi != 0 {
            self.add_at(word + 1, hi);
        }
    }

    #[inline]
    fn add_at(&mut self, mut word: usize, value: u64) {
        let (sum, mut carry) = self.words[word].overflowing_add(value);
        self.words[word] = sum;
        while carry {
            word += 1;
            let (s, c) = self.words[word].overflowing_add(1);
            self.words[word] = s;
            carry = c;
        }
    }

    /// Adds another accumulator into this one.
    pub fn merge(&mut self, other: &ExactSum) {
        let mut carry = false;
        for (w, &o) in self.words.iter_mut().zip(other.words.iter()) {
            let (s1, c1) = w.overflowing_add(o);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *w = s2;
            carry = c1 || c2;
        }
        debug_assert!(!carry, "ExactSum overflow");
    }

    /// Extracts 64 bits of the fixed-point integer starting at bit `lo`.
    /// Bits below zero read as zero.
    fn bits_at(&self, lo: i64) -> u64 {
        let read = |bit: i64| -> u64 {
            if bit < 0 {
                return 0;
            }
            let (w, s) = ((bit / 64) as usize, (bit % 64) as u32);
            if w >= WORDS {
                return 0;
            }
            if s == 0 {
                self.words[w]
            } else {
                let next = if w + 1 < WORDS { self.words[w + 1] } else { 0 };
                (self.words[w] >> s) | (next << (64 - s))
            }
        };
        if lo >= 0 {
            read(lo)
        } else if lo > -64 {
            read(0) << (-lo) as u32
        } else {
            0
        }
    }

    fn any_bits_below(&self, bit: i64) -> bool {
        if bit <= 0 {
            return false;
        }
        let full = (bit / 64) as usize;
        if self.words[..full.min(WORDS)].iter().any(|&w| w != 0) {
            return true;
        }
        let rem = (bit % 64) as u32;
        rem != 0 && full < WORDS && self.words[full] & ((1u64 << rem) - 1) != 0
    }

    fn bit_length(&self) -> i64 {
        for (i, &w) in self.words.iter().enumerate().rev() {
            if w != 0 {
                return 64 * i as i64 + (64 - w.leading_zeros() as i64);
            }
        }
        0
    }

    /// The sum rounded to nearest `f64`, ties to even. Returns infinity when
    /// the exact sum exceeds the finite range.
    pub fn value(&self) -> f64 {
        let len = self.bit_length();
        if len <= 52 {
            // subnormal (or zero): the integer is the fraction field itself
            return f64::from_bits(self.words[0]);
        }
        let top = self.bits_at(len - 64);
        let sticky = self.any_bits_below(len - 64);
        let mut mantissa = top >> 11;
        let round = top & 0x7ff;
        let round_up = match round.cmp(&0x400) {
            Ordering::Greater => true,
            Ordering::Equal => sticky || mantissa & 1 == 1,
            Ordering::Less => false,
        };
        // len - 1 is the position of the leading bit, units of 2^-1074
        let mut biased = len - 1 - 1074 + 1023;
        if round_up {
            mantissa += 1;
            if mantissa == 1u64 << 53 {
                mantissa >>= 1;
                biased += 1;
            }
        }
        if biased >= 0x7ff {
            return f64::INFINITY;
        }
        f64::from_bits(((biased as u64) << 52) | (mantissa & ((1u64 << 52) - 1)))
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        s.extend(iter);
        s
    }
}
