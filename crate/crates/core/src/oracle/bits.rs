use std::fmt;

/// Growable bit string packed into `u64` words, bit `k` at word `k / 64`,
/// position `k % 64`.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut out = BitString::new();
        for b in bits {
            out.push(b);
        }
        out
    }

    /// Builds from 64-bit words, keeping the low `len` bits.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(len.div_ceil(64), 0);
        let mut out = BitString { words, len };
        out.clear_tail();
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, k: usize) -> bool {
        debug_assert!(k < self.len);
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, k: usize, v: bool) {
        debug_assert!(k < self.len);
        let mask = 1u64 << (k % 64);
        if v {
            self.words[k / 64] |= mask;
        } else {
            self.words[k / 64] &= !mask;
        }
    }

    pub fn push(&mut self, v: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    /// XOR `other` into `self`, zero-padding the shorter operand.
    pub fn xor_padded(&mut self, other: &BitString) {
        if other.len > self.len {
            self.resize(other.len);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Grows with zeros or cuts to `len` bits.
    pub fn resize(&mut self, len: usize) {
        self.words.resize(len.div_ceil(64), 0);
        self.len = len;
        self.clear_tail();
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        debug_assert!(start <= end && end <= self.len);
        BitString::from_bools((start..end).map(|k| self.get(k)))
    }

    pub fn extend(&mut self, other: &BitString) {
        for k in 0..other.len {
            self.push(other.get(k));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hex with bit 0 as the most significant bit of the first byte; the
    /// last byte is zero-filled.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len.div_ceil(8) * 2);
        for byte in 0..self.len.div_ceil(8) {
            let mut v = 0u8;
            for bit in 0..8 {
                let k = byte * 8 + bit;
                if k < self.len && self.get(k) {
                    v |= 0x80 >> bit;
                }
            }
            out.push_str(&format!("{v:02x}"));
        }
        out
    }

    /// Inverse of [`to_hex`](Self::to_hex); `None` on malformed input.
    pub fn from_hex(hex: &str, len: usize) -> Option<BitString> {
        if hex.len() != len.div_ceil(8) * 2 {
            return None;
        }
        let bytes: Vec<u8> = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(hex.get(i..i + 2)?, 16).ok())
            .collect::<Option<_>>()?;
        Some(BitString::from_bools(
            (0..len).map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0),
        ))
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString[{}; ", self.len)?;
        for k in 0..self.len.min(64) {
            write!(f, "{}", u8::from(self.get(k)))?;
        }
        if self.len > 64 {
            write!(f, "...")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> BitString {
        BitString::from_bools(s.chars().map(|c| c == '1'))
    }

    #[test]
    fn padded_xor() {
        let mut a = bits("101");
        a.xor_padded(&bits("11"));
        assert_eq!(a, bits("011"));
        let mut b = bits("1");
        b.xor_padded(&bits("0110"));
        assert_eq!(b, bits("1110"));
    }

    #[test]
    fn hex_layout() {
        assert_eq!(bits("1").to_hex(), "80");
        assert_eq!(bits("000000011").to_hex(), "0180");
        assert_eq!(BitString::new().to_hex(), "");
        assert_eq!(BitString::from_hex("0180", 9), Some(bits("000000011")));
        assert_eq!(BitString::from_hex("01", 9), None);
    }

    #[test]
    fn resize_clears_dropped_bits() {
        let mut a = bits("1111");
        a.resize(2);
        a.resize(4);
        assert_eq!(a, bits("1100"));
    }

    proptest! {
        #[test]
        fn xor_is_an_involution(a in proptest::collection::vec(any::<bool>(), 0..300),
                                b in proptest::collection::vec(any::<bool>(), 0..300)) {
            let x = BitString::from_bools(a.clone());
            let y = BitString::from_bools(b.clone());
            let mut z = x.clone();
            z.xor_padded(&y);
            prop_assert_eq!(z.len(), a.len().max(b.len()));
            z.xor_padded(&y);
            z.resize(a.len());
            prop_assert_eq!(&z, &x);
            prop_assert_eq!(BitString::from_hex(&x.to_hex(), x.len()), Some(x.clone()));
            let mut joined = x.slice(0, a.len() / 2);
            joined.extend(&x.slice(a.len() / 2, a.len()));
            prop_assert_eq!(joined, x);
        }
    }
}
