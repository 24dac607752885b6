//! MSB-first bit strings and a cursor for reading them back.

use std::fmt;
use std::str::FromStr;

use super::CodecError;

/// An ordered sequence of bits with an explicit length.
///
/// Bits are packed most-significant-bit first into bytes. The unused low
/// bits of the final byte are always zero, so two strings with equal bits
/// compare equal.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// Builds a string from packed bytes, keeping the first `len` bits.
    ///
    /// Fails if `bytes` holds fewer than `len` bits. Bits past `len` are
    /// discarded.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, CodecError> {
        let needed = len.div_ceil(8);
        if bytes.len() < needed {
            return Err(CodecError::Underflow {
                requested: len,
                available: bytes.len() * 8,
            });
        }
        let mut out = BitString {
            bytes: bytes[..needed].to_vec(),
            len,
        };
        out.clear_padding();
        Ok(out)
    }

    /// Builds a string holding the low `count` bits of `value`, MSB first.
    pub fn from_uint(value: u64, count: usize) -> Self {
        let mut out = BitString::with_capacity(count);
        out.push_uint(value, count);
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed bytes, zero-padded to a byte boundary.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        if index >= self.len {
            return None;
        }
        Some(self.bytes[index / 8] & (0x80 >> (index % 8)) != 0)
    }

    pub fn push(&mut self, bit: bool) {
        let offset = self.len % 8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte pushed above") |= 0x80 >> offset;
        }
        self.len += 1;
    }

    /// Appends the low `count` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, count: usize) {
        assert!(count <= 64, "cannot push more than 64 bits at once");
        for shift in (0..count).rev() {
            self.push((value >> shift) & 1 == 1);
        }
    }

    /// Appends every bit of `other` to the end of `self`.
    pub fn append(&mut self, other: &BitString) {
        if self.len.is_multiple_of(8) {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
            return;
        }
        for bit in other.iter() {
            self.push(bit);
        }
    }

    /// Concatenation without mutating either operand.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.append(other);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader::new(self)
    }

    fn clear_padding(&mut self) {
        let used = self.len % 8;
        if used != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xFFu8 << (8 - used);
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self}, len={})", self.len)
    }
}

impl FromStr for BitString {
    type Err = CodecError;

    /// Parses a string of `0`/`1` characters. Underscores and whitespace are
    /// ignored so long words can be grouped for readability.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = BitString::with_capacity(s.len());
        for (pos, c) in s.chars().enumerate() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                '_' => {}
                c if c.is_whitespace() => {}
                other => return Err(CodecError::InvalidBitChar { pos, found: other }),
            }
        }
        Ok(out)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitString::new();
        for bit in iter {
            out.push(bit);
        }
        out
    }
}

/// Cursor over a [`BitString`].
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        BitReader { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    pub fn read_bit(&mut self) -> Result<bool, CodecError> {
        let bit = self.bits.get(self.pos).ok_or(CodecError::Underflow {
            requested: 1,
            available: 0,
        })?;
        self.pos += 1;
        Ok(bit)
    }

    /// Reads exactly `count` bits. On underflow nothing is consumed.
    pub fn read_bits(&mut self, count: usize) -> Result<BitString, CodecError> {
        self.check(count)?;
        let out = (self.pos..self.pos + count)
            .map(|i| self.bits.get(i).expect("bounds checked"))
            .collect();
        self.pos += count;
        Ok(out)
    }

    /// Reads `count` bits as an unsigned big-endian integer.
    pub fn read_uint(&mut self, count: usize) -> Result<u64, CodecError> {
        assert!(count <= 64, "cannot read more than 64 bits at once");
        self.check(count)?;
        let mut value = 0u64;
        for _ in 0..count {
            value = (value << 1) | u64::from(self.read_bit()?);
        }
        Ok(value)
    }

    fn check(&self, count: usize) -> Result<(), CodecError> {
        if count > self.remaining() {
            return Err(CodecError::Underflow {
                requested: count,
                available: self.remaining(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn append_to_empty() {
        let mut stream = BitString::new();
        stream.append(&bits("110"));
        assert_eq!(stream.to_string(), "110");
        assert_eq!(stream.len(), 3);
    }

    #[test]
    fn append_unaligned() {
        let mut stream = bits("110");
        stream.append(&bits("100110"));
        assert_eq!(stream.to_string(), "110100110");
        assert_eq!(stream.len(), 9);
        assert_eq!(stream.as_bytes(), &[0b1101_0011, 0b0000_0000]);
    }

    #[test]
    fn read_prefix_then_rest() {
        let word = bits("110100110");
        let mut reader = word.reader();
        assert_eq!(reader.read_bits(3).unwrap().to_string(), "110");
        assert_eq!(reader.remaining(), 6);
        assert_eq!(reader.read_bits(6).unwrap().to_string(), "100110");
        assert!(reader.is_exhausted());
    }

    #[test]
    fn read_past_end_is_underflow_and_consumes_nothing() {
        let word = bits("101");
        let mut reader = word.reader();
        let err = reader.read_bits(4).unwrap_err();
        assert_eq!(
            err,
            CodecError::Underflow {
                requested: 4,
                available: 3
            }
        );
        assert_eq!(reader.position(), 0);
        assert_eq!(reader.read_uint(3).unwrap(), 0b101);
        assert!(reader.read_bit().is_err());
    }

    #[test]
    fn from_bytes_masks_padding() {
        let s = BitString::from_bytes(&[0xFF, 0xFF], 9).unwrap();
        assert_eq!(s.as_bytes(), &[0xFF, 0x80]);
        assert_eq!(s, bits("111111111"));
        assert!(BitString::from_bytes(&[0xFF], 9).is_err());
    }

    #[test]
    fn rejects_foreign_characters() {
        assert!("10x1".parse::<BitString>().is_err());
        assert_eq!(bits("1101_0011 0").len(), 9);
    }
}
