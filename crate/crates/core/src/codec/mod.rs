//! Residual codec: a modified order-3 Exponential-Golomb code.
//!
//! Every residual `e` is written as a group prefix followed by an `n`-bit
//! suffix, where `n = ⌊log₂|e|⌋ + 1` (and `n = 0` for `e = 0`).
//!
//! | n      | prefix                  | suffix bits | total |
//! |--------|-------------------------|-------------|-------|
//! | 0..=6  | `n` as 3-bit binary     | n           | n + 3 |
//! | 7..=11 | `n - 3` ones, then `0`  | n           | 2n - 2|
//!
//! The 3-bit prefix `111` is never emitted on its own, which is what keeps
//! the long prefixes distinguishable from the short ones. Positive residuals
//! store their low `n` bits; negative residuals store the low `n` bits of
//! `e - 1` in two's complement, so the top suffix bit is the sign.
//!
//! Codewords are written MSB first, prefix before suffix.

mod bits;

use std::fmt;

pub use bits::{BitReader, BitString};

use thiserror::Error;

/// Largest residual magnitude the code represents (group 11).
pub const MAX_RESIDUAL: i32 = 2047;
/// Highest supported group index.
pub const MAX_GROUP: u8 = 11;
/// Groups below this use a fixed 3-bit prefix.
const SHORT_PREFIX_GROUPS: u8 = 7;
const SHORT_PREFIX_BITS: usize = 3;
/// Leading ones allowed in a long prefix (group 11 has eight).
const MAX_PREFIX_ONES: usize = (MAX_GROUP - 3) as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("residual {0} outside [-{MAX_RESIDUAL}, {MAX_RESIDUAL}]")]
    ResidualOutOfRange(i32),
    #[error("group {0} is not supported (max {MAX_GROUP})")]
    UnsupportedGroup(u8),
    #[error("group {group} does not match residual {residual} (expected {expected})")]
    GroupMismatch {
        residual: i32,
        group: u8,
        expected: u8,
    },
    #[error("incomplete codeword at bit {position}: stream ended inside the {part}")]
    IncompleteCodeword { position: usize, part: &'static str },
    #[error("malformed prefix at bit {position}")]
    MalformedPrefix { position: usize },
    #[error("read of {requested} bits with only {available} remaining")]
    Underflow { requested: usize, available: usize },
    #[error("invalid bit character {found:?} at position {pos}")]
    InvalidBitChar { pos: usize, found: char },
}

/// Signed prediction error between consecutive transmitted readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Residual(i16);

impl Residual {
    pub const ZERO: Residual = Residual(0);

    pub fn new(value: i32) -> Result<Self, CodecError> {
        if !(-MAX_RESIDUAL..=MAX_RESIDUAL).contains(&value) {
            return Err(CodecError::ResidualOutOfRange(value));
        }
        Ok(Residual(value as i16))
    }

    pub fn get(self) -> i32 {
        i32::from(self.0)
    }

    pub fn magnitude(self) -> u32 {
        self.0.unsigned_abs().into()
    }
}

impl TryFrom<i32> for Residual {
    type Error = CodecError;

    fn try_from(value: i32) -> Result<Self, Self::Error> {
        Residual::new(value)
    }
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// Suffix width class of a residual, `0..=11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupIndex(u8);

impl GroupIndex {
    pub fn new(n: u8) -> Result<Self, CodecError> {
        if n > MAX_GROUP {
            return Err(CodecError::UnsupportedGroup(n));
        }
        Ok(GroupIndex(n))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Number of suffix bits carried by this group.
    pub fn suffix_len(self) -> usize {
        usize::from(self.0)
    }

    pub fn prefix_len(self) -> usize {
        if self.0 < SHORT_PREFIX_GROUPS {
            SHORT_PREFIX_BITS
        } else {
            usize::from(self.0) - 2
        }
    }

    pub fn codeword_len(self) -> usize {
        self.prefix_len() + self.suffix_len()
    }

    /// Smallest and largest magnitude in this group (`(0, 0)` for group 0).
    pub fn magnitude_range(self) -> (u32, u32) {
        match self.0 {
            0 => (0, 0),
            n => (1 << (n - 1), (1 << n) - 1),
        }
    }
}

/// A codeword split into its group prefix and value suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeWord {
    pub prefix: BitString,
    pub suffix: BitString,
}

impl CodeWord {
    pub fn for_residual(e: Residual) -> Self {
        let group = group_of(e);
        CodeWord {
            prefix: encode_prefix(group),
            suffix: encode_suffix(e, group).expect("group derived from residual"),
        }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() + self.suffix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_bits(&self) -> BitString {
        self.prefix.concat(&self.suffix)
    }
}

/// `⌊log₂|e|⌋ + 1`, or 0 for a zero residual.
pub fn group_of(e: Residual) -> GroupIndex {
    let magnitude = e.magnitude();
    GroupIndex((u32::BITS - magnitude.leading_zeros()) as u8)
}

/// Checked variant of [`group_of`] for raw integers.
pub fn group_of_value(e: i32) -> Result<GroupIndex, CodecError> {
    Residual::new(e).map(group_of)
}

pub fn encode_prefix(n: GroupIndex) -> BitString {
    let n = n.get();
    if n < SHORT_PREFIX_GROUPS {
        return BitString::from_uint(u64::from(n), SHORT_PREFIX_BITS);
    }
    let ones = usize::from(n - 3);
    let mut out = BitString::with_capacity(ones + 1);
    for _ in 0..ones {
        out.push(true);
    }
    out.push(false);
    out
}

/// Encodes the value part of a residual on exactly `n` bits.
pub fn encode_suffix(e: Residual, n: GroupIndex) -> Result<BitString, CodecError> {
    let expected = group_of(e);
    if expected != n {
        return Err(CodecError::GroupMismatch {
            residual: e.get(),
            group: n.get(),
            expected: expected.get(),
        });
    }
    let width = n.suffix_len();
    if width == 0 {
        return Ok(BitString::new());
    }
    // Work on width n+1 so the arithmetic never depends on the host int size.
    let modulus = 1i64 << (width + 1);
    let value = i64::from(e.get());
    let twos = if value < 0 {
        (value + modulus) - 1
    } else {
        value
    };
    let suffix = (twos as u64) & ((1u64 << width) - 1);
    Ok(BitString::from_uint(suffix, width))
}

pub fn encode_residual(e: Residual) -> BitString {
    CodeWord::for_residual(e).to_bits()
}

/// Appends the codeword for `e` to `stream`.
pub fn encode_into(stream: &mut BitString, e: Residual) {
    let group = group_of(e);
    stream.append(&encode_prefix(group));
    stream.append(&encode_suffix(e, group).expect("group derived from residual"));
}

/// Encodes a sequence of residuals into one concatenated stream.
pub fn encode_all<I: IntoIterator<Item = Residual>>(residuals: I) -> BitString {
    let mut stream = BitString::new();
    for e in residuals {
        encode_into(&mut stream, e);
    }
    stream
}

/// Reads one group prefix. On error the reader position is unspecified.
pub fn decode_prefix(reader: &mut BitReader<'_>) -> Result<GroupIndex, CodecError> {
    let start = reader.position();
    let incomplete = |_| CodecError::IncompleteCodeword {
        position: start,
        part: "prefix",
    };
    let head = reader.read_uint(SHORT_PREFIX_BITS).map_err(incomplete)? as u8;
    if head < SHORT_PREFIX_GROUPS {
        return Ok(GroupIndex(head));
    }
    // `111` so far; count the remaining ones up to the terminating zero.
    let mut ones = SHORT_PREFIX_BITS;
    loop {
        if reader.read_bit().map_err(incomplete)? {
            ones += 1;
            if ones > MAX_PREFIX_ONES {
                return Err(CodecError::MalformedPrefix { position: start });
            }
        } else {
            break;
        }
    }
    if ones == SHORT_PREFIX_BITS {
        // `1110` would alias the 3-bit group 6 prefix length.
        return Err(CodecError::MalformedPrefix { position: start });
    }
    Ok(GroupIndex((ones + 3) as u8))
}

/// Inverse of [`encode_suffix`].
pub fn decode_suffix(suffix: u64, n: GroupIndex) -> Residual {
    let width = n.suffix_len();
    if width == 0 {
        return Residual::ZERO;
    }
    let suffix = suffix as i32;
    let half = 1i32 << (width - 1);
    let value = if suffix >= half {
        suffix
    } else {
        suffix - ((1 << width) - 1)
    };
    Residual(value as i16)
}

/// Consumes exactly one codeword from `reader`.
///
/// On error the reader is rewound to where the codeword started.
pub fn decode_residual(reader: &mut BitReader<'_>) -> Result<Residual, CodecError> {
    let checkpoint = reader.clone();
    let result = decode_one(reader);
    if result.is_err() {
        *reader = checkpoint;
    }
    result
}

fn decode_one(reader: &mut BitReader<'_>) -> Result<Residual, CodecError> {
    let start = reader.position();
    let group = decode_prefix(reader)?;
    let suffix =
        reader
            .read_uint(group.suffix_len())
            .map_err(|_| CodecError::IncompleteCodeword {
                position: start,
                part: "suffix",
            })?;
    Ok(decode_suffix(suffix, group))
}

/// Decodes a stream that must consist of whole codewords only.
pub fn decode_all(stream: &BitString) -> Result<Vec<Residual>, CodecError> {
    let mut reader = stream.reader();
    let mut out = Vec::new();
    while !reader.is_exhausted() {
        out.push(decode_residual(&mut reader)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i32) -> Residual {
        Residual::new(v).unwrap()
    }

    fn g(n: u8) -> GroupIndex {
        GroupIndex::new(n).unwrap()
    }

    #[test]
    fn group_examples() {
        assert_eq!(group_of(r(38)).get(), 6);
        assert_eq!(group_of(r(0)).get(), 0);
        assert_eq!(group_of(r(511)).get(), 9);
        assert_eq!(group_of(r(-256)).get(), 9);
        assert_eq!(group_of(r(-1)).get(), 1);
        assert_eq!(group_of(r(2047)).get(), 11);
    }

    #[test]
    fn residual_range_is_enforced() {
        assert_eq!(
            Residual::new(2048).unwrap_err(),
            CodecError::ResidualOutOfRange(2048)
        );
        assert!(Residual::new(-2048).is_err());
        assert!(group_of_value(-2047).is_ok());
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(encode_prefix(g(6)).to_string(), "110");
        assert_eq!(encode_prefix(g(7)).to_string(), "11110");
        assert_eq!(encode_prefix(g(9)).to_string(), "1111110");
        assert_eq!(encode_prefix(g(10)).to_string(), "11111110");
        assert_eq!(encode_prefix(g(0)).to_string(), "000");
        assert_eq!(
            GroupIndex::new(12).unwrap_err(),
            CodecError::UnsupportedGroup(12)
        );
    }

    #[test]
    fn suffix_examples() {
        let cases = [
            (38, 6, "100110"),
            (1, 1, "1"),
            (-1, 1, "0"),
            (-3, 2, "00"),
            (-2, 2, "01"),
            (2, 2, "10"),
            (3, 2, "11"),
        ];
        for (e, n, want) in cases {
            assert_eq!(
                encode_suffix(r(e), g(n)).unwrap().to_string(),
                want,
                "e={e}"
            );
        }
        assert!(encode_suffix(r(0), g(0)).unwrap().is_empty());
    }

    #[test]
    fn suffix_rejects_wrong_group() {
        assert_eq!(
            encode_suffix(r(38), g(5)).unwrap_err(),
            CodecError::GroupMismatch {
                residual: 38,
                group: 5,
                expected: 6
            }
        );
    }

    #[test]
    fn golden_codeword() {
        let word = encode_residual(r(38));
        assert_eq!(word.to_string(), "110100110");
        assert_eq!(decode_all(&word).unwrap(), vec![r(38)]);
        assert_eq!(encode_residual(r(0)).to_string(), "000");
    }

    #[test]
    fn lengths_follow_table() {
        let want = [3, 4, 5, 6, 7, 8, 9, 12, 14, 16, 18, 20];
        for (n, len) in want.iter().enumerate() {
            let group = g(n as u8);
            assert_eq!(group.codeword_len(), *len);
            let (_, hi) = group.magnitude_range();
            assert_eq!(encode_residual(r(hi as i32)).len(), *len);
        }
        assert_eq!(encode_residual(r(63)).len(), 9);
        assert_eq!(encode_residual(r(127)).len(), 12);
        assert_eq!(encode_residual(r(255)).len(), 14);
    }

    #[test]
    fn truncated_codeword() {
        let word: BitString = "1101001".parse().unwrap();
        let mut reader = word.reader();
        assert_eq!(
            decode_residual(&mut reader).unwrap_err(),
            CodecError::IncompleteCodeword {
                position: 0,
                part: "suffix"
            }
        );
        assert_eq!(reader.position(), 0);

        let word: BitString = "11".parse().unwrap();
        assert!(matches!(
            decode_all(&word),
            Err(CodecError::IncompleteCodeword { part: "prefix", .. })
        ));
    }

    #[test]
    fn malformed_prefixes() {
        let nine_ones: BitString = "111111111".parse().unwrap();
        assert_eq!(
            decode_all(&nine_ones).unwrap_err(),
            CodecError::MalformedPrefix { position: 0 }
        );
        let alias: BitString = "1110000000".parse().unwrap();
        assert_eq!(
            decode_all(&alias).unwrap_err(),
            CodecError::MalformedPrefix { position: 0 }
        );
    }

    #[test]
    fn decodes_back_to_back_words() {
        let stream = encode_all([38, 0, -1, 2].map(r));
        assert_eq!(
            stream.to_string(),
            "110100110_000_0010_01010".replace('_', "")
        );
        assert_eq!(decode_all(&stream).unwrap(), [38, 0, -1, 2].map(r).to_vec());
    }
}
