//! Compressed-string codec for RLE masks, bit-exact with the COCO
//! interchange format.
//!
//! Counts are difference-coded: the value at index i is stored as
//! `counts[i] - counts[i-2]` once i > 2, earlier indices raw. Each signed
//! value is then emitted little-endian in 5-bit groups; every character
//! carries 5 data bits plus a continuation bit (0x20) and is offset by 48
//! into the printable range 48..=111. The sign of the final group is
//! recovered from bit 0x10.

use super::RleMask;
use crate::error::{Error, Result};

const CHAR_BASE: u8 = 48;
const CHAR_MAX: u8 = 111;
// 13 five-bit groups cover any i64 count difference.
const MAX_GROUPS: u32 = 13;

/// Encode run counts into the compressed character form.
pub fn rle_string_encode(rle: &RleMask) -> String {
    let counts = rle.counts();
    let mut out = Vec::with_capacity(counts.len() * 2);
    for i in 0..counts.len() {
        let mut x = counts[i] as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push(c + CHAR_BASE);
            if !more {
                break;
            }
        }
    }
    // All bytes are in 48..=111, always valid UTF-8.
    String::from_utf8(out).expect("encoded bytes are printable ASCII")
}

/// Decode the compressed character form back into an [`RleMask`].
pub fn rle_string_decode(s: &str, height: u32, width: u32) -> Result<RleMask> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u64> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k: u32 = 0;
        loop {
            if p >= bytes.len() {
                return Err(Error::Codec(
                    "truncated continuation chain at end of string".into(),
                ));
            }
            let b = bytes[p];
            if !(CHAR_BASE..=CHAR_MAX).contains(&b) {
                return Err(Error::Codec(format!(
                    "character {b} at offset {p} outside the range {CHAR_BASE}-{CHAR_MAX}"
                )));
            }
            if k >= MAX_GROUPS {
                return Err(Error::Codec(format!(
                    "continuation chain longer than {MAX_GROUPS} groups at offset {p}"
                )));
            }
            let c = (b - CHAR_BASE) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * (k + 1));
                }
                break;
            }
            k += 1;
        }
        let m = counts.len();
        if m > 2 {
            x += counts[m - 2] as i64;
        }
        if x < 0 {
            return Err(Error::Codec(format!(
                "negative run length {x} decoded at run {m}"
            )));
        }
        counts.push(x as u64);
    }
    RleMask::new(height, width, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rle(h: u32, w: u32, counts: &[u64]) -> RleMask {
        RleMask::new(h, w, counts.to_vec()).unwrap()
    }

    #[test]
    fn single_small_count() {
        // 6 fits in one group: 6 + 48 = '6'.
        assert_eq!(rle_string_encode(&rle(2, 3, &[6])), "6");
    }

    #[test]
    fn two_group_count() {
        // 32 = 1*2^5 + 0: first char 0x20|0x00 + 48 = 'P', then 1 + 48 = '1'.
        assert_eq!(rle_string_encode(&rle(4, 8, &[32])), "P1");
    }

    #[test]
    fn difference_coding_kicks_in_after_index_two() {
        // counts [2,3,4,5] -> value stream [2,3,4,2]; all single groups.
        let r = rle(2, 7, &[2, 3, 4, 5]);
        let encoded = rle_string_encode(&r);
        let expected: String = [2u8, 3, 4, 2].iter().map(|&v| (v + 48) as char).collect();
        assert_eq!(encoded, expected);
        assert_eq!(rle_string_decode(&encoded, 2, 7).unwrap(), r);
    }

    #[test]
    fn decode_rejects_out_of_range_character() {
        let err = rle_string_decode("p", 1, 1).unwrap_err();
        assert!(matches!(err, Error::Codec(_)));
    }

    #[test]
    fn decode_rejects_truncated_chain() {
        // 'P' has the continuation bit set but nothing follows.
        let err = rle_string_decode("P", 4, 8).unwrap_err();
        assert!(matches!(err, Error::Codec(_)));
    }

    #[test]
    fn decode_rejects_wrong_total() {
        let err = rle_string_decode("6", 3, 3).unwrap_err();
        assert!(matches!(err, Error::Codec(_)));
    }

    #[test]
    fn negative_differences_roundtrip() {
        // Falling run lengths force negative difference codes.
        let r = rle(10, 10, &[50, 30, 10, 5, 3, 2]);
        let s = rle_string_encode(&r);
        assert_eq!(rle_string_decode(&s, 10, 10).unwrap(), r);
    }

    #[test]
    fn leading_zero_run_roundtrips() {
        let r = rle(3, 3, &[0, 9]);
        let s = rle_string_encode(&r);
        assert_eq!(rle_string_decode(&s, 3, 3).unwrap(), r);
    }
}
