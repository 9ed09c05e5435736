// SPDX-License-Identifier: Apache-2.0

//! Trend Micro Locality Sensitive Hash, 128 buckets with a 1-byte checksum.
//!
//! The digest is 35 bytes: checksum, length code, packed quartile ratios and
//! 32 bytes holding 128 two-bit bucket codes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HashError;

/// Inputs shorter than this have no digest.
pub const MIN_DATA_LENGTH: usize = 50;
/// Number of buckets that contribute to the body.
pub const EFFECTIVE_BUCKETS: usize = 128;
const CODE_SIZE: usize = EFFECTIVE_BUCKETS / 4;
/// Hex length of the serialized digest.
pub const DIGEST_HEX_LEN: usize = 2 * (3 + CODE_SIZE);

const WINDOW: usize = 5;

#[rustfmt::skip]
const PEARSON: [u8; 256] = [
    0x01, 0x57, 0x31, 0x0c, 0xb0, 0xb2, 0x66, 0xa6, 0x79, 0xc1, 0x06, 0x54, 0xf9, 0xe6, 0x2c, 0xa3,
    0x0e, 0xc5, 0xd5, 0xb5, 0xa1, 0x55, 0xda, 0x50, 0x40, 0xef, 0x18, 0xe2, 0xec, 0x8e, 0x26, 0xc8,
    0x6e, 0xb1, 0x68, 0x67, 0x8d, 0xfd, 0xff, 0x32, 0x4d, 0x65, 0x51, 0x12, 0x2d, 0x60, 0x1f, 0xde,
    0x19, 0x6b, 0xbe, 0x46, 0x56, 0xed, 0xf0, 0x22, 0x48, 0xf2, 0x14, 0xd6, 0xf4, 0xe3, 0x95, 0xeb,
    0x61, 0xea, 0x39, 0x16, 0x3c, 0xfa, 0x52, 0xaf, 0xd0, 0x05, 0x7f, 0xc7, 0x6f, 0x3e, 0x87, 0xf8,
    0xae, 0xa9, 0xd3, 0x3a, 0x42, 0x9a, 0x6a, 0xc3, 0xf5, 0xab, 0x11, 0xbb, 0xb6, 0xb3, 0x00, 0xf3,
    0x84, 0x38, 0x94, 0x4b, 0x80, 0x85, 0x9e, 0x64, 0x82, 0x7e, 0x5b, 0x0d, 0x99, 0xf6, 0xd8, 0xdb,
    0x77, 0x44, 0xdf, 0x4e, 0x53, 0x58, 0xc9, 0x63, 0x7a, 0x0b, 0x5c, 0x20, 0x88, 0x72, 0x34, 0x0a,
    0x8a, 0x1e, 0x30, 0xb7, 0x9c, 0x23, 0x3d, 0x1a, 0x8f, 0x4a, 0xfb, 0x5e, 0x81, 0xa2, 0x3f, 0x98,
    0xaa, 0x07, 0x73, 0xa7, 0xf1, 0xce, 0x03, 0x96, 0x37, 0x3b, 0x97, 0xdc, 0x5a, 0x35, 0x17, 0x83,
    0x7d, 0xad, 0x0f, 0xee, 0x4f, 0x5f, 0x59, 0x10, 0x69, 0x89, 0xe1, 0xe0, 0xd9, 0xa0, 0x25, 0x7b,
    0x76, 0x49, 0x02, 0x9d, 0x2e, 0x74, 0x09, 0x91, 0x86, 0xe4, 0xcf, 0xd4, 0xca, 0xd7, 0x45, 0xe5,
    0x1b, 0xbc, 0x43, 0x7c, 0xa8, 0xfc, 0x2a, 0x04, 0x1d, 0x6c, 0x15, 0xf7, 0x13, 0xcd, 0x27, 0xcb,
    0xe9, 0x28, 0xba, 0x93, 0xc6, 0xc0, 0x9b, 0x21, 0xa4, 0xbf, 0x62, 0xcc, 0xa5, 0xb4, 0x75, 0x4c,
    0x8c, 0x24, 0xd2, 0xac, 0x29, 0x36, 0x9f, 0x08, 0xb9, 0xe8, 0x71, 0xc4, 0xe7, 0x2f, 0x92, 0x78,
    0x33, 0x41, 0x1c, 0x90, 0xfe, 0xdd, 0x5d, 0xbd, 0xc2, 0x8b, 0x70, 0x2b, 0x47, 0x6d, 0xb8, 0xd1,
];

/// Upper bound (inclusive) of the data length for each length code.
#[rustfmt::skip]
const LENGTH_TOP: [u32; 170] = [
    1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86, 129, 194, 291, 437, 656,
    854, 1110, 1443, 1876, 2439, 3171,
    3475, 3823, 4205, 4626, 5088, 5597, 6157, 6772, 7450, 8195, 9014, 9916, 10907, 11998,
    13198, 14518, 15970, 17567, 19323, 21256, 23382, 25720, 28292, 31121, 34233, 37656,
    41422, 45564, 50121, 55133, 60646, 66711, 73382, 80721, 88793, 97672, 107439, 118183,
    130002, 143002, 157302, 173032, 190335, 209369, 230306, 253337, 278670, 306538, 337191,
    370911, 408002, 448802, 493682, 543050, 597356, 657091, 722800, 795081, 874589, 962048,
    1058252, 1164078, 1280486, 1408534, 1549388, 1704327, 1874759, 2062236, 2268459, 2495305,
    2744836, 3019320, 3321252, 3653374, 4018711, 4420582, 4862641, 5348905, 5883796, 6472176,
    7119394, 7831333, 8614467, 9475909, 10423501, 11465851, 12612437, 13873681, 15261050,
    16787154, 18465870, 20312458, 22343706, 24578077, 27035886, 29739474, 32713425, 35984770,
    39583245, 43541573, 47895730, 52685306, 57953837, 63749221, 70124148, 77136564, 84850228,
    93335252, 102668779, 112935659, 124229227, 136652151, 150317384, 165349128, 181884040,
    200072456, 220079703, 242087671, 266296456, 292926096, 322218735, 354440623, 389884688,
    428873168, 471760495, 518936559, 570830240, 627913311, 690704607, 759775136, 835752671,
    919327967, 1011260767, 1112386880, 1223623232, 1345985727, 1480584256, 1628642751,
    1791507135, 1970657856, 2167723648, 2384496256, 2622945920, 2885240448, 3173764736,
    3491141248, 3840255616, 4224281216,
];

#[inline]
fn pearson4(salt: u8, a: u8, b: u8, c: u8) -> u8 {
    let h = PEARSON[usize::from(salt)];
    let h = PEARSON[usize::from(h ^ a)];
    let h = PEARSON[usize::from(h ^ b)];
    PEARSON[usize::from(h ^ c)]
}

fn length_code(len: usize) -> Option<u8> {
    let len = u32::try_from(len).ok()?;
    let idx = LENGTH_TOP.partition_point(|&top| top < len);
    (idx < LENGTH_TOP.len()).then_some(idx as u8)
}

#[inline]
fn swap_nibbles(b: u8) -> u8 {
    b.rotate_left(4)
}

fn mod_diff(x: u8, y: u8, range: u32) -> u32 {
    let (x, y) = (u32::from(x), u32::from(y));
    let d = x.abs_diff(y);
    d.min(range - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TlshDigest {
    checksum: u8,
    l_value: u8,
    q1_ratio: u8,
    q2_ratio: u8,
    /// Bucket `4*i + j` lives in bits `2j..2j+2` of byte `i`.
    codes: [u8; CODE_SIZE],
}

impl TlshDigest {
    pub fn checksum(&self) -> u8 {
        self.checksum
    }

    /// Logarithmic length code.
    pub fn l_value(&self) -> u8 {
        self.l_value
    }

    pub fn q1_ratio(&self) -> u8 {
        self.q1_ratio
    }

    pub fn q2_ratio(&self) -> u8 {
        self.q2_ratio
    }

    /// Two-bit code of bucket `i` (0..128).
    pub fn body_code(&self, i: usize) -> u8 {
        (self.codes[i / 4] >> (2 * (i % 4))) & 0b11
    }

    pub fn body_codes(&self) -> [u8; EFFECTIVE_BUCKETS] {
        std::array::from_fn(|i| self.body_code(i))
    }

    /// Builds a digest from raw fields. Body codes must all be in `0..=3` and
    /// ratios in `0..=15`.
    pub fn from_parts(
        checksum: u8,
        l_value: u8,
        q1_ratio: u8,
        q2_ratio: u8,
        body: &[u8; EFFECTIVE_BUCKETS],
    ) -> Option<Self> {
        if q1_ratio > 15 || q2_ratio > 15 || body.iter().any(|&c| c > 3) {
            return None;
        }
        let mut codes = [0u8; CODE_SIZE];
        for (i, &c) in body.iter().enumerate() {
            codes[i / 4] |= c << (2 * (i % 4));
        }
        Some(Self { checksum, l_value, q1_ratio, q2_ratio, codes })
    }

    fn to_bytes(self) -> [u8; 3 + CODE_SIZE] {
        let mut out = [0u8; 3 + CODE_SIZE];
        out[0] = swap_nibbles(self.checksum);
        out[1] = swap_nibbles(self.l_value);
        out[2] = (self.q1_ratio << 4) | self.q2_ratio;
        for (i, &c) in self.codes.iter().rev().enumerate() {
            out[3 + i] = c;
        }
        out
    }

    /// Parses 70 hex characters. A leading `T1` version marker and upper-case
    /// digits are accepted.
    pub fn parse(s: &str) -> Result<Self, HashError> {
        let (offset, hex_part) = match s.get(..2) {
            Some("T1") | Some("t1") => (2, &s[2..]),
            _ => (0, s),
        };
        if let Some(pos) = hex_part.bytes().position(|b| !b.is_ascii_hexdigit()) {
            return Err(HashError::MalformedDigest {
                position: offset + pos,
                reason: "non-hex character".into(),
            });
        }
        if hex_part.len() != DIGEST_HEX_LEN {
            return Err(HashError::MalformedDigest {
                position: offset + hex_part.len().min(DIGEST_HEX_LEN),
                reason: format!("expected {DIGEST_HEX_LEN} hex characters, got {}", hex_part.len()),
            });
        }
        let mut raw = [0u8; 3 + CODE_SIZE];
        hex::decode_to_slice(hex_part, &mut raw).map_err(|_| HashError::MalformedDigest {
            position: offset,
            reason: "invalid hex".into(),
        })?;
        let mut codes = [0u8; CODE_SIZE];
        for i in 0..CODE_SIZE {
            codes[i] = raw[3 + CODE_SIZE - 1 - i];
        }
        Ok(Self {
            checksum: swap_nibbles(raw[0]),
            l_value: swap_nibbles(raw[1]),
            q1_ratio: raw[2] >> 4,
            q2_ratio: raw[2] & 0x0f,
            codes,
        })
    }
}

impl fmt::Display for TlshDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.to_bytes()))
    }
}

impl FromStr for TlshDigest {
    type Err = HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for TlshDigest {
    type Error = HashError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<TlshDigest> for String {
    fn from(d: TlshDigest) -> Self {
        d.to_string()
    }
}

/// Computes the TLSH digest of `data`.
pub fn tlsh_hash(data: &[u8]) -> Result<TlshDigest, HashError> {
    if data.len() < MIN_DATA_LENGTH {
        return Err(HashError::TooShort { len: data.len(), min: MIN_DATA_LENGTH });
    }
    let l_value = length_code(data.len()).ok_or(HashError::TooLarge { len: data.len() })?;

    let mut buckets = [0u32; 256];
    let mut checksum = 0u8;
    for w in data.windows(WINDOW) {
        // w[4] is the newest byte
        let (a0, a1, a2, a3, a4) = (w[4], w[3], w[2], w[1], w[0]);
        checksum = pearson4(0, a0, a1, checksum);
        buckets[usize::from(pearson4(2, a0, a1, a2))] += 1;
        buckets[usize::from(pearson4(3, a0, a1, a3))] += 1;
        buckets[usize::from(pearson4(5, a0, a2, a3))] += 1;
        buckets[usize::from(pearson4(7, a0, a2, a4))] += 1;
        buckets[usize::from(pearson4(11, a0, a1, a4))] += 1;
        buckets[usize::from(pearson4(13, a0, a3, a4))] += 1;
    }

    let effective = &buckets[..EFFECTIVE_BUCKETS];
    let nonzero = effective.iter().filter(|&&c| c > 0).count();
    if nonzero <= EFFECTIVE_BUCKETS / 2 {
        return Err(HashError::DegenerateInput);
    }
    let mut sorted = [0u32; EFFECTIVE_BUCKETS];
    sorted.copy_from_slice(effective);
    sorted.sort_unstable();
    let q1 = sorted[EFFECTIVE_BUCKETS / 4 - 1];
    let q2 = sorted[EFFECTIVE_BUCKETS / 2 - 1];
    let q3 = sorted[EFFECTIVE_BUCKETS * 3 / 4 - 1];
    if q3 == 0 {
        return Err(HashError::DegenerateInput);
    }

    let mut codes = [0u8; CODE_SIZE];
    for (i, byte) in codes.iter_mut().enumerate() {
        for j in 0..4 {
            let k = effective[4 * i + j];
            let code = if k > q3 {
                3
            } else if k > q2 {
                2
            } else if k > q1 {
                1
            } else {
                0
            };
            *byte |= code << (2 * j);
        }
    }

    // the reference computes the ratios in single precision
    let ratio = |q: u32| (((q * 100) as f32 / q3 as f32) as u32 % 16) as u8;
    Ok(TlshDigest { checksum, l_value, q1_ratio: ratio(q1), q2_ratio: ratio(q2), codes })
}

/// Distance between two digests, including the length component. Zero iff
/// the digests are identical.
pub fn tlsh_distance(a: &TlshDigest, b: &TlshDigest) -> u32 {
    let mut diff = 0u32;

    let ldiff = mod_diff(a.l_value, b.l_value, 256);
    diff += if ldiff <= 1 { ldiff } else { ldiff * 12 };

    for (x, y) in [(a.q1_ratio, b.q1_ratio), (a.q2_ratio, b.q2_ratio)] {
        let q = mod_diff(x, y, 16);
        diff += if q <= 1 { q } else { (q - 1) * 12 };
    }

    if a.checksum != b.checksum {
        diff += 1;
    }

    for i in 0..EFFECTIVE_BUCKETS {
        diff += match a.body_code(i).abs_diff(b.body_code(i)) {
            3 => 6,
            d => u32::from(d),
        };
    }
    diff
}
