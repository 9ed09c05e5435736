// SPDX-License-Identifier: Apache-2.0

//! Context-triggered piecewise hashing compatible with spamsum / ssdeep.
//!
//! A 7-byte rolling hash decides segment boundaries. Every segment is folded
//! into a 6-bit FNV-style accumulator and contributes one base64 character.
//! Two signatures are produced: one at the block size and one at twice the
//! block size, so that digests of inputs whose sizes differ by a factor of
//! two can still be compared.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HashError;

/// Smallest block size; every block size is `MIN_BLOCK_SIZE * 2^n`.
pub const MIN_BLOCK_SIZE: u32 = 3;
/// Maximum length of the coarse signature.
pub const SPAMSUM_LENGTH: usize = 64;
/// Maximum length of the fine signature.
pub const HALF_SPAMSUM_LENGTH: usize = SPAMSUM_LENGTH / 2;

const ROLLING_WINDOW: usize = 7;
const HASH_INIT: u8 = 0x27;
const HASH_PRIME: u8 = 0x93;
const BASE64: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

/// Block sizes at or above this value never cap the comparison score.
const CAP_FREE_BLOCK_SIZE: u32 = (99 + ROLLING_WINDOW as u32) / ROLLING_WINDOW as u32 * MIN_BLOCK_SIZE;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SsdeepDigest {
    block_size: u32,
    sig_coarse: String,
    sig_fine: String,
}

impl SsdeepDigest {
    pub fn block_size(&self) -> u32 {
        self.block_size
    }

    /// Signature computed at `block_size`.
    pub fn sig_coarse(&self) -> &str {
        &self.sig_coarse
    }

    /// Signature computed at `2 * block_size`.
    pub fn sig_fine(&self) -> &str {
        &self.sig_fine
    }

    /// `log2(block_size / 3)`.
    pub fn block_size_exponent(&self) -> u32 {
        (self.block_size / MIN_BLOCK_SIZE).trailing_zeros()
    }

    pub fn parse(s: &str) -> Result<Self, HashError> {
        let malformed = |position: usize, reason: &str| HashError::MalformedDigest {
            position,
            reason: reason.to_owned(),
        };

        let mut fields = s.splitn(3, ':');
        let bs_field = fields.next().unwrap_or_default();
        let coarse = fields.next().ok_or_else(|| malformed(s.len(), "missing signature field"))?;
        let fine = fields.next().ok_or_else(|| malformed(s.len(), "missing second signature field"))?;

        if bs_field.is_empty() {
            return Err(malformed(0, "empty block size"));
        }
        if let Some(pos) = bs_field.bytes().position(|b| !b.is_ascii_digit()) {
            return Err(malformed(pos, "block size is not a decimal integer"));
        }
        let block_size: u32 = bs_field
            .parse()
            .map_err(|_| malformed(0, "block size out of range"))?;
        if !is_valid_block_size(block_size) {
            return Err(malformed(0, "block size is not 3 * 2^n"));
        }

        let coarse_start = bs_field.len() + 1;
        let fine_start = coarse_start + coarse.len() + 1;
        check_signature(coarse, coarse_start, SPAMSUM_LENGTH)?;
        check_signature(fine, fine_start, HALF_SPAMSUM_LENGTH)?;

        Ok(Self {
            block_size,
            sig_coarse: coarse.to_owned(),
            sig_fine: fine.to_owned(),
        })
    }
}

fn is_valid_block_size(bs: u32) -> bool {
    bs >= MIN_BLOCK_SIZE && bs.is_multiple_of(MIN_BLOCK_SIZE) && (bs / MIN_BLOCK_SIZE).is_power_of_two()
}

fn check_signature(sig: &str, offset: usize, max_len: usize) -> Result<(), HashError> {
    if let Some(pos) = sig.bytes().position(|b| !BASE64.contains(&b)) {
        return Err(HashError::MalformedDigest {
            position: offset + pos,
            reason: "character outside the base64 alphabet".into(),
        });
    }
    if sig.len() > max_len {
        return Err(HashError::MalformedDigest {
            position: offset + max_len,
            reason: format!("signature longer than {max_len} characters"),
        });
    }
    Ok(())
}

impl fmt::Display for SsdeepDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.block_size, self.sig_coarse, self.sig_fine)
    }
}

impl FromStr for SsdeepDigest {
    type Err = HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for SsdeepDigest {
    type Error = HashError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<SsdeepDigest> for String {
    fn from(d: SsdeepDigest) -> Self {
        d.to_string()
    }
}

#[derive(Default)]
struct RollingHash {
    window: [u8; ROLLING_WINDOW],
    h1: u32,
    h2: u32,
    h3: u32,
    n: usize,
}

impl RollingHash {
    #[inline]
    fn update(&mut self, c: u8) -> u32 {
        let c32 = u32::from(c);
        self.h2 = self.h2.wrapping_sub(self.h1).wrapping_add(ROLLING_WINDOW as u32 * c32);
        self.h1 = self.h1.wrapping_add(c32).wrapping_sub(u32::from(self.window[self.n]));
        self.window[self.n] = c;
        self.n = (self.n + 1) % ROLLING_WINDOW;
        self.h3 = (self.h3 << 5) ^ c32;
        self.h1.wrapping_add(self.h2).wrapping_add(self.h3)
    }
}

#[inline]
fn sum_hash(h: u8, c: u8) -> u8 {
    (h.wrapping_mul(HASH_PRIME) ^ c) & 0x3f
}

/// Piecewise signature at one block size.
struct BlockSignature {
    acc: u8,
    sig: Vec<u8>,
    // character of the last trigger once `sig` is full
    pending: Option<u8>,
    cap: usize,
}

impl BlockSignature {
    fn new(cap: usize) -> Self {
        Self { acc: HASH_INIT, sig: Vec::with_capacity(cap + 1), pending: None, cap }
    }

    #[inline]
    fn trigger(&mut self) {
        let ch = BASE64[usize::from(self.acc)];
        if self.sig.len() < self.cap - 1 {
            self.sig.push(ch);
            self.acc = HASH_INIT;
            self.pending = None;
        } else {
            self.pending = Some(ch);
        }
    }

    fn finish(mut self, last_roll: u32) -> String {
        if last_roll != 0 {
            self.sig.push(BASE64[usize::from(self.acc)]);
        } else if let Some(ch) = self.pending {
            self.sig.push(ch);
        }
        // only base64 bytes were pushed
        String::from_utf8(self.sig).expect("base64 alphabet is ASCII")
    }
}

fn signatures_at(data: &[u8], block_size: u32) -> (String, String) {
    let mut roll = RollingHash::default();
    let mut coarse = BlockSignature::new(SPAMSUM_LENGTH);
    let mut fine = BlockSignature::new(HALF_SPAMSUM_LENGTH);
    let double = block_size * 2;
    let mut rh = 0u32;

    for &c in data {
        coarse.acc = sum_hash(coarse.acc, c);
        fine.acc = sum_hash(fine.acc, c);
        rh = roll.update(c);
        if rh % block_size == block_size - 1 {
            coarse.trigger();
            if rh % double == double - 1 {
                fine.trigger();
            }
        }
    }
    (coarse.finish(rh), fine.finish(rh))
}

/// Computes the CTPH digest of `data`.
pub fn ssdeep_hash(data: &[u8]) -> Result<SsdeepDigest, HashError> {
    if data.is_empty() {
        return Err(HashError::EmptyInput);
    }
    let len = data.len() as u64;
    let mut block_size = MIN_BLOCK_SIZE;
    while u64::from(block_size) * (SPAMSUM_LENGTH as u64) < len {
        block_size *= 2;
    }

    loop {
        let (coarse, fine) = signatures_at(data, block_size);
        if block_size > MIN_BLOCK_SIZE && coarse.len() < HALF_SPAMSUM_LENGTH {
            block_size /= 2;
            continue;
        }
        return Ok(SsdeepDigest { block_size, sig_coarse: coarse, sig_fine: fine });
    }
}

/// Drops characters that repeat more than three times in a row.
fn eliminate_sequences(s: &str) -> Vec<u8> {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    for (i, &c) in b.iter().enumerate() {
        if i < 3 || c != b[i - 1] || c != b[i - 2] || c != b[i - 3] {
            out.push(c);
        }
    }
    out
}

fn has_common_substring(a: &[u8], b: &[u8]) -> bool {
    if a.len() < ROLLING_WINDOW || b.len() < ROLLING_WINDOW {
        return false;
    }
    a.windows(ROLLING_WINDOW).any(|wa| b.windows(ROLLING_WINDOW).any(|wb| wa == wb))
}

/// Edit distance with unit insert/delete and substitution cost 2.
fn weighted_edit_distance(a: &[u8], b: &[u8]) -> u32 {
    let mut prev: Vec<u32> = (0..=b.len() as u32).collect();
    let mut cur = vec![0u32; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i as u32 + 1;
        for (j, &cb) in b.iter().enumerate() {
            let replace = prev[j] + if ca == cb { 0 } else { 2 };
            cur[j + 1] = replace.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn score_strings(a: &[u8], b: &[u8], block_size: u32) -> u32 {
    if a.len() > SPAMSUM_LENGTH || b.len() > SPAMSUM_LENGTH || !has_common_substring(a, b) {
        return 0;
    }
    let total = (a.len() + b.len()) as u32;
    let dist = weighted_edit_distance(a, b) * SPAMSUM_LENGTH as u32 / total;
    let dist = 100 * dist / SPAMSUM_LENGTH as u32;
    if dist >= 100 {
        return 0;
    }
    let score = 100 - dist;
    if block_size >= CAP_FREE_BLOCK_SIZE {
        return score;
    }
    let cap = block_size / MIN_BLOCK_SIZE * a.len().min(b.len()) as u32;
    score.min(cap)
}

/// Similarity score in `0..=100`; 100 means identical signatures.
pub fn ssdeep_compare(a: &SsdeepDigest, b: &SsdeepDigest) -> u32 {
    let (bs1, bs2) = (a.block_size, b.block_size);
    if bs1 != bs2 && bs1.checked_mul(2) != Some(bs2) && bs2.checked_mul(2) != Some(bs1) {
        return 0;
    }

    let a1 = eliminate_sequences(&a.sig_coarse);
    let a2 = eliminate_sequences(&a.sig_fine);
    let b1 = eliminate_sequences(&b.sig_coarse);
    let b2 = eliminate_sequences(&b.sig_fine);

    if bs1 == bs2 && a1 == b1 {
        return 100;
    }
    if bs1 == bs2 {
        score_strings(&a1, &b1, bs1).max(score_strings(&a2, &b2, bs1 * 2))
    } else if bs1 * 2 == bs2 {
        score_strings(&b1, &a2, bs2)
    } else {
        score_strings(&a1, &b2, bs1)
    }
}
