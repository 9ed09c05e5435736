// SPDX-License-Identifier: Apache-2.0

//! Content-similarity digests: SSDeep-style CTPH and TLSH.

mod ssdeep;
mod tlsh;

use thiserror::Error;

pub use ssdeep::{ssdeep_compare, ssdeep_hash, SsdeepDigest, MIN_BLOCK_SIZE, SPAMSUM_LENGTH};
pub use tlsh::{tlsh_distance, tlsh_hash, TlshDigest, DIGEST_HEX_LEN, EFFECTIVE_BUCKETS, MIN_DATA_LENGTH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HashError {
    #[error("input is empty")]
    EmptyInput,
    #[error("input has {len} bytes, at least {min} required")]
    TooShort { len: usize, min: usize },
    #[error("input of {len} bytes exceeds the maximum length code")]
    TooLarge { len: usize },
    #[error("input has too little byte diversity for a quartile spread")]
    DegenerateInput,
    #[error("malformed digest at position {position}: {reason}")]
    MalformedDigest { position: usize, reason: String },
}
