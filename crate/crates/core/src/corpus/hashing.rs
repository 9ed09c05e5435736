// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{column_index, normalize_sha256, CorpusError};
use crate::pe::{imphash, parse_imports, ImpHash};
use crate::similarity::{ssdeep_hash, tlsh_hash, SsdeepDigest, TlshDigest};

pub const DIGEST_COLUMNS: [&str; 5] = ["sha256", "size", "ssdeep", "tlsh", "imphash"];

/// Digests of one file. A digest that cannot be computed is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestRow {
    pub sha256: String,
    pub size: u64,
    pub ssdeep: Option<SsdeepDigest>,
    pub tlsh: Option<TlshDigest>,
    pub imphash: Option<ImpHash>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashOutcome {
    /// Sorted by sha256.
    pub rows: Vec<DigestRow>,
    /// Sorted by path.
    pub errors: Vec<FileError>,
}

pub fn hash_file(data: &[u8]) -> DigestRow {
    DigestRow {
        sha256: hex::encode(Sha256::digest(data)),
        size: data.len() as u64,
        ssdeep: ssdeep_hash(data).ok(),
        tlsh: tlsh_hash(data).ok(),
        imphash: parse_imports(data).ok().and_then(|t| imphash(&t).ok()),
    }
}

/// Hashes every regular file directly inside `dir` (symlinks are followed,
/// subdirectories skipped). Per-file failures are collected, not fatal.
pub fn hash_directory(dir: &Path) -> Result<HashOutcome, CorpusError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CorpusError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| CorpusError::io(dir, e)))
        .collect::<Result<_, _>>()?;
    paths.sort();
    let results: Vec<Option<Result<DigestRow, FileError>>> = paths
        .par_iter()
        .map(|p| {
            let fail = |e: std::io::Error| FileError { path: p.clone(), message: e.to_string() };
            match fs::metadata(p) {
                Ok(m) if m.is_dir() => None,
                Ok(_) => Some(fs::read(p).map(|d| hash_file(&d)).map_err(fail)),
                Err(e) => Some(Err(fail(e))),
            }
        })
        .collect();
    let mut out = HashOutcome::default();
    for r in results.into_iter().flatten() {
        match r {
            Ok(row) => out.rows.push(row),
            Err(e) => out.errors.push(e),
        }
    }
    out.rows.sort_by(|a, b| a.sha256.cmp(&b.sha256));
    Ok(out)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Header `sha256,size,ssdeep,tlsh,imphash`; absent digests are empty.
pub fn write_digest_csv<W: Write>(w: W, rows: &[DigestRow]) -> Result<(), CorpusError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DIGEST_COLUMNS)?;
    for r in rows {
        out.write_record([r.sha256.clone(), r.size.to_string(), opt(&r.ssdeep), opt(&r.tlsh), opt(&r.imphash)])?;
    }
    out.flush().map_err(|e| CorpusError::io("<digest csv>", e))
}

pub fn read_digest_csv<R: Read>(r: R) -> Result<Vec<DigestRow>, CorpusError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = DIGEST_COLUMNS.iter().map(|c| column_index(&headers, c)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let bad = |reason: String| CorpusError::MalformedRow { row, reason };
        let f = |j: usize| rec.get(idx[j]).unwrap_or("").trim();
        let sha256 = normalize_sha256(f(0)).ok_or_else(|| bad(format!("malformed sha256 {:?}", f(0))))?;
        let size = f(1).parse().map_err(|_| bad(format!("malformed size {:?}", f(1))))?;
        let ssdeep = match f(2) {
            "" => None,
            s => Some(SsdeepDigest::parse(s).map_err(|e| bad(format!("ssdeep: {e}")))?),
        };
        let tlsh = match f(3) {
            "" => None,
            s => Some(TlshDigest::parse(s).map_err(|e| bad(format!("tlsh: {e}")))?),
        };
        let imphash = match f(4) {
            "" => None,
            s => Some(s.parse().map_err(|e| bad(format!("imphash: {e}")))?),
        };
        out.push(DigestRow { sha256, size, ssdeep, tlsh, imphash });
    }
    Ok(out)
}
