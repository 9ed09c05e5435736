// SPDX-License-Identifier: Apache-2.0

//! Dataset plumbing: metadata CSV, directory hashing, the SHA-256 join with
//! its filtering rules, family counts per month and a synthetic PE corpus.

mod distribution;
mod hashing;
mod join;
mod synth;

use std::io::{Read, Write};
use std::path::PathBuf;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pe::ImpHash;
use crate::similarity::{SsdeepDigest, TlshDigest};

pub use distribution::{family_distribution, FamilyDistribution};
pub use hashing::{hash_directory, hash_file, read_digest_csv, write_digest_csv, DigestRow, FileError, HashOutcome};
pub use join::{join_and_filter, DropReason, DropReport, JoinOutcome};
pub use synth::{synth_corpus, ImportProfile, ManifestRow, SynthConfig};

/// Files smaller than this carry too little content for TLSH.
pub const MIN_SAMPLE_SIZE: u64 = 50;

pub const METADATA_COLUMNS: [&str; 4] = ["sha256", "family", "first_seen", "last_seen"];
pub const UNIFIED_COLUMNS: [&str; 8] =
    ["sha256", "family", "first_seen", "last_seen", "size", "ssdeep", "tlsh", "imphash"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("no records")]
    Empty,
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

/// Normalizes a SHA-256 hex string to lowercase, or `None` if malformed.
pub fn normalize_sha256(s: &str) -> Option<String> {
    (s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit())).then(|| s.to_ascii_lowercase())
}

/// Accepts `YYYY-MM-DD` or an RFC 3339 timestamp, which is reduced to its
/// UTC date.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|t| t.naive_utc().date()))
        .or_else(|| chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").ok().map(|t| t.date()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sha256: String,
    pub family: String,
    pub first_seen: NaiveDate,
    pub last_seen: NaiveDate,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedRecord {
    pub sample: SampleRecord,
    pub size: u64,
    pub ssdeep: SsdeepDigest,
    pub tlsh: TlshDigest,
    pub imphash: ImpHash,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, CorpusError> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| CorpusError::MissingColumn(name.to_owned()))
}

/// Reads the metadata CSV. Column order is free and extra columns are
/// ignored; an optional `path` column is kept. Row numbers in errors count
/// data rows from 1.
pub fn ingest_metadata<R: Read>(r: R) -> Result<Vec<SampleRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = METADATA_COLUMNS.iter().map(|c| column_index(&headers, c)).collect::<Result<_, _>>()?;
    let path_idx = headers.iter().position(|h| h.trim() == "path");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let bad = |reason: String| CorpusError::MalformedRow { row, reason };
        let field = |j: usize| rec.get(idx[j]).map(str::trim).ok_or_else(|| bad(format!("missing {}", METADATA_COLUMNS[j])));
        let sha = field(0)?;
        let sha256 = normalize_sha256(sha).ok_or_else(|| bad(format!("malformed sha256 {sha:?}")))?;
        let family = field(1)?;
        if family.is_empty() {
            return Err(bad("empty family".into()));
        }
        let date = |j: usize| -> Result<NaiveDate, CorpusError> {
            let s = field(j)?;
            parse_date(s).ok_or_else(|| bad(format!("malformed {} {s:?}", METADATA_COLUMNS[j])))
        };
        let (first_seen, last_seen) = (date(2)?, date(3)?);
        if first_seen > last_seen {
            return Err(bad(format!("first_seen {first_seen} is after last_seen {last_seen}")));
        }
        let path = path_idx.and_then(|p| rec.get(p)).filter(|p| !p.is_empty()).map(PathBuf::from);
        out.push(SampleRecord { sha256, family: family.to_owned(), first_seen, last_seen, path });
    }
    Ok(out)
}

pub fn write_metadata_csv<W: Write>(w: W, records: &[SampleRecord]) -> Result<(), CorpusError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METADATA_COLUMNS)?;
    for r in records {
        out.write_record([&r.sha256, &r.family, &r.first_seen.to_string(), &r.last_seen.to_string()])?;
    }
    out.flush().map_err(|e| CorpusError::io("<metadata csv>", e))
}

pub fn write_unified_csv<W: Write>(w: W, records: &[UnifiedRecord]) -> Result<(), CorpusError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(UNIFIED_COLUMNS)?;
    for r in records {
        let s = &r.sample;
        out.write_record([
            s.sha256.clone(),
            s.family.clone(),
            s.first_seen.to_string(),
            s.last_seen.to_string(),
            r.size.to_string(),
            r.ssdeep.to_string(),
            r.tlsh.to_string(),
            r.imphash.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CorpusError::io("<unified csv>", e))
}

pub fn read_unified_csv<R: Read>(r: R) -> Result<Vec<UnifiedRecord>, CorpusError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = UNIFIED_COLUMNS.iter().map(|c| column_index(&headers, c)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let bad = |reason: String| CorpusError::MalformedRow { row, reason };
        let f = |j: usize| rec.get(idx[j]).unwrap_or("").trim();
        let sha256 = normalize_sha256(f(0)).ok_or_else(|| bad(format!("malformed sha256 {:?}", f(0))))?;
        let date = |j: usize| parse_date(f(j)).ok_or_else(|| bad(format!("malformed {} {:?}", UNIFIED_COLUMNS[j], f(j))));
        let sample = SampleRecord { sha256, family: f(1).to_owned(), first_seen: date(2)?, last_seen: date(3)?, path: None };
        let size: u64 = f(4).parse().map_err(|_| bad(format!("malformed size {:?}", f(4))))?;
        let ssdeep = SsdeepDigest::parse(f(5)).map_err(|e| bad(format!("ssdeep: {e}")))?;
        let tlsh = TlshDigest::parse(f(6)).map_err(|e| bad(format!("tlsh: {e}")))?;
        let imphash: ImpHash = f(7).parse().map_err(|e| bad(format!("imphash: {e}")))?;
        if size < MIN_SAMPLE_SIZE {
            return Err(bad(format!("size {size} is below {MIN_SAMPLE_SIZE}")));
        }
        out.push(UnifiedRecord { sample, size, ssdeep, tlsh, imphash });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHA_A: &str = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";

    #[test]
    fn ingest_three_rows() {
        let csv = format!(
            "sha256,family,first_seen,last_seen\n{SHA_A},agent,2024-01-03,2024-02-01\n{},mirai,2024-03-01T10:00:00Z,2024-03-02\n{},x,2024-01-01,2024-01-01\n",
            "B".repeat(64),
            "c".repeat(64)
        );
        let recs = ingest_metadata(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].sha256, "b".repeat(64));
        assert_eq!(recs[1].first_seen, NaiveDate::from_ymd_opt(2024, 3, 1).unwrap());
    }

    #[test]
    fn short_sha_is_malformed() {
        let csv = format!("sha256,family,first_seen,last_seen\n{SHA_A},a,2024-01-01,2024-01-01\n{},b,2024-01-01,2024-01-01\n", "a".repeat(63));
        match ingest_metadata(csv.as_bytes()) {
            Err(CorpusError::MalformedRow { row: 2, reason }) => assert!(reason.contains("sha256")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_family_column() {
        let csv = format!("sha256,first_seen,last_seen\n{SHA_A},2024-01-01,2024-01-01\n");
        assert!(matches!(ingest_metadata(csv.as_bytes()), Err(CorpusError::MissingColumn(c)) if c == "family"));
    }

    #[test]
    fn dates_must_be_ordered_and_valid() {
        let csv = format!("sha256,family,first_seen,last_seen\n{SHA_A},a,2024-02-01,2024-01-01\n");
        assert!(matches!(ingest_metadata(csv.as_bytes()), Err(CorpusError::MalformedRow { row: 1, .. })));
        let csv = format!("sha256,family,first_seen,last_seen\n{SHA_A},a,2024-13-01,2024-01-01\n");
        assert!(matches!(ingest_metadata(csv.as_bytes()), Err(CorpusError::MalformedRow { row: 1, .. })));
    }

    #[test]
    fn metadata_round_trip() {
        let rec = SampleRecord {
            sha256: SHA_A.into(),
            family: "f".into(),
            first_seen: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            last_seen: NaiveDate::from_ymd_opt(2024, 1, 9).unwrap(),
            path: None,
        };
        let mut buf = Vec::new();
        write_metadata_csv(&mut buf, std::slice::from_ref(&rec)).unwrap();
        assert_eq!(ingest_metadata(buf.as_slice()).unwrap(), vec![rec]);
    }
}
