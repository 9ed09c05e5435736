// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DigestRow, SampleRecord, UnifiedRecord, MIN_SAMPLE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// Metadata row without a hashed file, or a hashed file without metadata.
    Unmatched,
    /// Repeated metadata row for a sha256 already seen.
    Duplicate,
    TooSmall,
    NoSsdeep,
    NoTlsh,
    NoImportTable,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unmatched => "unmatched",
            Self::Duplicate => "duplicate",
            Self::TooSmall => "too-small",
            Self::NoSsdeep => "no-ssdeep",
            Self::NoTlsh => "no-tlsh",
            Self::NoImportTable => "no-import-table",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reason → count, nonzero reasons only. Serializes as a flat JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DropReport(pub BTreeMap<String, usize>);

impl DropReport {
    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    pub fn get(&self, reason: DropReason) -> usize {
        self.0.get(reason.as_str()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinOutcome {
    /// Sorted by sha256.
    pub records: Vec<UnifiedRecord>,
    pub drops: DropReport,
    /// Every dropped key with its reason, in input order.
    pub dropped: Vec<(String, DropReason)>,
}

impl JoinOutcome {
    /// Metadata rows plus distinct hashed files that had no metadata.
    pub fn input_count(&self) -> usize {
        self.records.len() + self.drops.total()
    }
}

/// Inner join on sha256 followed by the completeness filter. Size is checked
/// first, so a tiny file counts as `too-small` even though its TLSH and
/// IMPHash are also missing.
pub fn join_and_filter(metadata: &[SampleRecord], digests: &[DigestRow]) -> JoinOutcome {
    let mut by_sha: HashMap<&str, &DigestRow> = HashMap::new();
    for d in digests {
        by_sha.entry(d.sha256.as_str()).or_insert(d);
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for m in metadata {
        let reason = if !seen.insert(m.sha256.as_str()) {
            Some(DropReason::Duplicate)
        } else {
            match by_sha.get(m.sha256.as_str()) {
                None => Some(DropReason::Unmatched),
                Some(d) if d.size < MIN_SAMPLE_SIZE => Some(DropReason::TooSmall),
                Some(d) => match (&d.ssdeep, &d.tlsh, &d.imphash) {
                    (None, _, _) => Some(DropReason::NoSsdeep),
                    (_, None, _) => Some(DropReason::NoTlsh),
                    (_, _, None) => Some(DropReason::NoImportTable),
                    (Some(s), Some(t), Some(i)) => {
                        records.push(UnifiedRecord {
                            sample: m.clone(),
                            size: d.size,
                            ssdeep: s.clone(),
                            tlsh: *t,
                            imphash: *i,
                        });
                        None
                    }
                },
            }
        };
        if let Some(r) = reason {
            dropped.push((m.sha256.clone(), r));
        }
    }
    let mut orphans: Vec<&str> = by_sha.keys().copied().filter(|s| !seen.contains(s)).collect();
    orphans.sort_unstable();
    dropped.extend(orphans.into_iter().map(|s| (s.to_owned(), DropReason::Unmatched)));

    let mut counts = BTreeMap::new();
    for (_, r) in &dropped {
        *counts.entry(r.as_str().to_owned()).or_insert(0) += 1;
    }
    records.sort_by(|a, b| a.sample.sha256.cmp(&b.sample.sha256));
    JoinOutcome { records, drops: DropReport(counts), dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::hash_file;
    use crate::pe::builder::PeBuilder;
    use chrono::NaiveDate;

    fn meta(sha: &str) -> SampleRecord {
        let d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        SampleRecord { sha256: sha.to_owned(), family: "f".into(), first_seen: d, last_seen: d, path: None }
    }

    fn pe(seed: u32, imports: bool) -> Vec<u8> {
        let payload: Vec<u8> = (0..4096u32).map(|i| ((i + seed).wrapping_mul(2_654_435_761) >> 9) as u8).collect();
        let b = PeBuilder::new().text(payload);
        if imports { b.import("kernel32.dll", ["Sleep"]) } else { b }.build()
    }

    #[test]
    fn reasons_and_conservation() {
        let good = hash_file(&pe(1, true));
        let tiny = hash_file(&[3u8; 49]);
        let no_imp = hash_file(&pe(2, false));
        let orphan = hash_file(&pe(3, true));
        let metadata = vec![meta(&good.sha256), meta(&tiny.sha256), meta(&no_imp.sha256), meta(&"f".repeat(64)), meta(&good.sha256)];
        let out = join_and_filter(&metadata, &[good.clone(), tiny, no_imp, orphan]);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].sample.sha256, good.sha256);
        let expected: BTreeMap<String, usize> =
            [("too-small", 1), ("no-import-table", 1), ("unmatched", 2), ("duplicate", 1)]
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v))
                .collect();
        assert_eq!(out.drops.0, expected);
        assert_eq!(out.input_count(), metadata.len() + 1);
    }

    #[test]
    fn fully_matched_has_no_drops() {
        let rows: Vec<DigestRow> = (0..3).map(|s| hash_file(&pe(s, true))).collect();
        let metadata: Vec<SampleRecord> = rows.iter().map(|r| meta(&r.sha256)).collect();
        let out = join_and_filter(&metadata, &rows);
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.drops.total(), 0);
        assert_eq!(serde_json::to_string(&out.drops).unwrap(), "{}");
    }
}
