// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{CorpusError, SampleRecord};

/// Sample counts by family (rows) and first-seen month (columns), both in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDistribution {
    pub families: Vec<String>,
    /// `YYYY-MM`.
    pub months: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl FamilyDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(std::iter::once("family").chain(self.months.iter().map(String::as_str)))?;
        for (f, row) in self.families.iter().zip(&self.counts) {
            out.write_record(std::iter::once(f.clone()).chain(row.iter().map(ToString::to_string)))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn family_distribution<'a, I>(records: I) -> Result<FamilyDistribution, CorpusError>
where
    I: IntoIterator<Item = &'a SampleRecord>,
{
    let mut cells: BTreeMap<(&str, String), usize> = BTreeMap::new();
    let mut months = BTreeSet::new();
    let mut families = BTreeSet::new();
    for r in records {
        let month = format!("{:04}-{:02}", r.first_seen.year(), r.first_seen.month());
        months.insert(month.clone());
        families.insert(r.family.as_str());
        *cells.entry((r.family.as_str(), month)).or_insert(0) += 1;
    }
    if cells.is_empty() {
        return Err(CorpusError::Empty);
    }
    let months: Vec<String> = months.into_iter().collect();
    let counts = families
        .iter()
        .map(|f| months.iter().map(|m| cells.get(&(*f, m.clone())).copied().unwrap_or(0)).collect())
        .collect();
    Ok(FamilyDistribution { families: families.into_iter().map(str::to_owned).collect(), months, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn rec(family: &str, y: i32, m: u32, d: u32) -> SampleRecord {
        let date = NaiveDate::from_ymd_opt(y, m, d).unwrap();
        SampleRecord { sha256: "0".repeat(64), family: family.into(), first_seen: date, last_seen: date, path: None }
    }

    #[test]
    fn single_cell() {
        let recs: Vec<_> = (1..=5).map(|d| rec("agenttesla", 2024, 1, d)).collect();
        let dist = family_distribution(&recs).unwrap();
        assert_eq!(dist.counts, vec![vec![5]]);
        assert_eq!(dist.months, vec!["2024-01"]);
    }

    #[test]
    fn ordering_and_conservation() {
        let recs =
            vec![rec("mirai", 2024, 3, 2), rec("agenttesla", 2024, 1, 5), rec("mirai", 2024, 1, 9), rec("b", 2023, 12, 31)];
        let dist = family_distribution(&recs).unwrap();
        assert_eq!(dist.families, vec!["agenttesla", "b", "mirai"]);
        assert_eq!(dist.months, vec!["2023-12", "2024-01", "2024-03"]);
        assert_eq!(dist.counts[2], vec![0, 1, 1]);
        assert_eq!(dist.total(), recs.len());
        let mut buf = Vec::new();
        dist.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("family,2023-12,2024-01,2024-03\nagenttesla,0,1,0\n"));
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(family_distribution(&[]), Err(CorpusError::Empty)));
    }
}
