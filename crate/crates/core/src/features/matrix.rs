// SPDX-License-Identifier: Apache-2.0

use std::io::{Read, Write};

use super::{column_labels, FeatureError, FeatureVector, Scheme};

/// Row-major sample-by-feature matrix keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    scheme: Scheme,
    columns: Vec<String>,
    sample_ids: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub(crate) fn from_flat(
        scheme: Scheme,
        columns: Vec<String>,
        sample_ids: Vec<String>,
        data: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        let width = columns.len();
        if sample_ids.is_empty() {
            return Err(FeatureError::Empty);
        }
        if let Some(expected) = scheme.fixed_width() {
            if width != expected {
                return Err(FeatureError::WrongWidth { scheme, expected, found: width });
            }
        }
        if data.len() != sample_ids.len() * width {
            return Err(FeatureError::IdCount { ids: sample_ids.len(), rows: data.len() / width.max(1) });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row: i / width, col: i % width });
        }
        Ok(Self { scheme, columns, sample_ids, data })
    }

    /// Stacks vectors that share a scheme and width.
    pub fn from_vectors(sample_ids: Vec<String>, vectors: Vec<FeatureVector>) -> Result<Self, FeatureError> {
        let first = vectors.first().ok_or(FeatureError::Empty)?;
        let (scheme, width) = (first.scheme(), first.len());
        if sample_ids.len() != vectors.len() {
            return Err(FeatureError::IdCount { ids: sample_ids.len(), rows: vectors.len() });
        }
        let mut data = Vec::with_capacity(vectors.len() * width);
        for v in vectors {
            if v.scheme() != scheme {
                return Err(FeatureError::SchemeMismatch { left: scheme, right: v.scheme() });
            }
            if v.len() != width {
                return Err(FeatureError::DimensionMismatch { left: width, right: v.len() });
            }
            data.extend(v.into_values());
        }
        Self::from_flat(scheme, column_labels(scheme, width), sample_ids, data)
    }

    /// Caller-supplied rows under [`Scheme::Raw`].
    pub fn raw(sample_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let width = rows.first().ok_or(FeatureError::Empty)?.len();
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(FeatureError::DimensionMismatch { left: width, right: r.len() });
        }
        if sample_ids.len() != rows.len() {
            return Err(FeatureError::IdCount { ids: sample_ids.len(), rows: rows.len() });
        }
        Self::from_flat(Scheme::Raw, column_labels(Scheme::Raw, width), sample_ids, rows.concat())
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { data, ..self.clone() }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector { values: self.row(i).to_vec(), scheme: self.scheme }
    }

    /// Header `sha256,<column labels>`, one row per sample. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        out.write_record(std::iter::once("sha256").chain(self.columns.iter().map(String::as_str))).map_err(err)?;
        for (i, id) in self.sample_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            out.write_record(&rec).map_err(err)?;
        }
        out.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R, scheme: Scheme) -> Result<Self, FeatureError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(|e| FeatureError::Csv(e.to_string()))?.clone();
        if header.get(0) != Some("sha256") {
            return Err(FeatureError::Csv("first column must be sha256".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FeatureError::Csv(e.to_string()))?;
            if rec.len() != columns.len() + 1 {
                return Err(FeatureError::Csv(format!("row {}: expected {} fields", n + 1, columns.len() + 1)));
            }
            ids.push(rec[0].to_owned());
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| FeatureError::Csv(format!("row {}: bad number {field:?}", n + 1)))?;
                data.push(v);
            }
        }
        Self::from_flat(scheme, columns, ids, data)
    }
}
