// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use super::{ImportTable, PeError};

/// MD5 of the comma-joined `dll.symbol` sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImpHash([u8; 16]);

impl ImpHash {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for ImpHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for ImpHash {
    type Err = crate::similarity::HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = |position: usize, reason: &str| crate::similarity::HashError::MalformedDigest {
            position,
            reason: reason.to_owned(),
        };
        if let Some(pos) = s.bytes().position(|b| !b.is_ascii_hexdigit()) {
            return Err(malformed(pos, "non-hex character"));
        }
        if s.len() != 32 {
            return Err(malformed(s.len().min(32), "expected 32 hex characters"));
        }
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out).map_err(|_| malformed(0, "invalid hex"))?;
        Ok(Self(out))
    }
}

impl TryFrom<String> for ImpHash {
    type Error = crate::similarity::HashError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ImpHash> for String {
    fn from(h: ImpHash) -> Self {
        h.to_string()
    }
}

/// Order-sensitive digest of an import table.
pub fn imphash(table: &ImportTable) -> Result<ImpHash, PeError> {
    if table.is_empty() {
        return Err(PeError::EmptyTable);
    }
    let mut hasher = Md5::new();
    for (i, entry) in table.entries().iter().enumerate() {
        if i > 0 {
            hasher.update(b",");
        }
        hasher.update(entry.dll().as_bytes());
        hasher.update(b".");
        hasher.update(entry.symbol().as_bytes());
    }
    Ok(ImpHash(hasher.finalize().into()))
}

/// Order-insensitive set of `dll.symbol` strings.
pub fn import_set(table: &ImportTable) -> BTreeSet<String> {
    table.entries().iter().map(ToString::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pe::ImportEntry;

    fn table(items: &[(&str, &str)]) -> ImportTable {
        items.iter().map(|(d, s)| ImportEntry::new(d, s).unwrap()).collect()
    }

    #[test]
    fn known_value() {
        // md5("kernel32.exitprocess")
        let h = imphash(&table(&[("kernel32", "exitprocess")])).unwrap();
        assert_eq!(h.to_string(), "f9ade0aa18f660a34a4fa23392e21838");
        assert_eq!(h.to_string().parse::<ImpHash>().unwrap(), h);
    }

    #[test]
    fn order_matters_for_hash_not_set() {
        let a = table(&[("kernel32", "a"), ("user32", "b")]);
        let b = table(&[("user32", "b"), ("kernel32", "a")]);
        assert_ne!(imphash(&a).unwrap(), imphash(&b).unwrap());
        assert_eq!(import_set(&a), import_set(&b));
    }

    #[test]
    fn set_dedups() {
        let t = table(&[("k", "a"), ("k", "a"), ("k", "b")]);
        assert_eq!(import_set(&t).len(), 2);
        let d = table(&[("u", "x")]);
        assert!(import_set(&t).is_disjoint(&import_set(&d)));
    }

    #[test]
    fn empty_table() {
        assert_eq!(imphash(&ImportTable::default()), Err(PeError::EmptyTable));
    }

    #[test]
    fn parse_rejects_short() {
        assert!("abc".parse::<ImpHash>().is_err());
    }
}
