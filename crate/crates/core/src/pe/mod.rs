// SPDX-License-Identifier: Apache-2.0

//! Minimal, read-only PE import-table parser and IMPHash.
//!
//! Only the headers needed to reach the import directory are decoded. Every
//! offset is bounds-checked; malformed input yields a [`PeError`].

pub mod builder;
mod imphash;

use std::fmt;

use thiserror::Error;

pub use imphash::{imphash, import_set, ImpHash};

const IMAGE_DOS_SIGNATURE: &[u8; 2] = b"MZ";
const IMAGE_NT_SIGNATURE: &[u8; 4] = b"PE\0\0";
const PE32_MAGIC: u16 = 0x10b;
const PE32_PLUS_MAGIC: u16 = 0x20b;
const IMPORT_DIRECTORY_INDEX: usize = 1;
const IMPORT_DESCRIPTOR_SIZE: usize = 20;
const SECTION_HEADER_SIZE: usize = 40;

const MAX_DESCRIPTORS: usize = 4096;
const MAX_SYMBOLS_PER_DLL: usize = 0x2000;
const MAX_NAME_LEN: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeError {
    #[error("not a PE file: {0}")]
    NotPe(&'static str),
    #[error("no import table")]
    NoImportTable,
    #[error("truncated file: {what} at offset {offset:#x} lies outside the data")]
    TruncatedFile { what: &'static str, offset: u64 },
    #[error("invalid {what} name in import table")]
    InvalidName { what: &'static str },
    #[error("import table is empty")]
    EmptyTable,
}

/// One imported symbol, normalized the way IMPHash expects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImportEntry {
    dll: String,
    symbol: String,
}

impl ImportEntry {
    /// Normalizes a raw DLL name and symbol: lowercase, with a trailing
    /// `.dll`, `.ocx` or `.sys` removed from the module name.
    pub fn new(dll: &str, symbol: &str) -> Result<Self, PeError> {
        check_name(dll, "module")?;
        check_name(symbol, "symbol")?;
        let dll = dll.to_ascii_lowercase();
        let dll = match dll.rsplit_once('.') {
            Some((stem, "dll" | "ocx" | "sys")) => stem.to_owned(),
            _ => dll,
        };
        Ok(Self { dll, symbol: symbol.to_ascii_lowercase() })
    }

    pub fn ordinal(dll: &str, ordinal: u16) -> Result<Self, PeError> {
        Self::new(dll, &format!("ord{ordinal}"))
    }

    pub fn dll(&self) -> &str {
        &self.dll
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }
}

fn check_name(name: &str, what: &'static str) -> Result<(), PeError> {
    if name.is_empty() || name.bytes().any(|b| !(0x21..=0x7e).contains(&b) || b == b',') {
        return Err(PeError::InvalidName { what });
    }
    Ok(())
}

impl fmt::Display for ImportEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.dll, self.symbol)
    }
}

/// Imports in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ImportTable {
    entries: Vec<ImportEntry>,
}

impl ImportTable {
    pub fn new(entries: Vec<ImportEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[ImportEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<ImportEntry> for ImportTable {
    fn from_iter<I: IntoIterator<Item = ImportEntry>>(iter: I) -> Self {
        Self { entries: iter.into_iter().collect() }
    }
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn bytes(&self, offset: usize, len: usize, what: &'static str) -> Result<&'a [u8], PeError> {
        offset
            .checked_add(len)
            .and_then(|end| self.data.get(offset..end))
            .ok_or(PeError::TruncatedFile { what, offset: offset as u64 })
    }

    fn u16(&self, offset: usize, what: &'static str) -> Result<u16, PeError> {
        let b = self.bytes(offset, 2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, offset: usize, what: &'static str) -> Result<u32, PeError> {
        let b = self.bytes(offset, 4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&self, offset: usize, what: &'static str) -> Result<u64, PeError> {
        let b = self.bytes(offset, 8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn cstr(&self, offset: usize, what: &'static str) -> Result<&'a str, PeError> {
        let tail = self
            .data
            .get(offset..)
            .filter(|t| !t.is_empty())
            .ok_or(PeError::TruncatedFile { what, offset: offset as u64 })?;
        let limit = tail.len().min(MAX_NAME_LEN);
        let nul = tail[..limit]
            .iter()
            .position(|&b| b == 0)
            .ok_or(PeError::TruncatedFile { what, offset: offset as u64 })?;
        std::str::from_utf8(&tail[..nul]).map_err(|_| PeError::InvalidName { what })
    }
}

struct Section {
    virtual_address: u32,
    virtual_size: u32,
    raw_size: u32,
    raw_pointer: u32,
}

struct Layout {
    is_64: bool,
    size_of_headers: u32,
    sections: Vec<Section>,
}

impl Layout {
    fn rva_to_offset(&self, rva: u32, what: &'static str) -> Result<usize, PeError> {
        for s in &self.sections {
            let span = s.virtual_size.max(s.raw_size);
            if rva >= s.virtual_address && u64::from(rva) < u64::from(s.virtual_address) + u64::from(span) {
                let delta = rva - s.virtual_address;
                if delta >= s.raw_size {
                    return Err(PeError::TruncatedFile { what, offset: u64::from(rva) });
                }
                return Ok(s.raw_pointer as usize + delta as usize);
            }
        }
        if rva < self.size_of_headers {
            return Ok(rva as usize);
        }
        Err(PeError::TruncatedFile { what, offset: u64::from(rva) })
    }
}

/// Parses the import directory of a PE32 or PE32+ image.
pub fn parse_imports(data: &[u8]) -> Result<ImportTable, PeError> {
    let r = Reader { data };
    if data.get(..2) != Some(IMAGE_DOS_SIGNATURE.as_slice()) {
        return Err(PeError::NotPe("missing MZ signature"));
    }
    let nt = r.u32(0x3c, "e_lfanew").map_err(|_| PeError::NotPe("DOS header too short"))? as usize;
    if r.bytes(nt, 4, "PE signature").ok() != Some(IMAGE_NT_SIGNATURE.as_slice()) {
        return Err(PeError::NotPe("missing PE signature"));
    }

    let coff = nt + 4;
    let n_sections = r.u16(coff + 2, "COFF header")? as usize;
    let opt_size = r.u16(coff + 16, "COFF header")? as usize;
    let opt = coff + 20;
    let is_64 = match r.u16(opt, "optional header")? {
        PE32_MAGIC => false,
        PE32_PLUS_MAGIC => true,
        _ => return Err(PeError::NotPe("unknown optional header magic")),
    };
    let size_of_headers = r.u32(opt + 60, "optional header")?;
    let (n_dirs_off, dirs_off) = if is_64 { (opt + 108, opt + 112) } else { (opt + 92, opt + 96) };
    let n_dirs = r.u32(n_dirs_off, "optional header")? as usize;
    if n_dirs <= IMPORT_DIRECTORY_INDEX || dirs_off + 8 * (IMPORT_DIRECTORY_INDEX + 1) > opt + opt_size {
        return Err(PeError::NoImportTable);
    }
    let import_rva = r.u32(dirs_off + 8 * IMPORT_DIRECTORY_INDEX, "data directory")?;
    let import_size = r.u32(dirs_off + 8 * IMPORT_DIRECTORY_INDEX + 4, "data directory")?;
    if import_rva == 0 || import_size == 0 {
        return Err(PeError::NoImportTable);
    }

    let sections_off = opt + opt_size;
    let mut sections = Vec::with_capacity(n_sections);
    for i in 0..n_sections {
        let s = sections_off + i * SECTION_HEADER_SIZE;
        sections.push(Section {
            virtual_size: r.u32(s + 8, "section header")?,
            virtual_address: r.u32(s + 12, "section header")?,
            raw_size: r.u32(s + 16, "section header")?,
            raw_pointer: r.u32(s + 20, "section header")?,
        });
    }
    let layout = Layout { is_64, size_of_headers, sections };

    let mut entries = Vec::new();
    let mut desc = layout.rva_to_offset(import_rva, "import directory")?;
    for _ in 0..MAX_DESCRIPTORS {
        let raw = r.bytes(desc, IMPORT_DESCRIPTOR_SIZE, "import descriptor")?;
        if raw.iter().all(|&b| b == 0) {
            break;
        }
        let original_first_thunk = r.u32(desc, "import descriptor")?;
        let name_rva = r.u32(desc + 12, "import descriptor")?;
        let first_thunk = r.u32(desc + 16, "import descriptor")?;
        let dll = r.cstr(layout.rva_to_offset(name_rva, "module name")?, "module name")?;

        let thunk_rva = if original_first_thunk != 0 { original_first_thunk } else { first_thunk };
        if thunk_rva != 0 {
            read_thunks(&r, &layout, dll, thunk_rva, &mut entries)?;
        }
        desc += IMPORT_DESCRIPTOR_SIZE;
    }

    if entries.is_empty() {
        return Err(PeError::NoImportTable);
    }
    Ok(ImportTable { entries })
}

fn read_thunks(
    r: &Reader<'_>,
    layout: &Layout,
    dll: &str,
    thunk_rva: u32,
    entries: &mut Vec<ImportEntry>,
) -> Result<(), PeError> {
    let width = if layout.is_64 { 8 } else { 4 };
    let mut at = layout.rva_to_offset(thunk_rva, "import lookup table")?;
    for _ in 0..MAX_SYMBOLS_PER_DLL {
        let (value, by_ordinal) = if layout.is_64 {
            let v = r.u64(at, "import lookup table")?;
            (v, v & (1 << 63) != 0)
        } else {
            let v = u64::from(r.u32(at, "import lookup table")?);
            (v, v & (1 << 31) != 0)
        };
        if value == 0 {
            break;
        }
        let entry = if by_ordinal {
            ImportEntry::ordinal(dll, (value & 0xffff) as u16)?
        } else {
            let hint_name = layout.rva_to_offset((value & 0x7fff_ffff) as u32, "hint/name entry")?;
            ImportEntry::new(dll, r.cstr(hint_name + 2, "symbol name")?)?
        };
        entries.push(entry);
        at += width;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::builder::{ImportSymbol, PeBuilder};
    use super::*;

    #[test]
    fn rejects_non_pe() {
        assert_eq!(parse_imports(b"ELF\x7f"), Err(PeError::NotPe("missing MZ signature")));
        assert!(matches!(parse_imports(b"MZ"), Err(PeError::NotPe(_))));
        let mut fake = vec![0u8; 128];
        fake[..2].copy_from_slice(b"MZ");
        fake[0x3c] = 0x40;
        assert_eq!(parse_imports(&fake), Err(PeError::NotPe("missing PE signature")));
    }

    #[test]
    fn empty_import_directory() {
        let pe = PeBuilder::new().text(vec![0xc3; 64]).build();
        assert_eq!(parse_imports(&pe), Err(PeError::NoImportTable));
    }

    #[test]
    fn single_import() {
        let pe = PeBuilder::new().import("KERNEL32.dll", ["ExitProcess"]).build();
        let table = parse_imports(&pe).unwrap();
        assert_eq!(table.entries(), &[ImportEntry::new("kernel32", "exitprocess").unwrap()]);
    }

    #[test]
    fn pe32_plus_and_ordinals() {
        let pe = PeBuilder::new()
            .pe32_plus()
            .import("WS2_32.dll", [ImportSymbol::Ordinal(115), ImportSymbol::name("connect")])
            .import("msvcrt.DLL", ["printf"])
            .build();
        let got: Vec<String> = parse_imports(&pe).unwrap().entries().iter().map(|e| e.to_string()).collect();
        assert_eq!(got, ["ws2_32.ord115", "ws2_32.connect", "msvcrt.printf"]);
    }

    #[test]
    fn truncated_import_directory() {
        let pe = PeBuilder::new().import("kernel32.dll", ["ExitProcess"]).build();
        // cut inside the .idata section
        let cut = &pe[..pe.len() - 0x1f0];
        assert!(matches!(parse_imports(cut), Err(PeError::TruncatedFile { .. })));
    }

    #[test]
    fn normalization() {
        let e = ImportEntry::new("Foo.OCX", "Bar").unwrap();
        assert_eq!(e.to_string(), "foo.bar");
        let e = ImportEntry::new("driver.SYS", "X").unwrap();
        assert_eq!(e.dll(), "driver");
        let e = ImportEntry::new("helper.exe", "Y").unwrap();
        assert_eq!(e.dll(), "helper.exe");
        assert!(ImportEntry::new("a,b", "c").is_err());
    }

    #[test]
    fn never_panics_on_prefixes() {
        let pe = PeBuilder::new()
            .import("kernel32.dll", ["ExitProcess", "CreateFileA"])
            .import("user32.dll", ["MessageBoxA"])
            .build();
        for n in 0..pe.len() {
            let _ = parse_imports(&pe[..n]);
        }
    }
}
