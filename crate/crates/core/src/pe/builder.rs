// SPDX-License-Identifier: Apache-2.0

//! Writes small, well-formed PE images with a chosen import table.
//!
//! The images are inert: the entry point is a single `ret` at the start of
//! `.text` and everything after it is opaque payload.

const FILE_ALIGNMENT: u32 = 0x200;
const SECTION_ALIGNMENT: u32 = 0x1000;
const NT_HEADERS_OFFSET: u32 = 0x80;
const DOS_STUB_MESSAGE: &[u8] = b"This program cannot be run in DOS mode.\r\r\n$";

const SCN_CODE: u32 = 0x6000_0020;
const SCN_IDATA: u32 = 0xc000_0040;
const SCN_DATA: u32 = 0x4000_0040;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportSymbol {
    Name(String),
    Ordinal(u16),
}

impl ImportSymbol {
    pub fn name(s: impl Into<String>) -> Self {
        Self::Name(s.into())
    }
}

impl From<&str> for ImportSymbol {
    fn from(s: &str) -> Self {
        Self::Name(s.to_owned())
    }
}

impl From<String> for ImportSymbol {
    fn from(s: String) -> Self {
        Self::Name(s)
    }
}

#[derive(Debug, Clone)]
struct RawSection {
    name: [u8; 8],
    data: Vec<u8>,
    characteristics: u32,
}

fn section_name(name: &str) -> [u8; 8] {
    let mut out = [0u8; 8];
    let n = name.len().min(8);
    out[..n].copy_from_slice(&name.as_bytes()[..n]);
    out
}

fn align(v: u32, a: u32) -> u32 {
    v.div_ceil(a) * a
}

#[derive(Debug, Clone)]
pub struct PeBuilder {
    pe32_plus: bool,
    timestamp: u32,
    text: Vec<u8>,
    imports: Vec<(String, Vec<ImportSymbol>)>,
    extra: Vec<RawSection>,
}

impl Default for PeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl PeBuilder {
    pub fn new() -> Self {
        Self { pe32_plus: false, timestamp: 0, text: Vec::new(), imports: Vec::new(), extra: Vec::new() }
    }

    pub fn pe32_plus(mut self) -> Self {
        self.pe32_plus = true;
        self
    }

    pub fn timestamp(mut self, t: u32) -> Self {
        self.timestamp = t;
        self
    }

    /// Payload placed in `.text` after the `ret` at the entry point.
    pub fn text(mut self, payload: Vec<u8>) -> Self {
        self.text = payload;
        self
    }

    pub fn import<I, S>(mut self, dll: &str, symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<ImportSymbol>,
    {
        self.imports.push((dll.to_owned(), symbols.into_iter().map(Into::into).collect()));
        self
    }

    /// Appends an initialized-data section.
    pub fn section(mut self, name: &str, data: Vec<u8>) -> Self {
        self.extra.push(RawSection { name: section_name(name), data, characteristics: SCN_DATA });
        self
    }

    fn thunk_width(&self) -> u32 {
        if self.pe32_plus {
            8
        } else {
            4
        }
    }

    /// Lays out `.idata` at `base_rva`; returns the section bytes plus the
    /// import and IAT directory entries.
    fn build_idata(&self, base_rva: u32) -> (Vec<u8>, (u32, u32), (u32, u32)) {
        let w = self.thunk_width();
        let n = self.imports.len() as u32;
        let desc_size = (n + 1) * 20;

        let mut thunk_off = Vec::with_capacity(self.imports.len());
        let mut cursor = desc_size;
        for (_, syms) in &self.imports {
            let table = (syms.len() as u32 + 1) * w;
            thunk_off.push((cursor, cursor + table));
            cursor += 2 * table;
        }
        let iat_start = thunk_off.first().map_or(cursor, |t| t.1);
        let iat_end = cursor;

        let mut names = Vec::new();
        let mut hint_name_off = Vec::new();
        for (_, syms) in &self.imports {
            let mut offs = Vec::with_capacity(syms.len());
            for s in syms {
                match s {
                    ImportSymbol::Name(name) => {
                        offs.push(Some(cursor + names.len() as u32));
                        names.extend_from_slice(&0u16.to_le_bytes());
                        names.extend_from_slice(name.as_bytes());
                        names.push(0);
                        if names.len() % 2 == 1 {
                            names.push(0);
                        }
                    }
                    ImportSymbol::Ordinal(_) => offs.push(None),
                }
            }
            hint_name_off.push(offs);
        }
        let mut dll_name_off = Vec::new();
        for (dll, _) in &self.imports {
            dll_name_off.push(cursor + names.len() as u32);
            names.extend_from_slice(dll.as_bytes());
            names.push(0);
        }

        let mut out = vec![0u8; cursor as usize];
        for (i, (_, syms)) in self.imports.iter().enumerate() {
            let d = i * 20;
            let (ilt, iat) = thunk_off[i];
            out[d..d + 4].copy_from_slice(&(base_rva + ilt).to_le_bytes());
            out[d + 12..d + 16].copy_from_slice(&(base_rva + dll_name_off[i]).to_le_bytes());
            out[d + 16..d + 20].copy_from_slice(&(base_rva + iat).to_le_bytes());
            for (j, sym) in syms.iter().enumerate() {
                let value: u64 = match (sym, hint_name_off[i][j]) {
                    (ImportSymbol::Ordinal(o), _) => {
                        let flag = if self.pe32_plus { 1u64 << 63 } else { 1u64 << 31 };
                        flag | u64::from(*o)
                    }
                    (_, Some(off)) => u64::from(base_rva + off),
                    (ImportSymbol::Name(_), None) => unreachable!("named import without hint/name entry"),
                };
                for table in [ilt, iat] {
                    let at = (table + j as u32 * w) as usize;
                    out[at..at + w as usize].copy_from_slice(&value.to_le_bytes()[..w as usize]);
                }
            }
        }
        out.extend_from_slice(&names);

        let import_dir = (base_rva, desc_size);
        let iat_dir = (base_rva + iat_start, iat_end - iat_start);
        (out, import_dir, iat_dir)
    }

    pub fn build(&self) -> Vec<u8> {
        let opt_size: u32 = if self.pe32_plus { 240 } else { 224 };
        let n_sections = 1 + u32::from(!self.imports.is_empty()) + self.extra.len() as u32;
        let headers_len = NT_HEADERS_OFFSET + 4 + 20 + opt_size + 40 * n_sections;
        let size_of_headers = align(headers_len, FILE_ALIGNMENT);

        let mut text = Vec::with_capacity(self.text.len() + 1);
        text.push(0xc3);
        text.extend_from_slice(&self.text);

        let mut sections = vec![RawSection { name: section_name(".text"), data: text, characteristics: SCN_CODE }];
        let text_rva = SECTION_ALIGNMENT;
        let mut next_rva = align(text_rva + sections[0].data.len() as u32, SECTION_ALIGNMENT);

        let mut import_dir = (0, 0);
        let mut iat_dir = (0, 0);
        if !self.imports.is_empty() {
            let (idata, imp, iat) = self.build_idata(next_rva);
            import_dir = imp;
            iat_dir = iat;
            next_rva = align(next_rva + idata.len() as u32, SECTION_ALIGNMENT);
            sections.push(RawSection { name: section_name(".idata"), data: idata, characteristics: SCN_IDATA });
        }
        for s in &self.extra {
            next_rva = align(next_rva + s.data.len() as u32, SECTION_ALIGNMENT);
            sections.push(s.clone());
        }
        let size_of_image = next_rva;

        let mut out = vec![0u8; size_of_headers as usize];
        out[0..2].copy_from_slice(b"MZ");
        out[2..4].copy_from_slice(&0x90u16.to_le_bytes());
        out[4..6].copy_from_slice(&3u16.to_le_bytes());
        out[0x3c..0x40].copy_from_slice(&NT_HEADERS_OFFSET.to_le_bytes());
        out[0x4e..0x4e + DOS_STUB_MESSAGE.len()].copy_from_slice(DOS_STUB_MESSAGE);

        let nt = NT_HEADERS_OFFSET as usize;
        out[nt..nt + 4].copy_from_slice(b"PE\0\0");
        let coff = nt + 4;
        let (machine, characteristics): (u16, u16) = if self.pe32_plus { (0x8664, 0x0022) } else { (0x014c, 0x0102) };
        put16(&mut out, coff, machine);
        put16(&mut out, coff + 2, n_sections as u16);
        put32(&mut out, coff + 4, self.timestamp);
        put16(&mut out, coff + 16, opt_size as u16);
        put16(&mut out, coff + 18, characteristics);

        let opt = coff + 20;
        let code_size = align(sections[0].data.len() as u32, FILE_ALIGNMENT);
        let data_size: u32 = sections[1..].iter().map(|s| align(s.data.len() as u32, FILE_ALIGNMENT)).sum();
        put16(&mut out, opt, if self.pe32_plus { 0x20b } else { 0x10b });
        out[opt + 2] = 14;
        put32(&mut out, opt + 4, code_size);
        put32(&mut out, opt + 8, data_size);
        put32(&mut out, opt + 16, text_rva);
        put32(&mut out, opt + 20, text_rva);
        if self.pe32_plus {
            put64(&mut out, opt + 24, 0x1_4000_0000);
        } else {
            put32(&mut out, opt + 24, if sections.len() > 1 { text_rva } else { 0 });
            put32(&mut out, opt + 28, 0x40_0000);
        }
        put32(&mut out, opt + 32, SECTION_ALIGNMENT);
        put32(&mut out, opt + 36, FILE_ALIGNMENT);
        put16(&mut out, opt + 40, 6);
        put16(&mut out, opt + 48, 6);
        put32(&mut out, opt + 56, size_of_image);
        put32(&mut out, opt + 60, size_of_headers);
        put16(&mut out, opt + 68, 3);
        put16(&mut out, opt + 70, 0x8140);
        let dirs = if self.pe32_plus {
            put64(&mut out, opt + 72, 0x10_0000);
            put64(&mut out, opt + 80, 0x1000);
            put64(&mut out, opt + 88, 0x10_0000);
            put64(&mut out, opt + 96, 0x1000);
            put32(&mut out, opt + 108, 16);
            opt + 112
        } else {
            put32(&mut out, opt + 72, 0x10_0000);
            put32(&mut out, opt + 76, 0x1000);
            put32(&mut out, opt + 80, 0x10_0000);
            put32(&mut out, opt + 84, 0x1000);
            put32(&mut out, opt + 92, 16);
            opt + 96
        };
        put32(&mut out, dirs + 8, import_dir.0);
        put32(&mut out, dirs + 12, import_dir.1);
        put32(&mut out, dirs + 12 * 8, iat_dir.0);
        put32(&mut out, dirs + 12 * 8 + 4, iat_dir.1);

        let mut sh = opt + opt_size as usize;
        let mut rva = text_rva;
        for s in &sections {
            let raw_size = align(s.data.len() as u32, FILE_ALIGNMENT);
            let raw_ptr = out.len() as u32;
            out[sh..sh + 8].copy_from_slice(&s.name);
            put32(&mut out, sh + 8, s.data.len() as u32);
            put32(&mut out, sh + 12, rva);
            put32(&mut out, sh + 16, raw_size);
            put32(&mut out, sh + 20, raw_ptr);
            put32(&mut out, sh + 36, s.characteristics);
            out.extend_from_slice(&s.data);
            out.resize((raw_ptr + raw_size) as usize, 0);
            sh += 40;
            rva = align(rva + s.data.len() as u32, SECTION_ALIGNMENT);
        }
        out
    }
}

fn put16(buf: &mut [u8], at: usize, v: u16) {
    buf[at..at + 2].copy_from_slice(&v.to_le_bytes());
}

fn put32(buf: &mut [u8], at: usize, v: u32) {
    buf[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn put64(buf: &mut [u8], at: usize, v: u64) {
    buf[at..at + 8].copy_from_slice(&v.to_le_bytes());
}
