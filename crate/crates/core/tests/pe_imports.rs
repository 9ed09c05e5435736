// SPDX-License-Identifier: Apache-2.0

//! Import tables and IMPHashes checked against values recorded with pefile
//! for the fixtures in tests/data/pe.

use std::fs;
use std::path::PathBuf;

use hashclust::pe::{imphash, import_set, parse_imports, ImportEntry, PeError};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/pe")
}

struct Expected {
    imphash: Option<String>,
    imports: Vec<ImportEntry>,
}

fn expected(stem: &str) -> Expected {
    let text = fs::read_to_string(fixture_dir().join(format!("{stem}.expected"))).unwrap();
    let mut out = Expected { imphash: None, imports: Vec::new() };
    for line in text.lines() {
        match line.split_once(' ') {
            Some(("imphash", "-")) => {}
            Some(("imphash", h)) => out.imphash = Some(h.to_owned()),
            Some(("import", item)) => {
                let (dll, sym) = item.split_once('!').unwrap();
                out.imports.push(ImportEntry::new(dll, sym).unwrap());
            }
            _ => panic!("bad line {line}"),
        }
    }
    out
}

fn stems() -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(fixture_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "exe").then(|| p.file_stem().unwrap().to_str().unwrap().to_owned())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn imports_and_imphash_match_pefile() {
    let mut hashed = 0;
    for stem in stems() {
        let data = fs::read(fixture_dir().join(format!("{stem}.exe"))).unwrap();
        let exp = expected(&stem);
        match exp.imphash {
            None => assert_eq!(parse_imports(&data), Err(PeError::NoImportTable), "{stem}"),
            Some(h) => {
                let table = parse_imports(&data).unwrap();
                assert_eq!(table.entries(), exp.imports.as_slice(), "{stem}");
                assert_eq!(imphash(&table).unwrap().to_string(), h, "{stem}");
                hashed += 1;
            }
        }
    }
    assert!(hashed >= 5);
}

#[test]
fn minimal_pe_has_single_entry() {
    let data = fs::read(fixture_dir().join("minimal_exitprocess.exe")).unwrap();
    let table = parse_imports(&data).unwrap();
    assert_eq!(table.len(), 1);
    assert_eq!(table.entries()[0].dll(), "kernel32");
    assert_eq!(table.entries()[0].symbol(), "exitprocess");
}

#[test]
fn reordering_changes_hash_but_not_set() {
    let read = |s: &str| parse_imports(&fs::read(fixture_dir().join(s)).unwrap()).unwrap();
    let a = read("pe32_multi.exe");
    let b = read("pe32_reordered.exe");
    assert_ne!(imphash(&a).unwrap(), imphash(&b).unwrap());
    assert_eq!(import_set(&a), import_set(&b));
}

#[test]
fn parsed_entries_are_normalized() {
    for stem in stems() {
        let Ok(table) = parse_imports(&fs::read(fixture_dir().join(format!("{stem}.exe"))).unwrap()) else {
            continue;
        };
        for e in table.entries() {
            for s in [e.dll(), e.symbol()] {
                assert!(!s.contains(','), "{s}");
                assert_eq!(s, s.to_ascii_lowercase());
            }
            for ext in [".dll", ".ocx", ".sys"] {
                assert!(!e.dll().ends_with(ext), "{}", e.dll());
            }
        }
    }
}
