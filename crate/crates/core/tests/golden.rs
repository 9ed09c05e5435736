// SPDX-License-Identifier: Apache-2.0

//! Conformance against digests and scores produced by the reference
//! libfuzzy and TLSH implementations (see tests/data/golden).

use std::fs;
use std::path::PathBuf;

use hashclust::similarity::{
    ssdeep_compare, ssdeep_hash, tlsh_distance, tlsh_hash, HashError, SsdeepDigest, TlshDigest,
};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden")
}

fn vector_names() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(golden_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "bin").then(|| p.file_stem().unwrap().to_str().unwrap().to_owned())
        })
        .collect();
    names.sort();
    names
}

fn read_expected(name: &str, ext: &str) -> String {
    fs::read_to_string(golden_dir().join(format!("{name}.{ext}"))).unwrap().trim().to_owned()
}

fn input(name: &str) -> Vec<u8> {
    fs::read(golden_dir().join(format!("{name}.bin"))).unwrap()
}

#[test]
fn ssdeep_digests_match_reference() {
    let names = vector_names();
    assert!(names.len() >= 10);
    for name in &names {
        let got = ssdeep_hash(&input(name)).unwrap().to_string();
        assert_eq!(got, read_expected(name, "ssdeep"), "vector {name}");
    }
}

#[test]
fn tlsh_digests_match_reference() {
    let mut valid = 0;
    for name in &vector_names() {
        let expected = read_expected(name, "tlsh");
        let got = tlsh_hash(&input(name));
        if expected == "TNULL" {
            assert_eq!(got, Err(HashError::DegenerateInput), "vector {name}");
            continue;
        }
        let got = got.unwrap_or_else(|e| panic!("vector {name}: {e}"));
        let reference = TlshDigest::parse(&expected).unwrap();
        assert_eq!(got, reference, "vector {name}");
        assert_eq!(got.to_string(), expected[2..].to_ascii_lowercase(), "vector {name}");
        valid += 1;
    }
    assert!(valid >= 10);
}

#[test]
fn pairwise_scores_match_reference() {
    let pairs = fs::read_to_string(golden_dir().join("pairs.tsv")).unwrap();
    let mut checked = 0;
    for line in pairs.lines().filter(|l| !l.starts_with('#')) {
        let cols: Vec<&str> = line.split('\t').collect();
        let (a, b) = (cols[0], cols[1]);

        let da = SsdeepDigest::parse(&read_expected(a, "ssdeep")).unwrap();
        let db = SsdeepDigest::parse(&read_expected(b, "ssdeep")).unwrap();
        let score: u32 = cols[2].parse().unwrap();
        assert_eq!(ssdeep_compare(&da, &db), score, "ssdeep {a} vs {b}");
        assert_eq!(ssdeep_compare(&db, &da), score, "ssdeep {b} vs {a}");

        if cols[3] != "-" {
            let ta = TlshDigest::parse(&read_expected(a, "tlsh")).unwrap();
            let tb = TlshDigest::parse(&read_expected(b, "tlsh")).unwrap();
            let dist: u32 = cols[3].parse().unwrap();
            assert_eq!(tlsh_distance(&ta, &tb), dist, "tlsh {a} vs {b}");
        }
        checked += 1;
    }
    assert!(checked > 200);
}

#[test]
fn independent_random_files_score_zero() {
    let a = ssdeep_hash(&input("rand_102400_a")).unwrap();
    let b = ssdeep_hash(&input("rand_102400_b")).unwrap();
    assert_eq!(ssdeep_compare(&a, &b), 0);
}

#[test]
fn digest_strings_round_trip() {
    for name in &vector_names() {
        let s = read_expected(name, "ssdeep");
        assert_eq!(SsdeepDigest::parse(&s).unwrap().to_string(), s);
        let t = read_expected(name, "tlsh");
        if t != "TNULL" {
            let d = TlshDigest::parse(&t).unwrap();
            assert_eq!(TlshDigest::parse(&d.to_string()).unwrap(), d);
        }
    }
}
