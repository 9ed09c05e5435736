// SPDX-License-Identifier: Apache-2.0

//! Feature vectors of the committed golden digests, frozen from an
//! independent decoder of the digest strings.

use std::fs;
use std::path::PathBuf;

use hashclust::features::{vectorize_ssdeep, vectorize_tlsh};
use hashclust::similarity::{SsdeepDigest, TlshDigest};

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden")
}

#[test]
fn golden_feature_vectors() {
    let table = fs::read_to_string(golden().join("features.tsv")).unwrap();
    let mut checked = (0, 0);
    for line in table.lines() {
        let mut parts = line.split('\t');
        let (name, scheme, values) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
        let expected: Vec<f64> = values.split(',').map(|v| v.parse().unwrap()).collect();
        let digest = fs::read_to_string(golden().join(format!("{name}.{scheme}"))).unwrap();
        let got = match scheme {
            "tlsh" => {
                checked.0 += 1;
                vectorize_tlsh(&TlshDigest::parse(digest.trim()).unwrap())
            }
            "ssdeep" => {
                checked.1 += 1;
                vectorize_ssdeep(&SsdeepDigest::parse(digest.trim()).unwrap())
            }
            other => panic!("unknown scheme {other}"),
        };
        assert_eq!(got.values(), expected.as_slice(), "{name} {scheme}");
    }
    assert!(checked.0 >= 10 && checked.1 >= 10, "{checked:?}");
}
