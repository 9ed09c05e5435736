// SPDX-License-Identifier: Apache-2.0

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hashclust_ffi::*;

fn golden(name: &str) -> Vec<u8> {
    std::fs::read(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)).unwrap()
}

fn golden_text(name: &str) -> String {
    String::from_utf8(golden(name)).unwrap().trim().to_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    hc_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = hc_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

#[test]
fn hashes_match_golden_vectors() {
    let data = golden("golden/rand_004096.bin");
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(hc_ssdeep_hash(data.as_ptr(), data.len(), &mut s), HcStatus::Ok);
        assert_eq!(take(s), golden_text("golden/rand_004096.ssdeep"));
        assert!(hc_last_error_message().is_null());

        assert_eq!(hc_tlsh_hash(data.as_ptr(), data.len(), &mut s), HcStatus::Ok);
        let want = golden_text("golden/rand_004096.tlsh");
        assert_eq!(take(s), want[2..].to_ascii_lowercase());

        let pe = golden("pe/pe32_multi.exe");
        assert_eq!(hc_imphash(pe.as_ptr(), pe.len(), &mut s), HcStatus::Ok);
        assert_eq!(take(s), "2ce0ff9f08241bfbabf62ee4bfd82a53");
    }
}

#[test]
fn compare_and_distance() {
    let a = CString::new(golden_text("golden/rand_004096.ssdeep")).unwrap();
    let b = CString::new(golden_text("golden/rand_004096_mut05pct.ssdeep")).unwrap();
    let ta = CString::new(golden_text("golden/rand_004096.tlsh")).unwrap();
    let mut score = 0u32;
    unsafe {
        assert_eq!(hc_ssdeep_compare(a.as_ptr(), a.as_ptr(), &mut score), HcStatus::Ok);
        assert_eq!(score, 100);
        assert_eq!(hc_ssdeep_compare(a.as_ptr(), b.as_ptr(), &mut score), HcStatus::Ok);
        assert!(score < 100);
        assert_eq!(hc_tlsh_distance(ta.as_ptr(), ta.as_ptr(), &mut score), HcStatus::Ok);
        assert_eq!(score, 0);
    }
}

#[test]
fn errors_set_status_and_message() {
    let short = [7u8; 49];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(hc_tlsh_hash(short.as_ptr(), short.len(), &mut s), HcStatus::Hash);
        assert!(s.is_null());
        assert!(last_error().contains("49"));

        assert_eq!(hc_ssdeep_hash(ptr::null(), 5, &mut s), HcStatus::NullPointer);
        assert_eq!(hc_ssdeep_hash(short.as_ptr(), short.len(), ptr::null_mut()), HcStatus::NullPointer);

        let bad = [0xffu8, 0];
        let mut score = 0;
        let ok = CString::new("3:abc:def").unwrap();
        assert_eq!(hc_ssdeep_compare(bad.as_ptr().cast(), ok.as_ptr(), &mut score), HcStatus::InvalidUtf8);
        let junk = CString::new("not a digest").unwrap();
        assert_eq!(hc_ssdeep_compare(junk.as_ptr(), ok.as_ptr(), &mut score), HcStatus::InvalidArgument);

        let pe = golden("pe/no_imports.exe");
        assert_eq!(hc_imphash(pe.as_ptr(), pe.len(), &mut s), HcStatus::Pe);
        assert_eq!(hc_imphash(short.as_ptr(), short.len(), &mut s), HcStatus::Pe);

        // A successful call clears the message.
        assert_eq!(hc_ssdeep_hash(short.as_ptr(), short.len(), &mut s), HcStatus::Ok);
        hc_string_free(s);
        assert!(hc_last_error_message().is_null());
        hc_string_free(ptr::null_mut());
    }
}

#[test]
fn kmeans_round_trip_through_handles() {
    let mut values = Vec::new();
    for i in 0..10 {
        let off = if i < 5 { 0.0 } else { 50.0 };
        values.extend([off + i as f64 * 0.1, off - i as f64 * 0.05]);
    }
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(hc_matrix_new(values.as_ptr(), 10, 2, &mut m), HcStatus::Ok);
        assert_eq!((hc_matrix_rows(m), hc_matrix_cols(m)), (10, 2));
        let mut copy = vec![0.0; 20];
        assert_eq!(hc_matrix_values(m, copy.as_mut_ptr(), copy.len()), HcStatus::Ok);
        assert_eq!(copy, values);
        assert_eq!(hc_matrix_values(m, copy.as_mut_ptr(), 19), HcStatus::InvalidArgument);

        let mut z = ptr::null_mut();
        assert_eq!(hc_matrix_standardize(m, &mut z), HcStatus::Ok);

        let mut c = ptr::null_mut();
        assert_eq!(hc_kmeans_fit(z, 2, 42, &mut c), HcStatus::Ok);
        assert_eq!(hc_clustering_k(c), 2);
        assert!(hc_clustering_inertia(c) >= 0.0);
        let mut labels = vec![usize::MAX; 10];
        assert_eq!(hc_clustering_labels(c, labels.as_mut_ptr(), labels.len()), HcStatus::Ok);
        let truth: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let mut ari = 0.0;
        assert_eq!(hc_adjusted_rand_index(labels.as_ptr(), truth.as_ptr(), 10, &mut ari), HcStatus::Ok);
        assert_eq!(ari, 1.0);
        let mut sil = 0.0;
        assert_eq!(hc_silhouette(z, labels.as_ptr(), 10, &mut sil), HcStatus::Ok);
        assert!(sil > 0.9 && sil <= 1.0, "{sil}");
        assert_eq!(hc_silhouette(z, labels.as_ptr(), 9, &mut sil), HcStatus::Cluster);

        let mut c2 = ptr::null_mut();
        assert_eq!(hc_kmeans_fit(z, 11, 42, &mut c2), HcStatus::Cluster);
        assert!(c2.is_null());
        assert!(last_error().contains("11"));

        hc_clustering_free(c);
        hc_matrix_free(z);
        hc_matrix_free(m);
        hc_matrix_free(ptr::null_mut());
        assert_eq!(hc_matrix_rows(ptr::null()), 0);
        assert!(hc_clustering_inertia(ptr::null()).is_nan());
    }
}

#[test]
fn matrix_rejects_non_finite_values() {
    let v = [1.0, f64::NAN];
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(hc_matrix_new(v.as_ptr(), 1, 2, &mut m), HcStatus::Feature);
        assert!(m.is_null());
        assert_eq!(hc_matrix_new(v.as_ptr(), 1, 0, &mut m), HcStatus::InvalidArgument);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(hc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c_and_cpp() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/hashclust.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["hc_ssdeep_hash", "hc_kmeans_fit", "hc_string_free", "HC_STATUS_PANIC", "typedef struct HcMatrix HcMatrix"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
            .unwrap_or_else(|e| panic!("{compiler}: {e}"));
        assert!(status.success(), "{compiler} rejected the header");
    }
}
