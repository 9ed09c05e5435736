// SPDX-License-Identifier: Apache-2.0

//! C ABI over `hashclust`.
//!
//! Every fallible function returns an [`HcStatus`] and writes its result
//! through an out-pointer. On failure a message is kept in thread-local
//! storage and can be read with [`hc_last_error_message`]. Strings returned
//! through `char **` are owned by the caller and released with
//! [`hc_string_free`]. Matrices and clusterings are opaque handles with their
//! own `_free` functions. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hashclust::clustering::{adjusted_rand_index, kmeans_fit, silhouette_mean, ClusteringResult, KMeansConfig};
use hashclust::features::{standardize, FeatureMatrix};
use hashclust::pe::{imphash, parse_imports};
use hashclust::similarity::{ssdeep_compare, ssdeep_hash, tlsh_distance, tlsh_hash, SsdeepDigest, TlshDigest};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Hash = 4,
    Pe = 5,
    Feature = 6,
    Cluster = 7,
    Panic = 8,
}

/// Row-major feature matrix.
pub struct HcMatrix(FeatureMatrix);

/// Result of a K-Means fit.
pub struct HcClustering(ClusteringResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(HcStatus, String);

impl Fail {
    fn new(status: HcStatus, e: impl ToString) -> Self {
        Self(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HcStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::new(HcStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Result<&'a [u8], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(data, "data")?;
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    nonnull(s, what)?;
    CStr::from_ptr(s).to_str().map_err(|_| Fail::new(HcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    nonnull(out, "out")?;
    *out = CString::new(s).map_err(|e| Fail::new(HcStatus::InvalidArgument, e))?.into_raw();
    Ok(())
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    nonnull(out, "out")?;
    *out = v;
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next `hc_` call on the same thread.
#[no_mangle]
pub extern "C" fn hc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// SSDeep digest of `data` as `blocksize:coarse:fine`.
#[no_mangle]
pub unsafe extern "C" fn hc_ssdeep_hash(data: *const u8, len: usize, out: *mut *mut c_char) -> HcStatus {
    guard(|| {
        let d = ssdeep_hash(bytes(data, len)?).map_err(|e| Fail::new(HcStatus::Hash, e))?;
        put_string(out, d.to_string())
    })
}

/// Match score in 0..=100 between two SSDeep digests.
#[no_mangle]
pub unsafe extern "C" fn hc_ssdeep_compare(a: *const c_char, b: *const c_char, out: *mut u32) -> HcStatus {
    guard(|| {
        let a = SsdeepDigest::parse(text(a, "a")?).map_err(|e| Fail::new(HcStatus::InvalidArgument, e))?;
        let b = SsdeepDigest::parse(text(b, "b")?).map_err(|e| Fail::new(HcStatus::InvalidArgument, e))?;
        put(out, ssdeep_compare(&a, &b))
    })
}

/// TLSH digest of `data`, 70 lowercase hex characters without a version prefix.
#[no_mangle]
pub unsafe extern "C" fn hc_tlsh_hash(data: *const u8, len: usize, out: *mut *mut c_char) -> HcStatus {
    guard(|| {
        let d = tlsh_hash(bytes(data, len)?).map_err(|e| Fail::new(HcStatus::Hash, e))?;
        put_string(out, d.to_string())
    })
}

/// TLSH distance with the length term. Accepts digests with or without `T1`.
#[no_mangle]
pub unsafe extern "C" fn hc_tlsh_distance(a: *const c_char, b: *const c_char, out: *mut u32) -> HcStatus {
    guard(|| {
        let a = TlshDigest::parse(text(a, "a")?).map_err(|e| Fail::new(HcStatus::InvalidArgument, e))?;
        let b = TlshDigest::parse(text(b, "b")?).map_err(|e| Fail::new(HcStatus::InvalidArgument, e))?;
        put(out, tlsh_distance(&a, &b))
    })
}

/// IMPHash of a PE image as 32 lowercase hex characters.
#[no_mangle]
pub unsafe extern "C" fn hc_imphash(data: *const u8, len: usize, out: *mut *mut c_char) -> HcStatus {
    guard(|| {
        let table = parse_imports(bytes(data, len)?).map_err(|e| Fail::new(HcStatus::Pe, e))?;
        let h = imphash(&table).map_err(|e| Fail::new(HcStatus::Pe, e))?;
        put_string(out, h.to_string())
    })
}

/// Copies `n_rows * n_cols` row-major values into a new matrix. Values must
/// be finite.
#[no_mangle]
pub unsafe extern "C" fn hc_matrix_new(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut *mut HcMatrix,
) -> HcStatus {
    guard(|| {
        nonnull(out, "out")?;
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| Fail::new(HcStatus::InvalidArgument, "size overflow"))?;
        if n_cols == 0 && n_rows > 0 {
            return Err(Fail::new(HcStatus::InvalidArgument, "n_cols is 0"));
        }
        if len > 0 {
            nonnull(values, "values")?;
        }
        let flat = if len == 0 { &[][..] } else { slice::from_raw_parts(values, len) };
        let rows: Vec<Vec<f64>> = flat.chunks(n_cols.max(1)).map(<[f64]>::to_vec).collect();
        let ids = (0..n_rows).map(|i| i.to_string()).collect();
        let m = FeatureMatrix::raw(ids, &rows).map_err(|e| Fail::new(HcStatus::Feature, e))?;
        *out = Box::into_raw(Box::new(HcMatrix(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hc_matrix_free(m: *mut HcMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hc_matrix_rows(m: *const HcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n_samples())
}

#[no_mangle]
pub unsafe extern "C" fn hc_matrix_cols(m: *const HcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.width())
}

/// Copies the matrix values, row-major, into `buf` of `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_matrix_values(m: *const HcMatrix, buf: *mut f64, cap: usize) -> HcStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| Fail::new(HcStatus::NullPointer, "matrix is null"))?.0;
        copy_out(m.as_slice(), buf, cap)
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize) -> Result<(), Fail> {
    if cap < src.len() {
        return Err(Fail::new(HcStatus::InvalidArgument, format!("buffer holds {cap}, need {}", src.len())));
    }
    if !src.is_empty() {
        nonnull(buf, "buf")?;
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Column-wise z-score. Constant columns become zero.
#[no_mangle]
pub unsafe extern "C" fn hc_matrix_standardize(m: *const HcMatrix, out: *mut *mut HcMatrix) -> HcStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| Fail::new(HcStatus::NullPointer, "matrix is null"))?.0;
        nonnull(out, "out")?;
        let (z, _) = standardize(m).map_err(|e| Fail::new(HcStatus::Feature, e))?;
        *out = Box::into_raw(Box::new(HcMatrix(z)));
        Ok(())
    })
}

/// K-Means with k-means++ seeding and the library's default iteration,
/// restart and tolerance settings.
#[no_mangle]
pub unsafe extern "C" fn hc_kmeans_fit(
    m: *const HcMatrix,
    k: usize,
    seed: u64,
    out: *mut *mut HcClustering,
) -> HcStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| Fail::new(HcStatus::NullPointer, "matrix is null"))?.0;
        nonnull(out, "out")?;
        let fit = kmeans_fit(m, &KMeansConfig::new(k, seed)).map_err(|e| Fail::new(HcStatus::Cluster, e))?;
        *out = Box::into_raw(Box::new(HcClustering(fit)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hc_clustering_free(c: *mut HcClustering) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hc_clustering_k(c: *const HcClustering) -> usize {
    c.as_ref().map_or(0, |c| c.0.k())
}

#[no_mangle]
pub unsafe extern "C" fn hc_clustering_inertia(c: *const HcClustering) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.0.inertia)
}

/// Copies one label per sample into `buf` of `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn hc_clustering_labels(c: *const HcClustering, buf: *mut usize, cap: usize) -> HcStatus {
    guard(|| {
        let c = &c.as_ref().ok_or_else(|| Fail::new(HcStatus::NullPointer, "clustering is null"))?.0;
        copy_out(&c.labels, buf, cap)
    })
}

/// Mean silhouette of `labels` (one per row) under Euclidean distance.
#[no_mangle]
pub unsafe extern "C" fn hc_silhouette(
    m: *const HcMatrix,
    labels: *const usize,
    n: usize,
    out: *mut f64,
) -> HcStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| Fail::new(HcStatus::NullPointer, "matrix is null"))?.0;
        if n > 0 {
            nonnull(labels, "labels")?;
        }
        let labels = if n == 0 { &[][..] } else { slice::from_raw_parts(labels, n) };
        put(out, silhouette_mean(m, labels).map_err(|e| Fail::new(HcStatus::Cluster, e))?)
    })
}

/// Adjusted Rand index between two labelings of `n` items.
#[no_mangle]
pub unsafe extern "C" fn hc_adjusted_rand_index(a: *const usize, b: *const usize, n: usize, out: *mut f64) -> HcStatus {
    guard(|| {
        if n > 0 {
            nonnull(a, "a")?;
            nonnull(b, "b")?;
        }
        let (a, b) = if n == 0 { (&[][..], &[][..]) } else { (slice::from_raw_parts(a, n), slice::from_raw_parts(b, n)) };
        put(out, adjusted_rand_index(a, b))
    })
}
