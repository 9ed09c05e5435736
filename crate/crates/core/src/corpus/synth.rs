// SPDX-License-Identifier: Apache-2.0

//! Planted-family PE corpus. Every file is an inert image built by
//! [`PeBuilder`]: a `ret` at the entry point followed by random payload.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_metadata_csv, CorpusError, SampleRecord};
use crate::pe::builder::PeBuilder;
use crate::pe::{imphash, ImportEntry, ImportTable};

const MIN_PAYLOAD: usize = 4096;
const MAX_PAYLOAD: usize = 12288;
/// 2024-01-01T00:00:00Z.
const BASE_TIMESTAMP: u32 = 1_704_067_200;

const IMPORT_POOL: &[(&str, &[&str])] = &[
    (
        "kernel32.dll",
        &[
            "CreateFileW", "ReadFile", "WriteFile", "CloseHandle", "GetProcAddress", "LoadLibraryA",
            "VirtualAlloc", "VirtualProtect", "Sleep", "GetTickCount", "CreateThread", "ExitProcess",
            "GetModuleHandleW", "CreateProcessW", "TerminateProcess", "GetLastError", "HeapAlloc",
            "HeapFree", "FindFirstFileW", "FindNextFileW", "WriteProcessMemory", "CreateRemoteThread",
        ],
    ),
    (
        "user32.dll",
        &["MessageBoxW", "GetAsyncKeyState", "SetWindowsHookExW", "GetForegroundWindow", "GetWindowTextW", "FindWindowW", "ShowWindow", "keybd_event"],
    ),
    (
        "advapi32.dll",
        &["RegOpenKeyExW", "RegSetValueExW", "RegCloseKey", "CryptAcquireContextW", "CryptEncrypt", "OpenProcessToken", "AdjustTokenPrivileges", "CreateServiceW", "StartServiceW"],
    ),
    ("ws2_32.dll", &["WSAStartup", "socket", "connect", "send", "recv", "closesocket", "gethostbyname", "inet_addr"]),
    ("wininet.dll", &["InternetOpenW", "InternetOpenUrlW", "InternetReadFile", "InternetCloseHandle", "HttpSendRequestW"]),
    ("shell32.dll", &["ShellExecuteW", "SHGetFolderPathW", "SHGetSpecialFolderPathW"]),
    ("ntdll.dll", &["NtQueryInformationProcess", "RtlGetVersion", "NtUnmapViewOfSection", "RtlMoveMemory"]),
    ("crypt32.dll", &["CryptStringToBinaryA", "CryptUnprotectData"]),
    ("msvcrt.dll", &["malloc", "free", "memcpy", "strlen", "sprintf", "rand"]),
    ("gdi32.dll", &["BitBlt", "CreateCompatibleDC", "GetDeviceCaps"]),
];

/// Ordered import table of one family: `(dll, symbols)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportProfile(pub Vec<(String, Vec<String>)>);

impl ImportProfile {
    fn table(&self) -> Option<ImportTable> {
        self.0
            .iter()
            .flat_map(|(dll, syms)| syms.iter().map(move |s| ImportEntry::new(dll, s)))
            .collect::<Result<Vec<_>, _>>()
            .ok()
            .map(ImportTable::new)
    }

    /// kernel32 plus one to three other modules, symbols in random order.
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut out = Vec::new();
        let mut modules: Vec<usize> = (1..IMPORT_POOL.len()).collect();
        modules.shuffle(rng);
        let extra = rng.gen_range(1..=3);
        for m in std::iter::once(0).chain(modules.into_iter().take(extra)) {
            let (dll, pool) = IMPORT_POOL[m];
            let max = pool.len().min(if m == 0 { 8 } else { 5 });
            let n = rng.gen_range(2.min(pool.len())..=max);
            let syms = index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i].to_owned()).collect();
            out.push((dll.to_owned(), syms));
        }
        Self(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub families: usize,
    pub samples_per_family: usize,
    /// Fraction of payload bytes changed in each variant.
    pub mutation_rate: f64,
    /// Per-family import tables. Missing entries are generated from the seed.
    pub import_profiles: Vec<ImportProfile>,
    pub seed: u64,
    /// Written to the manifest as both first_seen and last_seen.
    pub generation_date: NaiveDate,
    /// Chance that a variant gets an extra data section.
    pub section_probability: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            families: 6,
            samples_per_family: 20,
            mutation_rate: 0.02,
            import_profiles: Vec::new(),
            seed: 42,
            generation_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            section_probability: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_owned()));
        if self.families < 2 {
            return bad("families must be at least 2");
        }
        if self.samples_per_family < 2 {
            return bad("samples_per_family must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.section_probability) {
            return bad("section_probability must lie in [0, 1]");
        }
        if self.import_profiles.len() > self.families {
            return bad("more import profiles than families");
        }
        if self.import_profiles.iter().any(|p| p.table().is_none_or(|t| t.is_empty())) {
            return bad("import profiles need at least one valid symbol");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sha256: String,
    pub family: String,
    pub path: PathBuf,
}

pub fn family_name(i: usize) -> String {
    format!("family{i:02}")
}

/// Writes `out/samples/<sha256>.exe` and `out/manifest.csv`. Equal configs
/// produce byte-identical output.
pub fn synth_corpus(cfg: &SynthConfig, out: &Path) -> Result<Vec<ManifestRow>, CorpusError> {
    cfg.validate()?;
    let samples = out.join("samples");
    fs::create_dir_all(&samples).map_err(|e| CorpusError::io(&samples, e))?;

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used_hashes = HashSet::new();
    for p in &cfg.import_profiles {
        used_hashes.insert(imphash(&p.table().expect("validated")).expect("validated"));
    }
    let mut rows = Vec::with_capacity(cfg.families * cfg.samples_per_family);
    for f in 0..cfg.families {
        let mut frng = ChaCha8Rng::seed_from_u64(master.gen());
        let len = frng.gen_range(MIN_PAYLOAD..=MAX_PAYLOAD);
        let mut payload = vec![0u8; len];
        frng.fill(payload.as_mut_slice());
        let profile = match cfg.import_profiles.get(f) {
            Some(p) => p.clone(),
            None => loop {
                let p = ImportProfile::random(&mut frng);
                if used_hashes.insert(imphash(&p.table().expect("pool names are valid")).expect("nonempty")) {
                    break p;
                }
            },
        };
        for v in 0..cfg.samples_per_family {
            let mut vrng = ChaCha8Rng::seed_from_u64(frng.gen());
            let mut body = payload.clone();
            let n_mut = (cfg.mutation_rate * len as f64).round() as usize;
            for pos in index::sample(&mut vrng, len, n_mut.min(len)) {
                body[pos] ^= vrng.gen_range(1..=255u8);
            }
            let serial = (f * cfg.samples_per_family + v) as u32;
            let mut b = PeBuilder::new().timestamp(BASE_TIMESTAMP.wrapping_add(serial.wrapping_mul(3607))).text(body);
            for (dll, syms) in &profile.0 {
                b = b.import(dll, syms.iter().map(String::as_str));
            }
            if vrng.gen_bool(cfg.section_probability) {
                let mut extra = vec![0u8; vrng.gen_range(64..=512)];
                vrng.fill(extra.as_mut_slice());
                b = b.section(".rsrc", extra);
            }
            let bytes = b.build();
            let sha256 = hex::encode(Sha256::digest(&bytes));
            let path = samples.join(format!("{sha256}.exe"));
            fs::write(&path, &bytes).map_err(|e| CorpusError::io(&path, e))?;
            rows.push(ManifestRow { sha256, family: family_name(f), path });
        }
    }

    let records: Vec<SampleRecord> = rows
        .iter()
        .map(|r| SampleRecord {
            sha256: r.sha256.clone(),
            family: r.family.clone(),
            first_seen: cfg.generation_date,
            last_seen: cfg.generation_date,
            path: None,
        })
        .collect();
    let mut buf = Vec::new();
    write_metadata_csv(&mut buf, &records)?;
    crate::io::write_atomic(&out.join("manifest.csv"), &buf)?;
    Ok(rows)
}
