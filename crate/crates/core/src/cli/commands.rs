// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::manifest::RunRecord;
use super::{ClusterArgs, CliError, Command, Format, HashArgs, JoinArgs, ReportArgs, SchemeArg, SweepArgs, SynthArgs};
use crate::clustering::{adjusted_rand_index, kmeans_fit, project_2d, sweep_k, KMeansConfig};
use crate::corpus::{
    family_distribution, hash_directory, ingest_metadata, join_and_filter, read_digest_csv, read_unified_csv,
    synth_corpus, write_digest_csv, write_unified_csv, SynthConfig, UnifiedRecord,
};
use crate::features::{
    jaccard, pairwise_matrix, standardize, vectorize_imphash, vectorize_ssdeep, vectorize_tlsh, DistanceMatrix,
    Euclidean, FeatureMatrix, FeatureVector, Jaccard, SsdeepScore, TlshDistance,
};
use crate::io::write_atomic;
use crate::pe::{import_set, parse_imports};

pub(crate) fn primary_output(command: &Command) -> PathBuf {
    match command {
        Command::Synth(a) => a.out.clone(),
        Command::Hash(a) => a.out.clone(),
        Command::Join(a) => a.out.clone(),
        Command::Cluster(a) => a.out.clone(),
        Command::Sweep(a) => a.out.clone(),
        Command::Report(a) => a.out.clone(),
        Command::Replay(a) => a.manifest.clone(),
    }
}

pub(crate) fn dispatch(command: &Command) -> Result<RunRecord, CliError> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Hash(a) => hash(a),
        Command::Join(a) => join(a),
        Command::Cluster(a) => cluster(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(p.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn open(p: &Path) -> Result<fs::File, CliError> {
    fs::File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn read_records(p: &Path) -> Result<Vec<UnifiedRecord>, CliError> {
    let records = read_unified_csv(open(p)?)?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no records", p.display())));
    }
    Ok(records)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

/// Vectorizes `records` under `scheme` and z-scores the result.
pub fn build_matrix(records: &[UnifiedRecord], scheme: SchemeArg) -> Result<FeatureMatrix, CliError> {
    let ids: Vec<String> = records.iter().map(|r| r.sample.sha256.clone()).collect();
    let raw = match scheme {
        SchemeArg::Ssdeep => FeatureMatrix::from_vectors(ids, records.iter().map(|r| vectorize_ssdeep(&r.ssdeep)).collect())?,
        SchemeArg::Tlsh => FeatureMatrix::from_vectors(ids, records.iter().map(|r| vectorize_tlsh(&r.tlsh)).collect())?,
        SchemeArg::Imphash => vectorize_imphash(ids, &records.iter().map(|r| r.imphash).collect::<Vec<_>>())?,
    };
    Ok(standardize(&raw)?.0)
}

fn synth(a: &SynthArgs) -> Result<RunRecord, CliError> {
    let cfg = SynthConfig {
        families: a.families,
        samples_per_family: a.samples_per_family,
        mutation_rate: a.mutation_rate,
        seed: a.seed.seed,
        generation_date: a.date,
        section_probability: a.section_probability,
        ..SynthConfig::default()
    };
    let rows = synth_corpus(&cfg, &a.out)?;
    println!("wrote {} samples to {}", rows.len(), a.out.join("samples").display());
    Ok(RunRecord {
        inputs: vec![],
        outputs: vec![a.out.join("samples"), a.out.join("manifest.csv")],
        details: json!({ "samples": rows.len(), "config": cfg }),
    })
}

fn hash(a: &HashArgs) -> Result<RunRecord, CliError> {
    let out = hash_directory(&a.dir)?;
    write_atomic(&a.out, &csv_bytes(|b| Ok(write_digest_csv(b, &out.rows)?))?)?;
    for e in &out.errors {
        eprintln!("warning: {}: {}", e.path.display(), e.message);
    }
    println!("hashed {} files, {} errors", out.rows.len(), out.errors.len());
    Ok(RunRecord {
        inputs: vec![a.dir.clone()],
        outputs: vec![a.out.clone()],
        details: json!({ "rows": out.rows.len(), "errors": out.errors }),
    })
}

fn join(a: &JoinArgs) -> Result<RunRecord, CliError> {
    let metadata = ingest_metadata(open(&a.metadata)?)?;
    let digests = read_digest_csv(open(&a.digests)?)?;
    let outcome = join_and_filter(&metadata, &digests);
    let drops_path = a.drops.clone().unwrap_or_else(|| with_suffix(&a.out, ".drops.json"));
    write_atomic(&a.out, &csv_bytes(|b| Ok(write_unified_csv(b, &outcome.records)?))?)?;
    write_atomic(&drops_path, &json_bytes(&outcome.drops)?)?;
    for (sha, reason) in &outcome.dropped {
        if reason.as_str() == "unmatched" {
            eprintln!("warning: {sha}: unmatched");
        }
    }
    println!("kept {} records, dropped {}", outcome.records.len(), outcome.drops.total());
    Ok(RunRecord {
        inputs: vec![a.metadata.clone(), a.digests.clone()],
        outputs: vec![a.out.clone(), drops_path],
        details: json!({ "kept": outcome.records.len(), "drops": outcome.drops }),
    })
}

#[derive(Serialize)]
struct LabelRow<'a> {
    sha256: &'a str,
    cluster: usize,
    family: &'a str,
}

#[derive(Serialize)]
struct PointRow<'a> {
    sha256: &'a str,
    x: f64,
    y: f64,
    cluster: usize,
    family: &'a str,
}

fn cluster(a: &ClusterArgs) -> Result<RunRecord, CliError> {
    let records = read_records(&a.input)?;
    let m = build_matrix(&records, a.scheme)?;
    let fit = kmeans_fit(&m, &KMeansConfig::new(a.k, a.seed.seed))?;
    let proj = project_2d(&m);
    let labels: Vec<LabelRow> = records
        .iter()
        .zip(&fit.labels)
        .map(|(r, &c)| LabelRow { sha256: &r.sample.sha256, cluster: c, family: &r.sample.family })
        .collect();
    let points: Vec<PointRow> = labels
        .iter()
        .zip(&proj.points)
        .map(|(l, p)| PointRow { sha256: l.sha256, x: p[0], y: p[1], cluster: l.cluster, family: l.family })
        .collect();
    let families: Vec<&str> = records.iter().map(|r| r.sample.family.as_str()).collect();
    let ari = adjusted_rand_index(&fit.labels, &families);
    let outputs = match a.format {
        Format::Csv => {
            let labels_path = with_suffix(&a.out, ".labels.csv");
            let proj_path = with_suffix(&a.out, ".projection.csv");
            write_atomic(&labels_path, &serialize_rows(&labels)?)?;
            write_atomic(&proj_path, &serialize_rows(&points)?)?;
            vec![labels_path, proj_path]
        }
        Format::Json => {
            let path = with_suffix(&a.out, ".json");
            let doc = json!({
                "scheme": a.scheme,
                "k": a.k,
                "seed": a.seed.seed,
                "inertia": fit.inertia,
                "iterations_run": fit.iterations_run,
                "restart": fit.restart,
                "adjusted_rand_index": ari,
                "centroids": fit.centroids.iter().map(FeatureVector::values).collect::<Vec<_>>(),
                "labels": labels,
                "projection": { "axes": proj.axes, "variance": proj.variance, "points": points },
            });
            write_atomic(&path, &json_bytes(&doc)?)?;
            vec![path]
        }
    };
    println!("k={} inertia={} ari_vs_family={ari:.4}", a.k, fit.inertia);
    Ok(RunRecord {
        inputs: vec![a.input.clone()],
        outputs,
        details: json!({ "inertia": fit.inertia, "iterations_run": fit.iterations_run, "adjusted_rand_index": ari }),
    })
}

fn serialize_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

fn sweep(a: &SweepArgs) -> Result<RunRecord, CliError> {
    if a.k_min > a.k_max {
        return Err(CliError::Usage(format!("--k-min {} exceeds --k-max {}", a.k_min, a.k_max)));
    }
    let records = read_records(&a.input)?;
    let m = build_matrix(&records, a.scheme)?;
    let rep = sweep_k(&m, a.k_min, a.k_max, &KMeansConfig::new(a.k_min, a.seed.seed))?;
    let bytes = match a.format {
        Format::Csv => csv_bytes(|b| Ok(rep.write_csv(b)?))?,
        Format::Json => json_bytes(&rep)?,
    };
    write_atomic(&a.out, &bytes)?;
    println!("best_k {}", rep.best_k);
    Ok(RunRecord { inputs: vec![a.input.clone()], outputs: vec![a.out.clone()], details: json!({ "best_k": rep.best_k }) })
}

/// Mean pairwise score inside and across families for one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseSummary {
    pub metric: String,
    pub scheme: String,
    pub within_pairs: usize,
    pub within_mean: f64,
    pub between_pairs: usize,
    pub between_mean: f64,
}

fn summarize(metric: &str, scheme: &str, d: &DistanceMatrix, families: &[&str]) -> PairwiseSummary {
    let (mut w, mut b) = ((0usize, 0.0), (0usize, 0.0));
    for (i, j, v) in d.upper_triangle() {
        let acc = if families[i] == families[j] { &mut w } else { &mut b };
        acc.0 += 1;
        acc.1 += v;
    }
    let mean = |(n, s): (usize, f64)| if n == 0 { f64::NAN } else { s / n as f64 };
    PairwiseSummary {
        metric: metric.into(),
        scheme: scheme.into(),
        within_pairs: w.0,
        within_mean: mean(w),
        between_pairs: b.0,
        between_mean: mean(b),
    }
}

/// Within- and between-family means of every metric. `imports` maps sha256
/// to import set and enables the Jaccard row.
pub fn pairwise_summaries(
    records: &[UnifiedRecord],
    imports: Option<&HashMap<String, BTreeSet<String>>>,
) -> Result<Vec<PairwiseSummary>, CliError> {
    let fam: Vec<&str> = records.iter().map(|r| r.sample.family.as_str()).collect();
    let mut out = Vec::new();
    let ss: Vec<_> = records.iter().map(|r| r.ssdeep.clone()).collect();
    out.push(summarize("ssdeep_score", "ssdeep", &pairwise_matrix(&ss, &SsdeepScore)?, &fam));
    let tl: Vec<_> = records.iter().map(|r| r.tlsh).collect();
    out.push(summarize("tlsh_distance", "tlsh", &pairwise_matrix(&tl, &TlshDistance)?, &fam));
    for scheme in SchemeArg::ALL {
        let m = build_matrix(records, scheme)?;
        let rows: Vec<&[f64]> = m.rows().collect();
        out.push(summarize("euclidean", scheme.name(), &pairwise_matrix(&rows, &Euclidean)?, &fam));
    }
    if let Some(map) = imports {
        let (sets, fam): (Vec<BTreeSet<String>>, Vec<&str>) = records
            .iter()
            .filter_map(|r| map.get(&r.sample.sha256).map(|s| (s.clone(), r.sample.family.as_str())))
            .unzip();
        if sets.len() >= 2 {
            out.push(summarize("jaccard", "imphash", &pairwise_matrix(&sets, &Jaccard)?, &fam));
        }
    }
    Ok(out)
}

fn import_sets(dir: &Path) -> Result<HashMap<String, BTreeSet<String>>, CliError> {
    let mut out = HashMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    paths.sort();
    for p in paths {
        let Ok(data) = fs::read(&p) else { continue };
        if let Ok(t) = parse_imports(&data) {
            out.insert(hex::encode(Sha256::digest(&data)), import_set(&t));
        }
    }
    Ok(out)
}

fn report(a: &ReportArgs) -> Result<RunRecord, CliError> {
    let records = read_records(&a.input)?;
    fs::create_dir_all(&a.out)?;
    let mut outputs = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), CliError> {
        let p = a.out.join(name);
        write_atomic(&p, &bytes)?;
        outputs.push(p);
        Ok(())
    };

    let dist = family_distribution(records.iter().map(|r| &r.sample))?;
    put("family_distribution.csv", csv_bytes(|b| Ok(dist.write_csv(b)?))?)?;

    let imports = a.samples.as_deref().map(import_sets).transpose()?;
    put("pairwise_summary.csv", serialize_rows(&pairwise_summaries(&records, imports.as_ref())?)?)?;

    let families: Vec<&str> = records.iter().map(|r| r.sample.family.as_str()).collect();
    let k = a.k.unwrap_or(dist.families.len()).min(records.len());
    let mut ari = BTreeMap::new();
    for scheme in SchemeArg::ALL {
        let m = build_matrix(&records, scheme)?;
        let fit = kmeans_fit(&m, &KMeansConfig::new(k, a.seed.seed))?;
        ari.insert(scheme.name(), adjusted_rand_index(&fit.labels, &families));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("cluster").chain(dist.families.iter().map(String::as_str)).chain(["total"]))?;
        for c in 0..k {
            let counts: Vec<usize> = dist
                .families
                .iter()
                .map(|f| fit.labels.iter().zip(&families).filter(|(l, g)| **l == c && *g == f).count())
                .collect();
            let total: usize = counts.iter().sum();
            w.write_record(
                std::iter::once(c.to_string()).chain(counts.iter().map(ToString::to_string)).chain([total.to_string()]),
            )?;
        }
        put(&format!("contingency_{}.csv", scheme.name()), w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)?;
    }

    if let Some(map) = &imports {
        let mut reps: BTreeMap<String, &BTreeSet<String>> = BTreeMap::new();
        for r in &records {
            if let Some(s) = map.get(&r.sample.sha256) {
                reps.entry(r.imphash.to_string()).or_insert(s);
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["imphash_a", "imphash_b", "jaccard"])?;
        let keys: Vec<&String> = reps.keys().collect();
        for (i, x) in keys.iter().enumerate() {
            for y in &keys[i..] {
                let j = jaccard(reps[*x], reps[*y])?;
                w.write_record([x.as_str(), y.as_str(), &j.to_string()])?;
            }
        }
        put("imphash_jaccard.csv", w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)?;
    }

    let summary = json!({ "samples": records.len(), "k": k, "seed": a.seed.seed, "adjusted_rand_index": ari });
    put("summary.json", json_bytes(&summary)?)?;
    println!("report for {} samples written to {}", records.len(), a.out.display());
    let mut inputs = vec![a.input.clone()];
    inputs.extend(a.samples.clone());
    Ok(RunRecord { inputs, outputs, details: summary })
}
