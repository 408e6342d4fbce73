//! Dataset ingestion, batch scoring with a persistent score cache, and
//! per-distortion evaluation reports.
//!
//! Manifests are CSV files with the header
//! `ref_path,dist_path,distortion,level,dmos`; `level` and `dmos` may be
//! empty. Scoring is embarrassingly parallel over pairs and deterministic:
//! results are emitted in manifest order regardless of worker count.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::edge::analyze_pair;
use crate::error::{Error, Result};
use crate::fusion::{predict, FusionCoefficients};
use crate::image_io::LuminanceImage;
use crate::model::{CanonicalParams, ViewerGeometry};
use crate::stats::MetricReport;
use crate::texture::cpsnr;

/// One manifest row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    /// Free-form distortion label used for report grouping.
    pub distortion: String,
    /// Distortion magnitude, e.g. blur spread in pixels.
    pub level: Option<f64>,
    /// Subjective score; optional for pure scoring runs.
    pub dmos: Option<f64>,
}

/// Parse and validate a manifest file. Every referenced image must exist;
/// unresolved paths are collected into a single error.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::ManifestParse { line: 0, message: e.to_string() })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::ManifestParse { line: 1, message: e.to_string() })?
        .clone();
    let expected = ["ref_path", "dist_path", "distortion", "level", "dmos"];
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(Error::ManifestParse {
            line: 1,
            message: format!("expected header {expected:?}, got {actual:?}"),
        });
    }

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| -> PathBuf {
        let raw = PathBuf::from(p);
        if raw.is_absolute() {
            raw
        } else {
            base.join(raw)
        }
    };

    let mut entries = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, counting the header
        let record = record.map_err(|e| Error::ManifestParse { line, message: e.to_string() })?;
        if record.len() != 5 {
            return Err(Error::ManifestParse {
                line,
                message: format!("expected 5 fields, got {}", record.len()),
            });
        }
        let opt_number = |field: &str, name: &str| -> Result<Option<f64>> {
            if field.is_empty() {
                return Ok(None);
            }
            field
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::ManifestParse {
                    line,
                    message: format!("column '{name}' is not numeric: '{field}'"),
                })
        };
        let ref_path = resolve(&record[0]);
        let dist_path = resolve(&record[1]);
        if record[0].is_empty() || record[1].is_empty() {
            return Err(Error::ManifestParse { line, message: "empty image path".into() });
        }
        entries.push(ManifestEntry {
            ref_path,
            dist_path,
            distortion: record[2].to_string(),
            level: opt_number(&record[3], "level")?,
            dmos: opt_number(&record[4], "dmos")?,
        });
    }

    let mut missing: Vec<PathBuf> = Vec::new();
    for entry in &entries {
        for p in [&entry.ref_path, &entry.dist_path] {
            if !p.exists() && !missing.contains(p) {
                missing.push(p.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    Ok(entries)
}

/// Cacheable part of a pair score: everything that depends only on the two
/// images, `(Q, tau)` and the viewing geometry. The fusion prediction is
/// applied afterwards so refitting fusion never invalidates the cache.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairIndices {
    pub bele_cold: f64,
    pub cpsnr_db: f64,
    pub xi_eq: f64,
    pub d_distortion: f64,
    pub d_focus: f64,
    pub first_pass_dmos: f64,
    pub n_hot: usize,
}

/// One output row of a scoring run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub row_index: usize,
    pub distortion: String,
    pub level: Option<f64>,
    pub dmos: Option<f64>,
    pub indices: Option<PairIndices>,
    pub predicted_dmos: Option<f64>,
    /// Per-pair failure message; the batch keeps going.
    pub error: Option<String>,
}

/// Scoring configuration.
#[derive(Clone, Debug)]
pub struct ScoreOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Score-cache directory; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self { workers: 0, cache_dir: None }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    indices: PairIndices,
}

struct ScoreCache {
    path: PathBuf,
    entries: Mutex<HashMap<String, PairIndices>>,
}

impl ScoreCache {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join("scores.jsonl");
        let mut entries = HashMap::new();
        if path.exists() {
            for line in fs::read_to_string(&path)?.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                // Unreadable lines are skipped: the cache is advisory.
                if let Ok(parsed) = serde_json::from_str::<CacheLine>(line) {
                    entries.insert(parsed.key, parsed.indices);
                }
            }
        }
        Ok(Self { path, entries: Mutex::new(entries) })
    }

    fn get(&self, key: &str) -> Option<PairIndices> {
        self.entries.lock().unwrap().get(key).copied()
    }

    fn put(&self, key: String, indices: PairIndices) {
        let mut entries = self.entries.lock().unwrap();
        if entries.contains_key(&key) {
            return;
        }
        entries.insert(key.clone(), indices);
        // Append-only and idempotent: duplicate lines are harmless.
        if let Ok(mut file) = fs::OpenOptions::new().create(true).append(true).open(&self.path) {
            if let Ok(line) = serde_json::to_string(&CacheLine { key, indices }) {
                let _ = writeln!(file, "{line}");
            }
        }
    }
}

fn cache_key(
    ref_bytes: &[u8],
    dist_bytes: &[u8],
    params: &CanonicalParams<f64>,
    geometry: &ViewerGeometry<f64>,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(ref_bytes);
    hasher.update(dist_bytes);
    hasher.update(
        format!(
            "q={:.17e};tau={:.17e};gtau={:.17e};ppd={:.17e};sg={:.17e}",
            params.q, params.tau, geometry.tau, geometry.pixels_per_degree, geometry.s_g_arcmin
        )
        .as_bytes(),
    );
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Score one pair from raw file bytes (used by both the batch path and the
/// single-pair CLI path).
pub fn score_pair_bytes(
    ref_bytes: &[u8],
    dist_bytes: &[u8],
    params: &CanonicalParams<f64>,
    geometry: &ViewerGeometry<f64>,
) -> Result<PairIndices> {
    let reference = decode_bytes(ref_bytes)?;
    let distorted = decode_bytes(dist_bytes)?;
    let analysis = analyze_pair(&reference, &distorted, params, geometry)?;
    let texture = cpsnr(&analysis.ref_map, &analysis.dist_map, &analysis.partition)?;
    Ok(PairIndices {
        bele_cold: analysis.score.bele_cold,
        cpsnr_db: texture.cpsnr_db,
        xi_eq: analysis.score.xi_eq,
        d_distortion: analysis.score.d_distortion,
        d_focus: analysis.score.d_focus,
        first_pass_dmos: analysis.score.first_pass_dmos,
        n_hot: texture.n_hot,
    })
}

fn decode_bytes(bytes: &[u8]) -> Result<LuminanceImage<f64>> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: PathBuf::from("<memory>"),
        message: e.to_string(),
    })?;
    LuminanceImage::from_dynamic(&decoded)
}

/// Score every manifest entry. Per-pair failures are recorded in the row
/// instead of aborting the batch; output order follows the manifest.
pub fn score_corpus(
    entries: &[ManifestEntry],
    params: &CanonicalParams<f64>,
    geometry: &ViewerGeometry<f64>,
    fusion: Option<&FusionCoefficients>,
    options: &ScoreOptions,
) -> Result<Vec<ScoreRow>> {
    let cache = match &options.cache_dir {
        Some(dir) => Some(ScoreCache::open(dir)?),
        None => None,
    };

    let score_one = |(row_index, entry): (usize, &ManifestEntry)| -> ScoreRow {
        let indices = (|| -> Result<PairIndices> {
            let ref_bytes = fs::read(&entry.ref_path)?;
            let dist_bytes = fs::read(&entry.dist_path)?;
            let key = cache_key(&ref_bytes, &dist_bytes, params, geometry);
            if let Some(cache) = &cache {
                if let Some(hit) = cache.get(&key) {
                    return Ok(hit);
                }
            }
            let fresh = score_pair_bytes(&ref_bytes, &dist_bytes, params, geometry)?;
            if let Some(cache) = &cache {
                cache.put(key, fresh);
            }
            Ok(fresh)
        })();

        match indices {
            Ok(indices) => {
                let predicted_dmos =
                    fusion.and_then(|f| predict(f, indices.bele_cold, indices.cpsnr_db).ok());
                ScoreRow {
                    row_index,
                    distortion: entry.distortion.clone(),
                    level: entry.level,
                    dmos: entry.dmos,
                    indices: Some(indices),
                    predicted_dmos,
                    error: None,
                }
            }
            Err(e) => ScoreRow {
                row_index,
                distortion: entry.distortion.clone(),
                level: entry.level,
                dmos: entry.dmos,
                indices: None,
                predicted_dmos: None,
                error: Some(e.to_string()),
            },
        }
    };

    let mut rows: Vec<ScoreRow> = if options.workers == 1 {
        entries.iter().enumerate().map(score_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::Degenerate(format!("worker pool: {e}")))?;
        pool.install(|| entries.par_iter().enumerate().map(score_one).collect())
    };
    rows.sort_by_key(|r| r.row_index);
    Ok(rows)
}

/// Per-distortion slice of an evaluation report. Groups with fewer than
/// three usable rows are kept but carry no metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub n: usize,
    pub metrics: Option<MetricReport>,
    pub skipped: bool,
}

/// Full evaluation output: per-distortion and overall metrics plus the
/// calibration that produced the scores.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_distortion: BTreeMap<String, GroupReport>,
    pub overall: MetricReport,
    pub q: f64,
    pub tau: f64,
    pub fusion: FusionCoefficients,
    pub n_failed: usize,
    pub rows: Vec<ScoreRow>,
}

/// Assemble per-distortion and overall metrics from scored rows; targets are
/// the rows' `dmos` fields.
pub fn evaluate(
    rows: &[ScoreRow],
    params: &CanonicalParams<f64>,
    fusion: &FusionCoefficients,
) -> Result<EvaluationReport> {
    let usable: Vec<&ScoreRow> = rows
        .iter()
        .filter(|r| r.error.is_none() && r.dmos.is_some() && r.predicted_dmos.is_some())
        .collect();
    if usable.len() < 3 {
        return Err(Error::Degenerate(format!(
            "evaluation needs at least 3 scored rows with targets, got {}",
            usable.len()
        )));
    }

    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in &usable {
        let slot = groups.entry(row.distortion.clone()).or_default();
        slot.0.push(row.predicted_dmos.unwrap());
        slot.1.push(row.dmos.unwrap());
    }

    let mut per_distortion = BTreeMap::new();
    for (label, (pred, target)) in &groups {
        let report = if pred.len() >= 3 {
            // A constant group (all equal predictions or targets) cannot
            // carry correlations; report it as skipped rather than failing.
            match MetricReport::from_samples(pred, target) {
                Ok(m) => GroupReport { n: pred.len(), metrics: Some(m), skipped: false },
                Err(_) => GroupReport { n: pred.len(), metrics: None, skipped: true },
            }
        } else {
            GroupReport { n: pred.len(), metrics: None, skipped: true }
        };
        per_distortion.insert(label.clone(), report);
    }

    let pred_all: Vec<f64> = usable.iter().map(|r| r.predicted_dmos.unwrap()).collect();
    let target_all: Vec<f64> = usable.iter().map(|r| r.dmos.unwrap()).collect();
    let overall = MetricReport::from_samples(&pred_all, &target_all)?;

    Ok(EvaluationReport {
        per_distortion,
        overall,
        q: params.q,
        tau: params.tau,
        fusion: *fusion,
        n_failed: rows.iter().filter(|r| r.error.is_some()).count(),
        rows: rows.to_vec(),
    })
}

/// Write rows as CSV with the stable column set.
pub fn write_rows_csv(rows: &[ScoreRow], out: &mut dyn std::io::Write) -> Result<()> {
    writeln!(out, "row_index,bele_cold,cpsnr,xi_eq,predicted_dmos,error")?;
    for row in rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.row_index,
            fmt(row.indices.map(|i| i.bele_cold)),
            fmt(row.indices.map(|i| i.cpsnr_db)),
            fmt(row.indices.map(|i| i.xi_eq)),
            fmt(row.predicted_dmos),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        )?;
    }
    Ok(())
}

/// Total pipeline cost in FLOPs:
/// `3N + N (ln S + d + 1) + P * 224 * 224 * 3 * c_pixel`.
///
/// `N` and `P` may be zero (their terms vanish); the logarithm is natural.
pub fn flops_estimate(n_dataset: f64, s_segments: f64, d_degree: f64, p_pairs: f64, c_pixel: f64) -> Result<f64> {
    for (name, v) in [
        ("n_dataset", n_dataset),
        ("s_segments", s_segments),
        ("d_degree", d_degree),
        ("p_pairs", p_pairs),
        ("c_pixel", c_pixel),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let spline = if n_dataset > 0.0 {
        if s_segments <= 0.0 {
            return Err(Error::Domain(
                "s_segments must be positive when n_dataset > 0".into(),
            ));
        }
        3.0 * n_dataset + n_dataset * (s_segments.ln() + d_degree + 1.0)
    } else {
        0.0
    };
    Ok(spline + p_pairs * 224.0 * 224.0 * 3.0 * c_pixel)
}

/// Worst-case cost of logistic rectification: `(15N + 5) * 250000`.
pub fn flops_logistic(n_dataset: u64) -> Result<f64> {
    if n_dataset < 1 {
        return Err(Error::Domain(format!("n must be >= 1, got {n_dataset}")));
    }
    Ok((15.0 * n_dataset as f64 + 5.0) * 250_000.0)
}
