//! File formats: site CSV (`id,x,y,load,alpha`), the instance sidecar JSON
//! (`{"k": .., "routing_factor": ..}`) and candidate-map CSV
//! (`site_id,candidate_id`).

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{CandidateMap, CandidateSource};
use crate::error::{Error, Result};
use crate::instance::{ExchangeSite, Instance};

#[derive(Debug, Deserialize)]
struct SiteRecord {
    id: usize,
    x: f64,
    y: f64,
    load: f64,
    #[serde(default)]
    alpha: Option<f64>,
}

fn csv_error(path: &Path, err: &csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: err.position().map_or(0, |p| p.line()),
        message: match err.kind() {
            csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
            _ => err.to_string(),
        },
    }
}

/// Reads sites from CSV. Rows may come in any order but the ids must be
/// exactly `0..n`; a missing or empty `alpha` defaults to 1.
pub fn read_sites(path: &Path) -> Result<Vec<ExchangeSite>> {
    let file = File::open(path)?;
    read_sites_from(BufReader::new(file), path)
}

pub fn read_sites_from<R: Read>(reader: R, path: &Path) -> Result<Vec<ExchangeSite>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut sites = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.deserialize::<SiteRecord>() {
        let rec = rec.map_err(|e| csv_error(path, &e))?;
        let line = sites.len() as u64 + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let alpha = rec.alpha.unwrap_or(1.0);
        if !(rec.x.is_finite() && rec.y.is_finite()) {
            return Err(bad("coordinates must be finite".into()));
        }
        if !(rec.load > 0.0 && rec.load.is_finite()) {
            return Err(bad(format!("load must be positive, got {}", rec.load)));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(bad(format!("alpha must be positive, got {alpha}")));
        }
        sites.push(ExchangeSite::new(rec.id, rec.x, rec.y, rec.load, alpha));
        lines.push(line);
    }
    let n = sites.len();
    let mut seen: Vec<Option<u64>> = vec![None; n];
    for (s, &line) in sites.iter().zip(&lines) {
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if s.id >= n {
            return Err(err(format!("id {} outside 0..{n}", s.id)));
        }
        if let Some(first) = seen[s.id] {
            return Err(err(format!("duplicate id {} (first on line {first})", s.id)));
        }
        seen[s.id] = Some(line);
    }
    sites.sort_by_key(|s| s.id);
    Ok(sites)
}

pub fn write_sites<W: Write>(sites: &[ExchangeSite], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "x", "y", "load", "alpha"])
        .map_err(std::io::Error::from)?;
    for s in sites {
        w.write_record([
            s.id.to_string(),
            s.x.to_string(),
            s.y.to_string(),
            s.load.to_string(),
            s.alpha.to_string(),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Instance-level parameters from a sidecar JSON file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    pub k: Option<usize>,
    pub routing_factor: Option<f64>,
}

pub fn read_params(path: &Path) -> Result<InstanceParams> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn read_instance(path: &Path, k: usize, routing_factor: f64) -> Result<Instance> {
    Instance::new(read_sites(path)?, k, routing_factor)
}

pub fn write_candidates<W: Write>(candidates: &CandidateMap, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["site_id", "candidate_id"])
        .map_err(std::io::Error::from)?;
    for (i, j) in candidates.pairs() {
        w.write_record([i.to_string(), j.to_string()])
            .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PairRecord {
    site_id: usize,
    candidate_id: usize,
}

/// Reads a candidate map for `n` sites over `n` positions.
pub fn read_candidates(path: &Path, n: usize) -> Result<CandidateMap> {
    let file = File::open(path)?;
    read_candidates_from(BufReader::new(file), path, n)
}

pub fn read_candidates_from<R: Read>(reader: R, path: &Path, n: usize) -> Result<CandidateMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut pos = vec![Vec::new(); n];
    for (idx, rec) in rdr.deserialize::<PairRecord>().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, &e))?;
        if rec.site_id >= n || rec.candidate_id >= n {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx as u64 + 2,
                message: format!(
                    "pair ({}, {}) outside the {n}-site instance",
                    rec.site_id, rec.candidate_id
                ),
            });
        }
        pos[rec.site_id].push(rec.candidate_id);
    }
    let mut cm = CandidateMap::new(pos, n, CandidateSource::Imported)?;
    if cm.is_full() {
        cm = CandidateMap::full(n);
    }
    Ok(cm)
}
