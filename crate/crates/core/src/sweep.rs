//! Parameter sweeps and their CSV result tables.
//!
//! Rows are keyed by `(m, L, strategy, seed)`. A sweep appends each finished
//! row to the CSV as it goes, skips keys already present when restarted,
//! and finally rewrites the file sorted by key so that the output does not
//! depend on completion order or on how often the run was resumed.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channels::Strategy;
use crate::error::{Error, Result};
use crate::oracle::{exact_all_keep, exact_run};
use crate::protocol::{estimate_metrics, qubit_metrics_from_link, run_campaign, Campaign, ProtocolConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Trajectory,
    Oracle,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Trajectory => "trajectory",
            Engine::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Engine::Trajectory, Engine::Oracle].into_iter().find(|e| e.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub m: usize,
    pub distance_km: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub distances: Vec<f64>,
    pub m_values: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub trajectories: u64,
    pub seed: u64,
    pub engine: Engine,
    pub base: ProtocolConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() || self.m_values.is_empty() || self.strategies.is_empty() {
            return Err(Error::config("sweep", "distances, m_values and strategies must be non-empty"));
        }
        let distinct = |n: usize, set: usize, what: &str| {
            if n != set {
                Err(Error::config(format!("sweep.{what}"), "entries must be distinct"))
            } else {
                Ok(())
            }
        };
        distinct(self.distances.len(), self.distances.iter().map(|d| d.to_bits()).collect::<BTreeSet<_>>().len(), "distances_km")?;
        distinct(self.m_values.len(), self.m_values.iter().collect::<BTreeSet<_>>().len(), "m_values")?;
        distinct(self.strategies.len(), self.strategies.iter().collect::<BTreeSet<_>>().len(), "strategies")?;
        if self.trajectories < 1 {
            return Err(Error::config("n_trajectories", "must be >= 1"));
        }
        Ok(())
    }

    /// Every point, in key order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut pts = Vec::new();
        for &m in &self.m_values {
            for &distance_km in &self.distances {
                for &strategy in &self.strategies {
                    pts.push(SweepPoint { m, distance_km, strategy });
                }
            }
        }
        pts.sort_by(|a, b| (a.m, a.distance_km, a.strategy).partial_cmp(&(b.m, b.distance_km, b.strategy)).expect("finite distances"));
        pts
    }

    pub fn config_for(&self, pt: &SweepPoint) -> ProtocolConfig {
        ProtocolConfig {
            m: pt.m,
            distance_km: pt.distance_km,
            strategy: pt.strategy,
            n_trajectories: self.trajectories,
            seed: self.seed,
            ..self.base.clone()
        }
    }
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub m: usize,
    pub l_km: f64,
    pub strategy: Strategy,
    pub success_probability: f64,
    pub average_attempts: f64,
    pub average_fidelity: f64,
    pub per_pair_fidelities: Vec<f64>,
    pub fidelity_stderr: f64,
    pub n_trajectories: u64,
    pub seed: u64,
    pub wall_time_s: f64,
    pub engine: Engine,
}

pub const CSV_HEADER: [&str; 12] = [
    "m",
    "L_km",
    "strategy",
    "success_probability",
    "average_attempts",
    "average_fidelity",
    "per_pair_fidelities",
    "fidelity_stderr",
    "n_trajectories",
    "seed",
    "wall_time_s",
    "engine",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub m: usize,
    /// Order-preserving encoding of a non-negative distance.
    pub l_bits: u64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl ResultRow {
    pub fn key(&self) -> RowKey {
        RowKey { m: self.m, l_bits: self.l_km.to_bits(), strategy: self.strategy, seed: self.seed }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.l_km.to_string(),
            self.strategy.as_str().to_string(),
            self.success_probability.to_string(),
            self.average_attempts.to_string(),
            self.average_fidelity.to_string(),
            self.per_pair_fidelities.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            self.fidelity_stderr.to_string(),
            self.n_trajectories.to_string(),
            self.seed.to_string(),
            self.wall_time_s.to_string(),
            self.engine.as_str().to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord, line: u64) -> Result<Self> {
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Io(format!("line {line}: missing column {}", CSV_HEADER[i])));
        let bad = |i: usize| Error::Io(format!("line {line}: invalid value in column {}", CSV_HEADER[i]));
        let float = |i: usize| field(i)?.parse::<f64>().map_err(|_| bad(i));
        let int = |i: usize| field(i)?.parse::<u64>().map_err(|_| bad(i));
        let pairs = field(6)?;
        Ok(Self {
            m: int(0)? as usize,
            l_km: float(1)?,
            strategy: Strategy::parse(field(2)?).ok_or_else(|| bad(2))?,
            success_probability: float(3)?,
            average_attempts: float(4)?,
            average_fidelity: float(5)?,
            per_pair_fidelities: if pairs.is_empty() {
                vec![]
            } else {
                pairs.split(';').map(|s| s.parse::<f64>().map_err(|_| bad(6))).collect::<Result<_>>()?
            },
            fidelity_stderr: float(7)?,
            n_trajectories: int(8)?,
            seed: int(9)?,
            wall_time_s: float(10)?,
            engine: Engine::parse(field(11)?).ok_or_else(|| bad(11))?,
        })
    }
}

/// Writes a complete table (header plus rows) to any sink.
pub fn write_rows<W: Write>(sink: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a table written by [`write_rows`]; the header must match exactly.
pub fn read_rows<R: std::io::Read>(source: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Io(format!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        rows.push(ResultRow::from_record(&rec?, i as u64 + 2)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    /// Record measured wall time; otherwise the column is 0 so that
    /// reruns are byte-identical.
    pub timing: bool,
    /// Revision string stored in the sidecar.
    pub revision: String,
    /// File stem of the table and sidecar inside the output directory.
    pub stem: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { timing: false, revision: "unknown".into(), stem: "results".into() }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    revision: &'a str,
    engine_version: &'a str,
    sweep: &'a SweepSpec,
    columns: &'a [&'a str],
}

pub fn csv_path(out_dir: &Path, opts: &RunOptions) -> PathBuf {
    out_dir.join(format!("{}.csv", opts.stem))
}

pub fn sidecar_path(out_dir: &Path, opts: &RunOptions) -> PathBuf {
    out_dir.join(format!("{}.json", opts.stem))
}

/// Memoizes single-link campaigns, which every qubit baseline at the same
/// distance shares regardless of `m`.
#[derive(Default)]
pub struct LinkCache {
    links: BTreeMap<u64, Campaign>,
}

impl LinkCache {
    fn link(&mut self, cfg: &ProtocolConfig) -> Result<&Campaign> {
        match self.links.entry(cfg.distance_km.to_bits()) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => Ok(e.insert(run_campaign(&cfg.link_config())?)),
        }
    }
}

/// Computes a single row.
pub fn compute_row(spec: &SweepSpec, pt: &SweepPoint, cache: &mut LinkCache, timing: bool) -> Result<ResultRow> {
    let cfg = spec.config_for(pt);
    let start = timing.then(Instant::now);
    let (fidelities, stderr, success, attempts, n) = match spec.engine {
        Engine::Trajectory => {
            let (pairs, rates) = match pt.strategy {
                Strategy::Qudit => estimate_metrics(&cfg)?,
                _ => qubit_metrics_from_link(&cfg, cache.link(&cfg)?)?,
            };
            (pairs.per_pair_fidelity, pairs.standard_error, rates.success_probability, rates.average_attempts, cfg.n_trajectories)
        }
        Engine::Oracle => match pt.strategy {
            Strategy::QubitAllKeep => {
                let (f, attempts) = exact_all_keep(&cfg)?;
                (vec![f; cfg.m], 0.0, 1.0 / attempts, attempts, 0)
            }
            _ => {
                let res = exact_run(&cfg)?;
                (res.per_pair_fidelity, 0.0, res.herald_probability, 1.0 / res.herald_probability, 0)
            }
        },
    };
    let average_fidelity = fidelities.iter().sum::<f64>() / fidelities.len() as f64;
    Ok(ResultRow {
        m: pt.m,
        l_km: pt.distance_km,
        strategy: pt.strategy,
        success_probability: success,
        average_attempts: attempts,
        average_fidelity,
        per_pair_fidelities: fidelities,
        fidelity_stderr: stderr,
        n_trajectories: n,
        seed: spec.seed,
        wall_time_s: start.map_or(0.0, |s| s.elapsed().as_secs_f64()),
        engine: spec.engine,
    })
}

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Runs every point of `spec` not already present in the output table,
/// writing rows as they finish, then rewrites the table in key order and
/// writes the JSON sidecar. Returns the complete, sorted table.
pub fn run_sweep(spec: &SweepSpec, out_dir: &Path, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let csv_file = csv_path(out_dir, opts);
    let mut rows: BTreeMap<RowKey, ResultRow> = BTreeMap::new();
    if csv_file.exists() {
        let existing = read_rows(File::open(&csv_file).map_err(|e| io(&csv_file, e))?)?;
        for r in existing {
            rows.insert(r.key(), r);
        }
    } else {
        write_rows(File::create(&csv_file).map_err(|e| io(&csv_file, e))?, &[])?;
    }

    let mut cache = LinkCache::default();
    for pt in spec.points() {
        let key = RowKey { m: pt.m, l_bits: pt.distance_km.to_bits(), strategy: pt.strategy, seed: spec.seed };
        if rows.contains_key(&key) {
            continue;
        }
        let row = compute_row(spec, &pt, &mut cache, opts.timing)?;
        let mut f = OpenOptions::new().append(true).open(&csv_file).map_err(|e| io(&csv_file, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut f);
        w.write_record(row.record())?;
        w.flush()?;
        rows.insert(key, row);
    }

    let sorted: Vec<ResultRow> = rows.into_values().collect();
    let tmp = out_dir.join(format!(".{}.csv.tmp", opts.stem));
    write_rows(File::create(&tmp).map_err(|e| io(&tmp, e))?, &sorted)?;
    fs::rename(&tmp, &csv_file).map_err(|e| io(&csv_file, e))?;

    let sidecar = Sidecar { revision: &opts.revision, engine_version: env!("CARGO_PKG_VERSION"), sweep: spec, columns: &CSV_HEADER };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Io(e.to_string()))?;
    let side = sidecar_path(out_dir, opts);
    fs::write(&side, json + "\n").map_err(|e| io(&side, e))?;
    Ok(sorted)
}
