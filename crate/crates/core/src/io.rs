//! CSV file formats and checkpoint-adjacent file plumbing.
//!
//! All writers go through [`atomic_write`]: content is staged to a sibling
//! temp file and renamed into place, so a failed run never leaves a partial
//! output behind. All files are UTF-8 with LF line endings and a header row.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::cluster::ClusterRow;
use crate::data::{normalize_actions, normalize_depth, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::sim::{EventType, SimEvent};
use crate::te::{TePeak, TeSeries};

/// Write `contents` to `path` via a temp file plus rename, so readers never
/// observe a partially written file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let display = path.display().to_string();
    let tmp = path.with_file_name(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string())
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(display, e)
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_field<T: FromStr>(path: &Path, row: usize, col: &str, raw: &str) -> Result<T> {
    raw.trim().parse::<T>().map_err(|_| {
        Error::parse(
            path.display().to_string(),
            row,
            format!("column '{col}': cannot parse '{raw}'"),
        )
    })
}

fn parse_real<R: Real>(path: &Path, row: usize, col: &str, raw: &str) -> Result<R> {
    let v: f64 = parse_field(path, row, col, raw)?;
    Ok(real::<R>(v))
}

/// Header-indexed CSV rows with uniform field counts.
struct CsvTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
            if record.len() != headers.len() {
                return Err(Error::parse(
                    path.display().to_string(),
                    i + 1,
                    format!("expected {} fields, found {}", headers.len(), record.len()),
                ));
            }
            rows.push(record.iter().map(|f| f.to_string()).collect());
        }
        Ok(Self { headers, rows })
    }

    fn column(&self, path: &Path, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::parse(
                path.display().to_string(),
                0,
                format!("missing column '{name}'"),
            )
        })
    }
}

/// Column layout and normalization flags for trajectory CSV files.
///
/// The file format is one row per frame with a mandatory `t` column followed
/// by the declared observation and action columns. `normalized = false` means
/// the file holds raw sensor values: observation columns are min-max
/// normalized per column over the whole file and action columns are mapped
/// through the symmetric `v_max` velocity normalization on load.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySchema {
    pub obs_cols: Vec<String>,
    pub act_cols: Vec<String>,
    pub normalized: bool,
    /// Symmetric maximum velocity used when `normalized` is false. Applies to
    /// every action column.
    pub v_max: f64,
    pub sample_rate_hz: f64,
}

impl Default for TrajectorySchema {
    fn default() -> Self {
        Self {
            obs_cols: vec!["depth".to_string()],
            act_cols: vec!["lin_vel".to_string(), "ang_vel".to_string()],
            normalized: true,
            v_max: 1.0,
            sample_rate_hz: 10.0,
        }
    }
}

pub fn load_trajectory<R: Real>(path: &Path, schema: &TrajectorySchema) -> Result<Trajectory<R>> {
    let table = CsvTable::load(path)?;
    let t_idx = table.column(path, "t")?;
    let obs_idx = schema
        .obs_cols
        .iter()
        .map(|c| table.column(path, c))
        .collect::<Result<Vec<_>>>()?;
    let act_idx = schema
        .act_cols
        .iter()
        .map(|c| table.column(path, c))
        .collect::<Result<Vec<_>>>()?;

    let mut obs_raw: Vec<Vec<f64>> = vec![Vec::with_capacity(table.rows.len()); obs_idx.len()];
    let mut act_raw: Vec<Vec<f64>> = vec![Vec::with_capacity(table.rows.len()); act_idx.len()];
    for (i, row) in table.rows.iter().enumerate() {
        let t: usize = parse_field(path, i + 1, "t", &row[t_idx])?;
        if t != i {
            return Err(Error::parse(
                path.display().to_string(),
                i + 1,
                format!("non-contiguous frame index: expected t={i}, found t={t}"),
            ));
        }
        for (k, &idx) in obs_idx.iter().enumerate() {
            obs_raw[k].push(parse_field(path, i + 1, &schema.obs_cols[k], &row[idx])?);
        }
        for (k, &idx) in act_idx.iter().enumerate() {
            act_raw[k].push(parse_field(path, i + 1, &schema.act_cols[k], &row[idx])?);
        }
    }
    if table.rows.is_empty() {
        return Err(Error::parse(
            path.display().to_string(),
            0,
            "trajectory file has no data rows",
        ));
    }

    let obs_cols: Vec<Vec<R>> = if schema.normalized {
        obs_raw
            .into_iter()
            .map(|col| col.into_iter().map(real::<R>).collect())
            .collect()
    } else {
        obs_raw
            .into_iter()
            .map(|col| normalize_depth(&col).map(|c| c.into_iter().map(real::<R>).collect()))
            .collect::<Result<_>>()?
    };
    let act_cols: Vec<Vec<R>> = if schema.normalized {
        act_raw
            .into_iter()
            .map(|col| col.into_iter().map(real::<R>).collect())
            .collect()
    } else {
        act_raw
            .into_iter()
            .map(|col| {
                normalize_actions(&col, schema.v_max)
                    .map(|c| c.into_iter().map(real::<R>).collect())
            })
            .collect::<Result<_>>()?
    };

    let frames = table.rows.len();
    let observations = (0..frames)
        .map(|t| obs_cols.iter().map(|col| col[t]).collect())
        .collect();
    let actions = (0..frames)
        .map(|t| act_cols.iter().map(|col| col[t]).collect())
        .collect();
    Trajectory::new(schema.sample_rate_hz, observations, actions)
}

/// Write a trajectory with deterministic column order: `t`, then the schema's
/// observation columns, then its action columns. Values are written as stored
/// (normalized).
pub fn save_trajectory<R: Real>(
    path: &Path,
    traj: &Trajectory<R>,
    schema: &TrajectorySchema,
) -> Result<()> {
    if schema.obs_cols.len() != traj.obs_dim() || schema.act_cols.len() != traj.act_dim() {
        return Err(Error::invalid_argument(format!(
            "schema declares {}+{} columns but trajectory has {}+{} channels",
            schema.obs_cols.len(),
            schema.act_cols.len(),
            traj.obs_dim(),
            traj.act_dim()
        )));
    }
    let mut out = String::new();
    out.push('t');
    for c in schema.obs_cols.iter().chain(schema.act_cols.iter()) {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for t in 0..traj.len() {
        let _ = write!(out, "{t}");
        for v in &traj.observations()[t] {
            let _ = write!(out, ",{v}");
        }
        for v in &traj.actions()[t] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// One row of the per-step transfer entropy output.
#[derive(Debug, Clone, PartialEq)]
pub struct TeRow<R: Real> {
    pub anchor_t: usize,
    pub te_raw: R,
    pub te_smoothed: R,
    pub is_peak: bool,
}

pub fn write_te_csv<R: Real>(
    path: &Path,
    raw: &TeSeries<R>,
    smoothed: &TeSeries<R>,
    peak_anchors: &BTreeSet<usize>,
) -> Result<()> {
    if raw.len() != smoothed.len() {
        return Err(Error::invalid_argument(
            "raw and smoothed series lengths differ",
        ));
    }
    let mut out = String::from("anchor_t,te_raw,te_smoothed,is_peak\n");
    for i in 0..raw.len() {
        let anchor = raw.anchors()[i];
        let _ = writeln!(
            out,
            "{anchor},{},{},{}",
            raw.values()[i],
            smoothed.values()[i],
            u8::from(peak_anchors.contains(&anchor))
        );
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_te_csv<R: Real>(path: &Path) -> Result<Vec<TeRow<R>>> {
    let table = CsvTable::load(path)?;
    let a = table.column(path, "anchor_t")?;
    let r = table.column(path, "te_raw")?;
    let s = table.column(path, "te_smoothed")?;
    let p = table.column(path, "is_peak")?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(TeRow {
                anchor_t: parse_field(path, i + 1, "anchor_t", &row[a])?,
                te_raw: parse_real(path, i + 1, "te_raw", &row[r])?,
                te_smoothed: parse_real(path, i + 1, "te_smoothed", &row[s])?,
                is_peak: parse_field::<u8>(path, i + 1, "is_peak", &row[p])? != 0,
            })
        })
        .collect()
}

/// A detected peak as stored on disk (without the action-window values,
/// which live in the trajectory file).
#[derive(Debug, Clone, PartialEq)]
pub struct PeakRecord<R: Real> {
    pub anchor_t: usize,
    pub te_value: R,
    pub window_start_t: usize,
    pub window_end_t: usize,
}

pub fn write_peaks_csv<R: Real>(path: &Path, peaks: &[TePeak<R>]) -> Result<()> {
    let mut out = String::from("anchor_t,te_value,window_start_t,window_end_t\n");
    for p in peaks {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.anchor_t, p.te_value, p.window_start_t, p.window_end_t
        );
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_peaks_csv<R: Real>(path: &Path) -> Result<Vec<PeakRecord<R>>> {
    let table = CsvTable::load(path)?;
    let a = table.column(path, "anchor_t")?;
    let v = table.column(path, "te_value")?;
    let ws = table.column(path, "window_start_t")?;
    let we = table.column(path, "window_end_t")?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(PeakRecord {
                anchor_t: parse_field(path, i + 1, "anchor_t", &row[a])?,
                te_value: parse_real(path, i + 1, "te_value", &row[v])?,
                window_start_t: parse_field(path, i + 1, "window_start_t", &row[ws])?,
                window_end_t: parse_field(path, i + 1, "window_end_t", &row[we])?,
            })
        })
        .collect()
}

pub fn write_clusters_csv(path: &Path, rows: &[ClusterRow]) -> Result<()> {
    let mut out = String::from("sequence_id,experiment_id,anchor_t,cluster_id\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.sequence_id, r.experiment_id, r.anchor_t, r.cluster_id
        );
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_clusters_csv(path: &Path) -> Result<Vec<ClusterRow>> {
    let table = CsvTable::load(path)?;
    let s = table.column(path, "sequence_id")?;
    let e = table.column(path, "experiment_id")?;
    let a = table.column(path, "anchor_t")?;
    let c = table.column(path, "cluster_id")?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(ClusterRow {
                sequence_id: parse_field(path, i + 1, "sequence_id", &row[s])?,
                experiment_id: row[e].clone(),
                anchor_t: parse_field(path, i + 1, "anchor_t", &row[a])?,
                cluster_id: parse_field(path, i + 1, "cluster_id", &row[c])?,
            })
        })
        .collect()
}

pub fn write_centroids_csv<R: Real>(path: &Path, centroids: &[Vec<R>]) -> Result<()> {
    let mut out = String::from("cluster_id,frame_offset,value\n");
    for (cid, centroid) in centroids.iter().enumerate() {
        for (off, v) in centroid.iter().enumerate() {
            let _ = writeln!(out, "{cid},{off},{v}");
        }
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_centroids_csv<R: Real>(path: &Path) -> Result<Vec<Vec<R>>> {
    let table = CsvTable::load(path)?;
    let c = table.column(path, "cluster_id")?;
    let f = table.column(path, "frame_offset")?;
    let v = table.column(path, "value")?;
    let mut centroids: Vec<Vec<R>> = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let cid: usize = parse_field(path, i + 1, "cluster_id", &row[c])?;
        let off: usize = parse_field(path, i + 1, "frame_offset", &row[f])?;
        let val: R = parse_real(path, i + 1, "value", &row[v])?;
        if cid >= centroids.len() {
            centroids.resize(cid + 1, Vec::new());
        }
        if off != centroids[cid].len() {
            return Err(Error::parse(
                path.display().to_string(),
                i + 1,
                format!("out-of-order frame_offset {off} for cluster {cid}"),
            ));
        }
        centroids[cid].push(val);
    }
    Ok(centroids)
}

pub fn write_events_csv(path: &Path, events: &[SimEvent]) -> Result<()> {
    let mut out = String::from("event_id,type,start_t,end_t\n");
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.id,
            e.event_type.as_str(),
            e.start_frame,
            e.end_frame
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Load a ground-truth event file. The on-disk schema carries no response
/// flag, so `responsive` is derived from the event type: forward and backward
/// bursts drive a depth response, turns do not.
pub fn read_events_csv(path: &Path) -> Result<Vec<SimEvent>> {
    let table = CsvTable::load(path)?;
    let id = table.column(path, "event_id")?;
    let ty = table.column(path, "type")?;
    let st = table.column(path, "start_t")?;
    let en = table.column(path, "end_t")?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let event_type = EventType::from_str(&row[ty]).map_err(|_| {
                Error::parse(
                    path.display().to_string(),
                    i + 1,
                    format!("unknown event type '{}'", row[ty]),
                )
            })?;
            Ok(SimEvent {
                id: parse_field(path, i + 1, "event_id", &row[id])?,
                event_type,
                start_frame: parse_field(path, i + 1, "start_t", &row[st])?,
                end_frame: parse_field(path, i + 1, "end_t", &row[en])?,
                responsive: event_type.moves_along_depth(),
            })
        })
        .collect()
}
