//! CSV and JSON readers/writers for records, matrices, scores and networks.
//!
//! Every float written to CSV uses 17 significant digits so values survive a
//! round trip bit-for-bit; undefined values are written as `NA`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bipartite::{degrees, BinaryBipartite, NestednessReport, RcaMatrix};
use crate::code::ActivityCode;
use crate::complexity::{Method, Normalization, ScoreAxis, ScoreVector};
use crate::error::{Error, Result};
use crate::green::GreenScores;
use crate::ingest::{RawRecord, WeightedBipartite};
use crate::numeric::{descending_ranks, fmt_f64, parse_f64};
use crate::relatedness::{AssistMatrix, ProximityNetwork};
use crate::validation::ValidatedNetwork;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::Reader::from_reader(open(path)?))
}

fn flush<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Header of a CSV file, used to recognise which artifact it holds.
pub fn csv_header(path: &Path) -> Result<Vec<String>> {
    let mut r = csv_reader(path)?;
    Ok(r.headers()?.iter().map(str::to_string).collect())
}

fn expect_header(path: &Path, want: &[&str]) -> Result<csv::Reader<BufReader<File>>> {
    let mut r = csv_reader(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got.len() < want.len() || got.iter().zip(want).any(|(g, w)| g != w) {
        return Err(Error::UnknownSchema {
            path: path.to_path_buf(),
            detail: format!("expected columns {}, found {}", want.join(","), got.join(",")),
        });
    }
    Ok(r)
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, path: &Path) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| Error::UnknownSchema {
        path: path.to_path_buf(),
        detail: format!("line {}: missing column {}", rec.position().map_or(0, |p| p.line()), i + 1),
    })
}

fn number(s: &str, path: &Path) -> Result<f64> {
    parse_f64(s).ok_or_else(|| Error::Data(format!("{}: `{s}` is not a number", path.display())))
}

/// Canonical record file: `geo,activity,value,year` with `SCHEME:code` activities.
pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["geo", "activity", "value", "year"])?;
    for r in records {
        w.write_record([r.geo.clone(), r.activity.to_string(), fmt_f64(r.value), r.period.to_string()])?;
    }
    flush(w, path)
}

/// Summary written next to every matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub kind: MatrixKind,
    pub geos: usize,
    pub activities: usize,
    /// Share of cells that are nonzero (binary) or positive (weights, RCA).
    pub fill: f64,
    pub undefined_cells: usize,
    pub threshold: Option<f64>,
    pub period: i32,
    pub layer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Weights,
    Rca,
    Binary,
}

fn write_long(path: &Path, geos: &[String], activities: &[ActivityCode], cell: impl Fn(usize, usize) -> String) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["geo", "activity", "value"])?;
    let labels: Vec<String> = activities.iter().map(ToString::to_string).collect();
    for (g, geo) in geos.iter().enumerate() {
        for (a, act) in labels.iter().enumerate() {
            w.write_record([geo.as_str(), act.as_str(), cell(g, a).as_str()])?;
        }
    }
    flush(w, path)
}

fn positive_fill(values: &Array2<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v > 0.0).count() as f64 / values.len() as f64
}

pub fn write_weights(path: &Path, m: &WeightedBipartite) -> Result<MatrixSummary> {
    write_long(path, &m.geos, &m.activities, |g, a| fmt_f64(m.weights[[g, a]]))?;
    Ok(MatrixSummary {
        kind: MatrixKind::Weights,
        geos: m.geos.len(),
        activities: m.activities.len(),
        fill: positive_fill(&m.weights),
        undefined_cells: 0,
        threshold: None,
        period: m.period,
        layer: m.layer.clone(),
    })
}

pub fn write_rca(path: &Path, rca: &RcaMatrix) -> Result<MatrixSummary> {
    write_long(path, &rca.geos, &rca.activities, |g, a| fmt_f64(rca.values[[g, a]]))?;
    Ok(MatrixSummary {
        kind: MatrixKind::Rca,
        geos: rca.geos.len(),
        activities: rca.activities.len(),
        fill: positive_fill(&rca.values),
        undefined_cells: rca.undefined_cells(),
        threshold: None,
        period: rca.period,
        layer: rca.layer.clone(),
    })
}

pub fn write_binary(path: &Path, m: &BinaryBipartite) -> Result<MatrixSummary> {
    write_long(path, &m.geos, &m.activities, |g, a| m.entries[[g, a]].to_string())?;
    Ok(MatrixSummary {
        kind: MatrixKind::Binary,
        geos: m.n_geos(),
        activities: m.n_activities(),
        fill: m.fill(),
        undefined_cells: 0,
        threshold: m.threshold,
        period: m.period,
        layer: m.layer.clone(),
    })
}

/// Long-format matrix as read back: labels in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct LongMatrix {
    pub geos: Vec<String>,
    pub activities: Vec<ActivityCode>,
    pub values: Array2<f64>,
}

/// Reads a `geo,activity,value` file. Every cell must appear exactly once.
pub fn read_long(path: &Path) -> Result<LongMatrix> {
    let mut r = expect_header(path, &["geo", "activity", "value"])?;
    let mut geos: Vec<String> = Vec::new();
    let mut geo_index = std::collections::HashMap::new();
    let mut activities: Vec<ActivityCode> = Vec::new();
    let mut act_index = std::collections::HashMap::new();
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let geo = field(&rec, 0, path)?;
        let act = field(&rec, 1, path)?;
        let value = number(field(&rec, 2, path)?, path)?;
        let g = *geo_index.entry(geo.to_string()).or_insert_with(|| {
            geos.push(geo.to_string());
            geos.len() - 1
        });
        let a = match act_index.get(act) {
            Some(&a) => a,
            None => {
                activities.push(act.parse()?);
                act_index.insert(act.to_string(), activities.len() - 1);
                activities.len() - 1
            }
        };
        cells.push((g, a, value));
    }
    let mut values = Array2::from_elem((geos.len(), activities.len()), f64::NAN);
    let mut seen = Array2::from_elem(values.dim(), false);
    for (g, a, v) in cells {
        if seen[[g, a]] {
            return Err(Error::Data(format!("{}: duplicate cell ({}, {})", path.display(), geos[g], activities[a])));
        }
        seen[[g, a]] = true;
        values[[g, a]] = v;
    }
    if let Some(((g, a), _)) = seen.indexed_iter().find(|(_, &s)| !s) {
        return Err(Error::Data(format!("{}: missing cell ({}, {})", path.display(), geos[g], activities[a])));
    }
    Ok(LongMatrix { geos, activities, values })
}

/// The `.json` summary sitting next to a matrix CSV, if any.
pub fn summary_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

fn read_summary(csv_path: &Path) -> Result<Option<MatrixSummary>> {
    let p = summary_path(csv_path);
    if p.exists() {
        read_json(&p).map(Some)
    } else {
        Ok(None)
    }
}

/// Reads a weight matrix; period and layer come from the summary when present.
pub fn read_weights(path: &Path) -> Result<WeightedBipartite> {
    let long = read_long(path)?;
    let s = read_summary(path)?;
    WeightedBipartite::new(
        long.geos,
        long.activities,
        long.values,
        s.as_ref().map_or(0, |s| s.period),
        s.map_or_else(String::new, |s| s.layer),
    )
}

pub fn read_rca(path: &Path) -> Result<RcaMatrix> {
    let long = read_long(path)?;
    let s = read_summary(path)?;
    let undefined_rows = long
        .values
        .rows()
        .into_iter()
        .zip(&long.geos)
        .filter(|(r, _)| r.iter().all(|v| v.is_nan()))
        .map(|(_, g)| g.clone())
        .collect();
    let undefined_columns = long
        .values
        .columns()
        .into_iter()
        .zip(&long.activities)
        .filter(|(c, _)| c.iter().all(|v| v.is_nan()))
        .map(|(_, a)| a.clone())
        .collect();
    Ok(RcaMatrix {
        geos: long.geos,
        activities: long.activities,
        values: long.values,
        undefined_rows,
        undefined_columns,
        period: s.as_ref().map_or(0, |s| s.period),
        layer: s.map_or_else(String::new, |s| s.layer),
    })
}

pub fn read_binary(path: &Path) -> Result<BinaryBipartite> {
    let long = read_long(path)?;
    let entries = long
        .values
        .iter()
        .map(|&v| match v {
            0.0 => Ok(0u8),
            1.0 => Ok(1u8),
            _ => Err(Error::Data(format!("{}: binary matrix holds value {v}", path.display()))),
        })
        .collect::<Result<Vec<u8>>>()?;
    let entries = Array2::from_shape_vec(long.values.dim(), entries).expect("shape matches");
    let mut m = BinaryBipartite::new(long.geos, long.activities, entries)?;
    if let Some(s) = read_summary(path)? {
        m.threshold = s.threshold;
        m.period = s.period;
        m.layer = s.layer;
    }
    Ok(m)
}

/// `id,value,rank` with rank 1 for the highest score (ties by position).
pub fn write_scores(path: &Path, scores: &ScoreVector) -> Result<()> {
    let ranks = descending_ranks(&scores.values);
    let mut w = csv_writer(path)?;
    w.write_record(["id", "value", "rank"])?;
    for ((id, &v), r) in scores.ids.iter().zip(&scores.values).zip(ranks) {
        w.write_record([id.clone(), fmt_f64(v), r.to_string()])?;
    }
    flush(w, path)
}

/// Reads scores from the JSON document, or from `id,value[,rank]` CSV with the
/// given metadata.
pub fn read_scores(path: &Path, axis: ScoreAxis, method: Method, normalization: Normalization) -> Result<ScoreVector> {
    if path.extension().is_some_and(|e| e == "json") {
        let s: ScoreVector = read_json(path)?;
        if s.axis != axis {
            return Err(Error::Data(format!("{}: expected {axis:?} scores", path.display())));
        }
        return Ok(s);
    }
    let mut r = expect_header(path, &["id", "value"])?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(field(&rec, 0, path)?.to_string());
        values.push(number(field(&rec, 1, path)?, path)?);
    }
    Ok(ScoreVector::new(axis, ids, values, method, normalization))
}

/// Proximity edges `a <= a'` with positive weight, diagonal included.
pub fn write_proximity(path: &Path, net: &ProximityNetwork) -> Result<()> {
    let labels: Vec<String> = net.activities.iter().map(ToString::to_string).collect();
    let mut w = csv_writer(path)?;
    w.write_record(["source", "target", "weight"])?;
    for a in 0..labels.len() {
        for b in a..labels.len() {
            let v = net.phi[[a, b]];
            if v > 0.0 {
                w.write_record([labels[a].as_str(), labels[b].as_str(), fmt_f64(v).as_str()])?;
            }
        }
    }
    flush(w, path)
}

/// Rebuilds a proximity network on the activities of `m` from an edge list.
/// Ubiquities are taken from `m` and must agree with the diagonal.
pub fn read_proximity(path: &Path, m: &BinaryBipartite) -> Result<ProximityNetwork> {
    let index: std::collections::HashMap<String, usize> =
        m.activities.iter().enumerate().map(|(i, a)| (a.to_string(), i)).collect();
    let n = m.n_activities();
    let mut phi = Array2::<f64>::zeros((n, n));
    let mut r = expect_header(path, &["source", "target", "weight"])?;
    for rec in r.records() {
        let rec = rec?;
        let lookup = |s: &str| {
            let code: ActivityCode = s.parse()?;
            index
                .get(&code.to_string())
                .copied()
                .ok_or_else(|| Error::Data(format!("{}: activity {s} is not in the matrix", path.display())))
        };
        let a = lookup(field(&rec, 0, path)?)?;
        let b = lookup(field(&rec, 1, path)?)?;
        let v = number(field(&rec, 2, path)?, path)?;
        phi[[a, b]] = v;
        phi[[b, a]] = v;
    }
    let ubiquity = degrees(m).ubiquity;
    if let Some(a) = (0..n).find(|&a| (ubiquity[a] > 0) != (phi[[a, a]] > 0.0)) {
        return Err(Error::Data(format!(
            "{}: proximity diagonal of {} disagrees with the matrix",
            path.display(),
            m.activities[a]
        )));
    }
    Ok(ProximityNetwork {
        activities: m.activities.clone(),
        phi,
        zero_ubiquity: (0..n).filter(|&a| ubiquity[a] == 0).map(|a| m.activities[a].clone()).collect(),
        ubiquity,
        period: m.period,
        layer: m.layer.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ubiquity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significant: Option<bool>,
}

/// JSON graph document for proximity, assist and validated networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub kind: String,
    pub directed: bool,
    pub metadata: serde_json::Value,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

pub fn proximity_graph(net: &ProximityNetwork, cutoff: f64) -> GraphDocument {
    GraphDocument {
        kind: "proximity".into(),
        directed: false,
        metadata: serde_json::json!({
            "period": net.period,
            "layer": net.layer,
            "cutoff": cutoff,
            "zero_ubiquity": net.zero_ubiquity,
        }),
        nodes: net
            .activities
            .iter()
            .zip(&net.ubiquity)
            .map(|(a, &u)| GraphNode {
                id: a.to_string(),
                ubiquity: Some(u),
            })
            .collect(),
        edges: net
            .edges(cutoff)
            .into_iter()
            .map(|(a, b, w)| GraphEdge {
                source: net.activities[a].to_string(),
                target: net.activities[b].to_string(),
                weight: w,
                p_value: None,
                significant: None,
            })
            .collect(),
    }
}

fn assist_nodes(b: &AssistMatrix) -> Vec<GraphNode> {
    let mut ids: Vec<String> = b.source_activities.iter().map(ToString::to_string).collect();
    for t in &b.target_activities {
        let t = t.to_string();
        if !ids.contains(&t) {
            ids.push(t);
        }
    }
    ids.into_iter().map(|id| GraphNode { id, ubiquity: None }).collect()
}

fn assist_metadata(b: &AssistMatrix) -> serde_json::Value {
    serde_json::json!({
        "source_layer": b.source_layer,
        "target_layer": b.target_layer,
        "source_period": b.source_period,
        "target_period": b.target_period,
        "lag": b.lag,
        "geos": b.geos,
        "undefined_rows": b.undefined_rows.iter().map(|&a| b.source_activities[a].to_string()).collect::<Vec<_>>(),
        "warnings": b.warnings,
    })
}

/// Positive cells of the defined rows, row-major.
fn assist_edges(b: &AssistMatrix) -> Vec<GraphEdge> {
    let mut out = Vec::new();
    for (a, src) in b.source_activities.iter().enumerate() {
        if !b.is_defined_row(a) {
            continue;
        }
        for (c, dst) in b.target_activities.iter().enumerate() {
            let w = b.values[[a, c]];
            if w > 0.0 {
                out.push(GraphEdge {
                    source: src.to_string(),
                    target: dst.to_string(),
                    weight: w,
                    p_value: None,
                    significant: None,
                });
            }
        }
    }
    out
}

pub fn assist_graph(b: &AssistMatrix) -> GraphDocument {
    GraphDocument {
        kind: "assist".into(),
        directed: true,
        metadata: assist_metadata(b),
        nodes: assist_nodes(b),
        edges: assist_edges(b),
    }
}

pub fn validated_graph(b: &AssistMatrix, v: &ValidatedNetwork) -> GraphDocument {
    let mut metadata = assist_metadata(b);
    metadata["alpha"] = v.alpha.into();
    metadata["correction"] = serde_json::to_value(v.correction).expect("enum serialises");
    metadata["samples"] = v.samples.into();
    metadata["seed"] = v.seed.into();
    metadata["tested_links"] = v.tests.len().into();
    GraphDocument {
        kind: "validated-assist".into(),
        directed: true,
        metadata,
        nodes: assist_nodes(b),
        edges: v
            .edges
            .iter()
            .map(|t| GraphEdge {
                source: t.source.to_string(),
                target: t.target.to_string(),
                weight: t.observed,
                p_value: Some(t.adjusted_p_value),
                significant: Some(true),
            })
            .collect(),
    }
}

pub fn write_edges(path: &Path, edges: &[GraphEdge]) -> Result<()> {
    let tested = edges.first().is_some_and(|e| e.p_value.is_some());
    let mut w = csv_writer(path)?;
    if tested {
        w.write_record(["source", "target", "weight", "p_value", "significant"])?;
    } else {
        w.write_record(["source", "target", "weight"])?;
    }
    for e in edges {
        let mut row = vec![e.source.clone(), e.target.clone(), fmt_f64(e.weight)];
        if tested {
            row.push(fmt_f64(e.p_value.unwrap_or(f64::NAN)));
            row.push(e.significant.unwrap_or(false).to_string());
        }
        w.write_record(&row)?;
    }
    flush(w, path)
}

/// Every tested link with its adjusted p-value.
pub fn tested_edges(v: &ValidatedNetwork) -> Vec<GraphEdge> {
    v.tests
        .iter()
        .map(|t| GraphEdge {
            source: t.source.to_string(),
            target: t.target.to_string(),
            weight: t.observed,
            p_value: Some(t.adjusted_p_value),
            significant: Some(t.significant),
        })
        .collect()
}

/// `geo,gci,gcp,n_green_specializations`; undefined GCP as `NA`.
pub fn write_green(path: &Path, s: &GreenScores) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["geo", "gci", "gcp", "n_green_specializations"])?;
    for g in 0..s.geos.len() {
        w.write_record([
            s.geos[g].clone(),
            fmt_f64(s.gci[g]),
            fmt_f64(s.gcp[g].unwrap_or(f64::NAN)),
            s.green_specializations[g].to_string(),
        ])?;
    }
    flush(w, path)
}

/// Nestedness summary with orders given as identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestednessDocument {
    pub score: Option<f64>,
    pub row_component: Option<f64>,
    pub column_component: Option<f64>,
    pub row_order: Vec<String>,
    pub column_order: Vec<String>,
}

pub fn nestedness_document(m: &BinaryBipartite, rep: &NestednessReport) -> NestednessDocument {
    NestednessDocument {
        score: rep.score,
        row_component: rep.row_component,
        column_component: rep.column_component,
        row_order: rep.row_order.iter().map(|&g| m.geos[g].clone()).collect(),
        column_order: rep.column_order.iter().map(|&a| m.activities[a].to_string()).collect(),
    }
}

/// Writes `(x, y, label)` rows.
pub fn write_xy(path: &Path, header: [&str; 3], rows: &[(String, String, String)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for (x, y, l) in rows {
        w.write_record([x, y, l])?;
    }
    flush(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relatedness::proximity;

    fn m0() -> BinaryBipartite {
        BinaryBipartite::from_rows(&[[1, 1, 1], [1, 1, 0], [1, 0, 0]])
            .unwrap()
            .with_meta(2010, "toy")
    }

    #[test]
    fn binary_round_trip_keeps_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut m = m0();
        m.threshold = Some(1.0);
        let s = write_binary(&p, &m).unwrap();
        write_json(&summary_path(&p), &s).unwrap();
        assert_eq!(read_binary(&p).unwrap(), m);
        assert_eq!(s.fill, 6.0 / 9.0);
    }

    #[test]
    fn rca_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let w = WeightedBipartite::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![ActivityCode::hs("01").unwrap(), ActivityCode::hs("02").unwrap()],
            ndarray::array![[0.1, 0.7], [0.3, 1.0 / 3.0], [0.0, 0.0]],
            2001,
            "trade",
        )
        .unwrap();
        let rca = crate::bipartite::compute_rca(&w).unwrap();
        let s = write_rca(&p, &rca).unwrap();
        assert_eq!(s.undefined_cells, 2);
        write_json(&summary_path(&p), &s).unwrap();
        let back = read_rca(&p).unwrap();
        assert_eq!(back.undefined_rows, vec!["z".to_string()]);
        for (a, b) in back.values.iter().zip(rca.values.iter()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn proximity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let m = m0();
        let net = proximity(&m);
        write_proximity(&p, &net).unwrap();
        assert_eq!(read_proximity(&p, &m).unwrap(), net);
    }

    #[test]
    fn wrong_header_is_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_long(&p), Err(Error::UnknownSchema { .. })));
    }

    #[test]
    fn missing_cell_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "geo,activity,value\ng1,custom:a,1\ng2,custom:b,0\n").unwrap();
        assert!(read_long(&p).is_err());
    }
}
