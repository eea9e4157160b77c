//! Plot-ready tables: ranked score curves, nestedness-ordered heatmap cells
//! and thresholded proximity edges. No plotting happens here.

use std::path::{Path, PathBuf};

use crate::bipartite::{nestedness, BinaryBipartite, NestednessReport};
use crate::complexity::{Method, Normalization, ScoreAxis, ScoreVector};
use crate::error::{Error, Result};
use crate::export::{csv_header, read_binary, read_scores, write_xy};
use crate::numeric::{descending_order, fmt_f64, parse_f64};
use crate::relatedness::ProximityNetwork;

/// `(rank, value, id)` sorted by descending value, ranks from 1.
pub fn ranked_curve(scores: &ScoreVector) -> Vec<(usize, f64, String)> {
    descending_order(&scores.values)
        .into_iter()
        .enumerate()
        .map(|(k, i)| (k + 1, scores.values[i], scores.ids[i].clone()))
        .collect()
}

/// Nonzero cells as `(column position, row position, geo, activity)` after
/// reordering rows and columns as in `rep`, listed row by row.
pub fn heatmap_cells(m: &BinaryBipartite, rep: &NestednessReport) -> Vec<(usize, usize, String, String)> {
    let mut out = Vec::new();
    for (y, &g) in rep.row_order.iter().enumerate() {
        for (x, &a) in rep.column_order.iter().enumerate() {
            if m.get(g, a) {
                out.push((x, y, m.geos[g].clone(), m.activities[a].to_string()));
            }
        }
    }
    out
}

/// Off-diagonal proximity edges at or above `cutoff`, as identifiers.
pub fn proximity_bundle(net: &ProximityNetwork, cutoff: f64) -> Vec<(String, String, f64)> {
    net.edges(cutoff)
        .into_iter()
        .map(|(a, b, w)| (net.activities[a].to_string(), net.activities[b].to_string(), w))
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

/// Recognises a toolkit artifact by its header and writes the matching plot
/// table into `out_dir`. Returns the written file.
pub fn emit_plot_data(input: &Path, out_dir: &Path, cutoff: f64) -> Result<PathBuf> {
    let header = csv_header(input)?;
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    match cols.as_slice() {
        ["id", "value", "rank"] => {
            // Axis and method only label the vector; the curve ignores them.
            let scores = read_scores(input, ScoreAxis::Geo, Method::Fitness, Normalization::Raw)?;
            let rows: Vec<_> = ranked_curve(&scores)
                .into_iter()
                .map(|(r, v, id)| (r.to_string(), fmt_f64(v), id))
                .collect();
            let out = out_dir.join(format!("{}_ranked.csv", stem(input)));
            write_xy(&out, ["x", "y", "label"], &rows)?;
            Ok(out)
        }
        ["geo", "activity", "value"] => {
            let m = read_binary(input)?;
            let rows: Vec<_> = heatmap_cells(&m, &nestedness(&m))
                .into_iter()
                .map(|(x, y, g, a)| (x.to_string(), y.to_string(), format!("{g}|{a}")))
                .collect();
            let out = out_dir.join(format!("{}_heatmap.csv", stem(input)));
            write_xy(&out, ["x", "y", "label"], &rows)?;
            Ok(out)
        }
        ["source", "target", "weight", ..] => {
            let mut r = csv::Reader::from_path(input)?;
            let mut rows = Vec::new();
            for rec in r.records() {
                let rec = rec?;
                let w = rec.get(2).and_then(parse_f64).ok_or_else(|| Error::UnknownSchema {
                    path: input.to_path_buf(),
                    detail: "weight column is not numeric".into(),
                })?;
                if rec[0] != rec[1] && w > 0.0 && w >= cutoff {
                    rows.push((rec[0].to_string(), rec[1].to_string(), fmt_f64(w)));
                }
            }
            let out = out_dir.join(format!("{}_edges.csv", stem(input)));
            write_xy(&out, ["source", "target", "weight"], &rows)?;
            Ok(out)
        }
        _ => Err(Error::UnknownSchema {
            path: input.to_path_buf(),
            detail: format!("no plot table for columns {}", header.join(",")),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relatedness::proximity;

    fn m0() -> BinaryBipartite {
        BinaryBipartite::from_rows(&[[1, 1, 1], [1, 1, 0], [1, 0, 0]]).unwrap()
    }

    #[test]
    fn m0_heatmap_is_triangular() {
        let m = m0();
        let cells: Vec<(usize, usize)> = heatmap_cells(&m, &nestedness(&m)).iter().map(|c| (c.0, c.1)).collect();
        assert_eq!(cells, vec![(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)]);
    }

    #[test]
    fn m0_bundle_at_cutoff() {
        let b = proximity_bundle(&proximity(&m0()), 0.6);
        assert_eq!(b, vec![("custom:a1".into(), "custom:a2".into(), 2.0 / 3.0)]);
    }

    #[test]
    fn ranked_curve_is_descending() {
        let s = ScoreVector::new(
            ScoreAxis::Geo,
            vec!["x".into(), "y".into(), "z".into()],
            vec![0.5, 2.0, 1.0],
            Method::Fitness,
            Normalization::MeanOne,
        );
        let c = ranked_curve(&s);
        assert_eq!(c.iter().map(|r| r.2.as_str()).collect::<Vec<_>>(), ["y", "z", "x"]);
        assert_eq!(c[0].0, 1);
    }

    #[test]
    fn unknown_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("odd.csv");
        std::fs::write(&p, "foo,bar\n1,2\n").unwrap();
        assert!(matches!(emit_plot_data(&p, dir.path(), 0.5), Err(Error::UnknownSchema { .. })));
    }
}
