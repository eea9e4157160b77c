//! RCA, binary specialisation matrices, degrees and nestedness.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::code::ActivityCode;
use crate::error::{Error, Result};
use crate::ingest::{check_unique, WeightedBipartite};

/// Balassa RCA values. Cells with a zero row or column marginal are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub geos: Vec<String>,
    pub activities: Vec<ActivityCode>,
    pub values: Array2<f64>,
    pub undefined_rows: Vec<String>,
    pub undefined_columns: Vec<ActivityCode>,
    pub period: i32,
    pub layer: String,
}

impl RcaMatrix {
    pub fn is_defined(&self, g: usize, a: usize) -> bool {
        !self.values[[g, a]].is_nan()
    }

    pub fn undefined_cells(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

pub fn compute_rca(matrix: &WeightedBipartite) -> Result<RcaMatrix> {
    let w = &matrix.weights;
    if w.is_empty() {
        return Err(Error::Data("RCA needs at least one geo and one activity".into()));
    }
    let row_tot: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    let col_tot: Vec<f64> = w.columns().into_iter().map(|c| c.sum()).collect();
    let total: f64 = row_tot.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Data("grand total of weights is zero".into()));
    }
    let (ng, na) = w.dim();
    let mut values = Array2::<f64>::zeros((ng, na));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(g, mut row)| {
            for a in 0..na {
                row[a] = if row_tot[g] > 0.0 && col_tot[a] > 0.0 {
                    (w[[g, a]] * total) / (row_tot[g] * col_tot[a])
                } else {
                    f64::NAN
                };
            }
        });
    Ok(RcaMatrix {
        geos: matrix.geos.clone(),
        activities: matrix.activities.clone(),
        values,
        undefined_rows: matrix.zero_rows(),
        undefined_columns: matrix.zero_columns(),
        period: matrix.period,
        layer: matrix.layer.clone(),
    })
}

/// 0/1 specialisation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryBipartite {
    pub geos: Vec<String>,
    pub activities: Vec<ActivityCode>,
    pub entries: Array2<u8>,
    /// RCA threshold that produced the matrix, if it came from `binarize`.
    pub threshold: Option<f64>,
    pub period: i32,
    pub layer: String,
}

impl BinaryBipartite {
    pub fn new(geos: Vec<String>, activities: Vec<ActivityCode>, entries: Array2<u8>) -> Result<Self> {
        if entries.dim() != (geos.len(), activities.len()) {
            return Err(Error::Data(format!(
                "entry matrix is {:?}, labels are {}x{}",
                entries.dim(),
                geos.len(),
                activities.len()
            )));
        }
        if entries.iter().any(|&e| e > 1) {
            return Err(Error::Data("binary matrix entries must be 0 or 1".into()));
        }
        check_unique(&geos, "geo")?;
        check_unique(&activities, "activity")?;
        Ok(BinaryBipartite {
            geos,
            activities,
            entries,
            threshold: None,
            period: 0,
            layer: String::new(),
        })
    }

    /// Builds a matrix labelled `g1..` / `a1..` (custom scheme) from rows.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let ng = rows.len();
        let na = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != na) {
            return Err(Error::Data("ragged rows".into()));
        }
        let flat: Vec<u8> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        let entries = Array2::from_shape_vec((ng, na), flat).map_err(|e| Error::Data(e.to_string()))?;
        Self::new(
            (1..=ng).map(|i| format!("g{i}")).collect(),
            (1..=na).map(|i| ActivityCode::custom(&format!("a{i}"))).collect(),
            entries,
        )
    }

    pub fn with_meta(mut self, period: i32, layer: impl Into<String>) -> Self {
        self.period = period;
        self.layer = layer.into();
        self
    }

    pub fn n_geos(&self) -> usize {
        self.geos.len()
    }

    pub fn n_activities(&self) -> usize {
        self.activities.len()
    }

    pub fn get(&self, g: usize, a: usize) -> bool {
        self.entries[[g, a]] == 1
    }

    /// Column indices of the ones in each row.
    pub fn row_lists(&self) -> Vec<Vec<usize>> {
        self.entries
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v == 1).map(|(a, _)| a).collect())
            .collect()
    }

    /// Row indices of the ones in each column.
    pub fn col_lists(&self) -> Vec<Vec<usize>> {
        self.entries
            .columns()
            .into_iter()
            .map(|c| c.iter().enumerate().filter(|(_, &v)| v == 1).map(|(g, _)| g).collect())
            .collect()
    }

    pub fn fill(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|&e| e as usize).sum::<usize>() as f64 / self.entries.len() as f64
    }

    /// Copy with rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.geos = perm.iter().map(|&i| self.geos[i].clone()).collect();
        out.entries = self.entries.select(Axis(0), perm);
        out
    }

    /// Copy with columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.activities = perm.iter().map(|&j| self.activities[j].clone()).collect();
        out.entries = self.entries.select(Axis(1), perm);
        out
    }

    /// Copy without zero-diversification rows and zero-ubiquity columns.
    pub fn prune_zero_degree(&self) -> Self {
        let deg = degrees(self);
        let rows: Vec<usize> = (0..self.n_geos()).filter(|&g| deg.diversification[g] > 0).collect();
        let cols: Vec<usize> = (0..self.n_activities()).filter(|&a| deg.ubiquity[a] > 0).collect();
        self.permute_rows(&rows).permute_columns(&cols)
    }

    /// Errors naming every zero-degree geo or activity.
    pub fn require_positive_degrees(&self) -> Result<DegreeProfile> {
        let deg = degrees(self);
        let geos: Vec<String> = deg
            .diversification
            .iter()
            .zip(&self.geos)
            .filter(|(&d, _)| d == 0)
            .map(|(_, g)| g.clone())
            .collect();
        if !geos.is_empty() {
            return Err(Error::ZeroDegree { axis: "geo", ids: geos });
        }
        let acts: Vec<String> = deg
            .ubiquity
            .iter()
            .zip(&self.activities)
            .filter(|(&u, _)| u == 0)
            .map(|(_, a)| a.to_string())
            .collect();
        if !acts.is_empty() {
            return Err(Error::ZeroDegree {
                axis: "activity",
                ids: acts,
            });
        }
        Ok(deg)
    }
}

/// Thresholds RCA: `M = 1` iff the cell is defined and `RCA >= threshold`.
pub fn binarize(rca: &RcaMatrix, threshold: f64) -> Result<BinaryBipartite> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
    }
    let entries = rca.values.mapv(|v| u8::from(v >= threshold));
    Ok(BinaryBipartite {
        geos: rca.geos.clone(),
        activities: rca.activities.clone(),
        entries,
        threshold: Some(threshold),
        period: rca.period,
        layer: rca.layer.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeProfile {
    pub diversification: Vec<usize>,
    pub ubiquity: Vec<usize>,
}

pub fn degrees(m: &BinaryBipartite) -> DegreeProfile {
    DegreeProfile {
        diversification: m
            .entries
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| v as usize).sum())
            .collect(),
        ubiquity: m
            .entries
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|&v| v as usize).sum())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestednessReport {
    /// Geo indices by descending diversification (ties by index).
    pub row_order: Vec<usize>,
    /// Activity indices by ascending ubiquity (ties by index).
    pub column_order: Vec<usize>,
    /// NODF in [0, 100]; `None` with fewer than two rows or columns.
    pub score: Option<f64>,
    pub row_component: Option<f64>,
    pub column_component: Option<f64>,
}

struct BitRows {
    words: usize,
    bits: Vec<u64>,
}

impl BitRows {
    fn new(lists: &[Vec<usize>], width: usize) -> Self {
        let words = width.div_ceil(64).max(1);
        let mut bits = vec![0u64; words * lists.len()];
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                bits[i * words + j / 64] |= 1 << (j % 64);
            }
        }
        BitRows { words, bits }
    }

    fn overlap(&self, i: usize, j: usize) -> u32 {
        let a = &self.bits[i * self.words..(i + 1) * self.words];
        let b = &self.bits[j * self.words..(j + 1) * self.words];
        a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
    }
}

/// Sum of pairwise decreasing-fill overlaps over one axis.
fn paired_overlap_sum(lists: &[Vec<usize>], width: usize) -> f64 {
    let bits = BitRows::new(lists, width);
    let n = lists.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in (i + 1)..n {
                let (di, dj) = (lists[i].len(), lists[j].len());
                if di == dj || di == 0 || dj == 0 {
                    continue;
                }
                let small = di.min(dj);
                s += bits.overlap(i, j) as f64 / small as f64;
            }
            s
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

pub fn nestedness(m: &BinaryBipartite) -> NestednessReport {
    let deg = degrees(m);
    let mut row_order: Vec<usize> = (0..m.n_geos()).collect();
    row_order.sort_by(|&a, &b| deg.diversification[b].cmp(&deg.diversification[a]).then(a.cmp(&b)));
    let mut column_order: Vec<usize> = (0..m.n_activities()).collect();
    column_order.sort_by(|&a, &b| deg.ubiquity[a].cmp(&deg.ubiquity[b]).then(a.cmp(&b)));

    let (ng, na) = (m.n_geos(), m.n_activities());
    if ng < 2 || na < 2 {
        return NestednessReport {
            row_order,
            column_order,
            score: None,
            row_component: None,
            column_component: None,
        };
    }
    let row_pairs = (ng * (ng - 1) / 2) as f64;
    let col_pairs = (na * (na - 1) / 2) as f64;
    let row_sum = paired_overlap_sum(&m.row_lists(), na);
    let col_sum = paired_overlap_sum(&m.col_lists(), ng);
    NestednessReport {
        row_order,
        column_order,
        score: Some(100.0 * (row_sum + col_sum) / (row_pairs + col_pairs)),
        row_component: Some(100.0 * row_sum / row_pairs),
        column_component: Some(100.0 * col_sum / col_pairs),
    }
}
