//! Proximity networks, relatedness density and time-lagged assist matrices.

use std::collections::HashSet;

use ndarray::Array2;
use serde::Serialize;

use crate::bipartite::{degrees, BinaryBipartite};
use crate::code::ActivityCode;
use crate::error::{Error, Result};

/// Symmetric activity-activity proximity: the smaller of the two conditional
/// co-occurrence ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityNetwork {
    pub activities: Vec<ActivityCode>,
    pub phi: Array2<f64>,
    pub ubiquity: Vec<usize>,
    /// Activities with zero ubiquity; their rows and columns are zero.
    pub zero_ubiquity: Vec<ActivityCode>,
    pub period: i32,
    pub layer: String,
}

impl ProximityNetwork {
    /// Per-activity sums of proximity (not normalised; typically above 1).
    pub fn row_sums(&self) -> Vec<f64> {
        self.phi.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Off-diagonal pairs `(a, a', phi)` with `a < a'` and `phi >= cutoff`.
    pub fn edges(&self, cutoff: f64) -> Vec<(usize, usize, f64)> {
        let n = self.activities.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let v = self.phi[[a, b]];
                if v > 0.0 && v >= cutoff {
                    out.push((a, b, v));
                }
            }
        }
        out
    }
}

/// Co-occurrence counts `sum_g M_ga M_ga'`.
pub fn co_occurrence(m: &BinaryBipartite) -> Array2<u32> {
    let na = m.n_activities();
    let mut co = Array2::<u32>::zeros((na, na));
    for row in m.row_lists() {
        for &a in &row {
            for &b in &row {
                co[[a, b]] += 1;
            }
        }
    }
    co
}

pub fn proximity(m: &BinaryBipartite) -> ProximityNetwork {
    let deg = degrees(m);
    let co = co_occurrence(m);
    let na = m.n_activities();
    let u = &deg.ubiquity;
    let phi = Array2::from_shape_fn((na, na), |(a, b)| {
        if u[a] == 0 || u[b] == 0 {
            0.0
        } else {
            let c = co[[a, b]] as f64;
            (c / u[a] as f64).min(c / u[b] as f64)
        }
    });
    ProximityNetwork {
        activities: m.activities.clone(),
        phi,
        zero_ubiquity: m
            .activities
            .iter()
            .zip(u)
            .filter(|(_, &k)| k == 0)
            .map(|(a, _)| a.clone())
            .collect(),
        ubiquity: deg.ubiquity,
        period: m.period,
        layer: m.layer.clone(),
    }
}

/// Relatedness density `omega_ga = sum_a' phi_aa' M_ga' / sum_a' phi_aa'`.
/// Cells whose denominator is zero are NaN.
pub fn relatedness_density(net: &ProximityNetwork, m: &BinaryBipartite) -> Result<Array2<f64>> {
    if net.activities != m.activities {
        return Err(Error::Data("proximity network and matrix have different activities".into()));
    }
    let denom = net.row_sums();
    let rows = m.row_lists();
    let na = m.n_activities();
    let mut out = Array2::<f64>::zeros((m.n_geos(), na));
    for (g, row) in rows.iter().enumerate() {
        for a in 0..na {
            out[[g, a]] = if denom[a] > 0.0 {
                row.iter().map(|&b| net.phi[[a, b]]).sum::<f64>() / denom[a]
            } else {
                f64::NAN
            };
        }
    }
    Ok(out)
}

/// Row-stochastic, possibly cross-layer and time-lagged, co-occurrence matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssistMatrix {
    pub source_layer: String,
    pub target_layer: String,
    pub source_period: i32,
    pub target_period: i32,
    pub lag: i32,
    pub source_activities: Vec<ActivityCode>,
    pub target_activities: Vec<ActivityCode>,
    /// Geos present in both matrices.
    pub candidate_geos: Vec<String>,
    /// Candidate geos actually used (after the zero-target-degree drop rule).
    pub geos: Vec<String>,
    #[serde(skip)]
    pub values: Array2<f64>,
    /// Source activities with zero ubiquity on the retained geos.
    pub undefined_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

impl AssistMatrix {
    pub fn is_defined_row(&self, a: usize) -> bool {
        !self.undefined_rows.contains(&a)
    }
}

pub(crate) struct AssistCore {
    pub values: Array2<f64>,
    pub retained: Vec<bool>,
    pub source_ubiquity: Vec<usize>,
}

/// Evaluates the assist matrix from aligned row lists. Geos with a non-empty
/// source row and an empty target row are not retained.
pub(crate) fn assist_core(src_rows: &[Vec<usize>], dst_rows: &[Vec<usize>], n_src: usize, n_dst: usize) -> AssistCore {
    let retained: Vec<bool> = src_rows
        .iter()
        .zip(dst_rows)
        .map(|(s, d)| s.is_empty() || !d.is_empty())
        .collect();
    let mut ubiquity = vec![0usize; n_src];
    for (row, _) in src_rows.iter().zip(&retained).filter(|(_, &k)| k) {
        for &a in row {
            ubiquity[a] += 1;
        }
    }
    let mut values = Array2::<f64>::zeros((n_src, n_dst));
    for ((s, d), _) in src_rows.iter().zip(dst_rows).zip(&retained).filter(|(_, &k)| k) {
        if d.is_empty() {
            continue;
        }
        let dg = d.len() as f64;
        for &a in s {
            let w = 1.0 / (ubiquity[a] as f64 * dg);
            for &b in d {
                values[[a, b]] += w;
            }
        }
    }
    AssistCore {
        values,
        retained,
        source_ubiquity: ubiquity,
    }
}

/// Assist matrix from a source layer at `y1` to a target layer at `y2 >= y1`,
/// evaluated over the geos both matrices share.
pub fn assist_matrix(m_src: &BinaryBipartite, m_dst: &BinaryBipartite) -> Result<AssistMatrix> {
    if m_dst.period < m_src.period {
        return Err(Error::Config(format!(
            "target period {} precedes source period {}",
            m_dst.period, m_src.period
        )));
    }
    let dst_index: std::collections::HashMap<&str, usize> =
        m_dst.geos.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let pairs: Vec<(usize, usize)> = m_src
        .geos
        .iter()
        .enumerate()
        .filter_map(|(i, g)| dst_index.get(g.as_str()).map(|&j| (i, j)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyIntersection("source and target matrices share no geo".into()));
    }
    let mut warnings = Vec::new();
    let common: HashSet<&str> = pairs.iter().map(|&(i, _)| m_src.geos[i].as_str()).collect();
    let only_src = m_src.geos.iter().filter(|g| !common.contains(g.as_str())).count();
    let only_dst = m_dst.geos.iter().filter(|g| !common.contains(g.as_str())).count();
    if only_src + only_dst > 0 {
        warnings.push(format!(
            "geo universes differ: {only_src} source-only and {only_dst} target-only geo(s) ignored"
        ));
    }

    let src_all = m_src.row_lists();
    let dst_all = m_dst.row_lists();
    let src_rows: Vec<Vec<usize>> = pairs.iter().map(|&(i, _)| src_all[i].clone()).collect();
    let dst_rows: Vec<Vec<usize>> = pairs.iter().map(|&(_, j)| dst_all[j].clone()).collect();
    let core = assist_core(&src_rows, &dst_rows, m_src.n_activities(), m_dst.n_activities());

    let candidate_geos: Vec<String> = pairs.iter().map(|&(i, _)| m_src.geos[i].clone()).collect();
    let dropped: Vec<&str> = candidate_geos
        .iter()
        .zip(&core.retained)
        .filter(|(_, &k)| !k)
        .map(|(g, _)| g.as_str())
        .collect();
    if !dropped.is_empty() {
        warnings.push(format!(
            "dropped geo(s) with no target specialisation: {}",
            dropped.join(", ")
        ));
    }
    let undefined_rows: Vec<usize> = (0..m_src.n_activities()).filter(|&a| core.source_ubiquity[a] == 0).collect();
    Ok(AssistMatrix {
        source_layer: m_src.layer.clone(),
        target_layer: m_dst.layer.clone(),
        source_period: m_src.period,
        target_period: m_dst.period,
        lag: m_dst.period - m_src.period,
        source_activities: m_src.activities.clone(),
        target_activities: m_dst.activities.clone(),
        geos: candidate_geos
            .iter()
            .zip(&core.retained)
            .filter(|(_, &k)| k)
            .map(|(g, _)| g.clone())
            .collect(),
        candidate_geos,
        values: core.values,
        undefined_rows,
        warnings,
    })
}
