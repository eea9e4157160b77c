//! Monte Carlo validation of assist-matrix links against BiCM null models,
//! with multiple-testing correction.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicm::NullModel;
use crate::code::ActivityCode;
use crate::error::{Error, Result};
use crate::relatedness::{assist_core, AssistMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    Bonferroni,
    #[default]
    BhFdr,
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bonferroni" => Ok(Correction::Bonferroni),
            "bh-fdr" | "bh" | "fdr" => Ok(Correction::BhFdr),
            _ => Err(Error::Config(format!("unknown correction `{s}`"))),
        }
    }
}

/// Adjusted p-values in input order.
pub fn adjust_p_values(p: &[f64], method: Correction) -> Vec<f64> {
    let n = p.len();
    match method {
        Correction::Bonferroni => p.iter().map(|&v| (v * n as f64).min(1.0)).collect(),
        Correction::BhFdr => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
            let mut out = vec![0.0; n];
            let mut running = 1.0_f64;
            for rank in (0..n).rev() {
                let i = idx[rank];
                running = running.min(p[i] * n as f64 / (rank + 1) as f64);
                out[i] = running.min(1.0);
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationOptions {
    pub samples: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            samples: 1000,
            alpha: 0.05,
            correction: Correction::BhFdr,
            seed: 0,
        }
    }
}

/// Null models for the two sides of an assist matrix.
#[derive(Debug, Clone, Copy)]
pub enum NullPair<'a> {
    /// Source and target are the same matrix; one draw serves both sides.
    Shared(&'a NullModel),
    Separate {
        source: &'a NullModel,
        target: &'a NullModel,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTest {
    pub source: ActivityCode,
    pub target: ActivityCode,
    pub observed: f64,
    pub p_value: f64,
    pub adjusted_p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedNetwork {
    pub source_layer: String,
    pub target_layer: String,
    pub source_period: i32,
    pub target_period: i32,
    pub alpha: f64,
    pub correction: Correction,
    pub samples: usize,
    pub seed: u64,
    /// Significant links only.
    pub edges: Vec<LinkTest>,
    /// Every tested cell (rows of defined source activities).
    pub tests: Vec<LinkTest>,
}

/// Relative slack for counting a draw as at least the observed value.
const TIE_SLACK: f64 = 1e-12;

fn aligned_rows(null: &NullModel, geos: &[String], activities: &[ActivityCode], side: &str) -> Result<Vec<usize>> {
    if null.activities != activities {
        return Err(Error::Data(format!("{side} null model activities differ from the assist matrix")));
    }
    let index: HashMap<&str, usize> = null.geos.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    geos.iter()
        .map(|g| {
            index
                .get(g.as_str())
                .copied()
                .ok_or_else(|| Error::Data(format!("{side} null model has no geo `{g}`")))
        })
        .collect()
}

/// One-sided Monte Carlo test of every defined assist-matrix cell:
/// `p = (1 + #{B* >= B}) / (samples + 1)`. Draw `i` uses ChaCha8 stream `i`
/// of the seed, so results do not depend on the thread count.
pub fn validate_links(b: &AssistMatrix, nulls: NullPair<'_>, opts: &ValidationOptions) -> Result<ValidatedNetwork> {
    if opts.samples < 100 {
        return Err(Error::Config(format!("need at least 100 samples, got {}", opts.samples)));
    }
    if !(opts.alpha > 0.0 && opts.alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1], got {}", opts.alpha)));
    }
    let (src_null, dst_null, shared) = match nulls {
        NullPair::Shared(n) => (n, n, true),
        NullPair::Separate { source, target } => (source, target, false),
    };
    let src_rows = aligned_rows(src_null, &b.candidate_geos, &b.source_activities, "source")?;
    let dst_rows = aligned_rows(dst_null, &b.candidate_geos, &b.target_activities, "target")?;
    let (ns, nt) = (b.source_activities.len(), b.target_activities.len());
    let observed = &b.values;
    let defined: Vec<bool> = (0..ns).map(|a| b.is_defined_row(a)).collect();

    let counts = (0..opts.samples as u64)
        .into_par_iter()
        .fold(
            || vec![0u32; ns * nt],
            |mut acc, draw| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(draw);
                let s = src_null.sample_rows(&src_rows, &mut rng);
                let core = if shared {
                    assist_core(&s, &s, ns, nt)
                } else {
                    let t = dst_null.sample_rows(&dst_rows, &mut rng);
                    assist_core(&s, &t, ns, nt)
                };
                for a in (0..ns).filter(|&a| defined[a]) {
                    for c in 0..nt {
                        let obs = observed[[a, c]];
                        if core.values[[a, c]] >= obs - TIE_SLACK * obs.abs() {
                            acc[a * nt + c] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; ns * nt],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            },
        );

    let cells: Vec<(usize, usize)> = (0..ns)
        .filter(|&a| defined[a])
        .flat_map(|a| (0..nt).map(move |c| (a, c)))
        .collect();
    let p: Vec<f64> = cells
        .iter()
        .map(|&(a, c)| (1.0 + counts[a * nt + c] as f64) / (opts.samples as f64 + 1.0))
        .collect();
    let adjusted = adjust_p_values(&p, opts.correction);
    let tests: Vec<LinkTest> = cells
        .iter()
        .zip(p.iter().zip(&adjusted))
        .map(|(&(a, c), (&pv, &adj))| LinkTest {
            source: b.source_activities[a].clone(),
            target: b.target_activities[c].clone(),
            observed: observed[[a, c]],
            p_value: pv,
            adjusted_p_value: adj,
            significant: adj < opts.alpha,
        })
        .collect();
    Ok(ValidatedNetwork {
        source_layer: b.source_layer.clone(),
        target_layer: b.target_layer.clone(),
        source_period: b.source_period,
        target_period: b.target_period,
        alpha: opts.alpha,
        correction: opts.correction,
        samples: opts.samples,
        seed: opts.seed,
        edges: tests.iter().filter(|t| t.significant).cloned().collect(),
        tests,
    })
}
