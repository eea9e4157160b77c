//! Bipartite Configuration Model: the maximum-entropy ensemble of binary
//! bipartite graphs whose expected degrees equal the observed ones.
//!
//! Link probabilities take the form `p_ga = x_g y_a / (1 + x_g y_a)`. Rows or
//! columns that are empty or full force `p` to 0 or 1; they are peeled off
//! analytically (repeatedly, since peeling can expose new forced lines) and the
//! multipliers of the remaining block are fitted by damped fixed-point
//! iteration.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{degrees, BinaryBipartite};
use crate::code::ActivityCode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BicmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for BicmOptions {
    fn default() -> Self {
        BicmOptions {
            tol: 1e-10,
            max_iter: 200_000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub geos: Vec<String>,
    pub activities: Vec<ActivityCode>,
    pub probabilities: Array2<f64>,
    /// `x_g`; 0 for empty rows, infinity for full rows.
    pub geo_multipliers: Vec<f64>,
    pub activity_multipliers: Vec<f64>,
    /// Largest absolute deviation between expected and observed degrees.
    pub residual: f64,
    pub iterations: usize,
}

impl NullModel {
    pub fn expected_diversification(&self) -> Vec<f64> {
        self.probabilities.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn expected_ubiquity(&self) -> Vec<f64> {
        self.probabilities.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Draws one matrix, returned as per-row lists of column indices, for the
    /// given rows of the model.
    pub fn sample_rows<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Vec<Vec<usize>> {
        rows.iter()
            .map(|&g| {
                self.probabilities
                    .row(g)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| rng.gen::<f64>() < p)
                    .map(|(a, _)| a)
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Line {
    Active,
    Empty,
    Full,
}

fn max_residual(p: &Array2<f64>, d: &[usize], u: &[usize]) -> f64 {
    let rows = p.rows().into_iter().zip(d).map(|(r, &k)| (r.sum() - k as f64).abs());
    let cols = p.columns().into_iter().zip(u).map(|(c, &k)| (c.sum() - k as f64).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

pub fn fit_bicm(m: &BinaryBipartite, opts: &BicmOptions) -> Result<NullModel> {
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Config("BiCM needs tol > 0 and damping in (0, 1]".into()));
    }
    let deg = degrees(m);
    let (ng, na) = (m.n_geos(), m.n_activities());
    let mut row_state = vec![Line::Active; ng];
    let mut col_state = vec![Line::Active; na];
    // Peel step of each line; a forced cell follows whichever line went first.
    let mut row_step = vec![usize::MAX; ng];
    let mut col_step = vec![usize::MAX; na];
    let mut step = 0;
    let mut d_res: Vec<usize> = deg.diversification.clone();
    let mut u_res: Vec<usize> = deg.ubiquity.clone();

    // Peel forced lines until nothing changes.
    loop {
        let n_rows = row_state.iter().filter(|&&s| s == Line::Active).count();
        let n_cols = col_state.iter().filter(|&&s| s == Line::Active).count();
        let mut changed = false;
        for g in 0..ng {
            if row_state[g] != Line::Active {
                continue;
            }
            if d_res[g] == 0 {
                row_state[g] = Line::Empty;
                row_step[g] = step;
                step += 1;
                changed = true;
            } else if d_res[g] == n_cols {
                row_state[g] = Line::Full;
                row_step[g] = step;
                step += 1;
                for a in 0..na {
                    if col_state[a] == Line::Active {
                        u_res[a] -= 1;
                    }
                }
                changed = true;
                break;
            }
        }
        if changed {
            continue;
        }
        for a in 0..na {
            if col_state[a] != Line::Active {
                continue;
            }
            if u_res[a] == 0 {
                col_state[a] = Line::Empty;
                col_step[a] = step;
                step += 1;
                changed = true;
            } else if u_res[a] == n_rows {
                col_state[a] = Line::Full;
                col_step[a] = step;
                step += 1;
                for g in 0..ng {
                    if row_state[g] == Line::Active {
                        d_res[g] -= 1;
                    }
                }
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    }

    let rows: Vec<usize> = (0..ng).filter(|&g| row_state[g] == Line::Active).collect();
    let cols: Vec<usize> = (0..na).filter(|&a| col_state[a] == Line::Active).collect();
    let mut x = vec![0.0; ng];
    let mut y = vec![0.0; na];
    for g in 0..ng {
        if row_state[g] == Line::Full {
            x[g] = f64::INFINITY;
        }
    }
    for a in 0..na {
        if col_state[a] == Line::Full {
            y[a] = f64::INFINITY;
        }
    }

    let mut iterations = 0;
    if !rows.is_empty() && !cols.is_empty() {
        let links: f64 = rows.iter().map(|&g| d_res[g] as f64).sum();
        let scale = links.sqrt();
        let mut xr: Vec<f64> = rows.iter().map(|&g| d_res[g] as f64 / scale).collect();
        let mut yr: Vec<f64> = cols.iter().map(|&a| u_res[a] as f64 / scale).collect();
        let dr: Vec<f64> = rows.iter().map(|&g| d_res[g] as f64).collect();
        let ur: Vec<f64> = cols.iter().map(|&a| u_res[a] as f64).collect();
        let residual_of = |xr: &[f64], yr: &[f64]| {
            let mut worst: f64 = 0.0;
            let mut col_sum = vec![0.0; yr.len()];
            for (i, &xi) in xr.iter().enumerate() {
                let mut s = 0.0;
                for (j, &yj) in yr.iter().enumerate() {
                    let p = xi * yj / (1.0 + xi * yj);
                    s += p;
                    col_sum[j] += p;
                }
                worst = worst.max((s - dr[i]).abs());
            }
            for (j, c) in col_sum.iter().enumerate() {
                worst = worst.max((c - ur[j]).abs());
            }
            worst
        };
        let mut residual = residual_of(&xr, &yr);
        while residual >= opts.tol {
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence {
                    what: "BiCM multiplier fit".into(),
                    iterations,
                    residual,
                });
            }
            let xn: Vec<f64> = xr
                .iter()
                .zip(&dr)
                .map(|(&xi, &di)| di / yr.iter().map(|&yj| yj / (1.0 + xi * yj)).sum::<f64>())
                .collect();
            let yn: Vec<f64> = yr
                .iter()
                .zip(&ur)
                .map(|(&yj, &uj)| uj / xr.iter().map(|&xi| xi / (1.0 + xi * yj)).sum::<f64>())
                .collect();
            let w = opts.damping;
            xr.iter_mut().zip(&xn).for_each(|(o, n)| *o = (1.0 - w) * *o + w * n);
            yr.iter_mut().zip(&yn).for_each(|(o, n)| *o = (1.0 - w) * *o + w * n);
            iterations += 1;
            residual = residual_of(&xr, &yr);
            if !residual.is_finite() {
                return Err(Error::Numerical("BiCM multipliers diverged".into()));
            }
        }
        for (k, &g) in rows.iter().enumerate() {
            x[g] = xr[k];
        }
        for (k, &a) in cols.iter().enumerate() {
            y[a] = yr[k];
        }
    }

    let probabilities = Array2::from_shape_fn((ng, na), |(g, a)| {
        let forced = if row_step[g] < col_step[a] { row_state[g] } else { col_state[a] };
        match forced {
            Line::Full => 1.0,
            Line::Empty => 0.0,
            Line::Active => {
                let xy = x[g] * y[a];
                xy / (1.0 + xy)
            }
        }
    });
    let residual = max_residual(&probabilities, &deg.diversification, &deg.ubiquity);
    Ok(NullModel {
        geos: m.geos.clone(),
        activities: m.activities.clone(),
        probabilities,
        geo_multipliers: x,
        activity_multipliers: y,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_is_certain() {
        let m = BinaryBipartite::from_rows(&[[1, 1, 1], [1, 1, 1]]).unwrap();
        let null = fit_bicm(&m, &BicmOptions::default()).unwrap();
        assert!(null.probabilities.iter().all(|&p| p == 1.0));
        assert_eq!(null.iterations, 0);
    }

    #[test]
    fn m0_is_fully_forced() {
        let m = BinaryBipartite::from_rows(&[[1, 1, 1], [1, 1, 0], [1, 0, 0]]).unwrap();
        let null = fit_bicm(&m, &BicmOptions::default()).unwrap();
        assert_eq!(null.probabilities, m.entries.mapv(f64::from));
        assert_eq!(null.expected_diversification(), vec![3.0, 2.0, 1.0]);
        assert_eq!(null.expected_ubiquity(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn interior_fit_matches_degrees() {
        let m = BinaryBipartite::from_rows(&[
            [1, 0, 1, 0, 0],
            [0, 1, 1, 1, 0],
            [1, 1, 0, 0, 1],
            [0, 0, 1, 0, 1],
        ])
        .unwrap();
        let null = fit_bicm(&m, &BicmOptions::default()).unwrap();
        assert!(null.residual < 1e-10);
        assert!(null.probabilities.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = BinaryBipartite::from_rows(&[[1, 0, 1, 0], [0, 1, 1, 0], [1, 1, 0, 1]]).unwrap();
        let opts = BicmOptions {
            max_iter: 1,
            ..Default::default()
        };
        assert!(matches!(fit_bicm(&m, &opts), Err(Error::NonConvergence { .. })));
    }
}
