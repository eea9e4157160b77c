//! Method of Reflections, ECI/PCI, Fitness-Complexity and its exogenous and
//! sectoral variants.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bipartite::BinaryBipartite;
use crate::error::{Error, Result};
use crate::ingest::ActivityMask;
use crate::numeric::{compensated_sum, descending_order, mean, pearson, standardize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreAxis {
    Geo,
    Activity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "subset")]
pub enum Method {
    Reflections,
    Eci,
    Pci,
    Fitness,
    Complexity,
    ExogenousFitness,
    SectoralFitness(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reference", rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    Standardized,
    MeanOne,
    DummyReferenced(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Consecutive final iterations with unchanged rankings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_stable_iterations: Option<usize>,
    /// Largest |mean - 1| of the normalised iterates over the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_mean_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<(f64, f64)>,
    pub non_unique: bool,
}

/// Scores for one axis of a bipartite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub axis: ScoreAxis,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
    pub method: Method,
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceRecord>,
    /// Ids singled out by the solver (quasi-zero fitness, extremal complexity).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ScoreVector {
    pub fn new(axis: ScoreAxis, ids: Vec<String>, values: Vec<f64>, method: Method, normalization: Normalization) -> Self {
        ScoreVector {
            axis,
            ids,
            values,
            method,
            normalization,
            convergence: None,
            flagged: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|i| i == id).map(|k| self.values[k])
    }

    pub fn lookup(&self) -> HashMap<&str, f64> {
        self.ids.iter().map(String::as_str).zip(self.values.iter().copied()).collect()
    }

    /// Ids ordered by descending score.
    pub fn ranking(&self) -> Vec<&str> {
        descending_order(&self.values).into_iter().map(|i| self.ids[i].as_str()).collect()
    }
}

fn geo_ids(m: &BinaryBipartite) -> Vec<String> {
    m.geos.clone()
}

fn activity_ids(m: &BinaryBipartite) -> Vec<String> {
    m.activities.iter().map(ToString::to_string).collect()
}

/// Row-average of activity values: `(1/d_g) sum_a M_ga x_a`.
fn average_over_rows(rows: &[Vec<usize>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().map(|&a| x[a]).sum::<f64>() / r.len() as f64)
        .collect()
}

/// Iterates of the Method of Reflections.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionsTrace {
    /// `geo[n]` is `k_g^(n)`.
    pub geo: Vec<Vec<f64>>,
    pub activity: Vec<Vec<f64>>,
    /// Standardised iterates, `None` when the iterate is constant.
    pub geo_standardized: Vec<Option<Vec<f64>>>,
    pub activity_standardized: Vec<Option<Vec<f64>>>,
}

impl ReflectionsTrace {
    pub fn iterations(&self) -> usize {
        self.geo.len() - 1
    }
}

/// Runs `iterations` reflection steps from diversification and ubiquity.
pub fn reflections(m: &BinaryBipartite, iterations: usize) -> Result<ReflectionsTrace> {
    let deg = m.require_positive_degrees()?;
    let kg0: Vec<f64> = deg.diversification.iter().map(|&d| d as f64).collect();
    let ka0: Vec<f64> = deg.ubiquity.iter().map(|&u| u as f64).collect();
    reflections_from(m, kg0, ka0, iterations)
}

/// Runs reflection steps from arbitrary starting vectors.
///
/// Standardised copies follow the re-standardised recurrence
/// `s^(n) = std(A s^(n-1))`. The averaging operators fix constants, so this
/// equals standardising the raw iterate in exact arithmetic while staying
/// accurate after the raw iterate has collapsed onto its constant limit.
pub fn reflections_from(m: &BinaryBipartite, geo0: Vec<f64>, activity0: Vec<f64>, iterations: usize) -> Result<ReflectionsTrace> {
    m.require_positive_degrees()?;
    if geo0.len() != m.n_geos() || activity0.len() != m.n_activities() {
        return Err(Error::Data("starting vectors do not match the matrix shape".into()));
    }
    let rows = m.row_lists();
    let cols = m.col_lists();
    let mut trace = ReflectionsTrace {
        geo_standardized: vec![standardize(&geo0)],
        activity_standardized: vec![standardize(&activity0)],
        geo: vec![geo0],
        activity: vec![activity0],
    };
    for n in 1..=iterations {
        let kg = average_over_rows(&rows, &trace.activity[n - 1]);
        let ka = average_over_rows(&cols, &trace.geo[n - 1]);
        let sg = trace.activity_standardized[n - 1]
            .as_ref()
            .and_then(|s| standardize(&average_over_rows(&rows, s)));
        let sa = trace.geo_standardized[n - 1]
            .as_ref()
            .and_then(|s| standardize(&average_over_rows(&cols, s)));
        trace.geo.push(kg);
        trace.activity.push(ka);
        trace.geo_standardized.push(sg);
        trace.activity_standardized.push(sa);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenSolver {
    /// Dense below 500 nodes on the smaller side, power iteration above.
    #[default]
    Auto,
    Dense,
    Power,
}

const DENSE_LIMIT: usize = 500;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;
const DEGENERACY_GAP: f64 = 1e-9;
/// Correlations this close to zero are treated as no sign information.
const SIGN_ANCHOR_EPS: f64 = 1e-9;

/// Symmetrised transition operator `D^-1/2 M U^-1 M^T D^-1/2` on one side.
struct SymmetricTransition<'a> {
    /// Lists of the projected side (rows of the operator).
    own: &'a [Vec<usize>],
    /// Lists of the other side.
    other: &'a [Vec<usize>],
    own_deg: Vec<f64>,
    other_deg: Vec<f64>,
}

impl SymmetricTransition<'_> {
    fn dim(&self) -> usize {
        self.own.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = x.iter().zip(&self.own_deg).map(|(v, d)| v / d.sqrt()).collect();
        let mid: Vec<f64> = self
            .other
            .iter()
            .zip(&self.other_deg)
            .map(|(list, u)| list.iter().map(|&i| scaled[i]).sum::<f64>() / u)
            .collect();
        self.own
            .iter()
            .zip(&self.own_deg)
            .map(|(list, d)| list.iter().map(|&a| mid[a]).sum::<f64>() / d.sqrt())
            .collect()
    }

    fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut s = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (list, u) in self.other.iter().zip(&self.other_deg) {
            for &i in list {
                for &j in list {
                    s[(i, j)] += 1.0 / u;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] /= (self.own_deg[i] * self.own_deg[j]).sqrt();
            }
        }
        s
    }

    fn leading(&self) -> Vec<f64> {
        let v: Vec<f64> = self.own_deg.iter().map(|d| d.sqrt()).collect();
        normalized(&v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Second and third eigenpairs of the symmetric transition operator.
struct Spectrum {
    vector: Vec<f64>,
    lambda2: f64,
    lambda3: f64,
    converged: bool,
    iterations: usize,
    residual: f64,
}

fn dense_spectrum(op: &SymmetricTransition) -> Spectrum {
    let n = op.dim();
    let e1 = op.leading();
    let mut s = op.dense();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] -= e1[i] * e1[j];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda2 = eig.eigenvalues[order[0]];
    let lambda3 = order.get(1).map_or(0.0, |&k| eig.eigenvalues[k]);
    let vector = eig.eigenvectors.column(order[0]).iter().copied().collect();
    Spectrum {
        vector,
        lambda2,
        lambda3,
        converged: true,
        iterations: 0,
        residual: 0.0,
    }
}

fn power_on_complement(op: &SymmetricTransition, basis: &[Vec<f64>]) -> (Vec<f64>, f64, bool, usize, f64) {
    let n = op.dim();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    project_out(&mut x, basis);
    if dot(&x, &x) == 0.0 {
        return (x, 0.0, true, 0, 0.0);
    }
    x = normalized(&x);
    let mut residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let mut y = op.apply(&x);
        project_out(&mut y, basis);
        let norm = dot(&y, &y).sqrt();
        if norm == 0.0 {
            return (x, 0.0, true, it, 0.0);
        }
        y.iter_mut().for_each(|v| *v /= norm);
        residual = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if residual < POWER_TOL {
            let lambda = dot(&x, &op.apply(&x));
            return (x, lambda, true, it, residual);
        }
    }
    let lambda = dot(&x, &op.apply(&x));
    (x, lambda, false, POWER_MAX_ITER, residual)
}

fn power_spectrum(op: &SymmetricTransition) -> Spectrum {
    let e1 = op.leading();
    let (v2, lambda2, converged, iterations, residual) = power_on_complement(op, std::slice::from_ref(&e1));
    let (_, lambda3, _, _, _) = if op.dim() > 2 {
        power_on_complement(op, &[e1, v2.clone()])
    } else {
        (Vec::new(), 0.0, true, 0, 0.0)
    };
    Spectrum {
        vector: v2,
        lambda2,
        lambda3,
        converged,
        iterations,
        residual,
    }
}

/// ECI (geo) and PCI (activity): standardised second eigenvectors of the
/// reflection transition matrices, signed so ECI correlates non-negatively
/// with diversification and PCI non-positively with ubiquity.
pub fn eci_pci(m: &BinaryBipartite) -> Result<(ScoreVector, ScoreVector)> {
    eci_pci_with(m, EigenSolver::Auto)
}

pub fn eci_pci_with(m: &BinaryBipartite, solver: EigenSolver) -> Result<(ScoreVector, ScoreVector)> {
    let deg = m.require_positive_degrees()?;
    if m.n_geos() < 2 || m.n_activities() < 2 {
        return Err(Error::Data("ECI/PCI need at least two geos and two activities".into()));
    }
    let rows = m.row_lists();
    let cols = m.col_lists();
    let d: Vec<f64> = deg.diversification.iter().map(|&x| x as f64).collect();
    let u: Vec<f64> = deg.ubiquity.iter().map(|&x| x as f64).collect();
    let geo_side = m.n_geos() <= m.n_activities();
    let op = if geo_side {
        SymmetricTransition {
            own: &rows,
            other: &cols,
            own_deg: d.clone(),
            other_deg: u.clone(),
        }
    } else {
        SymmetricTransition {
            own: &cols,
            other: &rows,
            own_deg: u.clone(),
            other_deg: d.clone(),
        }
    };
    let use_dense = match solver {
        EigenSolver::Dense => true,
        EigenSolver::Power => false,
        EigenSolver::Auto => op.dim() < DENSE_LIMIT,
    };
    let spec = if use_dense { dense_spectrum(&op) } else { power_spectrum(&op) };

    // Undo the symmetrisation, then carry the eigenvector to the other side.
    let own_vec: Vec<f64> = spec.vector.iter().zip(&op.own_deg).map(|(w, dg)| w / dg.sqrt()).collect();
    let other_vec = average_over_rows(op.other, &own_vec);
    let (geo_vec, act_vec) = if geo_side { (own_vec, other_vec) } else { (other_vec, own_vec) };

    let degenerate = || Error::Numerical("second eigenvector has no spread; spectrum is degenerate".into());
    let mut eci = standardize(&geo_vec).ok_or_else(degenerate)?;
    let mut pci = standardize(&act_vec).ok_or_else(degenerate)?;
    // Both vectors come from one eigenvector, so they share one sign. The
    // ubiquity anchor only decides when diversification carries no signal.
    let neg_u: Vec<f64> = u.iter().map(|x| -x).collect();
    let anchor = [pearson(&eci, &d), pearson(&pci, &neg_u)]
        .into_iter()
        .find(|c| c.abs() > SIGN_ANCHOR_EPS)
        .unwrap_or(0.0);
    if anchor < 0.0 {
        eci.iter_mut().for_each(|v| *v = -*v);
        pci.iter_mut().for_each(|v| *v = -*v);
    }

    let record = ConvergenceRecord {
        iterations: spec.iterations,
        residual: spec.residual,
        converged: spec.converged,
        rank_stable_iterations: None,
        max_mean_deviation: None,
        eigenvalues: Some((spec.lambda2, spec.lambda3)),
        non_unique: spec.lambda2 - spec.lambda3 < DEGENERACY_GAP,
    };
    let mut warnings = Vec::new();
    if record.non_unique {
        warnings.push(format!(
            "second eigenvalue {:.12} is degenerate with {:.12}; eigenvector not unique",
            spec.lambda2, spec.lambda3
        ));
    }
    if !record.converged {
        warnings.push("power iteration reached its iteration cap".into());
    }
    let mut eci_sv = ScoreVector::new(ScoreAxis::Geo, geo_ids(m), eci, Method::Eci, Normalization::Standardized);
    eci_sv.convergence = Some(record.clone());
    eci_sv.warnings = warnings.clone();
    let mut pci_sv = ScoreVector::new(ScoreAxis::Activity, activity_ids(m), pci, Method::Pci, Normalization::Standardized);
    pci_sv.convergence = Some(record);
    pci_sv.warnings = warnings;
    Ok((eci_sv, pci_sv))
}

/// Pairs of geos whose ECI agrees within `tol` although their diversification
/// differs: the averaging paradox of ECI made visible.
pub fn eci_average_ties(m: &BinaryBipartite, eci: &ScoreVector, tol: f64) -> Vec<(String, String)> {
    let deg = crate::bipartite::degrees(m);
    let mut out = Vec::new();
    for i in 0..m.n_geos() {
        for j in (i + 1)..m.n_geos() {
            if deg.diversification[i] != deg.diversification[j] && (eci.values[i] - eci.values[j]).abs() <= tol {
                out.push((m.geos[i].clone(), m.geos[j].clone()));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    MeanOne,
    /// Fitness relative to a synthetic geo specialised in every activity.
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub scale: Scale,
    /// Lower bound for normalised fitness during iteration.
    pub floor: f64,
}

impl Default for FitnessOptions {
    fn default() -> Self {
        FitnessOptions {
            tol: 1e-10,
            max_iter: 10_000,
            scale: Scale::MeanOne,
            floor: 1e-12,
        }
    }
}

const RANK_STABLE_WINDOW: usize = 10;
const EXTREMAL_COMPLEXITY: f64 = 1e9;
pub const DUMMY_GEO: &str = "__dummy__";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub iteration: usize,
    pub max_relative_change: f64,
    pub mean_fitness: f64,
    pub mean_complexity: f64,
}

/// Step-by-step Fitness-Complexity map with mean-one normalisation of both
/// vectors at every step.
pub struct FitnessComplexityIteration {
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
    floor: f64,
    fitness: Vec<f64>,
    complexity: Vec<f64>,
    iteration: usize,
}

impl FitnessComplexityIteration {
    pub fn new(m: &BinaryBipartite, floor: f64) -> Result<Self> {
        m.require_positive_degrees()?;
        Ok(FitnessComplexityIteration {
            rows: m.row_lists(),
            cols: m.col_lists(),
            floor,
            fitness: vec![1.0; m.n_geos()],
            complexity: vec![1.0; m.n_activities()],
            iteration: 0,
        })
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn complexity(&self) -> &[f64] {
        &self.complexity
    }

    /// Replaces the current state (values are used as given).
    pub fn set_state(&mut self, fitness: Vec<f64>, complexity: Vec<f64>) {
        self.fitness = fitness;
        self.complexity = complexity;
    }

    pub fn step(&mut self) -> Result<StepInfo> {
        let mut f: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&a| self.complexity[a]).sum())
            .collect();
        let fm = mean(&f);
        f.iter_mut().for_each(|v| *v = (*v / fm).max(self.floor));
        let fm = mean(&f);
        f.iter_mut().for_each(|v| *v /= fm);

        let mut q: Vec<f64> = self
            .cols
            .iter()
            .map(|c| 1.0 / c.iter().map(|&g| 1.0 / f[g]).sum::<f64>())
            .collect();
        let qm = mean(&q);
        q.iter_mut().for_each(|v| *v /= qm);
        if let Some(a) = q.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "complexity of activity #{a} left the floating-point range at iteration {}",
                self.iteration + 1
            )));
        }

        let rel = |new: &[f64], old: &[f64]| {
            new.iter()
                .zip(old)
                .map(|(n, o)| ((n - o) / o).abs())
                .fold(0.0, f64::max)
        };
        let change = rel(&f, &self.fitness).max(rel(&q, &self.complexity));
        self.fitness = f;
        self.complexity = q;
        self.iteration += 1;
        Ok(StepInfo {
            iteration: self.iteration,
            max_relative_change: change,
            mean_fitness: mean(&self.fitness),
            mean_complexity: mean(&self.complexity),
        })
    }
}

struct FitnessRun {
    fitness: Vec<f64>,
    complexity: Vec<f64>,
    record: ConvergenceRecord,
}

fn run_fitness(m: &BinaryBipartite, opts: &FitnessOptions) -> Result<FitnessRun> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let mut it = FitnessComplexityIteration::new(m, opts.floor)?;
    let mut prev_order: Option<(Vec<usize>, Vec<usize>)> = None;
    let mut stable = 0;
    let mut max_dev: f64 = 0.0;
    let mut last = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        let info = it.step()?;
        iterations = info.iteration;
        last = info.max_relative_change;
        max_dev = max_dev
            .max((info.mean_fitness - 1.0).abs())
            .max((info.mean_complexity - 1.0).abs());
        let order = (descending_order(it.fitness()), descending_order(it.complexity()));
        if prev_order.as_ref() == Some(&order) {
            stable += 1;
        } else {
            stable = 0;
        }
        prev_order = Some(order);
        // Declared only once rankings have also settled.
        if last < opts.tol && stable >= RANK_STABLE_WINDOW {
            converged = true;
            break;
        }
    }
    Ok(FitnessRun {
        fitness: it.fitness,
        complexity: it.complexity,
        record: ConvergenceRecord {
            iterations,
            residual: last,
            converged,
            rank_stable_iterations: Some(stable),
            max_mean_deviation: Some(max_dev),
            eigenvalues: None,
            non_unique: false,
        },
    })
}

/// Fitness (geo) and Complexity (activity) fixed point.
pub fn fitness_complexity(m: &BinaryBipartite, opts: &FitnessOptions) -> Result<(ScoreVector, ScoreVector)> {
    m.require_positive_degrees()?;
    let (run, fitness, normalization) = match opts.scale {
        Scale::MeanOne => {
            let run = run_fitness(m, opts)?;
            let f = run.fitness.clone();
            (run, f, Normalization::MeanOne)
        }
        Scale::Dummy => {
            let mut aug = m.entries.clone();
            aug.push_row(ndarray::Array1::from_elem(m.n_activities(), 1u8).view())
                .map_err(|e| Error::Data(e.to_string()))?;
            let mut geos = m.geos.clone();
            geos.push(DUMMY_GEO.to_string());
            let augmented = BinaryBipartite::new(geos, m.activities.clone(), aug)?;
            let run = run_fitness(&augmented, opts)?;
            let reference = run.fitness[m.n_geos()];
            let f = run.fitness[..m.n_geos()].iter().map(|v| v / reference).collect();
            (run, f, Normalization::DummyReferenced(DUMMY_GEO.to_string()))
        }
    };

    let mut warnings = Vec::new();
    if !run.record.converged {
        warnings.push(format!(
            "not converged after {} iterations (max relative change {:e})",
            run.record.iterations, run.record.residual
        ));
    }
    if !run.record.converged && run.record.rank_stable_iterations.unwrap_or(0) < RANK_STABLE_WINDOW {
        warnings.push(format!("rankings changed within the last {RANK_STABLE_WINDOW} iterations"));
    }
    let quasi_zero: Vec<String> = run.fitness[..m.n_geos()]
        .iter()
        .zip(&m.geos)
        .filter(|(f, _)| **f <= 2.0 * opts.floor)
        .map(|(_, g)| g.clone())
        .collect();
    let extremal: Vec<String> = run
        .complexity
        .iter()
        .zip(activity_ids(m))
        .filter(|(q, _)| **q > EXTREMAL_COMPLEXITY || **q < 1.0 / EXTREMAL_COMPLEXITY)
        .map(|(_, a)| a)
        .collect();
    if !quasi_zero.is_empty() {
        warnings.push(format!("{} geo(s) at the fitness floor", quasi_zero.len()));
    }
    if !extremal.is_empty() {
        warnings.push(format!("{} activity complexity value(s) flagged extremal", extremal.len()));
    }

    let mut f_sv = ScoreVector::new(ScoreAxis::Geo, geo_ids(m), fitness, Method::Fitness, normalization);
    f_sv.convergence = Some(run.record.clone());
    f_sv.flagged = quasi_zero;
    f_sv.warnings = warnings.clone();
    let mut q_sv = ScoreVector::new(
        ScoreAxis::Activity,
        activity_ids(m),
        run.complexity,
        Method::Complexity,
        Normalization::MeanOne,
    );
    q_sv.convergence = Some(run.record);
    q_sv.flagged = extremal;
    q_sv.warnings = warnings;
    Ok((f_sv, q_sv))
}

fn mean_one(values: &mut [f64], what: &str) -> Result<()> {
    let m = compensated_sum(values.iter().copied()) / values.len() as f64;
    if !(m > 0.0) {
        return Err(Error::Data(format!("{what}: every geo scores zero, cannot normalise")));
    }
    values.iter_mut().for_each(|v| *v /= m);
    Ok(())
}

/// Fitness half-step with externally supplied activity complexities,
/// normalised to mean one across the geos of `m_sub`.
pub fn exogenous_fitness(m_sub: &BinaryBipartite, q_ref: &ScoreVector) -> Result<ScoreVector> {
    if q_ref.axis != ScoreAxis::Activity {
        return Err(Error::Data("reference complexity must be an activity score vector".into()));
    }
    let lookup = q_ref.lookup();
    let ids = activity_ids(m_sub);
    let weights: Vec<Option<f64>> = ids.iter().map(|id| lookup.get(id.as_str()).copied()).collect();
    let missing: Vec<&String> = ids.iter().zip(&weights).filter(|(_, w)| w.is_none()).map(|(id, _)| id).collect();
    if missing.len() == ids.len() {
        return Err(Error::EmptyIntersection(
            "no activity of the sub-national matrix has a reference complexity".into(),
        ));
    }
    let mut values: Vec<f64> = m_sub
        .row_lists()
        .iter()
        .map(|r| r.iter().filter_map(|&a| weights[a]).sum())
        .collect();
    mean_one(&mut values, "exogenous fitness")?;
    let mut sv = ScoreVector::new(ScoreAxis::Geo, geo_ids(m_sub), values, Method::ExogenousFitness, Normalization::MeanOne);
    if !missing.is_empty() {
        sv.warnings.push(format!(
            "dropped {} activit{} missing from the reference: {}",
            missing.len(),
            if missing.len() == 1 { "y" } else { "ies" },
            missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
    }
    Ok(sv)
}

/// Fitness restricted to a subset of activities, with complexities taken from
/// a run over the full activity set.
pub fn sectoral_fitness(m: &BinaryBipartite, q_full: &ScoreVector, subset: &ActivityMask) -> Result<ScoreVector> {
    subset.check_against(&m.activities)?;
    let lookup = q_full.lookup();
    let ids = activity_ids(m);
    let mut weights = vec![0.0; ids.len()];
    for a in subset.selected() {
        weights[a] = *lookup
            .get(ids[a].as_str())
            .ok_or_else(|| Error::Data(format!("activity {} has no complexity in the full run", ids[a])))?;
    }
    let mut values: Vec<f64> = m
        .row_lists()
        .iter()
        .map(|r| r.iter().map(|&a| weights[a]).sum())
        .collect();
    mean_one(&mut values, "sectoral fitness")?;
    Ok(ScoreVector::new(
        ScoreAxis::Geo,
        geo_ids(m),
        values,
        Method::SectoralFitness(subset.name.clone()),
        Normalization::MeanOne,
    ))
}
