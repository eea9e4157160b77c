//! Small numeric helpers shared across modules.

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let var = compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64;
    (m, var.sqrt())
}

/// Mean-zero, unit (population) variance copy. `None` when the spread is
/// numerically zero.
pub fn standardize(xs: &[f64]) -> Option<Vec<f64>> {
    if xs.is_empty() {
        return None;
    }
    let (m, s) = mean_std(xs);
    if !(s > 1e-13 * (1.0 + m.abs())) {
        return None;
    }
    Some(xs.iter().map(|x| (x - m) / s).collect())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, sx) = mean_std(xs);
    let (my, sy) = mean_std(ys);
    if sx == 0.0 || sy == 0.0 {
        return 0.0;
    }
    let cov = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / xs.len() as f64;
    cov / (sx * sy)
}

/// Indices sorted by descending value, ties by index.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// 1-based competition ranks by descending value (NaN ranks last).
pub fn descending_ranks(values: &[f64]) -> Vec<usize> {
    let order = descending_order(values);
    let mut ranks = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// Formats with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    let t = s.trim();
    if t == "NA" || t.is_empty() {
        Some(f64::NAN)
    } else {
        t.parse().ok()
    }
}
