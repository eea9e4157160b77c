#![allow(dead_code)]

use ecomplexity::bipartite::BinaryBipartite;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn m0() -> BinaryBipartite {
    BinaryBipartite::from_rows(&[[1, 1, 1], [1, 1, 0], [1, 0, 0]]).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bernoulli(fill) matrix with no empty row or column (resampled until so).
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, fill: f64) -> BinaryBipartite {
    loop {
        let entries = Array2::from_shape_fn((rows, cols), |_| u8::from(rng.gen::<f64>() < fill));
        let m = BinaryBipartite::from_rows(
            &entries.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        if m.require_positive_degrees().is_ok() {
            return m;
        }
    }
}

/// Bernoulli(fill) matrix, empty lines allowed.
pub fn random_matrix_any<R: Rng>(rng: &mut R, rows: usize, cols: usize, fill: f64) -> BinaryBipartite {
    let entries = Array2::from_shape_fn((rows, cols), |_| u8::from(rng.gen::<f64>() < fill));
    BinaryBipartite::from_rows(&entries.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Writes `n_geos x n_products x years` trade records (`geo,activity,value,year`)
/// with a latent capability/difficulty structure so RCA has a nested pattern.
pub fn write_trade_file(path: &std::path::Path, n_geos: usize, n_products: usize, years: std::ops::Range<i32>, seed: u64) {
    use std::io::Write;
    let mut r = rng(seed);
    let capability: Vec<f64> = (0..n_geos).map(|_| r.gen()).collect();
    let difficulty: Vec<f64> = (0..n_products).map(|_| r.gen()).collect();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    writeln!(w, "geo,activity,value,year").unwrap();
    for year in years {
        for (g, c) in capability.iter().enumerate() {
            for (a, d) in difficulty.iter().enumerate() {
                let base = if c > d { 50.0 } else { 2.0 };
                let v: f64 = base * (1.0 + 4.0 * r.gen::<f64>()) * (1.0 + 0.01 * (year % 7) as f64);
                writeln!(w, "G{g:03},{:06},{v:.4},{year}", 10_000 + a * 89).unwrap();
            }
        }
    }
}

/// Synthetic patents: 1-10 locations (with repeats) and 1-4 CPC codes each.
pub fn random_patents<R: Rng>(rng: &mut R, n: usize) -> Vec<ecomplexity::ingest::PatentRecord> {
    use ecomplexity::code::ActivityCode;
    let codes = ["Y02E 10/50", "Y02E 10/70", "H01L 31/04", "B60L 53/00", "F03D 1/00", "A01B 1/00"];
    (0..n)
        .map(|i| {
            let n_loc = rng.gen_range(1..=10);
            let n_codes = rng.gen_range(1..=4);
            ecomplexity::ingest::PatentRecord {
                patent_id: format!("P{i}"),
                period: 2000 + rng.gen_range(0..3),
                codes: (0..n_codes)
                    .map(|_| ActivityCode::cpc(codes[rng.gen_range(0..codes.len())]).unwrap())
                    .collect(),
                locations: (0..n_loc).map(|_| format!("R{:02}", rng.gen_range(0..30))).collect(),
            }
        })
        .collect()
}
