//! Time-lagged assist matrix between two layers, filtered with BiCM null
//! models and Monte Carlo p-values.
//!
//! cargo run --release --example assist_validation

use ecomplexity::bicm::{fit_bicm, BicmOptions};
use ecomplexity::bipartite::BinaryBipartite;
use ecomplexity::relatedness::assist_matrix;
use ecomplexity::validation::{validate_links, NullPair, ValidationOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layer(rng: &mut ChaCha8Rng, rows: usize, cols: usize, planted: &[(usize, usize)], period: i32, name: &str) -> BinaryBipartite {
    let mut m: Vec<Vec<u8>> = (0..rows).map(|_| (0..cols).map(|_| u8::from(rng.gen::<f64>() < 0.3)).collect()).collect();
    for &(g, a) in planted {
        m[g][a] = 1;
    }
    BinaryBipartite::from_rows(&m).unwrap().with_meta(period, name)
}

fn main() -> ecomplexity::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    // Geos holding source activity a1 in 2010 also hold target activity b1 in 2015.
    let holders: Vec<usize> = (0..12).collect();
    let src_cells: Vec<_> = holders.iter().map(|&g| (g, 0)).collect();
    let dst_cells: Vec<_> = holders.iter().map(|&g| (g, 0)).collect();
    let mut src = layer(&mut rng, 60, 6, &src_cells, 2010, "technology");
    for g in 12..60 {
        src.entries[[g, 0]] = 0;
    }
    let mut dst = layer(&mut rng, 60, 6, &dst_cells, 2015, "trade");
    for g in 12..60 {
        dst.entries[[g, 0]] = u8::from(rng.gen::<f64>() < 0.1);
    }

    let b = assist_matrix(&src, &dst)?;
    println!("B(a1, b1) = {:.3}, lag {} years", b.values[[0, 0]], b.lag);

    let opts = BicmOptions::default();
    let (ns, nd) = (fit_bicm(&src, &opts)?, fit_bicm(&dst, &opts)?);
    let v = validate_links(
        &b,
        NullPair::Separate { source: &ns, target: &nd },
        &ValidationOptions {
            // With 36 tests the smallest p must clear 0.05 / 36 under BH.
            samples: 4999,
            ..ValidationOptions::default()
        },
    )?;
    println!("{} of {} links significant after {:?}", v.edges.len(), v.tests.len(), v.correction);
    let strongest = v.tests.iter().min_by(|x, y| x.p_value.total_cmp(&y.p_value)).unwrap();
    println!("smallest p: {} -> {} (p = {:.4})", strongest.source, strongest.target, strongest.p_value);
    for e in v.edges.iter().take(5) {
        println!("{} -> {}: B = {:.3}, p = {:.4}, adjusted {:.4}", e.source, e.target, e.observed, e.p_value, e.adjusted_p_value);
    }
    Ok(())
}
