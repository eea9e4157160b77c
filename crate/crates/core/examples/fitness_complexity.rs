//! Fitness-Complexity iteration with both normalisations.
//!
//! cargo run --example fitness_complexity

use ecomplexity::bipartite::BinaryBipartite;
use ecomplexity::complexity::{fitness_complexity, FitnessOptions, Scale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ecomplexity::error::Result<()> {
    // Latent capability vs difficulty gives a roughly nested matrix.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cap: Vec<f64> = (0..40).map(|_| rng.gen()).collect();
    let diff: Vec<f64> = (0..80).map(|_| rng.gen()).collect();
    let rows: Vec<Vec<u8>> = cap
        .iter()
        .map(|c| diff.iter().map(|d| u8::from(c + 0.15 * rng.gen::<f64>() > *d)).collect())
        .collect();
    let m = BinaryBipartite::from_rows(&rows)?.prune_zero_degree();

    let (f, q) = fitness_complexity(&m, &FitnessOptions::default())?;
    let c = f.convergence.as_ref().unwrap();
    println!(
        "mean-one: {} iterations, converged {}, ranking stable for {:?}",
        c.iterations, c.converged, c.rank_stable_iterations
    );
    println!("top geos {:?}", &f.ranking()[..5]);
    println!("most complex activities {:?}", &q.ranking()[..5]);
    println!("{} geos flagged with near-zero fitness", f.flagged.len());

    let dummy = FitnessOptions {
        scale: Scale::Dummy,
        ..FitnessOptions::default()
    };
    let (fd, _) = fitness_complexity(&m, &dummy)?;
    println!("dummy-referenced top geos {:?}", &fd.ranking()[..5]);
    for w in &fd.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
