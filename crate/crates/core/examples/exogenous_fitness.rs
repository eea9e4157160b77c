//! Fitness from externally supplied complexities, and sectoral fitness on a
//! subset of activities.
//!
//! cargo run --example exogenous_fitness

use ecomplexity::bipartite::BinaryBipartite;
use ecomplexity::complexity::{exogenous_fitness, fitness_complexity, sectoral_fitness, FitnessOptions};
use ecomplexity::ingest::ActivityMask;

fn main() -> ecomplexity::error::Result<()> {
    let full = BinaryBipartite::from_rows(&[
        [1, 1, 1, 1, 0],
        [1, 1, 0, 0, 1],
        [1, 0, 0, 1, 0],
        [0, 1, 0, 0, 0],
    ])?;
    let (_, q) = fitness_complexity(&full, &FitnessOptions::default())?;
    println!("reference complexities {:.3?}", q.values);

    // A regional matrix over some of the same activities plus one unknown code.
    let mut regions = BinaryBipartite::from_rows(&[[1, 1, 0], [0, 1, 1], [1, 0, 1]])?;
    regions.geos = vec!["north".into(), "centre".into(), "south".into()];
    regions.activities.truncate(2);
    regions.activities.push(ecomplexity::code::ActivityCode::custom("local"));
    let f = exogenous_fitness(&regions, &q)?;
    println!("exogenous fitness {:.3?}", f.values);
    for w in &f.warnings {
        println!("warning: {w}");
    }

    let only_a3 = ActivityMask::from_flags("a3-only", full.activities.clone(), vec![false, false, true, false, false])?;
    let s = sectoral_fitness(&full, &q, &only_a3)?;
    println!("sectoral fitness on a3: {:.3?}", s.values);
    Ok(())
}
