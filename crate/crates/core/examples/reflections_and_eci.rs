//! Method of Reflections and the eigenvector form of ECI/PCI on a small
//! nested matrix.
//!
//! cargo run --example reflections_and_eci

use ecomplexity::bipartite::BinaryBipartite;
use ecomplexity::complexity::{eci_average_ties, eci_pci, reflections};

fn main() -> ecomplexity::error::Result<()> {
    let m = BinaryBipartite::from_rows(&[
        [1, 1, 1, 1, 1],
        [1, 1, 1, 0, 0],
        [1, 1, 0, 1, 0],
        [1, 0, 0, 0, 0],
    ])?;

    let trace = reflections(&m, 12)?;
    for n in [0, 1, 2] {
        println!("k_g^({n}) = {:?}", trace.geo[n]);
    }
    // Even iterations converge, after standardisation, to ECI.
    println!("standardised k_g^(12) = {:.4?}", trace.geo_standardized[12]);

    let (eci, pci) = eci_pci(&m)?;
    println!("ECI {:.4?}", eci.values);
    println!("PCI {:.4?}", pci.values);
    println!("ranking {:?}", eci.ranking());
    if let Some(c) = &eci.convergence {
        println!("lambda2 = {:.6}, lambda3 = {:.6}, non-unique: {}", c.eigenvalues.unwrap().0, c.eigenvalues.unwrap().1, c.non_unique);
    }
    let ties = eci_average_ties(&m, &eci, 1e-9);
    println!("ECI ties between differently diversified geos: {ties:?}");
    Ok(())
}
