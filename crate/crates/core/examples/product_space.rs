//! Proximity network, relatedness density and the thresholded edge list.
//!
//! cargo run --example product_space

use ecomplexity::bipartite::BinaryBipartite;
use ecomplexity::export::proximity_graph;
use ecomplexity::relatedness::{proximity, relatedness_density};

fn main() -> ecomplexity::error::Result<()> {
    let m = BinaryBipartite::from_rows(&[
        [1, 1, 0, 0, 1],
        [1, 1, 1, 0, 0],
        [0, 1, 1, 1, 0],
        [0, 0, 1, 1, 0],
        [1, 0, 0, 0, 1],
    ])?;
    let net = proximity(&m);
    for row in net.phi.rows() {
        println!("{:.2?}", row.to_vec());
    }
    for (a, b, w) in net.edges(0.5) {
        println!("{} -- {} ({w:.3})", net.activities[a], net.activities[b]);
    }

    let density = relatedness_density(&net, &m)?;
    println!("density of g1 towards each activity: {:.3?}", density.row(0).to_vec());

    let graph = proximity_graph(&net, 0.5);
    println!("graph document: {} nodes, {} edges", graph.nodes.len(), graph.edges.len());
    Ok(())
}
