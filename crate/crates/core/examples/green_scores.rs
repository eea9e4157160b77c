//! Green complexity index and potential from a green code list.
//!
//! cargo run --example green_scores

use ecomplexity::bipartite::{binarize, compute_rca};
use ecomplexity::code::{ActivityCode, Scheme};
use ecomplexity::complexity::eci_pci;
use ecomplexity::green::{green_scores, GcpWeighting, GreenOptions, PciTransform};
use ecomplexity::ingest::{tag_green, GreenClassification, WeightedBipartite};
use ecomplexity::relatedness::proximity;
use ndarray::array;

fn main() -> ecomplexity::error::Result<()> {
    let codes = ["Y02E 10/50", "Y02T 10/70", "H01L 31/04", "B60L 53/00", "A01B 1/00"];
    let w = WeightedBipartite::new(
        vec!["ITC4".into(), "DE21".into(), "FR10".into(), "ES30".into()],
        codes.iter().map(|c| ActivityCode::cpc(c)).collect::<Result<_, _>>()?,
        array![
            [9.0, 2.0, 7.0, 1.0, 0.5],
            [3.0, 8.0, 1.0, 6.0, 0.5],
            [1.0, 1.0, 2.0, 2.0, 6.0],
            [6.0, 0.5, 4.0, 0.5, 1.0]
        ],
        2018,
        "technology",
    )?;
    let list = GreenClassification::parse("# climate mitigation\nY02*\n", "y02", Scheme::Cpc)?;
    let mask = tag_green(&w, &list)?;
    println!("green activities: {}", mask.count());

    let m = binarize(&compute_rca(&w)?, 1.0)?;
    let (_, pci) = eci_pci(&m)?;
    let net = proximity(&m);
    for opts in [
        GreenOptions::default(),
        GreenOptions {
            pci_transform: PciTransform::Rank,
            gcp_weighting: GcpWeighting::PciRank,
        },
    ] {
        let s = green_scores(&m, &pci, &net, &mask, &opts)?;
        println!("{opts:?}");
        for (g, geo) in s.geos.iter().enumerate() {
            let gcp = s.gcp[g].map_or("NA".to_string(), |v| format!("{v:.3}"));
            println!("  {geo}: GCI {:.3}, GCP {gcp}, green specialisations {}", s.gci[g], s.green_specializations[g]);
        }
    }
    Ok(())
}
