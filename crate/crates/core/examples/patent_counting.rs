//! Patent files: fractional and full counting, regional aggregation and
//! green patent selection.
//!
//! cargo run --example patent_counting

use ecomplexity::code::Scheme;
use ecomplexity::ingest::{
    count_patents, green_patents, parse_patents, CountingMode, GeoLevel, GreenClassification, ParseOptions, PatentGreenRule,
};

const PATENTS: &str = "\
patent_id,year,codes,locations
EP1,2016,Y02E 10/50;H01L 31/04,ITC4C;ITC4C;DE212
EP2,2016,B60L 53/00,DE212
EP3,2017,Y02T 10/70;B60L 53/00,FR101;ITC4D
";

fn main() -> ecomplexity::error::Result<()> {
    let parsed = parse_patents(PATENTS.as_bytes(), Scheme::Cpc, &ParseOptions::default())?;
    for mode in [CountingMode::Fractional, CountingMode::Full] {
        println!("{mode:?}, NUTS-2, CPC subclass:");
        for r in count_patents(&parsed.records, mode, GeoLevel::Prefix(4), Some(4))? {
            println!("  {} {} {} {:.3}", r.period, r.geo, r.activity, r.value);
        }
    }
    let y02 = GreenClassification::parse("Y02*\n", "y02", Scheme::Cpc)?;
    println!("green patents: {:?}", green_patents(&parsed.records, &y02, PatentGreenRule::Any));
    Ok(())
}
