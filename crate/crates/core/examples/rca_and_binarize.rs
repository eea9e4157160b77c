//! Records -> weighted matrix -> RCA -> binary specialisation matrix.
//!
//! cargo run --example rca_and_binarize

use ecomplexity::bipartite::{binarize, compute_rca, degrees};
use ecomplexity::ingest::{build_matrix, parse_records, ParseOptions, RecordSchema};

const TRADE: &str = "\
geo,activity,value,year
DEU,850231,120,2019
DEU,870323,900,2019
DEU,080390,5,2019
ITA,850231,40,2019
ITA,870323,210,2019
ITA,080390,12,2019
ECU,080390,800,2019
ECU,870323,3,2019
ECU,850239,1,2019
DEU,850231,130,2020
";

fn main() -> ecomplexity::error::Result<()> {
    let parsed = parse_records(TRADE.as_bytes(), &RecordSchema::default(), &ParseOptions::default())?;
    println!("{} of {} rows accepted", parsed.report.rows_accepted, parsed.report.rows_read);

    // Aggregating to 4 digits merges 850231 and 850239 into 8502.
    let (w, report) = build_matrix(&parsed.records, 2019, 4, "trade")?;
    println!("{} records used for 2019", report.records_used);

    let rca = compute_rca(&w)?;
    for (g, geo) in rca.geos.iter().enumerate() {
        let row: Vec<String> = rca.values.row(g).iter().map(|v| format!("{v:6.3}")).collect();
        println!("{geo}: {}", row.join(" "));
    }

    let m = binarize(&rca, 1.0)?;
    let d = degrees(&m);
    println!("activities: {:?}", m.activities.iter().map(ToString::to_string).collect::<Vec<_>>());
    println!("diversification {:?}, ubiquity {:?}", d.diversification, d.ubiquity);
    Ok(())
}
