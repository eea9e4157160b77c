//! The staged pipeline driven by a configuration, as `ecomplexity run` does.
//!
//! cargo run --release --example pipeline -- [output dir]

use std::io::Write;

use ecomplexity::pipeline::{run_pipeline, RunConfig, Stage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ecomplexity::error::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("ecomplexity-demo"), Into::into);
    std::fs::create_dir_all(&out).map_err(|e| ecomplexity::error::Error::io(&out, e))?;
    let input = out.join("trade.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&input).map_err(|e| ecomplexity::error::Error::io(&input, e))?);
    writeln!(f, "geo,activity,value,year").unwrap();
    let cap: Vec<f64> = (0..50).map(|_| rng.gen()).collect();
    let diff: Vec<f64> = (0..120).map(|_| rng.gen()).collect();
    for year in 2012..=2018 {
        for (g, c) in cap.iter().enumerate() {
            for (a, d) in diff.iter().enumerate() {
                let v = if c > d { 40.0 } else { 3.0 } * (1.0 + rng.gen::<f64>());
                writeln!(f, "C{g:02},{:06},{v:.3},{year}", 10_000 + a * 73).unwrap();
            }
        }
    }
    drop(f);

    let mut config = RunConfig::default();
    config.input.path = input;
    config.output_dir = out.join("run");
    config.stages.extend([Stage::Assist, Stage::Validate]);
    config.validation.samples = 200;
    let manifest = run_pipeline(&config)?;
    for s in &manifest.stages {
        println!("{:<11} {} {:.3}s, {} files", s.stage.name(), s.status, s.wall_clock_seconds, s.outputs.len());
        for w in &s.warnings {
            println!("            warning: {w}");
        }
    }
    println!("outputs in {}", config.output_dir.display());
    Ok(())
}
