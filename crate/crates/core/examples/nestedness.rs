//! NODF nestedness and the reordered matrix used for heatmaps.
//!
//! cargo run --example nestedness

use ecomplexity::bipartite::{nestedness, BinaryBipartite};
use ecomplexity::plot::heatmap_cells;

fn main() -> ecomplexity::error::Result<()> {
    let perfect = BinaryBipartite::from_rows(&[[1, 1, 1, 1], [1, 1, 1, 0], [1, 1, 0, 0], [1, 0, 0, 0]])?;
    let shuffled = perfect.permute_rows(&[2, 0, 3, 1]).permute_columns(&[3, 1, 0, 2]);
    let checker = BinaryBipartite::from_rows(&[[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]])?;

    for (name, m) in [("triangular", &perfect), ("shuffled", &shuffled), ("checkerboard", &checker)] {
        let r = nestedness(m);
        println!(
            "{name}: NODF {:.1} (rows {:.1}, columns {:.1})",
            r.score.unwrap(),
            r.row_component.unwrap(),
            r.column_component.unwrap()
        );
    }

    let r = nestedness(&shuffled);
    let mut grid = vec![vec!['.'; 4]; 4];
    for (x, y, _, _) in heatmap_cells(&shuffled, &r) {
        grid[y][x] = '#';
    }
    for row in grid {
        println!("{}", row.into_iter().collect::<String>());
    }
    Ok(())
}
