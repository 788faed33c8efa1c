//! Times selection and smudging per input sample on synthetic paintings.
//!
//! ```text
//! cargo run --release --example bench_frames [-- ITERATIONS]
//! ```

use region_smudge::bench::run_bench;
use region_smudge::engine::Tool;
use region_smudge::params::Params;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    for size in [512, 1024] {
        let report = run_bench(size, iterations, Tool::Ss, &Params::default())?;
        println!("{}", report.table());
    }
    Ok(())
}
