//! Segments a synthetic painting two ways and saves the region sidecar.
//!
//! ```text
//! cargo run --example segment_painting [-- OUT_DIR]
//! ```

use std::path::PathBuf;

use region_smudge::bench::synthetic_painting;
use region_smudge::regions::{flat_fill_regions, meanshift_regions, save_sidecar, MeanShiftParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("region-smudge-examples"));
    std::fs::create_dir_all(&out)?;

    let painting = synthetic_painting(256, 7)?;
    painting.save_png(out.join("painting.png"))?;

    let flat = flat_fill_regions(&painting)?;
    let shifted = meanshift_regions(&painting, MeanShiftParams::default())?;
    println!("flat fill : {:>4} regions", flat.len());
    println!("mean shift: {:>4} regions", shifted.len());

    let largest = flat.regions().iter().max_by_key(|r| r.area.len()).expect("at least one region");
    println!(
        "largest flat region #{} covers {} px, boundary {} px, dilated boundary {} px",
        largest.id,
        largest.area.len(),
        largest.boundary.len(),
        largest.dilated_boundary.len()
    );

    save_sidecar(&flat, out.join("painting.labels.png"), out.join("painting.regions.json"))?;
    flat.render().save_png(out.join("painting.regions.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
