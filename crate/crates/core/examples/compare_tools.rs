//! Runs the same script with all three tools and prints the comparison
//! metrics for each scripted fixture.

use std::path::PathBuf;

use region_smudge::params::Params;
use region_smudge::raster::RasterImage;
use region_smudge::replay::{compare, Script};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for name in ["boundary_following", "into_region", "crossing_unwanted"] {
        let path = fixtures.join(name).join("script.json");
        let script = Script::load(&path)?;
        let canvas = RasterImage::load_png(script.canvas_path(&path))?;
        let cmp = compare(&script, &canvas, &Params::default())?;
        println!("{name}");
        println!("  tool  changed  outside-intent  continuous  edge-blur");
        for m in &cmp.metrics {
            println!(
                "  {:<4}  {:>7}  {:>14}  {:>10}  {:>9.2}",
                m.tool.name(),
                m.changed_pixels,
                m.outside_intent_pixels.map_or("-".into(), |n| n.to_string()),
                m.continuity.map_or("-".into(), |c| c.to_string()),
                m.boundary_blur
            );
        }
    }
    Ok(())
}
