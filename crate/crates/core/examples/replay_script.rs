//! Replays a stroke script against its canvas and writes the output image,
//! the report and the per-timestamp selection trace.
//!
//! ```text
//! cargo run --example replay_script [-- SCRIPT.json [OUT_DIR]]
//! ```

use std::path::PathBuf;

use region_smudge::params::Params;
use region_smudge::raster::RasterImage;
use region_smudge::replay::{replay, Script};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let script_path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/crossing_unwanted/script.json")
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("region-smudge-examples"));
    std::fs::create_dir_all(&out)?;

    let script = Script::load(&script_path)?;
    let canvas = RasterImage::load_png(script.canvas_path(&script_path))?;
    let run = replay(&script, canvas, &Params::default(), None)?;

    for s in &run.report.strokes {
        println!(
            "stroke {} ({}): {} samples, {} stamps, {} px changed, {} outside selection, selection {:.2} ms, smudge {:.2} ms",
            s.index, s.tool, s.samples, s.stamps, s.changed_pixels, s.changed_outside_selection, s.selection_ms, s.smudge_ms
        );
    }
    run.image.save_png(out.join("replay.png"))?;
    std::fs::write(out.join("replay.trace.jsonl"), run.trace_jsonl()?)?;
    std::fs::write(out.join("replay.report.json"), serde_json::to_string_pretty(&run.report)?)?;
    println!("{} regions, outputs in {}", run.report.regions, out.display());
    Ok(())
}
