//! Blurs a sharp edge with the footprint tool, then repaints each side with
//! narrow selection strokes and measures how much of the edge comes back.
//!
//! ```text
//! cargo run --example edge_recovery [-- OUT_DIR]
//! ```

use std::path::PathBuf;

use region_smudge::params::Params;
use region_smudge::raster::RasterImage;
use region_smudge::regions::load_sidecar;
use region_smudge::replay::{edge_contrast, replay_with_map, Script};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/edge_recovery");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("region-smudge-examples"));
    std::fs::create_dir_all(&out)?;

    let original = RasterImage::load_png(dir.join("canvas.png"))?;
    // the saved segmentation of the sharp image; segmenting the blurred
    // result would produce a ramp of thin regions instead
    let map = load_sidecar(dir.join("canvas.labels.png"), dir.join("canvas.regions.json"))?;
    let blur = Script::load(dir.join("blur.json"))?;
    let restore = Script::load(dir.join("restore.json"))?;

    let blurred = replay_with_map(&blur, original.clone(), map.clone(), &Params::default(), None)?.image;
    let params = restore.params_over(&Params::default())?;
    let restored = replay_with_map(&restore, blurred.clone(), map.clone(), &params, None)?.image;

    let pair = Some((0, 1));
    let before = edge_contrast(&original, &map, pair);
    let mid = edge_contrast(&blurred, &map, pair);
    let after = edge_contrast(&restored, &map, pair);
    println!("edge contrast: original {before:.1}, blurred {mid:.1}, restored {after:.1}");
    println!("recovered {:.0}% of the original sharpness", 100.0 * after / before);

    blurred.save_png(out.join("edge.blurred.png"))?;
    restored.save_png(out.join("edge.restored.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
