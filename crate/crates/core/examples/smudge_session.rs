//! Paints one stroke interactively, mirrors the canvas from tile diffs and
//! undoes it again.

use region_smudge::engine::{SmudgeSession, Tool};
use region_smudge::params::Params;
use region_smudge::raster::{RasterImage, Rgba};
use region_smudge::stroke::StrokeSample;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a red disk on cream, with a stroke dragged out of the disk
    let canvas = RasterImage::from_fn(200, 200, |x, y| {
        let (dx, dy) = (x as f64 - 100.0, y as f64 - 100.0);
        if dx.hypot(dy) <= 60.0 {
            Rgba::opaque(220, 60, 50)
        } else {
            Rgba::opaque(240, 230, 200)
        }
    })?;
    let params = Params {
        strength: 0.8,
        ..Params::default()
    };
    let mut session = SmudgeSession::open(canvas.clone(), params)?;
    let mut mirror = canvas.clone();

    let path: Vec<StrokeSample> = (0..30)
        .map(|i| StrokeSample::new(70.0 + 3.0 * i as f64, 100.0 + 1.5 * i as f64, 16.0 * i as f64).with_pressure(0.8))
        .collect();
    let first = session.begin_stroke(Tool::Ss, path[0])?;
    first.diff.apply(&mut mirror)?;
    for s in &path[1..] {
        let step = session.advance(*s)?;
        step.diff.apply(&mut mirror)?;
        if step.stamps > 0 {
            println!(
                "t={:<3} stamps={} radius={:>5.1} selected={:?} tiles={}",
                step.selection.t,
                step.stamps,
                step.lambda,
                step.selection.selected,
                step.diff.tiles.len()
            );
        }
    }
    let done = session.end_stroke()?;
    assert_eq!(&mirror, session.canvas());

    let changed = canvas.pixels().iter().zip(session.canvas().pixels()).filter(|(a, b)| a != b).count();
    println!("stroke changed {changed} pixels with {} stamps", done.stats.stamps);

    if let Some(diff) = session.undo()? {
        diff.apply(&mut mirror)?;
    }
    assert_eq!(mirror, canvas);
    println!("undo restored the canvas exactly");
    Ok(())
}
