//! Prints the target-set update after every sample of a stroke that runs
//! along the edge between two bands.

use region_smudge::engine::{SmudgeSession, Tool};
use region_smudge::params::Params;
use region_smudge::raster::{RasterImage, Rgba};
use region_smudge::stroke::StrokeSample;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let canvas = RasterImage::from_fn(256, 256, |_, y| match y {
        0..=99 => Rgba::opaque(240, 230, 200),
        100..=147 => Rgba::opaque(220, 60, 50),
        _ => Rgba::opaque(40, 90, 200),
    })?;
    let mut session = SmudgeSession::open(canvas, Params::default())?;
    for region in session.map().regions() {
        println!("region {} color {:?} area {}", region.id, region.representative_color.0, region.area.len());
    }

    let samples: Vec<StrokeSample> = (0..=27)
        .map(|i| StrokeSample::new(20.0 + 8.0 * i as f64, 148.0, 16.0 * i as f64))
        .collect();
    println!("\n  t  covered    base       selected   candidate scores");
    let mut step = session.begin_stroke(Tool::Ss, samples[0])?;
    for s in &samples[1..] {
        print_row(&step.selection);
        step = session.advance(*s)?;
    }
    print_row(&step.selection);
    let done = session.end_stroke()?;
    println!("\never selected {:?}, {} stamps", done.ever_selected, done.stats.stamps);
    Ok(())
}

fn print_row(t: &region_smudge::select::SelectionTrace) {
    let scores: Vec<String> = t
        .candidate_scores
        .iter()
        .map(|c| format!("+{}={:.3}", c.region, c.score))
        .collect();
    println!(
        "{:>3}  {:<10} {:<10} {:<10} base={:.3} {}",
        t.t,
        format!("{:?}", t.covered),
        format!("{:?}", t.base),
        format!("{:?}", t.selected),
        t.base_score,
        scores.join(" ")
    );
}
