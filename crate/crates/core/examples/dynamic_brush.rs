//! Shows how the smudge radius follows the distance to the edge of the
//! selected regions.

use std::collections::BTreeSet;

use region_smudge::engine::dynamic_brush_radius;
use region_smudge::raster::{Point, RasterImage, Rgba};
use region_smudge::regions::flat_fill_regions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let img = RasterImage::from_fn(400, 400, |x, y| {
        let d = (x as f64 - 200.0).hypot(y as f64 - 200.0);
        if d <= 150.0 {
            Rgba::opaque(60, 160, 70)
        } else {
            Rgba::opaque(20, 20, 20)
        }
    })?;
    let map = flat_fill_regions(&img)?;
    let disk = map.label(200, 200);
    let targets = BTreeSet::from([disk]);

    println!("theta=10 brush_max=200, disk radius 150 centred at (200, 200)");
    for x in [200.0, 250.0, 300.0, 330.0, 345.0, 349.0] {
        let r = dynamic_brush_radius(Point::new(x, 200.0), &targets, &map, 10.0, 200.0)?;
        println!("  at x={x:>5}: radius {r:>6.2}");
    }
    let capped = dynamic_brush_radius(Point::new(200.0, 200.0), &targets, &map, 10.0, 80.0)?;
    println!("with brush_max=80 the centre radius is capped to {capped:.1}");
    Ok(())
}
