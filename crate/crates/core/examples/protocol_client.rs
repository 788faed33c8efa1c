//! Talks to the engine over the length-prefixed JSON protocol, the same way
//! the painting front end does, using in-memory pipes.

use std::io::Cursor;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use region_smudge::engine::Tool;
use region_smudge::params::Params;
use region_smudge::protocol::{read_frame, write_message, Request, Response, Server};
use region_smudge::raster::{RasterImage, Rgba};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let canvas = RasterImage::from_fn(128, 128, |x, _| {
        if x < 64 {
            Rgba::opaque(220, 60, 50)
        } else {
            Rgba::opaque(40, 90, 200)
        }
    })?;

    let mut requests = Vec::new();
    let png = B64.encode(canvas.encode_png()?);
    write_message(&mut requests, &Request::OpenCanvas { path: None, png: Some(png) })?;
    write_message(&mut requests, &Request::BeginStroke { tool: Tool::Ss })?;
    for i in 0..12 {
        let sample = Request::StrokeSample {
            x: 20.0 + 4.0 * i as f64,
            y: 64.0,
            t_ms: 16.0 * i as f64,
            pressure: Some(1.0),
        };
        write_message(&mut requests, &sample)?;
    }
    write_message(&mut requests, &Request::EndStroke)?;
    write_message(&mut requests, &Request::GetOverlay)?;
    write_message(&mut requests, &Request::Undo)?;

    let mut replies = Vec::new();
    Server::new(Params::default()).serve(Cursor::new(requests), &mut replies)?;

    let mut mirror = canvas.clone();
    let mut reader = Cursor::new(replies);
    while let Some(frame) = read_frame(&mut reader)? {
        let reply: Response = serde_json::from_slice(&frame)?;
        match &reply {
            Response::Canvas { .. } => println!("canvas opened"),
            Response::Selection { t, selected, .. } => println!("t={t:<2} selected {selected:?}"),
            Response::TileDiff { tiles, .. } => {
                if let Some(diff) = reply.to_diff()? {
                    diff.apply(&mut mirror)?;
                }
                println!("     {} tile(s) updated", tiles.len());
            }
            Response::Stroke { record } => println!("stroke recorded with {} samples", record.samples.len()),
            Response::Overlay { selected, .. } => println!("overlay shows {selected:?}"),
            other => println!("{other:?}"),
        }
    }
    assert_eq!(mirror, canvas, "undo brings the mirrored canvas back");
    println!("mirror matches the original after undo");
    Ok(())
}
