//! Shared test support: a brute-force selection oracle and the scripted
//! comparison fixtures.
#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use region_smudge::engine::{StrokeRecord, Tool};
use region_smudge::raster::{PixelPos, RasterImage, Rgba};
use region_smudge::replay::Script;
use region_smudge::stroke::StrokeSample;
use serde::{Deserialize, Serialize};

pub const SCENARIOS: [&str; 3] = ["boundary_following", "into_region", "crossing_unwanted"];

/// Frozen per-scenario expectations stored next to each fixture script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub scenario: String,
    /// Points inside regions the stroke should leave alone.
    pub unwanted: Vec<[u32; 2]>,
    /// SS selected set after every input sample.
    pub ss_selected: Vec<Vec<u32>>,
    /// Whether TS on the same stroke produces a disconnected selection.
    pub ts_discontinuous: bool,
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn load_expected(scenario: &str) -> Expected {
    let path = fixtures_dir().join(scenario).join("expected.json");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("valid expected.json")
}

pub fn load_fixture(scenario: &str) -> (Script, RasterImage) {
    let path = fixtures_dir().join(scenario).join("script.json");
    let script = Script::load(&path).expect("fixture script");
    let canvas = RasterImage::load_png(script.canvas_path(&path)).expect("fixture canvas");
    (script, canvas)
}

const RED: Rgba = Rgba::opaque(220, 60, 50);
const BLUE: Rgba = Rgba::opaque(40, 90, 200);
const CREAM: Rgba = Rgba::opaque(240, 230, 200);
const GREEN: Rgba = Rgba::opaque(60, 160, 70);

/// Samples every `step` pixels along a polyline, 16 ms apart.
pub fn polyline_samples(pts: &[(f64, f64)], step: f64) -> Vec<StrokeSample> {
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let n = (d / step).ceil().max(1.0) as usize;
        for i in 0..n {
            let t = i as f64 / n as f64;
            // eighth-pixel coordinates survive a JSON round trip exactly
            let snap = |v: f64| (v * 8.0).round() / 8.0;
            out.push(StrokeSample::new(snap(a.0 + (b.0 - a.0) * t), snap(a.1 + (b.1 - a.1) * t), 0.0));
        }
    }
    let last = pts[pts.len() - 1];
    out.push(StrokeSample::new(last.0, last.1, 0.0));
    for (i, s) in out.iter_mut().enumerate() {
        s.t_ms = i as f64 * 16.0;
    }
    out
}

/// Builds a scenario's canvas, script and unwanted probe points.
pub fn build_scenario(name: &str) -> (RasterImage, Script, Vec<[u32; 2]>) {
    let (img, pts, intent, unwanted): (RasterImage, Vec<(f64, f64)>, Vec<[f64; 2]>, Vec<[u32; 2]>) = match name {
        // three horizontal bands, stroke along the lower shared edge
        "boundary_following" => (
            RasterImage::from_fn(256, 256, |_, y| match y {
                0..=99 => CREAM,
                100..=147 => RED,
                _ => BLUE,
            })
            .unwrap(),
            vec![(20.0, 148.0), (236.0, 148.0)],
            vec![[128.0, 120.0], [128.0, 200.0]],
            vec![[128, 20]],
        ),
        // a disk about the size of the brush footprint, stroke inside it
        "into_region" => (
            RasterImage::from_fn(256, 256, |x, y| {
                if PixelPos::new(x, y).distance_sq(PixelPos::new(128, 128)) <= 50 * 50 {
                    RED
                } else if x > 236 {
                    GREEN
                } else {
                    CREAM
                }
            })
            .unwrap(),
            vec![(120.0, 128.0), (136.0, 128.0)],
            vec![[128.0, 128.0]],
            vec![[20, 20]],
        ),
        // two red lobes split by a full-height blue stripe, stroke across
        "crossing_unwanted" => (
            RasterImage::from_fn(256, 256, |x, y| {
                let lobe = (78..178).contains(&y) && (43..213).contains(&x);
                if (113..143).contains(&x) {
                    BLUE
                } else if lobe {
                    RED
                } else {
                    CREAM
                }
            })
            .unwrap(),
            vec![(63.0, 128.0), (193.0, 128.0)],
            vec![[83.0, 128.0], [173.0, 128.0]],
            vec![[128, 128]],
        ),
        other => panic!("unknown scenario {other}"),
    };
    let script = Script {
        canvas: "canvas.png".into(),
        params: None,
        intent: Some(intent),
        strokes: vec![StrokeRecord {
            tool: Tool::Ss,
            samples: polyline_samples(&pts, 4.0),
        }],
    };
    (img, script, unwanted)
}

pub const EDGE_RECOVERY: &str = "edge_recovery";

/// Two flat halves, a BS zig-zag across their shared edge, and narrow SS
/// strokes down each half that repaint it from clean pickup.
pub fn build_edge_recovery() -> (RasterImage, Script, Script) {
    let img = RasterImage::from_fn(128, 256, |x, _| if x < 64 { RED } else { BLUE }).unwrap();
    let zigzag = [(20.0, 100.0), (108.0, 110.0), (20.0, 120.0), (108.0, 130.0), (20.0, 140.0), (108.0, 150.0)];
    let blur = Script {
        canvas: "canvas.png".into(),
        params: None,
        intent: None,
        strokes: vec![StrokeRecord {
            tool: Tool::Bs,
            samples: polyline_samples(&zigzag, 4.0),
        }],
    };
    let restore = Script {
        canvas: "blurred.png".into(),
        params: Some(serde_json::json!({ "pickup_rate": 0.0, "stroke_width": 6.0 })),
        intent: Some(vec![[32.0, 128.0], [96.0, 128.0]]),
        strokes: [60.0, 52.0, 40.0, 16.0, 4.0, 67.0, 75.0, 87.0, 111.0, 123.0]
            .into_iter()
            .map(|x| StrokeRecord {
                tool: Tool::Ss,
                samples: polyline_samples(&[(x, 20.0), (x, 236.0)], 4.0),
            })
            .collect(),
    };
    (img, blur, restore)
}
