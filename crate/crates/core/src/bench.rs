//! Frame-time measurement for selection updates and smudge advances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{SmudgeSession, Tool};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::raster::{RasterImage, Rgba};
use crate::stroke::StrokeSample;

/// Reference timings published for the original CPU implementation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub size: u32,
    pub selection_ms: f64,
    pub selection_fps: u32,
    pub smudge_ms: f64,
    pub smudge_fps: u32,
}

pub const REFERENCE: [ReferenceRow; 2] = [
    ReferenceRow {
        size: 512,
        selection_ms: 1.39,
        selection_fps: 720,
        smudge_ms: 20.83,
        smudge_fps: 48,
    },
    ReferenceRow {
        size: 1024,
        selection_ms: 4.17,
        selection_fps: 240,
        smudge_ms: 66.67,
        smudge_fps: 15,
    },
];

pub fn reference_for(size: u32) -> Option<ReferenceRow> {
    REFERENCE.iter().copied().find(|r| r.size == size)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl Timing {
    pub fn from_samples(v: &[f64]) -> Timing {
        if v.is_empty() {
            return Timing::default();
        }
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        };
        Timing {
            mean_ms: s.iter().sum::<f64>() / n as f64,
            median_ms: median,
            min_ms: s[0],
            max_ms: s[n - 1],
        }
    }

    pub fn fps(&self) -> f64 {
        if self.median_ms > 0.0 {
            1000.0 / self.median_ms
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub size: u32,
    pub iterations: usize,
    pub regions: usize,
    pub tool: Tool,
    pub selection: Timing,
    pub smudge: Timing,
    pub reference: Option<ReferenceRow>,
}

impl BenchReport {
    /// Fixed-width table of measured and reference timings.
    pub fn table(&self) -> String {
        let mut out = format!(
            "canvas {0}x{0}, {1} regions, {2} samples, tool {3}\n",
            self.size, self.regions, self.iterations, self.tool
        );
        out.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>11}\n",
            "stage", "mean ms", "median ms", "max ms", "fps", "reference ms", "ref fps"
        ));
        let rows = [
            ("selection", self.selection, self.reference.map(|r| (r.selection_ms, r.selection_fps))),
            ("smudge", self.smudge, self.reference.map(|r| (r.smudge_ms, r.smudge_fps))),
        ];
        for (name, t, r) in rows {
            let (rm, rf) = match r {
                Some((ms, fps)) => (format!("{ms:.2}"), format!("{fps}")),
                None => ("-".into(), "-".into()),
            };
            out.push_str(&format!(
                "{:<10} {:>10.3} {:>10.3} {:>10.3} {:>10.1} {:>12} {:>11}\n",
                name,
                t.mean_ms,
                t.median_ms,
                t.max_ms,
                t.fps(),
                rm,
                rf
            ));
        }
        out
    }
}

/// Number of flat cells in the synthetic painting, independent of its size.
pub const PAINTING_CELLS: usize = 120;

/// Deterministic flat-colored cell painting. The layout depends only on
/// `seed`, so different sizes render the same picture at different resolutions.
pub fn synthetic_painting(size: u32, seed: u64) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<(f64, f64, Rgba)> = (0..PAINTING_CELLS)
        .map(|_| {
            (
                rng.gen_range(0.0..1.0) * size as f64,
                rng.gen_range(0.0..1.0) * size as f64,
                Rgba::opaque(rng.gen(), rng.gen(), rng.gen()),
            )
        })
        .collect();
    RasterImage::from_fn(size, size, |x, y| {
        let (x, y) = (x as f64, y as f64);
        sites
            .iter()
            .min_by(|a, b| {
                let da = (a.0 - x).powi(2) + (a.1 - y).powi(2);
                let db = (b.0 - x).powi(2) + (b.1 - y).powi(2);
                da.total_cmp(&db)
            })
            .map(|s| s.2)
            .expect("at least one site")
    })
}

/// Pointer-like samples along a wandering closed path, 6 px apart.
pub fn synthetic_path(size: u32, count: usize) -> Vec<StrokeSample> {
    let c = size as f64 / 2.0;
    let r = size as f64 * 0.3;
    let mut out = Vec::with_capacity(count);
    let mut theta = 0.0f64;
    for i in 0..count {
        let rad = r * (1.0 + 0.25 * (3.0 * theta).sin());
        out.push(StrokeSample::new(c + rad * theta.cos(), c + rad * theta.sin(), i as f64 * 16.0));
        theta += 6.0 / rad;
    }
    out
}

/// Feeds `iterations` samples through a session and times every advance.
/// Strokes restart every 64 samples so windows start fresh regularly.
pub fn run_bench(size: u32, iterations: usize, tool: Tool, params: &Params) -> Result<BenchReport> {
    if iterations == 0 {
        return Err(Error::param("iterations", "need ≥ 1 iteration"));
    }
    if !(64..=4096).contains(&size) {
        return Err(Error::param("size", "must be between 64 and 4096"));
    }
    let canvas = synthetic_painting(size, 0x5eed)?;
    let mut session = SmudgeSession::open(canvas, params.clone())?;
    let path = synthetic_path(size, iterations + iterations / 64 + 1);
    let mut selection = Vec::with_capacity(iterations);
    let mut smudge = Vec::with_capacity(iterations);
    let mut samples = path.into_iter();
    while selection.len() < iterations {
        let first = samples.next().expect("path long enough");
        session.begin_stroke(tool, first)?;
        for s in samples.by_ref().take(63) {
            let a = session.advance(s)?;
            selection.push(a.selection_ms);
            smudge.push(a.smudge_ms);
            if selection.len() == iterations {
                break;
            }
        }
        session.end_stroke()?;
    }
    Ok(BenchReport {
        size,
        iterations,
        regions: session.map().len(),
        tool,
        selection: Timing::from_samples(&selection),
        smudge: Timing::from_samples(&smudge),
        reference: reference_for(size),
    })
}
