//! Stroke scripts, deterministic replay and the tool-comparison metrics.

use std::collections::{BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{FinishedStroke, SmudgeSession, StrokeRecord, Tool};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::raster::{Point, RasterImage};
use crate::regions::{RegionId, RegionMap};
use crate::select::{RegionSet, SelectionTrace};

/// A replayable sequence of strokes over a canvas image.
///
/// ```json
/// {
///   "canvas": "canvas.png",
///   "params": { "gamma": 0.7 },
///   "intent": [[40, 60]],
///   "strokes": [ { "tool": "ss", "samples": [ { "x": 10, "y": 12, "t_ms": 0 } ] } ]
/// }
/// ```
///
/// `canvas` is resolved against the script's directory. `intent` lists points
/// inside the regions the user means to smudge; the comparison metrics count
/// changes outside them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub canvas: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub strokes: Vec<StrokeRecord>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Self> {
        let script: Script = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("stroke script: {e}")))?;
        if let Some(p) = &script.params {
            Params::default().merged(p)?;
        }
        for (i, s) in script.strokes.iter().enumerate() {
            if s.samples.is_empty() {
                return Err(Error::Malformed(format!("stroke script: stroke {i} has no samples")));
            }
        }
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Malformed(m) => Error::Malformed(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Canvas path as seen from the directory holding the script.
    pub fn canvas_path(&self, script_path: impl AsRef<Path>) -> PathBuf {
        match script_path.as_ref().parent() {
            Some(dir) if self.canvas.is_relative() => dir.join(&self.canvas),
            _ => self.canvas.clone(),
        }
    }

    /// `base` with the script's parameter overrides applied.
    pub fn params_over(&self, base: &Params) -> Result<Params> {
        match &self.params {
            Some(p) => base.merged(p),
            None => Ok(base.clone()),
        }
    }

    /// Region ids under the intent points.
    pub fn intent_regions(&self, map: &RegionMap) -> Option<RegionSet> {
        let pts = self.intent.as_ref()?;
        Some(
            pts.iter()
                .filter_map(|&[x, y]| Point::new(x, y).to_pixel(map.width(), map.height()))
                .map(|p| map.label(p.x, p.y))
                .collect(),
        )
    }
}

/// Per-stroke replay statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeReport {
    pub index: usize,
    pub tool: Tool,
    pub samples: usize,
    pub stamps: usize,
    pub selection_ms: f64,
    pub selection_ms_median: f64,
    pub smudge_ms: f64,
    pub smudge_ms_median: f64,
    pub changed_pixels: usize,
    /// Changed pixels outside the regions selected at any time in the stroke.
    /// The footprint tool selects no regions, so all its changes count.
    pub changed_outside_selection: usize,
    pub ever_selected: RegionSet,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub width: u32,
    pub height: u32,
    pub regions: usize,
    pub strokes: Vec<StrokeReport>,
    pub changed_pixels: usize,
    pub pixels_changed_outside_selection: usize,
}

/// A trace line tagged with the stroke it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub stroke: usize,
    pub tool: Tool,
    #[serde(flatten)]
    pub trace: SelectionTrace,
}

pub struct Replay {
    pub image: RasterImage,
    pub map: RegionMap,
    pub report: ReplayReport,
    pub strokes: Vec<FinishedStroke>,
}

impl Replay {
    pub fn trace_lines(&self) -> Vec<TraceLine> {
        self.strokes
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.trace.iter().map(move |t| TraceLine {
                    stroke: i,
                    tool: s.record.tool,
                    trace: t.clone(),
                })
            })
            .collect()
    }

    /// Trace as JSON lines.
    pub fn trace_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for l in self.trace_lines() {
            out.push_str(&serde_json::to_string(&l)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Pixels that differ between two equally sized images, with their labels.
fn changed_labels<'a>(before: &'a RasterImage, after: &'a RasterImage, map: &'a RegionMap) -> impl Iterator<Item = RegionId> + 'a {
    before
        .pixels()
        .iter()
        .zip(after.pixels())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| map.labels()[i])
}

/// Replays `script` on `canvas`. `tool` overrides every stroke's tool.
pub fn replay(script: &Script, canvas: RasterImage, params: &Params, tool: Option<Tool>) -> Result<Replay> {
    let params = script.params_over(params)?;
    let map = params.segment(&canvas)?;
    replay_with_map(script, canvas, map, &params, tool)
}

/// Replay on a given region map; `params` are used as is.
pub fn replay_with_map(
    script: &Script,
    canvas: RasterImage,
    map: RegionMap,
    params: &Params,
    tool: Option<Tool>,
) -> Result<Replay> {
    let mut session = SmudgeSession::new(canvas, map, params.clone())?;
    let mut reports = Vec::new();
    let mut finished = Vec::new();
    for (index, rec) in script.strokes.iter().enumerate() {
        let rec = StrokeRecord {
            tool: tool.unwrap_or(rec.tool),
            samples: rec.samples.clone(),
        };
        let before = session.canvas().clone();
        let fin = session.play(&rec)?;
        let mut changed = 0;
        let mut outside = 0;
        for id in changed_labels(&before, session.canvas(), session.map()) {
            changed += 1;
            if !fin.ever_selected.contains(&id) {
                outside += 1;
            }
        }
        reports.push(StrokeReport {
            index,
            tool: rec.tool,
            samples: fin.stats.samples,
            stamps: fin.stats.stamps,
            selection_ms: fin.stats.total_selection_ms(),
            selection_ms_median: median(&fin.stats.selection_ms),
            smudge_ms: fin.stats.total_smudge_ms(),
            smudge_ms_median: median(&fin.stats.smudge_ms),
            changed_pixels: changed,
            changed_outside_selection: outside,
            ever_selected: fin.ever_selected.clone(),
        });
        finished.push(fin);
    }
    let report = ReplayReport {
        output: None,
        trace: None,
        width: session.canvas().width(),
        height: session.canvas().height(),
        regions: session.map().len(),
        changed_pixels: reports.iter().map(|r| r.changed_pixels).sum(),
        pixels_changed_outside_selection: reports.iter().map(|r| r.changed_outside_selection).sum(),
        strokes: reports,
    };
    let map = session.map().clone();
    Ok(Replay {
        image: session.into_canvas(),
        map,
        report,
        strokes: finished,
    })
}

/// Whether `set` induces a connected subgraph of the region adjacency graph.
/// The empty set counts as connected.
pub fn is_connected(set: &RegionSet, adjacency: &[BTreeSet<RegionId>]) -> bool {
    let Some(&start) = set.iter().next() else {
        return true;
    };
    let mut seen = RegionSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(r) = queue.pop_front() {
        for &n in &adjacency[r as usize] {
            if set.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Mean over 4-adjacent pixel pairs straddling the border between regions `a`
/// and `b` (or any two different regions when `pair` is `None`) of the largest
/// per-channel absolute difference.
pub fn edge_contrast(image: &RasterImage, map: &RegionMap, pair: Option<(RegionId, RegionId)>) -> f64 {
    let (w, h) = (map.width(), map.height());
    let mut sum = 0u64;
    let mut n = 0u64;
    let mut visit = |p: (u32, u32), q: (u32, u32)| {
        let (la, lb) = (map.label(p.0, p.1), map.label(q.0, q.1));
        let hit = match pair {
            Some((a, b)) => (la == a && lb == b) || (la == b && lb == a),
            None => la != lb,
        };
        if hit {
            let (c, d) = (image.get(p.0, p.1).0, image.get(q.0, q.1).0);
            sum += (0..3).map(|k| c[k].abs_diff(d[k])).max().unwrap_or(0) as u64;
            n += 1;
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                visit((x, y), (x + 1, y));
            }
            if y + 1 < h {
                visit((x, y), (x, y + 1));
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Comparison metrics for one tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolMetrics {
    pub tool: Tool,
    pub changed_pixels: usize,
    /// Changed pixels outside the intended regions, when the script names them.
    pub outside_intent_pixels: Option<usize>,
    /// Whether every timestamp's selected set is connected; `None` for the
    /// footprint tool, which selects no regions.
    pub continuity: Option<bool>,
    pub discontinuous_timestamps: Vec<(usize, u64)>,
    /// Fraction of cross-region edge contrast lost, `1 - after / before`.
    pub boundary_blur: f64,
}

pub struct Comparison {
    pub metrics: Vec<ToolMetrics>,
    pub outputs: Vec<(Tool, Replay)>,
}

/// Replays `script` once per tool on copies of `canvas` and scores each run.
pub fn compare(script: &Script, canvas: &RasterImage, params: &Params) -> Result<Comparison> {
    let params = script.params_over(params)?;
    let map = params.segment(canvas)?;
    let adjacency = map.adjacency();
    let intent = script.intent_regions(&map);
    let contrast_before = edge_contrast(canvas, &map, None);
    let mut metrics = Vec::new();
    let mut outputs = Vec::new();
    for tool in Tool::ALL {
        let run = replay_with_map(script, canvas.clone(), map.clone(), &params, Some(tool))?;
        let outside_intent = intent
            .as_ref()
            .map(|set| changed_labels(canvas, &run.image, &map).filter(|id| !set.contains(id)).count());
        let mut gaps = Vec::new();
        for (i, s) in run.strokes.iter().enumerate() {
            for t in &s.trace {
                if !is_connected(&t.selected, &adjacency) {
                    gaps.push((i, t.t));
                }
            }
        }
        let after = edge_contrast(&run.image, &map, None);
        metrics.push(ToolMetrics {
            tool,
            changed_pixels: run.report.changed_pixels,
            outside_intent_pixels: outside_intent,
            continuity: (tool != Tool::Bs).then_some(gaps.is_empty()),
            discontinuous_timestamps: gaps,
            boundary_blur: if contrast_before > 0.0 {
                1.0 - after / contrast_before
            } else {
                0.0
            },
        });
        outputs.push((tool, run));
    }
    Ok(Comparison { metrics, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Rgba;
    use crate::stroke::StrokeSample;

    #[test]
    fn parse_reports_position_of_syntax_errors() {
        let err = Script::parse("{\n  \"canvas\": \"a.png\",\n  \"strokes\": [ }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(err.is_input_error());
    }

    #[test]
    fn parse_rejects_bad_content() {
        assert!(Script::parse(r#"{"canvas": "a.png", "strokes": [{"tool": "ss", "samples": []}]}"#).is_err());
        assert!(Script::parse(r#"{"canvas": "a.png", "strokes": [{"tool": "xx", "samples": []}]}"#).is_err());
        assert!(Script::parse(r#"{"canvas": "a.png", "params": {"alpha": 2}}"#).is_err());
        assert!(Script::parse(r#"{"canvas": "a.png", "extra": 1}"#).is_err());
        let s = Script::parse(r#"{"canvas": "a.png"}"#).unwrap();
        assert!(s.strokes.is_empty());
    }

    #[test]
    fn canvas_resolves_next_to_the_script() {
        let s = Script::parse(r#"{"canvas": "img/a.png"}"#).unwrap();
        assert_eq!(s.canvas_path("/data/run/script.json"), PathBuf::from("/data/run/img/a.png"));
    }

    #[test]
    fn script_round_trips_through_json() {
        let s = Script {
            canvas: "c.png".into(),
            params: Some(serde_json::json!({"theta": 12.0})),
            intent: Some(vec![[1.0, 2.0]]),
            strokes: vec![StrokeRecord {
                tool: Tool::Ts,
                samples: vec![StrokeSample::new(1.5, 2.0, 0.0).with_pressure(0.5)],
            }],
        };
        assert_eq!(Script::parse(&s.to_json().unwrap()).unwrap(), s);
    }

    #[test]
    fn empty_script_leaves_the_canvas() {
        let img = RasterImage::from_fn(20, 10, |x, _| Rgba::opaque(x as u8, 1, 2)).unwrap();
        let r = replay(&Script::default(), img.clone(), &Params::default(), None).unwrap();
        assert_eq!(r.image, img);
        assert_eq!(r.report.changed_pixels, 0);
    }

    #[test]
    fn connectivity_follows_adjacency() {
        // 0 - 1 - 2 in a row, 3 isolated
        let adj = vec![
            BTreeSet::from([1]),
            BTreeSet::from([0, 2]),
            BTreeSet::from([1]),
            BTreeSet::new(),
        ];
        assert!(is_connected(&RegionSet::new(), &adj));
        assert!(is_connected(&[0, 1, 2].into(), &adj));
        assert!(!is_connected(&[0, 2].into(), &adj));
        assert!(!is_connected(&[1, 3].into(), &adj));
    }

    #[test]
    fn edge_contrast_of_a_hard_edge() {
        let img = RasterImage::from_fn(10, 4, |x, _| if x < 5 { Rgba::BLACK } else { Rgba::opaque(200, 0, 0) }).unwrap();
        let map = crate::regions::flat_fill_regions(&img).unwrap();
        assert_eq!(edge_contrast(&img, &map, None), 200.0);
        assert_eq!(edge_contrast(&img, &map, Some((1, 0))), 200.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
