//! Masked smudging: pickup-buffer stamps, the dynamic brush radius and the
//! stateful painting session with tile diffs and undo.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distance::{distance_transform_in, DistanceField};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::pointset::PointSet;
use crate::raster::{lerp_unchecked, PixelPos, PixelRect, Point, RasterImage, Rgba};
use crate::regions::{RegionId, RegionMap};
use crate::select::{
    covered_regions, ts_select, update_target_set, CandidateScore, RegionSet, SelectionTrace, TargetSet,
};
use crate::stroke::{PartialStroke, Stroke, StrokeSample};

/// Edge length of the square tiles used for diffs and undo snapshots.
pub const TILE_SIZE: u32 = 64;

/// Region selection strategy driving the smudge mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    /// Dynamic region selection from partial strokes.
    #[default]
    Ss,
    /// Mask is the raw stroke footprint.
    Bs,
    /// Covered regions scoring within a fraction of the best one.
    Ts,
}

impl Tool {
    pub const ALL: [Tool; 3] = [Tool::Ss, Tool::Bs, Tool::Ts];

    pub fn name(self) -> &'static str {
        match self {
            Tool::Ss => "ss",
            Tool::Bs => "bs",
            Tool::Ts => "ts",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(Tool::Ss),
            "bs" => Ok(Tool::Bs),
            "ts" => Ok(Tool::Ts),
            other => Err(Error::param("tool", format!("unknown tool `{other}` (expected ss, bs or ts)"))),
        }
    }
}

/// Anything a stamp can be clipped against.
pub trait StampMask {
    fn contains(&self, x: u32, y: u32) -> bool;
}

impl StampMask for PointSet {
    fn contains(&self, x: u32, y: u32) -> bool {
        PointSet::contains(self, x, y)
    }
}

/// Mask accepting every pixel.
pub struct FullMask;

impl StampMask for FullMask {
    fn contains(&self, _: u32, _: u32) -> bool {
        true
    }
}

/// Union of region areas, tested through the label grid.
pub struct RegionMask<'a> {
    map: &'a RegionMap,
    member: Vec<bool>,
}

impl<'a> RegionMask<'a> {
    pub fn new<'s>(map: &'a RegionMap, ids: impl IntoIterator<Item = &'s RegionId>) -> Result<Self> {
        let mut member = vec![false; map.len()];
        for &id in ids {
            *member.get_mut(id as usize).ok_or(Error::UnknownRegion(id))? = true;
        }
        Ok(RegionMask { map, member })
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }
}

impl StampMask for RegionMask<'_> {
    fn contains(&self, x: u32, y: u32) -> bool {
        self.member[self.map.label(x, y) as usize]
    }
}

/// Nearest pixel center to `p` after clamping it onto the grid.
pub fn snap_to_grid(p: Point, width: u32, height: u32) -> PixelPos {
    let c = |v: f64, hi: u32| ((v + 0.5).floor()).clamp(0.0, (hi - 1) as f64) as u32;
    PixelPos::new(c(p.x, width), c(p.y, height))
}

/// `min(max(theta, sigma), brush_max)`.
pub fn clamp_radius(sigma: f64, theta: f64, brush_max: f64) -> f64 {
    sigma.max(theta).min(brush_max)
}

/// Boundary pixels of `mask` inside `rect`: members with a 4-neighbor outside
/// the mask or on the image border.
fn mask_boundary_in(mask: &dyn StampMask, rect: PixelRect, width: u32, height: u32) -> PointSet {
    let mut out = PointSet::with_window(width, height, rect);
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            if !mask.contains(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == width
                || y + 1 == height
                || !mask.contains(x - 1, y)
                || !mask.contains(x + 1, y)
                || !mask.contains(x, y - 1)
                || !mask.contains(x, y + 1);
            if edge {
                out.insert(x, y);
            }
        }
    }
    out
}

/// Distances to a mask boundary over a window, exact for every query whose
/// answer is at most the brush maximum.
struct RadiusField {
    field: DistanceField,
    width: u32,
    height: u32,
}

impl RadiusField {
    fn build(mask: &dyn StampMask, from: Point, to: Point, brush_max: f64, width: u32, height: u32) -> Self {
        let lo = Point::new(from.x.min(to.x), from.y.min(to.y));
        let hi = Point::new(from.x.max(to.x), from.y.max(to.y));
        let rect = PixelRect::around(lo, hi, brush_max.ceil() + 2.0, width, height);
        let boundary = mask_boundary_in(mask, rect, width, height);
        RadiusField {
            field: distance_transform_in(&boundary, rect),
            width,
            height,
        }
    }

    fn sigma(&self, p: Point) -> f64 {
        self.field.at(snap_to_grid(p, self.width, self.height))
    }
}

/// Brush radius at `pos` for the union of the `targets` areas.
pub fn dynamic_brush_radius(pos: Point, targets: &RegionSet, map: &RegionMap, theta: f64, brush_max: f64) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::NoTarget);
    }
    let mask = RegionMask::new(map, targets)?;
    let field = RadiusField::build(&mask, pos, pos, brush_max, map.width(), map.height());
    Ok(clamp_radius(field.sigma(pos), theta, brush_max))
}

/// Disk-shaped color buffer carried along a stroke, indexed by offset from
/// the stamp center.
#[derive(Clone, Debug, PartialEq)]
pub struct Pickup {
    radius: f64,
    half: i32,
    cells: Vec<Rgba>,
}

impl Pickup {
    pub fn uniform(radius: f64, color: Rgba) -> Self {
        let half = radius.max(0.0).ceil() as i32;
        let side = (2 * half + 1) as usize;
        Pickup {
            radius,
            half,
            cells: vec![color; side * side],
        }
    }

    /// Seeds the buffer from the masked canvas pixels around `center`; cells
    /// with no masked source take the mean of the seeded ones.
    pub fn seed(canvas: &RasterImage, center: PixelPos, radius: f64, mask: &dyn StampMask) -> Self {
        let mut p = Pickup::uniform(radius, canvas.get(center.x, center.y));
        let mut seeded = vec![false; p.cells.len()];
        let mut sum = [0u64; 4];
        let mut n = 0u64;
        for dy in -p.half..=p.half {
            for dx in -p.half..=p.half {
                let (x, y) = (center.x as i64 + dx as i64, center.y as i64 + dy as i64);
                if x < 0 || y < 0 || x >= canvas.width() as i64 || y >= canvas.height() as i64 {
                    continue;
                }
                let (x, y) = (x as u32, y as u32);
                if !mask.contains(x, y) {
                    continue;
                }
                let c = canvas.get(x, y);
                let i = p.index(dx, dy);
                p.cells[i] = c;
                seeded[i] = true;
                for k in 0..4 {
                    sum[k] += c.0[k] as u64;
                }
                n += 1;
            }
        }
        if n > 0 {
            let mut mean = [0u8; 4];
            for k in 0..4 {
                mean[k] = ((2 * sum[k] + n) / (2 * n)) as u8;
            }
            for (c, s) in p.cells.iter_mut().zip(&seeded) {
                if !s {
                    *c = Rgba(mean);
                }
            }
        }
        p
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn index(&self, dx: i32, dy: i32) -> usize {
        let side = 2 * self.half + 1;
        ((dy + self.half) * side + dx + self.half) as usize
    }

    pub fn get(&self, dx: i32, dy: i32) -> Option<Rgba> {
        if dx.abs() > self.half || dy.abs() > self.half {
            return None;
        }
        Some(self.cells[self.index(dx, dy)])
    }

    /// Bilinear rescale of the buffer to a new radius.
    pub fn fit(&mut self, radius: f64) {
        if radius == self.radius {
            return;
        }
        let mut out = Pickup::uniform(radius, Rgba::TRANSPARENT);
        let scale = if radius > 0.0 { self.radius / radius } else { 0.0 };
        let lim = self.half as f64;
        for dy in -out.half..=out.half {
            for dx in -out.half..=out.half {
                let sx = (dx as f64 * scale).clamp(-lim, lim);
                let sy = (dy as f64 * scale).clamp(-lim, lim);
                let i = out.index(dx, dy);
                out.cells[i] = self.bilinear(sx, sy);
            }
        }
        *self = out;
    }

    fn bilinear(&self, sx: f64, sy: f64) -> Rgba {
        let x0 = sx.floor() as i32;
        let y0 = sy.floor() as i32;
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let x1 = (x0 + 1).min(self.half);
        let y1 = (y0 + 1).min(self.half);
        let c = |x: i32, y: i32| self.cells[self.index(x, y)].0;
        let (a, b, cc, d) = (c(x0, y0), c(x1, y0), c(x0, y1), c(x1, y1));
        let mut px = [0u8; 4];
        for k in 0..4 {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bot = cc[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            px[k] = (top * (1.0 - fy) + bot * fy + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        Rgba(px)
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::param(name, format!("{v} is outside [0, 1]")));
    }
    Ok(())
}

/// One masked smudge stamp centered at the pixel nearest `pos`.
///
/// Each pixel of the radius-`lambda` disk that lies in `mask` is blended
/// toward the pickup by `strength`, then the pickup cell is blended toward the
/// new canvas value by `pickup_rate`. Returns the number of pixels visited.
pub fn smudge_stamp(
    canvas: &mut RasterImage,
    pos: Point,
    lambda: f64,
    strength: f64,
    pickup_rate: f64,
    pickup: &mut Pickup,
    mask: &dyn StampMask,
) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be > 0"));
    }
    check_unit("strength", strength)?;
    check_unit("pickup_rate", pickup_rate)?;
    Ok(stamp(canvas, pos, lambda, strength, pickup_rate, pickup, mask, &mut |_, _, _| {}))
}

// `before_write(x, y, old)` runs right before a pixel takes a new value.
#[allow(clippy::too_many_arguments)]
fn stamp(
    canvas: &mut RasterImage,
    pos: Point,
    lambda: f64,
    strength: f64,
    pickup_rate: f64,
    pickup: &mut Pickup,
    mask: &dyn StampMask,
    before_write: &mut dyn FnMut(u32, u32, Rgba),
) -> usize {
    pickup.fit(lambda);
    let (w, h) = (canvas.width(), canvas.height());
    let c = snap_to_grid(pos, w, h);
    let r2 = lambda * lambda;
    let half = pickup.half;
    let mut visited = 0;
    for dy in -half..=half {
        let y = c.y as i64 + dy as i64;
        if y < 0 || y >= h as i64 {
            continue;
        }
        for dx in -half..=half {
            let x = c.x as i64 + dx as i64;
            if x < 0 || x >= w as i64 || ((dx * dx + dy * dy) as f64) > r2 {
                continue;
            }
            let (x, y) = (x as u32, y as u32);
            if !mask.contains(x, y) {
                continue;
            }
            visited += 1;
            let i = pickup.index(dx, dy);
            let old = canvas.get(x, y);
            let new = lerp_unchecked(old, pickup.cells[i], strength);
            if new != old {
                before_write(x, y, old);
                canvas.set(x, y, new);
            }
            pickup.cells[i] = lerp_unchecked(pickup.cells[i], new, pickup_rate);
        }
    }
    visited
}

/// A rectangular block of canvas pixels in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub pixels: Vec<Rgba>,
}

impl Tile {
    pub fn rect(&self) -> PixelRect {
        PixelRect::new(self.x, self.y, self.x + self.w, self.y + self.h)
    }
}

/// Tiles changed by one engine step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TileDiff {
    pub tiles: Vec<Tile>,
    /// Set when the input sample lay outside the canvas and was clamped.
    pub clamped: bool,
}

impl TileDiff {
    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Writes the tiles onto `image`.
    pub fn apply(&self, image: &mut RasterImage) -> Result<()> {
        for t in &self.tiles {
            let r = t.rect();
            if r.x1 > image.width() || r.y1 > image.height() || t.pixels.len() != (t.w * t.h) as usize {
                return Err(Error::Malformed(format!("tile at ({}, {}) does not fit the canvas", t.x, t.y)));
            }
            image.write_rect(r, &t.pixels);
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct TileGrid {
    cols: u32,
    width: u32,
    height: u32,
}

impl TileGrid {
    fn new(width: u32, height: u32) -> Self {
        TileGrid {
            cols: width.div_ceil(TILE_SIZE),
            width,
            height,
        }
    }

    fn count(&self) -> usize {
        (self.cols * self.height.div_ceil(TILE_SIZE)) as usize
    }

    fn index(&self, x: u32, y: u32) -> usize {
        ((y / TILE_SIZE) * self.cols + x / TILE_SIZE) as usize
    }

    fn rect(&self, i: usize) -> PixelRect {
        let tx = i as u32 % self.cols * TILE_SIZE;
        let ty = i as u32 / self.cols * TILE_SIZE;
        PixelRect::new(tx, ty, (tx + TILE_SIZE).min(self.width), (ty + TILE_SIZE).min(self.height))
    }

    fn tile(&self, canvas: &RasterImage, i: usize) -> Tile {
        let r = self.rect(i);
        Tile {
            x: r.x0,
            y: r.y0,
            w: r.width(),
            h: r.height(),
            pixels: canvas.read_rect(r),
        }
    }
}

/// A completed stroke in replayable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeRecord {
    pub tool: Tool,
    pub samples: Vec<StrokeSample>,
}

/// Per-stroke instrumentation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrokeStats {
    pub samples: usize,
    pub stamps: usize,
    /// Selection update time per input sample.
    pub selection_ms: Vec<f64>,
    /// Stamping time per advance.
    pub smudge_ms: Vec<f64>,
}

impl StrokeStats {
    pub fn total_selection_ms(&self) -> f64 {
        self.selection_ms.iter().sum()
    }

    pub fn total_smudge_ms(&self) -> f64 {
        self.smudge_ms.iter().sum()
    }
}

/// Everything known about a stroke once it ends.
#[derive(Clone, Debug)]
pub struct FinishedStroke {
    pub record: StrokeRecord,
    pub trace: Vec<SelectionTrace>,
    pub stats: StrokeStats,
    /// Union of all selected sets over the stroke (empty for the footprint tool).
    pub ever_selected: RegionSet,
    pub clamped: bool,
}

/// Result of feeding one sample to the session.
#[derive(Clone, Debug)]
pub struct Advance {
    pub diff: TileDiff,
    pub selection: SelectionTrace,
    pub stamps: usize,
    /// Radius of the last stamp, or of the seeded pickup when none was placed.
    pub lambda: f64,
    pub selection_ms: f64,
    pub smudge_ms: f64,
}

/// Selection state exposed to overlays.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub t: u64,
    pub covered: RegionSet,
    pub selected: RegionSet,
    pub scores: Vec<CandidateScore>,
}

/// Tints the given regions over a transparent image.
pub fn render_overlay(map: &RegionMap, regions: &RegionSet, tint: Rgba) -> RasterImage {
    let mut member = vec![false; map.len()];
    for &id in regions {
        if let Some(m) = member.get_mut(id as usize) {
            *m = true;
        }
    }
    let w = map.width();
    let labels = map.labels();
    RasterImage::from_fn(w, map.height(), |x, y| {
        if member[labels[(y * w + x) as usize] as usize] {
            tint
        } else {
            Rgba::TRANSPARENT
        }
    })
    .expect("map dimensions are valid")
}

enum Mask {
    Regions(RegionSet),
    Footprint(PointSet),
}

struct ActiveStroke {
    tool: Tool,
    stroke: Stroke,
    raw: Vec<StrokeSample>,
    targets: TargetSet,
    mask: Mask,
    pickup: Pickup,
    lambda: f64,
    last_stamp: Point,
    last_trace: SelectionTrace,
    trace: Vec<SelectionTrace>,
    ever_selected: RegionSet,
    snapshots: Vec<Option<Vec<Rgba>>>,
    stats: StrokeStats,
    clamped: bool,
}

type UndoEntry = Vec<(usize, Vec<Rgba>)>;

/// A single-writer painting session over one canvas and its region map.
pub struct SmudgeSession {
    canvas: RasterImage,
    map: RegionMap,
    params: Params,
    grid: TileGrid,
    active: Option<ActiveStroke>,
    undo: Vec<UndoEntry>,
    overlay: Overlay,
}

impl SmudgeSession {
    pub fn new(canvas: RasterImage, map: RegionMap, params: Params) -> Result<Self> {
        params.validate()?;
        if canvas.width() != map.width() || canvas.height() != map.height() {
            return Err(Error::Malformed(format!(
                "region map is {}x{} but the canvas is {}x{}",
                map.width(),
                map.height(),
                canvas.width(),
                canvas.height()
            )));
        }
        Ok(SmudgeSession {
            grid: TileGrid::new(canvas.width(), canvas.height()),
            canvas,
            map,
            params,
            active: None,
            undo: Vec::new(),
            overlay: Overlay::default(),
        })
    }

    /// Segments `canvas` according to `params` and opens a session on it.
    pub fn open(canvas: RasterImage, params: Params) -> Result<Self> {
        params.validate()?;
        let map = params.segment(&canvas)?;
        Self::new(canvas, map, params)
    }

    pub fn canvas(&self) -> &RasterImage {
        &self.canvas
    }

    pub fn map(&self) -> &RegionMap {
        &self.map
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn is_stroke_active(&self) -> bool {
        self.active.is_some()
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    pub fn overlay(&self) -> &Overlay {
        &self.overlay
    }

    fn idle(&self, what: &str) -> Result<()> {
        if self.active.is_some() {
            return Err(Error::Session(format!("cannot {what} while a stroke is active")));
        }
        Ok(())
    }

    pub fn set_params(&mut self, params: Params) -> Result<()> {
        self.idle("change parameters")?;
        params.validate()?;
        self.params = params;
        Ok(())
    }

    /// Replaces the region map, e.g. after re-segmenting with other settings.
    pub fn set_map(&mut self, map: RegionMap) -> Result<()> {
        self.idle("replace the region map")?;
        if map.width() != self.canvas.width() || map.height() != self.canvas.height() {
            return Err(Error::Malformed("region map does not match the canvas".into()));
        }
        self.map = map;
        self.overlay = Overlay::default();
        Ok(())
    }

    /// Re-segments the current canvas with the session parameters.
    pub fn resegment(&mut self) -> Result<()> {
        self.idle("segment")?;
        let map = self.params.segment(&self.canvas)?;
        self.set_map(map)
    }

    fn clamp_sample(&self, s: StrokeSample) -> Result<(StrokeSample, bool)> {
        if !s.x.is_finite() || !s.y.is_finite() || !s.t_ms.is_finite() {
            return Err(Error::Malformed("sample coordinates must be finite".into()));
        }
        if let Some(p) = s.pressure {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Malformed(format!("pressure {p} is outside [0, 1]")));
            }
        }
        let mx = (self.canvas.width() - 1) as f64;
        let my = (self.canvas.height() - 1) as f64;
        let c = StrokeSample {
            x: s.x.clamp(0.0, mx),
            y: s.y.clamp(0.0, my),
            ..s
        };
        Ok((c, c.x != s.x || c.y != s.y))
    }

    fn select(
        &self,
        tool: Tool,
        stroke: &Stroke,
        prev: &TargetSet,
    ) -> Result<(TargetSet, Mask, SelectionTrace)> {
        let (w, h) = (self.canvas.width(), self.canvas.height());
        let partial = PartialStroke::from_stroke(stroke, &self.params.window(), w, h)?;
        let rp = self.params.resemblance();
        let t = prev.t + 1;
        Ok(match tool {
            Tool::Ss => {
                let (next, trace) = update_target_set(prev, &partial, &self.map, &rp)?;
                let mask = Mask::Regions(next.selected.clone());
                (next, mask, trace)
            }
            Tool::Ts => {
                let covered = covered_regions(&partial.footprint, &self.map);
                let (kept, scores) = ts_select(&partial, &covered, &self.map, &rp)?;
                let trace = SelectionTrace {
                    t,
                    covered: covered.clone(),
                    base: RegionSet::new(),
                    base_score: 0.0,
                    candidate_scores: scores,
                    selected: kept.clone(),
                };
                let next = TargetSet {
                    covered,
                    base: RegionSet::new(),
                    selected: kept.clone(),
                    t,
                };
                (next, Mask::Regions(kept), trace)
            }
            Tool::Bs => {
                let covered = covered_regions(&partial.footprint, &self.map);
                let trace = SelectionTrace {
                    t,
                    covered: covered.clone(),
                    base: RegionSet::new(),
                    base_score: 0.0,
                    candidate_scores: Vec::new(),
                    selected: RegionSet::new(),
                };
                let next = TargetSet {
                    covered,
                    base: RegionSet::new(),
                    selected: RegionSet::new(),
                    t,
                };
                (next, Mask::Footprint(partial.footprint), trace)
            }
        })
    }

    fn mask_view<'a>(map: &'a RegionMap, mask: &'a Mask) -> Result<Box<dyn StampMask + 'a>> {
        Ok(match mask {
            Mask::Regions(ids) => Box::new(RegionMask::new(map, ids)?),
            Mask::Footprint(fp) => Box::new(fp.clone()),
        })
    }

    fn mask_is_empty(mask: &Mask) -> bool {
        match mask {
            Mask::Regions(ids) => ids.is_empty(),
            Mask::Footprint(fp) => fp.is_empty(),
        }
    }

    /// Starts a stroke: selects targets from the single-sample window and
    /// seeds the pickup from the canvas under the initial brush disk.
    pub fn begin_stroke(&mut self, tool: Tool, first: StrokeSample) -> Result<Advance> {
        self.idle("begin a stroke")?;
        let (sample, clamped) = self.clamp_sample(first)?;
        let mut stroke = Stroke::new(self.params.resample_spacing)?;
        stroke.push(sample);

        let started = Instant::now();
        let (targets, mask, trace) = self.select(tool, &stroke, &TargetSet::default())?;
        let selection_ms = started.elapsed().as_secs_f64() * 1e3;

        let pos = sample.pos();
        let (w, h) = (self.canvas.width(), self.canvas.height());
        let view = Self::mask_view(&self.map, &mask)?;
        let lambda = if Self::mask_is_empty(&mask) {
            self.params.theta
        } else {
            let field = RadiusField::build(view.as_ref(), pos, pos, self.params.brush_max, w, h);
            clamp_radius(field.sigma(pos), self.params.theta, self.params.brush_max)
        };
        let pickup = Pickup::seed(&self.canvas, snap_to_grid(pos, w, h), lambda, view.as_ref());
        drop(view);

        self.overlay = Overlay {
            t: trace.t,
            covered: trace.covered.clone(),
            selected: trace.selected.clone(),
            scores: trace.candidate_scores.clone(),
        };
        let ever_selected = targets.selected.clone();
        self.active = Some(ActiveStroke {
            tool,
            stroke,
            raw: vec![sample],
            targets,
            mask,
            pickup,
            lambda,
            last_stamp: pos,
            last_trace: trace.clone(),
            trace: vec![trace.clone()],
            ever_selected,
            snapshots: vec![None; self.grid.count()],
            stats: StrokeStats {
                samples: 1,
                stamps: 0,
                selection_ms: vec![selection_ms],
                smudge_ms: Vec::new(),
            },
            clamped,
        });
        Ok(Advance {
            diff: TileDiff {
                tiles: Vec::new(),
                clamped,
            },
            selection: trace,
            stamps: 0,
            lambda,
            selection_ms,
            smudge_ms: 0.0,
        })
    }

    /// Feeds one input sample: updates the selection, then stamps along the
    /// segment from the last stamp position to the sample.
    pub fn advance(&mut self, sample: StrokeSample) -> Result<Advance> {
        let (sample, clamped) = self.clamp_sample(sample)?;
        let mut a = self
            .active
            .take()
            .ok_or_else(|| Error::Session("no active stroke".into()))?;
        let result = self.advance_active(&mut a, sample, clamped);
        self.active = Some(a);
        result
    }

    fn advance_active(&mut self, a: &mut ActiveStroke, sample: StrokeSample, clamped: bool) -> Result<Advance> {
        let started = Instant::now();
        let mut stroke = a.stroke.clone();
        stroke.push(sample);
        let (targets, mask, trace) = self.select(a.tool, &stroke, &a.targets)?;
        let selection_ms = started.elapsed().as_secs_f64() * 1e3;
        a.stroke = stroke;
        a.raw.push(sample);
        a.targets = targets;
        a.mask = mask;
        a.ever_selected.extend(trace.selected.iter().copied());
        a.last_trace = trace.clone();
        a.trace.push(trace.clone());
        a.clamped |= clamped;
        a.stats.samples += 1;
        a.stats.selection_ms.push(selection_ms);
        self.overlay = Overlay {
            t: trace.t,
            covered: trace.covered.clone(),
            selected: trace.selected.clone(),
            scores: trace.candidate_scores.clone(),
        };

        let started = Instant::now();
        let target = sample.pos();
        let strength = self.params.strength * sample.pressure.unwrap_or(1.0);
        let mut dirty: Vec<usize> = Vec::new();
        let mut stamps = 0;
        if !Self::mask_is_empty(&a.mask) {
            let (w, h) = (self.canvas.width(), self.canvas.height());
            let view = Self::mask_view(&self.map, &a.mask)?;
            let field = RadiusField::build(view.as_ref(), a.last_stamp, target, self.params.brush_max, w, h);
            let (theta, max) = (self.params.theta, self.params.brush_max);
            let total = a.last_stamp.distance(target);
            let start = a.last_stamp;
            let mut traveled = 0.0;
            let mut pos = start;
            loop {
                let step = self.params.stamp_spacing * clamp_radius(field.sigma(pos), theta, max);
                if traveled + step > total + 1e-9 {
                    break;
                }
                traveled += step;
                pos = start.lerp(target, (traveled / total).min(1.0));
                let lambda = clamp_radius(field.sigma(pos), theta, max);
                self.snapshot_tiles(&mut a.snapshots, PixelRect::around(pos, pos, lambda + 1.0, w, h));
                let grid = &self.grid;
                let mut record = |x: u32, y: u32, _old: Rgba| dirty.push(grid.index(x, y));
                stamp(
                    &mut self.canvas,
                    pos,
                    lambda,
                    strength,
                    self.params.pickup_rate,
                    &mut a.pickup,
                    view.as_ref(),
                    &mut record,
                );
                a.lambda = lambda;
                stamps += 1;
            }
            a.last_stamp = pos;
        } else {
            a.last_stamp = target;
        }
        dirty.sort_unstable();
        dirty.dedup();
        let diff = TileDiff {
            tiles: dirty.iter().map(|&i| self.grid.tile(&self.canvas, i)).collect(),
            clamped,
        };
        let smudge_ms = started.elapsed().as_secs_f64() * 1e3;
        a.stats.stamps += stamps;
        a.stats.smudge_ms.push(smudge_ms);
        Ok(Advance {
            diff,
            selection: trace,
            stamps,
            lambda: a.lambda,
            selection_ms,
            smudge_ms,
        })
    }

    fn snapshot_tiles(&self, snapshots: &mut [Option<Vec<Rgba>>], rect: PixelRect) {
        if rect.is_empty() {
            return;
        }
        let (c0, c1) = (rect.x0 / TILE_SIZE, (rect.x1 - 1) / TILE_SIZE);
        let (r0, r1) = (rect.y0 / TILE_SIZE, (rect.y1 - 1) / TILE_SIZE);
        for ty in r0..=r1 {
            for tx in c0..=c1 {
                let i = (ty * self.grid.cols + tx) as usize;
                if snapshots[i].is_none() {
                    snapshots[i] = Some(self.canvas.read_rect(self.grid.rect(i)));
                }
            }
        }
    }

    /// Ends the active stroke and pushes its undo entry.
    pub fn end_stroke(&mut self) -> Result<FinishedStroke> {
        let a = self
            .active
            .take()
            .ok_or_else(|| Error::Session("no active stroke".into()))?;
        let entry: UndoEntry = a
            .snapshots
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|px| (i, px)))
            .collect();
        self.undo.push(entry);
        Ok(FinishedStroke {
            record: StrokeRecord {
                tool: a.tool,
                samples: a.raw,
            },
            trace: a.trace,
            stats: a.stats,
            ever_selected: a.ever_selected,
            clamped: a.clamped,
        })
    }

    /// Restores the canvas to its state before the most recent stroke.
    /// Returns `None` when there is nothing to undo.
    pub fn undo(&mut self) -> Result<Option<TileDiff>> {
        self.idle("undo")?;
        let Some(entry) = self.undo.pop() else {
            return Ok(None);
        };
        let mut tiles = Vec::with_capacity(entry.len());
        for (i, px) in entry {
            let r = self.grid.rect(i);
            self.canvas.write_rect(r, &px);
            tiles.push(self.grid.tile(&self.canvas, i));
        }
        Ok(Some(TileDiff { tiles, clamped: false }))
    }

    /// Feeds a whole recorded stroke.
    pub fn play(&mut self, record: &StrokeRecord) -> Result<FinishedStroke> {
        let mut it = record.samples.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Malformed("stroke has no samples".into()))?;
        self.begin_stroke(record.tool, *first)?;
        for s in it {
            if let Err(e) = self.advance(*s) {
                self.end_stroke()?;
                return Err(e);
            }
        }
        self.end_stroke()
    }

    /// Current selection of the active stroke, if any.
    pub fn current_selection(&self) -> Option<&SelectionTrace> {
        self.active.as_ref().map(|a| &a.last_trace)
    }

    pub fn into_canvas(self) -> RasterImage {
        self.canvas
    }
}
