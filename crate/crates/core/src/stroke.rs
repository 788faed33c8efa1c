//! Stroke resampling, the trailing partial-stroke window, and its rasterized
//! footprint and bone expansion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::raster::{PixelRect, Point};

/// Default uniform resampling distance in pixels.
pub const DEFAULT_SPACING: f64 = 2.0;
/// Default partial-stroke arc length and footprint width in pixels.
pub const DEFAULT_LENGTH: f64 = 110.0;
pub const DEFAULT_WIDTH: f64 = 110.0;
/// Default dilation of the stroke bone in pixels.
pub const DEFAULT_BONE_RADIUS: f64 = 5.0;

const EPS: f64 = 1e-9;

/// One input sample. `t_ms` counts from the start of the stroke.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub t_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<f64>,
}

impl StrokeSample {
    pub fn new(x: f64, y: f64, t_ms: f64) -> Self {
        StrokeSample {
            x,
            y,
            t_ms,
            pressure: None,
        }
    }

    pub fn with_pressure(mut self, pressure: f64) -> Self {
        self.pressure = Some(pressure);
        self
    }

    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }

    fn interpolate(&self, other: &StrokeSample, t: f64) -> StrokeSample {
        let p = self.pos().lerp(other.pos(), t);
        let pressure = match (self.pressure, other.pressure) {
            (Some(a), Some(b)) => Some(a + (b - a) * t),
            (a, b) => a.or(b),
        };
        StrokeSample {
            x: p.x,
            y: p.y,
            t_ms: self.t_ms + (other.t_ms - self.t_ms) * t,
            pressure,
        }
    }
}

/// A uniformly resampled stroke, fed incrementally.
///
/// Each emitted sample is the first point along the input polyline at
/// Euclidean distance `spacing` from the previous one, so consecutive samples
/// are exactly `spacing` apart except for the retained final input point.
/// Resampling an already resampled stroke reproduces it.
#[derive(Clone, Debug)]
pub struct Stroke {
    spacing: f64,
    samples: Vec<StrokeSample>,
    // whether the last entry of `samples` is the provisional last input point
    has_tail: bool,
    last_raw: Option<StrokeSample>,
    // last committed (on-grid) sample, center of the next search circle
    anchor: Option<StrokeSample>,
}

impl Stroke {
    pub fn new(spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::param("spacing", format!("{spacing} must be > 0")));
        }
        Ok(Stroke {
            spacing,
            samples: Vec::new(),
            has_tail: false,
            last_raw: None,
            anchor: None,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn samples(&self) -> &[StrokeSample] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a raw input sample.
    pub fn push(&mut self, raw: StrokeSample) {
        if self.has_tail {
            self.samples.pop();
            self.has_tail = false;
        }
        let Some(prev) = self.last_raw else {
            self.samples.push(raw);
            self.anchor = Some(raw);
            self.last_raw = Some(raw);
            return;
        };

        // walk the new segment prev -> raw, emitting every circle exit
        let s = self.spacing;
        let d = (raw.x - prev.x, raw.y - prev.y);
        let a = d.0 * d.0 + d.1 * d.1;
        let mut t_from = 0.0;
        if a > 0.0 {
            loop {
                let q = self.anchor.expect("anchor set after first sample");
                let f = (prev.x - q.x, prev.y - q.y);
                let b = 2.0 * (f.0 * d.0 + f.1 * d.1);
                let c = f.0 * f.0 + f.1 * f.1 - s * s;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    break;
                }
                let t = (-b + disc.sqrt()) / (2.0 * a);
                if t <= t_from + EPS || t > 1.0 + EPS {
                    break;
                }
                let t = t.min(1.0);
                let next = prev.interpolate(&raw, t);
                self.samples.push(next);
                self.anchor = Some(next);
                t_from = t;
            }
        }
        self.last_raw = Some(raw);

        let q = self.anchor.expect("anchor set");
        if q.pos().distance(raw.pos()) > EPS {
            self.samples.push(raw);
            self.has_tail = true;
        }
    }

    /// Total polyline length of the resampled samples.
    pub fn arc_length(&self) -> f64 {
        arc_length(&self.samples)
    }
}

/// Resamples `raw` uniformly at `spacing`; the final input point is kept.
pub fn resample_uniform(raw: &[StrokeSample], spacing: f64) -> Result<Stroke> {
    if raw.is_empty() {
        return Err(Error::Malformed("cannot resample an empty stroke".into()));
    }
    let mut stroke = Stroke::new(spacing)?;
    for s in raw {
        stroke.push(*s);
    }
    Ok(stroke)
}

pub fn arc_length(samples: &[StrokeSample]) -> f64 {
    samples.windows(2).map(|w| w[0].pos().distance(w[1].pos())).sum()
}

/// Longest suffix of `samples` whose polyline length is at most `length`.
pub fn partial_window(samples: &[StrokeSample], length: f64) -> &[StrokeSample] {
    if samples.is_empty() {
        return samples;
    }
    let mut start = samples.len() - 1;
    let mut acc = 0.0;
    while start > 0 {
        let seg = samples[start - 1].pos().distance(samples[start].pos());
        if acc + seg > length + EPS {
            break;
        }
        acc += seg;
        start -= 1;
    }
    &samples[start..]
}

/// Partial-stroke geometry configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    /// Arc-length budget `l` of the trailing window.
    pub length: f64,
    /// Full footprint width `w`; the footprint extends `w / 2` on each side.
    pub width: f64,
    /// Dilation radius of the bone.
    pub bone_radius: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            length: DEFAULT_LENGTH,
            width: DEFAULT_WIDTH,
            bone_radius: DEFAULT_BONE_RADIUS,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::param("stroke_length", "must be > 0"));
        }
        if !(self.width > 0.0) {
            return Err(Error::param("stroke_width", "must be > 0"));
        }
        if !(self.bone_radius >= 0.0) {
            return Err(Error::param("bone_radius", "must be >= 0"));
        }
        Ok(())
    }
}

/// The trailing window of a live stroke with its rasterized point sets.
#[derive(Clone, Debug)]
pub struct PartialStroke {
    pub window: Vec<StrokeSample>,
    pub length_budget: f64,
    pub width: f64,
    /// Pixels within `width / 2` of the window polyline.
    pub footprint: PointSet,
    /// Pixels within the bone radius of the window polyline.
    pub bone_expansion: PointSet,
}

impl PartialStroke {
    pub fn from_stroke(stroke: &Stroke, params: &WindowParams, grid_w: u32, grid_h: u32) -> Result<Self> {
        Self::from_samples(stroke.samples(), params, grid_w, grid_h)
    }

    pub fn from_samples(samples: &[StrokeSample], params: &WindowParams, grid_w: u32, grid_h: u32) -> Result<Self> {
        params.validate()?;
        let window = partial_window(samples, params.length);
        if window.is_empty() {
            return Err(Error::Malformed("partial stroke needs at least one sample".into()));
        }
        Ok(PartialStroke {
            window: window.to_vec(),
            length_budget: params.length,
            width: params.width,
            footprint: rasterize_footprint(window, params.width, grid_w, grid_h),
            bone_expansion: bone_expansion(window, params.bone_radius, grid_w, grid_h),
        })
    }

    pub fn head(&self) -> StrokeSample {
        *self.window.last().expect("window is non-empty")
    }
}

/// Pixels whose centers lie within `width / 2` of the window polyline.
pub fn rasterize_footprint(window: &[StrokeSample], width: f64, grid_w: u32, grid_h: u32) -> PointSet {
    let pts: Vec<Point> = window.iter().map(|s| s.pos()).collect();
    rasterize_capsules(&pts, width / 2.0, grid_w, grid_h)
}

/// Pixels whose centers lie within `radius` of the window polyline.
pub fn bone_expansion(window: &[StrokeSample], radius: f64, grid_w: u32, grid_h: u32) -> PointSet {
    let pts: Vec<Point> = window.iter().map(|s| s.pos()).collect();
    rasterize_capsules(&pts, radius, grid_w, grid_h)
}

/// Squared distance from `p` to the segment `a`–`b`.
#[inline]
pub fn segment_distance_sq(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.x + t * dx - p.x, a.y + t * dy - p.y);
    cx * cx + cy * cy
}

/// Union of the capsules of radius `radius` around each polyline segment
/// (a disk for a single point), sampled at pixel centers.
pub fn rasterize_capsules(points: &[Point], radius: f64, grid_w: u32, grid_h: u32) -> PointSet {
    if points.is_empty() || !(radius >= 0.0) {
        return PointSet::empty(grid_w, grid_h);
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let rect = PixelRect::around(lo, hi, radius, grid_w, grid_h);
    let mut out = PointSet::with_window(grid_w, grid_h, rect);
    if rect.is_empty() {
        return out;
    }
    let r2 = radius * radius;
    let segments: Vec<(Point, Point)> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for y in rect.y0..rect.y1 {
        let yf = y as f64;
        for &(a, b) in &segments {
            let Some((xmin, xmax)) = capsule_row_interval(a, b, radius, yf) else {
                continue;
            };
            let inside = |x: i64| segment_distance_sq(Point::new(x as f64, yf), a, b) <= r2;
            let mut l = xmin.ceil() as i64;
            let mut h = xmax.floor() as i64;
            // snap the analytic endpoints to the exact predicate
            while inside(l - 1) {
                l -= 1;
            }
            while l <= h && !inside(l) {
                l += 1;
            }
            while inside(h + 1) {
                h += 1;
            }
            while h >= l && !inside(h) {
                h -= 1;
            }
            if h < l {
                continue;
            }
            let l = l.max(0);
            let h = h.min(grid_w as i64 - 1);
            if l <= h {
                out.insert_span(y, l as u32, h as u32 + 1);
            }
        }
    }
    out
}

/// Continuous x-extent of the capsule around `a`–`b` on the horizontal line `y`.
fn capsule_row_interval(a: Point, b: Point, r: f64, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |l: f64, h: f64| {
        if l <= h {
            lo = lo.min(l);
            hi = hi.max(h);
        }
    };
    for c in [a, b] {
        let dy = y - c.y;
        if dy.abs() <= r {
            let half = (r * r - dy * dy).max(0.0).sqrt();
            take(c.x - half, c.x + half);
        }
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len > 0.0 {
        // perpendicular band |cross| <= r * len
        let (mut l1, mut h1) = if dy.abs() > 0.0 {
            let u = (dx * (y - a.y) - r * len) / dy;
            let v = (dx * (y - a.y) + r * len) / dy;
            (a.x + u.min(v), a.x + u.max(v))
        } else if (dx * (y - a.y)).abs() <= r * len {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (1.0, 0.0)
        };
        // projection onto the segment within [0, len^2]
        let (l2, h2) = if dx.abs() > 0.0 {
            let u = (0.0 - (y - a.y) * dy) / dx;
            let v = (len * len - (y - a.y) * dy) / dx;
            (a.x + u.min(v), a.x + u.max(v))
        } else {
            let proj = (y - a.y) * dy;
            if (0.0..=len * len).contains(&proj) {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (1.0, 0.0)
            }
        };
        l1 = l1.max(l2);
        h1 = h1.min(h2);
        if l1.is_finite() && h1.is_finite() {
            take(l1, h1);
        }
    }
    (lo <= hi).then_some((lo, hi))
}
