//! Exact Euclidean distance transform and Euclidean dilation.
//!
//! The transform is the separable lower-envelope-of-parabolas method: a
//! column pass produces squared 1-D distances, a row pass folds them into
//! exact squared 2-D distances. All squared distances are integers and are
//! carried exactly in `f64`.

use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::raster::{PixelPos, PixelRect};

const INF: f64 = f64::INFINITY;

/// Per-pixel squared distances over a rectangular window of the grid.
#[derive(Clone, Debug)]
pub struct DistanceField {
    rect: PixelRect,
    squared: Vec<f64>,
}

impl DistanceField {
    pub fn window(&self) -> PixelRect {
        self.rect
    }

    /// Squared distance at `(x, y)`; infinite outside the window or when the
    /// mask had no pixels.
    pub fn squared(&self, x: u32, y: u32) -> f64 {
        if !self.rect.contains(x, y) {
            return INF;
        }
        let i = (y - self.rect.y0) as usize * self.rect.width() as usize + (x - self.rect.x0) as usize;
        self.squared[i]
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.squared(x, y).sqrt()
    }

    pub fn at(&self, p: PixelPos) -> f64 {
        self.get(p.x, p.y)
    }
}

/// Distance from every pixel of the grid to the nearest member of `mask`.
pub fn distance_transform(mask: &PointSet) -> Result<DistanceField> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(distance_transform_in(mask, PixelRect::full(mask.width(), mask.height())))
}

/// Distance transform restricted to `rect`, considering only the mask pixels
/// inside it. Values are exact wherever the true nearest mask pixel lies in
/// `rect`.
pub(crate) fn distance_transform_in(mask: &PointSet, rect: PixelRect) -> DistanceField {
    let w = rect.width() as usize;
    let h = rect.height() as usize;
    let mut grid = vec![INF; w * h];

    // Column pass: squared distance to the nearest mask pixel in the same column.
    let mut col = vec![INF; h];
    for cx in 0..w {
        let x = rect.x0 + cx as u32;
        let mut last: Option<usize> = None;
        for cy in 0..h {
            if mask.contains(x, rect.y0 + cy as u32) {
                last = Some(cy);
            }
            col[cy] = last.map_or(INF, |l| (cy - l) as f64);
        }
        let mut next: Option<usize> = None;
        for cy in (0..h).rev() {
            if mask.contains(x, rect.y0 + cy as u32) {
                next = Some(cy);
            }
            if let Some(n) = next {
                col[cy] = col[cy].min((n - cy) as f64);
            }
            grid[cy * w + cx] = col[cy] * col[cy];
        }
    }

    // Row pass: lower envelope of parabolas rooted at the column values.
    let mut sites = vec![0usize; w];
    let mut bounds = vec![0f64; w + 1];
    let mut row = vec![INF; w];
    for cy in 0..h {
        let line = &mut grid[cy * w..(cy + 1) * w];
        row.copy_from_slice(line);
        envelope_1d(&row, line, &mut sites, &mut bounds);
    }

    DistanceField { rect, squared: grid }
}

fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if f[q] == INF {
            continue;
        }
        let qf = q as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = -INF;
                z[1] = INF;
                break;
            }
            let p = v[k as usize];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = INF;
            break;
        }
    }
    if k < 0 {
        out.fill(INF);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[j + 1] < qf {
            j += 1;
        }
        let p = v[j];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// All grid pixels within Euclidean distance `radius` of some member of `points`.
///
/// Agrees exactly with thresholding [`distance_transform`] at `radius`.
pub fn dilate(points: &PointSet, radius: f64) -> Result<PointSet> {
    if !(radius >= 0.0) {
        return Err(Error::param("radius", format!("{radius} must be >= 0")));
    }
    let (width, height) = (points.width(), points.height());
    let Some(bounds) = points.bounds() else {
        return Ok(PointSet::empty(width, height));
    };
    let reach = radius.floor().min(u32::MAX as f64) as u32;
    let rect = bounds.expand(reach, width, height);
    let field = distance_transform_in(points, rect);
    let mut out = PointSet::with_window(width, height, rect);
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            if field.get(x, y) <= radius {
                out.insert(x, y);
            }
        }
    }
    Ok(out)
}
