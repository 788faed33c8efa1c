//! Brute-force recomputation of footprints, boundaries and selection scores
//! over plain boolean grids. Nothing here goes through the library's point
//! sets, distance transforms or incremental scorer.

use std::collections::BTreeSet;

use region_smudge::params::Params;
use region_smudge::stroke::{partial_window, resample_uniform, StrokeSample};

pub type Mask = Vec<bool>;

#[derive(Clone, Debug)]
pub struct Grid {
    pub w: usize,
    pub h: usize,
    pub labels: Vec<u32>,
    pub n: usize,
}

impl Grid {
    pub fn new(w: usize, h: usize, labels: Vec<u32>) -> Grid {
        assert_eq!(labels.len(), w * h);
        let n = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Grid { w, h, labels, n }
    }

    pub fn area(&self, ids: &BTreeSet<u32>) -> Mask {
        self.labels.iter().map(|l| ids.contains(l)).collect()
    }

    /// Pixels of `id` on the image border or with a 4-neighbour elsewhere.
    pub fn boundary(&self, id: u32) -> Mask {
        let (w, h) = (self.w, self.h);
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if self.labels[y * w + x] != id {
                    continue;
                }
                let edge = x == 0
                    || y == 0
                    || x + 1 == w
                    || y + 1 == h
                    || self.labels[y * w + x - 1] != id
                    || self.labels[y * w + x + 1] != id
                    || self.labels[(y - 1) * w + x] != id
                    || self.labels[(y + 1) * w + x] != id;
                out[y * w + x] = edge;
            }
        }
        out
    }

    /// Union over `ids` of each boundary grown by Euclidean radius `r`.
    pub fn dilated_boundaries(&self, ids: &BTreeSet<u32>, r: f64) -> Mask {
        let (w, h) = (self.w as i64, self.h as i64);
        let reach = r.floor() as i64;
        let offsets: Vec<(i64, i64)> = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r * r)
            .collect();
        let mut out = vec![false; self.w * self.h];
        for &id in ids {
            let b = self.boundary(id);
            for (i, _) in b.iter().enumerate().filter(|(_, &v)| v) {
                let (x, y) = ((i % self.w) as i64, (i / self.w) as i64);
                for &(dx, dy) in &offsets {
                    let (xx, yy) = (x + dx, y + dy);
                    if xx >= 0 && yy >= 0 && xx < w && yy < h {
                        out[(yy * w + xx) as usize] = true;
                    }
                }
            }
        }
        out
    }
}

fn seg_dist_sq(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx - px, a.1 + t * dy - py);
    cx * cx + cy * cy
}

/// Pixel centers within `r` of the polyline through `pts`.
pub fn capsules(w: usize, h: usize, pts: &[(f64, f64)], r: f64) -> Mask {
    let segs: Vec<((f64, f64), (f64, f64))> = if pts.len() == 1 {
        vec![(pts[0], pts[0])]
    } else {
        pts.windows(2).map(|s| (s[0], s[1])).collect()
    };
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = segs
                .iter()
                .any(|&(a, b)| seg_dist_sq(x as f64, y as f64, a, b) <= r * r);
        }
    }
    out
}

pub fn count(m: &Mask) -> usize {
    m.iter().filter(|&&v| v).count()
}

pub fn count_and(a: &Mask, b: &Mask) -> usize {
    a.iter().zip(b).filter(|(&x, &y)| x && y).count()
}

fn pair(overlap: usize, candidate: usize, stroke: usize) -> f64 {
    if stroke == 0 {
        return 0.0;
    }
    overlap as f64 / candidate as f64 + overlap as f64 / stroke as f64
}

pub fn region_score(footprint: &Mask, area: &Mask) -> f64 {
    pair(count_and(footprint, area), count(area), count(footprint))
}

pub fn boundary_score(bone: &Mask, dilated: &Mask) -> f64 {
    pair(count_and(bone, dilated), count(dilated), count(bone))
}

/// Weighted score of a candidate set; the empty set scores 0.
pub fn score(grid: &Grid, footprint: &Mask, bone: &Mask, ids: &BTreeSet<u32>, p: &Params) -> f64 {
    if ids.is_empty() {
        return 0.0;
    }
    let area = grid.area(ids);
    let dil = grid.dilated_boundaries(ids, p.boundary_dilation);
    p.alpha * region_score(footprint, &area) + p.beta * boundary_score(bone, &dil)
}

pub fn covered(grid: &Grid, footprint: &Mask) -> BTreeSet<u32> {
    footprint
        .iter()
        .zip(&grid.labels)
        .filter(|(&f, _)| f)
        .map(|(_, &l)| l)
        .collect()
}

/// One incremental update from the previous selection.
pub fn ss_step(grid: &Grid, prev: &BTreeSet<u32>, footprint: &Mask, bone: &Mask, p: &Params) -> BTreeSet<u32> {
    let cov = covered(grid, footprint);
    let base: BTreeSet<u32> = prev.intersection(&cov).copied().collect();
    let base_score = score(grid, footprint, bone, &base, p);
    let mut best: Option<(u32, f64)> = None;
    for &id in cov.difference(&base) {
        let mut cand = base.clone();
        cand.insert(id);
        let s = score(grid, footprint, bone, &cand, p);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    let mut out = base;
    if let Some((id, s)) = best {
        if s > p.gamma * base_score {
            out.insert(id);
        }
    }
    out
}

/// Singletons scoring at least `ts_fraction` of the best singleton.
pub fn ts_step(grid: &Grid, footprint: &Mask, bone: &Mask, p: &Params) -> BTreeSet<u32> {
    let scores: Vec<(u32, f64)> = covered(grid, footprint)
        .into_iter()
        .map(|id| (id, score(grid, footprint, bone, &BTreeSet::from([id]), p)))
        .collect();
    let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    scores
        .into_iter()
        .filter(|&(_, s)| s >= p.ts_fraction * max)
        .map(|(id, _)| id)
        .collect()
}

/// Footprint and bone masks of the trailing window after each raw sample.
pub fn windows(w: usize, h: usize, raw: &[StrokeSample], p: &Params) -> Vec<(Mask, Mask)> {
    (1..=raw.len())
        .map(|k| {
            let stroke = resample_uniform(&raw[..k], p.resample_spacing).expect("resample");
            let win = partial_window(stroke.samples(), p.stroke_length);
            let pts: Vec<(f64, f64)> = win.iter().map(|s| (s.x, s.y)).collect();
            (
                capsules(w, h, &pts, p.stroke_width / 2.0),
                capsules(w, h, &pts, p.bone_radius),
            )
        })
        .collect()
}

/// SS selected sets after every raw sample of one stroke.
pub fn ss_trace(grid: &Grid, raw: &[StrokeSample], p: &Params) -> Vec<BTreeSet<u32>> {
    let mut prev = BTreeSet::new();
    windows(grid.w, grid.h, raw, p)
        .iter()
        .map(|(f, b)| {
            prev = ss_step(grid, &prev, f, b, p);
            prev.clone()
        })
        .collect()
}

pub fn ts_trace(grid: &Grid, raw: &[StrokeSample], p: &Params) -> Vec<BTreeSet<u32>> {
    windows(grid.w, grid.h, raw, p)
        .iter()
        .map(|(f, b)| ts_step(grid, f, b, p))
        .collect()
}

/// Whether `set` is 4-connected as a union of pixels.
pub fn connected(grid: &Grid, set: &BTreeSet<u32>) -> bool {
    let m = grid.area(set);
    let Some(start) = m.iter().position(|&v| v) else {
        return true;
    };
    let mut seen = vec![false; m.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        let (x, y) = (i % grid.w, i / grid.w);
        let mut nb = Vec::with_capacity(4);
        if x > 0 {
            nb.push(i - 1);
        }
        if x + 1 < grid.w {
            nb.push(i + 1);
        }
        if y > 0 {
            nb.push(i - grid.w);
        }
        if y + 1 < grid.h {
            nb.push(i + grid.w);
        }
        for j in nb {
            if m[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    count(&m) == count(&seen)
}

/// Labels 4-connected runs of equal color, numbered in raster order of
/// first appearance.
pub fn flood_labels(w: usize, h: usize, px: &[[u8; 4]]) -> Grid {
    let mut labels = vec![u32::MAX; w * h];
    let mut next = 0;
    for start in 0..w * h {
        if labels[start] != u32::MAX {
            continue;
        }
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let nb = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for j in nb.into_iter().flatten() {
                if labels[j] == u32::MAX && px[j] == px[start] {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    Grid::new(w, h, labels)
}
