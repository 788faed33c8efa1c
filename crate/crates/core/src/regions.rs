//! Partitioning a painting into labeled, 4-connected color regions.
//!
//! Flat-filled paintings are labeled directly by exact color equality.
//! General paintings go through a joint RGB+XY mean-shift filter first, then
//! the filtered modes are grouped into connected components and tiny
//! components are merged into their closest-colored neighbor.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use image::{ImageBuffer, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::dilate;
use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::raster::{PixelRect, RasterImage, Rgba};

pub type RegionId = u32;

/// Default expansion of region boundaries for boundary resemblance.
pub const DEFAULT_BOUNDARY_DILATION: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct Region {
    pub id: RegionId,
    pub area: PointSet,
    pub boundary: PointSet,
    pub dilated_boundary: PointSet,
    pub representative_color: Rgba,
}

/// A full partition of the canvas into regions with consecutive ids.
#[derive(Clone, Debug)]
pub struct RegionMap {
    width: u32,
    height: u32,
    labels: Vec<RegionId>,
    regions: Vec<Region>,
    boundary_dilation: f64,
}

impl RegionMap {
    /// Builds a map from an arbitrary label grid.
    ///
    /// Labels are renumbered consecutively in raster order of first
    /// appearance. `color` receives the original label and the region's area.
    pub fn from_labels(
        width: u32,
        height: u32,
        raw: &[u32],
        boundary_dilation: f64,
        mut color: impl FnMut(u32, &PointSet) -> Rgba,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if raw.len() != width as usize * height as usize {
            return Err(Error::Malformed(format!(
                "label grid has {} entries for {width}x{height}",
                raw.len()
            )));
        }
        if !(boundary_dilation >= 0.0) {
            return Err(Error::param("boundary_dilation", "must be >= 0"));
        }

        let mut remap: BTreeMap<u32, RegionId> = BTreeMap::new();
        let mut originals = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut boxes: Vec<PixelRect> = Vec::new();
        for (i, &l) in raw.iter().enumerate() {
            let next = remap.len() as RegionId;
            let id = *remap.entry(l).or_insert_with(|| {
                originals.push(l);
                next
            });
            let x = (i % width as usize) as u32;
            let y = (i / width as usize) as u32;
            let px = PixelRect::new(x, y, x + 1, y + 1);
            if id as usize == boxes.len() {
                boxes.push(px);
            } else {
                boxes[id as usize] = boxes[id as usize].union(&px);
            }
            labels.push(id);
        }

        let n = boxes.len();
        let mut areas: Vec<PointSet> = boxes
            .iter()
            .map(|b| PointSet::with_window(width, height, *b))
            .collect();
        let mut boundaries = areas.clone();
        for y in 0..height {
            let row = &labels[(y * width) as usize..((y + 1) * width) as usize];
            let mut start = 0u32;
            for x in 1..=width {
                if x == width || row[x as usize] != row[start as usize] {
                    areas[row[start as usize] as usize].insert_span(y, start, x);
                    start = x;
                }
            }
            for x in 0..width {
                let id = row[x as usize];
                let at = |xx: u32, yy: u32| labels[(yy * width + xx) as usize];
                let edge = x == 0
                    || y == 0
                    || x + 1 == width
                    || y + 1 == height
                    || at(x - 1, y) != id
                    || at(x + 1, y) != id
                    || at(x, y - 1) != id
                    || at(x, y + 1) != id;
                if edge {
                    boundaries[id as usize].insert(x, y);
                }
            }
        }

        let dilated: Vec<PointSet> = boundaries
            .par_iter()
            .map(|b| dilate(b, boundary_dilation))
            .collect::<Result<_>>()?;

        let mut regions = Vec::with_capacity(n);
        for (id, ((area, boundary), dilated_boundary)) in
            areas.into_iter().zip(boundaries).zip(dilated).enumerate()
        {
            let representative_color = color(originals[id], &area);
            regions.push(Region {
                id: id as RegionId,
                area,
                boundary,
                dilated_boundary,
                representative_color,
            });
        }

        Ok(RegionMap {
            width,
            height,
            labels,
            regions,
            boundary_dilation,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn boundary_dilation(&self) -> f64 {
        self.boundary_dilation
    }

    #[inline]
    pub fn label(&self, x: u32, y: u32) -> RegionId {
        self.labels[(y * self.width + x) as usize]
    }

    pub fn labels(&self) -> &[RegionId] {
        &self.labels
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: RegionId) -> Result<&Region> {
        self.regions.get(id as usize).ok_or(Error::UnknownRegion(id))
    }

    /// Union of the areas of `ids`.
    pub fn union_area<'a>(&self, ids: impl IntoIterator<Item = &'a RegionId>) -> Result<PointSet> {
        let mut out = PointSet::empty(self.width, self.height);
        for &id in ids {
            out.union_with(&self.region(id)?.area);
        }
        Ok(out)
    }

    /// Union of the dilated boundaries of `ids`.
    pub fn union_dilated_boundary<'a>(&self, ids: impl IntoIterator<Item = &'a RegionId>) -> Result<PointSet> {
        let mut out = PointSet::empty(self.width, self.height);
        for &id in ids {
            out.union_with(&self.region(id)?.dilated_boundary);
        }
        Ok(out)
    }

    /// 4-adjacency between regions, indexed by region id.
    pub fn adjacency(&self) -> Vec<BTreeSet<RegionId>> {
        let mut adj = vec![BTreeSet::new(); self.regions.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let a = self.label(x, y);
                if x + 1 < self.width {
                    let b = self.label(x + 1, y);
                    if a != b {
                        adj[a as usize].insert(b);
                        adj[b as usize].insert(a);
                    }
                }
                if y + 1 < self.height {
                    let b = self.label(x, y + 1);
                    if a != b {
                        adj[a as usize].insert(b);
                        adj[b as usize].insert(a);
                    }
                }
            }
        }
        adj
    }

    /// The canvas painted with each region's representative color.
    pub fn render(&self) -> RasterImage {
        let colors: Vec<Rgba> = self.regions.iter().map(|r| r.representative_color).collect();
        RasterImage::from_pixels(
            self.width,
            self.height,
            self.labels.iter().map(|&l| colors[l as usize]).collect(),
        )
        .expect("map dimensions are valid")
    }
}

/// Pixels of `area` with at least one 4-neighbor outside it; the image border
/// counts as outside.
pub fn region_boundary(area: &PointSet) -> PointSet {
    let (w, h) = (area.width(), area.height());
    let mut out = PointSet::with_window(w, h, area.bounds().unwrap_or(PixelRect::new(0, 0, 0, 0)));
    for p in area.iter() {
        let (x, y) = (p.x, p.y);
        let edge = x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || !area.contains(x - 1, y)
            || !area.contains(x + 1, y)
            || !area.contains(x, y - 1)
            || !area.contains(x, y + 1);
        if edge {
            out.insert(x, y);
        }
    }
    out
}

/// Maximal 4-connected components of exactly equal RGBA.
pub fn flat_fill_regions(image: &RasterImage) -> Result<RegionMap> {
    flat_fill_regions_with(image, DEFAULT_BOUNDARY_DILATION)
}

pub fn flat_fill_regions_with(image: &RasterImage, boundary_dilation: f64) -> Result<RegionMap> {
    let px = image.pixels();
    let labels = connected_components(image.width(), image.height(), |a, b| px[a] == px[b]);
    RegionMap::from_labels(image.width(), image.height(), &labels, boundary_dilation, |_, area| {
        let p = area.iter().next().expect("regions are non-empty");
        image.get(p.x, p.y)
    })
}

/// Labels 4-connected components of the graph whose edges join neighboring
/// pixel indices accepted by `same`. Labels follow raster order of each
/// component's first pixel.
fn connected_components(width: u32, height: u32, same: impl Fn(usize, usize) -> bool) -> Vec<u32> {
    let (w, h) = (width as usize, height as usize);
    let mut labels = vec![u32::MAX; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] != u32::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if labels[j] == u32::MAX && same(i, j) {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        next += 1;
    }
    labels
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftParams {
    /// Spatial bandwidth in pixels.
    pub spatial_bandwidth: f64,
    /// Color bandwidth in channel units.
    pub color_bandwidth: f64,
    /// Components smaller than this many pixels are merged away.
    pub min_region: usize,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        MeanShiftParams {
            spatial_bandwidth: 8.0,
            color_bandwidth: 16.0,
            min_region: 64,
        }
    }
}

const MAX_SHIFT_ITERATIONS: usize = 20;
const SHIFT_EPSILON: f64 = 0.01;

/// Mean-shift segmentation in the joint (R, G, B, X, Y) space.
pub fn meanshift_regions(image: &RasterImage, params: MeanShiftParams) -> Result<RegionMap> {
    meanshift_regions_with(image, params, DEFAULT_BOUNDARY_DILATION)
}

pub fn meanshift_regions_with(
    image: &RasterImage,
    params: MeanShiftParams,
    boundary_dilation: f64,
) -> Result<RegionMap> {
    let MeanShiftParams {
        spatial_bandwidth: hs,
        color_bandwidth: hr,
        min_region,
    } = params;
    if !(hs > 0.0) {
        return Err(Error::param("spatial_bandwidth", "must be > 0"));
    }
    if !(hr > 0.0) {
        return Err(Error::param("color_bandwidth", "must be > 0"));
    }
    if min_region < 1 {
        return Err(Error::param("min_region", "must be >= 1"));
    }
    let (w, h) = (image.width(), image.height());
    let modes = meanshift_filter(image, hs, hr);

    let link = (hr / 2.0) * (hr / 2.0);
    let raw = connected_components(w, h, |a, b| {
        let (ma, mb) = (&modes[a], &modes[b]);
        (0..3).map(|c| (ma[c] - mb[c]).powi(2)).sum::<f64>() < link
    });
    let merged = merge_small_components(image, &raw, min_region);

    RegionMap::from_labels(w, h, &merged, boundary_dilation, |_, area| mean_color(image, area))
}

/// Converged RGB mode of every pixel under a flat unit-ball kernel in the
/// bandwidth-scaled joint space. Rows are independent, so they run in parallel.
fn meanshift_filter(image: &RasterImage, hs: f64, hr: f64) -> Vec<[f64; 3]> {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let reach = hs.floor() as i64;
    let px = image.pixels();
    (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).map(move |x| {
                let c0 = px[(y * w + x) as usize].0;
                let (mut mx, mut my) = (x as f64, y as f64);
                let mut mc = [c0[0] as f64, c0[1] as f64, c0[2] as f64];
                for _ in 0..MAX_SHIFT_ITERATIONS {
                    let cx = mx.round() as i64;
                    let cy = my.round() as i64;
                    let (mut sx, mut sy, mut sc, mut n) = (0.0, 0.0, [0.0f64; 3], 0usize);
                    for yy in (cy - reach - 1).max(0)..=(cy + reach + 1).min(h - 1) {
                        let dy = (yy as f64 - my) / hs;
                        for xx in (cx - reach - 1).max(0)..=(cx + reach + 1).min(w - 1) {
                            let dx = (xx as f64 - mx) / hs;
                            let s = dx * dx + dy * dy;
                            if s > 1.0 {
                                continue;
                            }
                            let c = px[(yy * w + xx) as usize].0;
                            let mut d = s;
                            for k in 0..3 {
                                let dc = (c[k] as f64 - mc[k]) / hr;
                                d += dc * dc;
                            }
                            if d <= 1.0 {
                                sx += xx as f64;
                                sy += yy as f64;
                                for k in 0..3 {
                                    sc[k] += c[k] as f64;
                                }
                                n += 1;
                            }
                        }
                    }
                    if n == 0 {
                        break;
                    }
                    let nf = n as f64;
                    let (nx, ny) = (sx / nf, sy / nf);
                    let nc = [sc[0] / nf, sc[1] / nf, sc[2] / nf];
                    let shift = ((nx - mx) / hs).powi(2)
                        + ((ny - my) / hs).powi(2)
                        + (0..3).map(|k| ((nc[k] - mc[k]) / hr).powi(2)).sum::<f64>();
                    mx = nx;
                    my = ny;
                    mc = nc;
                    if shift < SHIFT_EPSILON * SHIFT_EPSILON {
                        break;
                    }
                }
                mc
            })
        })
        .collect()
}

fn mean_color(image: &RasterImage, area: &PointSet) -> Rgba {
    let mut sum = [0u64; 4];
    for p in area.iter() {
        let c = image.get(p.x, p.y).0;
        for k in 0..4 {
            sum[k] += c[k] as u64;
        }
    }
    let n = area.len().max(1) as u64;
    let mut out = [0u8; 4];
    for k in 0..4 {
        out[k] = ((sum[k] * 2 + n) / (2 * n)) as u8;
    }
    Rgba(out)
}

/// Repeatedly folds the smallest component below `min_region` into the
/// 4-adjacent component with the nearest representative RGB color. Ties go to
/// the smaller component size first, then to the lower id.
fn merge_small_components(image: &RasterImage, labels: &[u32], min_region: usize) -> Vec<u32> {
    let n = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut size = vec![0usize; n];
    let mut sums = vec![[0u64; 3]; n];
    let mut adj = vec![BTreeSet::new(); n];
    for (i, &l) in labels.iter().enumerate() {
        size[l as usize] += 1;
        let c = image.pixels()[i].0;
        for k in 0..3 {
            sums[l as usize][k] += c[k] as u64;
        }
        let (x, y) = (i % w, i / w);
        if x + 1 < w && labels[i + 1] != l {
            adj[l as usize].insert(labels[i + 1]);
            adj[labels[i + 1] as usize].insert(l);
        }
        if y + 1 < h && labels[i + w] != l {
            adj[l as usize].insert(labels[i + w]);
            adj[labels[i + w] as usize].insert(l);
        }
    }

    let color = |sums: &[[u64; 3]], size: &[usize], id: usize| -> [f64; 3] {
        let s = size[id] as f64;
        [sums[id][0] as f64 / s, sums[id][1] as f64 / s, sums[id][2] as f64 / s]
    };

    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut queue: BTreeSet<(usize, u32)> = (0..n)
        .filter(|&i| size[i] < min_region)
        .map(|i| (size[i], i as u32))
        .collect();
    while let Some((_, id)) = queue.pop_first() {
        let id = id as usize;
        if adj[id].is_empty() {
            continue;
        }
        let here = color(&sums, &size, id);
        let target = *adj[id]
            .iter()
            .min_by(|&&a, &&b| {
                let da = dist2(here, color(&sums, &size, a as usize));
                let db = dist2(here, color(&sums, &size, b as usize));
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("non-empty adjacency") as usize;

        let was_small = size[target] < min_region;
        if was_small {
            queue.remove(&(size[target], target as u32));
        }
        size[target] += size[id];
        for k in 0..3 {
            sums[target][k] += sums[id][k];
        }
        let neighbors = std::mem::take(&mut adj[id]);
        for nb in neighbors {
            let nb = nb as usize;
            adj[nb].remove(&(id as u32));
            if nb != target {
                adj[nb].insert(target as u32);
                adj[target].insert(nb as u32);
            }
        }
        parent[id] = target as u32;
        size[id] = 0;
        if size[target] < min_region {
            queue.insert((size[target], target as u32));
        }
    }

    let find = |mut i: u32| {
        while parent[i as usize] != i {
            i = parent[i as usize];
        }
        i
    };
    labels.iter().map(|&l| find(l)).collect()
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

#[derive(Serialize, Deserialize)]
struct SidecarIndex {
    width: u32,
    height: u32,
    boundary_dilation: f64,
    regions: Vec<SidecarRegion>,
}

#[derive(Serialize, Deserialize)]
struct SidecarRegion {
    id: RegionId,
    color: [u8; 4],
    area: usize,
}

/// Writes the 16-bit grayscale label PNG and its JSON index.
pub fn save_sidecar(map: &RegionMap, label_png: impl AsRef<Path>, index_json: impl AsRef<Path>) -> Result<()> {
    let (png, json) = encode_sidecar(map)?;
    let label_png = label_png.as_ref();
    let index_json = index_json.as_ref();
    std::fs::write(label_png, png).map_err(|e| Error::io(label_png, e))?;
    std::fs::write(index_json, json).map_err(|e| Error::io(index_json, e))
}

pub fn encode_sidecar(map: &RegionMap) -> Result<(Vec<u8>, Vec<u8>)> {
    if map.len() > u16::MAX as usize + 1 {
        return Err(Error::TooManyRegions(map.len()));
    }
    let grid: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        map.width,
        map.height,
        map.labels.iter().map(|&l| l as u16).collect(),
    )
    .expect("label grid matches dimensions");
    let mut png = std::io::Cursor::new(Vec::new());
    grid.write_to(&mut png, image::ImageFormat::Png)?;

    let index = SidecarIndex {
        width: map.width,
        height: map.height,
        boundary_dilation: map.boundary_dilation,
        regions: map
            .regions
            .iter()
            .map(|r| SidecarRegion {
                id: r.id,
                color: r.representative_color.0,
                area: r.area.len(),
            })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&index)?;
    json.push(b'\n');
    Ok((png.into_inner(), json))
}

pub fn load_sidecar(label_png: impl AsRef<Path>, index_json: impl AsRef<Path>) -> Result<RegionMap> {
    let label_png = label_png.as_ref();
    let index_json = index_json.as_ref();
    let png = std::fs::read(label_png).map_err(|e| Error::io(label_png, e))?;
    let json = std::fs::read(index_json).map_err(|e| Error::io(index_json, e))?;
    decode_sidecar(&png, &json)
}

pub fn decode_sidecar(png: &[u8], json: &[u8]) -> Result<RegionMap> {
    let index: SidecarIndex = serde_json::from_slice(json)?;
    let grid = image::load_from_memory_with_format(png, image::ImageFormat::Png)?.to_luma16();
    if grid.dimensions() != (index.width, index.height) {
        return Err(Error::Malformed("label grid and index disagree on size".into()));
    }
    let raw: Vec<u32> = grid.as_raw().iter().map(|&l| l as u32).collect();
    let colors: BTreeMap<RegionId, Rgba> = index.regions.iter().map(|r| (r.id, Rgba(r.color))).collect();
    let mut missing = None;
    let map = RegionMap::from_labels(index.width, index.height, &raw, index.boundary_dilation, |orig, _| {
        colors.get(&orig).copied().unwrap_or_else(|| {
            missing = Some(orig);
            Rgba::TRANSPARENT
        })
    })?;
    if let Some(id) = missing {
        return Err(Error::Malformed(format!("label {id} missing from index")));
    }
    if map.len() != index.regions.len() {
        return Err(Error::Malformed("index lists regions absent from the grid".into()));
    }
    Ok(map)
}
