//! Pixel grid primitives: RGBA colors, the canvas image, and pixel coordinates.

use std::path::Path;

use image::{ImageBuffer, Rgba as ImgRgba};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported canvas edge.
pub const MAX_DIMENSION: u32 = 8192;

/// Straight-alpha 8-bit RGBA color.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub const BLACK: Rgba = Rgba([0, 0, 0, 255]);
    pub const WHITE: Rgba = Rgba([255, 255, 255, 255]);
    pub const TRANSPARENT: Rgba = Rgba([0, 0, 0, 0]);

    pub const fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Rgba([r, g, b, a])
    }

    pub const fn opaque(r: u8, g: u8, b: u8) -> Self {
        Rgba([r, g, b, 255])
    }

    /// Squared Euclidean distance over the RGB channels.
    pub fn rgb_distance_sq(self, other: Rgba) -> u32 {
        (0..3)
            .map(|c| {
                let d = self.0[c] as i32 - other.0[c] as i32;
                (d * d) as u32
            })
            .sum()
    }
}

/// Linear interpolation between two colors, rounding each channel half up.
///
/// `t` must lie in `[0, 1]`; anything else (including NaN) is rejected.
pub fn lerp_color(a: Rgba, b: Rgba, t: f64) -> Result<Rgba> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("{t} is outside [0, 1]")));
    }
    Ok(lerp_unchecked(a, b, t))
}

#[inline]
pub(crate) fn lerp_unchecked(a: Rgba, b: Rgba, t: f64) -> Rgba {
    let mut out = [0u8; 4];
    for c in 0..4 {
        let v = a.0[c] as f64 * (1.0 - t) + b.0[c] as f64 * t;
        out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    Rgba(out)
}

/// Integer pixel coordinate. Pixel centers sit at integer positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPos {
    pub x: u32,
    pub y: u32,
}

impl PixelPos {
    pub const fn new(x: u32, y: u32) -> Self {
        PixelPos { x, y }
    }

    pub fn distance_sq(self, other: PixelPos) -> u64 {
        let dx = self.x as i64 - other.x as i64;
        let dy = self.y as i64 - other.y as i64;
        (dx * dx + dy * dy) as u64
    }
}

/// Continuous 2-D point in pixel units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    /// Nearest pixel center, or `None` when that center falls outside the grid.
    pub fn to_pixel(self, width: u32, height: u32) -> Option<PixelPos> {
        let x = (self.x + 0.5).floor();
        let y = (self.y + 0.5).floor();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            return None;
        }
        Some(PixelPos::new(x as u32, y as u32))
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub const fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        PixelRect { x0, y0, x1, y1 }
    }

    pub const fn full(width: u32, height: u32) -> Self {
        PixelRect::new(0, 0, width, height)
    }

    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Rectangle covering every pixel center within `radius` of the continuous
    /// box spanned by `min`..`max`, clipped to a `width × height` grid.
    pub fn around(min: Point, max: Point, radius: f64, width: u32, height: u32) -> PixelRect {
        let clip = |v: f64, hi: u32| -> u32 { v.clamp(0.0, hi as f64) as u32 };
        let x0 = clip((min.x - radius).ceil(), width);
        let y0 = clip((min.y - radius).ceil(), height);
        let x1 = clip((max.x + radius).floor() + 1.0, width);
        let y1 = clip((max.y + radius).floor() + 1.0, height);
        if x1 <= x0 || y1 <= y0 {
            return PixelRect::new(0, 0, 0, 0);
        }
        PixelRect::new(x0, y0, x1, y1)
    }

    pub fn expand(&self, by: u32, width: u32, height: u32) -> PixelRect {
        PixelRect::new(
            self.x0.saturating_sub(by),
            self.y0.saturating_sub(by),
            (self.x1 + by).min(width),
            (self.y1 + by).min(height),
        )
    }

    pub fn union(&self, other: &PixelRect) -> PixelRect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        PixelRect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn intersect(&self, other: &PixelRect) -> PixelRect {
        let r = PixelRect::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        );
        if r.is_empty() {
            PixelRect::new(0, 0, 0, 0)
        } else {
            r
        }
    }
}

/// Row-major RGBA canvas.
///
/// Single writer: mutate through `&mut`, share read-only clones freely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgba>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, fill: Rgba) -> Result<Self> {
        check_dims(width, height)?;
        Ok(RasterImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgba>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Malformed(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgba) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bounds(&self) -> PixelRect {
        PixelRect::full(self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgba {
        self.pixels[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: Rgba) {
        let i = self.index(x, y);
        self.pixels[i] = c;
    }

    pub fn pixels(&self) -> &[Rgba] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgba] {
        &mut self.pixels
    }

    pub fn to_rgba_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.0).collect()
    }

    pub fn from_rgba_bytes(width: u32, height: u32, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width as usize * height as usize * 4 {
            return Err(Error::Malformed(format!(
                "{} bytes for a {width}x{height} RGBA image",
                bytes.len()
            )));
        }
        let pixels = bytes
            .chunks_exact(4)
            .map(|c| Rgba([c[0], c[1], c[2], c[3]]))
            .collect();
        RasterImage::from_pixels(width, height, pixels)
    }

    /// Copies the pixels of `rect` in row-major order.
    pub fn read_rect(&self, rect: PixelRect) -> Vec<Rgba> {
        let mut out = Vec::with_capacity(rect.width() as usize * rect.height() as usize);
        for y in rect.y0..rect.y1 {
            let row = self.index(rect.x0, y);
            out.extend_from_slice(&self.pixels[row..row + rect.width() as usize]);
        }
        out
    }

    pub fn write_rect(&mut self, rect: PixelRect, data: &[Rgba]) {
        let w = rect.width() as usize;
        for (i, y) in (rect.y0..rect.y1).enumerate() {
            let row = self.index(rect.x0, y);
            self.pixels[row..row + w].copy_from_slice(&data[i * w..(i + 1) * w]);
        }
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_png(&bytes).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgba8();
        let (w, h) = img.dimensions();
        RasterImage::from_rgba_bytes(w, h, img.as_raw())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let buf: ImageBuffer<ImgRgba<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width, self.height, self.to_rgba_bytes())
                .expect("buffer length matches dimensions");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lerp_endpoints() {
        assert_eq!(lerp_color(Rgba::BLACK, Rgba::WHITE, 0.0).unwrap(), Rgba::BLACK);
        assert_eq!(lerp_color(Rgba::BLACK, Rgba::WHITE, 1.0).unwrap(), Rgba::WHITE);
    }

    #[test]
    fn lerp_midpoint_rounds_half_up() {
        // 255 * 0.5 = 127.5 per channel, alpha stays 255.
        let mid = lerp_color(Rgba::BLACK, Rgba::WHITE, 0.5).unwrap();
        assert_eq!(mid, Rgba::new(128, 128, 128, 255));
    }

    #[test]
    fn lerp_rejects_out_of_range() {
        assert!(lerp_color(Rgba::BLACK, Rgba::WHITE, -0.1).is_err());
        assert!(lerp_color(Rgba::BLACK, Rgba::WHITE, 1.5).is_err());
        assert!(lerp_color(Rgba::BLACK, Rgba::WHITE, f64::NAN).is_err());
    }

    #[test]
    fn lerp_is_monotone_in_t() {
        let a = Rgba::new(10, 200, 30, 0);
        let b = Rgba::new(250, 5, 30, 255);
        let mut prev = a;
        for i in 1..=100 {
            let c = lerp_color(a, b, i as f64 / 100.0).unwrap();
            for ch in 0..4 {
                if b.0[ch] >= a.0[ch] {
                    assert!(c.0[ch] >= prev.0[ch]);
                } else {
                    assert!(c.0[ch] <= prev.0[ch]);
                }
            }
            prev = c;
        }
        assert_eq!(prev, b);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(RasterImage::new(0, 4, Rgba::BLACK).is_err());
        assert!(RasterImage::new(4, MAX_DIMENSION + 1, Rgba::BLACK).is_err());
    }

    #[test]
    fn png_round_trip() {
        let img = RasterImage::from_fn(7, 5, |x, y| Rgba::new(x as u8 * 30, y as u8 * 40, 7, 200)).unwrap();
        let back = RasterImage::decode_png(&img.encode_png().unwrap()).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn nearest_pixel_center() {
        assert_eq!(Point::new(2.49, 3.5).to_pixel(10, 10), Some(PixelPos::new(2, 4)));
        assert_eq!(Point::new(-0.6, 0.0).to_pixel(10, 10), None);
        assert_eq!(Point::new(9.4, 0.0).to_pixel(10, 10), Some(PixelPos::new(9, 0)));
    }
}
