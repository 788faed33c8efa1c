//! Pixel point sets stored as bitmaps clipped to a storage window.
//!
//! A set always refers to a full `width × height` grid, but only the words
//! inside its storage window are allocated. Set algebra is exact and only
//! touches the overlap of the operands' windows.

use std::fmt;

use crate::raster::{PixelPos, PixelRect};

#[derive(Clone)]
pub struct PointSet {
    width: u32,
    height: u32,
    // storage window: rows [y0, y0 + rows), 64-bit word columns [w0, w0 + wcols)
    y0: u32,
    rows: u32,
    w0: u32,
    wcols: u32,
    bits: Vec<u64>,
    len: usize,
}

impl PointSet {
    pub fn empty(width: u32, height: u32) -> Self {
        PointSet {
            width,
            height,
            y0: 0,
            rows: 0,
            w0: 0,
            wcols: 0,
            bits: Vec::new(),
            len: 0,
        }
    }

    /// Empty set with storage preallocated for points inside `rect`.
    pub fn with_window(width: u32, height: u32, rect: PixelRect) -> Self {
        let rect = rect.intersect(&PixelRect::full(width, height));
        if rect.is_empty() {
            return PointSet::empty(width, height);
        }
        let w0 = rect.x0 / 64;
        let wend = rect.x1.div_ceil(64);
        let wcols = wend - w0;
        let rows = rect.height();
        PointSet {
            width,
            height,
            y0: rect.y0,
            rows,
            w0,
            wcols,
            bits: vec![0; rows as usize * wcols as usize],
            len: 0,
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let mut s = PointSet::with_window(width, height, PixelRect::full(width, height));
        for y in 0..height {
            s.insert_span(y, 0, width);
        }
        s
    }

    /// Every pixel of `rect` for which `f` holds.
    pub fn from_fn(width: u32, height: u32, rect: PixelRect, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut s = PointSet::with_window(width, height, rect);
        let rect = rect.intersect(&PixelRect::full(width, height));
        for y in rect.y0..rect.y1 {
            for x in rect.x0..rect.x1 {
                if f(x, y) {
                    s.insert(x, y);
                }
            }
        }
        s
    }

    pub fn from_points(width: u32, height: u32, points: impl IntoIterator<Item = PixelPos>) -> Self {
        let mut s = PointSet::empty(width, height);
        for p in points {
            s.insert(p.x, p.y);
        }
        s
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Storage window in pixel units, clipped to the grid.
    pub fn window(&self) -> PixelRect {
        if self.rows == 0 {
            return PixelRect::new(0, 0, 0, 0);
        }
        PixelRect::new(
            self.w0 * 64,
            self.y0,
            ((self.w0 + self.wcols) * 64).min(self.width),
            self.y0 + self.rows,
        )
    }

    /// Tight bounding box of the members, `None` when empty.
    pub fn bounds(&self) -> Option<PixelRect> {
        if self.len == 0 {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for r in 0..self.rows {
            let row = self.row_words(r);
            for (c, &w) in row.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                let base = (self.w0 + c as u32) * 64;
                x0 = x0.min(base + w.trailing_zeros());
                x1 = x1.max(base + 64 - w.leading_zeros());
                y0 = y0.min(self.y0 + r);
                y1 = y1.max(self.y0 + r + 1);
            }
        }
        Some(PixelRect::new(x0, y0, x1, y1))
    }

    #[inline]
    fn row_words(&self, r: u32) -> &[u64] {
        let start = r as usize * self.wcols as usize;
        &self.bits[start..start + self.wcols as usize]
    }

    /// Word at global row `y`, global word column `wc`; zero outside storage.
    #[inline]
    fn word(&self, y: u32, wc: u32) -> u64 {
        if y < self.y0 || y >= self.y0 + self.rows || wc < self.w0 || wc >= self.w0 + self.wcols {
            return 0;
        }
        self.bits[(y - self.y0) as usize * self.wcols as usize + (wc - self.w0) as usize]
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        self.word(y, x / 64) >> (x % 64) & 1 == 1
    }

    pub fn contains_pos(&self, p: PixelPos) -> bool {
        self.contains(p.x, p.y)
    }

    fn grow_to(&mut self, rect: PixelRect) {
        let want = self.window().union(&rect);
        let mut grown = PointSet::with_window(self.width, self.height, want);
        grown.or_assign(self);
        *self = grown;
    }

    fn covers(&self, x: u32, y: u32) -> bool {
        self.rows > 0
            && y >= self.y0
            && y < self.y0 + self.rows
            && x / 64 >= self.w0
            && x / 64 < self.w0 + self.wcols
    }

    /// Adds a point; returns whether it was newly inserted. Points off the grid are ignored.
    pub fn insert(&mut self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        if !self.covers(x, y) {
            self.grow_to(PixelRect::new(x, y, x + 1, y + 1));
        }
        let i = (y - self.y0) as usize * self.wcols as usize + (x / 64 - self.w0) as usize;
        let mask = 1u64 << (x % 64);
        if self.bits[i] & mask != 0 {
            return false;
        }
        self.bits[i] |= mask;
        self.len += 1;
        true
    }

    /// Inserts the pixels `[x_lo, x_hi)` of row `y`, clipped to the grid.
    pub fn insert_span(&mut self, y: u32, x_lo: u32, x_hi: u32) {
        let x_hi = x_hi.min(self.width);
        if y >= self.height || x_lo >= x_hi {
            return;
        }
        if !self.covers(x_lo, y) || !self.covers(x_hi - 1, y) {
            self.grow_to(PixelRect::new(x_lo, y, x_hi, y + 1));
        }
        let row = (y - self.y0) as usize * self.wcols as usize;
        let mut x = x_lo;
        while x < x_hi {
            let wc = x / 64;
            let lo = x % 64;
            let hi = (x_hi - wc * 64).min(64);
            let mask = if hi - lo == 64 {
                u64::MAX
            } else {
                ((1u64 << (hi - lo)) - 1) << lo
            };
            let w = &mut self.bits[row + (wc - self.w0) as usize];
            self.len += (mask & !*w).count_ones() as usize;
            *w |= mask;
            x = wc * 64 + hi;
        }
    }

    fn or_assign(&mut self, other: &PointSet) {
        for r in 0..other.rows {
            let y = other.y0 + r;
            for c in 0..other.wcols {
                let w = other.bits[r as usize * other.wcols as usize + c as usize];
                if w == 0 {
                    continue;
                }
                let i = (y - self.y0) as usize * self.wcols as usize + (other.w0 + c - self.w0) as usize;
                self.len += (w & !self.bits[i]).count_ones() as usize;
                self.bits[i] |= w;
            }
        }
    }

    fn check_grid(&self, other: &PointSet) {
        assert!(
            self.width == other.width && self.height == other.height,
            "point sets over different grids: {}x{} vs {}x{}",
            self.width,
            self.height,
            other.width,
            other.height
        );
    }

    /// Overlap of two storage windows as (rows, word columns) ranges.
    fn overlap(&self, other: &PointSet) -> Option<(u32, u32, u32, u32)> {
        let y0 = self.y0.max(other.y0);
        let y1 = (self.y0 + self.rows).min(other.y0 + other.rows);
        let c0 = self.w0.max(other.w0);
        let c1 = (self.w0 + self.wcols).min(other.w0 + other.wcols);
        (y0 < y1 && c0 < c1).then_some((y0, y1, c0, c1))
    }

    /// `|self ∩ other|` without materializing the intersection.
    pub fn intersection_count(&self, other: &PointSet) -> usize {
        self.check_grid(other);
        let Some((y0, y1, c0, c1)) = self.overlap(other) else {
            return 0;
        };
        let mut n = 0usize;
        for y in y0..y1 {
            let a = &self.row_words(y - self.y0)[(c0 - self.w0) as usize..(c1 - self.w0) as usize];
            let b = &other.row_words(y - other.y0)[(c0 - other.w0) as usize..(c1 - other.w0) as usize];
            n += a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum::<usize>();
        }
        n
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        self.check_grid(other);
        let Some((y0, y1, c0, c1)) = self.overlap(other) else {
            return PointSet::empty(self.width, self.height);
        };
        let rect = PixelRect::new(c0 * 64, y0, (c1 * 64).min(self.width), y1);
        let mut out = PointSet::with_window(self.width, self.height, rect);
        for y in y0..y1 {
            for c in c0..c1 {
                let w = self.word(y, c) & other.word(y, c);
                out.bits[(y - out.y0) as usize * out.wcols as usize + (c - out.w0) as usize] = w;
                out.len += w.count_ones() as usize;
            }
        }
        out
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        self.check_grid(other);
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let mut out = PointSet::with_window(self.width, self.height, self.window().union(&other.window()));
        out.or_assign(self);
        out.or_assign(other);
        out
    }

    pub fn union_with(&mut self, other: &PointSet) {
        self.check_grid(other);
        if other.is_empty() {
            return;
        }
        let want = self.window().union(&other.window());
        if want != self.window() {
            self.grow_to(want);
        }
        self.or_assign(other);
    }

    /// `self \ other`.
    pub fn difference(&self, other: &PointSet) -> PointSet {
        self.check_grid(other);
        let mut out = self.clone();
        if let Some((y0, y1, c0, c1)) = self.overlap(other) {
            for y in y0..y1 {
                for c in c0..c1 {
                    let i = (y - out.y0) as usize * out.wcols as usize + (c - out.w0) as usize;
                    let removed = out.bits[i] & other.word(y, c);
                    out.len -= removed.count_ones() as usize;
                    out.bits[i] &= !removed;
                }
            }
        }
        out
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.intersection_count(other) == self.len
    }

    /// Members in raster order.
    pub fn iter(&self) -> impl Iterator<Item = PixelPos> + '_ {
        (0..self.rows).flat_map(move |r| {
            self.row_words(r).iter().enumerate().flat_map(move |(c, &w)| {
                let base = (self.w0 + c as u32) * 64;
                let y = self.y0 + r;
                BitIter(w).map(move |b| PixelPos::new(base + b, y))
            })
        })
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(b)
    }
}

impl PartialEq for PointSet {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.len == other.len
            && self.intersection_count(other) == self.len
    }
}

impl Eq for PointSet {}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointSet")
            .field("grid", &(self.width, self.height))
            .field("len", &self.len)
            .field("bounds", &self.bounds())
            .finish()
    }
}
