//! Randomized properties of selection and smudging on whole sessions.

use std::collections::BTreeSet;

use proptest::prelude::*;
use region_smudge::engine::{SmudgeSession, StrokeRecord, Tool};
use region_smudge::params::Params;
use region_smudge::raster::{RasterImage, Rgba};
use region_smudge::regions::{meanshift_regions, MeanShiftParams, RegionMap};
use region_smudge::stroke::StrokeSample;

type Rect = (u32, u32, u32, u32);

fn rect_labels(w: u32, h: u32, rects: &[Rect], dx: i32, dy: i32) -> Vec<u32> {
    let mut raw = vec![0u32; (w * h) as usize];
    for (i, &(x0, y0, rw, rh)) in rects.iter().enumerate() {
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                let (sx, sy) = ((x as i32 + dx) as u32, (y as i32 + dy) as u32);
                raw[(sy * w + sx) as usize] = i as u32 + 1;
            }
        }
    }
    raw
}

fn samples(pts: &[(f64, f64)], dx: f64, dy: f64) -> Vec<StrokeSample> {
    pts.iter()
        .enumerate()
        .map(|(i, &(x, y))| StrokeSample::new(x + dx, y + dy, i as f64 * 16.0))
        .collect()
}

fn walk(start: (f64, f64), steps: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut p = start;
    let mut out = vec![p];
    for &(sx, sy) in steps {
        p = ((p.0 + sx).clamp(lo, hi), (p.1 + sy).clamp(lo, hi));
        out.push(p);
    }
    out
}

fn play(canvas: RasterImage, map: RegionMap, params: Params, tool: Tool, samples: Vec<StrokeSample>) -> (SmudgeSession, Vec<BTreeSet<u32>>, BTreeSet<u32>) {
    let mut session = SmudgeSession::new(canvas, map, params).unwrap();
    let done = session.play(&StrokeRecord { tool, samples }).unwrap();
    let sets = done.trace.iter().map(|t| t.selected.clone()).collect();
    (session, sets, done.ever_selected)
}

/// Pixels covered by a selection, shifted back by the translation and
/// limited to a core window that both placements share. The background's
/// area does not translate with the shapes, but its core part does.
fn selected_pixels(map: &RegionMap, ids: &BTreeSet<u32>, dx: i32, dy: i32) -> BTreeSet<(i32, i32)> {
    map.union_area(ids)
        .unwrap()
        .iter()
        .map(|p| (p.x as i32 - dx, p.y as i32 - dy))
        .filter(|&(x, y)| (16..144).contains(&x) && (16..144).contains(&y))
        .collect()
}

fn local_params() -> Params {
    Params {
        stroke_width: 40.0,
        stroke_length: 60.0,
        ..Params::default()
    }
}

fn arb_rects() -> impl Strategy<Value = Vec<Rect>> {
    prop::collection::vec((40u32..100, 40u32..100, 4u32..40, 4u32..40), 1..5)
        .prop_map(|v| v.into_iter().map(|(x, y, w, h)| (x, y, w.min(120 - x), h.min(120 - y))).collect())
}

fn arb_steps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-8.0f64..8.0, -8.0f64..8.0), 0..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selection_is_translation_equivariant(
        rects in arb_rects(),
        start in (60.0f64..100.0, 60.0f64..100.0),
        steps in arb_steps(),
        (dx, dy) in (-15i32..=15, -15i32..=15),
        tool in prop::sample::select(vec![Tool::Ss, Tool::Ts]),
    ) {
        // shapes stay far enough from the image border that the border's own
        // dilated boundary never meets theirs or the stroke footprint
        let (w, h) = (160, 160);
        let pts = walk(start, &steps, 55.0, 105.0);
        let flat = RasterImage::new(w, h, Rgba::opaque(128, 128, 128)).unwrap();

        let map_a = RegionMap::from_labels(w, h, &rect_labels(w, h, &rects, 0, 0), 10.0, |_, _| Rgba::BLACK).unwrap();
        let map_b = RegionMap::from_labels(w, h, &rect_labels(w, h, &rects, dx, dy), 10.0, |_, _| Rgba::BLACK).unwrap();
        let (_, sets_a, _) = play(flat.clone(), map_a.clone(), local_params(), tool, samples(&pts, 0.0, 0.0));
        let (_, sets_b, _) = play(flat, map_b.clone(), local_params(), tool, samples(&pts, dx as f64, dy as f64));

        prop_assert_eq!(sets_a.len(), sets_b.len());
        for (t, (a, b)) in sets_a.iter().zip(&sets_b).enumerate() {
            prop_assert_eq!(
                selected_pixels(&map_a, a, 0, 0),
                selected_pixels(&map_b, b, dx, dy),
                "timestamp {}", t + 1
            );
        }
    }

    #[test]
    fn smudging_inside_one_region_stays_in_its_color_range(
        seed in any::<u64>(),
        start in (30.0f64..50.0, 30.0f64..90.0),
        steps in arb_steps(),
        strength in 0.1f64..1.0,
        pickup_rate in 0.0f64..1.0,
    ) {
        // left block has per-pixel noise, right block is flat
        let (w, h) = (120u32, 120u32);
        let mut state = seed | 1;
        let mut noise = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 97) as u8
        };
        let canvas = RasterImage::from_fn(w, h, |x, _| {
            if x < 80 {
                Rgba::opaque(100 + noise(), 20 + noise(), 140 + noise())
            } else {
                Rgba::opaque(10, 200, 10)
            }
        })
        .unwrap();
        let raw: Vec<u32> = (0..w * h).map(|i| u32::from(i % w >= 80)).collect();
        let map = RegionMap::from_labels(w, h, &raw, 10.0, |_, _| Rgba::BLACK).unwrap();
        let params = Params { stroke_width: 20.0, strength, pickup_rate, ..Params::default() };
        let pts = walk(start, &steps, 25.0, 55.0);
        let (session, sets, _) = play(canvas.clone(), map.clone(), params, Tool::Ss, samples(&pts, 0.0, 0.0));
        prop_assert!(sets.iter().all(|s| s.len() == 1 && s.contains(&0)), "{:?}", sets);

        let area = &map.regions()[0].area;
        let (mut lo, mut hi) = ([255u8; 4], [0u8; 4]);
        for p in area.iter() {
            let c = canvas.get(p.x, p.y).0;
            for k in 0..4 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let out = session.canvas();
        for y in 0..h {
            for x in 0..w {
                let c = out.get(x, y).0;
                if area.contains(x, y) {
                    prop_assert!((0..4).all(|k| lo[k] <= c[k] && c[k] <= hi[k]), "({x},{y}) {:?}", c);
                } else {
                    prop_assert_eq!(out.get(x, y), canvas.get(x, y));
                }
            }
        }
    }

    #[test]
    fn pixels_outside_the_ever_selected_regions_never_change(
        rects in prop::collection::vec((0u32..90, 0u32..90, 5u32..60, 5u32..60), 1..6),
        start in (5.0f64..115.0, 5.0f64..115.0),
        steps in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..12),
        tool in prop::sample::select(vec![Tool::Ss, Tool::Ts]),
    ) {
        let (w, h) = (120u32, 120u32);
        let rects: Vec<Rect> = rects.into_iter().map(|(x, y, rw, rh)| (x, y, rw.min(w - x), rh.min(h - y))).collect();
        let raw = rect_labels(w, h, &rects, 0, 0);
        let palette = |l: u32| Rgba::opaque((l * 53 % 256) as u8, (l * 101 % 256) as u8, (l * 197 % 256) as u8);
        let canvas = RasterImage::from_fn(w, h, |x, y| palette(raw[(y * w + x) as usize])).unwrap();
        let map = RegionMap::from_labels(w, h, &raw, 10.0, |_, _| Rgba::BLACK).unwrap();
        let pts = walk(start, &steps, 0.0, 119.0);
        let (session, _, ever) = play(canvas.clone(), map.clone(), Params::default(), tool, samples(&pts, 0.0, 0.0));
        let allowed = map.union_area(&ever).unwrap();
        let out = session.canvas();
        for y in 0..h {
            for x in 0..w {
                if !allowed.contains(x, y) {
                    prop_assert_eq!(out.get(x, y), canvas.get(x, y), "({}, {})", x, y);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn meanshift_tolerates_small_noise(seed in any::<u64>(), split in 20u32..44) {
        let (w, h) = (64u32, 64u32);
        let a = [200u8, 60, 40];
        let b = [40u8, 80, 190];
        let mut state = seed | 1;
        let mut jitter = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 7) as i16 - 3
        };
        let mut channel = |v: u8| (v as i16 + jitter()).clamp(0, 255) as u8;
        let img = RasterImage::from_fn(w, h, |x, _| {
            let c = if x < split { a } else { b };
            Rgba::opaque(channel(c[0]), channel(c[1]), channel(c[2]))
        })
        .unwrap();
        let map = meanshift_regions(&img, MeanShiftParams::default()).unwrap();
        prop_assert_eq!(map.len(), 2);

        // ids are assigned in raster order, so the left half is region 0
        let agree = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| map.label(x, y) == u32::from(x >= split))
            .count();
        prop_assert!(agree * 100 >= 99 * (w * h) as usize, "{agree} of {}", w * h);
    }
}
