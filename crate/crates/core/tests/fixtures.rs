mod common;

use std::collections::BTreeSet;

use common::oracle::{self, Grid};
use common::{
    build_edge_recovery, build_scenario, fixtures_dir, load_expected, load_fixture, Expected, EDGE_RECOVERY, SCENARIOS,
};
use region_smudge::engine::Tool;
use region_smudge::params::Params;
use region_smudge::raster::RasterImage;
use region_smudge::regions::{flat_fill_regions, load_sidecar, save_sidecar};
use region_smudge::replay::{compare, replay, Script};

fn grid_of(img: &RasterImage) -> Grid {
    let px: Vec<[u8; 4]> = img.pixels().iter().map(|p| p.0).collect();
    oracle::flood_labels(img.width() as usize, img.height() as usize, &px)
}

fn as_vecs(sets: &[BTreeSet<u32>]) -> Vec<Vec<u32>> {
    sets.iter().map(|s| s.iter().copied().collect()).collect()
}

fn derive_expected(name: &str) -> Expected {
    let (img, script, unwanted) = build_scenario(name);
    let grid = grid_of(&img);
    let p = Params::default();
    let raw = &script.strokes[0].samples;
    let ss = oracle::ss_trace(&grid, raw, &p);
    let ts = oracle::ts_trace(&grid, raw, &p);
    Expected {
        scenario: name.to_string(),
        unwanted,
        ss_selected: as_vecs(&ss),
        ts_discontinuous: ts.iter().any(|s| !oracle::connected(&grid, s)),
    }
}

/// Rewrites every fixture directory from the scenario builders and the oracle.
#[test]
#[ignore]
fn regenerate() {
    for name in SCENARIOS {
        let dir = fixtures_dir().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let (img, script, _) = build_scenario(name);
        img.save_png(dir.join("canvas.png")).unwrap();
        std::fs::write(dir.join("script.json"), script.to_json().unwrap()).unwrap();
        let expected = derive_expected(name);
        std::fs::write(
            dir.join("expected.json"),
            serde_json::to_string_pretty(&expected).unwrap() + "\n",
        )
        .unwrap();
    }

    let dir = fixtures_dir().join(EDGE_RECOVERY);
    std::fs::create_dir_all(&dir).unwrap();
    let (img, blur, restore) = build_edge_recovery();
    img.save_png(dir.join("canvas.png")).unwrap();
    let map = flat_fill_regions(&img).unwrap();
    save_sidecar(&map, dir.join("canvas.labels.png"), dir.join("canvas.regions.json")).unwrap();
    let blurred = replay(&blur, img, &Params::default(), None).unwrap().image;
    blurred.save_png(dir.join("blurred.png")).unwrap();
    std::fs::write(dir.join("blur.json"), blur.to_json().unwrap()).unwrap();
    std::fs::write(dir.join("restore.json"), restore.to_json().unwrap()).unwrap();
}

#[test]
fn committed_fixtures_match_their_builders() {
    for name in SCENARIOS {
        let (img, script, unwanted) = build_scenario(name);
        let (loaded, canvas) = load_fixture(name);
        assert_eq!(canvas, img, "{name} canvas");
        assert_eq!(loaded.strokes, script.strokes, "{name} strokes");
        assert_eq!(loaded.intent, script.intent, "{name} intent");
        assert_eq!(load_expected(name).unwanted, unwanted, "{name} unwanted");
    }
}

#[test]
fn oracle_reproduces_frozen_expectations() {
    for name in SCENARIOS {
        assert_eq!(derive_expected(name), load_expected(name), "{name}");
    }
}

#[test]
fn flood_labels_agree_with_flat_fill() {
    for name in SCENARIOS {
        let (_, canvas) = load_fixture(name);
        let map = flat_fill_regions(&canvas).unwrap();
        assert_eq!(map.labels(), grid_of(&canvas).labels.as_slice(), "{name}");
    }
}

#[test]
fn engine_selects_the_frozen_sets() {
    for name in SCENARIOS {
        let (script, canvas) = load_fixture(name);
        let expected = load_expected(name);
        let run = replay(&script, canvas, &Params::default(), Some(Tool::Ss)).unwrap();
        let got: Vec<Vec<u32>> = run.strokes[0]
            .trace
            .iter()
            .map(|t| t.selected.iter().copied().collect())
            .collect();
        assert_eq!(got, expected.ss_selected, "{name}");
    }
}

#[test]
fn baselines_behave_as_recorded() {
    for name in SCENARIOS {
        let (script, canvas) = load_fixture(name);
        let expected = load_expected(name);
        let cmp = compare(&script, &canvas, &Params::default()).unwrap();
        let ts = cmp.metrics.iter().find(|m| m.tool == Tool::Ts).unwrap();
        assert_eq!(
            !ts.discontinuous_timestamps.is_empty(),
            expected.ts_discontinuous,
            "{name}"
        );
        let (_, bs) = cmp.outputs.iter().find(|(t, _)| *t == Tool::Bs).unwrap();
        for &[x, y] in &expected.unwanted {
            let id = bs.map.label(x, y);
            let changed = bs.map.regions()[id as usize]
                .area
                .iter()
                .filter(|p| bs.image.get(p.x, p.y) != canvas.get(p.x, p.y))
                .count();
            assert!(changed > 0, "{name}: BS left region {id} untouched");
        }
    }
}

#[test]
fn edge_recovery_files_match_their_builder() {
    let dir = fixtures_dir().join(EDGE_RECOVERY);
    let (img, blur, restore) = build_edge_recovery();
    assert_eq!(RasterImage::load_png(dir.join("canvas.png")).unwrap(), img);
    assert_eq!(Script::load(dir.join("blur.json")).unwrap().strokes, blur.strokes);
    let loaded = Script::load(dir.join("restore.json")).unwrap();
    assert_eq!((loaded.strokes, loaded.params), (restore.strokes, restore.params));
    let blurred = replay(&blur, img.clone(), &Params::default(), None).unwrap().image;
    assert_eq!(RasterImage::load_png(dir.join("blurred.png")).unwrap(), blurred);
    let map = load_sidecar(dir.join("canvas.labels.png"), dir.join("canvas.regions.json")).unwrap();
    assert_eq!(map.labels(), flat_fill_regions(&img).unwrap().labels());
}
