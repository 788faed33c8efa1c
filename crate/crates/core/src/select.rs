//! Dynamic target-region selection from partial strokes.
//!
//! A candidate region set is scored against the partial stroke by two
//! coverage-plus-inclusion ratios: one between the stroke footprint and the
//! candidate areas, one between the expanded stroke bone and the expanded
//! candidate boundaries. The target set is updated incrementally: regions
//! that are no longer covered drop out, and at most one covered region is
//! added per update, only if the enlarged set scores above `gamma` times the
//! kept set.
//!
//! The `bs_select` and `ts_select` baselines are provided for comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::regions::{RegionId, RegionMap};
use crate::stroke::PartialStroke;

pub type RegionSet = BTreeSet<RegionId>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResemblanceParams {
    /// Weight of region resemblance.
    pub alpha: f64,
    /// Weight of boundary resemblance.
    pub beta: f64,
    /// Balance factor for accepting an added region.
    pub gamma: f64,
    /// Relative score cut of the TS baseline.
    pub ts_fraction: f64,
}

impl Default for ResemblanceParams {
    fn default() -> Self {
        ResemblanceParams {
            alpha: 0.3,
            beta: 0.7,
            gamma: 0.7,
            ts_fraction: 0.85,
        }
    }
}

impl ResemblanceParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} is outside (0, 1)")))
            }
        };
        open_unit("alpha", self.alpha)?;
        open_unit("beta", self.beta)?;
        open_unit("gamma", self.gamma)?;
        if !(self.ts_fraction > 0.0 && self.ts_fraction <= 1.0) {
            return Err(Error::param("ts_fraction", format!("{} is outside (0, 1]", self.ts_fraction)));
        }
        Ok(())
    }
}

/// Selection state at one timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSet {
    pub covered: RegionSet,
    pub base: RegionSet,
    pub selected: RegionSet,
    pub t: u64,
}

/// Regions whose area meets the footprint in at least one pixel.
pub fn covered_regions(footprint: &PointSet, map: &RegionMap) -> RegionSet {
    footprint.iter().map(|p| map.label(p.x, p.y)).collect()
}

/// `|F ∩ A| / |A| + |F ∩ A| / |F|`, zero for an empty footprint.
pub fn region_resemblance(footprint: &PointSet, candidate_area: &PointSet) -> Result<f64> {
    if candidate_area.is_empty() {
        return Err(Error::EmptySet("candidate area"));
    }
    Ok(ratio_pair(
        footprint.intersection_count(candidate_area),
        candidate_area.len(),
        footprint.len(),
    ))
}

/// `|S ∩ B| / |B| + |S ∩ B| / |S|` between the expanded bone `S` and the
/// expanded candidate boundary `B`, zero for an empty bone.
pub fn boundary_resemblance(bone_exp: &PointSet, candidate_dilated_boundary: &PointSet) -> Result<f64> {
    if candidate_dilated_boundary.is_empty() {
        return Err(Error::EmptySet("candidate boundary"));
    }
    Ok(ratio_pair(
        bone_exp.intersection_count(candidate_dilated_boundary),
        candidate_dilated_boundary.len(),
        bone_exp.len(),
    ))
}

#[inline]
fn ratio_pair(overlap: usize, candidate: usize, stroke: usize) -> f64 {
    if stroke == 0 {
        return 0.0;
    }
    overlap as f64 / candidate as f64 + overlap as f64 / stroke as f64
}

/// Integer counts that fully determine a candidate's score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts {
    area_overlap: usize,
    area: usize,
    boundary_overlap: usize,
    boundary: usize,
}

fn combine(c: Counts, footprint: usize, bone: usize, params: &ResemblanceParams) -> f64 {
    if c.area == 0 {
        return 0.0;
    }
    params.alpha * ratio_pair(c.area_overlap, c.area, footprint)
        + params.beta * ratio_pair(c.boundary_overlap, c.boundary, bone)
}

/// Weighted resemblance of a candidate region set; the empty set scores 0.
pub fn resemblance(
    partial: &PartialStroke,
    candidate: &RegionSet,
    map: &RegionMap,
    params: &ResemblanceParams,
) -> Result<f64> {
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let area = map.union_area(candidate)?;
    let boundary = map.union_dilated_boundary(candidate)?;
    let counts = Counts {
        area_overlap: partial.footprint.intersection_count(&area),
        area: area.len(),
        boundary_overlap: partial.bone_expansion.intersection_count(&boundary),
        boundary: boundary.len(),
    };
    Ok(combine(
        counts,
        partial.footprint.len(),
        partial.bone_expansion.len(),
        params,
    ))
}

/// Scores `base` and `base ∪ {r}` incrementally for one partial stroke.
///
/// Region areas are disjoint, so area counts add; dilated boundaries
/// overlap, so their unions are counted by inclusion-exclusion against the
/// base union.
struct Scorer<'a> {
    map: &'a RegionMap,
    params: &'a ResemblanceParams,
    footprint_len: usize,
    bone_len: usize,
    bone: &'a PointSet,
    per_region_overlap: BTreeMap<RegionId, usize>,
    base: Counts,
    base_boundary: PointSet,
    bone_on_base: PointSet,
}

impl<'a> Scorer<'a> {
    fn new(partial: &'a PartialStroke, map: &'a RegionMap, params: &'a ResemblanceParams, base: &RegionSet) -> Result<Self> {
        let mut per_region_overlap = BTreeMap::new();
        for p in partial.footprint.iter() {
            *per_region_overlap.entry(map.label(p.x, p.y)).or_insert(0usize) += 1;
        }
        let base_boundary = map.union_dilated_boundary(base)?;
        let bone_on_base = partial.bone_expansion.intersection(&base_boundary);
        let mut counts = Counts {
            boundary_overlap: bone_on_base.len(),
            boundary: base_boundary.len(),
            ..Counts::default()
        };
        for &id in base {
            counts.area += map.region(id)?.area.len();
            counts.area_overlap += per_region_overlap.get(&id).copied().unwrap_or(0);
        }
        Ok(Scorer {
            map,
            params,
            footprint_len: partial.footprint.len(),
            bone_len: partial.bone_expansion.len(),
            bone: &partial.bone_expansion,
            per_region_overlap,
            base: counts,
            base_boundary,
            bone_on_base,
        })
    }

    fn covered(&self) -> RegionSet {
        self.per_region_overlap.keys().copied().collect()
    }

    fn base_score(&self) -> f64 {
        combine(self.base, self.footprint_len, self.bone_len, self.params)
    }

    fn with_region(&self, id: RegionId) -> Result<f64> {
        let region = self.map.region(id)?;
        let b = &region.dilated_boundary;
        let c = Counts {
            area_overlap: self.base.area_overlap + self.per_region_overlap.get(&id).copied().unwrap_or(0),
            area: self.base.area + region.area.len(),
            boundary_overlap: self.base.boundary_overlap + self.bone.intersection_count(b)
                - self.bone_on_base.intersection_count(b),
            boundary: self.base.boundary + b.len() - self.base_boundary.intersection_count(b),
        };
        Ok(combine(c, self.footprint_len, self.bone_len, self.params))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    /// Region added to the base set to form this candidate.
    pub region: RegionId,
    pub score: f64,
}

/// One selection update, in the shape of the per-timestamp debug dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub t: u64,
    pub covered: RegionSet,
    pub base: RegionSet,
    pub base_score: f64,
    pub candidate_scores: Vec<CandidateScore>,
    pub selected: RegionSet,
}

/// Strict acceptance test for an enlarged candidate.
#[inline]
pub fn accepts(candidate_score: f64, base_score: f64, gamma: f64) -> bool {
    candidate_score > gamma * base_score
}

/// Advances the target set by one timestamp.
pub fn update_target_set(
    prev: &TargetSet,
    partial: &PartialStroke,
    map: &RegionMap,
    params: &ResemblanceParams,
) -> Result<(TargetSet, SelectionTrace)> {
    let t = prev.t + 1;
    let covered = covered_regions(&partial.footprint, map);
    let base: RegionSet = prev.selected.intersection(&covered).copied().collect();

    let scorer = Scorer::new(partial, map, params, &base)?;
    debug_assert_eq!(scorer.covered(), covered);
    let base_score = scorer.base_score();

    let mut candidate_scores = Vec::new();
    let mut best: Option<CandidateScore> = None;
    for &id in covered.difference(&base) {
        let c = CandidateScore {
            region: id,
            score: scorer.with_region(id)?,
        };
        candidate_scores.push(c);
        // ascending ids: strict improvement keeps the lowest id on ties
        if best.is_none_or(|b| c.score > b.score) {
            best = Some(c);
        }
    }

    let mut selected = base.clone();
    if let Some(b) = best {
        if accepts(b.score, base_score, params.gamma) {
            selected.insert(b.region);
        }
    }

    let trace = SelectionTrace {
        t,
        covered: covered.clone(),
        base: base.clone(),
        base_score,
        candidate_scores,
        selected: selected.clone(),
    };
    Ok((
        TargetSet {
            covered,
            base,
            selected,
            t,
        },
        trace,
    ))
}

/// Basic selection: everything under the stroke footprint is smudgeable.
pub fn bs_select(footprint: &PointSet) -> PointSet {
    footprint.clone()
}

/// Keeps the entries whose score reaches `fraction` of the best score.
pub fn top_fraction(scores: &[(RegionId, f64)], fraction: f64) -> RegionSet {
    let max = scores.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .filter(|&&(_, s)| s >= fraction * max)
        .map(|&(id, _)| id)
        .collect()
}

/// Top-fraction baseline: each covered region is scored alone and kept when
/// it reaches `ts_fraction` of the best single-region score.
pub fn ts_select(
    partial: &PartialStroke,
    covered: &RegionSet,
    map: &RegionMap,
    params: &ResemblanceParams,
) -> Result<(RegionSet, Vec<CandidateScore>)> {
    if !(params.ts_fraction > 0.0 && params.ts_fraction <= 1.0) {
        return Err(Error::param("ts_fraction", "must be in (0, 1]"));
    }
    let empty = RegionSet::new();
    let scorer = Scorer::new(partial, map, params, &empty)?;
    let scores = covered
        .iter()
        .map(|&id| Ok((id, scorer.with_region(id)?)))
        .collect::<Result<Vec<_>>>()?;
    let kept = top_fraction(&scores, params.ts_fraction);
    let detail = scores
        .into_iter()
        .map(|(region, score)| CandidateScore { region, score })
        .collect();
    Ok((kept, detail))
}
