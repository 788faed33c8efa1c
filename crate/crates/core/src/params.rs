//! Engine configuration shared by sessions, scripts and the command line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::regions::{
    flat_fill_regions_with, meanshift_regions_with, MeanShiftParams, RegionMap, DEFAULT_BOUNDARY_DILATION,
};
use crate::select::ResemblanceParams;
use crate::stroke::{WindowParams, DEFAULT_BONE_RADIUS, DEFAULT_LENGTH, DEFAULT_SPACING, DEFAULT_WIDTH};

/// Upper end of the brush size range.
pub const BRUSH_MAX: f64 = 200.0;

/// How a canvas is partitioned into regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Segmentation {
    Flat,
    #[serde(rename = "meanshift")]
    MeanShift(MeanShiftParams),
}

impl Default for Segmentation {
    fn default() -> Self {
        Segmentation::Flat
    }
}

impl Segmentation {
    pub fn run(&self, image: &RasterImage, boundary_dilation: f64) -> Result<RegionMap> {
        match self {
            Segmentation::Flat => flat_fill_regions_with(image, boundary_dilation),
            Segmentation::MeanShift(p) => meanshift_regions_with(image, *p, boundary_dilation),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub ts_fraction: f64,
    /// Minimum brush radius.
    pub theta: f64,
    pub brush_max: f64,
    /// Fraction of the pickup color blended into the canvas per stamp.
    pub strength: f64,
    /// Fraction of the fresh canvas color blended back into the pickup.
    pub pickup_rate: f64,
    /// Stamp distance as a fraction of the current radius.
    pub stamp_spacing: f64,
    pub stroke_width: f64,
    pub stroke_length: f64,
    pub bone_radius: f64,
    pub resample_spacing: f64,
    pub boundary_dilation: f64,
    pub segmentation: Segmentation,
}

impl Default for Params {
    fn default() -> Self {
        let r = ResemblanceParams::default();
        Params {
            alpha: r.alpha,
            beta: r.beta,
            gamma: r.gamma,
            ts_fraction: r.ts_fraction,
            theta: 10.0,
            brush_max: BRUSH_MAX,
            strength: 0.7,
            pickup_rate: 0.5,
            stamp_spacing: 0.25,
            stroke_width: DEFAULT_WIDTH,
            stroke_length: DEFAULT_LENGTH,
            bone_radius: DEFAULT_BONE_RADIUS,
            resample_spacing: DEFAULT_SPACING,
            boundary_dilation: DEFAULT_BOUNDARY_DILATION,
            segmentation: Segmentation::Flat,
        }
    }
}

impl Params {
    pub fn resemblance(&self) -> ResemblanceParams {
        ResemblanceParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            ts_fraction: self.ts_fraction,
        }
    }

    pub fn window(&self) -> WindowParams {
        WindowParams {
            length: self.stroke_length,
            width: self.stroke_width,
            bone_radius: self.bone_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resemblance().validate()?;
        self.window().validate()?;
        if !(self.brush_max > 0.0 && self.brush_max <= BRUSH_MAX) {
            return Err(Error::param("brush_max", format!("must be in (0, {BRUSH_MAX}]")));
        }
        if !(self.theta > 0.0 && self.theta <= self.brush_max) {
            return Err(Error::param("theta", "must be in (0, brush_max]"));
        }
        for (name, v) in [("strength", self.strength), ("pickup_rate", self.pickup_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} is outside [0, 1]")));
            }
        }
        if !(self.stamp_spacing > 0.0) {
            return Err(Error::param("stamp_spacing", "must be > 0"));
        }
        if !(self.resample_spacing > 0.0) {
            return Err(Error::param("resample_spacing", "must be > 0"));
        }
        if !(self.boundary_dilation >= 0.0) {
            return Err(Error::param("boundary_dilation", "must be >= 0"));
        }
        Ok(())
    }

    /// Applies the fields present in a JSON object on top of `self`.
    ///
    /// Nested objects other than `segmentation` are not expected; a
    /// `segmentation` entry replaces the whole segmentation setting.
    pub fn merged(&self, patch: &serde_json::Value) -> Result<Params> {
        let serde_json::Value::Object(fields) = patch else {
            return Err(Error::Malformed("params must be a JSON object".into()));
        };
        let mut base = serde_json::to_value(self)?;
        let obj = base.as_object_mut().expect("params serialize to an object");
        for (k, v) in fields {
            obj.insert(k.clone(), v.clone());
        }
        let out: Params = serde_json::from_value(base)?;
        out.validate()?;
        Ok(out)
    }

    pub fn segment(&self, image: &RasterImage) -> Result<RegionMap> {
        self.segmentation.run(image, self.boundary_dilation)
    }
}
