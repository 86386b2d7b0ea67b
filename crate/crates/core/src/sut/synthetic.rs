//! A synthetic simulator and key-point detector with planted defects.
//!
//! The simulator rotates a canonical 3D key-point layout by the head pose,
//! scales and shifts it per 3D model, and projects it orthographically. A
//! key-point is visible when its rotated outward normal faces the camera
//! by more than the visibility threshold.
//!
//! The detector returns the actual positions perturbed by a small smooth
//! baseline error, plus a planted error wherever the input falls in one of
//! the configured defect regions. Invisible key-points are predicted at the
//! projected head centre.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::geometry::{normalize, Rotation, Vec3};
use super::SystemUnderTest;
use crate::error::{Error, Result};
use crate::types::{EvaluatedTestCase, GroundTruth, ImageCharacteristics, Point2D, Prediction, SearchSpace};

const DEFAULT_PLANT: &str = include_str!("../../data/synthetic_sut.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyPointSpec {
    pub name: String,
    pub position: Vec3,
    /// Outward surface normal; need not be unit length.
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: u32,
    pub scale: f64,
    /// Pixel offset of the projected head centre.
    pub offset: [f64; 2],
}

/// Half-open interval `[min, max)`; a missing end is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v < m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DefectRegion {
    /// Axis-aligned box in (roll, pitch, yaw).
    Box {
        #[serde(default)]
        roll: Interval,
        #[serde(default)]
        pitch: Interval,
        #[serde(default)]
        yaw: Interval,
    },
    /// Open ball in angle space, radius in degrees.
    Ball { center: Vec3, radius: f64 },
}

impl DefectRegion {
    /// Normalized distance from the ball centre, or 0 inside a box; `None` outside.
    fn depth(&self, angles: Vec3) -> Option<f64> {
        match self {
            DefectRegion::Box { roll, pitch, yaw } => {
                (roll.contains(angles[0]) && pitch.contains(angles[1]) && yaw.contains(angles[2])).then_some(0.0)
            }
            DefectRegion::Ball { center, radius } => {
                let d = (0..3).map(|i| (angles[i] - center[i]).powi(2)).sum::<f64>().sqrt();
                (d < *radius).then(|| d / radius)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DefectMagnitude {
    /// Planted NE is constant over the region.
    Constant(f64),
    /// `peak * (1 - d / radius)^exponent` over a ball region.
    Cone { peak: f64, exponent: f64 },
}

impl DefectMagnitude {
    fn at(&self, depth: f64) -> f64 {
        match *self {
            DefectMagnitude::Constant(m) => m,
            DefectMagnitude::Cone { peak, exponent } => peak * (1.0 - depth).max(0.0).powf(exponent),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A planted misprediction for one key-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defect {
    /// 1-based key-point label.
    pub key_point: usize,
    /// Models the defect applies to; empty means every model.
    #[serde(default)]
    pub models: Vec<u32>,
    pub region: DefectRegion,
    /// Planted error as a fraction of the larger face dimension.
    pub magnitude: DefectMagnitude,
    /// Direction of the planted displacement in image space, degrees.
    pub direction: f64,
    /// Marks the step defect used as the explainer's recovery target.
    #[serde(default, skip_serializing_if = "is_false")]
    pub headline: bool,
}

impl Defect {
    pub fn index(&self) -> usize {
        self.key_point - 1
    }

    /// Planted NE contribution for `ic`, or `None` when `ic` is outside the region.
    pub fn planted(&self, ic: &ImageCharacteristics) -> Option<f64> {
        if !self.models.is_empty() && !self.models.contains(&ic.model_id) {
            return None;
        }
        self.region.depth(ic.angles()).map(|d| self.magnitude.at(d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSutConfig {
    pub space: SearchSpace,
    /// Pixels per canonical unit.
    pub camera_scale: f64,
    pub image_center: [f64; 2],
    pub visibility_threshold: f64,
    /// Per-axis amplitude of the baseline detector error, as a fraction of
    /// the larger face dimension.
    pub baseline_noise: f64,
    pub key_points: Vec<KeyPointSpec>,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub defects: Vec<Defect>,
}

impl SyntheticSutConfig {
    /// The checked-in 27-point face with its planted defects.
    pub fn default_plant() -> Self {
        serde_json::from_str(DEFAULT_PLANT).expect("bundled synthetic SUT config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("synthetic SUT config: {e}")))
    }

    /// Same geometry with no baseline error and no defects.
    pub fn perfect(mut self) -> Self {
        self.baseline_noise = 0.0;
        self.defects.clear();
        self
    }

    /// Upper bound on the baseline NE of any visible key-point.
    pub fn baseline_bound(&self) -> f64 {
        self.baseline_noise * std::f64::consts::SQRT_2
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        let k = self.key_points.len();
        if k == 0 {
            return Err(Error::config("synthetic SUT needs at least one key-point"));
        }
        if !(self.camera_scale.is_finite() && self.camera_scale > 0.0) || !(self.baseline_noise.is_finite() && self.baseline_noise >= 0.0) {
            return Err(Error::config("camera_scale must be positive and baseline_noise non-negative"));
        }
        for kp in &self.key_points {
            if normalize(kp.normal).is_none() {
                return Err(Error::config(format!("key-point {} has a zero normal", kp.name)));
            }
        }
        for id in &self.space.models {
            if !self.models.iter().any(|m| m.id == *id) {
                return Err(Error::config(format!("model {id} has no geometry")));
            }
        }
        for m in &self.models {
            if !(m.scale.is_finite() && m.scale > 0.0) {
                return Err(Error::config(format!("model {} has a non-positive scale", m.id)));
            }
        }
        for d in &self.defects {
            if d.key_point == 0 || d.key_point > k {
                return Err(Error::config(format!("defect key-point {} outside 1..={k}", d.key_point)));
            }
            let m = match d.magnitude {
                DefectMagnitude::Constant(m) => m,
                DefectMagnitude::Cone { peak, exponent } => {
                    if !matches!(d.region, DefectRegion::Ball { .. }) || !(exponent.is_finite() && exponent > 0.0) {
                        return Err(Error::config("cone magnitudes need a ball region and a positive exponent"));
                    }
                    peak
                }
            };
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::config("defect magnitudes must be non-negative"));
            }
            if let DefectRegion::Ball { radius, .. } = d.region {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::config("defect ball radius must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct SyntheticSut {
    config: SyntheticSutConfig,
    normals: Vec<Vec3>,
    evaluations: AtomicU64,
}

impl Clone for SyntheticSut {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            normals: self.normals.clone(),
            evaluations: AtomicU64::new(0),
        }
    }
}

impl SyntheticSut {
    pub fn new(config: SyntheticSutConfig) -> Result<Self> {
        config.validate()?;
        let normals = config
            .key_points
            .iter()
            .map(|kp| normalize(kp.normal).expect("validated"))
            .collect();
        Ok(Self { config, normals, evaluations: AtomicU64::new(0) })
    }

    pub fn default_plant() -> Self {
        Self::new(SyntheticSutConfig::default_plant()).expect("bundled synthetic SUT config is valid")
    }

    pub fn config(&self) -> &SyntheticSutConfig {
        &self.config
    }

    fn model(&self, id: u32) -> Result<&ModelSpec> {
        self.config
            .models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::invalid(format!("unknown model {id}")))
    }

    fn project(&self, model: &ModelSpec, p: Vec3) -> Point2D {
        let [cx, cy] = self.config.image_center;
        let s = self.config.camera_scale * model.scale;
        Point2D::new(cx + model.offset[0] + s * p[0], cy + model.offset[1] - s * p[1])
    }

    /// Rotated positions in canonical units (before model scaling) and
    /// the visibility of every key-point.
    pub fn pose(&self, ic: &ImageCharacteristics) -> (Vec<Vec3>, Vec<bool>) {
        let rot = Rotation::from_pose(ic.roll, ic.pitch, ic.yaw);
        let positions = self.config.key_points.iter().map(|kp| rot.apply(kp.position)).collect();
        let visible = self
            .normals
            .iter()
            .map(|&n| rot.apply(n)[2] > self.config.visibility_threshold)
            .collect();
        (positions, visible)
    }

    pub fn render_truth(&self, ic: &ImageCharacteristics) -> Result<GroundTruth> {
        self.config.space.check(ic)?;
        let model = self.model(ic.model_id)?;
        let (positions, visible) = self.pose(ic);
        let points: Vec<Option<Point2D>> = positions
            .iter()
            .zip(&visible)
            .map(|(&p, &v)| v.then(|| self.project(model, p)))
            .collect();
        let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points.iter().flatten() {
            lo_x = lo_x.min(p.x);
            hi_x = hi_x.max(p.x);
            lo_y = lo_y.min(p.y);
            hi_y = hi_y.max(p.y);
        }
        if !lo_x.is_finite() {
            return Err(Error::invalid(format!("no visible key-point for {ic:?}")));
        }
        // a one-pixel floor keeps degenerate layouts well defined
        GroundTruth::new(points, (hi_x - lo_x).max(1.0), (hi_y - lo_y).max(1.0))
    }

    /// Baseline detector error for key-point `i` as an NE-scaled vector.
    fn baseline(&self, ic: &ImageCharacteristics, i: usize) -> (f64, f64) {
        let a = self.config.baseline_noise;
        if a == 0.0 {
            return (0.0, 0.0);
        }
        let phase = 0.7 * i as f64;
        let m = f64::from(ic.model_id);
        let u = 0.05 * ic.roll + 0.07 * ic.pitch + 0.03 * ic.yaw + phase + 0.9 * m;
        let v = 0.06 * ic.roll - 0.04 * ic.pitch + 0.05 * ic.yaw + 1.3 * phase + 0.4 * m;
        (a * u.sin(), a * v.cos())
    }

    /// Planted error vector (NE-scaled) for key-point `i`.
    fn planted(&self, ic: &ImageCharacteristics, i: usize) -> (f64, f64) {
        let mut out = (0.0, 0.0);
        for d in self.config.defects.iter().filter(|d| d.index() == i) {
            if let Some(m) = d.planted(ic) {
                let (s, c) = d.direction.to_radians().sin_cos();
                out.0 += m * c;
                out.1 += m * s;
            }
        }
        out
    }

    /// Defects whose predicate matches `ic`.
    pub fn active_defects(&self, ic: &ImageCharacteristics) -> Vec<&Defect> {
        self.config.defects.iter().filter(|d| d.planted(ic).is_some()).collect()
    }

    pub fn predict(&self, ic: &ImageCharacteristics, truth: &GroundTruth) -> Result<Prediction> {
        let model = self.model(ic.model_id)?;
        let size = truth.face_width().max(truth.face_height());
        let center = self.project(model, [0.0, 0.0, 0.0]);
        let points = truth
            .positions()
            .iter()
            .enumerate()
            .map(|(i, actual)| match actual {
                None => center,
                Some(p) => {
                    let (bx, by) = self.baseline(ic, i);
                    let (dx, dy) = self.planted(ic, i);
                    Point2D::new(p.x + size * (bx + dx), p.y + size * (by + dy))
                }
            })
            .collect();
        Prediction::new(points)
    }
}

impl SystemUnderTest for SyntheticSut {
    fn key_points(&self) -> usize {
        self.config.key_points.len()
    }

    fn evaluate(&self, ic: &ImageCharacteristics) -> Result<EvaluatedTestCase> {
        let truth = self.render_truth(ic)?;
        let prediction = self.predict(ic, &truth)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        EvaluatedTestCase::new(*ic, truth, prediction)
    }

    fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}
