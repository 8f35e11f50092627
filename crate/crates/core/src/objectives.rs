//! The six layout objectives and three fixed constraints.
//!
//! Objectives average over the widgets of a layout; constraint violations
//! sum, so a single offending widget always registers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{
    angular_diff, angular_radius, elevation_angle, Layout, PlacedWidget, Scene, Vec3, VoxelGrid,
};

pub const FOVEAL_DEGREES: f64 = 5.0;
pub const FOV_LIMIT_DEGREES: f64 = 60.0;
pub const REACH_METERS: f64 = 0.65;
pub const DEFAULT_OVERLAY_SUITABILITY: f64 = 1.0;
/// Occludee sample grid is `n × n` cells per widget.
pub const OCCLUSION_SAMPLES_PER_AXIS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetParams {
    pub interaction_probability: f64,
    pub observation_probability: f64,
    pub anchor: Option<String>,
    pub enabled: bool,
    pub pinned_position: Option<Vec3>,
}

impl Default for WidgetParams {
    fn default() -> Self {
        Self {
            interaction_probability: 0.0,
            observation_probability: 0.0,
            anchor: None,
            enabled: false,
            pinned_position: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub overlay_suitability: f64,
}

impl Default for ObjectParams {
    fn default() -> Self {
        Self {
            overlay_suitability: DEFAULT_OVERLAY_SUITABILITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    Alignment { x_tolerance: f64, y_tolerance: f64 },
    FieldOfView { foveal_degrees: f64 },
    Anchor,
    Overlay,
    NeckStrain,
    ArmExertion,
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Alignment { .. } => "alignment",
            ObjectiveKind::FieldOfView { .. } => "field_of_view",
            ObjectiveKind::Anchor => "anchor",
            ObjectiveKind::Overlay => "overlay",
            ObjectiveKind::NeckStrain => "neck_strain",
            ObjectiveKind::ArmExertion => "arm_exertion",
        }
    }

    /// Position in the canonical ordering used when agents assemble a spec.
    pub fn rank(&self) -> usize {
        match self {
            ObjectiveKind::Alignment { .. } => 0,
            ObjectiveKind::FieldOfView { .. } => 1,
            ObjectiveKind::Anchor => 2,
            ObjectiveKind::Overlay => 3,
            ObjectiveKind::NeckStrain => 4,
            ObjectiveKind::ArmExertion => 5,
        }
    }

    pub fn field_of_view() -> Self {
        ObjectiveKind::FieldOfView {
            foveal_degrees: FOVEAL_DEGREES,
        }
    }

    pub fn same_kind(&self, other: &ObjectiveKind) -> bool {
        self.rank() == other.rank()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintVector {
    pub occlusion: f64,
    pub fov: f64,
    pub distance: f64,
}

impl ConstraintVector {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.occlusion, self.fov, self.distance]
    }

    pub fn total(&self) -> f64 {
        self.occlusion + self.fov + self.distance
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("widget '{0}' has a non-finite position")]
    NonFinite(String),
    #[error("widget '{0}' is not in the scene catalog")]
    UnknownWidget(String),
    #[error("widget '{0}' is anchored to unknown object '{1}'")]
    UnknownAnchor(String, String),
    #[error("widget '{0}' sits exactly at the eye or shoulder")]
    Degenerate(String),
}

static NO_PARAMS: WidgetParams = WidgetParams {
    interaction_probability: 0.0,
    observation_probability: 0.0,
    anchor: None,
    enabled: false,
    pinned_position: None,
};

/// Everything needed to score a layout against a scene.
///
/// Widgets missing from `widgets` carry zero weight; objects missing from
/// `objects` use the default suitability.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub scene: &'a Scene,
    pub widgets: &'a BTreeMap<String, WidgetParams>,
    pub objects: &'a BTreeMap<String, ObjectParams>,
    pub voxels: &'a BTreeMap<String, VoxelGrid>,
    pub distance_threshold: f64,
}

impl<'a> EvalContext<'a> {
    fn params(&self, widget: &str) -> &'a WidgetParams {
        self.widgets.get(widget).unwrap_or(&NO_PARAMS)
    }

    fn suitability(&self, object: &str) -> f64 {
        self.objects
            .get(object)
            .map_or(DEFAULT_OVERLAY_SUITABILITY, |p| p.overlay_suitability)
    }

    fn eye(&self) -> Vec3 {
        self.scene.pose.eye_position
    }

    fn gaze(&self) -> Vec3 {
        self.scene.pose.gaze_direction
    }

    fn mean<'l>(&self, layout: &'l Layout, term: impl Fn(&'l str, Vec3) -> f64) -> f64 {
        if layout.is_empty() {
            return 0.0;
        }
        layout.iter().map(|(n, p)| term(n, p)).sum::<f64>() / layout.len() as f64
    }

    fn placed(&self, layout: &Layout) -> Vec<PlacedWidget> {
        layout
            .iter()
            .filter_map(|(name, center)| {
                let spec = self.scene.widget(name)?;
                PlacedWidget::new(center, self.eye(), spec).ok()
            })
            .collect()
    }

    fn gaze_angle(&self, p: Vec3) -> f64 {
        angular_diff(p, self.eye(), self.gaze()).unwrap_or(0.0)
    }

    /// Mean of `p_obs · max(0, gaze angle − foveal)` in degrees.
    pub fn eval_fov(&self, layout: &Layout, foveal_degrees: f64) -> f64 {
        self.mean(layout, |name, p| {
            let excess = (self.gaze_angle(p) - foveal_degrees).max(0.0);
            if excess == 0.0 {
                0.0
            } else {
                self.params(name).observation_probability * excess
            }
        })
    }

    /// Mean of `p_obs · |elevation from the eye|` in degrees.
    pub fn eval_neck(&self, layout: &Layout) -> f64 {
        self.mean(layout, |name, p| {
            let elev = elevation_angle(p, self.eye()).unwrap_or(0.0);
            self.params(name).observation_probability * elev.abs()
        })
    }

    /// Mean of `p_int · |elevation from the shoulder|` in degrees.
    pub fn eval_arm(&self, layout: &Layout) -> f64 {
        self.mean(layout, |name, p| {
            let elev = elevation_angle(p, self.scene.pose.shoulder_position).unwrap_or(0.0);
            self.params(name).interaction_probability * elev.abs()
        })
    }

    /// Mean horizontal plus vertical misalignment in meters.
    ///
    /// Each widget is compared against its best-aligned neighbour over the
    /// like-with-like edge pairings (left/center/right, top/center/bottom),
    /// using world x and y of the rectangle's extents.
    pub fn eval_alignment(&self, layout: &Layout, x_tolerance: f64, y_tolerance: f64) -> f64 {
        let spans: Vec<([f64; 3], [f64; 3])> = layout
            .iter()
            .filter_map(|(name, c)| {
                let w = self.scene.widget(name)?;
                let (hw, hh) = (w.width * 0.5, w.height * 0.5);
                Some(([c.x - hw, c.x, c.x + hw], [c.y + hh, c.y, c.y - hh]))
            })
            .collect();
        if spans.len() < 2 {
            return 0.0;
        }
        let best = |i: usize, pick: fn(&([f64; 3], [f64; 3])) -> &[f64; 3]| -> f64 {
            spans
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, other)| {
                    let (a, b) = (pick(&spans[i]), pick(other));
                    (0..3).map(move |k| (a[k] - b[k]).abs())
                })
                .fold(f64::INFINITY, f64::min)
        };
        let total: f64 = (0..spans.len())
            .map(|i| {
                let dx = (best(i, |s| &s.0) - x_tolerance).max(0.0);
                let dy = (best(i, |s| &s.1) - y_tolerance).max(0.0);
                dx + dy
            })
            .sum();
        total / spans.len() as f64
    }

    /// Mean angular distance (degrees, seen from the eye) between anchored
    /// widgets and their anchor's center. Zero without anchors.
    pub fn eval_anchor(&self, layout: &Layout) -> f64 {
        let eye = self.eye();
        let mut sum = 0.0;
        let mut count = 0usize;
        for (name, p) in layout.iter() {
            let Some(anchor) = self.params(name).anchor.as_deref() else {
                continue;
            };
            let Some(obj) = self.scene.object(anchor) else {
                continue;
            };
            let toward = obj.bounds.center() - eye;
            sum += angular_diff(p, eye, toward).unwrap_or(0.0);
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Fraction of an object's voxel centers hidden behind one widget.
    pub fn occluded_fraction(&self, object: &str, rect: &PlacedWidget) -> f64 {
        let (Some(obj), Some(grid)) = (self.scene.object(object), self.voxels.get(object)) else {
            return 0.0;
        };
        if grid.is_empty() {
            return 0.0;
        }
        let eye = self.eye();
        if let (Some(r_obj), Some(r_w)) = (
            angular_radius(obj.bounds.center(), obj.bounds.bounding_radius(), eye),
            angular_radius(rect.center, rect.half_diagonal(), eye),
        ) {
            let sep = angular_diff(rect.center, eye, obj.bounds.center() - eye).unwrap_or(0.0);
            if sep > r_obj + r_w + 1e-6 {
                return 0.0;
            }
        }
        let hidden = grid.centers().filter(|&c| rect.blocks(eye, c)).count();
        hidden as f64 / grid.len() as f64
    }

    /// Σ over (object, widget) of `(1 − suitability) · occluded fraction`.
    pub fn eval_overlay(&self, layout: &Layout) -> f64 {
        let placed = self.placed(layout);
        let mut total = 0.0;
        for obj in &self.scene.objects {
            let weight = 1.0 - self.suitability(&obj.name);
            if weight <= 0.0 {
                continue;
            }
            for w in &placed {
                total += weight * self.occluded_fraction(&obj.name, w);
            }
        }
        total
    }

    /// Fraction of `occludee`'s sample points hidden behind `occluder`.
    pub fn widget_occlusion(&self, occluder: &PlacedWidget, occludee: &PlacedWidget) -> f64 {
        let eye = self.eye();
        if let (Some(ra), Some(rb)) = (
            angular_radius(occluder.center, occluder.half_diagonal(), eye),
            angular_radius(occludee.center, occludee.half_diagonal(), eye),
        ) {
            let sep = angular_diff(occluder.center, eye, occludee.center - eye).unwrap_or(0.0);
            if sep > ra + rb + 1e-6 {
                return 0.0;
            }
        }
        let n = OCCLUSION_SAMPLES_PER_AXIS;
        let hidden = occludee.sample_grid(n).filter(|&s| occluder.blocks(eye, s)).count();
        hidden as f64 / (n * n) as f64
    }

    /// Σ over ordered widget pairs of the occludee's hidden sample fraction.
    pub fn eval_occlusion_constraint(&self, layout: &Layout) -> f64 {
        let placed = self.placed(layout);
        let mut total = 0.0;
        for (i, a) in placed.iter().enumerate() {
            for (j, b) in placed.iter().enumerate() {
                if i != j {
                    total += self.widget_occlusion(a, b);
                }
            }
        }
        total
    }

    /// Σ of degrees beyond the 60° field of view.
    pub fn eval_fov_constraint(&self, layout: &Layout) -> f64 {
        layout
            .iter()
            .map(|(_, p)| (self.gaze_angle(p) - FOV_LIMIT_DEGREES).max(0.0))
            .sum()
    }

    /// Σ of meters beyond the reach threshold, measured from the shoulder.
    pub fn eval_distance_constraint(&self, layout: &Layout) -> f64 {
        let shoulder = self.scene.pose.shoulder_position;
        layout
            .iter()
            .map(|(_, p)| (p.distance(shoulder) - self.distance_threshold).max(0.0))
            .sum()
    }

    pub fn eval_objective(&self, kind: &ObjectiveKind, layout: &Layout) -> f64 {
        match *kind {
            ObjectiveKind::Alignment {
                x_tolerance,
                y_tolerance,
            } => self.eval_alignment(layout, x_tolerance, y_tolerance),
            ObjectiveKind::FieldOfView { foveal_degrees } => self.eval_fov(layout, foveal_degrees),
            ObjectiveKind::Anchor => self.eval_anchor(layout),
            ObjectiveKind::Overlay => self.eval_overlay(layout),
            ObjectiveKind::NeckStrain => self.eval_neck(layout),
            ObjectiveKind::ArmExertion => self.eval_arm(layout),
        }
    }

    pub fn evaluate_constraints(&self, layout: &Layout) -> ConstraintVector {
        ConstraintVector {
            occlusion: self.eval_occlusion_constraint(layout),
            fov: self.eval_fov_constraint(layout),
            distance: self.eval_distance_constraint(layout),
        }
    }

    /// Objective values in `active` order plus all three constraints.
    pub fn evaluate(
        &self,
        layout: &Layout,
        active: &[ObjectiveKind],
    ) -> Result<(ObjectiveVector, ConstraintVector), EvalError> {
        let eye = self.eye();
        let shoulder = self.scene.pose.shoulder_position;
        for (name, p) in layout.iter() {
            if !p.is_finite() {
                return Err(EvalError::NonFinite(name.to_owned()));
            }
            if self.scene.widget(name).is_none() {
                return Err(EvalError::UnknownWidget(name.to_owned()));
            }
            if p.distance(eye) <= 1e-12 || p.distance(shoulder) <= 1e-12 {
                return Err(EvalError::Degenerate(name.to_owned()));
            }
            if let Some(anchor) = &self.params(name).anchor {
                if self.scene.object(anchor).is_none() {
                    return Err(EvalError::UnknownAnchor(name.to_owned(), anchor.clone()));
                }
            }
        }
        let values = active.iter().map(|k| self.eval_objective(k, layout)).collect();
        Ok((ObjectiveVector { values }, self.evaluate_constraints(layout)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{load_scene, Aabb, PhysicalObject, UserPose, WidgetSpec};
    use approx::assert_abs_diff_eq;

    pub(crate) fn scene() -> Scene {
        Scene {
            id: "t".into(),
            pose: UserPose {
                eye_position: Vec3::new(0.0, 1.2, 0.0),
                gaze_direction: Vec3::new(0.0, 0.0, -1.0),
                shoulder_position: Vec3::new(0.0, 1.0, 0.0),
            },
            objects: vec![PhysicalObject {
                name: "monitor".into(),
                bounds: Aabb::new(Vec3::new(-0.2, 1.1, -1.05), Vec3::new(0.2, 1.3, -1.0)),
                label: "monitor".into(),
            }],
            widgets: ["A", "B", "C"]
                .iter()
                .map(|n| WidgetSpec {
                    name: (*n).into(),
                    width: 0.3,
                    height: 0.2,
                    description: String::new(),
                })
                .collect(),
            search_bounds: Aabb::new(Vec3::new(-2.0, 0.0, -2.0), Vec3::new(2.0, 3.0, 0.0)),
            voxel_resolution: 0.05,
        }
    }

    struct Fixture {
        scene: Scene,
        widgets: BTreeMap<String, WidgetParams>,
        objects: BTreeMap<String, ObjectParams>,
        voxels: BTreeMap<String, VoxelGrid>,
        threshold: f64,
    }

    impl Fixture {
        fn new() -> Self {
            let scene = scene();
            let voxels = scene.voxelize_all();
            let widgets = scene
                .widgets
                .iter()
                .map(|w| {
                    (
                        w.name.clone(),
                        WidgetParams {
                            interaction_probability: 1.0,
                            observation_probability: 1.0,
                            enabled: true,
                            ..WidgetParams::default()
                        },
                    )
                })
                .collect();
            Self {
                scene,
                widgets,
                objects: BTreeMap::new(),
                voxels,
                threshold: REACH_METERS,
            }
        }

        fn ctx(&self) -> EvalContext<'_> {
            EvalContext {
                scene: &self.scene,
                widgets: &self.widgets,
                objects: &self.objects,
                voxels: &self.voxels,
                distance_threshold: self.threshold,
            }
        }

        fn set(&mut self, w: &str, f: impl FnOnce(&mut WidgetParams)) {
            f(self.widgets.get_mut(w).unwrap());
        }
    }

    fn layout(items: &[(&str, Vec3)]) -> Layout {
        items.iter().map(|(n, p)| ((*n).to_owned(), *p)).collect()
    }

    fn at_angle_deg(deg: f64, dist: f64) -> Vec3 {
        let eye = Vec3::new(0.0, 1.2, 0.0);
        let r = deg.to_radians();
        eye + Vec3::new(r.sin(), 0.0, -r.cos()) * dist
    }

    #[test]
    fn fov_examples() {
        let mut f = Fixture::new();
        let on_ray = layout(&[("A", Vec3::new(0.0, 1.2, -0.5))]);
        assert_eq!(f.ctx().eval_fov(&on_ray, FOVEAL_DEGREES), 0.0);
        f.set("A", |p| p.observation_probability = 0.5);
        let off = layout(&[("A", at_angle_deg(10.0, 0.5))]);
        assert_abs_diff_eq!(f.ctx().eval_fov(&off, FOVEAL_DEGREES), 2.5, epsilon = 1e-9);
        f.set("A", |p| p.observation_probability = 0.0);
        let far = layout(&[("A", at_angle_deg(50.0, 0.5))]);
        assert_eq!(f.ctx().eval_fov(&far, FOVEAL_DEGREES), 0.0);
    }

    #[test]
    fn neck_examples() {
        let mut f = Fixture::new();
        let level = layout(&[("A", Vec3::new(0.1, 1.2, -0.5)), ("B", Vec3::new(-0.3, 1.2, -0.4))]);
        assert_eq!(f.ctx().eval_neck(&level), 0.0);
        let up = layout(&[("A", Vec3::new(0.0, 1.7, -0.5))]);
        assert_abs_diff_eq!(f.ctx().eval_neck(&up), 45.0, epsilon = 1e-9);
        let mixed = layout(&[("A", Vec3::new(0.0, 1.5, -0.5)), ("B", Vec3::new(0.2, 1.0, -0.4))]);
        let base = f.ctx().eval_neck(&mixed);
        for w in ["A", "B"] {
            f.set(w, |p| p.observation_probability = 0.5);
        }
        let half = f.ctx().eval_neck(&mixed);
        assert_abs_diff_eq!(base, 2.0 * half, epsilon = 1e-12);
    }

    #[test]
    fn arm_examples() {
        let mut f = Fixture::new();
        let level = layout(&[("A", Vec3::new(0.3, 1.0, -0.3))]);
        assert_eq!(f.ctx().eval_arm(&level), 0.0);
        let d = 0.4;
        let up = layout(&[("A", Vec3::new(0.0, 1.0 + d * 30f64.to_radians().sin(), -d * 30f64.to_radians().cos()))]);
        assert_abs_diff_eq!(f.ctx().eval_arm(&up), 30.0, epsilon = 1e-9);
        f.set("A", |p| p.interaction_probability = 0.0);
        assert_eq!(f.ctx().eval_arm(&layout(&[("A", Vec3::new(0.0, 2.0, -0.2))])), 0.0);
    }

    #[test]
    fn alignment_examples() {
        let f = Fixture::new();
        let single = layout(&[("A", Vec3::new(0.1, 1.1, -0.5))]);
        assert_eq!(f.ctx().eval_alignment(&single, 0.0, 0.0), 0.0);
        let same = layout(&[("A", Vec3::new(0.1, 1.1, -0.5)), ("B", Vec3::new(0.1, 1.1, -0.9))]);
        assert_eq!(f.ctx().eval_alignment(&same, 0.0, 0.0), 0.0);
        // 0.3 wide, 0.1 apart: every pairing differs by 0.1
        let shifted = layout(&[("A", Vec3::new(0.0, 1.1, -0.5)), ("B", Vec3::new(0.1, 1.1, -0.7))]);
        assert_abs_diff_eq!(f.ctx().eval_alignment(&shifted, 0.0, 0.0), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(f.ctx().eval_alignment(&shifted, 0.04, 0.0), 0.06, epsilon = 1e-12);
    }

    #[test]
    fn anchor_examples() {
        let mut f = Fixture::new();
        let l = layout(&[("A", Vec3::new(0.3, 1.0, -0.4))]);
        assert_eq!(f.ctx().eval_anchor(&l), 0.0);
        f.set("A", |p| p.anchor = Some("monitor".into()));
        let center = Vec3::new(0.0, 1.2, -1.025);
        let eye = Vec3::new(0.0, 1.2, 0.0);
        let on = layout(&[("A", eye + (center - eye) * 0.5)]);
        assert_abs_diff_eq!(f.ctx().eval_anchor(&on), 0.0, epsilon = 1e-6);
        let off = layout(&[("A", at_angle_deg(15.0, 0.5))]);
        assert_abs_diff_eq!(f.ctx().eval_anchor(&off), 15.0, epsilon = 1e-9);
    }

    #[test]
    fn overlay_examples() {
        let mut f = Fixture::new();
        let eye = Vec3::new(0.0, 1.2, 0.0);
        let cover = layout(&[("A", eye + Vec3::new(0.0, 0.0, -0.3))]);
        // default suitability 1 → nothing counts
        assert_eq!(f.ctx().eval_overlay(&cover), 0.0);
        f.objects.insert("monitor".into(), ObjectParams { overlay_suitability: 0.0 });
        // 0.3×0.2 widget at 0.3 m subtends far more than a 0.4×0.2 monitor at 1 m
        assert_abs_diff_eq!(f.ctx().eval_overlay(&cover), 1.0, epsilon = 1e-12);
        let behind = layout(&[("A", Vec3::new(0.0, 1.2, -1.5))]);
        assert_eq!(f.ctx().eval_overlay(&behind), 0.0);
    }

    #[test]
    fn occlusion_examples() {
        let f = Fixture::new();
        let apart = layout(&[("A", Vec3::new(-0.3, 1.2, -0.5)), ("B", Vec3::new(0.3, 1.2, -0.5))]);
        assert_eq!(f.ctx().eval_occlusion_constraint(&apart), 0.0);
        let coaxial = layout(&[("A", Vec3::new(0.0, 1.2, -0.4)), ("B", Vec3::new(0.0, 1.2, -0.8))]);
        let ctx = f.ctx();
        let v = ctx.eval_occlusion_constraint(&coaxial);
        assert!(v >= 1.0 / 9.0, "{v}");
        let placed = ctx.placed(&coaxial);
        let (a, b) = (&placed[0], &placed[1]);
        assert!(ctx.widget_occlusion(a, b) > 0.0);
        assert_eq!(ctx.widget_occlusion(b, a), 0.0);
        assert_abs_diff_eq!(v, ctx.widget_occlusion(a, b), epsilon = 1e-12);
    }

    #[test]
    fn fov_constraint_examples() {
        let f = Fixture::new();
        let inside = layout(&[("A", at_angle_deg(30.0, 0.5)), ("B", at_angle_deg(-59.0, 0.5))]);
        assert_eq!(f.ctx().eval_fov_constraint(&inside), 0.0);
        assert_abs_diff_eq!(f.ctx().eval_fov_constraint(&layout(&[("A", at_angle_deg(75.0, 0.5))])), 15.0, epsilon = 1e-9);
        // exactly 60 degrees: acos rounding may leave a few ulps above the limit
        assert!(f.ctx().eval_fov_constraint(&layout(&[("A", at_angle_deg(60.0, 0.5))])) < 1e-9);
    }

    #[test]
    fn distance_constraint_examples() {
        let mut f = Fixture::new();
        let shoulder = Vec3::new(0.0, 1.0, 0.0);
        let near = layout(&[("A", shoulder + Vec3::new(0.0, 0.0, -0.5))]);
        assert_eq!(f.ctx().eval_distance_constraint(&near), 0.0);
        let far = layout(&[("A", shoulder + Vec3::new(0.0, 0.0, -0.7))]);
        assert_abs_diff_eq!(f.ctx().eval_distance_constraint(&far), 0.05, epsilon = 1e-12);
        f.threshold = 2.0;
        let one = layout(&[("A", shoulder + Vec3::new(0.0, 0.0, -1.0))]);
        assert_eq!(f.ctx().eval_distance_constraint(&one), 0.0);
    }

    #[test]
    fn evaluate_cardinality_and_constraints() {
        let f = Fixture::new();
        let shoulder = Vec3::new(0.0, 1.0, 0.0);
        let l = layout(&[("A", shoulder + Vec3::new(0.0, 0.0, -0.9))]);
        let (o, c) = f.ctx().evaluate(&l, &[ObjectiveKind::field_of_view()]).unwrap();
        assert_eq!(o.values.len(), 1);
        assert_eq!(c.occlusion, 0.0);
        assert_eq!(c.fov, 0.0);
        assert!(c.distance > 0.0);
        let all = [
            ObjectiveKind::Alignment { x_tolerance: 0.0, y_tolerance: 0.0 },
            ObjectiveKind::field_of_view(),
            ObjectiveKind::Anchor,
            ObjectiveKind::Overlay,
            ObjectiveKind::NeckStrain,
            ObjectiveKind::ArmExertion,
        ];
        let (o, _) = f.ctx().evaluate(&l, &all).unwrap();
        assert_eq!(o.values.len(), 6);
        let bad = layout(&[("A", Vec3::new(f64::NAN, 1.0, -0.5))]);
        assert!(matches!(f.ctx().evaluate(&bad, &all), Err(EvalError::NonFinite(_))));
    }

    #[test]
    fn office_fixture_is_consistent() {
        let scene = load_scene(crate::scene::packaged::OFFICE).unwrap();
        assert!(scene.voxelize_all().values().all(|g| !g.is_empty()));
    }
}
