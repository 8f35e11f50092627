//! Geometric scene model: physical objects, user pose, widget catalog and
//! the placement of widgets (a [`Layout`]).

mod rays;
mod vec3;
mod voxel;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rays::{
    angular_diff, angular_radius, billboard_basis, elevation_angle, ray_rect_intersect, Basis,
    PlacedWidget,
};
pub use vec3::{Aabb, Vec3};
pub use voxel::{voxelize, VoxelGrid};

pub const DEFAULT_VOXEL_RESOLUTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{0}: point coincides with origin")]
    Coincident(&'static str),
    #[error("direction vector has zero length")]
    ZeroDirection,
    #[error("voxel resolution must be positive, got {0}")]
    Resolution(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl SceneError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPose {
    #[serde(rename = "eye")]
    pub eye_position: Vec3,
    #[serde(rename = "gaze")]
    pub gaze_direction: Vec3,
    #[serde(rename = "shoulder")]
    pub shoulder_position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalObject {
    pub name: String,
    pub bounds: Aabb,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetSpec {
    pub name: String,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub pose: UserPose,
    pub objects: Vec<PhysicalObject>,
    pub widgets: Vec<WidgetSpec>,
    pub search_bounds: Aabb,
    pub voxel_resolution: f64,
}

impl Scene {
    pub fn object(&self, name: &str) -> Option<&PhysicalObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn widget(&self, name: &str) -> Option<&WidgetSpec> {
        self.widgets.iter().find(|w| w.name == name)
    }

    /// Voxel grids for every object at the scene resolution.
    pub fn voxelize_all(&self) -> BTreeMap<String, VoxelGrid> {
        self.objects
            .iter()
            .map(|o| {
                let grid = voxelize(o, self.voxel_resolution)
                    .expect("scene resolution validated on construction");
                (o.name.clone(), grid)
            })
            .collect()
    }

    pub fn to_document(&self) -> SceneDocument {
        SceneDocument {
            id: self.id.clone(),
            pose: self.pose.clone(),
            search_bounds: self.search_bounds,
            objects: self
                .objects
                .iter()
                .map(|o| ObjectDocument {
                    name: o.name.clone(),
                    min: o.bounds.min,
                    max: o.bounds.max,
                    label: o.label.clone(),
                })
                .collect(),
            widgets: self.widgets.clone(),
            voxel_resolution: Some(self.voxel_resolution),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scene serializes")
    }
}

/// Wire form of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub id: String,
    pub pose: UserPose,
    pub search_bounds: Aabb,
    pub objects: Vec<ObjectDocument>,
    pub widgets: Vec<WidgetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxel_resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDocument {
    pub name: String,
    pub min: Vec3,
    pub max: Vec3,
    #[serde(default)]
    pub label: String,
}

/// Parses and validates a scene document. Gaze is normalized.
pub fn load_scene(document: &str) -> Result<Scene, SceneError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: SceneDocument = serde_path_to_error::deserialize(de).map_err(|e| SceneError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Scene::try_from(doc)
}

impl TryFrom<SceneDocument> for Scene {
    type Error = SceneError;

    fn try_from(doc: SceneDocument) -> Result<Self, SceneError> {
        if doc.id.trim().is_empty() {
            return Err(SceneError::invalid("id", "scene id is empty"));
        }
        let finite = |path: &str, v: Vec3| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SceneError::invalid(path, "non-finite coordinate"))
            }
        };
        finite("pose.eye", doc.pose.eye_position)?;
        finite("pose.gaze", doc.pose.gaze_direction)?;
        finite("pose.shoulder", doc.pose.shoulder_position)?;
        let gaze = doc
            .pose
            .gaze_direction
            .normalized()
            .ok_or_else(|| SceneError::invalid("pose.gaze", "gaze direction has zero length"))?;
        if doc.pose.shoulder_position.y > doc.pose.eye_position.y {
            return Err(SceneError::invalid("pose.shoulder", "shoulder is above the eye"));
        }

        finite("search_bounds.min", doc.search_bounds.min)?;
        finite("search_bounds.max", doc.search_bounds.max)?;
        if !doc.search_bounds.is_proper() {
            return Err(SceneError::invalid("search_bounds", "search bounds are empty"));
        }

        let resolution = doc.voxel_resolution.unwrap_or(DEFAULT_VOXEL_RESOLUTION);
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(SceneError::invalid("voxel_resolution", "must be positive"));
        }

        let mut names = BTreeSet::new();
        let mut objects = Vec::with_capacity(doc.objects.len());
        for (i, o) in doc.objects.into_iter().enumerate() {
            let path = format!("objects[{i}]");
            if o.name.trim().is_empty() {
                return Err(SceneError::invalid(format!("{path}.name"), "object name is empty"));
            }
            if !names.insert(o.name.clone()) {
                return Err(SceneError::invalid(
                    format!("{path}.name"),
                    format!("duplicate object name '{}'", o.name),
                ));
            }
            finite(&format!("{path}.min"), o.min)?;
            finite(&format!("{path}.max"), o.max)?;
            let bounds = Aabb::new(o.min, o.max);
            if !bounds.is_proper() {
                return Err(SceneError::invalid(path, "object min must be below max on every axis"));
            }
            objects.push(PhysicalObject {
                name: o.name,
                bounds,
                label: o.label,
            });
        }

        let mut names = BTreeSet::new();
        let fit = {
            let e = doc.search_bounds.extent();
            e.x.min(e.y).min(e.z)
        };
        for (i, w) in doc.widgets.iter().enumerate() {
            let path = format!("widgets[{i}]");
            if w.name.trim().is_empty() {
                return Err(SceneError::invalid(format!("{path}.name"), "widget name is empty"));
            }
            if !names.insert(w.name.clone()) {
                return Err(SceneError::invalid(
                    format!("{path}.name"),
                    format!("duplicate widget name '{}'", w.name),
                ));
            }
            if !(w.width > 0.0 && w.width.is_finite()) || !(w.height > 0.0 && w.height.is_finite()) {
                return Err(SceneError::invalid(path, "widget width and height must be positive"));
            }
            if w.width.max(w.height) > fit {
                return Err(SceneError::invalid(path, "widget does not fit inside search bounds"));
            }
        }

        Ok(Scene {
            id: doc.id,
            pose: UserPose {
                eye_position: doc.pose.eye_position,
                gaze_direction: gaze,
                shoulder_position: doc.pose.shoulder_position,
            },
            objects,
            widgets: doc.widgets,
            search_bounds: doc.search_bounds,
            voxel_resolution: resolution,
        })
    }
}

/// Widget centers keyed by widget name. Widgets face the eye.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layout {
    pub positions: BTreeMap<String, Vec3>,
}

impl Layout {
    pub fn get(&self, widget: &str) -> Option<Vec3> {
        self.positions.get(widget).copied()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Vec3)> {
        self.positions.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl FromIterator<(String, Vec3)> for Layout {
    fn from_iter<I: IntoIterator<Item = (String, Vec3)>>(iter: I) -> Self {
        Layout {
            positions: iter.into_iter().collect(),
        }
    }
}

/// Scenes bundled with the crate.
pub mod packaged {
    pub const OFFICE: &str = include_str!("../../assets/scenes/office.json");
    pub const LIVING_ROOM: &str = include_str!("../../assets/scenes/living_room.json");

    pub fn all() -> [(&'static str, &'static str); 2] {
        [("office", OFFICE), ("living_room", LIVING_ROOM)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "id": "min",
        "pose": {"eye": [0, 1.2, 0], "gaze": [0, 0, -2], "shoulder": [0.2, 1.0, 0]},
        "search_bounds": {"min": [-1, 0.5, -1], "max": [1, 2, 0]},
        "objects": [{"name": "desk", "min": [-0.5, 0.7, -0.8], "max": [0.5, 0.75, -0.3], "label": "desk"}],
        "widgets": [{"name": "Mail", "width": 0.3, "height": 0.2, "description": "email"}]
    }"#;

    #[test]
    fn minimal_document_loads() {
        let s = load_scene(MINIMAL).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.widgets.len(), 1);
        assert_eq!(s.voxel_resolution, DEFAULT_VOXEL_RESOLUTION);
        assert!((s.pose.gaze_direction.norm() - 1.0).abs() < 1e-9);
        let again = load_scene(&s.to_json()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn duplicate_widget_name_rejected() {
        let doc = MINIMAL.replace(
            r#""widgets": [{"name": "Mail", "width": 0.3, "height": 0.2, "description": "email"}]"#,
            r#""widgets": [{"name": "Mail", "width": 0.3, "height": 0.2}, {"name": "Mail", "width": 0.1, "height": 0.1}]"#,
        );
        let err = load_scene(&doc).unwrap_err();
        assert!(err.to_string().contains("duplicate widget name"), "{err}");
        assert!(err.to_string().contains("widgets[1].name"), "{err}");
    }

    #[test]
    fn parse_error_names_path() {
        let doc = MINIMAL.replace(r#""width": 0.3"#, r#""width": "wide""#);
        match load_scene(&doc).unwrap_err() {
            SceneError::Parse { path, .. } => assert_eq!(path, "widgets[0].width"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverted_object_rejected() {
        let doc = MINIMAL.replace(r#""min": [-0.5, 0.7, -0.8]"#, r#""min": [0.6, 0.7, -0.8]"#);
        assert!(matches!(load_scene(&doc), Err(SceneError::Invalid { .. })));
    }

    #[test]
    fn packaged_scenes_are_valid() {
        for (id, text) in packaged::all() {
            let s = load_scene(text).unwrap();
            assert_eq!(s.id, id);
            for o in &s.objects {
                assert!(s.search_bounds.contains(o.bounds.min), "{id}/{}", o.name);
                assert!(s.search_bounds.contains(o.bounds.max), "{id}/{}", o.name);
            }
        }
        let office = load_scene(packaged::OFFICE).unwrap();
        assert_eq!(office.widgets.len(), 5);
        for name in ["monitor", "desk", "mug"] {
            assert!(office.object(name).is_some(), "{name}");
        }
    }
}
