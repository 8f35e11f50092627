//! Optimization specs: the JSON contract between the configuration agent
//! and the solver, its validation against a scene, and compilation into a
//! box-bounded problem over the unpinned widget positions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::moo::{Evaluation, Problem};
use crate::objectives::{
    EvalContext, EvalError, ObjectParams, ObjectiveKind, ObjectiveVector, ConstraintVector,
    WidgetParams, FOVEAL_DEGREES, REACH_METERS,
};
use crate::scene::{Layout, Scene, Vec3, VoxelGrid};

pub const DEFAULT_CANDIDATE_COUNT: usize = 4;
pub const DEFAULT_SEED: u64 = 42;
pub const ALIGNMENT_TOLERANCE: f64 = 0.02;
/// Objects below this suitability are protected and cannot hold a widget.
pub const MIN_ANCHOR_SUITABILITY: f64 = 0.05;
pub const DEFAULT_OBSERVATION: f64 = 0.5;
pub const DEFAULT_INTERACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("spec is invalid for this scene: {}", join(.0))]
    Violations(Vec<SpecViolation>),
    #[error("no enabled widgets")]
    NoEnabledWidgets,
    #[error("disabled widget '{0}' has an anchor")]
    DisabledAnchor(String),
    #[error("unknown widget '{0}'")]
    UnknownWidget(String),
    #[error("widget '{0}' is disabled")]
    DisabledWidget(String),
    #[error("position {1} for widget '{0}' lies outside the search bounds")]
    OutOfBounds(String, Vec3),
}

fn join(v: &[SpecViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// One broken rule, with the document path it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecViolation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationSpec {
    pub widgets: BTreeMap<String, WidgetParams>,
    pub objects: BTreeMap<String, ObjectParams>,
    pub active_objectives: Vec<ObjectiveKind>,
    pub candidate_count: usize,
    pub seed: u64,
    pub distance_threshold: f64,
}

impl OptimizationSpec {
    pub fn enabled_widgets(&self) -> impl Iterator<Item = (&str, &WidgetParams)> {
        self.widgets
            .iter()
            .filter(|(_, p)| p.enabled)
            .map(|(n, p)| (n.as_str(), p))
    }

    pub fn suitability(&self, object: &str) -> f64 {
        self.objects
            .get(object)
            .copied()
            .unwrap_or_default()
            .overlay_suitability
    }

    pub fn to_document(&self) -> SpecDocument {
        SpecDocument {
            widgets: self
                .widgets
                .iter()
                .map(|(name, p)| WidgetEntry {
                    name: name.clone(),
                    enabled: p.enabled,
                    interaction_probability: p.interaction_probability,
                    observation_probability: p.observation_probability,
                    anchor: p.anchor.clone(),
                    pinned: p.pinned_position,
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|(name, p)| ObjectEntry {
                    name: name.clone(),
                    overlay_suitability: p.overlay_suitability,
                })
                .collect(),
            objectives: self.active_objectives.clone(),
            candidate_count: self.candidate_count,
            seed: self.seed,
            distance_threshold: self.distance_threshold,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("spec serializes")
    }
}

impl Serialize for OptimizationSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OptimizationSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = SpecDocument::deserialize(d)?;
        OptimizationSpec::try_from(doc).map_err(D::Error::custom)
    }
}

fn default_true() -> bool {
    true
}
fn default_observation() -> f64 {
    DEFAULT_OBSERVATION
}
fn default_interaction() -> f64 {
    DEFAULT_INTERACTION
}
fn default_suitability() -> f64 {
    ObjectParams::default().overlay_suitability
}
fn default_candidates() -> usize {
    DEFAULT_CANDIDATE_COUNT
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_threshold() -> f64 {
    REACH_METERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidgetEntry {
    pub name: String,
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_interaction")]
    pub interaction_probability: f64,
    #[serde(default = "default_observation")]
    pub observation_probability: f64,
    #[serde(default)]
    pub anchor: Option<String>,
    #[serde(default)]
    pub pinned: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub name: String,
    #[serde(default = "default_suitability")]
    pub overlay_suitability: f64,
}

/// Wire form of a spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub widgets: Vec<WidgetEntry>,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
    pub objectives: Vec<ObjectiveKind>,
    #[serde(default = "default_candidates")]
    pub candidate_count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub distance_threshold: f64,
}

impl TryFrom<SpecDocument> for OptimizationSpec {
    type Error = ConfigError;

    fn try_from(doc: SpecDocument) -> Result<Self, ConfigError> {
        let unit = |path: String, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(path, format!("expected a value in [0, 1], got {v}")))
            }
        };
        let mut widgets = BTreeMap::new();
        for (i, w) in doc.widgets.into_iter().enumerate() {
            if w.name.trim().is_empty() {
                return Err(invalid(format!("widgets[{i}].name"), "empty widget name"));
            }
            unit(format!("widgets[{i}].interaction_probability"), w.interaction_probability)?;
            unit(format!("widgets[{i}].observation_probability"), w.observation_probability)?;
            if let Some(p) = w.pinned {
                if !p.is_finite() {
                    return Err(invalid(format!("widgets[{i}].pinned"), "non-finite coordinate"));
                }
            }
            let params = WidgetParams {
                interaction_probability: w.interaction_probability,
                observation_probability: w.observation_probability,
                anchor: w.anchor,
                enabled: w.enabled,
                pinned_position: w.pinned,
            };
            if widgets.insert(w.name.clone(), params).is_some() {
                return Err(invalid(
                    format!("widgets[{i}].name"),
                    format!("duplicate widget name '{}'", w.name),
                ));
            }
        }
        let mut objects = BTreeMap::new();
        for (i, o) in doc.objects.into_iter().enumerate() {
            unit(format!("objects[{i}].overlay_suitability"), o.overlay_suitability)?;
            let params = ObjectParams {
                overlay_suitability: o.overlay_suitability,
            };
            if objects.insert(o.name.clone(), params).is_some() {
                return Err(invalid(
                    format!("objects[{i}].name"),
                    format!("duplicate object name '{}'", o.name),
                ));
            }
        }
        for (i, k) in doc.objectives.iter().enumerate() {
            let ok = match *k {
                ObjectiveKind::Alignment {
                    x_tolerance,
                    y_tolerance,
                } => [x_tolerance, y_tolerance].iter().all(|t| t.is_finite() && *t >= 0.0),
                ObjectiveKind::FieldOfView { foveal_degrees } => {
                    foveal_degrees.is_finite() && (0.0..180.0).contains(&foveal_degrees)
                }
                _ => true,
            };
            if !ok {
                return Err(invalid(format!("objectives[{i}].params"), "parameter out of range"));
            }
        }
        if doc.candidate_count < 1 {
            return Err(invalid("candidate_count", "must be at least 1"));
        }
        if !(doc.distance_threshold.is_finite() && doc.distance_threshold > 0.0) {
            return Err(invalid("distance_threshold", "must be positive"));
        }
        Ok(OptimizationSpec {
            widgets,
            objects,
            active_objectives: doc.objectives,
            candidate_count: doc.candidate_count,
            seed: doc.seed,
            distance_threshold: doc.distance_threshold,
        })
    }
}

fn kind_from_name(kind: &str) -> Option<usize> {
    let key: String = kind.chars().filter(|c| *c != '_' && *c != '-').collect();
    let key = key.to_ascii_lowercase();
    ["alignment", "fieldofview", "anchor", "overlay", "neckstrain", "armexertion"]
        .iter()
        .position(|k| *k == key)
}

impl Serialize for ObjectiveKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut params = Map::new();
        match *self {
            ObjectiveKind::Alignment {
                x_tolerance,
                y_tolerance,
            } => {
                params.insert("x_tolerance".into(), x_tolerance.into());
                params.insert("y_tolerance".into(), y_tolerance.into());
            }
            ObjectiveKind::FieldOfView { foveal_degrees } => {
                params.insert("foveal_degrees".into(), foveal_degrees.into());
            }
            _ => {}
        }
        let mut doc = Map::new();
        doc.insert("kind".into(), self.name().into());
        doc.insert("params".into(), Value::Object(params));
        Value::Object(doc).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObjectiveKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            kind: String,
            #[serde(default)]
            params: Map<String, Value>,
        }
        let raw = Raw::deserialize(d)?;
        let rank = kind_from_name(&raw.kind)
            .ok_or_else(|| D::Error::custom(format!("unknown objective kind '{}'", raw.kind)))?;
        let mut params = raw.params;
        let mut take = |key: &str, default: f64| -> Result<f64, D::Error> {
            match params.remove(key) {
                None | Some(Value::Null) => Ok(default),
                Some(v) => v
                    .as_f64()
                    .ok_or_else(|| D::Error::custom(format!("parameter '{key}' must be a number"))),
            }
        };
        let kind = match rank {
            0 => ObjectiveKind::Alignment {
                x_tolerance: take("x_tolerance", ALIGNMENT_TOLERANCE)?,
                y_tolerance: take("y_tolerance", ALIGNMENT_TOLERANCE)?,
            },
            1 => ObjectiveKind::FieldOfView {
                foveal_degrees: take("foveal_degrees", FOVEAL_DEGREES)?,
            },
            2 => ObjectiveKind::Anchor,
            3 => ObjectiveKind::Overlay,
            4 => ObjectiveKind::NeckStrain,
            _ => ObjectiveKind::ArmExertion,
        };
        if let Some(extra) = params.keys().next() {
            return Err(D::Error::custom(format!(
                "unknown parameter '{extra}' for objective '{}'",
                kind.name()
            )));
        }
        Ok(kind)
    }
}

/// Parses a spec document, filling defaults. Errors carry the JSON path.
pub fn parse_spec(document: &str) -> Result<OptimizationSpec, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: SpecDocument =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    OptimizationSpec::try_from(doc)
}

/// Checks a parsed spec against a scene. An empty result means the spec can
/// be compiled.
pub fn validate_spec(spec: &OptimizationSpec, scene: &Scene) -> Vec<SpecViolation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(SpecViolation { path, message });

    for (name, p) in &spec.widgets {
        let path = format!("widgets.{name}");
        if scene.widget(name).is_none() {
            push(path.clone(), format!("widget '{name}' is not in the scene catalog"));
        }
        if let Some(anchor) = &p.anchor {
            if scene.object(anchor).is_none() {
                push(format!("{path}.anchor"), format!("unknown object '{anchor}'"));
            } else if spec.suitability(anchor) < MIN_ANCHOR_SUITABILITY {
                push(
                    format!("{path}.anchor"),
                    format!("object '{anchor}' is protected and cannot serve as an anchor"),
                );
            }
        }
        if let Some(pin) = p.pinned_position {
            if !p.enabled {
                push(format!("{path}.pinned"), "disabled widgets cannot be pinned".into());
            } else if !scene.search_bounds.contains(pin) {
                push(format!("{path}.pinned"), format!("{pin} lies outside the search bounds"));
            }
        }
    }
    for name in spec.objects.keys() {
        if scene.object(name).is_none() {
            push(format!("objects.{name}"), format!("unknown object '{name}'"));
        }
    }

    let mut anchored: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (name, p) in &spec.widgets {
        if let Some(a) = &p.anchor {
            anchored.entry(a.as_str()).or_default().push(name);
        }
    }
    for (object, widgets) in &anchored {
        if widgets.len() > 1 {
            push(
                format!("objects.{object}"),
                format!("anchors more than one widget: {}", widgets.join(", ")),
            );
        }
    }

    if spec.enabled_widgets().next().is_none() {
        push("widgets".into(), "at least one widget must be enabled".into());
    }
    if spec.active_objectives.len() < 2 {
        push("objectives".into(), "at least two objectives must be active".into());
    }
    let mut seen = BTreeSet::new();
    for (i, k) in spec.active_objectives.iter().enumerate() {
        if !seen.insert(k.rank()) {
            push(format!("objectives[{i}]"), format!("duplicate objective '{}'", k.name()));
        }
    }
    let any_anchor = spec.enabled_widgets().any(|(_, p)| p.anchor.is_some());
    if any_anchor && !spec.active_objectives.contains(&ObjectiveKind::Anchor) {
        push("objectives".into(), "anchored widgets require the anchor objective".into());
    }
    out
}

/// Pins `name` at `position`; later compiles keep it there.
pub fn pin_widget(
    spec: &OptimizationSpec,
    scene: &Scene,
    name: &str,
    position: Vec3,
) -> Result<OptimizationSpec, ConfigError> {
    let params = spec
        .widgets
        .get(name)
        .ok_or_else(|| ConfigError::UnknownWidget(name.to_owned()))?;
    if !params.enabled {
        return Err(ConfigError::DisabledWidget(name.to_owned()));
    }
    if !position.is_finite() || !scene.search_bounds.contains(position) {
        return Err(ConfigError::OutOfBounds(name.to_owned(), position));
    }
    let mut out = spec.clone();
    out.widgets.get_mut(name).expect("checked above").pinned_position = Some(position);
    Ok(out)
}

/// A spec bound to a scene. Genome slots hold the unpinned enabled widgets
/// in name order, three coordinates each.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    scene: Scene,
    spec: OptimizationSpec,
    widgets: BTreeMap<String, WidgetParams>,
    slots: Vec<String>,
    pinned: BTreeMap<String, Vec3>,
    voxels: BTreeMap<String, VoxelGrid>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

pub fn compile_problem(spec: &OptimizationSpec, scene: &Scene) -> Result<ProblemInstance, ConfigError> {
    if let Some((name, _)) = spec.widgets.iter().find(|(_, p)| !p.enabled && p.anchor.is_some()) {
        return Err(ConfigError::DisabledAnchor(name.clone()));
    }
    if spec.enabled_widgets().next().is_none() {
        return Err(ConfigError::NoEnabledWidgets);
    }
    let violations = validate_spec(spec, scene);
    if !violations.is_empty() {
        return Err(ConfigError::Violations(violations));
    }
    let widgets: BTreeMap<String, WidgetParams> = spec
        .enabled_widgets()
        .map(|(n, p)| (n.to_owned(), p.clone()))
        .collect();
    let mut slots = Vec::new();
    let mut pinned = BTreeMap::new();
    for (name, p) in &widgets {
        match p.pinned_position {
            Some(pos) => {
                pinned.insert(name.clone(), pos);
            }
            None => slots.push(name.clone()),
        }
    }
    let (lo, hi) = (scene.search_bounds.min.to_array(), scene.search_bounds.max.to_array());
    let lower = slots.iter().flat_map(|_| lo).collect();
    let upper = slots.iter().flat_map(|_| hi).collect();
    Ok(ProblemInstance {
        scene: scene.clone(),
        spec: spec.clone(),
        widgets,
        slots,
        pinned,
        voxels: scene.voxelize_all(),
        lower,
        upper,
    })
}

impl ProblemInstance {
    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn spec(&self) -> &OptimizationSpec {
        &self.spec
    }

    /// Widget names in genome order.
    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn context(&self) -> EvalContext<'_> {
        EvalContext {
            scene: &self.scene,
            widgets: &self.widgets,
            objects: &self.spec.objects,
            voxels: &self.voxels,
            distance_threshold: self.spec.distance_threshold,
        }
    }

    /// Builds the full layout: decoded slots plus pinned widgets.
    pub fn decode(&self, genome: &[f64]) -> Layout {
        let mut positions = self.pinned.clone();
        for (name, xyz) in self.slots.iter().zip(genome.chunks_exact(3)) {
            positions.insert(name.clone(), Vec3::new(xyz[0], xyz[1], xyz[2]));
        }
        Layout { positions }
    }

    /// Inverse of [`decode`](Self::decode) for the unpinned widgets.
    pub fn encode(&self, layout: &Layout) -> Option<Vec<f64>> {
        self.slots
            .iter()
            .map(|n| layout.get(n).map(|p| p.to_array()))
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat())
    }

    pub fn evaluate_layout(
        &self,
        layout: &Layout,
    ) -> Result<(ObjectiveVector, ConstraintVector), EvalError> {
        self.context().evaluate(layout, &self.spec.active_objectives)
    }
}

impl Problem for ProblemInstance {
    fn n_obj(&self) -> usize {
        self.spec.active_objectives.len()
    }

    fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn evaluate(&self, genome: &[f64]) -> Result<Evaluation, String> {
        let (obj, cons) = self
            .evaluate_layout(&self.decode(genome))
            .map_err(|e| e.to_string())?;
        Ok(Evaluation {
            objectives: obj.values,
            violations: cons.to_vec(),
        })
    }
}

/// Packaged example specs.
pub mod packaged {
    pub const OFFICE: &str = include_str!("../assets/specs/office.json");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{load_scene, packaged as scenes};
    use proptest::prelude::*;

    fn office() -> Scene {
        load_scene(scenes::OFFICE).unwrap()
    }

    const MINIMAL: &str = r#"{
        "widgets": [{"name": "Email"}],
        "objectives": [{"kind": "FieldOfView"}, {"kind": "neck_strain"}]
    }"#;

    #[test]
    fn minimal_document_fills_defaults() {
        let spec = parse_spec(MINIMAL).unwrap();
        assert_eq!(spec.candidate_count, 4);
        assert_eq!(spec.distance_threshold, 0.65);
        assert_eq!(spec.seed, 42);
        assert_eq!(
            spec.active_objectives,
            vec![ObjectiveKind::FieldOfView { foveal_degrees: 5.0 }, ObjectiveKind::NeckStrain]
        );
        let w = &spec.widgets["Email"];
        assert!(w.enabled);
        assert!(validate_spec(&spec, &office()).is_empty());
        // objects left out of the document default to full suitability
        assert_eq!(spec.suitability("monitor"), 1.0);
    }

    #[test]
    fn omitted_suitability_defaults_to_one() {
        let doc = r#"{"widgets":[{"name":"Email"}],"objects":[{"name":"desk"},{"name":"mug"}],
            "objectives":[{"kind":"anchor"},{"kind":"overlay"}]}"#;
        let spec = parse_spec(doc).unwrap();
        assert!(spec.objects.values().all(|o| o.overlay_suitability == 1.0));
    }

    #[test]
    fn parse_errors_carry_paths() {
        let bad = r#"{"widgets":[{"name":"Email","enabled":"yes"}],"objectives":[]}"#;
        match parse_spec(bad) {
            Err(ConfigError::Parse { path, .. }) => assert_eq!(path, "widgets[0].enabled"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"widgets":[{"name":"Email","interaction_probability":1.5}],"objectives":[]}"#;
        match parse_spec(bad) {
            Err(ConfigError::Invalid { path, .. }) => {
                assert_eq!(path, "widgets[0].interaction_probability")
            }
            other => panic!("{other:?}"),
        }
        let bad = r#"{"widgets":[],"objectives":[{"kind":"Bogus"}]}"#;
        assert!(matches!(parse_spec(bad), Err(ConfigError::Parse { .. })));
        let bad = r#"{"widgets":[],"objectives":[{"kind":"anchor","params":{"x":1}}]}"#;
        assert!(matches!(parse_spec(bad), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn two_widgets_on_one_object_is_a_violation() {
        let doc = r#"{"widgets":[{"name":"Email","anchor":"desk"},{"name":"Music","anchor":"desk"}],
            "objectives":[{"kind":"anchor"},{"kind":"field_of_view"}]}"#;
        let spec = parse_spec(doc).unwrap();
        let v = validate_spec(&spec, &office());
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("more than one"));
    }

    #[test]
    fn protected_and_unknown_anchors() {
        let doc = r#"{"widgets":[{"name":"Email","anchor":"monitor"}],
            "objects":[{"name":"monitor","overlay_suitability":0}],
            "objectives":[{"kind":"anchor"},{"kind":"overlay"}]}"#;
        assert_eq!(validate_spec(&parse_spec(doc).unwrap(), &office()).len(), 1);
        let doc = r#"{"widgets":[{"name":"Email","anchor":"fridge"}],
            "objectives":[{"kind":"anchor"},{"kind":"overlay"}]}"#;
        assert_eq!(validate_spec(&parse_spec(doc).unwrap(), &office()).len(), 1);
    }

    #[test]
    fn packaged_office_spec_is_valid() {
        let spec = parse_spec(packaged::OFFICE).unwrap();
        assert!(validate_spec(&spec, &office()).is_empty());
    }

    fn three_enabled() -> OptimizationSpec {
        parse_spec(
            r#"{"widgets":[{"name":"Email"},{"name":"Calendar"},{"name":"Music"},
                {"name":"Weather","enabled":false}],
            "objectives":[{"kind":"field_of_view"},{"kind":"neck_strain"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn genome_follows_enabled_unpinned_widgets() {
        let scene = office();
        let spec = three_enabled();
        let p = compile_problem(&spec, &scene).unwrap();
        assert_eq!(p.n_var(), 9);
        assert_eq!(p.slots(), ["Calendar", "Email", "Music"]);

        let pin = Vec3::new(0.1, 1.0, -0.4);
        let pinned = pin_widget(&spec, &scene, "Email", pin).unwrap();
        let p = compile_problem(&pinned, &scene).unwrap();
        assert_eq!(p.n_var(), 6);
        let layout = p.decode(&[0.0, 1.0, -0.5, 0.2, 1.1, -0.5]);
        assert_eq!(layout.get("Email"), Some(pin));
        assert_eq!(layout.len(), 3);
        assert!(layout.get("Weather").is_none());
    }

    #[test]
    fn pin_errors() {
        let scene = office();
        let spec = three_enabled();
        assert!(matches!(
            pin_widget(&spec, &scene, "Email", Vec3::new(5.0, 1.0, -0.4)),
            Err(ConfigError::OutOfBounds(..))
        ));
        assert!(matches!(
            pin_widget(&spec, &scene, "Weather", Vec3::new(0.0, 1.0, -0.4)),
            Err(ConfigError::DisabledWidget(_))
        ));
        assert!(matches!(
            pin_widget(&spec, &scene, "Nope", Vec3::new(0.0, 1.0, -0.4)),
            Err(ConfigError::UnknownWidget(_))
        ));
    }

    #[test]
    fn compile_errors() {
        let scene = office();
        let doc = r#"{"widgets":[{"name":"Email"},{"name":"Music","enabled":false,"anchor":"desk"}],
            "objectives":[{"kind":"anchor"},{"kind":"field_of_view"}]}"#;
        assert_eq!(
            compile_problem(&parse_spec(doc).unwrap(), &scene).unwrap_err(),
            ConfigError::DisabledAnchor("Music".into())
        );
        let doc = r#"{"widgets":[{"name":"Email","enabled":false}],
            "objectives":[{"kind":"neck_strain"},{"kind":"field_of_view"}]}"#;
        assert_eq!(
            compile_problem(&parse_spec(doc).unwrap(), &scene).unwrap_err(),
            ConfigError::NoEnabledWidgets
        );
    }

    fn arb_spec() -> impl Strategy<Value = OptimizationSpec> {
        let names = ["Email", "Calendar", "Messenger", "Weather", "Music"];
        let widget = (
            any::<bool>(),
            0.0f64..=1.0,
            0.0f64..=1.0,
            prop::option::of(prop::sample::select(vec!["desk", "monitor", "mug"])),
            prop::option::of((-1.0f64..1.0, 0.0f64..2.0, -1.0f64..0.0)),
        );
        (
            prop::collection::vec(widget, 5),
            prop::collection::vec(0.0f64..=1.0, 3),
            prop::sample::subsequence(
                vec![
                    ObjectiveKind::Alignment { x_tolerance: 0.013, y_tolerance: 0.021 },
                    ObjectiveKind::FieldOfView { foveal_degrees: 7.5 },
                    ObjectiveKind::Anchor,
                    ObjectiveKind::Overlay,
                    ObjectiveKind::NeckStrain,
                    ObjectiveKind::ArmExertion,
                ],
                0..=6,
            ),
            1usize..8,
            any::<u64>(),
            0.1f64..2.0,
        )
            .prop_map(move |(ws, suits, objectives, k, seed, thr)| OptimizationSpec {
                widgets: names
                    .iter()
                    .zip(ws)
                    .map(|(n, (en, pi, po, a, pin))| {
                        (
                            n.to_string(),
                            WidgetParams {
                                interaction_probability: pi,
                                observation_probability: po,
                                anchor: a.map(str::to_owned),
                                enabled: en,
                                pinned_position: pin.map(|(x, y, z)| Vec3::new(x, y, z)),
                            },
                        )
                    })
                    .collect(),
                objects: ["desk", "monitor", "mug"]
                    .iter()
                    .zip(suits)
                    .map(|(n, s)| (n.to_string(), ObjectParams { overlay_suitability: s }))
                    .collect(),
                active_objectives: objectives,
                candidate_count: k,
                seed,
                distance_threshold: thr,
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(spec in arb_spec()) {
            let back = parse_spec(&spec.to_json()).unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn compile_is_deterministic_and_total_on_the_box(
            spec in arb_spec(),
            unit in prop::collection::vec(0.0f64..=1.0, 15),
        ) {
            let scene = office();
            let (Ok(a), Ok(b)) = (compile_problem(&spec, &scene), compile_problem(&spec, &scene)) else {
                return Ok(());
            };
            prop_assert_eq!(a.slots(), b.slots());
            prop_assert_eq!(a.lower_bounds(), b.lower_bounds());
            prop_assert_eq!(a.upper_bounds(), b.upper_bounds());
            let genome: Vec<f64> = (0..a.n_var())
                .map(|i| {
                    let (l, u) = (a.lower_bounds()[i], a.upper_bounds()[i]);
                    l + unit[i] * (u - l)
                })
                .collect();
            prop_assert!(a.evaluate(&genome).is_ok());
            prop_assert_eq!(a.encode(&a.decode(&genome)), Some(genome));
        }
    }
}
