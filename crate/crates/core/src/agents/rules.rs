//! Deterministic keyword-table agents.

use std::collections::{BTreeMap, BTreeSet};

use super::text::{inflects, name_phrases, Doc};
use super::{
    AgentBackend, AgentContext, AgentError, AmbiguityOutcome, CandidateLayout, Facet,
    ValidationChoice,
};
use crate::config::{
    validate_spec, OptimizationSpec, ALIGNMENT_TOLERANCE, DEFAULT_CANDIDATE_COUNT,
    DEFAULT_INTERACTION, DEFAULT_OBSERVATION, DEFAULT_SEED,
};
use crate::objectives::{
    EvalContext, ObjectParams, ObjectiveKind, WidgetParams, REACH_METERS,
};
use crate::scene::{angular_diff, PlacedWidget, Scene};

/// Suitability assigned to objects the user wants kept visible.
pub const PROTECTED_SUITABILITY: f64 = 0.05;
/// An anchored widget further than this from its anchor misses the
/// user's placement request.
pub const ANCHOR_PROXIMITY_DEGREES: f64 = 10.0;
const RAISED_PROBABILITY: f64 = 0.8;

/// Clarification questions per facet. Placeholders: `{catalog}` lists the
/// widgets, `{widget}` names the first mentioned widget, `{areas}` lists
/// the physical objects.
pub const QUESTION_TEMPLATES: [(Facet, &str); 10] = [
    (Facet::Widgets, "Which of these widgets do you want to use: {catalog}?"),
    (Facet::Widgets, "What are you working on, so I can pick the right widgets from {catalog}?"),
    (Facet::Widgets, "Should I show all widgets ({catalog}) or only some of them?"),
    (Facet::Widgets, "Which widget matters most for what you are doing right now: {catalog}?"),
    (Facet::Interaction, "How do you want to interact with {widget}: touch it or just view it?"),
    (Facet::Interaction, "Will you be typing, scrolling or tapping on {widget}, or mainly reading it?"),
    (Facet::Interaction, "Do you need {widget} within reach of your hand, or only in view?"),
    (Facet::Preference, "Any placement preferences, for example surfaces to keep visible ({areas})?"),
    (Facet::Preference, "Should {widget} sit on one of these areas: {areas}?"),
    (Facet::Preference, "Do you care more about comfort (less neck or arm strain) or about a tidy, aligned layout?"),
];

const GENERIC_WIDGETS: [&str; 12] = [
    "widget", "panel", "slider", "button", "menu", "window", "app", "application",
    "dashboard", "toolbar", "keypad", "keyboard",
];
const EVERYTHING: [&str; 2] = ["everything", "all"];
const INTERACTION_VERBS: [&str; 8] =
    ["touch", "scroll", "type", "interact", "click", "drag", "tap", "press"];
const VIEWING_VERBS: [&str; 6] = ["watch", "see", "read", "monitor", "view", "look"];
const OCCLUSION_VERBS: [&str; 6] = ["block", "obstruct", "occlude", "cover", "hide", "overlap"];
const NEGATIONS: [&str; 5] = ["not", "never", "without", "no", "avoid"];
const VISIBILITY_WORDS: [&str; 4] = ["visible", "unobstructed", "uncovered", "careful"];
const KEEP_VERBS: [&str; 2] = ["keep", "leave"];
const CLEAN_WORDS: [&str; 3] = ["clean", "clear", "free"];
const ANCHOR_VERBS: [&str; 4] = ["anchor", "attach", "stick", "pin"];
const FILLERS: [&str; 8] = ["the", "my", "a", "an", "top", "of", "this", "that"];
const ALIGN_STEMS: [&str; 4] = ["align", "organize", "organise", "tidy"];
const NECK_WORDS: [&str; 4] = ["neck", "strain", "ergonomic", "posture"];
const ARM_WORDS: [&str; 4] = ["arm", "reach", "exertion", "tired"];
const SPATIAL_WORDS: [&str; 20] = [
    "left", "right", "above", "below", "under", "beside", "next", "near", "center", "centre",
    "middle", "front", "top", "bottom", "corner", "side", "air", "level", "close", "closer",
];
const PREFERENCE_WORDS: [&str; 6] = ["comfort", "comfortable", "neat", "fatigue", "priority", "prefer"];

#[derive(Debug, Default)]
struct Analysis {
    mentions: Vec<(usize, String)>,
    generic: bool,
    everything: bool,
    objects: Vec<(usize, String)>,
    interaction: Vec<usize>,
    viewing: Vec<usize>,
    anchors: BTreeMap<String, (String, usize)>,
    protected: BTreeMap<String, usize>,
    alignment: bool,
    neck: bool,
    arm: bool,
    spatial: bool,
    preference_word: bool,
}

impl Analysis {
    fn run(scene: &Scene, text: &str) -> (Doc, Analysis) {
        let doc = Doc::parse(text);
        let mut a = Analysis::default();
        let mut object_words = BTreeSet::new();
        for o in &scene.objects {
            for phrase in name_phrases(&o.name) {
                for i in doc.find(&phrase) {
                    a.objects.push((i, o.name.clone()));
                    object_words.extend(i..i + phrase.len());
                }
            }
        }
        a.objects.sort();
        for w in &scene.widgets {
            for phrase in name_phrases(&w.name) {
                for i in doc.find(&phrase) {
                    if !object_words.contains(&i) {
                        a.mentions.push((i, w.name.clone()));
                    }
                }
            }
        }
        a.mentions.sort();
        a.mentions.dedup();
        for i in 0..doc.len() {
            let w = doc.words[i].as_str();
            if GENERIC_WIDGETS.iter().any(|g| inflects(w, g)) {
                a.generic = true;
            }
            if w == "everything"
                || (EVERYTHING.contains(&w)
                    && doc.words.get(i + 1).is_some_and(|n| {
                        GENERIC_WIDGETS.iter().any(|g| inflects(n, g)) || n == "of"
                    }))
            {
                a.everything = true;
            }
        }
        a.interaction = doc.find_verbs(&INTERACTION_VERBS);
        a.viewing = doc
            .find_verbs(&VIEWING_VERBS)
            .into_iter()
            .filter(|i| !object_words.contains(i))
            .collect();
        a.find_anchors(&doc);
        a.find_protection(&doc);
        let any = |set: &[&str]| doc.words.iter().any(|w| set.iter().any(|s| inflects(w, s)));
        a.alignment = any(&ALIGN_STEMS);
        a.neck = any(&NECK_WORDS);
        a.arm = any(&ARM_WORDS);
        a.spatial = doc.words.iter().any(|w| SPATIAL_WORDS.contains(&w.as_str()));
        a.preference_word = any(&PREFERENCE_WORDS);
        (doc, a)
    }

    fn object_at(&self, i: usize) -> Option<&str> {
        self.objects.iter().find(|(p, _)| *p == i).map(|(_, n)| n.as_str())
    }

    /// `<widget> ... on|onto <object>` and `anchor|attach ... to <object>`.
    /// The phrase binds the widgets mentioned since the previous anchor
    /// phrase in the same sentence, and only when there is exactly one.
    fn find_anchors(&mut self, doc: &Doc) {
        let mut last_phrase: Option<usize> = None;
        let mut sentence = usize::MAX;
        for i in 0..doc.len() {
            if doc.sentence[i] != sentence {
                sentence = doc.sentence[i];
                last_phrase = None;
            }
            let w = doc.words[i].as_str();
            let trigger = w == "on"
                || w == "onto"
                || (w == "to"
                    && (i.saturating_sub(5)..i)
                        .any(|k| ANCHOR_VERBS.iter().any(|v| inflects(&doc.words[k], v))));
            if !trigger {
                continue;
            }
            let mut j = i + 1;
            while doc.has_word(j, &FILLERS) && doc.sentence[j] == sentence {
                j += 1;
            }
            let Some(object) = self.object_at(j).map(str::to_owned) else {
                continue;
            };
            let start = last_phrase.map_or(0, |p| p + 1);
            let governed: BTreeSet<&str> = self
                .mentions
                .iter()
                .filter(|(p, _)| *p >= start && *p < i && doc.sentence[*p] == sentence)
                .map(|(_, n)| n.as_str())
                .collect();
            last_phrase = Some(i);
            if governed.len() != 1 {
                continue;
            }
            let widget = governed.into_iter().next().expect("one").to_owned();
            let taken = self
                .anchors
                .iter()
                .any(|(other, (o, _))| *o == object && *other != widget);
            if !taken {
                self.anchors.insert(widget, (object, i));
            }
        }
    }

    fn find_protection(&mut self, doc: &Doc) {
        let mut triggers = Vec::new();
        for i in 0..doc.len() {
            let w = doc.words[i].as_str();
            let negated_occlusion = OCCLUSION_VERBS.iter().any(|v| inflects(w, v))
                && (i.saturating_sub(3)..i).any(|k| doc.has_word(k, &NEGATIONS));
            let kept_clean = CLEAN_WORDS.contains(&w)
                && (0..i).rev().take_while(|&k| doc.segment[k] == doc.segment[i]).any(|k| doc.has_word(k, &KEEP_VERBS));
            if negated_occlusion || kept_clean || VISIBILITY_WORDS.contains(&w) {
                triggers.push(i);
            }
        }
        for t in triggers {
            for (p, object) in &self.objects {
                if doc.segment[*p] == doc.segment[t] {
                    let at = self.protected.entry(object.clone()).or_insert(t);
                    *at = (*at).max(t);
                }
            }
        }
        // the later of anchoring and protection wins for the same object
        let mut dropped = Vec::new();
        for (widget, (object, a)) in &self.anchors {
            if let Some(&p) = self.protected.get(object) {
                if p > *a {
                    dropped.push(widget.clone());
                } else {
                    self.protected.remove(object);
                }
            }
        }
        for w in dropped {
            self.anchors.remove(&w);
        }
    }

    fn widgets_named(&self) -> BTreeSet<String> {
        self.mentions.iter().map(|(_, n)| n.clone()).collect()
    }

    fn has(&self, facet: Facet) -> bool {
        match facet {
            Facet::Widgets => !self.mentions.is_empty() || self.generic || self.everything,
            Facet::Interaction => !self.interaction.is_empty() || !self.viewing.is_empty(),
            Facet::Preference => {
                !self.anchors.is_empty()
                    || !self.protected.is_empty()
                    || self.alignment
                    || self.neck
                    || self.arm
                    || self.spatial
                    || self.preference_word
            }
        }
    }
}

fn list(names: impl IntoIterator<Item = String>) -> String {
    names.into_iter().collect::<Vec<_>>().join(", ")
}

/// Offline agents driven by a fixed keyword table.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBased;

impl RuleBased {
    /// Facets missing from `text`, in facet order.
    pub fn missing_facets(scene: &Scene, text: &str) -> Vec<Facet> {
        let (_, a) = Analysis::run(scene, text);
        Facet::ALL.into_iter().filter(|f| !a.has(*f)).collect()
    }

    pub fn question(scene: &Scene, text: &str, facet: Facet, round: usize) -> String {
        let (_, a) = Analysis::run(scene, text);
        let templates: Vec<&str> = QUESTION_TEMPLATES
            .iter()
            .filter(|(f, _)| *f == facet)
            .map(|(_, t)| *t)
            .collect();
        let widget = a
            .mentions
            .first()
            .map(|(_, n)| n.clone())
            .unwrap_or_else(|| "these widgets".to_owned());
        templates[round % templates.len()]
            .replace("{catalog}", &list(scene.widgets.iter().map(|w| w.name.clone())))
            .replace("{areas}", &list(scene.objects.iter().map(|o| o.name.clone())))
            .replace("{widget}", &widget)
    }

    /// The spec implied by `text`. Missing facets fall back to defaults:
    /// every widget enabled, default probabilities, field of view plus neck
    /// strain.
    pub fn spec_for(scene: &Scene, text: &str) -> OptimizationSpec {
        let (doc, a) = Analysis::run(scene, text);
        let named = a.widgets_named();
        let enabled: BTreeSet<String> = if a.everything || named.is_empty() {
            scene.widgets.iter().map(|w| w.name.clone()).collect()
        } else {
            named
        };
        let mut widgets: BTreeMap<String, WidgetParams> = scene
            .widgets
            .iter()
            .map(|w| {
                let on = enabled.contains(&w.name);
                let params = WidgetParams {
                    interaction_probability: if on { DEFAULT_INTERACTION } else { 0.0 },
                    observation_probability: if on { DEFAULT_OBSERVATION } else { 0.0 },
                    anchor: None,
                    enabled: on,
                    pinned_position: None,
                };
                (w.name.clone(), params)
            })
            .collect();

        let targets = |i: usize| -> Vec<String> {
            let in_sentence: Vec<String> = a
                .mentions
                .iter()
                .filter(|(p, _)| doc.sentence[*p] == doc.sentence[i])
                .map(|(_, n)| n.clone())
                .filter(|n| enabled.contains(n))
                .collect();
            if in_sentence.is_empty() {
                enabled.iter().cloned().collect()
            } else {
                in_sentence
            }
        };
        for &i in &a.interaction {
            for n in targets(i) {
                widgets.get_mut(&n).expect("enabled widget").interaction_probability =
                    RAISED_PROBABILITY;
            }
        }
        for &i in &a.viewing {
            for n in targets(i) {
                widgets.get_mut(&n).expect("enabled widget").observation_probability =
                    RAISED_PROBABILITY;
            }
        }
        for (widget, (object, _)) in &a.anchors {
            if let Some(p) = widgets.get_mut(widget).filter(|p| p.enabled) {
                p.anchor = Some(object.clone());
            }
        }
        let objects: BTreeMap<String, ObjectParams> = scene
            .objects
            .iter()
            .map(|o| {
                let s = if a.protected.contains_key(&o.name) {
                    PROTECTED_SUITABILITY
                } else {
                    ObjectParams::default().overlay_suitability
                };
                (o.name.clone(), ObjectParams { overlay_suitability: s })
            })
            .collect();

        let mut active = Vec::new();
        if a.alignment {
            active.push(ObjectiveKind::Alignment {
                x_tolerance: ALIGNMENT_TOLERANCE,
                y_tolerance: ALIGNMENT_TOLERANCE,
            });
        }
        if !a.viewing.is_empty() {
            active.push(ObjectiveKind::field_of_view());
            active.push(ObjectiveKind::NeckStrain);
        }
        if widgets.values().any(|p| p.anchor.is_some()) {
            active.push(ObjectiveKind::Anchor);
        }
        if !a.protected.is_empty() {
            active.push(ObjectiveKind::Overlay);
        }
        if a.neck {
            active.push(ObjectiveKind::NeckStrain);
        }
        if !a.interaction.is_empty() || a.arm {
            active.push(ObjectiveKind::ArmExertion);
        }
        for floor in [ObjectiveKind::field_of_view(), ObjectiveKind::NeckStrain] {
            if active.len() < 2 && !active.iter().any(|k| k.same_kind(&floor)) {
                active.push(floor);
            }
        }
        active.sort_by_key(ObjectiveKind::rank);
        active.dedup_by(|x, y| x.same_kind(y));

        OptimizationSpec {
            widgets,
            objects,
            active_objectives: active,
            candidate_count: DEFAULT_CANDIDATE_COUNT,
            seed: DEFAULT_SEED,
            distance_threshold: REACH_METERS,
        }
    }

    /// Per-candidate (unmet hard preferences, mean normalized objective).
    pub fn score_candidates(
        scene: &Scene,
        spec: &OptimizationSpec,
        candidates: &[CandidateLayout],
    ) -> Vec<(usize, f64)> {
        let voxels = scene.voxelize_all();
        let ctx = EvalContext {
            scene,
            widgets: &spec.widgets,
            objects: &spec.objects,
            voxels: &voxels,
            distance_threshold: spec.distance_threshold,
        };
        let eye = scene.pose.eye_position;
        let m = candidates.iter().map(|c| c.objectives.len()).max().unwrap_or(0);
        let lo: Vec<f64> = (0..m)
            .map(|k| candidates.iter().filter_map(|c| c.objectives.get(k)).fold(f64::INFINITY, |a, &b| a.min(b)))
            .collect();
        let hi: Vec<f64> = (0..m)
            .map(|k| candidates.iter().filter_map(|c| c.objectives.get(k)).fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
            .collect();
        candidates
            .iter()
            .map(|c| {
                let mut hard = 0usize;
                for (name, p) in c.layout.iter() {
                    let Some(anchor) = spec.widgets.get(name).and_then(|w| w.anchor.as_deref()) else {
                        continue;
                    };
                    let Some(obj) = scene.object(anchor) else {
                        continue;
                    };
                    let angle = angular_diff(p, eye, obj.bounds.center() - eye).unwrap_or(180.0);
                    if angle > ANCHOR_PROXIMITY_DEGREES {
                        hard += 1;
                    }
                }
                let rects: Vec<PlacedWidget> = c
                    .layout
                    .iter()
                    .filter_map(|(n, p)| PlacedWidget::new(p, eye, scene.widget(n)?).ok())
                    .collect();
                for o in &scene.objects {
                    if spec.suitability(&o.name) > PROTECTED_SUITABILITY {
                        continue;
                    }
                    if rects.iter().any(|r| ctx.occluded_fraction(&o.name, r) > 0.0) {
                        hard += 1;
                    }
                }
                let soft = if m == 0 {
                    0.0
                } else {
                    (0..m)
                        .map(|k| {
                            let v = c.objectives.get(k).copied().unwrap_or(hi[k]);
                            let span = hi[k] - lo[k];
                            if span > 0.0 {
                                (v - lo[k]) / span
                            } else {
                                0.0
                            }
                        })
                        .sum::<f64>()
                        / m as f64
                };
                (hard, soft)
            })
            .collect()
    }
}

impl AgentBackend for RuleBased {
    fn name(&self) -> &'static str {
        "stub"
    }

    fn detect_ambiguity(&self, ctx: &AgentContext<'_>) -> Result<AmbiguityOutcome, AgentError> {
        let text = ctx.combined();
        match Self::missing_facets(ctx.scene, &text).first() {
            None => Ok(AmbiguityOutcome::Clear { instruction: text }),
            Some(&facet) => Ok(AmbiguityOutcome::Ambiguous {
                question: Self::question(ctx.scene, &text, facet, ctx.round),
                facet,
            }),
        }
    }

    fn configure(&self, ctx: &AgentContext<'_>) -> Result<OptimizationSpec, AgentError> {
        let spec = Self::spec_for(ctx.scene, &ctx.combined());
        let violations = validate_spec(&spec, ctx.scene);
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(AgentError::InvalidSpec(violations))
        }
    }

    fn validate_candidates(
        &self,
        ctx: &AgentContext<'_>,
        spec: &OptimizationSpec,
        candidates: &[CandidateLayout],
    ) -> Result<ValidationChoice, AgentError> {
        if candidates.is_empty() {
            return Err(AgentError::NoCandidates);
        }
        let scores = Self::score_candidates(ctx.scene, spec, candidates);
        let (index, (hard, soft)) = scores
            .iter()
            .copied()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(i.cmp(j)))
            .expect("nonempty");
        Ok(ValidationChoice {
            index,
            rationale: format!(
                "candidate {index}: {hard} unmet placement preference(s), mean normalized objective {soft:.3}"
            ),
        })
    }
}
