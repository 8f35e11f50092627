//! Session orchestration: clarification loop, configuration, optimization,
//! validation, selection and manual adjustment.
//!
//! Every mutating call works on a copy of the session and only commits it
//! when the whole step succeeds, so a failing agent or solver leaves the
//! session exactly as it was.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    aggregate, AgentBackend, AgentContext, AgentError, AmbiguityOutcome, CandidateLayout, Facet,
    MAX_CLARIFICATION_ROUNDS,
};
use crate::config::{compile_problem, pin_widget, ConfigError, OptimizationSpec, DEFAULT_SEED};
use crate::moo::{
    aasf_select, nsga3_run, MooError, Problem, RefDirMethod, SolverParams, AASF_RHO,
};
use crate::objectives::ConstraintVector;
use crate::scene::{packaged, load_scene, Layout, Scene, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("unknown scene '{0}'")]
    UnknownScene(String),
    #[error("operation not allowed in phase {actual}")]
    Phase { actual: Phase },
    #[error("instruction text is empty")]
    EmptyInstruction,
    #[error("no instructions recorded yet")]
    NoHistory,
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] MooError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingInstruction,
    Clarifying,
    /// Transient: a spec exists and the solver is running.
    Configured,
    Optimized,
    Finalized,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::AwaitingInstruction => "awaiting_instruction",
            Phase::Clarifying => "clarifying",
            Phase::Configured => "configured",
            Phase::Optimized => "optimized",
            Phase::Finalized => "finalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    pub facet: Facet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub widget: String,
    pub from: Vec3,
    pub to: Vec3,
    pub distance: f64,
}

/// Transcript entries. They carry no ids or clock readings, so identical
/// inputs produce identical transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Instruction { text: String },
    Answer { text: String },
    Question { text: String, facet: Facet, round: usize },
    DefaultsApplied { missing: Facet },
    Spec { spec: OptimizationSpec },
    Candidates {
        candidates: Vec<CandidateLayout>,
        recommended: usize,
        rationale: String,
    },
    Selection { index: usize, automatic: bool },
    Adjustment(Adjustment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub module: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub scene_id: String,
    pub phase: Phase,
    pub history: Vec<String>,
    /// Consecutive ambiguous rounds in the current clarification episode.
    pub clarification_rounds: usize,
    /// Set once a round proceeded with defaults after too many questions.
    pub defaults_applied: bool,
    pub pending_question: Option<Question>,
    pub spec: Option<OptimizationSpec>,
    pub candidates: Vec<CandidateLayout>,
    pub recommended: Option<usize>,
    pub rationale: Option<String>,
    pub selected: Option<usize>,
    pub final_layout: Option<Layout>,
    /// Positions fixed by manual adjustment; held in every later round.
    pub pins: BTreeMap<String, Vec3>,
    pub adjustments: Vec<Adjustment>,
    pub events: Vec<Event>,
    #[serde(default)]
    pub timings: Vec<PhaseTiming>,
}

impl Session {
    pub fn metrics(&self) -> Metrics {
        Metrics::from_adjustments(&self.adjustments)
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            scene_id: self.scene_id.clone(),
            defaults_applied: self.defaults_applied,
            events: self.events.clone(),
            metrics: self.metrics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub scene_id: String,
    pub defaults_applied: bool,
    pub events: Vec<Event>,
    pub metrics: Metrics,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub number_of_adjustments: usize,
    /// Summed length of every move.
    pub adjustment_distance: f64,
    /// Summed straight-line distance from each moved widget's first
    /// position to its last.
    pub net_displacement: f64,
}

impl Metrics {
    pub fn from_adjustments(adjustments: &[Adjustment]) -> Self {
        let mut span: BTreeMap<&str, (Vec3, Vec3)> = BTreeMap::new();
        for a in adjustments {
            span.entry(&a.widget).or_insert((a.from, a.to)).1 = a.to;
        }
        Metrics {
            number_of_adjustments: adjustments.len(),
            adjustment_distance: adjustments.iter().map(|a| a.distance).sum(),
            net_displacement: span.values().map(|(a, b)| a.distance(*b)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Question(Question),
    Candidates { count: usize, recommended: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    Index(usize),
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub seed: u64,
    pub population: usize,
    pub generations: usize,
    /// Overrides the configured spec's candidate count when set.
    pub candidate_count: Option<usize>,
    pub refdirs: RefDirMethod,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        let solver = SolverParams::default();
        Self {
            seed: DEFAULT_SEED,
            population: solver.population,
            generations: solver.generations,
            candidate_count: None,
            refdirs: RefDirMethod::default(),
        }
    }
}

pub struct Pipeline {
    scenes: BTreeMap<String, Scene>,
    agents: Box<dyn AgentBackend>,
    settings: PipelineSettings,
}

impl Pipeline {
    pub fn new(scenes: Vec<Scene>, agents: Box<dyn AgentBackend>, settings: PipelineSettings) -> Self {
        Self {
            scenes: scenes.into_iter().map(|s| (s.id.clone(), s)).collect(),
            agents,
            settings,
        }
    }

    /// A pipeline over the scenes bundled with the crate.
    pub fn with_packaged_scenes(agents: Box<dyn AgentBackend>, settings: PipelineSettings) -> Self {
        let scenes = packaged::all()
            .iter()
            .map(|(_, doc)| load_scene(doc).expect("packaged scene is valid"))
            .collect();
        Self::new(scenes, agents, settings)
    }

    pub fn scenes(&self) -> impl Iterator<Item = &Scene> {
        self.scenes.values()
    }

    pub fn scene(&self, id: &str) -> Result<&Scene, PipelineError> {
        self.scenes
            .get(id)
            .ok_or_else(|| PipelineError::UnknownScene(id.to_owned()))
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.settings
    }

    pub fn agents(&self) -> &dyn AgentBackend {
        self.agents.as_ref()
    }

    pub fn create_session(&self, scene_id: &str) -> Result<Session, PipelineError> {
        self.scene(scene_id)?;
        Ok(Session {
            id: uuid::Uuid::new_v4().to_string(),
            scene_id: scene_id.to_owned(),
            phase: Phase::AwaitingInstruction,
            history: Vec::new(),
            clarification_rounds: 0,
            defaults_applied: false,
            pending_question: None,
            spec: None,
            candidates: Vec::new(),
            recommended: None,
            rationale: None,
            selected: None,
            final_layout: None,
            pins: BTreeMap::new(),
            adjustments: Vec::new(),
            events: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn aggregate_instructions(&self, session: &Session) -> Result<String, PipelineError> {
        if session.history.is_empty() {
            return Err(PipelineError::NoHistory);
        }
        Ok(aggregate(&session.history))
    }

    pub fn submit_instruction(&self, session: &mut Session, text: &str) -> Result<Outcome, PipelineError> {
        match session.phase {
            Phase::AwaitingInstruction | Phase::Clarifying | Phase::Finalized => {}
            actual => return Err(PipelineError::Phase { actual }),
        }
        self.commit(session, text, |t| Event::Instruction { text: t })
    }

    pub fn submit_answer(&self, session: &mut Session, text: &str) -> Result<Outcome, PipelineError> {
        if session.phase != Phase::Clarifying {
            return Err(PipelineError::Phase {
                actual: session.phase,
            });
        }
        self.commit(session, text, |t| Event::Answer { text: t })
    }

    fn commit(
        &self,
        session: &mut Session,
        text: &str,
        event: impl FnOnce(String) -> Event,
    ) -> Result<Outcome, PipelineError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(PipelineError::EmptyInstruction);
        }
        let mut next = session.clone();
        if next.phase == Phase::Finalized {
            next.clarification_rounds = 0;
        }
        next.history.push(text.to_owned());
        next.events.push(event(text.to_owned()));
        next.timings.clear();
        let outcome = self.evaluate(&mut next)?;
        *session = next;
        Ok(outcome)
    }

    fn evaluate(&self, s: &mut Session) -> Result<Outcome, PipelineError> {
        let scene = self.scene(&s.scene_id)?;
        let history = s.history.clone();
        let ctx = AgentContext {
            scene,
            history: &history,
            round: s.clarification_rounds,
        };

        let t = Instant::now();
        let outcome = self.agents.detect_ambiguity(&ctx)?;
        s.timings.push(timing("ambiguity_detection", t));
        if let AmbiguityOutcome::Ambiguous { question, facet } = outcome {
            if s.clarification_rounds < MAX_CLARIFICATION_ROUNDS {
                s.clarification_rounds += 1;
                let q = Question {
                    text: question,
                    facet,
                };
                s.events.push(Event::Question {
                    text: q.text.clone(),
                    facet,
                    round: s.clarification_rounds,
                });
                s.pending_question = Some(q.clone());
                s.phase = Phase::Clarifying;
                return Ok(Outcome::Question(q));
            }
            s.defaults_applied = true;
            s.events.push(Event::DefaultsApplied { missing: facet });
        }

        let t = Instant::now();
        let mut spec = self.agents.configure(&ctx)?;
        spec.seed = self.settings.seed;
        if let Some(k) = self.settings.candidate_count {
            spec.candidate_count = k;
        }
        for (name, pos) in &s.pins {
            if let Some(w) = spec.widgets.get_mut(name) {
                w.enabled = true;
            }
            spec = pin_widget(&spec, scene, name, *pos)?;
        }
        s.timings.push(timing("configuration", t));
        s.phase = Phase::Configured;
        s.events.push(Event::Spec { spec: spec.clone() });

        let t = Instant::now();
        let problem = compile_problem(&spec, scene)?;
        let params = SolverParams {
            population: self.settings.population,
            generations: self.settings.generations,
            seed: spec.seed,
            ..SolverParams::default()
        };
        let dirs = self
            .settings
            .refdirs
            .generate(problem.n_obj(), params.population, spec.seed)?;
        let front = nsga3_run(&problem, &params, &dirs)?;
        let chosen = aasf_select(&front.individuals, spec.candidate_count, AASF_RHO, spec.seed)?;
        let candidates: Vec<CandidateLayout> = chosen
            .members
            .iter()
            .map(|c| {
                let v = &c.individual.violations;
                CandidateLayout {
                    layout: problem.decode(&c.individual.genome),
                    objectives: c.individual.objectives.clone(),
                    constraints: ConstraintVector {
                        occlusion: v[0],
                        fov: v[1],
                        distance: v[2],
                    },
                }
            })
            .collect();
        s.timings.push(timing("optimization", t));

        let t = Instant::now();
        let choice = self.agents.validate_candidates(&ctx, &spec, &candidates)?;
        s.timings.push(timing("validation", t));

        s.events.push(Event::Candidates {
            candidates: candidates.clone(),
            recommended: choice.index,
            rationale: choice.rationale.clone(),
        });
        let count = candidates.len();
        s.spec = Some(spec);
        s.candidates = candidates;
        s.recommended = Some(choice.index);
        s.rationale = Some(choice.rationale);
        s.selected = None;
        s.final_layout = None;
        s.pending_question = None;
        s.clarification_rounds = 0;
        s.phase = Phase::Optimized;
        Ok(Outcome::Candidates {
            count,
            recommended: choice.index,
        })
    }

    pub fn finalize(&self, session: &mut Session, choice: Choice) -> Result<Layout, PipelineError> {
        if session.phase != Phase::Optimized {
            return Err(PipelineError::Phase {
                actual: session.phase,
            });
        }
        let (index, automatic) = match choice {
            Choice::Index(i) => (i, false),
            Choice::Auto => (session.recommended.unwrap_or(0), true),
        };
        let layout = session
            .candidates
            .get(index)
            .ok_or_else(|| {
                PipelineError::Domain(format!(
                    "candidate index {index} is out of range for {} candidates",
                    session.candidates.len()
                ))
            })?
            .layout
            .clone();
        session.selected = Some(index);
        session.final_layout = Some(layout.clone());
        session.phase = Phase::Finalized;
        session.events.push(Event::Selection { index, automatic });
        Ok(layout)
    }

    /// Moves a widget of the final layout and pins it there for later rounds.
    pub fn record_adjustment(
        &self,
        session: &mut Session,
        widget: &str,
        position: Vec3,
    ) -> Result<Metrics, PipelineError> {
        if session.phase != Phase::Finalized {
            return Err(PipelineError::Phase {
                actual: session.phase,
            });
        }
        let scene = self.scene(&session.scene_id)?;
        let layout = session.final_layout.as_mut().expect("finalized session has a layout");
        let from = layout
            .get(widget)
            .ok_or_else(|| PipelineError::Domain(format!("widget '{widget}' is not in the final layout")))?;
        if !position.is_finite() || !scene.search_bounds.contains(position) {
            return Err(PipelineError::Domain(format!(
                "position {position} lies outside the search bounds"
            )));
        }
        let distance = from.distance(position);
        if distance == 0.0 {
            return Err(PipelineError::Domain("adjustment does not move the widget".into()));
        }
        layout.positions.insert(widget.to_owned(), position);
        session.pins.insert(widget.to_owned(), position);
        let adj = Adjustment {
            widget: widget.to_owned(),
            from,
            to: position,
            distance,
        };
        session.adjustments.push(adj.clone());
        session.events.push(Event::Adjustment(adj));
        Ok(session.metrics())
    }
}

fn timing(module: &str, since: Instant) -> PhaseTiming {
    PhaseTiming {
        module: module.to_owned(),
        seconds: since.elapsed().as_secs_f64(),
    }
}

/// Reads a scripted session: one entry per non-empty line; `#` starts a
/// comment line.
pub fn parse_script(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Packaged scripted sessions.
pub mod scripts {
    pub const OFFICE: &str = include_str!("../assets/scripts/office_session.txt");
}

/// Feeds `lines` through a session: the first line and any line arriving
/// outside clarification are instructions, the rest are answers.
pub fn replay(pipeline: &Pipeline, session: &mut Session, lines: &[String]) -> Result<(), PipelineError> {
    for line in lines {
        if session.phase == Phase::Clarifying {
            pipeline.submit_answer(session, line)?;
        } else {
            pipeline.submit_instruction(session, line)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RuleBased;

    fn quick() -> Pipeline {
        Pipeline::with_packaged_scenes(
            Box::new(RuleBased),
            PipelineSettings { population: 20, generations: 5, ..PipelineSettings::default() },
        )
    }

    fn finalized(p: &Pipeline) -> Session {
        let mut s = p.create_session("office").unwrap();
        p.submit_instruction(&mut s, "Put the email on the monitor so I can type replies.").unwrap();
        p.finalize(&mut s, Choice::Auto).unwrap();
        s
    }

    #[test]
    fn sessions_are_independent() {
        let p = quick();
        let a = p.create_session("office").unwrap();
        let b = p.create_session("office").unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a.metrics(), Metrics::default());
        assert!(matches!(p.create_session("kitchen"), Err(PipelineError::UnknownScene(_))));
    }

    #[test]
    fn ambiguous_then_clear() {
        let p = quick();
        let mut s = p.create_session("office").unwrap();
        let out = p.submit_instruction(&mut s, "Make it better.").unwrap();
        assert!(matches!(out, Outcome::Question(_)));
        assert_eq!(s.phase, Phase::Clarifying);
        let out = p
            .submit_answer(&mut s, "I want to read the calendar at eye level.")
            .unwrap();
        match out {
            Outcome::Candidates { count, recommended } => {
                assert!(count >= 1);
                assert!(recommended < count);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.phase, Phase::Optimized);
        assert!(p.submit_answer(&mut s, "more").is_err());
    }

    #[test]
    fn clarification_cap() {
        let p = quick();
        let mut s = p.create_session("office").unwrap();
        p.submit_instruction(&mut s, "Make it better.").unwrap();
        for _ in 0..4 {
            assert!(matches!(p.submit_answer(&mut s, "Hmm.").unwrap(), Outcome::Question(_)));
        }
        assert_eq!(s.clarification_rounds, 5);
        assert!(!s.defaults_applied);
        let out = p.submit_answer(&mut s, "Hmm.").unwrap();
        assert!(matches!(out, Outcome::Candidates { .. }));
        assert!(s.defaults_applied);
        assert!(s.spec.as_ref().unwrap().widgets.values().all(|w| w.enabled));
    }

    #[test]
    fn phase_gates() {
        let p = quick();
        let mut s = p.create_session("office").unwrap();
        assert!(matches!(p.finalize(&mut s, Choice::Auto), Err(PipelineError::Phase { .. })));
        assert!(p.record_adjustment(&mut s, "Email", Vec3::ZERO).is_err());
        assert!(p.submit_answer(&mut s, "x").is_err());
        assert_eq!(p.submit_instruction(&mut s, "  "), Err(PipelineError::EmptyInstruction));
        assert!(matches!(p.aggregate_instructions(&s), Err(PipelineError::NoHistory)));
    }

    #[test]
    fn metrics_and_pins() {
        let p = quick();
        let mut s = finalized(&p);
        let start = s.final_layout.as_ref().unwrap().get("Email").unwrap();
        let m = p.record_adjustment(&mut s, "Email", start + Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert_eq!(m.number_of_adjustments, 1);
        assert!((m.adjustment_distance - 0.1).abs() < 1e-12);
        assert!(p.record_adjustment(&mut s, "Nope", start).is_err());
        assert!(p
            .record_adjustment(&mut s, "Email", start + Vec3::new(0.1, 0.0, 0.0))
            .is_err());
        assert_eq!(s.metrics().number_of_adjustments, 1);
        assert_eq!(s.pins.len(), 1);
    }

    #[test]
    fn out_of_range_selection() {
        let p = quick();
        let mut s = p.create_session("office").unwrap();
        p.submit_instruction(&mut s, "Put the email on the monitor so I can type replies.").unwrap();
        assert!(matches!(p.finalize(&mut s, Choice::Index(99)), Err(PipelineError::Domain(_))));
        assert_eq!(s.phase, Phase::Optimized);
    }

    #[test]
    fn script_parsing() {
        let lines = parse_script("# header\nfirst\n\n  second  \n");
        assert_eq!(lines, ["first", "second"]);
        assert_eq!(parse_script(scripts::OFFICE).len(), 3);
    }
}
