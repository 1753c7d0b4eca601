//! Observe → reason → execute loop.
//!
//! Each step snapshots the foreground page, assembles context, asks the
//! [`Planner`] for a [`Decision`] and executes it. The loop ends when the
//! planner answers or declares the task done, or after `max_steps`.

mod extract;
mod followup;
mod planner;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{parse_number, scroll_extract, summarize, ExtractionSchema, Record, SessionArtifact, EMPTY_FIELD};
pub use followup::{ordinal, resolve_followup};
pub use planner::{FastEntry, PageAction, PageRule, RulePlanner, RulePlannerConfig};

use crate::device::{Device, DeviceError, Direction, Gesture, IntentMsg, Observation};
use crate::grounding::{hybrid_ground, GroundingError, TargetSpec, DEFAULT_TAU};
use crate::memory::{
    inject_context, memory_query, stage, update_working, ContextBlock, MemoryError, MemoryFile, UserProfile,
    WorkingEvent, WorkingMemory, WorkingMemoryStore, DEFAULT_CONTEXT_K,
};
use crate::models::Models;
use crate::perception::StructuredIntent;
use crate::replay::{PageSignature, SkillCard, SkillRegistry};
use crate::text::token_set;

pub const DEFAULT_MAX_STEPS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("foreground page has no scrollable list")]
    NotScrollable,
    #[error("artifact has no records")]
    EmptyArtifact,
    #[error("no artifact in this session")]
    NoArtifact,
    #[error("no ordinal in {0:?}")]
    NoOrdinal(String),
    #[error("rank {rank} is outside 1..={len}")]
    OrdinalOutOfRange { rank: usize, len: usize },
    #[error("planner failed: {0}")]
    PlannerFailure(String),
    #[error("unknown skill {0}")]
    UnknownSkill(String),
    #[error("model failed: {0}")]
    Model(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Gesture { gesture: Gesture },
    Launch { intent: IntentMsg },
    /// Ground at execution time; scrolls the list to find the target if
    /// it is not on screen.
    TapTarget { target: TargetSpec },
    /// Ground every target on the current screen, then tap them atomically.
    MultiTapTargets { targets: Vec<TargetSpec> },
    ScrollExtract { schema: ExtractionSchema, passes: usize },
    StageMemory { query: String, task_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Act {
        action: Action,
        rationale: String,
    },
    Respond {
        response: String,
        rationale: String,
    },
    InvokeSkill {
        skill: String,
        params: BTreeMap<String, String>,
        rationale: String,
    },
    Done {
        rationale: String,
    },
}

impl Decision {
    /// Act and invoke-skill decisions touch the device and count as steps.
    pub fn is_executed(&self) -> bool {
        matches!(self, Decision::Act { .. } | Decision::InvokeSkill { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStep {
    pub step_index: usize,
    pub observation_digest: String,
    pub decision: Decision,
    pub result: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Responded,
    Exhausted,
}

/// Everything a planner may look at.
pub struct PlanInput<'a> {
    pub intent: &'a StructuredIntent,
    pub observation: Option<&'a Observation>,
    pub context: &'a ContextBlock,
    pub skills: &'a SkillRegistry,
    pub history: &'a [AgentStep],
    pub artifacts: &'a [SessionArtifact],
    pub session_id: &'a str,
}

pub trait Planner {
    fn decide(&mut self, input: &PlanInput<'_>) -> Result<Decision, AgentError>;
}

/// Device and stores a run operates on.
pub struct AgentEnv<'a> {
    pub device: &'a mut Device,
    pub models: &'a Models,
    pub skills: &'a SkillRegistry,
    pub memory: &'a MemoryFile,
    pub profile: &'a UserProfile,
    pub tau: f64,
    pub context_k: usize,
}

impl<'a> AgentEnv<'a> {
    pub fn new(
        device: &'a mut Device,
        models: &'a Models,
        skills: &'a SkillRegistry,
        memory: &'a MemoryFile,
        profile: &'a UserProfile,
    ) -> Self {
        Self {
            device,
            models,
            skills,
            memory,
            profile,
            tau: DEFAULT_TAU,
            context_k: DEFAULT_CONTEXT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps: Vec<AgentStep>,
    pub wm: WorkingMemory,
    pub artifacts: Vec<SessionArtifact>,
    pub response: Option<String>,
}

/// Best card for the intent: same target app, every trigger token present
/// in the query, action or app name; most tokens matched, then newest.
pub fn select_skill<'a>(intent: &StructuredIntent, registry: &'a SkillRegistry) -> Option<&'a SkillCard> {
    let mut have = token_set(&intent.expanded_query);
    have.insert(intent.action_type.as_str().to_string());
    have.extend(token_set(&intent.target_app));
    registry
        .cards()
        .iter()
        .filter(|c| c.target_app == intent.target_app && !c.triggers.is_empty())
        .filter(|c| c.triggers.iter().all(|t| have.contains(t)))
        .max_by(|a, b| {
            a.triggers
                .len()
                .cmp(&b.triggers.len())
                .then(a.created_at.cmp(&b.created_at))
                .then(b.name.cmp(&a.name))
        })
}

fn compress(obs: &Observation) -> String {
    let texts = obs.visible_texts();
    let head: Vec<&str> = texts.iter().take(3).map(String::as_str).collect();
    format!("{}/{}: {}", obs.app_id, obs.activity, head.join(" | "))
}

pub fn run(
    intent: &StructuredIntent,
    planner: &mut dyn Planner,
    env: &mut AgentEnv<'_>,
    wm: WorkingMemory,
    max_steps: usize,
    on_step: &mut dyn FnMut(&AgentStep),
) -> Result<RunResult, AgentError> {
    let store = WorkingMemoryStore::new();
    let mut wm = update_working(wm, WorkingEvent::GoalSet(intent.expanded_query.clone()), &store)?;
    let mut steps: Vec<AgentStep> = Vec::new();
    let mut artifacts: Vec<SessionArtifact> = Vec::new();
    for step_index in 0..max_steps {
        let obs = env.device.snapshot().ok();
        if let Some(o) = &obs {
            wm = update_working(wm, WorkingEvent::Screenshot(o.screenshot_id.clone()), &store)?;
            wm = update_working(wm, WorkingEvent::Observation(compress(o)), &store)?;
        }
        let context = inject_context(&wm, env.profile, env.memory, env.context_k);
        let decision = planner.decide(&PlanInput {
            intent,
            observation: obs.as_ref(),
            context: &context,
            skills: env.skills,
            history: &steps,
            artifacts: &artifacts,
            session_id: &wm.session_id,
        })?;
        let result = match &decision {
            Decision::Act { action, .. } => execute(action, env, &mut artifacts),
            Decision::InvokeSkill { skill, params, .. } => invoke_skill(skill, params, env),
            Decision::Respond { response, .. } => Ok(response.clone()),
            Decision::Done { .. } => Ok("done".into()),
        };
        let result = result.unwrap_or_else(|e| format!("error: {e}"));
        if decision.is_executed() {
            wm = update_working(wm, WorkingEvent::ActionResult(result.clone()), &store)?;
        }
        if let Decision::Act {
            action: Action::ScrollExtract { .. },
            ..
        } = &decision
        {
            if let Some(a) = artifacts.last().filter(|a| !wm.artifacts.contains(&a.artifact_id)) {
                wm = update_working(wm, WorkingEvent::Artifact(a.artifact_id.clone()), &store)?;
            }
        }
        let step = AgentStep {
            step_index,
            observation_digest: obs.as_ref().map_or_else(|| "none".into(), |o| PageSignature::of(o).digest),
            decision: decision.clone(),
            result,
        };
        on_step(&step);
        steps.push(step);
        match decision {
            Decision::Respond { response, .. } => {
                wm = update_working(
                    wm,
                    WorkingEvent::Turn {
                        role: "assistant".into(),
                        text: response.clone(),
                    },
                    &store,
                )?;
                return Ok(RunResult {
                    outcome: Outcome::Responded,
                    steps,
                    wm,
                    artifacts,
                    response: Some(response),
                });
            }
            Decision::Done { .. } => {
                return Ok(RunResult {
                    outcome: Outcome::Completed,
                    steps,
                    wm,
                    artifacts,
                    response: None,
                })
            }
            _ => {}
        }
    }
    Ok(RunResult {
        outcome: Outcome::Exhausted,
        steps,
        wm,
        artifacts,
        response: None,
    })
}

fn invoke_skill(name: &str, params: &BTreeMap<String, String>, env: &mut AgentEnv<'_>) -> Result<String, AgentError> {
    let card = env.skills.get(name).ok_or_else(|| AgentError::UnknownSkill(name.into()))?;
    let intent = card.entry_with(params);
    let page = env.device.launch_intent(&intent, false)?;
    Ok(format!("skill {name} opened {}/{}", page.app_id, page.activity))
}

/// Execute one action against the device.
pub fn execute(
    action: &Action,
    env: &mut AgentEnv<'_>,
    artifacts: &mut Vec<SessionArtifact>,
) -> Result<String, AgentError> {
    match action {
        Action::Gesture { gesture } => {
            let r = env.device.apply_gesture(gesture)?;
            Ok(if r.changed { "page changed" } else { "no change" }.into())
        }
        Action::Launch { intent } => {
            let page = env.device.launch_intent(intent, false)?;
            Ok(format!("opened {}/{}", page.app_id, page.activity))
        }
        Action::TapTarget { target } => tap_target(env, target),
        Action::MultiTapTargets { targets } => {
            let obs = env.device.snapshot()?;
            let points = targets
                .iter()
                .map(|t| hybrid_ground(&obs, t, env.models.grounder.as_ref(), env.tau).map(|g| g.point))
                .collect::<Result<Vec<_>, _>>()?;
            env.device.apply_gesture(&Gesture::MultiTap { points })?;
            Ok(format!("tapped {} targets", targets.len()))
        }
        Action::ScrollExtract { schema, passes } => {
            let id = format!("artifact-{:03}", artifacts.len() + 1);
            let art = scroll_extract(env.device, *schema, *passes, env.models.extractor.as_ref(), &id)?;
            let msg = format!("extracted {} records into {id}", art.records.len());
            artifacts.push(art);
            Ok(msg)
        }
        Action::StageMemory { query, task_id } => {
            let files: Vec<String> = memory_query(query, env.memory).into_iter().map(|(f, _)| f).collect();
            let r = stage(&files, env.device, task_id)?;
            Ok(format!("staged {} files in {}", r.staged.len(), r.path))
        }
    }
}

const EXACT: f64 = 1.0 - 1e-9;

fn tap_target(env: &mut AgentEnv<'_>, target: &TargetSpec) -> Result<String, AgentError> {
    let grounder = env.models.grounder.clone();
    let tau = env.tau;
    let ground = |obs: &Observation| hybrid_ground(obs, target, grounder.as_ref(), tau);
    let obs = env.device.snapshot()?;
    let here = ground(&obs);
    let exact_here = matches!(&here, Ok(g) if g.score >= EXACT);
    let list = obs.scrollable_node().is_some();
    if !exact_here && list {
        // scan the list from the top for an exact match
        let original = obs.scroll_offset;
        let rows = obs.scrollable_node().map_or(1, |n| n.children.len().max(1));
        env.device.apply_gesture(&Gesture::Scroll {
            direction: Direction::Up,
            rows: original,
        })?;
        loop {
            let o = env.device.snapshot()?;
            if let Ok(g) = ground(&o) {
                if g.score >= EXACT {
                    env.device.apply_gesture(&Gesture::tap(g.point))?;
                    return Ok(format!("tapped {:?} after scrolling to row {}", target.query, o.scroll_offset));
                }
            }
            env.device.apply_gesture(&Gesture::Scroll {
                direction: Direction::Down,
                rows,
            })?;
            if env.device.snapshot()?.scroll_offset == o.scroll_offset {
                break;
            }
        }
        let now = env.device.snapshot()?.scroll_offset;
        env.device.apply_gesture(&if now > original {
            Gesture::Scroll {
                direction: Direction::Up,
                rows: now - original,
            }
        } else {
            Gesture::Scroll {
                direction: Direction::Down,
                rows: original - now,
            }
        })?;
    }
    let g = here?;
    env.device.apply_gesture(&Gesture::tap(g.point))?;
    Ok(format!("tapped {:?} via {:?}", target.query, g.source))
}
