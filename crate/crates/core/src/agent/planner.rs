//! Deterministic rule planner.
//!
//! Priority order: answer-only intents respond; a matching skill card is
//! invoked on the first step; compose intents stage memory first; a page
//! rule for the current screen fires; otherwise the app is entered through
//! its fast-entry URI, and if that has already happened the planner gives
//! up with a response.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{select_skill, summarize, Action, AgentError, Decision, ExtractionSchema, PlanInput, Planner};
use crate::device::{IntentMsg, Observation};
use crate::grounding::TargetSpec;
use crate::perception::ActionType;
use crate::text::escape;

/// URI template that enters `app_id` for one action category. `{slot}`
/// placeholders take intent slots; `{session}` takes the session id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FastEntry {
    pub app_id: String,
    pub action: ActionType,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PageAction {
    /// Scroll–extract once, then answer with the summary.
    Extract {
        schema: ExtractionSchema,
        #[serde(default = "default_passes")]
        passes: usize,
    },
    /// Look the visible question up in the answer table and tap the answer.
    AnswerFromTable,
    /// Select every list row, then tap `target`.
    SelectAllThenTap { target: String },
    TapText { text: String },
    Respond { text: String },
    Done,
}

fn default_passes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRule {
    pub app_id: String,
    /// Any activity of the app when absent.
    #[serde(default)]
    pub activity: Option<String>,
    pub action: PageAction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePlannerConfig {
    #[serde(default)]
    pub fast_entries: Vec<FastEntry>,
    #[serde(default)]
    pub pages: Vec<PageRule>,
    /// Visible question text → answer text to tap.
    #[serde(default)]
    pub answers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct RulePlanner {
    pub config: RulePlannerConfig,
}

impl RulePlanner {
    pub fn new(config: RulePlannerConfig) -> Self {
        Self { config }
    }

    fn page_rule(&self, obs: &Observation) -> Option<&PageRule> {
        self.config.pages.iter().find(|r| {
            r.app_id == obs.app_id && r.activity.as_ref().is_none_or(|a| *a == obs.activity)
        })
    }

    fn entry_uri(&self, input: &PlanInput<'_>) -> Option<String> {
        let intent = input.intent;
        let fe = self
            .config
            .fast_entries
            .iter()
            .find(|f| f.app_id == intent.target_app && f.action == intent.action_type)?;
        let mut uri = fe.uri.replace("{session}", &escape(input.session_id, URI_RESERVED));
        for (k, v) in &intent.slots {
            uri = uri.replace(&format!("{{{k}}}"), &escape(v, URI_RESERVED));
        }
        (!uri.contains('{')).then_some(uri)
    }

    fn on_page(&self, rule: &PageRule, obs: &Observation, input: &PlanInput<'_>) -> Decision {
        let act = |action: Action, why: &str| Decision::Act {
            action,
            rationale: why.into(),
        };
        match &rule.action {
            PageAction::Extract { schema, passes } => match input.artifacts.last() {
                None => act(
                    Action::ScrollExtract {
                        schema: *schema,
                        passes: *passes,
                    },
                    "result list on screen",
                ),
                Some(a) => match summarize(a) {
                    Ok(s) => respond(s, "summarise extracted records"),
                    Err(e) => respond(format!("nothing to summarise: {e}"), "empty extraction"),
                },
            },
            PageAction::AnswerFromTable => {
                let hit = obs
                    .visible_texts()
                    .into_iter()
                    .find_map(|t| self.config.answers.get(&t).map(|a| (t, a.clone())));
                match hit {
                    Some((q, a)) => act(Action::TapTarget { target: TargetSpec::text(&a) }, &format!("answer to {q}")),
                    None => respond("no scripted answer for this question".into(), "answer table miss"),
                }
            }
            PageAction::SelectAllThenTap { target } => {
                let unselected: Vec<TargetSpec> = obs
                    .scrollable_node()
                    .map(|list| {
                        list.children
                            .iter()
                            .filter(|row| row.content_desc != "selected")
                            .filter_map(|row| row.children.first())
                            .map(|title| TargetSpec::text(&title.text))
                            .collect()
                    })
                    .unwrap_or_default();
                if unselected.is_empty() {
                    act(Action::TapTarget { target: TargetSpec::text(target) }, "all rows selected")
                } else {
                    act(Action::MultiTapTargets { targets: unselected }, "select remaining rows")
                }
            }
            PageAction::TapText { text } => act(Action::TapTarget { target: TargetSpec::text(text) }, "scripted tap"),
            PageAction::Respond { text } => respond(text.clone(), "scripted response"),
            PageAction::Done => Decision::Done {
                rationale: format!("reached {}", obs.activity),
            },
        }
    }
}

const URI_RESERVED: &[char] = &[' ', '/', '?', '#', '&', '='];

fn respond(response: String, why: &str) -> Decision {
    Decision::Respond {
        response,
        rationale: why.into(),
    }
}

fn entered(input: &PlanInput<'_>) -> bool {
    input.history.iter().any(|s| {
        matches!(
            s.decision,
            Decision::InvokeSkill { .. }
                | Decision::Act {
                    action: Action::Launch { .. },
                    ..
                }
        )
    })
}

impl Planner for RulePlanner {
    fn decide(&mut self, input: &PlanInput<'_>) -> Result<Decision, AgentError> {
        let intent = input.intent;
        if intent.action_type == ActionType::Answer {
            return Ok(respond(intent.expanded_query.clone(), "no device action needed"));
        }
        if input.history.is_empty() {
            if let Some(card) = select_skill(intent, input.skills) {
                return Ok(Decision::InvokeSkill {
                    skill: card.name.clone(),
                    params: intent.slots.clone(),
                    rationale: format!("skill card {} matches", card.name),
                });
            }
        }
        if intent.action_type == ActionType::Compose
            && !input.history.iter().any(|s| {
                matches!(
                    s.decision,
                    Decision::Act {
                        action: Action::StageMemory { .. },
                        ..
                    }
                )
            })
        {
            let query = intent
                .slots
                .get("theme")
                .cloned()
                .unwrap_or_else(|| intent.expanded_query.clone());
            return Ok(Decision::Act {
                action: Action::StageMemory {
                    query,
                    task_id: input.session_id.to_string(),
                },
                rationale: "gather matching media before composing".into(),
            });
        }
        let entered = entered(input);
        if let Some(obs) = input.observation.filter(|o| o.app_id == intent.target_app) {
            // page rules apply once the agent is inside the app, or when
            // the app is already open on a page with a rule
            if let Some(rule) = self.page_rule(obs) {
                if entered || intent.action_type != ActionType::Open {
                    return Ok(self.on_page(rule, obs, input));
                }
            }
            if intent.action_type == ActionType::Open {
                return Ok(Decision::Done {
                    rationale: format!("{} is open", intent.target_app),
                });
            }
        }
        if !entered {
            return Ok(match self.entry_uri(input) {
                Some(uri) => Decision::Act {
                    action: Action::Launch {
                        intent: IntentMsg::view(&uri),
                    },
                    rationale: format!("fast entry into {}", intent.target_app),
                },
                None => respond(
                    format!("I don't know how to {} in {}", intent.action_type.as_str(), intent.target_app),
                    "no fast entry",
                ),
            });
        }
        let here = input
            .observation
            .map_or_else(|| "no page".to_string(), |o| format!("{}/{}", o.app_id, o.activity));
        Ok(respond(format!("stopped at {here}: no rule applies"), "no applicable rule"))
    }
}
