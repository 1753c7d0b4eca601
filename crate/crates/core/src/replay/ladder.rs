use serde::{Deserialize, Serialize};

use super::{Bookmark, ReplayError};
use crate::device::{Device, IntentMsg, Page};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    FullIntent,
    Deeplink,
    BareComponent,
    TaskStackRestore,
}

pub const TIER_ORDER: [Tier; 4] = [Tier::FullIntent, Tier::Deeplink, Tier::BareComponent, Tier::TaskStackRestore];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub tier: Tier,
    pub launched: bool,
    pub validated: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub tier_used: Tier,
    pub page: Page,
    pub attempts: Vec<Attempt>,
}

/// Walk the tiers in order. Tiers 1 to 3 launch unprivileged; tier 4 brings
/// the app's own task forward. A launch whose page fails validation is
/// popped again so it cannot masquerade as the stack top for tier 4.
pub fn replay(bookmark: &Bookmark, device: &mut Device) -> Result<ReplayOutcome, ReplayError> {
    let d = &bookmark.descriptor;
    let app = d.component.app_id.clone();
    let mut attempts = Vec::new();
    for tier in TIER_ORDER {
        let launch = match tier {
            Tier::FullIntent => Some(d.to_intent()),
            Tier::Deeplink => d.data_uri.as_deref().map(|u| IntentMsg {
                action: d.action.clone(),
                ..IntentMsg::view(u)
            }),
            Tier::BareComponent => Some(IntentMsg::component(&d.component.app_id, &d.component.activity)),
            Tier::TaskStackRestore => None,
        };
        let result = match (tier, launch) {
            (Tier::TaskStackRestore, _) => device.bring_to_front(&app).map(|p| (p, false)),
            (_, Some(intent)) => device.launch_intent(&intent, false).map(|p| (p, true)),
            (_, None) => {
                attempts.push(Attempt {
                    tier,
                    launched: false,
                    validated: false,
                    detail: "bookmark has no data uri".into(),
                });
                continue;
            }
        };
        match result {
            Err(e) => attempts.push(Attempt {
                tier,
                launched: false,
                validated: false,
                detail: e.to_string(),
            }),
            Ok((page, pushed)) => {
                let obs = device.snapshot()?;
                let ok = bookmark.signature.validates(&obs);
                attempts.push(Attempt {
                    tier,
                    launched: true,
                    validated: ok,
                    detail: format!("reached {}/{}", page.app_id, page.activity),
                });
                if ok {
                    return Ok(ReplayOutcome {
                        tier_used: tier,
                        page,
                        attempts,
                    });
                }
                if pushed {
                    device.apply_gesture(&crate::device::Gesture::Back)?;
                }
            }
        }
    }
    Err(ReplayError::AllTiersFailed { attempts })
}
