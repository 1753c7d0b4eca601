use serde::{Deserialize, Serialize};

use crate::ingress::{TriggerEvent, TriggerSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmSpec {
    pub alarm_id: String,
    pub fire_at: u64,
    #[serde(default)]
    pub repeat_every: Option<u64>,
    pub payload: TriggerEvent,
}

/// Installed alarm; `next_fire` advances as a repeating alarm re-arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ArmedAlarm {
    pub spec: AlarmSpec,
    pub next_fire: u64,
    pub seq: u64,
}

/// Fire every alarm due at or before `until`, re-arming repeaters and
/// dropping one-shots. Events come out ordered by fire time, then by
/// registration order.
pub(crate) fn fire_due(alarms: &mut Vec<ArmedAlarm>, until: u64) -> Vec<TriggerEvent> {
    let mut fired: Vec<(u64, u64, TriggerEvent)> = Vec::new();
    for alarm in alarms.iter_mut() {
        while alarm.next_fire <= until {
            let mut ev = alarm.spec.payload.clone();
            ev.timestamp = alarm.next_fire;
            ev.source = TriggerSource::Schedule;
            fired.push((alarm.next_fire, alarm.seq, ev));
            match alarm.spec.repeat_every {
                Some(period) => alarm.next_fire += period,
                None => {
                    alarm.next_fire = u64::MAX;
                    break;
                }
            }
        }
    }
    alarms.retain(|a| a.next_fire != u64::MAX);
    fired.sort_by_key(|(t, seq, _)| (*t, *seq));
    fired.into_iter().map(|(_, _, ev)| ev).collect()
}
