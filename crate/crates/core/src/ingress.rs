//! Unified ingress: every trigger source becomes a [`RequestEnvelope`] on one
//! queue. Polling order is `(received_at, submission order)`.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Device, DeviceError};
use crate::perception::SpeechSegment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerSource {
    Ui,
    FloatingWidget,
    Microphone,
    Schedule,
    ExternalGateway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerPayload {
    Text(String),
    Speech(Vec<SpeechSegment>),
    /// Raw message from an external gateway, translated by its adapter.
    Gateway(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub source: TriggerSource,
    #[serde(default)]
    pub timestamp: u64,
    pub payload: TriggerPayload,
    pub session_id: String,
}

impl TriggerEvent {
    pub fn text(source: TriggerSource, timestamp: u64, session: &str, text: &str) -> Self {
        Self {
            source,
            timestamp,
            payload: TriggerPayload::Text(text.into()),
            session_id: session.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizedPayload {
    Text(String),
    Speech(Vec<SpeechSegment>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestEnvelope {
    pub envelope_id: String,
    pub source: TriggerSource,
    pub received_at: u64,
    pub normalized_payload: NormalizedPayload,
    pub session_id: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngressError {
    #[error("malformed gateway message: {0}")]
    MalformedGatewayMessage(String),
    #[error("empty session id")]
    EmptySession,
    #[error("fire time {fire_at} is before the current clock {now}")]
    PastFireTime { fire_at: u64, now: u64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Loopback gateway adapter. Accepts `FROM=<id> TEXT=<text>` and, for
/// bot-style senders, a JSON object with `from` and `text` keys.
pub fn parse_gateway_message(raw: &str) -> Result<(String, String), IngressError> {
    let line = raw.trim_end_matches(['\r', '\n']);
    if let Some(rest) = line.strip_prefix("FROM=") {
        if let Some((from, text)) = rest.split_once(" TEXT=") {
            if !from.is_empty() && !from.contains(char::is_whitespace) && !line.contains('\n') {
                return Ok((from.to_string(), text.to_string()));
            }
        }
    } else if line.trim_start().starts_with('{') {
        #[derive(Deserialize)]
        struct Json {
            from: String,
            text: String,
        }
        if let Ok(j) = serde_json::from_str::<Json>(line) {
            return Ok((j.from, j.text));
        }
    }
    Err(IngressError::MalformedGatewayMessage(raw.to_string()))
}

pub fn normalize(event: &TriggerEvent) -> Result<NormalizedPayload, IngressError> {
    Ok(match &event.payload {
        TriggerPayload::Text(t) => NormalizedPayload::Text(t.clone()),
        TriggerPayload::Speech(s) => NormalizedPayload::Speech(s.clone()),
        TriggerPayload::Gateway(raw) => NormalizedPayload::Text(parse_gateway_message(raw)?.1),
    })
}

#[derive(Debug, Default)]
struct QueueState {
    next_seq: u64,
    pending: BTreeMap<(u64, u64), RequestEnvelope>,
    accepted: u64,
    polled: u64,
}

/// Thread-safe envelope queue. `submit` may be called from any thread;
/// `poll_next` is meant for a single consumer.
#[derive(Debug, Default)]
pub struct Gateway {
    state: Mutex<QueueState>,
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn submit(&self, event: TriggerEvent) -> Result<RequestEnvelope, IngressError> {
        if event.session_id.is_empty() {
            return Err(IngressError::EmptySession);
        }
        let payload = normalize(&event)?;
        let mut st = self.state.lock().expect("ingress queue poisoned");
        let seq = st.next_seq;
        st.next_seq += 1;
        st.accepted += 1;
        let env = RequestEnvelope {
            envelope_id: format!("env-{seq:06}"),
            source: event.source,
            received_at: event.timestamp,
            normalized_payload: payload,
            session_id: event.session_id,
        };
        st.pending.insert((env.received_at, seq), env.clone());
        Ok(env)
    }

    pub fn poll_next(&self) -> Option<RequestEnvelope> {
        let mut st = self.state.lock().expect("ingress queue poisoned");
        let env = st.pending.pop_first().map(|(_, e)| e);
        if env.is_some() {
            st.polled += 1;
        }
        env
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("ingress queue poisoned").pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(accepted, polled)` counters.
    pub fn counters(&self) -> (u64, u64) {
        let st = self.state.lock().expect("ingress queue poisoned");
        (st.accepted, st.polled)
    }

    /// Submit every alarm payload fired by a clock advance.
    pub fn submit_fired(&self, fired: Vec<TriggerEvent>) -> Result<Vec<RequestEnvelope>, IngressError> {
        fired.into_iter().map(|e| self.submit(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRule {
    pub fire_at: u64,
    #[serde(default)]
    pub repeat_every: Option<u64>,
    pub payload: TriggerEvent,
}

/// Install an alarm on the device whose firings come back through
/// [`Gateway::submit`] with `source = schedule`.
pub fn register_schedule(device: &mut Device, rule: ScheduleRule) -> Result<String, IngressError> {
    let now = device.clock();
    if rule.fire_at < now {
        return Err(IngressError::PastFireTime {
            fire_at: rule.fire_at,
            now,
        });
    }
    if rule.payload.session_id.is_empty() {
        return Err(IngressError::EmptySession);
    }
    normalize(&rule.payload)?;
    Ok(device.schedule_alarm(rule.fire_at, rule.repeat_every, rule.payload)?)
}

/// Advance the device clock and route fired alarms into the gateway.
pub fn advance_and_route(
    device: &mut Device,
    gateway: &Gateway,
    dt: u64,
) -> Result<Vec<RequestEnvelope>, IngressError> {
    let fired = device.advance_clock(dt);
    gateway.submit_fired(fired)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ui(ts: u64, text: &str) -> TriggerEvent {
        TriggerEvent::text(TriggerSource::Ui, ts, "s1", text)
    }

    #[test]
    fn ui_text_normalizes_to_text() {
        let g = Gateway::new();
        let env = g.submit(ui(0, "open settings")).unwrap();
        assert_eq!(env.normalized_payload, NormalizedPayload::Text("open settings".into()));
    }

    #[test]
    fn gateway_line_and_json_forms() {
        assert_eq!(
            parse_gateway_message("FROM=bot TEXT=ping").unwrap(),
            ("bot".into(), "ping".into())
        );
        assert_eq!(
            parse_gateway_message(r#"{"from":"bot","text":"ping"}"#).unwrap(),
            ("bot".into(), "ping".into())
        );
        assert_eq!(
            parse_gateway_message("FROM=bot TEXT=hello there").unwrap().1,
            "hello there"
        );
        for bad in ["", "TEXT=x", "FROM= TEXT=x", "FROM=a b TEXT=x", "{\"from\":1}"] {
            assert!(matches!(
                parse_gateway_message(bad),
                Err(IngressError::MalformedGatewayMessage(_))
            ));
        }
    }

    #[test]
    fn malformed_gateway_submission_is_rejected_and_not_queued() {
        let g = Gateway::new();
        let ev = TriggerEvent {
            source: TriggerSource::ExternalGateway,
            timestamp: 0,
            payload: TriggerPayload::Gateway("garbage".into()),
            session_id: "s".into(),
        };
        assert!(g.submit(ev).is_err());
        assert!(g.is_empty());
        assert_eq!(g.counters(), (0, 0));
    }

    #[test]
    fn fifo_and_empty_poll() {
        let g = Gateway::new();
        assert!(g.poll_next().is_none());
        let a = g.submit(ui(5, "a")).unwrap();
        let b = g.submit(ui(5, "b")).unwrap();
        assert_eq!(g.poll_next().unwrap(), a);
        assert_eq!(g.poll_next().unwrap(), b);
        assert!(g.poll_next().is_none());
    }

    #[test]
    fn interleaved_sources_poll_in_stable_time_order() {
        let g = Gateway::new();
        let log = [(300, "x"), (100, "y"), (300, "z"), (200, "w"), (100, "v")];
        for (i, (t, text)) in log.iter().enumerate() {
            let src = if i % 2 == 0 { TriggerSource::Schedule } else { TriggerSource::Ui };
            g.submit(TriggerEvent::text(src, *t, "s", text)).unwrap();
        }
        // oracle: stable sort of the injected log by timestamp
        let mut expect: Vec<_> = log.iter().collect();
        expect.sort_by_key(|(t, _)| *t);
        let got: Vec<_> = std::iter::from_fn(|| g.poll_next())
            .map(|e| match e.normalized_payload {
                NormalizedPayload::Text(t) => t,
                _ => unreachable!(),
            })
            .collect();
        let want: Vec<_> = expect.iter().map(|(_, s)| s.to_string()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn schedule_in_the_past_is_rejected() {
        let mut d = Device::new(0);
        d.advance_clock(500);
        let rule = ScheduleRule {
            fire_at: 100,
            repeat_every: None,
            payload: ui(0, "memory sync"),
        };
        assert_eq!(
            register_schedule(&mut d, rule),
            Err(IngressError::PastFireTime { fire_at: 100, now: 500 })
        );
    }

    #[test]
    fn scheduled_alarm_lands_in_queue() {
        let mut d = Device::new(0);
        let g = Gateway::new();
        register_schedule(
            &mut d,
            ScheduleRule {
                fire_at: 1000,
                repeat_every: None,
                payload: ui(0, "memory sync"),
            },
        )
        .unwrap();
        advance_and_route(&mut d, &g, 999).unwrap();
        assert_eq!(g.len(), 0);
        advance_and_route(&mut d, &g, 1).unwrap();
        assert_eq!(g.len(), 1);
        let env = g.poll_next().unwrap();
        assert_eq!(env.source, TriggerSource::Schedule);
        assert_eq!(env.received_at, 1000);
    }

    #[test]
    fn concurrent_submitters_lose_nothing() {
        let g = std::sync::Arc::new(Gateway::new());
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let g = std::sync::Arc::clone(&g);
                std::thread::spawn(move || {
                    for i in 0..50 {
                        g.submit(TriggerEvent::text(TriggerSource::Ui, i, "s", &format!("{t}-{i}")))
                            .unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let n = std::iter::from_fn(|| g.poll_next()).count();
        assert_eq!(n, 200);
        assert_eq!(g.counters(), (200, 200));
    }
}
