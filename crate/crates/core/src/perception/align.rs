use serde::{Deserialize, Serialize};

use super::{Frame, FrameRing, PerceptionError};

pub const DEFAULT_PRE_MS: u64 = 2000;
pub const DEFAULT_POST_MS: u64 = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub t0: u64,
    pub t1: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedUtterance {
    pub text: String,
    /// Inclusive window `[t0 - pre, t1 + post]`; the start may be negative.
    pub window: (i64, i64),
    pub frames: Vec<Frame>,
    pub representative: Frame,
}

/// Pair an utterance with the frames captured around it.
///
/// The representative frame is the one closest to the utterance midpoint,
/// preferring the earlier frame on ties. With no frame in the window the
/// latest frame stands in alone.
pub fn align(
    u: &Utterance,
    ring: &FrameRing,
    pre_ms: u64,
    post_ms: u64,
) -> Result<AlignedUtterance, PerceptionError> {
    let latest = ring.latest().ok_or(PerceptionError::EmptyRing)?;
    let lo = u.t0 as i64 - pre_ms as i64;
    let hi = (u.t1 + post_ms) as i64;
    let frames: Vec<Frame> = ring
        .frames()
        .filter(|f| (lo..=hi).contains(&(f.timestamp as i64)))
        .cloned()
        .collect();
    // compare doubled distances to stay in integers
    let mid2 = u.t0 as i64 + u.t1 as i64;
    let representative = frames
        .iter()
        .min_by_key(|f| ((2 * f.timestamp as i64 - mid2).abs(), f.timestamp, f.frame_id))
        .cloned();
    let (frames, representative) = match representative {
        Some(r) => (frames, r),
        None => (vec![latest.clone()], latest.clone()),
    };
    Ok(AlignedUtterance {
        text: u.text.clone(),
        window: (lo, hi),
        frames,
        representative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::SceneDescriptor;

    fn ring(ts: &[u64]) -> FrameRing {
        let mut r = FrameRing::new(64);
        for (i, t) in ts.iter().enumerate() {
            r.push(Frame::camera(i as u64 + 1, *t, SceneDescriptor::default())).unwrap();
        }
        r
    }

    fn utt(t0: u64, t1: u64) -> Utterance {
        Utterance {
            text: "x".into(),
            t0,
            t1,
        }
    }

    #[test]
    fn window_and_representative() {
        let a = align(&utt(900, 1100), &ring(&[0, 1000, 2000]), 2000, 500).unwrap();
        assert_eq!(a.window, (-1100, 1600));
        let ts: Vec<u64> = a.frames.iter().map(|f| f.timestamp).collect();
        assert_eq!(ts, vec![0, 1000]);
        assert_eq!(a.representative.timestamp, 1000);
    }

    #[test]
    fn single_frame() {
        let a = align(&utt(5000, 5000), &ring(&[4000]), 2000, 500).unwrap();
        assert_eq!(a.representative.timestamp, 4000);
    }

    #[test]
    fn ties_prefer_earlier() {
        let a = align(&utt(1000, 1000), &ring(&[900, 1100]), 2000, 500).unwrap();
        assert_eq!(a.representative.timestamp, 900);
    }

    #[test]
    fn falls_back_to_latest_frame() {
        let a = align(&utt(10_000, 10_100), &ring(&[0, 100]), 2000, 500).unwrap();
        assert_eq!(a.frames.len(), 1);
        assert_eq!(a.representative.timestamp, 100);
    }

    #[test]
    fn empty_ring_errors() {
        assert_eq!(
            align(&utt(0, 0), &FrameRing::new(4), 2000, 500),
            Err(PerceptionError::EmptyRing)
        );
    }
}
