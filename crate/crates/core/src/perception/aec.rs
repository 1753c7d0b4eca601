use super::SpeechSegment;
use crate::text::normalize;

pub const DEFAULT_AEC_WINDOW_MS: u64 = 500;

/// Transcript-level echo cancellation.
///
/// A mic segment is an echo of a playback segment when their normalized
/// texts are equal and their start times differ by at most `window_ms`.
/// Playback segments are taken in start order; each cancels the earliest
/// still-uncancelled matching mic segment, at most one.
pub fn aec_filter(
    mic: &[SpeechSegment],
    playback: &[SpeechSegment],
    window_ms: u64,
) -> Vec<SpeechSegment> {
    let mic_norm: Vec<String> = mic.iter().map(|m| normalize(&m.text)).collect();
    let mut mic_order: Vec<usize> = (0..mic.len()).collect();
    mic_order.sort_by_key(|&i| (mic[i].t_start, i));

    let mut pb_order: Vec<usize> = (0..playback.len()).collect();
    pb_order.sort_by_key(|&i| (playback[i].t_start, i));

    let mut cancelled = vec![false; mic.len()];
    for pi in pb_order {
        let p = &playback[pi];
        let pn = normalize(&p.text);
        let hit = mic_order.iter().copied().find(|&mi| {
            !cancelled[mi] && mic_norm[mi] == pn && mic[mi].t_start.abs_diff(p.t_start) <= window_ms
        });
        if let Some(mi) = hit {
            cancelled[mi] = true;
        }
    }
    mic.iter()
        .zip(cancelled)
        .filter(|(_, c)| !c)
        .map(|(m, _)| m.clone())
        .collect()
}
