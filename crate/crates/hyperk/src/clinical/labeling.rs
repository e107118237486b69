//! Hyperkalemia outcome labeling.
//!
//! A K >= 6 mEq/L result is a candidate; erroneous values (hemolyzed
//! specimens and the like) are filtered by a confirmation whitelist:
//!
//! (i)   no other potassium result within the open +/-6h neighborhood, or
//! (ii)  other results exist and every result in that neighborhood is
//!       >= 6, or
//! (iii) calcium gluconate was administered within +/-6h (closed).
//!
//! The earliest confirmed candidate inside the labeling window is the
//! onset. A candidate with a mixed neighborhood and no calcium gluconate
//! is rejected.

use super::OutcomeLabel;
use crate::time::{Timestamp, MINUTES_PER_HOUR};

const NEIGHBORHOOD_MIN: i64 = 6 * MINUTES_PER_HOUR;
const THRESHOLD: f64 = 6.0;

/// Apply the labeling rules over `[window_start, window_end)`.
///
/// `potassium` must be time-sorted; neighborhood checks consider all
/// potassium results, including those outside the labeling window.
/// `day_anchor` (ICU admission) defines day 1 = `[anchor, anchor+24h)`.
pub fn label_hyperkalemia(
    patient_id: &str,
    potassium: &[(Timestamp, f64)],
    calcium_gluconate: &[Timestamp],
    window_start: Timestamp,
    window_end: Timestamp,
    day_anchor: Timestamp,
) -> OutcomeLabel {
    debug_assert!(potassium.windows(2).all(|w| w[0].0 <= w[1].0));

    for (idx, &(t, value)) in potassium.iter().enumerate() {
        if value < THRESHOLD || t < window_start || t >= window_end {
            continue;
        }
        if is_confirmed(idx, t, potassium, calcium_gluconate) {
            return OutcomeLabel {
                patient_id: patient_id.to_string(),
                hyperkalemic: true,
                onset_time: Some(t),
                onset_day: Some(t.day_index_from(day_anchor)),
            };
        }
    }
    OutcomeLabel::negative(patient_id)
}

fn is_confirmed(
    idx: usize,
    t: Timestamp,
    potassium: &[(Timestamp, f64)],
    calcium_gluconate: &[Timestamp],
) -> bool {
    let mut has_neighbor = false;
    let mut all_high = true;
    for (j, &(u, v)) in potassium.iter().enumerate() {
        if j == idx {
            continue;
        }
        if (u.minutes() - t.minutes()).abs() < NEIGHBORHOOD_MIN {
            has_neighbor = true;
            if v < THRESHOLD {
                all_high = false;
            }
        }
    }
    if !has_neighbor {
        return true; // (i) a lone result stands
    }
    if all_high {
        return true; // (ii) concordant repeats confirm each other
    }
    calcium_gluconate
        .iter()
        .any(|&c| (c.minutes() - t.minutes()).abs() <= NEIGHBORHOOD_MIN) // (iii)
}
