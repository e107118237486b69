//! KDIGO staging engine.
//!
//! The stage is evaluated at every creatinine, urine, or in-stay dialysis
//! event time and emitted as a step function. Creatinine rules compare
//! the latest value against the lowest value of the trailing 7 days;
//! urine rules grade trailing contiguous low-output runs; renal
//! replacement therapy during the stay forces stage 3 from its start.
//!
//! `baseline_creatinine` and `stage_urine` are straightforward
//! window-scanning definitions; `compute_stage_series` is the fast engine
//! (monotonic deques and prefix runs) that the test suite checks against
//! naive per-event recomputation.

use super::AkiStage;
use crate::error::{Error, Result};
use crate::ingest::{EventStore, UrineEvent};
use crate::time::{Timestamp, MINUTES_PER_DAY, MINUTES_PER_HOUR};
use std::collections::VecDeque;

const BASELINE_WINDOW_MIN: i64 = 7 * MINUTES_PER_DAY;
const RISE_WINDOW_MIN: i64 = 48 * MINUTES_PER_HOUR;
/// A urine event's volume is attributed to the interval since the previous
/// urine event, capped at 24 h; longer gaps break run contiguity.
const URINE_GAP_CAP_MIN: i64 = 24 * MINUTES_PER_HOUR;

/// Step function of AKI stage over time (stage 0 before the first step).
#[derive(Debug, Clone, PartialEq)]
pub struct StageSeries {
    pub patient_id: String,
    steps: Vec<(Timestamp, AkiStage)>,
}

impl StageSeries {
    /// Build from raw per-event evaluations; consecutive equal stages are
    /// compressed so entries mark actual changes.
    pub fn from_evaluations(patient_id: &str, evals: Vec<(Timestamp, AkiStage)>) -> StageSeries {
        let mut steps: Vec<(Timestamp, AkiStage)> = Vec::new();
        let mut current = AkiStage::S0;
        for (t, s) in evals {
            debug_assert!(steps.last().map(|(u, _)| *u <= t).unwrap_or(true));
            if s != current {
                steps.push((t, s));
                current = s;
            }
        }
        StageSeries {
            patient_id: patient_id.to_string(),
            steps,
        }
    }

    pub fn steps(&self) -> &[(Timestamp, AkiStage)] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Stage at time `t` (stage of the latest step at or before `t`).
    pub fn stage_at(&self, t: Timestamp) -> AkiStage {
        match self.steps.partition_point(|(u, _)| *u <= t) {
            0 => AkiStage::S0,
            n => self.steps[n - 1].1,
        }
    }

    /// Earliest time >= `t` with a nonzero stage, if any.
    pub fn first_nonzero_at_or_after(&self, t: Timestamp) -> Option<Timestamp> {
        if self.stage_at(t) > AkiStage::S0 {
            return Some(t);
        }
        self.steps
            .iter()
            .find(|(u, s)| *u > t && *s > AkiStage::S0)
            .map(|(u, _)| *u)
    }

    /// Maximum stage over the half-open window `[start, end)`.
    pub fn max_in(&self, start: Timestamp, end: Timestamp) -> AkiStage {
        let mut max = self.stage_at(start);
        for (u, s) in &self.steps {
            if *u >= end {
                break;
            }
            if *u > start && *s > max {
                max = *s;
            }
        }
        max
    }
}

/// Lowest creatinine within the trailing 7 days `(t-7d, t]`, or `None`
/// when the window is empty (creatinine staging is skipped at `t`).
pub fn baseline_creatinine(series: &[(Timestamp, f64)], t: Timestamp) -> Option<f64> {
    let lo = t.minutes() - BASELINE_WINDOW_MIN;
    series
        .iter()
        .filter(|(u, _)| u.minutes() > lo && *u <= t)
        .map(|&(_, v)| v)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        })
}

/// KDIGO creatinine staging.
///
/// Stage 1: >= 1.5x baseline, or an absolute rise >= 0.3 mg/dL within 48 h.
/// Stage 2: >= 2.0x baseline.
/// Stage 3: >= 3.0x baseline, or current >= 4.0 mg/dL with an acute rise
/// (>= 0.3 within 48 h), or renal replacement therapy.
pub fn stage_creatinine(
    baseline: f64,
    current: f64,
    max_rise_48h: f64,
    on_rrt: bool,
) -> Result<AkiStage> {
    if !(baseline > 0.0) || !(current > 0.0) || !(max_rise_48h >= 0.0) {
        return Err(Error::numeric(format!(
            "stage_creatinine contract violation: baseline={baseline} current={current} rise={max_rise_48h}"
        )));
    }
    if on_rrt {
        return Ok(AkiStage::S3);
    }
    let ratio = current / baseline;
    let acute_rise = max_rise_48h >= 0.3;
    let stage = if ratio >= 3.0 || (current >= 4.0 && acute_rise) {
        AkiStage::S3
    } else if ratio >= 2.0 {
        AkiStage::S2
    } else if ratio >= 1.5 || acute_rise {
        AkiStage::S1
    } else {
        AkiStage::S0
    };
    Ok(stage)
}

/// Hourly urine rate over the interval ending at event `i`, in mL/kg/h.
/// Zero-length intervals have no rate: a positive volume at zero length
/// breaks a low-output run, a zero volume passes through.
fn interval_of(urine: &[UrineEvent], i: usize) -> Option<(i64, f64)> {
    if i == 0 {
        return None;
    }
    let gap = urine[i].time.minutes() - urine[i - 1].time.minutes();
    let len = gap.min(URINE_GAP_CAP_MIN);
    Some((len, urine[i].volume_ml))
}

fn urine_stage_from_runs(run_low_05: i64, run_low_03: i64, run_anuria: i64) -> AkiStage {
    if run_low_03 >= 24 * MINUTES_PER_HOUR || run_anuria >= 12 * MINUTES_PER_HOUR {
        AkiStage::S3
    } else if run_low_05 >= 12 * MINUTES_PER_HOUR {
        AkiStage::S2
    } else if run_low_05 >= 6 * MINUTES_PER_HOUR {
        AkiStage::S1
    } else {
        AkiStage::S0
    }
}

/// KDIGO urine-output staging at time `t`, by scanning backward from the
/// latest urine event at or before `t`.
///
/// Stage 1: < 0.5 mL/kg/h sustained 6-12 h; stage 2: < 0.5 for >= 12 h;
/// stage 3: < 0.3 for >= 24 h or anuria >= 12 h. Runs must be contiguous
/// (each event within 24 h of its predecessor) and trailing.
pub fn stage_urine(urine: &[UrineEvent], weight_kg: f64, t: Timestamp) -> AkiStage {
    debug_assert!(weight_kg > 0.0);
    let j = urine.partition_point(|e| e.time <= t);
    if j == 0 {
        return AkiStage::S0;
    }
    let mut run_low_05 = 0i64;
    let mut run_low_03 = 0i64;
    let mut run_anuria = 0i64;
    let mut broken_05 = false;
    let mut broken_03 = false;
    let mut broken_anuria = false;
    for i in (1..j).rev() {
        let gap = urine[i].time.minutes() - urine[i - 1].time.minutes();
        let (len, volume) = interval_of(urine, i).unwrap();
        if len == 0 {
            if volume > 0.0 {
                break; // instantaneous positive output disqualifies all runs
            }
        } else {
            let rate = volume / (len as f64 / 60.0) / weight_kg;
            if rate < 0.5 && !broken_05 {
                run_low_05 += len;
            } else {
                broken_05 = true;
            }
            if rate < 0.3 && !broken_03 {
                run_low_03 += len;
            } else {
                broken_03 = true;
            }
            if volume == 0.0 && !broken_anuria {
                run_anuria += len;
            } else {
                broken_anuria = true;
            }
            if broken_05 && broken_03 && broken_anuria {
                break;
            }
        }
        if gap > URINE_GAP_CAP_MIN {
            break; // uncovered time before the capped interval
        }
    }
    urine_stage_from_runs(run_low_05, run_low_03, run_anuria)
}

/// Sliding-window minimum over `(t - window, t]` via a monotonic deque.
struct WindowMin {
    window: i64,
    deque: VecDeque<(i64, f64)>,
}

impl WindowMin {
    fn new(window: i64) -> WindowMin {
        WindowMin {
            window,
            deque: VecDeque::new(),
        }
    }

    fn push(&mut self, t: i64, v: f64) {
        while self.deque.back().map(|&(_, b)| b >= v).unwrap_or(false) {
            self.deque.pop_back();
        }
        self.deque.push_back((t, v));
    }

    fn min_at(&mut self, t: i64) -> Option<f64> {
        while self
            .deque
            .front()
            .map(|&(u, _)| u <= t - self.window)
            .unwrap_or(false)
        {
            self.deque.pop_front();
        }
        self.deque.front().map(|&(_, v)| v)
    }
}

/// Compute the full AKI stage series for one patient.
///
/// Stage is evaluated at every creatinine, urine, and in-stay dialysis
/// event time as the max of the creatinine rule, the urine rule, and the
/// RRT override; patients without a recorded weight skip urine staging.
pub fn compute_stage_series(store: &EventStore, patient_idx: usize) -> Result<StageSeries> {
    let patient = store.patient(patient_idx);
    let events = store.events(patient_idx);
    let admit = patient.icu_admit_time;

    let creatinine = events.lab_series(crate::ingest::Analyte::Creatinine);
    let urine = &events.urine;
    let weight = patient.weight_kg;
    let rrt_start: Option<Timestamp> = events
        .dialysis
        .iter()
        .map(|d| d.time)
        .find(|t| *t >= admit);

    // Evaluation timeline (sorted, deduped).
    let mut times: Vec<Timestamp> = creatinine
        .iter()
        .map(|&(t, _)| t)
        .chain(urine.iter().map(|e| e.time))
        .chain(rrt_start)
        .collect();
    times.sort();
    times.dedup();
    if times.is_empty() {
        return Ok(StageSeries::from_evaluations(&patient.patient_id, vec![]));
    }

    // Creatinine: incremental trailing minima.
    let mut baseline_min = WindowMin::new(BASELINE_WINDOW_MIN);
    let mut rise_min = WindowMin::new(RISE_WINDOW_MIN);
    let mut cr_cursor = 0usize;
    let mut last_cr: Option<(i64, f64)> = None;

    // Urine: prefix qualifying-run durations per event index.
    let n_urine = urine.len();
    let mut run05 = vec![0i64; n_urine];
    let mut run03 = vec![0i64; n_urine];
    let mut run00 = vec![0i64; n_urine];
    for i in 1..n_urine {
        let gap = urine[i].time.minutes() - urine[i - 1].time.minutes();
        let contiguous = gap <= URINE_GAP_CAP_MIN;
        let (len, volume) = interval_of(urine, i).unwrap();
        if len == 0 {
            if volume > 0.0 {
                // bolus at zero length: all runs break
                continue;
            }
            run05[i] = run05[i - 1];
            run03[i] = run03[i - 1];
            run00[i] = run00[i - 1];
            continue;
        }
        let rate = volume / (len as f64 / 60.0) / weight.unwrap_or(f64::INFINITY);
        let prev05 = if contiguous { run05[i - 1] } else { 0 };
        let prev03 = if contiguous { run03[i - 1] } else { 0 };
        let prev00 = if contiguous { run00[i - 1] } else { 0 };
        run05[i] = if rate < 0.5 { prev05 + len } else { 0 };
        run03[i] = if rate < 0.3 { prev03 + len } else { 0 };
        run00[i] = if volume == 0.0 { prev00 + len } else { 0 };
    }
    let mut urine_cursor = 0usize;

    let mut evals = Vec::with_capacity(times.len());
    for &t in &times {
        // advance creatinine structures through t
        while cr_cursor < creatinine.len() && creatinine[cr_cursor].0 <= t {
            let (u, v) = creatinine[cr_cursor];
            baseline_min.push(u.minutes(), v);
            rise_min.push(u.minutes(), v);
            last_cr = Some((u.minutes(), v));
            cr_cursor += 1;
        }
        let on_rrt = rrt_start.map(|r| r <= t).unwrap_or(false);

        let cr_stage = match last_cr {
            Some((u, current)) if t.minutes() - u < BASELINE_WINDOW_MIN => {
                let baseline = baseline_min.min_at(t.minutes());
                match baseline {
                    Some(b) => {
                        let rise = (current - rise_min.min_at(t.minutes()).unwrap_or(current))
                            .max(0.0);
                        stage_creatinine(b, current, rise, on_rrt)?
                    }
                    None => {
                        if on_rrt {
                            AkiStage::S3
                        } else {
                            AkiStage::S0
                        }
                    }
                }
            }
            _ => {
                if on_rrt {
                    AkiStage::S3
                } else {
                    AkiStage::S0
                }
            }
        };

        let ur_stage = match weight {
            Some(_) => {
                while urine_cursor < n_urine && urine[urine_cursor].time <= t {
                    urine_cursor += 1;
                }
                if urine_cursor == 0 {
                    AkiStage::S0
                } else {
                    let j = urine_cursor - 1;
                    urine_stage_from_runs(run05[j], run03[j], run00[j])
                }
            }
            None => AkiStage::S0,
        };

        evals.push((t, cr_stage.max(ur_stage)));
    }

    Ok(StageSeries::from_evaluations(&patient.patient_id, evals))
}
