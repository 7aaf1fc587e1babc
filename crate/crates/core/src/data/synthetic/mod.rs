//! Synthetic PSG cohort with known couplings between latent physiology,
//! signals and labels.
//!
//! Subject latents (age, apnea severity, heart rate) drive a Markov
//! hypnogram, apnea events and survival times. Signals are rendered lazily,
//! one 5 s patch at a time, from per-(record, patch) random streams, so a
//! cohort of any size costs only its event plans in memory and any window
//! can be read in any order with identical results.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::labels::{LabelSet, OutcomeId, SleepStage, SurvivalOutcome};
use super::layout::ChannelLayout;
use super::manifest::{assign_splits, ManifestEntry, RecordManifest, Split, SplitRatios};
use super::record::{RecordMeta, RecordSource};
use crate::rng::{self, tag, Rng};
use crate::spectral::RealDft;
use crate::{Error, Result, PATCH_LEN, PATCH_SECONDS, SAMPLE_RATE_HZ, SEGMENT_SECONDS};

const FS: f64 = SAMPLE_RATE_HZ as f64;
const DT: f64 = PATCH_SECONDS as f64;

/// Band edges in Hz: delta, theta, alpha, sigma, beta.
pub const BAS_BANDS: [(f64, f64); 5] = [
    (0.5, 4.0),
    (4.0, 8.0),
    (8.0, 12.0),
    (12.0, 15.0),
    (15.0, 30.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasParams {
    /// RMS amplitude per stage (Wake, N1, N2, N3, REM) and band.
    pub stage_bands: [[f64; 5]; 5],
    /// RMS of the 1/f background.
    pub background: f64,
    /// Age coupling: band amplitudes are scaled by
    /// `(f / 8 Hz)^(age_slope · (age − 50) / 50)`.
    pub age_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespParams {
    /// Mean of the gamma-distributed subject event rate (per hour of
    /// sleep). Zero disables apnea entirely. The record label is the
    /// realized rate.
    pub ahi_mean: f64,
    pub ahi_shape: f64,
    pub ahi_max: f64,
    pub event_duration_s: [f64; 2],
    /// Airflow amplitude factor during an apnea.
    pub airflow_reduction: f64,
    /// Fraction of events that are hypopneas (half airflow).
    pub hypopnea_fraction: f64,
    /// Fraction of complete apneas that are central (no effort).
    pub central_fraction: f64,
    /// Breathing rate per stage, Hz.
    pub breath_hz: [f64; 5],
    /// SpO2 desaturation depth range, percentage points.
    pub desat_pct: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartParams {
    pub base_bpm: f64,
    pub base_bpm_sd: f64,
    pub stage_offset_bpm: [f64; 5],
    /// Increase during a post-event arousal.
    pub arousal_bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgParams {
    /// Chin tone RMS per stage.
    pub chin_tone: [f64; 5],
    /// Leg bursts per minute per stage.
    pub leg_burst_per_min: [f64; 5],
}

/// Exponential hazards per outcome (in `OutcomeId::ALL` order):
/// `log λ = base + age·z_age + ahi·z_ahi + n3·z_n3` per day, with
/// `z_age = (age − 55) / 20`, `z_ahi = (ahi − 15) / 15` and
/// `z_n3 = (N3 fraction − 0.12) / 0.08`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardParams {
    pub base_log_rate: [f64; 13],
    pub age: [f64; 13],
    pub ahi: [f64; 13],
    pub n3: [f64; 13],
    /// Uniform censoring window, days.
    pub censor_days: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub records_per_subject: usize,
    /// Seconds per record, a multiple of 300.
    pub duration_s: usize,
    pub seed: u64,
    pub age_range: [f64; 2],
    /// Per 5 s transition probabilities between stages; row = from.
    /// Diagonals are recomputed so rows sum to 1 after the age adjustment.
    pub stage_transitions: [[f64; 5]; 5],
    pub bas: BasParams,
    pub resp: RespParams,
    pub heart: HeartParams,
    pub emg: EmgParams,
    pub hazard: HazardParams,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_subjects: 128,
            records_per_subject: 1,
            duration_s: 3600,
            seed: 0,
            age_range: [20.0, 90.0],
            stage_transitions: [
                [0.0, 0.025, 0.003, 0.0, 0.002],
                [0.02, 0.0, 0.035, 0.0, 0.005],
                [0.005, 0.005, 0.0, 0.012, 0.008],
                [0.002, 0.002, 0.013, 0.0, 0.0],
                [0.01, 0.005, 0.01, 0.0, 0.0],
            ],
            bas: BasParams {
                stage_bands: [
                    [0.3, 0.3, 1.0, 0.2, 0.5],
                    [0.4, 0.9, 0.3, 0.2, 0.25],
                    [0.6, 0.5, 0.15, 0.8, 0.15],
                    [1.6, 0.4, 0.1, 0.2, 0.1],
                    [0.35, 0.8, 0.25, 0.1, 0.3],
                ],
                background: 0.15,
                age_slope: 0.5,
            },
            resp: RespParams {
                ahi_mean: 15.0,
                ahi_shape: 1.2,
                ahi_max: 120.0,
                event_duration_s: [10.0, 30.0],
                airflow_reduction: 0.1,
                hypopnea_fraction: 0.5,
                central_fraction: 0.2,
                breath_hz: [0.27, 0.25, 0.24, 0.22, 0.26],
                desat_pct: [3.0, 6.0],
            },
            heart: HeartParams {
                base_bpm: 64.0,
                base_bpm_sd: 8.0,
                stage_offset_bpm: [8.0, 3.0, 0.0, -4.0, 5.0],
                arousal_bpm: 6.0,
            },
            emg: EmgParams {
                chin_tone: [1.0, 0.6, 0.45, 0.35, 0.08],
                leg_burst_per_min: [6.0, 2.0, 1.0, 0.3, 0.05],
            },
            hazard: HazardParams {
                base_log_rate: [
                    -8.4, -8.3, -8.2, -8.6, -8.5, -7.9, -8.4, -8.6, -8.1, -8.3, -8.0, -8.8, -8.8,
                ],
                age: [
                    0.8, 0.9, 0.9, 0.5, 0.6, 0.5, 0.7, 0.6, 0.8, 0.8, 0.3, 1.2, 1.1,
                ],
                ahi: [
                    0.5, 0.6, 0.5, 0.3, 0.3, 0.7, 0.8, 0.7, 0.5, 0.4, 0.8, 0.3, 0.4,
                ],
                n3: [
                    -0.3, -0.3, -0.2, -0.2, -0.3, -0.3, -0.2, -0.2, -0.3, -0.3, -0.3, -0.6, -0.4,
                ],
                censor_days: [365.0, 3650.0],
            },
        }
    }
}

fn all_finite_nonneg(field: &'static str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(
                field,
                format!("values must be finite and nonnegative, got {v}"),
            ));
        }
    }
    Ok(())
}

fn ordered_range(field: &'static str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && lo <= r[0] && r[0] <= r[1] && r[1] <= hi) {
        return Err(Error::config(
            field,
            format!("range {r:?} must be ordered within [{lo}, {hi}]"),
        ));
    }
    Ok(())
}

fn unit_interval(field: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::config(field, format!("{v} not in [0, 1]")));
    }
    Ok(())
}

impl SyntheticConfig {
    /// A smaller default for quick experiments.
    pub fn tiny(n_subjects: usize, duration_s: usize, seed: u64) -> Self {
        Self {
            n_subjects,
            duration_s,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::config("n_subjects", "must be positive"));
        }
        if self.records_per_subject == 0 {
            return Err(Error::config("records_per_subject", "must be positive"));
        }
        if self.duration_s == 0 || self.duration_s % SEGMENT_SECONDS != 0 {
            return Err(Error::config(
                "duration_s",
                format!(
                    "{} is not a positive multiple of {SEGMENT_SECONDS}",
                    self.duration_s
                ),
            ));
        }
        ordered_range("age_range", self.age_range, 0.0, 100.0)?;
        for (i, row) in self.stage_transitions.iter().enumerate() {
            all_finite_nonneg("stage_transitions", row.iter().copied())?;
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v)
                .sum();
            if off > 0.5 {
                return Err(Error::config(
                    "stage_transitions",
                    format!("row {i} leaves with probability {off} > 0.5"),
                ));
            }
        }
        all_finite_nonneg(
            "bas.stage_bands",
            self.bas.stage_bands.iter().flatten().copied(),
        )?;
        all_finite_nonneg("bas.background", [self.bas.background])?;
        if !self.bas.age_slope.is_finite() {
            return Err(Error::config("bas.age_slope", "must be finite"));
        }
        let r = &self.resp;
        all_finite_nonneg("resp.ahi_mean", [r.ahi_mean, r.ahi_max])?;
        if !(r.ahi_shape.is_finite() && r.ahi_shape > 0.0) {
            return Err(Error::config("resp.ahi_shape", "must be positive"));
        }
        ordered_range("resp.event_duration_s", r.event_duration_s, 1.0, 120.0)?;
        unit_interval("resp.airflow_reduction", r.airflow_reduction)?;
        unit_interval("resp.hypopnea_fraction", r.hypopnea_fraction)?;
        unit_interval("resp.central_fraction", r.central_fraction)?;
        all_finite_nonneg("resp.breath_hz", r.breath_hz)?;
        if r.breath_hz.iter().any(|&f| f <= 0.0 || f > 2.0) {
            return Err(Error::config(
                "resp.breath_hz",
                "rates must lie in (0, 2] Hz",
            ));
        }
        ordered_range("resp.desat_pct", r.desat_pct, 0.0, 50.0)?;
        let h = &self.heart;
        if !(h.base_bpm > 20.0 && h.base_bpm < 200.0) {
            return Err(Error::config("heart.base_bpm", "must lie in (20, 200)"));
        }
        all_finite_nonneg("heart.base_bpm_sd", [h.base_bpm_sd, h.arousal_bpm])?;
        if h.stage_offset_bpm.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("heart.stage_offset_bpm", "must be finite"));
        }
        all_finite_nonneg("emg.chin_tone", self.emg.chin_tone)?;
        all_finite_nonneg("emg.leg_burst_per_min", self.emg.leg_burst_per_min)?;
        let z = &self.hazard;
        for (name, v) in [
            ("hazard.base_log_rate", &z.base_log_rate),
            ("hazard.age", &z.age),
            ("hazard.ahi", &z.ahi),
            ("hazard.n3", &z.n3),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if !(z.censor_days[0] > 0.0) {
            return Err(Error::config("hazard.censor_days", "must be positive"));
        }
        ordered_range("hazard.censor_days", z.censor_days, 0.0, f64::MAX)?;
        Ok(())
    }

    pub fn n_records(&self) -> usize {
        self.n_subjects * self.records_per_subject
    }

    pub fn patches_per_record(&self) -> usize {
        self.duration_s / PATCH_SECONDS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Obstructive,
    Central,
    Hypopnea,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    start: f64,
    end: f64,
    kind: EventKind,
    arousal_end: f64,
    desat_pct: f64,
}

impl Event {
    /// Raised-cosine SpO2 dip, lagging the event end.
    fn dip(&self, t: f64) -> f64 {
        let center = self.end + 12.0;
        let half = (self.end - self.start) / 2.0 + 8.0;
        let u = (t - center) / half;
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.desat_pct * 0.5 * (1.0 + libm::cos(PI * u))
        }
    }

    fn reach(&self) -> f64 {
        self.end + 12.0 + (self.end - self.start) / 2.0 + 8.0
    }
}

/// Smooth 0→1→0 indicator of `[a, b]` with 1 s ramps.
fn window(t: f64, a: f64, b: f64) -> f64 {
    let ramp = 1.0;
    if t <= a - ramp || t >= b + ramp {
        0.0
    } else if t < a {
        0.5 * (1.0 - libm::cos(PI * (t - (a - ramp)) / ramp))
    } else if t > b {
        0.5 * (1.0 + libm::cos(PI * (t - b) / ramp))
    } else {
        1.0
    }
}

struct RecordPlan {
    subject: usize,
    age: f64,
    resp_gain: f64,
    events: Vec<Event>,
    breath_phase: Vec<f64>,
    breath_hz: Vec<f64>,
    beat_phase: Vec<f64>,
    beat_hz: Vec<f64>,
}

struct SubjectLatents {
    age: f64,
    ahi: f64,
    bpm: f64,
    breath_scale: f64,
    resp_gain: f64,
}

fn normal(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

fn subject_latents(cfg: &SyntheticConfig, subject: usize) -> SubjectLatents {
    let mut r = rng::stream(cfg.seed, &[tag::SUBJECT, subject as u64]);
    let age = r.gen_range(cfg.age_range[0]..=cfg.age_range[1]);
    let ahi = if cfg.resp.ahi_mean > 0.0 {
        let g = Gamma::new(cfg.resp.ahi_shape, cfg.resp.ahi_mean / cfg.resp.ahi_shape)
            .expect("validated gamma");
        g.sample(&mut r).min(cfg.resp.ahi_max)
    } else {
        0.0
    };
    SubjectLatents {
        age,
        ahi,
        bpm: cfg.heart.base_bpm + cfg.heart.base_bpm_sd * normal(&mut r),
        breath_scale: 1.0 + 0.08 * normal(&mut r),
        resp_gain: 1.0 + 0.15 * normal(&mut r).clamp(-2.0, 2.0),
    }
}

fn hypnogram(cfg: &SyntheticConfig, record: usize, age: f64) -> Vec<SleepStage> {
    let mut m = cfg.stage_transitions;
    let n3_factor = (1.6 - age / 60.0).clamp(0.25, 1.5);
    let wake_factor = 0.6 + age / 80.0;
    for (i, row) in m.iter_mut().enumerate() {
        if i != SleepStage::N3.index() {
            row[SleepStage::N3.index()] *= n3_factor;
        }
        if i != SleepStage::Wake.index() {
            row[SleepStage::Wake.index()] *= wake_factor;
        }
        let off: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .sum();
        row[i] = (1.0 - off).max(0.0);
    }
    let mut r = rng::stream(cfg.seed, &[tag::HYPNOGRAM, record as u64]);
    let n = cfg.patches_per_record();
    let mut out = Vec::with_capacity(n);
    let mut s = 0usize;
    for _ in 0..n {
        out.push(SleepStage::ALL[s]);
        let u: f64 = r.gen();
        let mut acc = 0.0;
        let row = &m[s];
        let total: f64 = row.iter().sum();
        for (j, p) in row.iter().enumerate() {
            acc += p / total;
            if u < acc {
                s = j;
                break;
            }
        }
    }
    out
}

fn apnea_events(
    cfg: &SyntheticConfig,
    record: usize,
    ahi: f64,
    stages: &[SleepStage],
) -> Vec<Event> {
    let mut events = Vec::new();
    if ahi <= 0.0 {
        return events;
    }
    let rc = &cfg.resp;
    let mut r = rng::stream(cfg.seed, &[tag::EVENTS, record as u64]);
    let gap = Exp::new(ahi / 3600.0).expect("positive rate");
    let total = cfg.duration_s as f64;
    let mut t = 0.0;
    // Poisson arrivals over sleep time only: advance through the hypnogram,
    // skipping wake patches.
    loop {
        let mut need: f64 = gap.sample(&mut r);
        while need > 0.0 && t < total {
            let p = (t / DT) as usize;
            if p >= stages.len() {
                t = total;
                break;
            }
            let patch_end = (p + 1) as f64 * DT;
            if stages[p] == SleepStage::Wake {
                t = patch_end;
                continue;
            }
            let avail = patch_end - t;
            if need <= avail {
                t += need;
                need = 0.0;
            } else {
                need -= avail;
                t = patch_end;
            }
        }
        if t >= total {
            break;
        }
        let dur = r.gen_range(rc.event_duration_s[0]..=rc.event_duration_s[1]);
        let kind = if r.gen::<f64>() < rc.hypopnea_fraction {
            EventKind::Hypopnea
        } else if r.gen::<f64>() < rc.central_fraction {
            EventKind::Central
        } else {
            EventKind::Obstructive
        };
        let depth = r.gen_range(rc.desat_pct[0]..=rc.desat_pct[1])
            * if kind == EventKind::Hypopnea {
                0.6
            } else {
                1.0
            };
        let end = (t + dur).min(total);
        events.push(Event {
            start: t,
            end,
            kind,
            arousal_end: end + r.gen_range(3.0..10.0),
            desat_pct: depth,
        });
        // Recovery breathing before the next event can start.
        t = end + 5.0;
    }
    events
}

/// Events per hour of sleep in the record; 0 without sleep.
fn observed_ahi(events: usize, stages: &[SleepStage]) -> f64 {
    let sleep = stages.iter().filter(|&&s| s != SleepStage::Wake).count();
    if sleep == 0 {
        return 0.0;
    }
    events as f64 / (sleep as f64 * DT / 3600.0)
}

fn survival(
    cfg: &SyntheticConfig,
    record: usize,
    age: f64,
    ahi: f64,
    n3: f64,
) -> Vec<SurvivalOutcome> {
    let h = &cfg.hazard;
    let mut r = rng::stream(cfg.seed, &[tag::SURVIVAL, record as u64]);
    let z_age = (age - 55.0) / 20.0;
    let z_ahi = (ahi - 15.0) / 15.0;
    let z_n3 = (n3 - 0.12) / 0.08;
    OutcomeId::ALL
        .iter()
        .map(|&id| {
            let k = id.index();
            let rate = libm::exp(
                h.base_log_rate[k] + h.age[k] * z_age + h.ahi[k] * z_ahi + h.n3[k] * z_n3,
            );
            let t_event: f64 = Exp::new(rate).expect("positive rate").sample(&mut r);
            let t_censor = r.gen_range(h.censor_days[0]..=h.censor_days[1]);
            let (event, time) = if t_event <= t_censor {
                (true, t_event.max(1e-3))
            } else {
                (false, t_censor)
            };
            SurvivalOutcome {
                outcome_id: id,
                event,
                time_days: time,
            }
        })
        .collect()
}

/// Lazily rendered synthetic cohort in manifest order.
pub struct SyntheticCohort {
    config: SyntheticConfig,
    layout: ChannelLayout,
    metas: Vec<RecordMeta>,
    plans: Vec<RecordPlan>,
    dft: RealDft,
}

impl SyntheticCohort {
    pub fn new(config: SyntheticConfig) -> Result<Self> {
        config.validate()?;
        let layout = ChannelLayout::canonical();
        let patches = config.patches_per_record();
        let mut metas = Vec::with_capacity(config.n_records());
        let mut plans = Vec::with_capacity(config.n_records());
        for subject in 0..config.n_subjects {
            let lat = subject_latents(&config, subject);
            for k in 0..config.records_per_subject {
                let record = subject * config.records_per_subject + k;
                let stages = hypnogram(&config, record, lat.age);
                let events = apnea_events(&config, record, lat.ahi, &stages);
                let labels = LabelSet {
                    survival: Vec::new(),
                    ahi: observed_ahi(events.len(), &stages),
                    age_years: lat.age,
                    hypnogram: stages,
                };
                let n3 = labels.fraction_of(SleepStage::N3);
                let labels = LabelSet {
                    survival: survival(&config, record, lat.age, lat.ahi, n3),
                    ..labels
                };
                let plan = rate_plan(
                    &config,
                    record,
                    subject,
                    &lat,
                    &labels.hypnogram,
                    events,
                    patches,
                );
                metas.push(RecordMeta {
                    record_id: format!("sub{subject:05}_rec{k}"),
                    subject_id: format!("sub{subject:05}"),
                    n_samples: patches * PATCH_LEN,
                    labels,
                });
                plans.push(plan);
            }
        }
        Ok(Self {
            config,
            layout,
            metas,
            plans,
            dft: RealDft::new(PATCH_LEN),
        })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    pub fn subject_index(&self, record: usize) -> usize {
        self.plans[record].subject
    }

    /// Number of apnea/hypopnea events placed in a record.
    pub fn event_count(&self, record: usize) -> usize {
        self.plans[record].events.len()
    }

    /// Manifest with subject-level splits at the reference ratios; cohorts
    /// with fewer than three subjects are all training data.
    pub fn manifest(&self) -> Result<RecordManifest> {
        let base = RecordManifest {
            entries: self
                .metas
                .iter()
                .map(|m| ManifestEntry {
                    record_id: m.record_id.clone(),
                    subject_id: m.subject_id.clone(),
                    path: format!("{}.f32", m.record_id),
                    split: Split::Train,
                })
                .collect(),
            seed: self.config.seed,
        };
        if self.config.n_subjects < 3 {
            return Ok(base);
        }
        assign_splits(
            &base,
            SplitRatios::REFERENCE,
            rng::derive_seed(self.config.seed, &[tag::SPLIT]),
        )
    }

    /// Renders patch `p` of `record` as channel-major `[16 × 640]`.
    pub fn render_patch(&self, record: usize, p: usize) -> Vec<f32> {
        render_patch(self, record, p)
    }
}

fn rate_plan(
    cfg: &SyntheticConfig,
    record: usize,
    subject: usize,
    lat: &SubjectLatents,
    stages: &[SleepStage],
    events: Vec<Event>,
    patches: usize,
) -> RecordPlan {
    let mut r = rng::stream(cfg.seed, &[tag::PATCH, record as u64, u64::MAX]);
    let mut breath_phase = Vec::with_capacity(patches);
    let mut breath_hz = Vec::with_capacity(patches);
    let mut beat_phase = Vec::with_capacity(patches);
    let mut beat_hz = Vec::with_capacity(patches);
    let (mut phi, mut psi) = (r.gen::<f64>(), r.gen::<f64>());
    let mut ev = 0usize;
    for (p, s) in stages.iter().enumerate() {
        let s = s.index();
        let t0 = p as f64 * DT;
        let jitter = if s == SleepStage::N3.index() {
            0.01
        } else {
            0.04
        };
        let f_b =
            (cfg.resp.breath_hz[s] * lat.breath_scale * (1.0 + jitter * normal(&mut r))).max(0.05);
        while ev < events.len() && events[ev].arousal_end < t0 {
            ev += 1;
        }
        let aroused = events[ev..]
            .iter()
            .take_while(|e| e.end < t0 + DT)
            .any(|e| e.arousal_end > t0);
        let bpm = lat.bpm
            + cfg.heart.stage_offset_bpm[s]
            + 1.5 * normal(&mut r)
            + if aroused { cfg.heart.arousal_bpm } else { 0.0 };
        let f_h = (bpm / 60.0).clamp(0.5, 3.5);
        breath_phase.push(phi);
        breath_hz.push(f_b);
        beat_phase.push(psi);
        beat_hz.push(f_h);
        phi = fract(phi + f_b * DT);
        psi = fract(psi + f_h * DT);
    }
    RecordPlan {
        subject,
        age: lat.age,
        resp_gain: lat.resp_gain,
        events,
        breath_phase,
        breath_hz,
        beat_phase,
        beat_hz,
    }
}

/// BAS channel gains per band (delta, theta, alpha, sigma, beta), in
/// canonical channel order.
const BAS_GAINS: [[f64; 5]; 8] = [
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [0.8, 0.9, 1.8, 0.8, 0.9],
    [0.8, 0.9, 1.8, 0.8, 0.9],
    [0.5, 0.5, 0.5, 0.5, 0.5],
    [0.5, 0.5, 0.5, 0.5, 0.5],
    [0.6, 0.6, 0.6, 0.6, 1.0],
    [0.6, 0.6, 0.6, 0.6, 1.0],
];

const CH_E1: usize = 4;
const CH_E2: usize = 5;
const CH_FP1: usize = 6;
const CH_FP2: usize = 7;
const CH_CHEST: usize = 8;
const CH_SPO2: usize = 9;
const CH_ABD: usize = 10;
const CH_NASAL: usize = 11;
const CH_ORAL: usize = 12;
const CH_EKG: usize = 13;
const CH_CHIN: usize = 14;
const CH_LEG: usize = 15;

fn fract(x: f64) -> f64 {
    x - libm::floor(x)
}

fn gauss(x: f64, sd: f64) -> f64 {
    libm::exp(-0.5 * (x / sd) * (x / sd))
}

/// Band-limited noise for one BAS channel, shaped in the frequency domain.
fn bas_channel(
    dft: &RealDft,
    r: &mut Rng,
    cfg: &BasParams,
    stage: usize,
    gains: &[f64; 5],
    age: f64,
) -> Vec<f64> {
    let n = PATCH_LEN;
    let df = FS / n as f64;
    let slope = cfg.age_slope * (age - 50.0) / 50.0;
    let scale = n as f64 * libm::sqrt(df) / 2.0;
    let mut bins = vec![Complex64::new(0.0, 0.0); n / 2 + 1];
    for (k, bin) in bins.iter_mut().enumerate().take(n / 2).skip(1) {
        let f = k as f64 * df;
        let mut density = cfg.background / libm::sqrt(f.max(0.5) * 4.0);
        for (b, &(lo, hi)) in BAS_BANDS.iter().enumerate() {
            if f >= lo && f < hi {
                density += cfg.stage_bands[stage][b] * gains[b] / libm::sqrt(hi - lo);
            }
        }
        density *= libm::pow(f / 8.0, slope);
        *bin = Complex64::new(normal(r), normal(r)) * (density * scale);
    }
    dft.inverse(&bins)
}

fn render_patch(c: &SyntheticCohort, record: usize, p: usize) -> Vec<f32> {
    let cfg = &c.config;
    let plan = &c.plans[record];
    let stage = c.metas[record].labels.hypnogram[p].index();
    let mut r = rng::stream(cfg.seed, &[tag::PATCH, record as u64, p as u64]);
    let n = PATCH_LEN;
    let t0 = p as f64 * DT;
    let time = |i: usize| t0 + i as f64 / FS;
    let mut out = vec![0.0f64; 16 * n];

    // Events that can touch this patch (dips trail events by up to ~35 s).
    let first = plan
        .events
        .partition_point(|e| e.reach().max(e.arousal_end) + 1.0 < t0);
    let events: Vec<Event> = plan.events[first..]
        .iter()
        .take_while(|e| e.start - 1.0 < t0 + DT)
        .copied()
        .collect();
    let arousal = |t: f64| {
        events
            .iter()
            .map(|e| window(t, e.end, e.arousal_end))
            .fold(0.0, f64::max)
    };

    // BAS.
    for ch in 0..8 {
        let x = bas_channel(&c.dft, &mut r, &cfg.bas, stage, &BAS_GAINS[ch], plan.age);
        out[ch * n..(ch + 1) * n].copy_from_slice(&x);
    }
    if !events.is_empty() {
        let phase = r.gen::<f64>() * 2.0 * PI;
        for i in 0..n {
            let a = arousal(time(i));
            if a > 0.0 {
                let burst = 0.8 * a * libm::sin(2.0 * PI * 10.0 * i as f64 / FS + phase);
                for ch in 0..4 {
                    out[ch * n + i] += burst;
                }
            }
        }
    }
    let mut eye = vec![0.0; n];
    let mut blink = vec![0.0; n];
    match SleepStage::ALL[stage] {
        SleepStage::Rem => {
            let count = poisson(&mut r, 0.6 * DT);
            for _ in 0..count {
                let tau = r.gen::<f64>() * DT;
                let amp = if r.gen::<bool>() { 0.8 } else { -0.8 };
                for (i, v) in eye.iter_mut().enumerate() {
                    let d = i as f64 / FS - tau;
                    if d > -0.05 {
                        *v += amp
                            * libm::exp(-d.max(0.0) / 0.4)
                            * (1.0 - libm::exp(-(d + 0.05) / 0.02));
                    }
                }
            }
        }
        SleepStage::Wake => {
            for _ in 0..poisson(&mut r, 0.3 * DT) {
                let tau = r.gen::<f64>() * DT;
                for (i, v) in blink.iter_mut().enumerate() {
                    *v += 1.5 * gauss(i as f64 / FS - tau, 0.1);
                }
            }
            for _ in 0..poisson(&mut r, 0.3 * DT) {
                let tau = r.gen::<f64>() * DT;
                let amp = 0.5 * normal(&mut r);
                for (i, v) in eye.iter_mut().enumerate() {
                    let d = i as f64 / FS - tau;
                    if d > 0.0 {
                        *v += amp * libm::exp(-d / 0.6);
                    }
                }
            }
        }
        SleepStage::N1 => {
            let phase = r.gen::<f64>() * 2.0 * PI;
            for (i, v) in eye.iter_mut().enumerate() {
                *v = 0.6 * libm::sin(2.0 * PI * 0.25 * i as f64 / FS + phase);
            }
        }
        _ => {}
    }
    for i in 0..n {
        out[CH_E1 * n + i] += eye[i] + 0.4 * blink[i];
        out[CH_E2 * n + i] += -eye[i] + 0.4 * blink[i];
        out[CH_FP1 * n + i] += 0.2 * eye[i] + blink[i];
        out[CH_FP2 * n + i] += -0.2 * eye[i] + blink[i];
    }

    // RESP.
    let rc = &cfg.resp;
    let amp = plan.resp_gain
        * match SleepStage::ALL[stage] {
            SleepStage::Rem => 0.8 * (1.0 + 0.25 * normal(&mut r)).max(0.3),
            SleepStage::Wake => 1.0 + 0.2 * normal(&mut r).abs(),
            SleepStage::N3 => 1.1,
            _ => 1.0,
        };
    let (phi0, f_b) = (plan.breath_phase[p], plan.breath_hz[p]);
    for i in 0..n {
        let t = time(i);
        let phi = 2.0 * PI * (phi0 + f_b * i as f64 / FS);
        let flow = libm::sin(phi) + 0.25 * libm::sin(2.0 * phi + 0.6);
        let effort = libm::sin(phi - 0.3);
        let (mut env_flow, mut env_effort, mut paradox) = (1.0f64, 1.0f64, 0.0f64);
        let mut dip = 0.0;
        for e in &events {
            dip += e.dip(t);
            let w = window(t, e.start, e.end);
            if w == 0.0 {
                continue;
            }
            let (flow_f, effort_f) = match e.kind {
                EventKind::Obstructive => (rc.airflow_reduction, 1.0),
                EventKind::Central => (rc.airflow_reduction, rc.airflow_reduction),
                EventKind::Hypopnea => (0.5, 0.7),
            };
            env_flow = env_flow.min(1.0 - w * (1.0 - flow_f));
            env_effort = env_effort.min(1.0 - w * (1.0 - effort_f));
            if e.kind == EventKind::Obstructive {
                paradox = paradox.max(w);
            }
        }
        out[CH_NASAL * n + i] = 0.9 * amp * flow * env_flow + 0.05 * normal(&mut r);
        out[CH_ORAL * n + i] = 0.4 * amp * flow * env_flow + 0.05 * normal(&mut r);
        out[CH_CHEST * n + i] = amp * effort * env_effort + 0.03 * normal(&mut r);
        out[CH_ABD * n + i] =
            0.8 * amp * effort * env_effort * (1.0 - 2.0 * paradox) + 0.03 * normal(&mut r);
        out[CH_SPO2 * n + i] = -dip / 3.0 + 0.02 * normal(&mut r);
    }

    // EKG.
    let (psi0, f_h) = (plan.beat_phase[p], plan.beat_hz[p]);
    let first_beat = libm::ceil(psi0 - 0.6 * f_h) as i64;
    let last_beat = libm::floor(psi0 + (DT + 0.3) * f_h) as i64;
    for i in 0..n {
        let t = i as f64 / FS;
        let mut v = 0.0;
        for m in first_beat..=last_beat {
            let d = t - (m as f64 - psi0) / f_h;
            if d.abs() > 0.6 {
                continue;
            }
            v += 0.15 * gauss(d + 0.16, 0.025) - 0.15 * gauss(d + 0.02, 0.008)
                + 1.2 * gauss(d, 0.012)
                - 0.25 * gauss(d - 0.025, 0.01)
                + 0.35 * gauss(d - 0.25, 0.045);
        }
        let wander = 0.1 * libm::sin(2.0 * PI * (phi0 + f_b * t));
        out[CH_EKG * n + i] = v + wander + 0.03 * normal(&mut r);
    }

    // EMG.
    let tone = cfg.emg.chin_tone[stage];
    let mut twitch = vec![0.0; n];
    if SleepStage::ALL[stage] == SleepStage::Rem {
        for _ in 0..poisson(&mut r, 0.5 * DT) {
            let tau = r.gen::<f64>() * DT;
            for (i, v) in twitch.iter_mut().enumerate() {
                *v += gauss(i as f64 / FS - tau, 0.05);
            }
        }
    }
    let mut leg = vec![0.0; n];
    let mut bursts = poisson(&mut r, cfg.emg.leg_burst_per_min[stage] * DT / 60.0);
    let mut starts: Vec<f64> = (0..bursts).map(|_| r.gen::<f64>() * DT).collect();
    for e in &events {
        if e.end >= t0 && e.end < t0 + DT && r.gen::<f64>() < 0.5 {
            starts.push(e.end - t0);
            bursts += 1;
        }
    }
    for &s in starts.iter().take(bursts) {
        let dur = r.gen_range(0.5..3.0);
        let a = r.gen_range(0.8..1.5);
        for (i, v) in leg.iter_mut().enumerate() {
            *v = f64::max(*v, a * window(i as f64 / FS, s, s + dur));
        }
    }
    for i in 0..n {
        let a = arousal(time(i));
        out[CH_CHIN * n + i] = (0.5 * tone + twitch[i] + 0.8 * a) * normal(&mut r);
        out[CH_LEG * n + i] = (0.05 + leg[i]) * normal(&mut r);
    }
    out.into_iter().map(|v| v as f32).collect()
}

/// Knuth's multiplication method; fine for the small means used here.
fn poisson(r: &mut Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = libm::exp(-mean);
    let mut k = 0;
    let mut prod: f64 = r.gen();
    while prod > limit {
        k += 1;
        prod *= r.gen::<f64>();
    }
    k
}

impl RecordSource for SyntheticCohort {
    fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    fn len(&self) -> usize {
        self.metas.len()
    }

    fn meta(&self, index: usize) -> &RecordMeta {
        &self.metas[index]
    }

    fn read_window(&self, index: usize, start: usize, len: usize) -> Result<Vec<f32>> {
        let n = self.metas[index].n_samples;
        if start + len > n {
            return Err(Error::Source(format!(
                "window {start}+{len} beyond {n} samples of {}",
                self.metas[index].record_id
            )));
        }
        let channels = self.layout.len();
        let mut out = vec![0.0f32; channels * len];
        if len == 0 {
            return Ok(out);
        }
        let first = start / PATCH_LEN;
        let last = (start + len - 1) / PATCH_LEN;
        for p in first..=last {
            let patch = render_patch(self, index, p);
            let p0 = p * PATCH_LEN;
            let lo = start.max(p0);
            let hi = (start + len).min(p0 + PATCH_LEN);
            for ch in 0..channels {
                let src = &patch[ch * PATCH_LEN + (lo - p0)..ch * PATCH_LEN + (hi - p0)];
                out[ch * len + (lo - start)..ch * len + (hi - start)].copy_from_slice(src);
            }
        }
        Ok(out)
    }
}

/// Builds the cohort and its split manifest.
pub fn generate_synthetic_cohort(
    config: SyntheticConfig,
) -> Result<(RecordManifest, SyntheticCohort)> {
    let cohort = SyntheticCohort::new(config)?;
    let manifest = cohort.manifest()?;
    Ok((manifest, cohort))
}

/// Record ids of a cohort, for error messages and reports.
pub fn record_ids<S: RecordSource + ?Sized>(source: &S) -> Vec<String> {
    (0..source.len())
        .map(|i| source.meta(i).record_id.clone())
        .collect()
}
