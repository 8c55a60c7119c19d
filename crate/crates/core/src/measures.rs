//! Exertion comparison measures: burned calories (heart-rate regression and
//! MET variants), RPE-to-heart-rate comparison, cross-participant
//! normalization, and heart-rate-weighted muscle work.

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

/// Subject parameters feeding the calorie and heart-rate computations.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SubjectProfile {
    /// Age in years, 10..=100.
    pub age: f64,
    /// Body mass in kg, 20..=250.
    pub mass_kg: f64,
    #[serde(default = "default_gender")]
    pub gender: Gender,
    #[serde(default)]
    pub resting_hr: Option<f64>,
    /// Stored for completeness; no bundled formula consumes it.
    #[serde(default)]
    pub vo2max: Option<f64>,
}

fn default_gender() -> Gender {
    Gender::Unspecified
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<(), MeasuresError> {
        if !(10.0..=100.0).contains(&self.age) {
            return Err(MeasuresError::BadProfile(format!("age {} outside 10..=100", self.age)));
        }
        if !(20.0..=250.0).contains(&self.mass_kg) {
            return Err(MeasuresError::BadProfile(format!(
                "mass {} outside 20..=250",
                self.mass_kg
            )));
        }
        Ok(())
    }
}

/// Timestamped heart-rate samples with derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct HeartRateSeries {
    pub samples: Vec<(u64, f64)>,
}

impl HeartRateSeries {
    /// Builds a series, validating monotonic timestamps and the plausible
    /// 25..=250 bpm range.
    pub fn new(samples: Vec<(u64, f64)>) -> Result<Self, MeasuresError> {
        let mut last: Option<u64> = None;
        for &(t, bpm) in &samples {
            if !(25.0..=250.0).contains(&bpm) {
                return Err(MeasuresError::BadHeartRate(bpm));
            }
            if let Some(prev) = last {
                if t <= prev {
                    return Err(MeasuresError::NonMonotonicHeartRate(t));
                }
            }
            last = Some(t);
        }
        Ok(HeartRateSeries { samples })
    }

    /// Parses the `t_ms,bpm` CSV form (header optional).
    pub fn from_csv(text: &str) -> Result<Self, MeasuresError> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("t_ms")) {
                continue;
            }
            let mut parts = line.split(',');
            let (t, bpm) = (parts.next(), parts.next());
            let parse = |s: Option<&str>| s.map(str::trim).and_then(|s| s.parse::<f64>().ok());
            match (parse(t), parse(bpm)) {
                (Some(t), Some(bpm)) if t >= 0.0 => samples.push((t as u64, bpm)),
                _ => return Err(MeasuresError::BadHeartRateCsv(i + 1)),
            }
        }
        HeartRateSeries::new(samples)
    }

    pub fn avg_hr(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|s| s.1).sum::<f64>() / self.samples.len() as f64)
    }

    pub fn peak_hr(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.1).fold(None, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.max(v)))
        })
    }
}

/// Rating of perceived exertion on the 1..=10 category scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RpeRating(u8);

impl RpeRating {
    pub fn new(value: u8) -> Result<Self, MeasuresError> {
        if (1..=10).contains(&value) {
            Ok(RpeRating(value))
        } else {
            Err(MeasuresError::BadRpe(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Scale label shown alongside the numeric rating.
    pub fn label(self) -> &'static str {
        match self.0 {
            1 => "very light activity",
            2 | 3 => "light activity",
            4..=6 => "moderate activity",
            7 | 8 => "vigorous activity",
            9 => "very hard activity",
            _ => "max effort activity",
        }
    }
}

/// Three-way comparison of measured heart rate against the RPE-predicted
/// value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrVerdict {
    Lower,
    Equal,
    Higher,
}

impl HrVerdict {
    pub fn label(self) -> &'static str {
        match self {
            HrVerdict::Lower => "lower",
            HrVerdict::Equal => "equal",
            HrVerdict::Higher => "higher",
        }
    }
}

/// Full per-session measure set.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSet {
    pub bc_kcal: f64,
    pub bc_method: &'static str,
    pub rpe: u8,
    pub rpe_predicted_hr: f64,
    pub verdict: HrVerdict,
    pub mw_total: f64,
    pub av_hr: f64,
    pub pk_hr: f64,
    /// Raw heart-rate-weighted muscle work (mw_total * av_hr); normalization
    /// needs a cohort, see [`hr_weighted_mw`].
    pub h_mw: f64,
}

#[derive(Debug, Error)]
pub enum MeasuresError {
    #[error("gender must be male or female for the heart-rate regression; use the MET variant")]
    GenderRequired,
    #[error("duration must be non-negative, got {0}")]
    NegativeDuration(f64),
    #[error("heart rate {0} bpm outside 25..=250")]
    BadHeartRate(f64),
    #[error("non-monotonic heart-rate timestamp {0}")]
    NonMonotonicHeartRate(u64),
    #[error("bad heart-rate CSV at line {0}")]
    BadHeartRateCsv(usize),
    #[error("invalid subject profile: {0}")]
    BadProfile(String),
    #[error("RPE {0} outside 1..=10")]
    BadRpe(u8),
    #[error("need at least two values to normalize")]
    TooFewValues,
    #[error("participant lists must have matching lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("heart-rate series is empty")]
    EmptyHeartRate,
}

/// Burned calories from the gender-specific heart-rate regressions
/// (per-minute kcal times activity minutes; negative rates clamp to zero).
pub fn burned_calories_hr(
    profile: &SubjectProfile,
    hr: &HeartRateSeries,
    minutes: f64,
) -> Result<f64, MeasuresError> {
    if minutes < 0.0 {
        return Err(MeasuresError::NegativeDuration(minutes));
    }
    let avg = hr.avg_hr().ok_or(MeasuresError::EmptyHeartRate)?;
    let per_minute = match profile.gender {
        Gender::Male => {
            (-55.0969 + 0.6309 * avg + 0.1988 * profile.mass_kg + 0.2017 * profile.age) / 4.184
        }
        Gender::Female => {
            (-20.4022 + 0.4472 * avg - 0.1263 * profile.mass_kg + 0.074 * profile.age) / 4.184
        }
        Gender::Unspecified => return Err(MeasuresError::GenderRequired),
    };
    Ok(per_minute.max(0.0) * minutes)
}

/// Burned calories from a MET value: `met * 3.5 * mass / 200 * minutes`
/// (1 MET is 3.5 ml O2 per kg per minute).
pub fn burned_calories_met(met: f64, mass_kg: f64, minutes: f64) -> f64 {
    met * 3.5 * mass_kg / 200.0 * minutes
}

/// Heart rate predicted from an RPE rating: `(220 - age)` max heart rate
/// scaled by `0.55 + 0.045 * rpe`, so RPE 10 maps to 100% of HRmax.
pub fn rpe_predicted_hr(rpe: RpeRating, age: f64) -> f64 {
    let hr_max = 220.0 - age;
    hr_max * (0.55 + 0.045 * rpe.value() as f64)
}

/// Compares the measured average heart rate against the RPE prediction.
/// Equal within a band of 5% of HRmax; otherwise the verdict says where the
/// measured value lies relative to the prediction.
pub fn rpe_hr_compare(
    rpe: RpeRating,
    profile: &SubjectProfile,
    measured_avg_hr: f64,
) -> (HrVerdict, f64) {
    let hr_max = 220.0 - profile.age;
    let predicted = rpe_predicted_hr(rpe, profile.age);
    let band = 0.05 * hr_max;
    let verdict = if (measured_avg_hr - predicted).abs() <= band {
        HrVerdict::Equal
    } else if measured_avg_hr > predicted {
        HrVerdict::Higher
    } else {
        HrVerdict::Lower
    };
    (verdict, predicted)
}

/// Min-max normalization across participants onto [0, 1]. A degenerate
/// all-equal cohort maps to 0.5 everywhere (with a warning).
pub fn normalize_across(values: &[f64]) -> Result<Vec<f64>, MeasuresError> {
    if values.len() < 2 {
        return Err(MeasuresError::TooFewValues);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= 0.0 {
        log::warn!("normalize_across: all {} values equal ({min}); returning 0.5", values.len());
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Heart-rate-weighted muscle work per participant: `mw * av_hr`, then
/// min-max normalized across the cohort.
pub fn hr_weighted_mw(mw_total: &[f64], av_hr: &[f64]) -> Result<Vec<f64>, MeasuresError> {
    if mw_total.len() != av_hr.len() {
        return Err(MeasuresError::LengthMismatch(mw_total.len(), av_hr.len()));
    }
    let weighted: Vec<f64> = mw_total.iter().zip(av_hr.iter()).map(|(m, h)| m * h).collect();
    normalize_across(&weighted)
}
