//! TOML scenario files.
//!
//! A file picks a preset (`experiment` or `simulation`) and overrides any
//! part of it. Tables merge key by key; arrays and scalars replace. Unknown
//! keys are errors.
//!
//! ```toml
//! strategy = "flc"
//! preset = "experiment"
//! seed = 7
//!
//! [timeline]
//! torque_final = 10.0
//!
//! [schedule]
//! transition_time = 3.0
//! segments = [{ start = 0.0, profile = "dry" }, { start = 35.0, profile = "wet" }]
//!
//! [profiles.dry]
//! c1 = 0.9
//! c2 = 9.0
//! c3 = 0.35
//!
//! [strategies.pso]
//! np = 4
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adhesion::{builtin_profile, AdhesionCurveParams, ProfileSchedule, ScheduleSegment};
use crate::error::{ConfigError, Error, Result, ValidationError};
use crate::estimation::ObserverConfig;
use crate::plant::{RigParameters, SensorConfig};
use crate::scenario::{Scenario, Timeline, TimingConfig};
use crate::slip_control::SlipControlConfig;
use crate::strategies::{StrategyConfig, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Experiment,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub start: f64,
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default)]
    pub transition_time: f64,
    pub segments: Vec<SegmentFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// On-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub strategy: StrategyKind,
    #[serde(default)]
    pub preset: Preset,
    #[serde(default)]
    pub seed: u64,
    pub timeline: Timeline,
    pub schedule: ScheduleFile,
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileFile>,
    #[serde(default)]
    pub rig: RigParameters,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub observer: ObserverConfig,
    #[serde(default)]
    pub slip_control: SlipControlConfig,
    #[serde(default)]
    pub strategies: StrategyConfig,
}

/// Shape used only to get located diagnostics for the user's own text:
/// every top-level entry optional, nested tables checked field by field.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct CheckFile {
    name: Option<String>,
    strategy: Option<StrategyKind>,
    preset: Option<Preset>,
    seed: Option<u64>,
    timeline: Option<TimelineCheck>,
    schedule: Option<ScheduleCheck>,
    profiles: Option<BTreeMap<String, ProfileFile>>,
    rig: Option<RigParameters>,
    timing: Option<TimingConfig>,
    sensor: Option<SensorConfig>,
    observer: Option<ObserverConfig>,
    slip_control: Option<SlipControlConfig>,
    strategies: Option<StrategyConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct TimelineCheck {
    roller_rpm: Option<f64>,
    torque_final: Option<f64>,
    torque_gradient: Option<f64>,
    events: Option<Vec<crate::scenario::Event>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ScheduleCheck {
    transition_time: Option<f64>,
    segments: Option<Vec<SegmentFile>>,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario, preset: Preset) -> Self {
        let mut profiles = BTreeMap::new();
        let segments = s
            .schedule
            .segments()
            .iter()
            .map(|seg| {
                let p = &seg.params;
                if builtin_profile(&p.label).as_ref() != Some(p) {
                    profiles.insert(
                        p.label.clone(),
                        ProfileFile {
                            c1: p.c1,
                            c2: p.c2,
                            c3: p.c3,
                        },
                    );
                }
                SegmentFile {
                    start: seg.start_time,
                    profile: p.label.clone(),
                }
            })
            .collect();
        Self {
            name: Some(s.name.clone()),
            strategy: s.strategy,
            preset,
            seed: s.seed,
            timeline: s.timeline.clone(),
            schedule: ScheduleFile {
                transition_time: s.schedule.transition_time(),
                segments,
            },
            profiles,
            rig: s.rig.clone(),
            timing: s.timing.clone(),
            sensor: s.sensor.clone(),
            observer: s.observer.clone(),
            slip_control: s.slip_control.clone(),
            strategies: s.strategies.clone(),
        }
    }

    /// Resolve profile names and validate everything, reporting every
    /// violation at once.
    pub fn into_scenario(self) -> std::result::Result<Scenario, ValidationError> {
        let mut err = ValidationError::default();
        let mut segments = Vec::new();
        for (i, seg) in self.schedule.segments.iter().enumerate() {
            match resolve_profile(&seg.profile, &self.profiles) {
                Some(params) => segments.push(ScheduleSegment {
                    start_time: seg.start,
                    params,
                }),
                None => err.push(
                    format!("schedule.segments[{i}].profile"),
                    format!("unknown profile `{}`", seg.profile),
                ),
            }
        }
        let schedule = match ProfileSchedule::new(segments, self.schedule.transition_time) {
            Ok(s) => Some(s),
            Err(e) => {
                err.extend(e);
                None
            }
        };
        let Some(schedule) = schedule.filter(|_| err.is_empty()) else {
            return Err(err);
        };
        let scenario = Scenario {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            timeline: self.timeline,
            schedule,
            rig: self.rig,
            timing: self.timing,
            sensor: self.sensor,
            observer: self.observer,
            slip_control: self.slip_control,
            strategy: self.strategy,
            strategies: self.strategies,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Profile by label: the file's `[profiles]` table first, then built-ins.
pub fn resolve_profile(
    label: &str,
    profiles: &BTreeMap<String, ProfileFile>,
) -> Option<AdhesionCurveParams> {
    if let Some(p) = profiles.get(label) {
        return Some(AdhesionCurveParams::new(p.c1, p.c2, p.c3, label));
    }
    builtin_profile(label)
}

fn preset_scenario(preset: Preset, strategy: StrategyKind) -> Scenario {
    match preset {
        Preset::Experiment => Scenario::experiment(strategy),
        Preset::Simulation => Scenario::simulation(strategy),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn located(text: &str, e: &toml::de::Error) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let (l, c) = line_col(text, span.start);
            (Some(l), Some(c))
        }
        None => (None, None),
    };
    let message = e.message().trim().to_string();
    ConfigError {
        line,
        column,
        field: backticked(&message),
        message,
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parse and validate a scenario file.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let user: toml::Table = toml::from_str(text).map_err(|e| located(text, &e))?;
    toml::from_str::<CheckFile>(text).map_err(|e| located(text, &e))?;

    let strategy = match user.get("strategy") {
        Some(toml::Value::String(s)) => s
            .parse::<StrategyKind>()
            .map_err(|m| ConfigError::field("strategy", m))?,
        Some(_) => return Err(ConfigError::field("strategy", "must be a string").into()),
        None => {
            return Err(ConfigError::field("strategy", "missing required key `strategy`").into())
        }
    };
    let preset = match user.get("preset") {
        Some(v) => v
            .clone()
            .try_into::<Preset>()
            .map_err(|e| ConfigError::field("preset", e.to_string().trim().to_string()))?,
        None => Preset::default(),
    };
    let base = ScenarioFile::from_scenario(&preset_scenario(preset, strategy), preset);
    let mut merged = toml::Table::try_from(&base)
        .map_err(|e| ConfigError::field("<preset>", e.to_string()))?;
    // A file that lists its own segments replaces the preset's profiles.
    if user
        .get("schedule")
        .and_then(|s| s.get("segments"))
        .is_some()
    {
        merged.remove("profiles");
    }
    merge(&mut merged, user);
    let file: ScenarioFile = merged.try_into().map_err(|e: toml::de::Error| ConfigError {
        line: None,
        column: None,
        field: backticked(e.message()),
        message: e.message().trim().to_string(),
    })?;
    Ok(file.into_scenario()?)
}

/// Render a scenario back to TOML.
pub fn to_toml(s: &Scenario, preset: Preset) -> Result<String> {
    toml::to_string_pretty(&ScenarioFile::from_scenario(s, preset))
        .map_err(|e| Error::Config(ConfigError::field("<scenario>", e.to_string())))
}
