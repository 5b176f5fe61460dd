//! Plain key=value configuration files for engine, mission and fault
//! parameters. `#` starts a comment; unknown keys are rejected.

use thiserror::Error;

use crate::engine::EngineConfig;
use crate::mission::{OrbitProfile, Pass, PowerModel};
use crate::Real;

#[derive(Debug, Clone)]
pub struct FaultSettings {
    pub enabled: bool,
    pub beta: Real,
    pub eta: Real,
    /// Falls back to the run seed when unset.
    pub seed: Option<u64>,
    pub paper_literal_rule: bool,
}

impl Default for FaultSettings {
    fn default() -> FaultSettings {
        FaultSettings {
            enabled: false,
            beta: 1.2,
            eta: 2.0e7,
            seed: None,
            paper_literal_rule: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimConfig {
    pub engine: EngineConfig,
    pub orbit: OrbitProfile,
    pub power: PowerModel<Real>,
    pub fault: FaultSettings,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let mut passes_overridden = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError {
            line,
            message: "expected `key = value`".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |message: String| ConfigError { line, message };
        let num = |v: &str| -> Result<Real, ConfigError> {
            v.parse().map_err(|_| bad(format!("invalid number `{v}`")))
        };
        let int = |v: &str| -> Result<u64, ConfigError> {
            v.parse().map_err(|_| bad(format!("invalid integer `{v}`")))
        };
        let boolean = |v: &str| -> Result<bool, ConfigError> {
            v.parse().map_err(|_| bad(format!("invalid boolean `{v}`")))
        };
        match key {
            "engine.dt" => {
                let dt = int(value)?;
                if dt == 0 {
                    return Err(bad("engine.dt must be positive".into()));
                }
                cfg.engine.dt = dt;
            }
            "engine.livelock_cap" => cfg.engine.livelock_cap = int(value)? as usize,
            "mission.period" => cfg.orbit.period = int(value)?,
            "mission.eclipse_fraction" => {
                let f = num(value)?;
                if !(0.0..=1.0).contains(&f) {
                    return Err(bad("eclipse fraction must be in [0, 1]".into()));
                }
                cfg.orbit.eclipse_fraction = f;
            }
            "mission.pass" => {
                let (start, duration) = value
                    .split_once(':')
                    .ok_or_else(|| bad("expected `start:duration`".to_string()))?;
                let pass = Pass { start: int(start.trim())?, duration: int(duration.trim())? };
                if !passes_overridden {
                    cfg.orbit.passes.clear();
                    passes_overridden = true;
                }
                cfg.orbit.passes.push(pass);
            }
            "mission.capacity_wh" => cfg.power.capacity_wh = num(value)?,
            "mission.generation_w" => cfg.power.generation_w = num(value)?,
            _ if key.starts_with("mission.load.") => {
                let name = key.trim_start_matches("mission.load.").to_string();
                cfg.power.loads.insert(name, num(value)?);
            }
            "fault.enabled" => cfg.fault.enabled = boolean(value)?,
            "fault.beta" => cfg.fault.beta = num(value)?,
            "fault.eta" => cfg.fault.eta = num(value)?,
            "fault.seed" => cfg.fault.seed = Some(int(value)?),
            "fault.paper_literal_rule" => cfg.fault.paper_literal_rule = boolean(value)?,
            _ => return Err(bad(format!("unknown key `{key}`"))),
        }
    }
    for pass in &cfg.orbit.passes {
        if pass.duration >= cfg.orbit.period {
            return Err(ConfigError {
                line: 0,
                message: "pass duration must be shorter than the orbit period".into(),
            });
        }
    }
    Ok(cfg)
}
