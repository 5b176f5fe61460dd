//! The shipped CubeSat reference mission: orbit/visibility profile, power
//! budget and battery dynamics, and the packaged model and plan assets.

use std::collections::BTreeMap;

use crate::engine::{Event, EventOrigin};
use crate::{Real, Scalar};

/// Periodic sun/eclipse cycle and ground-station visibility windows.
/// Visibility is modelled as fixed windows per orbit, not orbital mechanics.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitProfile {
    /// Orbit period in simulated seconds.
    pub period: u64,
    /// Fraction of the orbit spent in eclipse, in [0, 1]. The sun window is
    /// the first (1 - fraction) of each orbit.
    pub eclipse_fraction: Real,
    /// Ground-station passes as (start offset mod period, duration).
    pub passes: Vec<Pass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pass {
    pub start: u64,
    pub duration: u64,
}

impl Default for OrbitProfile {
    fn default() -> OrbitProfile {
        OrbitProfile {
            period: 5400,
            eclipse_fraction: 1.0 / 3.0,
            passes: vec![Pass { start: 0, duration: 600 }],
        }
    }
}

impl OrbitProfile {
    pub fn sun_duration(&self) -> u64 {
        ((1.0 - self.eclipse_fraction) * self.period as Real).round() as u64
    }

    /// Whether the satellite is in sunlight at `clock`.
    pub fn in_sun(&self, clock: u64) -> bool {
        clock % self.period < self.sun_duration()
    }
}

/// Battery capacity, solar generation and per-subsystem loads. Loads are
/// keyed by subsystem name; a subsystem draws power while its `<name>_on`
/// store variable is true.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel<T> {
    pub capacity_wh: T,
    pub generation_w: T,
    pub loads: BTreeMap<String, T>,
}

impl Default for PowerModel<Real> {
    fn default() -> PowerModel<Real> {
        // Illustrative defaults, overridable via config.
        let loads = [("eps", 0.5), ("obsw", 1.0), ("ants", 0.5), ("trx", 2.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        PowerModel { capacity_wh: 20.0, generation_w: 4.0, loads }
    }
}

/// One battery integration step:
/// level' = clamp(level + (generation·[on] - loads)·dt/3600, 0, capacity).
pub fn battery_update<T: Scalar>(
    level: T,
    generation_on: bool,
    active_loads: T,
    dt: T,
    power: &PowerModel<T>,
) -> T {
    let generation = if generation_on { power.generation_w } else { T::zero() };
    let hour = T::from_f64(3600.0).expect("3600 fits any float");
    let next = level + (generation - active_loads) * dt / hour;
    next.max(T::zero()).min(power.capacity_wh)
}

/// Environment events due exactly at `clock` (edge-triggered): sun/eclipse
/// window boundaries and pass visibility boundaries.
pub fn environment_events(clock: u64, profile: &OrbitProfile) -> Vec<Event> {
    let mut events = Vec::new();
    let phase = clock % profile.period;
    let sun = profile.sun_duration();
    let cycling = profile.eclipse_fraction > 0.0 && profile.eclipse_fraction < 1.0;
    if cycling && phase == 0 {
        events.push(env_event("sun_enter", clock));
    }
    if cycling && phase == sun {
        events.push(env_event("eclipse_enter", clock));
    }
    for pass in &profile.passes {
        if phase == pass.start % profile.period {
            events.push(env_event("pass_start", clock));
        }
        if phase == (pass.start + pass.duration) % profile.period {
            events.push(env_event("pass_end", clock));
        }
    }
    events
}

fn env_event(name: &str, clock: u64) -> Event {
    Event {
        name: name.to_string(),
        origin: EventOrigin::External,
        timestamp: clock,
    }
}

/// Total load drawn from the battery given the current store flags.
pub fn active_loads(
    power: &PowerModel<Real>,
    is_on: impl Fn(&str) -> bool,
) -> Real {
    power
        .loads
        .iter()
        .filter(|(name, _)| is_on(name))
        .map(|(_, w)| *w)
        .sum()
}

/// The packaged reference model text (`reference.fsm`).
pub fn reference_model() -> &'static str {
    include_str!("../assets/reference.fsm")
}

/// The packaged launch operational plan (`launch.plan`).
pub fn launch_plan() -> &'static str {
    include_str!("../assets/launch.plan")
}

/// The packaged default configuration (`mission.cfg`).
pub fn default_config() -> &'static str {
    include_str!("../assets/mission.cfg")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_charges_in_sun() {
        // 10 Wh, 4 W generation, 1 W load, one hour -> 13 Wh.
        let power = PowerModel::<Real>::default();
        let next = battery_update(10.0, true, 1.0, 3600.0, &power);
        assert!((next - 13.0).abs() < 1e-12);
    }

    #[test]
    fn battery_net_zero() {
        let power = PowerModel::<Real>::default();
        let next = battery_update(10.0, true, power.generation_w, 3600.0, &power);
        assert!((next - 10.0).abs() < 1e-12);
    }

    #[test]
    fn battery_clamps_at_empty() {
        let power = PowerModel::<Real>::default();
        let next = battery_update(0.1, false, 2.0, 3600.0, &power);
        assert_eq!(next, 0.0);
    }

    #[test]
    fn battery_clamps_at_capacity() {
        let power = PowerModel::<Real>::default();
        let next = battery_update(19.99, true, 0.0, 3600.0, &power);
        assert_eq!(next, power.capacity_wh);
    }

    #[test]
    fn battery_update_generic_over_scalar() {
        let power = PowerModel::<f32> {
            capacity_wh: 20.0,
            generation_w: 4.0,
            loads: BTreeMap::new(),
        };
        let next = battery_update(10.0f32, true, 1.0, 3600.0, &power);
        assert!((next - 13.0).abs() < 1e-5);
    }

    #[test]
    fn eclipse_boundaries() {
        // period 5400, eclipse fraction 1/3: eclipse at 3600, sun again at 5400.
        let profile = OrbitProfile { passes: vec![], ..OrbitProfile::default() };
        let names_at = |clock| {
            environment_events(clock, &profile)
                .into_iter()
                .map(|e| e.name)
                .collect::<Vec<_>>()
        };
        assert_eq!(names_at(3600), vec!["eclipse_enter"]);
        assert_eq!(names_at(5400), vec!["sun_enter"]);
        assert!(names_at(1234).is_empty());
        assert!(profile.in_sun(3599) && !profile.in_sun(3600));
        assert!(profile.in_sun(5400));
    }

    #[test]
    fn no_eclipse_events_without_eclipse() {
        let profile = OrbitProfile {
            eclipse_fraction: 0.0,
            passes: vec![],
            ..OrbitProfile::default()
        };
        for clock in 0..=11_000 {
            assert!(environment_events(clock, &profile).is_empty());
            assert!(profile.in_sun(clock));
        }
    }

    #[test]
    fn pass_boundaries_each_orbit() {
        let profile = OrbitProfile::default(); // pass at 0 for 600 s
        for orbit in 0..3u64 {
            let base = orbit * profile.period;
            let starts = environment_events(base, &profile);
            assert!(starts.iter().any(|e| e.name == "pass_start"));
            let ends = environment_events(base + 600, &profile);
            assert!(ends.iter().any(|e| e.name == "pass_end"));
        }
    }

    #[test]
    fn load_sum_respects_flags() {
        let power = PowerModel::<Real>::default();
        let on = |name: &str| name == "eps" || name == "obsw";
        assert!((active_loads(&power, on) - 1.5).abs() < 1e-12);
        assert_eq!(active_loads(&power, |_| false), 0.0);
    }
}
