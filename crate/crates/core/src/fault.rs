//! Weibull reliability curve and per-tick stochastic fault injection.
//!
//! The survival function is R(t) = exp(-(t/eta)^beta). Each tick draws a
//! uniform u in [0,1) and injects a fault when u is below the conditional
//! failure probability of the elapsed interval. The trigger rule described
//! alongside the original fault model (fault when the draw is below the
//! reliability level itself) is preserved behind `paper_literal_rule`, off
//! by default: it makes faults more likely while reliability is high, which
//! is kept only for figure-shape compatibility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Real, Scalar};

/// Survival probability R(t) = exp(-(t/eta)^beta).
pub fn reliability<T: Scalar>(t: T, beta: T, eta: T) -> T {
    (-(t / eta).powf(beta)).exp()
}

/// Conditional probability of failure in (t, t+dt] given survival to t:
/// p = 1 - R(t+dt)/R(t). Evaluated as 1 - exp(H(t) - H(t+dt)) with the
/// cumulative hazard H(t) = (t/eta)^beta, which stays finite where the
/// ratio of two underflowed survival values would be 0/0.
pub fn step_fault_probability<T: Scalar>(t: T, dt: T, beta: T, eta: T) -> T {
    let hazard_step = ((t + dt) / eta).powf(beta) - (t / eta).powf(beta);
    let p = T::one() - (-hazard_step).exp();
    p.max(T::zero()).min(T::one())
}

#[derive(Debug, Clone)]
pub struct FaultModel {
    pub beta: Real,
    pub eta: Real,
    pub seed: u64,
    pub enabled: bool,
    pub paper_literal_rule: bool,
    pub fault_count: u64,
    rng: ChaCha8Rng,
}

impl FaultModel {
    pub fn new(beta: Real, eta: Real, seed: u64, enabled: bool) -> FaultModel {
        assert!(beta > 0.0 && eta > 0.0, "Weibull parameters must be positive");
        FaultModel {
            beta,
            eta,
            seed,
            enabled,
            paper_literal_rule: false,
            fault_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Illustrative defaults: sparse faults over desk-scale runs.
    pub fn default_params(seed: u64, enabled: bool) -> FaultModel {
        FaultModel::new(1.2, 2.0e7, seed, enabled)
    }

    /// Draw for the interval (t, t+dt]. Returns whether a fault occurred;
    /// the counter is bumped on occurrence. The caller emits the `fault`
    /// event into the simulation — no fault behavior is attached.
    pub fn sample_fault(&mut self, t: Real, dt: Real) -> bool {
        if !self.enabled {
            return false;
        }
        let u: Real = self.rng.gen();
        let threshold = if self.paper_literal_rule {
            reliability(t, self.beta, self.eta)
        } else {
            step_fault_probability(t, dt, self.beta, self.eta)
        };
        let occurred = u < threshold;
        if occurred {
            self.fault_count += 1;
        }
        occurred
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reliability_at_zero_is_one() {
        assert_eq!(reliability(0.0, 1.2, 2.0e7), 1.0);
        assert_eq!(reliability(0.0f32, 0.7, 100.0), 1.0);
    }

    #[test]
    fn reliability_matches_direct_evaluation() {
        // beta=1, t=eta -> e^-1
        assert!((reliability(1000.0, 1.0, 1000.0) - (-1.0f64).exp()).abs() < 1e-6);
        // beta=2, eta=10000, t=5000 -> exp(-0.25)
        assert!((reliability(5000.0, 2.0, 10000.0) - (-0.25f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn memoryless_for_unit_shape() {
        // beta=1: p = 1 - exp(-dt/eta), independent of t.
        let expected = 1.0 - (-1.0f64 / 1000.0).exp();
        for t in [0.0, 1.0, 500.0, 12345.0, 1.0e6] {
            let p = step_fault_probability(t, 1.0, 1.0, 1000.0);
            assert!((p - expected).abs() < 1e-12, "t={t}: {p} vs {expected}");
        }
    }

    #[test]
    fn small_step_probability_approximates_hazard() {
        // beta=1, eta=10000, dt=1 -> p ~ 1.0e-4
        let p: Real = step_fault_probability(0.0, 1.0, 1.0, 10000.0);
        assert!((p - 1.0e-4).abs() < 1e-6);
    }

    #[test]
    fn step_probability_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let t = rng.gen::<Real>() * 1.0e7;
            let dt = rng.gen::<Real>() * 1000.0 + 1e-9;
            let beta = rng.gen::<Real>() * 4.0 + 0.05;
            let eta = rng.gen::<Real>() * 1.0e7 + 1.0;
            let p = step_fault_probability(t, dt, beta, eta);
            assert!((0.0..=1.0).contains(&p), "p={p} t={t} dt={dt} beta={beta} eta={eta}");
        }
    }

    #[test]
    fn reliability_is_non_increasing() {
        for &(beta, eta) in &[(0.5, 3000.0), (1.0, 1000.0), (2.5, 50_000.0)] {
            let mut prev = 1.0;
            for k in 0..=1000 {
                let r = reliability(k as Real * 100.0, beta, eta);
                assert!(r <= prev + 1e-15);
                prev = r;
            }
        }
    }

    #[test]
    fn huge_scale_never_faults() {
        let mut m = FaultModel::new(1.0, 1.0e18, 5, true);
        for t in 0..100_000 {
            assert!(!m.sample_fault(t as Real, 1.0));
        }
        assert_eq!(m.fault_count, 0);
    }

    #[test]
    fn fixed_seed_reproduces_fault_times() {
        let run = |seed| {
            let mut m = FaultModel::new(1.0, 500.0, seed, true);
            (0..20_000)
                .filter(|&t| m.sample_fault(t as Real, 1.0))
                .collect::<Vec<_>>()
        };
        let a = run(99);
        assert!(!a.is_empty());
        assert_eq!(a, run(99));
    }

    #[test]
    fn disabled_model_is_inert() {
        let mut m = FaultModel::new(1.0, 10.0, 0, false);
        assert!(!m.sample_fault(0.0, 1.0));
        assert_eq!(m.fault_count, 0);
    }
}
