//! Admissible environment sampling and situation assessment.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::SafetyConstraint;
use crate::kinematics::VehicleState;
use crate::model::{admissibility_bound, admissible, ModelId};
use crate::threat::{msd_conservative, SystemParams};

/// Closest object ahead of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadObject {
    pub x_l: f64,
    pub v_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SituationParams {
    /// Standstill separation (m).
    pub d: f64,
    /// Minimal braking magnitude of the lead object (m/s^2).
    pub b: f64,
}

/// Critical position assuming the lead object stands still.
pub fn sa_naive(lead: &LeadObject, sp: &SituationParams) -> f64 {
    lead.x_l + sp.d
}

/// Critical position assuming the lead object brakes with at least `b`.
pub fn sa_braking_lead(lead: &LeadObject, sp: &SituationParams) -> f64 {
    lead.x_l + lead.v_l * lead.v_l / (2.0 * sp.b) + sp.d
}

/// Default probability that a sampled gap sits exactly on the bound.
pub const DEFAULT_BOUNDARY_PROB: f64 = 0.25;

/// Seeded sampler for the nondeterministic `env` block.
///
/// One sampler is one stream; episodes in a batch use distinct streams of
/// the same seed.
#[derive(Debug, Clone)]
pub struct EnvSampler {
    rng: ChaCha8Rng,
    nominal_draws: u64,
    boundary_prob: f64,
}

impl EnvSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, nominal_draws: 0, boundary_prob: DEFAULT_BOUNDARY_PROB }
    }

    pub fn with_boundary_prob(mut self, prob: f64) -> Self {
        self.boundary_prob = prob.clamp(0.0, 1.0);
        self
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Uniform sample on `[lo, hi]`; returns `lo` for an empty interval.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            // random_range on a closed float range can round past `hi`
            self.rng.random_range(lo..=hi).min(hi)
        } else {
            lo
        }
    }

    pub fn chance(&mut self, prob: f64) -> bool {
        self.rng.random::<f64>() < prob
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Nominal request in `[-a_n_min, a_n_max]`. The first two draws of a
    /// stream are the two endpoints.
    pub fn sample_nominal(&mut self, p: &SystemParams) -> f64 {
        let k = self.nominal_draws;
        self.nominal_draws += 1;
        match k {
            0 => -p.a_n_min,
            1 => p.a_n_max,
            _ => self.uniform(-p.a_n_min, p.a_n_max),
        }
    }

    /// A constraint passing `model`'s env test for the current state.
    pub fn sample_constraint(&mut self, s: &VehicleState, p: &SystemParams, model: ModelId) -> SafetyConstraint {
        let v_c = if model.uses_critical_velocity() {
            let top = s.v + p.a_n_max * p.period + 5.0;
            match self.rng.random_range(0..10u32) {
                0 => 0.0,
                1 => s.v,
                _ => self.uniform(0.0, top),
            }
        } else {
            0.0
        };
        let bound = admissibility_bound(model, s.v, v_c, p);
        let gap = if self.chance(self.boundary_prob) {
            bound
        } else {
            self.uniform(bound, bound + 4.0 * msd_conservative(s.v, p.period, p) + 10.0)
        };
        let mut c = SafetyConstraint::new(s.x + gap, v_c);
        // x + gap may round below the bound
        while !admissible(model, s, &c, p) {
            c.x_c = c.x_c.next_up();
        }
        c
    }
}
