//! Spike-count lower bounds, energy, and the timestep design rule.
//!
//! The lower bounds are order bounds with the implicit constant set to 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy per synaptic operation, 0.2 pJ, in joules.
pub const E_SOP_JOULES: f64 = 0.2e-12;
/// Fitted constant of the timestep rule `T = ⌈C·d_eff/ε²⌉`.
pub const DESIGN_RULE_C: f64 = 2.3;
/// 95% confidence interval reported with [`DESIGN_RULE_C`].
pub const DESIGN_RULE_C_INTERVAL: (f64, f64) = (1.9, 2.7);
pub const CONSTANT_CONVENTION: &str = "order bound, constant convention: 1";

/// `⌈x⌉`, except that values within a few ulps of an integer snap to it,
/// so `512/0.1²` gives 51200 rather than 51201. A looser relative tolerance
/// would swallow whole fractions once counts reach ~10⁹.
fn ceil_snapped(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 16.0 * f64::EPSILON * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub lipschitz: f64,
    pub tokens: usize,
    pub dims: usize,
    pub effective_dim: Option<f64>,
    pub epsilon: f64,
}

impl BoundInputs {
    pub fn new(lipschitz: f64, tokens: usize, dims: usize, epsilon: f64) -> Result<Self> {
        let inputs = BoundInputs {
            lipschitz,
            tokens,
            dims,
            effective_dim: None,
            epsilon,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_effective_dim(mut self, d_eff: f64) -> Result<Self> {
        self.effective_dim = Some(d_eff);
        self.validate()?;
        Ok(self)
    }

    /// `n·d`.
    pub fn ambient(&self) -> f64 {
        (self.tokens * self.dims) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::domain(format!(
                "Lipschitz constant must be positive, got {}",
                self.lipschitz
            )));
        }
        check_epsilon(self.epsilon)?;
        if self.tokens == 0 || self.dims == 0 {
            return Err(Error::domain("n and d must be positive"));
        }
        if let Some(d_eff) = self.effective_dim {
            if !(d_eff > 0.0 && d_eff <= self.ambient()) {
                return Err(Error::domain(format!(
                    "effective dimension must be in (0, n·d = {}], got {d_eff}",
                    self.ambient()
                )));
            }
        }
        Ok(())
    }
}

/// `⌈L_f²·n·d/ε²⌉`.
pub fn lower_bound_spikes(inputs: &BoundInputs) -> Result<u64> {
    inputs.validate()?;
    Ok(ceil_snapped(
        inputs.lipschitz.powi(2) * inputs.ambient() / inputs.epsilon.powi(2),
    ))
}

/// `⌈L_f²·d_eff/ε²⌉`.
pub fn input_dependent_bound(inputs: &BoundInputs) -> Result<u64> {
    inputs.validate()?;
    let d_eff = inputs
        .effective_dim
        .ok_or_else(|| Error::domain("effective dimension is required"))?;
    Ok(ceil_snapped(
        inputs.lipschitz.powi(2) * d_eff / inputs.epsilon.powi(2),
    ))
}

/// `n·d / d_eff`, the factor by which the input-dependent bound undercuts
/// the worst case.
pub fn compression_ratio(ambient: f64, d_eff: f64) -> Result<f64> {
    if !(d_eff > 0.0 && ambient >= d_eff) {
        return Err(Error::domain(format!(
            "need 0 < d_eff ≤ n·d, got d_eff = {d_eff}, n·d = {ambient}"
        )));
    }
    Ok(ambient / d_eff)
}

/// `spikes · e_sop` in joules.
pub fn energy_estimate(spikes: f64, e_sop: f64) -> Result<f64> {
    if !(spikes >= 0.0 && spikes.is_finite()) {
        return Err(Error::domain(format!("spike count must be nonnegative, got {spikes}")));
    }
    if !(e_sop >= 0.0 && e_sop.is_finite()) {
        return Err(Error::domain(format!("energy per operation must be nonnegative, got {e_sop}")));
    }
    Ok(spikes * e_sop)
}

/// `⌈C·d_eff/ε²⌉`.
pub fn design_rule_steps(d_eff: f64, epsilon: f64, c: f64) -> Result<u64> {
    if !(d_eff >= 1.0 && d_eff.is_finite()) {
        return Err(Error::domain(format!("effective dimension must be at least 1, got {d_eff}")));
    }
    check_epsilon(epsilon)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("C must be positive, got {c}")));
    }
    Ok(ceil_snapped(c * d_eff / epsilon.powi(2)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub worst_case_spikes: u64,
    pub input_dependent_spikes: Option<u64>,
    pub compression_ratio: Option<f64>,
    pub e_sop_joules: f64,
    /// Energy of the tightest available bound.
    pub energy_joules: f64,
    pub worst_case_energy_joules: f64,
    /// Design-rule timesteps, using `d_eff` when given and `n·d` otherwise.
    pub recommended_steps: u64,
    pub constant_c: f64,
    pub constant_c_interval: (f64, f64),
    pub constant_convention: String,
}

pub fn bound_report(inputs: &BoundInputs, e_sop: f64, c: f64) -> Result<BoundReport> {
    let worst = lower_bound_spikes(inputs)?;
    let dependent = match inputs.effective_dim {
        Some(_) => Some(input_dependent_bound(inputs)?),
        None => None,
    };
    let tightest = dependent.unwrap_or(worst);
    let dim = inputs.effective_dim.unwrap_or(inputs.ambient());
    Ok(BoundReport {
        inputs: *inputs,
        worst_case_spikes: worst,
        input_dependent_spikes: dependent,
        compression_ratio: inputs
            .effective_dim
            .map(|d| compression_ratio(inputs.ambient(), d))
            .transpose()?,
        e_sop_joules: e_sop,
        energy_joules: energy_estimate(tightest as f64, e_sop)?,
        worst_case_energy_joules: energy_estimate(worst as f64, e_sop)?,
        recommended_steps: design_rule_steps(dim.max(1.0), inputs.epsilon, c)?,
        constant_c: c,
        constant_c_interval: DESIGN_RULE_C_INTERVAL,
        constant_convention: CONSTANT_CONVENTION.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn task_shape_value() {
        let b = BoundInputs::new(1.0, 16, 32, 0.1).unwrap();
        assert_eq!(lower_bound_spikes(&b).unwrap(), 51_200);
    }

    #[test]
    fn limit_case() {
        let b = BoundInputs::new(1.0, 1, 1, 1.0 - 1e-15).unwrap();
        assert_eq!(lower_bound_spikes(&b).unwrap(), 1);
        assert_eq!(design_rule_steps(1.0, 1.0 - 1e-15, 1.0).unwrap(), 1);
    }

    #[test]
    fn epsilon_validation() {
        for eps in [0.0, 1.0, -0.1, f64::NAN] {
            let err = BoundInputs::new(1.0, 2, 2, eps).unwrap_err();
            assert!(err.to_string().contains("epsilon must be in (0,1)"));
        }
    }

    #[test]
    fn compression_ratios() {
        assert_eq!(compression_ratio(3072.0, 47.0).unwrap().round(), 65.0);
        assert_eq!(compression_ratio(150_528.0, 89.0).unwrap().round(), 1691.0);
        let b = BoundInputs::new(1.0, 1, 3072, 0.1).unwrap().with_effective_dim(47.0).unwrap();
        let r = bound_report(&b, E_SOP_JOULES, DESIGN_RULE_C).unwrap();
        assert_eq!(r.worst_case_spikes, 307_200);
        assert_eq!(r.input_dependent_spikes, Some(4700));
    }

    #[test]
    fn missing_effective_dim() {
        let b = BoundInputs::new(1.0, 2, 2, 0.5).unwrap();
        assert!(input_dependent_bound(&b).is_err());
        assert!(b.with_effective_dim(5.0).is_err());
    }

    #[test]
    fn energy_values() {
        assert_eq!(energy_estimate(0.0, E_SOP_JOULES).unwrap(), 0.0);
        assert!((energy_estimate(1e6, E_SOP_JOULES).unwrap() - 0.2e-6).abs() < 1e-20);
        assert!((energy_estimate(2e9, E_SOP_JOULES).unwrap() - 0.4e-3).abs() < 1e-16);
        assert!(energy_estimate(-1.0, E_SOP_JOULES).is_err());
    }

    #[test]
    fn large_counts_keep_their_fraction() {
        // 6.3e8 + 0.3 must round up, or halving ε gives more than 4×.
        let b = BoundInputs::new(2.4993449823828695, 26, 238, 0.0078125).unwrap();
        let w = lower_bound_spikes(&b).unwrap();
        let h = lower_bound_spikes(&BoundInputs { epsilon: b.epsilon / 2.0, ..b }).unwrap();
        assert!(h <= 4 * w && h + 3 >= 4 * w, "{w} {h}");
        assert_eq!(ceil_snapped(1e9 + 0.25), 1_000_000_001);
    }

    proptest! {
        #[test]
        fn halving_epsilon_quadruples(l in 1u32..5, n in 1usize..64, d in 1usize..64, j in 1i32..8) {
            // Dyadic ε keeps L²nd/ε² integral, so there is no ceiling slack.
            let eps = 2f64.powi(-j);
            let b = BoundInputs::new(l as f64, n, d, eps).unwrap();
            let h = BoundInputs { epsilon: eps / 2.0, ..b };
            prop_assert_eq!(lower_bound_spikes(&h).unwrap(), 4 * lower_bound_spikes(&b).unwrap());
        }

        #[test]
        fn halving_epsilon_quadruples_up_to_ceiling(l in 0.1f64..10.0, n in 1usize..64, d in 1usize..256, eps in 0.001f64..0.99) {
            let b = lower_bound_spikes(&BoundInputs::new(l, n, d, eps).unwrap()).unwrap();
            let h = lower_bound_spikes(&BoundInputs::new(l, n, d, eps / 2.0).unwrap()).unwrap();
            prop_assert!(h <= 4 * b && h + 3 >= 4 * b);
        }

        #[test]
        fn full_effective_dim_collapses(l in 0.1f64..5.0, n in 1usize..50, d in 1usize..50, eps in 0.01f64..0.99) {
            let b = BoundInputs::new(l, n, d, eps).unwrap();
            let full = b.with_effective_dim((n * d) as f64).unwrap();
            prop_assert_eq!(input_dependent_bound(&full).unwrap(), lower_bound_spikes(&b).unwrap());
        }

        #[test]
        fn dependent_bound_never_exceeds_worst_case(
            l in 0.1f64..5.0, n in 1usize..50, d in 1usize..50, eps in 0.01f64..0.99, frac in 0.01f64..1.0,
        ) {
            let b = BoundInputs::new(l, n, d, eps).unwrap();
            let part = b.with_effective_dim(frac * (n * d) as f64).unwrap();
            prop_assert!(input_dependent_bound(&part).unwrap() <= lower_bound_spikes(&b).unwrap());
        }

        #[test]
        fn bound_monotone_in_epsilon(n in 1usize..50, d in 1usize..50, a in 0.01f64..0.98, gap in 0.001f64..0.5) {
            let lo = BoundInputs::new(1.0, n, d, a).unwrap();
            let hi = BoundInputs { epsilon: (a + gap).min(0.999), ..lo };
            prop_assert!(lower_bound_spikes(&hi).unwrap() <= lower_bound_spikes(&lo).unwrap());
        }

        #[test]
        fn design_rule_monotone(d_eff in 1.0f64..500.0, eps in 0.01f64..0.9, c in 0.5f64..5.0, bump in 0.0f64..2.0) {
            let base = design_rule_steps(d_eff, eps, c).unwrap();
            prop_assert!(design_rule_steps(d_eff, eps, c + bump).unwrap() >= base);
            prop_assert!(design_rule_steps(d_eff + bump, eps, c).unwrap() >= base);
            prop_assert!(design_rule_steps(d_eff, (eps + bump / 20.0).min(0.99), c).unwrap() <= base);
        }

        #[test]
        fn energy_is_linear(s in 0.0f64..1e12, e in 1e-15f64..1e-9) {
            let one = energy_estimate(s, e).unwrap();
            prop_assert!((energy_estimate(2.0 * s, e).unwrap() - 2.0 * one).abs() <= 1e-12 * one.max(1e-30));
        }
    }
}
