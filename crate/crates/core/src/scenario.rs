//! Scenario and system-design parameters.
//!
//! Field names follow the usual notation (`L`, `lambda`, `zeta_w`, ...) when
//! serialized so configuration files read like the parameter tables they come
//! from. Units: km, km/h, seconds, passengers per hour.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SandboxError};
use crate::geometry::{Metric, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Route length, km.
    #[serde(rename = "L")]
    pub length: f64,
    /// Service region width, km.
    #[serde(rename = "W")]
    pub width: f64,
    /// Passenger arrival rate, passengers per hour.
    pub lambda: f64,
    /// Walking speed, km/h.
    pub v_w: f64,
    /// Maximum walking distance, km.
    pub zeta_a: f64,
    /// Vehicle running speed, km/h.
    pub v_o: f64,
    pub gamma_v: f64,
    pub gamma_w: f64,
    pub gamma_a: f64,
    /// Length of the demand window, s.
    pub sim_length: f64,
    /// Simulation time step, s.
    pub time_step: f64,
    pub seed: u64,
    #[serde(default)]
    pub metric: Metric,
}

impl ScenarioParams {
    /// Route B63 geometry and weights at the given demand level.
    pub fn b63(lambda: f64, seed: u64) -> Self {
        Self {
            length: 13.12,
            width: 1.6,
            lambda,
            v_w: 5.0,
            zeta_a: 0.8,
            v_o: 11.41,
            gamma_v: 1.0,
            gamma_w: 1.59,
            gamma_a: 1.79,
            sim_length: 14_400.0,
            time_step: 1.0,
            seed,
            metric: Metric::Rectilinear,
        }
    }

    pub fn region(&self) -> Region {
        Region {
            length: self.length,
            width: self.width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.length, "route length", "L")?;
        positive(self.width, "region width", "W")?;
        positive(self.v_w, "walking speed", "v_w")?;
        positive(self.zeta_a, "maximum walking distance", "zeta_a")?;
        positive(self.v_o, "vehicle running speed", "v_o")?;
        positive(self.sim_length, "simulation length", "sim_length")?;
        positive(self.time_step, "time step", "time_step")?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SandboxError::invalid(
                "passenger arrival rate",
                "lambda",
                format!("must be a non-negative rate, got {}", self.lambda),
            ));
        }
        for (v, name, n) in [
            (self.gamma_v, "in-vehicle time weight", "gamma_v"),
            (self.gamma_w, "wait time weight", "gamma_w"),
            (self.gamma_a, "access time weight", "gamma_a"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SandboxError::invalid(name, n, format!("must be >= 0, got {v}")));
            }
        }
        let steps = self.sim_length / self.time_step;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(SandboxError::invalid(
                "time step",
                "time_step",
                format!("{} s does not divide the simulation length {} s", self.time_step, self.sim_length),
            ));
        }
        Ok(())
    }
}

fn positive(v: f64, name: &'static str, notation: &'static str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SandboxError::invalid(name, notation, format!("must be > 0, got {v}")))
    }
}

fn at_least(v: usize, min: usize, name: &'static str, notation: &'static str) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(SandboxError::invalid(name, notation, format!("must be >= {min}, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedDesign {
    #[serde(rename = "S")]
    pub stops: usize,
    /// Service frequency, vehicles per hour.
    pub f: f64,
    #[serde(rename = "V")]
    pub fleet: usize,
    #[serde(rename = "K")]
    pub capacity: usize,
    /// Dwell time per stop visit, s.
    pub t_d: f64,
    /// One-way cycle time, s.
    pub t_c: f64,
    /// Optional explicit stop positions along the route axis, km.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_x: Option<Vec<f64>>,
}

impl FixedDesign {
    /// Existing B63 service.
    pub fn b63_existing() -> Self {
        Self {
            stops: 57,
            f: 5.0,
            fleet: 15,
            capacity: 85,
            t_d: 20.0,
            t_c: 88.0 * 60.0,
            stop_x: None,
        }
    }

    pub fn headway(&self) -> f64 {
        3600.0 / self.f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexDesign {
    #[serde(rename = "S_c")]
    pub checkpoints: usize,
    pub f: f64,
    #[serde(rename = "V")]
    pub fleet: usize,
    #[serde(rename = "K")]
    pub capacity: usize,
    pub t_d: f64,
    pub t_c: f64,
    /// Maximum wait, s.
    pub zeta_w: f64,
    /// Maximum backtracking per inter-checkpoint section, km.
    pub zeta_b: f64,
    /// `true` lets passengers walk to any point of a vehicle's path (extended
    /// MAST); `false` restricts walking to checkpoints (original MAST).
    #[serde(default = "default_true")]
    pub walking_enabled: bool,
}

fn default_true() -> bool {
    true
}

impl FlexDesign {
    pub fn b63(checkpoints: usize) -> Self {
        Self {
            checkpoints,
            f: 5.0,
            fleet: 20,
            capacity: 40,
            t_d: 20.0,
            t_c: 120.0 * 60.0,
            zeta_w: 12.0 * 60.0,
            zeta_b: 0.4,
            walking_enabled: true,
        }
    }

    pub fn headway(&self) -> f64 {
        3600.0 / self.f
    }

    /// Scheduled running time between consecutive checkpoints, s.
    pub fn segment_travel_time(&self, scenario: &ScenarioParams) -> f64 {
        scenario.length / (self.checkpoints - 1) as f64 / scenario.v_o * 3600.0
    }

    /// Timetable budget per inter-checkpoint segment not used by running and
    /// dwelling, s.
    pub fn segment_slack(&self, scenario: &ScenarioParams) -> f64 {
        self.t_c / (self.checkpoints - 1) as f64 - self.segment_travel_time(scenario) - self.t_d
    }
}

/// Objective used to rank on-demand insertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnDemandObjective {
    /// Increment of the vehicle's route completion time.
    #[default]
    VehicleTime,
    /// Increment of weighted wait and in-vehicle time over affected passengers.
    WeightedPassengerTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnDemandDesign {
    #[serde(rename = "S_d")]
    pub depots: usize,
    #[serde(rename = "V")]
    pub fleet: usize,
    #[serde(rename = "K")]
    pub capacity: usize,
    pub t_d: f64,
    pub zeta_w: f64,
    /// Maximum ratio of ride time to direct ride time.
    pub zeta_d: f64,
    /// Vehicles per depot; spread as evenly as possible when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<Vec<usize>>,
    #[serde(default)]
    pub objective: OnDemandObjective,
}

impl OnDemandDesign {
    pub fn b63() -> Self {
        Self {
            depots: 10,
            fleet: 40,
            capacity: 20,
            t_d: 20.0,
            zeta_w: 30.0 * 60.0,
            zeta_d: 2.0,
            mu_s: None,
            objective: OnDemandObjective::VehicleTime,
        }
    }

    /// Vehicles per depot, validated against the fleet size.
    pub fn depot_counts(&self) -> Result<Vec<usize>> {
        match &self.mu_s {
            Some(mu) => {
                if mu.len() != self.depots {
                    return Err(SandboxError::invalid(
                        "vehicle distribution over depots",
                        "mu_s",
                        format!("has {} entries but S_d = {}", mu.len(), self.depots),
                    ));
                }
                let total: usize = mu.iter().sum();
                if total != self.fleet {
                    return Err(SandboxError::invalid(
                        "vehicle distribution over depots",
                        "mu_s",
                        format!("sums to {total} but V = {}", self.fleet),
                    ));
                }
                Ok(mu.clone())
            }
            None => {
                let base = self.fleet / self.depots;
                let extra = self.fleet % self.depots;
                Ok((0..self.depots).map(|i| base + usize::from(i < extra)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SystemDesign {
    Fixed(FixedDesign),
    Flex(FlexDesign),
    OnDemand(OnDemandDesign),
}

impl SystemDesign {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemDesign::Fixed(_) => "fixed",
            SystemDesign::Flex(_) => "flex",
            SystemDesign::OnDemand(_) => "on-demand",
        }
    }

    pub fn validate(&self, scenario: &ScenarioParams) -> Result<()> {
        match self {
            SystemDesign::Fixed(d) => {
                at_least(d.stops, 2, "number of stops", "S")?;
                at_least(d.fleet, 1, "fleet size", "V")?;
                at_least(d.capacity, 1, "vehicle capacity", "K")?;
                positive(d.f, "service frequency", "f")?;
                positive(d.t_c, "one-way cycle time", "t_c")?;
                non_negative(d.t_d, "dwell time", "t_d")?;
                if let Some(xs) = &d.stop_x {
                    if xs.len() != d.stops {
                        return Err(SandboxError::invalid(
                            "stop positions",
                            "stop_x",
                            format!("has {} entries but S = {}", xs.len(), d.stops),
                        ));
                    }
                    if xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().any(|&x| x < 0.0 || x > scenario.length) {
                        return Err(SandboxError::invalid(
                            "stop positions",
                            "stop_x",
                            "must be strictly increasing within [0, L]",
                        ));
                    }
                }
            }
            SystemDesign::Flex(d) => {
                at_least(d.checkpoints, 2, "number of checkpoints", "S_c")?;
                at_least(d.fleet, 1, "fleet size", "V")?;
                at_least(d.capacity, 1, "vehicle capacity", "K")?;
                positive(d.f, "service frequency", "f")?;
                positive(d.t_c, "one-way cycle time", "t_c")?;
                positive(d.zeta_w, "maximum wait time", "zeta_w")?;
                non_negative(d.t_d, "dwell time", "t_d")?;
                non_negative(d.zeta_b, "maximum backtracking distance", "zeta_b")?;
                let slack = d.segment_slack(scenario);
                if slack < 0.0 {
                    return Err(SandboxError::invalid(
                        "one-way cycle time",
                        "t_c",
                        format!(
                            "leaves negative slack per segment: t_c/(S_c-1) - t_t - t_d = {:.3}/{} - {:.3} - {:.3} = {:.3} s",
                            d.t_c,
                            d.checkpoints - 1,
                            d.segment_travel_time(scenario),
                            d.t_d,
                            slack
                        ),
                    ));
                }
            }
            SystemDesign::OnDemand(d) => {
                at_least(d.depots, 1, "number of depots", "S_d")?;
                at_least(d.fleet, 1, "fleet size", "V")?;
                at_least(d.capacity, 1, "vehicle capacity", "K")?;
                positive(d.zeta_w, "maximum wait time", "zeta_w")?;
                non_negative(d.t_d, "dwell time", "t_d")?;
                if !(d.zeta_d >= 1.0) {
                    return Err(SandboxError::invalid(
                        "maximum detour time rate",
                        "zeta_d",
                        format!("must be >= 1, got {}", d.zeta_d),
                    ));
                }
                d.depot_counts()?;
            }
        }
        Ok(())
    }
}

fn non_negative(v: f64, name: &'static str, notation: &'static str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SandboxError::invalid(name, notation, format!("must be >= 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn b63_flex_segment_budget() {
        let s = ScenarioParams::b63(80.0, 1);
        let d = FlexDesign::b63(10);
        assert_abs_diff_eq!(d.segment_travel_time(&s), 459.9474, epsilon = 1e-3);
        assert_abs_diff_eq!(d.segment_slack(&s), 320.0526, epsilon = 1e-3);
        assert!(SystemDesign::Flex(d).validate(&s).is_ok());
    }

    #[test]
    fn zero_slack_limit() {
        let s = ScenarioParams::b63(80.0, 1);
        let mut d = FlexDesign::b63(10);
        d.t_c = s.length / s.v_o * 3600.0 + 10.0 * d.t_d;
        // t_c/(S_c-1) - t_t - t_d collapses to t_d/(S_c-1)
        assert_abs_diff_eq!(d.segment_slack(&s), 20.0 / 9.0, epsilon = 1e-9);
        d.t_c -= 60.0;
        let err = SystemDesign::Flex(d).validate(&s).unwrap_err().to_string();
        assert!(err.contains("t_c"), "{err}");
    }

    #[test]
    fn negative_lambda_is_named() {
        let mut s = ScenarioParams::b63(80.0, 1);
        s.lambda = -1.0;
        assert!(s.validate().unwrap_err().to_string().contains("lambda"));
    }

    #[test]
    fn time_step_must_divide_length() {
        let mut s = ScenarioParams::b63(80.0, 1);
        s.time_step = 7.0;
        assert!(s.validate().unwrap_err().to_string().contains("time_step"));
    }

    #[test]
    fn depot_counts() {
        let d = OnDemandDesign::b63();
        assert_eq!(d.depot_counts().unwrap(), vec![4; 10]);
        let mut bad = d.clone();
        bad.mu_s = Some(vec![4, 4, 4, 4, 4, 4, 4, 4, 4, 3]);
        assert!(bad.depot_counts().unwrap_err().to_string().contains("mu_s"));
        let mut short = d;
        short.mu_s = Some(vec![20, 20]);
        assert!(short.depot_counts().is_err());
    }
}
