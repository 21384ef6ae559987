//! TOML configuration: simulation settings, scenario parameters, cost
//! constants for the optimizer, and a list of system designs.

use std::path::Path;

use serde::Deserialize;
use transit_sandbox::geometry::Metric;
use transit_sandbox::policy::cost::{
    default_frequency_grid, optimize_design, optimized_design, CostAssumptions, FixedCostParams, DEFAULT_STOP_RANGE,
};
use transit_sandbox::scenario::{FixedDesign, ScenarioParams, SystemDesign};

use crate::CliError;

/// Configurations shipped with the binary, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[("b63_case_study", include_str!("../configs/b63_case_study.toml"))];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_sim_length")]
    pub sim_length: f64,
    #[serde(default = "default_time_step")]
    pub time_step: f64,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_sim_length() -> f64 {
    14_400.0
}

fn default_time_step() -> f64 {
    1.0
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            sim_length: default_sim_length(),
            time_step: default_time_step(),
            metric: Metric::default(),
            seeds: default_seeds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "W")]
    pub width: f64,
    /// Demand levels, one scenario each.
    pub lambda: Vec<f64>,
    pub v_w: f64,
    pub zeta_a: f64,
    pub v_o: f64,
    pub gamma_v: f64,
    pub gamma_w: f64,
    pub gamma_a: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    simulation: SimulationSection,
    scenario: ScenarioSection,
    #[serde(default)]
    cost: CostAssumptions,
    #[serde(default)]
    design: Vec<toml::Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    Given(SystemDesign),
    /// Fixed route whose stops, frequency and cycle time come from the cost
    /// model at each scenario's demand.
    OptimizedFixed { capacity: usize, t_d: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignEntry {
    pub id: String,
    pub spec: DesignSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub simulation: SimulationSection,
    pub scenario: ScenarioSection,
    pub cost: CostAssumptions,
    pub designs: Vec<DesignEntry>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    /// Reads a configuration file, or a bundled one when `path` names it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            let name = path.to_string_lossy();
            if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name) {
                return Self::parse(text);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn bundled(name: &str) -> Result<Self, CliError> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| config_err(format!("no bundled configuration named {name}")))?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut designs = Vec::with_capacity(raw.design.len());
        for table in raw.design {
            let entry = parse_design(table)?;
            if designs.iter().any(|d: &DesignEntry| d.id == entry.id) {
                return Err(config_err(format!("design id {} appears twice", entry.id)));
            }
            designs.push(entry);
        }
        let cfg = Config {
            simulation: raw.simulation,
            scenario: raw.scenario,
            cost: raw.cost,
            designs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.scenario.lambda.is_empty() {
            return Err(config_err("scenario.lambda lists no demand levels"));
        }
        if self.simulation.seeds.is_empty() {
            return Err(config_err("simulation.seeds lists no seeds"));
        }
        if self.designs.is_empty() {
            return Err(config_err("no [[design]] entries"));
        }
        for &lambda in &self.scenario.lambda {
            let s = self.scenario_params(lambda, self.simulation.seeds[0]);
            s.validate()?;
            for d in &self.designs {
                self.design_for(d, &s)?.validate(&s)?;
            }
        }
        Ok(())
    }

    pub fn scenario_params(&self, lambda: f64, seed: u64) -> ScenarioParams {
        let sc = &self.scenario;
        ScenarioParams {
            length: sc.length,
            width: sc.width,
            lambda,
            v_w: sc.v_w,
            zeta_a: sc.zeta_a,
            v_o: sc.v_o,
            gamma_v: sc.gamma_v,
            gamma_w: sc.gamma_w,
            gamma_a: sc.gamma_a,
            sim_length: self.simulation.sim_length,
            time_step: self.simulation.time_step,
            seed,
            metric: self.simulation.metric,
        }
    }

    pub fn design(&self, id: &str) -> Result<&DesignEntry, CliError> {
        self.designs.iter().find(|d| d.id == id).ok_or_else(|| {
            let known: Vec<&str> = self.designs.iter().map(|d| d.id.as_str()).collect();
            config_err(format!("unknown design {id}; configured: {}", known.join(", ")))
        })
    }

    /// Concrete design for one scenario.
    pub fn design_for(&self, entry: &DesignEntry, scenario: &ScenarioParams) -> Result<SystemDesign, CliError> {
        match &entry.spec {
            DesignSpec::Given(d) => Ok(d.clone()),
            DesignSpec::OptimizedFixed { capacity, t_d } => {
                let p = FixedCostParams::new(&self.cost, scenario);
                let opt = optimize_design(&p, DEFAULT_STOP_RANGE, &default_frequency_grid())
                    .ok_or_else(|| config_err("empty optimizer grid"))?;
                let template = FixedDesign {
                    capacity: *capacity,
                    t_d: *t_d,
                    ..FixedDesign::b63_existing()
                };
                Ok(SystemDesign::Fixed(optimized_design(&opt, &template)))
            }
        }
    }

    /// Demand level used when a command needs a single scenario.
    pub fn pick_lambda(&self, requested: Option<f64>) -> Result<f64, CliError> {
        match requested {
            None => Ok(self.scenario.lambda[0]),
            Some(l) if l >= 0.0 && l.is_finite() => Ok(l),
            Some(l) => Err(config_err(format!("invalid parameter passenger arrival rate (lambda): {l}"))),
        }
    }
}

pub fn scenario_id(lambda: f64) -> String {
    format!("lambda_{lambda}")
}

fn parse_design(mut table: toml::Table) -> Result<DesignEntry, CliError> {
    let id = match table.remove("id") {
        Some(toml::Value::String(s)) if !s.is_empty() => s,
        _ => return Err(config_err("every [[design]] needs a non-empty string id")),
    };
    let optimize = match table.remove("optimize") {
        None => false,
        Some(toml::Value::Boolean(b)) => b,
        Some(_) => return Err(config_err(format!("design {id}: optimize must be true or false"))),
    };
    if optimize {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Optimized {
            #[serde(rename = "type")]
            kind: String,
            #[serde(rename = "K")]
            capacity: usize,
            t_d: f64,
        }
        let o: Optimized = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("design {id}: {e}")))?;
        if o.kind != "fixed" {
            return Err(config_err(format!("design {id}: only fixed designs can be optimized")));
        }
        return Ok(DesignEntry {
            id,
            spec: DesignSpec::OptimizedFixed {
                capacity: o.capacity,
                t_d: o.t_d,
            },
        });
    }
    let design: SystemDesign = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(format!("design {id}: {e}")))?;
    Ok(DesignEntry {
        id,
        spec: DesignSpec::Given(design),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_case_study_has_five_designs_and_three_levels() {
        let c = Config::bundled("b63_case_study").unwrap();
        assert_eq!(c.designs.len(), 5);
        assert_eq!(c.scenario.lambda, vec![80.0, 200.0, 400.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = include_str!("../configs/b63_case_study.toml").replace("zeta_b = 0.4", "zeta_q = 0.4");
        let err = Config::parse(&text).unwrap_err().to_string();
        assert!(err.contains("zeta_q"), "{err}");
    }
}
