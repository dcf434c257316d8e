//! Run configuration files.
//!
//! A run is described by one TOML document: the template library, one or
//! more instances to floorplan, and solver settings. Everything except the
//! library and the instances has a default, and [`RunConfig::to_toml`]
//! writes the fully expanded form back out.
//!
//! ```toml
//! output_dir = "out"
//!
//! [[templates]]
//! id = 0
//! width = 92
//! height = 92
//!
//! [[instances]]
//! id = "P1"
//! sites = 5
//! diversity = 1
//! seed = 7
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floorplan::{BenchmarkInstance, FloorplanBudget};
use crate::geom::Side;
use crate::model::{ControllerSpec, GridConfig, PortSpec, Template, TemplateId, TemplateLibrary, DEFAULT_MAX_ASPECT};
use crate::placement::AnnealParams;

/// Environment variable that replaces `output_dir`.
pub const OUT_DIR_ENV: &str = "SITEPACK_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub id: TemplateId,
    pub width: i64,
    pub height: i64,
    /// Defaults to a two-track port centered on the north side.
    #[serde(default)]
    pub port: Option<PortSpec>,
}

impl TemplateSpec {
    pub fn port(&self) -> PortSpec {
        self.port.unwrap_or_else(|| PortSpec::centered(Side::North, self.width, self.height, 2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub id: String,
    pub sites: usize,
    /// Number of distinct templates, taken from the front of the library.
    #[serde(default = "one")]
    pub diversity: usize,
    pub seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub spacing: i64,
    pub margin_x: i64,
    pub margin_y: i64,
    pub max_aspect: f64,
    pub controller: ControllerSpec,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        GridSection { spacing: g.spacing, margin_x: g.margin_x, margin_y: g.margin_y, max_aspect: DEFAULT_MAX_ASPECT, controller: g.controller }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSection {
    pub iterations: usize,
    pub cooling: f64,
    /// Starting temperature; omitted means 10% of the initial cost.
    pub initial_temp: Option<f64>,
    pub keep_largest_first: bool,
}

impl Default for AnnealSection {
    fn default() -> Self {
        let a = AnnealParams::default();
        AnnealSection { iterations: a.iterations, cooling: a.cooling, initial_temp: None, keep_largest_first: a.keep_largest_first }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    pub placement_attempts: usize,
    pub routing_attempts: usize,
    pub time_limit: Option<f64>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        let b = FloorplanBudget::default();
        BudgetSection { placement_attempts: b.placement_attempts, routing_attempts: b.routing_attempts, time_limit: b.time_limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub anneal: AnnealSection,
    #[serde(default)]
    pub budget: BudgetSection,
    pub templates: Vec<TemplateSpec>,
    pub instances: Vec<InstanceSpec>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    /// Five sites of the 92x92 template.
    fn default() -> Self {
        RunConfig {
            output_dir: default_out(),
            grid: GridSection::default(),
            anneal: AnnealSection::default(),
            budget: BudgetSection::default(),
            templates: vec![TemplateSpec { id: 0, width: 92, height: 92, port: None }],
            instances: vec![InstanceSpec { id: "P1".into(), sites: 5, diversity: 1, seed: 0 }],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configuration with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every constraint violation, not only the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.templates.is_empty() {
            errs.push("templates: at least one template is required".to_string());
        }
        let mut ids = std::collections::BTreeSet::new();
        for t in &self.templates {
            if !ids.insert(t.id) {
                errs.push(format!("templates: id {} appears twice", t.id));
            }
            if let Err(e) = Template::new(t.id, t.width, t.height, t.port()) {
                errs.push(format!("templates: {e}"));
            }
        }
        if self.instances.is_empty() {
            errs.push("instances: at least one instance is required".to_string());
        }
        let mut names = std::collections::BTreeSet::new();
        for inst in &self.instances {
            if !names.insert(inst.id.as_str()) {
                errs.push(format!("instances: id {:?} appears twice", inst.id));
            }
            if inst.sites == 0 {
                errs.push(format!("instances.{}: sites must be positive", inst.id));
            }
            if inst.diversity == 0 || inst.diversity > self.templates.len() {
                errs.push(format!(
                    "instances.{}: diversity {} must lie in 1..={}",
                    inst.id,
                    inst.diversity,
                    self.templates.len()
                ));
            }
        }
        if let Err(e) = self.grid_config().validate() {
            errs.push(format!("grid: {e}"));
        }
        if let Err(e) = self.anneal_params(0).validate() {
            errs.push(format!("anneal: {e}"));
        }
        if self.anneal.iterations == 0 {
            errs.push("anneal: iterations must be positive".to_string());
        }
        if let Err(e) = self.floorplan_budget().validate() {
            errs.push(format!("budget: {e}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    pub fn library(&self) -> TemplateLibrary {
        let ts = self.templates.iter().map(|t| Template { id: t.id, width: t.width, height: t.height, port: t.port() }).collect();
        TemplateLibrary::new(ts).expect("validated")
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            spacing: self.grid.spacing,
            margin_x: self.grid.margin_x,
            margin_y: self.grid.margin_y,
            max_aspect: self.grid.max_aspect,
            controller: self.grid.controller,
            ..GridConfig::default()
        }
    }

    pub fn anneal_params(&self, seed: u64) -> AnnealParams {
        AnnealParams {
            iterations: self.anneal.iterations,
            initial_temp: self.anneal.initial_temp,
            cooling: self.anneal.cooling,
            seed,
            keep_largest_first: self.anneal.keep_largest_first,
        }
    }

    pub fn floorplan_budget(&self) -> FloorplanBudget {
        FloorplanBudget {
            placement_attempts: self.budget.placement_attempts,
            routing_attempts: self.budget.routing_attempts,
            time_limit: self.budget.time_limit,
        }
    }

    pub fn benchmark_instances(&self) -> Vec<BenchmarkInstance> {
        let library = self.library();
        self.instances
            .iter()
            .map(|i| BenchmarkInstance {
                id: i.id.clone(),
                site_count: i.sites,
                template_diversity: i.diversity,
                library: library.clone(),
                seed: i.seed,
            })
            .collect()
    }

    /// `output_dir`, unless [`OUT_DIR_ENV`] is set.
    pub fn effective_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[templates]]
id = 0
width = 92
height = 92

[[instances]]
id = "P1"
sites = 5
seed = 7
"#;

    #[test]
    fn minimal_config_fills_defaults_and_echoes() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.anneal.iterations, 2000);
        assert_eq!(cfg.budget.placement_attempts, 5);
        assert_eq!(cfg.instances[0].diversity, 1);
        let dump = cfg.to_toml();
        let again = RunConfig::from_toml(&dump).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), dump);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}\n[anneal]\ncolling = 0.9\n")).unwrap_err();
        assert!(err.to_string().contains("colling"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = MINIMAL.replace("sites = 5", "sites = 0\ndiversity = 3") + "\n[anneal]\ncooling = 1.5\n";
        match RunConfig::from_toml(&text).unwrap_err() {
            ConfigError::Invalid(v) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v.iter().any(|m| m.contains("sites")));
                assert!(v.iter().any(|m| m.contains("diversity")));
                assert!(v.iter().any(|m| m.contains("cooling")));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn production_templates_validate() {
        let mut text = String::new();
        for (i, (w, h)) in [(92, 92), (185, 185), (185, 138), (462, 462), (1574, 1037)].iter().enumerate() {
            text += &format!("[[templates]]\nid = {i}\nwidth = {w}\nheight = {h}\n\n");
        }
        text += "[[instances]]\nid = \"x\"\nsites = 10\ndiversity = 5\nseed = 1\n";
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.library(), TemplateLibrary::reference());
    }

    #[test]
    fn explicit_port_and_bad_template() {
        let text = MINIMAL.replace(
            "height = 92",
            "height = 92\nport = { side = \"east\", offset = 90, length = 4 }",
        );
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
    }
}
