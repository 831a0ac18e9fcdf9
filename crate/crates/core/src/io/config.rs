//! TOML configuration files: solver settings and synthetic scenarios.
//! Missing keys take their defaults; unknown keys are errors.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{read_text, toml_error, write_text};
use crate::error::Result;
use crate::evaluation::ScenarioConfig;
use crate::optimizer::SolverConfig;

pub fn parse_toml<T: DeserializeOwned>(text: &str, path: impl AsRef<Path>) -> Result<T> {
    toml::from_str(text).map_err(|e| toml_error(path.as_ref(), text, e))
}

pub fn load_toml<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    parse_toml(&read_text(path)?, path)
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("configuration serializes")
}

pub fn save_toml<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &to_toml(value))
}

pub fn load_solver_config(path: impl AsRef<Path>) -> Result<SolverConfig> {
    let cfg: SolverConfig = load_toml(path)?;
    cfg.energy.validate()?;
    cfg.descent.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = load_toml(path)?;
    cfg.validate()?;
    Ok(cfg)
}
