//! Configuration files, shipped fixtures and versioned artifacts.
//!
//! Every file is TOML with a top-level `schema_version`. References such as
//! `machine = "case250"` name a fixture; anything containing a path
//! separator or ending in `.toml` is read from disk. Fixtures are looked up
//! first in the directory named by `EXGRADE_FIXTURES`, then among the copies
//! compiled into the binary.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinematics::MachineModel;
use crate::sim::{Plant, PlantParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming an extra fixture directory.
pub const FIXTURE_ENV: &str = "EXGRADE_FIXTURES";

const EMBEDDED: &[(&str, &str)] = &[
    ("case250.machine.toml", include_str!("../fixtures/case250.machine.toml")),
    ("case250.plant.toml", include_str!("../fixtures/case250.plant.toml")),
    ("m445.machine.toml", include_str!("../fixtures/m445.machine.toml")),
    ("m445.plant.toml", include_str!("../fixtures/m445.plant.toml")),
    ("campaign.toml", include_str!("../fixtures/campaign.toml")),
];

/// Names of the fixtures compiled into the crate.
pub fn embedded_fixtures() -> impl Iterator<Item = &'static str> {
    EMBEDDED.iter().map(|(n, _)| *n)
}

/// Text of fixture `name` and where it came from.
pub fn fixture_text(name: &str) -> Result<(String, PathBuf)> {
    if let Some(dir) = std::env::var_os(FIXTURE_ENV) {
        let path = Path::new(&dir).join(name);
        if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            return Ok((text, path));
        }
    }
    EMBEDDED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, t)| (t.to_string(), PathBuf::from(format!("<fixture>/{n}"))))
        .ok_or_else(|| Error::Config(format!("unknown fixture `{name}`")))
}

fn is_path(reference: &str) -> bool {
    reference.contains('/') || reference.contains('\\') || reference.ends_with(".toml")
}

/// Resolves a reference to file text: a path on disk, or fixture
/// `<reference>.<kind>.toml`.
pub fn resolve(reference: &str, kind: &str) -> Result<(String, PathBuf)> {
    if is_path(reference) {
        let path = PathBuf::from(reference);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok((text, path))
    } else {
        fixture_text(&format!("{reference}.{kind}.toml"))
    }
}

/// Parses a versioned TOML document, checking `schema_version` first so a
/// version mismatch is reported as such rather than as a field error.
pub fn parse_versioned<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let parse_err = |message: String| Error::Parse {
        path: path.into(),
        message,
    };
    let table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let found = match table.get("schema_version") {
        Some(toml::Value::Integer(v)) => *v,
        Some(_) => return Err(parse_err("schema_version must be an integer".into())),
        None => return Err(parse_err("missing schema_version".into())),
    };
    if found != SCHEMA_VERSION as i64 {
        return Err(Error::SchemaVersion {
            path: path.into(),
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    toml::from_str(text).map_err(|e| parse_err(e.to_string()))
}

pub fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_versioned(&text, path)
}

pub fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_machine(reference: &str) -> Result<MachineModel> {
    let (text, path) = resolve(reference, "machine")?;
    let machine: MachineModel = parse_versioned(&text, &path)?;
    machine.validate()?;
    Ok(machine)
}

pub fn load_plant_params(reference: &str) -> Result<PlantParams> {
    let (text, path) = resolve(reference, "plant")?;
    parse_versioned(&text, &path)
}

/// Plant built from a plant reference and the machine it names.
pub fn load_plant(reference: &str) -> Result<Plant> {
    let params = load_plant_params(reference)?;
    let machine = load_machine(&params.machine)?;
    Plant::new(machine, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_fixtures_load() {
        for name in ["case250", "m445"] {
            let plant = load_plant(name).unwrap();
            assert_eq!(plant.machine.name, name);
        }
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let err = parse_versioned::<toml::Table>("schema_version = 2", Path::new("x.toml")).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 2, .. }));
        assert!(err.is_config());
    }

    #[test]
    fn unknown_fixture_is_config_error() {
        assert!(load_machine("nope").unwrap_err().is_config());
    }
}
