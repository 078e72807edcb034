//! Flat key = value configuration files and flag/file/default resolution.
//! Command-line flags override file values; file values override defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Parsed `key = value` document; `#` starts a comment, blanks ignored.
#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    raw.parse::<T>()
        .map_err(|e| CliError::usage(format!("bad value for `{key}`: {e}")))
}

/// Flag if given, else the file value, else the default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => match file.get(key) {
            Some(raw) => parse(key, raw),
            None => Ok(default),
        },
    }
}

/// Flag if given, else the file value, else None.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key).map(|raw| parse(key, raw)).transpose(),
    }
}

/// Flag or file value; an error if neither is present.
pub fn resolve_required<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<T, CliError>
where
    T::Err: Display,
{
    resolve_opt(flag, file, key)?
        .ok_or_else(|| CliError::usage(format!("missing required option `--{key}`")))
}

/// Global settings shared by every command.
#[derive(Clone, Debug)]
pub struct Globals {
    pub file: FileConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Globals {
    pub fn new(
        config: Option<PathBuf>,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let file = match config {
            Some(path) => FileConfig::load(&path)?,
            None => FileConfig::empty(),
        };
        let seed = resolve(seed, &file, "seed", 0u64)?;
        let out = resolve(out, &file, "out", PathBuf::from("out"))?;
        Ok(Self { file, seed, out })
    }
}
