use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continent {
    Europe,
    Australia,
    Asia,
    CentralSouthAmerica,
    Africa,
    Other,
}

impl Continent {
    pub fn as_str(self) -> &'static str {
        match self {
            Continent::Europe => "europe",
            Continent::Australia => "australia",
            Continent::Asia => "asia",
            Continent::CentralSouthAmerica => "central_south_america",
            Continent::Africa => "africa",
            Continent::Other => "other",
        }
    }
}

impl std::str::FromStr for Continent {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match norm.as_str() {
            "europe" => Continent::Europe,
            "australia" | "oceania" => Continent::Australia,
            "asia" => Continent::Asia,
            "centralsouthamerica" | "southamerica" | "centralamerica" | "latinamerica" => {
                Continent::CentralSouthAmerica
            }
            "africa" => Continent::Africa,
            "other" => Continent::Other,
            _ => return Err(RegistryError::UnknownContinent(s.to_string())),
        })
    }
}

impl std::fmt::Display for Continent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub operator_name: String,
    pub country: String,
    pub continent: Continent,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate network_id {0:?}")]
    Duplicate(String),
    #[error("unknown continent {0:?}")]
    UnknownContinent(String),
    #[error("registry row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize, Serialize)]
struct RegistryRow {
    network_id: String,
    operator: String,
    country: String,
    continent: String,
}

/// Maps `network_id` to operator, country and continent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkRegistry {
    entries: BTreeMap<String, NetworkInfo>,
}

impl NetworkRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, network_id: impl Into<String>, info: NetworkInfo) -> Result<(), RegistryError> {
        let id = network_id.into();
        if self.entries.contains_key(&id) {
            return Err(RegistryError::Duplicate(id));
        }
        self.entries.insert(id, info);
        Ok(())
    }

    pub fn get(&self, network_id: &str) -> Option<&NetworkInfo> {
        self.entries.get(network_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &NetworkInfo)> {
        self.entries.iter()
    }

    /// Reads `network_id,operator,country,continent` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, RegistryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut registry = Self::new();
        for (i, row) in rdr.deserialize::<RegistryRow>().enumerate() {
            let row = row.map_err(|source| RegistryError::Csv { row: i + 1, source })?;
            registry.insert(
                row.network_id,
                NetworkInfo {
                    operator_name: row.operator,
                    country: row.country,
                    continent: row.continent.parse()?,
                },
            )?;
        }
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), RegistryError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (id, info) in &self.entries {
            wtr.serialize(RegistryRow {
                network_id: id.clone(),
                operator: info.operator_name.clone(),
                country: info.country.clone(),
                continent: info.continent.as_str().to_string(),
            })
            .map_err(|source| RegistryError::Csv { row: 0, source })?;
        }
        wtr.flush()?;
        Ok(())
    }
}
