//! Reading and writing run artifacts.
//!
//! JSON artifacts are wrapped as `{config_hash, seed, kind, content}`. CSV
//! artifacts start with `# key=value` comment lines carrying the same
//! provenance; readers skip them.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Wrapped<T> {
    pub config_hash: String,
    pub seed: u64,
    pub kind: String,
    pub content: T,
}

/// Output directory plus the provenance stamped on everything written there.
#[derive(Debug, Clone)]
pub struct ArtifactDir {
    pub root: PathBuf,
    pub provenance: Provenance,
}

impl ArtifactDir {
    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Fails with [`Error::MissingArtifact`] naming `producer` when `name`
    /// does not exist.
    pub fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                path: p,
                subcommand: producer.to_string(),
            })
        }
    }

    pub fn write_json<T: Serialize>(&self, name: &str, kind: &str, content: &T) -> Result<PathBuf> {
        let w = Wrapped {
            config_hash: self.provenance.config_hash.clone(),
            seed: self.provenance.seed,
            kind: kind.to_string(),
            content,
        };
        let mut text = serde_json::to_string_pretty(&w)?;
        text.push('\n');
        let p = self.path(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &str) -> Result<Wrapped<T>> {
        let p = self.require(name, producer)?;
        let text = std::fs::read_to_string(&p)?;
        serde_json::from_str(&text).map_err(|e| Error::Mismatch(format!("{}: {e}", p.display())))
    }

    /// Writes provenance comments, any `extra` comments, then whatever `body`
    /// appends.
    pub fn write_csv(
        &self,
        name: &str,
        extra: &[(&str, String)],
        body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        let mut head = format!(
            "# config_hash={}\n# seed={}\n",
            self.provenance.config_hash, self.provenance.seed
        );
        for (k, v) in extra {
            head.push_str(&format!("# {k}={v}\n"));
        }
        buf.extend_from_slice(head.as_bytes());
        body(&mut buf)?;
        let p = self.path(name);
        std::fs::write(&p, buf)?;
        Ok(p)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }
}

/// Leading `# key=value` lines of a CSV artifact.
pub fn read_csv_comments(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.trim().split_once('=') {
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(out)
}

pub fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?)
}
