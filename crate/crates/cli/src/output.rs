//! In-memory artifacts and their transactional write to an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const VERSION: &str = concat!("igssm ", env!("CARGO_PKG_VERSION"));

/// A file to be written, with its content already rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        Self {
            name: name.into(),
            bytes,
        }
    }

    /// Renders rows with a header line, even when `rows` is empty.
    pub fn csv<T: Serialize>(name: &str, header: &[&str], rows: &[T]) -> Self {
        let mut wtr = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        wtr.write_record(header).expect("in-memory write");
        for row in rows {
            wtr.serialize(row).expect("in-memory write");
        }
        Self {
            name: name.into(),
            bytes: wtr.into_inner().expect("in-memory flush"),
        }
    }

    pub fn from_writer<F>(name: &str, f: F) -> Result<Self, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> igssm::Result<()>,
    {
        let mut bytes = Vec::new();
        f(&mut bytes)?;
        Ok(Self {
            name: name.into(),
            bytes,
        })
    }

    pub fn is_csv(&self) -> bool {
        self.name.ends_with(".csv")
    }
}

/// Provenance written next to every CSV as `<stem>.meta.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub file: &'a str,
    pub command: &'a str,
    pub config_name: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
    pub version: &'a str,
}

pub fn meta_name(csv_name: &str) -> String {
    format!("{}.meta.json", csv_name.trim_end_matches(".csv"))
}

/// Writes every artifact plus CSV sidecars. If any write fails, files
/// already written by this call are removed.
pub fn write_all(
    dir: &Path,
    artifacts: &[Artifact],
    command: &str,
    config_name: &str,
    config_sha256: &str,
    seed: u64,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let result = (|| -> Result<(), CliError> {
        for a in artifacts {
            let path = dir.join(&a.name);
            fs::write(&path, &a.bytes)?;
            written.push(path);
            if a.is_csv() {
                let meta = Artifact::json(
                    &meta_name(&a.name),
                    &Meta {
                        file: &a.name,
                        command,
                        config_name,
                        config_sha256,
                        seed,
                        version: VERSION,
                    },
                );
                let path = dir.join(&meta.name);
                fs::write(&path, &meta.bytes)?;
                written.push(path);
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}
