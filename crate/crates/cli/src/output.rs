//! Run manifests and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Provenance echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<String>,
    pub input_paths: Vec<String>,
    pub output_path: String,
    pub seed: u64,
    pub tool_version: String,
}

impl RunManifest {
    /// Resolve every referenced path. Missing inputs are input errors.
    pub fn new(
        command: &str,
        configs: &[&Path],
        inputs: &[&Path],
        output: Option<&Path>,
        seed: u64,
    ) -> Result<Self, CliError> {
        let resolve = |paths: &[&Path]| -> Result<Vec<String>, CliError> {
            paths
                .iter()
                .map(|p| {
                    std::fs::canonicalize(p)
                        .map(|c| c.display().to_string())
                        .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
                })
                .collect()
        };
        Ok(Self {
            command: command.to_string(),
            config_paths: resolve(configs)?,
            input_paths: resolve(inputs)?,
            output_path: output.map(|p| p.display().to_string()).unwrap_or_else(|| "-".into()),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// JSON document with the manifest as its first field.
#[derive(Serialize)]
pub struct WithManifest<'a, B: Serialize> {
    pub manifest: &'a RunManifest,
    #[serde(flatten)]
    pub body: B,
}

pub fn to_json<B: Serialize>(manifest: &RunManifest, body: B) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(&WithManifest { manifest, body })
        .map_err(|e| CliError::Numerical(format!("serializing output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// `out` with its extension replaced, e.g. `fit.json` to `fit.trace.csv`.
pub fn sibling(out: &Path, extension: &str) -> PathBuf {
    out.with_extension(extension)
}

/// Path of the manifest written next to a CSV output.
pub fn manifest_sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// A set of files that become visible together once every one is written.
#[derive(Default)]
pub struct OutputSet {
    staged: Vec<(tempfile::NamedTempFile, PathBuf)>,
}

impl OutputSet {
    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        self.staged.push((tmp, path.to_path_buf()));
        Ok(())
    }

    /// Rename every staged file onto its destination.
    pub fn commit(self) -> Result<(), CliError> {
        for (tmp, path) in self.staged {
            tmp.persist(&path)
                .map_err(|e| CliError::Input(format!("{}: {}", path.display(), e.error)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_and_sibling_names() {
        assert_eq!(manifest_sidecar(Path::new("out/a.csv")), PathBuf::from("out/a.csv.manifest.json"));
        assert_eq!(sibling(Path::new("out/fit.json"), "trace.csv"), PathBuf::from("out/fit.trace.csv"));
    }

    #[test]
    fn nothing_visible_until_commit() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        let mut set = OutputSet::default();
        set.add(&a, b"one").unwrap();
        set.add(&b, b"two").unwrap();
        assert!(!a.exists() && !b.exists());
        set.commit().unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), b"one");
        assert_eq!(std::fs::read(&b).unwrap(), b"two");
    }

    #[test]
    fn dropped_set_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        {
            let mut set = OutputSet::default();
            set.add(&a, b"one").unwrap();
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn missing_input_is_input_error() {
        let e = RunManifest::new("x", &[Path::new("/nonexistent/file.toml")], &[], None, 0).unwrap_err();
        assert!(matches!(e, CliError::Input(_)));
    }
}
