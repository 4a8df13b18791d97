//! Content-addressed output directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use pilotwave::archive::{format_version, sha256_hex};
use pilotwave::config::CONFIG_SCHEMA_VERSION;
use pilotwave::Error;

use crate::CliError;

/// Output directory of one invocation.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// `<out>/<kind>-<hash>`, where the hash covers everything that determines
    /// the directory contents.
    pub fn create(out: &Path, kind: &str, key: &str) -> Result<RunDir, CliError> {
        let hash = sha256_hex(format!("{kind}\n{key}").as_bytes());
        let path = out.join(format!("{kind}-{}", &hash[..16]));
        fs::create_dir_all(&path).map_err(|source| io(&path, source))?;
        Ok(RunDir { path })
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.path.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|source| io(parent, source))?;
        }
        fs::write(&p, bytes).map_err(|source| io(&p, source))
    }

    /// Writes `manifest.toml`. `args` re-executes the command from inside
    /// this directory.
    pub fn manifest(
        &self,
        command: &str,
        args: &[String],
        config_digest: &str,
        inputs: &[(String, String)],
    ) -> Result<(), CliError> {
        let mut text = String::new();
        text += &format!("tool = {}\n", quote("pilotwave"));
        text += &format!("tool_version = {}\n", quote(env!("CARGO_PKG_VERSION")));
        text += &format!("format_version = {}\n", quote(&format_version()));
        text += &format!("config_schema = {CONFIG_SCHEMA_VERSION}\n");
        text += &format!("command = {}\n", quote(command));
        text += &format!("config_digest = {}\n", quote(config_digest));
        let list: Vec<String> = std::iter::once("pilotwave".to_string())
            .chain(args.iter().cloned())
            .map(|a| quote(&a))
            .collect();
        text += &format!("argv = [{}]\n", list.join(", "));
        if !inputs.is_empty() {
            text += "\n[inputs]\n";
            for (k, v) in inputs {
                text += &format!("{k} = {}\n", quote(v));
            }
        }
        self.write("manifest.toml", text)
    }
}

pub fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Lib(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// TOML basic string.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => out.push_str(&format!("\\u{:04X}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
