//! Layered CLI configuration: flags > environment > config file > defaults.

use serde::Deserialize;
use std::path::PathBuf;
use std::time::Duration;

/// Environment variable holding the backend credential. Secrets are accepted
/// only from the environment or the config file, never from flags.
pub const API_KEY_ENV: &str = "COMM_API_KEY";

pub const DEFAULT_BACKEND_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_RETRIES: u32 = 3;
pub const DEFAULT_TIMEOUT_SECS: u64 = 60;

/// Optional config file contents (TOML).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub presets_dir: Option<PathBuf>,
    pub retries: Option<u32>,
    pub parallelism: Option<usize>,
    pub timeout_secs: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &PathBuf) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| format!("cannot parse config file {}: {e}", path.display()))
    }
}

/// Flag-level settings that participate in the merge (all optional).
#[derive(Debug, Default)]
pub struct FlagConfig {
    pub config_file: Option<PathBuf>,
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub presets_dir: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub dry_run: bool,
    pub retries: Option<u32>,
}

/// The fully merged configuration every command runs under.
#[derive(Debug)]
pub struct EffectiveConfig {
    pub backend_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub presets_dir: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub dry_run: bool,
    pub retries: u32,
    pub timeout: Duration,
    /// Parallelism default from the config file; flags may override per command.
    pub default_parallelism: Option<usize>,
}

impl EffectiveConfig {
    /// Merges flags over environment over file over defaults.
    ///
    /// Flag values here already include their environment fallbacks (the
    /// argument parser resolves `COMM_BACKEND_URL` and friends), so the merge
    /// below only needs flag-or-env > file > default. The credential is the
    /// exception: it has no flag on purpose and is read from `COMM_API_KEY`
    /// or the config file only.
    pub fn merge(flags: FlagConfig) -> Result<Self, String> {
        let file = match &flags.config_file {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let api_key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|v| !v.is_empty())
            .or(file.api_key)
            .filter(|v| !v.is_empty());
        let retries = flags.retries.or(file.retries).unwrap_or(DEFAULT_RETRIES);
        if retries == 0 {
            return Err("retries must be at least 1".into());
        }
        Ok(EffectiveConfig {
            backend_url: flags
                .backend_url
                .or(file.backend_url)
                .unwrap_or_else(|| DEFAULT_BACKEND_URL.to_string()),
            model: flags.model.or(file.model).unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            api_key,
            cache_dir: flags.cache_dir.or(file.cache_dir),
            presets_dir: flags.presets_dir.or(file.presets_dir),
            script: flags.script,
            dry_run: flags.dry_run,
            retries,
            timeout: Duration::from_secs(file.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS)),
            default_parallelism: file.parallelism,
        })
    }

    /// Resolved presets directory, falling back to discovery.
    pub fn presets_root(&self) -> Option<PathBuf> {
        self.presets_dir.clone().or_else(comm_core::presets::default_presets_dir)
    }

    fn backend_kind(&self) -> &'static str {
        if self.dry_run {
            "dry-run (no calls leave the process)"
        } else if self.script.is_some() {
            "scripted replay"
        } else {
            "remote"
        }
    }

    /// Multi-line rendering with the credential redacted; printed to stderr
    /// before any backend work so runs are auditable.
    pub fn redacted_display(&self) -> String {
        let mut out = String::from("effective configuration:\n");
        out.push_str(&format!("  backend:     {}\n", self.backend_kind()));
        out.push_str(&format!("  backend_url: {}\n", self.backend_url));
        out.push_str(&format!("  model:       {}\n", self.model));
        out.push_str(&format!(
            "  api_key:     {}\n",
            if self.api_key.is_some() { "[redacted]" } else { "(none)" }
        ));
        out.push_str(&format!(
            "  cache_dir:   {}\n",
            self.cache_dir.as_ref().map_or("(none)".to_string(), |p| p.display().to_string())
        ));
        out.push_str(&format!(
            "  presets_dir: {}\n",
            self.presets_root().map_or("(none)".to_string(), |p| p.display().to_string())
        ));
        if let Some(script) = &self.script {
            out.push_str(&format!("  script:      {}\n", script.display()));
        }
        out.push_str(&format!("  retries:     {}\n", self.retries));
        out.push_str(&format!("  timeout:     {}s", self.timeout.as_secs()));
        out
    }
}
