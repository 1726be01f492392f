use std::fs;
use std::path::Path;

use serde::Deserialize;

use semsqli_core::detectors::HttpConfig;

/// Defaults read from the TOML file named by `--config` or `SEMSQLI_CONFIG`.
/// Command-line flags win over anything set here.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub attack: AttackDefaults,
    pub http: Option<HttpConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackDefaults {
    pub dataset: Option<String>,
    pub target: Option<String>,
    pub method: Option<String>,
    pub strategy: Option<String>,
    pub steps: Option<usize>,
    pub budget: Option<usize>,
    pub c: Option<f64>,
    pub query_cap: Option<usize>,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
    pub out: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
