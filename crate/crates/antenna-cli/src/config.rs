//! Flat key-value run configuration: an INI-like file merged with
//! `--key value` command-line overrides. Unknown keys are hard errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Failure category, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed arguments or config text, or an unknown key (exit 2).
    Parse(String),
    /// Well-formed value that violates a module precondition (exit 3).
    Validation(String),
    /// A computation failed inside a module (exit 4).
    Module(String),
    /// Filesystem failure (exit 5).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Module(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Module(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<antenna_core::Error> for CliError {
    fn from(e: antenna_core::Error) -> Self {
        CliError::Module(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Keys shared by every command that builds a stack and an objective.
const STACK_KEYS: &[&str] = &[
    "n1",
    "n2",
    "n3",
    "t",
    "h",
    "wavelength",
    "na",
    "film_thickness",
    "film_index",
];
const COMMON_KEYS: &[&str] = &["out_dir"];

/// Allowed keys per command.
pub fn command_keys(command: &str) -> Option<Vec<&'static str>> {
    let specific: &[&str] = match command {
        "pattern" => &["resolution_mrad"],
        "map" => &["t_min", "t_max", "t_steps", "h_min", "h_max", "h_steps"],
        "optimize" => &["t_min", "t_max", "h_min", "h_max", "tolerance"],
        "bfp" => &["resolution_mrad", "fwhm_deg", "image_pixels", "pattern_csv"],
        "photo-sim" => &["k12", "k21", "k23", "k31", "detection_prob", "duration", "seed", "trace_bin_width"],
        "photo-fit" => &["curve", "stream", "bin_width", "max_delay", "irf_sigma"],
        "budget" => &["s_de", "eta_det", "n2_on", "k21", "off_fraction"],
        _ => return None,
    };
    let mut keys: Vec<&'static str> = COMMON_KEYS.to_vec();
    if matches!(command, "pattern" | "map" | "optimize" | "bfp") {
        keys.extend_from_slice(STACK_KEYS);
    }
    keys.extend_from_slice(specific);
    Some(keys)
}

/// A validated, merged key-value store for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Merge an optional config file with command-line overrides; flags win.
    pub fn assemble(
        command: &str,
        config_path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> CliResult<RunConfig> {
        let allowed = command_keys(command)
            .ok_or_else(|| CliError::Parse(format!("unknown command '{command}'")))?;
        let mut values = BTreeMap::new();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Parse(format!(
                        "{}:{}: expected 'key = value', got '{line}'",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                let key = key.trim();
                if !allowed.contains(&key) {
                    return Err(CliError::Parse(format!(
                        "{}:{}: unknown key '{key}' for command '{command}'",
                        path.display(),
                        lineno + 1
                    )));
                }
                values.insert(key.to_string(), value.trim().to_string());
            }
        }
        for (key, value) in overrides {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Parse(format!(
                    "unknown key '--{key}' for command '{command}'"
                )));
            }
            values.insert(key.clone(), value.clone());
        }
        Ok(RunConfig {
            command: command.to_string(),
            values,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Parse(format!("key '{key}': '{raw}' is not a number"))),
        }
    }

    pub fn f64_required(&self, key: &str) -> CliResult<f64> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| CliError::Validation(format!("key '{key}' is required")))?;
        raw.parse()
            .map_err(|_| CliError::Parse(format!("key '{key}': '{raw}' is not a number")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Parse(format!("key '{key}': '{raw}' is not an integer"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> CliResult<u64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Parse(format!("key '{key}': '{raw}' is not an integer"))),
        }
    }

    pub fn out_dir(&self) -> &str {
        self.get("out_dir").unwrap_or(".")
    }
}

/// Build the stack and objective shared by the optics commands, validating
/// every module precondition up front.
pub fn stack_from_config(
    cfg: &RunConfig,
) -> CliResult<(
    antenna_core::LayerStack64,
    antenna_core::ObjectiveGeometry64,
    antenna_core::AntennaTemplate64,
    (f64, f64),
)> {
    let n1 = cfg.f64_or("n1", 1.78)?;
    let n2 = cfg.f64_or("n2", 1.50)?;
    let n3 = cfg.f64_or("n3", 1.0)?;
    let t = cfg.f64_or("t", 350.0)?;
    let h = cfg.f64_or("h", 200.0)?;
    let wavelength = cfg.f64_or("wavelength", 580.0)?;
    let na = cfg.f64_or("na", 1.65)?;

    let mut template = antenna_core::AntennaTemplate64::new(n1, n2, n3, wavelength);
    if let Some(raw) = cfg.get("film_thickness") {
        let thickness: f64 = raw
            .parse()
            .map_err(|_| CliError::Parse(format!("key 'film_thickness': '{raw}' is not a number")))?;
        if thickness > 0.0 {
            let index = cfg.f64_or("film_index", 1.7)?;
            template = template.with_film(thickness, index);
        }
    }
    let stack = template
        .stack(t, h)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    stack
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let objective = antenna_core::ObjectiveGeometry64::new(na, n1);
    objective
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((stack, objective, template, (t, h)))
}
