//! Layered study configuration.
//!
//! A config file is TOML whose top level mirrors [`StudyConfig`]. Tables named
//! after a study (`[space]`, `[time]`, `[micro]`, `[plateau]`) hold settings
//! that only apply to that study and are merged over the top level when it
//! runs, so one file can drive several studies. Precedence, lowest first:
//! built-in defaults, the file, `--set key=value`, dedicated flags.

use toml::{Table, Value};

use wavehmm::study::{StudyConfig, StudyKind};

use crate::CliError;

const STUDY_SECTIONS: [StudyKind; 4] = [StudyKind::Space, StudyKind::Time, StudyKind::Micro, StudyKind::Plateau];

/// Parses config text into a table, reporting syntax errors as usage errors.
pub fn parse_table(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Removes every per-study section and merges the one for `kind` over the rest.
pub fn select_study(mut table: Table, kind: StudyKind) -> Result<Table, CliError> {
    let mut chosen = None;
    for k in STUDY_SECTIONS {
        match table.remove(k.name()) {
            Some(Value::Table(t)) if k == kind => chosen = Some(t),
            Some(Value::Table(_)) | None => {}
            Some(_) => return Err(CliError::Usage(format!("config: `{}` must be a section", k.name()))),
        }
    }
    if let Some(section) = chosen {
        merge(&mut table, section);
    }
    Ok(table)
}

/// Deep merge: nested tables are merged key by key, everything else replaced.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets a dotted key such as `hmm.delta`, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.trim().is_empty()) {
        return Err(CliError::Usage(format!("invalid key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.trim().to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Usage(format!("`{p}` in `{key}` is not a section"))),
        };
    }
    cur.insert(last.trim().to_string(), value);
    Ok(())
}

/// Parses `key=value`. The value is read as a TOML value; anything that does
/// not parse (a bare word such as `hmm`) is taken as a string.
pub fn parse_assignment(text: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{text}`")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// Integers where floats are expected would be rejected by the deserializer;
/// promote them for the keys that hold floats.
fn promote_floats(table: &mut Table) {
    fn to_float(v: &mut Value) {
        match v {
            Value::Integer(i) => *v = Value::Float(*i as f64),
            Value::Array(a) => a.iter_mut().for_each(to_float),
            _ => {}
        }
    }
    const FLOAT_KEYS: [&str; 16] = [
        "taus", "delta", "deltas", "macro_point", "epsilon", "beta", "final_time", "theta", "gamma", "sigma", "tau",
        "cg_tol", "fp_tol", "lipschitz", "c_qm_s", "divergence_growth",
    ];
    for (k, v) in table.iter_mut() {
        match v {
            Value::Table(t) => promote_floats(t),
            _ if FLOAT_KEYS.contains(&k.as_str()) => to_float(v),
            _ => {}
        }
    }
}

/// Builds the effective config for `kind` from optional file text and
/// overrides applied in order. Unknown keys are errors.
pub fn build_config(file: Option<&str>, kind: StudyKind, overrides: &[(String, Value)]) -> Result<StudyConfig, CliError> {
    let mut table = match file {
        Some(text) => select_study(parse_table(text)?, kind)?,
        None => Table::new(),
    };
    if let Some(Value::String(k)) = table.get("kind") {
        if k != kind.name() {
            log::warn!("config kind `{k}` replaced by `{}`", kind.name());
        }
    }
    for (key, value) in overrides {
        set_path(&mut table, key, value.clone())?;
    }
    table.insert("kind".into(), Value::String(kind.name().into()));
    promote_floats(&mut table);
    let config: StudyConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
    config.validate()?;
    Ok(config)
}

/// Serializes a config in the file format accepted by [`build_config`].
pub fn to_config_text(config: &StudyConfig) -> Result<String, CliError> {
    toml::to_string(config).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
}
