use std::path::Path;

use l2v_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Overlays the flags that were given onto the config file's object.
pub fn resolve<A: Serialize + DeserializeOwned>(flags: A, file: Option<&Path>) -> Result<A> {
    let Some(path) = file else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut merged = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => {
            return Err(Error::InvalidConfig(format!(
                "{}: config file must hold a JSON object",
                path.display()
            )))
        }
        Err(e) => return Err(Error::InvalidConfig(format!("{}: {e}", path.display()))),
    };
    let given = serde_json::to_value(&flags).expect("flag structs serialize");
    if let Value::Object(given) = given {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

pub fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "missing --{} (or \"{key}\" in the config file)",
            key.replace('_', "-")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::AnalyzeArgs;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"m": 3, "dirs": "a.lvt", "out": "x.csv"}"#).unwrap();
        let flags = AnalyzeArgs {
            m: Some(5),
            ..Default::default()
        };
        let a = resolve(flags, Some(&path)).unwrap();
        assert_eq!(a.m, Some(5));
        assert_eq!(a.dirs.unwrap().to_str(), Some("a.lvt"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"mm": 3}"#).unwrap();
        let err = resolve(AnalyzeArgs::default(), Some(&path)).unwrap_err();
        assert!(err.to_string().contains("mm"));
    }

    #[test]
    fn missing_flag_names_both_spellings() {
        let err = required::<u32>(None, "layer_source").unwrap_err();
        assert!(err.to_string().contains("--layer-source"));
        assert!(err.to_string().contains("\"layer_source\""));
    }
}
