//! `key = value` run files. Keys are long flag names without the dashes;
//! `#` starts a comment. Flags given on the command line win.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use super::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(UsageError(format!("config line {}: expected key = value", n + 1)));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(UsageError(format!("config line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(UsageError(format!("config line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Rejects keys the subcommand does not know.
    pub fn restrict(&self, known: &[&str]) -> Result<(), UsageError> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(UsageError(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// `flag`, else the file's value for `key`, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| UsageError(format!("config `{key}`: {e}"))))
            .transpose()
    }

    pub fn pick_list(&self, flag: Option<String>, key: &str) -> Result<Option<Vec<f64>>, UsageError> {
        match flag.as_deref().or(self.raw(key)) {
            None => Ok(None),
            Some(text) => parse_list(text).map(Some).map_err(|e| UsageError(format!("`{key}`: {e}"))),
        }
    }
}

/// Comma-separated numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number {:?}", s.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format!("non-finite value in {text:?}"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let cfg = ConfigFile::parse("# run\nlevels = 2\nbetas=0.1, 0.2 # two\n\nprior = tv\n").unwrap();
        assert_eq!(cfg.pick::<usize>(None, "levels").unwrap(), Some(2));
        assert_eq!(cfg.pick(Some(5usize), "levels").unwrap(), Some(5));
        assert_eq!(cfg.pick_list(None, "betas").unwrap(), Some(vec![0.1, 0.2]));
        assert_eq!(cfg.pick_list(Some("1".into()), "betas").unwrap(), Some(vec![1.0]));
        assert_eq!(cfg.pick::<String>(None, "missing").unwrap(), None);
        assert!(cfg.restrict(&["levels", "betas", "prior"]).is_ok());
        assert!(cfg.restrict(&["levels"]).is_err());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("levels 3").is_err());
        assert!(ConfigFile::parse("= 3").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        let cfg = ConfigFile::parse("levels = three").unwrap();
        assert!(cfg.pick::<usize>(None, "levels").is_err());
        assert!(parse_list("0.1,,0.2").is_err());
        assert!(parse_list("inf").is_err());
    }
}
