//! Minimal flag parser: `--name value` pairs after the subcommand, with
//! explicit validation against the set of flags each subcommand accepts.

use std::collections::HashMap;

#[derive(Debug)]
pub struct UsageError(pub String);

pub struct Args {
    values: HashMap<String, String>,
}

impl Args {
    pub fn parse(raw: &[String], allowed: &[&str]) -> Result<Args, UsageError> {
        let mut values = HashMap::new();
        let mut i = 0;
        while i < raw.len() {
            let flag = &raw[i];
            let Some(name) = flag.strip_prefix("--") else {
                return Err(UsageError(format!("unexpected argument {flag:?}")));
            };
            if !allowed.contains(&name) {
                return Err(UsageError(format!("unknown flag --{name}")));
            }
            let Some(value) = raw.get(i + 1) else {
                return Err(UsageError(format!("flag --{name} needs a value")));
            };
            if values.insert(name.to_string(), value.clone()).is_some() {
                return Err(UsageError(format!("flag --{name} given twice")));
            }
            i += 2;
        }
        Ok(Args { values })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    pub fn require(&self, name: &str) -> Result<&str, UsageError> {
        self.get(name).ok_or_else(|| UsageError(format!("missing required flag --{name}")))
    }
}
