//! Line-oriented analysis configuration.
//!
//! ```text
//! [partition]
//! inductive = duplicate, reflexivity, antisymmetry
//! coinductive = transitivity
//! [order]
//! transitivity > duplicate
//! [limits]
//! max_depth = 8
//! [options]
//! enumerate_orders = true
//! [tactic "peak:antisymmetryxtransitivity#1"]
//! right = reflexivity, antisymmetry
//! ```

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TacticSpec {
    pub selector: String,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    pub inductive: Option<Vec<String>>,
    pub coinductive: Option<Vec<String>>,
    /// `(a, b, strict)` for `a > b` or `a >= b`.
    pub order: Vec<(String, String, bool)>,
    pub max_depth: Option<usize>,
    pub max_states: Option<usize>,
    pub max_valleys: Option<usize>,
    pub assume_terminating: bool,
    pub enumerate_orders: bool,
    pub tactics: Vec<TacticSpec>,
}

impl Config {
    /// Every rule name the configuration mentions.
    pub fn rule_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for list in [&self.inductive, &self.coinductive].into_iter().flatten() {
            out.extend(list.iter().map(String::as_str));
        }
        for (a, b, _) in &self.order {
            out.push(a);
            out.push(b);
        }
        for t in &self.tactics {
            out.extend(t.left.iter().map(String::as_str));
            out.extend(t.right.iter().map(String::as_str));
        }
        out
    }
}

enum Section {
    None,
    Partition,
    Order,
    Limits,
    Options,
    Tactic(usize),
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| ConfigError { line: line_no, message };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        if let Some(head) = line.strip_prefix('[') {
            let head = head
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?
                .trim();
            section = match head {
                "partition" => Section::Partition,
                "order" => Section::Order,
                "limits" => Section::Limits,
                "options" => Section::Options,
                _ => {
                    let sel = head
                        .strip_prefix("tactic")
                        .map(str::trim)
                        .and_then(|s| s.strip_prefix('"'))
                        .and_then(|s| s.strip_suffix('"'))
                        .ok_or_else(|| err(format!("unknown section `{head}`")))?;
                    cfg.tactics.push(TacticSpec {
                        selector: sel.to_string(),
                        left: Vec::new(),
                        right: Vec::new(),
                    });
                    Section::Tactic(cfg.tactics.len() - 1)
                }
            };
            continue;
        }
        if let Section::Order = section {
            let (a, b, strict) = if let Some((a, b)) = line.split_once(">=") {
                (a, b, false)
            } else if let Some((a, b)) = line.split_once('>') {
                (a, b, true)
            } else {
                return Err(err(format!("expected `a > b` or `a >= b`, found `{line}`")));
            };
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() {
                return Err(err("missing rule name in order".into()));
            }
            cfg.order.push((a.to_string(), b.to_string(), strict));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let number = || {
            value
                .parse::<usize>()
                .map_err(|_| err(format!("`{key}` needs a number")))
        };
        let flag = || match value {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(err(format!("`{key}` needs true or false"))),
        };
        match (&section, key) {
            (Section::Partition, "inductive") => cfg.inductive.get_or_insert_with(Vec::new).extend(list(value)),
            (Section::Partition, "coinductive") => cfg.coinductive.get_or_insert_with(Vec::new).extend(list(value)),
            (Section::Limits, "max_depth") => cfg.max_depth = Some(number()?),
            (Section::Limits, "max_states") => cfg.max_states = Some(number()?),
            (Section::Limits, "max_valleys") => cfg.max_valleys = Some(number()?),
            (Section::Options, "assume_terminating") => cfg.assume_terminating = flag()?,
            (Section::Options, "enumerate_orders") => cfg.enumerate_orders = flag()?,
            (Section::Tactic(t), "left") => cfg.tactics[*t].left = list(value),
            (Section::Tactic(t), "right") => cfg.tactics[*t].right = list(value),
            (Section::None, _) => return Err(err(format!("`{key}` outside of any section"))),
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }
    Ok(cfg)
}
