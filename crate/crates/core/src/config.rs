//! Experiment configuration: `key = value` lines with `#` comments. Unknown
//! keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hierarchy::CondensationPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Capacity,
    Collapse,
    Parity,
    Scaling,
    Depth,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Capacity,
        ExperimentKind::Collapse,
        ExperimentKind::Parity,
        ExperimentKind::Scaling,
        ExperimentKind::Depth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::Collapse => "collapse",
            ExperimentKind::Parity => "parity",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Depth => "depth",
        }
    }

    /// Keys the experiment understands, with their defaults.
    pub fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            ExperimentKind::Capacity => &[
                ("seed", "0"),
                ("emit_svg", "false"),
                ("lengths", "2,4,6,8,10"),
                ("epsilon", "1.0"),
                ("resolution", "0.1"),
            ],
            ExperimentKind::Collapse => &[
                ("seed", "7"),
                ("emit_svg", "false"),
                ("n_per_class", "100"),
                ("turns", "4"),
                ("noise_sigma", "0.05"),
                ("n_bins", "16"),
                ("tower_bins", "16,8,4,2"),
                ("inner_fraction", "0.5"),
                ("directions", "10000"),
                ("epsilon", "0.5"),
            ],
            ExperimentKind::Parity => &[
                ("seed", "1"),
                ("emit_svg", "false"),
                ("n_updates", "1000"),
                ("dim_f", "8"),
                ("dim_s", "8"),
                ("flow_len", "10"),
                ("scaffold_len", "1"),
                ("lr", "0.1"),
                ("steps_per_task", "200"),
                ("task_coords", "4"),
                ("metric", "random"),
                ("cross_coupling", "0"),
            ],
            ExperimentKind::Scaling => &[
                ("seed", "5"),
                ("emit_svg", "false"),
                ("sample_counts", "100,1000,10000"),
                ("stream_motif_len", "10"),
                ("jitter", "0"),
                ("epsilon", "0.01"),
                ("budget", "7"),
                ("max_depth", "16"),
                ("policy", "motif"),
                ("policy_width", "10"),
                ("policy_repeats", "2"),
                ("policy_bins", "8"),
                ("diameter_cap", "0.07"),
            ],
            ExperimentKind::Depth => &[
                ("seed", "3"),
                ("emit_svg", "false"),
                ("sample_counts", "64,128,256,512"),
                ("stream_motif_len", "8"),
                ("jitter", "0"),
                ("epsilon", "0.002"),
                ("budget", "4"),
                ("rho", "2"),
                ("max_depth", "64"),
                ("policy", "window"),
                ("policy_width", "2"),
                ("policy_repeats", "2"),
                ("policy_bins", "8"),
                ("diameter_cap", "0.01"),
                ("noise_n", "256"),
                ("noise_epsilon", "0.05"),
                ("noise_budget", "7"),
                ("noise_seeds", "3"),
            ],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                field: "experiment".into(),
                msg: format!("unknown experiment `{s}`"),
            })
    }
}

/// A validated key set for one experiment; missing keys take defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Output directory requested by the file, if any.
    pub output_dir: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

fn config_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let values = kind
            .defaults()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self {
            kind,
            output_dir: None,
            values,
        }
    }

    /// Parses a config file. An `experiment = ...` line, if present, must agree with `kind`.
    pub fn parse(kind: ExperimentKind, text: &str) -> Result<Self> {
        let mut cfg = Self::new(kind);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k == "output_dir" {
                cfg.output_dir = Some(PathBuf::from(v));
                continue;
            }
            if k == "experiment" {
                if v != kind.name() {
                    return Err(config_err(
                        "experiment",
                        format!("file is for `{v}`, running `{kind}`"),
                    ));
                }
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(config_err(
                key,
                format!("unknown key for experiment `{}`", self.kind),
            )),
        }
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("no default for `{key}`"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        self.raw(key)
            .parse()
            .map_err(|_| config_err(key, format!("cannot parse `{}`", self.raw(key))))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let list = self
            .raw(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| config_err(key, format!("bad list entry `{}`", s.trim())))
            })
            .collect::<Result<Vec<T>>>()?;
        if list.is_empty() {
            return Err(config_err(key, "empty list"));
        }
        Ok(list)
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let v: f64 = self.get(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(config_err(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        let v: usize = self.get(key)?;
        if v == 0 {
            return Err(config_err(key, "must be at least 1"));
        }
        Ok(v)
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn emit_svg(&self) -> Result<bool> {
        self.get("emit_svg")
    }

    pub fn policy(&self) -> Result<CondensationPolicy> {
        let cap = self.positive("diameter_cap")?;
        let p = match self.raw("policy") {
            "window" => CondensationPolicy::window(self.count("policy_width")?, cap),
            "motif" => CondensationPolicy::motif(
                self.count("policy_width")?,
                self.count("policy_repeats")?,
                cap,
            ),
            "fiber" => CondensationPolicy::fiber(self.count("policy_bins")?, cap),
            other => return Err(config_err("policy", format!("unknown policy `{other}`"))),
        };
        p.validate()
            .map_err(|e| config_err("policy", e.to_string()))?;
        Ok(p)
    }

    /// Type- and range-checks every key the experiment reads.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.emit_svg()?;
        for key in self.values.keys() {
            match key.as_str() {
                "epsilon" | "resolution" | "turns" | "lr" | "rho" | "diameter_cap"
                | "noise_epsilon" | "inner_fraction" => {
                    self.positive(key)?;
                }
                "noise_sigma" | "jitter" => {
                    let v: f64 = self.get(key)?;
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(config_err(key, "must be non-negative"));
                    }
                }
                "cross_coupling" => {
                    let v: f64 = self.get(key)?;
                    if v != 0.0 {
                        return Err(config_err(
                            key,
                            "block coupling is not supported; must be 0",
                        ));
                    }
                }
                "lengths" => {
                    for v in self.get_list::<f64>(key)? {
                        if !(v > 0.0 && v.is_finite()) {
                            return Err(config_err(key, "lengths must be positive"));
                        }
                    }
                }
                "sample_counts" | "tower_bins" => {
                    if self.get_list::<usize>(key)?.iter().any(|&v| v < 2) {
                        return Err(config_err(key, "entries must be at least 2"));
                    }
                }
                "metric" => {
                    if !matches!(self.raw(key), "random" | "identity") {
                        return Err(config_err(key, "must be `random` or `identity`"));
                    }
                }
                "policy" => {
                    self.policy()?;
                }
                "n_bins" => {
                    if self.count(key)? < 2 {
                        return Err(config_err(key, "must be at least 2"));
                    }
                }
                "seed" | "emit_svg" | "policy_width" | "policy_repeats" | "policy_bins" => {}
                _ => {
                    self.count(key)?;
                }
            }
        }
        if self.values.contains_key("rho") && self.positive("rho")? <= 1.0 {
            return Err(config_err("rho", "must exceed 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for k in ExperimentKind::ALL {
            ExperimentConfig::new(k).validate().unwrap();
        }
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = ExperimentConfig::parse(
            ExperimentKind::Capacity,
            "# curve\nexperiment = capacity\nepsilon = 0.5  # finer\nlengths = 1, 2\n",
        )
        .unwrap();
        assert_eq!(cfg.get::<f64>("epsilon").unwrap(), 0.5);
        assert_eq!(cfg.get_list::<f64>("lengths").unwrap(), vec![1.0, 2.0]);
        assert_eq!(cfg.output_dir, None);
        let cfg = ExperimentConfig::parse(ExperimentKind::Depth, "output_dir = runs/d\n").unwrap();
        assert_eq!(cfg.output_dir, Some(PathBuf::from("runs/d")));
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = ExperimentConfig::parse(ExperimentKind::Capacity, "colour = red\n");
        assert!(matches!(unknown, Err(Error::Config { field, .. }) if field == "colour"));
        let neg = ExperimentConfig::parse(ExperimentKind::Capacity, "epsilon = -1\n");
        assert!(matches!(neg, Err(Error::Config { .. })));
        let syntax = ExperimentConfig::parse(ExperimentKind::Capacity, "epsilon 1\n");
        assert!(matches!(syntax, Err(Error::Parse { line: 1, .. })));
        let coupled = ExperimentConfig::parse(ExperimentKind::Parity, "cross_coupling = 0.2\n");
        assert!(matches!(coupled, Err(Error::Config { field, .. }) if field == "cross_coupling"));
        let wrong = ExperimentConfig::parse(ExperimentKind::Parity, "experiment = depth\n");
        assert!(wrong.is_err());
        let rho = ExperimentConfig::parse(ExperimentKind::Depth, "rho = 1\n");
        assert!(rho.is_err());
        assert!("nope".parse::<ExperimentKind>().is_err());
    }
}
