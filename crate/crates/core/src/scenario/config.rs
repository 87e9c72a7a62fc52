//! Run configuration: flat `key = value` lines grouped in `[section]`s.
//!
//! ```text
//! # comment
//! [system]
//! lambda = 0.1
//! theta = pi/6
//!
//! [radiance_vs_drive]
//! axis1 = omega_d
//! axis1.min = 0.7
//! axis1.max = 1.4
//! axis1.points = 701
//! lambdas = 0.1, 0.2
//! ```
//!
//! Numbers may be written as multiples of pi: `pi`, `pi/6`, `2*pi/3`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI};

use crate::error::{Error, Result};
use crate::model::{LevelCut, SystemParams};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn qualified(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some((_, line)) => format!("{}.{key} (line {line})", self.name),
            None => format!("{}.{key}", self.name),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| parse_number(v).map_err(|r| Error::config(self.qualified(key), r)))
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::config(self.qualified(key), format!("expected a non-negative integer, got `{v}`")))
            })
            .transpose()
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                if items.is_empty() {
                    return Err(Error::config(self.qualified(key), "empty list"));
                }
                items
                    .into_iter()
                    .map(|s| parse_number(s).map_err(|r| Error::config(self.qualified(key), r)))
                    .collect()
            })
            .transpose()
    }

    pub fn error(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::config(self.qualified(key), reason)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    sections: Vec<Section>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = vec![Section {
            name: String::new(),
            ..Section::default()
        }];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {line_no}"), "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::config(format!("line {line_no}"), "empty section name"));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::config(name, format!("section repeated at line {line_no}")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    ..Section::default()
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {line_no}"), "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config(format!("line {line_no}"), "missing key"));
            }
            let section = sections.last_mut().expect("root section");
            if section.entries.contains_key(key) {
                return Err(Error::config(
                    section.qualified(key),
                    format!("key repeated at line {line_no}"),
                ));
            }
            section
                .entries
                .insert(key.to_string(), (value.trim().to_string(), line_no));
        }
        if sections[0].entries.is_empty() {
            sections.remove(0);
        } else {
            let key = sections[0].keys().next().unwrap().to_string();
            return Err(sections[0].error(&key, "keys must appear inside a [section]"));
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections(&self) -> impl Iterator<Item = &Section> {
        self.sections.iter()
    }
}

/// Plain float or a multiple of pi (`pi`, `-pi/2`, `2*pi/3`, `0.5*pi`).
pub fn parse_number(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{t}` is not finite"))
        };
    }
    let bad = || format!("cannot read `{t}` as a number");
    let Some(pos) = t.find("pi") else {
        return Err(bad());
    };
    let head = t[..pos].trim();
    let tail = t[pos + 2..].trim();
    let coef = match head {
        "" => 1.0,
        "-" => -1.0,
        h => h
            .strip_suffix('*')
            .ok_or_else(bad)?
            .trim()
            .parse::<f64>()
            .map_err(|_| bad())?,
    };
    let den = match tail {
        "" => 1.0,
        t2 => t2
            .strip_prefix('/')
            .ok_or_else(bad)?
            .trim()
            .parse::<f64>()
            .map_err(|_| bad())?,
    };
    if den == 0.0 {
        return Err(format!("division by zero in `{t}`"));
    }
    if coef == 1.0 {
        // exact constants for the common fractions
        let exact = [(2.0, FRAC_PI_2), (3.0, FRAC_PI_3), (4.0, FRAC_PI_4), (6.0, FRAC_PI_6), (8.0, FRAC_PI_8)];
        if let Some(&(_, v)) = exact.iter().find(|(d, _)| *d == den) {
            return Ok(v);
        }
    }
    Ok(coef * PI / den)
}

/// Keys of [`SystemParams`] accepted in config files and as sweep axes.
pub const PARAM_KEYS: &[&str] = &[
    "omega_c",
    "omega_sigma",
    "lambda",
    "theta",
    "n_qubits",
    "Omega",
    "omega_d",
    "kappa",
    "gamma_sigma",
    "n_max",
    "level_cut",
    "drop_sigma_z_coupling",
];

/// Keys that name continuous parameters, usable as sweep axes.
pub const AXIS_KEYS: &[&str] = &[
    "omega_c", "lambda", "theta", "Omega", "omega_d", "kappa", "gamma_sigma",
];

/// Set a continuous parameter by its config name.
pub fn set_param(p: &mut SystemParams, name: &str, value: f64) -> Result<()> {
    let slot = match name {
        "omega_c" => &mut p.omega_c,
        "omega_sigma" => &mut p.omega_sigma,
        "lambda" => &mut p.lambda,
        "theta" => &mut p.theta,
        "Omega" => &mut p.drive_amplitude,
        "omega_d" => &mut p.omega_d,
        "kappa" => &mut p.kappa,
        "gamma_sigma" => &mut p.gamma_sigma,
        _ => return Err(Error::config(name, "not a continuous SystemParams field")),
    };
    *slot = value;
    Ok(())
}

/// Apply every SystemParams key present in `section` to `p`.
pub fn apply_params(p: &mut SystemParams, section: &Section) -> Result<()> {
    for key in PARAM_KEYS {
        let Some(raw) = section.get(key) else { continue };
        match *key {
            "n_qubits" | "n_max" => {
                let v = section.usize(key)?.expect("present");
                if *key == "n_qubits" {
                    p.n_qubits = v;
                } else {
                    p.n_max = v;
                }
            }
            "level_cut" => {
                p.level_cut = match raw {
                    "all" => LevelCut::All,
                    "auto" => LevelCut::Auto,
                    _ => LevelCut::Levels(section.usize(key)?.expect("present")),
                };
            }
            "drop_sigma_z_coupling" => {
                p.drop_sigma_z_coupling = match raw {
                    "true" => true,
                    "false" => false,
                    _ => return Err(section.error(key, "expected true or false")),
                };
            }
            _ => set_param(p, key, section.f64(key)?.expect("present"))?,
        }
    }
    Ok(())
}
