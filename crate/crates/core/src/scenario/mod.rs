//! Named sweeps over the model, their configuration and tabular output.

pub mod cache;
pub mod config;
mod runners;
pub mod table;
pub mod validate;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::master_equation::FloquetOptions;
use crate::model::SystemParams;

use self::cache::PointCache;
use self::config::{apply_params, ConfigFile, Section, AXIS_KEYS, PARAM_KEYS};
use self::table::Table;

pub use self::runners::{
    escalated, radiance_curve, run, run_detuning_sweep, run_energy_spectrum,
    run_excitation_spectrum, run_parity_compare, run_peak_map, run_radiance_vs_drive, CurvePoint,
    PeakSummary, peak_summary, TAU_WINDOWS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    EnergySpectrum,
    RadianceVsDrive,
    DetuningSweep,
    PeakMap,
    ExcitationSpectrum,
    ParityCompare,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::EnergySpectrum,
        Scenario::RadianceVsDrive,
        Scenario::DetuningSweep,
        Scenario::PeakMap,
        Scenario::ExcitationSpectrum,
        Scenario::ParityCompare,
    ];

    /// Config section name.
    pub fn name(self) -> &'static str {
        match self {
            Scenario::EnergySpectrum => "energy_spectrum",
            Scenario::RadianceVsDrive => "radiance_vs_drive",
            Scenario::DetuningSweep => "detuning_sweep",
            Scenario::PeakMap => "peak_map",
            Scenario::ExcitationSpectrum => "excitation_spectrum",
            Scenario::ParityCompare => "parity_compare",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Evenly spaced grid over one SystemParams field, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, points: usize) -> Result<Self> {
        let axis = Self {
            name: name.to_string(),
            min,
            max,
            points,
        };
        axis.check(name)?;
        Ok(axis)
    }

    fn check(&self, key: &str) -> Result<()> {
        if !AXIS_KEYS.contains(&self.name.as_str()) {
            return Err(Error::config(
                key,
                format!("`{}` is not a continuous SystemParams field", self.name),
            ));
        }
        if self.points < 2 {
            return Err(Error::config(format!("{key}.points"), format!("need at least 2 points, got {}", self.points)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::config(
                format!("{key}.min"),
                format!("need min < max, got [{}, {}]", self.min, self.max),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + (self.max - self.min) * (i as f64 / last)
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }
}

/// Everything one scenario run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub base: SystemParams,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    /// Mixing angles to run; each produces its own curves.
    pub thetas: Vec<f64>,
    /// Couplings to run, unless an axis already sweeps λ.
    pub lambdas: Vec<f64>,
    /// Energy levels reported by the energy spectrum.
    pub levels: usize,
    /// Drive-frequency grid on which the peak map locates extrema.
    pub scan: Axis,
    pub output_dir: PathBuf,
    /// Grid points per curve re-solved at a larger truncation (0 disables).
    pub convergence_points: usize,
}

const SCENARIO_KEYS: &[&str] = &[
    "axis1",
    "axis1.min",
    "axis1.max",
    "axis1.points",
    "axis2",
    "axis2.min",
    "axis2.max",
    "axis2.points",
    "thetas",
    "lambdas",
    "levels",
    "scan.min",
    "scan.max",
    "scan.points",
    "convergence_points",
];

fn drive_axis(points: usize) -> Axis {
    Axis::new("omega_d", 0.7, 1.4, points).expect("valid default")
}

impl SweepSpec {
    /// The built-in run of a scenario around `base`.
    pub fn defaults(scenario: Scenario, base: SystemParams) -> Self {
        let mut spec = Self {
            scenario,
            axis1: drive_axis(701),
            axis2: None,
            thetas: vec![base.theta],
            lambdas: vec![base.lambda],
            levels: 8,
            scan: drive_axis(351),
            output_dir: PathBuf::from("."),
            convergence_points: 5,
            base,
        };
        match scenario {
            Scenario::EnergySpectrum => {
                spec.axis1 = Axis::new("lambda", 0.0, 0.3, 61).expect("valid default");
                spec.thetas = vec![FRAC_PI_2, FRAC_PI_6];
            }
            Scenario::RadianceVsDrive => {}
            Scenario::DetuningSweep => {
                spec.axis2 = Some(Axis::new("omega_c", 0.95, 1.05, 3).expect("valid default"));
            }
            Scenario::PeakMap => {
                spec.axis1 = Axis::new("lambda", 0.02, 0.2, 10).expect("valid default");
                spec.thetas = vec![FRAC_PI_2, FRAC_PI_6];
            }
            Scenario::ExcitationSpectrum => {
                spec.thetas = vec![FRAC_PI_2, FRAC_PI_6];
                spec.lambdas = vec![0.05, 0.1, 0.2];
            }
            Scenario::ParityCompare => {
                spec.thetas = vec![FRAC_PI_6];
                spec.lambdas = vec![0.02, 0.2];
            }
        }
        spec
    }

    /// Defaults, then `[system]`, then the scenario's own section.
    pub fn from_config(scenario: Scenario, cfg: &ConfigFile) -> Result<Self> {
        for section in cfg.sections() {
            if section.name != "system" && Scenario::from_name(&section.name).is_none() {
                return Err(Error::config(
                    section.name.clone(),
                    "unknown section; expected [system] or a scenario name",
                ));
            }
        }
        let mut base = SystemParams::default();
        if let Some(sys) = cfg.section("system") {
            reject_unknown(sys, PARAM_KEYS, &[])?;
            apply_params(&mut base, sys)?;
        }
        let own = cfg.section(scenario.name());
        if let Some(sec) = own {
            reject_unknown(sec, PARAM_KEYS, SCENARIO_KEYS)?;
            apply_params(&mut base, sec)?;
        }
        let mut spec = Self::defaults(scenario, base);
        if let Some(sec) = own {
            spec.read_section(sec)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn read_section(&mut self, sec: &Section) -> Result<()> {
        if let Some(axis) = read_axis(sec, "axis1", Some(&self.axis1))? {
            self.axis1 = axis;
        }
        if sec.get("axis2").is_some() || self.axis2.is_some() {
            self.axis2 = read_axis(sec, "axis2", self.axis2.as_ref())?;
        }
        let scan = Axis {
            name: "omega_d".into(),
            min: sec.f64("scan.min")?.unwrap_or(self.scan.min),
            max: sec.f64("scan.max")?.unwrap_or(self.scan.max),
            points: sec.usize("scan.points")?.unwrap_or(self.scan.points),
        };
        scan.check("scan")?;
        self.scan = scan;
        if let Some(v) = sec.f64_list("thetas")? {
            self.thetas = v;
        } else if sec.get("theta").is_some() {
            self.thetas = vec![self.base.theta];
        }
        if let Some(v) = sec.f64_list("lambdas")? {
            self.lambdas = v;
        } else if sec.get("lambda").is_some() {
            self.lambdas = vec![self.base.lambda];
        }
        if let Some(v) = sec.usize("levels")? {
            self.levels = v;
        }
        if let Some(v) = sec.usize("convergence_points")? {
            self.convergence_points = v;
        }
        Ok(())
    }

    /// λ values of the run: the λ axis if one exists, else `lambdas`.
    pub fn lambda_values(&self) -> Vec<f64> {
        for axis in std::iter::once(&self.axis1).chain(self.axis2.as_ref()) {
            if axis.name == "lambda" {
                return axis.values();
            }
        }
        self.lambdas.clone()
    }

    pub fn validate(&self) -> Result<()> {
        let section = self.scenario.name();
        let key1 = format!("{section}.axis1");
        let key2 = format!("{section}.axis2");
        self.axis1.check(&key1)?;
        if let Some(a2) = &self.axis2 {
            a2.check(&key2)?;
        }
        let want = |axis: &Axis, key: &str, allowed: &[&str]| -> Result<()> {
            if allowed.contains(&axis.name.as_str()) {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("{section} sweeps {}, not `{}`", allowed.join(" or "), axis.name),
                ))
            }
        };
        match self.scenario {
            Scenario::EnergySpectrum => want(&self.axis1, &key1, &["lambda"])?,
            Scenario::PeakMap => {
                want(&self.axis1, &key1, &["lambda", "Omega"])?;
                if let Some(a2) = &self.axis2 {
                    want(a2, &key2, &["Omega"])?;
                    if self.axis1.name == "Omega" {
                        return Err(Error::config(key2, "axis2 needs axis1 = lambda"));
                    }
                }
            }
            Scenario::DetuningSweep => {
                want(&self.axis1, &key1, &["omega_d"])?;
                match &self.axis2 {
                    Some(a2) => want(a2, &key2, &["omega_c"])?,
                    None => return Err(Error::config(key2, "detuning sweep needs axis2 = omega_c")),
                }
            }
            Scenario::ExcitationSpectrum | Scenario::RadianceVsDrive | Scenario::ParityCompare => {
                want(&self.axis1, &key1, &["omega_d"])?;
                if let Some(a2) = &self.axis2 {
                    want(a2, &key2, &["lambda"])?;
                }
            }
        }
        if self.thetas.is_empty() {
            return Err(Error::config(format!("{section}.thetas"), "empty list"));
        }
        if self.lambda_values().is_empty() {
            return Err(Error::config(format!("{section}.lambdas"), "empty list"));
        }
        if self.scenario == Scenario::EnergySpectrum && self.levels == 0 {
            return Err(Error::config(format!("{section}.levels"), "must be positive"));
        }
        // every corner of the run must be a valid parameter set
        for &theta in &self.thetas {
            for &lambda in &self.lambda_values() {
                for axis in std::iter::once(&self.axis1).chain(self.axis2.as_ref()) {
                    for v in [axis.min, axis.max] {
                        let mut p = SystemParams {
                            theta,
                            lambda,
                            omega_d: self.axis1.min.max(self.scan.min),
                            ..self.base.clone()
                        };
                        config::set_param(&mut p, &axis.name, v)?;
                        p.validate().map_err(|e| Error::config(section, e.to_string()))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn reject_unknown(sec: &Section, a: &[&str], b: &[&str]) -> Result<()> {
    for key in sec.keys() {
        if !a.contains(&key) && !b.contains(&key) {
            return Err(sec.error(key, "unknown key"));
        }
    }
    Ok(())
}

fn read_axis(sec: &Section, key: &str, fallback: Option<&Axis>) -> Result<Option<Axis>> {
    let name = match (sec.get(key), fallback) {
        (Some(n), _) => n.to_string(),
        (None, Some(f)) => f.name.clone(),
        (None, None) => return Ok(None),
    };
    let same = fallback.filter(|f| f.name == name);
    let get = |suffix: &str, dflt: Option<f64>| -> Result<f64> {
        let k = format!("{key}.{suffix}");
        match sec.f64(&k)? {
            Some(v) => Ok(v),
            None => dflt.ok_or_else(|| sec.error(&k, "missing")),
        }
    };
    let min = get("min", same.map(|f| f.min))?;
    let max = get("max", same.map(|f| f.max))?;
    let kp = format!("{key}.points");
    let points = match sec.usize(&kp)? {
        Some(v) => v,
        None => same.map(|f| f.points).ok_or_else(|| sec.error(&kp, "missing"))?,
    };
    let axis = Axis {
        name,
        min,
        max,
        points,
    };
    axis.check(&format!("{}.{key}", sec.name))?;
    Ok(Some(axis))
}

/// Shared knobs for every solve in a run.
#[derive(Clone, Debug, Default)]
pub struct RunContext {
    pub cache: Option<PointCache>,
    pub floquet: FloquetOptions,
}

/// Largest change of the reported quantity when n_max and the level cut both
/// grow by 4, over a subsample of points.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub quantity: String,
    pub samples: usize,
    pub max_change: f64,
    pub tolerance: f64,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.max_change <= self.tolerance
    }

    fn merge(&mut self, samples: usize, change: f64) {
        self.samples += samples;
        if change > self.max_change || change.is_nan() {
            self.max_change = change;
        }
    }
}

/// Absolute change in R allowed by the truncation check.
pub const R_CONVERGENCE_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub tables: Vec<Table>,
    /// `# key: value` lines written at the head of every CSV.
    pub provenance: Vec<(String, String)>,
    /// Human-readable description of each flagged point.
    pub flagged: Vec<String>,
    pub max_residual: f64,
    pub convergence: Option<ConvergenceReport>,
}

/// Provenance key of the only line allowed to differ between identical runs.
pub const TIMESTAMP_KEY: &str = "generated_unix";

impl SweepResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Write one CSV per table into `dir`; returns the paths.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            std::fs::write(&path, t.to_csv(&self.provenance))?;
            written.push(path);
        }
        Ok(written)
    }

    /// Reasons a strict run must fail.
    pub fn strict_problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self.flagged.iter().map(|f| format!("flagged point: {f}")).collect();
        if let Some(c) = &self.convergence {
            if !c.passed() {
                out.push(format!(
                    "truncation check failed: {} changed by {:.3e} > {:.1e} over {} points",
                    c.quantity, c.max_change, c.tolerance, c.samples
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::new("omega_d", 0.7, 1.4, 701).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 701);
        assert_eq!(v[0], 0.7);
        assert_eq!(v[700], 1.4);
        assert!((v[300] - 1.0).abs() < 1e-15);
        assert!(Axis::new("omega_d", 0.7, 1.4, 1).is_err());
        assert!(Axis::new("omega_d", 1.4, 0.7, 5).is_err());
        assert!(Axis::new("n_max", 1.0, 2.0, 5).is_err());
    }

    #[test]
    fn config_overrides_defaults() {
        let cfg = ConfigFile::parse(
            "[system]\nlambda = 0.2\n[radiance_vs_drive]\naxis1.points = 11\nthetas = pi/6, pi/2\n",
        )
        .unwrap();
        let spec = SweepSpec::from_config(Scenario::RadianceVsDrive, &cfg).unwrap();
        assert_eq!(spec.axis1.points, 11);
        assert_eq!(spec.axis1.min, 0.7);
        assert_eq!(spec.lambdas, vec![0.2]);
        assert_eq!(spec.thetas, vec![FRAC_PI_6, FRAC_PI_2]);
    }

    #[test]
    fn config_errors_name_the_key() {
        let cases = [
            ("[radiance_vs_drive]\naxis1.points = 1\n", "axis1.points"),
            ("[radiance_vs_drive]\nbogus = 1\n", "bogus"),
            ("[system]\nlambda = -1\n", "lambda"),
            ("[elsewhere]\nx = 1\n", "elsewhere"),
            ("[radiance_vs_drive]\naxis1 = lambda\n", "axis1"),
            ("[peak_map]\naxis2 = omega_c\naxis2.min = 0.9\naxis2.max = 1.1\naxis2.points = 3\n", "axis2"),
        ];
        for (text, key) in cases {
            let cfg = ConfigFile::parse(text).unwrap();
            let err = SweepSpec::from_config(Scenario::from_name(
                cfg.sections().next().map(|s| s.name.as_str()).filter(|n| *n != "system" && *n != "elsewhere").unwrap_or("radiance_vs_drive"),
            ).unwrap(), &cfg)
            .unwrap_err();
            assert!(err.to_string().contains(key), "{text:?}: {err}");
        }
    }

    #[test]
    fn every_default_spec_is_valid() {
        for s in Scenario::ALL {
            SweepSpec::defaults(s, SystemParams::default()).validate().unwrap();
        }
    }
}
