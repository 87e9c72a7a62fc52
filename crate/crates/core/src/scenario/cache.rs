//! On-disk cache of steady-state photon numbers, one small file per point.
//!
//! Keys hash every parameter that can change the result together with the
//! solver tolerances and the crate version. Writes go to a temporary file
//! that is renamed into place, so concurrent workers never see torn entries.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::master_equation::FloquetOptions;
use crate::model::SystemParams;
use crate::observables::SteadyValue;

/// Environment variable that overrides the cache location.
pub const CACHE_DIR_ENV: &str = "USC_RADIANCE_CACHE_DIR";

#[derive(Clone, Debug)]
pub struct PointCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl PointCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    /// `$USC_RADIANCE_CACHE_DIR` if set, else `fallback`.
    pub fn from_env_or(fallback: impl Into<PathBuf>) -> Result<Self> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::open(PathBuf::from(dir)),
            _ => Self::open(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(p: &SystemParams, opts: &FloquetOptions) -> String {
        let bits = |v: f64| format!("{:016x}", v.to_bits());
        let text = format!(
            "v{}|wc{}|ws{}|l{}|t{}|q{}|A{}|wd{}|k{}|g{}|n{}|m{}|z{}|K{}/{}|s{}|tt{}|r{}",
            env!("CARGO_PKG_VERSION"),
            bits(p.omega_c),
            bits(p.omega_sigma),
            bits(p.lambda),
            bits(p.theta),
            p.n_qubits,
            bits(p.drive_amplitude),
            bits(p.omega_d),
            bits(p.kappa),
            bits(p.gamma_sigma),
            p.n_max,
            p.levels(),
            p.drop_sigma_z_coupling,
            opts.harmonics,
            opts.max_harmonics,
            bits(opts.shift_tol),
            bits(opts.tail_tol),
            bits(opts.residual_tol),
        );
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.pt"))
    }

    pub fn get(&self, key: &str) -> Option<SteadyValue> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        let mut it = text.split_whitespace();
        let photons = f64::from_bits(u64::from_str_radix(it.next()?, 16).ok()?);
        let residual = f64::from_bits(u64::from_str_radix(it.next()?, 16).ok()?);
        let harmonics = it.next()?.parse().ok()?;
        Some(SteadyValue {
            photons,
            residual,
            harmonics,
        })
    }

    pub fn put(&self, key: &str, value: &SteadyValue) -> Result<()> {
        let body = format!(
            "{:016x} {:016x} {}\n",
            value.photons.to_bits(),
            value.residual.to_bits(),
            value.harmonics
        );
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, body)?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}
