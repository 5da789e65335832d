//! Run configuration: built-in defaults, overridden by a `key = value`
//! file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use xtalk_core::diplexer::DiplexParams;
use xtalk_core::io::{fmt_f64, KeyValues};
use xtalk_core::{
    Contrast, DemodConfig, FastIcaConfig, InterferometerParams, MixingModel, Orthogonalization,
    ScenarioKind,
};

use crate::CliError;

/// Output directory used when neither a flag nor the config file names one.
pub const OUT_DIR_ENV: &str = "XTALK_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Icdx,
    Csv,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Self::Icdx => "icdx",
            Self::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub samples: usize,
    pub interferometer: InterferometerParams,
    pub coupling: MixingModel,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    /// `None` skips quantization.
    pub adc_bits: Option<u32>,
    pub adc_full_scale: f64,
    pub plateau_density: f64,
    pub vibration_amplitude: f64,
    pub seed: u64,
    pub ica: FastIcaConfig,
    pub demod: DemodConfig,
    pub diplex: DiplexParams,
    pub diplex_sample_rate: f64,
    pub diplex_samples: usize,
    pub format: Format,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let interferometer = InterferometerParams::default();
        Self {
            scenario: ScenarioKind::ShotRamp,
            samples: 1 << 18,
            interferometer,
            coupling: "1,0.4;0.3,1".parse().expect("valid default coupling"),
            snr_db: None,
            adc_bits: None,
            adc_full_scale: 2.0,
            plateau_density: 5e19,
            vibration_amplitude: 0.5e-6,
            seed: 0,
            ica: FastIcaConfig::default(),
            demod: DemodConfig::for_carriers(&interferometer),
            diplex: DiplexParams::default(),
            diplex_sample_rate: 200e6,
            diplex_samples: 40_000,
            format: Format::Icdx,
            out_dir: None,
        }
    }
}

/// Every recognised key, in manifest order.
pub const KEYS: &[&str] = &[
    "scenario",
    "samples",
    "sample_rate",
    "f_het1",
    "f_het2",
    "lambda1",
    "lambda2",
    "r_e",
    "coupling",
    "snr_db",
    "adc_bits",
    "adc_full_scale",
    "plateau_density",
    "vibration_amplitude",
    "seed",
    "contrast",
    "a",
    "tol",
    "max_iter",
    "ortho",
    "cutoff",
    "decimation",
    "demod_order",
    "envelope_floor",
    "diplex_f_a",
    "diplex_f_b",
    "diplex_order",
    "diplex_band_fraction",
    "diplex_sample_rate",
    "diplex_samples",
    "format",
    "out_dir",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}`: cannot parse `{value}`"))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, String> {
    if value == "none" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn show<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let core = |e: xtalk_core::Error| format!("`{key}`: {e}");
        match key {
            "scenario" => self.scenario = value.parse().map_err(core)?,
            "samples" => self.samples = num(key, value)?,
            "sample_rate" => self.interferometer.sample_rate = num(key, value)?,
            "f_het1" => self.interferometer.f_het1 = num(key, value)?,
            "f_het2" => self.interferometer.f_het2 = num(key, value)?,
            "lambda1" => self.interferometer.lambda1 = num(key, value)?,
            "lambda2" => self.interferometer.lambda2 = num(key, value)?,
            "r_e" => self.interferometer.r_e = num(key, value)?,
            "coupling" => self.coupling = value.parse().map_err(core)?,
            "snr_db" => self.snr_db = optional(key, value)?,
            "adc_bits" => self.adc_bits = optional(key, value)?,
            "adc_full_scale" => self.adc_full_scale = num(key, value)?,
            "plateau_density" => self.plateau_density = num(key, value)?,
            "vibration_amplitude" => self.vibration_amplitude = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "contrast" => self.ica.contrast = value.parse::<Contrast>().map_err(core)?,
            "a" => self.ica.a = num(key, value)?,
            "tol" => self.ica.tol = num(key, value)?,
            "max_iter" => self.ica.max_iter = num(key, value)?,
            "ortho" => self.ica.ortho = value.parse::<Orthogonalization>().map_err(core)?,
            "cutoff" => self.demod.cutoff = num(key, value)?,
            "decimation" => self.demod.decimation = num(key, value)?,
            "demod_order" => self.demod.order = num(key, value)?,
            "envelope_floor" => self.demod.envelope_floor = num(key, value)?,
            "diplex_f_a" => self.diplex.f_a = num(key, value)?,
            "diplex_f_b" => self.diplex.f_b = num(key, value)?,
            "diplex_order" => self.diplex.order = num(key, value)?,
            "diplex_band_fraction" => self.diplex.band_fraction = num(key, value)?,
            "diplex_sample_rate" => self.diplex_sample_rate = num(key, value)?,
            "diplex_samples" => self.diplex_samples = num(key, value)?,
            "format" => {
                self.format = match value {
                    "icdx" => Format::Icdx,
                    "csv" => Format::Csv,
                    _ => return Err(format!("`format`: expected icdx or csv, got `{value}`")),
                }
            }
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let i = &self.interferometer;
        match key {
            "scenario" => self.scenario.to_string(),
            "samples" => self.samples.to_string(),
            "sample_rate" => fmt_f64(i.sample_rate),
            "f_het1" => fmt_f64(i.f_het1),
            "f_het2" => fmt_f64(i.f_het2),
            "lambda1" => fmt_f64(i.lambda1),
            "lambda2" => fmt_f64(i.lambda2),
            "r_e" => fmt_f64(i.r_e),
            "coupling" => self.coupling.to_string(),
            "snr_db" => show(self.snr_db.map(fmt_f64)),
            "adc_bits" => show(self.adc_bits),
            "adc_full_scale" => fmt_f64(self.adc_full_scale),
            "plateau_density" => fmt_f64(self.plateau_density),
            "vibration_amplitude" => fmt_f64(self.vibration_amplitude),
            "seed" => self.seed.to_string(),
            "contrast" => self.ica.contrast.to_string(),
            "a" => fmt_f64(self.ica.a),
            "tol" => fmt_f64(self.ica.tol),
            "max_iter" => self.ica.max_iter.to_string(),
            "ortho" => self.ica.ortho.to_string(),
            "cutoff" => fmt_f64(self.demod.cutoff),
            "decimation" => self.demod.decimation.to_string(),
            "demod_order" => self.demod.order.to_string(),
            "envelope_floor" => fmt_f64(self.demod.envelope_floor),
            "diplex_f_a" => fmt_f64(self.diplex.f_a),
            "diplex_f_b" => fmt_f64(self.diplex.f_b),
            "diplex_order" => self.diplex.order.to_string(),
            "diplex_band_fraction" => fmt_f64(self.diplex.band_fraction),
            "diplex_sample_rate" => fmt_f64(self.diplex_sample_rate),
            "diplex_samples" => self.diplex_samples.to_string(),
            "format" => self.format.ext().to_string(),
            _ => unreachable!("get called with unlisted key {key}"),
        }
    }

    /// Applies every entry of a parsed file; errors carry `path:line`.
    pub fn merge_kv(&mut self, kv: &KeyValues, origin: &str) -> Result<(), CliError> {
        for (key, value) in kv.iter() {
            self.set(key, value)
                .map_err(|m| CliError::Config(format!("{origin}:{}: {m}", kv.line_of(key))))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let kv: KeyValues = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.merge_kv(&kv, &path.display().to_string())
    }

    /// Resolved values of every key except `out_dir`, which is deliberately
    /// left out so manifests do not depend on where a run was written.
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        for key in KEYS.iter().filter(|k| **k != "out_dir") {
            kv.push(key, self.get(key));
        }
        kv
    }

    /// Flag > config file > `XTALK_OUT_DIR` > current directory.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: xtalk_core::Error| CliError::Config(e.to_string());
        self.interferometer.validate().map_err(cfg)?;
        self.ica.validate().map_err(cfg)?;
        let [f1, f2] = self.interferometer.carriers();
        for f in [f1, f2] {
            self.demod.validate(self.interferometer.sample_rate, f).map_err(cfg)?;
        }
        if self.coupling.dim() != 2 {
            return Err(CliError::Config(format!(
                "`coupling` must be 2x2 for the two-color scenarios, got {}x{}",
                self.coupling.dim(),
                self.coupling.dim()
            )));
        }
        if self.samples < 2 {
            return Err(CliError::Config("`samples` must be at least 2".into()));
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(CliError::Config(format!("`snr_db` must be finite or none, got {s}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips_through_text() {
        let cfg = RunConfig::default();
        let kv = cfg.to_kv();
        assert_eq!(kv.iter().count(), KEYS.len() - 1);
        let mut back = RunConfig {
            scenario: ScenarioKind::Quiet,
            ..RunConfig::default()
        };
        back.merge_kv(&kv, "manifest").unwrap();
        assert_eq!(back.to_kv().to_string(), kv.to_string());
    }

    #[test]
    fn unknown_key_reports_line() {
        let kv: KeyValues = "seed = 3\n# comment\nbogus = 1\n".parse().unwrap();
        let err = RunConfig::default().merge_kv(&kv, "run.cfg").unwrap_err();
        assert_eq!(err.to_string(), "run.cfg:3: unknown key `bogus`");
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("samples", "many").is_err());
        assert!(cfg.set("contrast", "cubic").is_err());
        assert!(cfg.set("coupling", "1,1;1,1").is_err());
        assert!(cfg.set("format", "wav").is_err());
        cfg.set("snr_db", "none").unwrap();
        assert_eq!(cfg.snr_db, None);
        cfg.set("snr_db", "30").unwrap();
        assert_eq!(cfg.snr_db, Some(30.0));
    }

    #[test]
    fn validation_catches_inconsistent_demod() {
        let mut cfg = RunConfig::default();
        cfg.set("decimation", "40").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
