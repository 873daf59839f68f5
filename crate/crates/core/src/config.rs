//! Run configuration (TOML), its content hash, and the ledger of calibrated constants.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bly::BlyConstants;
use crate::error::{Error, Result};
use crate::front::SchemeParameters;
use crate::gas::{GasParameters, State, StateBox};
use crate::holder::{HolderConfig, InitialData, Perturbation};
use crate::suite::SuiteSpec;
use crate::waves::Family;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    pub gamma: f64,
    pub r_bar: f64,
    pub k_bar: f64,
}

impl Default for GasConfig {
    fn default() -> Self {
        let g = GasParameters::default();
        Self {
            gamma: g.gamma,
            r_bar: g.r_bar,
            k_bar: g.k_bar,
        }
    }
}

/// Scheme constants. Unset values take the box-dependent defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub nu: f64,
    pub lambda_hat: Option<f64>,
    pub alpha: Option<f64>,
    /// Interaction potential weight in `Upsilon = L + kappa Q`.
    pub kappa: f64,
    /// Speed jitter as a fraction of `nu`.
    pub jitter: Option<f64>,
    pub np_threshold: Option<f64>,
    pub max_interactions: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub c1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannConfig {
    pub left: State,
    pub right: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftConfig {
    #[default]
    None,
    /// `h' = lambda_RH + offset` on shocks of `family` (all shocks if unset).
    Constant { offset: f64, family: Option<usize> },
}

fn default_series_points() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub data: InitialData,
    pub interval: (f64, f64),
    pub t_end: f64,
    #[serde(default)]
    pub shift: ShiftConfig,
    #[serde(default)]
    pub profile_times: Vec<f64>,
    #[serde(default = "default_series_points")]
    pub series_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    UpsilonDecay,
    WeightConstraints,
    PhiEquivalence,
    ContactDissipation,
    ShockDissipation,
    EntropyLedger,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::UpsilonDecay,
        Check::WeightConstraints,
        Check::PhiEquivalence,
        Check::ContactDissipation,
        Check::ShockDissipation,
        Check::EntropyLedger,
    ];
}

fn default_tolerance() -> f64 {
    1e-12
}

fn default_ledger_tolerance() -> f64 {
    1e-9
}

fn default_contact_samples() -> usize {
    1000
}

fn default_l1_samples() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub checks: Vec<Check>,
    pub suite: SuiteSpec,
    /// Tolerance of the decay and dissipation-sign checks.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Relative tolerance of the entropy ledger balance.
    #[serde(default = "default_ledger_tolerance")]
    pub ledger_tolerance: f64,
    #[serde(default = "default_contact_samples")]
    pub contact_samples: usize,
    #[serde(default = "default_l1_samples")]
    pub l1_samples: usize,
}

/// The stability experiment; `kappa`, `C1` and the seed come from the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    pub data: InitialData,
    pub perturbation: Perturbation,
    pub amplitudes: Vec<f64>,
    pub nu_ladder: Vec<f64>,
    pub interval: (f64, f64),
    pub r: f64,
    pub tau: f64,
    pub shift_period: Option<f64>,
}

fn default_margin() -> f64 {
    1.5
}

fn default_c1_start() -> f64 {
    1.0
}

fn default_offsets() -> Vec<f64> {
    vec![0.01, 0.02, 0.05]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub suite: SuiteSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_c1_start")]
    pub c1_start: f64,
    /// Safety factor applied to the fitted slope constants.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Constant shift offsets used to fit `K` of the slope bound.
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
    #[serde(default = "default_l1_samples")]
    pub l1_samples: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a command needs. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Provenance date recorded with calibrated constants.
    pub date: Option<String>,
    #[serde(default)]
    pub gas: GasConfig,
    #[serde(default, rename = "box")]
    pub state_box: StateBox,
    pub scheme: SchemeConfig,
    pub weight: WeightConfig,
    #[serde(default)]
    pub bly: BlyConstants,
    pub riemann: Option<RiemannConfig>,
    pub evolve: Option<EvolveConfig>,
    pub validate: Option<ValidateConfig>,
    pub holder: Option<HolderSection>,
    pub calibrate: Option<CalibrateConfig>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        match value.get("schema_version").and_then(toml::Value::as_integer) {
            Some(v) if v == i64::from(CONFIG_SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::Config(format!(
                    "schema_version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})"
                )))
            }
            None => return Err(Error::Config("missing integer schema_version".into())),
        }
        let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn gas_parameters(&self) -> Result<GasParameters> {
        GasParameters::new(self.gas.gamma, self.gas.r_bar, self.gas.k_bar)
    }

    /// Scheme constants at resolution `nu`, with the configured overrides.
    pub fn scheme_at(&self, nu: f64, gas: &GasParameters) -> SchemeParameters {
        let s = &self.scheme;
        let mut p = SchemeParameters::for_box(nu, &self.state_box, gas);
        p.kappa = s.kappa;
        if let Some(v) = s.lambda_hat {
            p.lambda_hat = v;
        }
        if let Some(v) = s.alpha {
            p.alpha = v;
        }
        if let Some(v) = s.jitter {
            p.speed_jitter = v * nu;
        }
        if let Some(v) = s.np_threshold {
            p.np_threshold = v;
        }
        if let Some(v) = s.max_interactions {
            p.max_interactions = v;
        }
        p.seed = self.seed;
        p
    }

    /// Every resolution any section asks for.
    fn nus(&self) -> Vec<f64> {
        let mut v = vec![self.scheme.nu];
        if let Some(h) = &self.holder {
            v.extend(&h.nu_ladder);
        }
        for s in [self.validate.as_ref().map(|c| &c.suite), self.calibrate.as_ref().map(|c| &c.suite)]
            .into_iter()
            .flatten()
        {
            v.extend(&s.nu);
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let gas = self.gas_parameters()?;
        self.state_box.validate()?;
        positive("weight.c1", self.weight.c1)?;
        positive("bly.kappa1", self.bly.kappa1)?;
        positive("bly.kappa2", self.bly.kappa2)?;
        if !(self.scheme.kappa.is_finite() && self.scheme.kappa >= 0.0) {
            return Err(Error::Config(format!(
                "scheme.kappa must be non-negative, got {}",
                self.scheme.kappa
            )));
        }
        if let Some(j) = self.scheme.jitter {
            if !(0.0..=1.0).contains(&j) {
                return Err(Error::Config(format!("scheme.jitter must lie in [0, 1], got {j}")));
            }
        }
        for nu in self.nus() {
            positive("nu", nu)?;
            self.scheme_at(nu, &gas).validate(&self.state_box, &gas)?;
        }
        if let Some(r) = &self.riemann {
            for (name, u) in [("riemann.left", r.left), ("riemann.right", r.right)] {
                if !self.state_box.contains(&u) {
                    return Err(Error::Config(format!("{name} = {:?} lies outside the box", u)));
                }
            }
        }
        if let Some(e) = &self.evolve {
            positive("evolve.t_end", e.t_end)?;
            if !(e.interval.0 < e.interval.1) {
                return Err(Error::Config("evolve.interval is empty".into()));
            }
            if e.series_points < 2 {
                return Err(Error::Config("evolve.series_points must be at least 2".into()));
            }
            if let Some(t) = e.profile_times.iter().find(|t| !(**t >= 0.0 && **t <= e.t_end)) {
                return Err(Error::Config(format!("profile time {t} outside [0, t_end]")));
            }
            if let ShiftConfig::Constant { offset, family } = e.shift {
                if !offset.is_finite() {
                    return Err(Error::Config("shift offset must be finite".into()));
                }
                if let Some(f) = family {
                    if !matches!(Family::from_index(f), Some(Family::One | Family::Three)) {
                        return Err(Error::Config(format!("shift family must be 1 or 3, got {f}")));
                    }
                }
            }
        }
        if let Some(v) = &self.validate {
            if v.checks.is_empty() {
                return Err(Error::Usage("validate.checks is empty: nothing to run".into()));
            }
            v.suite.validate()?;
            positive("validate.tolerance", v.tolerance)?;
            positive("validate.ledger_tolerance", v.ledger_tolerance)?;
            if v.contact_samples == 0 || v.l1_samples == 0 {
                return Err(Error::Config("validate sample counts must be positive".into()));
            }
        }
        if let Some(h) = &self.holder {
            self.holder_config(h).validate()?;
        }
        if let Some(c) = &self.calibrate {
            c.suite.validate()?;
            positive("calibrate.tolerance", c.tolerance)?;
            positive("calibrate.c1_start", c.c1_start)?;
            positive("calibrate.margin", c.margin)?;
            if c.offsets.is_empty() || c.offsets.iter().any(|o| !(o.is_finite() && *o != 0.0)) {
                return Err(Error::Config("calibrate.offsets must be nonempty and nonzero".into()));
            }
            if c.l1_samples == 0 {
                return Err(Error::Config("calibrate.l1_samples must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn holder_config(&self, h: &HolderSection) -> HolderConfig {
        HolderConfig {
            data: h.data.clone(),
            perturbation: h.perturbation,
            amplitudes: h.amplitudes.clone(),
            nu_ladder: h.nu_ladder.clone(),
            interval: h.interval,
            r: h.r,
            tau: h.tau,
            kappa: self.scheme.kappa,
            c1: self.weight.c1,
            shift_period: h.shift_period,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration,
    /// leaving out the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn date_label(&self) -> String {
        self.date.clone().unwrap_or_else(|| "undated".into())
    }
}

/// A calibrated constant with the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    pub value: f64,
    pub suite: String,
    pub date: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub schema_version: u32,
    pub entries: BTreeMap<String, Calibrated>,
}

impl ConstantsLedger {
    pub fn new() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            entries: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, name: &str, value: f64, suite: &str, cfg: &RunConfig, hash: &str) {
        self.entries.insert(
            name.to_string(),
            Calibrated {
                value,
                suite: suite.to_string(),
                date: cfg.date_label(),
                config_hash: hash.to_string(),
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|c| c.value)
    }
}

impl Default for ConstantsLedger {
    fn default() -> Self {
        Self::new()
    }
}
