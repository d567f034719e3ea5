//! Tuner configuration files: TOML `key = value` pairs named after the
//! [`TunerConfig`] fields. Missing keys keep the small-instance defaults.

use serde::Deserialize;

use proxjacobi_core::tuner::TunerConfig;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerOverrides {
    pub eps: Option<f64>,
    pub rho0: Option<f64>,
    pub omega: Option<f64>,
    pub kappa_x: Option<f64>,
    pub kappa_z: Option<f64>,
    pub zeta: Option<f64>,
    pub psi_cap: Option<u32>,
    pub nu_x: Option<f64>,
    pub nu_rho: Option<f64>,
    pub nu_theta: Option<f64>,
    pub chi: Option<f64>,
    pub max_outer: Option<usize>,
}

impl TunerOverrides {
    pub fn apply(&self, base: TunerConfig) -> TunerConfig {
        TunerConfig {
            eps: self.eps.unwrap_or(base.eps),
            rho0: self.rho0.unwrap_or(base.rho0),
            omega: self.omega.unwrap_or(base.omega),
            kappa_x: self.kappa_x.unwrap_or(base.kappa_x),
            kappa_z: self.kappa_z.unwrap_or(base.kappa_z),
            zeta: self.zeta.unwrap_or(base.zeta),
            psi_cap: self.psi_cap.unwrap_or(base.psi_cap),
            nu_x: self.nu_x.unwrap_or(base.nu_x),
            nu_rho: self.nu_rho.unwrap_or(base.nu_rho),
            nu_theta: self.nu_theta.unwrap_or(base.nu_theta),
            chi: self.chi.unwrap_or(base.chi),
            max_outer: self.max_outer.unwrap_or(base.max_outer),
        }
    }
}

pub fn parse_overrides(text: &str) -> Result<TunerOverrides> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Defaults overridden by the file contents, then validated.
pub fn load_tuner_config(text: &str) -> Result<TunerConfig> {
    let cfg = parse_overrides(text)?.apply(TunerConfig::default());
    cfg.validate()?;
    Ok(cfg)
}
