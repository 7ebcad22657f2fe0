//! Plain-text (TOML) prior configuration.
//!
//! ```toml
//! [prior]
//! family = "iw"        # iw | factor | mgp | spectral
//! d = 2
//! nu = 8.0             # iw: degrees of freedom
//! scale = 1.0          # iw: Σ₀ = scale · I (default 1)
//! # a, b               factor/mgp/spectral: gamma shape and rate (b defaults to 1)
//! # rank               factor/mgp: number of factors (factor default 1, mgp default d)
//! # a1, a2             mgp: shapes of δ₁ and δ_l (defaults 2 and 3)
//! # beta_pi2, beta_0, kappa_rot   spectral: angle prior (defaults 0)
//!
//! [location]           # optional; defaults to kind = "fixed", mean 0, scale 1
//! kind = "hierarchical" # fixed | hierarchical
//! mean = [0.0, 0.0]
//! scale = 1.0          # fixed: B = scale · I; hierarchical: B₀ = scale · I
//! nu = 6.0             # hierarchical only: ν_B
//! ```
//!
//! Unknown keys, and keys that do not apply to the chosen family, are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaseMeasureSpec, CovariancePrior, Family, FactorParams, IwParams, LocationPrior, MgpParams, SpectralParams};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub prior: PriorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub family: String,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_pi2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_rot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

fn default_kind() -> String {
    "fixed".into()
}

fn cfg<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}

fn require(v: Option<f64>, key: &str, family: Family) -> Result<f64> {
    v.ok_or_else(|| cfg(format!("family `{family}` requires key `prior.{key}`")))
}

impl PriorConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| cfg(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg(e.to_string()))
    }

    pub fn to_spec(&self) -> Result<BaseMeasureSpec<f64>> {
        let covariance = self.prior.to_covariance()?;
        let d = self.prior.d;
        let location = match &self.location {
            None => LocationPrior::standard(d),
            Some(l) => l.to_location(d)?,
        };
        BaseMeasureSpec::new(location, covariance)
    }
}

impl PriorSection {
    fn reject_keys(&self, family: Family, keys: &[(&str, bool)]) -> Result<()> {
        for (k, present) in keys {
            if *present {
                return Err(cfg(format!("key `prior.{k}` does not apply to family `{family}`")));
            }
        }
        Ok(())
    }

    pub fn to_covariance(&self) -> Result<CovariancePrior<f64>> {
        let family: Family = self.family.parse()?;
        let d = self.d;
        if d == 0 {
            return Err(cfg("prior.d must be at least 1"));
        }
        let cov = match family {
            Family::InverseWishart => {
                self.reject_keys(
                    family,
                    &[
                        ("a", self.a.is_some()),
                        ("b", self.b.is_some()),
                        ("rank", self.rank.is_some()),
                        ("a1", self.a1.is_some()),
                        ("a2", self.a2.is_some()),
                        ("beta_pi2", self.beta_pi2.is_some()),
                        ("beta_0", self.beta_0.is_some()),
                        ("kappa_rot", self.kappa_rot.is_some()),
                    ],
                )?;
                let scale = self.scale.unwrap_or(1.0);
                if !(scale > 0.0) {
                    return Err(cfg("prior.scale must be positive"));
                }
                CovariancePrior::InverseWishart(IwParams {
                    scale: SpdMatrix::scaled_identity(d, scale),
                    nu: require(self.nu, "nu", family)?,
                })
            }
            Family::Factor => {
                self.reject_keys(
                    family,
                    &[
                        ("nu", self.nu.is_some()),
                        ("scale", self.scale.is_some()),
                        ("a1", self.a1.is_some()),
                        ("a2", self.a2.is_some()),
                        ("beta_pi2", self.beta_pi2.is_some()),
                        ("beta_0", self.beta_0.is_some()),
                        ("kappa_rot", self.kappa_rot.is_some()),
                    ],
                )?;
                CovariancePrior::Factor(FactorParams {
                    dim: d,
                    rank: self.rank.unwrap_or(1),
                    a: require(self.a, "a", family)?,
                    b: self.b.unwrap_or(1.0),
                })
            }
            Family::Mgp => {
                self.reject_keys(
                    family,
                    &[
                        ("nu", self.nu.is_some()),
                        ("scale", self.scale.is_some()),
                        ("beta_pi2", self.beta_pi2.is_some()),
                        ("beta_0", self.beta_0.is_some()),
                        ("kappa_rot", self.kappa_rot.is_some()),
                    ],
                )?;
                CovariancePrior::Mgp(MgpParams {
                    dim: d,
                    rank: self.rank.unwrap_or(d),
                    a1: self.a1.unwrap_or(2.0),
                    a2: self.a2.unwrap_or(3.0),
                    a: require(self.a, "a", family)?,
                    b: self.b.unwrap_or(1.0),
                })
            }
            Family::Spectral => {
                self.reject_keys(
                    family,
                    &[
                        ("nu", self.nu.is_some()),
                        ("scale", self.scale.is_some()),
                        ("rank", self.rank.is_some()),
                        ("a1", self.a1.is_some()),
                        ("a2", self.a2.is_some()),
                    ],
                )?;
                CovariancePrior::Spectral(SpectralParams {
                    dim: d,
                    a: require(self.a, "a", family)?,
                    b: self.b.unwrap_or(1.0),
                    beta_pi2: self.beta_pi2.unwrap_or(0.0),
                    beta_0: self.beta_0.unwrap_or(0.0),
                    kappa_rot: self.kappa_rot.unwrap_or(0.0),
                })
            }
        };
        cov.validate()?;
        Ok(cov)
    }
}

impl LocationSection {
    pub fn to_location(&self, d: usize) -> Result<LocationPrior<f64>> {
        let mean = self.mean.clone().unwrap_or_else(|| vec![0.0; d]);
        if mean.len() != d {
            return Err(cfg(format!("location.mean has {} entries, expected {d}", mean.len())));
        }
        let scale = self.scale.unwrap_or(1.0);
        if !(scale > 0.0) {
            return Err(cfg("location.scale must be positive"));
        }
        let s = SpdMatrix::scaled_identity(d, scale);
        match self.kind.as_str() {
            "fixed" => {
                if self.nu.is_some() {
                    return Err(cfg("key `location.nu` only applies to kind `hierarchical`"));
                }
                LocationPrior::fixed(mean, s)
            }
            "hierarchical" => {
                let nu = self.nu.ok_or_else(|| cfg("hierarchical location requires `location.nu`"))?;
                LocationPrior::hierarchical(mean, s, nu)
            }
            other => Err(cfg(format!("unknown location kind `{other}`"))),
        }
    }
}
