//! JSON forms of mixtures and posterior draws.
//!
//! Mixture: `{"weights": [..], "means": [[..], ..], "covs": [[[..], ..], ..]}`
//! with an optional `"remainder"`. Posterior draws: `{"snapshots": [mixture, ..],
//! "occupied": [..], "acceptance": {..}}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::mixture::{GaussianComponent, MixtureDensity};
use crate::real::Real;
use crate::sampler::{AcceptanceRates, PosteriorDraws};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureJson {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remainder: Option<f64>,
}

fn f<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

impl MixtureJson {
    pub fn from_mixture<T: Real>(m: &MixtureDensity<T>) -> Self {
        let rem = f(m.remainder());
        MixtureJson {
            weights: m.weights().iter().map(|&w| f(w)).collect(),
            means: m.components().iter().map(|c| c.mean().iter().map(|&v| f(v)).collect()).collect(),
            covs: m
                .components()
                .iter()
                .map(|c| c.cov().to_rows().into_iter().map(|r| r.into_iter().map(f).collect()).collect())
                .collect(),
            remainder: (rem > 0.0).then_some(rem),
        }
    }

    pub fn to_mixture(&self) -> Result<MixtureDensity<f64>> {
        let k = self.weights.len();
        if self.means.len() != k || self.covs.len() != k {
            return Err(input(format!(
                "mixture lists disagree: {} weights, {} means, {} covs",
                k,
                self.means.len(),
                self.covs.len()
            )));
        }
        let comps = self
            .means
            .iter()
            .zip(&self.covs)
            .map(|(m, c)| GaussianComponent::new(m.clone(), SpdMatrix::from_rows(c)?))
            .collect::<Result<Vec<_>>>()?;
        match self.remainder {
            Some(r) => MixtureDensity::with_remainder(self.weights.clone(), comps, r),
            None => MixtureDensity::new(self.weights.clone(), comps),
        }
    }
}

pub fn read_mixture(path: impl AsRef<Path>) -> Result<MixtureDensity<f64>> {
    let j: MixtureJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    j.to_mixture()
}

pub fn write_mixture<T: Real>(path: impl AsRef<Path>, m: &MixtureDensity<T>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&MixtureJson::from_mixture(m))?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceJson {
    pub loadings: Option<f64>,
    pub log_precision: Option<f64>,
    pub angles: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorJson {
    pub snapshots: Vec<MixtureJson>,
    #[serde(default)]
    pub occupied: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<AcceptanceJson>,
}

impl PosteriorJson {
    pub fn from_draws<T: Real>(d: &PosteriorDraws<T>) -> Self {
        let AcceptanceRates { loadings, log_precision, angles } = d.acceptance;
        PosteriorJson {
            snapshots: d.snapshots.iter().map(MixtureJson::from_mixture).collect(),
            occupied: d.occupied.clone(),
            acceptance: Some(AcceptanceJson { loadings, log_precision, angles }),
        }
    }

    pub fn mixtures(&self) -> Result<Vec<MixtureDensity<f64>>> {
        self.snapshots.iter().map(MixtureJson::to_mixture).collect()
    }
}

pub fn write_posterior<T: Real>(path: impl AsRef<Path>, d: &PosteriorDraws<T>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&PosteriorJson::from_draws(d))?)?;
    Ok(())
}

pub fn read_posterior(path: impl AsRef<Path>) -> Result<PosteriorJson> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
