use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{uncertainty_report, GameClusters, ResamplePlan, UncertaintyReport};
use crate::data::PlayRecord;
use crate::engine::{boundary_grid, Availability, DecisionModel, DecisionValues, FourthDownState, GridCell, GridValue};
use crate::error::{Error, Result};
use crate::gbt::GbtParams;
use crate::pipeline::{fit_weighted, FitConfig, PreparedData};

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// What a boundary grid reports per cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Point decision and effect size only.
    #[default]
    Point,
    /// Point values plus boot%.
    Boot,
}

impl std::str::FromStr for GridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(GridMode::Point),
            "boot" => Ok(GridMode::Boot),
            _ => Err(Error::InvalidInput(format!("grid mode must be point or boot, got {s:?}"))),
        }
    }
}

/// Redraws allowed after a failed replicate fit.
const MAX_RETRIES: u32 = 3;

/// A point model and `B` replicate models refitted on cluster-bootstrap
/// resamples with the point model's hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapEnsemble {
    pub point: DecisionModel,
    pub replicates: Vec<DecisionModel>,
    pub plan: ResamplePlan,
    pub availability: Availability,
    pub params: GbtParams,
    pub data_fingerprint: String,
}

/// `manifest.json` of an ensemble directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format_version: u32,
    pub seed: u64,
    #[serde(rename = "B")]
    pub b: usize,
    pub fraction: f64,
    pub data_fingerprint: String,
    pub ensemble_fingerprint: String,
    pub availability: Availability,
    pub params: GbtParams,
}

/// SHA-256 of the plays' canonical JSON-lines serialization.
pub fn data_fingerprint(plays: &[PlayRecord]) -> String {
    let mut h = Sha256::new();
    for p in plays {
        // PlayRecord serialization cannot fail: all fields are plain data.
        h.update(serde_json::to_vec(p).expect("play serializes"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn replicate_name(i: usize) -> String {
    format!("rep_{i:03}.model")
}

/// Fits `plan.b` replicates in parallel. A replicate whose fit fails is
/// redrawn from a fresh stream up to three times; results do not depend on
/// scheduling.
pub fn fit_ensemble(
    data: &PreparedData,
    point: DecisionModel,
    params: &GbtParams,
    plan: ResamplePlan,
    config: &FitConfig,
) -> Result<BootstrapEnsemble> {
    plan.validate()?;
    let clusters = GameClusters::new(&data.plays);
    let done = AtomicUsize::new(0);
    let replicates = (0..plan.b)
        .into_par_iter()
        .map(|index| {
            let mut last = String::new();
            for attempt in 0..=MAX_RETRIES {
                let weights = clusters.resample(&plan, index, attempt);
                match fit_weighted(data, params, &weights, config) {
                    Ok(model) => {
                        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                        log::info!("replicate {index} fitted ({n}/{})", plan.b);
                        return Ok(model);
                    }
                    Err(e) => {
                        log::warn!("replicate {index} attempt {attempt} failed: {e}");
                        last = e.to_string();
                    }
                }
            }
            Err(Error::Replicate { index, attempts: MAX_RETRIES as usize + 1, reason: last })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapEnsemble {
        point,
        replicates,
        plan,
        availability: config.availability,
        params: params.clone(),
        data_fingerprint: data_fingerprint(&data.plays),
    })
}

impl BootstrapEnsemble {
    pub fn b(&self) -> usize {
        self.replicates.len()
    }

    /// The first `b` replicates as an ensemble of their own.
    pub fn prefix(&self, b: usize) -> Result<BootstrapEnsemble> {
        if b == 0 || b > self.b() {
            return Err(Error::InvalidInput(format!("prefix {b} of an ensemble of {}", self.b())));
        }
        Ok(BootstrapEnsemble {
            replicates: self.replicates[..b].to_vec(),
            plan: ResamplePlan { b, ..self.plan },
            ..self.clone()
        })
    }

    pub fn point_values(&self, state: &FourthDownState) -> Result<DecisionValues> {
        self.point.evaluate(state, &self.availability)
    }

    pub fn replicate_values(&self, state: &FourthDownState) -> Result<Vec<DecisionValues>> {
        self.replicates.iter().map(|m| m.evaluate(state, &self.availability)).collect()
    }

    /// boot%, interval and bin for one state.
    pub fn report(&self, state: &FourthDownState, level: f64) -> Result<UncertaintyReport> {
        uncertainty_report(self.point_values(state)?, &self.replicate_values(state)?, level)
    }

    /// Decision grid over yardlines and distances. `Boot` mode adds boot% to
    /// every feasible cell.
    pub fn boundary(
        &self,
        template: &FourthDownState,
        yardlines: std::ops::RangeInclusive<u8>,
        ydstogo: std::ops::RangeInclusive<u8>,
        mode: GridMode,
    ) -> Result<Vec<GridCell>> {
        boundary_grid(template, yardlines, ydstogo, |s| {
            let point = self.point_values(s)?;
            let boot_pct = match mode {
                GridMode::Point => None,
                GridMode::Boot => {
                    let agree = self
                        .replicates
                        .iter()
                        .map(|m| m.evaluate(s, &self.availability).map(|v| v.best == point.best))
                        .collect::<Result<Vec<bool>>>()?
                        .into_iter()
                        .filter(|&a| a)
                        .count();
                    Some(super::boot_pct(agree, self.b()))
                }
            };
            Ok(GridValue { best: point.best, effect_size: point.effect_size, boot_pct })
        })
    }

    /// SHA-256 over the serialized point and replicate models, in order.
    pub fn fingerprint(&self) -> Result<String> {
        let mut h = Sha256::new();
        for m in std::iter::once(&self.point).chain(&self.replicates) {
            h.update(m.to_json()?.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn manifest(&self) -> Result<EnsembleManifest> {
        Ok(EnsembleManifest {
            format_version: ENSEMBLE_FORMAT_VERSION,
            seed: self.plan.seed,
            b: self.b(),
            fraction: self.plan.fraction,
            data_fingerprint: self.data_fingerprint.clone(),
            ensemble_fingerprint: self.fingerprint()?,
            availability: self.availability,
            params: self.params.clone(),
        })
    }

    /// Writes `point.model`, `rep_NNN.model` and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<EnsembleManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(path, e))
        };
        write("point.model", self.point.to_json()?)?;
        for (i, m) in self.replicates.iter().enumerate() {
            write(&replicate_name(i), m.to_json()?)?;
        }
        let manifest = self.manifest()?;
        write("manifest.json", serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }

    /// Reads an ensemble directory and checks it against its manifest.
    pub fn load(dir: &Path) -> Result<BootstrapEnsemble> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };
        let manifest: EnsembleManifest = serde_json::from_str(&read("manifest.json")?)?;
        if manifest.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::FormatVersion { found: manifest.format_version, expected: ENSEMBLE_FORMAT_VERSION });
        }
        let point = DecisionModel::from_json(&read("point.model")?)?;
        let replicates = (0..manifest.b)
            .map(|i| DecisionModel::from_json(&read(&replicate_name(i))?))
            .collect::<Result<Vec<_>>>()?;
        let ensemble = BootstrapEnsemble {
            point,
            replicates,
            plan: ResamplePlan { seed: manifest.seed, b: manifest.b, fraction: manifest.fraction },
            availability: manifest.availability,
            params: manifest.params,
            data_fingerprint: manifest.data_fingerprint,
        };
        let found = ensemble.fingerprint()?;
        if found != manifest.ensemble_fingerprint {
            return Err(Error::InvalidInput(format!(
                "{}: models do not match the manifest fingerprint",
                dir.display()
            )));
        }
        Ok(ensemble)
    }
}
