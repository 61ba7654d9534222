use crate::emit::CliError;
use fbar_lab::flow::{Anchor, NormalizedMap};
use fbar_lab::maps::{Lebesgue, Sampler, TorusMap, Translation3};
use fbar_lab::roof::{assemble_roof, build_p_mu_n, PlateauOptions, RoofFunction};
use fbar_lab::rotation::{build_rotation, RotationSpec};
use fbar_lab::trigpoly::TrigPoly;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateauConfig {
    pub n: usize,
    pub mu: f64,
    pub options: PlateauOptions,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig { n: 1, mu: 0.02, options: PlateauOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoofConfig {
    pub depth: usize,
    /// Zero-average polynomial added to the roof.
    pub base: Option<TrigPoly>,
    pub plateaus: Vec<PlateauConfig>,
    pub anchor: Anchor,
    /// A serialized roof; overrides the fields above.
    pub file: Option<PathBuf>,
}

impl Default for RoofConfig {
    fn default() -> Self {
        RoofConfig { depth: 2, base: None, plateaus: Vec::new(), anchor: Anchor::Translated, file: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rotation: Option<RotationSpec>,
    pub roof: RoofConfig,
    pub seed: u64,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { rotation: None, roof: RoofConfig::default(), seed: 0, samples: 100_000, out: None }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    pub fn rotation(&self, precision_bits: Option<u32>) -> Result<RotationSpec, CliError> {
        let mut spec = match &self.rotation {
            Some(s) => s.clone(),
            None => build_rotation(&[1; 30], &[2; 20], 256)?,
        };
        if let Some(bits) = precision_bits {
            spec.precision_bits = bits;
        }
        Ok(spec)
    }

    pub fn roof(&self, spec: &RotationSpec) -> Result<RoofFunction, CliError> {
        if let Some(path) = &self.roof.file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read roof {}: {e}", path.display())))?;
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("roof: {e}")))?;
            if value.get("schema_version").is_some() {
                value = value["report"].take();
            }
            let roof: RoofFunction = serde_json::from_value(value).map_err(|e| CliError::usage(format!("roof: {e}")))?;
            let roof = roof.rebuild();
            roof.check_positive()?;
            return Ok(roof);
        }
        let base = self.roof.base.clone().unwrap_or_else(|| TrigPoly::zero(2));
        let mut subs = BTreeMap::new();
        for p in &self.roof.plateaus {
            subs.insert(p.n, build_p_mu_n(spec, p.n, p.mu, &p.options)?);
        }
        Ok(assemble_roof(spec, &base, subs, self.roof.depth)?)
    }

    pub fn normalized_map(&self, spec: &RotationSpec) -> Result<NormalizedMap, CliError> {
        Ok(NormalizedMap::new(Arc::new(self.roof(spec)?), spec, self.roof.anchor)?)
    }
}

/// A map of T^3 with its invariant measure.
pub struct System {
    pub map: Box<dyn TorusMap>,
    pub sampler: Box<dyn Sampler>,
}

impl System {
    pub fn translation(v: [f64; 3]) -> System {
        System { map: Box::new(Translation3::new(v)), sampler: Box::new(Lebesgue) }
    }

    pub fn flow(map: NormalizedMap) -> System {
        let sampler = map.sampler();
        System { map: Box::new(map), sampler: Box::new(sampler) }
    }
}
