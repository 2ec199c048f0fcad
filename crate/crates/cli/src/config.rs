//! TOML experiment configuration. Every field is optional; command-line
//! flags take precedence over the file, the file over built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{validation, CliError, CliResult};
use crate::table::Format;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub instance: Instance,
    pub softspin: SoftSpinSection,
    pub qa: QaSection,
    pub anneal: AnnealSection,
    pub field: FieldSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Instance {
    pub n: Option<usize>,
    pub j: Option<f64>,
    pub j_grid: Option<Vec<f64>>,
    pub j_range: Option<Range>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        if self.points == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(validation("range needs points >= 1 and finite bounds"));
        }
        Ok(linspace(self.start, self.stop, self.points))
    }
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|k| start + step * k as f64).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftSpinSection {
    pub c: f64,
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub init_amplitude: f64,
    /// `euler` or `rk4`
    pub integrator: String,
    /// `rms` or `mean-square`
    pub radius: String,
    pub early_stop: bool,
    pub variants: Vec<String>,
    pub delta_grid: Option<Vec<f64>>,
    pub tuning_runs: usize,
}

impl Default for SoftSpinSection {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps: 0.003,
            dt: 0.1,
            t_end: 3000.0,
            init_amplitude: 0.001,
            integrator: "euler".into(),
            radius: "rms".into(),
            early_stop: true,
            variants: ["HT", "CIM-I", "CIM-II", "CIM-III"].map(String::from).to_vec(),
            delta_grid: None,
            tuning_runs: 200,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaSection {
    pub b: f64,
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
}

impl Default for QaSection {
    fn default() -> Self {
        Self {
            b: 5.0,
            t0: 0.5,
            dt: 0.1,
            t_end: 500.0,
            sample_every: 10,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSection {
    pub d: f64,
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
}

impl Default for AnnealSection {
    fn default() -> Self {
        Self {
            d: 5.0,
            t0: 0.5,
            dt: 0.01,
            t_end: 500.0,
            sample_every: 100,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub coeff0: f64,
    pub coeff1: f64,
    pub i0: usize,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            coeff0: 0.05,
            coeff1: 0.05,
            i0: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Explicit grid, then range, then the single coupling.
    pub fn j_values(&self) -> CliResult<Option<Vec<f64>>> {
        if let Some(g) = &self.instance.j_grid {
            if g.is_empty() {
                return Err(validation("instance.j_grid is empty"));
            }
            return Ok(Some(g.clone()));
        }
        if let Some(r) = &self.instance.j_range {
            return r.values().map(Some);
        }
        Ok(self.instance.j.map(|j| vec![j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            seed = 3
            [instance]
            n = 12
            j_range = { start = 0.1, stop = 0.5, points = 5 }
            [qa]
            t_end = 50.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.qa.t_end, 50.0);
        assert_eq!(cfg.qa.b, 5.0);
        assert_eq!(cfg.softspin.eps, 0.003);
        let js = cfg.j_values().unwrap().unwrap();
        assert_eq!(js.len(), 5);
        assert!((js[4] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("[qa]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let cfg: ExperimentConfig = toml::from_str("[instance]\nj_grid = []\n").unwrap();
        assert!(cfg.j_values().is_err());
    }
}
