//! Experiment configuration: schema, cross-field validation, and
//! resolution into the core types. Every block is documented in the
//! repository README together with its units and constraints.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use snse_core::galerkin::{ForcingTable, GalerkinConfig, InitialField, NoiseSpec};
use snse_core::noise::{
    GaussCoefficient, JumpCoefficient, MarkSpaceSpec, NoiseCoefficients, WienerColumn,
};
use snse_core::operators::CutoffProfile;
use snse_core::spectral::BasisTable;

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisBlock {
    pub d: usize,
    pub n_max: i64,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_eta0")]
    pub eta0: f64,
}

fn default_m() -> f64 {
    3.0
}

fn default_eta0() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GalerkinBlock {
    /// Galerkin levels to simulate, each at most the basis size.
    pub levels: Vec<usize>,
    pub t_horizon: f64,
    pub dt: f64,
    /// Stopping radius; absent means no stopping.
    #[serde(default)]
    pub r_stop: Option<f64>,
    pub u0: InitialField,
    /// CSV of `(time, mode, dual coefficient)` rows, piecewise constant.
    #[serde(default)]
    pub forcing_csv: Option<String>,
    /// Multiplies every forcing coefficient; the across-level scan uses
    /// synthetic scalings through the library API instead.
    #[serde(default = "one")]
    pub forcing_scale: f64,
    #[serde(default = "yes")]
    pub enable_stokes: bool,
    #[serde(default = "yes")]
    pub enable_nonlinearity: bool,
    #[serde(default = "default_cutoff")]
    pub cutoff_profile: String,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_cutoff() -> String {
    "cubic".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseBlock {
    /// Named preset: `none`, `additive`, `linear_multiplicative`,
    /// `gradient_multiplicative`, or `custom`.
    pub preset: String,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub jump: Option<JumpCoefficient>,
    #[serde(default)]
    pub gauss: Option<GaussCoefficient>,
    #[serde(default)]
    pub mark_space: Option<MarkSpaceSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisBlock {
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: Vec<f64>,
    #[serde(default = "default_theta_grid")]
    pub theta_grid: Vec<f64>,
    #[serde(default = "default_eta_grid")]
    pub eta_grid: Vec<f64>,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_threshold")]
    pub tightness_threshold_frac: f64,
    #[serde(default = "two")]
    pub ratio_limit: f64,
    #[serde(default = "default_stopping")]
    pub stopping: snse_core::paths::StoppingRule,
}

fn two() -> f64 {
    2.0
}

fn default_p_list() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn default_delta_grid() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05, 0.025]
}

fn default_theta_grid() -> Vec<f64> {
    vec![0.02, 0.05, 0.1, 0.2]
}

fn default_eta_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.1]
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_threshold() -> f64 {
    0.1
}

fn default_stopping() -> snse_core::paths::StoppingRule {
    snse_core::paths::StoppingRule::Deterministic { times: vec![0.0] }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunBlock {
    pub paths: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

/// Top-level experiment configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub basis: BasisBlock,
    pub galerkin: GalerkinBlock,
    pub noise: NoiseBlock,
    #[serde(default = "default_analysis")]
    pub analysis: AnalysisBlock,
    pub run: RunBlock,
}

fn default_analysis() -> AnalysisBlock {
    AnalysisBlock {
        p_list: default_p_list(),
        delta_grid: default_delta_grid(),
        theta_grid: default_theta_grid(),
        eta_grid: default_eta_grid(),
        q: 2.0,
        epsilon: default_epsilon(),
        tightness_threshold_frac: default_threshold(),
        ratio_limit: 2.0,
        stopping: default_stopping(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Ingestion(format!("cannot read config {path:?}: {e}")))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Ingestion(format!("config schema error: {e}")))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    /// Canonical serialization used for provenance hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Cross-field constraints that do not need the resolved basis.
    fn check_schema(&self) -> Result<(), CliError> {
        let g = &self.galerkin;
        if g.levels.is_empty() {
            return Err(CliError::Ingestion("no Galerkin levels configured".into()));
        }
        if !(g.t_horizon > 0.0) || !(g.dt > 0.0) {
            return Err(CliError::Ingestion("t_horizon and dt must be positive".into()));
        }
        if let Some(r) = g.r_stop {
            if !(r > 0.0) {
                return Err(CliError::Ingestion("r_stop must be positive".into()));
            }
        }
        if self.run.paths == 0 {
            return Err(CliError::Ingestion("run.paths must be at least 1".into()));
        }
        if !(self.noise.gamma > 0.0) {
            return Err(CliError::Ingestion("gamma must be positive".into()));
        }
        for &p in &self.analysis.p_list {
            if !(1.0 <= p && p <= 4.0 + self.noise.gamma) {
                return Err(CliError::Ingestion(format!(
                    "analysis order p = {p} outside [1, 4 + gamma = {}]",
                    4.0 + self.noise.gamma
                )));
            }
        }
        match self.galerkin.cutoff_profile.as_str() {
            "cubic" | "quintic" => {}
            other => {
                return Err(CliError::Ingestion(format!(
                    "unknown cutoff profile '{other}' (cubic | quintic)"
                )))
            }
        }
        match self.noise.preset.as_str() {
            "none" | "additive" | "linear_multiplicative" | "gradient_multiplicative"
            | "custom" => {}
            other => {
                return Err(CliError::Ingestion(format!("unknown noise preset '{other}'")))
            }
        }
        Ok(())
    }

    pub fn build_basis(&self) -> Result<Arc<BasisTable>, CliError> {
        let b = &self.basis;
        BasisTable::build_with_eta0(b.d, b.n_max, b.m, b.eta0)
            .map_err(|e| CliError::Ingestion(format!("basis: {e}")))
    }

    /// Resolve the noise block into coefficients with derived constants,
    /// checking that the declared preset matches the coefficient shapes.
    pub fn resolve_noise(&self) -> Result<NoiseSpec, CliError> {
        let nb = &self.noise;
        let jump = nb.jump.clone().unwrap_or(JumpCoefficient::None);
        let gauss = nb.gauss.clone().unwrap_or_else(GaussCoefficient::none);
        let shape_ok = match nb.preset.as_str() {
            "none" => jump.is_none() && gauss.columns.is_empty(),
            "additive" => {
                matches!(jump, JumpCoefficient::Additive { .. } | JumpCoefficient::None)
                    && gauss
                        .columns
                        .iter()
                        .all(|c| matches!(c, WienerColumn::Additive { .. }))
            }
            "linear_multiplicative" => {
                matches!(jump, JumpCoefficient::Multiplicative { .. } | JumpCoefficient::None)
                    && gauss
                        .columns
                        .iter()
                        .all(|c| matches!(c, WienerColumn::Multiplicative { .. }))
            }
            "gradient_multiplicative" => gauss
                .columns
                .iter()
                .any(|c| matches!(c, WienerColumn::Gradient { .. })),
            _ => true, // custom accepts any shape
        };
        if !shape_ok {
            return Err(CliError::Ingestion(format!(
                "noise coefficients do not match preset '{}'",
                nb.preset
            )));
        }
        if !jump.is_none() && nb.mark_space.is_none() {
            return Err(CliError::Ingestion(
                "jump coefficient configured without a mark space".into(),
            ));
        }
        let coeffs = NoiseCoefficients::with_derived_constants(
            jump,
            gauss,
            nb.mark_space.as_ref(),
            nb.gamma,
        )
        .map_err(CliError::from_core)?;
        Ok(NoiseSpec { coeffs, marks: nb.mark_space.clone() })
    }

    pub fn load_forcing(&self, base: &Path) -> Result<ForcingTable, CliError> {
        let Some(rel) = &self.galerkin.forcing_csv else {
            return Ok(ForcingTable::none());
        };
        let path = base.parent().unwrap_or(Path::new(".")).join(rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Ingestion(format!("cannot read forcing {path:?}: {e}")))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("time") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(CliError::Ingestion(format!(
                    "forcing row {} must be time,mode,coefficient",
                    lineno + 1
                )));
            }
            let t: f64 = cols[0]
                .parse()
                .map_err(|_| CliError::Ingestion(format!("bad time on row {}", lineno + 1)))?;
            let mode: usize = cols[1]
                .parse()
                .map_err(|_| CliError::Ingestion(format!("bad mode on row {}", lineno + 1)))?;
            let v: f64 = cols[2]
                .parse()
                .map_err(|_| CliError::Ingestion(format!("bad value on row {}", lineno + 1)))?;
            entries.push((t, mode, self.galerkin.forcing_scale * v));
        }
        Ok(ForcingTable { entries })
    }

    /// The per-level Galerkin configuration; cross-checks the level
    /// against the basis size.
    pub fn galerkin_config(
        &self,
        basis: &Arc<BasisTable>,
        level: usize,
        forcing: ForcingTable,
        seed: u64,
    ) -> Result<GalerkinConfig, CliError> {
        if level < 1 || level > basis.len() {
            return Err(CliError::Ingestion(format!(
                "level {level} exceeds basis size {}",
                basis.len()
            )));
        }
        let noise = self.resolve_noise()?;
        Ok(GalerkinConfig {
            level,
            t_horizon: self.galerkin.t_horizon,
            dt: self.galerkin.dt,
            u0: self.galerkin.u0.clone(),
            forcing,
            noise,
            r_stop: self.galerkin.r_stop.unwrap_or(f64::INFINITY),
            seed,
            enable_stokes: self.galerkin.enable_stokes,
            enable_nonlinearity: self.galerkin.enable_nonlinearity,
            cutoff_profile: match self.galerkin.cutoff_profile.as_str() {
                "quintic" => CutoffProfile::Quintic,
                _ => CutoffProfile::Cubic,
            },
        })
    }
}
