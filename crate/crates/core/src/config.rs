//! Run configuration shared by the command line and TOML config files, and
//! the run manifest written next to every output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collocation::{Discretization, MlConstants};
use crate::index_set::{ProfitParams, ProfitVariant};
use crate::llg::SolverOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid setting {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

/// Complete settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: u32,
    pub sigma2: f64,
    pub profit: ProfitVariant,
    pub mesh_n: usize,
    pub tau: f64,
    /// Finest level `K` of the level schedule.
    pub levels: usize,
    /// Monte Carlo samples; the subcommand picks a default when unset.
    pub mc: Option<usize>,
    /// Length of the Monte Carlo parameter vectors.
    pub mc_dims: usize,
    pub seed: u64,
    /// Cap on the collocation points of any grid.
    pub budget: Option<usize>,
    pub out: PathBuf,
    pub ref_mesh_n: usize,
    pub ref_tau: f64,
    /// Noise intensity; the subcommand picks a default when unset.
    pub noise_scale: Option<f64>,
    /// Balancing constants of the multilevel sizing.
    pub c_fe: f64,
    pub c_sg: f64,
    pub r: f64,
    /// Fit the balancing constants with pilot runs instead.
    pub pilot: bool,
    /// Relative residual and iteration cap of the linear solver per step.
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = MlConstants::default();
        Self {
            p: 2,
            sigma2: 5.0,
            profit: ProfitVariant::Improved,
            mesh_n: 16,
            tau: 1.0 / 64.0,
            levels: 3,
            mc: None,
            mc_dims: 128,
            seed: 1,
            budget: None,
            out: PathBuf::from("out"),
            ref_mesh_n: 32,
            ref_tau: 1.0 / 128.0,
            noise_scale: None,
            c_fe: c.c_fe,
            c_sg: c.c_sg,
            r: c.r,
            pilot: false,
            solver_tolerance: SolverOptions::default().tolerance,
            solver_max_iterations: SolverOptions::default().max_iterations,
        }
    }
}

/// Partial settings: command-line flags or a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub p: Option<u32>,
    pub sigma2: Option<f64>,
    pub profit: Option<ProfitVariant>,
    pub mesh_n: Option<usize>,
    pub tau: Option<f64>,
    pub levels: Option<usize>,
    pub mc: Option<usize>,
    pub mc_dims: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub out: Option<PathBuf>,
    pub ref_mesh_n: Option<usize>,
    pub ref_tau: Option<f64>,
    pub noise_scale: Option<f64>,
    pub c_fe: Option<f64>,
    pub c_sg: Option<f64>,
    pub r: Option<f64>,
    pub pilot: Option<bool>,
    pub solver_tolerance: Option<f64>,
    pub solver_max_iterations: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

macro_rules! apply_fields {
    ($cfg:expr, $o:expr, [$($f:ident),*], [$($opt:ident),*]) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
        $(if $o.$opt.is_some() { $cfg.$opt = $o.$opt.clone(); })*
    };
}

/// Number of steps if `tau = 2^-k`.
fn dyadic_steps(tau: f64) -> Option<usize> {
    if !(tau > 0.0 && tau <= 1.0) {
        return None;
    }
    let steps = (1.0 / tau).round();
    let steps_u = steps as usize;
    (steps_u.is_power_of_two() && 1.0 / steps == tau && steps_u <= 1 << 16).then_some(steps_u)
}

impl RunConfig {
    pub fn apply(mut self, o: &ConfigOverrides) -> Self {
        apply_fields!(
            self,
            o,
            [
                p,
                sigma2,
                profit,
                mesh_n,
                tau,
                levels,
                mc_dims,
                seed,
                out,
                ref_mesh_n,
                ref_tau,
                c_fe,
                c_sg,
                r,
                pilot,
                solver_tolerance,
                solver_max_iterations
            ],
            [mc, budget, noise_scale]
        );
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=8).contains(&self.p) {
            return Err(invalid("p", format!("{} is outside 2..=8", self.p)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 1.0) {
            return Err(invalid("sigma2", "must be finite and larger than 1"));
        }
        let pow2 = |n: usize| n.is_power_of_two() && n <= 1024;
        if !pow2(self.mesh_n) {
            return Err(invalid(
                "mesh-n",
                format!("{} is not a power of two up to 1024", self.mesh_n),
            ));
        }
        dyadic_steps(self.tau)
            .ok_or_else(|| invalid("tau", format!("{} is not 2^-k", self.tau)))?;
        if self.levels > 6 {
            return Err(invalid("levels", "at most 6"));
        }
        if self.mc == Some(0) {
            return Err(invalid("mc", "at least one sample"));
        }
        if self.mc_dims == 0 {
            return Err(invalid("mc-dims", "at least one dimension"));
        }
        if self.budget == Some(0) {
            return Err(invalid("budget", "at least one point"));
        }
        if !pow2(self.ref_mesh_n) || self.ref_mesh_n < 1 << self.levels {
            return Err(invalid(
                "ref-mesh-n",
                "must be a power of two refining the finest level",
            ));
        }
        let ref_steps =
            dyadic_steps(self.ref_tau).ok_or_else(|| invalid("ref-tau", "is not 2^-k"))?;
        if ref_steps < 1 << (self.levels + 2) {
            return Err(invalid("ref-tau", "must refine the finest level"));
        }
        if let Some(s) = self.noise_scale {
            if !s.is_finite() {
                return Err(invalid("noise-scale", "must be finite"));
            }
        }
        if self.solver_max_iterations == 0 {
            return Err(invalid("solver-max-iterations", "at least one iteration"));
        }
        for (key, v) in [
            ("c-fe", self.c_fe),
            ("c-sg", self.c_sg),
            ("r", self.r),
            ("solver-tolerance", self.solver_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        dyadic_steps(self.tau).expect("validated")
    }

    pub fn discretization(&self) -> Discretization {
        Discretization::new(self.mesh_n, self.steps())
    }

    pub fn reference(&self) -> Discretization {
        Discretization::new(
            self.ref_mesh_n,
            dyadic_steps(self.ref_tau).expect("validated"),
        )
    }

    pub fn profit_params(&self) -> ProfitParams {
        ProfitParams::new(self.p, self.profit)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
        }
    }

    pub fn constants(&self) -> Option<MlConstants> {
        (!self.pilot).then_some(MlConstants {
            c_fe: self.c_fe,
            c_sg: self.c_sg,
            r: self.r,
        })
    }
}

/// Record of a run: the full configuration, the outputs and derived values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub outputs: Vec<String>,
    pub config: RunConfig,
    pub results: toml::Table,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            config: config.clone(),
            results: toml::Table::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is serialisable")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.steps(), 64);
        assert_eq!(c.reference(), Discretization::new(32, 128));
        assert_eq!(c.constants(), Some(MlConstants::default()));
    }

    #[test]
    fn file_overrides_flags() {
        let flags = ConfigOverrides {
            p: Some(3),
            seed: Some(9),
            ..Default::default()
        };
        let file = ConfigOverrides::from_toml("p = 2\nprofit = \"basic\"\nbudget = 50\n").unwrap();
        let c = RunConfig::default().apply(&flags).apply(&file);
        assert_eq!(
            (c.p, c.seed, c.profit, c.budget),
            (2, 9, ProfitVariant::Basic, Some(50))
        );
        assert!(ConfigOverrides::from_toml("unknown = 1").is_err());
        assert!(ConfigOverrides::from_toml("p = \"two\"").is_err());
    }

    #[test]
    fn validation() {
        let bad = |o: ConfigOverrides| RunConfig::default().apply(&o).validate().is_err();
        assert!(bad(ConfigOverrides {
            tau: Some(0.03),
            ..Default::default()
        }));
        assert!(bad(ConfigOverrides {
            mesh_n: Some(12),
            ..Default::default()
        }));
        assert!(bad(ConfigOverrides {
            p: Some(1),
            ..Default::default()
        }));
        assert!(bad(ConfigOverrides {
            sigma2: Some(0.5),
            ..Default::default()
        }));
        assert!(bad(ConfigOverrides {
            mc: Some(0),
            ..Default::default()
        }));
        assert!(bad(ConfigOverrides {
            levels: Some(6),
            ..Default::default()
        }));
        assert!(!bad(ConfigOverrides {
            tau: Some(0.25),
            mesh_n: Some(1),
            ..Default::default()
        }));
        assert_eq!(dyadic_steps(1.0), Some(1));
        assert_eq!(dyadic_steps(0.0), None);
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::new("conv-sg", &RunConfig::default());
        m.outputs.push("conv_sg.csv".into());
        m.results.insert("slope".into(), toml::Value::Float(-0.4));
        assert_eq!(Manifest::from_toml(&m.to_toml()).unwrap(), m);
    }
}
