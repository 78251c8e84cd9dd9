//! `sllg`: node tables, Wiener paths, sparse grids, single sample paths and
//! the convergence studies, each written as CSV plus a TOML manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sllg_core::collocation::{
    fit_power_law, fit_sg_constants, CollocationError, GridSequence, McReference, MlStudy,
    ProblemSpec, SgStudy, ML_CSV_HEADER, SG_CSV_HEADER,
};
use sllg_core::config::{ConfigError, ConfigOverrides, Manifest, RunConfig};
use sllg_core::index_set::IndexSetError;
use sllg_core::lc_wiener::wiener_eval;
use sllg_core::llg::{Mesh2D, SolveError};
use sllg_core::sparse_grid::GridError;
use sllg_core::{NodeFamily1D, ProfitVariant};

#[derive(Parser)]
#[command(
    name = "sllg",
    version,
    about = "Sparse-grid collocation for the stochastic LLG equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Interpolation nodes of levels 0..=K.
    Nodes,
    /// A Wiener path from standard normal coefficients.
    Wiener,
    /// Quasi-optimal index set and sparse grid within the budget.
    Grid,
    /// One sample path with diagnostics.
    Path,
    /// Sparse-grid convergence study.
    ConvSg,
    /// Single- versus multi-level convergence study.
    ConvMl,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Nodes => "nodes",
            Command::Wiener => "wiener",
            Command::Grid => "grid",
            Command::Path => "path",
            Command::ConvSg => "conv-sg",
            Command::ConvMl => "conv-ml",
        }
    }
}

#[derive(Args, Clone)]
struct Flags {
    /// TOML file whose entries override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    p: Option<u32>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    profit: Option<ProfitVariant>,
    #[arg(long, global = true)]
    mesh_n: Option<usize>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Finest level K.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Monte Carlo samples.
    #[arg(long, global = true)]
    mc: Option<usize>,
    #[arg(long, global = true)]
    mc_dims: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximal number of collocation points per grid.
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    ref_mesh_n: Option<usize>,
    #[arg(long, global = true)]
    ref_tau: Option<f64>,
    #[arg(long, global = true)]
    noise_scale: Option<f64>,
    /// Fit the multilevel constants with pilot runs.
    #[arg(long, global = true)]
    pilot: bool,
}

impl Flags {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            p: self.p,
            sigma2: self.sigma2,
            profit: self.profit,
            mesh_n: self.mesh_n,
            tau: self.tau,
            levels: self.levels,
            mc: self.mc,
            mc_dims: self.mc_dims,
            seed: self.seed,
            budget: self.budget,
            out: self.out.clone(),
            ref_mesh_n: self.ref_mesh_n,
            ref_tau: self.ref_tau,
            noise_scale: self.noise_scale,
            pilot: self.pilot.then_some(true),
            ..Default::default()
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Solver(CollocationError),
    Io(PathBuf, std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Io(..) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Solver(e) => write!(f, "solver failure: {e}"),
            Failure::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

macro_rules! solver_failure {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Solver(e.into())
            }
        })*
    };
}

solver_failure!(CollocationError, SolveError, GridError, IndexSetError);

struct Output<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Output<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Io(path.clone(), e))?;
        self.manifest.outputs.push(name.to_string());
        println!("{}", path.display());
        Ok(())
    }

    fn finish(mut self) -> Result<(), Failure> {
        let path = self.dir.join("manifest.toml");
        self.manifest.outputs.push("manifest.toml".into());
        fs::write(&path, self.manifest.to_toml()).map_err(|e| Failure::Io(path.clone(), e))?;
        println!("{}", path.display());
        Ok(())
    }

    fn result(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.manifest.results.insert(key.into(), value.into());
    }
}

fn load_config(flags: &Flags) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default().apply(&flags.overrides());
    if let Some(path) = &flags.config {
        config = config.apply(&ConfigOverrides::from_file(path)?);
    }
    config.validate()?;
    Ok(config)
}

fn family(config: &RunConfig) -> Result<NodeFamily1D, Failure> {
    NodeFamily1D::new(config.p, config.sigma2).map_err(|e| {
        Failure::Config(ConfigError::Invalid {
            key: "sigma2",
            message: e.to_string(),
        })
    })
}

fn problem_spec(mut spec: ProblemSpec, config: &RunConfig, default_scale: f64) -> ProblemSpec {
    spec.noise = spec
        .noise
        .with_intensity(config.noise_scale.unwrap_or(default_scale));
    spec.solver = config.solver();
    spec
}

fn run(command: Command, config: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&config.out).map_err(|e| Failure::Io(config.out.clone(), e))?;
    let mut out = Output {
        dir: &config.out,
        manifest: Manifest::new(command.name(), config),
    };
    match command {
        Command::Nodes => {
            let fam = family(config)?;
            let mut csv = String::from("level,index,value\n");
            for level in 0..=config.levels as u32 {
                let nodes = fam
                    .make_nodes(level)
                    .map_err(|e| Failure::from(GridError::from(e)))?;
                for (i, v) in nodes.all().iter().enumerate() {
                    writeln!(csv, "{level},{i},{v:.17e}").expect("string write");
                }
            }
            out.write("nodes.csv", csv.as_bytes())?;
        }
        Command::Wiener => {
            let y = McReference::draw(1, config.mc_dims, config.seed).remove(0);
            let steps = config.steps();
            let mut csv = String::from("t,w\n");
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let w = wiener_eval(&y, t).map_err(|e| Failure::from(SolveError::from(e)))?;
                writeln!(csv, "{t},{w:.17e}").expect("string write");
            }
            out.write("wiener.csv", csv.as_bytes())?;
        }
        Command::Grid => {
            let budget = config.budget.unwrap_or(200);
            let seq = GridSequence::with_points(config.profit_params(), budget)?;
            let prefix = seq.prefix_at_most(budget).unwrap_or(1);
            let grid = seq.grid(prefix, family(config)?)?;
            out.write("index_set.txt", grid.index_set().to_text().as_bytes())?;
            let mut csv = String::from("index,point\n");
            for (i, p) in grid.points().iter().enumerate() {
                writeln!(csv, "{i},{p}").expect("string write");
            }
            out.write("grid_points.csv", csv.as_bytes())?;
            let meta = format!(
                "{}\n{}\n",
                sllg_core::SparseGrid::metadata_csv_header(),
                grid.metadata_csv_row("grid")
            );
            out.write("grid_metadata.csv", meta.as_bytes())?;
            out.result("grid_points", grid.len() as i64);
            out.result("index_set_size", grid.index_set().len() as i64);
        }
        Command::Path => {
            let spec = problem_spec(ProblemSpec::sg_experiment(), config, 1.0);
            let d = config.discretization();
            let y = McReference::draw(1, config.mc_dims, config.seed).remove(0);
            let traj = spec.build(d).sample_path(&y)?;
            let mut bin = Vec::new();
            traj.write_binary(&mut bin)
                .map_err(|e| Failure::Io(config.out.join("path.bin"), e))?;
            out.write("path.bin", &bin)?;
            out.write(
                "path_diagnostics.csv",
                traj.diagnostics_csv(&Mesh2D::new(d.n)).as_bytes(),
            )?;
            let worst = (0..=traj.steps())
                .map(|k| traj.modulus_error(k))
                .fold(0.0, f64::max);
            out.result("max_modulus_error", worst);
        }
        Command::ConvSg => {
            let spec = problem_spec(ProblemSpec::sg_experiment(), config, 1.0);
            let study = SgStudy {
                profit: config.profit_params(),
                sigma2: config.sigma2,
                disc: config.discretization(),
                max_points: config.budget.unwrap_or(200),
                mc_samples: config.mc.unwrap_or(128),
                mc_dims: config.mc_dims,
                seed: config.seed,
                spec,
            };
            let rows = study.run()?;
            let mut csv = format!("{SG_CSV_HEADER}\n");
            for r in &rows {
                writeln!(csv, "{}", r.csv()).expect("string write");
            }
            out.write("conv_sg.csv", csv.as_bytes())?;
            if let Some((c_sg, r)) =
                fit_sg_constants(&rows.iter().map(|r| (r.points, r.error)).collect::<Vec<_>>())
            {
                out.result("slope", -r);
                out.result("c_sg", c_sg);
                out.result("r", r);
            }
        }
        Command::ConvMl => {
            let spec = problem_spec(ProblemSpec::ml_experiment(), config, 0.2);
            let study = MlStudy {
                k_max: config.levels,
                profit: config.profit_params(),
                sigma2: config.sigma2,
                constants: config.constants(),
                pilot_points: 40,
                cap: config.budget,
                reference: config.reference(),
                mc_samples: config.mc.unwrap_or(32),
                mc_dims: config.mc_dims,
                seed: config.seed,
                spec,
            };
            let outcome = study.run()?;
            let mut csv = format!("{ML_CSV_HEADER}\n");
            for r in outcome.single.iter().chain(&outcome.multi) {
                writeln!(csv, "{}", r.csv()).expect("string write");
            }
            out.write("conv_ml.csv", csv.as_bytes())?;
            let mut sizes = String::from("K,level,bound,points,capped\n");
            for (k, row) in outcome.sizes.iter().enumerate() {
                for (j, s) in row.iter().enumerate() {
                    writeln!(sizes, "{k},{j},{:e},{},{}", s.bound, s.points, s.capped)
                        .expect("string write");
                }
            }
            out.write("ml_sizes.csv", sizes.as_bytes())?;
            let schedule: Vec<toml::Value> = outcome
                .sizes
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|s| toml::Value::Integer(s.points as i64))
                        .collect::<Vec<_>>()
                        .into()
                })
                .collect();
            out.result("ml_grid_sizes", schedule);
            out.result("c_fe", outcome.constants.c_fe);
            out.result("c_sg", outcome.constants.c_sg);
            out.result("r", outcome.constants.r);
            let slope = |rows: &[sllg_core::collocation::MlRow]| {
                fit_power_law(&rows.iter().map(|r| (r.cost, r.error)).collect::<Vec<_>>())
                    .map(|f| f.exponent)
            };
            if let Some(s) = slope(&outcome.single) {
                out.result("single_level_slope", s);
            }
            if let Some(s) = slope(&outcome.multi) {
                out.result("multi_level_slope", s);
            }
            let exhausted = outcome.multi.iter().any(|r| r.capped);
            out.result("budget_exhausted", exhausted);
            if exhausted {
                eprintln!(
                    "budget exhausted: some multilevel grids were capped at {:?} points",
                    config.budget
                );
            }
        }
    }
    out.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.flags)
        .map_err(Failure::from)
        .and_then(|config| run(cli.command, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sllg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
