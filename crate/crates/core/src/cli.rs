use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::celldensity::{mass_ceiling, validate_params};
use crate::error::{Error, Result};
use crate::io::{write_diagnostics_csv, write_vtu, ParamOverrides, RunConfig};
use crate::mesh::{load_mesh, quality_report, MeshFormat};
use crate::simulation::{
    classify_blowup, preset, preset_names, read_checkpoint, write_checkpoint, BlowUpCriterion, DiagnosticsRow,
    SimState, Simulation,
};

#[derive(Parser, Debug)]
#[command(name = "chemotaxis", version, about = "Positivity-preserving upwind DG solver for chemotaxis models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a checkpoint.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Output directory (overrides the file and the environment).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Snapshot every N steps.
        #[arg(long)]
        cadence: Option<usize>,
        /// Resume from a checkpoint written by an earlier run.
        #[arg(long)]
        restart: Option<PathBuf>,
        #[command(flatten)]
        overrides: ParamFlags,
    },
    /// List the built-in experiment presets.
    Presets,
    /// Check the model parameters against the boundedness conditions.
    Validate {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        overrides: ParamFlags,
    },
    /// Print mesh size and quality.
    MeshInfo {
        #[command(flatten)]
        source: ConfigSource,
        /// Mesh file to inspect instead of a configured mesh.
        #[arg(long, conflicts_with_all = ["config", "preset"])]
        mesh: Option<PathBuf>,
        /// Mesh file format (default: from the extension).
        #[arg(long, requires = "mesh")]
        format: Option<String>,
    },
}

#[derive(Args, Debug)]
struct ConfigSource {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (ignored when --config is given).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
}

impl ConfigSource {
    fn load(&self) -> Result<Option<RunConfig>> {
        match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path).map(Some),
            (None, Some(name)) => RunConfig::from_preset(name).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn require(&self) -> Result<RunConfig> {
        self.load()?
            .ok_or_else(|| Error::Config("either --config or --preset is required".into()))
    }
}

macro_rules! param_flags {
    ($($field:ident),* $(,)?) => {
        /// Model parameter overrides; these win over the configuration file.
        #[derive(Args, Debug)]
        struct ParamFlags {
            $(
                #[arg(long, value_name = "VALUE")]
                $field: Option<f64>,
            )*
        }

        impl ParamFlags {
            fn overrides(&self) -> ParamOverrides {
                let mut values = Vec::new();
                $(
                    if let Some(v) = self.$field {
                        values.push((stringify!($field).to_string(), v));
                    }
                )*
                ParamOverrides { values }
            }
        }
    };
}

param_flags!(
    chi, xi, lambda, mu, c, n1, n2, n3, rho, k, gamma, a, d_decay, alpha, beta, eta, eps, t_final, dt
);

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code: 0 on success, 1 on errors, 2 on usage errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::StepFailed { source, .. } = &e {
                eprintln!("  caused by: {source}");
            }
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Presets => {
            for name in preset_names() {
                let p = preset(name)?;
                writeln!(out, "{:<32} {}", p.name, p.description)?;
            }
            Ok(())
        }
        Command::Validate { source, overrides } => {
            let mut config = source.require()?;
            config.apply_overrides(&overrides.overrides())?;
            let dim = match &config.mesh {
                crate::simulation::MeshSpec::Disk { .. } => 2,
                crate::simulation::MeshSpec::Ball { .. } => 3,
                spec => spec.build()?.dim(),
            };
            let report = validate_params(&config.params, dim);
            writeln!(out, "dimension {dim}")?;
            for r in &report.reports {
                writeln!(out, "{r}")?;
            }
            writeln!(out, "condgamma threshold {}", report.gamma_threshold)?;
            Ok(())
        }
        Command::MeshInfo { source, mesh, format } => {
            let mesh = match mesh {
                Some(path) => {
                    let format = match format {
                        Some(f) => f.parse()?,
                        None => MeshFormat::from_path(&path),
                    };
                    load_mesh(&path, format)?
                }
                None => source.require()?.mesh.build()?,
            };
            let q = quality_report(&mesh);
            writeln!(out, "dimension         {}", mesh.dim())?;
            writeln!(out, "vertices          {}", mesh.num_vertices())?;
            writeln!(out, "elements          {}", mesh.num_elements())?;
            writeln!(out, "interior facets   {}", mesh.interior_facets().len())?;
            writeln!(out, "boundary facets   {}", mesh.boundary_facets().len())?;
            writeln!(out, "measure           {:.6}", mesh.domain_measure())?;
            writeln!(out, "h                 {:.6e}", q.h)?;
            writeln!(out, "max angle (deg)   {:.3}", q.max_angle.to_degrees())?;
            writeln!(out, "non-obtuse        {}", q.is_non_obtuse)?;
            writeln!(out, "shape regularity  {:.4}", q.shape_regularity_ratio)?;
            Ok(())
        }
        Command::Run {
            source,
            output_dir,
            cadence,
            restart,
            overrides,
        } => {
            let mut config = source.require()?;
            config.apply_overrides(&overrides.overrides())?;
            if let Some(c) = cadence {
                config.output.cadence = c;
                config.check()?;
            }
            config.resolve_output_dir(output_dir.as_deref());
            run(&config, restart.as_deref(), &mut out)
        }
    }
}

fn run(config: &RunConfig, restart: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.to_toml_string())?;

    let mesh = config.mesh.build()?;
    let sim = Simulation::new(mesh, config.params.clone(), config.solver.options())?;
    let initial = match restart {
        Some(path) => read_checkpoint(path)?,
        None => config.initial.discretise(sim.mesh())?,
    };
    let report = validate_params(sim.params(), sim.mesh().dim());
    for r in report.reports.iter().filter(|r| !r.satisfied) {
        log::info!("advisory: {r}");
    }
    let ceiling = mass_ceiling(sim.params(), initial.u.integral(sim.mesh()), sim.mesh().domain_measure());
    writeln!(
        out,
        "mesh: {} elements, h = {:.3e}; {} steps of dt = {:e}",
        sim.mesh().num_elements(),
        sim.mesh().h(),
        sim.params().num_steps()?.saturating_sub(initial.step),
        sim.params().dt
    )?;

    let cadence = config.output.cadence;
    let total = sim.params().num_steps()?;
    let write_snapshots = config.output.vtu;
    let mut observer = |state: &SimState, _row: &DiagnosticsRow| -> Result<()> {
        if write_snapshots && (state.step % cadence == 0 || state.step == total) {
            let path = dir.join(format!("snapshot_{:06}.vtu", state.step));
            write_vtu(sim.mesh(), sim.operators(), state, &path)?;
        }
        Ok(())
    };
    let result = sim.run(initial, &mut observer);
    let (last, rows) = match result {
        Ok(r) => r,
        Err(Error::StepFailed { step, source, state }) => {
            if config.output.checkpoint {
                write_checkpoint(&state, &dir.join("failed.checkpoint"))?;
            }
            return Err(Error::StepFailed { step, source, state });
        }
        Err(e) => return Err(e),
    };
    write_diagnostics_csv(&rows, &dir.join("diagnostics.csv"))?;
    if config.output.checkpoint {
        write_checkpoint(&last, &dir.join("final.checkpoint"))?;
    }
    let verdict = classify_blowup(&rows, &BlowUpCriterion::default());
    let fallbacks = rows.iter().filter(|r| r.fallback_used).count();
    let final_row = rows.last().expect("at least the initial row");
    writeln!(
        out,
        "t = {:e}: mass {:.6e} (ceiling {:.6e}), min u {:.3e}, max u {:.6e}; {} fallback steps; {:?} (peak {:.6e})",
        final_row.t, final_row.mass, ceiling, final_row.min_u, final_row.max_u, fallbacks, verdict.classification, verdict.peak
    )?;
    writeln!(out, "output written to {}", dir.display())?;
    Ok(())
}
