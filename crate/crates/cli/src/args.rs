use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Physically plausible scene layouts: refine, simulate, optimize, score
/// and edit scenes of rigid objects.
///
/// Scene and layout files share one JSON schema; OBJ meshes are referenced
/// relative to the scene file. Set PAT3D_LOG (error, warn, info, debug,
/// trace) for diagnostics on stderr. Failures exit with 1 and a JSON error
/// on stderr; usage errors exit with 2.
#[derive(Debug, Parser)]
#[command(name = "layoutsim", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub sim: SimFlags,

    /// Seed for the randomized parts (scene generation, gradient-check
    /// coordinate choice). The pipeline itself is deterministic.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Tight contact threshold (dhat 5e-4 m) and friction velocity
    /// threshold (eps-v 1e-5 m/s) for small stacked blocks.
    StackedBlocks,
}

/// Overrides of the scene's simulation parameters. Explicit flags win over
/// the preset, which wins over the scene file.
#[derive(Debug, Clone, Default, Args)]
pub struct SimFlags {
    /// Parameter preset
    #[arg(long, global = true, value_enum, value_name = "NAME")]
    pub preset: Option<Preset>,

    /// Maximum simulated frames per run, a count [scene default: 300]. For
    /// gradcheck, the exact frame count [default: 12]
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub frames: Option<u64>,

    /// Time step in seconds [scene default: 0.03]
    #[arg(long, global = true, value_name = "SECONDS", value_parser = positive)]
    pub dt: Option<f64>,

    /// Coulomb friction coefficient, dimensionless [scene default: 0.2]
    #[arg(long, global = true, value_name = "COEFF", value_parser = non_negative)]
    pub mu: Option<f64>,

    /// Contact distance threshold in meters [scene default: 0.01 × mean mesh size]
    #[arg(long, global = true, value_name = "METERS", value_parser = positive)]
    pub dhat: Option<f64>,

    /// Static friction velocity threshold in m/s [scene default: 0.01 × mean mesh size per second]
    #[arg(long = "eps-v", global = true, value_name = "M_PER_S", value_parser = positive)]
    pub eps_v: Option<f64>,

    /// Contact stiffness in pascals, mapped to the barrier stiffness [scene default: 1e9]
    #[arg(long, global = true, value_name = "PASCALS", value_parser = positive)]
    pub contact_stiffness: Option<f64>,

    /// Equilibrium velocity residual in m/s [scene default: 0.1]
    #[arg(long, global = true, value_name = "M_PER_S", value_parser = positive)]
    pub newton_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OptFlags {
    /// ADAM learning rate, in meters of translation per step [default: 1e-3]
    #[arg(long, value_name = "METERS", default_value_t = 1e-3, value_parser = positive)]
    pub lr: f64,

    /// Maximum optimization epochs, a count [default: 50]
    #[arg(long, value_name = "N", default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,

    /// Loss sampling interval in frames; the last frame always counts [default: 10]
    #[arg(long, value_name = "FRAMES", default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub interval: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SceneInput {
    /// Scene file (JSON)
    #[arg(long, value_name = "PATH")]
    pub scene: PathBuf,

    /// Layout file replacing the scene's object transforms: a scene file or
    /// a {"states": {id: state}} map
    #[arg(long, value_name = "PATH")]
    pub layout: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    On,
    Contain,
    Support,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refine the coarse layout: clamp children into their parents, separate
    /// siblings, lift above supports. Writes the refined scene and prints
    /// the per-object translations.
    Init {
        #[command(flatten)]
        input: SceneInput,
        /// Output scene file; meshes are written next to it
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Write the refinement report here instead of stdout
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },

    /// Simulate to equilibrium and write the trajectory as NDJSON (a header
    /// line, then one line per frame with 12 numbers per object).
    Simulate {
        #[command(flatten)]
        input: SceneInput,
        /// Trajectory output file
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },

    /// Refine, then optimize the layout through simulation. Writes the
    /// equilibrium the optimized layout settles to.
    Optimize {
        #[command(flatten)]
        input: SceneInput,
        #[command(flatten)]
        opt: OptFlags,
        /// Output scene file holding the delivered layout
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Per-epoch history as NDJSON (epoch, loss, gradient ∞-norm, wall time in ms)
        #[arg(long, value_name = "PATH")]
        history: Option<PathBuf>,
        /// Also write the optimized starting layout, before settling
        #[arg(long, value_name = "PATH")]
        initial_out: Option<PathBuf>,
    },

    /// Displacement and penetration metrics of a trajectory.
    Metrics {
        /// Scene file the trajectory was simulated from
        #[arg(long, value_name = "PATH")]
        scene: PathBuf,
        /// Trajectory file written by `simulate`
        #[arg(long, value_name = "PATH")]
        trajectory: PathBuf,
        /// Write the report here instead of stdout
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Add or delete one object, then simulate to a new equilibrium.
    Edit {
        #[command(flatten)]
        input: SceneInput,
        /// Object to delete; its children move to its parent
        #[arg(
            long,
            value_name = "ID",
            conflicts_with = "add",
            required_unless_present = "add"
        )]
        delete: Option<String>,
        /// Id of an object to add
        #[arg(long, value_name = "ID", requires = "mesh")]
        add: Option<String>,
        /// OBJ mesh of the added object, in meters
        #[arg(long, value_name = "PATH", requires = "add")]
        mesh: Option<PathBuf>,
        /// Parent of the added object [default: GROUND]
        #[arg(long, value_name = "ID", requires = "add")]
        parent: Option<String>,
        /// Relation of the added object to its parent
        #[arg(long, value_enum, default_value = "on", requires = "add")]
        kind: Kind,
        /// Coarse position of the added object in meters, as X,Y,Z
        #[arg(long, value_name = "X,Y,Z", value_parser = vec3, allow_hyphen_values = true, requires = "add")]
        at: Option<[f64; 3]>,
        /// Density of the added object in kg/m³ [default: 1000]
        #[arg(long, value_name = "KG_PER_M3", value_parser = positive, requires = "add")]
        density: Option<f64>,
        /// Output scene file at the new equilibrium
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Also write the settling trajectory
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },

    /// Compare the adjoint gradient of the containment loss with central
    /// finite differences on randomly chosen translation coordinates. Runs a
    /// fixed number of frames with a tight Newton tolerance.
    Gradcheck {
        #[command(flatten)]
        input: SceneInput,
        /// Number of coordinates to check
        #[arg(long, value_name = "K", default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
        coords: u64,
        /// Finite-difference step in meters
        #[arg(long, value_name = "METERS", default_value_t = 1e-5, value_parser = positive)]
        h: f64,
        /// Loss sampling interval in frames [default: 5]
        #[arg(long, value_name = "FRAMES", default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        interval: u64,
    },

    /// Serve the scene to the editor over HTTP and WebSocket.
    Serve {
        #[command(flatten)]
        input: SceneInput,
        /// Directory of OBJ files offered for addition [default: <scene dir>/assets]
        #[arg(long, value_name = "DIR")]
        assets: Option<PathBuf>,
        /// Listen address
        #[arg(long, value_name = "HOST:PORT", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },

    /// Write the bundled acceptance scenes, plus optional random four-object
    /// trees seeded from --seed, each to <out>/<name>/scene.json.
    GenScenes {
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Number of random tree scenes
        #[arg(long, value_name = "N", default_value_t = 0)]
        random: u64,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive number"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not a non-negative number"))
    }
}

fn vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err("expected three comma-separated numbers".into());
    };
    let f = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok([f(x)?, f(y)?, f(z)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(vec3("1, -2,0.5").unwrap(), [1.0, -2.0, 0.5]);
        assert!(vec3("1,2").is_err());
        assert!(vec3("1,a,2").is_err());
    }

    #[test]
    fn numbers_are_range_checked() {
        assert!(positive("0").is_err());
        assert!(positive("inf").is_err());
        assert_eq!(non_negative("0").unwrap(), 0.0);
    }

    #[test]
    fn edit_needs_exactly_one_operation() {
        let parse = |args: &[&str]| {
            Cli::try_parse_from(
                ["layoutsim", "edit", "--scene", "s.json", "--out", "o.json"]
                    .iter()
                    .chain(args),
            )
        };
        assert!(parse(&[]).is_err());
        assert!(parse(&["--delete", "a"]).is_ok());
        assert!(parse(&["--add", "a"]).is_err());
        assert!(parse(&["--add", "a", "--mesh", "a.obj", "--at=-0.1,0,0"]).is_ok());
        assert!(parse(&["--delete", "a", "--add", "b", "--mesh", "b.obj"]).is_err());
        assert!(parse(&["--delete", "a", "--parent", "b"]).is_err());
    }
}
