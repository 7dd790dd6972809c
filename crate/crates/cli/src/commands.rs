use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use layoutsim::edit::{edit_and_settle, Edit, NewObject};
use layoutsim::geometry::obj::read_obj;
use layoutsim::layout::{default_gap, refine_layout};
use layoutsim::metrics::MetricsReport;
use layoutsim::objective::{loss_and_gradient, LossMode, OptimizerConfig};
use layoutsim::pipeline::{evaluate_layout, run_pipeline};
use layoutsim::scene::{ObjectSpec, Parent, RelationKind, SceneConfig};
use layoutsim::scenes::{export_acceptance_scenes, random_tree_scene};
use layoutsim::sim::{
    params_hash, read_trajectory, write_trajectory, System, TrajectoryHeader, TRAJECTORY_FORMAT,
};
use layoutsim::state::{stack, unstack, AffineState};
use layoutsim::{Error, Layout, Scene};
use layoutsim_service::{SessionHandle, SessionOptions};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::args::{Kind, OptFlags, Preset, SceneInput, SimFlags};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn apply_sim_flags(scene: &mut Scene, flags: &SimFlags) -> Result<()> {
    let p = &mut scene.config.sim_params;
    if flags.preset == Some(Preset::StackedBlocks) {
        p.dhat = Some(5e-4);
        p.eps_v = Some(1e-5);
    }
    if let Some(n) = flags.frames {
        p.max_frames = n as usize;
    }
    if let Some(v) = flags.dt {
        p.dt = v;
    }
    if let Some(v) = flags.mu {
        p.friction_mu = v;
    }
    if let Some(v) = flags.dhat {
        p.dhat = Some(v);
    }
    if let Some(v) = flags.eps_v {
        p.eps_v = Some(v);
    }
    if let Some(v) = flags.contact_stiffness {
        p.contact_stiffness = v;
    }
    if let Some(v) = flags.newton_tol {
        p.newton_tol = v;
    }
    scene.config.validate()?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()).into(),
        _ => Error::Io(e).into(),
    })
}

/// Object states from a layout file, in scene order.
fn read_layout(path: &Path, config: &SceneConfig) -> Result<Vec<AffineState>> {
    let text = read_text(path)?;
    let parse = |e: serde_json::Error| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse)?;
    let layout = if value.get("objects").is_some() {
        Layout::from_config(&SceneConfig::from_json(&text)?)
    } else {
        serde_json::from_value::<Layout>(value).map_err(parse)?
    };
    Ok(layout.ordered(config)?)
}

fn load(input: &SceneInput, flags: &SimFlags) -> Result<Scene> {
    let mut scene = Scene::load(&input.scene)?;
    if let Some(path) = &input.layout {
        let states = read_layout(path, &scene.config)?;
        scene = scene.with_states(&states);
    }
    apply_sim_flags(&mut scene, flags)?;
    Ok(scene)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(Error::Io)?))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match path {
        Some(p) => create(p)?.write_all(text.as_bytes()).map_err(Error::Io)?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Error::Io)?,
    }
    Ok(())
}

fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
    }
    Ok(scene.save(path)?)
}

fn scene_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) if stem == "scene" => dir.to_string_lossy().into_owned(),
        _ => stem,
    }
}

fn write_frames(
    path: &Path,
    scene: &Scene,
    name: String,
    frames: &[Vec<AffineState>],
) -> Result<()> {
    let header = TrajectoryHeader {
        format: TRAJECTORY_FORMAT,
        scene: name,
        params_hash: params_hash(&scene.config),
        objects: scene.ids().into_iter().map(String::from).collect(),
    };
    let mut out = create(path)?;
    write_trajectory(&mut out, &header, frames)?;
    out.flush().map_err(Error::Io)?;
    Ok(())
}

pub fn init(input: &SceneInput, flags: &SimFlags, out: &Path, report: Option<&Path>) -> Result<()> {
    let scene = load(input, flags)?;
    let tree = scene.tree()?;
    let refined = refine_layout(&scene, &tree, default_gap(&scene))?;
    save_scene(&scene.with_states(&refined.states), out)?;
    write_json(report, &refined.report)
}

pub fn simulate(input: &SceneInput, flags: &SimFlags, out: &Path) -> Result<()> {
    let scene = load(input, flags)?;
    let (metrics, traj) = evaluate_layout(&scene, &scene.states())?;
    let frames: Vec<Vec<AffineState>> = traj.states.iter().map(unstack).collect();
    write_frames(out, &scene, scene_name(&input.scene), &frames)?;
    write_json(
        None,
        &json!({
            "frames": traj.frames(),
            "converged": traj.converged,
            "D": metrics.D,
            "R": metrics.R,
        }),
    )
}

pub fn optimize(
    input: &SceneInput,
    flags: &SimFlags,
    opt: &OptFlags,
    out: &Path,
    history: Option<&Path>,
    initial_out: Option<&Path>,
) -> Result<()> {
    let scene = load(input, flags)?;
    let cfg = OptimizerConfig {
        learning_rate: opt.lr,
        max_epochs: opt.epochs as usize,
        loss_frame_interval: opt.interval as usize,
        ..Default::default()
    };
    let mut log_epoch = |r: &layoutsim::objective::EpochRecord| {
        log::info!(
            "epoch {}: loss {:?}, |g| {:?}, {:.0} ms",
            r.epoch,
            r.loss,
            r.grad_norm,
            r.wall_ms
        );
    };
    let outcome = run_pipeline(&scene, true, &cfg, Some(&mut log_epoch))?;
    save_scene(&scene.with_states(&outcome.layout), out)?;
    let opt_result = outcome.optimization.as_ref().expect("optimization ran");
    if let Some(p) = initial_out {
        save_scene(&scene.with_states(&opt_result.states), p)?;
    }
    if let Some(p) = history {
        let mut w = create(p)?;
        for r in &opt_result.history {
            writeln!(w, "{}", serde_json::to_string(r).expect("serializable"))
                .map_err(Error::Io)?;
        }
        w.flush().map_err(Error::Io)?;
    }
    write_json(
        None,
        &json!({
            "best_loss": opt_result.best_loss,
            "best_epoch": opt_result.best_epoch,
            "summary": outcome.summary,
        }),
    )
}

pub fn metrics(scene: &Path, trajectory: &Path, out: Option<&Path>) -> Result<()> {
    let scene = Scene::load(scene)?;
    let file = File::open(trajectory).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingAsset(trajectory.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let (header, frames) = read_trajectory(BufReader::new(file))?;
    let ids: Vec<String> = scene.ids().into_iter().map(String::from).collect();
    if header.objects != ids {
        return Err(Error::TrajectoryMismatch(format!(
            "trajectory objects {:?} do not match the scene {:?}",
            header.objects, ids
        ))
        .into());
    }
    let report = MetricsReport::compute(&ids, &scene.meshes, &frames)?;
    write_json(out, &report)
}

pub struct AddArgs<'a> {
    pub id: &'a str,
    pub mesh: &'a Path,
    pub parent: Option<&'a str>,
    pub kind: Kind,
    pub at: Option<[f64; 3]>,
    pub density: Option<f64>,
}

pub fn edit(
    input: &SceneInput,
    flags: &SimFlags,
    delete: Option<&str>,
    add: Option<AddArgs<'_>>,
    out: &Path,
    trajectory: Option<&Path>,
) -> Result<()> {
    let scene = load(input, flags)?;
    let edit = match (delete, add) {
        (Some(id), None) => Edit::Delete(id.to_string()),
        (None, Some(a)) => {
            if !a.mesh.is_file() {
                return Err(Error::MissingAsset(a.mesh.to_path_buf()).into());
            }
            let mesh = Arc::new(read_obj(a.mesh)?);
            let state = AffineState::from_translation(a.at.unwrap_or_default().into());
            let mut spec = ObjectSpec::new(a.id, format!("meshes/{}.obj", a.id), &state);
            if let Some(d) = a.density {
                spec.density = d;
            }
            let kind = match a.kind {
                Kind::On => RelationKind::On,
                Kind::Contain => RelationKind::Contain,
                Kind::Support => RelationKind::Support,
            };
            Edit::Add(NewObject {
                spec,
                mesh,
                parent: a.parent.map_or(Parent::Ground, Parent::from),
                kind,
            })
        }
        _ => {
            return Err(CliError::Usage(
                "edit needs exactly one of --delete and --add".into(),
            ))
        }
    };
    let outcome = edit_and_settle(&scene, &edit, None)?;
    save_scene(&outcome.scene, out)?;
    if let Some(p) = trajectory {
        let frames: Vec<Vec<AffineState>> = outcome.trajectory.states.iter().map(unstack).collect();
        write_frames(p, &outcome.scene, scene_name(out), &frames)?;
    }
    write_json(None, &outcome.summary)
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn gradcheck(
    input: &SceneInput,
    flags: &SimFlags,
    coords: usize,
    h: f64,
    interval: usize,
    seed: u64,
) -> Result<()> {
    // checks the layout as given; coarse layouts need `init` first
    let mut scene = load(input, flags)?;
    let frames = flags.frames.map_or(12, |n| n as usize);
    let p = &mut scene.config.sim_params;
    // a fixed frame count and converged steps keep the map smooth enough to difference
    p.rest_tol = 1e-300;
    p.max_newton_iterations = p.max_newton_iterations.max(400);
    let cfg = OptimizerConfig {
        loss_frame_interval: interval,
        loss_mode: LossMode::Accumulated,
        ..Default::default()
    };
    let tree = scene.tree()?;
    let q0 = stack(&scene.states());
    // stiff resting contacts can floor the Newton residual above the tightest tolerance
    let ceiling = scene.config.sim_params.solve_tol;
    let mut tol = ceiling.min(2e-9);
    let mut retries = 3;
    let (system, (loss, grad, base)) = loop {
        scene.config.sim_params.solve_tol = tol;
        let system = System::from_scene(&scene)?;
        match loss_and_gradient(&scene, &tree, &system, &q0, &cfg, Some(frames)) {
            Ok(r) => break (system, r),
            Err(Error::StepDiverged { .. }) if retries > 0 && tol * 10.0 <= ceiling => {
                log::warn!(
                    "solve tolerance {tol:e} m/s not reached; retrying with {:e}",
                    tol * 10.0
                );
                tol *= 10.0;
                retries -= 1;
            }
            Err(e) => return Err(e.into()),
        }
    };
    let active = |t: &layoutsim::sim::Trajectory| {
        t.steps
            .iter()
            .map(|s| s.friction.contacts.len())
            .collect::<Vec<_>>()
    };
    let base_contacts = active(&base);

    let mut candidates: Vec<usize> = (0..scene.len())
        .flat_map(|b| (0..3).map(move |a| 12 * b + a))
        .collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    candidates.truncate(coords);
    candidates.sort_unstable();

    let ids = scene.ids();
    let mut out = std::io::stdout().lock();
    let w = |e: std::io::Error| CliError::from(Error::Io(e));
    writeln!(
        out,
        "loss {loss:.6e} over {frames} frames, h = {h:e} m, solve tolerance {tol:e} m/s"
    )
    .map_err(w)?;
    writeln!(
        out,
        "{:>6}  {:<16} {:>4}  {:>14}  {:>14}  {:>10}  {}",
        "coord", "object", "axis", "adjoint", "central", "abs err", "contacts"
    )
    .map_err(w)?;
    let (mut diff, mut norm, mut skipped) = (0.0, 0.0, 0);
    for &k in &candidates {
        let run = |sign: f64| -> layoutsim::Result<(f64, Vec<usize>)> {
            let mut q = q0.clone();
            q[k] += sign * h;
            let (l, _, t) = loss_and_gradient(&scene, &tree, &system, &q, &cfg, Some(frames))?;
            Ok((l, active(&t)))
        };
        let (fd, status) = match (run(1.0), run(-1.0)) {
            (Ok((lp, cp)), Ok((lm, cm))) => {
                let fd = (lp - lm) / (2.0 * h);
                if cp == base_contacts && cm == base_contacts {
                    diff += (grad[k] - fd).powi(2);
                    norm += fd * fd;
                    (fd, "stable")
                } else {
                    skipped += 1;
                    log::warn!("coordinate {k} changes the active contact set under ±h; excluded");
                    (fd, "changed (excluded)")
                }
            }
            (Err(e @ Error::StepDiverged { .. }), _) | (_, Err(e @ Error::StepDiverged { .. })) => {
                skipped += 1;
                log::warn!("coordinate {k}: perturbed run failed ({e}); excluded");
                (f64::NAN, "solve failed (excluded)")
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        writeln!(
            out,
            "{:>6}  {:<16} {:>4}  {:>14.6e}  {:>14.6e}  {:>10.3e}  {}",
            k,
            ids[k / 12],
            AXES[k % 12],
            grad[k],
            fd,
            (grad[k] - fd).abs(),
            status
        )
        .map_err(w)?;
    }
    let rel = if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        f64::NAN
    };
    writeln!(
        out,
        "relative error {rel:.3e} over {} coordinates ({skipped} excluded)",
        candidates.len() - skipped
    )
    .map_err(w)?;
    Ok(())
}

pub fn serve(
    input: &SceneInput,
    flags: &SimFlags,
    assets: Option<PathBuf>,
    addr: std::net::SocketAddr,
) -> Result<()> {
    let scene = load(input, flags)?;
    // refinement is idempotent, so settled scenes pass through unchanged
    let refined = refine_layout(&scene, &scene.tree()?, default_gap(&scene))?;
    let scene = scene.with_states(&refined.states);
    let assets = assets.unwrap_or_else(|| {
        input
            .scene
            .parent()
            .unwrap_or(Path::new("."))
            .join("assets")
    });
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::Server)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(CliError::Server)?;
        eprintln!(
            "serving on http://{}",
            listener.local_addr().map_err(CliError::Server)?
        );
        let session = SessionHandle::spawn(scene, SessionOptions::new(assets));
        layoutsim_service::serve(listener, session)
            .await
            .map_err(CliError::Server)
    })
}

pub fn gen_scenes(out: &Path, random: u64, seed: u64) -> Result<()> {
    let mut written = export_acceptance_scenes(out)?;
    for k in 0..random {
        let s = seed + k;
        let path = out.join(format!("random-{s}")).join("scene.json");
        random_tree_scene(s)?.save(&path)?;
        written.push(path);
    }
    let mut stdout = std::io::stdout().lock();
    for p in written {
        writeln!(stdout, "{}", p.display()).map_err(|e| CliError::from(Error::Io(e)))?;
    }
    Ok(())
}
