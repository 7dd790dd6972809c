//! The session actor. One task owns the scene; every request becomes a
//! command on its queue, which gives all mutations a single total order.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use layoutsim::edit::{apply_edit, Edit, NewObject};
use layoutsim::geometry::obj::{read_obj, to_obj_string};
use layoutsim::geometry::TriangleMesh;
use layoutsim::metrics::MetricsReport;
use layoutsim::scene::{ObjectSpec, Parent};
use layoutsim::sim::{simulate_to_equilibrium, FrameRecord, SimulateOptions, System};
use layoutsim::state::{stack, unstack, AffineState};
use layoutsim::Scene;
use sha2::{Digest, Sha256};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;

use crate::api::{AddObjectRequest, AssetEntry, RunStatus, SceneView, StreamMessage, API_VERSION};
use crate::error::{Result, ServiceError};

#[derive(Debug, Clone)]
pub struct SessionOptions {
    /// Directory of OBJ files offered for addition.
    pub assets: PathBuf,
    /// Minimum spacing of streamed frames.
    pub frame_interval: Duration,
}

impl SessionOptions {
    pub fn new(assets: impl Into<PathBuf>) -> Self {
        Self {
            assets: assets.into(),
            frame_interval: Duration::from_secs_f64(1.0 / 30.0),
        }
    }
}

type Reply<T> = oneshot::Sender<Result<T>>;

enum Command {
    View(Reply<SceneView>),
    Add(AddObjectRequest, Reply<u64>),
    Delete(String, Reply<u64>),
    Simulate(Reply<u64>),
    Cancel(Reply<bool>),
    MeshByHash(String, Reply<Option<String>>),
    Finished(Result<Run, String>),
}

/// Outcome of one simulation run.
struct Run {
    states: Vec<AffineState>,
    converged: bool,
    cancelled: bool,
    steps: usize,
    metrics: MetricsReport,
}

/// Cheap, cloneable access to a running session.
#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Command>,
    frames: broadcast::Sender<String>,
    assets: Arc<PathBuf>,
}

impl SessionHandle {
    /// Start the session actor on the current tokio runtime.
    pub fn spawn(scene: Scene, options: SessionOptions) -> Self {
        let (tx, rx) = mpsc::channel(256);
        let (frames, _) = broadcast::channel(4096);
        let mut meshes = MeshStore::default();
        let hashes = scene.meshes.iter().map(|m| meshes.insert(m)).collect();
        let session = Session {
            scene,
            hashes,
            meshes,
            revision: 0,
            running: None,
            frames: frames.clone(),
            tx: tx.clone(),
            options: options.clone(),
        };
        tokio::spawn(session.run(rx));
        Self {
            tx,
            frames,
            assets: Arc::new(options.assets),
        }
    }

    async fn ask<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(make(reply))
            .await
            .map_err(|_| ServiceError::Closed)?;
        rx.await.map_err(|_| ServiceError::Closed)?
    }

    pub async fn view(&self) -> Result<SceneView> {
        self.ask(Command::View).await
    }

    pub async fn add(&self, req: AddObjectRequest) -> Result<u64> {
        self.ask(|r| Command::Add(req, r)).await
    }

    pub async fn delete(&self, id: String) -> Result<u64> {
        self.ask(|r| Command::Delete(id, r)).await
    }

    /// Start settling the current state. Frames and the final status arrive
    /// on [`SessionHandle::subscribe`].
    pub async fn simulate(&self) -> Result<u64> {
        self.ask(Command::Simulate).await
    }

    /// Ask a running simulation to stop after its current frame.
    pub async fn cancel(&self) -> Result<bool> {
        self.ask(Command::Cancel).await
    }

    pub fn subscribe(&self) -> broadcast::Receiver<String> {
        self.frames.subscribe()
    }

    pub fn list_assets(&self) -> Result<Vec<AssetEntry>> {
        let mut out = Vec::new();
        let dir = match std::fs::read_dir(self.assets.as_path()) {
            Ok(d) => d,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(layoutsim::Error::Io(e).into()),
        };
        for entry in dir {
            let path = entry.map_err(layoutsim::Error::Io)?.path();
            if path.is_file()
                && path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("obj"))
            {
                let bytes = std::fs::read(&path).map_err(layoutsim::Error::Io)?;
                out.push(AssetEntry {
                    name: path
                        .file_name()
                        .expect("file has a name")
                        .to_string_lossy()
                        .into_owned(),
                    hash: hex::encode(Sha256::digest(&bytes)),
                });
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(out)
    }

    /// OBJ text of an asset file, or of any scene mesh by content hash.
    pub async fn asset(&self, name: &str) -> Result<String> {
        if let Some(text) = self
            .ask(|r| Command::MeshByHash(name.to_string(), r))
            .await?
        {
            return Ok(text);
        }
        let path = asset_path(&self.assets, name)?;
        std::fs::read_to_string(path).map_err(|_| ServiceError::UnknownAsset(name.to_string()))
    }
}

fn asset_path(dir: &Path, name: &str) -> Result<PathBuf> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(ServiceError::UnknownAsset(name.to_string()));
    }
    Ok(dir.join(name))
}

/// Meshes by content hash of their OBJ text.
#[derive(Default)]
struct MeshStore {
    by_hash: HashMap<String, Arc<str>>,
}

impl MeshStore {
    fn insert(&mut self, mesh: &TriangleMesh) -> String {
        let text = to_obj_string(mesh);
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        self.by_hash
            .entry(hash.clone())
            .or_insert_with(|| text.into());
        hash
    }
}

struct Session {
    scene: Scene,
    /// Mesh hash per object, in object order.
    hashes: Vec<String>,
    meshes: MeshStore,
    revision: u64,
    running: Option<Arc<AtomicBool>>,
    frames: broadcast::Sender<String>,
    tx: mpsc::Sender<Command>,
    options: SessionOptions,
}

impl Session {
    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        while let Some(cmd) = rx.recv().await {
            match cmd {
                Command::View(r) => {
                    let _ = r.send(Ok(self.view()));
                }
                Command::Add(req, r) => {
                    let out = self.guard().and_then(|_| self.add(req));
                    let _ = r.send(out);
                }
                Command::Delete(id, r) => {
                    let out = self.guard().and_then(|_| self.delete(&id));
                    let _ = r.send(out);
                }
                Command::Simulate(r) => {
                    let out = self.guard().map(|_| self.start());
                    let _ = r.send(out);
                }
                Command::Cancel(r) => {
                    let running = self
                        .running
                        .as_ref()
                        .inspect(|c| c.store(true, Ordering::Relaxed))
                        .is_some();
                    let _ = r.send(Ok(running));
                }
                Command::MeshByHash(h, r) => {
                    let _ = r.send(Ok(self.meshes.by_hash.get(&h).map(|t| t.to_string())));
                }
                Command::Finished(run) => self.finish(run),
            }
        }
    }

    fn guard(&self) -> Result<()> {
        match self.running {
            Some(_) => Err(ServiceError::Conflict),
            None => Ok(()),
        }
    }

    fn view(&self) -> SceneView {
        SceneView {
            api_version: API_VERSION,
            revision: self.revision,
            simulating: self.running.is_some(),
            scene: self.scene.config.clone(),
            mesh_hashes: self
                .scene
                .ids()
                .into_iter()
                .map(String::from)
                .zip(self.hashes.iter().cloned())
                .collect::<BTreeMap<_, _>>(),
        }
    }

    fn add(&mut self, req: AddObjectRequest) -> Result<u64> {
        let path = asset_path(&self.options.assets, &req.asset)?;
        if !path.is_file() {
            return Err(ServiceError::UnknownAsset(req.asset));
        }
        let mesh = Arc::new(read_obj(&path)?);
        let mut state = AffineState::from_translation(req.translation.into());
        if let Some(rows) = req.linear {
            state.a = nalgebra::Matrix3::from_fn(|i, j| rows[i][j]);
        }
        let mut spec = ObjectSpec::new(req.id, req.asset, &state);
        if let Some(d) = req.density {
            spec.density = d;
        }
        let edit = Edit::Add(NewObject {
            spec,
            mesh: mesh.clone(),
            parent: req.parent.map_or(Parent::Ground, Parent::from),
            kind: req.kind,
        });
        self.scene = apply_edit(&self.scene, &edit)?;
        self.hashes.push(self.meshes.insert(&mesh));
        Ok(self.bump())
    }

    fn delete(&mut self, id: &str) -> Result<u64> {
        let k = self
            .scene
            .config
            .index_of(id)
            .ok_or_else(|| layoutsim::Error::UnknownObject(id.to_string()))?;
        self.scene = apply_edit(&self.scene, &Edit::Delete(id.to_string()))?;
        self.hashes.remove(k);
        Ok(self.bump())
    }

    fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    fn start(&mut self) -> u64 {
        let revision = self.bump();
        let cancel = Arc::new(AtomicBool::new(false));
        self.running = Some(cancel.clone());
        let (events, rx) = mpsc::unbounded_channel();
        let scene = self.scene.clone();
        std::thread::spawn(move || simulate(scene, &cancel, events));
        tokio::spawn(stream(
            rx,
            self.frames.clone(),
            self.tx.clone(),
            revision,
            self.options.frame_interval,
        ));
        revision
    }

    fn finish(&mut self, run: Result<Run, String>) {
        self.running = None;
        let msg = match run {
            Ok(run) => {
                self.scene = self.scene.with_states(&run.states);
                let status = if run.cancelled {
                    RunStatus::Cancelled
                } else if run.converged {
                    RunStatus::Converged
                } else {
                    RunStatus::MaxFrames
                };
                StreamMessage::Status {
                    revision: self.bump(),
                    status,
                    converged: run.converged,
                    frames: run.steps,
                    D: Some(run.metrics.D),
                    R: Some(run.metrics.R),
                    error: None,
                }
            }
            Err(e) => StreamMessage::Status {
                revision: self.revision,
                status: RunStatus::Failed,
                converged: false,
                frames: 0,
                D: None,
                R: None,
                error: Some(e),
            },
        };
        let _ = self.frames.send(msg.to_text());
    }
}

enum Event {
    Frame(FrameRecord),
    Done(Result<Run, String>),
}

/// Runs on its own thread.
fn simulate(scene: Scene, cancel: &AtomicBool, events: mpsc::UnboundedSender<Event>) {
    let run = || -> layoutsim::Result<Run> {
        let system = System::from_scene(&scene)?;
        let mut on_frame = |k: usize, q: &nalgebra::DVector<f64>| {
            let _ = events.send(Event::Frame(FrameRecord::new(k, &unstack(q))));
        };
        let opts = SimulateOptions {
            cancel: Some(cancel),
            on_frame: Some(&mut on_frame),
            ..Default::default()
        };
        let traj = simulate_to_equilibrium(&system, &stack(&scene.states()), opts)?;
        let frames: Vec<Vec<AffineState>> = traj.states.iter().map(unstack).collect();
        let ids: Vec<String> = scene.ids().into_iter().map(String::from).collect();
        let metrics = MetricsReport::compute(&ids, &scene.meshes, &frames)?;
        Ok(Run {
            states: frames.last().cloned().unwrap_or_default(),
            converged: traj.converged,
            cancelled: traj.cancelled,
            steps: traj.frames() - 1,
            metrics,
        })
    };
    let _ = events.send(Event::Done(run().map_err(|e| e.to_string())));
}

/// Forward frames at most once per `interval`, keeping only the newest
/// pending frame. The last frame of a run is always sent.
async fn stream(
    mut events: mpsc::UnboundedReceiver<Event>,
    out: broadcast::Sender<String>,
    session: mpsc::Sender<Command>,
    revision: u64,
    interval: Duration,
) {
    let mut last_sent: Option<Instant> = None;
    let mut pending: Option<FrameRecord> = None;
    let send = |record: FrameRecord, last_sent: &mut Option<Instant>| {
        let _ = out.send(StreamMessage::Frame { revision, record }.to_text());
        *last_sent = Some(Instant::now());
    };
    let done = loop {
        let due = last_sent.map_or_else(Instant::now, |t| t + interval);
        tokio::select! {
            ev = events.recv() => match ev {
                Some(Event::Frame(f)) => {
                    if Instant::now() >= due {
                        send(f, &mut last_sent);
                        pending = None;
                    } else {
                        pending = Some(f);
                    }
                }
                Some(Event::Done(run)) => break run,
                None => break Err("simulation thread stopped unexpectedly".into()),
            },
            _ = tokio::time::sleep_until(due), if pending.is_some() => {
                send(pending.take().expect("guarded"), &mut last_sent);
            }
        }
    };
    if let Some(f) = pending.take() {
        tokio::time::sleep_until(last_sent.map_or_else(Instant::now, |t| t + interval)).await;
        send(f, &mut last_sent);
    }
    let _ = session.send(Command::Finished(done)).await;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asset_names_cannot_leave_the_directory() {
        let dir = Path::new("/assets");
        assert!(asset_path(dir, "../etc/passwd").is_err());
        assert!(asset_path(dir, ".hidden").is_err());
        assert!(asset_path(dir, "a\\b.obj").is_err());
        assert_eq!(asset_path(dir, "book.obj").unwrap(), dir.join("book.obj"));
    }

    #[tokio::test(start_paused = true)]
    async fn stream_is_throttled_and_keeps_the_last_frame() {
        let (tx, rx) = mpsc::unbounded_channel();
        let (out, mut sub) = broadcast::channel(1024);
        let (session, mut commands) = mpsc::channel(4);
        let interval = Duration::from_millis(100);
        let task = tokio::spawn(stream(rx, out, session, 7, interval));
        // 50 frames arriving every 10 ms
        for k in 1..=50 {
            tx.send(Event::Frame(FrameRecord::new(
                k,
                &[AffineState::identity()],
            )))
            .unwrap();
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        tx.send(Event::Done(Err("stop".into()))).unwrap();
        task.await.unwrap();
        assert!(matches!(
            commands.recv().await,
            Some(Command::Finished(Err(_)))
        ));

        let mut frames = Vec::new();
        while let Ok(text) = sub.try_recv() {
            match serde_json::from_str::<StreamMessage>(&text).unwrap() {
                StreamMessage::Frame { revision, record } => {
                    assert_eq!(revision, 7);
                    frames.push(record.frame);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(frames.last(), Some(&50));
        assert!(frames.windows(2).all(|w| w[0] < w[1]));
        // 500 ms of frames at one per 100 ms, plus the first and the final one
        assert!(frames.len() <= 7, "{} frames sent", frames.len());
    }
}
