use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::friction::FrictionSet;
use super::System;
use crate::error::{Error, Result};
use crate::scene::SceneConfig;
use crate::state::{unstack, AffineState};

pub const TRAJECTORY_FORMAT: u32 = 1;

/// Data kept from each forward step for the reverse sweep.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub friction: FrictionSet,
    pub iterations: usize,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `q_0 … q_n`
    pub states: Vec<DVector<f64>>,
    /// `steps[k]` produced `states[k + 1]`.
    pub steps: Vec<StepCache>,
    pub converged: bool,
    pub cancelled: bool,
}

impl Trajectory {
    pub fn frames(&self) -> usize {
        self.states.len()
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds at least q_0")
    }

    pub fn body_states(&self, frame: usize) -> Vec<AffineState> {
        unstack(&self.states[frame])
    }
}

pub struct SimulateOptions<'a> {
    pub max_frames: Option<usize>,
    pub cancel: Option<&'a AtomicBool>,
    /// Called with each new frame index and state.
    pub on_frame: Option<&'a mut dyn FnMut(usize, &DVector<f64>)>,
}

impl Default for SimulateOptions<'_> {
    fn default() -> Self {
        Self {
            max_frames: None,
            cancel: None,
            on_frame: None,
        }
    }
}

/// Step from `q0` until `rest_frames` consecutive frames move slower than
/// `rest_tol`, or the frame budget runs out (then `converged` is false).
pub fn simulate_to_equilibrium(
    system: &System,
    q0: &DVector<f64>,
    mut opts: SimulateOptions<'_>,
) -> Result<Trajectory> {
    let p = &system.params;
    let max_frames = opts.max_frames.unwrap_or(p.max_frames);
    let mut traj = Trajectory {
        states: vec![q0.clone()],
        steps: Vec::new(),
        converged: false,
        cancelled: false,
    };
    let mut resting = 0;
    for frame in 1..=max_frames {
        if opts.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            traj.cancelled = true;
            break;
        }
        let q = traj.last();
        let r = system.step(q)?;
        let speed = (&r.q - q).amax() / p.dt;
        traj.states.push(r.q);
        traj.steps.push(StepCache {
            friction: r.friction,
            iterations: r.iterations,
            energies: r.energies,
        });
        if let Some(cb) = opts.on_frame.as_mut() {
            cb(frame, traj.last());
        }
        log::trace!(
            "frame {frame}: speed {speed:.3e} m/s, {} newton iterations",
            r.iterations
        );
        resting = if speed < p.rest_tol { resting + 1 } else { 0 };
        if resting >= p.rest_frames {
            traj.converged = true;
            break;
        }
    }
    log::debug!(
        "simulation stopped after {} frames (converged: {})",
        traj.frames() - 1,
        traj.converged
    );
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format: u32,
    pub scene: String,
    pub params_hash: String,
    pub objects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    /// Per object: translation then the linear map row-major.
    pub states: Vec<[f64; 12]>,
}

impl FrameRecord {
    pub fn new(frame: usize, states: &[AffineState]) -> Self {
        Self {
            frame,
            states: states.iter().map(AffineState::to_array).collect(),
        }
    }

    pub fn body_states(&self) -> Vec<AffineState> {
        self.states
            .iter()
            .map(|s| AffineState::from_slice(s))
            .collect()
    }
}

/// Hex SHA-256 of everything in a scene that affects the dynamics besides
/// the objects themselves.
pub fn params_hash(config: &SceneConfig) -> String {
    let key = serde_json::json!({
        "sim_params": config.sim_params,
        "gravity": config.gravity,
        "ground": config.ground,
    });
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}

pub fn write_trajectory<W: Write>(
    out: &mut W,
    header: &TrajectoryHeader,
    frames: &[Vec<AffineState>],
) -> Result<()> {
    writeln!(
        out,
        "{}",
        serde_json::to_string(header).expect("header serializes")
    )?;
    for (k, states) in frames.iter().enumerate() {
        writeln!(
            out,
            "{}",
            serde_json::to_string(&FrameRecord::new(k, states)).expect("frame serializes")
        )?;
    }
    Ok(())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<(TrajectoryHeader, Vec<Vec<AffineState>>)> {
    let mut lines = input.lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
        path: format!("trajectory line {}", line + 1),
        message: e.to_string(),
    };
    let header: TrajectoryHeader = loop {
        match lines.next() {
            Some((k, l)) => {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&l).map_err(|e| parse_err(k, e))?;
            }
            None => return Err(Error::TrajectoryMismatch("empty trajectory file".into())),
        }
    };
    if header.format != TRAJECTORY_FORMAT {
        return Err(Error::TrajectoryMismatch(format!(
            "unsupported format {}",
            header.format
        )));
    }
    let mut frames = Vec::new();
    for (k, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(&l).map_err(|e| parse_err(k, e))?;
        if rec.frame != frames.len() || rec.states.len() != header.objects.len() {
            return Err(Error::TrajectoryMismatch(format!(
                "bad frame record at line {}",
                k + 1
            )));
        }
        frames.push(rec.body_states());
    }
    Ok((header, frames))
}
