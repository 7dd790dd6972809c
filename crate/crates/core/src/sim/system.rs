use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};

use super::ccd;
use super::contact::{contact_energy, ContactModel, ContactSet, Mat12, Vec12};
use super::friction::FrictionSet;
use super::mass::{compute_affine_mass, volume_integrals, AffineMass};
use super::shape::shape_energy;
use super::ResolvedParams;
use crate::error::{Error, Result};
use crate::geometry::{intersecting_triangle_pairs, BodyGeometry, TriangleMesh, Vec3};
use crate::scene::Scene;
use crate::state::{point_jacobian, stack, AffineState, BODY_DOFS};

/// One simulated object.
#[derive(Debug, Clone)]
pub struct Body {
    pub mesh: Arc<TriangleMesh>,
    pub mass: AffineMass,
    /// Inverse of the nominal rest map (the initial linear map).
    pub rest_inv: Matrix3<f64>,
    /// Physical volume (m³).
    pub volume: f64,
    /// Squared world edge lengths under the nominal rest map.
    pub edge_rest_sq: Vec<f64>,
}

impl Body {
    pub fn new(mesh: Arc<TriangleMesh>, density: f64, rest_map: &Matrix3<f64>) -> Result<Self> {
        let det = rest_map.determinant();
        if !(det > 0.0) {
            return Err(Error::InvalidMesh(
                "rest map must have positive determinant".into(),
            ));
        }
        let mass = compute_affine_mass(&mesh, density * det)?;
        let volume = volume_integrals(&mesh).volume * det;
        let edge_rest_sq = mesh
            .edges()
            .iter()
            .map(|e| (rest_map * (mesh.vertices()[e[1]] - mesh.vertices()[e[0]])).norm_squared())
            .collect();
        Ok(Self {
            rest_inv: rest_map.try_inverse().expect("positive determinant"),
            mesh,
            mass,
            volume,
            edge_rest_sq,
        })
    }
}

/// Energy terms of the incremental potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// `½ (q − q̃)ᵀ M (q − q̃)`
    Inertia,
    Shape,
    Barrier,
    Friction,
}

/// Per-step data the incremental potential depends on besides `q`.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub q_n: DVector<f64>,
    pub q_tilde: DVector<f64>,
    pub friction: FrictionSet,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub q: DVector<f64>,
    pub friction: FrictionSet,
    pub iterations: usize,
    /// Incremental potential after each accepted Newton update, starting with `E(q_n)`.
    pub energies: Vec<f64>,
    /// ‖Δq‖∞/Δt of the last Newton direction.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct System {
    pub bodies: Vec<Body>,
    pub params: ResolvedParams,
    mass: DMatrix<f64>,
    gravity_step: DVector<f64>,
    edge_rest_sq: Vec<Vec<f64>>,
}

impl System {
    pub fn new(bodies: Vec<Body>, params: ResolvedParams) -> Self {
        let n = bodies.len() * BODY_DOFS;
        let mut mass = DMatrix::zeros(n, n);
        let mut gravity_step = DVector::zeros(n);
        let dt2 = params.dt * params.dt;
        for (b, body) in bodies.iter().enumerate() {
            mass.view_mut((12 * b, 12 * b), (12, 12))
                .copy_from(&body.mass.matrix);
            gravity_step
                .rows_mut(12 * b, 3)
                .copy_from(&(params.gravity * dt2));
        }
        let edge_rest_sq = bodies.iter().map(|b| b.edge_rest_sq.clone()).collect();
        Self {
            bodies,
            params,
            mass,
            gravity_step,
            edge_rest_sq,
        }
    }

    /// Bodies from the scene's meshes with the initial linear maps as rest maps.
    pub fn from_scene(scene: &Scene) -> Result<Self> {
        let bodies = scene
            .config
            .objects
            .iter()
            .zip(&scene.meshes)
            .map(|(o, m)| Body::new(m.clone(), o.density, &o.state().a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(bodies, scene.resolved_params()))
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn dofs(&self) -> usize {
        self.bodies.len() * BODY_DOFS
    }

    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn meshes(&self) -> Vec<&TriangleMesh> {
        self.bodies.iter().map(|b| b.mesh.as_ref()).collect()
    }

    pub fn positions(&self, q: &DVector<f64>) -> Vec<Vec<Vec3>> {
        self.bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let s = AffineState::from_slice(&q.as_slice()[12 * b..12 * b + 12]);
                body.mesh.vertices().iter().map(|v| s.apply(v)).collect()
            })
            .collect()
    }

    pub fn stack(&self, states: &[AffineState]) -> DVector<f64> {
        stack(states)
    }

    pub fn contact_model(&self) -> ContactModel<'_> {
        ContactModel {
            meshes: self.meshes(),
            edge_rest_sq: &self.edge_rest_sq,
            dhat: self.params.dhat,
            up: self.params.up,
            ground: self.params.ground,
            self_contact: self.params.self_contact,
        }
    }

    pub fn contacts(&self, q: &DVector<f64>) -> Result<ContactSet> {
        self.contact_model().gather(&self.positions(q))
    }

    pub fn predictive(&self, q_n: &DVector<f64>) -> DVector<f64> {
        q_n + &self.gravity_step
    }

    pub fn friction_epsilon(&self) -> f64 {
        self.params.eps_v * self.params.dt
    }

    /// Freeze contacts, normal forces and tangent frames at `q_n`.
    pub fn friction_set(&self, q_n: &DVector<f64>) -> Result<FrictionSet> {
        FrictionSet::from_state(
            &self.contact_model(),
            &self.positions(q_n),
            self.params.kappa,
            self.params.mu,
            self.friction_epsilon(),
        )
    }

    pub fn context(&self, q_n: &DVector<f64>) -> Result<StepContext> {
        Ok(StepContext {
            q_n: q_n.clone(),
            q_tilde: self.predictive(q_n),
            friction: self.friction_set(q_n)?,
        })
    }

    /// Cross-object intersecting triangle pairs at `q`.
    pub fn penetrating_pairs(&self, q: &DVector<f64>) -> usize {
        let pos = self.positions(q);
        let geo: Vec<BodyGeometry<'_>> = self
            .bodies
            .iter()
            .zip(&pos)
            .map(|(b, x)| BodyGeometry::new(&b.mesh, x))
            .collect();
        intersecting_triangle_pairs(&geo).cross
    }

    /// Map a stencil vector to the full coordinate vector.
    pub fn scatter_vector(
        &self,
        stencil: &[(usize, usize); 4],
        len: usize,
        g: &Vec12,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(self.dofs());
        self.scatter(&mut out, None, stencil, len, g, &Mat12::zeros());
        out
    }

    fn scatter(
        &self,
        grad: &mut DVector<f64>,
        hess: Option<&mut DMatrix<f64>>,
        stencil: &[(usize, usize); 4],
        len: usize,
        g: &Vec12,
        h: &Mat12,
    ) {
        let jac: Vec<_> = stencil[..len]
            .iter()
            .map(|&(b, v)| point_jacobian(&self.bodies[b].mesh.vertices()[v]))
            .collect();
        for k in 0..len {
            let b = stencil[k].0;
            let gk = jac[k].transpose() * g.fixed_rows::<3>(3 * k);
            let mut rows = grad.rows_mut(12 * b, 12);
            rows += gk;
        }
        if let Some(hess) = hess {
            for k in 0..len {
                for l in 0..len {
                    let (bk, bl) = (stencil[k].0, stencil[l].0);
                    let blk = jac[k].transpose() * h.fixed_view::<3, 3>(3 * k, 3 * l) * jac[l];
                    let mut view = hess.view_mut((12 * bk, 12 * bl), (12, 12));
                    view += blk;
                }
            }
        }
    }

    /// One energy term with its gradient and (optionally) Hessian, all
    /// unscaled by Δt².
    pub fn term(
        &self,
        term: Term,
        q: &DVector<f64>,
        ctx: &StepContext,
        hessian: bool,
        project: bool,
    ) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let n = self.dofs();
        let mut grad = DVector::zeros(n);
        let mut hess = hessian.then(|| DMatrix::zeros(n, n));
        let mut value = 0.0;
        match term {
            Term::Inertia => {
                let d = q - &ctx.q_tilde;
                let md = &self.mass * &d;
                value = 0.5 * d.dot(&md);
                grad = md;
                if let Some(h) = hess.as_mut() {
                    h.copy_from(&self.mass);
                }
            }
            Term::Shape => {
                for (b, body) in self.bodies.iter().enumerate() {
                    let s = AffineState::from_slice(&q.as_slice()[12 * b..12 * b + 12]);
                    let e = shape_energy(
                        &s.a,
                        &body.rest_inv,
                        body.volume,
                        self.params.shape_stiffness,
                        project,
                    );
                    value += e.value;
                    grad.rows_mut(12 * b + 3, 9).copy_from(&e.gradient);
                    if let Some(h) = hess.as_mut() {
                        h.view_mut((12 * b + 3, 12 * b + 3), (9, 9))
                            .copy_from(&e.hessian);
                    }
                }
            }
            Term::Barrier => {
                let pos = self.positions(q);
                let contacts = self.contact_model().gather(&pos)?;
                let ground = self.params.ground.unwrap_or(0.0);
                for c in &contacts.contacts {
                    let x = c.points(&pos);
                    let (e, g, h) = contact_energy(
                        c,
                        &x,
                        self.params.dhat,
                        self.params.kappa,
                        &self.params.up,
                        ground,
                        project,
                    );
                    value += e;
                    self.scatter(&mut grad, hess.as_mut(), &c.stencil, c.len(), &g, &h);
                }
            }
            Term::Friction => {
                let pos = self.positions(q);
                let f = &ctx.friction;
                for c in &f.contacts {
                    let x = c.stencil.map(|(b, v)| pos[b][v]);
                    let (e, g, h) = c.energy(&x, f.mu, f.epsilon, project);
                    value += e;
                    self.scatter(&mut grad, hess.as_mut(), &c.stencil, c.len, &g, &h);
                }
            }
        }
        Ok((value, grad, hess))
    }

    /// Incremental potential `E(q)`; infinite when `q` is not contact-valid.
    pub fn energy(&self, q: &DVector<f64>, ctx: &StepContext) -> f64 {
        let dt2 = self.params.dt * self.params.dt;
        let mut total = 0.0;
        for t in [Term::Inertia, Term::Shape, Term::Barrier, Term::Friction] {
            match self.term(t, q, ctx, false, false) {
                Ok((v, _, _)) => total += if t == Term::Inertia { v } else { dt2 * v },
                Err(_) => return f64::INFINITY,
            }
        }
        total
    }

    /// `E`, `∇E` and `∇²E` (projected to PSD per energy block when `project`).
    pub fn derivatives(
        &self,
        q: &DVector<f64>,
        ctx: &StepContext,
        project: bool,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let dt2 = self.params.dt * self.params.dt;
        let n = self.dofs();
        let mut e = 0.0;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for t in [Term::Inertia, Term::Shape, Term::Barrier, Term::Friction] {
            let (v, gt, ht) = self.term(t, q, ctx, true, project)?;
            let s = if t == Term::Inertia { 1.0 } else { dt2 };
            e += s * v;
            g += gt * s;
            h += ht.expect("hessian requested") * s;
        }
        Ok((e, g, h))
    }

    /// Solve one artificial time step from `q_n`.
    pub fn step(&self, q_n: &DVector<f64>) -> Result<StepResult> {
        if q_n.len() != self.dofs() {
            return Err(Error::TrajectoryMismatch(format!(
                "state has {} coordinates, scene needs {}",
                q_n.len(),
                self.dofs()
            )));
        }
        let pairs = self.penetrating_pairs(q_n);
        if pairs > 0 {
            return Err(Error::Penetrating(format!(
                "{pairs} intersecting triangle pairs"
            )));
        }
        self.solve(self.context(q_n)?)
    }

    /// Minimize the incremental potential of `ctx`, starting from `ctx.q_n`.
    pub fn solve(&self, ctx: StepContext) -> Result<StepResult> {
        let dt = self.params.dt;
        let mut q = ctx.q_n.clone();
        let mut e = self.energy(&q, &ctx);
        let mut energies = vec![e];
        let mut stuck = 0;
        let mut residual = f64::INFINITY;
        for it in 0..self.params.max_newton_iterations {
            let (_, g, h) = self.derivatives(&q, &ctx, true)?;
            let dq = solve_spd(h, &(-g));
            residual = dq.amax() / dt;
            if residual < self.params.solve_tol {
                return Ok(StepResult {
                    q,
                    friction: ctx.friction,
                    iterations: it,
                    energies,
                    residual,
                });
            }
            let disp = self.displacements(&dq);
            let pos = self.positions(&q);
            let mut alpha = ccd::max_step(
                &self.meshes(),
                &pos,
                &disp,
                &self.params.up,
                self.params.ground,
                self.params.self_contact,
            );
            if alpha <= 1e-12 {
                stuck += 1;
                if stuck >= 3 {
                    return Err(Error::StuckContact(alpha));
                }
                continue;
            }
            stuck = 0;
            let mut accepted = None;
            while alpha > 1e-16 {
                let cand = &q + &dq * alpha;
                let ec = self.energy(&cand, &ctx);
                if ec <= e {
                    accepted = Some((cand, ec));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((cand, ec)) => {
                    q = cand;
                    e = ec;
                    energies.push(e);
                }
                None => {
                    // No descent left at floating-point resolution.
                    log::debug!("line search stalled at residual {residual:.3e}");
                    return Ok(StepResult {
                        q,
                        friction: ctx.friction,
                        iterations: it + 1,
                        energies,
                        residual,
                    });
                }
            }
        }
        Err(Error::StepDiverged {
            iterations: self.params.max_newton_iterations,
            residual,
        })
    }

    /// Per-vertex displacement produced by a coordinate change `dq`.
    pub fn displacements(&self, dq: &DVector<f64>) -> Vec<Vec<Vec3>> {
        self.bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let s = AffineState::from_slice(&dq.as_slice()[12 * b..12 * b + 12]);
                body.mesh.vertices().iter().map(|v| s.apply(v)).collect()
            })
            .collect()
    }
}

/// Solve `H x = b` for symmetric positive (semi-)definite `H`, regularizing
/// when the factorization fails.
pub(crate) fn solve_spd(h: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(b);
    }
    let scale = h.diagonal().amax().max(1.0);
    let mut reg = 1e-12 * scale;
    loop {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return ch.solve(b);
        }
        reg *= 10.0;
    }
}
