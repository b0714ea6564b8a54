//! Uncertain affine system construction.
//!
//! Discrete models are affine maps x⁺ = A x + B u + d. Parametric
//! uncertainty enters as per-step lists of vertex models whose convex
//! hull covers the true dynamics; hybrid systems add state-space regions
//! that select which vertex list applies. Builders for the two bundled
//! case studies (torque-driven arm against an elastic wall, two-link
//! underactuated arm) live here together with generic linearization and
//! discretization plumbing.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::zonoset::Zonotope;
use crate::{Error, Result};

/// Hard cap on interval parameters per vertex enumeration (2^q corners).
const MAX_INTERVAL_PARAMS: usize = 4;

/// One vertex of the model set: x⁺ = A x + B u + d.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineVertexModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl AffineVertexModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || d.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "affine model blocks disagree: A {}x{}, B {}x{}, d {}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                d.len()
            )));
        }
        Ok(Self { a, b, d })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.d
    }

    /// Composition `later ∘ self` under a held input: the same u feeds
    /// both sub-steps.
    pub fn then(&self, later: &Self) -> Result<Self> {
        if later.state_dim() != self.state_dim() || later.input_dim() != self.input_dim() {
            return Err(Error::ShapeMismatch(
                "cannot compose models of different dimensions".into(),
            ));
        }
        Ok(Self {
            a: &later.a * &self.a,
            b: &later.a * &self.b + &later.b,
            d: &later.a * &self.d + &later.d,
        })
    }

    /// Self-composition `stride` times under a held input.
    pub fn compose_hold(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        let mut acc = self.clone();
        for _ in 1..stride {
            acc = acc.then(self)?;
        }
        Ok(acc)
    }
}

/// Continuous-time affine vector field ẋ = J_x x + J_u u + r.
#[derive(Debug, Clone)]
pub struct ContinuousAffine {
    pub jac_x: DMatrix<f64>,
    pub jac_u: DMatrix<f64>,
    pub offset: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscretizationScheme {
    /// x⁺ = (I + dt·J_x) x + dt·J_u u + dt·r.
    Euler,
    /// Matrix exponential of the augmented system; exact for the affine
    /// dynamics under a zero-order hold.
    ExactAffine,
}

impl ContinuousAffine {
    pub fn discretize(&self, dt: f64, scheme: DiscretizationScheme) -> Result<AffineVertexModel> {
        if dt <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let n = self.jac_x.nrows();
        let m = self.jac_u.ncols();
        if self.jac_x.ncols() != n || self.jac_u.nrows() != n || self.offset.len() != n {
            return Err(Error::ShapeMismatch("affine field blocks disagree".into()));
        }
        match scheme {
            DiscretizationScheme::Euler => AffineVertexModel::new(
                DMatrix::identity(n, n) + dt * &self.jac_x,
                dt * &self.jac_u,
                dt * &self.offset,
            ),
            DiscretizationScheme::ExactAffine => {
                // Augment state with (u, 1); exp of the block matrix
                // yields the discrete (A, B, d) in the top rows.
                let aug = n + m + 1;
                let mut block = DMatrix::zeros(aug, aug);
                block.view_mut((0, 0), (n, n)).copy_from(&self.jac_x);
                block.view_mut((0, n), (n, m)).copy_from(&self.jac_u);
                block.view_mut((0, n + m), (n, 1)).copy_from(&self.offset);
                let e = (block * dt).exp();
                AffineVertexModel::new(
                    e.view((0, 0), (n, n)).into_owned(),
                    e.view((0, n), (n, m)).into_owned(),
                    DVector::from(e.view((0, n + m), (n, 1)).column(0)),
                )
            }
        }
    }
}

/// Central-difference Jacobians of a vector field at (x, u).
pub fn numeric_jacobians<F>(field: F, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>)
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let m = u.len();
    let fdim = field(x, u).len();
    let mut jac_x = DMatrix::zeros(fdim, n);
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[j] += h;
        lo[j] -= h;
        jac_x.set_column(j, &((field(&hi, u) - field(&lo, u)) / (2.0 * h)));
    }
    let mut jac_u = DMatrix::zeros(fdim, m);
    for j in 0..m {
        let h = 1e-6 * u[j].abs().max(1.0);
        let mut hi = u.clone();
        let mut lo = u.clone();
        hi[j] += h;
        lo[j] -= h;
        jac_u.set_column(j, &((field(x, &hi) - field(x, &lo)) / (2.0 * h)));
    }
    (jac_x, jac_u)
}

/// Linearizes a vector field about (x*, u*) given its Jacobians there,
/// then discretizes. The affine remainder r = f(x*,u*) − J_x x* − J_u u*
/// becomes the discrete d-term.
pub fn linearize_discretize<F>(
    field: F,
    jac_x: DMatrix<f64>,
    jac_u: DMatrix<f64>,
    x_star: &DVector<f64>,
    u_star: &DVector<f64>,
    dt: f64,
    scheme: DiscretizationScheme,
) -> Result<AffineVertexModel>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    let offset = field(x_star, u_star) - &jac_x * x_star - &jac_u * u_star;
    ContinuousAffine {
        jac_x,
        jac_u,
        offset,
    }
    .discretize(dt, scheme)
}

/// One discretized vertex model per corner of the interval parameters.
/// Corner order is binary counting: bit j of the corner index selects the
/// upper end of interval j.
pub fn vertex_models_from_intervals<F>(
    model: F,
    intervals: &[(f64, f64)],
    dt: f64,
    scheme: DiscretizationScheme,
) -> Result<Vec<AffineVertexModel>>
where
    F: Fn(&[f64]) -> Result<ContinuousAffine>,
{
    if intervals.len() > MAX_INTERVAL_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "{} interval parameters exceed the corner cap of {MAX_INTERVAL_PARAMS}",
            intervals.len()
        )));
    }
    for &(lo, hi) in intervals {
        if lo > hi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "malformed interval [{lo}, {hi}]"
            )));
        }
    }
    let corners = 1usize << intervals.len();
    let mut out = Vec::with_capacity(corners);
    for c in 0..corners {
        let values: Vec<f64> = intervals
            .iter()
            .enumerate()
            .map(|(j, &(lo, hi))| if c >> j & 1 == 1 { hi } else { lo })
            .collect();
        out.push(model(&values)?.discretize(dt, scheme)?);
    }
    Ok(out)
}

/// Uncertain affine time-varying system: per-step vertex lists whose
/// convex hull is the model set, plus a per-step additive disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainAffineSystem {
    vertices: Vec<Vec<AffineVertexModel>>,
    disturbance: Vec<Zonotope>,
}

impl UncertainAffineSystem {
    pub fn new(
        vertices: Vec<Vec<AffineVertexModel>>,
        disturbance: Vec<Zonotope>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("empty horizon".into()));
        }
        if disturbance.len() != vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} disturbance sets for {} steps",
                disturbance.len(),
                vertices.len()
            )));
        }
        let first = vertices
            .first()
            .and_then(|l| l.first())
            .ok_or_else(|| Error::InvalidArgument("each step needs >= 1 vertex model".into()))?;
        let (n, m) = (first.state_dim(), first.input_dim());
        for list in &vertices {
            if list.is_empty() {
                return Err(Error::InvalidArgument(
                    "each step needs >= 1 vertex model".into(),
                ));
            }
            for v in list {
                if v.state_dim() != n || v.input_dim() != m {
                    return Err(Error::ShapeMismatch(
                        "vertex model dimensions disagree across the horizon".into(),
                    ));
                }
            }
        }
        for w in &disturbance {
            if w.dim() != n {
                return Err(Error::ShapeMismatch(
                    "disturbance dimension disagrees with the state".into(),
                ));
            }
            if w.center().amax() != 0.0 {
                return Err(Error::InvalidArgument(
                    "disturbance sets must be centered at zero".into(),
                ));
            }
        }
        Ok(Self {
            vertices,
            disturbance,
        })
    }

    /// Number of transition steps N (states run 0..=N).
    pub fn horizon(&self) -> usize {
        self.vertices.len()
    }

    pub fn state_dim(&self) -> usize {
        self.vertices[0][0].state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.vertices[0][0].input_dim()
    }

    /// Vertex models governing the transition from step k to k+1.
    pub fn vertices_at(&self, k: usize) -> &[AffineVertexModel] {
        &self.vertices[k]
    }

    pub fn disturbance_at(&self, k: usize) -> &Zonotope {
        &self.disturbance[k]
    }
}

/// Hybrid system: one uncertain affine system per region of a state-space
/// partition. All modes share horizon, dimensions, and disturbance.
#[derive(Debug, Clone)]
pub struct HybridUncertainSystem {
    regions: Vec<Zonotope>,
    modes: Vec<UncertainAffineSystem>,
}

impl HybridUncertainSystem {
    pub fn new(regions: Vec<Zonotope>, modes: Vec<UncertainAffineSystem>) -> Result<Self> {
        if regions.is_empty() || regions.len() != modes.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} regions for {} modes",
                regions.len(),
                modes.len()
            )));
        }
        let n = modes[0].state_dim();
        for mode in &modes[1..] {
            if mode.horizon() != modes[0].horizon()
                || mode.state_dim() != n
                || mode.input_dim() != modes[0].input_dim()
            {
                return Err(Error::ShapeMismatch(
                    "modes disagree on horizon or dimensions".into(),
                ));
            }
            if mode.disturbance != modes[0].disturbance {
                return Err(Error::InvalidArgument(
                    "modes must share the disturbance sequence".into(),
                ));
            }
        }
        for r in &regions {
            if r.dim() != n {
                return Err(Error::ShapeMismatch(
                    "region dimension disagrees with the state".into(),
                ));
            }
        }
        Self::check_disjoint_sampled(&regions)?;
        Ok(Self { regions, modes })
    }

    /// Best-effort overlap detection: random points of one region must
    /// not land strictly inside another. Shared boundaries are fine.
    fn check_disjoint_sampled(regions: &[Zonotope]) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e91_04);
        let shrunk: Vec<Zonotope> = regions
            .iter()
            .map(|r| Zonotope::new(r.center().clone(), r.generator() * (1.0 - 1e-6)))
            .collect::<Result<_>>()?;
        for (i, r) in regions.iter().enumerate() {
            for _ in 0..64 {
                let x = r.sample(&mut rng);
                for (j, other) in shrunk.iter().enumerate() {
                    if i != j && other.contains_point(&x)? {
                        return Err(Error::InvalidArgument(format!(
                            "regions {i} and {j} overlap in their interiors"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn regions(&self) -> &[Zonotope] {
        &self.regions
    }

    pub fn modes(&self) -> &[UncertainAffineSystem] {
        &self.modes
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn horizon(&self) -> usize {
        self.modes[0].horizon()
    }

    pub fn state_dim(&self) -> usize {
        self.modes[0].state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.modes[0].input_dim()
    }

    /// Collapses the hybrid system along a fixed mode schedule (mode of
    /// each step k) into a single uncertain affine system.
    pub fn scheduled(&self, schedule: &[usize]) -> Result<UncertainAffineSystem> {
        if schedule.len() != self.horizon() {
            return Err(Error::ShapeMismatch(format!(
                "schedule length {} for horizon {}",
                schedule.len(),
                self.horizon()
            )));
        }
        if let Some(&bad) = schedule.iter().find(|&&j| j >= self.modes.len()) {
            return Err(Error::InvalidArgument(format!(
                "mode index {bad} out of range"
            )));
        }
        let vertices = schedule
            .iter()
            .enumerate()
            .map(|(k, &j)| self.modes[j].vertices_at(k).to_vec())
            .collect();
        UncertainAffineSystem::new(vertices, self.modes[0].disturbance.clone())
    }

    /// Index of the first region containing x.
    pub fn region_of(&self, x: &DVector<f64>) -> Result<Option<usize>> {
        for (j, r) in self.regions.iter().enumerate() {
            if r.contains_point(x)? {
                return Ok(Some(j));
            }
        }
        Ok(None)
    }
}

/// Synthesis task description: sets, nominal references, and weights.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub initial_set: Zonotope,
    pub goal_set: Zonotope,
    /// Optional per-step state bounds, indexed by k = 0..=N.
    pub state_bounds: Option<Vec<Zonotope>>,
    /// Input bounds, indexed by k = 0..N.
    pub input_bounds: Vec<Zonotope>,
    /// Reference states x*_0..x*_N.
    pub nominal_states: Vec<DVector<f64>>,
    /// Reference inputs u*_0..u*_{N-1}.
    pub nominal_inputs: Vec<DVector<f64>>,
    pub center_state_weight: DMatrix<f64>,
    pub center_input_weight: DMatrix<f64>,
    pub generator_state_weight: DMatrix<f64>,
    pub generator_input_weight: DMatrix<f64>,
    pub reduction_weight: f64,
    /// Target generator column count after per-step reduction; None keeps
    /// the propagated width.
    pub reduction_columns: Option<usize>,
    pub dt: f64,
}

fn check_psd(m: &DMatrix<f64>, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::ShapeMismatch(format!(
            "{what} weight must be {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).amax() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{what} weight is not symmetric"
        )));
    }
    let eig = m.clone().symmetric_eigenvalues();
    if eig.min() < -1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{what} weight is not positive semidefinite"
        )));
    }
    Ok(())
}

impl Scenario {
    /// Transition-step count implied by the references.
    pub fn horizon(&self) -> usize {
        self.nominal_inputs.len()
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let big_n = self.horizon();
        if big_n == 0 {
            return Err(Error::InvalidArgument("empty horizon".into()));
        }
        if self.nominal_states.len() != big_n + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} reference states for {} inputs",
                self.nominal_states.len(),
                big_n
            )));
        }
        if self.initial_set.dim() != n || self.goal_set.dim() != n {
            return Err(Error::ShapeMismatch(
                "initial/goal set dimension disagrees with the state".into(),
            ));
        }
        if self.input_bounds.len() != big_n {
            return Err(Error::ShapeMismatch(format!(
                "{} input bound sets for {} steps",
                self.input_bounds.len(),
                big_n
            )));
        }
        if self.input_bounds.iter().any(|h| h.dim() != m) {
            return Err(Error::ShapeMismatch("input bound dimension mismatch".into()));
        }
        if let Some(bounds) = &self.state_bounds {
            if bounds.len() != big_n + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "{} state bound sets for horizon {}",
                    bounds.len(),
                    big_n
                )));
            }
            if bounds.iter().any(|h| h.dim() != n) {
                return Err(Error::ShapeMismatch("state bound dimension mismatch".into()));
            }
        }
        if self.nominal_states.iter().any(|x| x.len() != n)
            || self.nominal_inputs.iter().any(|u| u.len() != m)
        {
            return Err(Error::ShapeMismatch("reference dimension mismatch".into()));
        }
        check_psd(&self.center_state_weight, n, "center state")?;
        check_psd(&self.center_input_weight, m, "center input")?;
        check_psd(&self.generator_state_weight, n, "generator state")?;
        check_psd(&self.generator_input_weight, m, "generator input")?;
        if self.reduction_weight < 0.0 {
            return Err(Error::InvalidArgument(
                "reduction weight must be nonnegative".into(),
            ));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        Ok(())
    }
}

/// Torque-driven arm with an elastic wall at angle q_c. Free motion obeys
/// I q̈ + μ_f q̇ + m g l sin q = c_τ u; in contact the wall adds spring
/// and damper terms k (q − q_c) + μ_c q̇. State (q, q̇), sin q ≈ q.
#[derive(Debug, Clone)]
pub struct PendulumParams {
    pub mass: f64,
    pub viscous: f64,
    pub torque_gain: f64,
    pub gravity: f64,
    pub inertia: (f64, f64),
    pub arm_length: (f64, f64),
    pub wall_stiffness: (f64, f64),
    pub wall_damping: (f64, f64),
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 0.126,
            viscous: 0.001,
            torque_gain: 0.03,
            gravity: 9.81,
            inertia: (0.0116, 0.0203),
            arm_length: (0.12, 0.18),
            wall_stiffness: (116.1, 141.9),
            wall_damping: (0.41, 0.51),
        }
    }
}

fn midpoint(iv: (f64, f64)) -> f64 {
    0.5 * (iv.0 + iv.1)
}

impl PendulumParams {
    fn free_affine(&self, inertia: f64, length: f64) -> Result<ContinuousAffine> {
        if inertia <= 0.0 {
            return Err(Error::InvalidArgument("inertia must be positive".into()));
        }
        Ok(ContinuousAffine {
            jac_x: DMatrix::from_row_slice(
                2,
                2,
                &[
                    0.0,
                    1.0,
                    -self.mass * self.gravity * length / inertia,
                    -self.viscous / inertia,
                ],
            ),
            jac_u: DMatrix::from_column_slice(2, 1, &[0.0, self.torque_gain / inertia]),
            offset: DVector::zeros(2),
        })
    }

    fn contact_affine(
        &self,
        inertia: f64,
        length: f64,
        stiffness: f64,
        damping: f64,
        q_c: f64,
    ) -> Result<ContinuousAffine> {
        let free = self.free_affine(inertia, length)?;
        let mut jac_x = free.jac_x;
        jac_x[(1, 0)] -= stiffness / inertia;
        jac_x[(1, 1)] -= damping / inertia;
        let offset = DVector::from_vec(vec![0.0, stiffness * q_c / inertia]);
        Ok(ContinuousAffine {
            jac_x,
            jac_u: free.jac_u,
            offset,
        })
    }

    /// Discretized (free, contact) mode models at fixed parameter values:
    /// Euler steps at dt composed `stride` times under a held input. This
    /// is the same pipeline the vertex models go through, so plants
    /// sampled at interior parameters stay comparable.
    pub fn mode_models(
        &self,
        inertia: f64,
        length: f64,
        stiffness: f64,
        damping: f64,
        q_c: f64,
        dt: f64,
        stride: usize,
    ) -> Result<[AffineVertexModel; 2]> {
        let free = self
            .free_affine(inertia, length)?
            .discretize(dt, DiscretizationScheme::Euler)?
            .compose_hold(stride)?;
        let contact = self
            .contact_affine(inertia, length, stiffness, damping, q_c)?
            .discretize(dt, DiscretizationScheme::Euler)?
            .compose_hold(stride)?;
        Ok([free, contact])
    }
}

/// Angular range modeled by the wall partition.
const PENDULUM_ANGLE_RANGE: f64 = 1.0;
/// Velocity range of both regions.
const PENDULUM_RATE_RANGE: f64 = 5.0;

/// Builds the two-mode wall system and its regulation scenario. Free-mode
/// vertices come from the corners of (inertia, arm length); contact-mode
/// vertices from the corners of (stiffness, damping) at mid-interval
/// inertia and length. Discretization: Euler at dt, composed `stride`
/// times, horizon `n_steps` macro steps.
pub fn build_pendulum_wall(
    params: &PendulumParams,
    dt: f64,
    stride: usize,
    n_steps: usize,
    q_c: f64,
) -> Result<(HybridUncertainSystem, Scenario)> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if !(-PENDULUM_ANGLE_RANGE + 1e-6..=PENDULUM_ANGLE_RANGE - 1e-6).contains(&q_c) {
        return Err(Error::InvalidArgument(format!(
            "wall angle {q_c} outside the modeled range"
        )));
    }
    let free_single = vertex_models_from_intervals(
        |v| params.free_affine(v[0], v[1]),
        &[params.inertia, params.arm_length],
        dt,
        DiscretizationScheme::Euler,
    )?;
    let (imid, lmid) = (midpoint(params.inertia), midpoint(params.arm_length));
    let contact_single = vertex_models_from_intervals(
        |v| params.contact_affine(imid, lmid, v[0], v[1], q_c),
        &[params.wall_stiffness, params.wall_damping],
        dt,
        DiscretizationScheme::Euler,
    )?;
    let compose = |models: Vec<AffineVertexModel>| -> Result<Vec<AffineVertexModel>> {
        models.into_iter().map(|m| m.compose_hold(stride)).collect()
    };
    let free = compose(free_single)?;
    let contact = compose(contact_single)?;

    let w = Zonotope::from_box(DVector::zeros(2), &DVector::from_vec(vec![1e-4, 1e-3]))?;
    let disturbance = vec![w; n_steps];
    let modes = vec![
        UncertainAffineSystem::new(vec![free; n_steps], disturbance.clone())?,
        UncertainAffineSystem::new(vec![contact; n_steps], disturbance)?,
    ];
    let regions = vec![
        Zonotope::from_box(
            DVector::from_vec(vec![0.5 * (q_c - PENDULUM_ANGLE_RANGE), 0.0]),
            &DVector::from_vec(vec![0.5 * (q_c + PENDULUM_ANGLE_RANGE), PENDULUM_RATE_RANGE]),
        )?,
        Zonotope::from_box(
            DVector::from_vec(vec![0.5 * (q_c + PENDULUM_ANGLE_RANGE), 0.0]),
            &DVector::from_vec(vec![0.5 * (PENDULUM_ANGLE_RANGE - q_c), PENDULUM_RATE_RANGE]),
        )?,
    ];
    let system = HybridUncertainSystem::new(regions, modes)?;

    let tube_set = Zonotope::from_box(DVector::zeros(2), &DVector::from_vec(vec![0.02, 0.4]))?;
    let input_set = Zonotope::from_box(DVector::zeros(1), &DVector::from_vec(vec![20.0]))?;
    let scenario = Scenario {
        initial_set: tube_set.clone(),
        goal_set: tube_set,
        state_bounds: None,
        input_bounds: vec![input_set; n_steps],
        nominal_states: vec![DVector::zeros(2); n_steps + 1],
        nominal_inputs: vec![DVector::zeros(1); n_steps],
        center_state_weight: DMatrix::identity(2, 2),
        center_input_weight: DMatrix::identity(1, 1),
        generator_state_weight: DMatrix::identity(2, 2),
        generator_input_weight: DMatrix::identity(1, 1),
        reduction_weight: 1.0,
        reduction_columns: Some(12),
        dt: dt * stride as f64,
    };
    Ok((system, scenario))
}

/// Reference swing that presses into the wall and returns: cosine ramps
/// between rest and a hold angle past q_c. Returns (states, inputs, mode
/// of each step's set) with the contact window [entry, exit].
pub fn wall_touch_profile(
    n_steps: usize,
    dt: f64,
    q_c: f64,
    entry: usize,
    exit: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<usize>)> {
    if !(0 < entry && entry < exit && exit < n_steps) {
        return Err(Error::InvalidArgument(format!(
            "contact window [{entry}, {exit}] does not fit in {n_steps} steps"
        )));
    }
    // Torque authority only sustains a shallow press: the wall spring at
    // contact stiffness overwhelms the input beyond a few milliradians.
    let hold = q_c + 0.002;
    let release = n_steps.min(exit + entry);
    let angle = |k: usize| -> f64 {
        if k < entry {
            // Rest-to-hold cosine ramp.
            hold * 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / entry as f64).cos())
        } else if k <= exit {
            hold
        } else if k < release {
            let s = (k - exit) as f64 / (release - exit) as f64;
            hold * 0.5 * (1.0 + (std::f64::consts::PI * s).cos())
        } else {
            0.0
        }
    };
    let mut states = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let q = angle(k);
        let next = angle((k + 1).min(n_steps));
        let prev = angle(k.saturating_sub(1));
        let dq = (next - prev) / (2.0 * dt);
        states.push(DVector::from_vec(vec![q, dq]));
    }
    let inputs = vec![DVector::zeros(1); n_steps];
    let modes = (0..=n_steps)
        .map(|k| usize::from(entry <= k && k <= exit))
        .collect();
    Ok((states, inputs, modes))
}

/// Two-link planar arm actuated at the shoulder, hanging angles measured
/// from the downward vertical. Joint friction has static and viscous
/// parts; an optional tip mass interval is the uncertain parameter.
#[derive(Debug, Clone)]
pub struct PendubotParams {
    pub link_masses: (f64, f64),
    pub link_lengths: (f64, f64),
    pub com_distances: (f64, f64),
    pub link_inertias: (f64, f64),
    pub gravity: f64,
    pub static_friction: (f64, f64),
    pub viscous_friction: (f64, f64),
    pub tip_mass: (f64, f64),
}

impl Default for PendubotParams {
    fn default() -> Self {
        Self {
            link_masses: (0.8, 0.35),
            link_lengths: (0.2, 0.25),
            com_distances: (0.1, 0.125),
            link_inertias: (2.7e-3, 1.8e-3),
            gravity: 9.81,
            // Static friction enters the plants with its discontinuous
            // sign but is frozen (or dropped) in the linearized tube
            // model, so its magnitude must stay within the per-step
            // disturbance budget after division by the link inertias.
            static_friction: (0.002, 0.001),
            viscous_friction: (0.03, 0.01),
            tip_mass: (0.0, 0.06),
        }
    }
}

/// Velocities below this have their static-friction term dropped when
/// freezing signs for linearization.
const FRICTION_SIGN_TOL: f64 = 1e-6;

impl PendubotParams {
    /// Lumped coefficients with the tip mass folded in:
    /// (inertia1, inertia2, coupling, shoulder gravity, elbow gravity).
    fn lumped(&self, tip_mass: f64) -> (f64, f64, f64, f64, f64) {
        let (m1, m2) = self.link_masses;
        let (l1, l2) = self.link_lengths;
        let (c1, c2) = self.com_distances;
        let (i1, i2) = self.link_inertias;
        (
            m1 * c1 * c1 + (m2 + tip_mass) * l1 * l1 + i1,
            m2 * c2 * c2 + tip_mass * l2 * l2 + i2,
            (m2 * c2 + tip_mass * l2) * l1,
            (m1 * c1 + (m2 + tip_mass) * l1) * self.gravity,
            (m2 * c2 + tip_mass * l2) * self.gravity,
        )
    }

    fn accelerations(
        &self,
        tip_mass: f64,
        x: &DVector<f64>,
        u: f64,
        friction: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let (a1, a2, a3, g1, g2) = self.lumped(tip_mass);
        let (q2, dq1, dq2) = (x[1], x[2], x[3]);
        let (s2, c2) = q2.sin_cos();
        let inertia = DMatrix::from_row_slice(
            2,
            2,
            &[a1 + a2 + 2.0 * a3 * c2, a2 + a3 * c2, a2 + a3 * c2, a2],
        );
        let coriolis = DVector::from_vec(vec![
            -a3 * s2 * dq2 * (2.0 * dq1 + dq2),
            a3 * s2 * dq1 * dq1,
        ]);
        let grav = DVector::from_vec(vec![
            g1 * x[0].sin() + g2 * (x[0] + q2).sin(),
            g2 * (x[0] + q2).sin(),
        ]);
        let torque = DVector::from_vec(vec![u, 0.0]) - friction - coriolis - grav;
        let inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::Singular("inertia matrix is singular".into()))?;
        Ok(inv * torque)
    }

    /// Full vector field with discontinuous static friction.
    pub fn vector_field(&self, tip_mass: f64, x: &DVector<f64>, u: f64) -> Result<DVector<f64>> {
        let (bs, bv) = (self.static_friction, self.viscous_friction);
        let friction = DVector::from_vec(vec![
            bs.0 * x[2].signum() + bv.0 * x[2],
            bs.1 * x[3].signum() + bv.1 * x[3],
        ]);
        let ddq = self.accelerations(tip_mass, x, u, &friction)?;
        Ok(DVector::from_vec(vec![x[2], x[3], ddq[0], ddq[1]]))
    }

    /// Smooth field with static-friction signs frozen to those of the
    /// reference velocities (dropped near zero).
    fn frozen_sign_field(
        &self,
        tip_mass: f64,
        signs: (f64, f64),
        x: &DVector<f64>,
        u: f64,
    ) -> Result<DVector<f64>> {
        let (bs, bv) = (self.static_friction, self.viscous_friction);
        let friction = DVector::from_vec(vec![
            bs.0 * signs.0 + bv.0 * x[2],
            bs.1 * signs.1 + bv.1 * x[3],
        ]);
        let ddq = self.accelerations(tip_mass, x, u, &friction)?;
        Ok(DVector::from_vec(vec![x[2], x[3], ddq[0], ddq[1]]))
    }

    /// Linearized, Euler-discretized model about one reference sample.
    pub fn step_model(
        &self,
        tip_mass: f64,
        x_star: &DVector<f64>,
        u_star: &DVector<f64>,
        dt: f64,
    ) -> Result<AffineVertexModel> {
        let sign = |v: f64| {
            if v.abs() < FRICTION_SIGN_TOL {
                0.0
            } else {
                v.signum()
            }
        };
        let signs = (sign(x_star[2]), sign(x_star[3]));
        let field = |x: &DVector<f64>, u: &DVector<f64>| {
            self.frozen_sign_field(tip_mass, signs, x, u[0])
                .expect("inertia invertible near the reference")
        };
        // Fail fast on a singular inertia matrix at the sample itself.
        self.frozen_sign_field(tip_mass, signs, x_star, u_star[0])?;
        let (jac_x, jac_u) = numeric_jacobians(&field, x_star, u_star);
        linearize_discretize(
            &field,
            jac_x,
            jac_u,
            x_star,
            u_star,
            dt,
            DiscretizationScheme::Euler,
        )
    }
}

/// Per-step vertex models along a nominal trajectory, one per tip-mass
/// endpoint. The trajectory supplies x*_0..x*_N and u*_0..u*_{N-1}.
pub fn build_pendubot(
    params: &PendubotParams,
    nominal_states: &[DVector<f64>],
    nominal_inputs: &[DVector<f64>],
    dt: f64,
) -> Result<(UncertainAffineSystem, Scenario)> {
    if nominal_states.len() < 2 || nominal_states.len() != nominal_inputs.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 reference states and matching inputs, got {} states / {} inputs",
            nominal_states.len(),
            nominal_inputs.len()
        )));
    }
    if nominal_states.iter().any(|x| x.len() != 4) || nominal_inputs.iter().any(|u| u.len() != 1) {
        return Err(Error::ShapeMismatch(
            "reference samples must be 4-state / 1-input".into(),
        ));
    }
    let n_steps = nominal_inputs.len();
    let (me_lo, me_hi) = params.tip_mass;
    if me_lo > me_hi {
        return Err(Error::InvalidArgument(format!(
            "malformed tip mass interval [{me_lo}, {me_hi}]"
        )));
    }
    let mut vertices = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let mut list = vec![params.step_model(me_lo, &nominal_states[k], &nominal_inputs[k], dt)?];
        if me_hi > me_lo {
            list.push(params.step_model(me_hi, &nominal_states[k], &nominal_inputs[k], dt)?);
        }
        vertices.push(list);
    }
    // Budget for everything the linearized tube model leaves out: static
    // friction sign flips, the Euler-vs-exact discretization gap, and the
    // quadratic linearization remainder. The inverse inertia is large
    // (especially the unactuated row), so the velocity rows dominate.
    let w = Zonotope::from_box(
        DVector::zeros(4),
        &DVector::from_vec(vec![5e-4, 5e-4, 8e-3, 1.5e-2]),
    )?;
    let system = UncertainAffineSystem::new(vertices, vec![w; n_steps])?;

    // The second joint is unactuated and the tip-mass spread compounds
    // multiplicatively, so over a short horizon the set can only grow; the
    // goal certifies bounded growth rather than contraction.
    let start_set = Zonotope::from_box(
        DVector::zeros(4),
        &DVector::from_vec(vec![0.05, 0.05, 0.3, 0.3]),
    )?;
    let tube_set = Zonotope::from_box(
        DVector::zeros(4),
        &DVector::from_vec(vec![0.4, 0.2, 2.5, 1.3]),
    )?;
    let recenter = |set: &Zonotope, c: &DVector<f64>| set.translate(c);
    let input_set = Zonotope::from_box(DVector::zeros(1), &DVector::from_vec(vec![10.0]))?;
    let scenario = Scenario {
        initial_set: recenter(&start_set, &nominal_states[0])?,
        goal_set: recenter(&tube_set, &nominal_states[n_steps])?,
        state_bounds: None,
        input_bounds: vec![input_set; n_steps],
        nominal_states: nominal_states.to_vec(),
        nominal_inputs: nominal_inputs.to_vec(),
        center_state_weight: DMatrix::identity(4, 4),
        center_input_weight: DMatrix::identity(1, 1),
        generator_state_weight: DMatrix::identity(4, 4),
        generator_input_weight: DMatrix::identity(1, 1),
        reduction_weight: 1.0,
        reduction_columns: Some(16),
        dt,
    };
    Ok((system, scenario))
}
