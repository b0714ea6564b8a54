//! Closed-loop simulation against sampled uncertain plants.
//!
//! Plants draw their physical parameters uniformly from the declared
//! intervals (interior points, not only the vertices the synthesis
//! certifies), so the rollouts probe the convex-hull relaxation
//! empirically. Monte-Carlo containment statistics count exact zonotope
//! membership per (rollout, step); the volume benchmark compares order
//! reduction methods on the regenerated intermediate hulls.

use nalgebra::DVector;
use rand::{RngExt as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::policy::{distance, feedback, ControllerState, PolicyLibrary};
use crate::reduction::{
    parallelotope_bound, reazor, reduce_combastel, reduce_girard, reduce_pca,
};
use crate::synth::{vertex_images, SynthesisResult};
use crate::sysmodel::{
    AffineVertexModel, HybridUncertainSystem, PendubotParams, PendulumParams,
    UncertainAffineSystem,
};
use crate::zonoset::{convex_hull_many, Parallelotope, Zonotope};
use crate::{Error, Result};

/// States beyond this magnitude abort a rollout as diverged.
pub const STATE_BLOWUP_LIMIT: f64 = 1e9;

/// RK4 substeps per control period for nonlinear plants.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// How a rollout picks the feedback entry each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Algorithm-1 selection from the current state.
    TimeFree,
    /// Entry k at step k (clamped to the last entry).
    TimeIndexed,
}

/// Concrete plant dynamics for one rollout.
#[derive(Debug, Clone)]
pub enum PlantDynamics {
    /// Affine model per step (index clamped to the last entry).
    Linear(Vec<AffineVertexModel>),
    /// Region-switched time-invariant affine modes; the active region is
    /// the nearest parallelotope bound (exact for box regions).
    HybridLinear {
        bounds: Vec<Parallelotope>,
        modes: Vec<AffineVertexModel>,
    },
    /// Two-link arm integrated with RK4 substeps per control period.
    Pendubot {
        params: PendubotParams,
        tip_mass: f64,
        dt: f64,
        substeps: usize,
    },
}

/// A sampled plant plus its per-step disturbance sets (empty disables
/// disturbance sampling).
#[derive(Debug, Clone)]
pub struct PlantInstance {
    dynamics: PlantDynamics,
    disturbance: Vec<Zonotope>,
}

impl PlantInstance {
    pub fn linear(models: Vec<AffineVertexModel>, disturbance: Vec<Zonotope>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("plant needs at least one model".into()));
        }
        Ok(Self {
            dynamics: PlantDynamics::Linear(models),
            disturbance,
        })
    }

    pub fn hybrid_linear(
        regions: &[Zonotope],
        modes: Vec<AffineVertexModel>,
        disturbance: Vec<Zonotope>,
    ) -> Result<Self> {
        if regions.len() != modes.len() || modes.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} regions for {} modes",
                regions.len(),
                modes.len()
            )));
        }
        let bounds = regions
            .iter()
            .map(parallelotope_bound)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dynamics: PlantDynamics::HybridLinear { bounds, modes },
            disturbance,
        })
    }

    pub fn pendubot(
        params: PendubotParams,
        tip_mass: f64,
        dt: f64,
        substeps: usize,
        disturbance: Vec<Zonotope>,
    ) -> Result<Self> {
        if dt <= 0.0 || substeps == 0 {
            return Err(Error::InvalidArgument(
                "integration needs dt > 0 and at least one substep".into(),
            ));
        }
        Ok(Self {
            dynamics: PlantDynamics::Pendubot {
                params,
                tip_mass,
                dt,
                substeps,
            },
            disturbance,
        })
    }

    pub fn state_dim(&self) -> usize {
        match &self.dynamics {
            PlantDynamics::Linear(models) => models[0].state_dim(),
            PlantDynamics::HybridLinear { modes, .. } => modes[0].state_dim(),
            PlantDynamics::Pendubot { .. } => 4,
        }
    }

    /// Advances one control period and adds a sampled disturbance.
    pub fn step(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>> {
        let mut next = match &self.dynamics {
            PlantDynamics::Linear(models) => models[k.min(models.len() - 1)].step(x, u),
            PlantDynamics::HybridLinear { bounds, modes } => {
                let mode = (0..bounds.len())
                    .min_by(|&a, &b| {
                        distance(x, &bounds[a])
                            .partial_cmp(&distance(x, &bounds[b]))
                            .unwrap()
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                modes[mode].step(x, u)
            }
            PlantDynamics::Pendubot {
                params,
                tip_mass,
                dt,
                substeps,
            } => {
                let h = dt / *substeps as f64;
                let mut state = x.clone();
                for _ in 0..*substeps {
                    state = rk4_step(params, *tip_mass, &state, u[0], h)?;
                }
                state
            }
        };
        if let Some(w) = self.disturbance.get(k.min(self.disturbance.len().saturating_sub(1))) {
            next += w.sample(rng);
        }
        Ok(next)
    }
}

fn rk4_step(
    params: &PendubotParams,
    tip_mass: f64,
    x: &DVector<f64>,
    u: f64,
    h: f64,
) -> Result<DVector<f64>> {
    let k1 = params.vector_field(tip_mass, x, u)?;
    let k2 = params.vector_field(tip_mass, &(x + &k1 * (h / 2.0)), u)?;
    let k3 = params.vector_field(tip_mass, &(x + &k2 * (h / 2.0)), u)?;
    let k4 = params.vector_field(tip_mass, &(x + &k3 * h), u)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// One closed-loop trajectory with per-step membership flags against the
/// tube (index clamped to the final set).
#[derive(Debug, Clone)]
pub struct Rollout {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub chosen: Vec<usize>,
    /// Membership in the per-step parallelotope bound (cheap check).
    pub bound_member: Vec<bool>,
    /// Exact zonotope membership per step.
    pub exact_member: Vec<bool>,
    pub exits: usize,
    pub re_entries: usize,
}

/// Counts true→false and false→true transitions.
pub(crate) fn count_transitions(member: &[bool]) -> (usize, usize) {
    let mut exits = 0;
    let mut re_entries = 0;
    for pair in member.windows(2) {
        match (pair[0], pair[1]) {
            (true, false) => exits += 1,
            (false, true) => re_entries += 1,
            _ => {}
        }
    }
    (exits, re_entries)
}

/// Rolls the plant forward under the library policy for `steps` control
/// periods, logging exact and parallelotope membership against the tube.
pub fn simulate_closed_loop(
    plant: &PlantInstance,
    library: &PolicyLibrary,
    tube: &[Zonotope],
    x0: &DVector<f64>,
    steps: usize,
    mode: PolicyMode,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout> {
    if tube.is_empty() {
        return Err(Error::InvalidArgument("tube has no sets".into()));
    }
    if x0.len() != library.dim() || x0.len() != plant.state_dim() {
        return Err(Error::ShapeMismatch(format!(
            "state dimension mismatch: x0 {}, library {}, plant {}",
            x0.len(),
            library.dim(),
            plant.state_dim()
        )));
    }
    let tube_bounds = tube
        .iter()
        .map(parallelotope_bound)
        .collect::<Result<Vec<_>>>()?;
    let mut rollout = Rollout {
        states: vec![x0.clone()],
        inputs: Vec::with_capacity(steps),
        chosen: Vec::with_capacity(steps),
        bound_member: Vec::with_capacity(steps + 1),
        exact_member: Vec::with_capacity(steps + 1),
        exits: 0,
        re_entries: 0,
    };
    let mut controller = ControllerState::new();
    for t in 0..=steps {
        let x = rollout.states[t].clone();
        if !x.iter().all(|v| v.is_finite()) || x.amax() > STATE_BLOWUP_LIMIT {
            return Err(Error::Solver(format!(
                "state diverged at step {t} (|x| = {:.3e})",
                x.amax()
            )));
        }
        let slot = t.min(tube.len() - 1);
        rollout
            .bound_member
            .push(distance(&x, &tube_bounds[slot]) == 0.0);
        rollout.exact_member.push(tube[slot].contains_point(&x)?);
        if t == steps {
            break;
        }
        let (u, kappa) = match mode {
            PolicyMode::TimeFree => library.choose_policy(&x, &mut controller),
            PolicyMode::TimeIndexed => {
                let k = t.min(library.len() - 1);
                (feedback(&library.entries()[k], &x), k)
            }
        };
        let next = plant.step(t, &x, &u, rng)?;
        rollout.inputs.push(u);
        rollout.chosen.push(kappa);
        rollout.states.push(next);
    }
    let (exits, re_entries) = count_transitions(&rollout.exact_member);
    rollout.exits = exits;
    rollout.re_entries = re_entries;
    Ok(rollout)
}

/// Distribution of plants for Monte-Carlo runs.
#[derive(Debug, Clone)]
pub enum PlantFamily {
    /// Wall pendulum with inertia, arm length, stiffness, and damping
    /// drawn uniformly from their intervals; switched at the wall angle.
    PendulumWall {
        params: PendulumParams,
        regions: Vec<Zonotope>,
        q_c: f64,
        dt: f64,
        stride: usize,
    },
    /// One vertex model drawn per step (corner plants).
    VertexModels { system: UncertainAffineSystem },
    /// Nonlinear two-link arm with a uniformly sampled tip mass.
    PendubotRandomTip {
        params: PendubotParams,
        dt: f64,
        substeps: usize,
    },
}

impl PlantFamily {
    pub fn sample(&self, disturbance: Vec<Zonotope>, rng: &mut ChaCha8Rng) -> Result<PlantInstance> {
        let uniform = |(lo, hi): (f64, f64), rng: &mut ChaCha8Rng| -> f64 {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        };
        match self {
            Self::PendulumWall {
                params,
                regions,
                q_c,
                dt,
                stride,
            } => {
                let inertia = uniform(params.inertia, rng);
                let length = uniform(params.arm_length, rng);
                let stiffness = uniform(params.wall_stiffness, rng);
                let damping = uniform(params.wall_damping, rng);
                let [free, contact] =
                    params.mode_models(inertia, length, stiffness, damping, *q_c, *dt, *stride)?;
                PlantInstance::hybrid_linear(regions, vec![free, contact], disturbance)
            }
            Self::VertexModels { system } => {
                let models = (0..system.horizon())
                    .map(|k| {
                        let options = system.vertices_at(k);
                        options[rng.random_range(0..options.len())].clone()
                    })
                    .collect();
                PlantInstance::linear(models, disturbance)
            }
            Self::PendubotRandomTip {
                params,
                dt,
                substeps,
            } => {
                let tip = uniform(params.tip_mass, rng);
                PlantInstance::pendubot(params.clone(), tip, *dt, *substeps, disturbance)
            }
        }
    }
}

/// Aggregate containment statistics over a Monte-Carlo batch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContainmentStats {
    pub rollouts: usize,
    pub steps: usize,
    pub member_pairs: usize,
    pub total_pairs: usize,
    /// Exact members per step index (length steps + 1).
    pub per_step_member: Vec<usize>,
    pub exits: usize,
    pub re_entries: usize,
}

impl ContainmentStats {
    pub fn fraction(&self) -> f64 {
        if self.total_pairs == 0 {
            return 1.0;
        }
        self.member_pairs as f64 / self.total_pairs as f64
    }
}

/// Per-rollout seed derivation: decorrelated, stable across worker
/// counts.
fn derive_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Reconstructs the `index`-th rollout of a Monte-Carlo batch: same
/// derived seed, so the trajectory matches what the batch aggregated.
#[allow(clippy::too_many_arguments)]
pub fn rollout_by_index(
    family: &PlantFamily,
    library: &PolicyLibrary,
    tube: &[Zonotope],
    initial_set: &Zonotope,
    disturbance: &[Zonotope],
    index: usize,
    steps: usize,
    mode: PolicyMode,
    seed: u64,
) -> Result<Rollout> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
    let x0 = initial_set.sample(&mut rng);
    let plant = family.sample(disturbance.to_vec(), &mut rng)?;
    simulate_closed_loop(&plant, library, tube, &x0, steps, mode, &mut rng)
}

/// Runs `n_rollouts` independent closed-loop simulations from uniformly
/// sampled initial states and plants, and aggregates exact-membership
/// counts. Reproducible for a fixed seed independent of worker count.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    family: &PlantFamily,
    library: &PolicyLibrary,
    tube: &[Zonotope],
    initial_set: &Zonotope,
    disturbance: &[Zonotope],
    n_rollouts: usize,
    steps: usize,
    mode: PolicyMode,
    seed: u64,
) -> Result<ContainmentStats> {
    if n_rollouts == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    let rollouts: Vec<Rollout> = (0..n_rollouts)
        .into_par_iter()
        .map(|i| {
            rollout_by_index(
                family,
                library,
                tube,
                initial_set,
                disturbance,
                i,
                steps,
                mode,
                seed,
            )
        })
        .collect::<Result<_>>()?;
    let mut stats = ContainmentStats {
        rollouts: n_rollouts,
        steps,
        per_step_member: vec![0; steps + 1],
        ..Default::default()
    };
    for rollout in &rollouts {
        for (t, &member) in rollout.exact_member.iter().enumerate() {
            stats.total_pairs += 1;
            if member {
                stats.member_pairs += 1;
                stats.per_step_member[t] += 1;
            }
        }
        stats.exits += rollout.exits;
        stats.re_entries += rollout.re_entries;
    }
    Ok(stats)
}

/// Order-reduction methods compared by the volume benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMethod {
    Reazor,
    Girard,
    Combastel,
    Pca,
}

impl ReductionMethod {
    pub const ALL: [Self; 4] = [Self::Reazor, Self::Girard, Self::Combastel, Self::Pca];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Reazor => "reazor",
            Self::Girard => "girard",
            Self::Combastel => "combastel",
            Self::Pca => "pca",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown reduction method '{name}'")))
    }

    fn apply(&self, hull: &Zonotope, p: usize) -> Result<Zonotope> {
        match self {
            Self::Reazor => {
                let reduced = reazor(hull.generator(), p)?;
                Zonotope::new(hull.center().clone(), reduced.zonotope.generator().clone())
            }
            Self::Girard => reduce_girard(hull, p),
            Self::Combastel => reduce_combastel(hull, p),
            Self::Pca => reduce_pca(hull, p),
        }
    }
}

/// One benchmark measurement: volume of the reduced hull at one step.
#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub step: usize,
    pub method: ReductionMethod,
    pub volume: f64,
    pub reference_volume: f64,
    /// |V − V_ref| / V_ref × 100.
    pub error_percent: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSummary {
    pub method: ReductionMethod,
    pub mean_percent: f64,
    pub max_percent: f64,
}

/// Reduces each step's regenerated intermediate hull with every method
/// and reports volume errors against the unreduced hull. Reduction to at
/// least the hull width is a no-op (zero error) for every method.
pub fn volume_benchmark(
    result: &SynthesisResult,
    system: &UncertainAffineSystem,
    methods: &[ReductionMethod],
    p: usize,
) -> Result<(Vec<BenchmarkRow>, Vec<BenchmarkSummary>)> {
    let steps: Vec<&[AffineVertexModel]> = (0..system.horizon())
        .map(|k| system.vertices_at(k))
        .collect();
    benchmark_core(result, &steps, methods, p)
}

/// Hybrid variant: per-step vertices follow the result's mode schedule.
pub fn volume_benchmark_hybrid(
    result: &SynthesisResult,
    system: &HybridUncertainSystem,
    methods: &[ReductionMethod],
    p: usize,
) -> Result<(Vec<BenchmarkRow>, Vec<BenchmarkSummary>)> {
    let schedule = result
        .schedule
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("result carries no mode schedule".into()))?;
    let steps: Vec<&[AffineVertexModel]> = schedule
        .iter()
        .enumerate()
        .map(|(k, &j)| system.modes()[j].vertices_at(k))
        .collect();
    benchmark_core(result, &steps, methods, p)
}

fn benchmark_core(
    result: &SynthesisResult,
    steps: &[&[AffineVertexModel]],
    methods: &[ReductionMethod],
    p: usize,
) -> Result<(Vec<BenchmarkRow>, Vec<BenchmarkSummary>)> {
    if result.inputs.len() != steps.len() || result.states.len() != steps.len() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "result with {} inputs for {} steps",
            result.inputs.len(),
            steps.len()
        )));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no reduction methods requested".into()));
    }
    let mut rows = Vec::with_capacity(steps.len() * methods.len());
    for (k, vertices) in steps.iter().enumerate() {
        let images = vertex_images(&result.states[k], &result.inputs[k], vertices)?;
        let hull = convex_hull_many(&images)?;
        let reference_volume = hull.volume()?;
        if reference_volume <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "degenerate hull at step {k}: zero reference volume"
            )));
        }
        for method in methods {
            let reduced = if p >= hull.num_generators() {
                hull.clone()
            } else {
                method.apply(&hull, p)?
            };
            let volume = reduced.volume()?;
            rows.push(BenchmarkRow {
                step: k,
                method: *method,
                volume,
                reference_volume,
                error_percent: (volume - reference_volume).abs() / reference_volume * 100.0,
            });
        }
    }
    let summaries = methods
        .iter()
        .map(|method| {
            let errors: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == *method)
                .map(|r| r.error_percent)
                .collect();
            BenchmarkSummary {
                method: *method,
                mean_percent: errors.iter().sum::<f64>() / errors.len() as f64,
                max_percent: errors.iter().fold(0.0, |a, &b| a.max(b)),
            }
        })
        .collect();
    Ok((rows, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_ocp, solve, SynthStatus};
    use crate::synth::bnb::BnbConfig;
    use crate::synth::clarabel_adapter::ClarabelAdapter;
    use crate::sysmodel::Scenario;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn box_set(center: &[f64], radii: &[f64]) -> Zonotope {
        Zonotope::from_box(
            DVector::from_row_slice(center),
            &DVector::from_row_slice(radii),
        )
        .unwrap()
    }

    fn contraction(scale: f64) -> AffineVertexModel {
        AffineVertexModel::new(
            DMatrix::from_row_slice(2, 2, &[scale, 0.05, -0.05, scale]),
            DMatrix::from_column_slice(2, 1, &[0.1, 0.9]),
            DVector::from_vec(vec![0.01, 0.0]),
        )
        .unwrap()
    }

    fn small_scenario(n_steps: usize, reduction: Option<usize>) -> Scenario {
        Scenario {
            initial_set: box_set(&[0.3, -0.2], &[0.05, 0.05]),
            goal_set: box_set(&[0.0, 0.0], &[1.0, 1.0]),
            state_bounds: None,
            input_bounds: vec![box_set(&[0.0], &[5.0]); n_steps],
            nominal_states: vec![DVector::zeros(2); n_steps + 1],
            nominal_inputs: vec![DVector::zeros(1); n_steps],
            center_state_weight: DMatrix::identity(2, 2),
            center_input_weight: DMatrix::identity(1, 1),
            generator_state_weight: DMatrix::identity(2, 2),
            generator_input_weight: DMatrix::identity(1, 1),
            reduction_weight: 1.0,
            reduction_columns: reduction,
            dt: 0.1,
        }
    }

    fn synthesize(
        vertices: Vec<AffineVertexModel>,
        n_steps: usize,
        w_radii: &[f64],
        reduction: Option<usize>,
    ) -> (UncertainAffineSystem, Scenario, SynthesisResult) {
        let w = box_set(&[0.0, 0.0], w_radii);
        let system =
            UncertainAffineSystem::new(vec![vertices; n_steps], vec![w; n_steps]).unwrap();
        let scenario = small_scenario(n_steps, reduction);
        let built = build_ocp(&system, &scenario).unwrap();
        let result = solve(&built, &ClarabelAdapter::default(), &BnbConfig::default()).unwrap();
        assert_eq!(result.status, SynthStatus::Optimal);
        (system, scenario, result)
    }

    #[test]
    fn transition_counting() {
        assert_eq!(count_transitions(&[true, false, false, true, false]), (2, 1));
        assert_eq!(count_transitions(&[true, true, true]), (0, 0));
        assert_eq!(count_transitions(&[true]), (0, 0));
        assert_eq!(count_transitions(&[]), (0, 0));
    }

    #[test]
    fn nominal_rollout_tracks_centers() {
        let (system, _, result) =
            synthesize(vec![contraction(0.8)], 5, &[1e-3, 1e-3], Some(3));
        let library = PolicyLibrary::from_result(&result).unwrap();
        // Nominal vertex plant, zero disturbance.
        let plant = PlantInstance::linear(
            (0..5).map(|k| system.vertices_at(k)[0].clone()).collect(),
            Vec::new(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = result.states[0].center().clone();
        let rollout = simulate_closed_loop(
            &plant,
            &library,
            &result.states,
            &x0,
            5,
            PolicyMode::TimeFree,
            &mut rng,
        )
        .unwrap();
        for (t, x) in rollout.states.iter().enumerate() {
            assert_relative_eq!(x, result.states[t].center(), epsilon = 1e-7);
        }
        assert!(rollout.exact_member.iter().all(|&m| m));
        assert!(rollout.bound_member.iter().all(|&m| m));
        assert_eq!(rollout.chosen, vec![0, 1, 2, 3, 4]);
        assert_eq!((rollout.exits, rollout.re_entries), (0, 0));
    }

    #[test]
    fn vertex_plants_with_square_generators_stay_contained() {
        let (system, scenario, result) = synthesize(
            vec![contraction(0.8), contraction(0.7)],
            6,
            &[1e-3, 2e-3],
            Some(2),
        );
        // Square generators from step 1 on: the feedback realizes the set
        // map exactly, so membership is structural.
        for k in 1..=6 {
            assert_eq!(result.states[k].num_generators(), 2);
        }
        let library = PolicyLibrary::from_result(&result).unwrap();
        let family = PlantFamily::VertexModels { system };
        let stats = monte_carlo(
            &family,
            &library,
            &result.states,
            &scenario.initial_set,
            &vec![box_set(&[0.0, 0.0], &[1e-3, 2e-3]); 6],
            25,
            6,
            PolicyMode::TimeIndexed,
            7,
        )
        .unwrap();
        assert_eq!(stats.fraction(), 1.0);
        assert!(stats.per_step_member.iter().all(|&c| c == 25));
        assert_eq!(stats.total_pairs, 25 * 7);
    }

    #[test]
    fn monte_carlo_is_seed_reproducible() {
        let (system, scenario, result) =
            synthesize(vec![contraction(0.8), contraction(0.7)], 4, &[1e-3, 1e-3], Some(3));
        let library = PolicyLibrary::from_result(&result).unwrap();
        let family = PlantFamily::VertexModels { system };
        let run = || {
            monte_carlo(
                &family,
                &library,
                &result.states,
                &scenario.initial_set,
                &vec![box_set(&[0.0, 0.0], &[1e-3, 1e-3]); 4],
                10,
                4,
                PolicyMode::TimeFree,
                99,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn diverging_plant_aborts_with_diagnostic() {
        let state = box_set(&[0.0, 0.0], &[1.0, 1.0]);
        let input = Zonotope::new(DVector::zeros(1), DMatrix::zeros(1, 2)).unwrap();
        let result = SynthesisResult {
            states: vec![state.clone(); 3],
            inputs: vec![input; 2],
            slacks: vec![DVector::zeros(0); 2],
            schedule: None,
            status: SynthStatus::Optimal,
            objective: 0.0,
            nodes_explored: 0,
        };
        let library = PolicyLibrary::from_result(&result).unwrap();
        let runaway = AffineVertexModel::new(
            DMatrix::identity(2, 2) * 1e3,
            DMatrix::zeros(2, 1),
            DVector::zeros(2),
        )
        .unwrap();
        let plant = PlantInstance::linear(vec![runaway], Vec::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = simulate_closed_loop(
            &plant,
            &library,
            &result.states,
            &DVector::from_vec(vec![1.0, 1.0]),
            10,
            PolicyMode::TimeIndexed,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Solver(msg) if msg.contains("diverged")));
    }

    #[test]
    fn hybrid_plant_switches_at_region_boundary() {
        let advance = AffineVertexModel::new(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let retreat = AffineVertexModel::new(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DVector::from_element(1, -3.0),
        )
        .unwrap();
        let regions = vec![box_set(&[-5.0], &[5.0]), box_set(&[5.0], &[5.0])];
        let plant =
            PlantInstance::hybrid_linear(&regions, vec![advance, retreat], Vec::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = DVector::zeros(1);
        let mut step =
            |x: f64| plant.step(0, &DVector::from_element(1, x), &u, &mut rng).unwrap()[0];
        assert_eq!(step(-1.0), 1.0);
        assert_eq!(step(1.0), -2.0);
        // Boundary point belongs to both regions; the lower index wins.
        assert_eq!(step(0.0), 2.0);
    }

    #[test]
    fn benchmark_is_exact_when_target_covers_hull() {
        let (system, _, result) =
            synthesize(vec![contraction(0.8), contraction(0.7)], 3, &[1e-3, 1e-3], Some(3));
        let (rows, summaries) =
            volume_benchmark(&result, &system, &ReductionMethod::ALL, 60).unwrap();
        assert_eq!(rows.len(), 3 * 4);
        for row in &rows {
            assert_eq!(row.error_percent, 0.0);
            assert_eq!(row.volume, row.reference_volume);
        }
        for summary in &summaries {
            assert_eq!(summary.mean_percent, 0.0);
            assert_eq!(summary.max_percent, 0.0);
        }
    }

    #[test]
    fn benchmark_methods_over_approximate_the_hull() {
        let (system, _, result) = synthesize(
            vec![contraction(0.85), contraction(0.7)],
            4,
            &[2e-3, 1e-3],
            Some(4),
        );
        let (rows, summaries) =
            volume_benchmark(&result, &system, &ReductionMethod::ALL, 4).unwrap();
        for row in &rows {
            // Every reducer over-approximates, so volumes only grow.
            assert!(row.volume >= row.reference_volume - 1e-12);
            assert!(row.error_percent >= 0.0);
        }
        for summary in &summaries {
            assert!(summary.max_percent >= summary.mean_percent);
        }
        // Reduced sets contain the hull they replace.
        for (k, step_vertices) in (0..4).map(|k| (k, system.vertices_at(k))) {
            let images =
                vertex_images(&result.states[k], &result.inputs[k], step_vertices).unwrap();
            let hull = convex_hull_many(&images).unwrap();
            if hull.num_generators() <= 4 {
                continue;
            }
            for method in ReductionMethod::ALL {
                let reduced = method.apply(&hull, 4).unwrap();
                assert!(reduced.contains(&hull).unwrap().is_some(), "{}", method.name());
            }
        }
    }

    #[test]
    fn benchmark_rejects_sets_beyond_the_volume_cap() {
        let (system, _, result) = synthesize(
            vec![
                contraction(0.85),
                contraction(0.8),
                contraction(0.75),
                contraction(0.7),
            ],
            2,
            &[1e-3, 1e-3],
            Some(12),
        );
        // Step 1 hulls four width-12 images: 51 columns, past the cap.
        assert!(volume_benchmark(&result, &system, &[ReductionMethod::Girard], 12).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for method in ReductionMethod::ALL {
            assert_eq!(ReductionMethod::parse(method.name()).unwrap(), method);
        }
        assert!(ReductionMethod::parse("midpoint").is_err());
    }
}
