//! Versioned TOML scenario files.
//!
//! A scenario file selects one of the built-in case studies, overrides
//! its physical intervals, sets, weights, and reduction target, and
//! carries solver/simulation/benchmark settings for the command-line
//! tools. Unknown fields and version mismatches are rejected so schema
//! drift surfaces as a config error naming the offending field.

use std::path::Path;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::io::read_nominal_trajectory;
use crate::simlab::PolicyMode;
use crate::synth::bnb::BnbConfig;
use crate::synth::clarabel_adapter::ClarabelAdapter;
use crate::sysmodel::{
    build_pendubot, build_pendulum_wall, wall_touch_profile, HybridUncertainSystem,
    PendubotParams, PendulumParams, Scenario, UncertainAffineSystem,
};
use crate::zonoset::Zonotope;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub kind: SystemKind,
    /// Default RNG seed; command-line `--seed` takes precedence.
    #[serde(default)]
    pub seed: u64,
    pub pendulum: Option<PendulumSection>,
    pub pendubot: Option<PendubotSection>,
    #[serde(default)]
    pub sets: SetsSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub reduction: ReductionSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    PendulumWall,
    Pendubot,
}

/// Torque-driven pendulum with an elastic wall.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumSection {
    /// Integrator step; control runs every `stride` integrator steps.
    #[serde(default = "default_pendulum_dt")]
    pub dt: f64,
    #[serde(default = "default_pendulum_stride")]
    pub stride: usize,
    /// Horizon in control steps.
    #[serde(default = "default_pendulum_steps")]
    pub steps: usize,
    #[serde(default = "default_wall_angle")]
    pub wall_angle: f64,
    pub inertia: Option<[f64; 2]>,
    pub arm_length: Option<[f64; 2]>,
    pub wall_stiffness: Option<[f64; 2]>,
    pub wall_damping: Option<[f64; 2]>,
    pub mass: Option<f64>,
    pub viscous: Option<f64>,
    pub torque_gain: Option<f64>,
    pub gravity: Option<f64>,
    /// Fixed wall-touch reference: contact during steps entry..=exit.
    pub contact: Option<ContactWindow>,
}

fn default_pendulum_dt() -> f64 {
    1.0 / 250.0
}
fn default_pendulum_stride() -> usize {
    5
}
fn default_pendulum_steps() -> usize {
    40
}
fn default_wall_angle() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactWindow {
    pub entry: usize,
    pub exit: usize,
}

/// Two-link arm with an uncertain tip mass.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendubotSection {
    #[serde(default = "default_pendubot_dt")]
    pub dt: f64,
    /// Horizon when no nominal file is given (rest reference).
    pub steps: Option<usize>,
    /// Nominal trajectory CSV (`t,q1,q2,dq1,dq2,u`), relative to the
    /// scenario file.
    pub nominal: Option<String>,
    pub link_masses: Option<[f64; 2]>,
    pub link_lengths: Option<[f64; 2]>,
    pub com_distances: Option<[f64; 2]>,
    pub link_inertias: Option<[f64; 2]>,
    pub static_friction: Option<[f64; 2]>,
    pub viscous_friction: Option<[f64; 2]>,
    pub tip_mass: Option<[f64; 2]>,
    pub gravity: Option<f64>,
}

fn default_pendubot_dt() -> f64 {
    1.0 / 100.0
}
fn default_pendubot_steps() -> usize {
    30
}

/// Axis-aligned box override for a scenario set.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSet {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
}

impl BoxSet {
    pub fn to_zonotope(&self) -> Result<Zonotope> {
        if self.center.len() != self.radii.len() {
            return Err(Error::Config(format!(
                "box set has {} center entries but {} radii",
                self.center.len(),
                self.radii.len()
            )));
        }
        Zonotope::from_box(
            DVector::from_vec(self.center.clone()),
            &DVector::from_vec(self.radii.clone()),
        )
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsSection {
    pub initial: Option<BoxSet>,
    pub goal: Option<BoxSet>,
    /// Applied to every step's input bound.
    pub input: Option<BoxSet>,
    /// Applied to every step's state bound (none by default).
    pub state: Option<BoxSet>,
}

/// Scalar weights, each a multiple of the identity.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub center_state: f64,
    pub center_input: f64,
    pub generator_state: f64,
    pub generator_input: f64,
    pub reduction: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            center_state: 1.0,
            center_input: 1.0,
            generator_state: 1.0,
            generator_input: 1.0,
            reduction: 1.0,
        }
    }
}

/// Reduction target, given either as a column count or as an order
/// (columns per state dimension). `columns = 0` disables reduction.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSection {
    pub columns: Option<usize>,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_nodes: usize,
    pub time_limit: f64,
    pub integrality_tol: f64,
    pub gap_tol: f64,
    pub rounding: bool,
    /// Big-M override for region relaxation (auto-scaled when absent).
    pub big_m: Option<f64>,
    /// Interior-point feasibility/gap tolerance.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSection {
    fn default() -> Self {
        let base = BnbConfig::default();
        let ip = ClarabelAdapter::default();
        Self {
            max_nodes: base.max_nodes,
            time_limit: base.time_budget.as_secs_f64(),
            integrality_tol: base.integrality_tol,
            gap_tol: base.gap_tol,
            rounding: base.rounding_heuristic,
            big_m: None,
            tol: ip.tol,
            max_iter: ip.max_iter,
        }
    }
}

impl SolverSection {
    pub fn bnb(&self) -> BnbConfig {
        BnbConfig {
            max_nodes: self.max_nodes,
            time_budget: Duration::from_secs_f64(self.time_limit),
            integrality_tol: self.integrality_tol,
            gap_tol: self.gap_tol,
            rounding_heuristic: self.rounding,
        }
    }

    pub fn adapter(&self) -> ClarabelAdapter {
        ClarabelAdapter {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySelection {
    TimeFree,
    TimeIndexed,
}

impl PolicySelection {
    pub fn mode(&self) -> PolicyMode {
        match self {
            Self::TimeFree => PolicyMode::TimeFree,
            Self::TimeIndexed => PolicyMode::TimeIndexed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantSource {
    /// Parameters drawn uniformly from their intervals.
    Sampled,
    /// One vertex model drawn per step.
    Vertices,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub rollouts: usize,
    /// Rollout length; defaults to the synthesis horizon.
    pub steps: Option<usize>,
    pub mode: PolicySelection,
    pub plants: PlantSource,
    /// RK4 substeps per control period for nonlinear plants.
    pub substeps: usize,
    /// Example trajectories written alongside the statistics.
    pub example_rollouts: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            rollouts: 200,
            steps: None,
            mode: PolicySelection::TimeFree,
            plants: PlantSource::Sampled,
            substeps: crate::simlab::DEFAULT_SUBSTEPS,
            example_rollouts: 3,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    /// Method names; all four when absent.
    pub methods: Option<Vec<String>>,
    /// Reduction target for the benchmark; defaults to the scenario's
    /// reduction columns.
    pub columns: Option<usize>,
}

/// Built system plus the (possibly overridden) synthesis scenario.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub system: BuiltSystem,
    pub scenario: Scenario,
    /// Fixed mode per step k = 0..N (hybrid with a contact window).
    pub schedule: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub enum BuiltSystem {
    Hybrid(HybridUncertainSystem),
    Single(UncertainAffineSystem),
}

impl BuiltSystem {
    pub fn state_dim(&self) -> usize {
        match self {
            Self::Hybrid(s) => s.state_dim(),
            Self::Single(s) => s.state_dim(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Self::Hybrid(s) => s.horizon(),
            Self::Single(s) => s.horizon(),
        }
    }
}

fn interval(v: Option<[f64; 2]>, fallback: (f64, f64), what: &str) -> Result<(f64, f64)> {
    match v {
        None => Ok(fallback),
        Some([lo, hi]) if lo <= hi => Ok((lo, hi)),
        Some([lo, hi]) => Err(Error::Config(format!(
            "{what}: interval [{lo}, {hi}] is reversed"
        ))),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match self.kind {
            SystemKind::PendulumWall => {
                if self.pendulum.is_none() {
                    return Err(Error::Config("kind pendulum-wall needs a [pendulum] table".into()));
                }
                if self.pendubot.is_some() {
                    return Err(Error::Config("[pendubot] table conflicts with kind pendulum-wall".into()));
                }
            }
            SystemKind::Pendubot => {
                if self.pendubot.is_none() {
                    return Err(Error::Config("kind pendubot needs a [pendubot] table".into()));
                }
                if self.pendulum.is_some() {
                    return Err(Error::Config("[pendulum] table conflicts with kind pendubot".into()));
                }
            }
        }
        if self.reduction.columns.is_some() && self.reduction.order.is_some() {
            return Err(Error::Config(
                "reduction: give either columns or order, not both".into(),
            ));
        }
        if let Some(order) = self.reduction.order {
            if order <= 0.0 {
                return Err(Error::Config(format!("reduction order {order} must be positive")));
            }
        }
        let c = &self.cost;
        if [c.center_state, c.center_input, c.generator_state, c.generator_input, c.reduction]
            .iter()
            .any(|&w| w < 0.0)
        {
            return Err(Error::Config("cost weights must be nonnegative".into()));
        }
        if self.simulate.rollouts == 0 {
            return Err(Error::Config("simulate.rollouts must be positive".into()));
        }
        Ok(())
    }

    /// Builds the system and scenario, resolving the nominal trajectory
    /// path against `base` (the scenario file's directory).
    pub fn build(&self, base: &Path) -> Result<LoadedScenario> {
        let mut loaded = match self.kind {
            SystemKind::PendulumWall => self.build_pendulum()?,
            SystemKind::Pendubot => self.build_pendubot(base)?,
        };
        self.apply_overrides(&mut loaded)?;
        loaded
            .scenario
            .validate(loaded.system.state_dim(), loaded.scenario.nominal_inputs[0].len())?;
        Ok(loaded)
    }

    /// Pendulum parameters with section overrides applied.
    pub fn pendulum_params(&self) -> Result<PendulumParams> {
        let section = self
            .pendulum
            .as_ref()
            .ok_or_else(|| Error::Config("no [pendulum] table".into()))?;
        let defaults = PendulumParams::default();
        Ok(PendulumParams {
            mass: section.mass.unwrap_or(defaults.mass),
            viscous: section.viscous.unwrap_or(defaults.viscous),
            torque_gain: section.torque_gain.unwrap_or(defaults.torque_gain),
            gravity: section.gravity.unwrap_or(defaults.gravity),
            inertia: interval(section.inertia, defaults.inertia, "pendulum.inertia")?,
            arm_length: interval(section.arm_length, defaults.arm_length, "pendulum.arm_length")?,
            wall_stiffness: interval(
                section.wall_stiffness,
                defaults.wall_stiffness,
                "pendulum.wall_stiffness",
            )?,
            wall_damping: interval(
                section.wall_damping,
                defaults.wall_damping,
                "pendulum.wall_damping",
            )?,
        })
    }

    /// Pendubot parameters with section overrides applied.
    pub fn pendubot_params(&self) -> Result<PendubotParams> {
        let section = self
            .pendubot
            .as_ref()
            .ok_or_else(|| Error::Config("no [pendubot] table".into()))?;
        let pair = |v: Option<[f64; 2]>, fallback: (f64, f64)| v.map_or(fallback, |[a, b]| (a, b));
        let defaults = PendubotParams::default();
        Ok(PendubotParams {
            link_masses: pair(section.link_masses, defaults.link_masses),
            link_lengths: pair(section.link_lengths, defaults.link_lengths),
            com_distances: pair(section.com_distances, defaults.com_distances),
            link_inertias: pair(section.link_inertias, defaults.link_inertias),
            gravity: section.gravity.unwrap_or(defaults.gravity),
            static_friction: pair(section.static_friction, defaults.static_friction),
            viscous_friction: pair(section.viscous_friction, defaults.viscous_friction),
            tip_mass: interval(section.tip_mass, defaults.tip_mass, "pendubot.tip_mass")?,
        })
    }

    fn build_pendulum(&self) -> Result<LoadedScenario> {
        let section = self.pendulum.as_ref().unwrap();
        if section.steps < 2 {
            return Err(Error::Config("horizon N >= 2 required".into()));
        }
        let params = self.pendulum_params()?;
        let (system, mut scenario) = build_pendulum_wall(
            &params,
            section.dt,
            section.stride,
            section.steps,
            section.wall_angle,
        )?;
        let schedule = match section.contact {
            None => None,
            Some(window) => {
                let (states, inputs, modes) = wall_touch_profile(
                    section.steps,
                    scenario.dt,
                    section.wall_angle,
                    window.entry,
                    window.exit,
                )?;
                scenario.nominal_states = states;
                scenario.nominal_inputs = inputs;
                // Mode of step k is the mode of set k.
                Some(modes[..section.steps].to_vec())
            }
        };
        Ok(LoadedScenario {
            system: BuiltSystem::Hybrid(system),
            scenario,
            schedule,
        })
    }

    fn build_pendubot(&self, base: &Path) -> Result<LoadedScenario> {
        let section = self.pendubot.as_ref().unwrap();
        let params = self.pendubot_params()?;
        let (states, inputs) = match &section.nominal {
            Some(rel) => {
                let (states, inputs) = read_nominal_trajectory(&base.join(rel))?;
                if let Some(steps) = section.steps {
                    if steps != inputs.len() {
                        return Err(Error::Config(format!(
                            "pendubot.steps = {steps} but the nominal file has {} steps",
                            inputs.len()
                        )));
                    }
                }
                (states, inputs)
            }
            None => {
                let steps = section.steps.unwrap_or_else(default_pendubot_steps);
                if steps < 2 {
                    return Err(Error::Config("horizon N >= 2 required".into()));
                }
                // Rest reference at the hanging equilibrium.
                (vec![DVector::zeros(4); steps + 1], vec![DVector::zeros(1); steps])
            }
        };
        let (system, scenario) = build_pendubot(&params, &states, &inputs, section.dt)?;
        Ok(LoadedScenario {
            system: BuiltSystem::Single(system),
            scenario,
            schedule: None,
        })
    }

    fn apply_overrides(&self, loaded: &mut LoadedScenario) -> Result<()> {
        let scenario = &mut loaded.scenario;
        let n_steps = scenario.horizon();
        if let Some(set) = &self.sets.initial {
            scenario.initial_set = set.to_zonotope()?;
        }
        if let Some(set) = &self.sets.goal {
            scenario.goal_set = set.to_zonotope()?;
        }
        if let Some(set) = &self.sets.input {
            scenario.input_bounds = vec![set.to_zonotope()?; n_steps];
        }
        if let Some(set) = &self.sets.state {
            scenario.state_bounds = Some(vec![set.to_zonotope()?; n_steps + 1]);
        }
        let n = loaded.system.state_dim();
        let m = scenario.nominal_inputs[0].len();
        scenario.center_state_weight = DMatrix::identity(n, n) * self.cost.center_state;
        scenario.center_input_weight = DMatrix::identity(m, m) * self.cost.center_input;
        scenario.generator_state_weight = DMatrix::identity(n, n) * self.cost.generator_state;
        scenario.generator_input_weight = DMatrix::identity(m, m) * self.cost.generator_input;
        scenario.reduction_weight = self.cost.reduction;
        if let Some(columns) = self.reduction.columns {
            scenario.reduction_columns = (columns > 0).then_some(columns);
        } else if let Some(order) = self.reduction.order {
            let columns = (order * n as f64).round() as usize;
            if columns == 0 {
                return Err(Error::Config(format!(
                    "reduction order {order} rounds to zero columns"
                )));
            }
            scenario.reduction_columns = Some(columns);
        }
        Ok(())
    }

    /// Plant distribution for closed-loop simulation. Vertex plants for a
    /// hybrid system need the synthesized mode schedule.
    pub fn plant_family(
        &self,
        loaded: &LoadedScenario,
        schedule: Option<&[usize]>,
    ) -> Result<crate::simlab::PlantFamily> {
        use crate::simlab::PlantFamily;
        match (self.kind, &loaded.system) {
            (SystemKind::PendulumWall, BuiltSystem::Hybrid(system)) => {
                let section = self.pendulum.as_ref().unwrap();
                match self.simulate.plants {
                    PlantSource::Sampled => Ok(PlantFamily::PendulumWall {
                        params: self.pendulum_params()?,
                        regions: system.regions().to_vec(),
                        q_c: section.wall_angle,
                        dt: section.dt,
                        stride: section.stride,
                    }),
                    PlantSource::Vertices => {
                        let schedule = schedule.ok_or_else(|| {
                            Error::Config(
                                "vertex plants for a hybrid system need the mode schedule".into(),
                            )
                        })?;
                        Ok(PlantFamily::VertexModels {
                            system: system.scheduled(schedule)?,
                        })
                    }
                }
            }
            (SystemKind::Pendubot, BuiltSystem::Single(system)) => match self.simulate.plants {
                PlantSource::Sampled => Ok(PlantFamily::PendubotRandomTip {
                    params: self.pendubot_params()?,
                    dt: self.pendubot.as_ref().unwrap().dt,
                    substeps: self.simulate.substeps,
                }),
                PlantSource::Vertices => Ok(PlantFamily::VertexModels {
                    system: system.clone(),
                }),
            },
            _ => Err(Error::Config("scenario kind and built system disagree".into())),
        }
    }

    /// Benchmark methods resolved to enum values.
    pub fn bench_methods(&self) -> Result<Vec<crate::simlab::ReductionMethod>> {
        match &self.bench.methods {
            None => Ok(crate::simlab::ReductionMethod::ALL.to_vec()),
            Some(names) => names
                .iter()
                .map(|n| crate::simlab::ReductionMethod::parse(n))
                .collect(),
        }
    }
}

/// Parses a comma-separated mode schedule (one mode per step).
pub fn parse_mode_schedule(text: &str, n_steps: usize, n_modes: usize) -> Result<Vec<usize>> {
    let schedule: Vec<usize> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("mode schedule entry '{s}' is not an index")))
        })
        .collect::<Result<_>>()?;
    if schedule.len() != n_steps {
        return Err(Error::Config(format!(
            "mode schedule has {} entries for {n_steps} steps",
            schedule.len()
        )));
    }
    if let Some(&bad) = schedule.iter().find(|&&j| j >= n_modes) {
        return Err(Error::Config(format!(
            "mode index {bad} out of range (system has {n_modes} modes)"
        )));
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_nominal_trajectory;
    use tempfile::tempdir;

    const PENDULUM_MINIMAL: &str = "
        schema_version = 1
        kind = 'pendulum-wall'
        [pendulum]
    ";

    #[test]
    fn minimal_pendulum_scenario_builds_with_defaults() {
        let file = ScenarioFile::parse(PENDULUM_MINIMAL).unwrap();
        let loaded = file.build(Path::new(".")).unwrap();
        assert_eq!(loaded.system.horizon(), 40);
        assert_eq!(loaded.scenario.reduction_columns, Some(12));
        assert_eq!(loaded.scenario.dt, 5.0 / 250.0);
        assert!(loaded.schedule.is_none());
        match &loaded.system {
            BuiltSystem::Hybrid(h) => assert_eq!(h.modes().len(), 2),
            BuiltSystem::Single(_) => panic!("expected a hybrid system"),
        }
    }

    #[test]
    fn contact_window_sets_reference_and_schedule() {
        let text = "
            schema_version = 1
            kind = 'pendulum-wall'
            [pendulum]
            steps = 20
            [pendulum.contact]
            entry = 6
            exit = 12
        ";
        let loaded = ScenarioFile::parse(text).unwrap().build(Path::new(".")).unwrap();
        let schedule = loaded.schedule.unwrap();
        assert_eq!(schedule.len(), 20);
        assert!(schedule[..6].iter().all(|&j| j == 0));
        assert!(schedule[6..=12].iter().all(|&j| j == 1));
        assert!(schedule[13..].iter().all(|&j| j == 0));
        // The reference presses past the wall during contact.
        assert!(loaded.scenario.nominal_states[9][0] > 0.1);
        assert_eq!(loaded.scenario.nominal_states[0][0], 0.0);
    }

    #[test]
    fn unknown_fields_and_bad_versions_are_named() {
        let err = ScenarioFile::parse("schema_version = 3\nkind = 'pendubot'\n[pendubot]\n")
            .unwrap_err();
        assert!(err.to_string().contains("schema_version 3"), "{err}");

        let err = ScenarioFile::parse(
            "schema_version = 1\nkind = 'pendulum-wall'\n[pendulum]\nstrides = 4\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("strides"), "{err}");
    }

    #[test]
    fn kind_and_section_must_agree() {
        let err = ScenarioFile::parse("schema_version = 1\nkind = 'pendulum-wall'\n").unwrap_err();
        assert!(err.to_string().contains("[pendulum]"), "{err}");
        let err = ScenarioFile::parse(
            "schema_version = 1\nkind = 'pendubot'\n[pendubot]\n[pendulum]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("conflicts"), "{err}");
    }

    #[test]
    fn reduction_override_variants() {
        let base = |extra: &str| {
            ScenarioFile::parse(&format!("{PENDULUM_MINIMAL}\n[reduction]\n{extra}"))
                .and_then(|f| f.build(Path::new(".")))
        };
        assert_eq!(base("columns = 8").unwrap().scenario.reduction_columns, Some(8));
        assert_eq!(base("columns = 0").unwrap().scenario.reduction_columns, None);
        assert_eq!(base("order = 6.0").unwrap().scenario.reduction_columns, Some(12));
        assert!(base("columns = 8\norder = 6.0").is_err());
    }

    #[test]
    fn set_and_cost_overrides_land_in_the_scenario() {
        let text = "
            schema_version = 1
            kind = 'pendulum-wall'
            [pendulum]
            steps = 10
            [sets.initial]
            center = [0.0, 0.0]
            radii = [0.01, 0.2]
            [sets.input]
            center = [0.0]
            radii = [15.0]
            [cost]
            generator_state = 2.5
        ";
        let loaded = ScenarioFile::parse(text).unwrap().build(Path::new(".")).unwrap();
        assert_eq!(loaded.scenario.initial_set.generator()[(1, 1)], 0.2);
        assert_eq!(loaded.scenario.input_bounds.len(), 10);
        assert_eq!(loaded.scenario.input_bounds[3].generator()[(0, 0)], 15.0);
        assert_eq!(loaded.scenario.generator_state_weight[(0, 0)], 2.5);
        assert_eq!(loaded.scenario.generator_state_weight[(1, 1)], 2.5);
    }

    #[test]
    fn short_horizons_are_rejected() {
        let err = ScenarioFile::parse(
            "schema_version = 1\nkind = 'pendulum-wall'\n[pendulum]\nsteps = 1\n",
        )
        .unwrap()
        .build(Path::new("."))
        .unwrap_err();
        assert!(err.to_string().contains("N >= 2"), "{err}");
    }

    #[test]
    fn pendubot_nominal_file_sets_the_horizon() {
        let dir = tempdir().unwrap();
        let states: Vec<DVector<f64>> =
            (0..8).map(|k| DVector::from_element(4, 1e-3 * k as f64)).collect();
        let inputs: Vec<DVector<f64>> = (0..7).map(|_| DVector::zeros(1)).collect();
        write_nominal_trajectory(&dir.path().join("nominal.csv"), &states, &inputs, 0.01)
            .unwrap();
        let text = "
            schema_version = 1
            kind = 'pendubot'
            [pendubot]
            nominal = 'nominal.csv'
        ";
        let loaded = ScenarioFile::parse(text).unwrap().build(dir.path()).unwrap();
        assert_eq!(loaded.system.horizon(), 7);
        assert_eq!(loaded.scenario.nominal_states[3][0], 3e-3);

        let text = "
            schema_version = 1
            kind = 'pendubot'
            [pendubot]
            nominal = 'nominal.csv'
            steps = 9
        ";
        let err = ScenarioFile::parse(text).unwrap().build(dir.path()).unwrap_err();
        assert!(err.to_string().contains("7 steps"), "{err}");
    }

    #[test]
    fn solver_section_maps_onto_search_settings() {
        let text = format!(
            "{PENDULUM_MINIMAL}\n[solver]\nmax_nodes = 77\ntime_limit = 1.5\nrounding = false\n"
        );
        let file = ScenarioFile::parse(&text).unwrap();
        let bnb = file.solver.bnb();
        assert_eq!(bnb.max_nodes, 77);
        assert_eq!(bnb.time_budget, Duration::from_secs_f64(1.5));
        assert!(!bnb.rounding_heuristic);
        assert_eq!(bnb.gap_tol, BnbConfig::default().gap_tol);
    }

    #[test]
    fn mode_schedule_parsing_validates_shape_and_range() {
        assert_eq!(parse_mode_schedule("0, 1,1 ,0", 4, 2).unwrap(), vec![0, 1, 1, 0]);
        assert!(parse_mode_schedule("0,1", 4, 2).is_err());
        assert!(parse_mode_schedule("0,2,0,0", 4, 2).is_err());
        assert!(parse_mode_schedule("0,x,0,0", 4, 2).is_err());
    }

    #[test]
    fn negative_cost_weights_are_rejected() {
        let err = ScenarioFile::parse(&format!("{PENDULUM_MINIMAL}\n[cost]\nreduction = -1.0"))
            .unwrap_err();
        assert!(err.to_string().contains("nonnegative"), "{err}");
    }
}
