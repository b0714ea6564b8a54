//! Robust tube synthesis.
//!
//! A state tube ⟨x̄_k, G_k⟩ and input tube ⟨ū_k, θ_k⟩ are decision
//! variables of a convex program: per-step vertex images are hulled,
//! reduced, and widened by the disturbance, and the result is pinned to
//! the next step's variables. Containment constraints (terminal, input,
//! state regions) use sufficient multiplier encodings. Hybrid systems add
//! mode binaries with big-M coupling, solved by branch-and-bound over QP
//! relaxations. A post-solve audit re-verifies every containment with
//! independent support-function arithmetic.

pub mod bnb;
pub mod clarabel_adapter;
pub mod program;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::reduction::reazor_fragment;
use crate::sysmodel::{AffineVertexModel, HybridUncertainSystem, Scenario, UncertainAffineSystem};
use crate::zonoset::{convex_hull_many, MatrixZonotope, Zonotope};
use crate::{Error, Result};
use bnb::{solve_mixed, BnbConfig, BnbStatus};
use program::{ConvexProgram, LinExpr, SolverAdapter, VarId, VarTag};

/// Tolerance against which post-solve audits are judged.
pub const AUDIT_TOL: f64 = 1e-6;

/// Zonotope whose center and generator entries are affine expressions in
/// program variables.
#[derive(Debug, Clone)]
pub struct ZonoExpr {
    pub center: Vec<LinExpr>,
    /// Row-major: generator[row][col].
    pub generator: Vec<Vec<LinExpr>>,
}

impl ZonoExpr {
    pub fn constant(z: &Zonotope) -> Self {
        let n = z.dim();
        let p = z.num_generators();
        Self {
            center: (0..n).map(|i| LinExpr::constant(z.center()[i])).collect(),
            generator: (0..n)
                .map(|r| (0..p).map(|c| LinExpr::constant(z.generator()[(r, c)])).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn width(&self) -> usize {
        self.generator.first().map_or(0, |row| row.len())
    }

    /// Appends zero columns up to `target` (no-op when already as wide).
    pub fn pad_columns(mut self, target: usize) -> Self {
        for row in &mut self.generator {
            while row.len() < target {
                row.push(LinExpr::zero());
            }
        }
        self
    }

    /// Mirrors the numeric pairwise hull: operands padded to a common
    /// width w, output ((X+Y)/2, (x−y)/2, (X−Y)/2) of width 2w + 1.
    pub fn hull_pair(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(
                "convex hull operands must share dimension".into(),
            ));
        }
        let w = self.width().max(other.width());
        let a = self.clone().pad_columns(w);
        let b = other.clone().pad_columns(w);
        let n = a.dim();
        let center = (0..n)
            .map(|i| a.center[i].plus(&b.center[i]).scaled(0.5))
            .collect();
        let generator = (0..n)
            .map(|r| {
                let mut row = Vec::with_capacity(2 * w + 1);
                for c in 0..w {
                    row.push(a.generator[r][c].plus(&b.generator[r][c]).scaled(0.5));
                }
                row.push(a.center[r].minus(&b.center[r]).scaled(0.5));
                for c in 0..w {
                    row.push(a.generator[r][c].minus(&b.generator[r][c]).scaled(0.5));
                }
                row
            })
            .collect();
        Ok(Self { center, generator })
    }

    /// Mirrors the numeric many-way hull: pad the list to a power of two
    /// with its last element, then reduce adjacent pairs.
    pub fn hull_many(list: &[Self]) -> Result<Self> {
        if list.is_empty() {
            return Err(Error::InvalidArgument("convex hull of an empty list".into()));
        }
        let mut level = list.to_vec();
        let target = level.len().next_power_of_two();
        while level.len() < target {
            level.push(level.last().unwrap().clone());
        }
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len() / 2);
            for pair in level.chunks_exact(2) {
                next.push(pair[0].hull_pair(&pair[1])?);
            }
            level = next;
        }
        Ok(level.pop().unwrap())
    }

    /// Appends a constant zonotope's generator columns (Minkowski sum with
    /// a zero-centered set).
    fn append_constant_columns(&mut self, z: &Zonotope) {
        for (r, row) in self.generator.iter_mut().enumerate() {
            for c in 0..z.num_generators() {
                row.push(LinExpr::constant(z.generator()[(r, c)]));
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Zonotope> {
        let n = self.dim();
        let p = self.width();
        let center = DVector::from_fn(n, |i, _| self.center[i].eval(x));
        let generator = DMatrix::from_fn(n, p, |r, c| self.generator[r][c].eval(x));
        Zonotope::new(center, generator)
    }
}

/// Numeric closed-loop images of a state/input pair under each vertex
/// model: ⟨A_i x̄ + B_i ū + d_i, A_i G − B_i θ⟩.
pub fn vertex_images(
    state: &Zonotope,
    input: &Zonotope,
    vertices: &[AffineVertexModel],
) -> Result<Vec<Zonotope>> {
    vertices
        .iter()
        .map(|v| {
            Zonotope::new(
                &v.a * state.center() + &v.b * input.center() + &v.d,
                &v.a * state.generator() - &v.b * input.generator(),
            )
        })
        .collect()
}

/// Closed-loop image of one vertex model: ⟨A x̄ + B ū + d, A G − B θ⟩.
/// State and input generators share the coefficient vector, so the input
/// width must match the state width.
pub fn affine_image(
    model: &AffineVertexModel,
    state: &ZonoExpr,
    input: &ZonoExpr,
) -> Result<ZonoExpr> {
    let n = model.state_dim();
    let m = model.input_dim();
    if state.dim() != n || input.dim() != m {
        return Err(Error::ShapeMismatch("image operand dimensions disagree".into()));
    }
    if state.width() != input.width() {
        return Err(Error::ShapeMismatch(format!(
            "state width {} and input width {} must agree for a coupled image",
            state.width(),
            input.width()
        )));
    }
    let p = state.width();
    let mut center = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = LinExpr::constant(model.d[i]);
        for j in 0..n {
            e.add_scaled(&state.center[j], model.a[(i, j)]);
        }
        for q in 0..m {
            e.add_scaled(&input.center[q], model.b[(i, q)]);
        }
        center.push(e.compacted());
    }
    let mut generator = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(p);
        for c in 0..p {
            let mut e = LinExpr::zero();
            for j in 0..n {
                e.add_scaled(&state.generator[j][c], model.a[(i, j)]);
            }
            for q in 0..m {
                e.add_scaled(&input.generator[q][c], -model.b[(i, q)]);
            }
            row.push(e.compacted());
        }
        generator.push(row);
    }
    Ok(ZonoExpr { center, generator })
}

/// Symbolic matrix-zonotope product, mirroring the numeric column order:
/// (A⁰G, then per uncertainty i: A^i c followed by A^i G).
pub fn matrix_zonotope_image(mz: &MatrixZonotope, z: &ZonoExpr) -> Result<ZonoExpr> {
    if mz.ncols() != z.dim() {
        return Err(Error::ShapeMismatch(format!(
            "matrix zonotope has {} columns but operand dimension is {}",
            mz.ncols(),
            z.dim()
        )));
    }
    let n = mz.nrows();
    let p = z.width();
    let apply_vec = |mat: &DMatrix<f64>, v: &[LinExpr]| -> Vec<LinExpr> {
        (0..n)
            .map(|i| {
                let mut e = LinExpr::zero();
                for (j, vj) in v.iter().enumerate() {
                    e.add_scaled(vj, mat[(i, j)]);
                }
                e.compacted()
            })
            .collect()
    };
    let apply_col = |mat: &DMatrix<f64>, c: usize| -> Vec<LinExpr> {
        (0..n)
            .map(|i| {
                let mut e = LinExpr::zero();
                for j in 0..z.dim() {
                    e.add_scaled(&z.generator[j][c], mat[(i, j)]);
                }
                e.compacted()
            })
            .collect()
    };
    let center = apply_vec(mz.center_matrix(), &z.center);
    let mut cols: Vec<Vec<LinExpr>> = Vec::new();
    for c in 0..p {
        cols.push(apply_col(mz.center_matrix(), c));
    }
    for gi in mz.generator_matrices() {
        cols.push(apply_vec(gi, &z.center));
        for c in 0..p {
            cols.push(apply_col(gi, c));
        }
    }
    let generator = (0..n)
        .map(|r| cols.iter().map(|col| col[r].clone()).collect())
        .collect();
    Ok(ZonoExpr { center, generator })
}

/// Per-step reduction request.
#[derive(Debug, Clone, Copy)]
pub struct ReductionSpec {
    pub columns: usize,
    pub weight: f64,
}

/// Output of a propagation fragment: expressions for the next state set
/// and the reduction slacks introduced along the way.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub next: ZonoExpr,
    pub slacks: Vec<VarId>,
}

/// Nonnegative diagonal radii of a square diagonal generator, if any.
fn diagonal_radii(z: &Zonotope) -> Option<DVector<f64>> {
    let n = z.dim();
    if z.num_generators() != n {
        return None;
    }
    let g = z.generator();
    for r in 0..n {
        for c in 0..n {
            if r != c && g[(r, c)] != 0.0 {
                return None;
            }
        }
        if g[(r, r)] < 0.0 {
            return None;
        }
    }
    Some(DVector::from_fn(n, |i, _| g[(i, i)]))
}

/// Reduces an intermediate hull and adds the disturbance. With a
/// reduction in place and a diagonal disturbance, the diagonal radii fold
/// into the reduction's leading diagonal block (no width growth);
/// otherwise the disturbance columns are appended.
fn finish_propagation(
    program: &mut ConvexProgram,
    hull: &ZonoExpr,
    disturbance: &Zonotope,
    reduction: Option<ReductionSpec>,
    step: usize,
) -> Result<Propagated> {
    let (mut next, slacks) = match reduction {
        Some(spec) => {
            let padded = hull.clone().pad_columns(spec.columns);
            let frag = reazor_fragment(program, &padded.generator, spec.columns, step, spec.weight)?;
            (
                ZonoExpr {
                    center: padded.center,
                    generator: frag.reduced,
                },
                frag.slacks,
            )
        }
        None => (hull.clone(), Vec::new()),
    };
    for i in 0..next.dim() {
        next.center[i].constant += disturbance.center()[i];
    }
    if disturbance.num_generators() > 0 {
        match (reduction.is_some(), diagonal_radii(disturbance)) {
            (true, Some(radii)) => {
                // Leading block is diag(a) with a >= 0: absorb the radii.
                for i in 0..next.dim() {
                    next.generator[i][i].constant += radii[i];
                }
            }
            _ => next.append_constant_columns(disturbance),
        }
    }
    if reduction.is_some() {
        // Constant inflation of the reduced diagonal. The step sets are
        // pinned to these expressions only to solver accuracy; the pad
        // keeps the delivered step-to-step containments strict when the
        // solver stops short of full feasibility. Entering the dynamics
        // like a slightly wider disturbance, it is compensated by the
        // synthesized feedback rather than amplified.
        for i in 0..next.dim() {
            next.generator[i][i].constant += PROPAGATION_PAD;
        }
    }
    Ok(Propagated { next, slacks })
}

/// Emits the robust propagation fragment for one step: per-vertex coupled
/// images, their hull, the reduction, and the disturbance sum. Returns
/// expressions for the next state set.
pub fn propagate_vertex_hull(
    program: &mut ConvexProgram,
    state: &ZonoExpr,
    input: &ZonoExpr,
    vertices: &[AffineVertexModel],
    disturbance: &Zonotope,
    reduction: Option<ReductionSpec>,
    step: usize,
) -> Result<Propagated> {
    let images: Vec<ZonoExpr> = vertices
        .iter()
        .map(|v| affine_image(v, state, input))
        .collect::<Result<_>>()?;
    let hull = ZonoExpr::hull_many(&images)?;
    finish_propagation(program, &hull, disturbance, reduction, step)
}

/// Propagation under factored matrix-zonotope dynamics: the input set
/// enters independently (no feedback coupling), so widths follow the
/// matrix-zonotope multiplication counting rule before reduction.
#[allow(clippy::too_many_arguments)]
pub fn propagate_matrix_zonotope(
    program: &mut ConvexProgram,
    state: &ZonoExpr,
    input: &ZonoExpr,
    mz_a: &MatrixZonotope,
    mz_b: &MatrixZonotope,
    d: &DVector<f64>,
    disturbance: &Zonotope,
    reduction: Option<ReductionSpec>,
    step: usize,
) -> Result<Propagated> {
    let a_part = matrix_zonotope_image(mz_a, state)?;
    let b_part = matrix_zonotope_image(mz_b, input)?;
    if a_part.dim() != b_part.dim() || d.len() != a_part.dim() {
        return Err(Error::ShapeMismatch("factored dynamics blocks disagree".into()));
    }
    let n = a_part.dim();
    let center = (0..n)
        .map(|i| {
            let mut e = a_part.center[i].plus(&b_part.center[i]);
            e.constant += d[i];
            e
        })
        .collect();
    let generator = (0..n)
        .map(|r| {
            let mut row = a_part.generator[r].clone();
            row.extend(b_part.generator[r].iter().cloned());
            row
        })
        .collect();
    let hull = ZonoExpr { center, generator };
    finish_propagation(program, &hull, disturbance, reduction, step)
}

/// Sufficient containment of a symbolic zonotope in a constant one,
/// encoded with multipliers: Y Γ = X, Y β = y − x̄, and per-row
/// Σ_c |Γ_{r,c}| + |β_r| ≤ 1 (+ relax). The relax expression, when given,
/// loosens only the row bound (the equalities stay solvable whenever the
/// outer generator spans the state space).
pub fn contain_fragment(
    program: &mut ConvexProgram,
    inner: &ZonoExpr,
    outer: &Zonotope,
    relax: Option<&LinExpr>,
) -> Result<()> {
    let n = outer.dim();
    if inner.dim() != n {
        return Err(Error::ShapeMismatch(
            "containment operands must share dimension".into(),
        ));
    }
    let px = inner.width();
    let py = outer.num_generators();
    let y = outer.generator();
    // gamma[q][c] scales outer column q toward inner column c.
    let gamma: Vec<Vec<VarId>> = (0..py)
        .map(|_| program.add_vars(px, |_| VarTag::Multiplier))
        .collect();
    let beta = program.add_vars(py, |_| VarTag::Multiplier);
    for r in 0..n {
        for c in 0..px {
            let mut e = inner.generator[r][c].scaled(-1.0);
            for (q, row) in gamma.iter().enumerate() {
                e.push(row[c], y[(r, q)]);
            }
            program.eq(e.compacted());
        }
        let mut e = inner.center[r].plus(&LinExpr::constant(-outer.center()[r]));
        for (q, &b) in beta.iter().enumerate() {
            e.push(b, y[(r, q)]);
        }
        program.eq(e.compacted());
    }
    for q in 0..py {
        let mut row = LinExpr::constant(-1.0);
        for c in 0..px {
            let t = program.add_abs_epigraph(&LinExpr::var(gamma[q][c]));
            row.push(t, 1.0);
        }
        let s = program.add_abs_epigraph(&LinExpr::var(beta[q]));
        row.push(s, 1.0);
        if let Some(r) = relax {
            row.add_scaled(r, -1.0);
        }
        program.le(row);
    }
    Ok(())
}

/// Adds the tracking + generator + (fragment-supplied) reduction cost:
/// quadratic penalties on center deviations from the references and on
/// generator columns.
pub fn build_cost(
    program: &mut ConvexProgram,
    scenario: &Scenario,
    states: &[ZonoExpr],
    inputs: &[ZonoExpr],
) -> Result<()> {
    let check = |m: &DMatrix<f64>, what: &str| -> Result<()> {
        if m.clone().symmetric_eigenvalues().min() < -1e-9 {
            return Err(Error::InvalidArgument(format!("{what} weight is indefinite")));
        }
        Ok(())
    };
    check(&scenario.center_state_weight, "center state")?;
    check(&scenario.center_input_weight, "center input")?;
    check(&scenario.generator_state_weight, "generator state")?;
    check(&scenario.generator_input_weight, "generator input")?;

    let add_center = |program: &mut ConvexProgram,
                      exprs: &[LinExpr],
                      reference: &DVector<f64>,
                      q: &DMatrix<f64>|
     -> Result<()> {
        let shifted: Vec<LinExpr> = exprs
            .iter()
            .enumerate()
            .map(|(i, e)| e.plus(&LinExpr::constant(-reference[i])))
            .collect();
        program.add_quadratic_form(&shifted, q)
    };
    let add_columns =
        |program: &mut ConvexProgram, z: &ZonoExpr, q: &DMatrix<f64>| -> Result<()> {
            for c in 0..z.width() {
                let col: Vec<LinExpr> =
                    (0..z.dim()).map(|r| z.generator[r][c].clone()).collect();
                program.add_quadratic_form(&col, q)?;
            }
            Ok(())
        };
    for (k, z) in states.iter().enumerate() {
        add_center(program, &z.center, &scenario.nominal_states[k], &scenario.center_state_weight)?;
        add_columns(program, z, &scenario.generator_state_weight)?;
    }
    for (k, z) in inputs.iter().enumerate() {
        add_center(program, &z.center, &scenario.nominal_inputs[k], &scenario.center_input_weight)?;
        add_columns(program, z, &scenario.generator_input_weight)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthStatus {
    Optimal,
    /// Budget ran out; the returned tube is the best incumbent.
    BudgetExceeded,
}

/// Synthesized tube: state and input zonotopes per step, reduction
/// slacks, and (for hybrid problems) the mode schedule.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    /// ⟨x̄_k, G_k⟩ for k = 0..=N.
    pub states: Vec<Zonotope>,
    /// ⟨ū_k, θ_k⟩ for k = 0..N.
    pub inputs: Vec<Zonotope>,
    /// Reduction slacks a_k per step (empty vectors without reduction).
    pub slacks: Vec<DVector<f64>>,
    /// Mode index per step k = 0..N (hybrid problems only).
    pub schedule: Option<Vec<usize>>,
    pub status: SynthStatus,
    pub objective: f64,
    pub nodes_explored: usize,
}

struct BlockIds {
    center: Vec<VarId>,
    generator: Vec<Vec<VarId>>,
}

impl BlockIds {
    fn expr(&self) -> ZonoExpr {
        ZonoExpr {
            center: self.center.iter().map(|&v| LinExpr::var(v)).collect(),
            generator: self
                .generator
                .iter()
                .map(|row| row.iter().map(|&v| LinExpr::var(v)).collect())
                .collect(),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<Zonotope> {
        let n = self.center.len();
        let p = self.generator.first().map_or(0, |r| r.len());
        Zonotope::new(
            DVector::from_fn(n, |i, _| x[self.center[i].0]),
            DMatrix::from_fn(n, p, |r, c| x[self.generator[r][c].0]),
        )
    }
}

enum ScheduleSlot {
    Fixed(usize),
    Choice(Vec<VarId>),
}

struct OcpLayout {
    states: Vec<BlockIds>,
    inputs: Vec<BlockIds>,
    slack_ids: Vec<Vec<VarId>>,
    schedule: Option<Vec<ScheduleSlot>>,
}

/// A built program plus the bookkeeping needed to read a solution back.
pub struct BuiltOcp {
    pub program: ConvexProgram,
    layout: OcpLayout,
}

/// Support margin reserved on the fixed containment sets (inputs, regions,
/// state bounds, goal). The optimizer presses containments to activity and
/// satisfies them only to solver termination accuracy, so each set is
/// eroded by this much before encoding; the audit then checks the
/// delivered tube against the full-size sets with that headroom intact.
const CONTAINMENT_MARGIN: f64 = 1e-4;

/// Constant inflation of the reduced diagonal per step; see
/// [`finish_propagation`].
const PROPAGATION_PAD: f64 = 5e-6;

/// Shrinks a containment set toward its center: axis-aligned boxes shed
/// the margin from every face, other shapes fall back to a uniform
/// relative contraction.
fn tightened(outer: &Zonotope, margin: f64) -> Result<Zonotope> {
    if let Some(radii) = diagonal_radii(outer) {
        if radii.min() <= margin {
            return Err(Error::InvalidArgument(format!(
                "containment set face {:.3e} cannot reserve margin {margin:.3e}",
                radii.min()
            )));
        }
        let n = outer.dim();
        return Zonotope::new(
            outer.center().clone(),
            DMatrix::from_fn(n, n, |r, c| if r == c { radii[r] - margin } else { 0.0 }),
        );
    }
    Zonotope::new(outer.center().clone(), outer.generator() * (1.0 - margin))
}

/// Big-M fallback: 10³ times the largest generator magnitude among the
/// scenario sets.
fn default_big_m(scenario: &Scenario) -> f64 {
    let mut mag: f64 = 1.0;
    let mut scan = |z: &Zonotope| {
        if z.num_generators() > 0 {
            mag = mag.max(z.generator().amax());
        }
    };
    scan(&scenario.initial_set);
    scan(&scenario.goal_set);
    for z in &scenario.input_bounds {
        scan(z);
    }
    if let Some(bounds) = &scenario.state_bounds {
        for z in bounds {
            scan(z);
        }
    }
    1e3 * mag
}

fn make_block(
    program: &mut ConvexProgram,
    n: usize,
    width: usize,
    center_tag: impl Fn(usize) -> VarTag,
    gen_tag: impl Fn(usize, usize) -> VarTag,
) -> BlockIds {
    let center = (0..n).map(|i| program.add_var(center_tag(i))).collect();
    let generator = (0..n)
        .map(|r| (0..width).map(|c| program.add_var(gen_tag(r, c))).collect())
        .collect();
    BlockIds { center, generator }
}

fn pin_block(program: &mut ConvexProgram, block: &BlockIds, z: &Zonotope) {
    for (i, &v) in block.center.iter().enumerate() {
        program.eq(LinExpr::term(v, 1.0).plus(&LinExpr::constant(-z.center()[i])));
    }
    for (r, row) in block.generator.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            program.eq(LinExpr::term(v, 1.0).plus(&LinExpr::constant(-z.generator()[(r, c)])));
        }
    }
}

fn pin_to_exprs(program: &mut ConvexProgram, block: &BlockIds, exprs: &ZonoExpr) {
    for (i, &v) in block.center.iter().enumerate() {
        program.eq(LinExpr::term(v, 1.0).minus(&exprs.center[i]).compacted());
    }
    for (r, row) in block.generator.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            program.eq(LinExpr::term(v, 1.0).minus(&exprs.generator[r][c]).compacted());
        }
    }
}

/// Single-mode robust tube program: propagation, terminal/input (and
/// optional per-step state) containments, initial set pinned exactly.
pub fn build_ocp(system: &UncertainAffineSystem, scenario: &Scenario) -> Result<BuiltOcp> {
    build_core(&[system], None, scenario, None, None)
}

/// Hybrid robust tube program. With `schedule` (mode of each step
/// k = 1..N−1) the program is purely convex; without it, mode binaries
/// with big-M coupling select the active region per step. The step-0 mode
/// is fixed by the region containing the initial set.
pub fn build_hybrid_ocp(
    system: &HybridUncertainSystem,
    scenario: &Scenario,
    big_m: Option<f64>,
    schedule: Option<&[usize]>,
) -> Result<BuiltOcp> {
    let modes: Vec<&UncertainAffineSystem> = system.modes().iter().collect();
    build_core(&modes, Some(system.regions()), scenario, big_m, schedule)
}

fn build_core(
    modes: &[&UncertainAffineSystem],
    regions: Option<&[Zonotope]>,
    scenario: &Scenario,
    big_m: Option<f64>,
    schedule: Option<&[usize]>,
) -> Result<BuiltOcp> {
    let n = modes[0].state_dim();
    let m = modes[0].input_dim();
    let big_n = modes[0].horizon();
    scenario.validate(n, m)?;
    if scenario.horizon() != big_n {
        return Err(Error::ShapeMismatch(format!(
            "scenario horizon {} disagrees with system horizon {}",
            scenario.horizon(),
            big_n
        )));
    }
    let reduction = match scenario.reduction_columns {
        Some(p) if p < n => {
            return Err(Error::InvalidArgument(format!(
                "reduction target {p} below state dimension {n}"
            )));
        }
        Some(p) => Some(ReductionSpec {
            columns: p,
            weight: scenario.reduction_weight,
        }),
        None => None,
    };

    // Step-0 mode: the region that contains the initial set.
    let initial_mode = match regions {
        Some(list) => list
            .iter()
            .position(|r| matches!(r.contains(&scenario.initial_set), Ok(Some(_))))
            .ok_or_else(|| {
                Error::Infeasible("initial set is not contained in any region".into())
            })?,
        None => 0,
    };
    let full_schedule: Option<Vec<usize>> = if modes.len() == 1 {
        Some(vec![0; big_n])
    } else if let Some(s) = schedule {
        if s.len() + 1 != big_n {
            return Err(Error::ShapeMismatch(format!(
                "schedule length {} does not cover steps 1..{}",
                s.len(),
                big_n - 1
            )));
        }
        if let Some(&j) = s.iter().find(|&&j| j >= modes.len()) {
            return Err(Error::InvalidArgument(format!("schedule names mode {j}")));
        }
        Some(std::iter::once(initial_mode).chain(s.iter().copied()).collect())
    } else {
        None
    };
    let m_value = big_m.unwrap_or_else(|| default_big_m(scenario));
    if m_value <= 0.0 {
        return Err(Error::InvalidArgument("big-M must be positive".into()));
    }

    let mut program = ConvexProgram::new();
    let mut states: Vec<BlockIds> = Vec::with_capacity(big_n + 1);
    let mut inputs: Vec<BlockIds> = Vec::with_capacity(big_n);
    let mut slack_ids: Vec<Vec<VarId>> = Vec::with_capacity(big_n);
    let mut schedule_slots: Vec<ScheduleSlot> = Vec::with_capacity(big_n);

    let p0 = scenario.initial_set.num_generators();
    let x0 = make_block(
        &mut program,
        n,
        p0,
        |i| VarTag::StateCenter { k: 0, i },
        |row, col| VarTag::StateGen { k: 0, row, col },
    );
    pin_block(&mut program, &x0, &scenario.initial_set);
    states.push(x0);

    for k in 0..big_n {
        let state_expr = states[k].expr();
        let width_k = state_expr.width();
        let input_block = make_block(
            &mut program,
            m,
            width_k,
            |i| VarTag::InputCenter { k, i },
            |row, col| VarTag::InputGen { k, row, col },
        );
        let input_expr = input_block.expr();
        contain_fragment(
            &mut program,
            &input_expr,
            &tightened(&scenario.input_bounds[k], CONTAINMENT_MARGIN)?,
            None,
        )?;

        let active: Vec<usize> = match &full_schedule {
            Some(fs) => vec![fs[k]],
            None if k == 0 => vec![initial_mode],
            None => (0..modes.len()).collect(),
        };
        let mut hulls: Vec<ZonoExpr> = Vec::with_capacity(active.len());
        for &j in &active {
            let images: Vec<ZonoExpr> = modes[j]
                .vertices_at(k)
                .iter()
                .map(|v| affine_image(v, &state_expr, &input_expr))
                .collect::<Result<_>>()?;
            hulls.push(ZonoExpr::hull_many(&images)?);
        }
        let mut z_width = hulls.iter().map(|h| h.width()).max().unwrap_or(0);
        if let Some(spec) = reduction {
            z_width = z_width.max(spec.columns);
        }
        let hulls: Vec<ZonoExpr> = hulls.into_iter().map(|h| h.pad_columns(z_width)).collect();

        let intermediate = if active.len() > 1 {
            // Materialize the selected hull and couple it to each mode's
            // hull through big-M slacks; exactly one binary is active.
            let hull_block = make_block(
                &mut program,
                n,
                z_width,
                |i| VarTag::HullCenter { k, i },
                |row, col| VarTag::HullGen { k, row, col },
            );
            let hull_expr = hull_block.expr();
            let binaries: Vec<VarId> = (0..modes.len())
                .map(|j| program.add_binary(VarTag::ModeBinary { k, j }))
                .collect();
            program.add_sos1(binaries.clone());
            for (&j, mode_hull) in active.iter().zip(&hulls) {
                let mut mass = LinExpr::term(binaries[j], m_value);
                mass.constant = -m_value;
                for r in 0..n {
                    let t = program
                        .add_abs_epigraph(&hull_expr.center[r].minus(&mode_hull.center[r]));
                    mass.push(t, 1.0);
                    for c in 0..z_width {
                        let t = program.add_abs_epigraph(
                            &hull_expr.generator[r][c].minus(&mode_hull.generator[r][c]),
                        );
                        mass.push(t, 1.0);
                    }
                }
                program.le(mass);
                // Region membership, relaxed for unselected modes.
                let relax = LinExpr {
                    terms: vec![(binaries[j], -m_value)],
                    constant: m_value,
                };
                contain_fragment(
                    &mut program,
                    &state_expr,
                    &tightened(&regions.unwrap()[j], CONTAINMENT_MARGIN)?,
                    Some(&relax),
                )?;
            }
            schedule_slots.push(ScheduleSlot::Choice(binaries));
            hull_expr
        } else {
            let j = active[0];
            if let Some(region_list) = regions {
                if k > 0 {
                    contain_fragment(
                        &mut program,
                        &state_expr,
                        &tightened(&region_list[j], CONTAINMENT_MARGIN)?,
                        None,
                    )?;
                }
            }
            schedule_slots.push(ScheduleSlot::Fixed(j));
            hulls.into_iter().next().unwrap()
        };

        let propagated = finish_propagation(
            &mut program,
            &intermediate,
            modes[active[0]].disturbance_at(k),
            reduction,
            k,
        )?;
        slack_ids.push(propagated.slacks.clone());

        let next_block = make_block(
            &mut program,
            n,
            propagated.next.width(),
            |i| VarTag::StateCenter { k: k + 1, i },
            |row, col| VarTag::StateGen { k: k + 1, row, col },
        );
        pin_to_exprs(&mut program, &next_block, &propagated.next);
        states.push(next_block);
        inputs.push(input_block);
    }

    contain_fragment(
        &mut program,
        &states[big_n].expr(),
        &tightened(&scenario.goal_set, CONTAINMENT_MARGIN)?,
        None,
    )?;
    if regions.is_none() {
        if let Some(bounds) = &scenario.state_bounds {
            for (k, bound) in bounds.iter().enumerate() {
                contain_fragment(
                    &mut program,
                    &states[k].expr(),
                    &tightened(bound, CONTAINMENT_MARGIN)?,
                    None,
                )?;
            }
        }
    }

    let state_exprs: Vec<ZonoExpr> = states.iter().map(|b| b.expr()).collect();
    let input_exprs: Vec<ZonoExpr> = inputs.iter().map(|b| b.expr()).collect();
    build_cost(&mut program, scenario, &state_exprs, &input_exprs)?;

    Ok(BuiltOcp {
        program,
        layout: OcpLayout {
            states,
            inputs,
            slack_ids,
            schedule: regions.map(|_| schedule_slots),
        },
    })
}

/// Solves a built program. Infeasibility is an error; a budget overrun
/// with an incumbent is returned with the corresponding status.
pub fn solve<A: SolverAdapter>(
    built: &BuiltOcp,
    adapter: &A,
    config: &BnbConfig,
) -> Result<SynthesisResult> {
    let outcome = solve_mixed(&built.program, adapter, config)?;
    let status = match outcome.status {
        BnbStatus::Infeasible => {
            return Err(Error::Infeasible("no tube satisfies the constraints".into()));
        }
        BnbStatus::Optimal => SynthStatus::Optimal,
        BnbStatus::BudgetExceeded => SynthStatus::BudgetExceeded,
    };
    let x = outcome.x.ok_or_else(|| {
        Error::BudgetExceeded("search budget exhausted before any schedule was found".into())
    })?;
    let layout = &built.layout;
    let states = layout
        .states
        .iter()
        .map(|b| b.eval(&x))
        .collect::<Result<Vec<_>>>()?;
    let inputs = layout
        .inputs
        .iter()
        .map(|b| b.eval(&x))
        .collect::<Result<Vec<_>>>()?;
    let slacks = layout
        .slack_ids
        .iter()
        .map(|ids| DVector::from_fn(ids.len(), |i, _| x[ids[i].0]))
        .collect();
    let schedule = layout.schedule.as_ref().map(|slots| {
        slots
            .iter()
            .map(|slot| match slot {
                ScheduleSlot::Fixed(j) => *j,
                ScheduleSlot::Choice(vars) => vars
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| {
                        x[a.0].partial_cmp(&x[b.0]).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .map(|(j, _)| j)
                    .unwrap_or(0),
            })
            .collect()
    });
    Ok(SynthesisResult {
        states,
        inputs,
        slacks,
        schedule,
        status,
        objective: outcome.objective,
        nodes_explored: outcome.nodes_explored,
    })
}

/// One audited containment or bound.
#[derive(Debug, Clone)]
pub struct AuditCheck {
    pub label: String,
    pub violation: f64,
}

/// Independent re-verification of a synthesis result.
#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn max_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.violation).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&AuditCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.violation.partial_cmp(&b.violation).unwrap())
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Generalized cross product: the vector orthogonal to the n−1 columns of
/// `m` (n×(n−1)), by cofactor expansion.
fn orthogonal_complement(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    DVector::from_fn(n, |i, _| {
        let minor = DMatrix::from_fn(n - 1, n - 1, |r, c| m[(if r < i { r } else { r + 1 }, c)]);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Outward facet normals of a full-dimensional zonotope: one direction per
/// (n−1)-subset of generator columns (both signs are evaluated by the
/// caller).
fn facet_normals(z: &Zonotope) -> Vec<DVector<f64>> {
    let n = z.dim();
    if n == 1 {
        return vec![DVector::from_element(1, 1.0)];
    }
    let mut normals = Vec::new();
    for combo in (0..z.num_generators()).combinations(n - 1) {
        let m = DMatrix::from_fn(n, n - 1, |r, c| z.generator()[(r, combo[c])]);
        let v = orthogonal_complement(&m);
        let norm = v.norm();
        if norm > 1e-12 {
            normals.push(v / norm);
        }
    }
    normals
}

/// Worst support-function gap of `inner` over `outer`'s facet normals:
/// zero iff contained (for full-dimensional outer sets), otherwise the
/// largest halfspace violation. Falls back to the sufficient containment
/// program plus sampled directions when the outer set is degenerate.
pub fn support_gap(inner: &Zonotope, outer: &Zonotope) -> Result<f64> {
    if inner.dim() != outer.dim() {
        return Err(Error::ShapeMismatch(
            "support gap operands must share dimension".into(),
        ));
    }
    let n = outer.dim();
    let full_rank =
        n == 1 || (outer.num_generators() >= n && outer.generator().rank(1e-12) == n);
    if full_rank {
        let mut gap: f64 = 0.0;
        for d in facet_normals(outer) {
            gap = gap.max(inner.support(&d) - outer.support(&d));
            let neg = -&d;
            gap = gap.max(inner.support(&neg) - outer.support(&neg));
        }
        return Ok(gap.max(0.0));
    }
    // Degenerate outer set: certify with the containment program when
    // possible, otherwise report the largest sampled-direction gap.
    if inner.num_generators() == 0 && outer.num_generators() == 0 {
        return Ok((inner.center() - outer.center()).amax());
    }
    if outer.contains(inner)?.is_some() {
        return Ok(0.0);
    }
    let mut gap: f64 = 0.0;
    for i in 0..n {
        let mut d = DVector::zeros(n);
        d[i] = 1.0;
        gap = gap.max(inner.support(&d) - outer.support(&d));
        d[i] = -1.0;
        gap = gap.max(inner.support(&d) - outer.support(&d));
    }
    Ok(gap.max(0.0))
}

/// Replaces the reported reduction slacks with the exact boxed row sums
/// recomputed from the delivered tube and inputs.
///
/// The optimizer satisfies the slack equalities only to solver precision,
/// so the returned numbers can sit a hair below the row sums they are
/// supposed to bound. The slacks are pure bookkeeping derived from the
/// tube; recomputing them keeps the report exact while the geometric
/// containments of the tube itself are still checked independently by the
/// audit. Rewriting the tube the same way would be wrong: corrections
/// injected into one step's set get amplified by the one-step gain of
/// stiff dynamics at the next, with no feedback left to cancel them.
pub fn recompute_slacks(
    result: &mut SynthesisResult,
    system: &UncertainAffineSystem,
    scenario: &Scenario,
) -> Result<()> {
    let steps: Vec<&[AffineVertexModel]> = (0..system.horizon())
        .map(|k| system.vertices_at(k))
        .collect();
    recompute_slacks_core(result, &steps, scenario)
}

/// Hybrid variant of [`recompute_slacks`]: vertices follow the result's
/// mode schedule.
pub fn recompute_slacks_hybrid(
    result: &mut SynthesisResult,
    system: &HybridUncertainSystem,
    scenario: &Scenario,
) -> Result<()> {
    let schedule = result
        .schedule
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("result carries no mode schedule".into()))?;
    if schedule.len() != system.horizon() {
        return Err(Error::ShapeMismatch(format!(
            "schedule length {} for horizon {}",
            schedule.len(),
            system.horizon()
        )));
    }
    let steps: Vec<&[AffineVertexModel]> = schedule
        .iter()
        .enumerate()
        .map(|(k, &j)| system.modes()[j].vertices_at(k))
        .collect();
    recompute_slacks_core(result, &steps, scenario)
}

fn recompute_slacks_core(
    result: &mut SynthesisResult,
    steps: &[&[AffineVertexModel]],
    scenario: &Scenario,
) -> Result<()> {
    let Some(p) = scenario.reduction_columns else {
        return Ok(());
    };
    if result.states.is_empty() {
        return Ok(());
    }
    let big_n = steps.len();
    if result.states.len() != big_n + 1 || result.inputs.len() != big_n {
        return Err(Error::ShapeMismatch(format!(
            "result has {} states / {} inputs for horizon {}",
            result.states.len(),
            result.inputs.len(),
            big_n
        )));
    }
    for k in 0..big_n {
        if result.slacks[k].is_empty() {
            continue;
        }
        let images = vertex_images(&result.states[k], &result.inputs[k], steps[k])?;
        let hull = convex_hull_many(&images)?;
        let padded = hull.pad_columns(hull.num_generators().max(p))?;
        let n = padded.dim();
        if p < n {
            return Err(Error::InvalidArgument(format!(
                "reduction target {p} below state dimension {n}"
            )));
        }
        result.slacks[k] = DVector::from_fn(n, |i, _| {
            (p - n..padded.num_generators())
                .map(|c| padded.generator()[(i, c)].abs())
                .sum::<f64>()
        });
    }
    Ok(())
}

/// Re-checks a single-mode result with independent support-function
/// arithmetic (no reuse of the program's multipliers).
pub fn audit(
    result: &SynthesisResult,
    system: &UncertainAffineSystem,
    scenario: &Scenario,
) -> Result<AuditReport> {
    let steps: Vec<&[AffineVertexModel]> = (0..system.horizon())
        .map(|k| system.vertices_at(k))
        .collect();
    let dists: Vec<&Zonotope> = (0..system.horizon())
        .map(|k| system.disturbance_at(k))
        .collect();
    audit_core(result, &steps, &dists, scenario, None)
}

/// Hybrid variant: vertices follow the result's mode schedule and every
/// step's set is checked against its scheduled region.
pub fn audit_hybrid(
    result: &SynthesisResult,
    system: &HybridUncertainSystem,
    scenario: &Scenario,
) -> Result<AuditReport> {
    let schedule = result
        .schedule
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("result carries no mode schedule".into()))?;
    if schedule.len() != system.horizon() {
        return Err(Error::ShapeMismatch(format!(
            "schedule length {} for horizon {}",
            schedule.len(),
            system.horizon()
        )));
    }
    let steps: Vec<&[AffineVertexModel]> = schedule
        .iter()
        .enumerate()
        .map(|(k, &j)| system.modes()[j].vertices_at(k))
        .collect();
    let dists: Vec<&Zonotope> = (0..system.horizon())
        .map(|k| system.modes()[0].disturbance_at(k))
        .collect();
    audit_core(
        result,
        &steps,
        &dists,
        scenario,
        Some((system.regions(), schedule)),
    )
}

fn audit_core(
    result: &SynthesisResult,
    steps: &[&[AffineVertexModel]],
    disturbance: &[&Zonotope],
    scenario: &Scenario,
    regions: Option<(&[Zonotope], &[usize])>,
) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    if result.states.is_empty() {
        return Ok(report);
    }
    let big_n = steps.len();
    if result.states.len() != big_n + 1 || result.inputs.len() != big_n {
        return Err(Error::ShapeMismatch(format!(
            "result has {} states / {} inputs for horizon {}",
            result.states.len(),
            result.inputs.len(),
            big_n
        )));
    }
    for k in 0..big_n {
        let state = &result.states[k];
        let input = &result.inputs[k];
        let images = vertex_images(state, input, steps[k])?;
        for (i, image) in images.iter().enumerate() {
            let widened = image.minkowski(disturbance[k])?;
            report.checks.push(AuditCheck {
                label: format!("step {k} vertex {i} propagation"),
                violation: support_gap(&widened, &result.states[k + 1])?,
            });
        }
        report.checks.push(AuditCheck {
            label: format!("step {k} input bound"),
            violation: support_gap(input, &scenario.input_bounds[k])?,
        });
        // Reduction row bounds: slacks must cover the boxed row sums of
        // the recomputed hull.
        if let (Some(p), true) = (scenario.reduction_columns, !result.slacks[k].is_empty()) {
            let hull = convex_hull_many(&images)?;
            let padded = hull.pad_columns(hull.num_generators().max(p))?;
            let n = padded.dim();
            for i in 0..n {
                let row_sum: f64 = (p - n..padded.num_generators())
                    .map(|c| padded.generator()[(i, c)].abs())
                    .sum();
                report.checks.push(AuditCheck {
                    label: format!("step {k} reduction row {i}"),
                    violation: (row_sum - result.slacks[k][i]).max(0.0),
                });
            }
        }
    }
    report.checks.push(AuditCheck {
        label: "terminal set".into(),
        violation: support_gap(&result.states[big_n], &scenario.goal_set)?,
    });
    if regions.is_none() {
        if let Some(bounds) = &scenario.state_bounds {
            for (k, bound) in bounds.iter().enumerate() {
                report.checks.push(AuditCheck {
                    label: format!("step {k} state bound"),
                    violation: support_gap(&result.states[k], bound)?,
                });
            }
        }
    }
    if let Some((region_list, schedule)) = regions {
        for (k, &j) in schedule.iter().enumerate() {
            report.checks.push(AuditCheck {
                label: format!("step {k} region {j}"),
                violation: support_gap(&result.states[k], &region_list[j])?,
            });
        }
    }
    Ok(report)
}
