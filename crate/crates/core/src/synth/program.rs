//! Solver-agnostic description of a convex (or mixed-integer convex)
//! program: tagged variables, linear equalities/inequalities, a convex
//! quadratic cost, and binary variables grouped into SOS1 sets for
//! branching.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Index of a decision variable within a [`ConvexProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Role of a variable, kept for diagnostics and result extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarTag {
    /// Entry i of a state-zonotope center at step k.
    StateCenter { k: usize, i: usize },
    /// Entry (row, col) of a state generator at step k.
    StateGen { k: usize, row: usize, col: usize },
    /// Entry i of an input-zonotope center at step k.
    InputCenter { k: usize, i: usize },
    /// Entry (row, col) of an input generator at step k.
    InputGen { k: usize, row: usize, col: usize },
    /// Entry of the intermediate hull zonotope at step k.
    HullCenter { k: usize, i: usize },
    HullGen { k: usize, row: usize, col: usize },
    /// Order-reduction slack a_{k,i}.
    ReductionSlack { k: usize, i: usize },
    /// Containment multiplier (Γ or β entry).
    Multiplier,
    /// Epigraph slack for an absolute value.
    Epigraph,
    /// Mode-selection binary c_{k,j}.
    ModeBinary { k: usize, j: usize },
    /// Anything else.
    Aux,
}

/// Sparse affine expression `Σ aᵢ xᵢ + c`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(id: VarId) -> Self {
        Self {
            terms: vec![(id, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(id: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(id, coeff)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, id: VarId, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((id, coeff));
        }
    }

    /// self += scale · other
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        for &(id, c) in &other.terms {
            self.push(id, scale * c);
        }
    }

    pub fn plus(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn minus(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::constant(self.constant * scale);
        for &(id, c) in &self.terms {
            out.push(id, c * scale);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(id, c)| acc + c * x[id.0])
    }

    /// Merges duplicate variable references (used before dense expansion).
    pub fn compacted(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(id, _)| id);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (id, c) in terms {
            match merged.last_mut() {
                Some((last_id, last_c)) if *last_id == id => *last_c += c,
                _ => merged.push((id, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LinExpr {
            terms: merged,
            constant: self.constant,
        }
    }
}

/// A linear constraint in normalized form: `expr == 0` or `expr ≤ 0`.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    tags: Vec<VarTag>,
    eqs: Vec<LinExpr>,
    ineqs: Vec<LinExpr>,
    /// Quadratic cost terms c·xᵢxⱼ stored with i ≤ j.
    quad_cost: Vec<(usize, usize, f64)>,
    lin_cost: Vec<f64>,
    cost_constant: f64,
    binaries: Vec<VarId>,
    sos1_groups: Vec<Vec<VarId>>,
}

impl Default for ConvexProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self {
            tags: Vec::new(),
            eqs: Vec::new(),
            ineqs: Vec::new(),
            quad_cost: Vec::new(),
            lin_cost: Vec::new(),
            cost_constant: 0.0,
            binaries: Vec::new(),
            sos1_groups: Vec::new(),
        }
    }

    pub fn add_var(&mut self, tag: VarTag) -> VarId {
        self.tags.push(tag);
        self.lin_cost.push(0.0);
        VarId(self.tags.len() - 1)
    }

    pub fn add_vars<F: Fn(usize) -> VarTag>(&mut self, count: usize, tag: F) -> Vec<VarId> {
        (0..count).map(|i| self.add_var(tag(i))).collect()
    }

    /// Declares a binary variable; its continuous relaxation is boxed to
    /// [0, 1] immediately so every relaxation stays bounded.
    pub fn add_binary(&mut self, tag: VarTag) -> VarId {
        let id = self.add_var(tag);
        let mut upper = LinExpr::var(id);
        upper.constant = -1.0;
        self.le(upper); // v − 1 ≤ 0
        self.le(LinExpr::term(id, -1.0)); // −v ≤ 0
        self.binaries.push(id);
        id
    }

    /// Registers an SOS1 group: adds `Σ vⱼ = 1` and records the group for
    /// branching.
    pub fn add_sos1(&mut self, group: Vec<VarId>) {
        let mut sum = LinExpr::constant(-1.0);
        for &id in &group {
            sum.push(id, 1.0);
        }
        self.eq(sum);
        self.sos1_groups.push(group);
    }

    /// Adds the constraint `expr == 0`.
    pub fn eq(&mut self, expr: LinExpr) {
        self.eqs.push(expr);
    }

    /// Adds the constraint `expr ≤ 0`.
    pub fn le(&mut self, expr: LinExpr) {
        self.ineqs.push(expr);
    }

    /// Adds `c · xᵢ xⱼ` to the cost.
    pub fn add_quad_cost(&mut self, i: VarId, j: VarId, c: f64) {
        if c != 0.0 {
            let (a, b) = if i.0 <= j.0 { (i.0, j.0) } else { (j.0, i.0) };
            self.quad_cost.push((a, b, c));
        }
    }

    pub fn add_lin_cost(&mut self, id: VarId, c: f64) {
        self.lin_cost[id.0] += c;
    }

    pub fn add_cost_constant(&mut self, c: f64) {
        self.cost_constant += c;
    }

    /// Adds the quadratic form `exprᵀ Q expr` to the cost, expanding the
    /// affine expressions into variable products.
    pub fn add_quadratic_form(&mut self, exprs: &[LinExpr], q: &DMatrix<f64>) -> Result<()> {
        if q.nrows() != exprs.len() || q.ncols() != exprs.len() {
            return Err(Error::ShapeMismatch(format!(
                "quadratic form: {} expressions vs {}x{} weight",
                exprs.len(),
                q.nrows(),
                q.ncols()
            )));
        }
        let compact: Vec<LinExpr> = exprs.iter().map(|e| e.compacted()).collect();
        for (i, ei) in compact.iter().enumerate() {
            for (j, ej) in compact.iter().enumerate() {
                let w = q[(i, j)];
                if w == 0.0 {
                    continue;
                }
                for &(vi, ci) in &ei.terms {
                    for &(vj, cj) in &ej.terms {
                        self.add_quad_cost(vi, vj, w * ci * cj);
                    }
                }
                for &(vi, ci) in &ei.terms {
                    self.add_lin_cost(vi, w * ci * ej.constant);
                }
                for &(vj, cj) in &ej.terms {
                    self.add_lin_cost(vj, w * ei.constant * cj);
                }
                self.cost_constant += w * ei.constant * ej.constant;
            }
        }
        Ok(())
    }

    /// Introduces `t ≥ |expr|` via two inequalities; returns t.
    pub fn add_abs_epigraph(&mut self, expr: &LinExpr) -> VarId {
        let t = self.add_var(VarTag::Epigraph);
        let mut up = expr.clone();
        up.push(t, -1.0);
        self.le(up); // expr − t ≤ 0
        let mut lo = expr.scaled(-1.0);
        lo.push(t, -1.0);
        self.le(lo); // −expr − t ≤ 0
        t
    }

    pub fn num_vars(&self) -> usize {
        self.tags.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.eqs.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineqs.len()
    }

    pub fn tag(&self, id: VarId) -> &VarTag {
        &self.tags[id.0]
    }

    pub fn equalities(&self) -> &[LinExpr] {
        &self.eqs
    }

    pub fn inequalities(&self) -> &[LinExpr] {
        &self.ineqs
    }

    pub fn quad_cost_terms(&self) -> &[(usize, usize, f64)] {
        &self.quad_cost
    }

    pub fn lin_cost(&self) -> &[f64] {
        &self.lin_cost
    }

    pub fn binaries(&self) -> &[VarId] {
        &self.binaries
    }

    pub fn sos1_groups(&self) -> &[Vec<VarId>] {
        &self.sos1_groups
    }

    pub fn is_mixed_integer(&self) -> bool {
        !self.binaries.is_empty()
    }

    /// Full objective value at `x`, including the constant term.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut obj = self.cost_constant;
        for (i, &c) in self.lin_cost.iter().enumerate() {
            obj += c * x[i];
        }
        for &(i, j, c) in &self.quad_cost {
            obj += c * x[i] * x[j];
        }
        obj
    }

    /// Maximum constraint violation at `x` (equalities by absolute value,
    /// inequalities by positive part).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for e in &self.eqs {
            worst = worst.max(e.eval(x).abs());
        }
        for e in &self.ineqs {
            worst = worst.max(e.eval(x).max(0.0));
        }
        worst
    }
}

/// What a backend can handle.
#[derive(Debug, Clone, Copy)]
pub struct SolverCapabilities {
    pub quadratic_cost: bool,
    pub second_order_cone: bool,
    pub binaries: bool,
}

/// Outcome of one continuous relaxation solve.
#[derive(Debug, Clone)]
pub enum Relaxation {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
}

/// Backend contract: solve the continuous relaxation of a program with a
/// set of variables pinned to fixed values. A returned `Optimal` point
/// satisfies all constraints to the backend's reported tolerance.
pub trait SolverAdapter {
    fn capabilities(&self) -> SolverCapabilities;
    fn solve(&self, program: &ConvexProgram, fixings: &[(VarId, f64)]) -> Result<Relaxation>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lin_expr_eval_and_compact() {
        let mut e = LinExpr::constant(1.5);
        e.push(VarId(0), 2.0);
        e.push(VarId(1), -1.0);
        e.push(VarId(0), 3.0);
        let x = [2.0, 4.0];
        assert_eq!(e.eval(&x), 1.5 + 5.0 * 2.0 - 4.0);
        let c = e.compacted();
        assert_eq!(c.terms, vec![(VarId(0), 5.0), (VarId(1), -1.0)]);
    }

    #[test]
    fn quadratic_form_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut prog = ConvexProgram::new();
        let vars = prog.add_vars(3, |_| VarTag::Aux);
        let mut exprs = Vec::new();
        for _ in 0..2 {
            let mut e = LinExpr::constant(rng.random_range(-1.0..=1.0));
            for &v in &vars {
                e.push(v, rng.random_range(-1.0..=1.0));
            }
            exprs.push(e);
        }
        let q_half = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-1.0..=1.0));
        let q = &q_half * q_half.transpose();
        prog.add_quadratic_form(&exprs, &q).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let direct: f64 = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| q[(i, j)] * exprs[i].eval(&x) * exprs[j].eval(&x))
                    .sum::<f64>()
            })
            .sum();
        assert!((prog.objective_value(&x) - direct).abs() < 1e-12);
    }

    #[test]
    fn violation_measures_both_constraint_kinds() {
        let mut prog = ConvexProgram::new();
        let v = prog.add_var(VarTag::Aux);
        let mut eq = LinExpr::var(v);
        eq.constant = -2.0;
        prog.eq(eq); // v == 2
        let mut le = LinExpr::var(v);
        le.constant = -1.0;
        prog.le(le); // v ≤ 1
        assert_eq!(prog.max_violation(&[2.0]), 1.0);
        assert_eq!(prog.max_violation(&[1.0]), 1.0);
        assert_eq!(prog.max_violation(&[1.5]), 0.5);
    }
}
