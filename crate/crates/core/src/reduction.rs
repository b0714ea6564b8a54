//! Zonotope order reduction.
//!
//! The rearranging reducer replaces the trailing `z − p + n` generator
//! columns of an n×z generator with a nonnegative diagonal block of row
//! absolute sums `a`, keeping the first `p − n` columns:
//! `G_red = (diag(a), g⁽¹⁾ … g⁽ᵖ⁻ⁿ⁾)`. It exists both as a closed-form
//! computation and as a constraint/cost fragment over program variables,
//! so it can run inside the synthesis optimization. Sorting-based
//! baseline reducers and a PCA parallelotope bound round out the module.

use nalgebra::{DMatrix, DVector};

use crate::synth::program::{ConvexProgram, LinExpr, VarId, VarTag};
use crate::zonoset::{Parallelotope, Zonotope};
use crate::{Error, Result};

/// Inflation applied to degenerate axis radii when bounding.
const DEGENERATE_RADIUS: f64 = 1e-9;

/// Result of the rearranging reduction: the reduced zonotope (zero
/// center; reduction acts on generators only) plus the diagonal slacks.
#[derive(Debug, Clone)]
pub struct ReducedZonotope {
    pub zonotope: Zonotope,
    /// Row absolute sums a of the boxed columns; first n generator columns
    /// of `zonotope` equal diag(a).
    pub slacks: DVector<f64>,
}

/// Constraint/cost fragment emitted by [`reazor_fragment`].
#[derive(Debug, Clone)]
pub struct ReductionFragment {
    /// Slack variables a_i (one per row).
    pub slacks: Vec<VarId>,
    /// Reduced generator as expressions: `(diag(a), kept columns)`, n×p.
    pub reduced: Vec<Vec<LinExpr>>,
}

fn check_target(n: usize, z: usize, p: usize) -> Result<()> {
    if p < n || p > z {
        return Err(Error::InvalidArgument(format!(
            "reduction target p={p} outside [n={n}, z={z}]"
        )));
    }
    Ok(())
}

/// Closed-form rearranging reduction of an n×z generator to p columns:
/// boxes the trailing columns into `diag(a)` with
/// `a_i = Σ_{j=p−n+1}^{z} |G_ij|` and keeps the first `p − n` columns
/// behind the diagonal block.
pub fn reazor(generator: &DMatrix<f64>, p: usize) -> Result<ReducedZonotope> {
    let (n, z) = generator.shape();
    check_target(n, z, p)?;
    let kept = p - n;
    let mut a = DVector::zeros(n);
    for i in 0..n {
        for j in kept..z {
            a[i] += generator[(i, j)].abs();
        }
    }
    let mut g = DMatrix::zeros(n, p);
    for i in 0..n {
        g[(i, i)] = a[i];
    }
    if kept > 0 {
        g.view_mut((0, n), (n, kept))
            .copy_from(&generator.view((0, 0), (n, kept)));
    }
    Ok(ReducedZonotope {
        zonotope: Zonotope::new(DVector::zeros(n), g)?,
        slacks: a,
    })
}

/// Emits the reduction as program constraints over a symbolic generator
/// (n rows of z expressions): epigraph slacks `t ≥ |G_ij|` for the boxed
/// range, row bounds `Σ t ≤ a_i`, the rearranged output expressions, and
/// the cost contribution `weight · Σ a_i`.
pub fn reazor_fragment(
    program: &mut ConvexProgram,
    generator: &[Vec<LinExpr>],
    p: usize,
    step: usize,
    cost_weight: f64,
) -> Result<ReductionFragment> {
    let n = generator.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty symbolic generator".into()));
    }
    let z = generator[0].len();
    if generator.iter().any(|row| row.len() != z) {
        return Err(Error::ShapeMismatch(
            "symbolic generator rows have unequal widths".into(),
        ));
    }
    check_target(n, z, p)?;
    let kept = p - n;

    let mut slacks = Vec::with_capacity(n);
    for i in 0..n {
        let a = program.add_var(VarTag::ReductionSlack { k: step, i });
        let mut row_sum = LinExpr::term(a, -1.0);
        for col in generator[i].iter().take(z).skip(kept) {
            let t = program.add_abs_epigraph(col);
            row_sum.push(t, 1.0);
        }
        program.le(row_sum); // Σ_j t_ij − a_i ≤ 0
        program.add_lin_cost(a, cost_weight);
        slacks.push(a);
    }

    let mut reduced = vec![Vec::with_capacity(p); n];
    for (i, row) in reduced.iter_mut().enumerate() {
        for c in 0..n {
            row.push(if c == i {
                LinExpr::var(slacks[i])
            } else {
                LinExpr::zero()
            });
        }
        for c in 0..kept {
            row.push(generator[i][c].clone());
        }
    }
    Ok(ReductionFragment { slacks, reduced })
}

/// Sorting criterion shared by the baseline reducers: indices of columns
/// to keep (largest criterion values, original order preserved) and to
/// box.
fn split_columns<F: Fn(&DVector<f64>) -> f64>(
    z: &Zonotope,
    p: usize,
    criterion: F,
) -> (Vec<usize>, Vec<usize>) {
    let n = z.dim();
    let total = z.num_generators();
    let keep_count = p - n;
    let mut order: Vec<usize> = (0..total).collect();
    let scores: Vec<f64> = (0..total)
        .map(|j| criterion(&DVector::from(z.generator().column(j))))
        .collect();
    // Ascending score, ties by column index: the head gets boxed.
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut boxed: Vec<usize> = order[..total - keep_count].to_vec();
    let mut kept: Vec<usize> = order[total - keep_count..].to_vec();
    boxed.sort_unstable();
    kept.sort_unstable();
    (kept, boxed)
}

/// Boxes `boxed` columns into an axis-aligned diagonal appended after the
/// kept columns.
fn box_reduce(z: &Zonotope, kept: &[usize], boxed: &[usize]) -> Result<Zonotope> {
    let n = z.dim();
    let mut g = DMatrix::zeros(n, kept.len() + n);
    for (out, &j) in kept.iter().enumerate() {
        g.set_column(out, &z.generator().column(j));
    }
    for i in 0..n {
        let r: f64 = boxed.iter().map(|&j| z.generator()[(i, j)].abs()).sum();
        g[(i, kept.len() + i)] = r;
    }
    Zonotope::new(z.center().clone(), g)
}

/// Order reduction sorting by `‖g‖₂ − ‖g‖_∞` and boxing the smallest
/// columns; returns the input unchanged when `p` equals the current
/// column count.
pub fn reduce_girard(z: &Zonotope, p: usize) -> Result<Zonotope> {
    check_target(z.dim(), z.num_generators(), p)?;
    if p == z.num_generators() {
        return Ok(z.clone());
    }
    let (kept, boxed) = split_columns(z, p, |g| g.norm() - g.amax());
    box_reduce(z, &kept, &boxed)
}

/// Order reduction sorting by `‖g‖₂` and boxing the smallest columns.
pub fn reduce_combastel(z: &Zonotope, p: usize) -> Result<Zonotope> {
    check_target(z.dim(), z.num_generators(), p)?;
    if p == z.num_generators() {
        return Ok(z.clone());
    }
    let (kept, boxed) = split_columns(z, p, |g| g.norm());
    box_reduce(z, &kept, &boxed)
}

/// Order reduction boxing the smallest columns (by 2-norm) inside the
/// principal-axis frame of the boxed set.
pub fn reduce_pca(z: &Zonotope, p: usize) -> Result<Zonotope> {
    let n = z.dim();
    check_target(n, z.num_generators(), p)?;
    if p == z.num_generators() {
        return Ok(z.clone());
    }
    let (kept, boxed) = split_columns(z, p, |g| g.norm());
    let reduce_set = DMatrix::from_fn(n, boxed.len(), |i, c| z.generator()[(i, boxed[c])]);
    let frame = principal_frame(&reduce_set);
    // Box the reduce set in the rotated frame: radii are the row absolute
    // sums of the frame-aligned coordinates.
    let coords = frame.transpose() * &reduce_set;
    let mut block = DMatrix::zeros(n, n);
    for i in 0..n {
        let r: f64 = coords.row(i).iter().map(|v| v.abs()).sum();
        block[(i, i)] = r;
    }
    let rotated = &frame * block;
    let mut g = DMatrix::zeros(n, kept.len() + n);
    for (out, &j) in kept.iter().enumerate() {
        g.set_column(out, &z.generator().column(j));
    }
    g.view_mut((0, kept.len()), (n, n)).copy_from(&rotated);
    Zonotope::new(z.center().clone(), g)
}

/// Orthogonal frame of the column set, via the eigenvectors of GGᵀ,
/// ordered by decreasing eigenvalue with deterministic column signs.
/// Falls back to the identity frame when the decomposition fails.
fn principal_frame(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let gram = g * g.transpose();
    let Some(eig) = gram.clone().try_symmetric_eigen(1e-12, 1000) else {
        return DMatrix::identity(n, n);
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut frame = DMatrix::zeros(n, n);
    for (out, &src) in order.iter().enumerate() {
        let mut col = DVector::from(eig.eigenvectors.column(src));
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12) {
            if *lead < 0.0 {
                col = -col;
            }
        }
        frame.set_column(out, &col);
    }
    if frame.iter().any(|v| !v.is_finite()) {
        return DMatrix::identity(n, n);
    }
    frame
}

/// Axis-aligned bounding parallelotope in the principal frame of the
/// generators, sharing the input's center. Degenerate axes are inflated
/// by a tolerance so the generator stays invertible.
pub fn parallelotope_bound(z: &Zonotope) -> Result<Parallelotope> {
    let n = z.dim();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot bound a zero-dimensional set".into(),
        ));
    }
    let frame = principal_frame(z.generator());
    let coords = frame.transpose() * z.generator();
    let mut block = DMatrix::zeros(n, n);
    for i in 0..n {
        let r: f64 = coords.row(i).iter().map(|v| v.abs()).sum();
        block[(i, i)] = r.max(DEGENERATE_RADIUS);
    }
    Parallelotope::new(z.center().clone(), &frame * block)
}
