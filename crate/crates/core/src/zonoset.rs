//! Vector and matrix zonotope algebra.
//!
//! A zonotope `⟨c, G⟩` with center `c ∈ ℝⁿ` and generator matrix
//! `G ∈ ℝ^{n×p}` is the point-symmetric set
//! `{c + Σᵢ βᵢ g⁽ⁱ⁾ : |βᵢ| ≤ 1}`. The module provides the closed
//! operations (linear map, addition, Minkowski sum, translation), the
//! over-approximating ones (pairwise convex hull, matrix-zonotope
//! product), sufficient containment as a single LP, exact point
//! membership, support functions, and the combinatorial volume formula
//! for low dimensions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::sparse::TripletMatrix;
use crate::{Error, Result};

/// Floating tolerance for certificate validation.
pub const CERT_TOL: f64 = 1e-7;

/// Dimension cap for [`Zonotope::volume`].
pub const VOLUME_DIM_CAP: usize = 4;
/// Generator-count cap for [`Zonotope::volume`].
pub const VOLUME_GEN_CAP: usize = 24;

/// A vector zonotope `⟨c, G⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generator: DMatrix<f64>,
}

impl Zonotope {
    /// Builds `⟨center, generator⟩`; the generator row count must equal the
    /// center dimension. Zero generator columns (points) are legal, as are
    /// rank-deficient generators.
    pub fn new(center: DVector<f64>, generator: DMatrix<f64>) -> Result<Self> {
        if center.len() != generator.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "zonotope center has dimension {} but generator has {} rows",
                center.len(),
                generator.nrows()
            )));
        }
        Ok(Self { center, generator })
    }

    /// A point zonotope (no generators).
    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            generator: DMatrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box `⟨center, diag(half_widths)⟩`.
    pub fn from_box(center: DVector<f64>, half_widths: &DVector<f64>) -> Result<Self> {
        if center.len() != half_widths.len() {
            return Err(Error::ShapeMismatch(format!(
                "box center dimension {} vs half-width dimension {}",
                center.len(),
                half_widths.len()
            )));
        }
        let n = center.len();
        let generator = DMatrix::from_fn(n, n, |i, j| if i == j { half_widths[i] } else { 0.0 });
        Ok(Self { center, generator })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Generator count p.
    pub fn num_generators(&self) -> usize {
        self.generator.ncols()
    }

    /// Order p/n.
    pub fn order(&self) -> f64 {
        self.generator.ncols() as f64 / self.center.len() as f64
    }

    /// Per-axis half-widths of the tightest axis-aligned bounding box,
    /// `w_r = Σᵢ |G_{r,i}|`.
    pub fn box_radii(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |r, _| {
            self.generator.row(r).iter().map(|v| v.abs()).sum()
        })
    }

    /// Returns a copy widened to `target` generator columns by appending
    /// zero columns. `target` must not be smaller than the current count.
    pub fn pad_columns(&self, target: usize) -> Result<Self> {
        let p = self.num_generators();
        if target < p {
            return Err(Error::InvalidArgument(format!(
                "cannot pad from {p} down to {target} columns"
            )));
        }
        let mut g = DMatrix::zeros(self.dim(), target);
        g.view_mut((0, 0), (self.dim(), p)).copy_from(&self.generator);
        Ok(Self {
            center: self.center.clone(),
            generator: g,
        })
    }

    /// Image `⟨Ac, AG⟩` under the linear map `A`.
    pub fn linear_map(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "map has {} columns but zonotope dimension is {}",
                a.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            center: a * &self.center,
            generator: a * &self.generator,
        })
    }

    /// Element-wise sum `⟨x+y, X+Y⟩`; both operands must share dimension
    /// and generator count.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() || self.num_generators() != other.num_generators() {
            return Err(Error::ShapeMismatch(format!(
                "add needs equal shapes, got {}x{} vs {}x{}",
                self.dim(),
                self.num_generators(),
                other.dim(),
                other.num_generators()
            )));
        }
        Ok(Self {
            center: &self.center + &other.center,
            generator: &self.generator + &other.generator,
        })
    }

    /// Translation `⟨c+v, G⟩`.
    pub fn translate(&self, v: &DVector<f64>) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "translation vector dimension {} vs zonotope dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(Self {
            center: &self.center + v,
            generator: self.generator.clone(),
        })
    }

    /// Minkowski sum `⟨x+y, (X, Y)⟩` (generator concatenation).
    pub fn minkowski(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(format!(
                "minkowski needs equal dimensions, got {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let (px, py) = (self.num_generators(), other.num_generators());
        let mut g = DMatrix::zeros(n, px + py);
        g.view_mut((0, 0), (n, px)).copy_from(&self.generator);
        g.view_mut((0, px), (n, py)).copy_from(&other.generator);
        Ok(Self {
            center: &self.center + &other.center,
            generator: g,
        })
    }

    /// Minkowski sum specialised to operands whose generators start with an
    /// n×n nonnegative diagonal block: `⟨x+y, (D_x+D_y, X', Y')⟩`. The
    /// result is the same set as [`Zonotope::minkowski`] but grows by only
    /// the non-diagonal columns of `other`.
    pub fn minkowski_diag(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(format!(
                "minkowski_diag needs equal dimensions, got {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let dx = leading_diag_block(&self.generator, n)?;
        let dy = leading_diag_block(&other.generator, n)?;
        let (px, py) = (self.num_generators(), other.num_generators());
        let mut g = DMatrix::zeros(n, px + py - n);
        for i in 0..n {
            g[(i, i)] = dx[i] + dy[i];
        }
        g.view_mut((0, n), (n, px - n))
            .copy_from(&self.generator.view((0, n), (n, px - n)));
        g.view_mut((0, px), (n, py - n))
            .copy_from(&other.generator.view((0, n), (n, py - n)));
        Ok(Self {
            center: &self.center + &other.center,
            generator: g,
        })
    }

    /// Support function `h(d) = dᵀc + Σᵢ |dᵀg⁽ⁱ⁾|`.
    pub fn support(&self, direction: &DVector<f64>) -> f64 {
        assert_eq!(direction.len(), self.dim(), "support direction dimension");
        let mut h = self.center.dot(direction);
        for j in 0..self.num_generators() {
            h += self.generator.column(j).dot(direction).abs();
        }
        h
    }

    /// Sufficient containment test `inner ⊆ self` via a single LP over a
    /// scaling matrix Γ and offset β with `X = YΓ`, `y − x = Yβ`,
    /// `‖(Γ, β)‖_∞ ≤ 1` (row-wise absolute sums). Returns a certificate on
    /// success and `None` when the LP is infeasible; infeasibility does not
    /// prove non-containment.
    pub fn contains(&self, inner: &Zonotope) -> Result<Option<ContainmentCertificate>> {
        if self.dim() != inner.dim() {
            return Err(Error::ShapeMismatch(format!(
                "containment needs equal dimensions, got {} vs {}",
                inner.dim(),
                self.dim()
            )));
        }
        let ny = self.num_generators();
        if ny == 0 {
            return Err(Error::InvalidArgument(
                "containment target must have at least one generator".into(),
            ));
        }
        let n = self.dim();
        let nx = inner.num_generators();

        // Variables: Γ (ny×nx, column-major), β (ny), |Γ| slacks T, |β| slacks s.
        let v_gamma = |k: usize, j: usize| j * ny + k;
        let off_beta = ny * nx;
        let off_t = off_beta + ny;
        let v_t = move |k: usize, j: usize| off_t + j * ny + k;
        let off_s = off_t + ny * nx;
        let num_vars = off_s + ny;

        let n_eq = n * nx + n;
        let n_ineq = 2 * ny * nx + 2 * ny + ny;
        let mut a = TripletMatrix::new(n_eq + n_ineq, num_vars);
        let mut b = vec![0.0; n_eq + n_ineq];

        // YΓ = X, one column of equations per inner generator.
        for j in 0..nx {
            for i in 0..n {
                let row = j * n + i;
                for k in 0..ny {
                    a.push(row, v_gamma(k, j), self.generator[(i, k)]);
                }
                b[row] = inner.generator[(i, j)];
            }
        }
        // Yβ = y − x.
        for i in 0..n {
            let row = n * nx + i;
            for k in 0..ny {
                a.push(row, off_beta + k, self.generator[(i, k)]);
            }
            b[row] = self.center[i] - inner.center[i];
        }
        // ±Γ ≤ T and ±β ≤ s (epigraph of the absolute values).
        let mut row = n_eq;
        for j in 0..nx {
            for k in 0..ny {
                a.push(row, v_gamma(k, j), 1.0);
                a.push(row, v_t(k, j), -1.0);
                row += 1;
                a.push(row, v_gamma(k, j), -1.0);
                a.push(row, v_t(k, j), -1.0);
                row += 1;
            }
        }
        for k in 0..ny {
            a.push(row, off_beta + k, 1.0);
            a.push(row, off_s + k, -1.0);
            row += 1;
            a.push(row, off_beta + k, -1.0);
            a.push(row, off_s + k, -1.0);
            row += 1;
        }
        // Row sums of (|Γ|, |β|) at most one.
        for k in 0..ny {
            for j in 0..nx {
                a.push(row, v_t(k, j), 1.0);
            }
            a.push(row, off_s + k, 1.0);
            b[row] = 1.0;
            row += 1;
        }
        debug_assert_eq!(row, n_eq + n_ineq);

        // Minimising the slack mass keeps the LP bounded and the
        // certificate tight.
        let mut cost = vec![0.0; num_vars];
        for v in cost.iter_mut().skip(off_t) {
            *v = 1.0;
        }

        match solve_lp(num_vars, &cost, a, b, n_eq)? {
            None => Ok(None),
            Some(x) => {
                let gamma = DMatrix::from_fn(ny, nx, |k, j| x[v_gamma(k, j)]);
                let beta = DVector::from_fn(ny, |k, _| x[off_beta + k]);
                let cert = ContainmentCertificate { gamma, beta };
                if cert.verify(inner, self, CERT_TOL) {
                    Ok(Some(cert))
                } else {
                    Err(Error::Solver(
                        "containment LP returned a certificate that fails validation".into(),
                    ))
                }
            }
        }
    }

    /// Exact point membership: true iff `∃β, ‖β‖_∞ ≤ 1, c + Gβ = x`.
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "point dimension {} vs zonotope dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let p = self.num_generators();
        let rhs = x - &self.center;
        if p == 0 {
            return Ok(rhs.amax() <= CERT_TOL);
        }
        let n = self.dim();
        let mut a = TripletMatrix::new(n + 2 * p, p);
        let mut b = vec![0.0; n + 2 * p];
        for i in 0..n {
            for j in 0..p {
                a.push(i, j, self.generator[(i, j)]);
            }
            b[i] = rhs[i];
        }
        for j in 0..p {
            a.push(n + 2 * j, j, 1.0);
            b[n + 2 * j] = 1.0;
            a.push(n + 2 * j + 1, j, -1.0);
            b[n + 2 * j + 1] = 1.0;
        }
        let cost = vec![0.0; p];
        Ok(solve_lp(p, &cost, a, b, n)?.is_some())
    }

    /// Over-approximation of the convex hull of two zonotopes:
    /// `⟨(x+y)/2, ((X+Y)/2, (x−y)/2, (X−Y)/2)⟩`. The narrower operand is
    /// padded with zero columns first; the result contains both operands.
    pub fn convex_hull_pair(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(format!(
                "convex hull needs equal dimensions, got {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let width = self.num_generators().max(other.num_generators());
        let zx = self.pad_columns(width)?;
        let zy = other.pad_columns(width)?;
        let mut g = DMatrix::zeros(n, 2 * width + 1);
        g.view_mut((0, 0), (n, width))
            .copy_from(&((&zx.generator + &zy.generator) * 0.5));
        g.view_mut((0, width), (n, 1))
            .copy_from(&((&zx.center - &zy.center) * 0.5));
        g.view_mut((0, width + 1), (n, width))
            .copy_from(&((&zx.generator - &zy.generator) * 0.5));
        Ok(Self {
            center: (&zx.center + &zy.center) * 0.5,
            generator: g,
        })
    }

    /// Volume by the exact combinatorial formula
    /// `2ⁿ Σ_{|S|=n} |det G_S|`, capped at n ≤ 4 and p ≤ 24.
    pub fn volume(&self) -> Result<f64> {
        let n = self.dim();
        let p = self.num_generators();
        if n > VOLUME_DIM_CAP {
            return Err(Error::InvalidArgument(format!(
                "volume cap: dimension {n} exceeds {VOLUME_DIM_CAP}"
            )));
        }
        if p > VOLUME_GEN_CAP {
            return Err(Error::InvalidArgument(format!(
                "volume cap: generator count {p} exceeds {VOLUME_GEN_CAP}"
            )));
        }
        if n == 0 || p < n {
            return Ok(0.0);
        }
        use itertools::Itertools;
        let mut total = 0.0;
        for combo in (0..p).combinations(n) {
            let sub = DMatrix::from_fn(n, n, |i, j| self.generator[(i, combo[j])]);
            total += sub.determinant().abs();
        }
        Ok(total * 2f64.powi(n as i32))
    }

    /// Uniform sample `c + Gβ` with β drawn from `[−1, 1]^p`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let beta = DVector::from_fn(self.num_generators(), |_, _| rng.random_range(-1.0..=1.0));
        &self.center + &self.generator * beta
    }

    /// Vertex-candidate sample `c + Gσ` with σ a random sign vector.
    pub fn sample_vertex<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let beta = DVector::from_fn(self.num_generators(), |_, _| {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        });
        &self.center + &self.generator * beta
    }
}

/// Extracts the diagonal of the leading n×n block, requiring the block to
/// be diagonal with nonnegative entries.
fn leading_diag_block(g: &DMatrix<f64>, n: usize) -> Result<Vec<f64>> {
    if g.ncols() < n {
        return Err(Error::ShapeMismatch(format!(
            "generator has {} columns, needs a leading {n}x{n} diagonal block",
            g.ncols()
        )));
    }
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && g[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "leading generator block is not diagonal".into(),
                ));
            }
        }
        if g[(i, i)] < 0.0 {
            return Err(Error::InvalidArgument(
                "leading diagonal block has a negative entry".into(),
            ));
        }
        d.push(g[(i, i)]);
    }
    Ok(d)
}

/// Iterated pairwise convex hull of a non-empty list. The list is padded
/// with duplicates of its last element up to the next power of two, then
/// reduced by adjacent pairs.
pub fn convex_hull_many(zonotopes: &[Zonotope]) -> Result<Zonotope> {
    if zonotopes.is_empty() {
        return Err(Error::InvalidArgument(
            "convex hull of an empty list".into(),
        ));
    }
    let n = zonotopes[0].dim();
    for z in zonotopes {
        if z.dim() != n {
            return Err(Error::ShapeMismatch(
                "convex hull operands must share dimension".into(),
            ));
        }
    }
    let mut level: Vec<Zonotope> = zonotopes.to_vec();
    let target = level.len().next_power_of_two();
    while level.len() < target {
        level.push(level.last().unwrap().clone());
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        for pair in level.chunks_exact(2) {
            next.push(pair[0].convex_hull_pair(&pair[1])?);
        }
        level = next;
    }
    Ok(level.pop().unwrap())
}

/// A matrix zonotope `⟨A⁽⁰⁾, (A⁽¹⁾, …, A⁽ⁿᵃ⁾)⟩` representing the symmetric
/// polytopic matrix set `{A⁽⁰⁾ + Σᵢ βᵢ A⁽ⁱ⁾ : |βᵢ| ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixZonotope {
    center: DMatrix<f64>,
    generators: Vec<DMatrix<f64>>,
}

impl MatrixZonotope {
    pub fn new(center: DMatrix<f64>, generators: Vec<DMatrix<f64>>) -> Result<Self> {
        for g in &generators {
            if g.shape() != center.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "matrix zonotope generator shape {:?} vs center shape {:?}",
                    g.shape(),
                    center.shape()
                )));
            }
        }
        Ok(Self { center, generators })
    }

    pub fn center_matrix(&self) -> &DMatrix<f64> {
        &self.center
    }

    pub fn generator_matrices(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn nrows(&self) -> usize {
        self.center.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.center.ncols()
    }

    /// Over-approximation of `{Az : A ∈ self, z ∈ Z}`:
    /// `⟨A⁽⁰⁾c, (A⁽⁰⁾G, A⁽¹⁾c, A⁽¹⁾G, …, A⁽ⁿᵃ⁾c, A⁽ⁿᵃ⁾G)⟩` with
    /// `n_p + n_a(n_p + 1)` generator columns.
    pub fn multiply(&self, z: &Zonotope) -> Result<Zonotope> {
        if self.ncols() != z.dim() {
            return Err(Error::ShapeMismatch(format!(
                "matrix zonotope has {} columns but operand dimension is {}",
                self.ncols(),
                z.dim()
            )));
        }
        let n = self.nrows();
        let np = z.num_generators();
        let na = self.generators.len();
        let mut g = DMatrix::zeros(n, np + na * (np + 1));
        g.view_mut((0, 0), (n, np))
            .copy_from(&(&self.center * z.generator()));
        for (i, ai) in self.generators.iter().enumerate() {
            let off = np + i * (np + 1);
            g.view_mut((0, off), (n, 1)).copy_from(&(ai * z.center()));
            g.view_mut((0, off + 1), (n, np))
                .copy_from(&(ai * z.generator()));
        }
        Zonotope::new(&self.center * z.center(), g)
    }

    /// Sample `A⁽⁰⁾ + Σᵢ βᵢ A⁽ⁱ⁾` with β drawn from `[−1, 1]^{n_a}`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut a = self.center.clone();
        for g in &self.generators {
            a += g * rng.random_range(-1.0..=1.0);
        }
        a
    }
}

/// An order-one zonotope with invertible generator matrix, plus its cached
/// inverse. Used for the policy runtime's distance measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Parallelotope {
    center: DVector<f64>,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

/// Condition-number cap applied by [`Parallelotope::new`].
pub const PARALLELOTOPE_COND_CAP: f64 = 1e12;

impl Parallelotope {
    pub fn new(center: DVector<f64>, matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_condition_cap(center, matrix, PARALLELOTOPE_COND_CAP)
    }

    pub fn with_condition_cap(
        center: DVector<f64>,
        matrix: DMatrix<f64>,
        cond_cap: f64,
    ) -> Result<Self> {
        let n = center.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "parallelotope needs a square {n}x{n} generator, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let svd = matrix.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 0.0 || smax / smin > cond_cap {
            return Err(Error::Singular(format!(
                "parallelotope generator condition number {:.3e} exceeds cap {cond_cap:.1e}",
                if smin > 0.0 { smax / smin } else { f64::INFINITY }
            )));
        }
        let inverse = matrix.clone().try_inverse().ok_or_else(|| {
            Error::Singular("parallelotope generator is not invertible".into())
        })?;
        Ok(Self {
            center,
            matrix,
            inverse,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Cached inverse of the generator matrix.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The same set as a plain zonotope.
    pub fn as_zonotope(&self) -> Zonotope {
        Zonotope {
            center: self.center.clone(),
            generator: self.matrix.clone(),
        }
    }
}

/// Witness for a sufficient containment test: `X = YΓ`, `y − x = Yβ`,
/// row-wise absolute sums of `(Γ, β)` at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentCertificate {
    pub gamma: DMatrix<f64>,
    pub beta: DVector<f64>,
}

impl ContainmentCertificate {
    /// Checks the three certificate identities to tolerance `tol`.
    pub fn verify(&self, inner: &Zonotope, outer: &Zonotope, tol: f64) -> bool {
        let y = outer.generator();
        if self.gamma.nrows() != y.ncols()
            || self.gamma.ncols() != inner.num_generators()
            || self.beta.len() != y.ncols()
        {
            return false;
        }
        let res_g = y * &self.gamma - inner.generator();
        if res_g.amax() > tol {
            return false;
        }
        let res_b = y * &self.beta - (outer.center() - inner.center());
        if res_b.amax() > tol {
            return false;
        }
        for k in 0..y.ncols() {
            let row_sum: f64 =
                self.gamma.row(k).iter().map(|v| v.abs()).sum::<f64>() + self.beta[k].abs();
            if row_sum > 1.0 + tol {
                return false;
            }
        }
        true
    }
}

/// Solves `min cᵀx  s.t.  A_eq x = b_eq, A_in x ≤ b_in` where the first
/// `n_eq` rows of `a` are equalities. Returns `Some(x)` on success and
/// `None` on proven primal infeasibility.
fn solve_lp(
    num_vars: usize,
    cost: &[f64],
    a: TripletMatrix,
    b: Vec<f64>,
    n_eq: usize,
) -> Result<Option<Vec<f64>>> {
    use clarabel::solver::{
        DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    };
    let n_ineq = a.rows - n_eq;
    let p = TripletMatrix::new(num_vars, num_vars).to_csc();
    let a_csc = a.to_csc();
    let cones = [
        SupportedConeT::ZeroConeT(n_eq),
        SupportedConeT::NonnegativeConeT(n_ineq),
    ];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .map_err(|e| Error::Solver(format!("solver settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, cost, &a_csc, &b, &cones, settings)
        .map_err(|e| Error::Solver(format!("solver setup: {e}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(Some(solver.solution.x.clone())),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(None),
        status => Err(Error::Solver(format!("LP terminated with status {status:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn random_zonotope<R: Rng>(rng: &mut R, n: usize, p: usize, scale: f64) -> Zonotope {
        let center = DVector::from_fn(n, |_, _| rng.random_range(-scale..=scale));
        let generator = DMatrix::from_fn(n, p, |_, _| rng.random_range(-scale..=scale));
        Zonotope::new(center, generator).unwrap()
    }

    fn random_direction<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
        loop {
            let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
            let norm = d.norm();
            if norm > 1e-6 {
                return d / norm;
            }
        }
    }

    /// Exact support by enumerating all sign assignments (p ≤ 20).
    fn support_by_vertex_enum(z: &Zonotope, d: &DVector<f64>) -> f64 {
        let p = z.num_generators();
        assert!(p <= 20);
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1u32 << p) {
            let mut v = d.dot(z.center());
            for j in 0..p {
                let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                v += s * d.dot(&DVector::from(z.generator().column(j)));
            }
            best = best.max(v);
        }
        best
    }

    #[test]
    fn new_rejects_center_generator_mismatch() {
        let r = Zonotope::new(vec2(0.0, 0.0), DMatrix::zeros(3, 2));
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn linear_map_identity_returns_same() {
        let z = Zonotope::new(vec2(1.0, -2.0), DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.])).unwrap();
        let mapped = z.linear_map(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(mapped, z);
    }

    #[test]
    fn linear_map_scales_box() {
        let z = Zonotope::from_box(vec2(1.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        let mapped = z.linear_map(&(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert_eq!(mapped.center(), &vec2(2.0, 0.0));
        assert_eq!(mapped.generator(), &(DMatrix::identity(2, 2) * 2.0));
    }

    #[test]
    fn linear_map_rotation_matches_vertex_support() {
        let z = Zonotope::new(vec2(0.0, 0.0), DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mapped = z.linear_map(&rot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..64 {
            let d = random_direction(&mut rng, 2);
            assert_relative_eq!(
                mapped.support(&d),
                support_by_vertex_enum(&mapped, &d),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn add_zero_operand_identity() {
        let zero = Zonotope::new(vec2(0.0, 0.0), DMatrix::zeros(2, 2)).unwrap();
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(1), 2, 2, 3.0);
        assert_eq!(zero.add(&z).unwrap(), z);
    }

    #[test]
    fn add_one_dimensional() {
        let zx = Zonotope::new(DVector::from_vec(vec![1.0]), DMatrix::from_vec(1, 1, vec![2.0])).unwrap();
        let zy = Zonotope::new(DVector::from_vec(vec![3.0]), DMatrix::from_vec(1, 1, vec![4.0])).unwrap();
        let sum = zx.add(&zy).unwrap();
        assert_eq!(sum.center()[0], 4.0);
        assert_eq!(sum.generator()[(0, 0)], 6.0);
    }

    #[test]
    fn add_matches_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zx = random_zonotope(&mut rng, 3, 4, 5.0);
        let zy = random_zonotope(&mut rng, 3, 4, 5.0);
        let sum = zx.add(&zy).unwrap();
        for i in 0..3 {
            assert_eq!(sum.center()[i], zx.center()[i] + zy.center()[i]);
            for j in 0..4 {
                assert_eq!(
                    sum.generator()[(i, j)],
                    zx.generator()[(i, j)] + zy.generator()[(i, j)]
                );
            }
        }
    }

    #[test]
    fn add_rejects_width_mismatch() {
        let zx = random_zonotope(&mut ChaCha8Rng::seed_from_u64(3), 2, 2, 1.0);
        let zy = random_zonotope(&mut ChaCha8Rng::seed_from_u64(4), 2, 3, 1.0);
        assert!(matches!(zx.add(&zy), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn translate_zero_is_noop() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(5), 2, 3, 2.0);
        assert_eq!(z.translate(&vec2(0.0, 0.0)).unwrap(), z);
    }

    #[test]
    fn translate_roundtrip_inverse() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(6), 2, 3, 2.0);
        let v = vec2(0.3, -1.7);
        let back = z.translate(&v).unwrap().translate(&(-&v)).unwrap();
        assert_relative_eq!(back.center(), z.center(), epsilon = 1e-15);
        assert_eq!(back.generator(), z.generator());
    }

    #[test]
    fn translate_commutes_with_minkowski() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zx = random_zonotope(&mut rng, 2, 3, 2.0);
        let zy = random_zonotope(&mut rng, 2, 2, 2.0);
        let v = vec2(0.5, -0.25);
        let lhs = zx.translate(&v).unwrap().minkowski(&zy).unwrap();
        let rhs = zx.minkowski(&zy.translate(&v).unwrap()).unwrap();
        for _ in 0..64 {
            let d = random_direction(&mut rng, 2);
            assert_relative_eq!(lhs.support(&d), rhs.support(&d), epsilon = 1e-9);
        }
    }

    #[test]
    fn minkowski_one_d_intervals() {
        let zx = Zonotope::new(DVector::zeros(1), DMatrix::from_vec(1, 1, vec![1.0])).unwrap();
        let zy = Zonotope::new(DVector::zeros(1), DMatrix::from_vec(1, 1, vec![2.0])).unwrap();
        let sum = zx.minkowski(&zy).unwrap();
        assert_eq!(sum.generator().as_slice(), &[1.0, 2.0]);
        let e = DVector::from_vec(vec![1.0]);
        assert_eq!(sum.support(&e), 3.0);
        assert_eq!(sum.support(&(-e)), 3.0);
    }

    #[test]
    fn minkowski_empty_operand_neutral() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(8), 2, 3, 2.0);
        let point = Zonotope::point(vec2(0.0, 0.0));
        assert_eq!(z.minkowski(&point).unwrap(), z);
    }

    #[test]
    fn minkowski_support_additive_on_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let zx = random_zonotope(&mut rng, 3, 4, 3.0);
        let zy = random_zonotope(&mut rng, 3, 2, 3.0);
        let sum = zx.minkowski(&zy).unwrap();
        for _ in 0..64 {
            let d = random_direction(&mut rng, 3);
            assert_relative_eq!(
                sum.support(&d),
                zx.support(&d) + zy.support(&d),
                epsilon = 1e-9
            );
        }
    }

    /// Builds a zonotope whose generator starts with a nonnegative diagonal
    /// block, followed by `extra` random columns.
    fn random_diag_leading<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Zonotope {
        let mut g = DMatrix::zeros(n, n + extra);
        for i in 0..n {
            g[(i, i)] = rng.random_range(0.0..=2.0);
        }
        for j in 0..extra {
            for i in 0..n {
                g[(i, n + j)] = rng.random_range(-2.0..=2.0);
            }
        }
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        Zonotope::new(c, g).unwrap()
    }

    #[test]
    fn minkowski_diag_keeps_width_for_diagonal_operand() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let zx = random_diag_leading(&mut rng, 3, 2);
        let zy = random_diag_leading(&mut rng, 3, 0);
        let sum = zx.minkowski_diag(&zy).unwrap();
        assert_eq!(sum.num_generators(), zx.num_generators());
    }

    #[test]
    fn minkowski_diag_box_addition() {
        let zx = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        let zy = Zonotope::from_box(vec2(0.0, 0.0), &vec2(2.0, 3.0)).unwrap();
        let sum = zx.minkowski_diag(&zy).unwrap();
        assert_eq!(sum.num_generators(), 2);
        assert_eq!(sum.generator()[(0, 0)], 3.0);
        assert_eq!(sum.generator()[(1, 1)], 4.0);
        assert_eq!(sum.generator()[(0, 1)], 0.0);
        assert_eq!(sum.generator()[(1, 0)], 0.0);
    }

    #[test]
    fn minkowski_diag_matches_minkowski_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zx = random_diag_leading(&mut rng, 3, 2);
        let zy = random_diag_leading(&mut rng, 3, 3);
        let fast = zx.minkowski_diag(&zy).unwrap();
        let full = zx.minkowski(&zy).unwrap();
        for _ in 0..64 {
            let d = random_direction(&mut rng, 3);
            assert_relative_eq!(fast.support(&d), full.support(&d), epsilon = 1e-9);
        }
    }

    #[test]
    fn minkowski_diag_rejects_nondiagonal_block() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let zx = Zonotope::new(vec2(0.0, 0.0), g).unwrap();
        let zy = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        assert!(matches!(
            zx.minkowski_diag(&zy),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn minkowski_diag_rejects_negative_diagonal() {
        let g = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let zx = Zonotope::new(vec2(0.0, 0.0), g).unwrap();
        let zy = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        assert!(matches!(
            zx.minkowski_diag(&zy),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn contains_is_reflexive_with_identity_certificate() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(12), 2, 4, 2.0);
        let cert = z.contains(&z).unwrap().expect("reflexive containment");
        assert!(cert.verify(&z, &z, CERT_TOL));
        // The identity certificate is always valid here.
        let identity = ContainmentCertificate {
            gamma: DMatrix::identity(4, 4),
            beta: DVector::zeros(4),
        };
        assert!(identity.verify(&z, &z, CERT_TOL));
    }

    #[test]
    fn contains_scaled_box() {
        let inner = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        let outer = Zonotope::from_box(vec2(0.0, 0.0), &vec2(2.0, 2.0)).unwrap();
        let cert = outer.contains(&inner).unwrap().expect("box containment");
        assert!(cert.verify(&inner, &outer, CERT_TOL));
    }

    #[test]
    fn contains_larger_inner_fails_with_outside_vertex() {
        let inner = Zonotope::from_box(vec2(0.0, 0.0), &vec2(2.0, 2.0)).unwrap();
        let outer = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        assert!(outer.contains(&inner).unwrap().is_none());
        // Confirm actual non-containment with a sampled inner vertex.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut found_outside = false;
        for _ in 0..32 {
            let v = inner.sample_vertex(&mut rng);
            if !outer.contains_point(&v).unwrap() {
                found_outside = true;
                break;
            }
        }
        assert!(found_outside);
    }

    #[test]
    fn contains_certificates_compose_transitively() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_zonotope(&mut rng, 2, 3, 1.0);
        let b = Zonotope::new(a.center().clone(), a.generator() * 1.5).unwrap();
        let c = Zonotope::new(a.center().clone(), a.generator() * 3.0).unwrap();
        let ab = b.contains(&a).unwrap().expect("a in b");
        let bc = c.contains(&b).unwrap().expect("b in c");
        let composed = ContainmentCertificate {
            gamma: &bc.gamma * &ab.gamma,
            beta: &bc.beta + &bc.gamma * &ab.beta,
        };
        assert!(composed.verify(&a, &c, CERT_TOL));
        assert!(c.contains(&a).unwrap().is_some());
    }

    #[test]
    fn contains_point_center() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(15), 3, 4, 2.0);
        assert!(z.contains_point(z.center()).unwrap());
    }

    #[test]
    fn contains_point_box_boundary() {
        let z = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        assert!(z.contains_point(&vec2(1.0, 1.0)).unwrap());
        assert!(!z.contains_point(&vec2(1.01, 0.0)).unwrap());
    }

    #[test]
    fn contains_point_constructive_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let z = random_zonotope(&mut rng, 3, 5, 2.0);
        for _ in 0..200 {
            let x = z.sample(&mut rng);
            assert!(z.contains_point(&x).unwrap());
        }
    }

    #[test]
    fn convex_hull_pair_idempotent_same_set() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(17), 2, 3, 2.0);
        let hull = z.convex_hull_pair(&z).unwrap();
        assert_eq!(hull.num_generators(), 7);
        assert_eq!(hull.center(), z.center());
        // First block is X, the rest are zero columns.
        assert_eq!(&hull.generator().view((0, 0), (2, 3)), z.generator());
        assert_eq!(hull.generator().view((0, 3), (2, 4)).amax(), 0.0);
    }

    #[test]
    fn convex_hull_pair_one_d_interval() {
        let zx = Zonotope::new(DVector::from_vec(vec![-1.0]), DMatrix::from_vec(1, 1, vec![1.0])).unwrap();
        let zy = Zonotope::new(DVector::from_vec(vec![1.0]), DMatrix::from_vec(1, 1, vec![1.0])).unwrap();
        let hull = zx.convex_hull_pair(&zy).unwrap();
        assert_eq!(hull.center()[0], 0.0);
        assert_eq!(hull.generator().as_slice(), &[1.0, -1.0, 0.0]);
        let e = DVector::from_vec(vec![1.0]);
        assert_eq!(hull.support(&e), 2.0);
        assert_eq!(hull.support(&(-e)), 2.0);
    }

    #[test]
    fn convex_hull_pair_contains_both_operands() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..8 {
            let zx = random_zonotope(&mut rng, 2, 3, 2.0);
            let zy = random_zonotope(&mut rng, 2, 2, 2.0);
            let hull = zx.convex_hull_pair(&zy).unwrap();
            assert_eq!(hull.num_generators(), 2 * 3 + 1);
            assert!(hull.contains(&zx).unwrap().is_some());
            assert!(hull.contains(&zy).unwrap().is_some());
        }
    }

    #[test]
    fn convex_hull_many_single_identity() {
        let z = random_zonotope(&mut ChaCha8Rng::seed_from_u64(19), 2, 3, 2.0);
        assert_eq!(convex_hull_many(std::slice::from_ref(&z)).unwrap(), z);
    }

    #[test]
    fn convex_hull_many_rejects_empty() {
        assert!(matches!(
            convex_hull_many(&[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn convex_hull_many_contains_all_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let inputs: Vec<Zonotope> = (0..4).map(|_| random_zonotope(&mut rng, 2, 3, 2.0)).collect();
        let hull = convex_hull_many(&inputs).unwrap();
        for z in &inputs {
            assert!(hull.contains(z).unwrap().is_some());
        }
    }

    #[test]
    fn convex_hull_many_identical_inputs_same_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = random_zonotope(&mut rng, 2, 3, 2.0);
        let hull = convex_hull_many(&[z.clone(), z.clone(), z.clone()]).unwrap();
        for _ in 0..64 {
            let d = random_direction(&mut rng, 2);
            assert_relative_eq!(hull.support(&d), z.support(&d), epsilon = 1e-9);
        }
    }

    fn random_matrix_zonotope<R: Rng>(rng: &mut R, n: usize, m: usize, na: usize) -> MatrixZonotope {
        let center = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..=1.0));
        let gens = (0..na)
            .map(|_| DMatrix::from_fn(n, m, |_, _| rng.random_range(-0.3..=0.3)))
            .collect();
        MatrixZonotope::new(center, gens).unwrap()
    }

    #[test]
    fn mz_multiply_degenerate_equals_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mz = random_matrix_zonotope(&mut rng, 2, 2, 0);
        let z = random_zonotope(&mut rng, 2, 3, 2.0);
        let product = mz.multiply(&z).unwrap();
        let mapped = z.linear_map(mz.center_matrix()).unwrap();
        assert_eq!(product, mapped);
    }

    #[test]
    fn mz_multiply_column_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mz = random_matrix_zonotope(&mut rng, 2, 2, 3);
        let z = random_zonotope(&mut rng, 2, 4, 1.0);
        let product = mz.multiply(&z).unwrap();
        assert_eq!(product.num_generators(), 4 + 3 * (4 + 1));
    }

    #[test]
    fn mz_multiply_sampled_memberships() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mz = random_matrix_zonotope(&mut rng, 2, 2, 2);
        let z = random_zonotope(&mut rng, 2, 2, 1.0);
        let product = mz.multiply(&z).unwrap();
        for _ in 0..1000 {
            let a = mz.sample(&mut rng);
            let x = z.sample(&mut rng);
            assert!(product.contains_point(&(a * x)).unwrap());
        }
    }

    #[test]
    fn support_unit_box_axis() {
        let z = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        assert_eq!(z.support(&vec2(1.0, 0.0)), 1.0);
    }

    #[test]
    fn support_matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let z = random_zonotope(&mut rng, 3, 6, 2.0);
        for _ in 0..64 {
            let d = random_direction(&mut rng, 3);
            assert_relative_eq!(z.support(&d), support_by_vertex_enum(&z, &d), epsilon = 1e-9);
        }
        // Interior samples never exceed the support value.
        for _ in 0..10_000 {
            let d = random_direction(&mut rng, 3);
            let x = z.sample(&mut rng);
            assert!(d.dot(&x) <= z.support(&d) + 1e-9);
        }
    }

    #[test]
    fn volume_unit_square() {
        let z = Zonotope::from_box(vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap();
        assert_relative_eq!(z.volume().unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn volume_parallelotope_single_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let p = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..=2.0));
        let z = Zonotope::new(DVector::zeros(3), p.clone()).unwrap();
        assert_relative_eq!(
            z.volume().unwrap(),
            8.0 * p.determinant().abs(),
            max_relative = 1e-12
        );
    }

    /// Polygon vertices of a 2-D zonotope via the sorted-generator walk.
    fn zonogon_vertices(z: &Zonotope) -> Vec<(f64, f64)> {
        let mut gens: Vec<(f64, f64)> = Vec::new();
        for j in 0..z.num_generators() {
            let (mut gx, mut gy) = (z.generator()[(0, j)], z.generator()[(1, j)]);
            if gy < 0.0 || (gy == 0.0 && gx < 0.0) {
                gx = -gx;
                gy = -gy;
            }
            if gx != 0.0 || gy != 0.0 {
                gens.push((gx, gy));
            }
        }
        gens.sort_by(|a, b| a.1.atan2(a.0).partial_cmp(&b.1.atan2(b.0)).unwrap());
        let (mut x, mut y) = (z.center()[0], z.center()[1]);
        for &(gx, gy) in &gens {
            x -= gx;
            y -= gy;
        }
        let mut verts = vec![(x, y)];
        for &(gx, gy) in &gens {
            x += 2.0 * gx;
            y += 2.0 * gy;
            verts.push((x, y));
        }
        for &(gx, gy) in &gens {
            x -= 2.0 * gx;
            y -= 2.0 * gy;
            verts.push((x, y));
        }
        verts
    }

    fn shoelace_area(verts: &[(f64, f64)]) -> f64 {
        let mut acc = 0.0;
        for i in 0..verts.len() {
            let (x0, y0) = verts[i];
            let (x1, y1) = verts[(i + 1) % verts.len()];
            acc += x0 * y1 - x1 * y0;
        }
        acc.abs() / 2.0
    }

    #[test]
    fn volume_matches_polygon_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..16 {
            let z = random_zonotope(&mut rng, 2, 6, 2.0);
            let area = shoelace_area(&zonogon_vertices(&z));
            assert_relative_eq!(z.volume().unwrap(), area, max_relative = 1e-9);
        }
    }

    #[test]
    fn volume_monte_carlo_within_two_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let z = random_zonotope(&mut rng, 2, 5, 2.0);
        let vol = z.volume().unwrap();
        assert!(vol > 1.0, "test needs a non-degenerate zonotope");

        // Facet half-widths along each generator normal give an exact
        // membership test for the 2-D case.
        let mut normals: Vec<(f64, f64, f64)> = Vec::new();
        for j in 0..z.num_generators() {
            let (gx, gy) = (z.generator()[(0, j)], z.generator()[(1, j)]);
            let (nx, ny) = (-gy, gx);
            if nx == 0.0 && ny == 0.0 {
                continue;
            }
            let mut width = 0.0;
            for k in 0..z.num_generators() {
                width += (nx * z.generator()[(0, k)] + ny * z.generator()[(1, k)]).abs();
            }
            normals.push((nx, ny, width));
        }
        let radii = z.box_radii();
        let (cx, cy) = (z.center()[0], z.center()[1]);
        let mut hits = 0usize;
        let total = 1_000_000usize;
        for _ in 0..total {
            let px = cx + rng.random_range(-radii[0]..=radii[0]);
            let py = cy + rng.random_range(-radii[1]..=radii[1]);
            let inside = normals
                .iter()
                .all(|&(nx, ny, w)| (nx * (px - cx) + ny * (py - cy)).abs() <= w);
            if inside {
                hits += 1;
            }
        }
        let box_area = 4.0 * radii[0] * radii[1];
        let estimate = box_area * hits as f64 / total as f64;
        assert!(
            (estimate - vol).abs() <= 0.02 * vol,
            "monte carlo {estimate} vs exact {vol}"
        );
    }

    #[test]
    fn volume_rejects_caps() {
        let z5 = Zonotope::new(DVector::zeros(5), DMatrix::identity(5, 5)).unwrap();
        assert!(matches!(z5.volume(), Err(Error::InvalidArgument(_))));
        let wide = Zonotope::new(DVector::zeros(2), DMatrix::zeros(2, 25)).unwrap();
        assert!(matches!(wide.volume(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn parallelotope_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            Parallelotope::new(vec2(0.0, 0.0), m),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn parallelotope_inverse_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let p = Parallelotope::new(vec2(1.0, -1.0), m.clone()).unwrap();
        let eye = p.matrix() * p.inverse();
        assert_relative_eq!(eye, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_eq!(p.as_zonotope().generator(), &m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_minkowski_support_additivity(
            seed in 0u64..1000,
            n in 1usize..=3,
            px in 0usize..=5,
            py in 0usize..=5,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zx = random_zonotope(&mut rng, n, px, 3.0);
            let zy = random_zonotope(&mut rng, n, py, 3.0);
            let sum = zx.minkowski(&zy).unwrap();
            for _ in 0..8 {
                let d = random_direction(&mut rng, n);
                prop_assert!((sum.support(&d) - zx.support(&d) - zy.support(&d)).abs() <= 1e-9);
            }
        }

        #[test]
        fn prop_translate_minkowski_commute(seed in 0u64..1000, n in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zx = random_zonotope(&mut rng, n, 3, 2.0);
            let zy = random_zonotope(&mut rng, n, 2, 2.0);
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
            let lhs = zx.translate(&v).unwrap().minkowski(&zy).unwrap();
            let rhs = zx.minkowski(&zy.translate(&v).unwrap()).unwrap();
            for _ in 0..8 {
                let d = random_direction(&mut rng, n);
                prop_assert!((lhs.support(&d) - rhs.support(&d)).abs() <= 1e-9);
            }
        }

        #[test]
        fn prop_minkowski_diag_equivalent(seed in 0u64..1000, n in 1usize..=3, extra in 0usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zx = random_diag_leading(&mut rng, n, extra);
            let zy = random_diag_leading(&mut rng, n, 2);
            let fast = zx.minkowski_diag(&zy).unwrap();
            let full = zx.minkowski(&zy).unwrap();
            for _ in 0..8 {
                let d = random_direction(&mut rng, n);
                prop_assert!((fast.support(&d) - full.support(&d)).abs() <= 1e-9);
            }
        }
    }
}
