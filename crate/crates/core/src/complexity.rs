//! Diversity, ubiquity, the method of reflections, the Economic Complexity
//! Index and the Fitness/Complexity fixed point.
//!
//! Everything here takes a pruned region × industry matrix (no all-zero rows
//! or columns). Binary and weighted matrices go through the same sums, so
//! for RLQ or WM input diversity and ubiquity are weighted degrees.
//!
//! The ECI is the second eigenvector of the row-stochastic region matrix
//!
//! ```text
//! R[r, r'] = Σ_i M[r, i] M[r', i] / (k_r k_i)
//! ```
//!
//! Its spectrum is real because `R = D_r^{-1/2} S D_r^{1/2}` with
//! `S = A Aᵀ`, `A = D_r^{-1/2} M D_i^{-1/2}` symmetric positive
//! semidefinite. Both solver paths work on `S`: a full symmetric
//! eigendecomposition for small problems, power iteration with the top
//! eigenvector `√k_r` deflated for large ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Strategy;

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors {
    pub diversity: Vec<f64>,
    pub ubiquity: Vec<f64>,
}

/// Row and column sums. Fails if any row or column is empty.
pub fn degrees(m: &DMatrix<f64>) -> Result<DegreeVectors> {
    let diversity: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
    let ubiquity: Vec<f64> = m.column_iter().map(|c| c.sum()).collect();
    if m.is_empty() || diversity.iter().chain(&ubiquity).any(|&d| !(d > 0.0)) {
        return Err(Error::Unpruned);
    }
    Ok(DegreeVectors { diversity, ubiquity })
}

/// Region and industry iterates `k_{r,N}`, `k_{i,N}` for `N = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionsTrace {
    pub region: Vec<Vec<f64>>,
    pub industry: Vec<Vec<f64>>,
}

impl ReflectionsTrace {
    pub fn region_at(&self, n: usize) -> &[f64] {
        &self.region[n]
    }
}

/// Alternating averages
/// `k_{r,N} = Σ_i M[r,i] k_{i,N-1} / k_{r,0}` and
/// `k_{i,N} = Σ_r M[r,i] k_{r,N-1} / k_{i,0}`.
/// Two steps compose into `k_{r,N} = Σ_{r'} R[r,r'] k_{r',N-2}`.
pub fn method_of_reflections(m: &DMatrix<f64>, n_max: usize) -> Result<ReflectionsTrace> {
    let deg = degrees(m)?;
    let mut region = vec![deg.diversity.clone()];
    let mut industry = vec![deg.ubiquity.clone()];
    for n in 1..=n_max {
        let prev_i = DVector::from_column_slice(&industry[n - 1]);
        let prev_r = DVector::from_column_slice(&region[n - 1]);
        let kr: Vec<f64> = (m * prev_i).iter().zip(&deg.diversity).map(|(s, k)| s / k).collect();
        let ki: Vec<f64> = (m.tr_mul(&prev_r)).iter().zip(&deg.ubiquity).map(|(s, k)| s / k).collect();
        region.push(kr);
        industry.push(ki);
    }
    Ok(ReflectionsTrace { region, industry })
}

/// The region-side matrix `R` written out entry by entry.
pub fn region_transition(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let deg = degrees(m)?;
    let nr = m.nrows();
    Ok(DMatrix::from_fn(nr, nr, |r, rp| {
        (0..m.ncols())
            .map(|i| m[(r, i)] * m[(rp, i)] / (deg.diversity[r] * deg.ubiquity[i]))
            .sum()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Eci,
    Fi,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Eci => "eci",
            IndexKind::Fi => "fi",
        }
    }
}

impl std::str::FromStr for IndexKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eci" => Ok(IndexKind::Eci),
            "fi" | "fitness" => Ok(IndexKind::Fi),
            _ => Err(Error::InvalidParameter(format!("unknown index {s:?} (expected eci or fi)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    DenseEigen,
    PowerIteration,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityScores {
    pub index: IndexKind,
    pub strategy: Option<Strategy>,
    pub year: Option<i32>,
    pub region_scores: Vec<f64>,
    pub industry_scores: Vec<f64>,
    pub convergence: Convergence,
    pub solver: SolverPath,
    /// Second-largest eigenvalue of the region matrix (ECI only).
    pub second_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenSolver {
    /// Dense eigendecomposition up to `dense_limit` rows, power iteration above.
    #[default]
    Auto,
    Dense,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EciOptions {
    pub solver: EigenSolver,
    pub dense_limit: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Minimum separation between eigenvalues one and two, and two and three.
    pub gap_tol: f64,
}

impl Default for EciOptions {
    fn default() -> Self {
        EciOptions { solver: EigenSolver::Auto, dense_limit: 2000, tol: 1e-10, max_iter: 10_000, gap_tol: 1e-9 }
    }
}

/// Mean-zero, population-sd-one copy of `v`.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Numeric("cannot standardize a constant vector".into()));
    }
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

/// Flip `v` so that it co-varies nonnegatively with `key`. Exact ties fall
/// back to making the first nonzero entry positive.
fn orient(v: &mut [f64], key: &[f64]) {
    let c = covariance(v, key);
    let flip = if c != 0.0 {
        c < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Row-compressed sparse copy of a dense matrix for the power path.
struct SparseRows {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    ncols: usize,
}

impl SparseRows {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseRows { row_ptr, cols, vals, ncols: m.ncols() }
    }

    fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            y[r] = self.cols[span.clone()].iter().zip(&self.vals[span]).map(|(&c, v)| v * x[c]).sum();
        }
    }

    fn tr_mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            for (&c, v) in self.cols[span.clone()].iter().zip(&self.vals[span]) {
                y[c] += v * x[r];
            }
        }
    }

    fn transpose(&self) -> SparseRows {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for r in 0..self.nrows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                cols[next[c]] = r;
                vals[next[c]] = self.vals[k];
                next[c] += 1;
            }
        }
        SparseRows { row_ptr, cols, vals, ncols: self.nrows() }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Second eigenpair of the symmetric PSD operator `A Aᵀ` where
/// `A = D_row^{-1/2} M D_col^{-1/2}`, returned as an eigenvector of the
/// corresponding stochastic matrix (i.e. rescaled by `D_row^{-1/2}`).
struct SecondEigen {
    lambda1: f64,
    lambda2: f64,
    lambda3: Option<f64>,
    vector: Vec<f64>,
    iterations: usize,
    residual: f64,
    path: SolverPath,
}

fn scaled(m: &DMatrix<f64>, row_deg: &[f64], col_deg: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] / (row_deg[r] * col_deg[c]).sqrt())
}

fn second_dense(m: &DMatrix<f64>, row_deg: &[f64], col_deg: &[f64]) -> Result<SecondEigen> {
    let a = scaled(m, row_deg, col_deg);
    let s = &a * a.transpose();
    let eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let lambda = |k: usize| order.get(k).map(|&j| eig.eigenvalues[j]);
    let u = eig.eigenvectors.column(order[1]).into_owned();
    let residual = (&s * &u - &u * eig.eigenvalues[order[1]]).norm();
    let vector = u.iter().zip(row_deg).map(|(x, k)| x / k.sqrt()).collect();
    Ok(SecondEigen {
        lambda1: lambda(0).unwrap_or(f64::NAN),
        lambda2: lambda(1).unwrap_or(f64::NAN),
        lambda3: lambda(2),
        vector,
        iterations: 0,
        residual,
        path: SolverPath::DenseEigen,
    })
}

fn second_power(
    m: &SparseRows,
    row_deg: &[f64],
    col_deg: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SecondEigen> {
    let n = m.nrows();
    let inv_sqrt_row: Vec<f64> = row_deg.iter().map(|k| 1.0 / k.sqrt()).collect();
    let inv_col: Vec<f64> = col_deg.iter().map(|k| 1.0 / k).collect();
    let mut tmp_row = vec![0.0; n];
    let mut tmp_col = vec![0.0; m.ncols];
    let mut apply = |x: &[f64], y: &mut [f64]| {
        for r in 0..n {
            tmp_row[r] = x[r] * inv_sqrt_row[r];
        }
        m.tr_mul(&tmp_row, &mut tmp_col);
        tmp_col.iter_mut().zip(&inv_col).for_each(|(v, k)| *v *= k);
        m.mul(&tmp_col, y);
        y.iter_mut().zip(&inv_sqrt_row).for_each(|(v, k)| *v *= k);
    };

    let top: Vec<f64> = {
        let s: Vec<f64> = row_deg.iter().map(|k| k.sqrt()).collect();
        let nrm = norm(&s);
        s.into_iter().map(|v| v / nrm).collect()
    };
    let deflate = |x: &mut [f64]| {
        let p = dot(x, &top);
        x.iter_mut().zip(&top).for_each(|(v, t)| *v -= p * t);
    };

    let mut y = vec![0.0; n];
    apply(&top, &mut y);
    let lambda1 = dot(&top, &y);

    // fixed, non-symmetric start vector
    let mut x: Vec<f64> = (0..n).map(|j| ((j as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5).collect();
    deflate(&mut x);
    let nrm = norm(&x);
    if !(nrm > 0.0) {
        return Err(Error::DegenerateSpectrum("power iteration start vector vanished".into()));
    }
    x.iter_mut().for_each(|v| *v /= nrm);

    let mut lambda2 = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        apply(&x, &mut y);
        deflate(&mut y);
        lambda2 = dot(&x, &y);
        let ny = norm(&y);
        if !(ny > 0.0) {
            return Err(Error::DegenerateSpectrum("second eigenvalue is zero".into()));
        }
        y.iter_mut().for_each(|v| *v /= ny);
        residual = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut x, &mut y);
        if residual < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(Error::DegenerateSpectrum(format!(
            "power iteration stalled after {iterations} iterations (residual {residual:.3e}); \
             second eigenvalue is not well separated"
        )));
    }
    let vector = x.iter().zip(&inv_sqrt_row).map(|(a, k)| a * k).collect();
    Ok(SecondEigen { lambda1, lambda2, lambda3: None, vector, iterations, residual, path: SolverPath::PowerIteration })
}

fn check_gaps(side: &str, e: &SecondEigen, gap_tol: f64) -> Result<()> {
    if !(e.lambda1 - e.lambda2 > gap_tol) {
        return Err(Error::DegenerateSpectrum(format!(
            "{side}: leading eigenvalue {:.12} is repeated ({:.12}); the network is disconnected",
            e.lambda1, e.lambda2
        )));
    }
    if let Some(l3) = e.lambda3 {
        if !(e.lambda2 - l3 > gap_tol) {
            return Err(Error::DegenerateSpectrum(format!(
                "{side}: second eigenvalue {:.12} is not separated from the third {:.12}",
                e.lambda2, l3
            )));
        }
    }
    Ok(())
}

fn second_eigen(
    m: &DMatrix<f64>,
    sparse: impl FnOnce() -> SparseRows,
    row_deg: &[f64],
    col_deg: &[f64],
    opts: &EciOptions,
) -> Result<SecondEigen> {
    let dense = match opts.solver {
        EigenSolver::Dense => true,
        EigenSolver::Power => false,
        EigenSolver::Auto => m.nrows() <= opts.dense_limit,
    };
    if dense {
        second_dense(m, row_deg, col_deg)
    } else {
        second_power(&sparse(), row_deg, col_deg, opts.tol, opts.max_iter)
    }
}

/// Economic Complexity Index for regions and industries.
///
/// Region scores are the standardized second eigenvector of `R`, oriented to
/// co-vary nonnegatively with diversity. Industry scores come from the same
/// construction on the transpose, oriented to co-vary nonnegatively with
/// minus ubiquity.
pub fn eci(m: &DMatrix<f64>, opts: &EciOptions) -> Result<ComplexityScores> {
    if m.nrows() < 2 || m.ncols() < 2 {
        return Err(Error::DegenerateNetwork(format!(
            "ECI needs at least 2 regions and 2 industries, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let deg = degrees(m)?;
    let mt = m.transpose();

    let region = second_eigen(m, || SparseRows::from_dense(m), &deg.diversity, &deg.ubiquity, opts)?;
    check_gaps("region matrix", &region, opts.gap_tol)?;
    let industry = second_eigen(
        &mt,
        || SparseRows::from_dense(m).transpose(),
        &deg.ubiquity,
        &deg.diversity,
        opts,
    )?;
    check_gaps("industry matrix", &industry, opts.gap_tol)?;

    let mut region_scores = standardize(&region.vector)?;
    orient(&mut region_scores, &deg.diversity);
    let mut industry_scores = standardize(&industry.vector)?;
    let neg_ubiquity: Vec<f64> = deg.ubiquity.iter().map(|u| -u).collect();
    orient(&mut industry_scores, &neg_ubiquity);

    Ok(ComplexityScores {
        index: IndexKind::Eci,
        strategy: None,
        year: None,
        region_scores,
        industry_scores,
        convergence: Convergence {
            iterations: region.iterations + industry.iterations,
            residual: region.residual.max(industry.residual),
            converged: true,
        },
        solver: region.path,
        second_eigenvalue: Some(region.lambda2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessOptions {
    pub max_iter: usize,
    /// Stop once the largest relative change of any F or Q entry drops below this.
    pub tol: f64,
}

impl Default for FitnessOptions {
    fn default() -> Self {
        FitnessOptions { max_iter: 1000, tol: 1e-8 }
    }
}

/// Fitness/Complexity fixed point.
pub fn fitness(m: &DMatrix<f64>, opts: &FitnessOptions) -> Result<ComplexityScores> {
    fitness_with_observer(m, opts, |_, _, _| {})
}

/// [`fitness`] with a callback receiving `(iteration, F, Q)` after each
/// normalized step.
pub fn fitness_with_observer<F>(m: &DMatrix<f64>, opts: &FitnessOptions, mut observer: F) -> Result<ComplexityScores>
where
    F: FnMut(usize, &[f64], &[f64]),
{
    if opts.max_iter < 1 || !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fitness needs max_iter ≥ 1 and tol > 0 (got {}, {})",
            opts.max_iter, opts.tol
        )));
    }
    degrees(m)?;
    let (nr, ni) = m.shape();
    let sparse = SparseRows::from_dense(m);
    let mut f = vec![1.0; nr];
    let mut q = vec![1.0; ni];
    let mut f_new = vec![0.0; nr];
    let mut q_new = vec![0.0; ni];
    let mut inv_f = vec![0.0; nr];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        sparse.mul(&q, &mut f_new);
        for (inv, fr) in inv_f.iter_mut().zip(&f) {
            *inv = 1.0 / fr;
        }
        sparse.tr_mul(&inv_f, &mut q_new);
        q_new.iter_mut().for_each(|v| *v = 1.0 / *v);

        let mf = f_new.iter().sum::<f64>() / nr as f64;
        let mq = q_new.iter().sum::<f64>() / ni as f64;
        f_new.iter_mut().for_each(|v| *v /= mf);
        q_new.iter_mut().for_each(|v| *v /= mq);

        if f_new.iter().chain(&q_new).any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Numeric(format!(
                "fitness iteration {iterations} produced a non-finite or nonpositive value"
            )));
        }
        residual = f_new
            .iter()
            .zip(&f)
            .chain(q_new.iter().zip(&q))
            .map(|(new, old)| ((new - old) / old).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut f, &mut f_new);
        std::mem::swap(&mut q, &mut q_new);
        observer(iterations, &f, &q);
        if residual < opts.tol {
            break;
        }
    }
    let converged = residual < opts.tol;
    if !converged {
        log::warn!(
            "fitness did not converge in {} iterations (relative change {:.3e} ≥ {:.1e})",
            iterations,
            residual,
            opts.tol
        );
    }
    Ok(ComplexityScores {
        index: IndexKind::Fi,
        strategy: None,
        year: None,
        region_scores: f,
        industry_scores: q,
        convergence: Convergence { iterations, residual, converged },
        solver: SolverPath::FixedPoint,
        second_eigenvalue: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    fn lower_tri(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |r, c| if c <= r { 1.0 } else { 0.0 })
    }

    #[test]
    fn uniform_degrees() {
        let d = degrees(&DMatrix::from_element(3, 4, 1.0)).unwrap();
        assert_eq!(d.diversity, vec![4.0; 3]);
        assert_eq!(d.ubiquity, vec![3.0; 4]);
    }

    #[test]
    fn triangular_degrees() {
        let d = degrees(&lower_tri(3)).unwrap();
        assert_eq!(d.diversity, vec![1.0, 2.0, 3.0]);
        assert_eq!(d.ubiquity, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn unpruned_rejected() {
        let m = mat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(degrees(&m), Err(Error::Unpruned)));
        assert!(matches!(eci(&m, &EciOptions::default()), Err(Error::Unpruned)));
        assert!(matches!(fitness(&m, &FitnessOptions::default()), Err(Error::Unpruned)));
    }

    #[test]
    fn reflections_base_case_and_uniform() {
        let m = mat(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let t = method_of_reflections(&m, 0).unwrap();
        let d = degrees(&m).unwrap();
        assert_eq!(t.region, vec![d.diversity]);
        assert_eq!(t.industry, vec![d.ubiquity]);

        let ones = DMatrix::from_element(4, 3, 1.0);
        let t = method_of_reflections(&ones, 6).unwrap();
        for k in &t.region {
            assert!(k.iter().all(|v| *v == k[0]));
        }
    }

    #[test]
    fn reflections_match_transition_matrix() {
        let m = mat(3, 4, &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let t = method_of_reflections(&m, 4).unwrap();
        let r = region_transition(&m).unwrap();
        for n in [2, 4] {
            let expect = &r * DVector::from_column_slice(&t.region[n - 2]);
            for (a, b) in expect.iter().zip(&t.region[n]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        for row in r.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_regions_give_plus_minus_one() {
        let m = mat(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let s = eci(&m, &EciOptions::default()).unwrap();
        let mut r = s.region_scores.clone();
        r.sort_by(f64::total_cmp);
        assert!((r[0] + 1.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_small_and_disconnected() {
        let one_row = mat(1, 2, &[1.0, 1.0]);
        assert!(matches!(eci(&one_row, &EciOptions::default()), Err(Error::DegenerateNetwork(_))));
        let block = mat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(eci(&block, &EciOptions::default()), Err(Error::DegenerateSpectrum(_))));
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert!(matches!(eci(&ones, &EciOptions::default()), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn nested_eci_orders_by_diversity() {
        let s = eci(&lower_tri(6), &EciOptions::default()).unwrap();
        assert!(s.region_scores.windows(2).all(|w| w[0] < w[1]));
        // rarest industry (last column) is most complex
        assert!(s.industry_scores.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn power_path_matches_dense() {
        let m = mat(
            5,
            4,
            &[1., 1., 0., 0., 1., 1., 1., 0., 0., 1., 0., 1., 1., 0., 0., 0., 1., 1., 1., 1.],
        );
        let dense = eci(&m, &EciOptions { solver: EigenSolver::Dense, ..Default::default() }).unwrap();
        let power = eci(&m, &EciOptions { solver: EigenSolver::Power, ..Default::default() }).unwrap();
        assert_eq!(power.solver, SolverPath::PowerIteration);
        for (a, b) in dense.region_scores.iter().zip(&power.region_scores) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        for (a, b) in dense.industry_scores.iter().zip(&power.industry_scores) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        assert!((dense.second_eigenvalue.unwrap() - power.second_eigenvalue.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fitness_uniform_fixed_point() {
        let ones = DMatrix::from_element(3, 4, 1.0);
        let mut seen = 0;
        let s = fitness_with_observer(&ones, &FitnessOptions::default(), |_, f, q| {
            seen += 1;
            assert!(f.iter().chain(q).all(|v| *v == 1.0));
        })
        .unwrap();
        assert_eq!(seen, 1);
        assert!(s.convergence.converged);
    }

    #[test]
    fn fitness_nested_is_increasing() {
        let s = fitness(&lower_tri(8), &FitnessOptions { tol: 1e-12, max_iter: 1000 }).unwrap();
        assert!(s.region_scores.windows(2).all(|w| w[0] < w[1]));
        assert!(s.industry_scores.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fitness_rejects_bad_options() {
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!(fitness(&ones, &FitnessOptions { max_iter: 0, tol: 1e-8 }).is_err());
        assert!(fitness(&ones, &FitnessOptions { max_iter: 10, tol: 0.0 }).is_err());
    }

    #[test]
    fn non_convergence_is_reported_not_fatal() {
        let s = fitness(&lower_tri(5), &FitnessOptions { max_iter: 3, tol: 1e-14 }).unwrap();
        assert!(!s.convergence.converged);
        assert_eq!(s.convergence.iterations, 3);
    }
}
