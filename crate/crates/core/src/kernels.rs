//! Kernels of hyperbolic type on finite sets.
//!
//! A symmetric kernel `β` with unit diagonal is of hyperbolic type when
//! `Σ c_i c_j β(x_i, x_j) ≤ (Σ c_k β(x_k, x_0))²` for every choice of points and weights.
//! For a fixed basepoint `x₀` this says exactly that
//! `N(x, y) = β(x, x₀) β(y, x₀) − β(x, y)` is positive semidefinite, and the Gram factor
//! `h` of `N` reconstructs the points `f(x) = β(x₀, x) ⊕ h(x)` of a hyperboloid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{centering, SortedEigen};
use crate::minkowski::{bilinear_form, horosphere_point, HyperbolicPoint, MinkowskiVector, ModelTag};

/// Default relative tolerance for positive-semidefiniteness tests.
pub const TOL_KERNEL: f64 = 1e-9;

/// Absolute tolerance on symmetry of input matrices.
pub const TOL_SYMMETRY: f64 = 1e-12;

/// Candidate kernel of hyperbolic type on a labelled finite set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    labels: Vec<String>,
    entries: DMatrix<f64>,
}

fn check_square(labels: &[String], entries: &DMatrix<f64>) -> Result<()> {
    if !entries.is_square() {
        return Err(Error::InvalidInput(format!(
            "kernel matrix is {}x{}, not square",
            entries.nrows(),
            entries.ncols()
        )));
    }
    if labels.len() != entries.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for a {}x{} matrix",
            labels.len(),
            entries.nrows(),
            entries.ncols()
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(Error::InvalidInput(format!("duplicate label {dup:?}")));
    }
    if entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite kernel entry".into()));
    }
    Ok(())
}

fn is_symmetric(entries: &DMatrix<f64>) -> Option<(usize, usize)> {
    let m = entries.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let (a, b) = (entries[(i, j)], entries[(j, i)]);
            if (a - b).abs() > TOL_SYMMETRY * a.abs().max(b.abs()).max(1.0) {
                return Some((i, j));
            }
        }
    }
    None
}

pub(crate) fn default_labels(m: usize, prefix: &str) -> Vec<String> {
    (0..m).map(|i| format!("{prefix}{i}")).collect()
}

impl KernelMatrix {
    /// Checks shape, label uniqueness, finiteness and symmetry, then symmetrizes exactly.
    pub fn new(labels: Vec<String>, entries: DMatrix<f64>) -> Result<Self> {
        check_square(&labels, &entries)?;
        if let Some((i, j)) = is_symmetric(&entries) {
            return Err(Error::InvalidInput(format!(
                "kernel is not symmetric at ({i}, {j}): {} vs {}",
                entries[(i, j)],
                entries[(j, i)]
            )));
        }
        let entries = (&entries + entries.transpose()) * 0.5;
        Ok(Self { labels, entries })
    }

    /// Labels `x0, x1, …`.
    pub fn unlabeled(entries: DMatrix<f64>) -> Result<Self> {
        let m = entries.nrows();
        Self::new(default_labels(m, "x"), entries)
    }

    /// The constant kernel `β ≡ 1`.
    pub fn constant(labels: Vec<String>) -> Result<Self> {
        let m = labels.len();
        Self::new(labels, DMatrix::from_element(m, m, 1.0))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.len()).all(|i| (self.entries[(i, i)] - 1.0).abs() <= TOL_SYMMETRY)
    }

    pub fn entries_at_least_one(&self, tol: f64) -> bool {
        self.entries.iter().all(|&x| x >= 1.0 - tol)
    }

    /// `N_{ij} = K_{i,b} K_{j,b} − K_{ij}`.
    pub fn positive_part(&self, basepoint: usize) -> DMatrix<f64> {
        let m = self.len();
        let col = self.entries.column(basepoint);
        DMatrix::from_fn(m, m, |i, j| col[i] * col[j] - self.entries[(i, j)])
    }
}

/// `β_{ij} = B(p_i, p_j)` for points on one hyperboloid, labelled `p0, p1, …`.
pub fn kernel_from_points(points: &[HyperbolicPoint]) -> Result<KernelMatrix> {
    kernel_from_labeled_points(default_labels(points.len(), "p"), points)
}

pub fn kernel_from_labeled_points(
    labels: Vec<String>,
    points: &[HyperbolicPoint],
) -> Result<KernelMatrix> {
    let m = points.len();
    if labels.len() != m {
        return Err(Error::Usage("one label per point required".into()));
    }
    let mut entries = DMatrix::from_element(m, m, 1.0);
    for i in 0..m {
        for j in (i + 1)..m {
            // reverse Schwarz: B(p, q) ≥ 1 on the upper sheet
            let b = bilinear_form(points[i].vector(), points[j].vector())?.max(1.0);
            entries[(i, j)] = b;
            entries[(j, i)] = b;
        }
    }
    KernelMatrix::new(labels, entries)
}

/// Which basepoints `x₀` the validator sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasepointPolicy {
    OneBasepoint(usize),
    AllBasepoints,
}

impl Default for BasepointPolicy {
    fn default() -> Self {
        BasepointPolicy::OneBasepoint(0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasepointReport {
    pub basepoint: usize,
    pub min_eigenvalue: f64,
    /// Spectral norm of `N`.
    pub norm: f64,
    pub relative_min_eigenvalue: f64,
    pub passed: bool,
}

/// Coefficients `c` violating the defining inequality at `basepoint`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub basepoint: usize,
    pub coefficients: Vec<f64>,
    /// `Σ c_i c_j β(x_i, x_j)`.
    pub lhs: f64,
    /// `(Σ c_k β(x_k, x₀))²`.
    pub rhs: f64,
}

impl Witness {
    pub fn violates(&self) -> bool {
        self.lhs > self.rhs
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KhtReport {
    pub valid: bool,
    pub unit_diagonal: bool,
    pub entries_at_least_one: bool,
    /// Most negative eigenvalue of `N` over the swept basepoints.
    pub min_eigenvalue: f64,
    /// Smallest `λ_min(N) / ‖N‖₂` over the swept basepoints.
    pub relative_min_eigenvalue: f64,
    pub tolerance: f64,
    pub per_basepoint: Vec<BasepointReport>,
    pub witness: Option<Witness>,
}

/// Evaluates both sides of the defining inequality for weights `c` at `basepoint`.
pub fn kht_inequality_sides(k: &KernelMatrix, basepoint: usize, c: &[f64]) -> (f64, f64) {
    let c = DVector::from_column_slice(c);
    let lhs = (c.transpose() * k.entries() * &c)[0];
    let rhs = c.dot(&k.entries().column(basepoint)).powi(2);
    (lhs, rhs)
}

fn check_basepoint(k: &KernelMatrix, basepoint: usize) -> Result<()> {
    if basepoint >= k.len() {
        return Err(Error::Usage(format!(
            "basepoint {basepoint} out of range for {} points",
            k.len()
        )));
    }
    Ok(())
}

struct BasepointEval {
    report: BasepointReport,
    eigenvector: DVector<f64>,
}

fn eval_basepoint(k: &KernelMatrix, basepoint: usize, tol: f64) -> BasepointEval {
    let eig = SortedEigen::new(&k.positive_part(basepoint));
    let min = eig.min();
    let norm = eig.norm();
    let relative = if norm > 0.0 { min / norm } else { 0.0 };
    BasepointEval {
        report: BasepointReport {
            basepoint,
            min_eigenvalue: min,
            norm,
            relative_min_eigenvalue: relative,
            passed: min >= -tol * norm,
        },
        eigenvector: eig.vector(0),
    }
}

/// Tests positive semidefiniteness of `N` at the basepoints selected by `policy`.
pub fn validate_kht(k: &KernelMatrix, policy: BasepointPolicy, tol: f64) -> Result<KhtReport> {
    if k.is_empty() {
        return Err(Error::InvalidInput("empty kernel".into()));
    }
    let basepoints: Vec<usize> = match policy {
        BasepointPolicy::OneBasepoint(b) => {
            check_basepoint(k, b)?;
            vec![b]
        }
        BasepointPolicy::AllBasepoints => (0..k.len()).collect(),
    };
    let evals: Vec<BasepointEval> = basepoints
        .par_iter()
        .map(|&b| eval_basepoint(k, b, tol))
        .collect();

    let unit_diagonal = k.has_unit_diagonal();
    let at_least_one = k.entries_at_least_one(tol);
    let worst = evals
        .iter()
        .min_by(|a, b| {
            a.report
                .relative_min_eigenvalue
                .total_cmp(&b.report.relative_min_eigenvalue)
        })
        .expect("at least one basepoint");
    let spectral_ok = evals.iter().all(|e| e.report.passed);
    let witness = (!spectral_ok).then(|| {
        let c: Vec<f64> = worst.eigenvector.iter().copied().collect();
        let (lhs, rhs) = kht_inequality_sides(k, worst.report.basepoint, &c);
        Witness {
            basepoint: worst.report.basepoint,
            coefficients: c,
            lhs,
            rhs,
        }
    });
    Ok(KhtReport {
        valid: unit_diagonal && at_least_one && spectral_ok,
        unit_diagonal,
        entries_at_least_one: at_least_one,
        min_eigenvalue: evals
            .iter()
            .map(|e| e.report.min_eigenvalue)
            .fold(f64::INFINITY, f64::min),
        relative_min_eigenvalue: worst.report.relative_min_eigenvalue,
        tolerance: tol,
        per_basepoint: evals.into_iter().map(|e| e.report).collect(),
        witness,
    })
}

/// Points on a hyperboloid reconstructing a kernel through `cosh d = β`.
#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    pub labels: Vec<String>,
    /// First-model points of `H^rank`.
    pub points: Vec<HyperbolicPoint>,
    pub basepoint_index: usize,
    pub rank: usize,
    /// `max_{i,j} |B(f_i, f_j) − β_{ij}|`.
    pub residual: f64,
}

/// Rank cutoff for Gram factors: at least `tol`, and above the rounding level of the spectrum.
fn rank_cutoff(tol: f64, m: usize, norm: f64) -> f64 {
    tol.max(100.0 * m as f64 * f64::EPSILON * norm)
}

/// GNS reconstruction at `basepoint`: factor `N = H Hᵀ` and set `f_i = (β_{i,b}, h_i)`.
pub fn gns_embed(k: &KernelMatrix, basepoint: usize, tol: f64) -> Result<EmbeddingResult> {
    check_basepoint(k, basepoint)?;
    if !k.has_unit_diagonal() {
        return Err(Error::InvalidInput("kernel diagonal must be identically 1".into()));
    }
    let m = k.len();
    let eig = SortedEigen::new(&k.positive_part(basepoint));
    let norm = eig.norm();
    if eig.min() < -tol * norm {
        return Err(Error::NotAKernel {
            basepoint,
            min_eigenvalue: eig.min(),
            witness: eig.vector(0).iter().copied().collect(),
        });
    }
    let mut h = eig.factor_above(rank_cutoff(tol, m, norm));
    let rank = h.ncols();
    // N has a zero row at the basepoint, so h(x₀) = 0.
    h.row_mut(basepoint).fill(0.0);
    let model = ModelTag::First { k: rank };
    let mut points = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = DVector::zeros(rank + 1);
        c[0] = k.get(i, basepoint);
        c.rows_mut(1, rank).copy_from(&h.row(i).transpose());
        if i == basepoint {
            c[0] = 1.0;
            points.push(HyperbolicPoint::from_raw(model, c));
        } else {
            // B(f_i, f_i) = 1 holds up to the dropped spectrum; only fall back to rescaling
            // when that is visibly violated
            let v = MinkowskiVector::new(model, c)?;
            let p = match HyperbolicPoint::new(v.clone()) {
                Ok(p) => p,
                Err(_) => HyperbolicPoint::renormalize(v)?,
            };
            points.push(p);
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..m {
        for j in i..m {
            let b = bilinear_form(points[i].vector(), points[j].vector())?;
            residual = residual.max((b - k.get(i, j)).abs());
        }
    }
    Ok(EmbeddingResult {
        labels: k.labels().to_vec(),
        points,
        basepoint_index: basepoint,
        rank,
        residual,
    })
}

/// Entrywise power `β^t` for `t > 0`.
pub fn power_kernel(k: &KernelMatrix, t: f64) -> Result<KernelMatrix> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Usage(format!(
            "exponent must be positive and finite, got {t}; use constant_kernel for t = 0"
        )));
    }
    if k.entries().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidInput(
            "kernel has negative entries; powers are undefined".into(),
        ));
    }
    KernelMatrix::new(k.labels().to_vec(), k.entries().map(|x| x.powf(t)))
}

/// `β⁰ ≡ 1` on the given labels.
pub fn constant_kernel(labels: Vec<String>) -> Result<KernelMatrix> {
    KernelMatrix::constant(labels)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CndReport {
    pub valid: bool,
    pub symmetric: bool,
    pub zero_diagonal: bool,
    /// Smallest eigenvalue of `−PψP`.
    pub min_eigenvalue: f64,
    pub relative_min_eigenvalue: f64,
    /// Weights with `Σ c = 0` and `cᵀψc > 0` when the test fails.
    pub witness: Option<Vec<f64>>,
}

/// Conditionally negative type test via positive semidefiniteness of `−PψP`,
/// `P = I − (1/m) 𝟙𝟙ᵀ`.
pub fn check_cnd(psi: &DMatrix<f64>, tol: f64) -> Result<CndReport> {
    if !psi.is_square() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    let m = psi.nrows();
    let symmetric = is_symmetric(psi).is_none();
    let zero_diagonal = (0..m).all(|i| psi[(i, i)].abs() <= TOL_SYMMETRY);
    let p = centering(m);
    let centered = -(&p * psi * &p);
    let eig = SortedEigen::new(&centered);
    let (min, norm) = (eig.min(), eig.norm());
    let spectral_ok = min >= -tol * norm;
    let witness = (!spectral_ok).then(|| {
        let c = &p * eig.vector(0);
        c.iter().copied().collect()
    });
    Ok(CndReport {
        valid: symmetric && zero_diagonal && spectral_ok,
        symmetric,
        zero_diagonal,
        min_eigenvalue: min,
        relative_min_eigenvalue: if norm > 0.0 { min / norm } else { 0.0 },
        witness,
    })
}

/// Kernel of conditionally negative type: symmetric, zero diagonal, `cᵀψc ≤ 0` when `Σc = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CndKernel {
    labels: Vec<String>,
    entries: DMatrix<f64>,
}

impl CndKernel {
    pub fn new(labels: Vec<String>, entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_square(&labels, &entries)?;
        let report = check_cnd(&entries, tol)?;
        if !report.valid {
            return Err(Error::InvalidInput(format!(
                "not of conditionally negative type (symmetric: {}, zero diagonal: {}, λ_min = {:.3e})",
                report.symmetric, report.zero_diagonal, report.min_eigenvalue
            )));
        }
        let entries = (&entries + entries.transpose()) * 0.5;
        Ok(Self { labels, entries })
    }

    /// `ψ_{ij} = ½‖u_i − u_j‖²`.
    pub fn from_euclidean(points: &[Vec<f64>]) -> Result<Self> {
        let m = points.len();
        let entries = DMatrix::from_fn(m, m, |i, j| {
            0.5 * points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        });
        Self::new(default_labels(m, "u"), entries, TOL_KERNEL)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `β = 1 + ψ`.
pub fn cnd_to_kht(psi: &CndKernel) -> Result<KernelMatrix> {
    KernelMatrix::new(psi.labels.clone(), psi.entries.add_scalar(1.0))
}

#[derive(Debug, Clone)]
pub struct KhtToCnd {
    pub psi: DMatrix<f64>,
    /// Whether `β − 1` is of conditionally negative type, i.e. the embedding lies on a horosphere.
    pub horosphere_flag: bool,
    pub report: CndReport,
}

pub fn kht_to_cnd(k: &KernelMatrix, tol: f64) -> Result<KhtToCnd> {
    let psi = k.entries().add_scalar(-1.0);
    let report = check_cnd(&psi, tol)?;
    Ok(KhtToCnd {
        psi,
        horosphere_flag: report.valid,
        report,
    })
}

/// Affine GNS for `ψ` followed by `σ₀`: points on the horosphere `σ₀(E)` with
/// `cosh d(σ₀η_i, σ₀η_j) = 1 + ψ_{ij}`.
pub fn horosphere_embed(psi: &CndKernel) -> Result<Vec<HyperbolicPoint>> {
    let m = psi.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let p = centering(m);
    let gram = -(&p * psi.entries() * &p);
    let eig = SortedEigen::new(&gram);
    let norm = eig.norm();
    if eig.min() < -TOL_KERNEL * norm {
        return Err(Error::InvalidInput("kernel is not conditionally negative".into()));
    }
    let eta = eig.factor_above(rank_cutoff(TOL_KERNEL, m, norm));
    Ok((0..m)
        .map(|i| {
            let v: Vec<f64> = eta.row(i).iter().copied().collect();
            horosphere_point(0.0, &v)
        })
        .collect())
}

/// A kernel on hyperbolic points whose power `β^t` fails validation.
#[derive(Debug, Clone)]
pub struct PowerCounterexample {
    pub seed: u64,
    /// Number of configurations drawn, including the one returned.
    pub trials: usize,
    pub t: f64,
    pub kernel: KernelMatrix,
    pub report: KhtReport,
}

/// Draws configurations of `m` points in `H^k` (coordinates `h` uniform in `[−2, 2]^k`)
/// until `β^t` has an eigenvalue of `N` below `threshold`, checking `N` at basepoint 0.
pub fn search_power_counterexample(
    m: usize,
    k: usize,
    t: f64,
    seed: u64,
    threshold: f64,
    max_trials: usize,
) -> Result<Option<PowerCounterexample>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for trial in 1..=max_trials {
        let points: Vec<HyperbolicPoint> = (0..m)
            .map(|_| {
                let h: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let mut c = vec![(1.0 + h.iter().map(|x| x * x).sum::<f64>()).sqrt()];
                c.extend(h);
                HyperbolicPoint::from_slice(ModelTag::First { k }, &c)
            })
            .collect::<Result<_>>()?;
        let kernel = kernel_from_points(&points)?;
        let report = validate_kht(&power_kernel(&kernel, t)?, BasepointPolicy::default(), 0.0)?;
        if report.min_eigenvalue < threshold {
            return Ok(Some(PowerCounterexample {
                seed,
                trials: trial,
                t,
                kernel,
                report,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(h: &[f64]) -> HyperbolicPoint {
        let nh: f64 = h.iter().map(|x| x * x).sum();
        let mut c = vec![(1.0 + nh).sqrt()];
        c.extend_from_slice(h);
        HyperbolicPoint::from_slice(ModelTag::First { k: h.len() }, &c).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<HyperbolicPoint> {
        (0..m)
            .map(|_| point(&(0..k).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<_>>()))
            .collect()
    }

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn kernel_from_points_examples() {
        let k = kernel_from_points(&[point(&[0.3])]).unwrap();
        assert_eq!(k.entries(), &DMatrix::from_element(1, 1, 1.0));
        let k = kernel_from_points(&[point(&[0.0]), point(&[1f64.sinh()])]).unwrap();
        assert_abs_diff_eq!(k.get(0, 1), 1f64.cosh(), epsilon = 1e-14);
        assert_eq!(k.labels(), &["p0", "p1"]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = kernel_from_points(&random_points(&mut rng, 10, 3)).unwrap();
        let r = validate_kht(&k, BasepointPolicy::default(), TOL_KERNEL).unwrap();
        assert!(r.valid);
        assert!(r.min_eigenvalue >= -1e-10);
    }

    #[test]
    fn constructor_errors() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 1.0]);
        assert!(matches!(KernelMatrix::unlabeled(bad), Err(Error::InvalidInput(_))));
        let rect = DMatrix::from_element(2, 3, 1.0);
        assert!(KernelMatrix::unlabeled(rect).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(KernelMatrix::constant(dup).is_err());
        let nan = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(KernelMatrix::unlabeled(nan).is_err());
    }

    #[test]
    fn validator_examples() {
        let ones = KernelMatrix::constant(default_labels(4, "x")).unwrap();
        let r = validate_kht(&ones, BasepointPolicy::AllBasepoints, TOL_KERNEL).unwrap();
        assert!(r.valid);
        assert_eq!(r.per_basepoint.len(), 4);
        assert_eq!(r.min_eigenvalue, 0.0);

        let half = KernelMatrix::unlabeled(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]))
            .unwrap();
        let r = validate_kht(&half, BasepointPolicy::default(), TOL_KERNEL).unwrap();
        assert!(!r.valid);
        assert!(!r.entries_at_least_one);
        let w = r.witness.unwrap();
        assert!(w.violates());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = kernel_from_points(&random_points(&mut rng, 20, 4)).unwrap();
        let r = validate_kht(&k, BasepointPolicy::AllBasepoints, TOL_KERNEL).unwrap();
        assert!(r.valid, "{r:?}");
        assert!(r.min_eigenvalue >= -1e-10 * r.per_basepoint[0].norm.max(1.0));

        assert!(validate_kht(&k, BasepointPolicy::OneBasepoint(20), TOL_KERNEL).is_err());
    }

    #[test]
    fn non_unit_diagonal_is_reported() {
        let k = KernelMatrix::unlabeled(DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 3.0, 2.0]))
            .unwrap();
        let r = validate_kht(&k, BasepointPolicy::default(), TOL_KERNEL).unwrap();
        assert!(!r.valid);
        assert!(!r.unit_diagonal);
        assert!(gns_embed(&k, 0, TOL_KERNEL).is_err());
    }

    #[test]
    fn gns_small_cases() {
        let one = KernelMatrix::unlabeled(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let e = gns_embed(&one, 0, TOL_KERNEL).unwrap();
        assert_eq!(e.rank, 0);
        assert_eq!(e.points[0].coords().as_slice(), &[1.0]);

        let c = 1f64.cosh();
        let two = KernelMatrix::unlabeled(DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.0]))
            .unwrap();
        let e = gns_embed(&two, 0, TOL_KERNEL).unwrap();
        assert_eq!(e.rank, 1);
        assert_eq!(e.points[0].coords().as_slice(), &[1.0, 0.0]);
        // N has the single eigenvalue c² − 1, so h₁ = ±sinh 1.
        assert_abs_diff_eq!(e.points[1].coords()[0], c, epsilon = 1e-14);
        assert_abs_diff_eq!(e.points[1].coords()[1].abs(), 1f64.sinh(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            crate::minkowski::distance(&e.points[0], &e.points[1]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gns_rejects_non_kernel() {
        let bad = KernelMatrix::unlabeled(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 1.1, 5.0, 1.1, 1.0, 1.1, 5.0, 1.1, 1.0],
        ))
        .unwrap();
        match gns_embed(&bad, 0, TOL_KERNEL) {
            Err(Error::NotAKernel { witness, .. }) => {
                let (lhs, rhs) = kht_inequality_sides(&bad, 0, &witness);
                assert!(lhs > rhs);
            }
            other => panic!("expected NotAKernel, got {other:?}"),
        }
    }

    #[test]
    fn gns_round_trip_and_basepoint_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = rng.random_range(2..15);
            let d = rng.random_range(1..6);
            let k = kernel_from_points(&random_points(&mut rng, m, d)).unwrap();
            let e0 = gns_embed(&k, 0, TOL_KERNEL).unwrap();
            assert!(e0.rank <= d);
            assert!(e0.residual < 1e-8);
            let back = kernel_from_points(&e0.points).unwrap();
            assert!(max_diff(back.entries(), k.entries()) < 1e-8);
            let b = rng.random_range(0..m);
            let eb = gns_embed(&k, b, TOL_KERNEL).unwrap();
            let kb = kernel_from_points(&eb.points).unwrap();
            assert!(max_diff(kb.entries(), back.entries()) < 1e-8);
            assert_eq!(eb.points[b].coords()[0], 1.0);
        }
    }

    #[test]
    fn powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = kernel_from_points(&random_points(&mut rng, 12, 5)).unwrap();
        assert_eq!(power_kernel(&k, 1.0).unwrap(), k);
        let p = power_kernel(&k, 0.37).unwrap();
        let r = validate_kht(&p, BasepointPolicy::default(), TOL_KERNEL).unwrap();
        assert!(r.valid);
        assert!(r.relative_min_eigenvalue >= -1e-8);
        let st = power_kernel(&power_kernel(&k, 0.5).unwrap(), 0.6).unwrap();
        let direct = power_kernel(&k, 0.3).unwrap();
        assert!(max_diff(st.entries(), direct.entries()) < 1e-14 * direct.entries().amax());

        assert!(power_kernel(&k, 0.0).is_err());
        assert!(power_kernel(&k, -1.0).is_err());
        let c = constant_kernel(k.labels().to_vec()).unwrap();
        assert!(c.entries().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn square_fails_somewhere() {
        let found = search_power_counterexample(4, 2, 2.0, 7, -1e-6, 10_000).unwrap().unwrap();
        let w = found.report.witness.unwrap();
        assert!(w.violates());
        let again = search_power_counterexample(4, 2, 2.0, 7, -1e-6, 10_000).unwrap().unwrap();
        assert_eq!(again.kernel, found.kernel);
        // t ≤ 1 never fails
        assert!(search_power_counterexample(4, 2, 0.8, 7, -1e-6, 200).unwrap().is_none());
    }

    #[test]
    fn cnd_examples() {
        let zero = DMatrix::zeros(4, 4);
        assert!(check_cnd(&zero, TOL_KERNEL).unwrap().valid);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let psi = CndKernel::from_euclidean(&pts).unwrap();
        assert!(check_cnd(psi.entries(), TOL_KERNEL).unwrap().valid);

        let neg = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { -1.0 });
        let r = check_cnd(&neg, TOL_KERNEL).unwrap();
        assert!(!r.valid);
        let c = DVector::from_vec(r.witness.unwrap());
        assert_abs_diff_eq!(c.sum(), 0.0, epsilon = 1e-12);
        assert!((c.transpose() * &neg * &c)[0] > 0.0);
        // explicit witness c = (1, −1, 0, 0)
        let c = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!((c.transpose() * &neg * &c)[0], 2.0);

        assert!(CndKernel::new(default_labels(4, "x"), neg, TOL_KERNEL).is_err());
    }

    #[test]
    fn horosphere_bridge() {
        let zero = CndKernel::new(default_labels(3, "x"), DMatrix::zeros(3, 3), TOL_KERNEL).unwrap();
        let k = cnd_to_kht(&zero).unwrap();
        assert!(k.entries().iter().all(|&x| x == 1.0));
        for p in horosphere_embed(&zero).unwrap() {
            assert_eq!(p.coords().as_slice(), &[0.5, 1.0]);
        }

        let two = CndKernel::from_euclidean(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let pts = horosphere_embed(&two).unwrap();
        let d = crate::minkowski::distance(&pts[0], &pts[1]).unwrap();
        assert_abs_diff_eq!(d, 2f64.acosh(), epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let psi = CndKernel::from_euclidean(&u).unwrap();
        let k = cnd_to_kht(&psi).unwrap();
        assert!(validate_kht(&k, BasepointPolicy::default(), TOL_KERNEL).unwrap().valid);
        let back = kht_to_cnd(&k, TOL_KERNEL).unwrap();
        assert!(back.horosphere_flag);
        assert!(max_diff(&back.psi, psi.entries()) < 1e-14);
        let rebuilt = kernel_from_points(&horosphere_embed(&psi).unwrap()).unwrap();
        assert!(max_diff(rebuilt.entries(), k.entries()) < 1e-9);
    }

    #[test]
    fn geodesic_is_not_horospherical() {
        let pts = [point(&[(-1f64).sinh()]), point(&[0.0]), point(&[1f64.sinh()])];
        let k = kernel_from_points(&pts).unwrap();
        assert_abs_diff_eq!(k.get(0, 2), 2f64.cosh(), epsilon = 1e-12);
        let r = kht_to_cnd(&k, TOL_KERNEL).unwrap();
        assert!(!r.horosphere_flag);
        let c = DVector::from_vec(r.report.witness.unwrap());
        assert!((c.transpose() * &r.psi * &c)[0] > 0.0);
    }
}
