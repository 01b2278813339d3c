//! Isometries induced by kernel automorphisms, and the self-representations `ρ_t` seen
//! through finite orbits.
//!
//! A bijection `π` of `X` that preserves `β` moves the embedded points `f_i` to `f_{π(i)}`;
//! since the `f_i` span their Minkowski space, there is exactly one linear map doing so,
//! and it is a Lorentz map. The convention `M(π) f_i = f_{π(i)}` makes `π ↦ M(π)` a
//! homomorphism: `M(π∘σ) = M(π) M(σ)`.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::{classify, IsometryClass, IsometryKind, LorentzMap, TOL_LEN};
use crate::kernels::{
    gns_embed, kernel_from_labeled_points, power_kernel, EmbeddingResult, KernelMatrix,
};
use crate::linalg::SortedEigen;
use crate::minkowski::{bilinear_form, HyperbolicPoint, ModelTag};

/// Relative tolerance for `β(π(i), π(j)) = β(i, j)`.
pub const TOL_AUTOMORPHISM: f64 = 1e-10;

/// Tolerance on the Lorentz invariant and the equivariance residual of induced maps.
pub const TOL_INDUCED: f64 = 1e-8;

/// Minimum horizon of orbit experiments.
pub const MIN_ORBIT_HORIZON: usize = 16;

/// Largest kernel entry admitted into the window used to induce the shift.
pub const ORBIT_WINDOW_MAX_ENTRY: f64 = 1e2;

/// A permutation of the index set, `i ↦ permutation[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelAutomorphism {
    permutation: Vec<usize>,
}

impl KernelAutomorphism {
    /// Checks that `permutation` is a bijection of `0..m`.
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let m = permutation.len();
        let mut seen = vec![false; m];
        for &p in &permutation {
            if p >= m || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidInput(format!(
                    "{permutation:?} is not a permutation of 0..{m}"
                )));
            }
        }
        Ok(Self { permutation })
    }

    /// A permutation checked against `k`.
    pub fn for_kernel(k: &KernelMatrix, permutation: Vec<usize>) -> Result<Self> {
        let pi = Self::new(permutation)?;
        pi.check_preserves(k)?;
        Ok(pi)
    }

    /// Builds the permutation from label images.
    pub fn from_labels(k: &KernelMatrix, images: &[(String, String)]) -> Result<Self> {
        let mut perm = vec![usize::MAX; k.len()];
        for (from, to) in images {
            let (i, j) = match (k.index_of(from), k.index_of(to)) {
                (Some(i), Some(j)) => (i, j),
                _ => {
                    return Err(Error::InvalidInput(format!("unknown label in {from} -> {to}")))
                }
            };
            perm[i] = j;
        }
        Self::for_kernel(k, perm)
    }

    pub fn identity(m: usize) -> Self {
        Self {
            permutation: (0..m).collect(),
        }
    }

    /// `i ↦ i + shift mod m`.
    pub fn cyclic(m: usize, shift: usize) -> Self {
        Self {
            permutation: (0..m).map(|i| (i + shift) % m).collect(),
        }
    }

    /// `i ↦ shift − i mod m`.
    pub fn reflection(m: usize, shift: usize) -> Self {
        Self {
            permutation: (0..m).map(|i| (shift + m - i % m) % m).collect(),
        }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.permutation[i]
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Usage("permutations act on different sets".into()));
        }
        Ok(Self {
            permutation: other.permutation.iter().map(|&i| self.permutation[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p] = i;
        }
        Self { permutation: inv }
    }

    /// Errors with the first pair `(i, j)` where `β(π i, π j) ≠ β(i, j)`.
    pub fn check_preserves(&self, k: &KernelMatrix) -> Result<()> {
        if self.len() != k.len() {
            return Err(Error::Usage(format!(
                "permutation of {} elements for a kernel on {} points",
                self.len(),
                k.len()
            )));
        }
        for i in 0..k.len() {
            for j in i..k.len() {
                let lhs = k.get(self.apply(i), self.apply(j));
                let rhs = k.get(i, j);
                if (lhs - rhs).abs() > TOL_AUTOMORPHISM * lhs.abs().max(rhs.abs()).max(1.0) {
                    return Err(Error::NotAnAutomorphism { i, j, lhs, rhs });
                }
            }
        }
        Ok(())
    }
}

fn point_matrix(points: &[HyperbolicPoint]) -> DMatrix<f64> {
    let cols: Vec<_> = points.iter().map(|p| p.coords().clone()).collect();
    DMatrix::from_columns(&cols)
}

/// Least-squares `M` with `M X ≈ Y`, requiring `X` to have full row rank.
fn solve_on_span(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let svd = SVD::new(x.clone(), true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-12 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < n {
        return Err(Error::Numerical(format!(
            "embedded points span only {rank} of {n} dimensions"
        )));
    }
    let pinv = svd
        .pseudo_inverse(cutoff)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(y * pinv)
}

fn form_first(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = x.len();
    x[0] * y[0] - x.rows(1, n - 1).dot(&y.rows(1, n - 1))
}

/// Lorentz maps sending the columns of `x` to those of `y`, which must have equal Gram
/// matrices.
///
/// When the columns span the whole space the map is unique. When they span a hyperplane,
/// both candidates `[Y n_Y][X n_X]⁻¹` are returned, where `n_X`, `n_Y` are unit normals
/// of the two spans (Witt's extension, unique up to the sign of `n_Y`).
fn shift_maps(model: ModelTag, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let n = x.nrows();
    let j = model.gram();
    let normal = |a: &DMatrix<f64>| -> Result<Option<DVector<f64>>> {
        // null space of aᵀJ, padded to a square matrix so that the SVD is complete
        let mut sq = DMatrix::zeros(n.max(a.ncols()), n);
        sq.rows_mut(0, a.ncols()).copy_from(&(a.transpose() * &j));
        let svd = SVD::new(sq, false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
        let smax = svd.singular_values.max().max(1.0);
        let null: Vec<usize> = (0..n)
            .filter(|&i| svd.singular_values[i] <= 1e-12 * smax)
            .collect();
        match null.len() {
            0 => Ok(None),
            1 => {
                let v: DVector<f64> = v_t.row(null[0]).transpose();
                let q = form_first(&v, &v);
                if !(q < 0.0) {
                    return Err(Error::Numerical("orbit span is degenerate".into()));
                }
                Ok(Some(v / (-q).sqrt()))
            }
            c => Err(Error::Numerical(format!(
                "orbit window leaves {c} directions undetermined"
            ))),
        }
    };
    match (normal(x)?, normal(y)?) {
        (None, None) => Ok(vec![solve_on_span(x, y)?]),
        (Some(nx), Some(ny)) => {
            let mut src = DMatrix::zeros(n, x.ncols() + 1);
            src.columns_mut(0, x.ncols()).copy_from(x);
            src.set_column(x.ncols(), &nx);
            let inv = src
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numerical("orbit window is singular".into()))?;
            Ok([1.0, -1.0]
                .iter()
                .map(|&sign| {
                    let mut dst = DMatrix::zeros(n, x.ncols() + 1);
                    dst.columns_mut(0, y.ncols()).copy_from(y);
                    dst.set_column(y.ncols(), &(&ny * sign));
                    dst * &inv
                })
                .collect())
        }
        _ => Err(Error::Numerical("the two orbit windows span different dimensions".into())),
    }
}

/// `max_i ‖M f_i − f_{π(i)}‖ / max(1, ‖f_{π(i)}‖)`.
fn equivariance_residual(m: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let r = m * x - y;
    (0..x.ncols())
        .map(|c| r.column(c).norm() / y.column(c).norm().max(1.0))
        .fold(0.0, f64::max)
}

/// Induced isometry with its quality measures.
#[derive(Debug, Clone)]
pub struct InducedIsometry {
    pub map: LorentzMap,
    pub equivariance_residual: f64,
    pub lorentz_drift: f64,
}

/// The unique linear map of the span with `M f_i = f_{π(i)}`.
pub fn induced_isometry(
    k: &KernelMatrix,
    pi: &KernelAutomorphism,
    e: &EmbeddingResult,
) -> Result<LorentzMap> {
    induced_isometry_detailed(k, pi, e).map(|r| r.map)
}

pub fn induced_isometry_detailed(
    k: &KernelMatrix,
    pi: &KernelAutomorphism,
    e: &EmbeddingResult,
) -> Result<InducedIsometry> {
    pi.check_preserves(k)?;
    if e.points.len() != k.len() {
        return Err(Error::Usage("embedding and kernel have different sizes".into()));
    }
    let x = point_matrix(&e.points);
    let y = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, pi.apply(c))]);
    let m = solve_on_span(&x, &y)?;
    let residual = equivariance_residual(&m, &x, &y);
    if residual > TOL_INDUCED {
        return Err(Error::Inconsistency(format!(
            "induced map misses f∘π by {residual:.3e}"
        )));
    }
    let map = LorentzMap::with_tolerance(ModelTag::First { k: e.rank }, m, TOL_INDUCED)?;
    let lorentz_drift = map.drift();
    Ok(InducedIsometry {
        map,
        equivariance_residual: residual,
        lorentz_drift,
    })
}

/// `M ⊕ I`: extension of a first-model map on `R^{1+r}` by the identity on the remaining
/// `k − r` space-like directions.
pub fn extend_by_identity(m: &LorentzMap, k: usize) -> Result<LorentzMap> {
    let r = match m.model() {
        ModelTag::First { k } => k,
        ModelTag::Second { .. } => {
            return Err(Error::Usage("ambient extension is defined in the first model".into()))
        }
    };
    if k < r {
        return Err(Error::Usage(format!("cannot extend from dimension {r} down to {k}")));
    }
    let mut big = DMatrix::identity(k + 1, k + 1);
    big.view_mut((0, 0), (r + 1, r + 1)).copy_from(m.matrix());
    LorentzMap::new(ModelTag::First { k }, big)
}

/// The orbit `gⁿ · base`, `n = 0..=horizon`.
#[derive(Debug, Clone)]
pub struct OrbitSample {
    pub generator: LorentzMap,
    pub base: HyperbolicPoint,
    pub horizon: usize,
    pub points: Vec<HyperbolicPoint>,
}

impl OrbitSample {
    pub fn new(generator: &LorentzMap, base: &HyperbolicPoint, horizon: usize) -> Result<Self> {
        let mut points = Vec::with_capacity(horizon + 1);
        points.push(base.clone());
        for n in 0..horizon {
            let next = generator.apply(&points[n])?;
            points.push(next);
        }
        Ok(Self {
            generator: generator.clone(),
            base: base.clone(),
            horizon,
            points,
        })
    }

    /// Labels `g^0, g^1, …`.
    pub fn labels(&self) -> Vec<String> {
        (0..=self.horizon).map(|n| format!("g^{n}")).collect()
    }

    /// `F(n) = B(p, gⁿp)`, the group function along the orbit.
    pub fn group_function(&self) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|q| Ok(bilinear_form(self.base.vector(), q.vector())?.max(1.0)))
            .collect()
    }

    /// `K[i, j] = F(|i − j|)`.
    ///
    /// Equal to `B(gⁱp, gʲp)` by invariance, but without the cancellation that evaluating
    /// the form on two far points suffers.
    pub fn kernel(&self) -> Result<KernelMatrix> {
        let f = self.group_function()?;
        let m = self.points.len();
        let entries = DMatrix::from_fn(m, m, |i, j| f[i.abs_diff(j)]);
        KernelMatrix::new(self.labels(), entries)
    }

    /// `K[i, j] = B(gⁱp, gʲp)` evaluated directly.
    pub fn direct_kernel(&self) -> Result<KernelMatrix> {
        kernel_from_labeled_points(self.labels(), &self.points)
    }
}

/// Outcome of an orbit experiment for `ρ_t`.
#[derive(Debug, Clone)]
pub struct OrbitExperiment {
    pub orbit: OrbitSample,
    pub t: f64,
    pub kernel_t: KernelMatrix,
    /// Embedding of the leading window of `K_t`.
    pub embedding: EmbeddingResult,
    /// Shift `f_i ↦ f_{i+1}` induced on the window.
    pub map: LorentzMap,
    /// Number of orbit points in the window.
    pub window: usize,
    pub equivariance_residual: f64,
    /// `|B(M f_{w−1}, f_0) − K_t[w, 0]| / K_t[w, 0]`: how well the map predicts the first
    /// orbit point beyond the window.
    pub held_out_residual: f64,
    /// Translation length of `g` itself.
    pub generator_class: IsometryClass,
    /// `ln(K_t[0, N]) / N`.
    pub length_estimate: f64,
    /// Two-level Richardson estimate from `N/2` and `N`.
    pub extrapolated_length: f64,
    /// `t · ℓ(g)`.
    pub target_length: f64,
    /// `|length_estimate − t ℓ(g)|`.
    pub abs_error: f64,
    /// `extrapolated_length / ℓ(g)` for hyperbolic `g`.
    pub recovered_t: Option<f64>,
    /// Type read off the sequence `K_t[0, n]`.
    pub class_t: IsometryClass,
    /// Type of the induced shift on the window.
    pub induced_class: IsometryClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitReport {
    pub t: f64,
    pub horizon: usize,
    pub window: usize,
    pub rank: usize,
    pub generator_kind: IsometryKind,
    pub generator_length: f64,
    pub length_estimate: f64,
    pub extrapolated_length: f64,
    pub target_length: f64,
    pub abs_error: f64,
    pub recovered_t: Option<f64>,
    pub kind_t: IsometryKind,
    pub induced_kind: IsometryKind,
    pub induced_length: f64,
    pub embedding_residual: f64,
    pub equivariance_residual: f64,
    pub held_out_residual: f64,
    pub lorentz_drift: f64,
}

impl OrbitExperiment {
    pub fn report(&self) -> OrbitReport {
        OrbitReport {
            t: self.t,
            horizon: self.orbit.horizon,
            window: self.window,
            rank: self.embedding.rank,
            generator_kind: self.generator_class.kind,
            generator_length: self.generator_class.length,
            length_estimate: self.length_estimate,
            extrapolated_length: self.extrapolated_length,
            target_length: self.target_length,
            abs_error: self.abs_error,
            recovered_t: self.recovered_t,
            kind_t: self.class_t.kind,
            induced_kind: self.induced_class.kind,
            induced_length: self.induced_class.length,
            embedding_residual: self.embedding.residual,
            equivariance_residual: self.equivariance_residual,
            held_out_residual: self.held_out_residual,
            lorentz_drift: self.map.drift(),
        }
    }
}

/// Window of leading orbit points used to induce the shift, and the rank cutoff for its
/// embedding.
///
/// Entries are capped at [`ORBIT_WINDOW_MAX_ENTRY`], the last orbit point is held out, and
/// the window is shrunk until the spectrum of `N` has a clean gap: every eigenvalue is
/// either resolved (above `1e−9 ‖N‖`) or at rounding level (below `1e−13 ‖N‖`).
fn conditioned_window(k: &KernelMatrix) -> (usize, f64) {
    let m = k.len() - 1;
    let mut w = 2;
    while w < m && (0..=w).all(|i| k.get(i, w) <= ORBIT_WINDOW_MAX_ENTRY) {
        w += 1;
    }
    loop {
        let eig = SortedEigen::new(&sub_positive_part(k, w));
        let norm = eig.norm().max(f64::MIN_POSITIVE);
        let ambiguous = eig
            .values
            .iter()
            .any(|&v| v > 1e-13 * norm && v < 1e-9 * norm);
        if !ambiguous || w <= 3 {
            return (w, 1e-11 * norm);
        }
        w -= 1;
    }
}

fn sub_positive_part(k: &KernelMatrix, w: usize) -> DMatrix<f64> {
    let col = k.entries().column(0);
    DMatrix::from_fn(w, w, |i, j| col[i] * col[j] - k.get(i, j))
}

fn sub_kernel(k: &KernelMatrix, w: usize) -> Result<KernelMatrix> {
    KernelMatrix::new(
        k.labels()[..w].to_vec(),
        k.entries().view((0, 0), (w, w)).into_owned(),
    )
}

/// Builds the orbit of `p` under `g`, raises its kernel to the power `t`, embeds it, and
/// induces the shift.
pub fn self_representation_orbit(
    g: &LorentzMap,
    p: &HyperbolicPoint,
    t: f64,
    horizon: usize,
) -> Result<OrbitExperiment> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Usage(format!("t must lie in (0, 1], got {t}")));
    }
    if horizon < MIN_ORBIT_HORIZON {
        return Err(Error::Usage(format!(
            "horizon must be at least {MIN_ORBIT_HORIZON}, got {horizon}"
        )));
    }
    let orbit = OrbitSample::new(g, p, horizon)?;
    let generator_class = classify(g, p, horizon)?;
    let kernel_t = power_kernel(&orbit.kernel()?, t)?;
    // K_t(g^{i+1}p, g^{j+1}p) = K_t(g^i p, g^j p)
    for i in 0..horizon {
        for j in i..horizon {
            let (a, b) = (kernel_t.get(i + 1, j + 1), kernel_t.get(i, j));
            if (a - b).abs() > 1e-8 * a.max(b) {
                return Err(Error::NotAnAutomorphism { i, j, lhs: a, rhs: b });
            }
        }
    }

    let (window, cutoff) = conditioned_window(&kernel_t);
    let embedding = gns_embed(&sub_kernel(&kernel_t, window)?, 0, cutoff)?;
    let f = point_matrix(&embedding.points);
    let x = f.columns(0, window - 1).into_owned();
    let y = f.columns(1, window - 1).into_owned();
    let model = ModelTag::First { k: embedding.rank };
    let candidates = shift_maps(model, &x, &y)?;
    // Pick the extension that best predicts the first orbit point outside the window.
    let held_out = |m: &DMatrix<f64>| {
        let next = m * f.column(window - 1);
        let b = form_first(&next, &f.column(0).into_owned());
        let target = kernel_t.get(window, 0);
        (b - target).abs() / target
    };
    let (m, held_out_residual) = candidates
        .into_iter()
        .map(|m| {
            let r = held_out(&m);
            (m, r)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one candidate");
    let equivariance_residual = equivariance_residual(&m, &x, &y);
    let map = LorentzMap::with_tolerance(model, m, TOL_INDUCED)
        .map_err(|e| Error::Numerical(format!("induced shift is not Lorentz: {e}")))?;
    let induced_class = classify(&map, &embedding.points[0], window.max(8))?;

    let n = horizon as f64;
    let half = horizon / 2;
    let ln_full = kernel_t.get(0, horizon).ln();
    let ln_half = kernel_t.get(0, half).ln();
    let length_estimate = ln_full / n;
    let extrapolated_length = (ln_full - ln_half) / (horizon - half) as f64;
    let target_length = t * generator_class.length;
    let f_values: Vec<f64> = (0..=horizon).map(|j| kernel_t.get(0, j)).collect();
    let class_t = type_from_sequence(&f_values)?;
    let recovered_t = (generator_class.kind == IsometryKind::Hyperbolic)
        .then(|| extrapolated_length / generator_class.length);

    Ok(OrbitExperiment {
        orbit,
        t,
        kernel_t,
        embedding,
        map,
        window,
        equivariance_residual,
        held_out_residual,
        generator_class,
        length_estimate,
        extrapolated_length,
        target_length,
        abs_error: (length_estimate - target_length).abs(),
        recovered_t,
        class_t,
        induced_class,
    })
}

/// Reads the type of `g` from `F(gⁿ) = cosh d(gⁿp, p)`, `n = 0..N`.
///
/// Bounded sequences (`sup < 10 F(g)`) are elliptic. Otherwise the increments
/// `D(n) = ln F(gⁿ) − ln F(g^{n/2})` grow linearly in `n` for hyperbolic `g` and stay
/// bounded for parabolic `g`; the length is the two-level Richardson value `D(N)/(N − N/2)`.
pub fn type_from_sequence(f_values: &[f64]) -> Result<IsometryClass> {
    if f_values.len() < 5 {
        return Err(Error::Usage("need F(g⁰), …, F(gᴺ) with N ≥ 4".into()));
    }
    if let Some((n, v)) = f_values.iter().enumerate().find(|(_, v)| !(**v >= 1.0)) {
        return Err(Error::InvalidInput(format!("F(g^{n}) = {v} is below 1")));
    }
    if (f_values[0] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("F(g⁰) = {} must be 1", f_values[0])));
    }
    let sup = f_values.iter().copied().fold(0.0, f64::max);
    if sup < 10.0 * f_values[1] {
        return Ok(IsometryClass::elliptic());
    }
    let big = f_values.len() - 1;
    let d = |n: usize| f_values[n].ln() - f_values[n / 2].ln();
    let length = d(big) / (big - big / 2) as f64;
    if d(big) > 1.5 * d(big / 2) && length > TOL_LEN {
        return IsometryClass::hyperbolic(length);
    }
    Ok(IsometryClass::parabolic())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isometry::make_translation;
    use crate::kernels::{kernel_from_points, TOL_KERNEL};
    use crate::minkowski::distance;
    use approx::assert_abs_diff_eq;

    fn first_point(h: &[f64]) -> HyperbolicPoint {
        let nh: f64 = h.iter().map(|x| x * x).sum();
        let mut c = vec![(1.0 + nh).sqrt()];
        c.extend_from_slice(h);
        HyperbolicPoint::from_slice(ModelTag::First { k: h.len() }, &c).unwrap()
    }

    fn plane_rotation(k: usize, angles: &[f64]) -> LorentzMap {
        let mut a = DMatrix::identity(k, k);
        for (b, &th) in angles.iter().enumerate() {
            let (s, c) = th.sin_cos();
            a[(2 * b, 2 * b)] = c;
            a[(2 * b, 2 * b + 1)] = -s;
            a[(2 * b + 1, 2 * b)] = s;
            a[(2 * b + 1, 2 * b + 1)] = c;
        }
        LorentzMap::rotation(&a).unwrap()
    }

    fn translation(length: f64, k: usize) -> LorentzMap {
        let mut h = vec![0.0; k];
        h[0] = 1.0;
        make_translation(&first_point(&vec![0.0; k]), &first_point(&h), length).unwrap()
    }

    fn cyclic_orbit(q: usize) -> (KernelMatrix, EmbeddingResult) {
        let tau = std::f64::consts::TAU;
        let g = plane_rotation(4, &[tau / q as f64, 3.0 * tau / q as f64]);
        let orbit = OrbitSample::new(&g, &first_point(&[0.4, -0.2, 0.7, 0.3]), q - 1).unwrap();
        let k = kernel_from_points(&orbit.points).unwrap();
        let e = gns_embed(&k, 0, TOL_KERNEL).unwrap();
        (k, e)
    }

    #[test]
    fn permutations() {
        assert!(KernelAutomorphism::new(vec![0, 0]).is_err());
        assert!(KernelAutomorphism::new(vec![0, 2]).is_err());
        let a = KernelAutomorphism::cyclic(5, 2);
        let b = KernelAutomorphism::reflection(5, 1);
        assert_eq!(a.compose(&a.inverse()).unwrap(), KernelAutomorphism::identity(5));
        assert_eq!(a.compose(&b).unwrap().apply(0), a.apply(b.apply(0)));
        assert_eq!(b.compose(&b).unwrap(), KernelAutomorphism::identity(5));
    }

    #[test]
    fn identity_and_swap() {
        let (k, e) = cyclic_orbit(7);
        let id = induced_isometry(&k, &KernelAutomorphism::identity(7), &e).unwrap();
        let n = e.rank + 1;
        assert!((id.matrix() - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);

        let c = 1f64.cosh();
        let two = KernelMatrix::unlabeled(DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.0])).unwrap();
        let e2 = gns_embed(&two, 0, TOL_KERNEL).unwrap();
        let swap = KernelAutomorphism::for_kernel(&two, vec![1, 0]).unwrap();
        let m = induced_isometry(&two, &swap, &e2).unwrap();
        let sq = m.matrix() * m.matrix();
        assert!((sq - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
        let image = m.apply(&e2.points[0]).unwrap();
        assert!((image.coords() - e2.points[1].coords()).amax() < 1e-12);
        // a reflection of H¹: determinant −1
        assert_abs_diff_eq!(m.matrix().determinant(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_automorphism_is_rejected() {
        let pts = [first_point(&[0.0]), first_point(&[0.5]), first_point(&[2.0])];
        let k = kernel_from_points(&pts).unwrap();
        let e = gns_embed(&k, 0, TOL_KERNEL).unwrap();
        let bad = KernelAutomorphism::new(vec![1, 0, 2]).unwrap();
        assert!(matches!(
            induced_isometry(&k, &bad, &e),
            Err(Error::NotAnAutomorphism { .. })
        ));
    }

    #[test]
    fn functoriality_on_dihedral_orbit() {
        let q = 9;
        let (k, e) = cyclic_orbit(q);
        assert_eq!(e.rank, 4);
        for (a, b) in [(1, 2), (3, 5), (4, 0)] {
            let pi = KernelAutomorphism::cyclic(q, a);
            let sigma = KernelAutomorphism::reflection(q, b);
            let mp = induced_isometry(&k, &pi, &e).unwrap();
            let ms = induced_isometry(&k, &sigma, &e).unwrap();
            let mps = induced_isometry(&k, &pi.compose(&sigma).unwrap(), &e).unwrap();
            assert!((mps.matrix() - mp.matrix() * ms.matrix()).amax() < 1e-8);
        }
        let shift = induced_isometry(&k, &KernelAutomorphism::cyclic(q, 1), &e).unwrap();
        let c = crate::isometry::classify(&shift, &e.points[0], 64).unwrap();
        assert_eq!(c.kind, IsometryKind::Elliptic);
        // order q
        let p = shift.power(q as u32).unwrap();
        assert!((p.matrix() - DMatrix::<f64>::identity(5, 5)).amax() < 1e-8);
    }

    #[test]
    fn ambient_extension() {
        let (k, e) = cyclic_orbit(5);
        let m = induced_isometry(&k, &KernelAutomorphism::cyclic(5, 1), &e).unwrap();
        let big = extend_by_identity(&m, 6).unwrap();
        assert_eq!(big.matrix().nrows(), 7);
        assert!(extend_by_identity(&m, 1).is_err());
    }

    #[test]
    fn orbit_kernel_shift_matches_generator_length() {
        let g = translation(0.5, 2);
        let p = first_point(&[0.3, 0.8]);
        let orbit = OrbitSample::new(&g, &p, 12).unwrap();
        for w in orbit.points.windows(2) {
            let next = g.apply(&w[0]).unwrap();
            assert!((next.coords() - w[1].coords()).amax() <= 1e-10 * w[1].coords().amax());
        }
        let k = orbit.kernel().unwrap();
        let direct = orbit.direct_kernel().unwrap();
        assert!(((k.entries() - direct.entries()).component_div(direct.entries())).amax() < 1e-9);
        let e = gns_embed(&k, 0, TOL_KERNEL).unwrap();
        let labels: Vec<(String, String)> = Vec::new();
        assert!(KernelAutomorphism::from_labels(&k, &labels).is_err());
        let x = point_matrix(&e.points);
        let m = solve_on_span(
            &x.columns(0, 12).into_owned(),
            &x.columns(1, 12).into_owned(),
        )
        .unwrap();
        let map = LorentzMap::with_tolerance(ModelTag::First { k: e.rank }, m, TOL_INDUCED).unwrap();
        let c = crate::isometry::classify(&map, &e.points[0], 64).unwrap();
        assert_eq!(c.kind, IsometryKind::Hyperbolic);
        assert_abs_diff_eq!(c.length, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn self_representation_examples() {
        let g = translation(0.5, 3);
        let p = first_point(&[0.2, 0.5, -0.1]);
        let r = self_representation_orbit(&g, &p, 1.0, 64).unwrap();
        assert!(r.abs_error < 1.0 / 64.0);
        assert_abs_diff_eq!(r.extrapolated_length, 0.5, epsilon = 1e-6);

        let r = self_representation_orbit(&g, &p, 0.6, 64).unwrap();
        assert_eq!(r.class_t.kind, IsometryKind::Hyperbolic);
        assert_eq!(r.induced_class.kind, IsometryKind::Hyperbolic);
        assert!((r.extrapolated_length - 0.3).abs() < 0.02 * 0.3);
        // the window truncates an infinite-dimensional representation, so the induced shift
        // is only close to ρ_t(g)
        assert!(r.held_out_residual < 1e-2, "{:?}", r.report());
        assert!((r.induced_class.length - 0.3).abs() < 0.02 * 0.3);
        assert!(r.map.drift() < TOL_INDUCED);
        assert!((r.recovered_t.unwrap() - 0.6).abs() < 1e-3);

        let rot = plane_rotation(3, &[0.9]);
        let q = first_point(&[0.5, 0.1, 0.3]);
        for t in [0.3, 0.7, 1.0] {
            // at the fixed point the kernel is identically 1
            let r = self_representation_orbit(&rot, &crate::isometry::default_base(rot.model()), t, 64)
                .unwrap();
            assert!(r.length_estimate < 1e-6);
            assert_eq!(r.class_t.kind, IsometryKind::Elliptic);

            let r = self_representation_orbit(&rot, &q, t, 64).unwrap();
            let sup = r.kernel_t.entries().amax();
            assert!(sup < 10.0);
            assert!(r.length_estimate <= sup.ln() / 64.0);
            assert_eq!(r.class_t.kind, IsometryKind::Elliptic);
            assert_eq!(r.induced_class.kind, IsometryKind::Elliptic, "{:?}", r.report());
        }
        assert!(self_representation_orbit(&g, &p, 0.5, 8).is_err());
        assert!(self_representation_orbit(&g, &p, 1.5, 64).is_err());
    }

    #[test]
    fn sequence_examples() {
        assert_eq!(type_from_sequence(&[1.0; 65]).unwrap(), IsometryClass::elliptic());
        let hyp: Vec<f64> = (0..=64).map(|n| (0.7 * n as f64).cosh()).collect();
        let c = type_from_sequence(&hyp).unwrap();
        assert_eq!(c.kind, IsometryKind::Hyperbolic);
        assert!((c.length - 0.7).abs() < 1e-4);
        let par: Vec<f64> = (0..=64).map(|n| 1.0 + (n * n) as f64).collect();
        assert_eq!(type_from_sequence(&par).unwrap(), IsometryClass::parabolic());
        assert!(type_from_sequence(&[1.0, 0.5, 2.0, 3.0, 4.0]).is_err());
        assert!(type_from_sequence(&[2.0, 2.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn orbit_distances() {
        let g = translation(0.25, 2);
        let p = first_point(&[0.0, 0.0]);
        let orbit = OrbitSample::new(&g, &p, 8).unwrap();
        assert_abs_diff_eq!(distance(&orbit.points[8], &p).unwrap(), 2.0, epsilon = 1e-12);
    }
}
