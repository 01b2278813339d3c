//! Lorentz matrices as isometries of `H^k`, Möbius lifts in the second model, and the
//! elliptic / parabolic / hyperbolic trichotomy.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::{
    bilinear_form, conversion_matrix, distance, BoundaryPoint, HyperbolicPoint, MinkowskiVector,
    ModelTag,
};

/// Relative tolerance on `MᵀJM = J`.
pub const TOL_LORENTZ: f64 = 1e-9;

/// Translation lengths at or below this value count as zero.
pub const TOL_LEN: f64 = 1e-8;

/// Required agreement between orbit-based and spectral translation lengths.
pub const TOL_LENGTH_AGREEMENT: f64 = 1e-6;

/// Linear map of a Minkowski model preserving the form and the upper sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzMap {
    model: ModelTag,
    matrix: DMatrix<f64>,
}

impl LorentzMap {
    pub fn new(model: ModelTag, matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(model, matrix, TOL_LORENTZ)
    }

    pub fn with_tolerance(model: ModelTag, matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = model.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Usage(format!(
                "{model:?} needs a {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        let g = Self { model, matrix };
        let drift = g.drift();
        if drift > tol {
            return Err(Error::Geometry(format!(
                "matrix does not preserve the form (relative drift {drift:.3e})"
            )));
        }
        let image = &g.matrix * model.reference_coords();
        let time = match model {
            ModelTag::First { .. } => image[0],
            ModelTag::Second { .. } => image[0] + image[1],
        };
        if time <= 0.0 {
            return Err(Error::Geometry("matrix exchanges the two sheets".into()));
        }
        Ok(g)
    }

    pub fn identity(model: ModelTag) -> Self {
        let n = model.len();
        Self {
            model,
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Rotation `1 ⊕ A` of the first model fixing `1 ⊕ 0`.
    pub fn rotation(spatial: &DMatrix<f64>) -> Result<Self> {
        let k = spatial.nrows();
        check_orthogonal(spatial)?;
        let mut m = DMatrix::identity(k + 1, k + 1);
        m.view_mut((1, 1), (k, k)).copy_from(spatial);
        Self::new(ModelTag::First { k }, m)
    }

    pub fn model(&self) -> ModelTag {
        self.model
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `‖MᵀJM − J‖_max / max(1, ‖M‖²_max)`.
    pub fn drift(&self) -> f64 {
        let j = self.model.gram();
        let defect = self.matrix.transpose() * &j * &self.matrix - &j;
        defect.amax() / self.matrix.amax().powi(2).max(1.0)
    }

    pub fn compose(&self, other: &LorentzMap) -> Result<LorentzMap> {
        self.check_model(other.model)?;
        let g = LorentzMap {
            model: self.model,
            matrix: &self.matrix * &other.matrix,
        };
        Ok(if g.drift() > TOL_LORENTZ {
            g.reorthogonalized()?
        } else {
            g
        })
    }

    /// `M⁻¹ = J Mᵀ J`.
    pub fn inverse(&self) -> LorentzMap {
        let j = self.model.gram();
        LorentzMap {
            model: self.model,
            matrix: &j * self.matrix.transpose() * &j,
        }
    }

    /// `gⁿ` by repeated squaring.
    pub fn power(&self, n: u32) -> Result<LorentzMap> {
        let mut result = LorentzMap::identity(self.model);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base)?;
            }
        }
        Ok(result)
    }

    /// Conjugate `h g h⁻¹`.
    pub fn conjugate_by(&self, h: &LorentzMap) -> Result<LorentzMap> {
        h.compose(self)?.compose(&h.inverse())
    }

    pub fn apply(&self, p: &HyperbolicPoint) -> Result<HyperbolicPoint> {
        self.check_model(p.model())?;
        let image = MinkowskiVector::new(self.model, &self.matrix * p.coords())?;
        HyperbolicPoint::new(image)
            .map_err(|e| Error::Inconsistency(format!("isometry left the hyperboloid: {e}")))
    }

    pub fn apply_vector(&self, x: &MinkowskiVector) -> Result<MinkowskiVector> {
        self.check_model(x.model())?;
        MinkowskiVector::new(self.model, &self.matrix * x.coords())
    }

    pub fn apply_boundary(&self, xi: &BoundaryPoint) -> Result<BoundaryPoint> {
        let image = self.apply_vector(xi.vector())?;
        BoundaryPoint::new(image)
            .map_err(|e| Error::Inconsistency(format!("isometry broke isotropy: {e}")))
    }

    /// B-Gram–Schmidt on the columns, carried out in the first model.
    pub fn reorthogonalized(&self) -> Result<LorentzMap> {
        let n = self.model.len();
        let (first, back) = match self.model {
            ModelTag::First { .. } => (self.matrix.clone(), None),
            ModelTag::Second { .. } => {
                let c = conversion_matrix(n);
                (&c * &self.matrix * &c, Some(c))
            }
        };
        let form1 = |x: &DVector<f64>, y: &DVector<f64>| {
            x[0] * y[0] - x.rows(1, n - 1).dot(&y.rows(1, n - 1))
        };
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut v: DVector<f64> = first.column(i).into_owned();
            for (j, e) in cols.iter().enumerate() {
                let sign = if j == 0 { 1.0 } else { -1.0 };
                v -= e * (sign * form1(&v, e));
            }
            let q = form1(&v, &v);
            let ok = if i == 0 { q > 0.0 } else { q < 0.0 };
            if !ok {
                return Err(Error::Numerical(
                    "re-orthogonalization met a degenerate column".into(),
                ));
            }
            v /= q.abs().sqrt();
            if i == 0 && v[0] < 0.0 {
                v = -v;
            }
            cols.push(v);
        }
        let mut m = DMatrix::from_columns(&cols);
        if let Some(c) = back {
            m = &c * m * &c;
        }
        Ok(LorentzMap {
            model: self.model,
            matrix: m,
        })
    }

    /// Largest eigenvalue modulus of the matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.matrix
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// A point of `H^k` fixed by the map, if the eigenspace of 1 contains a timelike vector.
    pub fn fixed_timelike_point(&self) -> Option<HyperbolicPoint> {
        let n = self.model.len();
        let diff = &self.matrix - DMatrix::<f64>::identity(n, n);
        let svd = SVD::new(diff, false, true);
        let v_t = svd.v_t?;
        let cutoff = 1e-8 * self.matrix.amax().max(1.0);
        let null: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= cutoff)
            .map(|(i, _)| v_t.row(i).transpose())
            .collect();
        if null.is_empty() {
            return None;
        }
        let j = self.model.gram();
        let m = null.len();
        let gram = DMatrix::from_fn(m, m, |a, b| (null[a].transpose() * &j * &null[b])[0]);
        let eig = SymmetricEigen::new(gram);
        let (idx, &top) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        if top <= 1e-8 {
            return None;
        }
        let mut x = DVector::zeros(n);
        for (c, v) in eig.eigenvectors.column(idx).iter().zip(&null) {
            x += v * *c;
        }
        HyperbolicPoint::renormalize(MinkowskiVector::new(self.model, x).ok()?).ok()
    }

    fn check_model(&self, model: ModelTag) -> Result<()> {
        if self.model != model {
            return Err(Error::Usage(format!(
                "model mismatch: map on {:?}, argument on {model:?}",
                self.model
            )));
        }
        Ok(())
    }
}

fn check_orthogonal(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Usage("orthogonal block must be square".into()));
    }
    let k = a.nrows();
    let defect = (a.transpose() * a - DMatrix::<f64>::identity(k, k)).amax();
    if defect > 1e-10 {
        return Err(Error::Usage(format!(
            "matrix is not orthogonal (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Hyperbolic isometry translating the geodesic through `from` and `to` by `length`
/// (towards `to` for positive `length`), acting trivially on the orthogonal complement.
pub fn make_translation(
    from: &HyperbolicPoint,
    to: &HyperbolicPoint,
    length: f64,
) -> Result<LorentzMap> {
    let model = from.model();
    let d = distance(from, to)?;
    if d <= 1e-12 {
        return Err(Error::Geometry("translation axis needs two distinct points".into()));
    }
    let j = model.gram();
    let e0 = from.coords().clone();
    let cosh_d = bilinear_form(from.vector(), to.vector())?;
    let e1 = (to.coords() - &e0 * cosh_d) / d.sinh();
    let (c, s) = (length.cosh(), length.sinh());
    let n = model.len();
    // x = α e0 + β e1 + x⊥ with α = B(x,e0), β = −B(x,e1)
    let alpha_row = e0.transpose() * &j;
    let beta_row = -(e1.transpose() * &j);
    let m = DMatrix::<f64>::identity(n, n)
        + (&e0 * (c - 1.0) + &e1 * s) * alpha_row
        + (&e0 * s + &e1 * (c - 1.0)) * beta_row;
    LorentzMap::new(model, m)
}

/// The Lorentz lift of the similarity `v ↦ λAv + b` of `E`, fixing `ξ₁`.
///
/// Built as translation ∘ dilation ∘ rotation with
/// `T_b(s₁,s₂,v) = (s₁ + ⟨b,v⟩ + ½‖b‖²s₂, s₂, v + s₂b)` and `D_λ(s₁,s₂,v) = (λs₁, s₂/λ, v)`.
pub fn mobius_similarity(lambda: f64, a: &DMatrix<f64>, b: &[f64]) -> Result<LorentzMap> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Usage(format!("dilation factor must be positive, got {lambda}")));
    }
    check_orthogonal(a)?;
    let k = a.nrows();
    if b.len() != k {
        return Err(Error::Usage("translation vector dimension mismatch".into()));
    }
    let bv = DVector::from_column_slice(b);
    let mut m = DMatrix::zeros(k + 2, k + 2);
    // columns: image of s₁, s₂, v under T_b D_λ R_A
    m[(0, 0)] = lambda;
    m[(0, 1)] = 0.5 * bv.norm_squared() / lambda;
    m[(1, 1)] = 1.0 / lambda;
    for i in 0..k {
        m[(2 + i, 1)] = b[i] / lambda;
    }
    let bt_a = bv.transpose() * a;
    for c in 0..k {
        m[(0, 2 + c)] = bt_a[c];
    }
    m.view_mut((2, 2), (k, k)).copy_from(a);
    LorentzMap::new(ModelTag::Second { k }, m)
}

/// Exchange of the two `R²` coordinates: the inversion of `E` in the sphere of radius √2.
pub fn mobius_inversion_sqrt2(k: usize) -> LorentzMap {
    let n = k + 2;
    let mut m = DMatrix::identity(n, n);
    m[(0, 0)] = 0.0;
    m[(1, 1)] = 0.0;
    m[(0, 1)] = 1.0;
    m[(1, 0)] = 1.0;
    LorentzMap {
        model: ModelTag::Second { k },
        matrix: m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsometryKind {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// Type of an isometry with its translation length (zero unless hyperbolic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryClass {
    pub kind: IsometryKind,
    pub length: f64,
}

impl IsometryClass {
    pub fn elliptic() -> Self {
        Self {
            kind: IsometryKind::Elliptic,
            length: 0.0,
        }
    }

    pub fn parabolic() -> Self {
        Self {
            kind: IsometryKind::Parabolic,
            length: 0.0,
        }
    }

    pub fn hyperbolic(length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Usage(format!("hyperbolic length must be positive, got {length}")));
        }
        Ok(Self {
            kind: IsometryKind::Hyperbolic,
            length,
        })
    }
}

/// Classification together with the orbit and spectral evidence it was based on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub class: IsometryClass,
    pub horizon: usize,
    /// `ln ρ(M)`.
    pub spectral_length: f64,
    /// Threshold below which `spectral_length` is treated as zero.
    pub length_cutoff: f64,
    /// `d(gᴺp, p) / N`.
    pub iterate_length: f64,
    /// `(d(gᴺp,p) − d(gᴹp,p)) / (N − M)` with `M = N/2`.
    pub extrapolated_length: f64,
    /// `sup_{n ≤ N} d(gⁿp, p)`.
    pub orbit_sup: f64,
    /// `10 d(gp,p) + 1`.
    pub boundedness_threshold: f64,
    pub fixed_point: Option<Vec<f64>>,
}

/// Classifies `g` from the orbit of `p` up to `horizon` and the spectrum of its matrix.
pub fn classify(g: &LorentzMap, p: &HyperbolicPoint, horizon: usize) -> Result<IsometryClass> {
    classify_detailed(g, p, horizon).map(|r| r.class)
}

/// Spectral radii of a matrix with a Jordan block of size three (parabolics) are only
/// resolved to about the cube root of the rounding level.
fn spectral_cutoff(g: &LorentzMap) -> f64 {
    let scale = g.matrix.norm_squared().max(1.0);
    TOL_LEN.max(2.0 * (f64::EPSILON * scale).cbrt())
}

pub fn classify_detailed(
    g: &LorentzMap,
    p: &HyperbolicPoint,
    horizon: usize,
) -> Result<ClassificationReport> {
    if horizon < 8 {
        return Err(Error::Usage(format!("horizon must be at least 8, got {horizon}")));
    }
    g.check_model(p.model())?;

    let mut dists = Vec::with_capacity(horizon + 1);
    let mut current = p.clone();
    dists.push(0.0);
    for _ in 0..horizon {
        current = g.apply(&current)?;
        dists.push(distance(&current, p)?);
    }
    let orbit_sup = dists.iter().copied().fold(0.0, f64::max);
    let threshold = 10.0 * dists[1] + 1.0;
    let half = horizon / 2;
    let iterate_length = dists[horizon] / horizon as f64;
    let extrapolated_length = (dists[horizon] - dists[half]) / (horizon - half) as f64;
    // ℓ ≤ d(gⁿp, p)/n holds for every n.
    let min_ratio = (1..=horizon)
        .map(|n| dists[n] / n as f64)
        .fold(f64::INFINITY, f64::min);

    let rho = g.spectral_radius();
    let spectral_length = rho.ln().max(0.0);
    let cutoff = spectral_cutoff(g);
    let fixed = g.fixed_timelike_point();

    let report = |class: IsometryClass| ClassificationReport {
        class,
        horizon,
        spectral_length,
        length_cutoff: cutoff,
        iterate_length,
        extrapolated_length,
        orbit_sup,
        boundedness_threshold: threshold,
        fixed_point: fixed.as_ref().map(|q| q.coords().iter().copied().collect()),
    };

    if spectral_length > min_ratio + TOL_LENGTH_AGREEMENT {
        return Err(Error::Classification(format!(
            "spectral length {spectral_length:.9} exceeds orbit bound {min_ratio:.9}"
        )));
    }

    if spectral_length > cutoff {
        if fixed.is_some() {
            return Err(Error::Classification(format!(
                "spectral length {spectral_length:.3e} but a fixed point exists"
            )));
        }
        // Past the transient, d(gⁿp,p) = nℓ + c + O(e^{−nℓ}) and the two-level estimate
        // removes c.
        if half as f64 * spectral_length >= 20.0
            && (extrapolated_length - spectral_length).abs() > TOL_LENGTH_AGREEMENT
        {
            return Err(Error::Classification(format!(
                "orbit estimate {extrapolated_length:.9} disagrees with spectral {spectral_length:.9}"
            )));
        }
        return Ok(report(IsometryClass::hyperbolic(spectral_length)?));
    }

    if let Some(q) = &fixed {
        let bound = 2.0 * distance(p, q)?;
        if orbit_sup < threshold || orbit_sup <= bound + 1e-8 * (1.0 + bound) {
            return Ok(report(IsometryClass::elliptic()));
        }
        return Err(Error::Classification(format!(
            "fixed point found but orbit reaches {orbit_sup:.6} > 2 d(p, q) = {bound:.6}"
        )));
    }
    Ok(report(IsometryClass::parabolic()))
}

/// Default base point for classification: the reference point of the model.
pub fn default_base(model: ModelTag) -> HyperbolicPoint {
    HyperbolicPoint::reference(model)
}
