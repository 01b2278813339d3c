//! Finite-dimensional Minkowski spaces of index one.
//!
//! Two coordinate models are supported:
//!
//! * the first model `R ⊕ R^k` with `B(s⊕h, s'⊕h') = s s' − ⟨h, h'⟩`;
//! * the second model `R² ⊕ R^k` with `B'((s₁,s₂)⊕v, (s₁',s₂')⊕v') = s₁s₂' + s₂s₁' − ⟨v, v'⟩`,
//!   adapted to the pair of isotropic basis vectors `ξ₁ = (1,0,0…)`, `ξ₂ = (0,1,0…)`.
//!
//! Hyperbolic space is the upper sheet `B(x,x) = 1` with positive time coordinate and
//! `cosh d(x,y) = B(x,y)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Default tolerance on `|B(x,x) − 1|` for hyperboloid points and `|B(x,x)|` for isotropic vectors.
pub const TOL_POINT: f64 = 1e-10;

/// Which coordinate model a vector lives in, with the dimension `k` of the Euclidean factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelTag {
    First { k: usize },
    Second { k: usize },
}

impl ModelTag {
    /// Length of a coordinate vector in this model.
    pub fn len(&self) -> usize {
        match *self {
            ModelTag::First { k } => 1 + k,
            ModelTag::Second { k } => 2 + k,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Hyperbolic dimension of the hyperboloid in this model.
    pub fn hyperbolic_dim(&self) -> usize {
        self.len() - 1
    }

    /// Gram matrix `J` of the form, so that `B(x,y) = xᵀ J y`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut j = DMatrix::zeros(n, n);
        match *self {
            ModelTag::First { .. } => {
                j[(0, 0)] = 1.0;
                for i in 1..n {
                    j[(i, i)] = -1.0;
                }
            }
            ModelTag::Second { .. } => {
                j[(0, 1)] = 1.0;
                j[(1, 0)] = 1.0;
                for i in 2..n {
                    j[(i, i)] = -1.0;
                }
            }
        }
        j
    }

    /// The point `1 ⊕ 0` of the first model, expressed in this model.
    pub fn reference_coords(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.len());
        match self {
            ModelTag::First { .. } => v[0] = 1.0,
            ModelTag::Second { .. } => {
                v[0] = FRAC_1_SQRT_2;
                v[1] = FRAC_1_SQRT_2;
            }
        }
        v
    }

    /// Time-like coordinate used for sheet orientation (`s`, or `s₁ + s₂`).
    fn time(&self, coords: &DVector<f64>) -> f64 {
        match self {
            ModelTag::First { .. } => coords[0],
            ModelTag::Second { .. } => coords[0] + coords[1],
        }
    }

    fn check_same(&self, other: &ModelTag) -> Result<()> {
        if self != other {
            return Err(Error::Usage(format!("model mismatch: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// A coordinate vector in one of the two Minkowski models.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiVector {
    model: ModelTag,
    coords: DVector<f64>,
}

impl MinkowskiVector {
    pub fn new(model: ModelTag, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != model.len() {
            return Err(Error::Usage(format!(
                "{model:?} expects {} coordinates, got {}",
                model.len(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self { model, coords })
    }

    pub fn from_slice(model: ModelTag, coords: &[f64]) -> Result<Self> {
        Self::new(model, DVector::from_column_slice(coords))
    }

    /// Canonical basis vector `e_i` of the model.
    pub fn basis(model: ModelTag, i: usize) -> Self {
        let mut coords = DVector::zeros(model.len());
        coords[i] = 1.0;
        Self { model, coords }
    }

    /// `ξ₁ = (1, 0, 0…)` in the second model.
    pub fn xi1(k: usize) -> Self {
        Self::basis(ModelTag::Second { k }, 0)
    }

    /// `ξ₂ = (0, 1, 0…)` in the second model.
    pub fn xi2(k: usize) -> Self {
        Self::basis(ModelTag::Second { k }, 1)
    }

    pub fn model(&self) -> ModelTag {
        self.model
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    /// `B(self, self)`.
    pub fn norm_sq(&self) -> f64 {
        form(self.model, &self.coords, &self.coords)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            model: self.model,
            coords: &self.coords * factor,
        }
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.model.check_same(&other.model)?;
        Ok(Self {
            model: self.model,
            coords: &self.coords * a + &other.coords * b,
        })
    }
}

fn form(model: ModelTag, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    match model {
        ModelTag::First { .. } => {
            x[0] * y[0] - x.rows(1, x.len() - 1).dot(&y.rows(1, y.len() - 1))
        }
        ModelTag::Second { .. } => {
            x[0] * y[1] + x[1] * y[0] - x.rows(2, x.len() - 2).dot(&y.rows(2, y.len() - 2))
        }
    }
}

/// `B(x, y)` in the first model or `B'(x, y)` in the second.
pub fn bilinear_form(x: &MinkowskiVector, y: &MinkowskiVector) -> Result<f64> {
    x.model.check_same(&y.model)?;
    Ok(form(x.model, &x.coords, &y.coords))
}

/// A point of the upper hyperboloid sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicPoint {
    vector: MinkowskiVector,
}

impl HyperbolicPoint {
    /// Checks `|B(x,x) − 1| ≤ tol_point` and positive time coordinate.
    ///
    /// The tolerance is scaled by `max(1, ‖x‖²)`, the rounding level of `B(x,x)` for far points.
    pub fn new(vector: MinkowskiVector) -> Result<Self> {
        Self::with_tolerance(vector, TOL_POINT)
    }

    pub fn with_tolerance(vector: MinkowskiVector, tol: f64) -> Result<Self> {
        let q = vector.norm_sq();
        if (q - 1.0).abs() > tol * vector.coords.norm_squared().max(1.0) {
            return Err(Error::Geometry(format!("B(x,x) = {q} is not 1")));
        }
        if vector.model.time(&vector.coords) <= 0.0 {
            return Err(Error::Geometry("point lies on the lower sheet".into()));
        }
        Ok(Self { vector })
    }

    pub fn from_slice(model: ModelTag, coords: &[f64]) -> Result<Self> {
        Self::new(MinkowskiVector::from_slice(model, coords)?)
    }

    pub(crate) fn from_raw(model: ModelTag, coords: DVector<f64>) -> Self {
        Self {
            vector: MinkowskiVector { model, coords },
        }
    }

    /// Divides a timelike vector by `√B(x,x)` and flips it onto the upper sheet.
    pub fn renormalize(vector: MinkowskiVector) -> Result<Self> {
        let q = vector.norm_sq();
        if !(q > 0.0) {
            return Err(Error::Geometry(format!(
                "vector with B(x,x) = {q} is not timelike"
            )));
        }
        let mut scale = q.sqrt().recip();
        if vector.model.time(&vector.coords) < 0.0 {
            scale = -scale;
        }
        Ok(Self {
            vector: vector.scaled(scale),
        })
    }

    /// `1 ⊕ 0` in the first model, `(1/√2, 1/√2, 0…)` in the second.
    pub fn reference(model: ModelTag) -> Self {
        Self {
            vector: MinkowskiVector {
                model,
                coords: model.reference_coords(),
            },
        }
    }

    pub fn vector(&self) -> &MinkowskiVector {
        &self.vector
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.vector.coords
    }

    pub fn model(&self) -> ModelTag {
        self.vector.model
    }
}

/// Hyperbolic distance `arcosh B(p, q)`, with the argument clamped at 1.
///
/// Near the diagonal the equivalent `2 asinh(½√−B(p−q, p−q))` is used.
pub fn distance(p: &HyperbolicPoint, q: &HyperbolicPoint) -> Result<f64> {
    let b = bilinear_form(&p.vector, &q.vector)?;
    if b < 1.0 - TOL_POINT * b.abs().max(1.0) {
        return Err(Error::Inconsistency(format!(
            "B(p,q) = {b} < 1: points not on a common sheet"
        )));
    }
    if b < 2.0 {
        let diff = p.coords() - q.coords();
        let chord = -form(p.model(), &diff, &diff);
        return Ok(2.0 * (0.5 * chord.max(0.0).sqrt()).asinh());
    }
    Ok(b.acosh())
}

/// Direction of [`model_convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    FirstToSecond,
    SecondToFirst,
}

/// Linear isometry between the models: `s = (s₁+s₂)/√2`, `h₁ = (s₁−s₂)/√2`, other coordinates copied.
pub fn model_convert(x: &MinkowskiVector, direction: Conversion) -> Result<MinkowskiVector> {
    let c = &x.coords;
    match (direction, x.model) {
        (Conversion::FirstToSecond, ModelTag::First { k }) => {
            if k == 0 {
                return Err(Error::Usage(
                    "first model with k = 0 cannot host the second model".into(),
                ));
            }
            let mut out = c.clone();
            out[0] = (c[0] + c[1]) * FRAC_1_SQRT_2;
            out[1] = (c[0] - c[1]) * FRAC_1_SQRT_2;
            Ok(MinkowskiVector {
                model: ModelTag::Second { k: k - 1 },
                coords: out,
            })
        }
        (Conversion::SecondToFirst, ModelTag::Second { k }) => {
            let mut out = c.clone();
            out[0] = (c[0] + c[1]) * FRAC_1_SQRT_2;
            out[1] = (c[0] - c[1]) * FRAC_1_SQRT_2;
            Ok(MinkowskiVector {
                model: ModelTag::First { k: k + 1 },
                coords: out,
            })
        }
        (dir, model) => Err(Error::Usage(format!("cannot apply {dir:?} to {model:?}"))),
    }
}

/// Matrix `C` with `convert(x) = C x` in the direction first → second (an involution).
pub(crate) fn conversion_matrix(len: usize) -> DMatrix<f64> {
    let mut c = DMatrix::identity(len, len);
    c[(0, 0)] = FRAC_1_SQRT_2;
    c[(0, 1)] = FRAC_1_SQRT_2;
    c[(1, 0)] = FRAC_1_SQRT_2;
    c[(1, 1)] = -FRAC_1_SQRT_2;
    c
}

/// A point of `∂H^k`: a future-pointing isotropic line.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    vector: MinkowskiVector,
    normalized: bool,
}

impl BoundaryPoint {
    /// Accepts an isotropic vector (`|B(x,x)| ≤ tol_point·‖x‖²`) with positive time coordinate.
    pub fn new(vector: MinkowskiVector) -> Result<Self> {
        let scale = vector.coords.norm_squared();
        let q = vector.norm_sq();
        if scale == 0.0 {
            return Err(Error::Geometry("zero vector is not a boundary point".into()));
        }
        if q.abs() > TOL_POINT * scale {
            return Err(Error::Geometry(format!("B(x,x) = {q} is not isotropic")));
        }
        if vector.model.time(&vector.coords) <= 0.0 {
            return Err(Error::Geometry("isotropic vector is past-pointing".into()));
        }
        Ok(Self {
            vector,
            normalized: false,
        })
    }

    /// Image of `v ∈ E` under `v ↦ (½‖v‖², 1) ⊕ v`.
    pub fn from_euclidean(v: &[f64]) -> Self {
        let k = v.len();
        let mut coords = DVector::zeros(k + 2);
        coords[0] = 0.5 * v.iter().map(|x| x * x).sum::<f64>();
        coords[1] = 1.0;
        coords.rows_mut(2, k).copy_from_slice(v);
        Self {
            vector: MinkowskiVector {
                model: ModelTag::Second { k },
                coords,
            },
            normalized: true,
        }
    }

    /// The point `∞ ∈ Ê`, represented by `ξ₁`.
    pub fn infinity(k: usize) -> Self {
        Self {
            vector: MinkowskiVector::xi1(k),
            normalized: true,
        }
    }

    pub fn vector(&self) -> &MinkowskiVector {
        &self.vector
    }

    /// Whether the representative is in the canonical `(½‖v‖², 1) ⊕ v` / `ξ₁` form.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Representative with time coordinate equal to one.
    fn unit_time(&self) -> DVector<f64> {
        let t = self.vector.model.time(&self.vector.coords);
        &self.vector.coords / t
    }

    /// Positive-multiple equality within `tol`.
    pub fn same_class(&self, other: &BoundaryPoint, tol: f64) -> bool {
        self.vector.model == other.vector.model
            && (self.unit_time() - other.unit_time()).amax() <= tol
    }

    /// Inverse of the boundary parametrisation: `None` stands for `∞`.
    pub fn to_euclidean(&self, tol: f64) -> Result<Option<Vec<f64>>> {
        let ModelTag::Second { k } = self.vector.model else {
            return Err(Error::Usage("boundary parametrisation needs the second model".into()));
        };
        let c = self.unit_time();
        if c[1].abs() <= tol {
            return Ok(None);
        }
        Ok(Some(c.rows(2, k).iter().map(|x| x / c[1]).collect()))
    }
}

/// Boundary parametrisation `v ↦ (½‖v‖², 1) ⊕ v`, `∞ ↦ ξ₁` (use `None` for `∞`).
pub fn boundary_param(v: Option<&[f64]>, k: usize) -> Result<BoundaryPoint> {
    match v {
        Some(v) if v.len() != k => Err(Error::Usage(format!(
            "expected a point of R^{k}, got dimension {}",
            v.len()
        ))),
        Some(v) => Ok(BoundaryPoint::from_euclidean(v)),
        None => Ok(BoundaryPoint::infinity(k)),
    }
}

/// `σ_s(v) = (½(eˢ + e⁻ˢ‖v‖²), e⁻ˢ, e⁻ˢv)` on the horosphere based at `ξ₁`.
pub fn horosphere_point(s: f64, v: &[f64]) -> HyperbolicPoint {
    let k = v.len();
    let em = (-s).exp();
    let nv: f64 = v.iter().map(|x| x * x).sum();
    let mut coords = DVector::zeros(k + 2);
    coords[0] = 0.5 * (s.exp() + em * nv);
    coords[1] = em;
    for (i, x) in v.iter().enumerate() {
        coords[2 + i] = em * x;
    }
    HyperbolicPoint {
        vector: MinkowskiVector {
            model: ModelTag::Second { k },
            coords,
        },
    }
}

/// Intrinsic formula `arcosh(1 + ½ e^{−2s} ‖u−v‖²)` for points on the horosphere `σ_s(E)`.
pub fn horosphere_distance(u: &[f64], v: &[f64], s: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Usage("dimension mismatch".into()));
    }
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    // cosh d = 1 + 2 sinh²(d/2)
    Ok(2.0 * (0.5 * (-s).exp() * d2.sqrt()).asinh())
}

/// Nearest point of the hyperbolic subspace `H ∩ span(basis)` to `p`.
///
/// The `B`-orthogonal projection of `p` onto the span is timelike whenever the span
/// meets the hyperboloid; it is rescaled onto the upper sheet.
pub fn project_to_span(p: &HyperbolicPoint, basis: &[MinkowskiVector]) -> Result<HyperbolicPoint> {
    if basis.is_empty() {
        return Err(Error::Geometry("empty span".into()));
    }
    let model = p.model();
    for b in basis {
        model.check_same(&b.model)?;
    }
    let m = basis.len();
    let gram = DMatrix::from_fn(m, m, |i, j| form(model, &basis[i].coords, &basis[j].coords));
    let rhs = DVector::from_fn(m, |i, _| form(model, &basis[i].coords, p.coords()));

    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax();
    let cutoff = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if !eig.eigenvalues.iter().any(|&l| l > cutoff) {
        return Err(Error::Geometry("span contains no timelike vector".into()));
    }
    // Pseudo-inverse solve of G c = r.
    let proj = eig.eigenvectors.transpose() * &rhs;
    let mut coef = DVector::zeros(m);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            coef += eig.eigenvectors.column(idx) * (proj[idx] / lambda);
        }
    }
    let mut q = DVector::zeros(model.len());
    for (c, b) in coef.iter().zip(basis) {
        q += &b.coords * *c;
    }
    HyperbolicPoint::renormalize(MinkowskiVector { model, coords: q })
}
