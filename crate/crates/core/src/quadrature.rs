//! The sphere integrals `β_n(u) = ∫_{S^{n−1}} (cosh u + b₁ sinh u)^t db`.
//!
//! Only the first coordinate `b₁` enters, so every integral reduces to the marginal
//! `dμ_n(x) = c_n (1 − x²)^{(n−3)/2} dx` on `[−1, 1]`. Quadrature runs in the angle
//! `x = cos θ`, where `dμ_n = c_n sin^{n−2}θ dθ` has no endpoint singularity, and every
//! integrand is assembled in log-space. For large `n` the post-change integral also has a
//! Gauss rule matched to the weight.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

/// Slack on the metric bounds `cosh(tu) ≤ β_n ≤ cosh^t u`.
pub const BOUNDS_SLACK: f64 = 1e-7;

/// Allowed disagreement between the two sides of the change of variables.
pub const TOL_CHANGE_OF_VARIABLES: f64 = 1e-8;

/// Seed of the Monte Carlo marginal check.
pub const MONTE_CARLO_SEED: u64 = 0x5EED;

/// Above this dimension the post-change integral uses Gauss–Gegenbauer nodes.
pub const GAUSS_JACOBI_MIN_N: usize = 51;

const REL_TOL: f64 = 1e-13;
const ABS_TOL: f64 = 1e-15;
const MAX_PANELS: usize = 20_000;

// Gauss–Kronrod 7/15 on [−1, 1]; the Gauss nodes are the odd-indexed Kronrod nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let mut error = ((kronrod - gauss) * half).abs();
    if error <= 50.0 * f64::EPSILON * value.abs() {
        // below rounding level, nothing more to gain from splitting
        error = 0.0;
    }
    Panel { a, b, value, error }
}

/// Globally adaptive Gauss–Kronrod over the given breakpoints.
fn adaptive<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], what: &str) -> Result<f64> {
    let mut panels: Vec<Panel> = breaks.windows(2).map(|w| gk15(f, w[0], w[1])).collect();
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let scale: f64 = panels.iter().map(|p| p.value.abs()).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("{what}: non-finite integrand")));
        }
        if err <= ABS_TOL.max(REL_TOL * scale) {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "{what}: error estimate {err:.3e} after {MAX_PANELS} panels"
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("non-empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // cannot split further; accept the panel's rounding-level error
            panels.push(Panel { error: 0.0, ..p });
            continue;
        }
        panels.push(gk15(f, p.a, mid));
        panels.push(gk15(f, mid, p.b));
    }
}

/// `ln(cosh u + x sinh u)` at `x = cos θ`, equal to `u + ln(cos²(θ/2) + e^{−2u} sin²(θ/2))`.
fn ln_plus(u: f64, theta: f64) -> f64 {
    let (s, c) = (0.5 * theta).sin_cos();
    u + (c * c + (-2.0 * u).exp() * s * s).ln()
}

/// `ln(cosh u − x sinh u)` at `x = cos θ`.
fn ln_minus(u: f64, theta: f64) -> f64 {
    let (s, c) = (0.5 * theta).sin_cos();
    u + (s * s + (-2.0 * u).exp() * c * c).ln()
}

/// `ln sin θ`, accurate near `θ = π/2` where the weight of large spheres concentrates.
fn ln_sin(theta: f64) -> f64 {
    let d = theta - FRAC_PI_2;
    if d.abs() < FRAC_PI_4 {
        0.5 * (-d.sin().powi(2)).ln_1p()
    } else {
        theta.sin().ln()
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Usage(format!("sphere dimension n must be ≥ 2, got {n}")));
    }
    Ok(())
}

fn check_ut(u: f64, t: f64) -> Result<()> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Usage(format!("u must be finite and ≥ 0, got {u}")));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Usage(format!("t must lie in (0, 1], got {t}")));
    }
    Ok(())
}

/// The law of the first coordinate of a uniform point on `S^{n−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereMarginal {
    n: usize,
    ln_c: f64,
}

impl SphereMarginal {
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        let x = 0.5 * (n as f64 - 1.0);
        let ln_ratio = if x >= 20.0 {
            // ln Γ(x + ½) − ln Γ(x) without cancelling two large log-gammas
            let r = 1.0 / (x * x);
            0.5 * x.ln() - (1.0 / 8.0 - r * (1.0 / 192.0 - r * (1.0 / 640.0 - r * 17.0 / 14336.0))) / x
        } else {
            // c_{n+2} = c_n · n/(n − 1) from c_2 = 1/π and c_3 = 1/2
            let (mut k, mut c) = if n.is_multiple_of(2) { (2, 1.0 / PI) } else { (3, 0.5) };
            while k < n {
                c *= k as f64 / (k as f64 - 1.0);
                k += 2;
            }
            c.ln() + 0.5 * PI.ln()
        };
        Ok(Self {
            n,
            ln_c: ln_ratio - 0.5 * PI.ln(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `c_n = Γ(n/2) / (√π Γ((n−1)/2))`.
    pub fn normalization(&self) -> f64 {
        self.ln_c.exp()
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let e = 0.5 * (self.n as f64 - 3.0);
        (self.ln_c + e * ((1.0 - x) * (1.0 + x)).ln()).exp()
    }

    /// `ln(c_n sin^{n−2} θ)`, the log-density in the angle.
    fn ln_weight(&self, theta: f64) -> f64 {
        if self.n == 2 {
            self.ln_c
        } else {
            self.ln_c + (self.n as f64 - 2.0) * ln_sin(theta)
        }
    }

    /// `∫_{θ∈[a,b]} e^{ln_mag(θ)} · mult(θ) dμ_n`, with breakpoints around the peak of the
    /// log-integrand.
    fn integrate_angle<L, M>(&self, a: f64, b: f64, ln_mag: L, mult: M, what: &str) -> Result<f64>
    where
        L: Fn(f64) -> f64,
        M: Fn(f64) -> f64,
    {
        let total = |th: f64| self.ln_weight(th) + ln_mag(th);
        let breaks = guided_breaks(&total, a, b);
        adaptive(&|th| total(th).exp() * mult(th), &breaks, what)
    }

    /// `P(b₁ ≤ x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= -1.0 {
            return Ok(0.0);
        }
        if x >= 1.0 {
            return Ok(1.0);
        }
        let v = self.integrate_angle(x.acos(), PI, |_| 0.0, |_| 1.0, "marginal cdf")?;
        Ok(v.clamp(0.0, 1.0))
    }

    /// `|∫ dμ_n − 1|`.
    pub fn normalization_error(&self) -> Result<f64> {
        Ok((self.integrate_angle(0.0, PI, |_| 0.0, |_| 1.0, "normalization")? - 1.0).abs())
    }

    /// `∫ φ(x) dμ_n(x)`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, phi: F) -> Result<f64> {
        self.integrate_angle(0.0, PI, |_| 0.0, |th| phi(th.cos()), "expectation")
    }
}

/// Breakpoints on `[a, b]`: a uniform grid plus a geometric cloud around the maximum of
/// `log_f`, whose half-widths are read off where `log_f` drops by ½.
fn guided_breaks<L: Fn(f64) -> f64>(log_f: &L, a: f64, b: f64) -> Vec<f64> {
    let g = |x: f64| {
        let v = log_f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    for _ in 0..100 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if g(x1) < g(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let peak = 0.5 * (lo + hi);
    let target = g(peak) - 0.5;
    let half_width = |end: f64| {
        if g(end) >= target {
            return (end - peak).abs();
        }
        let (mut inside, mut outside) = (peak, end);
        for _ in 0..80 {
            let m = 0.5 * (inside + outside);
            if g(m) >= target {
                inside = m;
            } else {
                outside = m;
            }
        }
        (inside - peak).abs()
    };
    let (wl, wr) = (half_width(a), half_width(b));

    let mut breaks: Vec<f64> = (0..=8).map(|i| a + (b - a) * i as f64 / 8.0).collect();
    breaks.push(peak);
    for j in -2..=8 {
        let f = 2f64.powi(j);
        breaks.push(peak - f * wl);
        breaks.push(peak + f * wr);
    }
    breaks.retain(|x| x.is_finite() && *x >= a && *x <= b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (b - a));
    breaks
}

/// Gauss rule for the normalized weight `(1 − x²)^{(n−3)/2}` on `[−1, 1]`.
#[derive(Debug)]
struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

type RuleCache = Mutex<HashMap<(usize, usize), Arc<GaussRule>>>;

/// Golub–Welsch on the Jacobi matrix of the symmetric Jacobi weight with exponent `a`.
fn gauss_gegenbauer(n: usize, points: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("cache lock").get(&(n, points)) {
        return rule.clone();
    }
    let a = 0.5 * (n as f64 - 3.0);
    let mut jm = DMatrix::zeros(points, points);
    for k in 1..points {
        let kf = k as f64;
        let b2 = kf * (kf + 2.0 * a) / (4.0 * (kf + a) * (kf + a) - 1.0);
        jm[(k - 1, k)] = b2.sqrt();
        jm[(k, k - 1)] = b2.sqrt();
    }
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..points)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rule = Arc::new(GaussRule {
        nodes: pairs.iter().map(|p| p.0.clamp(-1.0, 1.0)).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    });
    cache.lock().expect("cache lock").insert((n, points), rule.clone());
    rule
}

fn gauss_jacobi_post(u: f64, t: f64, n: usize) -> Option<f64> {
    let eval = |points: usize| {
        let rule = gauss_gegenbauer(n, points);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| {
                let ln = u - LN_2 + ((1.0 + x) + (1.0 - x) * (-2.0 * u).exp()).ln();
                w * (t * ln).exp()
            })
            .sum::<f64>()
    };
    let mut prev = eval(16);
    let mut points = 32;
    while points <= 256 {
        let cur = eval(points);
        if (cur - prev).abs() <= 10.0 * REL_TOL * cur.abs() {
            return Some(cur);
        }
        prev = cur;
        points *= 2;
    }
    None
}

/// `β_n(u) = ∫ (cosh u + x sinh u)^t dμ_n(x)`.
pub fn beta_n_post(u: f64, t: f64, n: usize) -> Result<f64> {
    check_ut(u, t)?;
    check_n(n)?;
    if u == 0.0 {
        return Ok(1.0);
    }
    if n >= GAUSS_JACOBI_MIN_N {
        if let Some(v) = gauss_jacobi_post(u, t, n) {
            return Ok(v);
        }
    }
    beta_n_post_adaptive(u, t, n)
}

/// The same integral by adaptive Gauss–Kronrod in the angle, at every `n`.
pub fn beta_n_post_adaptive(u: f64, t: f64, n: usize) -> Result<f64> {
    check_ut(u, t)?;
    let mu = SphereMarginal::new(n)?;
    mu.integrate_angle(0.0, PI, |th| t * ln_plus(u, th), |_| 1.0, "beta_n_post")
}

/// `∫ (cosh u − x sinh u)^{−(n−1+t)} dμ_n(x)`, the integral before the change of variables.
pub fn beta_n_pre(u: f64, t: f64, n: usize) -> Result<f64> {
    check_ut(u, t)?;
    let mu = SphereMarginal::new(n)?;
    if u == 0.0 {
        return Ok(1.0);
    }
    let e = n as f64 - 1.0 + t;
    mu.integrate_angle(0.0, PI, |th| -e * ln_minus(u, th), |_| 1.0, "beta_n_pre")
}

/// First coordinate of the boost `g_u` applied to a sphere point with first coordinate `b1`:
/// `(sinh u + b₁ cosh u)/(cosh u + b₁ sinh u)`.
pub fn gu_first_coordinate(u: f64, b1: f64) -> f64 {
    let th = u.tanh();
    (th + b1) / (1.0 + b1 * th)
}

/// `|∫ φ(g_u x) dμ_n(x) − ∫ φ(x) (cosh u − x sinh u)^{−(n−1)} dμ_n(x)|`.
pub fn jacobian_identity_check<F: Fn(f64) -> f64>(u: f64, n: usize, phi: F) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Usage(format!("u must be finite and ≥ 0, got {u}")));
    }
    let mu = SphereMarginal::new(n)?;
    let lhs = mu.integrate_angle(
        0.0,
        PI,
        |_| 0.0,
        |th| phi(gu_first_coordinate(u, th.cos())),
        "pushforward side",
    )?;
    let e = n as f64 - 1.0;
    let rhs = mu.integrate_angle(
        0.0,
        PI,
        |th| -e * ln_minus(u, th),
        |th| phi(th.cos()),
        "jacobian side",
    )?;
    Ok((lhs - rhs).abs())
}

/// `ln cosh u`, stable for large `u`.
pub fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `cosh^t u`.
pub fn cosh_power(u: f64, t: f64) -> f64 {
    (t * ln_cosh(u)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub u: f64,
    pub t: f64,
    pub beta_n: f64,
    pub limit: f64,
    pub abs_error: f64,
}

/// `β_n` against its limit `cosh^t u` for each `n`, in the order given.
pub fn convergence_table(u: f64, t: f64, n_list: &[usize]) -> Result<Vec<ConvergenceRow>> {
    check_ut(u, t)?;
    let limit = cosh_power(u, t);
    n_list
        .par_iter()
        .map(|&n| {
            let beta_n = beta_n_post(u, t, n)?;
            Ok(ConvergenceRow {
                n,
                u,
                t,
                beta_n,
                limit,
                abs_error: (beta_n - limit).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub u: f64,
    pub t: f64,
    pub lower: f64,
    pub beta_n: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Checks `cosh(tu) − ε ≤ β_n(u) ≤ cosh^t u + ε` with `ε` = [`BOUNDS_SLACK`].
pub fn bounds_check(u: f64, t: f64, n: usize) -> Result<BoundsReport> {
    let beta_n = beta_n_post(u, t, n)?;
    let lower = (t * u).cosh();
    let upper = cosh_power(u, t);
    Ok(BoundsReport {
        n,
        u,
        t,
        lower,
        beta_n,
        upper,
        lower_ok: lower - BOUNDS_SLACK <= beta_n,
        upper_ok: beta_n <= upper + BOUNDS_SLACK,
    })
}

/// `arcosh(cosh^t u) − t u`, evaluated in log-space so that large `u` neither overflows
/// nor cancels.
pub fn snowflake_gap(u: f64, t: f64) -> Result<f64> {
    check_ut(u, t)?;
    if t == 1.0 {
        return Ok(0.0);
    }
    let ln_y = t * ln_cosh(u);
    if ln_y > 4.0 {
        // Far out, as the bound minus a non-negative deficit so that rounding cannot
        // overshoot (1 − t) ln 2.
        let inv_y2 = (-2.0 * ln_y).exp();
        let s = (1.0 - inv_y2).sqrt();
        let deficit = -(-0.5 * inv_y2 / (1.0 + s)).ln_1p() - t * (-2.0 * u).exp().ln_1p();
        return Ok((1.0 - t) * LN_2 - deficit.max(0.0));
    }
    // arcosh y = ln y + ln(1 + √(1 − y^{−2})), and ln y − tu = t(ln(1 + e^{−2u}) − ln 2)
    let head = t * ((-2.0 * u).exp().ln_1p() - LN_2);
    Ok(head + (-(-2.0 * ln_y).exp_m1()).sqrt().ln_1p())
}

/// Replaces each entry `β = cosh u` of `k` by `β_n(u)`.
pub fn beta_n_kernel(k: &KernelMatrix, t: f64, n: usize) -> Result<KernelMatrix> {
    let m = k.len();
    let mut out = DMatrix::from_element(m, m, 1.0);
    for i in 0..m {
        for j in (i + 1)..m {
            let u = k.get(i, j).max(1.0).acosh();
            let v = beta_n_post(u, t, n)?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    KernelMatrix::new(k.labels().to_vec(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Largest `|F_empirical − F|` over the evaluation grid.
    pub sup_error: f64,
}

/// Compares the empirical law of `g₁/‖g‖` for Gaussian `g ∈ R^n` with [`SphereMarginal::cdf`]
/// on a grid of `grid + 1` points.
pub fn monte_carlo_marginal_check(
    n: usize,
    samples: usize,
    seed: u64,
    grid: usize,
) -> Result<MonteCarloReport> {
    let mu = SphereMarginal::new(n)?;
    if samples == 0 || grid == 0 {
        return Err(Error::Usage("samples and grid must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..samples)
        .map(|_| {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            g[0] / g.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let errors: Vec<f64> = (0..=grid)
        .into_par_iter()
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / grid as f64;
            let empirical = xs.partition_point(|&s| s <= x) as f64 / samples as f64;
            Ok((empirical - mu.cdf(x)?).abs())
        })
        .collect::<Result<_>>()?;
    Ok(MonteCarloReport {
        n,
        samples,
        seed,
        sup_error: errors.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_from_points, validate_kht, BasepointPolicy, TOL_KERNEL};
    use crate::minkowski::{HyperbolicPoint, ModelTag};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn marginal_normalization_and_archimedes() {
        for n in [2, 3, 4, 7, 50, 1000, 100_000] {
            let mu = SphereMarginal::new(n).unwrap();
            let e = mu.normalization_error();
            assert!(matches!(e, Ok(x) if x < 1e-12), "n = {n}: {e:?}");
        }
        // both branches of the normalization constant, checked against the integral
        for n in 36..48 {
            assert!(SphereMarginal::new(n).unwrap().normalization_error().unwrap() < 1e-13);
        }
        let mu = SphereMarginal::new(3).unwrap();
        assert_abs_diff_eq!(mu.normalization(), 0.5, epsilon = 1e-15);
        for x in [-0.9, -0.3, 0.0, 0.4, 0.99] {
            assert_abs_diff_eq!(mu.density(x), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(mu.cdf(x).unwrap(), 0.5 * (x + 1.0), epsilon = 1e-13);
        }
        // n = 2: arcsine law, F(x) = 1 − arccos(x)/π
        let mu = SphereMarginal::new(2).unwrap();
        assert_abs_diff_eq!(mu.cdf(0.3).unwrap(), 1.0 - 0.3f64.acos() / PI, epsilon = 1e-13);
        assert!(SphereMarginal::new(1).is_err());
    }

    #[test]
    fn marginal_moments() {
        // E[b₁²] = 1/n
        for n in [2, 3, 5, 20, 300] {
            let mu = SphereMarginal::new(n).unwrap();
            assert_abs_diff_eq!(mu.expectation(|x| x * x).unwrap(), 1.0 / n as f64, epsilon = 1e-13);
        }
    }

    #[test]
    fn post_examples() {
        for n in [2, 3, 10, 100] {
            assert_eq!(beta_n_post(0.0, 0.4, n).unwrap(), 1.0);
            for u in [0.3, 1.0, 3.0] {
                assert_abs_diff_eq!(beta_n_post(u, 1.0, n).unwrap(), u.cosh(), epsilon = 1e-11 * u.cosh());
            }
        }
        let v = beta_n_post(1.0, 0.5, 1000).unwrap();
        assert!((v - 1.242_207_967_618_644_7).abs() < 1e-3);
        assert_abs_diff_eq!(v, 1.242_117_854_605_801, epsilon = 1e-12);
        assert!(beta_n_post(1.0, 0.0, 3).is_err());
        assert!(beta_n_post(1.0, 1.5, 3).is_err());
        assert!(beta_n_post(-1.0, 0.5, 3).is_err());
    }

    #[test]
    fn post_three_dimensional_closed_form() {
        // For n = 3 the marginal is uniform: β₃ = sinh((1+t)u) / ((1+t) sinh u).
        for u in [0.1f64, 0.5, 1.0, 2.0, 4.0, 10.0] {
            for t in [0.1f64, 0.5, 0.9] {
                let exact = ((1.0 + t) * u).sinh() / ((1.0 + t) * u.sinh());
                let v = beta_n_post(u, t, 3).unwrap();
                assert!((v - exact).abs() <= 1e-12 * exact, "u={u} t={t}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_jacobi_agrees_with_adaptive() {
        for n in [51, 200, 1000] {
            for u in [0.25, 1.0, 4.0] {
                let gj = beta_n_post(u, 0.3, n).unwrap();
                let gk = beta_n_post_adaptive(u, 0.3, n).unwrap();
                assert!((gj - gk).abs() < 1e-12 * gk, "n={n} u={u}: {gj} vs {gk}");
            }
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        let v = beta_n_pre(5.0, 0.5, 1000).unwrap();
        let w = beta_n_post(5.0, 0.5, 1000).unwrap();
        assert!(v.is_finite() && (v - w).abs() < 1e-8 * w);
    }

    #[test]
    fn pre_examples() {
        assert_eq!(beta_n_pre(0.0, 0.5, 10).unwrap(), 1.0);
        let (a, b) = (beta_n_pre(1.0, 0.5, 10).unwrap(), beta_n_post(1.0, 0.5, 10).unwrap());
        assert!((a - b).abs() < 1e-8);
        for u in [0.5, 1.0, 2.0] {
            for n in [3, 10, 50] {
                let d = (beta_n_pre(u, 0.5, n).unwrap() - beta_n_post(u, 0.5, n).unwrap()).abs();
                assert!(d < 1e-8, "u={u} n={n}: {d}");
            }
        }
    }

    #[test]
    fn gu_examples() {
        assert_eq!(gu_first_coordinate(0.0, 0.37), 0.37);
        assert_abs_diff_eq!(gu_first_coordinate(0.8, 0.0), 0.8f64.tanh(), epsilon = 1e-16);
        assert_eq!(gu_first_coordinate(2.0, 1.0), 1.0);
        assert_eq!(gu_first_coordinate(2.0, -1.0), -1.0);
        let mut last = -1.0;
        for i in 1..=100 {
            let y = gu_first_coordinate(1.3, -1.0 + 0.02 * i as f64);
            assert!(y > last && y <= 1.0);
            last = y;
        }
    }

    #[test]
    fn jacobian_examples() {
        assert!(jacobian_identity_check(0.0, 5, |x| x.powi(3)).unwrap() < 1e-14);
        assert!(jacobian_identity_check(1.0, 3, |x| x).unwrap() < 1e-8);
        assert!(jacobian_identity_check(0.5, 7, |x| x * x).unwrap() < 1e-8);
        // a non-polynomial test function as well
        assert!(jacobian_identity_check(1.5, 9, |x| (2.0 * x).cos()).unwrap() < 1e-8);
    }

    #[test]
    fn bounds_and_convergence_examples() {
        let r = bounds_check(2.0, 0.3, 5).unwrap();
        assert!(r.lower_ok && r.upper_ok);
        assert!(r.lower <= r.beta_n && r.beta_n <= r.upper);
        let r = bounds_check(0.0, 0.3, 5).unwrap();
        assert_eq!((r.lower, r.beta_n, r.upper), (1.0, 1.0, 1.0));

        let ns = [3, 10, 30, 100, 300, 1000];
        let rows = convergence_table(1.0, 0.5, &ns).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), ns);
        for w in rows.windows(2) {
            assert!(w[1].abs_error < w[0].abs_error);
        }
        // O(1/n): the error shrinks at least by a factor 2 when n quadruples
        let fine = convergence_table(1.0, 0.5, &[10, 40, 160, 640]).unwrap();
        for w in fine.windows(2) {
            assert!(w[1].abs_error <= w[0].abs_error / 2.0);
        }
    }

    #[test]
    fn snowflake_examples() {
        assert_eq!(snowflake_gap(0.0, 0.3).unwrap(), 0.0);
        for u in [0.0, 1.0, 50.0, 700.0] {
            assert_eq!(snowflake_gap(u, 1.0).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(snowflake_gap(50.0, 0.5).unwrap(), 0.5 * LN_2, epsilon = 1e-6);
        // direct evaluation where it is safe
        for (u, t) in [(0.5, 0.3), (3.0, 0.7)] {
            let direct = cosh_power(u, t).acosh() - t * u;
            assert_abs_diff_eq!(snowflake_gap(u, t).unwrap(), direct, epsilon = 1e-13);
        }
        let mut last = -1.0;
        for i in 0..200 {
            let g = snowflake_gap(0.25 * i as f64, 0.4).unwrap();
            assert!(g >= last - 4.0 * f64::EPSILON);
            last = g;
        }
        assert!(last <= 0.6 * LN_2);
    }

    fn random_points(seed: u64, m: usize) -> Vec<HyperbolicPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| {
                let h: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let s = (1.0 + h[0] * h[0] + h[1] * h[1]).sqrt();
                HyperbolicPoint::from_slice(ModelTag::First { k: 2 }, &[s, h[0], h[1]]).unwrap()
            })
            .collect()
    }

    #[test]
    fn beta_n_kernels_are_hyperbolic_and_converge() {
        let k = kernel_from_points(&random_points(11, 6)).unwrap();
        let t = 0.5;
        let limit: Vec<f64> = k.entries().iter().map(|&b| b.powf(t)).collect();
        let mut last_err = f64::INFINITY;
        for n in [5, 20, 80, 320] {
            let kn = beta_n_kernel(&k, t, n).unwrap();
            if n <= 20 {
                let r = validate_kht(&kn, BasepointPolicy::AllBasepoints, TOL_KERNEL).unwrap();
                assert!(r.valid, "n = {n}: {r:?}");
            }
            let err = kn
                .entries()
                .iter()
                .zip(&limit)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < last_err);
            last_err = err;
        }
        let kt = crate::kernels::power_kernel(&k, t).unwrap();
        assert!(validate_kht(&kt, BasepointPolicy::AllBasepoints, TOL_KERNEL).unwrap().valid);
    }

    #[test]
    fn monte_carlo_small() {
        let r = monte_carlo_marginal_check(5, 20_000, MONTE_CARLO_SEED, 200).unwrap();
        assert!(r.sup_error < 2e-2, "{r:?}");
    }

    #[test]
    #[ignore = "slow: 10^6 samples"]
    fn monte_carlo_full() {
        for n in [3, 5, 20] {
            let r = monte_carlo_marginal_check(n, 1_000_000, MONTE_CARLO_SEED, 2000).unwrap();
            assert!(r.sup_error < 3e-3, "{r:?}");
        }
    }
}
