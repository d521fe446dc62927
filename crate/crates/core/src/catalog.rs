//! Closed-form example solitons and test metrics.

use std::f64::consts::PI;

use thiserror::Error;

use crate::chartcalc::{ChartMetric, CompactChart, Domain, ScalarField, VectorField, POLE_OFFSET};
use crate::jet::{lift_variables, Jet};
use crate::quad::adaptive_gauss_kronrod;
use crate::soliton::{SolitonData, SolitonError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("warping function is not positive on the interval: h({t}) = {value}")]
    NonPositiveWarping { t: f64, value: f64 },
    #[error(transparent)]
    Soliton(#[from] SolitonError),
}

/// Generalized sine/cosine: solutions of `y'' + k y = 0` with
/// `sn(0) = 0, sn'(0) = 1` and `cn = sn'`.
pub fn sn_cn(k: f64, t: f64) -> (f64, f64) {
    if k < 0.0 {
        let s = (-k).sqrt();
        ((s * t).sinh() / s, (s * t).cosh())
    } else if k > 0.0 {
        let s = k.sqrt();
        ((s * t).sin() / s, (s * t).cos())
    } else {
        (t, 1.0)
    }
}

/// [`sn_cn`] on jets.
pub fn sn_cn_jet(k: f64, t: &Jet) -> (Jet, Jet) {
    if k < 0.0 {
        let s = (-k).sqrt();
        let st = t * s;
        (st.sinh() / s, st.cosh())
    } else if k > 0.0 {
        let s = k.sqrt();
        let st = t * s;
        (st.sin() / s, st.cos())
    } else {
        (t.clone(), t.constant_like(1.0))
    }
}

fn cigar_denominator(x: &[Jet], e: f64) -> Jet {
    &x[0] * &x[0] + &x[1] * &x[1] + e
}

/// Hamilton's cigar: `(dx²+dy²)/(1+x²+y²)`, `ξ = −2(x∂_x + y∂_y)`,
/// `f = −log(1+x²+y²)`, `λ = 0`, `ρ = 0`.
pub fn hamilton_cigar() -> SolitonData {
    let metric = ChartMetric::conformally_flat(
        "hamilton-cigar",
        Domain::whole(2),
        ScalarField::new(|x, _| cigar_denominator(x, 1.0).recip()),
    );
    let xi = VectorField::new(|x, _| vec![&x[0] * -2.0, &x[1] * -2.0]);
    SolitonData::new("hamilton-cigar", metric, xi, 0.0)
        .expect("finite rho")
        .with_potential(ScalarField::new(|x, _| -cigar_denominator(x, 1.0).ln()))
        .with_closed_form_lambda(ScalarField::constant(0.0))
        .with_sample_box(vec![-3.0, -3.0], vec![3.0, 3.0])
}

/// `e^{4(1−ρ)t}`, the time factor of the cigar family.
pub fn cigar_time_factor(rho: f64, t: f64) -> f64 {
    (4.0 * (1.0 - rho) * t).exp()
}

/// Reference closed-form λ of the cigar family, as a plain function of `x² + y²`.
pub fn cigar_closed_form_lambda(rho: f64, t: f64, r2: f64) -> f64 {
    let e = cigar_time_factor(rho, t);
    let d = e + r2;
    let s = (1.0 - rho).sqrt();
    2.0 * e * (r2 + e - s * d - 2.0 * rho) / d
}

/// Threshold `2ρ/(1 − √(1−ρ))` where the closed-form cigar λ changes sign.
pub fn cigar_lambda_threshold(rho: f64) -> f64 {
    2.0 * rho / (1.0 - (1.0 - rho).sqrt())
}

/// The time-dependent cigar `(dx²+dy²)/(e^{4(1−ρ)t}+x²+y²)` with
/// `ξ = −2√(1−ρ)(x∂_x + y∂_y)` and `f = −√(1−ρ) log(e^{4(1−ρ)t}+x²+y²)`.
///
/// λ is resolved from the trace; the reference closed form is carried alongside.
pub fn cigar_almost_rb(rho: f64, t: f64) -> Result<SolitonData, CatalogError> {
    if !(rho <= 1.0) || !t.is_finite() {
        return Err(CatalogError::Parameter(format!(
            "cigar needs rho <= 1 and finite t, got rho={rho}, t={t}"
        )));
    }
    let s = (1.0 - rho).sqrt();
    let metric = ChartMetric::conformally_flat(
        "cigar-rb",
        Domain::whole(2),
        ScalarField::new(move |x, time| cigar_denominator(x, cigar_time_factor(rho, time)).recip()),
    );
    let xi = VectorField::new(move |x, _| vec![&x[0] * (-2.0 * s), &x[1] * (-2.0 * s)]);
    let potential = ScalarField::new(move |x, time| {
        cigar_denominator(x, cigar_time_factor(rho, time)).ln() * -s
    });
    let closed = ScalarField::new(move |x, time| {
        let e = cigar_time_factor(rho, time);
        let d = cigar_denominator(x, e);
        let r2 = &x[0] * &x[0] + &x[1] * &x[1];
        (r2 + e - &d * s - 2.0 * rho) * (2.0 * e) / d
    });
    Ok(SolitonData::new("cigar-rb", metric, xi, rho)?
        .with_potential(potential)
        .with_closed_form_lambda(closed)
        .with_time(t)
        .with_sample_box(vec![-3.0, -3.0], vec![3.0, 3.0]))
}

/// Parameters of the 2D warped product `dt² + h(t)² dθ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedParams {
    pub c: f64,
    pub h0: f64,
    pub h1: f64,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Default for WarpedParams {
    fn default() -> Self {
        WarpedParams {
            c: 1.0,
            h0: 0.0,
            h1: 1.0,
            a: 1.0,
            b: 0.0,
            rho: 0.0,
            t_lo: 0.2,
            t_hi: 2.0,
        }
    }
}

/// Warping data: `h = h'(0) sn_{−c} + h(0) cn_{−c}`, `f = a∫₀ᵗ h + b`,
/// `λ = a h' + c(2ρ − 1)` (fiber dimension 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedData {
    pub params: WarpedParams,
}

impl WarpedData {
    pub fn new(params: WarpedParams) -> Result<WarpedData, CatalogError> {
        let p = params;
        if ![p.c, p.h0, p.h1, p.a, p.b, p.rho, p.t_lo, p.t_hi]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(CatalogError::Parameter(
                "warped product parameters must be finite".into(),
            ));
        }
        if !(p.t_lo < p.t_hi) {
            return Err(CatalogError::Parameter(format!(
                "empty interval [{}, {}]",
                p.t_lo, p.t_hi
            )));
        }
        let data = WarpedData { params };
        let steps = 2000;
        for k in 0..=steps {
            let t = p.t_lo + (p.t_hi - p.t_lo) * k as f64 / steps as f64;
            let value = data.h(t);
            if !(value > 0.0) {
                return Err(CatalogError::NonPositiveWarping { t, value });
            }
        }
        Ok(data)
    }

    pub fn h(&self, t: f64) -> f64 {
        let (sn, cn) = sn_cn(-self.params.c, t);
        self.params.h1 * sn + self.params.h0 * cn
    }

    /// `h'`, using `sn' = cn` and `cn' = −k sn` with `k = −c`.
    pub fn h_prime(&self, t: f64) -> f64 {
        let (sn, cn) = sn_cn(-self.params.c, t);
        self.params.h1 * cn + self.params.h0 * self.params.c * sn
    }

    pub fn h_jet(&self, t: &Jet) -> Jet {
        let (sn, cn) = sn_cn_jet(-self.params.c, t);
        sn * self.params.h1 + cn * self.params.h0
    }

    /// `a ∫₀ᵗ h + b` by adaptive Gauss–Kronrod quadrature.
    pub fn f(&self, t: f64) -> f64 {
        let integral = adaptive_gauss_kronrod(|s| self.h(s), 0.0, t, 1e-13);
        self.params.a * integral + self.params.b
    }

    /// Potential as a jet in `t`: quadrature for the value, `f^{(k)} = a h^{(k−1)}`
    /// for derivatives, with `h^{(2m)} = c^m h` and `h^{(2m+1)} = c^m h'`.
    pub fn f_jet(&self, t: &Jet) -> Jet {
        let t0 = t.value();
        let (h, dh) = (self.h(t0), self.h_prime(t0));
        let c = self.params.c;
        let mut taylor = vec![self.f(t0)];
        let mut fact = 1.0;
        for k in 1..=t.order() {
            fact *= k as f64;
            let m = (k - 1) / 2;
            let hk = if (k - 1) % 2 == 0 {
                c.powi(m as i32) * h
            } else {
                c.powi(m as i32) * dh
            };
            taylor.push(self.params.a * hk / fact);
        }
        t.compose(&taylor)
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.params.a * self.h_prime(t) + self.params.c * (2.0 * self.params.rho - 1.0)
    }
}

/// Warped product `I ×_h S¹` in coordinates `(t, θ)` with the gradient soliton
/// of potential `f(t)`.
pub fn warped_product_2d(params: WarpedParams) -> Result<SolitonData, CatalogError> {
    let data = WarpedData::new(params)?;
    let metric = ChartMetric::diagonal(
        "warped",
        Domain::boxed(
            vec![params.t_lo, f64::NEG_INFINITY],
            vec![params.t_hi, f64::INFINITY],
            "I x S1",
        ),
        move |x, _| {
            let h = data.h_jet(&x[0]);
            vec![x[0].constant_like(1.0), &h * &h]
        },
    );
    let xi = VectorField::new(move |x, _| vec![data.h_jet(&x[0]) * params.a, x[0].zero_like()]);
    let potential = ScalarField::new(move |x, _| data.f_jet(&x[0]));
    let closed = ScalarField::new(move |x, _| {
        let (sn, cn) = sn_cn_jet(-params.c, &x[0]);
        let dh = cn * params.h1 + sn * (params.h0 * params.c);
        dh * params.a + params.c * (2.0 * params.rho - 1.0)
    });
    Ok(SolitonData::new("warped", metric, xi, params.rho)?
        .with_potential(potential)
        .with_closed_form_lambda(closed)
        .with_sample_box(vec![params.t_lo, 0.0], vec![params.t_hi, 2.0 * PI]))
}

/// Embedding of `S^n(c)` (radius `1/√c`) in hyperspherical coordinates
/// `(a_1, …, a_{n−1}, φ)`: the last ambient axis is `R cos a_1`, and the first
/// two carry `R Π sin a_i (cos φ, sin φ)`.
fn sphere_embedding(x: &[Jet], radius: f64) -> Vec<Jet> {
    let n = x.len();
    let mut out = vec![x[0].zero_like(); n + 1];
    let mut prefix = x[0].constant_like(radius);
    for i in 0..n - 1 {
        out[n - i] = &prefix * &x[i].cos();
        prefix = &prefix * &x[i].sin();
    }
    out[0] = &prefix * &x[n - 1].cos();
    out[1] = &prefix * &x[n - 1].sin();
    out
}

/// Diagonal of the round metric: `R² (1, sin²a_1, sin²a_1 sin²a_2, …)`.
fn sphere_diagonal(x: &[Jet], radius: f64) -> Vec<Jet> {
    let mut diag = Vec::with_capacity(x.len());
    let mut w = x[0].constant_like(radius * radius);
    for (i, xi) in x.iter().enumerate() {
        diag.push(w.clone());
        if i + 1 < x.len() {
            let s = xi.sin();
            w = &w * &(&s * &s);
        }
    }
    diag
}

/// Round metric of curvature `c` on `S^n` in polar coordinates.
pub fn round_sphere_metric(n: usize, c: f64) -> Result<ChartMetric, CatalogError> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(CatalogError::Parameter(format!(
            "sphere curvature must be positive, got {c}"
        )));
    }
    if n < 2 {
        return Err(CatalogError::Parameter(
            "sphere dimension must be at least 2".into(),
        ));
    }
    let radius = 1.0 / c.sqrt();
    let mut lo = vec![0.0; n];
    let mut hi = vec![PI; n];
    lo[n - 1] = f64::NEG_INFINITY;
    hi[n - 1] = f64::INFINITY;
    let metric = ChartMetric::diagonal(
        format!("sphere(c={c})"),
        Domain::boxed(lo, hi, "polar chart"),
        move |x, _| sphere_diagonal(x, radius),
    );
    Ok(if n == 2 {
        metric.with_compact(CompactChart::Sphere)
    } else {
        metric
    })
}

/// `g = (1 + ε cos θ cos φ) · g_{S²}`, a non-Einstein metric on the sphere chart.
pub fn perturbed_sphere_metric(eps: f64) -> ChartMetric {
    ChartMetric::diagonal(
        format!("perturbed-sphere(eps={eps})"),
        Domain::boxed(
            vec![0.0, f64::NEG_INFINITY],
            vec![PI, f64::INFINITY],
            "polar chart",
        ),
        move |x, _| {
            let w = &x[0].cos() * &x[1].cos() * eps + 1.0;
            let s = x[0].sin();
            vec![w.clone(), &w * &(&s * &s)]
        },
    )
    .with_compact(CompactChart::Sphere)
}

/// Tangential projection data of a constant ambient vector on `S^n(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereConstruction {
    pub c: f64,
    pub z: Vec<f64>,
}

impl SphereConstruction {
    pub fn new(c: f64, z: Vec<f64>) -> Result<SphereConstruction, CatalogError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(CatalogError::Parameter(format!(
                "sphere curvature must be positive, got {c}"
            )));
        }
        if z.len() < 3 {
            return Err(CatalogError::Parameter(format!(
                "Z needs at least 3 components, got {}",
                z.len()
            )));
        }
        if z.iter().all(|v| *v == 0.0) || z.iter().any(|v| !v.is_finite()) {
            return Err(CatalogError::Parameter(
                "Z must be a finite nonzero vector".into(),
            ));
        }
        Ok(SphereConstruction { c, z })
    }

    pub fn dim(&self) -> usize {
        self.z.len() - 1
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.c.sqrt()
    }

    /// `μ = ⟨Z, N⟩` with `N` the outward unit normal.
    pub fn mu_jet(&self, x: &[Jet]) -> Jet {
        let r = self.radius();
        let emb = sphere_embedding(x, r);
        let mut acc = x[0].zero_like();
        for (zi, xi) in self.z.iter().zip(&emb) {
            acc += xi * (*zi / r);
        }
        acc
    }

    pub fn mu(&self) -> ScalarField {
        let this = self.clone();
        ScalarField::new(move |x, _| this.mu_jet(x))
    }

    /// `ξ = ∇μ / √c`, the tangential part of `Z`.
    pub fn xi(&self) -> VectorField {
        let this = self.clone();
        VectorField::new(move |x, _| {
            let order = x[0].order();
            let lifted = lift_variables(x, 1);
            let mu = this.mu_jet(&lifted);
            let diag = sphere_diagonal(x, this.radius());
            let sc = this.c.sqrt();
            (0..x.len())
                .map(|i| mu.partial(i) / &diag[i] / sc)
                .map(|j| j.truncate(order))
                .collect()
        })
    }

    /// `(n−1)(c − ρ) − √c μ`, the closed form carried for comparison.
    pub fn closed_form_lambda(&self, rho: f64) -> ScalarField {
        let this = self.clone();
        let n = self.dim() as f64;
        ScalarField::new(move |x, _| this.mu_jet(x) * -this.c.sqrt() + (n - 1.0) * (this.c - rho))
    }

    /// λ satisfying the soliton equation with `S = n(n−1)c`:
    /// `(n−1)c − √c μ − ρ n(n−1) c`.
    pub fn exact_lambda(&self, rho: f64) -> ScalarField {
        let this = self.clone();
        let n = self.dim() as f64;
        ScalarField::new(move |x, _| {
            this.mu_jet(x) * -this.c.sqrt() + (n - 1.0) * this.c - rho * n * (n - 1.0) * this.c
        })
    }
}

/// Round sphere soliton from the tangential projection of `Z`.
pub fn round_sphere_soliton(c: f64, z: &[f64], rho: f64) -> Result<SolitonData, CatalogError> {
    let construction = SphereConstruction::new(c, z.to_vec())?;
    let n = construction.dim();
    let metric = round_sphere_metric(n, c)?;
    let mut lo = vec![POLE_OFFSET; n];
    let mut hi = vec![PI - POLE_OFFSET; n];
    lo[n - 1] = 0.0;
    hi[n - 1] = 2.0 * PI;
    let sc = c.sqrt();
    let mu = construction.mu();
    Ok(SolitonData::new("sphere", metric, construction.xi(), rho)?
        .with_potential(ScalarField::new(move |x, t| mu.eval(x, t) / sc))
        .with_closed_form_lambda(construction.closed_form_lambda(rho))
        .with_sample_box(lo, hi)
        .with_centred_samples())
}

/// Flat periodic chart `[0, lx) × [0, ly)`.
pub fn flat_torus(lx: f64, ly: f64) -> Result<ChartMetric, CatalogError> {
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(CatalogError::Parameter(format!(
            "torus periods must be positive, got {lx} x {ly}"
        )));
    }
    let metric = ChartMetric::conformally_flat(
        format!("torus({lx}x{ly})"),
        Domain::boxed(vec![0.0, 0.0], vec![lx, ly], "torus"),
        ScalarField::constant(1.0),
    );
    Ok(metric.with_compact(CompactChart::Torus { lx, ly }))
}

/// Trivial soliton on the flat torus: `ξ = 0`, λ from the trace (identically 0).
pub fn flat_torus_soliton(lx: f64, ly: f64, rho: f64) -> Result<SolitonData, CatalogError> {
    let metric = flat_torus(lx, ly)?;
    Ok(SolitonData::new("torus", metric, VectorField::zero(), rho)?
        .with_potential(ScalarField::constant(0.0))
        .with_closed_form_lambda(ScalarField::constant(0.0))
        .with_sample_box(vec![0.0, 0.0], vec![lx, ly]))
}

/// Generic smooth test inputs on the `2π × 2π` torus: `ξ = (sin x, cos y)`
/// and `λ = sin x cos y`.
pub fn torus_test_fields() -> (VectorField, ScalarField) {
    (
        VectorField::new(|x, _| vec![x[0].sin(), x[1].cos()]),
        ScalarField::new(|x, _| &x[0].sin() * &x[1].cos()),
    )
}
