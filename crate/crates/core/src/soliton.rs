//! Almost Ricci–Bourguignon solitons: the soliton equation
//! `Ric + ½ £_ξ g = (λ + ρS) g` and the pointwise structure identities that
//! follow from it.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chartcalc::{phi_jets, ChartMetric, GeomError, LocalGeometry, ScalarField, VectorField};
use crate::jet::Jet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolitonError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("invalid soliton data: {0}")]
    Config(String),
}

/// Default sample points per coordinate axis.
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 20;

/// How the soliton function λ is obtained.
#[derive(Debug, Clone)]
pub enum LambdaSpec {
    /// Derived pointwise from the trace of the soliton equation.
    Solve,
    Field(ScalarField),
}

/// A candidate almost Ricci–Bourguignon soliton on a chart.
#[derive(Debug, Clone)]
pub struct SolitonData {
    pub name: String,
    pub metric: ChartMetric,
    pub xi: VectorField,
    /// Potential `f` with `ξ = ∇f`, when the soliton is claimed to be gradient.
    pub potential: Option<ScalarField>,
    pub lambda: LambdaSpec,
    /// A closed-form λ to compare against (it is reported, never trusted).
    pub lambda_closed_form: Option<ScalarField>,
    pub rho: f64,
    /// Time parameter passed to time-dependent metrics.
    pub time: f64,
    /// Box on which default sample sets are laid out.
    pub sample_lo: Vec<f64>,
    pub sample_hi: Vec<f64>,
    /// Lay default samples out at cell centres instead of including the box edges.
    pub centred_samples: bool,
}

impl SolitonData {
    pub fn new(
        name: impl Into<String>,
        metric: ChartMetric,
        xi: VectorField,
        rho: f64,
    ) -> Result<SolitonData, SolitonError> {
        if !rho.is_finite() {
            return Err(SolitonError::Config(format!(
                "rho must be finite, got {rho}"
            )));
        }
        let domain = metric.domain().clone();
        Ok(SolitonData {
            name: name.into(),
            sample_lo: domain.lo.clone(),
            sample_hi: domain.hi.clone(),
            metric,
            xi,
            potential: None,
            lambda: LambdaSpec::Solve,
            lambda_closed_form: None,
            rho,
            time: 0.0,
            centred_samples: false,
        })
    }

    pub fn with_potential(mut self, f: ScalarField) -> Self {
        self.potential = Some(f);
        self
    }

    pub fn with_lambda(mut self, lambda: LambdaSpec) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_closed_form_lambda(mut self, lambda: ScalarField) -> Self {
        self.lambda_closed_form = Some(lambda);
        self
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn with_sample_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.sample_lo = lo;
        self.sample_hi = hi;
        self
    }

    pub fn with_centred_samples(mut self) -> Self {
        self.centred_samples = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Default sample set: a uniform grid with `per_axis` points per coordinate.
    pub fn default_samples(&self, per_axis: usize) -> SampleSet {
        if self.centred_samples {
            SampleSet::centred(&self.sample_lo, &self.sample_hi, per_axis)
        } else {
            SampleSet::grid(&self.sample_lo, &self.sample_hi, per_axis)
        }
    }

    /// Geometry with `extra` derivatives of curvature available.
    pub fn geometry(&self, p: &[f64], extra: usize) -> Result<LocalGeometry, SolitonError> {
        Ok(LocalGeometry::new(&self.metric, p, self.time, extra)?)
    }

    /// λ as a jet, resolved according to [`LambdaSpec`].
    pub fn lambda_jet(&self, geo: &LocalGeometry) -> Jet {
        match &self.lambda {
            LambdaSpec::Solve => self.trace_lambda_jet(geo),
            LambdaSpec::Field(f) => geo.scalar_field(f),
        }
    }

    /// `(1/n) tr_g(Ric + ½ £_ξ g) − ρS`.
    pub fn trace_lambda_jet(&self, geo: &LocalGeometry) -> Jet {
        let n = geo.dim() as f64;
        let xi = geo.vector_field(&self.xi);
        let lie = geo.lie_derivative(&xi);
        let tr = geo.trace_covariant(geo.ricci()) + geo.trace_covariant(&lie) * 0.5;
        tr / n - geo.scalar() * self.rho
    }

    /// `λ + ρS`.
    pub fn alpha_jet(&self, geo: &LocalGeometry) -> Jet {
        self.lambda_jet(geo) + geo.scalar() * self.rho
    }

    /// Residual tensor `E = Ric + ½£_ξ g − (λ + ρS) g` (covariant, row-major).
    pub fn residual_tensor(&self, geo: &LocalGeometry) -> Vec<Jet> {
        self.residual_tensor_with(geo, &self.alpha_jet(geo))
    }

    fn residual_tensor_with(&self, geo: &LocalGeometry, alpha: &Jet) -> Vec<Jet> {
        let xi = geo.vector_field(&self.xi);
        let lie = geo.lie_derivative(&xi);
        geo.ricci()
            .iter()
            .zip(&lie)
            .zip(geo.metric())
            .map(|((r, l), g)| r + &(l * 0.5) - &(alpha * g))
            .collect()
    }
}

/// Points at which a report is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub description: String,
}

impl SampleSet {
    /// Uniform tensor grid with `per_axis` points per coordinate, endpoints included.
    pub fn grid(lo: &[f64], hi: &[f64], per_axis: usize) -> SampleSet {
        assert!(per_axis >= 2, "need at least two points per axis");
        let set = SampleSet::layout(lo, hi, per_axis, |k| k as f64 / (per_axis - 1) as f64);
        SampleSet {
            description: format!(
                "{} grid on {}",
                per_axis_label(lo.len(), per_axis),
                box_label(lo, hi)
            ),
            ..set
        }
    }

    /// Cell-centred grid: `per_axis` midpoints of equal cells per coordinate.
    pub fn centred(lo: &[f64], hi: &[f64], per_axis: usize) -> SampleSet {
        assert!(per_axis >= 1, "need at least one point per axis");
        let set = SampleSet::layout(lo, hi, per_axis, |k| (k as f64 + 0.5) / per_axis as f64);
        SampleSet {
            description: format!(
                "{} cell-centred grid on {}",
                per_axis_label(lo.len(), per_axis),
                box_label(lo, hi)
            ),
            ..set
        }
    }

    fn layout(lo: &[f64], hi: &[f64], per_axis: usize, frac: impl Fn(usize) -> f64) -> SampleSet {
        let n = lo.len();
        let total = per_axis.pow(n as u32);
        let points = (0..total)
            .map(|flat| {
                let mut rem = flat;
                let mut p = vec![0.0; n];
                for axis in (0..n).rev() {
                    let k = rem % per_axis;
                    rem /= per_axis;
                    p[axis] = lo[axis] + (hi[axis] - lo[axis]) * frac(k);
                }
                p
            })
            .collect();
        SampleSet {
            points,
            description: String::new(),
        }
    }

    pub fn from_points(points: Vec<Vec<f64>>, description: impl Into<String>) -> SampleSet {
        SampleSet {
            points,
            description: description.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn per_axis_label(n: usize, per_axis: usize) -> String {
    vec![per_axis.to_string(); n].join("x")
}

fn box_label(lo: &[f64], hi: &[f64]) -> String {
    let ranges: Vec<String> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| format!("[{a}, {b}]"))
        .collect();
    ranges.join(" x ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Shrinking,
    Steady,
    Expanding,
    Indefinite,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Shrinking => "shrinking",
            Classification::Steady => "steady",
            Classification::Expanding => "expanding",
            Classification::Indefinite => "indefinite",
        };
        f.write_str(s)
    }
}

/// Sign classification of λ over a sample: `λ > 0` is shrinking.
///
/// Panics on an empty sample.
pub fn classify(lambda_values: &[f64], eps: f64) -> Classification {
    assert!(
        !lambda_values.is_empty(),
        "classification needs at least one value"
    );
    let min = lambda_values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = lambda_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let max_abs = lambda_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs <= eps {
        Classification::Steady
    } else if min > eps {
        Classification::Shrinking
    } else if max < -eps {
        Classification::Expanding
    } else {
        Classification::Indefinite
    }
}

/// Scale-aware steadiness tolerance `1e-9 · (1 + max|λ|)`.
pub fn default_classification_eps(lambda_values: &[f64]) -> f64 {
    1e-9 * (1.0 + lambda_values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `g`-norm of a vector given by values.
fn vector_norm(g: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * v[i] * v[j];
        }
    }
    s.max(0.0).sqrt()
}

fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

/// λ at `p` making the trace of the soliton equation hold.
pub fn lambda_from_trace(d: &SolitonData, p: &[f64], t: f64) -> Result<f64, SolitonError> {
    let geo = LocalGeometry::new(&d.metric, p, t, 0)?;
    Ok(d.trace_lambda_jet(&geo).value())
}

/// `‖E‖_g` at a point for the resolved λ.
pub fn residual_norm_at(d: &SolitonData, p: &[f64]) -> Result<f64, SolitonError> {
    let geo = d.geometry(p, 0)?;
    Ok(geo
        .norm2_covariant(&d.residual_tensor(&geo))
        .value()
        .max(0.0)
        .sqrt())
}

/// `max_i ‖∇_{e_i} ξ − [(λ+ρS) e_i − Q e_i + φ e_i]‖_g` over an orthonormal frame.
pub fn cdopf_residual(d: &SolitonData, p: &[f64]) -> Result<f64, SolitonError> {
    let geo = d.geometry(p, 0)?;
    Ok(cdopf_at(d, &geo))
}

fn cdopf_at(d: &SolitonData, geo: &LocalGeometry) -> f64 {
    let n = geo.dim();
    let xi = geo.vector_field(&d.xi);
    let nabla_xi = values(&geo.nabla_vector(&xi)); // [b*n + a]
    let q = values(&geo.ricci_operator());
    let phi = values(&phi_jets(geo, &xi));
    let alpha = d.alpha_jet(geo).value();
    let g = values(geo.metric());
    let mut worst = 0.0f64;
    for e in geo.frame() {
        let mut diff = vec![0.0; n];
        for a in 0..n {
            let mut lhs = 0.0;
            let mut rhs = alpha * e[a];
            for b in 0..n {
                lhs += nabla_xi[b * n + a] * e[b];
                rhs += (phi[a * n + b] - q[a * n + b]) * e[b];
            }
            diff[a] = lhs - rhs;
        }
        worst = worst.max(vector_norm(&g, &diff));
    }
    worst
}

/// `‖Q(ξ) − (−(n−1)∇(λ+ρS) + ½∇S − div φ)‖_g`.
pub fn rorbs_residual(d: &SolitonData, p: &[f64]) -> Result<f64, SolitonError> {
    let geo = d.geometry(p, 1)?;
    Ok(rorbs_at(d, &geo))
}

fn rorbs_at(d: &SolitonData, geo: &LocalGeometry) -> f64 {
    let n = geo.dim();
    let xi = geo.vector_field(&d.xi);
    let q = geo.ricci_operator();
    let lhs = values(&geo.apply_operator(&q, &xi));
    let grad_alpha = values(&geo.gradient(&d.alpha_jet(geo)));
    let grad_s = values(&geo.gradient(geo.scalar()));
    let div_phi = values(&geo.operator_divergence(&geo.nabla_operator(&phi_jets(geo, &xi))));
    let diff: Vec<f64> = (0..n)
        .map(|a| lhs[a] - (-(n as f64 - 1.0) * grad_alpha[a] + 0.5 * grad_s[a] - div_phi[a]))
        .collect();
    vector_norm(&values(geo.metric()), &diff)
}

/// Residuals of the curvature identity for `R(X, Y)ξ` under both sign
/// patterns of the `∇φ` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CtrbsResidual {
    /// `… − (∇φ)(X,Y) − (∇φ)(Y,X)`
    pub printed: f64,
    /// `… + (∇φ)(X,Y) − (∇φ)(Y,X)`
    pub alternative: f64,
}

impl CtrbsResidual {
    pub fn best(&self) -> f64 {
        self.printed.min(self.alternative)
    }

    fn max(self, other: CtrbsResidual) -> CtrbsResidual {
        CtrbsResidual {
            printed: self.printed.max(other.printed),
            alternative: self.alternative.max(other.alternative),
        }
    }
}

/// Curvature identity residual for directions `x`, `y` (coordinate components).
pub fn ctrbs_residual(
    d: &SolitonData,
    x: &[f64],
    y: &[f64],
    p: &[f64],
) -> Result<CtrbsResidual, SolitonError> {
    let geo = d.geometry(p, 1)?;
    Ok(ctrbs_at(d, &geo, x, y))
}

fn ctrbs_at(d: &SolitonData, geo: &LocalGeometry, x: &[f64], y: &[f64]) -> CtrbsResidual {
    let n = geo.dim();
    let xi_j = geo.vector_field(&d.xi);
    let xi = values(&xi_j);
    let r = values(geo.riemann());
    let nabla_q = values(&geo.nabla_operator(&geo.ricci_operator()));
    let nabla_phi = values(&geo.nabla_operator(&phi_jets(geo, &xi_j)));
    let alpha = d.alpha_jet(geo);
    let dalpha: Vec<f64> = (0..n).map(|i| alpha.partial(i).value()).collect();
    let x_alpha: f64 = (0..n).map(|i| dalpha[i] * x[i]).sum();
    let y_alpha: f64 = (0..n).map(|i| dalpha[i] * y[i]).sum();
    // (∇T)(U, V)^a = ((∇_U T) V)^a = Σ nabla[(a*n + c)*n + b] U^c V^b
    let apply = |t: &[f64], u: &[f64], v: &[f64], a: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..n {
            for b in 0..n {
                s += t[(a * n + c) * n + b] * u[c] * v[b];
            }
        }
        s
    };
    let mut printed = vec![0.0; n];
    let mut alternative = vec![0.0; n];
    for a in 0..n {
        let mut lhs = 0.0;
        for b in 0..n {
            for c in 0..n {
                for e in 0..n {
                    lhs += r[((a * n + b) * n + c) * n + e] * xi[b] * x[c] * y[e];
                }
            }
        }
        let common =
            x_alpha * y[a] - y_alpha * x[a] - apply(&nabla_q, x, y, a) + apply(&nabla_q, y, x, a);
        let pxy = apply(&nabla_phi, x, y, a);
        let pyx = apply(&nabla_phi, y, x, a);
        printed[a] = lhs - (common - pxy - pyx);
        alternative[a] = lhs - (common + pxy - pyx);
    }
    let g = values(geo.metric());
    CtrbsResidual {
        printed: vector_norm(&g, &printed),
        alternative: vector_norm(&g, &alternative),
    }
}

fn ctrbs_frame_sup(d: &SolitonData, geo: &LocalGeometry) -> CtrbsResidual {
    let frame = geo.frame();
    let mut worst = CtrbsResidual {
        printed: 0.0,
        alternative: 0.0,
    };
    for (i, x) in frame.iter().enumerate() {
        for y in frame.iter().skip(i + 1) {
            worst = worst.max(ctrbs_at(d, geo, x, y));
        }
    }
    worst
}

/// `|div ξ − (n(λ+ρS) − S)|`.
pub fn div_identity_residual(d: &SolitonData, p: &[f64]) -> Result<f64, SolitonError> {
    let geo = d.geometry(p, 0)?;
    Ok(div_at(d, &geo))
}

fn div_at(d: &SolitonData, geo: &LocalGeometry) -> f64 {
    let n = geo.dim() as f64;
    let div = geo.divergence(&geo.vector_field(&d.xi)).value();
    (div - (n * d.alpha_jet(geo).value() - geo.scalar().value())).abs()
}

/// The skew operator `φ^a_b` at a point (row-major, contravariant index first).
pub fn phi_operator(d: &SolitonData, p: &[f64]) -> Result<Vec<f64>, SolitonError> {
    let geo = d.geometry(p, 0)?;
    Ok(values(&phi_jets(&geo, &geo.vector_field(&d.xi))))
}

/// `max |g(φX, Y) + g(X, φY)|` over coordinate directions.
fn phi_skew_at(geo: &LocalGeometry, phi: &[f64]) -> f64 {
    let n = geo.dim();
    let g = values(geo.metric());
    // lowered φ_{ba} = g_{bc} φ^c_a = g(φ ∂_a, ∂_b)
    let low = |b: usize, a: usize| (0..n).map(|c| g[b * n + c] * phi[c * n + a]).sum::<f64>();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            worst = worst.max((low(b, a) + low(a, b)).abs());
        }
    }
    worst
}

/// `Σ_i g(φe_i, φe_i)`.
pub fn phi_norm2(geo: &LocalGeometry, xi: &[Jet]) -> Jet {
    geo.norm2_operator(&phi_jets(geo, xi))
}

/// Which Obata equation to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObataVariant {
    /// `Hess λ̄ + λ̄ g = 0`
    Unit,
    /// `(n−1) Hess μ + (S/n) μ g = 0`
    Scaled,
}

pub fn obata_residual(
    m: &ChartMetric,
    lam_bar: &ScalarField,
    variant: ObataVariant,
    p: &[f64],
    t: f64,
) -> Result<f64, SolitonError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    let f = geo.scalar_field(lam_bar);
    let hess = geo.hessian(&f);
    let n = geo.dim() as f64;
    let fv = f.value();
    let s = geo.scalar().value();
    let tensor: Vec<Jet> = hess
        .iter()
        .zip(geo.metric())
        .map(|(h, g)| match variant {
            ObataVariant::Unit => h + &(g * fv),
            ObataVariant::Scaled => h * (n - 1.0) + g * (s / n * fv),
        })
        .collect();
    Ok(geo.norm2_covariant(&tensor).value().max(0.0).sqrt())
}

/// `|Δσ − (S − n(λ+ρS))|`.
pub fn poisson_residual(
    d: &SolitonData,
    sigma: &ScalarField,
    p: &[f64],
) -> Result<f64, SolitonError> {
    let geo = d.geometry(p, 0)?;
    let n = geo.dim() as f64;
    let lap = geo.laplacian(&geo.scalar_field(sigma)).value();
    let s = geo.scalar().value();
    Ok((lap - (s - n * d.alpha_jet(&geo).value())).abs())
}

/// `‖ξ − ∇f‖_g` for the claimed potential.
pub fn potential_mismatch(d: &SolitonData, p: &[f64]) -> Result<Option<f64>, SolitonError> {
    let Some(f) = &d.potential else {
        return Ok(None);
    };
    let geo = d.geometry(p, 0)?;
    let grad = values(&geo.gradient(&geo.scalar_field(f)));
    let xi = d.xi.at(p, d.time);
    let diff: Vec<f64> = xi.iter().zip(&grad).map(|(a, b)| a - b).collect();
    Ok(Some(vector_norm(&values(geo.metric()), &diff)))
}

/// Everything measured at a single sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub point: Vec<f64>,
    pub residual: f64,
    pub residual_trace: f64,
    pub lambda: f64,
    pub lambda_trace: f64,
    pub lambda_closed_form: Option<f64>,
    pub closed_form_residual: Option<f64>,
    pub cdopf: f64,
    pub rorbs: f64,
    pub ctrbs: CtrbsResidual,
    pub div: f64,
    pub phi_skew: f64,
    pub phi_norm: f64,
    pub potential: Option<f64>,
}

/// Evaluate the soliton equation and every pointwise identity at `p`.
pub fn evaluate_point(d: &SolitonData, p: &[f64]) -> Result<PointRecord, SolitonError> {
    let geo = d.geometry(p, 1)?;
    let n = geo.dim() as f64;
    let alpha = d.alpha_jet(&geo);
    let norm = |e: &[Jet]| geo.norm2_covariant(e).value().max(0.0).sqrt();
    let residual = norm(&d.residual_tensor_with(&geo, &alpha));
    let e_trace = geo
        .trace_covariant(&d.residual_tensor_with(&geo, &alpha))
        .value();
    let lambda_trace = d.trace_lambda_jet(&geo).value();
    let (lambda_closed_form, closed_form_residual) = match &d.lambda_closed_form {
        Some(f) => {
            let lam = geo.scalar_field(f);
            let a = &lam + &(geo.scalar() * d.rho);
            (
                Some(lam.value()),
                Some(norm(&d.residual_tensor_with(&geo, &a))),
            )
        }
        None => (None, None),
    };
    let xi = geo.vector_field(&d.xi);
    let phi = values(&phi_jets(&geo, &xi));
    Ok(PointRecord {
        point: p.to_vec(),
        residual,
        residual_trace: (e_trace / n).abs(),
        lambda: d.lambda_jet(&geo).value(),
        lambda_trace,
        lambda_closed_form,
        closed_form_residual,
        cdopf: cdopf_at(d, &geo),
        rorbs: rorbs_at(d, &geo),
        ctrbs: ctrbs_frame_sup(d, &geo),
        div: div_at(d, &geo),
        phi_skew: phi_skew_at(&geo, &phi),
        phi_norm: phi_norm2(&geo, &xi).value().max(0.0).sqrt(),
        potential: potential_mismatch(d, p)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointsInfo {
    pub count: usize,
    pub description: String,
}

/// Comparison between the closed-form λ and the one actually used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaComparison {
    pub closed_form_min: f64,
    pub closed_form_max: f64,
    pub closed_form_classification: Classification,
    /// `max |λ_closed − λ_trace|` over the sample.
    pub max_discrepancy: f64,
    /// Sup of `‖E‖_g` when the closed-form λ is used in the soliton equation.
    pub closed_form_residual_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolitonReport {
    pub example: String,
    pub rho: f64,
    pub time: f64,
    pub residual_sup: f64,
    /// True when λ was derived from the trace, so the residual is the trace-free part.
    pub trace_free: bool,
    pub lambda_source: String,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub classification: Classification,
    pub lambda_comparison: Option<LambdaComparison>,
    pub identities: BTreeMap<String, f64>,
    /// Sign variant of the `R(X,Y)ξ` identity with the smaller residual.
    pub ctrbs_passing_variant: String,
    pub points: PointsInfo,
}

impl SolitonReport {
    /// Every residual below `tol`; the curvature identity passes on its better variant.
    pub fn passes(&self, tol: f64) -> bool {
        self.residual_sup < tol
            && self.identities.iter().all(|(k, v)| match k.as_str() {
                "ctrbs_printed" | "ctrbs_alternative" => true,
                _ => *v < tol,
            })
            && self.ctrbs_best() < tol
    }

    pub fn ctrbs_best(&self) -> f64 {
        let p = self
            .identities
            .get("ctrbs_printed")
            .copied()
            .unwrap_or(f64::INFINITY);
        let a = self
            .identities
            .get("ctrbs_alternative")
            .copied()
            .unwrap_or(f64::INFINITY);
        p.min(a)
    }
}

/// Evaluate the soliton equation and all identities over a sample set.
pub fn soliton_residual(
    d: &SolitonData,
    samples: &SampleSet,
) -> Result<SolitonReport, SolitonError> {
    if samples.is_empty() {
        return Err(SolitonError::Config("empty sample set".into()));
    }
    let records = samples
        .points
        .par_iter()
        .map(|p| evaluate_point(d, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_report(d, samples, &records))
}

fn sup(records: &[PointRecord], f: impl Fn(&PointRecord) -> f64) -> f64 {
    records.iter().map(f).fold(0.0, f64::max)
}

fn assemble_report(d: &SolitonData, samples: &SampleSet, records: &[PointRecord]) -> SolitonReport {
    let lambdas: Vec<f64> = records.iter().map(|r| r.lambda).collect();
    let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let classification = classify(&lambdas, default_classification_eps(&lambdas));

    let lambda_comparison = d.lambda_closed_form.as_ref().map(|_| {
        let closed: Vec<f64> = records
            .iter()
            .filter_map(|r| r.lambda_closed_form)
            .collect();
        LambdaComparison {
            closed_form_min: closed.iter().copied().fold(f64::INFINITY, f64::min),
            closed_form_max: closed.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            closed_form_classification: classify(&closed, default_classification_eps(&closed)),
            max_discrepancy: sup(records, |r| {
                (r.lambda_closed_form.unwrap_or(f64::NAN) - r.lambda_trace).abs()
            }),
            closed_form_residual_sup: sup(records, |r| r.closed_form_residual.unwrap_or(f64::NAN)),
        }
    });

    let mut identities = BTreeMap::new();
    identities.insert("cdopf".to_string(), sup(records, |r| r.cdopf));
    identities.insert("rorbs".to_string(), sup(records, |r| r.rorbs));
    identities.insert(
        "ctrbs_printed".to_string(),
        sup(records, |r| r.ctrbs.printed),
    );
    identities.insert(
        "ctrbs_alternative".to_string(),
        sup(records, |r| r.ctrbs.alternative),
    );
    identities.insert("div".to_string(), sup(records, |r| r.div));
    identities.insert("phi_skew".to_string(), sup(records, |r| r.phi_skew));
    identities.insert("trace".to_string(), sup(records, |r| r.residual_trace));
    if d.potential.is_some() {
        identities.insert(
            "potential".to_string(),
            sup(records, |r| r.potential.unwrap_or(f64::NAN)),
        );
        identities.insert("phi_norm".to_string(), sup(records, |r| r.phi_norm));
    }
    if let LambdaSpec::Field(_) = d.lambda {
        identities.insert(
            "lambda_vs_trace".to_string(),
            sup(records, |r| (r.lambda - r.lambda_trace).abs()),
        );
    }
    let printed = identities["ctrbs_printed"];
    let alternative = identities["ctrbs_alternative"];
    let ctrbs_passing_variant = if printed <= alternative {
        "printed"
    } else {
        "alternative"
    }
    .to_string();

    SolitonReport {
        example: d.name.clone(),
        rho: d.rho,
        time: d.time,
        residual_sup: sup(records, |r| r.residual),
        trace_free: matches!(d.lambda, LambdaSpec::Solve),
        lambda_source: match d.lambda {
            LambdaSpec::Solve => "trace".to_string(),
            LambdaSpec::Field(_) => "field".to_string(),
        },
        lambda_min,
        lambda_max,
        classification,
        lambda_comparison,
        identities,
        ctrbs_passing_variant,
        points: PointsInfo {
            count: samples.len(),
            description: samples.description.clone(),
        },
    }
}
