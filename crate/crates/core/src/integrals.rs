//! Quadrature on compact charts and the integral identities of compact
//! almost Ricci–Bourguignon solitons.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{flat_torus, round_sphere_metric, CatalogError};
use crate::chartcalc::{
    bianchi_defect, determinant, phi_jets, ChartMetric, CompactChart, GeomError, LocalGeometry,
    ScalarField, VectorField,
};
use crate::jet::Jet;
use crate::quad::pairwise_sum;
use crate::soliton::{potential_mismatch, residual_norm_at, SolitonData, SolitonError};

/// Smallest admissible resolution along any axis.
pub const MIN_RESOLUTION: usize = 8;
/// Soliton residual a dataset must stay below before any lemma is evaluated.
pub const LEMMA_SOLITON_TOL: f64 = 1e-6;
/// Upper bound on the number of nodes used for the precondition check.
const PRECONDITION_SAMPLES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegralError {
    #[error("resolution {got} is below the minimum of {min}")]
    Resolution { got: usize, min: usize },
    #[error("integrand is not finite at {point:?}: {value}")]
    Evaluation { point: Vec<f64>, value: f64 },
    #[error("lemma {lemma} refused: {reason}")]
    Precondition { lemma: String, reason: String },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Nodes and weights on a compact chart. Weights include `√det g`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    metric: ChartMetric,
    chart: CompactChart,
    nodes: Vec<Vec<f64>>,
    coord_weights: Vec<f64>,
    weights: Vec<f64>,
    resolution: (usize, usize),
    tolerance: f64,
    /// Curvature of the round metric the sphere nodes were laid out for.
    sphere_c: f64,
}

/// Weights of Fejér's first rule on `[−1, 1]`, nodes `cos((k+½)π/N)`.
fn fejer_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let theta = (k as f64 + 0.5) * PI / n as f64;
            let mut s = 0.0;
            for j in 1..=n / 2 {
                s += (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
            }
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

fn check_resolution(values: &[usize]) -> Result<(), IntegralError> {
    for &v in values {
        if v < MIN_RESOLUTION {
            return Err(IntegralError::Resolution {
                got: v,
                min: MIN_RESOLUTION,
            });
        }
    }
    Ok(())
}

/// Latitude–longitude grid on `S²(c)`: midpoint latitudes with Fejér weights,
/// uniform longitudes.
pub fn sphere_grid(c: f64, n_theta: usize, n_phi: usize) -> Result<QuadratureGrid, IntegralError> {
    check_resolution(&[n_theta, n_phi])?;
    let metric = round_sphere_metric(2, c)?;
    let fejer = fejer_weights(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut coord_weights = Vec::with_capacity(n_theta * n_phi);
    for (k, w) in fejer.iter().enumerate() {
        let theta = (k as f64 + 0.5) * PI / n_theta as f64;
        // the Fejér weight integrates in cos θ; divide out the sin θ it carries
        let wt = w / theta.sin();
        for j in 0..n_phi {
            nodes.push(vec![theta, j as f64 * dphi]);
            coord_weights.push(wt * dphi);
        }
    }
    let mut grid = QuadratureGrid::assemble(
        metric,
        CompactChart::Sphere,
        nodes,
        coord_weights,
        (n_theta, n_phi),
        1e-4,
    )?;
    grid.sphere_c = c;
    Ok(grid)
}

/// Uniform trapezoid grid on the flat torus `[0, lx) × [0, ly)`.
pub fn torus_grid(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<QuadratureGrid, IntegralError> {
    check_resolution(&[nx, ny])?;
    let metric = flat_torus(lx, ly)?;
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let mut nodes = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            nodes.push(vec![i as f64 * hx, j as f64 * hy]);
        }
    }
    let coord_weights = vec![hx * hy; nx * ny];
    QuadratureGrid::assemble(
        metric,
        CompactChart::Torus { lx, ly },
        nodes,
        coord_weights,
        (nx, ny),
        1e-8,
    )
}

fn volume_weights(
    metric: &ChartMetric,
    nodes: &[Vec<f64>],
    coord_weights: &[f64],
) -> Result<Vec<f64>, IntegralError> {
    let n = metric.dim();
    nodes
        .par_iter()
        .zip(coord_weights)
        .map(|(p, w)| {
            let g = crate::chartcalc::metric_at(metric, p, 0.0)?;
            Ok(w * determinant(&g.data, n).sqrt())
        })
        .collect()
}

impl QuadratureGrid {
    fn assemble(
        metric: ChartMetric,
        chart: CompactChart,
        nodes: Vec<Vec<f64>>,
        coord_weights: Vec<f64>,
        resolution: (usize, usize),
        tolerance: f64,
    ) -> Result<QuadratureGrid, IntegralError> {
        let weights = volume_weights(&metric, &nodes, &coord_weights)?;
        Ok(QuadratureGrid {
            metric,
            chart,
            nodes,
            coord_weights,
            weights,
            resolution,
            tolerance,
            sphere_c: 1.0,
        })
    }

    /// Same nodes, volume element of another metric on the same chart.
    pub fn with_metric(&self, metric: &ChartMetric) -> Result<QuadratureGrid, IntegralError> {
        if metric.compact() != Some(self.chart) {
            return Err(IntegralError::Precondition {
                lemma: "grid".into(),
                reason: format!(
                    "metric '{}' does not live on the grid's chart {:?}",
                    metric.name, self.chart
                ),
            });
        }
        if metric.name == self.metric.name {
            return Ok(self.clone());
        }
        let weights = volume_weights(metric, &self.nodes, &self.coord_weights)?;
        Ok(QuadratureGrid {
            metric: metric.clone(),
            weights,
            ..self.clone()
        })
    }

    pub fn metric(&self) -> &ChartMetric {
        &self.metric
    }

    pub fn chart(&self) -> CompactChart {
        self.chart
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Base pass tolerance, scaled by `1 + L¹` in identity checks.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// The same rule with every resolution doubled.
    pub fn refined(&self) -> Result<QuadratureGrid, IntegralError> {
        let (a, b) = self.resolution;
        let base = match self.chart {
            CompactChart::Sphere => sphere_grid(self.sphere_c, 2 * a, 2 * b)?,
            CompactChart::Torus { lx, ly } => torus_grid(lx, ly, 2 * a, 2 * b)?,
        };
        base.with_metric(&self.metric)
    }

    /// `Σ w_k |v_k|` and `Σ w_k v_k` for per-node values.
    fn reduce(&self, values: &[f64]) -> (f64, f64) {
        let weighted: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        let abs: Vec<f64> = weighted.iter().map(|v| v.abs()).collect();
        (pairwise_sum(&weighted), pairwise_sum(&abs))
    }
}

impl fmt::Display for QuadratureGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.chart {
            CompactChart::Sphere => "sphere",
            CompactChart::Torus { .. } => "torus",
        };
        write!(f, "{kind} {}x{}", self.resolution.0, self.resolution.1)
    }
}

/// Evaluate per-node term vectors in parallel, failing on non-finite values.
fn eval_nodes<F>(grid: &QuadratureGrid, f: F) -> Result<Vec<Vec<f64>>, IntegralError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, IntegralError> + Sync,
{
    grid.nodes
        .par_iter()
        .map(|p| {
            let v = f(p)?;
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(IntegralError::Evaluation {
                    point: p.clone(),
                    value: *bad,
                });
            }
            Ok(v)
        })
        .collect()
}

/// `∫ f dV` for a field evaluated through a user closure.
pub fn integrate_with<F>(grid: &QuadratureGrid, f: F) -> Result<f64, IntegralError>
where
    F: Fn(&[f64]) -> Result<f64, IntegralError> + Sync,
{
    let values = eval_nodes(grid, |p| Ok(vec![f(p)?]))?;
    let flat: Vec<f64> = values.into_iter().map(|v| v[0]).collect();
    Ok(grid.reduce(&flat).0)
}

/// `∫ f dV` over the grid's volume form.
pub fn integrate(grid: &QuadratureGrid, field: &ScalarField) -> Result<f64, IntegralError> {
    integrate_with(grid, |p| Ok(field.at(p, 0.0)))
}

/// Integral of one named term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermIntegral {
    pub name: String,
    pub integral: f64,
    /// `∫ |term| dV`.
    pub l1: f64,
}

fn integrate_terms(
    grid: &QuadratureGrid,
    names: &[&str],
    per_node: &[Vec<f64>],
) -> Vec<TermIntegral> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let column: Vec<f64> = per_node.iter().map(|v| v[k]).collect();
            let (integral, l1) = grid.reduce(&column);
            TermIntegral {
                name: name.to_string(),
                integral,
                l1,
            }
        })
        .collect()
}

fn largest_l1(terms: &[TermIntegral]) -> f64 {
    terms.iter().map(|t| t.l1).fold(0.0, f64::max)
}

/// An integral identity `∫ Σ_k s_k term_k = 0` evaluated by quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub grid: String,
    /// Signed integral of the full integrand.
    pub integral: f64,
    /// `|integral|`.
    pub residual: f64,
    /// `∫ |integrand| dV`.
    pub l1: f64,
    pub terms: Vec<TermIntegral>,
    pub tolerance: f64,
    pub pass: bool,
}

fn identity_check(
    identity: &str,
    grid: &QuadratureGrid,
    names: &[&str],
    signs: &[f64],
    per_node: Vec<Vec<f64>>,
) -> IdentityCheck {
    let terms = integrate_terms(grid, names, &per_node);
    let total: Vec<f64> = per_node
        .iter()
        .map(|v| v.iter().zip(signs).map(|(a, s)| a * s).sum())
        .collect();
    let (integral, l1) = grid.reduce(&total);
    let tolerance = grid.tolerance * (1.0 + largest_l1(&terms));
    IdentityCheck {
        identity: identity.to_string(),
        grid: grid.to_string(),
        integral,
        residual: integral.abs(),
        l1,
        terms,
        tolerance,
        pass: integral.abs() <= tolerance,
    }
}

fn ricci_form(geo: &LocalGeometry, u: &[f64], v: &[f64]) -> f64 {
    let n = geo.dim();
    let ric = geo.ricci();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ric[i * n + j].value() * u[i] * v[j];
        }
    }
    s
}

fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

/// Yano's formula `∫ Ric(ξ,ξ) + ½|£_ξ g|² − ‖∇ξ‖² − (div ξ)² = 0`, termwise.
pub fn yano_check(
    grid: &QuadratureGrid,
    m: &ChartMetric,
    xi: &VectorField,
) -> Result<IdentityCheck, IntegralError> {
    let grid = grid.with_metric(m)?;
    let per_node = eval_nodes(&grid, |p| {
        let geo = LocalGeometry::new(m, p, 0.0, 0)?;
        let v = geo.vector_field(xi);
        let xv = values(&v);
        let lie = geo.lie_derivative(&v);
        let nabla = geo.nabla_vector(&v); // [b*n + a]
        let n = geo.dim();
        // lowered (∇_b ξ)_a
        let mut low = Vec::with_capacity(n * n);
        for b in 0..n {
            let col: Vec<Jet> = (0..n).map(|a| nabla[b * n + a].clone()).collect();
            low.extend(geo.lower(&col));
        }
        let div = geo.divergence(&v).value();
        Ok(vec![
            ricci_form(&geo, &xv, &xv),
            0.5 * geo.norm2_covariant(&lie).value(),
            geo.norm2_covariant(&low).value(),
            div * div,
        ])
    })?;
    Ok(identity_check(
        "yano",
        &grid,
        &["ric_xi_xi", "half_lie_norm2", "nabla_xi_norm2", "div_xi_sq"],
        &[1.0, 1.0, -1.0, -1.0],
        per_node,
    ))
}

pub fn yano_residual(
    grid: &QuadratureGrid,
    m: &ChartMetric,
    xi: &VectorField,
) -> Result<f64, IntegralError> {
    Ok(yano_check(grid, m, xi)?.residual)
}

/// Bochner's formula `∫ Ric(∇λ,∇λ) + ‖Hess λ‖² − (Δλ)² = 0`, termwise.
pub fn bochner_check(
    grid: &QuadratureGrid,
    m: &ChartMetric,
    lam: &ScalarField,
) -> Result<IdentityCheck, IntegralError> {
    let grid = grid.with_metric(m)?;
    let per_node = eval_nodes(&grid, |p| {
        let geo = LocalGeometry::new(m, p, 0.0, 0)?;
        let f = geo.scalar_field(lam);
        let grad = values(&geo.gradient(&f));
        let hess = geo.hessian(&f);
        let lap = geo.trace_covariant(&hess).value();
        Ok(vec![
            ricci_form(&geo, &grad, &grad),
            geo.norm2_covariant(&hess).value(),
            lap * lap,
        ])
    })?;
    Ok(identity_check(
        "bochner",
        &grid,
        &["ric_grad_grad", "hess_norm2", "laplacian_sq"],
        &[1.0, 1.0, -1.0],
        per_node,
    ))
}

pub fn bochner_residual(
    grid: &QuadratureGrid,
    m: &ChartMetric,
    lam: &ScalarField,
) -> Result<f64, IntegralError> {
    Ok(bochner_check(grid, m, lam)?.residual)
}

/// Contracted Bianchi defect at every node.
pub fn bianchi_rows(
    grid: &QuadratureGrid,
    m: &ChartMetric,
) -> Result<Vec<(Vec<f64>, f64)>, IntegralError> {
    grid.nodes
        .par_iter()
        .map(|p| {
            let (_, norm) = bianchi_defect(m, p, 0.0)?;
            if !norm.is_finite() {
                return Err(IntegralError::Evaluation {
                    point: p.clone(),
                    value: norm,
                });
            }
            Ok((p.clone(), norm))
        })
        .collect()
}

/// `max ‖½∇S − Σ(∇Q)(e_i, e_i)‖_g` over the grid nodes.
pub fn bianchi_sweep(grid: &QuadratureGrid, m: &ChartMetric) -> Result<f64, IntegralError> {
    Ok(bianchi_rows(grid, m)?
        .iter()
        .map(|r| r.1)
        .fold(0.0, f64::max))
}

/// The integral identities of compact almost RB-solitons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LemmaId {
    L21,
    L22,
    L23a,
    L23b,
    L24,
    L25,
}

impl LemmaId {
    pub const ALL: [LemmaId; 6] = [
        LemmaId::L21,
        LemmaId::L22,
        LemmaId::L23a,
        LemmaId::L23b,
        LemmaId::L24,
        LemmaId::L25,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::L21 => "L2.1",
            LemmaId::L22 => "L2.2",
            LemmaId::L23a => "L2.3a",
            LemmaId::L23b => "L2.3b",
            LemmaId::L24 => "L2.4",
            LemmaId::L25 => "L2.5",
        }
    }

    pub fn parse(s: &str) -> Option<LemmaId> {
        LemmaId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
    }

    fn needs_potential(self) -> bool {
        matches!(self, LemmaId::L23a | LemmaId::L23b)
    }

    fn curvature_order(self) -> usize {
        match self {
            LemmaId::L24 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A second form of the same identity with a different coefficient,
/// evaluated from the same term integrals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeForm {
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaResult {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub terms: Vec<TermIntegral>,
    pub tolerance: f64,
    pub pass: bool,
    pub grid: String,
    /// Sup of the soliton residual over the precondition sample.
    pub soliton_residual: f64,
    pub alternative: Option<AlternativeForm>,
}

fn refuse(id: LemmaId, reason: String) -> IntegralError {
    IntegralError::Precondition {
        lemma: id.to_string(),
        reason,
    }
}

fn precondition_sample(grid: &QuadratureGrid) -> Vec<Vec<f64>> {
    let stride = grid.len().div_ceil(PRECONDITION_SAMPLES).max(1);
    grid.nodes.iter().step_by(stride).cloned().collect()
}

/// Per-node terms of a lemma.
fn lemma_terms(id: LemmaId, d: &SolitonData, geo: &LocalGeometry) -> Vec<f64> {
    let n = geo.dim();
    let nf = n as f64;
    let xi_j = geo.vector_field(&d.xi);
    let xi = values(&xi_j);
    let s = geo.scalar();
    let g = values(geo.metric());
    let inner = |u: &[f64], v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g[i * n + j] * u[i] * v[j];
            }
        }
        acc
    };
    let traceless_norm2 = |t: &[Jet]| -> f64 {
        let tr = geo.trace_covariant(t);
        let tl: Vec<Jet> = t
            .iter()
            .zip(geo.metric())
            .map(|(a, gij)| a - &(gij * &tr / nf))
            .collect();
        geo.norm2_covariant(&tl).value()
    };
    match id {
        LemmaId::L21 => {
            let alpha = d.alpha_jet(geo).value();
            let sv = s.value();
            let q2 = geo.norm2_operator(&geo.ricci_operator()).value();
            vec![alpha * sv, q2, 0.5 * sv * (nf * alpha - sv)]
        }
        LemmaId::L22 => {
            let grad_s = values(&geo.gradient(s));
            vec![traceless_norm2(geo.ricci()), inner(&grad_s, &xi)]
        }
        LemmaId::L23a | LemmaId::L23b => {
            let f = geo.scalar_field(d.potential.as_ref().expect("checked"));
            let grad_f = values(&geo.gradient(&f));
            let hess = geo.hessian(&f);
            let lhs = traceless_norm2(&hess);
            if id == LemmaId::L23a {
                let grad_l = values(&geo.gradient(&d.trace_lambda_jet(geo)));
                vec![
                    lhs,
                    ricci_form(geo, &grad_f, &grad_f),
                    (nf - 1.0) * inner(&grad_l, &grad_f),
                ]
            } else {
                let grad_s = values(&geo.gradient(s));
                vec![lhs, inner(&grad_s, &grad_f)]
            }
        }
        LemmaId::L24 => {
            let lam = d.trace_lambda_jet(geo);
            let grad_l = values(&geo.gradient(&lam));
            let lap = geo.laplacian(&lam).value();
            let sv = s.value();
            vec![
                ricci_form(geo, &grad_l, &xi),
                (nf - 1.0) * inner(&grad_l, &grad_l),
                0.5 * sv * lap,
                (nf - 1.0) * d.rho * sv * lap,
            ]
        }
        LemmaId::L25 => {
            let phi2 = geo.norm2_operator(&phi_jets(geo, &xi_j)).value();
            let target = d.alpha_jet(geo) * (nf - 1.0) - s * 0.5;
            let dt: Vec<f64> = (0..n).map(|i| target.partial(i).value()).collect();
            let xi_target: f64 = dt.iter().zip(&xi).map(|(a, b)| a * b).sum();
            vec![ricci_form(geo, &xi, &xi), phi2, xi_target]
        }
    }
}

fn lemma_names(id: LemmaId) -> &'static [&'static str] {
    match id {
        LemmaId::L21 => &["alpha_s", "q_norm2", "half_s_div_xi"],
        LemmaId::L22 => &["traceless_ric_norm2", "grad_s_xi"],
        LemmaId::L23a => &[
            "traceless_hess_f_norm2",
            "ric_grad_f",
            "n1_grad_lambda_grad_f",
        ],
        LemmaId::L23b => &["traceless_hess_f_norm2", "grad_s_grad_f"],
        LemmaId::L24 => &[
            "ric_grad_lambda_xi",
            "n1_grad_lambda_norm2",
            "half_s_lap_lambda",
            "n1_rho_s_lap_lambda",
        ],
        LemmaId::L25 => &["ric_xi_xi", "phi_norm2", "xi_of_target"],
    }
}

/// Evaluate one integral identity on a compact soliton.
///
/// Refuses when the chart does not match the grid, when the dataset is not a
/// soliton to within [`LEMMA_SOLITON_TOL`], when a gradient lemma lacks a
/// potential, or at the singular coupling of L2.3a.
pub fn lemma_residual(
    id: LemmaId,
    d: &SolitonData,
    grid: &QuadratureGrid,
) -> Result<LemmaResult, IntegralError> {
    let n = d.dim();
    let nf = n as f64;
    if d.metric.compact() != Some(grid.chart()) {
        return Err(refuse(
            id,
            format!(
                "metric '{}' is not on the grid's compact chart",
                d.metric.name
            ),
        ));
    }
    if id.needs_potential() && d.potential.is_none() {
        return Err(refuse(
            id,
            "requires a gradient soliton (no potential supplied)".into(),
        ));
    }
    if id == LemmaId::L23a && (d.rho - 1.0 / (2.0 * (nf - 1.0))).abs() < 1e-12 {
        return Err(refuse(
            id,
            format!("coefficient is singular at rho = 1/(2(n-1)) = {}", d.rho),
        ));
    }
    let grid = grid.with_metric(&d.metric)?;
    let sample = precondition_sample(&grid);
    let checks: Vec<(f64, Option<f64>)> = sample
        .par_iter()
        .map(|p| Ok((residual_norm_at(d, p)?, potential_mismatch(d, p)?)))
        .collect::<Result<_, IntegralError>>()?;
    let soliton_residual = checks.iter().map(|c| c.0).fold(0.0, f64::max);
    if !(soliton_residual < LEMMA_SOLITON_TOL) {
        return Err(refuse(
            id,
            format!("soliton residual {soliton_residual:e} exceeds {LEMMA_SOLITON_TOL:e}; the identity only holds on solitons"),
        ));
    }
    if id.needs_potential() {
        let mismatch = checks.iter().filter_map(|c| c.1).fold(0.0, f64::max);
        if !(mismatch < LEMMA_SOLITON_TOL) {
            return Err(refuse(
                id,
                format!("xi differs from grad f by {mismatch:e}"),
            ));
        }
    }

    let per_node = eval_nodes(&grid, |p| {
        let geo = LocalGeometry::new(&d.metric, p, d.time, id.curvature_order())?;
        Ok(lemma_terms(id, d, &geo))
    })?;
    let terms = integrate_terms(&grid, lemma_names(id), &per_node);
    let t: Vec<f64> = terms.iter().map(|t| t.integral).collect();
    let mut alternative = None;
    let (lhs, rhs) = match id {
        LemmaId::L21 => (t[0] - t[1] - t[2], 0.0),
        LemmaId::L22 => (t[0], (nf - 2.0) / (2.0 * nf) * t[1]),
        LemmaId::L23a => {
            let denom = 1.0 - 2.0 * d.rho * (nf - 1.0);
            let derived = (nf - 2.0) / (nf * denom);
            let printed = (nf - 2.0) / (4.0 * nf * denom);
            let printed_rhs = printed * (t[1] + t[2]);
            alternative = Some(AlternativeForm {
                description: "coefficient (n-2)/(4n(1-2rho(n-1)))".into(),
                lhs: t[0],
                rhs: printed_rhs,
                residual: (t[0] - printed_rhs).abs(),
            });
            (t[0], derived * (t[1] + t[2]))
        }
        LemmaId::L23b => (t[0], (nf - 2.0) / (2.0 * nf) * t[1]),
        LemmaId::L24 => {
            let full = t[0] + t[1] + 2.0 * t[2] - t[3];
            alternative = Some(AlternativeForm {
                description: "S lap(lambda) with coefficient 1 instead of 1/2".into(),
                lhs: full,
                rhs: 0.0,
                residual: full.abs(),
            });
            (t[0] + t[1] + t[2] - t[3], 0.0)
        }
        LemmaId::L25 => (t[0] - t[1] + t[2], 0.0),
    };
    let residual = (lhs - rhs).abs();
    let tolerance = grid.tolerance() * (1.0 + largest_l1(&terms));
    Ok(LemmaResult {
        id: id.to_string(),
        lhs,
        rhs,
        residual,
        terms,
        tolerance,
        pass: residual <= tolerance,
        grid: grid.to_string(),
        soliton_residual,
        alternative,
    })
}

/// CSV header for lemma rows.
pub const LEMMA_CSV_HEADER: &str = "id,lhs,rhs,residual,grid,tolerance,pass";

impl LemmaResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            self.id, self.lhs, self.rhs, self.residual, self.grid, self.tolerance, self.pass
        )
    }
}

/// `Σ_k w_k` against the analytic volume of the chart.
pub fn volume_error(grid: &QuadratureGrid, exact: f64) -> f64 {
    (pairwise_sum(grid.weights()) - exact).abs()
}
