//! Pointwise Riemannian geometry of a metric given on a coordinate chart.
//!
//! Metrics and fields are closures over [`Jet`] coordinates, so every
//! derivative the curvature formulas need is carried exactly by truncated
//! Taylor arithmetic. [`LocalGeometry`] holds the jet-level quantities at one
//! point; the free functions in [`ops`] return plain [`PointTensor`] values.

mod local;
pub mod ops;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::Jet;

pub use local::{orthonormal_frame, LocalGeometry};
pub use ops::*;

/// Floor used when θ-type polar coordinates approach a pole.
pub const POLE_OFFSET: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("point {point:?} lies outside the chart domain {domain}")]
    OutsideDomain { point: Vec<f64>, domain: String },
    #[error(
        "metric is not positive definite at {point:?}: leading minor {minor} equals {value:e}"
    )]
    Degenerate {
        point: Vec<f64>,
        minor: usize,
        value: f64,
    },
    #[error("metric is not symmetric at {point:?}: g[{i}][{j}] differs from g[{j}][{i}]")]
    Asymmetric { point: Vec<f64>, i: usize, j: usize },
    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Coordinate box on which a chart metric is declared.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub label: String,
}

impl Domain {
    pub fn whole(dim: usize) -> Domain {
        Domain {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            label: format!("R^{dim}"),
        }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>, label: impl Into<String>) -> Domain {
        assert_eq!(lo.len(), hi.len());
        Domain {
            lo,
            hi,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (lo, hi))| x >= lo && x <= hi)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.label)?;
        let parts: Vec<String> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect();
        write!(f, "{}", parts.join(" x "))
    }
}

/// Compact charts that carry a quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompactChart {
    /// Polar chart `(θ, φ)` on the round 2-sphere.
    Sphere,
    /// Periodic box `[0, lx) × [0, ly)`.
    Torus { lx: f64, ly: f64 },
}

pub type ScalarFn = dyn Fn(&[Jet], f64) -> Jet + Send + Sync;
pub type VectorFn = dyn Fn(&[Jet], f64) -> Vec<Jet> + Send + Sync;
pub type MetricFn = dyn Fn(&[Jet], f64) -> Vec<Jet> + Send + Sync;

/// Smooth scalar field on a chart, given as a closure over coordinate jets
/// and the time parameter.
#[derive(Clone)]
pub struct ScalarField(Arc<ScalarFn>);

impl ScalarField {
    pub fn new(f: impl Fn(&[Jet], f64) -> Jet + Send + Sync + 'static) -> ScalarField {
        ScalarField(Arc::new(f))
    }

    pub fn constant(value: f64) -> ScalarField {
        ScalarField::new(move |x, _| x[0].constant_like(value))
    }

    pub fn eval(&self, vars: &[Jet], t: f64) -> Jet {
        (self.0)(vars, t)
    }

    /// Plain value at a point.
    pub fn at(&self, p: &[f64], t: f64) -> f64 {
        self.eval(&Jet::variables(p, 0), t).value()
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

/// Smooth vector field; the closure returns the contravariant components.
#[derive(Clone)]
pub struct VectorField(Arc<VectorFn>);

impl VectorField {
    pub fn new(f: impl Fn(&[Jet], f64) -> Vec<Jet> + Send + Sync + 'static) -> VectorField {
        VectorField(Arc::new(f))
    }

    pub fn zero() -> VectorField {
        VectorField::new(|x, _| x.iter().map(Jet::zero_like).collect())
    }

    pub fn eval(&self, vars: &[Jet], t: f64) -> Vec<Jet> {
        (self.0)(vars, t)
    }

    pub fn at(&self, p: &[f64], t: f64) -> Vec<f64> {
        self.eval(&Jet::variables(p, 0), t)
            .iter()
            .map(Jet::value)
            .collect()
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorField(..)")
    }
}

/// Field of linear operators `T^a_b`, row-major with the contravariant index first.
#[derive(Clone)]
pub struct OperatorField(Arc<VectorFn>);

impl OperatorField {
    pub fn new(f: impl Fn(&[Jet], f64) -> Vec<Jet> + Send + Sync + 'static) -> OperatorField {
        OperatorField(Arc::new(f))
    }

    pub fn identity() -> OperatorField {
        OperatorField::new(|x, _| {
            let n = x.len();
            (0..n * n)
                .map(|k| x[0].constant_like(if k / n == k % n { 1.0 } else { 0.0 }))
                .collect()
        })
    }

    pub fn eval(&self, vars: &[Jet], t: f64) -> Vec<Jet> {
        (self.0)(vars, t)
    }
}

impl fmt::Debug for OperatorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OperatorField(..)")
    }
}

/// Riemannian metric on a coordinate chart, optionally time dependent.
#[derive(Clone)]
pub struct ChartMetric {
    pub name: String,
    dim: usize,
    domain: Domain,
    components: Arc<MetricFn>,
    compact: Option<CompactChart>,
}

impl fmt::Debug for ChartMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartMetric")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("compact", &self.compact)
            .finish()
    }
}

impl ChartMetric {
    /// `components` returns the `n × n` matrix `g_ij` in row-major order.
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        components: impl Fn(&[Jet], f64) -> Vec<Jet> + Send + Sync + 'static,
    ) -> ChartMetric {
        ChartMetric {
            name: name.into(),
            dim: domain.dim(),
            domain,
            components: Arc::new(components),
            compact: None,
        }
    }

    /// Metric `factor · δ_ij`.
    pub fn conformally_flat(
        name: impl Into<String>,
        domain: Domain,
        factor: ScalarField,
    ) -> ChartMetric {
        let n = domain.dim();
        ChartMetric::new(name, domain, move |x, t| {
            let w = factor.eval(x, t);
            let zero = w.zero_like();
            (0..n * n)
                .map(|k| {
                    if k / n == k % n {
                        w.clone()
                    } else {
                        zero.clone()
                    }
                })
                .collect()
        })
    }

    /// Metric `diag(d_0, …, d_{n-1})` where the closure returns the diagonal.
    pub fn diagonal(
        name: impl Into<String>,
        domain: Domain,
        diag: impl Fn(&[Jet], f64) -> Vec<Jet> + Send + Sync + 'static,
    ) -> ChartMetric {
        let n = domain.dim();
        ChartMetric::new(name, domain, move |x, t| {
            let d = diag(x, t);
            let zero = x[0].zero_like();
            (0..n * n)
                .map(|k| {
                    if k / n == k % n {
                        d[k / n].clone()
                    } else {
                        zero.clone()
                    }
                })
                .collect()
        })
    }

    pub fn euclidean(dim: usize) -> ChartMetric {
        ChartMetric::conformally_flat("euclidean", Domain::whole(dim), ScalarField::constant(1.0))
    }

    pub fn with_compact(mut self, chart: CompactChart) -> ChartMetric {
        self.compact = Some(chart);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn compact(&self) -> Option<CompactChart> {
        self.compact
    }

    /// Raw jet components, without domain or definiteness checks.
    pub fn components(&self, vars: &[Jet], t: f64) -> Vec<Jet> {
        (self.components)(vars, t)
    }

    pub(crate) fn check_point(&self, p: &[f64]) -> Result<(), GeomError> {
        if p.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        if !self.domain.contains(p) {
            return Err(GeomError::OutsideDomain {
                point: p.to_vec(),
                domain: self.domain.to_string(),
            });
        }
        Ok(())
    }
}

/// Checks symmetry and positive definiteness (leading principal minors) of a
/// row-major metric matrix evaluated at `p`.
pub fn check_metric_values(g: &[f64], n: usize, p: &[f64]) -> Result<(), GeomError> {
    if g.len() != n * n {
        return Err(GeomError::DimensionMismatch {
            expected: n * n,
            got: g.len(),
        });
    }
    let scale = g
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in i + 1..n {
            if (g[i * n + j] - g[j * n + i]).abs() > 1e-12 * scale {
                return Err(GeomError::Asymmetric {
                    point: p.to_vec(),
                    i,
                    j,
                });
            }
        }
    }
    for k in 1..=n {
        let minor = determinant(
            &(0..k * k)
                .map(|e| g[(e / k) * n + e % k])
                .collect::<Vec<_>>(),
            k,
        );
        if !(minor > 0.0) {
            return Err(GeomError::Degenerate {
                point: p.to_vec(),
                minor: k,
                value: minor,
            });
        }
    }
    Ok(())
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let d = m[col * n + col];
        det *= d;
        for r in col + 1..n {
            let factor = m[r * n + col] / d;
            for k in col..n {
                m[r * n + k] -= factor * m[col * n + k];
            }
        }
    }
    det
}

/// Tensor components at a single point.
///
/// Components are stored row-major over the slots, contravariant slots first.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTensor {
    pub contravariant: usize,
    pub covariant: usize,
    pub dim: usize,
    pub point: Vec<f64>,
    pub data: Vec<f64>,
}

impl PointTensor {
    pub fn new(
        contravariant: usize,
        covariant: usize,
        dim: usize,
        point: &[f64],
        data: Vec<f64>,
    ) -> PointTensor {
        debug_assert_eq!(data.len(), dim.pow((contravariant + covariant) as u32));
        PointTensor {
            contravariant,
            covariant,
            dim,
            point: point.to_vec(),
            data,
        }
    }

    pub fn from_jets(
        contravariant: usize,
        covariant: usize,
        dim: usize,
        point: &[f64],
        jets: &[Jet],
    ) -> PointTensor {
        PointTensor::new(
            contravariant,
            covariant,
            dim,
            point,
            jets.iter().map(Jet::value).collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.contravariant + self.covariant
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.rank(), "wrong number of indices");
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &PointTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|T[..i..j..] − T[..j..i..]|` over the given pair of slots.
    pub fn slot_asymmetry(&self, s1: usize, s2: usize, skew: bool) -> f64 {
        let rank = self.rank();
        let total = self.data.len();
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for slot in (0..rank).rev() {
                idx[slot] = rem % self.dim;
                rem /= self.dim;
            }
            let a = self.data[flat];
            idx.swap(s1, s2);
            let b = self.data[self.offset(&idx)];
            let d = if skew { a + b } else { a - b };
            worst = worst.max(d.abs());
        }
        worst
    }
}
