//! Pointwise geometric quantities returned as plain values.

use crate::jet::Jet;

use super::{
    check_metric_values, ChartMetric, GeomError, LocalGeometry, OperatorField, PointTensor,
    ScalarField, VectorField,
};

/// `g_ij(p, t)` after domain, symmetry and definiteness checks.
pub fn metric_at(m: &ChartMetric, p: &[f64], t: f64) -> Result<PointTensor, GeomError> {
    m.check_point(p)?;
    let n = m.dim();
    let g: Vec<f64> = m
        .components(&Jet::variables(p, 0), t)
        .iter()
        .map(Jet::value)
        .collect();
    check_metric_values(&g, n, p)?;
    Ok(PointTensor::new(0, 2, n, p, g))
}

/// `Γ^a_{bc}` with slots `[a, b, c]`.
pub fn christoffel(m: &ChartMetric, p: &[f64], t: f64) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(PointTensor::from_jets(1, 2, m.dim(), p, geo.christoffel()))
}

/// `R^a_{bcd}` with slots `[a, b, c, d]`, where `R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a`.
pub fn riemann(m: &ChartMetric, p: &[f64], t: f64) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(PointTensor::from_jets(1, 3, m.dim(), p, geo.riemann()))
}

/// Fully covariant `R_{abcd} = g_{ae} R^e_{bcd}`.
pub fn riemann_lowered(m: &ChartMetric, p: &[f64], t: f64) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    let n = m.dim();
    let r = geo.riemann();
    let g = geo.metric();
    let mut data = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for rest in 0..n.pow(3) {
            data.push(
                (0..n)
                    .map(|e| g[a * n + e].value() * r[e * n.pow(3) + rest].value())
                    .sum(),
            );
        }
    }
    Ok(PointTensor::new(0, 4, n, p, data))
}

/// Sectional curvature of the plane spanned by coordinate directions `i`, `j`.
pub fn sectional_curvature(
    m: &ChartMetric,
    p: &[f64],
    t: f64,
    i: usize,
    j: usize,
) -> Result<f64, GeomError> {
    let r = riemann_lowered(m, p, t)?;
    let g = metric_at(m, p, t)?;
    let area = g.get(&[i, i]) * g.get(&[j, j]) - g.get(&[i, j]).powi(2);
    Ok(r.get(&[i, j, i, j]) / area)
}

pub fn ricci(m: &ChartMetric, p: &[f64], t: f64) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(PointTensor::from_jets(0, 2, m.dim(), p, geo.ricci()))
}

pub fn scalar_curvature(m: &ChartMetric, p: &[f64], t: f64) -> Result<f64, GeomError> {
    Ok(LocalGeometry::new(m, p, t, 0)?.scalar().value())
}

/// `Q^a_b` with slots `[a, b]`.
pub fn ricci_operator(m: &ChartMetric, p: &[f64], t: f64) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(PointTensor::from_jets(
        1,
        1,
        m.dim(),
        p,
        &geo.ricci_operator(),
    ))
}

/// `‖Q‖² = Σ_i g(Q e_i, Q e_i)`.
pub fn ricci_operator_norm2(m: &ChartMetric, p: &[f64], t: f64) -> Result<f64, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(geo.norm2_operator(&geo.ricci_operator()).value())
}

pub fn grad_scalar(
    m: &ChartMetric,
    f: &ScalarField,
    p: &[f64],
    t: f64,
) -> Result<Vec<f64>, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(geo
        .gradient(&geo.scalar_field(f))
        .iter()
        .map(Jet::value)
        .collect())
}

pub fn hessian_scalar(
    m: &ChartMetric,
    f: &ScalarField,
    p: &[f64],
    t: f64,
) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(PointTensor::from_jets(
        0,
        2,
        m.dim(),
        p,
        &geo.hessian(&geo.scalar_field(f)),
    ))
}

pub fn laplacian_scalar(
    m: &ChartMetric,
    f: &ScalarField,
    p: &[f64],
    t: f64,
) -> Result<f64, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(geo.laplacian(&geo.scalar_field(f)).value())
}

pub fn lie_derivative_metric(
    m: &ChartMetric,
    xi: &VectorField,
    p: &[f64],
    t: f64,
) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(PointTensor::from_jets(
        0,
        2,
        m.dim(),
        p,
        &geo.lie_derivative(&geo.vector_field(xi)),
    ))
}

pub fn divergence_vf(
    m: &ChartMetric,
    xi: &VectorField,
    p: &[f64],
    t: f64,
) -> Result<f64, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 0)?;
    Ok(geo.divergence(&geo.vector_field(xi)).value())
}

/// A field of `(1,1)` tensors whose covariant derivative can be taken.
#[derive(Debug, Clone)]
pub enum Operator11 {
    Field(OperatorField),
    /// The Ricci operator `Q` of the metric itself.
    RicciOperator,
    /// The skew operator `φ` with `½ dη(X, Y) = g(φX, Y)`, `η = g(ξ, ·)`.
    Phi(VectorField),
}

impl Operator11 {
    /// Jet components `T^a_b` at the geometry's expansion order.
    pub fn jets(&self, geo: &LocalGeometry) -> Vec<Jet> {
        match self {
            Operator11::Field(f) => f.eval(geo.vars(), geo.time()),
            Operator11::RicciOperator => geo.ricci_operator(),
            Operator11::Phi(xi) => phi_jets(geo, &geo.vector_field(xi)),
        }
    }
}

/// `φ^a_i = ½ g^{aj} (∂_i η_j − ∂_j η_i)`.
pub fn phi_jets(geo: &LocalGeometry, xi: &[Jet]) -> Vec<Jet> {
    let n = geo.dim();
    let eta = geo.lower(xi);
    let ginv = geo.inverse_metric();
    let mut d_eta = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            d_eta.push((eta[j].partial(i) - eta[i].partial(j)) * 0.5);
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for i in 0..n {
            let terms: Vec<Jet> = (0..n)
                .map(|j| &ginv[a * n + j] * &d_eta[i * n + j])
                .collect();
            out.push(crate::jet::sum(&terms).expect("n >= 1"));
        }
    }
    out
}

/// `∇T` with slots `[a, c, b]`: the `a`-component of `(∇_{∂_c} T)(∂_b)`.
pub fn covariant_derivative_11tensor(
    m: &ChartMetric,
    op: &Operator11,
    p: &[f64],
    t: f64,
) -> Result<PointTensor, GeomError> {
    let geo = LocalGeometry::new(m, p, t, 1)?;
    let jets = op.jets(&geo);
    Ok(PointTensor::from_jets(
        1,
        2,
        m.dim(),
        p,
        &geo.nabla_operator(&jets),
    ))
}

/// `½∇S − Σ_i (∇Q)(e_i, e_i)` as a vector, with the trace taken in a
/// Gram–Schmidt orthonormal frame.
pub fn bianchi_defect(m: &ChartMetric, p: &[f64], t: f64) -> Result<(Vec<f64>, f64), GeomError> {
    let geo = LocalGeometry::new(m, p, t, 1)?;
    let n = m.dim();
    let nabla_q = geo.nabla_operator(&geo.ricci_operator());
    let grad_s: Vec<f64> = geo.gradient(geo.scalar()).iter().map(Jet::value).collect();
    let frame = geo.frame();
    let mut defect: Vec<f64> = grad_s.iter().map(|v| 0.5 * v).collect();
    for e in &frame {
        for a in 0..n {
            let mut s = 0.0;
            for c in 0..n {
                for b in 0..n {
                    s += e[c] * e[b] * nabla_q[(a * n + c) * n + b].value();
                }
            }
            defect[a] -= s;
        }
    }
    let g: Vec<f64> = geo.metric().iter().map(Jet::value).collect();
    let mut norm2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            norm2 += g[i * n + j] * defect[i] * defect[j];
        }
    }
    Ok((defect, norm2.max(0.0).sqrt()))
}

/// The Ricci operator as an operator field (recomputes the geometry at each call).
///
/// Fields are evaluated on plain coordinate jets, so the metric is expanded
/// two orders higher than the requested jet order. Points where the metric fails its
/// checks yield NaN components.
pub fn ricci_operator_field(m: &ChartMetric) -> OperatorField {
    let m = m.clone();
    OperatorField::new(move |x, t| {
        let point: Vec<f64> = x.iter().map(Jet::value).collect();
        let order = x[0].order();
        match LocalGeometry::new(&m, &point, t, order) {
            Ok(geo) => geo
                .ricci_operator()
                .iter()
                .map(|j| j.truncate(order))
                .collect(),
            Err(_) => {
                let nan = x[0].constant_like(f64::NAN);
                vec![nan; x.len() * x.len()]
            }
        }
    })
}

/// Scalar curvature as a scalar field, rebuilt like [`ricci_operator_field`].
pub fn scalar_curvature_field(m: &ChartMetric) -> ScalarField {
    let m = m.clone();
    ScalarField::new(move |x, t| {
        let point: Vec<f64> = x.iter().map(Jet::value).collect();
        let order = x[0].order();
        match LocalGeometry::new(&m, &point, t, order) {
            Ok(geo) => geo.scalar().truncate(order),
            Err(_) => x[0].constant_like(f64::NAN),
        }
    })
}
