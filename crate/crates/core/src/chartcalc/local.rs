use crate::jet::{self, Jet};

use super::{check_metric_values, ChartMetric, GeomError, ScalarField, VectorField};

/// Jet-level geometry of a metric at one point.
///
/// The metric is expanded to order `curvature_order + 2`, so Christoffel
/// symbols carry `curvature_order + 1` derivatives and the curvature tensors
/// carry `curvature_order`. Index conventions:
///
/// * `gamma[(a*n + b)*n + c] = Γ^a_{bc}`
/// * `riemann[((a*n + b)*n + c)*n + d] = R^a_{bcd}` with
///   `R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a` and `R(X,Y) = [∇_X, ∇_Y] − ∇_{[X,Y]}`
/// * `ricci[b*n + d] = R^a_{bad}`, so `Ric(X,Y) = tr(Z ↦ R(Z,X)Y)`
pub struct LocalGeometry {
    n: usize,
    t: f64,
    point: Vec<f64>,
    vars: Vec<Jet>,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    gamma: Vec<Jet>,
    riemann: Vec<Jet>,
    ricci: Vec<Jet>,
    scalar: Jet,
}

impl LocalGeometry {
    pub fn new(
        m: &ChartMetric,
        p: &[f64],
        t: f64,
        curvature_order: usize,
    ) -> Result<LocalGeometry, GeomError> {
        m.check_point(p)?;
        let n = m.dim();
        let vars = Jet::variables(p, curvature_order + 2);
        let g = m.components(&vars, t);
        if g.len() != n * n {
            return Err(GeomError::DimensionMismatch {
                expected: n * n,
                got: g.len(),
            });
        }
        let values: Vec<f64> = g.iter().map(Jet::value).collect();
        check_metric_values(&values, n, p)?;
        // symmetrize exactly so downstream symmetries hold by construction
        let g: Vec<Jet> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    g[k].clone()
                } else {
                    (&g[i * n + j] + &g[j * n + i]) * 0.5
                }
            })
            .collect();
        let ginv = invert(&g, n);

        let dg: Vec<Vec<Jet>> = (0..n)
            .map(|c| g.iter().map(|e| e.partial(c)).collect())
            .collect();
        let mut gamma: Vec<Jet> = Vec::with_capacity(n * n * n);
        let mut lowered = vec![g[0].partial(0).zero_like(); n * n * n];
        for d in 0..n {
            for b in 0..n {
                for c in b..n {
                    // Γ_{d,bc} = ½(∂_b g_dc + ∂_c g_db − ∂_d g_bc)
                    let v = (&dg[b][d * n + c] + &dg[c][d * n + b] - &dg[d][b * n + c]) * 0.5;
                    lowered[(d * n + b) * n + c] = v.clone();
                    lowered[(d * n + c) * n + b] = v;
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if c < b {
                        let mirror: Jet = gamma[(a * n + c) * n + b].clone();
                        gamma.push(mirror);
                        continue;
                    }
                    let terms: Vec<Jet> = (0..n)
                        .map(|d| &ginv[a * n + d] * &lowered[(d * n + b) * n + c])
                        .collect();
                    gamma.push(jet::sum(&terms).expect("n >= 1"));
                }
            }
        }

        let dgamma: Vec<Vec<Jet>> = (0..n)
            .map(|c| gamma.iter().map(|e| e.partial(c)).collect())
            .collect();
        let gi = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let mut riemann = Vec::with_capacity(n.pow(4));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        if d == c {
                            riemann.push(dgamma[0][0].zero_like());
                            continue;
                        }
                        if d < c {
                            let mirror = -&riemann[((a * n + b) * n + d) * n + c];
                            riemann.push(mirror);
                            continue;
                        }
                        let mut r = &dgamma[c][gi(a, d, b)] - &dgamma[d][gi(a, c, b)];
                        for e in 0..n {
                            r += &gamma[gi(a, c, e)] * &gamma[gi(e, d, b)];
                            r -= &gamma[gi(a, d, e)] * &gamma[gi(e, c, b)];
                        }
                        riemann.push(r);
                    }
                }
            }
        }

        let mut ricci = vec![riemann[0].zero_like(); n * n];
        for b in 0..n {
            for d in b..n {
                let terms: Vec<Jet> = (0..n)
                    .map(|a| riemann[((a * n + b) * n + a) * n + d].clone())
                    .collect();
                let v = jet::sum(&terms).expect("n >= 1");
                let w = if b == d {
                    v
                } else {
                    let terms2: Vec<Jet> = (0..n)
                        .map(|a| riemann[((a * n + d) * n + a) * n + b].clone())
                        .collect();
                    (v + jet::sum(&terms2).expect("n >= 1")) * 0.5
                };
                ricci[b * n + d] = w.clone();
                ricci[d * n + b] = w;
            }
        }
        let scalar = contract2(&ginv, &ricci, n);

        Ok(LocalGeometry {
            n,
            t,
            point: p.to_vec(),
            vars,
            g,
            ginv,
            gamma,
            riemann,
            ricci,
            scalar,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Coordinate variables at the metric's expansion order.
    pub fn vars(&self) -> &[Jet] {
        &self.vars
    }

    pub fn metric(&self) -> &[Jet] {
        &self.g
    }

    pub fn inverse_metric(&self) -> &[Jet] {
        &self.ginv
    }

    pub fn christoffel(&self) -> &[Jet] {
        &self.gamma
    }

    pub fn riemann(&self) -> &[Jet] {
        &self.riemann
    }

    pub fn ricci(&self) -> &[Jet] {
        &self.ricci
    }

    pub fn scalar(&self) -> &Jet {
        &self.scalar
    }

    pub fn scalar_field(&self, f: &ScalarField) -> Jet {
        f.eval(&self.vars, self.t)
    }

    pub fn vector_field(&self, v: &VectorField) -> Vec<Jet> {
        v.eval(&self.vars, self.t)
    }

    /// Mixed `Q^a_b = g^{ac} Ric_{cb}`.
    pub fn ricci_operator(&self) -> Vec<Jet> {
        raise_first(&self.ginv, &self.ricci, self.n)
    }

    /// `(∇f)^a = g^{ab} ∂_b f`.
    pub fn gradient(&self, f: &Jet) -> Vec<Jet> {
        let df: Vec<Jet> = (0..self.n).map(|b| f.partial(b)).collect();
        self.raise(&df)
    }

    pub fn raise(&self, covector: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let terms: Vec<Jet> = (0..n)
                    .map(|b| &self.ginv[a * n + b] * &covector[b])
                    .collect();
                jet::sum(&terms).expect("n >= 1")
            })
            .collect()
    }

    pub fn lower(&self, v: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let terms: Vec<Jet> = (0..n).map(|b| &self.g[a * n + b] * &v[b]).collect();
                jet::sum(&terms).expect("n >= 1")
            })
            .collect()
    }

    pub fn inner(&self, u: &[Jet], v: &[Jet]) -> Jet {
        let lowered = self.lower(u);
        let terms: Vec<Jet> = lowered.iter().zip(v).map(|(a, b)| a * b).collect();
        jet::sum(&terms).expect("n >= 1")
    }

    /// Covariant Hessian `∂_a∂_b f − Γ^c_{ab} ∂_c f`.
    pub fn hessian(&self, f: &Jet) -> Vec<Jet> {
        let n = self.n;
        let df: Vec<Jet> = (0..n).map(|c| f.partial(c)).collect();
        let mut h = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut v = df[a].partial(b);
                for c in 0..n {
                    v -= &self.gamma[(c * n + a) * n + b] * &df[c];
                }
                h.push(v);
            }
        }
        symmetrize(&mut h, n);
        h
    }

    pub fn laplacian(&self, f: &Jet) -> Jet {
        contract2(&self.ginv, &self.hessian(f), self.n)
    }

    /// `(£_ξ g)_{ij} = ξ^k ∂_k g_ij + g_kj ∂_i ξ^k + g_ik ∂_j ξ^k`.
    pub fn lie_derivative(&self, xi: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let dxi: Vec<Vec<Jet>> = (0..n)
            .map(|i| xi.iter().map(|x| x.partial(i)).collect())
            .collect();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut v = self.g[0].partial(0).zero_like();
                for k in 0..n {
                    v += &xi[k] * &self.g[i * n + j].partial(k);
                    v += &self.g[k * n + j] * &dxi[i][k];
                    v += &self.g[i * n + k] * &dxi[j][k];
                }
                out.push(v);
            }
        }
        symmetrize(&mut out, n);
        out
    }

    /// `∂_i ξ^i + Γ^k_{ki} ξ^i`, i.e. `(1/√det g) ∂_i(√det g ξ^i)`.
    pub fn divergence(&self, xi: &[Jet]) -> Jet {
        let n = self.n;
        let mut v = xi[0].partial(0);
        for i in 1..n {
            v += xi[i].partial(i);
        }
        for i in 0..n {
            for k in 0..n {
                v += &self.gamma[(k * n + k) * n + i] * &xi[i];
            }
        }
        v
    }

    /// `(∇_b ξ)^a` stored at `b*n + a`.
    pub fn nabla_vector(&self, xi: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                let mut v = xi[a].partial(b);
                for c in 0..n {
                    v += &self.gamma[(a * n + b) * n + c] * &xi[c];
                }
                out.push(v);
            }
        }
        out
    }

    /// `((∇_c T) ∂_b)^a` stored at `(a*n + c)*n + b` for an operator field `T^a_b`.
    pub fn nabla_operator(&self, op: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for c in 0..n {
                for b in 0..n {
                    let mut v = op[a * n + b].partial(c);
                    for e in 0..n {
                        v += &self.gamma[(a * n + c) * n + e] * &op[e * n + b];
                        v -= &self.gamma[(e * n + c) * n + b] * &op[a * n + e];
                    }
                    out.push(v);
                }
            }
        }
        out
    }

    /// `Σ_i (∇_{e_i} T) e_i = g^{cb} ((∇_c T)∂_b)`, a vector.
    pub fn operator_divergence(&self, nabla_op: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut terms = Vec::with_capacity(n * n);
                for c in 0..n {
                    for b in 0..n {
                        terms.push(&self.ginv[c * n + b] * &nabla_op[(a * n + c) * n + b]);
                    }
                }
                jet::sum(&terms).expect("n >= 1")
            })
            .collect()
    }

    /// Full contraction `g^{ac} g^{bd} T_ab T_cd` of a covariant 2-tensor.
    pub fn norm2_covariant(&self, t: &[Jet]) -> Jet {
        let n = self.n;
        let raised = raise_first(&self.ginv, t, n); // T^a_b
        let mut terms = Vec::with_capacity(n * n);
        // g^{bd} T^a_b T_{ad}
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    terms.push(&self.ginv[b * n + d] * &(&raised[a * n + b] * &t[a * n + d]));
                }
            }
        }
        jet::sum(&terms).expect("n >= 1")
    }

    /// `Σ_i g(T e_i, T e_i) = g_ab T^a_c T^b_d g^{cd}` for an operator `T^a_b`.
    pub fn norm2_operator(&self, op: &[Jet]) -> Jet {
        let n = self.n;
        let mut terms = Vec::with_capacity(n.pow(4));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let w = &self.g[a * n + b] * &self.ginv[c * n + d];
                        terms.push(&w * &(&op[a * n + c] * &op[b * n + d]));
                    }
                }
            }
        }
        jet::sum(&terms).expect("n >= 1")
    }

    pub fn norm2_vector(&self, v: &[Jet]) -> Jet {
        self.inner(v, v)
    }

    /// `g^{ab} T_ab`.
    pub fn trace_covariant(&self, t: &[Jet]) -> Jet {
        contract2(&self.ginv, t, self.n)
    }

    /// Apply the operator `T^a_b` to a vector.
    pub fn apply_operator(&self, op: &[Jet], v: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let terms: Vec<Jet> = (0..n).map(|b| &op[a * n + b] * &v[b]).collect();
                jet::sum(&terms).expect("n >= 1")
            })
            .collect()
    }

    /// Orthonormal frame at the base point (values only).
    pub fn frame(&self) -> Vec<Vec<f64>> {
        let g: Vec<f64> = self.g.iter().map(Jet::value).collect();
        orthonormal_frame(&g, self.n)
    }
}

/// Gram–Schmidt on the coordinate basis with respect to `g` (row-major).
pub fn orthonormal_frame(g: &[f64], n: usize) -> Vec<Vec<f64>> {
    let dot = |u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g[i * n + j] * u[i] * v[j];
            }
        }
        s
    };
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for e in &frame {
            let c = dot(&v, e);
            for i in 0..n {
                v[i] -= c * e[i];
            }
        }
        let norm = dot(&v, &v).sqrt();
        frame.push(v.into_iter().map(|x| x / norm).collect());
    }
    frame
}

/// Gauss–Jordan inverse of a symmetric positive-definite jet matrix.
fn invert(a: &[Jet], n: usize) -> Vec<Jet> {
    let mut m: Vec<Jet> = a.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| a[0].constant_like(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let pivot = m[col * n + col].recip();
        for k in 0..n {
            m[col * n + k] = &m[col * n + k] * &pivot;
            inv[col * n + k] = &inv[col * n + k] * &pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * n + col].clone();
            if factor.coeffs().iter().all(|&c| c == 0.0) {
                continue;
            }
            for k in 0..n {
                let dm = &factor * &m[col * n + k];
                m[r * n + k] -= dm;
                let di = &factor * &inv[col * n + k];
                inv[r * n + k] -= di;
            }
        }
    }
    symmetrize(&mut inv, n);
    inv
}

fn symmetrize(m: &mut [Jet], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let avg = (&m[i * n + j] + &m[j * n + i]) * 0.5;
            m[i * n + j] = avg.clone();
            m[j * n + i] = avg;
        }
    }
}

/// `Σ_ab A^{ab} B_ab`.
fn contract2(a: &[Jet], b: &[Jet], n: usize) -> Jet {
    let terms: Vec<Jet> = (0..n * n).map(|k| &a[k] * &b[k]).collect();
    jet::sum(&terms).expect("n >= 1")
}

/// `C^a_b = A^{ac} B_cb`.
fn raise_first(a: &[Jet], b: &[Jet], n: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let terms: Vec<Jet> = (0..n).map(|c| &a[i * n + c] * &b[c * n + j]).collect();
            out.push(jet::sum(&terms).expect("n >= 1"));
        }
    }
    out
}
