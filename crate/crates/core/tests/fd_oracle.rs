//! Jet-derived quantities against central finite differences (step 1e-5;
//! nested second differences use 1e-4).

mod common;

use common::{central_diff, corpus, invert, rel_err, scalar_value, test_scalar, Case};
use rblab::chartcalc::{
    christoffel, covariant_derivative_11tensor, grad_scalar, hessian_scalar, metric_at,
    ricci_operator, riemann, Operator11,
};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-6;
const POINTS: usize = 20;

fn metric_values(case: &Case, p: &[f64]) -> Vec<f64> {
    metric_at(&case.metric, p, case.time).unwrap().data
}

fn christoffel_values(case: &Case, p: &[f64]) -> Vec<f64> {
    christoffel(&case.metric, p, case.time).unwrap().data
}

/// `Γ^a_{bc}` from differenced metric components.
fn fd_christoffel(case: &Case, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let ginv = invert(&metric_values(case, p), n);
    let dg: Vec<Vec<f64>> = (0..n)
        .map(|k| central_diff(|q| metric_values(case, q), p, k, STEP))
        .collect();
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[a * n + d] * (dg[b][d * n + c] + dg[c][d * n + b] - dg[d][b * n + c]);
                }
                out[(a * n + b) * n + c] = 0.5 * s;
            }
        }
    }
    out
}

/// `R^a_{bcd}` from differenced Christoffel symbols.
fn fd_riemann(case: &Case, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let gam = christoffel_values(case, p);
    let g = |a: usize, b: usize, c: usize| gam[(a * n + b) * n + c];
    let dgam: Vec<Vec<f64>> = (0..n)
        .map(|k| central_diff(|q| christoffel_values(case, q), p, k, STEP))
        .collect();
    let dg = |k: usize, a: usize, b: usize, c: usize| dgam[k][(a * n + b) * n + c];
    let mut out = vec![0.0; n.pow(4)];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dg(c, a, d, b) - dg(d, a, c, b);
                    for e in 0..n {
                        v += g(a, c, e) * g(e, d, b) - g(a, d, e) * g(e, c, b);
                    }
                    out[((a * n + b) * n + c) * n + d] = v;
                }
            }
        }
    }
    out
}

fn for_each_point(mut check: impl FnMut(&Case, &[f64])) {
    let cases = corpus();
    assert!(cases.len() >= 5);
    for (k, case) in cases.iter().enumerate() {
        for p in case.points(POINTS, 1000 + k as u64) {
            check(case, &p);
        }
    }
}

#[test]
fn christoffel_matches_differenced_metric() {
    for_each_point(|case, p| {
        let e = rel_err(&christoffel_values(case, p), &fd_christoffel(case, p));
        assert!(e < TOL, "{} at {p:?}: {e:e}", case.name);
    });
}

#[test]
fn riemann_matches_differenced_christoffel() {
    for_each_point(|case, p| {
        let r = riemann(&case.metric, p, case.time).unwrap().data;
        let e = rel_err(&r, &fd_riemann(case, p));
        assert!(e < TOL, "{} at {p:?}: {e:e}", case.name);
    });
}

#[test]
fn gradient_and_hessian_match_differences() {
    for_each_point(|case, p| {
        let n = p.len();
        let f = test_scalar(n);
        let t = case.time;
        let df: Vec<f64> = (0..n)
            .flat_map(|k| central_diff(|q| vec![scalar_value(&f, q, t)], p, k, STEP))
            .collect();
        let ginv = invert(&metric_values(case, p), n);
        let grad_fd: Vec<f64> = (0..n)
            .map(|a| (0..n).map(|b| ginv[a * n + b] * df[b]).sum())
            .collect();
        let grad = grad_scalar(&case.metric, &f, p, t).unwrap();
        let e = rel_err(&grad, &grad_fd);
        assert!(e < TOL, "{} gradient at {p:?}: {e:e}", case.name);

        let ddf: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                central_diff(
                    |q| {
                        (0..n)
                            .flat_map(|j| {
                                central_diff(|r| vec![scalar_value(&f, r, t)], q, j, 1e-4)
                            })
                            .collect()
                    },
                    p,
                    k,
                    1e-4,
                )
            })
            .collect();
        let gam = christoffel_values(case, p);
        let mut hess_fd = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = ddf[i][j];
                for k in 0..n {
                    v -= gam[(k * n + i) * n + j] * df[k];
                }
                hess_fd[i * n + j] = v;
            }
        }
        let hess = hessian_scalar(&case.metric, &f, p, t).unwrap().data;
        let e = rel_err(&hess, &hess_fd);
        assert!(e < TOL, "{} hessian at {p:?}: {e:e}", case.name);
    });
}

#[test]
fn ricci_operator_derivative_matches_differences() {
    for_each_point(|case, p| {
        let n = p.len();
        let t = case.time;
        let q = ricci_operator(&case.metric, p, t).unwrap().data;
        let dq: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                central_diff(
                    |r| ricci_operator(&case.metric, r, t).unwrap().data,
                    p,
                    k,
                    STEP,
                )
            })
            .collect();
        let gam = christoffel_values(case, p);
        let mut fd = vec![0.0; n * n * n];
        for a in 0..n {
            for c in 0..n {
                for b in 0..n {
                    let mut v = dq[c][a * n + b];
                    for e in 0..n {
                        v += gam[(a * n + c) * n + e] * q[e * n + b]
                            - gam[(e * n + c) * n + b] * q[a * n + e];
                    }
                    fd[(a * n + c) * n + b] = v;
                }
            }
        }
        let nabla = covariant_derivative_11tensor(&case.metric, &Operator11::RicciOperator, p, t)
            .unwrap()
            .data;
        let e = rel_err(&nabla, &fd);
        assert!(e < TOL, "{} nabla Q at {p:?}: {e:e}", case.name);
    });
}
