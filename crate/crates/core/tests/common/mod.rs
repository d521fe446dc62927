#![allow(dead_code)]

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rblab::catalog::{
    cigar_almost_rb, hamilton_cigar, perturbed_sphere_metric, round_sphere_metric,
    warped_product_2d, WarpedParams,
};
use rblab::chartcalc::{ChartMetric, Domain, ScalarField, VectorField};
use rblab::jet::Jet;

/// A metric with a sampling box and evaluation time.
pub struct Case {
    pub name: &'static str,
    pub metric: ChartMetric,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub time: f64,
}

impl Case {
    pub fn points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        random_points(&self.lo, &self.hi, count, seed)
    }
}

pub fn random_points(lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            lo.iter()
                .zip(hi)
                .map(|(a, b)| rng.random_range(*a..*b))
                .collect()
        })
        .collect()
}

pub fn hyperbolic_half_plane() -> ChartMetric {
    ChartMetric::conformally_flat(
        "hyperbolic",
        Domain::boxed(vec![-1e9, 1e-9], vec![1e9, 1e9], "upper half-plane"),
        ScalarField::new(|x, _| (&x[1] * &x[1]).recip()),
    )
}

/// Non-diagonal, diagonally dominant metric on `[−1, 1]³`.
pub fn generic_3d() -> ChartMetric {
    ChartMetric::new("generic-3d", Domain::whole(3), |x, _| {
        let g00 = &x[0] * &x[0] + 1.0;
        let g11 = x[0].cos() * 0.5 + 2.0;
        let g22 = x[2].sin() * 0.2 + 1.5;
        let g01 = x[1].sin() * 0.3;
        let g02 = &x[2] * 0.1;
        let g12 = &x[0] * &x[1] * 0.2;
        vec![
            g00,
            g01.clone(),
            g02.clone(),
            g01,
            g11,
            g12.clone(),
            g02,
            g12,
            g22,
        ]
    })
}

pub fn corpus() -> Vec<Case> {
    let sphere_box = (vec![0.3, 0.0], vec![PI - 0.3, 2.0 * PI]);
    vec![
        Case {
            name: "hamilton-cigar",
            metric: hamilton_cigar().metric,
            lo: vec![-3.0, -3.0],
            hi: vec![3.0, 3.0],
            time: 0.0,
        },
        Case {
            name: "cigar-rb",
            metric: cigar_almost_rb(0.3, 0.2).unwrap().metric,
            lo: vec![-3.0, -3.0],
            hi: vec![3.0, 3.0],
            time: 0.2,
        },
        Case {
            name: "sphere-c2",
            metric: round_sphere_metric(2, 2.0).unwrap(),
            lo: sphere_box.0.clone(),
            hi: sphere_box.1.clone(),
            time: 0.0,
        },
        Case {
            name: "perturbed-sphere",
            metric: perturbed_sphere_metric(0.1),
            lo: sphere_box.0,
            hi: sphere_box.1,
            time: 0.0,
        },
        Case {
            name: "warped-sinh",
            metric: warped_product_2d(WarpedParams::default()).unwrap().metric,
            lo: vec![0.2, 0.0],
            hi: vec![2.0, 2.0 * PI],
            time: 0.0,
        },
        Case {
            name: "hyperbolic",
            metric: hyperbolic_half_plane(),
            lo: vec![-2.0, 0.5],
            hi: vec![2.0, 3.0],
            time: 0.0,
        },
        Case {
            name: "generic-3d",
            metric: generic_3d(),
            lo: vec![-1.0; 3],
            hi: vec![1.0; 3],
            time: 0.0,
        },
    ]
}

/// Smooth non-symmetric test scalar on any chart.
pub fn test_scalar(dim: usize) -> ScalarField {
    ScalarField::new(move |x, _| {
        let mut acc = x[0].sin() * 0.7;
        for (k, v) in x.iter().enumerate().take(dim).skip(1) {
            acc += (v * (0.4 + 0.3 * k as f64)).cos() * &x[0];
        }
        acc
    })
}

pub fn scalar_value(f: &ScalarField, p: &[f64], t: f64) -> f64 {
    f.eval(&Jet::variables(p, 0), t).value()
}

/// Central difference of a vector-valued map along coordinate `k`.
pub fn central_diff<F>(f: F, p: &[f64], k: usize, step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut plus = p.to_vec();
    let mut minus = p.to_vec();
    plus[k] += step;
    minus[k] -= step;
    f(&plus)
        .iter()
        .zip(f(&minus))
        .map(|(a, b)| (a - b) / (2.0 * step))
        .collect()
}

/// Inverse of a small dense matrix by Gauss–Jordan elimination.
pub fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        for k in 0..n {
            m.swap(col * n + k, pivot * n + k);
            inv.swap(col * n + k, pivot * n + k);
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                for k in 0..n {
                    m[r * n + k] -= f * m[col * n + k];
                    inv[r * n + k] -= f * inv[col * n + k];
                }
            }
        }
    }
    inv
}

/// `max |a − b| / max(1, max |b|)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn unit_sphere_embedding(x: &[Jet]) -> [Jet; 3] {
    let s = x[0].sin();
    [&s * &x[1].cos(), &s * &x[1].sin(), x[0].cos()]
}

/// Smooth non-Killing, non-gradient field on the unit sphere: the tangential
/// projection of `V = (y, z², x + z)`, in polar components.
pub fn sphere_generic_xi() -> VectorField {
    VectorField::new(|x, _| {
        let [ex, ey, ez] = unit_sphere_embedding(x);
        let v = [ey.clone(), &ez * &ez, &ex + &ez];
        let (st, ct) = (x[0].sin(), x[0].cos());
        let (sp, cp) = (x[1].sin(), x[1].cos());
        let d_theta = [&ct * &cp, &ct * &sp, -&st];
        let d_phi = [-(&st * &sp), &st * &cp, x[0].zero_like()];
        let dot = |a: &[Jet; 3]| &(&(&v[0] * &a[0]) + &(&v[1] * &a[1])) + &(&v[2] * &a[2]);
        vec![dot(&d_theta), dot(&d_phi) / (&st * &st)]
    })
}

/// Smooth restriction of `xy + 0.3z³ + x` to the unit sphere.
pub fn sphere_generic_lambda() -> ScalarField {
    ScalarField::new(|x, _| {
        let [ex, ey, ez] = unit_sphere_embedding(x);
        &(&ex * &ey) + &(&(&ez * &ez * &ez) * 0.3) + ex.clone()
    })
}
