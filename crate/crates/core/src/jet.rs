//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients of a scalar function of `n`
//! variables around a base point, up to a fixed total degree. Arithmetic on
//! jets propagates all mixed partial derivatives exactly (up to rounding), so
//! curvature quantities built from metric jets carry their own derivatives.
//!
//! Coefficients are stored in graded order: every monomial of degree `d`
//! comes before any monomial of degree `d + 1`, and the ordering inside one
//! degree does not depend on the truncation order. A jet of order `k` is
//! therefore a prefix of the same jet at any higher order, which makes
//! truncation and mixed-order arithmetic a slice operation.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

/// Highest truncation order supported.
pub const MAX_ORDER: usize = 8;

/// Monomial bookkeeping shared by all jets with the same shape.
pub struct Layout {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    mul: Vec<(u32, u32, u32)>,
    deriv: Vec<Vec<(u32, u32, f64)>>,
    factorials: Vec<f64>,
    index: HashMap<Vec<u8>, usize>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.exps.len())
            .finish()
    }
}

fn monomials(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(nvars: usize, left: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == nvars {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e as u8);
            rec(nvars, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(nvars, degree, &mut Vec::with_capacity(nvars), &mut out);
    out
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        assert!(nvars >= 1, "jets need at least one variable");
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let exps: Vec<Vec<u8>> = (0..=order).flat_map(|d| monomials(nvars, d)).collect();
        let index: HashMap<Vec<u8>, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&v| v as usize).sum::<usize>();

        let mut mul = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if degree(a) + degree(b) > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((i as u32, j as u32, index[&sum] as u32));
            }
        }

        let mut deriv = vec![Vec::new(); nvars];
        for (v, table) in deriv.iter_mut().enumerate() {
            for (dst, e) in exps.iter().enumerate() {
                if degree(e) + 1 > order {
                    continue;
                }
                let mut up = e.clone();
                up[v] += 1;
                table.push((index[&up] as u32, dst as u32, up[v] as f64));
            }
        }

        let factorials = exps
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&k| (1..=k as u32).product::<u32>() as f64)
                    .product()
            })
            .collect();

        Layout {
            nvars,
            order,
            exps,
            mul,
            deriv,
            factorials,
            index,
        }
    }

    /// Shared layout for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> &'static Layout {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("layout cache poisoned");
        map.entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(Layout::build(nvars, order))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }
}

/// Truncated Taylor expansion of a scalar around a point.
///
/// `coeffs[k]` multiplies the monomial `δ^α` for the `k`-th multi-index `α`,
/// so the mixed partial `∂^α f` equals `coeffs[k] · α!`.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Jet {
        let layout = Layout::get(nvars, order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Jet {
        assert!(
            var < nvars,
            "variable index {var} out of range for {nvars} variables"
        );
        let mut jet = Jet::constant(nvars, order, value);
        if order >= 1 {
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    /// All coordinate functions around `point`.
    pub fn variables(point: &[f64], order: usize) -> Vec<Jet> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(n, order, i, v))
            .collect()
    }

    /// A constant with the same shape as `self`.
    pub fn constant_like(&self, value: f64) -> Jet {
        Jet::constant(self.layout.nvars, self.layout.order, value)
    }

    pub fn zero_like(&self) -> Jet {
        self.constant_like(0.0)
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Mixed partial derivative `∂^α f` at the base point.
    ///
    /// Returns `None` when `|α|` exceeds the jet order.
    pub fn derivative(&self, alpha: &[u8]) -> Option<f64> {
        let k = *self.layout.index.get(alpha)?;
        Some(self.coeffs[k] * self.layout.factorials[k])
    }

    /// First partials at the base point.
    pub fn gradient_values(&self) -> Vec<f64> {
        (0..self.nvars())
            .map(|i| {
                if self.order() >= 1 {
                    self.coeffs[1 + i]
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    /// Truncate to a lower order; returns a clone when `order` is not lower.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.layout.order {
            return self.clone();
        }
        let layout = Layout::get(self.layout.nvars, order);
        Jet {
            layout,
            coeffs: self.coeffs[..layout.len()].to_vec(),
        }
    }

    /// Partial derivative with respect to variable `var`, as a jet one order lower.
    ///
    /// Panics on order-0 jets, whose derivatives are not represented.
    pub fn partial(&self, var: usize) -> Jet {
        let order = self.layout.order;
        assert!(order >= 1, "cannot differentiate an order-0 jet");
        let layout = Layout::get(self.layout.nvars, order - 1);
        let mut coeffs = vec![0.0; layout.len()];
        for &(src, dst, factor) in &self.layout.deriv[var] {
            coeffs[dst as usize] = factor * self.coeffs[src as usize];
        }
        Jet { layout, coeffs }
    }

    /// Evaluate `Σ_k c_k (self − self(0))^k`, i.e. compose a univariate
    /// function with Taylor coefficients `c_k = f^{(k)}(a)/k!` at `a = self(0)`.
    ///
    /// Coefficients beyond the jet order are ignored; missing ones count as 0.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let order = self.layout.order;
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let top = order.min(taylor.len().saturating_sub(1));
        let mut acc = self.constant_like(taylor.get(top).copied().unwrap_or(0.0));
        for k in (0..top).rev() {
            acc = &acc * &delta;
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    fn taylor_len(&self) -> usize {
        self.layout.order + 1
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let mut c = Vec::with_capacity(self.taylor_len());
        let mut term = 1.0 / a;
        for _ in 0..self.taylor_len() {
            c.push(term);
            term *= -1.0 / a;
        }
        self.compose(&c)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut c = Vec::with_capacity(self.taylor_len());
        let mut fact = 1.0;
        for k in 0..self.taylor_len() {
            if k > 0 {
                fact *= k as f64;
            }
            c.push(e / fact);
        }
        self.compose(&c)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut c = vec![a.ln()];
        for k in 1..self.taylor_len() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            c.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&c)
    }

    /// `self^p` for real `p`; the base value must be positive unless `p` is a
    /// nonnegative integer.
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut c = Vec::with_capacity(self.taylor_len());
        let mut binom = 1.0;
        for k in 0..self.taylor_len() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            let power = p - k as f64;
            let base = if binom == 0.0 {
                0.0
            } else {
                binom * a.powf(power)
            };
            c.push(base);
        }
        self.compose(&c)
    }

    pub fn powi(&self, p: i32) -> Jet {
        match p {
            0 => self.constant_like(1.0),
            1 => self.clone(),
            2 => self * self,
            _ if p < 0 => self.powi(-p).recip(),
            _ => {
                let half = self.powi(p / 2);
                let sq = &half * &half;
                if p % 2 == 1 {
                    &sq * self
                } else {
                    sq
                }
            }
        }
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    fn trig_coeffs(&self, d0: f64, d1: f64, d2: f64, d3: f64) -> Vec<f64> {
        let cycle = [d0, d1, d2, d3];
        let mut fact = 1.0;
        (0..self.taylor_len())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect()
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&self.trig_coeffs(s, c, -s, -c))
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&self.trig_coeffs(c, -s, -c, s))
    }

    pub fn sinh(&self) -> Jet {
        let a = self.value();
        let (s, c) = (a.sinh(), a.cosh());
        self.compose(&self.trig_coeffs(s, c, s, c))
    }

    pub fn cosh(&self) -> Jet {
        let a = self.value();
        let (s, c) = (a.sinh(), a.cosh());
        self.compose(&self.trig_coeffs(c, s, c, s))
    }

    fn pick_layout(a: &Jet, b: &Jet) -> &'static Layout {
        debug_assert_eq!(
            a.layout.nvars, b.layout.nvars,
            "jets over different variable sets"
        );
        if a.layout.order <= b.layout.order {
            a.layout
        } else {
            b.layout
        }
    }

    fn zip_with(a: &Jet, b: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        let layout = Jet::pick_layout(a, b);
        let coeffs = a.coeffs[..layout.len()]
            .iter()
            .zip(&b.coeffs[..layout.len()])
            .map(|(&x, &y)| op(x, y))
            .collect();
        Jet { layout, coeffs }
    }

    fn product(a: &Jet, b: &Jet) -> Jet {
        let layout = Jet::pick_layout(a, b);
        let mut coeffs = vec![0.0; layout.len()];
        for &(i, j, k) in &layout.mul {
            coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
        Jet { layout, coeffs }
    }

    fn map(&self, op: impl Fn(f64) -> f64) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|&x| op(x)).collect(),
        }
    }
}

/// Sum of jets; `None` for an empty iterator.
pub fn sum<'a>(items: impl IntoIterator<Item = &'a Jet>) -> Option<Jet> {
    let mut iter = items.into_iter();
    let first = iter.next()?.clone();
    Some(iter.fold(first, |acc, j| &acc + j))
}

/// Re-expand coordinate variables at a higher order around the same point.
///
/// Only meaningful when `vars` are the plain coordinate functions, which is
/// how the geometry engine calls every field.
pub fn lift_variables(vars: &[Jet], extra: usize) -> Vec<Jet> {
    let point: Vec<f64> = vars.iter().map(Jet::value).collect();
    let order = vars.first().map_or(0, Jet::order) + extra;
    Jet::variables(&point, order)
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $body:expr, $scalar:expr, $rscalar:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                let f: fn(&Jet, f64) -> Jet = $scalar;
                f(self, rhs)
            }
        }
        impl $trait<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<&Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(f64, &Jet) -> Jet = $rscalar;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(
    Add,
    add,
    |a, b| Jet::zip_with(a, b, |x, y| x + y),
    |a, s| {
        let mut r = a.clone();
        r.coeffs[0] += s;
        r
    },
    |s, a| a + s
);
jet_binop!(
    Sub,
    sub,
    |a, b| Jet::zip_with(a, b, |x, y| x - y),
    |a, s| {
        let mut r = a.clone();
        r.coeffs[0] -= s;
        r
    },
    |s, a| {
        let mut r = -a;
        r.coeffs[0] += s;
        r
    }
);
jet_binop!(Mul, mul, Jet::product, |a, s| a.map(|x| x * s), |s, a| a
    .map(|x| x * s));
jet_binop!(
    Div,
    div,
    |a, b| Jet::product(a, &b.recip()),
    |a, s| a.map(|x| x / s),
    |s, a| a.recip().map(|x| x * s)
);

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|x| -x)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.layout.order >= self.layout.order {
            for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                *x += y;
            }
        } else {
            *self = &*self + rhs;
        }
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.layout.order >= self.layout.order {
            for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                *x -= y;
            }
        } else {
            *self = &*self - rhs;
        }
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        for x in &mut self.coeffs {
            *x *= rhs;
        }
    }
}
