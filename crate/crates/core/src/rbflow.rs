//! The Ricci–Bourguignon flow `∂g/∂t = −2(Ric − ρSg)` on surfaces in
//! conformal gauge `g = e^{2u}(dx² + dy²)`.
//!
//! In dimension two `Ric = (S/2) g` and `S = −2e^{−2u}Δ₀u`, so the flow
//! reduces to the scalar equation
//!
//! ```text
//! u_t = (1 − 2ρ) e^{−2u} Δ₀u
//! ```
//!
//! with `Δ₀` the flat Laplacian. It is parabolic for `ρ < ½`, trivial at
//! `ρ = ½` and backward-parabolic beyond.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::jet::Jet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("rho = {rho} > 1/2 makes the flow backward-parabolic; refused")]
    Refused { rho: f64 },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("non-finite state at t = {time} after {steps} steps")]
    BlowUp {
        time: f64,
        steps: usize,
        trajectory: Trajectory,
    },
    #[error("invalid flow parameter: {0}")]
    Parameter(String),
}

pub type BoundaryFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// Time-indexed family of spatial profiles.
pub type ReferenceFn = dyn Fn(f64) -> Box<dyn Fn(f64, f64) -> f64> + Send + Sync;

/// Edge treatment of the computational box.
#[derive(Clone)]
pub enum Boundary {
    Periodic,
    /// Edge nodes pinned to `f(x, y, t)`.
    Dirichlet {
        label: String,
        f: Arc<BoundaryFn>,
    },
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("Periodic"),
            Boundary::Dirichlet { label, .. } => write!(f, "Dirichlet({label})"),
        }
    }
}

/// Conformal factor sampled on a uniform grid; `u[i*ny + j]` sits at
/// `(x0 + i h, y0 + j h)`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    pub rho: f64,
    pub time: f64,
    pub boundary: Boundary,
}

impl FlowState {
    pub fn from_fn(
        nx: usize,
        ny: usize,
        h: f64,
        origin: (f64, f64),
        rho: f64,
        boundary: Boundary,
        u0: impl Fn(f64, f64) -> f64,
    ) -> Result<FlowState, FlowError> {
        if nx < 3 || ny < 3 || !(h > 0.0) || !h.is_finite() {
            return Err(FlowError::Parameter(format!(
                "grid {nx}x{ny} with spacing {h} is unusable"
            )));
        }
        if !rho.is_finite() {
            return Err(FlowError::Parameter(format!(
                "rho must be finite, got {rho}"
            )));
        }
        let mut u = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                u.push(u0(origin.0 + i as f64 * h, origin.1 + j as f64 * h));
            }
        }
        Ok(FlowState {
            u,
            nx,
            ny,
            h,
            x0: origin.0,
            y0: origin.1,
            rho,
            time: 0.0,
            boundary,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.h
    }

    /// Flat 5-point Laplacian at every node; zero on Dirichlet edges.
    pub fn flat_laplacian(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.u.len()];
        stencil_into(&self.u, self, &mut out, |_, lap| lap);
        out
    }

    /// `S = −2 e^{−2u} Δ₀u`; zero on Dirichlet edges.
    pub fn scalar_curvature(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.u.len()];
        stencil_into(&self.u, self, &mut out, |n, lap| {
            -2.0 * (-2.0 * self.u[n]).exp() * lap
        });
        out
    }

    /// `Σ e^{2u} h²`.
    pub fn area(&self) -> f64 {
        let cells: Vec<f64> = self
            .u
            .iter()
            .map(|u| (2.0 * u).exp() * self.h * self.h)
            .collect();
        crate::quad::pairwise_sum(&cells)
    }

    /// `h² / (4 (1−2ρ) max e^{−2u})`, infinite when the flow is trivial.
    pub fn cfl_bound(&self) -> f64 {
        let a = 1.0 - 2.0 * self.rho;
        if a <= 0.0 {
            return f64::INFINITY;
        }
        let min_u = self
            .u
            .iter()
            .fold(f64::INFINITY, |m, &v| if v < m { v } else { m });
        self.h * self.h / (4.0 * a * (-2.0 * min_u).exp())
    }

    fn edge_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        let rows = (0..nx).flat_map(move |i| [(i, 0), (i, ny - 1)]);
        let cols = (1..ny - 1).flat_map(move |j| [(0, j), (nx - 1, j)]);
        rows.chain(cols)
    }

    /// Sets Dirichlet edge values of `u` (and of `w = e^{−2u}`) at time `t`.
    fn pin_edges(&self, u: &mut [f64], w: &mut [f64], t: f64) {
        if let Boundary::Dirichlet { f, .. } = &self.boundary {
            for (i, j) in self.edge_nodes() {
                let n = i * self.ny + j;
                u[n] = f(self.x(i), self.y(j), t);
                w[n] = (-2.0 * u[n]).exp();
            }
        }
    }
}

/// Writes `op(n, Δ₀u)` at interior (or all periodic) nodes `n` and 0 on Dirichlet edges.
fn stencil_into(u: &[f64], s: &FlowState, out: &mut [f64], op: impl Fn(usize, f64) -> f64 + Sync) {
    let (nx, ny) = (s.nx, s.ny);
    let inv_h2 = 1.0 / (s.h * s.h);
    let periodic = matches!(s.boundary, Boundary::Periodic);
    let body = |(i, row): (usize, &mut [f64])| {
        if !periodic && (i == 0 || i + 1 == nx) {
            row.fill(0.0);
            return;
        }
        let (ip, im) = if periodic {
            ((i + 1) % nx, (i + nx - 1) % nx)
        } else {
            (i + 1, i - 1)
        };
        let (up, uc, um) = (
            &u[ip * ny..(ip + 1) * ny],
            &u[i * ny..(i + 1) * ny],
            &u[im * ny..(im + 1) * ny],
        );
        let lap = |j: usize, jp: usize, jm: usize| {
            (up[j] + um[j] + uc[jp] + uc[jm] - 4.0 * uc[j]) * inv_h2
        };
        let base = i * ny;
        if periodic {
            row[0] = op(base, lap(0, 1, ny - 1));
            row[ny - 1] = op(base + ny - 1, lap(ny - 1, 0, ny - 2));
        } else {
            row[0] = 0.0;
            row[ny - 1] = 0.0;
        }
        for j in 1..ny - 1 {
            row[j] = op(base + j, lap(j, j + 1, j - 1));
        }
    };
    if rayon::current_num_threads() > 1 {
        out.par_chunks_mut(ny).enumerate().for_each(body);
    } else {
        out.chunks_mut(ny).enumerate().for_each(body);
    }
}

/// `(1−2ρ) w Δ₀u` with `w = e^{−2u}` supplied.
fn rhs_into(u: &[f64], w: &[f64], s: &FlowState, out: &mut [f64]) {
    let a = 1.0 - 2.0 * s.rho;
    stencil_into(u, s, out, |n, lap| a * w[n] * lap);
}

/// Degree-5 Taylor polynomial of `e^x`; relative error below `x⁶/6!`.
fn exp_taylor(x: f64) -> f64 {
    1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0)))))
}

/// Largest `|x|` for which [`exp_taylor`] is used.
const TAYLOR_LIMIT: f64 = 1e-3;

fn exp_factor(u: &[f64]) -> Vec<f64> {
    u.iter().map(|u| (-2.0 * u).exp()).collect()
}

/// `du/dt = (1−2ρ) e^{−2u} Δ₀u`; zero on Dirichlet edges.
pub fn rhs(state: &FlowState) -> Result<Vec<f64>, FlowError> {
    if state.rho > 0.5 {
        return Err(FlowError::Refused { rho: state.rho });
    }
    let mut out = vec![0.0; state.u.len()];
    rhs_into(&state.u, &exp_factor(&state.u), state, &mut out);
    Ok(out)
}

/// Number of steps between exact recomputations of `e^{−2u}`.
const RESYNC_STEPS: usize = 32;

/// Scratch buffers for RK4. `w` tracks `e^{−2u}` of the current state.
struct Workspace {
    acc: Vec<f64>,
    stage: [Vec<f64>; 2],
    w_stage: [Vec<f64>; 2],
    w: Vec<f64>,
    since_sync: usize,
}

impl Workspace {
    fn new(u: &[f64]) -> Workspace {
        let len = u.len();
        Workspace {
            acc: vec![0.0; len],
            stage: [vec![0.0; len], vec![0.0; len]],
            w_stage: [vec![0.0; len], vec![0.0; len]],
            w: exp_factor(u),
            since_sync: 0,
        }
    }
}

/// Stage coefficients: `acc ← keep·acc + weight·k`, increment `c·(carry·acc + k)`.
#[derive(Clone, Copy)]
struct StageCoeffs {
    keep: f64,
    weight: f64,
    carry: f64,
    c: f64,
}

/// Neighbour values of a run of nodes: north, south, centre, east, west.
struct Stencil<'a> {
    up: &'a [f64],
    down: &'a [f64],
    centre: &'a [f64],
    east: &'a [f64],
    west: &'a [f64],
}

type RowChunks<'a> = (usize, ((&'a mut [f64], &'a mut [f64]), &'a mut [f64]));

/// Applies a fused stage to a run of nodes with equal-length slices; returns
/// the largest exponent `|−2d|` seen.
#[allow(clippy::too_many_arguments)]
fn stage_run(
    sc: StageCoeffs,
    a: f64,
    st: Option<Stencil>,
    w_src: &[f64],
    u: &[f64],
    w: &[f64],
    acc: &mut [f64],
    dst: &mut [f64],
    w_dst: &mut [f64],
) -> f64 {
    let n = dst.len();
    let (u, w, acc, w_dst) = (&u[..n], &w[..n], &mut acc[..n], &mut w_dst[..n]);
    let mut worst = 0.0f64;
    match st {
        Some(st) => {
            let (up, down, centre) = (&st.up[..n], &st.down[..n], &st.centre[..n]);
            let (east, west, w_src) = (&st.east[..n], &st.west[..n], &w_src[..n]);
            for j in 0..n {
                let k = a * w_src[j] * (up[j] + down[j] + east[j] + west[j] - 4.0 * centre[j]);
                let inc = sc.c * (sc.carry * acc[j] + k);
                acc[j] = sc.keep * acc[j] + sc.weight * k;
                dst[j] = u[j] + inc;
                let x = -2.0 * inc;
                worst = worst.max(x.abs());
                w_dst[j] = w[j] * exp_taylor(x);
            }
        }
        None => {
            for j in 0..n {
                let inc = sc.c * sc.carry * acc[j];
                acc[j] *= sc.keep;
                dst[j] = u[j] + inc;
                let x = -2.0 * inc;
                worst = worst.max(x.abs());
                w_dst[j] = w[j] * exp_taylor(x);
            }
        }
    }
    worst
}

/// One fused RK4 stage: `k = (1−2ρ) w_src Δ₀u_src`, then
/// `u_dst = u + d` and `w_dst = w e^{−2d}` with `d` from [`StageCoeffs`].
#[allow(clippy::too_many_arguments)]
fn fused_stage(
    state: &FlowState,
    w: &[f64],
    src: &[f64],
    w_src: &[f64],
    acc: &mut [f64],
    dst: &mut [f64],
    w_dst: &mut [f64],
    sc: StageCoeffs,
) {
    let (nx, ny) = (state.nx, state.ny);
    let a = (1.0 - 2.0 * state.rho) / (state.h * state.h);
    let periodic = matches!(state.boundary, Boundary::Periodic);
    let u = &state.u;
    let body = |(i, ((d, wd), ac)): RowChunks| {
        let r = i * ny..(i + 1) * ny;
        let (ur, wr, wsr) = (&u[r.clone()], &w[r.clone()], &w_src[r.clone()]);
        let worst = if !periodic && (i == 0 || i + 1 == nx) {
            stage_run(sc, a, None, wsr, ur, wr, ac, d, wd)
        } else {
            let (ip, im) = if periodic {
                ((i + 1) % nx, (i + nx - 1) % nx)
            } else {
                (i + 1, i - 1)
            };
            let (up, uc, um) = (
                &src[ip * ny..(ip + 1) * ny],
                &src[r.clone()],
                &src[im * ny..(im + 1) * ny],
            );
            let inner = Stencil {
                up: &up[1..],
                down: &um[1..],
                centre: &uc[1..],
                east: &uc[2..],
                west: &uc[..ny - 2],
            };
            let last = ny - 1;
            let (d_mid, d_last) = d.split_at_mut(last);
            let (wd_mid, wd_last) = wd.split_at_mut(last);
            let (ac_mid, ac_last) = ac.split_at_mut(last);
            let mut worst = stage_run(
                sc,
                a,
                Some(inner),
                &wsr[1..],
                &ur[1..],
                &wr[1..],
                &mut ac_mid[1..],
                &mut d_mid[1..],
                &mut wd_mid[1..],
            );
            let ends = [(0usize, last, 1usize), (last, ny - 2, 0)];
            let (first, second) = if periodic {
                let mk = |(j, west, east): (usize, usize, usize)| Stencil {
                    up: &up[j..],
                    down: &um[j..],
                    centre: &uc[j..],
                    east: &uc[east..],
                    west: &uc[west..],
                };
                (Some(mk(ends[0])), Some(mk(ends[1])))
            } else {
                (None, None)
            };
            worst = worst.max(stage_run(
                sc,
                a,
                first,
                wsr,
                ur,
                wr,
                ac_mid,
                &mut d_mid[..1],
                wd_mid,
            ));
            worst.max(stage_run(
                sc,
                a,
                second,
                &wsr[last..],
                &ur[last..],
                &wr[last..],
                ac_last,
                d_last,
                wd_last,
            ))
        };
        if !(worst < TAYLOR_LIMIT) {
            for j in 0..ny {
                wd[j] = wr[j] * (-2.0 * (d[j] - ur[j])).exp();
            }
        }
    };
    if rayon::current_num_threads() > 1 {
        dst.par_chunks_mut(ny)
            .zip(w_dst.par_chunks_mut(ny))
            .zip(acc.par_chunks_mut(ny))
            .enumerate()
            .for_each(body);
    } else {
        dst.chunks_mut(ny)
            .zip(w_dst.chunks_mut(ny))
            .zip(acc.chunks_mut(ny))
            .enumerate()
            .for_each(body);
    }
}

/// Advances `state.u` into `out` and `ws.w` to the matching `e^{−2u}`.
fn rk4_into(state: &FlowState, dt: f64, ws: &mut Workspace, out: &mut Vec<f64>) {
    let t = state.time;
    let Workspace {
        acc,
        stage,
        w_stage,
        w,
        since_sync,
    } = ws;
    let [s1, s2] = stage;
    let [w1, w2] = w_stage;
    let half = 0.5 * dt;
    let coeffs = |keep, weight, carry, c| StageCoeffs {
        keep,
        weight,
        carry,
        c,
    };
    fused_stage(
        state,
        w,
        &state.u,
        w,
        acc,
        s1,
        w1,
        coeffs(0.0, 1.0, 0.0, half),
    );
    state.pin_edges(s1, w1, t + half);
    fused_stage(state, w, s1, w1, acc, s2, w2, coeffs(1.0, 2.0, 0.0, half));
    state.pin_edges(s2, w2, t + half);
    fused_stage(state, w, s2, w2, acc, s1, w1, coeffs(1.0, 2.0, 0.0, dt));
    state.pin_edges(s1, w1, t + dt);
    out.resize(state.u.len(), 0.0);
    fused_stage(
        state,
        w,
        s1,
        w1,
        acc,
        out,
        w2,
        coeffs(1.0, 1.0, 1.0, dt / 6.0),
    );
    *since_sync += 1;
    if *since_sync >= RESYNC_STEPS {
        *w = exp_factor(out);
        *since_sync = 0;
    } else {
        std::mem::swap(w, w2);
    }
    state.pin_edges(out, w, t + dt);
}

fn check_step(state: &FlowState, dt: f64) -> Result<(), FlowError> {
    check_step_against(state, dt, state.cfl_bound())
}

fn check_step_against(state: &FlowState, dt: f64, bound: f64) -> Result<(), FlowError> {
    if state.rho > 0.5 {
        return Err(FlowError::Refused { rho: state.rho });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FlowError::Parameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if dt > bound {
        return Err(FlowError::Cfl { dt, bound });
    }
    Ok(())
}

/// One classical RK4 step. Dirichlet edges follow the boundary data at each
/// stage time. At `ρ = ½` the state is returned unchanged apart from its clock.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
    check_step(state, dt)?;
    let mut next = state.clone();
    next.time = state.time + dt;
    if state.rho != 0.5 {
        rk4_into(state, dt, &mut Workspace::new(&state.u), &mut next.u);
    }
    Ok(next)
}

/// Time-step selection for [`run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// A fraction of the stability bound, re-evaluated every step.
    Cfl {
        fraction: f64,
    },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Cfl { fraction: 0.9 }
    }
}

/// One row of monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub max_abs_s: f64,
    pub area: f64,
    /// `sup |u − reference|` over the error window, when a reference exists.
    pub sup_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub steps: usize,
}

pub const TRAJECTORY_CSV_HEADER: &str = "time,max_abs_S,area,sup_err";

impl TrajectoryRow {
    pub fn csv_row(&self) -> String {
        let err = self
            .sup_err
            .map(|e| format!("{e:.16e}"))
            .unwrap_or_default();
        format!(
            "{:.16e},{:.16e},{:.16e},{}",
            self.time, self.max_abs_s, self.area, err
        )
    }
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryRow {
        self.rows
            .last()
            .expect("trajectories start with the initial row")
    }
}

/// Reference solution and the fraction of the box on which errors are measured.
#[derive(Clone)]
pub struct Reference {
    /// Maps a time to the reference profile `(x, y) ↦ u` at that time.
    pub at: Arc<ReferenceFn>,
    /// Errors are taken over the centred sub-box spanning this fraction of each side.
    pub window: f64,
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Reference(window={})", self.window)
    }
}

fn sup_error(state: &FlowState, reference: &Reference) -> f64 {
    let lx = (state.nx - 1) as f64 * state.h;
    let ly = (state.ny - 1) as f64 * state.h;
    let (cx, cy) = (state.x0 + 0.5 * lx, state.y0 + 0.5 * ly);
    let (rx, ry) = (0.5 * reference.window * lx, 0.5 * reference.window * ly);
    let tol = 1e-12 * state.h;
    let profile = (reference.at)(state.time);
    let mut worst = 0.0f64;
    for i in 0..state.nx {
        let x = state.x(i);
        if (x - cx).abs() > rx + tol {
            continue;
        }
        for j in 0..state.ny {
            let y = state.y(j);
            if (y - cy).abs() > ry + tol {
                continue;
            }
            worst = worst.max((state.u[i * state.ny + j] - profile(x, y)).abs());
        }
    }
    worst
}

/// Monitors of `state`, given `w = e^{−2u}`; `scratch` is overwritten.
fn monitors(
    state: &FlowState,
    w: &[f64],
    reference: Option<&Reference>,
    scratch: &mut Vec<f64>,
) -> TrajectoryRow {
    scratch.resize(state.u.len(), 0.0);
    stencil_into(&state.u, state, scratch, |n, lap| -2.0 * w[n] * lap);
    let max_abs_s = scratch.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let h2 = state.h * state.h;
    for (c, w) in scratch.iter_mut().zip(w) {
        *c = h2 / w;
    }
    TrajectoryRow {
        time: state.time,
        max_abs_s,
        area: crate::quad::pairwise_sum(scratch),
        sup_err: reference.map(|r| sup_error(state, r)),
    }
}

/// Integrate to time `t_end`, recording monitors at the start and after every step.
pub fn run(
    initial: &FlowState,
    t_end: f64,
    policy: DtPolicy,
    reference: Option<&Reference>,
) -> Result<(FlowState, Trajectory), FlowError> {
    if initial.rho > 0.5 {
        return Err(FlowError::Refused { rho: initial.rho });
    }
    if !t_end.is_finite() || t_end < initial.time {
        return Err(FlowError::Parameter(format!(
            "end time {t_end} is not after the start {}",
            initial.time
        )));
    }
    let mut state = initial.clone();
    let mut ws = Workspace::new(&state.u);
    let mut scratch = Vec::new();
    let mut trajectory = Trajectory {
        rows: vec![monitors(&state, &ws.w, reference, &mut scratch)],
        steps: 0,
    };
    let mut next_u = Vec::with_capacity(state.u.len());
    let span = t_end - initial.time;
    let eps = 1e-12 * span.max(1.0);
    while t_end - state.time > eps {
        let remaining = t_end - state.time;
        let bound = state.cfl_bound();
        let dt = match policy {
            DtPolicy::Fixed(dt) => dt.min(remaining),
            DtPolicy::Cfl { fraction } => {
                if bound.is_finite() {
                    // equal steps to the end at the current bound
                    let n = (remaining / (fraction * bound)).ceil().max(1.0);
                    remaining / n
                } else {
                    remaining
                }
            }
        };
        check_step_against(&state, dt, bound)?;
        if state.rho != 0.5 {
            rk4_into(&state, dt, &mut ws, &mut next_u);
            std::mem::swap(&mut state.u, &mut next_u);
        }
        state.time = if remaining - dt <= eps {
            t_end
        } else {
            state.time + dt
        };
        trajectory.steps += 1;
        if state.u.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::BlowUp {
                time: state.time,
                steps: trajectory.steps,
                trajectory,
            });
        }
        trajectory
            .rows
            .push(monitors(&state, &ws.w, reference, &mut scratch));
    }
    Ok((state, trajectory))
}

/// The exact `ρ = 0` cigar flow `u = −½ log(e^{4t} + x² + y²)`.
pub fn exact_cigar_u(x: f64, y: f64, t: f64) -> f64 {
    -0.5 * ((4.0 * t).exp() + x * x + y * y).ln()
}

/// Named initial configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitProfile {
    /// Cigar on `[−4, 4]²` with Dirichlet data.
    Cigar,
    /// `u = 0.1 sin x sin y` on the `2π` torus.
    TorusPerturb,
    /// `u ≡ 0` on the `2π` torus.
    Flat,
}

impl InitProfile {
    pub fn parse(s: &str) -> Option<InitProfile> {
        match s {
            "cigar" => Some(InitProfile::Cigar),
            "torus-perturb" => Some(InitProfile::TorusPerturb),
            "flat" => Some(InitProfile::Flat),
            _ => None,
        }
    }
}

/// Half-width of the cigar box.
pub const CIGAR_HALF_WIDTH: f64 = 4.0;
/// Fraction of the cigar box used for error reporting.
pub const CIGAR_WINDOW: f64 = 0.8;
/// Default torus resolution per side.
pub const TORUS_NODES: usize = 64;

/// Initial state and optional reference for a profile.
///
/// For the cigar, `h` must divide the box evenly; the edges follow the exact
/// solution at `ρ = 0` and the time-frozen initial profile otherwise, and the
/// exact solution is the reference only at `ρ = 0`. Torus profiles use
/// `round(2π/h)` nodes per side.
pub fn initial_state(
    profile: InitProfile,
    rho: f64,
    h: f64,
) -> Result<(FlowState, Option<Reference>), FlowError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FlowError::Parameter(format!(
            "spacing must be positive, got {h}"
        )));
    }
    match profile {
        InitProfile::Cigar => {
            let cells = 2.0 * CIGAR_HALF_WIDTH / h;
            if (cells - cells.round()).abs() > 1e-9 || cells.round() < 4.0 {
                return Err(FlowError::Parameter(format!(
                    "h = {h} does not divide [-4, 4] into whole cells"
                )));
            }
            let n = cells.round() as usize + 1;
            let (boundary, reference) = if rho == 0.0 {
                let f: Arc<BoundaryFn> = Arc::new(exact_cigar_u);
                (
                    Boundary::Dirichlet {
                        label: "exact".into(),
                        f,
                    },
                    Some(Reference {
                        at: Arc::new(|t| {
                            let e = (4.0 * t).exp();
                            Box::new(move |x, y| -0.5 * (e + x * x + y * y).ln())
                        }),
                        window: CIGAR_WINDOW,
                    }),
                )
            } else {
                let f: Arc<BoundaryFn> = Arc::new(|x, y, _| exact_cigar_u(x, y, 0.0));
                (
                    Boundary::Dirichlet {
                        label: "frozen-initial".into(),
                        f,
                    },
                    None,
                )
            };
            let state = FlowState::from_fn(
                n,
                n,
                h,
                (-CIGAR_HALF_WIDTH, -CIGAR_HALF_WIDTH),
                rho,
                boundary,
                |x, y| exact_cigar_u(x, y, 0.0),
            )?;
            Ok((state, reference))
        }
        InitProfile::TorusPerturb | InitProfile::Flat => {
            let n = ((2.0 * PI / h).round() as usize).max(8);
            let hh = 2.0 * PI / n as f64;
            let amp = if profile == InitProfile::Flat {
                0.0
            } else {
                0.1
            };
            let state =
                FlowState::from_fn(n, n, hh, (0.0, 0.0), rho, Boundary::Periodic, |x, y| {
                    amp * x.sin() * y.sin()
                })?;
            Ok((state, None))
        }
    }
}

/// Sup over a `[−3, 3]²` grid of `|∂_t u − (1−2ρ)e^{−2u}Δ₀u|` for the conformal
/// factor `u = −½ log(e^{4(1−ρ)t} + x² + y²)` of the cigar family at time `t`.
pub fn flow_residual_of_example1(rho: f64, t: f64) -> Result<f64, FlowError> {
    if !(rho <= 1.0) || !t.is_finite() {
        return Err(FlowError::Parameter(format!(
            "need rho <= 1 and finite t, got rho={rho}, t={t}"
        )));
    }
    let per_axis = 21;
    let mut worst = 0.0f64;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let x = -3.0 + 6.0 * i as f64 / (per_axis - 1) as f64;
            let y = -3.0 + 6.0 * j as f64 / (per_axis - 1) as f64;
            let v = Jet::variables(&[x, y, t], 2);
            let e = (&v[2] * (4.0 * (1.0 - rho))).exp();
            let u = (e + &v[0] * &v[0] + &v[1] * &v[1]).ln() * -0.5;
            let ut = u.derivative(&[0, 0, 1]).expect("order 2");
            let lap = u.derivative(&[2, 0, 0]).expect("order 2")
                + u.derivative(&[0, 2, 0]).expect("order 2");
            let rhs = (1.0 - 2.0 * rho) * (-2.0 * u.value()).exp() * lap;
            worst = worst.max((ut - rhs).abs());
        }
    }
    Ok(worst)
}
