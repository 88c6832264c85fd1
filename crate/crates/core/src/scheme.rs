//! Godunov-type finite volume scheme.
//!
//! Each cell carries averages `(u_i, w_i)`. The `u` flux through the left and
//! right interfaces of a cell is the modified flux with `w` frozen at `w_i`,
//! evaluated on the local Riemann fan (`h1_plus`, `h1_minus`); the remaining
//! part of the Godunov flux (`h2 = g - h1`) moves `w`. Merged fast shocks get
//! their own closed form. The update is conservative in `u + w`.

use crate::error::{Error, Result};
use crate::flux::{argmin_unchecked, godunov, lipschitz_on, ConvexFlux, ModifiedFlux, modified_eval};
use crate::hysteresis::{PlayConfig, STRIP_TOL};
use crate::riemann::{classify_left, classify_right, interface_u_traces, LeftStructure, RightStructure};

/// Strip violation after a step that is treated as a bug rather than rounding.
pub const STEP_STRIP_TOL: f64 = 1e-10;

/// Relative size below which a difference quotient coefficient is reported as 0.
pub const COEF_DEN_TOL: f64 = 1e-9;

/// Uniform grid of `n` cells starting at `x_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, dx: f64, n: usize) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) || n == 0 || !x_min.is_finite() {
            return Err(Error::InvalidGrid(format!("x_min = {x_min}, dx = {dx}, n = {n}")));
        }
        Ok(Self { x_min, dx, n })
    }

    /// Grid covering `[x_min, x_max]` with spacing `dx`; the length must be a
    /// whole number of cells.
    pub fn covering(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        let cells = (x_max - x_min) / dx;
        let n = cells.round();
        if !(x_max > x_min) || (cells - n).abs() > 1e-6 || n < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "[{x_min}, {x_max}] is not a whole number of cells of width {dx}"
            )));
        }
        Self::new(x_min, dx, n as usize)
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n as f64 * self.dx
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    /// Position of interface `i - 1/2`, for `i` in `0..=n`.
    #[inline]
    pub fn interface(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }
}

/// Cell averages at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl FieldState {
    pub fn constant(n: usize, u: f64, w: f64) -> Self {
        Self { u: vec![u; n], w: vec![w; n], t: 0.0, step: 0 }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn range_u(&self) -> (f64, f64) {
        range(&self.u)
    }

    pub fn range_w(&self) -> (f64, f64) {
        range(&self.w)
    }

    /// `dx * sum (u_i + w_i)`.
    pub fn mass(&self, dx: f64) -> f64 {
        dx * self.u.iter().zip(&self.w).map(|(u, w)| u + w).sum::<f64>()
    }

    /// Largest `|u_i - w_i|`.
    pub fn max_gap(&self) -> f64 {
        self.u.iter().zip(&self.w).map(|(u, w)| (u - w).abs()).fold(0.0, f64::max)
    }
}

pub fn range(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn total_variation(v: &[f64]) -> f64 {
    v.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// Scheme parameters.
#[derive(Clone, Debug)]
pub struct SchemeConfig {
    /// Fraction of the bound `dx / (2 L)`, in `(0, 1]`.
    pub cfl_fraction: f64,
    pub play: PlayConfig,
    pub flux: ConvexFlux,
    /// Abort when the two outermost cells on either side leave their initial values.
    pub check_boundary: bool,
}

impl SchemeConfig {
    pub fn new(flux: ConvexFlux, a: f64, cfl_fraction: f64) -> Result<Self> {
        if !(cfl_fraction > 0.0 && cfl_fraction <= 1.0) {
            return Err(Error::Precondition(format!(
                "CFL fraction must lie in (0, 1], got {cfl_fraction}"
            )));
        }
        Ok(Self { cfl_fraction, play: PlayConfig::new(a)?, flux, check_boundary: true })
    }

    pub fn a(&self) -> f64 {
        self.play.a()
    }

    pub fn without_boundary_check(mut self) -> Self {
        self.check_boundary = false;
        self
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Cell averages of `u0`, `w0` by 3-point Gauss-Legendre quadrature.
pub fn project_initial(
    u0: &dyn Fn(f64) -> f64,
    w0: &dyn Fn(f64) -> f64,
    grid: &Grid1D,
    play: PlayConfig,
) -> Result<FieldState> {
    let mut u = Vec::with_capacity(grid.n);
    let mut w = Vec::with_capacity(grid.n);
    let h = 0.5 * grid.dx;
    for i in 0..grid.n {
        let c = grid.center(i);
        let (mut su, mut sw) = (0.0, 0.0);
        for (node, weight) in GAUSS3 {
            let x = c + h * node;
            let (ux, wx) = (u0(x), w0(x));
            if !play.contains(ux, wx) {
                return Err(Error::InitialStrip { cell: i, x });
            }
            su += 0.5 * weight * ux;
            sw += 0.5 * weight * wx;
        }
        u.push(su);
        w.push(sw);
    }
    Ok(FieldState { u, w, t: 0.0, step: 0 })
}

/// Time step `cfl_fraction * dx / (2 L)` with `L = max |f'|` over the range of `state.u`.
pub fn cfl_dt(cfg: &SchemeConfig, grid: &Grid1D, state: &FieldState) -> Result<f64> {
    let (lo, hi) = state.range_u();
    let l = lipschitz_on(&cfg.flux, lo, hi)?;
    if !(l > 0.0) {
        return Err(Error::DegenerateStep(format!(
            "flux '{}' has zero slope on [{lo}, {hi}]",
            cfg.flux.id()
        )));
    }
    Ok(cfg.cfl_fraction * grid.dx / (2.0 * l))
}

fn check_triple(x: f64, gamma: f64, a: f64, which: &str) -> Result<()> {
    if (x - gamma).abs() > a + STRIP_TOL * 1f64.max(x.abs()) {
        return Err(Error::Precondition(format!(
            "{which}: |{x} - {gamma}| exceeds the strip half-width {a}"
        )));
    }
    Ok(())
}

/// Flux of `u` through the left interface of a cell with `w = gamma`, between
/// `alpha = u_{i-1}` and `beta = u_i`. Requires `|beta - gamma| <= a`.
pub fn h1_plus(alpha: f64, beta: f64, gamma: f64, f: &ConvexFlux, a: f64) -> Result<f64> {
    check_triple(beta, gamma, a, "h1_plus")?;
    Ok(h1_plus_raw(alpha, beta, gamma, f, a))
}

/// Flux of `u` through the right interface of a cell with `w = gamma`, between
/// `alpha = u_i` and `beta = u_{i+1}`. Requires `|alpha - gamma| <= a`.
pub fn h1_minus(alpha: f64, beta: f64, gamma: f64, f: &ConvexFlux, a: f64) -> Result<f64> {
    check_triple(alpha, gamma, a, "h1_minus")?;
    Ok(h1_minus_raw(alpha, beta, gamma, f, a))
}

pub fn h2_plus(alpha: f64, beta: f64, gamma: f64, f: &ConvexFlux, a: f64) -> Result<f64> {
    Ok(godunov(f, alpha, beta) - h1_plus(alpha, beta, gamma, f, a)?)
}

pub fn h2_minus(alpha: f64, beta: f64, gamma: f64, f: &ConvexFlux, a: f64) -> Result<f64> {
    Ok(godunov(f, alpha, beta) - h1_minus(alpha, beta, gamma, f, a)?)
}

pub(crate) fn h1_plus_raw(alpha: f64, beta: f64, gamma: f64, f: &ConvexFlux, a: f64) -> f64 {
    if alpha <= beta {
        let m = f.eval(argmin_unchecked(f, alpha, beta));
        let edge = gamma - a;
        if edge <= alpha || f.deriv(edge) <= 0.0 {
            m
        } else {
            0.5 * (m + f.eval(edge))
        }
    } else {
        let (fa, fb) = (f.eval(alpha), f.eval(beta));
        if fa <= fb {
            return fb;
        }
        match classify_right(f, alpha, beta, gamma, a) {
            RightStructure::UOnly => fa,
            RightStructure::Coupled | RightStructure::TwoShocks { .. } => {
                0.5 * (fa + f.eval(gamma + a))
            }
            RightStructure::Fast { mu } => mu * (alpha - beta) + fb,
        }
    }
}

pub(crate) fn h1_minus_raw(alpha: f64, beta: f64, gamma: f64, f: &ConvexFlux, a: f64) -> f64 {
    if alpha <= beta {
        let m = f.eval(argmin_unchecked(f, alpha, beta));
        let edge = gamma + a;
        if edge >= beta || f.deriv(edge) >= 0.0 {
            m
        } else {
            0.5 * (m + f.eval(edge))
        }
    } else {
        let (fa, fb) = (f.eval(alpha), f.eval(beta));
        if fa >= fb {
            return fa;
        }
        match classify_left(f, alpha, beta, gamma, a) {
            LeftStructure::UOnly => fb,
            LeftStructure::Coupled | LeftStructure::TwoShocks { .. } => {
                0.5 * (fb + f.eval(gamma - a))
            }
            LeftStructure::Fast { nu } => -nu * (alpha - beta) + fa,
        }
    }
}

/// The four fluxes of one cell together with the Godunov fluxes at its two interfaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellFluxes {
    pub h1_plus: f64,
    pub h1_minus: f64,
    pub h2_plus: f64,
    pub h2_minus: f64,
    pub g_left: f64,
    pub g_right: f64,
}

/// Fluxes of the cell `(u, w)` between neighbors `um` and `up`.
pub fn cell_fluxes(um: f64, u: f64, up: f64, w: f64, f: &ConvexFlux, a: f64) -> CellFluxes {
    let g_left = godunov(f, um, u);
    let g_right = godunov(f, u, up);
    let h1_plus = h1_plus_raw(um, u, w, f, a);
    let h1_minus = h1_minus_raw(u, up, w, f, a);
    CellFluxes {
        h1_plus,
        h1_minus,
        h2_plus: g_left - h1_plus,
        h2_minus: g_right - h1_minus,
        g_left,
        g_right,
    }
}

/// One-cell update `(u_i, w_i) -> (u_i^{n+1}, w_i^{n+1})` for `lambda = dt / dx`.
pub fn cell_update(um: f64, u: f64, up: f64, w: f64, lambda: f64, f: &ConvexFlux, a: f64) -> (f64, f64) {
    let c = cell_fluxes(um, u, up, w, f, a);
    let u_new = u - lambda * (c.h1_minus - c.h1_plus);
    let w_new = w - lambda * (c.h2_minus - c.h2_plus);
    (u_new, w_new)
}

/// Increment coefficients of one cell; see [`StepReport::coef`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Increments {
    /// `lambda (h1_plus - f(u_i)) / (u_{i-1} - u_i)`
    pub a: f64,
    /// `lambda (h1_minus - f(u_i)) / (u_i - u_{i+1})`
    pub b: f64,
    /// `lambda h2_plus / (w_{i-1} - w_i)`
    pub c: f64,
    /// `lambda h2_minus / (w_i - w_{i+1})`
    pub d: f64,
}

fn quotient(num: f64, den: f64, scale: f64) -> f64 {
    if den.abs() <= COEF_DEN_TOL * scale {
        0.0
    } else {
        num / den
    }
}

/// Increment coefficients from cell fluxes and the neighboring states.
#[allow(clippy::too_many_arguments)]
pub fn increments(
    cf: &CellFluxes,
    lambda: f64,
    fu: f64,
    um: f64,
    u: f64,
    up: f64,
    wm: f64,
    w: f64,
    wp: f64,
) -> Increments {
    let su = 1f64.max(u.abs()).max(um.abs()).max(up.abs());
    let sw = 1f64.max(w.abs()).max(wm.abs()).max(wp.abs());
    Increments {
        a: lambda * quotient(cf.h1_plus - fu, um - u, su),
        b: lambda * quotient(cf.h1_minus - fu, u - up, su),
        c: lambda * quotient(cf.h2_plus, wm - w, sw),
        d: lambda * quotient(cf.h2_minus, w - wp, sw),
    }
}

/// Data recorded by [`step`] for the diagnostics.
#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub dt: f64,
    /// Godunov flux at interface `i - 1/2`, `i` in `0..=n` (ghost cells included).
    pub g: Vec<f64>,
    pub h1_plus: Vec<f64>,
    pub h1_minus: Vec<f64>,
    /// Per-cell increment coefficients.
    pub coef: Vec<Increments>,
    /// `(u(x_{i-1/2}-), u(x_{i-1/2}+))` of the local Riemann fan at interface `i - 1/2`.
    pub traces: Vec<(f64, f64)>,
}

impl StepReport {
    pub fn h2_plus(&self, i: usize) -> f64 {
        self.g[i] - self.h1_plus[i]
    }

    pub fn h2_minus(&self, i: usize) -> f64 {
        self.g[i + 1] - self.h1_minus[i]
    }
}

/// Advances `state` by `dt`.
pub fn step(state: &FieldState, cfg: &SchemeConfig, grid: &Grid1D, dt: f64) -> Result<(FieldState, StepReport)> {
    let n = state.len();
    if n != grid.n || state.w.len() != n {
        return Err(Error::InvalidGrid(format!(
            "state has {} cells, grid has {}",
            state.len(),
            grid.n
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::DegenerateStep(format!("dt = {dt}")));
    }
    let f = &cfg.flux;
    let a = cfg.a();
    let lambda = dt / grid.dx;
    let (u, w) = (&state.u, &state.w);
    let at = |v: &[f64], k: isize| v[k.clamp(0, n as isize - 1) as usize];

    let mut report = StepReport {
        dt,
        g: Vec::with_capacity(n + 1),
        h1_plus: Vec::with_capacity(n),
        h1_minus: Vec::with_capacity(n),
        coef: Vec::with_capacity(n),
        traces: Vec::with_capacity(n + 1),
    };
    for i in 0..=n as isize {
        let (l, r) = (at(u, i - 1), at(u, i));
        report.g.push(godunov(f, l, r));
        report.traces.push(interface_u_traces(f, l, r));
    }

    let mut next = FieldState {
        u: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        t: state.t + dt,
        step: state.step + 1,
    };
    for i in 0..n {
        let k = i as isize;
        let (um, ui, up) = (at(u, k - 1), u[i], at(u, k + 1));
        let (wm, wi, wp) = (at(w, k - 1), w[i], at(w, k + 1));
        let h1p = h1_plus_raw(um, ui, wi, f, a);
        let h1m = h1_minus_raw(ui, up, wi, f, a);
        let cf = CellFluxes {
            h1_plus: h1p,
            h1_minus: h1m,
            h2_plus: report.g[i] - h1p,
            h2_minus: report.g[i + 1] - h1m,
            g_left: report.g[i],
            g_right: report.g[i + 1],
        };
        let u_new = ui - lambda * (h1m - h1p);
        let w_new = wi - lambda * (cf.h2_minus - cf.h2_plus);
        let gap = (u_new - w_new).abs();
        if gap > a + STEP_STRIP_TOL * 1f64.max(u_new.abs()) {
            return Err(Error::StripBroken { step: next.step, cell: i, gap });
        }
        report.coef.push(increments(&cf, lambda, f.eval(ui), um, ui, up, wm, wi, wp));
        report.h1_plus.push(h1p);
        report.h1_minus.push(h1m);
        next.u.push(u_new);
        next.w.push(w_new);
    }
    Ok((next, report))
}

/// The update specialized to `f(u) = u`: upwind with the modified flux around `w_i`.
pub fn linear_step(state: &FieldState, cfg: &SchemeConfig, grid: &Grid1D, dt: f64) -> Result<FieldState> {
    if cfg.flux.id() != "linear" {
        return Err(Error::Precondition(format!(
            "linear_step needs the linear flux, got '{}'",
            cfg.flux.id()
        )));
    }
    let n = state.len();
    if n != grid.n {
        return Err(Error::InvalidGrid(format!("state has {n} cells, grid has {}", grid.n)));
    }
    let a = cfg.a();
    let lambda = dt / grid.dx;
    let mut next = FieldState {
        u: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        t: state.t + dt,
        step: state.step + 1,
    };
    for i in 0..n {
        let (um, ui, wi) = (state.u[i.saturating_sub(1)], state.u[i], state.w[i]);
        let tilde = |x| modified_eval(&cfg.flux, ModifiedFlux::Tilde(wi), a, x);
        let u_new = ui - lambda * (tilde(ui) - tilde(um));
        let w_new = wi - lambda * ((ui - tilde(ui)) - (um - tilde(um)));
        next.u.push(u_new);
        next.w.push(w_new);
    }
    Ok(next)
}

/// Everything an observer sees after one step.
pub struct StepContext<'a> {
    pub prev: &'a FieldState,
    pub next: &'a FieldState,
    pub report: &'a StepReport,
    pub grid: &'a Grid1D,
    pub cfg: &'a SchemeConfig,
}

/// Called after every step of [`run`].
pub trait Observer {
    fn on_step(&mut self, ctx: &StepContext<'_>);
}

impl<F: FnMut(&StepContext<'_>)> Observer for F {
    fn on_step(&mut self, ctx: &StepContext<'_>) {
        self(ctx)
    }
}

/// Steps from `initial.t` to `t_end`; the last step is shortened to land on
/// `t_end`. The step size is fixed from the range of the initial data.
pub fn run(
    initial: &FieldState,
    cfg: &SchemeConfig,
    grid: &Grid1D,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<FieldState> {
    let dt = cfl_dt(cfg, grid, initial)?;
    run_fixed(initial, cfg, grid, t_end, dt, observers)
}

/// [`run`] with a given step size, for runs split at output times.
pub fn run_fixed(
    initial: &FieldState,
    cfg: &SchemeConfig,
    grid: &Grid1D,
    t_end: f64,
    dt: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<FieldState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::DegenerateStep(format!("dt = {dt}")));
    }
    if t_end < initial.t {
        return Err(Error::Precondition(format!(
            "end time {t_end} precedes the start time {}",
            initial.t
        )));
    }
    let span = t_end - initial.t;
    if span == 0.0 {
        return Ok(initial.clone());
    }
    let steps = plan_steps(span, dt);
    let boundary = boundary_values(initial);
    let bscale = {
        let (lo, hi) = initial.range_u();
        let (wlo, whi) = initial.range_w();
        1f64.max(lo.abs()).max(hi.abs()).max(wlo.abs()).max(whi.abs())
    };

    let mut state = initial.clone();
    for k in 0..steps {
        let h = if k + 1 < steps { dt } else { span - (steps - 1) as f64 * dt };
        let h = if (h - dt).abs() <= 1e-9 * dt { dt } else { h };
        let (mut next, report) = step(&state, cfg, grid, h)?;
        if k + 1 == steps {
            next.t = t_end;
        }
        if cfg.check_boundary {
            let now = boundary_values(&next);
            if now.iter().zip(&boundary).any(|(x, y)| (x - y).abs() > 1e-12 * bscale) {
                return Err(Error::BoundaryTouched(next.step));
            }
        }
        let ctx = StepContext { prev: &state, next: &next, report: &report, grid, cfg };
        for obs in observers.iter_mut() {
            obs.on_step(&ctx);
        }
        state = next;
    }
    Ok(state)
}

/// Number of steps of size at most `dt` covering `span`.
pub fn plan_steps(span: f64, dt: f64) -> usize {
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

fn boundary_values(s: &FieldState) -> Vec<f64> {
    let n = s.len();
    let k = n.min(2);
    let mut v = Vec::with_capacity(4 * k);
    for i in (0..k).chain(n - k..n) {
        v.push(s.u[i]);
        v.push(s.w[i]);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::adaptive_simpson;
    use crate::hysteresis::PlayState;
    use crate::riemann::{sample, solve, RiemannProblem};
    use proptest::prelude::*;

    fn burgers_cfg(fraction: f64) -> SchemeConfig {
        SchemeConfig::new(ConvexFlux::burgers(), 1.0, fraction).unwrap()
    }

    fn riemann_state(grid: &Grid1D, l: (f64, f64), r: (f64, f64)) -> FieldState {
        let play = PlayConfig::new(1.0).unwrap();
        project_initial(
            &|x| if x < 0.0 { l.0 } else { r.0 },
            &|x| if x < 0.0 { l.1 } else { r.1 },
            grid,
            play,
        )
        .unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = Grid1D::covering(-2.0, 2.0, 0.01).unwrap();
        assert_eq!(g.n, 400);
        assert!((g.interface(200)).abs() < 1e-12);
        assert!((g.center(0) + 1.995).abs() < 1e-12);
        assert!(Grid1D::covering(0.0, 1.0, 0.3).is_err());
        assert!(Grid1D::new(0.0, -1.0, 3).is_err());
    }

    #[test]
    fn projection_examples() {
        let grid = Grid1D::covering(-1.0, 1.0, 0.1).unwrap();
        let play = PlayConfig::new(1.0).unwrap();
        let s = project_initial(&|_| 0.3, &|_| -0.4, &grid, play).unwrap();
        assert!(s.u.iter().all(|&x| (x - 0.3).abs() < 1e-15));
        assert!(s.w.iter().all(|&x| (x + 0.4).abs() < 1e-15));

        let s = riemann_state(&grid, (1.0, 0.5), (3.0, 3.0));
        assert!(s.u[..10].iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(s.w[..10].iter().all(|&x| (x - 0.5).abs() < 1e-15));
        assert!(s.u[10..].iter().all(|&x| (x - 3.0).abs() < 1e-15));

        let err = project_initial(&|x| if x > 0.5 { 3.0 } else { 0.0 }, &|_| 0.0, &grid, play);
        assert!(matches!(err, Err(Error::InitialStrip { cell: 15, .. })));
    }

    #[test]
    fn gaussian_projection_matches_quadrature() {
        let grid = Grid1D::covering(-10.0, 10.0, 0.01).unwrap();
        let play = PlayConfig::new(1.0).unwrap();
        let g = |x: f64| 5.0 * (-x * x / 2.0).exp();
        let s = project_initial(&g, &g, &grid, play).unwrap();
        for i in (0..grid.n).step_by(37) {
            let lo = grid.interface(i);
            let avg = adaptive_simpson(&g, lo, lo + grid.dx, 1e-13) / grid.dx;
            assert!((s.u[i] - avg).abs() < 1e-10, "cell {i}");
        }
    }

    #[test]
    fn cfl_examples() {
        let grid = Grid1D::covering(-1.0, 1.0, 1e-3).unwrap();
        let mut s = FieldState::constant(grid.n, 0.0, 0.0);
        s.u[0] = -3.0;
        s.w[0] = -2.5;
        s.u[1] = 3.0;
        s.w[1] = 2.5;
        let dt = cfl_dt(&burgers_cfg(1.0), &grid, &s).unwrap();
        assert!((dt - 1e-3 / 6.0).abs() < 1e-18);
        let half = cfl_dt(&burgers_cfg(0.5), &grid, &s).unwrap();
        assert!((half - dt / 2.0).abs() < 1e-18);
        let zero = FieldState::constant(grid.n, 0.0, 0.0);
        assert!(matches!(cfl_dt(&burgers_cfg(1.0), &grid, &zero), Err(Error::DegenerateStep(_))));
        assert!(SchemeConfig::new(ConvexFlux::burgers(), 1.0, 1.5).is_err());
    }

    #[test]
    fn h1_examples() {
        let b = ConvexFlux::burgers();
        assert_eq!(h1_plus(0.0, 0.0, 0.0, &b, 1.0).unwrap(), 0.0);
        assert_eq!(h1_plus(1.0, 3.0, 3.0, &b, 1.0).unwrap(), 1.25);
        assert!((h1_plus(3.5, -1.0, -1.0, &b, 1.0).unwrap() - 3.6640625).abs() < 1e-14);
        assert!((h2_plus(3.5, -1.0, -1.0, &b, 1.0).unwrap() - 2.4609375).abs() < 1e-14);
        assert!((h1_minus(1.0, -3.5, 1.0, &b, 1.0).unwrap() - 3.6640625).abs() < 1e-14);
        for c in [-2.0, 0.3, 1.7] {
            assert_eq!(h1_minus(c, c, c, &b, 1.0).unwrap(), b.eval(c));
        }
        assert!(h1_plus(0.0, 3.0, 0.0, &b, 1.0).is_err());
        assert!(h1_minus(3.0, 0.0, 0.0, &b, 1.0).is_err());
    }

    #[test]
    fn h2_vanishes_when_w_frozen() {
        let b = ConvexFlux::burgers();
        for alpha in [-1.0, -0.5, 0.0, 0.4, 1.0] {
            for beta in [-1.0, -0.2, 0.5, 1.0] {
                assert_eq!(h2_plus(alpha, beta, 0.0, &b, 1.0).unwrap(), 0.0);
                assert_eq!(h2_minus(alpha, beta, 0.0, &b, 1.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn constant_state_is_fixed() {
        let grid = Grid1D::covering(-1.0, 1.0, 0.05).unwrap();
        let s = FieldState::constant(grid.n, 0.7, 0.2);
        let (next, report) = step(&s, &burgers_cfg(1.0), &grid, 0.01).unwrap();
        assert_eq!(next.u, s.u);
        assert_eq!(next.w, s.w);
        assert!(report.coef.iter().all(|c| *c == Increments::default()));
        let lin = SchemeConfig::new(ConvexFlux::linear(), 1.0, 1.0).unwrap();
        let next = linear_step(&s, &lin, &grid, 0.01).unwrap();
        assert_eq!(next.u, s.u);
    }

    #[test]
    fn one_step_is_conservative() {
        let grid = Grid1D::covering(-1.0, 1.0, 0.1).unwrap();
        let s = riemann_state(&grid, (1.5, 2.0), (-1.0, -1.0));
        let dt = cfl_dt(&burgers_cfg(1.0), &grid, &s).unwrap();
        let (next, report) = step(&s, &burgers_cfg(1.0), &grid, dt).unwrap();
        for i in 0..grid.n {
            let d = (next.u[i] + next.w[i]) - (s.u[i] + s.w[i]);
            let expect = -dt / grid.dx * (report.g[i + 1] - report.g[i]);
            assert!((d - expect).abs() < 1e-14);
        }
        let changed: Vec<usize> = (0..grid.n).filter(|&i| next.u[i] != s.u[i] || next.w[i] != s.w[i]).collect();
        // the contact at the interface is stationary, so the left cell keeps its state
        assert_eq!(changed, vec![10]);
    }

    #[test]
    fn run_lands_on_end_time_and_composes() {
        let grid = Grid1D::covering(-2.0, 2.0, 0.02).unwrap();
        let cfg = burgers_cfg(1.0);
        let s = riemann_state(&grid, (1.0, 0.5), (3.0, 3.0));
        assert_eq!(run(&s, &cfg, &grid, 0.0, &mut []).unwrap(), s);
        let dt = cfl_dt(&cfg, &grid, &s).unwrap();
        let mut count = 0usize;
        let mut counter = |_: &StepContext<'_>| count += 1;
        let end = run(&s, &cfg, &grid, 0.1005, &mut [&mut counter]).unwrap();
        assert_eq!(end.t, 0.1005);
        assert_eq!(count, plan_steps(0.1005, dt));
        let half = run(&s, &cfg, &grid, 20.0 * dt, &mut []).unwrap();
        let full = run(&s, &cfg, &grid, 40.0 * dt, &mut []).unwrap();
        let composed = run(&half, &cfg, &grid, 40.0 * dt, &mut []).unwrap();
        assert_eq!(full.u, composed.u);
        assert_eq!(full.w, composed.w);
        assert!(run(&s, &cfg, &grid, -1.0, &mut []).is_err());
    }

    #[test]
    fn boundary_touch_is_reported() {
        let grid = Grid1D::covering(-0.2, 0.2, 0.02).unwrap();
        let s = riemann_state(&grid, (1.0, 0.5), (3.0, 3.0));
        assert!(matches!(run(&s, &burgers_cfg(1.0), &grid, 0.5, &mut []), Err(Error::BoundaryTouched(_))));
        let cfg = burgers_cfg(1.0).without_boundary_check();
        assert!(run(&s, &cfg, &grid, 0.5, &mut []).is_ok());
    }

    #[test]
    fn rarefaction_snapshot_close_to_exact() {
        let grid = Grid1D::covering(-2.0, 2.0, 1e-3).unwrap();
        let cfg = burgers_cfg(1.0);
        let s = riemann_state(&grid, (1.0, 0.5), (3.0, 3.0));
        let end = run(&s, &cfg, &grid, 0.25, &mut []).unwrap();
        let p = RiemannProblem::new(PlayState::new(1.0, 0.5), PlayState::new(3.0, 3.0), 1.0, ConvexFlux::burgers()).unwrap();
        let fan = solve(&p);
        let mut err = 0.0;
        for i in 0..grid.n {
            let e = sample(&fan, grid.center(i) / 0.25);
            err += grid.dx * ((end.u[i] - e.u).abs() + (end.w[i] - e.w).abs());
        }
        assert!(err < 0.02, "L1 error {err}");
    }

    #[test]
    fn linear_step_examples() {
        let grid = Grid1D::new(0.0, 1.0, 3).unwrap();
        let cfg = SchemeConfig::new(ConvexFlux::linear(), 1.0, 1.0).unwrap();
        // pure transport inside the strip
        let s = FieldState { u: vec![0.2, 0.0, 0.0], w: vec![0.0; 3], t: 0.0, step: 0 };
        let next = linear_step(&s, &cfg, &grid, 0.5).unwrap();
        assert_eq!(next.u, vec![0.2, 0.1, 0.0]);
        assert_eq!(next.w, vec![0.0; 3]);
        // u jumps above w + a: the excess moves with the half-speed branch
        let s = FieldState { u: vec![3.0, 0.0, 0.0], w: vec![2.0, 0.0, 0.0], t: 0.0, step: 0 };
        let next = linear_step(&s, &cfg, &grid, 0.5).unwrap();
        // cell 1: tilde_0(0) = 0, tilde_0(3) = 1.5 + 0.5 = 2 -> u = 1; w = 0 + 1.5 - 1 = 0.5
        assert_eq!(next.u, vec![3.0, 1.0, 0.0]);
        assert_eq!(next.w, vec![2.0, 0.5, 0.0]);
        assert!(linear_step(&s, &burgers_cfg(1.0), &grid, 0.5).is_err());
    }

    /// Flux from the local Riemann fan, without the fast-shock shortcut.
    fn trace_h1(alpha: f64, w_alpha: f64, beta: f64, w_beta: f64, gamma: f64, plus: bool, f: &ConvexFlux) -> f64 {
        let p = RiemannProblem::new(PlayState::new(alpha, w_alpha), PlayState::new(beta, w_beta), 1.0, f.clone()).unwrap();
        let fan = solve(&p);
        let s = if plus { sample(&fan, 0.0) } else { sample(&fan, -1e-13) };
        modified_eval(f, ModifiedFlux::Tilde(gamma), 1.0, s.u)
    }

    fn flux_choice() -> impl Strategy<Value = ConvexFlux> {
        prop_oneof![
            Just(ConvexFlux::burgers()),
            Just(ConvexFlux::quartic()),
            Just(ConvexFlux::new("q+u", |u: f64| 0.25 * u.powi(4) + u, |u: f64| u.powi(3) + 1.0)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn h1_matches_trace_oracle(
            alpha in -2.5..2.5f64, beta in -2.5..2.5f64, t1 in -1.0..=1.0f64, t2 in -1.0..=1.0f64,
            f in flux_choice(),
        ) {
            let a = 1.0;
            // plus side: cell holds (beta, gamma), neighbor (alpha, alpha + t1)
            let gamma = beta + a * t2;
            let w_alpha = alpha + a * t1;
            let fast = alpha > beta && f.eval(alpha) > f.eval(beta)
                && matches!(classify_right(&f, alpha, beta, gamma, a), RightStructure::Fast { .. });
            let h = h1_plus(alpha, beta, gamma, &f, a).unwrap();
            if !fast {
                let o = trace_h1(alpha, w_alpha, beta, gamma, gamma, true, &f);
                prop_assert!((h - o).abs() <= 1e-9 * 1f64.max(o.abs()), "h1_plus {h} vs {o}");
            }
            // minus side: cell holds (alpha, gamma), neighbor (beta, beta + t1)
            let gamma = alpha + a * t2;
            let w_beta = beta + a * t1;
            let fast = alpha > beta && f.eval(alpha) < f.eval(beta)
                && matches!(classify_left(&f, alpha, beta, gamma, a), LeftStructure::Fast { .. });
            let h = h1_minus(alpha, beta, gamma, &f, a).unwrap();
            if !fast {
                let o = trace_h1(alpha, gamma, beta, w_beta, gamma, false, &f);
                prop_assert!((h - o).abs() <= 1e-9 * 1f64.max(o.abs()), "h1_minus {h} vs {o}");
            }
        }

        #[test]
        fn mirror_identity(alpha in -2.5..2.5f64, beta in -2.5..2.5f64, t in -1.0..=1.0f64, quartic in any::<bool>()) {
            let f = if quartic { ConvexFlux::quartic() } else { ConvexFlux::burgers() };
            let gamma = alpha + t;
            let m = h1_minus(alpha, beta, gamma, &f, 1.0).unwrap();
            let p = h1_plus(-beta, -alpha, -gamma, &f, 1.0).unwrap();
            prop_assert!((m - p).abs() <= 1e-12 * 1f64.max(m.abs()));
        }

        #[test]
        fn split_sums_to_godunov(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, t in -1.0..=1.0f64, f in flux_choice()) {
            let g = godunov(&f, alpha, beta);
            let gp = beta + t;
            prop_assert!((h1_plus(alpha, beta, gp, &f, 1.0).unwrap() + h2_plus(alpha, beta, gp, &f, 1.0).unwrap() - g).abs() <= 1e-12 * 1f64.max(g.abs()));
            let gm = alpha + t;
            prop_assert!((h1_minus(alpha, beta, gm, &f, 1.0).unwrap() + h2_minus(alpha, beta, gm, &f, 1.0).unwrap() - g).abs() <= 1e-12 * 1f64.max(g.abs()));
        }

        #[test]
        fn linear_step_equals_general_step(
            u in prop::collection::vec(-2.0..2.0f64, 8),
            t in prop::collection::vec(-1.0..=1.0f64, 8),
        ) {
            let grid = Grid1D::new(0.0, 0.1, 8).unwrap();
            let cfg = SchemeConfig::new(ConvexFlux::linear(), 1.0, 1.0).unwrap();
            let s = FieldState { w: u.iter().zip(&t).map(|(u, t)| u + t).collect(), u, t: 0.0, step: 0 };
            let dt = cfl_dt(&cfg, &grid, &s).unwrap();
            let a = linear_step(&s, &cfg, &grid, dt).unwrap();
            let (b, _) = step(&s, &cfg, &grid, dt).unwrap();
            for i in 0..8 {
                prop_assert!((a.u[i] - b.u[i]).abs() < 1e-14 && (a.w[i] - b.w[i]).abs() < 1e-14);
            }
        }
    }
}
