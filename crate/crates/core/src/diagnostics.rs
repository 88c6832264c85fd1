//! Discrete inequalities of the scheme, checked on live runs.
//!
//! Every check is phrased as `slack >= -tol` and accumulated into a [`Check`].
//! The pure functions work on recorded layers; [`Monitor`] is the streaming
//! version used by long runs, where keeping every layer would be too costly.
//!
//! The energy checks use the entropy potential `G(u) = u f(u) - \int_0^u f`.
//! On a finite grid with constant-extension ghosts the energy balance picks up
//! the boundary term `dt (G(u_first) - G(u_last))`; it vanishes for data that
//! is constant and equal at both ends.

use crate::error::{Error, Result};
use crate::flux::{entropy_potential, flux_integral, godunov, lipschitz_on, ConvexFlux, RightShockSpeeds};
use crate::hysteresis::{PlayConfig, PlayState};
use crate::scheme::{range, total_variation, FieldState, Grid1D, Observer, StepContext, StepReport};

/// Relative tolerance of the discrete entropy inequality.
pub const ENTROPY_TOL: f64 = 1e-12;
/// Tolerance of the energy inequalities, relative to the initial energy.
pub const HYSTERESIS_TOL: f64 = 1e-10;
/// Absolute slack allowed on the strip condition.
pub const STRIP_SLACK: f64 = 1e-12;
/// Relative tolerance of TV, range, time-continuity and conservation checks.
pub const MONITOR_TOL: f64 = 1e-12;
/// Relative tolerance of the L1 contraction check.
pub const CONTRACTION_TOL: f64 = 1e-10;

/// Outcome of one inequality over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    /// Smallest raw slack seen.
    pub worst_slack: f64,
    /// Step at which `worst_slack` occurred.
    pub worst_step: usize,
    pub evaluations: usize,
    pub failures: usize,
    pub first_failure: Option<usize>,
}

impl Check {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            worst_slack: f64::INFINITY,
            worst_step: 0,
            evaluations: 0,
            failures: 0,
            first_failure: None,
        }
    }

    /// Records `slack >= -tol` at `step`.
    pub fn record(&mut self, step: usize, slack: f64, tol: f64) {
        self.evaluations += 1;
        if slack < self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
            self.worst_step = step;
        }
        if !(slack >= -tol) {
            self.failures += 1;
            self.first_failure.get_or_insert(step);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed() { "ok" } else { "FAILED" };
        write!(
            f,
            "{:<22} {verdict:<6} worst slack {:+.3e} at step {} ({} evaluations",
            self.name, self.worst_slack, self.worst_step, self.evaluations
        )?;
        match self.first_failure {
            Some(s) => write!(f, ", {} failures, first at step {s})", self.failures),
            None => write!(f, ")"),
        }
    }
}

/// A pair of constants `(k, k_hat)` inside the strip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyPair {
    k: f64,
    k_hat: f64,
}

impl EntropyPair {
    pub fn new(k: f64, k_hat: f64, a: f64) -> Result<Self> {
        let cfg = PlayConfig::new(a)?;
        if !k.is_finite() || !k_hat.is_finite() || !cfg.contains(k, k_hat) {
            return Err(Error::OutsideStrip { u: k, w: k_hat, a });
        }
        Ok(Self { k, k_hat })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn k_hat(&self) -> f64 {
        self.k_hat
    }

    /// `ENTROPY_TOL * (|k| + |k_hat| + 1)`.
    pub fn tolerance(&self) -> f64 {
        ENTROPY_TOL * (self.k.abs() + self.k_hat.abs() + 1.0)
    }
}

/// `n x n` uniform pairs over `u_range x w_range` that lie in the strip, plus
/// the strip corners `(U_m, U_m -+ a)` and `(U_M, U_M -+ a)`.
pub fn pair_grid(u_range: (f64, f64), w_range: (f64, f64), a: f64, n: usize) -> Vec<EntropyPair> {
    let node = |(lo, hi): (f64, f64), j: usize| {
        if n < 2 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * j as f64 / (n - 1) as f64
        }
    };
    let mut pairs = Vec::with_capacity(n * n + 4);
    for i in 0..n {
        for j in 0..n {
            if let Ok(p) = EntropyPair::new(node(u_range, i), node(w_range, j), a) {
                pairs.push(p);
            }
        }
    }
    for k in [u_range.0, u_range.1] {
        for k_hat in [k - a, k + a] {
            if let Ok(p) = EntropyPair::new(k, k_hat, a) {
                pairs.push(p);
            }
        }
    }
    pairs
}

/// Kruzhkov numerical entropy flux `g(a v k, b v k) - g(a ^ k, b ^ k)`.
fn entropy_flux(f: &ConvexFlux, alpha: f64, beta: f64, k: f64) -> f64 {
    godunov(f, alpha.max(k), beta.max(k)) - godunov(f, alpha.min(k), beta.min(k))
}

fn check_layers(prev: &FieldState, next: &FieldState) -> Result<()> {
    let n = prev.len();
    if next.len() != n || prev.w.len() != n || next.w.len() != n {
        return Err(Error::LengthMismatch(n, next.len()));
    }
    if n == 0 {
        return Err(Error::Precondition("empty layer".into()));
    }
    Ok(())
}

/// Largest left-hand side of the cell entropy inequality over all cells;
/// non-positive up to rounding for a correct scheme.
pub fn entropy_residual(
    prev: &FieldState,
    next: &FieldState,
    pair: EntropyPair,
    f: &ConvexFlux,
    dt: f64,
    dx: f64,
) -> Result<f64> {
    check_layers(prev, next)?;
    let n = prev.len();
    let (k, kh) = (pair.k, pair.k_hat);
    let lambda = dt / dx;
    let u = &prev.u;
    let at = |i: isize| u[i.clamp(0, n as isize - 1) as usize];
    let mut left = entropy_flux(f, at(-1), at(0), k);
    let mut worst = f64::NEG_INFINITY;
    for (i, &ui) in u.iter().enumerate() {
        let right = entropy_flux(f, ui, at(i as isize + 1), k);
        let r = (next.u[i] - k).abs() - (ui - k).abs() + (next.w[i] - kh).abs() - (prev.w[i] - kh).abs()
            + lambda * (right - left);
        worst = worst.max(r);
        left = right;
    }
    Ok(worst)
}

/// `dx * sum v_i^2`.
pub fn l2_squared(v: &[f64], dx: f64) -> f64 {
    dx * v.iter().map(|x| x * x).sum::<f64>()
}

/// `dx * sum |a_i - b_i|`.
pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Slack of the global energy inequality over one step, boundary term included:
/// `dt (G(u_0) - G(u_last)) - (1/2) dx sum[du^2 + dw^2] - a dx sum |dw|`.
pub fn hysteresis_step_slack(prev: &FieldState, next: &FieldState, f: &ConvexFlux, a: f64, dx: f64) -> Result<f64> {
    check_layers(prev, next)?;
    let dt = next.t - prev.t;
    let n = prev.len();
    let boundary = dt * (entropy_potential(f, prev.u[0]) - entropy_potential(f, prev.u[n - 1]));
    let mut energy = 0.0;
    let mut dissipation = 0.0;
    for i in 0..n {
        energy += (next.u[i] * next.u[i] - prev.u[i] * prev.u[i]) + (next.w[i] * next.w[i] - prev.w[i] * prev.w[i]);
        dissipation += (next.w[i] - prev.w[i]).abs();
    }
    Ok(boundary - 0.5 * dx * energy - a * dx * dissipation)
}

/// Energy inequality on every consecutive pair of layers, tolerance
/// `HYSTERESIS_TOL` times the initial `dx sum (u^2 + w^2)`.
pub fn hysteresis_ledger_check(history: &[FieldState], f: &ConvexFlux, a: f64, dx: f64) -> Result<Check> {
    if history.len() < 2 {
        return Err(Error::Precondition("need at least two layers".into()));
    }
    let tol = HYSTERESIS_TOL * energy_scale(&history[0], dx);
    let mut check = Check::new("weak hysteresis");
    for pair in history.windows(2) {
        let slack = hysteresis_step_slack(&pair[0], &pair[1], f, a, dx)?;
        check.record(pair[1].step, slack, tol);
    }
    Ok(check)
}

fn energy_scale(s: &FieldState, dx: f64) -> f64 {
    (l2_squared(&s.u, dx) + l2_squared(&s.w, dx)).max(dx)
}

/// Per-cell slack of the sharp energy inequality
/// `-dt (G(u(x_{i+1/2}-)) - G(u(x_{i-1/2}+))) - (1/2) dx (du^2 + dw^2) - a dx |dw|`,
/// using the interface traces recorded by the step.
pub fn per_cell_dissipation(
    prev: &FieldState,
    next: &FieldState,
    report: &StepReport,
    f: &ConvexFlux,
    a: f64,
    dx: f64,
) -> Result<Vec<f64>> {
    check_layers(prev, next)?;
    let n = prev.len();
    if report.traces.len() != n + 1 {
        return Err(Error::MissingTraces);
    }
    let dt = report.dt;
    let g: Vec<(f64, f64)> = report
        .traces
        .iter()
        .map(|&(l, r)| (entropy_potential(f, l), entropy_potential(f, r)))
        .collect();
    Ok((0..n)
        .map(|i| {
            let (u0, u1, w0, w1) = (prev.u[i], next.u[i], prev.w[i], next.w[i]);
            -dt * (g[i + 1].0 - g[i].1) - 0.5 * dx * ((u1 * u1 - u0 * u0) + (w1 * w1 - w0 * w0)) - a * dx * (w1 - w0).abs()
        })
        .collect())
}

/// Scale of one cell's energy terms, for the per-cell tolerance.
pub fn cell_scale(prev: &FieldState, i: usize, dx: f64) -> f64 {
    dx * (1.0 + prev.u[i] * prev.u[i] + prev.w[i] * prev.w[i])
}

/// Exact half-cell energy slack of a single shock joining `left` to `right`
/// at speed `sigma` during `dt`:
/// `dt [G(u-) - G(u+) - sigma/2 ((u-^2 - u+^2) + (w-^2 - w+^2)) - a |sigma| |w- - w+|]`.
pub fn shock_slack(left: PlayState, right: PlayState, sigma: f64, f: &ConvexFlux, a: f64, dt: f64) -> f64 {
    let (um, up, wm, wp) = (left.u, right.u, left.w, right.w);
    dt * (entropy_potential(f, um) - entropy_potential(f, up)
        - 0.5 * sigma * ((um * um - up * up) + (wm * wm - wp * wp))
        - a * sigma.abs() * (wm - wp).abs())
}

/// Closed form of [`shock_slack`] for a shock in `u` alone:
/// `dt [(f(u-) + f(u+)) (u- - u+) / 2 - \int_{u+}^{u-} f]`.
pub fn u_only_shock_slack(um: f64, up: f64, f: &ConvexFlux, dt: f64) -> f64 {
    dt * (0.5 * (f.eval(um) + f.eval(up)) * (um - up) - flux_integral(f, up, um))
}

/// Closed form of [`shock_slack`] for a right-moving fast shock from
/// `(u_l, u_l - a)` to `(u_r, w_r)`, split as `I1 + I2 + I3`.
pub fn fast_shock_slack(ul: f64, ur: f64, wr: f64, s: &RightShockSpeeds, f: &ConvexFlux, a: f64, dt: f64) -> [f64; 3] {
    let edge = wr + a;
    let i1 = u_only_shock_slack(ul, edge, f, dt);
    let i2 = u_only_shock_slack(edge, ur, f, dt);
    let i3 = dt * (s.i_r * s.i_l / (s.i_r + 2.0 * s.i_l)) * (ul - ur) * (s.mu_l - s.mu_r);
    [i1, i2, i3]
}

/// Per-step drift of `dx sum (u + w)` minus `dt (g_0 - g_n)`, and the scale
/// it is compared against. Boundary fluxes are those of the ghost cells.
pub fn conservation_defect(prev: &FieldState, next: &FieldState, f: &ConvexFlux, dx: f64) -> Result<(f64, f64)> {
    check_layers(prev, next)?;
    let n = prev.len();
    let dt = next.t - prev.t;
    let (g0, gn) = (f.eval(prev.u[0]), f.eval(prev.u[n - 1]));
    let drift = next.mass(dx) - prev.mass(dx);
    let expected = dt * (g0 - gn);
    let scale = dx * prev.u.iter().zip(&prev.w).map(|(u, w)| u.abs() + w.abs()).sum::<f64>()
        + dt * (g0.abs() + gn.abs());
    Ok((drift - expected, scale.max(f64::MIN_POSITIVE)))
}

/// Compactness estimates over a run.
#[derive(Clone, Debug)]
pub struct CompactnessReport {
    pub tv_u: Check,
    pub tv_w: Check,
    pub range: Check,
    pub strip: Check,
    pub time_u: Check,
    /// Same bound for `w`; it holds empirically only.
    pub time_w: Check,
    pub conservation: Check,
    /// Largest `dx sum |u^{n+1} - u^n| / (2 L TV(u0) dt)`.
    pub max_ratio_u: f64,
    pub max_ratio_w: f64,
}

impl CompactnessReport {
    fn new() -> Self {
        Self {
            tv_u: Check::new("TV(u) non-increasing"),
            tv_w: Check::new("TV(w) non-increasing"),
            range: Check::new("range containment"),
            strip: Check::new("strip condition"),
            time_u: Check::new("L1-time bound (u)"),
            time_w: Check::new("L1-time bound (w)"),
            conservation: Check::new("conservation"),
            max_ratio_u: 0.0,
            max_ratio_w: 0.0,
        }
    }

    /// The checks that are theorems of the scheme.
    pub fn proved(&self) -> [&Check; 6] {
        [&self.tv_u, &self.tv_w, &self.range, &self.strip, &self.time_u, &self.conservation]
    }

    pub fn passed(&self) -> bool {
        self.proved().iter().all(|c| c.passed())
    }
}

/// Reference data for the compactness checks of one run.
#[derive(Clone, Debug)]
pub struct CompactnessBaseline {
    pub lipschitz: f64,
    pub tv0_u: f64,
    pub tv0_w: f64,
    pub range_u: (f64, f64),
    pub range_w: (f64, f64),
    pub a: f64,
}

impl CompactnessBaseline {
    pub fn from_initial(initial: &FieldState, f: &ConvexFlux, a: f64) -> Result<Self> {
        let range_u = initial.range_u();
        Ok(Self {
            lipschitz: lipschitz_on(f, range_u.0, range_u.1)?,
            tv0_u: total_variation(&initial.u),
            tv0_w: total_variation(&initial.w),
            range_u,
            range_w: initial.range_w(),
            a,
        })
    }

    fn record(&self, rep: &mut CompactnessReport, prev: &FieldState, next: &FieldState, f: &ConvexFlux, dx: f64) -> Result<()> {
        let step = next.step;
        let dt = next.t - prev.t;
        let mag = |r: (f64, f64)| 1f64.max(r.0.abs()).max(r.1.abs());
        let scale_u = mag(self.range_u);
        let scale_w = mag(self.range_w);

        let (tp, tn) = (total_variation(&prev.u), total_variation(&next.u));
        rep.tv_u.record(step, tp - tn, MONITOR_TOL * tp.max(scale_u));
        let (tp, tn) = (total_variation(&prev.w), total_variation(&next.w));
        rep.tv_w.record(step, tp - tn, MONITOR_TOL * tp.max(scale_w));

        let within = |r: (f64, f64), outer: (f64, f64)| (r.0 - outer.0).min(outer.1 - r.1);
        let scale = scale_u.max(scale_w);
        let slack = within(next.range_u(), prev.range_u())
            .min(within(next.range_w(), prev.range_w()))
            .min(within(next.range_u(), self.range_u))
            .min(within(next.range_w(), self.range_w));
        rep.range.record(step, slack, MONITOR_TOL * scale);

        rep.strip.record(step, self.a - next.max_gap(), STRIP_SLACK);

        let bound_u = 2.0 * self.lipschitz * self.tv0_u * dt;
        let du = l1_distance(&next.u, &prev.u, dx);
        rep.time_u.record(step, bound_u - du, MONITOR_TOL * bound_u.max(dx * scale_u));
        let bound_w = 2.0 * self.lipschitz * self.tv0_w * dt;
        let dw = l1_distance(&next.w, &prev.w, dx);
        rep.time_w.record(step, bound_w - dw, MONITOR_TOL * bound_w.max(dx * scale_w));
        if bound_u > 0.0 {
            rep.max_ratio_u = rep.max_ratio_u.max(du / bound_u);
        }
        if bound_w > 0.0 {
            rep.max_ratio_w = rep.max_ratio_w.max(dw / bound_w);
        }

        let (defect, scale) = conservation_defect(prev, next, f, dx)?;
        rep.conservation.record(step, -defect.abs(), MONITOR_TOL * scale);
        Ok(())
    }
}

/// TV, range, strip, L1-in-time and conservation checks over recorded layers.
/// The time bound is checked per step, which implies it for every pair `s < t`.
pub fn compactness_monitors(history: &[FieldState], f: &ConvexFlux, a: f64, dx: f64) -> Result<CompactnessReport> {
    let first = history.first().ok_or_else(|| Error::Precondition("empty history".into()))?;
    let base = CompactnessBaseline::from_initial(first, f, a)?;
    let mut rep = CompactnessReport::new();
    for pair in history.windows(2) {
        base.record(&mut rep, &pair[0], &pair[1], f, dx)?;
    }
    Ok(rep)
}

/// L1 distance between two runs on the same grid.
#[derive(Clone, Debug)]
pub struct ContractionReport {
    /// `D(n) = dx sum (|u_a - u_b| + |w_a - w_b|)` for every common layer.
    pub distances: Vec<f64>,
    /// `D(n) <= D(n-1) + tol` for every step.
    pub monotone: Check,
    /// `D(n) <= D(0) + tol`.
    pub bounded: Check,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.monotone.passed() && self.bounded.passed()
    }
}

/// Checks that the L1 distance of two runs never grows; tolerance
/// `CONTRACTION_TOL * D(0)`.
pub fn l1_contraction_check(run_a: &[FieldState], run_b: &[FieldState], dx: f64) -> Result<ContractionReport> {
    if run_a.is_empty() || run_b.is_empty() {
        return Err(Error::Precondition("empty history".into()));
    }
    let mut distances = Vec::with_capacity(run_a.len().min(run_b.len()));
    for (sa, sb) in run_a.iter().zip(run_b) {
        if sa.len() != sb.len() || (sa.t - sb.t).abs() > 1e-12 * 1f64.max(sa.t.abs()) {
            return Err(Error::GridMismatch);
        }
        distances.push(l1_distance(&sa.u, &sb.u, dx) + l1_distance(&sa.w, &sb.w, dx));
    }
    let d0 = distances[0];
    let tol = CONTRACTION_TOL * d0;
    let mut monotone = Check::new("L1 contraction (monotone)");
    let mut bounded = Check::new("L1 contraction (bounded)");
    for (n, pair) in distances.windows(2).enumerate() {
        monotone.record(n + 1, pair[0] - pair[1], tol);
        bounded.record(n + 1, d0 - pair[1], tol);
    }
    Ok(ContractionReport { distances, monotone, bounded })
}

/// One row of the diagnostic ledger.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub n: usize,
    pub t: f64,
    pub tv_u: f64,
    pub tv_w: f64,
    /// `dx sum (u + w)`.
    pub mass: f64,
    /// `dx sum u^2`.
    pub l2_u: f64,
    pub l2_w: f64,
    pub l2_sum: f64,
    /// `a dx sum_n sum_i |w_i^{n+1} - w_i^n|`, accumulated.
    pub dissipation: f64,
    /// Largest entropy residual of the step ending at this layer.
    pub entropy_residual_max: f64,
    pub range_u: (f64, f64),
    pub range_w: (f64, f64),
}

impl LedgerRow {
    pub const HEADER: [&'static str; 10] =
        ["n", "t", "tv_u", "tv_w", "mass", "l2_u", "l2_w", "l2_sum", "dissipation", "entropy_residual_max"];

    fn of(s: &FieldState, dx: f64, dissipation: f64, entropy_residual_max: f64) -> Self {
        let (l2_u, l2_w) = (l2_squared(&s.u, dx), l2_squared(&s.w, dx));
        Self {
            n: s.step,
            t: s.t,
            tv_u: total_variation(&s.u),
            tv_w: total_variation(&s.w),
            mass: s.mass(dx),
            l2_u,
            l2_w,
            l2_sum: l2_u + l2_w,
            dissipation,
            entropy_residual_max,
            range_u: range(&s.u),
            range_w: range(&s.w),
        }
    }

    pub fn record(&self) -> [String; 10] {
        [
            self.n.to_string(),
            format!("{:.17e}", self.t),
            format!("{:.17e}", self.tv_u),
            format!("{:.17e}", self.tv_w),
            format!("{:.17e}", self.mass),
            format!("{:.17e}", self.l2_u),
            format!("{:.17e}", self.l2_w),
            format!("{:.17e}", self.l2_sum),
            format!("{:.17e}", self.dissipation),
            format!("{:.17e}", self.entropy_residual_max),
        ]
    }
}

/// Writes ledger rows as CSV.
pub fn write_ledger<W: std::io::Write>(rows: &[LedgerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LedgerRow::HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Which streaming checks a [`Monitor`] evaluates.
#[derive(Clone, Copy, Debug)]
pub struct MonitorOptions {
    pub entropy: bool,
    /// Side of the entropy pair grid.
    pub pair_grid: usize,
    pub per_cell: bool,
    /// Keep one ledger row every `ledger_stride` steps (the last step is always kept).
    pub ledger_stride: usize,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self { entropy: true, pair_grid: 9, per_cell: true, ledger_stride: 1 }
    }
}

/// Streaming diagnostics attached to [`crate::scheme::run`].
pub struct Monitor {
    opts: MonitorOptions,
    dx: f64,
    a: f64,
    pairs: Vec<EntropyPair>,
    base: CompactnessBaseline,
    energy_tol: f64,
    dissipation: f64,
    last: Option<LedgerRow>,
    pub rows: Vec<LedgerRow>,
    pub entropy: Check,
    pub hysteresis: Check,
    pub per_cell: Check,
    pub compactness: CompactnessReport,
    error: Option<Error>,
}

impl Monitor {
    pub fn new(initial: &FieldState, grid: &Grid1D, f: &ConvexFlux, a: f64, opts: MonitorOptions) -> Result<Self> {
        let base = CompactnessBaseline::from_initial(initial, f, a)?;
        let pairs = if opts.entropy { pair_grid(base.range_u, base.range_w, a, opts.pair_grid) } else { Vec::new() };
        Ok(Self {
            opts,
            dx: grid.dx,
            a,
            pairs,
            energy_tol: HYSTERESIS_TOL * energy_scale(initial, grid.dx),
            base,
            dissipation: 0.0,
            last: None,
            rows: vec![LedgerRow::of(initial, grid.dx, 0.0, 0.0)],
            entropy: Check::new("discrete entropy"),
            hysteresis: Check::new("weak hysteresis"),
            per_cell: Check::new("per-cell dissipation"),
            compactness: CompactnessReport::new(),
            error: None,
        })
    }

    pub fn pairs(&self) -> &[EntropyPair] {
        &self.pairs
    }

    /// Every evaluated check, in a fixed order.
    pub fn checks(&self) -> Vec<&Check> {
        let mut v = Vec::new();
        if self.opts.entropy {
            v.push(&self.entropy);
        }
        v.push(&self.hysteresis);
        if self.opts.per_cell {
            v.push(&self.per_cell);
        }
        v.extend(self.compactness.proved());
        v
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks().iter().all(|c| c.passed())
    }

    /// The first error raised while evaluating a step, if any.
    pub fn error(&self) -> Option<&Error> {
        self.error.as_ref()
    }

    /// Ledger rows including the last layer.
    pub fn finish(mut self) -> Result<(Vec<LedgerRow>, Self)> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if let Some(row) = self.last.take() {
            self.rows.push(row);
        }
        Ok((std::mem::take(&mut self.rows), self))
    }

    fn observe(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        let (prev, next, f) = (ctx.prev, ctx.next, &ctx.cfg.flux);
        let (dx, a, step) = (self.dx, self.a, next.step);
        let dt = ctx.report.dt;

        let mut residual = f64::NEG_INFINITY;
        for &pair in &self.pairs {
            let r = entropy_residual(prev, next, pair, f, dt, dx)?;
            self.entropy.record(step, -r, pair.tolerance());
            residual = residual.max(r);
        }

        let slack = hysteresis_step_slack(prev, next, f, a, dx)?;
        self.hysteresis.record(step, slack, self.energy_tol);

        if self.opts.per_cell {
            let cells = per_cell_dissipation(prev, next, ctx.report, f, a, dx)?;
            for (i, s) in cells.into_iter().enumerate() {
                self.per_cell.record(step, s, HYSTERESIS_TOL * cell_scale(prev, i, dx));
            }
        }

        self.base.record(&mut self.compactness, prev, next, f, dx)?;

        self.dissipation += a * l1_distance(&next.w, &prev.w, dx);
        let row = LedgerRow::of(next, dx, self.dissipation, if self.pairs.is_empty() { 0.0 } else { residual });
        if step % self.opts.ledger_stride.max(1) == 0 {
            self.rows.push(row);
            self.last = None;
        } else {
            self.last = Some(row);
        }
        Ok(())
    }
}

impl Observer for Monitor {
    fn on_step(&mut self, ctx: &StepContext<'_>) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.observe(ctx) {
            self.error = Some(e);
        }
    }
}

/// Records every layer of a run.
#[derive(Default)]
pub struct History {
    pub layers: Vec<FieldState>,
}

impl History {
    pub fn starting_at(initial: &FieldState) -> Self {
        Self { layers: vec![initial.clone()] }
    }
}

impl Observer for History {
    fn on_step(&mut self, ctx: &StepContext<'_>) {
        if self.layers.is_empty() {
            self.layers.push(ctx.prev.clone());
        }
        self.layers.push(ctx.next.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::speeds_right;
    use crate::hysteresis::PlayConfig;
    use crate::scheme::{cfl_dt, run, step, SchemeConfig};
    use proptest::prelude::*;

    fn riemann_state(grid: &Grid1D, l: (f64, f64), r: (f64, f64)) -> FieldState {
        let mut s = FieldState::constant(grid.n, r.0, r.1);
        for i in 0..grid.n {
            if grid.center(i) < 0.0 {
                s.u[i] = l.0;
                s.w[i] = l.1;
            }
        }
        s
    }

    fn riemann_history(l: (f64, f64), r: (f64, f64), t: f64) -> (Vec<FieldState>, SchemeConfig, Grid1D) {
        let grid = Grid1D::covering(-2.0, 2.0, 0.02).unwrap();
        let cfg = SchemeConfig::new(ConvexFlux::burgers(), 1.0, 1.0).unwrap();
        let init = riemann_state(&grid, l, r);
        let mut hist = History::starting_at(&init);
        run(&init, &cfg, &grid, t, &mut [&mut hist]).unwrap();
        (hist.layers, cfg, grid)
    }

    #[test]
    fn pair_outside_strip_is_rejected() {
        assert!(EntropyPair::new(0.0, 1.5, 1.0).is_err());
        assert!(EntropyPair::new(0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn pair_grid_stays_in_strip_and_has_corners() {
        let pairs = pair_grid((-1.0, 3.0), (-1.0, 3.0), 1.0, 9);
        assert!(pairs.iter().all(|p| (p.k() - p.k_hat()).abs() <= 1.0 + 1e-12));
        for (k, kh) in [(-1.0, -2.0), (-1.0, 0.0), (3.0, 2.0), (3.0, 4.0)] {
            assert!(pairs.iter().any(|p| p.k() == k && p.k_hat() == kh));
        }
    }

    #[test]
    fn constant_run_has_zero_residuals() {
        let s = FieldState::constant(10, 0.3, 0.1);
        let mut t = s.clone();
        t.t = 0.1;
        let f = ConvexFlux::burgers();
        for p in pair_grid((-1.0, 1.0), (-1.0, 1.0), 1.0, 5) {
            assert_eq!(entropy_residual(&s, &t, p, &f, 0.1, 0.1).unwrap(), 0.0);
        }
        assert_eq!(hysteresis_step_slack(&s, &t, &f, 1.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn large_pair_reduces_to_conservation() {
        let (hist, cfg, grid) = riemann_history((1.5, 2.0), (-1.0, -1.0), 0.2);
        let p = EntropyPair::new(10.0, 10.0, 1.0).unwrap();
        for pair in hist.windows(2) {
            let dt = pair[1].t - pair[0].t;
            let r = entropy_residual(&pair[0], &pair[1], p, &cfg.flux, dt, grid.dx).unwrap();
            assert!(r.abs() <= 1e-12 * 30.0, "residual {r}");
        }
    }

    #[test]
    fn fast_shock_run_satisfies_entropy_on_pair_grid() {
        let (hist, cfg, grid) = riemann_history((1.5, 2.0), (-1.0, -1.0), 0.5);
        let pairs = pair_grid(hist[0].range_u(), hist[0].range_w(), 1.0, 9);
        for pair in hist.windows(2) {
            let dt = pair[1].t - pair[0].t;
            for &p in &pairs {
                let r = entropy_residual(&pair[0], &pair[1], p, &cfg.flux, dt, grid.dx).unwrap();
                assert!(r <= p.tolerance(), "residual {r}");
            }
        }
    }

    #[test]
    fn rarefaction_run_dissipates_strictly() {
        let (hist, cfg, grid) = riemann_history((1.0, 0.5), (3.0, 3.0), 0.25);
        let check = hysteresis_ledger_check(&hist, &cfg.flux, 1.0, grid.dx).unwrap();
        assert!(check.passed(), "{check}");
        let slacks: Vec<f64> = hist
            .windows(2)
            .map(|p| hysteresis_step_slack(&p[0], &p[1], &cfg.flux, 1.0, grid.dx).unwrap())
            .collect();
        assert!(slacks.iter().skip(5).all(|&s| s > 0.0));
    }

    #[test]
    fn per_cell_slack_nonnegative_on_shock_runs() {
        for (l, r) in [((1.5, 2.0), (-1.0, -1.0)), ((1.5, 2.0), (0.5, 0.0)), ((-0.5, 0.0), (-1.5, -2.0))] {
            let grid = Grid1D::covering(-2.0, 2.0, 0.02).unwrap();
            let cfg = SchemeConfig::new(ConvexFlux::burgers(), 1.0, 1.0).unwrap();
            let mut s = riemann_state(&grid, l, r);
            let dt = cfl_dt(&cfg, &grid, &s).unwrap();
            for _ in 0..50 {
                let (next, report) = step(&s, &cfg, &grid, dt).unwrap();
                let cells = per_cell_dissipation(&s, &next, &report, &cfg.flux, 1.0, grid.dx).unwrap();
                for (i, c) in cells.iter().enumerate() {
                    assert!(*c >= -1e-10 * cell_scale(&s, i, grid.dx), "cell {i}: {c}");
                }
                s = next;
            }
        }
    }

    #[test]
    fn missing_traces_rejected() {
        let s = FieldState::constant(4, 0.0, 0.0);
        let report = StepReport { dt: 0.1, ..Default::default() };
        let err = per_cell_dissipation(&s, &s, &report, &ConvexFlux::burgers(), 1.0, 0.1).unwrap_err();
        assert_eq!(err, Error::MissingTraces);
    }

    #[test]
    fn frozen_cell_is_godunov_entropy_dissipation() {
        // u-only shock between two interior states, w far from the strip edges.
        let f = ConvexFlux::burgers();
        let cfg = SchemeConfig::new(f.clone(), 5.0, 1.0).unwrap();
        let grid = Grid1D::covering(-1.0, 1.0, 0.1).unwrap();
        let s = riemann_state(&grid, (1.0, 0.0), (0.0, 0.0));
        let dt = cfl_dt(&cfg, &grid, &s).unwrap();
        let (next, report) = step(&s, &cfg, &grid, dt).unwrap();
        assert_eq!(next.w, s.w);
        let cells = per_cell_dissipation(&s, &next, &report, &f, 5.0, grid.dx).unwrap();
        assert!(cells.iter().all(|&c| c >= 0.0));
        assert!(cells.iter().any(|&c| c > 0.0));
    }

    #[test]
    fn u_only_shock_slack_closed_form() {
        let f = ConvexFlux::burgers();
        let (um, up, dt) = (1.0, -0.5, 0.3);
        let sigma = 0.5 * (um + up);
        let w = 0.2;
        let direct = shock_slack(PlayState::new(um, w), PlayState::new(up, w), sigma, &f, 1.0, dt);
        let closed = u_only_shock_slack(um, up, &f, dt);
        // Burgers: (u- - u+)^3 / 12.
        assert!((closed - dt * 1.5f64.powi(3) / 12.0).abs() < 1e-15);
        assert!((direct - closed).abs() < 1e-14);
    }

    #[test]
    fn fast_shock_slack_matches_three_terms() {
        let f = ConvexFlux::burgers();
        for (ul, ur, wr) in [(1.5, -1.0, -1.0), (3.5, -1.0, -1.0)] {
            let s = speeds_right(&f, ul, ur, wr, 1.0).unwrap();
            assert!(s.is_fast());
            let dt = 0.01;
            let direct = shock_slack(PlayState::new(ul, ul - 1.0), PlayState::new(ur, wr), s.mu, &f, 1.0, dt);
            let [i1, i2, i3] = fast_shock_slack(ul, ur, wr, &s, &f, 1.0, dt);
            assert!(i1 >= 0.0 && i2 >= 0.0 && i3 >= 0.0);
            assert!((direct - (i1 + i2 + i3)).abs() < 1e-13, "{direct} vs {}", i1 + i2 + i3);
        }
    }

    #[test]
    fn compactness_on_two_shock_run() {
        let (hist, cfg, grid) = riemann_history((1.5, 2.0), (0.5, 0.0), 0.5);
        let rep = compactness_monitors(&hist, &cfg.flux, 1.0, grid.dx).unwrap();
        for c in rep.proved() {
            assert!(c.passed(), "{c}");
        }
        assert!(rep.max_ratio_u <= 1.0);
    }

    #[test]
    fn constant_run_compactness_is_tight() {
        let s = FieldState::constant(8, 0.5, 0.0);
        let mut t = s.clone();
        t.t = 0.01;
        t.step = 1;
        let rep = compactness_monitors(&[s, t], &ConvexFlux::burgers(), 1.0, 0.1).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.tv_u.worst_slack, 0.0);
        assert_eq!(rep.time_u.worst_slack, 0.0);
    }

    #[test]
    fn contraction_identical_is_zero() {
        let (hist, _, grid) = riemann_history((1.0, 0.5), (3.0, 3.0), 0.1);
        let rep = l1_contraction_check(&hist, &hist, grid.dx).unwrap();
        assert!(rep.distances.iter().all(|&d| d == 0.0));
        assert!(rep.passed());
    }

    #[test]
    fn contraction_rejects_mismatched_grids() {
        let a = vec![FieldState::constant(4, 0.0, 0.0)];
        let b = vec![FieldState::constant(5, 0.0, 0.0)];
        assert_eq!(l1_contraction_check(&a, &b, 0.1).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn monitor_matches_pure_checks() {
        let grid = Grid1D::covering(-2.0, 2.0, 0.05).unwrap();
        let cfg = SchemeConfig::new(ConvexFlux::burgers(), 1.0, 1.0).unwrap();
        let init = riemann_state(&grid, (1.5, 2.0), (0.5, 0.0));
        let mut hist = History::starting_at(&init);
        let mut mon = Monitor::new(&init, &grid, &cfg.flux, 1.0, MonitorOptions::default()).unwrap();
        run(&init, &cfg, &grid, 0.5, &mut [&mut hist, &mut mon]).unwrap();
        assert!(mon.passed());
        let pure = hysteresis_ledger_check(&hist.layers, &cfg.flux, 1.0, grid.dx).unwrap();
        assert_eq!(pure.worst_slack, mon.hysteresis.worst_slack);
        let (rows, _) = mon.finish().unwrap();
        assert_eq!(rows.len(), hist.layers.len());
        for w in rows.windows(2) {
            assert!(w[1].tv_u <= w[0].tv_u + 1e-12);
        }
    }

    #[test]
    fn ledger_csv_header() {
        let s = FieldState::constant(3, 0.0, 0.0);
        let mut buf = Vec::new();
        write_ledger(&[LedgerRow::of(&s, 0.1, 0.0, 0.0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,t,tv_u,tv_w,mass,l2_u,l2_w,l2_sum,dissipation,entropy_residual_max\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_steps_satisfy_all_inequalities(
            cells in prop::collection::vec((-2.0f64..2.0, -1.0f64..1.0), 6..20),
            frac in 0.3f64..1.0,
        ) {
            let f = ConvexFlux::burgers();
            let a = 1.0;
            let play = PlayConfig::new(a).unwrap();
            let u: Vec<f64> = cells.iter().map(|c| c.0).collect();
            let w: Vec<f64> = cells.iter().map(|&(x, d)| if play.contains(x, x + d) { x + d } else { x }).collect();
            let s = FieldState { u, w, t: 0.0, step: 0 };
            let grid = Grid1D::new(0.0, 0.1, s.len()).unwrap();
            let cfg = SchemeConfig::new(f.clone(), a, frac).unwrap();
            let dt = cfl_dt(&cfg, &grid, &s).unwrap();
            let (next, report) = step(&s, &cfg, &grid, dt).unwrap();
            for p in pair_grid(s.range_u(), s.range_w(), a, 5) {
                let r = entropy_residual(&s, &next, p, &f, dt, grid.dx).unwrap();
                prop_assert!(r <= p.tolerance(), "entropy residual {}", r);
            }
            let cells = per_cell_dissipation(&s, &next, &report, &f, a, grid.dx).unwrap();
            for (i, c) in cells.iter().enumerate() {
                prop_assert!(*c >= -1e-10 * cell_scale(&s, i, grid.dx), "cell {} slack {}", i, c);
            }
            let total = hysteresis_step_slack(&s, &next, &f, a, grid.dx).unwrap();
            prop_assert!(total >= cells.iter().sum::<f64>() - 1e-12);
            let rep = compactness_monitors(&[s, next], &f, a, grid.dx).unwrap();
            prop_assert!(rep.passed(), "{:?}", rep);
        }
    }
}
