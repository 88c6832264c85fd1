//! Exact Riemann solver for the hysteresis-coupled conservation law.
//!
//! The solution is self-similar in `xi = x / t`. When `u_l < u_r` it is built
//! from two half-problems glued at the minimizer `u_*` of `f` on
//! `[u_l, u_r]`: the part left of `x = 0` sees the upper modified branch around
//! `w_l`, the part right of it the lower branch around `w_r`. A stationary
//! `w`-contact at `x = 0` joins the two when their `w` traces differ.
//!
//! When `u_l > u_r` the waves are shocks. They travel right if
//! `f(u_l) > f(u_r)` and left if `f(u_l) < f(u_r)`. A shock that moves `w`
//! along the strip edge is either a slow coupled shock trailing a `u`-only
//! shock, or a single fast shock when the coupled one would overtake.

use std::fmt;

use crate::error::Result;
use crate::flux::{argmin_unchecked, speeds_left, speeds_right, ConvexFlux, DISPATCH_TOL};
use crate::hysteresis::{PlayConfig, PlayState};

/// Tolerance used by [`admissible`].
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// Threshold below which the two `w` traces at `x = 0` are treated as equal.
pub const CONTACT_TOL: f64 = 1e-12;

/// Riemann data with a strip half-width and a flux.
#[derive(Clone, Debug)]
pub struct RiemannProblem {
    pub left: PlayState,
    pub right: PlayState,
    pub cfg: PlayConfig,
    pub flux: ConvexFlux,
}

impl RiemannProblem {
    pub fn new(left: PlayState, right: PlayState, a: f64, flux: ConvexFlux) -> Result<Self> {
        let cfg = PlayConfig::new(a)?;
        PlayState::checked(left.u, left.w, cfg)?;
        PlayState::checked(right.u, right.w, cfg)?;
        Ok(Self { left, right, cfg, flux })
    }
}

/// How `w` behaves inside a rarefaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// `w` constant at the given value; characteristic speed `f'(u)`.
    Frozen(f64),
    /// `w = u + a`; speed `f'(u) / 2`.
    UpperEdge,
    /// `w = u - a`; speed `f'(u) / 2`.
    LowerEdge,
}

impl Coupling {
    fn w(self, u: f64, a: f64) -> f64 {
        match self {
            Coupling::Frozen(w) => w,
            Coupling::UpperEdge => u + a,
            Coupling::LowerEdge => u - a,
        }
    }

    fn factor(self) -> f64 {
        match self {
            Coupling::Frozen(_) => 1.0,
            _ => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShockKind {
    /// Jump in `u` only.
    UOnly,
    /// Jump along the strip edge, `w` moving with `u`.
    Coupled,
    /// Merged coupled and `u`-only shock.
    Fast,
    /// Zero-speed jump between states with equal flux.
    Stationary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Wave {
    /// Centered rarefaction; `u` increases from `u_from` to `u_to`.
    Rarefaction {
        u_from: f64,
        u_to: f64,
        coupling: Coupling,
        speed_from: f64,
        speed_to: f64,
    },
    Shock {
        left: PlayState,
        right: PlayState,
        sigma: f64,
        kind: ShockKind,
    },
    /// Stationary jump in `w` at `x = 0` with `u` continuous.
    Contact { u: f64, w_left: f64, w_right: f64 },
}

impl Wave {
    pub fn speed_range(&self) -> (f64, f64) {
        match *self {
            Wave::Rarefaction { speed_from, speed_to, .. } => (speed_from, speed_to),
            Wave::Shock { sigma, .. } => (sigma, sigma),
            Wave::Contact { .. } => (0.0, 0.0),
        }
    }

    pub fn left_state(&self, a: f64) -> PlayState {
        match *self {
            Wave::Rarefaction { u_from, coupling, .. } => PlayState::new(u_from, coupling.w(u_from, a)),
            Wave::Shock { left, .. } => left,
            Wave::Contact { u, w_left, .. } => PlayState::new(u, w_left),
        }
    }

    pub fn right_state(&self, a: f64) -> PlayState {
        match *self {
            Wave::Rarefaction { u_to, coupling, .. } => PlayState::new(u_to, coupling.w(u_to, a)),
            Wave::Shock { right, .. } => right,
            Wave::Contact { u, w_right, .. } => PlayState::new(u, w_right),
        }
    }
}

impl fmt::Display for Wave {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Wave::Rarefaction { u_from, u_to, coupling, speed_from, speed_to } => {
                let mode = match coupling {
                    Coupling::Frozen(w) => format!("w = {w}"),
                    Coupling::UpperEdge => "w = u + a".to_string(),
                    Coupling::LowerEdge => "w = u - a".to_string(),
                };
                write!(fm, "rarefaction u {u_from} -> {u_to} ({mode}), speeds [{speed_from}, {speed_to}]")
            }
            Wave::Shock { left, right, sigma, kind } => write!(
                fm,
                "{} shock ({}, {}) -> ({}, {}), speed {sigma}",
                match kind {
                    ShockKind::UOnly => "u-only",
                    ShockKind::Coupled => "coupled",
                    ShockKind::Fast => "fast",
                    ShockKind::Stationary => "stationary",
                },
                left.u,
                left.w,
                right.u,
                right.w
            ),
            Wave::Contact { u, w_left, w_right } => {
                write!(fm, "contact at x = 0, u = {u}, w {w_left} -> {w_right}")
            }
        }
    }
}

/// Ordered waves of a Riemann solution.
#[derive(Clone, Debug)]
pub struct WaveFan {
    pub waves: Vec<Wave>,
    pub left_state: PlayState,
    pub right_state: PlayState,
    a: f64,
    flux: ConvexFlux,
}

impl WaveFan {
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Shocks as `(left, right, sigma, kind)`.
    pub fn shocks(&self) -> impl Iterator<Item = (PlayState, PlayState, f64, ShockKind)> + '_ {
        self.waves.iter().filter_map(|w| match *w {
            Wave::Shock { left, right, sigma, kind } => Some((left, right, sigma, kind)),
            _ => None,
        })
    }

    pub fn min_speed(&self) -> f64 {
        self.waves.first().map_or(0.0, |w| w.speed_range().0)
    }

    pub fn max_speed(&self) -> f64 {
        self.waves.last().map_or(0.0, |w| w.speed_range().1)
    }
}

impl fmt::Display for WaveFan {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(fm, "left state  ({}, {})", self.left_state.u, self.left_state.w)?;
        writeln!(fm, "right state ({}, {})", self.right_state.u, self.right_state.w)?;
        if self.waves.is_empty() {
            return writeln!(fm, "no waves");
        }
        for (k, w) in self.waves.iter().enumerate() {
            writeln!(fm, "{}: {w}", k + 1)?;
        }
        Ok(())
    }
}

fn rarefaction(f: &ConvexFlux, u_from: f64, u_to: f64, coupling: Coupling) -> Wave {
    let c = coupling.factor();
    Wave::Rarefaction {
        u_from,
        u_to,
        coupling,
        speed_from: c * f.deriv(u_from),
        speed_to: c * f.deriv(u_to),
    }
}

fn push_contact(waves: &mut Vec<Wave>, u: f64, w_left: f64, w_right: f64) {
    if (w_left - w_right).abs() > CONTACT_TOL {
        waves.push(Wave::Contact { u, w_left, w_right });
    }
}

/// Solves the Riemann problem.
pub fn solve(p: &RiemannProblem) -> WaveFan {
    let f = &p.flux;
    let a = p.cfg.a();
    let PlayState { u: ul, w: wl } = p.left;
    let PlayState { u: ur, w: wr } = p.right;
    let mut waves = Vec::new();

    if ul == ur {
        push_contact(&mut waves, ul, wl, wr);
    } else if ul < ur {
        let us = argmin_unchecked(f, ul, ur);
        // left half: ul -> us under the upper branch around wl
        let mut w0m = wl;
        if ul < us {
            let edge = wl + a;
            if us <= edge {
                waves.push(rarefaction(f, ul, us, Coupling::Frozen(wl)));
            } else if ul >= edge {
                waves.push(rarefaction(f, ul, us, Coupling::LowerEdge));
                w0m = us - a;
            } else {
                waves.push(rarefaction(f, ul, edge, Coupling::Frozen(wl)));
                waves.push(rarefaction(f, edge, us, Coupling::LowerEdge));
                w0m = us - a;
            }
        }
        // right half: us -> ur under the lower branch around wr
        let mut right = Vec::new();
        let mut w0p = wr;
        if us < ur {
            let edge = wr - a;
            if us >= edge {
                right.push(rarefaction(f, us, ur, Coupling::Frozen(wr)));
            } else if ur <= edge {
                right.push(rarefaction(f, us, ur, Coupling::UpperEdge));
                w0p = us + a;
            } else {
                right.push(rarefaction(f, us, edge, Coupling::UpperEdge));
                right.push(rarefaction(f, edge, ur, Coupling::Frozen(wr)));
                w0p = us + a;
            }
        }
        push_contact(&mut waves, us, w0m, w0p);
        waves.extend(right);
    } else {
        let (fl, fr) = (f.eval(ul), f.eval(ur));
        if fl == fr {
            waves.push(Wave::Shock {
                left: p.left,
                right: p.right,
                sigma: 0.0,
                kind: ShockKind::Stationary,
            });
        } else if fl > fr {
            solve_right_moving(f, a, ul, wl, ur, wr, &mut waves);
        } else {
            solve_left_moving(f, a, ul, wl, ur, wr, &mut waves);
        }
    }

    WaveFan {
        waves,
        left_state: p.left,
        right_state: p.right,
        a,
        flux: p.flux.clone(),
    }
}

/// Shock structure of a right-moving family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RightStructure {
    /// `u_l <= w_r + a`: `w` stays at `w_r`.
    UOnly,
    /// `u_r = w_r + a`: one shock along the lower strip edge.
    Coupled,
    /// Coupled shock at `mu_l` followed by a `u`-only shock at `mu_r`.
    TwoShocks { mu_l: f64, mu_r: f64 },
    Fast { mu: f64 },
}

/// Shock structure of a left-moving family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeftStructure {
    /// `u_r >= w_l - a`: `w` stays at `w_l`.
    UOnly,
    /// `u_l = w_l - a`: one shock along the upper strip edge.
    Coupled,
    /// `u`-only shock at `nu_l` followed by a coupled shock at `nu_r`.
    TwoShocks { nu_l: f64, nu_r: f64 },
    Fast { nu: f64 },
}

/// Structure of the right-moving family for `u_l > u_r`, `f(u_l) > f(u_r)`.
pub fn classify_right(f: &ConvexFlux, ul: f64, ur: f64, wr: f64, a: f64) -> RightStructure {
    let edge = wr + a;
    if ul <= edge {
        return RightStructure::UOnly;
    }
    if ur >= edge {
        return RightStructure::Coupled;
    }
    match speeds_right(f, ul, ur, wr, a) {
        Ok(s) if s.is_fast() => RightStructure::Fast { mu: s.mu },
        Ok(s) => RightStructure::TwoShocks { mu_l: s.mu_l, mu_r: s.mu_r },
        Err(_) => unreachable!("u_r < w_r + a < u_l"),
    }
}

/// Structure of the left-moving family for `u_l > u_r`, `f(u_l) < f(u_r)`.
pub fn classify_left(f: &ConvexFlux, ul: f64, ur: f64, wl: f64, a: f64) -> LeftStructure {
    let edge = wl - a;
    if ur >= edge {
        return LeftStructure::UOnly;
    }
    if ul <= edge {
        return LeftStructure::Coupled;
    }
    match speeds_left(f, ul, ur, wl, a) {
        Ok(s) if s.is_fast() => LeftStructure::Fast { nu: s.nu },
        Ok(s) => LeftStructure::TwoShocks { nu_l: s.nu_l, nu_r: s.nu_r },
        Err(_) => unreachable!("u_r < w_l - a < u_l"),
    }
}

fn solve_right_moving(
    f: &ConvexFlux,
    a: f64,
    ul: f64,
    wl: f64,
    ur: f64,
    wr: f64,
    waves: &mut Vec<Wave>,
) {
    let (fl, fr) = (f.eval(ul), f.eval(ur));
    let right = PlayState::new(ur, wr);
    match classify_right(f, ul, ur, wr, a) {
        RightStructure::UOnly => {
            push_contact(waves, ul, wl, wr);
            waves.push(Wave::Shock {
                left: PlayState::new(ul, wr),
                right,
                sigma: (fl - fr) / (ul - ur),
                kind: ShockKind::UOnly,
            });
        }
        RightStructure::Coupled => {
            push_contact(waves, ul, wl, ul - a);
            waves.push(Wave::Shock {
                left: PlayState::new(ul, ul - a),
                right,
                sigma: (fl - fr) / (ul - ur + ul - a - wr),
                kind: ShockKind::Coupled,
            });
        }
        RightStructure::TwoShocks { mu_l, mu_r } => {
            let mid = PlayState::new(wr + a, wr);
            push_contact(waves, ul, wl, ul - a);
            waves.push(Wave::Shock {
                left: PlayState::new(ul, ul - a),
                right: mid,
                sigma: mu_l,
                kind: ShockKind::Coupled,
            });
            waves.push(Wave::Shock { left: mid, right, sigma: mu_r, kind: ShockKind::UOnly });
        }
        RightStructure::Fast { mu } => {
            push_contact(waves, ul, wl, ul - a);
            waves.push(Wave::Shock {
                left: PlayState::new(ul, ul - a),
                right,
                sigma: mu,
                kind: ShockKind::Fast,
            });
        }
    }
}

fn solve_left_moving(
    f: &ConvexFlux,
    a: f64,
    ul: f64,
    wl: f64,
    ur: f64,
    wr: f64,
    waves: &mut Vec<Wave>,
) {
    let (fl, fr) = (f.eval(ul), f.eval(ur));
    let left = PlayState::new(ul, wl);
    match classify_left(f, ul, ur, wl, a) {
        LeftStructure::UOnly => {
            waves.push(Wave::Shock {
                left,
                right: PlayState::new(ur, wl),
                sigma: (fl - fr) / (ul - ur),
                kind: ShockKind::UOnly,
            });
            push_contact(waves, ur, wl, wr);
        }
        LeftStructure::Coupled => {
            waves.push(Wave::Shock {
                left,
                right: PlayState::new(ur, ur + a),
                sigma: (fl - fr) / (ul - ur + wl - ur - a),
                kind: ShockKind::Coupled,
            });
            push_contact(waves, ur, ur + a, wr);
        }
        LeftStructure::TwoShocks { nu_l, nu_r } => {
            let mid = PlayState::new(wl - a, wl);
            waves.push(Wave::Shock { left, right: mid, sigma: nu_l, kind: ShockKind::UOnly });
            waves.push(Wave::Shock {
                left: mid,
                right: PlayState::new(ur, ur + a),
                sigma: nu_r,
                kind: ShockKind::Coupled,
            });
            push_contact(waves, ur, ur + a, wr);
        }
        LeftStructure::Fast { nu } => {
            waves.push(Wave::Shock {
                left,
                right: PlayState::new(ur, ur + a),
                sigma: nu,
                kind: ShockKind::Fast,
            });
            push_contact(waves, ur, ur + a, wr);
        }
    }
}

/// Inverts `c f'(u) = xi` on `[lo, hi]` by bisection.
fn invert_speed(f: &ConvexFlux, c: f64, xi: f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if c * f.deriv(m) < xi {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// State at similarity coordinate `xi = x / t`; right limit at a wave's speed.
pub fn sample(fan: &WaveFan, xi: f64) -> PlayState {
    let mut state = fan.left_state;
    for wave in &fan.waves {
        let (s0, s1) = wave.speed_range();
        if xi < s0 {
            return state;
        }
        if let Wave::Rarefaction { u_from, u_to, coupling, .. } = *wave {
            if xi < s1 {
                let u = invert_speed(&fan.flux, coupling.factor(), xi, u_from, u_to);
                return PlayState::new(u, coupling.w(u, fan.a));
            }
        }
        state = wave.right_state(fan.a);
    }
    fan.right_state
}

/// Rankine-Hugoniot speed, or `None` when `u- - u+ + w- - w+` vanishes.
pub fn rh_speed(left: PlayState, right: PlayState, f: &ConvexFlux) -> Option<f64> {
    let den = left.u - right.u + left.w - right.w;
    let scale = 1f64.max(left.u.abs()).max(right.u.abs()).max(left.w.abs()).max(right.w.abs());
    if den.abs() <= DISPATCH_TOL * scale {
        None
    } else {
        Some((f.eval(left.u) - f.eval(right.u)) / den)
    }
}

/// Which admissibility condition a shock satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShockCase {
    /// `w- = w+`.
    FrozenW,
    /// `f(u-) = f(u+)` and zero speed.
    Stationary,
    /// Both states on the lower edge `w = u - a`, `f- > f+`.
    LowerEdge,
    /// Left state on the lower edge, merged right-moving shock.
    LowerFast,
    /// Both states on the upper edge `w = u + a`, `f- < f+`.
    UpperEdge,
    /// Right state on the upper edge, merged left-moving shock.
    UpperFast,
}

/// Entropy admissibility of a discontinuity; `None` when inadmissible.
pub fn admissible(
    left: PlayState,
    right: PlayState,
    sigma: f64,
    f: &ConvexFlux,
    a: f64,
) -> Option<ShockCase> {
    let tol = ADMISSIBILITY_TOL;
    let (um, wm, up, wp) = (left.u, left.w, right.u, right.w);
    let scale = 1f64.max(um.abs()).max(up.abs()).max(wm.abs()).max(wp.abs());
    let eq = |x: f64, y: f64| (x - y).abs() <= tol * scale;
    if (um - wm).abs() > a + tol * scale || (up - wp).abs() > a + tol * scale {
        return None;
    }
    let (fm, fp) = (f.eval(um), f.eval(up));
    let fscale = 1f64.max(fm.abs()).max(fp.abs());
    if (fm - fp - sigma * (um - up + wm - wp)).abs() > tol * fscale * scale {
        return None;
    }
    if um < up - tol * scale {
        return None;
    }
    if eq(wm, wp) {
        return Some(ShockCase::FrozenW);
    }
    if (fm - fp).abs() <= tol * fscale && sigma.abs() <= tol * scale {
        return Some(ShockCase::Stationary);
    }
    if wm <= wp {
        return None;
    }
    if fm > fp && eq(wm, um - a) {
        if eq(wp, up - a) {
            return Some(ShockCase::LowerEdge);
        }
        let edge = wp + a;
        let mu_p = (f.eval(edge) - fp) / (edge - up);
        let mu_m = 0.5 * (fm - f.eval(edge)) / (um - edge);
        if edge > up && edge < um && mu_p <= mu_m + tol * 1f64.max(mu_m.abs()) {
            return Some(ShockCase::LowerFast);
        }
    }
    if fm < fp && eq(wp, up + a) {
        if eq(wm, um + a) {
            return Some(ShockCase::UpperEdge);
        }
        let edge = wm - a;
        let nu_m = (fm - f.eval(edge)) / (um - edge);
        let nu_p = 0.5 * (f.eval(edge) - fp) / (edge - up);
        if edge > up && edge < um && nu_p <= nu_m + tol * 1f64.max(nu_m.abs()) {
            return Some(ShockCase::UpperFast);
        }
    }
    None
}

/// Traces `(u(0-), u(0+))` of the Riemann solution at `x = 0`.
///
/// They do not depend on the `w` data.
pub fn interface_u_traces(f: &ConvexFlux, ul: f64, ur: f64) -> (f64, f64) {
    if ul <= ur {
        let us = argmin_unchecked(f, ul, ur);
        return (us, us);
    }
    let (fl, fr) = (f.eval(ul), f.eval(ur));
    if fl == fr {
        (ul, ur)
    } else if fl > fr {
        (ul, ul)
    } else {
        (ur, ur)
    }
}
