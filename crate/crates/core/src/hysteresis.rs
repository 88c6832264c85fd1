//! The scalar Play operator.
//!
//! For a half-width `a > 0` the feasible states form the strip
//! `{(u, w) : |u - w| <= a}`. The output `w` only moves when the pair sits on
//! one of the two edges of the strip and the input pushes outward; inside the
//! strip it is frozen.
//!
//! Jumps of the input are handled by the rate-independent extension: whatever
//! monotone path fills the jump, the output ends up at the projection of the
//! previous output onto `[u_next - a, u_next + a]`. That projection is the
//! whole operator for sampled inputs.
//!
//! The discrete weak-hysteresis test in [`verify_weak_play`] is exact for
//! piecewise-monotone sampling; for arbitrary sample sequences it only checks
//! the right-continuous representative.

use crate::error::{Error, Result};

/// Absolute tolerance for strip membership.
pub const STRIP_TOL: f64 = 1e-12;

/// Half-width of the hysteresis strip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlayConfig {
    a: f64,
}

impl PlayConfig {
    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && a.is_finite() {
            Ok(Self { a })
        } else {
            Err(Error::InvalidWidth(a))
        }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn contains(&self, u: f64, w: f64) -> bool {
        (u - w).abs() <= self.a + STRIP_TOL
    }
}

/// An input/output pair `(u, w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlayState {
    pub u: f64,
    pub w: f64,
}

impl PlayState {
    pub const fn new(u: f64, w: f64) -> Self {
        Self { u, w }
    }

    /// Builds a state after checking it lies in the strip.
    pub fn checked(u: f64, w: f64, cfg: PlayConfig) -> Result<Self> {
        if cfg.contains(u, w) {
            Ok(Self { u, w })
        } else {
            Err(Error::OutsideStrip { u, w, a: cfg.a() })
        }
    }

    pub fn mirrored(self) -> Self {
        Self { u: -self.u, w: -self.w }
    }
}

/// Output after the input moves (possibly by a jump) to `u_next`.
#[inline]
pub fn play_project(w_prev: f64, u_next: f64, cfg: PlayConfig) -> f64 {
    let a = cfg.a();
    w_prev.clamp(u_next - a, u_next + a)
}

/// Output of the Play operator along a sampled input.
///
/// If `w0` is incompatible with the first sample it is clamped into the strip
/// and a warning is logged to stderr.
pub fn play_trajectory(u_samples: &[f64], w0: f64, cfg: PlayConfig) -> Vec<f64> {
    let Some(&u_first) = u_samples.first() else {
        return Vec::new();
    };
    if !cfg.contains(u_first, w0) {
        eprintln!(
            "warning: initial output {w0} incompatible with input {u_first} (a = {}); clamped",
            cfg.a()
        );
    }
    let mut w = play_project(w0, u_first, cfg);
    let mut out = Vec::with_capacity(u_samples.len());
    out.push(w);
    for &u in &u_samples[1..] {
        w = play_project(w, u, cfg);
        out.push(w);
    }
    out
}

/// Discrete form of the weak hysteresis characterization.
///
/// Checks strip membership of every sample and
/// `sum (u_{j+1} - w_{j+1}) (w_{j+1} - w_j) >= a sum |w_{j+1} - w_j| - tol`.
pub fn verify_weak_play(u: &[f64], w: &[f64], cfg: PlayConfig, tol: f64) -> Result<bool> {
    if u.len() != w.len() {
        return Err(Error::LengthMismatch(u.len(), w.len()));
    }
    if u.len() < 2 {
        return Err(Error::Precondition(
            "weak play check needs at least two samples".into(),
        ));
    }
    let a = cfg.a();
    if u.iter().zip(w).any(|(&ui, &wi)| (wi - ui).abs() > a + tol) {
        return Ok(false);
    }
    let mut work = 0.0;
    let mut variation = 0.0;
    for j in 0..u.len() - 1 {
        let dw = w[j + 1] - w[j];
        work += (u[j + 1] - w[j + 1]) * dw;
        variation += dw.abs();
    }
    Ok(work >= a * variation - tol)
}
