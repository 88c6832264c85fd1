//! Convex fluxes and the quantities derived from them.
//!
//! Besides the flux itself this module holds the Godunov two-point flux, the
//! hysteresis-modified fluxes, the shock speeds used by the two shock
//! families and the entropy potential `G(u) = u f(u) - \int_0^u f`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance for floating-point case dispatch.
pub const DISPATCH_TOL: f64 = 1e-12;

/// `x == y` up to `tol` relative to `max(1, |x|, |y|)`.
#[inline]
pub fn near(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * 1f64.max(x.abs()).max(y.abs())
}

/// A strictly convex flux with its derivative.
#[derive(Clone)]
pub struct ConvexFlux {
    id: String,
    f: RealFn,
    df: RealFn,
    argmin: Option<f64>,
    primitive: Option<RealFn>,
}

impl fmt::Debug for ConvexFlux {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("ConvexFlux")
            .field("id", &self.id)
            .field("argmin", &self.argmin)
            .field("primitive", &self.primitive.is_some())
            .finish()
    }
}

impl ConvexFlux {
    pub fn new(
        id: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            argmin: None,
            primitive: None,
        }
    }

    /// Global minimizer, if known in closed form.
    pub fn with_argmin(mut self, u: f64) -> Self {
        self.argmin = Some(u);
        self
    }

    /// An antiderivative of `f`, used by [`entropy_potential`].
    pub fn with_primitive(mut self, p: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.primitive = Some(Arc::new(p));
        self
    }

    pub fn burgers() -> Self {
        Self::new("burgers", |u| 0.5 * u * u, |u| u)
            .with_argmin(0.0)
            .with_primitive(|u| u * u * u / 6.0)
    }

    pub fn quartic() -> Self {
        Self::new("quartic", |u| 0.25 * u.powi(4), |u| u.powi(3))
            .with_argmin(0.0)
            .with_primitive(|u| u.powi(5) / 20.0)
    }

    /// `f(u) = u`. Not strictly convex; kept for the linear scheme.
    pub fn linear() -> Self {
        Self::new("linear", |u| u, |_| 1.0).with_primitive(|u| 0.5 * u * u)
    }

    /// Looks up a built-in flux by id.
    pub fn by_id(id: &str) -> Result<Self> {
        match id {
            "burgers" => Ok(Self::burgers()),
            "quartic" => Ok(Self::quartic()),
            "linear" => Ok(Self::linear()),
            other => Err(Error::UnknownFlux(other.to_string())),
        }
    }

    /// `c * f`, for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let (f, df) = (self.f.clone(), self.df.clone());
        let mut out = Self::new(
            format!("{}*{}", c, self.id),
            move |u| c * f(u),
            move |u| c * df(u),
        );
        out.argmin = self.argmin;
        if let Some(p) = self.primitive.clone() {
            out.primitive = Some(Arc::new(move |u| c * p(u)));
        }
        out
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        (self.df)(u)
    }

    pub fn analytic_argmin(&self) -> Option<f64> {
        self.argmin
    }

    pub fn has_primitive(&self) -> bool {
        self.primitive.is_some()
    }

    /// Samples convexity and derivative consistency on `[lo, hi]`.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        if !(lo < hi) {
            return Err(Error::BadInterval { lo, hi });
        }
        let n = 64;
        let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let scale = xs.iter().fold(1f64, |m, &x| m.max(self.eval(x).abs()));
        for k in 1..n {
            let (x, y, z) = (xs[k - 1], xs[k], xs[k + 1]);
            let chord = ((z - y) * self.eval(x) + (y - x) * self.eval(z)) / (z - x);
            if self.eval(y) > chord + 1e-10 * scale {
                return Err(Error::Precondition(format!(
                    "flux '{}' is not convex near {y}",
                    self.id
                )));
            }
        }
        let h = 1e-5;
        let dscale = xs.iter().fold(1f64, |m, &x| m.max(self.deriv(x).abs()));
        for &x in &xs {
            let fd = (self.eval(x + h) - self.eval(x - h)) / (2.0 * h);
            if (fd - self.deriv(x)).abs() > 1e-6 * dscale.max(scale) {
                return Err(Error::Precondition(format!(
                    "derivative of flux '{}' inconsistent at {x}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// `max |f'|` on `[lo, hi]`.
pub fn lipschitz_on(f: &ConvexFlux, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::BadInterval { lo, hi });
    }
    Ok(f.deriv(lo).abs().max(f.deriv(hi).abs()))
}

/// Minimizer of `f` on `[lo, hi]`.
pub fn argmin_on(f: &ConvexFlux, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::BadInterval { lo, hi });
    }
    Ok(argmin_unchecked(f, lo, hi))
}

pub(crate) fn argmin_unchecked(f: &ConvexFlux, lo: f64, hi: f64) -> f64 {
    if let Some(m) = f.argmin {
        return m.clamp(lo, hi);
    }
    if f.deriv(lo) >= 0.0 {
        return lo;
    }
    if f.deriv(hi) <= 0.0 {
        return hi;
    }
    // bisect to machine precision so that f'(u_*) is at rounding level
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f.deriv(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Godunov two-point flux.
#[inline]
pub fn godunov(f: &ConvexFlux, ul: f64, ur: f64) -> f64 {
    if ul <= ur {
        f.eval(argmin_unchecked(f, ul, ur))
    } else {
        f.eval(ul).max(f.eval(ur))
    }
}

/// The hysteresis-modified fluxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModifiedFlux {
    /// Lower branch only, relative to a right state `w_r`.
    Bar(f64),
    /// Upper branch only, relative to a left state `w_l`.
    Hat(f64),
    /// Both branches around `w`.
    Tilde(f64),
}

/// Value of a modified flux at `u` for strip half-width `a`.
pub fn modified_eval(f: &ConvexFlux, kind: ModifiedFlux, a: f64, u: f64) -> f64 {
    match kind {
        ModifiedFlux::Bar(w) if u < w - a => 0.5 * (f.eval(u) + f.eval(w - a)),
        ModifiedFlux::Hat(w) if u > w + a => 0.5 * (f.eval(u) + f.eval(w + a)),
        ModifiedFlux::Tilde(w) if u < w - a => 0.5 * (f.eval(u) + f.eval(w - a)),
        ModifiedFlux::Tilde(w) if u > w + a => 0.5 * (f.eval(u) + f.eval(w + a)),
        _ => f.eval(u),
    }
}

/// Speeds of the right-moving shock family (`f(u_l) > f(u_r)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RightShockSpeeds {
    pub mu_r: f64,
    pub mu_l: f64,
    pub mu: f64,
    pub i_r: f64,
    pub i_l: f64,
}

impl RightShockSpeeds {
    /// Whether the two shocks merge into one fast shock. Ties go to the
    /// two-shock branch, where both constructions agree.
    pub fn is_fast(&self) -> bool {
        self.mu_r < self.mu_l && !near(self.mu_r, self.mu_l, DISPATCH_TOL)
    }
}

/// Speeds of the left-moving shock family (`f(u_l) < f(u_r)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeftShockSpeeds {
    pub nu_l: f64,
    pub nu_r: f64,
    pub nu: f64,
    pub j_l: f64,
    pub j_r: f64,
}

impl LeftShockSpeeds {
    pub fn is_fast(&self) -> bool {
        self.nu_l > self.nu_r && !near(self.nu_l, self.nu_r, DISPATCH_TOL)
    }
}

fn check_order(lo: f64, mid: f64, hi: f64) -> Result<()> {
    let tol = 1e-12 * 1f64.max(lo.abs()).max(hi.abs());
    if !(lo < hi) || mid < lo - tol || mid > hi + tol {
        return Err(Error::Precondition(format!(
            "shock speed branch needs {lo} <= {mid} <= {hi} with {lo} < {hi}"
        )));
    }
    Ok(())
}

/// Speeds for a right-moving shock with `u_r <= w_r + a <= u_l`.
pub fn speeds_right(f: &ConvexFlux, ul: f64, ur: f64, wr: f64, a: f64) -> Result<RightShockSpeeds> {
    check_order(ur, wr + a, ul)?;
    let p = (wr + a).clamp(ur, ul);
    let i_r = p - ur;
    let i_l = ul - p;
    let mu_r = if i_r > 0.0 {
        (f.eval(p) - f.eval(ur)) / i_r
    } else {
        f.deriv(ur)
    };
    let mu_l = if i_l > 0.0 {
        0.5 * (f.eval(ul) - f.eval(p)) / i_l
    } else {
        0.5 * f.deriv(ul)
    };
    let mu = (i_r * mu_r + 2.0 * i_l * mu_l) / (i_r + 2.0 * i_l);
    Ok(RightShockSpeeds { mu_r, mu_l, mu, i_r, i_l })
}

/// Speeds for a left-moving shock with `u_r <= w_l - a <= u_l`.
pub fn speeds_left(f: &ConvexFlux, ul: f64, ur: f64, wl: f64, a: f64) -> Result<LeftShockSpeeds> {
    check_order(ur, wl - a, ul)?;
    let q = (wl - a).clamp(ur, ul);
    let j_l = ul - q;
    let j_r = q - ur;
    let nu_l = if j_l > 0.0 {
        (f.eval(ul) - f.eval(q)) / j_l
    } else {
        f.deriv(ul)
    };
    let nu_r = if j_r > 0.0 {
        0.5 * (f.eval(q) - f.eval(ur)) / j_r
    } else {
        0.5 * f.deriv(ur)
    };
    let nu = (j_l * nu_l + 2.0 * j_r * nu_r) / (j_l + 2.0 * j_r);
    Ok(LeftShockSpeeds { nu_l, nu_r, nu, j_l, j_r })
}

/// `\int_lo^hi g` by adaptive Simpson quadrature.
pub fn adaptive_simpson(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let (flo, fhi, fmid) = (g(lo), g(hi), g(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    simpson_rec(g, lo, hi, flo, fmid, fhi, whole, rel_tol * scale, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `\int_lo^hi f`, closed form when available.
pub fn flux_integral(f: &ConvexFlux, lo: f64, hi: f64) -> f64 {
    match &f.primitive {
        Some(p) => p(hi) - p(lo),
        None => adaptive_simpson(&|x| f.eval(x), lo, hi, 1e-10),
    }
}

/// Entropy potential `G(u) = u f(u) - \int_0^u f`.
pub fn entropy_potential(f: &ConvexFlux, u: f64) -> f64 {
    u * f.eval(u) - flux_integral(f, 0.0, u)
}
