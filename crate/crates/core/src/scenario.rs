//! Scenario files, presets and the artifacts of a run.
//!
//! A scenario is a small JSON document:
//!
//! ```json
//! {
//!   "name": "rr-right",
//!   "flux": "burgers",
//!   "a": 1.0,
//!   "initial": { "kind": "riemann", "ul": 1.0, "wl": 0.5, "ur": 3.0, "wr": 3.0 },
//!   "domain": [-2.0, 2.0],
//!   "dx": 0.001,
//!   "cfl_fraction": 1.0,
//!   "output_times": [0.25],
//!   "comparison": "none"
//! }
//! ```
//!
//! `initial` may also be `{"kind": "gaussian", "amplitude", "center", "width"}`
//! (with `u0 = w0`) or `{"kind": "custom", "u": "<expr>", "w": "<expr>"}` with
//! expressions in `x` (e.g. `"math::exp(-(x^2)/2)"`).
//!
//! With `"comparison": "non-hysteretic-pair"` the run also solves
//! `u_t + f(u)_x = 0` and `u_t + (f(u)/2)_x = 0` from `u0` on the same grid and
//! time steps, using a strip so wide that `w` never moves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{write_ledger, Check, LedgerRow, Monitor, MonitorOptions};
use crate::error::{Error, Result};
use crate::flux::ConvexFlux;
use crate::hysteresis::PlayState;
use crate::riemann::{sample, solve, RiemannProblem, WaveFan};
use crate::scheme::{cfl_dt, project_initial, run_fixed, FieldState, Grid1D, Observer, SchemeConfig};

/// Names of the built-in scenarios.
pub const PRESETS: [&str; 7] = ["rr-right", "rr-left", "rr-centered", "ss-right", "ss-left", "fast-shock", "gaussian"];

/// Riemann presets.
pub const RIEMANN_PRESETS: [&str; 6] = ["rr-right", "rr-left", "rr-centered", "ss-right", "ss-left", "fast-shock"];

fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "rr-right" => include_str!("../presets/rr-right.json"),
        "rr-left" => include_str!("../presets/rr-left.json"),
        "rr-centered" => include_str!("../presets/rr-centered.json"),
        "ss-right" => include_str!("../presets/ss-right.json"),
        "ss-left" => include_str!("../presets/ss-left.json"),
        "fast-shock" => include_str!("../presets/fast-shock.json"),
        "gaussian" => include_str!("../presets/gaussian.json"),
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Riemann { ul: f64, wl: f64, ur: f64, wr: f64 },
    /// `u0 = w0 = amplitude * exp(-(x - center)^2 / (2 width^2))`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    Custom { u: String, w: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    #[default]
    None,
    NonHystereticPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub flux: String,
    pub a: f64,
    pub initial: InitialData,
    pub domain: [f64; 2],
    pub dx: f64,
    #[serde(default = "default_cfl")]
    pub cfl_fraction: f64,
    pub output_times: Vec<f64>,
    #[serde(default)]
    pub comparison: Comparison,
}

fn default_cfl() -> f64 {
    1.0
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn preset(name: &str) -> Result<Self> {
        let src = preset_source(name).ok_or_else(|| {
            Error::Scenario(format!("unknown preset '{name}' (known: {})", PRESETS.join(", ")))
        })?;
        Self::from_json(src)
    }

    /// A file path, or a preset name when no such file exists.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            Self::from_json(&fs::read_to_string(path)?)
        } else {
            Self::preset(spec)
        }
    }

    pub fn with_dx(&self, dx: f64) -> Self {
        Self { dx, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(format!("{}: {m}", self.name)));
        ConvexFlux::by_id(&self.flux)?;
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad(format!("a must be positive, got {}", self.a));
        }
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 1.0) {
            return bad(format!("cfl_fraction must lie in (0, 1], got {}", self.cfl_fraction));
        }
        if self.output_times.is_empty() {
            return bad("no output times".into());
        }
        if self.output_times.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.output_times.windows(2).any(|p| p[1] <= p[0])
        {
            return bad("output times must be positive and increasing".into());
        }
        self.grid()?;
        match &self.initial {
            InitialData::Riemann { .. } => {
                self.riemann_problem()?;
            }
            InitialData::Gaussian { width, amplitude, .. } => {
                if !(*width > 0.0) || !amplitude.is_finite() {
                    return bad("gaussian needs a positive width and finite amplitude".into());
                }
            }
            InitialData::Custom { u, w } => {
                Expr::parse(u)?;
                Expr::parse(w)?;
            }
        }
        Ok(())
    }

    pub fn flux(&self) -> Result<ConvexFlux> {
        ConvexFlux::by_id(&self.flux)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::covering(self.domain[0], self.domain[1], self.dx)
    }

    pub fn horizon(&self) -> f64 {
        *self.output_times.last().expect("validated")
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        SchemeConfig::new(self.flux()?, self.a, self.cfl_fraction)
    }

    pub fn riemann_problem(&self) -> Result<RiemannProblem> {
        match self.initial {
            InitialData::Riemann { ul, wl, ur, wr } => {
                RiemannProblem::new(PlayState::new(ul, wl), PlayState::new(ur, wr), self.a, self.flux()?)
            }
            _ => Err(Error::Scenario(format!("{} has no Riemann data", self.name))),
        }
    }

    pub fn is_riemann(&self) -> bool {
        matches!(self.initial, InitialData::Riemann { .. })
    }

    /// Cell averages of the initial data.
    pub fn initial_state(&self, grid: &Grid1D) -> Result<FieldState> {
        let cfg = self.scheme_config()?;
        let state = match &self.initial {
            InitialData::Riemann { ul, wl, ur, wr } => {
                let (ul, wl, ur, wr) = (*ul, *wl, *ur, *wr);
                project_initial(&|x| if x < 0.0 { ul } else { ur }, &|x| if x < 0.0 { wl } else { wr }, grid, cfg.play)?
            }
            InitialData::Gaussian { amplitude, center, width } => {
                let g = |x: f64| amplitude * (-(x - center) * (x - center) / (2.0 * width * width)).exp();
                project_initial(&g, &g, grid, cfg.play)?
            }
            InitialData::Custom { u, w } => {
                let (eu, ew) = (Expr::parse(u)?, Expr::parse(w)?);
                project_initial(&|x| eu.eval(x), &|x| ew.eval(x), grid, cfg.play)?
            }
        };
        if state.u.iter().chain(&state.w).any(|v| !v.is_finite()) {
            return Err(Error::Scenario(format!("{}: initial data is not finite", self.name)));
        }
        Ok(state)
    }
}

/// A parsed expression in `x`.
struct Expr(Node<DefaultNumericTypes>);

impl Expr {
    fn parse(src: &str) -> Result<Self> {
        let node = build_operator_tree::<DefaultNumericTypes>(src)
            .map_err(|e| Error::Scenario(format!("expression '{src}': {e}")))?;
        let e = Self(node);
        e.try_eval(0.0)?;
        Ok(e)
    }

    fn try_eval(&self, x: f64) -> Result<f64> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x)).map_err(|e| Error::Scenario(e.to_string()))?;
        self.0.eval_number_with_context(&ctx).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// NaN on evaluation errors; callers reject non-finite data.
    fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

/// Solutions of the two equations without hysteresis at one output time.
#[derive(Clone, Debug)]
pub struct ComparisonSnapshot {
    /// `u_t + f(u)_x = 0`.
    pub plain: Vec<f64>,
    /// `u_t + (f(u)/2)_x = 0`.
    pub half: Vec<f64>,
}

/// Everything computed by a scenario run, before it is written out.
#[derive(Debug)]
pub struct Simulation {
    pub scenario: Scenario,
    pub grid: Grid1D,
    pub dt: f64,
    pub initial: FieldState,
    /// One layer per output time.
    pub snapshots: Vec<FieldState>,
    pub ledger: Vec<LedgerRow>,
    pub checks: Vec<Check>,
    /// Largest observed `dx sum |u^{n+1} - u^n| / (2 L TV(u0) dt)`, and the same for `w`.
    pub time_ratio: (f64, f64),
    pub comparison: Vec<ComparisonSnapshot>,
    pub elapsed: Duration,
}

impl Simulation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn steps(&self) -> usize {
        self.snapshots.last().map_or(0, |s| s.step)
    }

    /// `dx * sum |u - u_exact(x_i)|` and the same for `w`, per output time.
    pub fn exact_errors(&self) -> Result<Vec<(f64, f64)>> {
        let fan = solve(&self.scenario.riemann_problem()?);
        Ok(self.snapshots.iter().map(|s| exact_l1_error(&fan, &self.grid, s)).collect())
    }
}

/// Runs a scenario with the given diagnostics; no files are written.
pub fn simulate(s: &Scenario, opts: MonitorOptions) -> Result<Simulation> {
    s.validate()?;
    let started = Instant::now();
    let grid = s.grid()?;
    let cfg = s.scheme_config()?;
    let initial = s.initial_state(&grid)?;
    let dt = cfl_dt(&cfg, &grid, &initial)?;
    let mut monitor = Monitor::new(&initial, &grid, &cfg.flux, s.a, opts)?;
    let mut snapshots = Vec::with_capacity(s.output_times.len());
    let mut state = initial.clone();
    for &t in &s.output_times {
        state = run_fixed(&state, &cfg, &grid, t, dt, &mut [&mut monitor as &mut dyn Observer])?;
        snapshots.push(state.clone());
    }
    let time_ratio = (monitor.compactness.max_ratio_u, monitor.compactness.max_ratio_w);
    let (ledger, monitor) = monitor.finish()?;
    let checks = monitor.checks().into_iter().cloned().collect();
    let comparison = match s.comparison {
        Comparison::None => Vec::new(),
        Comparison::NonHystereticPair => compare_runs(s, &grid, &initial, dt)?,
    };
    Ok(Simulation {
        scenario: s.clone(),
        grid,
        dt,
        initial,
        snapshots,
        ledger,
        checks,
        time_ratio,
        comparison,
        elapsed: started.elapsed(),
    })
}

/// Half-width that keeps `w` frozen for data starting at `u0 = w0`.
pub fn frozen_width(initial: &FieldState) -> f64 {
    let (lo, hi) = initial.range_u();
    1e3 * (hi - lo).max(1.0)
}

fn compare_runs(s: &Scenario, grid: &Grid1D, initial: &FieldState, dt: f64) -> Result<Vec<ComparisonSnapshot>> {
    let f = s.flux()?;
    let a = frozen_width(initial);
    let start = FieldState { u: initial.u.clone(), w: initial.u.clone(), t: 0.0, step: 0 };
    let mut layers: Vec<Vec<Vec<f64>>> = Vec::new();
    for flux in [f.clone(), f.scaled(0.5)] {
        let cfg = SchemeConfig::new(flux, a, s.cfl_fraction)?;
        let mut state = start.clone();
        let mut out = Vec::new();
        for &t in &s.output_times {
            state = run_fixed(&state, &cfg, grid, t, dt, &mut [])?;
            out.push(state.u.clone());
        }
        layers.push(out);
    }
    let half = layers.pop().expect("two runs");
    let plain = layers.pop().expect("two runs");
    Ok(plain.into_iter().zip(half).map(|(plain, half)| ComparisonSnapshot { plain, half }).collect())
}

/// `dx * sum |u_i - u(x_i, t)|` and the same for `w`, against a Riemann fan
/// sampled at cell centers.
pub fn exact_l1_error(fan: &WaveFan, grid: &Grid1D, state: &FieldState) -> (f64, f64) {
    let (mut eu, mut ew) = (0.0, 0.0);
    for i in 0..grid.n {
        let ex = sample(fan, grid.center(i) / state.t);
        eu += (state.u[i] - ex.u).abs();
        ew += (state.w[i] - ex.w).abs();
    }
    (grid.dx * eu, grid.dx * ew)
}

/// Interface position of the largest jump of `u`.
pub fn shock_location(grid: &Grid1D, u: &[f64]) -> f64 {
    let mut best = (0.0, 1);
    for i in 1..u.len() {
        let jump = (u[i] - u[i - 1]).abs();
        if jump > best.0 {
            best = (jump, i);
        }
    }
    grid.interface(best.1)
}

/// Files written by [`run_scenario`].
#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub ledger: PathBuf,
    pub meta: PathBuf,
    pub simulation: Simulation,
}

fn fmt_time(t: f64) -> String {
    format!("{t:.6}")
}

/// Runs `s` with every diagnostic enabled and writes its artifacts to `dir`:
/// `scenario.json`, `snapshot_t<time>.csv` (`x,u,w`), `ledger.csv`,
/// `meta.txt` (`key=value`), `plot.gp`, and for Riemann data
/// `exact_t<time>.csv`, for comparison runs `compare_t<time>.csv`.
pub fn run_scenario(s: &Scenario, dir: &Path, opts: MonitorOptions) -> Result<RunArtifacts> {
    let sim = simulate(s, opts)?;
    write_artifacts(sim, dir)
}

pub fn write_artifacts(sim: Simulation, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let s = &sim.scenario;
    fs::write(dir.join("scenario.json"), s.to_json() + "\n")?;

    let mut snapshots = Vec::new();
    for snap in &sim.snapshots {
        let path = dir.join(format!("snapshot_t{}.csv", fmt_time(snap.t)));
        write_columns(&path, ["x", "u", "w"], &sim.grid, &[&snap.u, &snap.w])?;
        snapshots.push(path);
    }
    if s.is_riemann() {
        let fan = solve(&s.riemann_problem()?);
        for snap in &sim.snapshots {
            let states: Vec<PlayState> = (0..sim.grid.n).map(|i| sample(&fan, sim.grid.center(i) / snap.t)).collect();
            let u: Vec<f64> = states.iter().map(|p| p.u).collect();
            let w: Vec<f64> = states.iter().map(|p| p.w).collect();
            write_columns(&dir.join(format!("exact_t{}.csv", fmt_time(snap.t))), ["x", "u", "w"], &sim.grid, &[&u, &w])?;
        }
    }
    for (snap, cmp) in sim.snapshots.iter().zip(&sim.comparison) {
        let path = dir.join(format!("compare_t{}.csv", fmt_time(snap.t)));
        write_columns(&path, ["x", "u", "u_plain", "u_half"], &sim.grid, &[&snap.u, &cmp.plain, &cmp.half])?;
    }

    let ledger = dir.join("ledger.csv");
    write_ledger(&sim.ledger, fs::File::create(&ledger)?)?;

    let meta = dir.join("meta.txt");
    fs::write(&meta, meta_text(&sim)?)?;
    fs::write(dir.join("plot.gp"), gnuplot_script(&sim))?;
    Ok(RunArtifacts { dir: dir.to_path_buf(), snapshots, ledger, meta, simulation: sim })
}

fn write_columns<const K: usize>(path: &Path, header: [&str; K], grid: &Grid1D, cols: &[&Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for i in 0..grid.n {
        let mut rec = vec![format!("{:.17e}", grid.center(i))];
        rec.extend(cols.iter().map(|c| format!("{:.17e}", c[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn meta_text(sim: &Simulation) -> Result<String> {
    let s = &sim.scenario;
    let mut m = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(m, "{k}={v}");
    };
    kv("name", s.name.clone());
    kv("flux", s.flux.clone());
    kv("a", s.a.to_string());
    kv("domain", format!("{},{}", s.domain[0], s.domain[1]));
    kv("dx", s.dx.to_string());
    kv("cells", sim.grid.n.to_string());
    kv("cfl_fraction", s.cfl_fraction.to_string());
    kv("dt", format!("{:.17e}", sim.dt));
    kv("steps", sim.steps().to_string());
    kv(
        "output_times",
        s.output_times.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
    );
    kv("comparison", format!("{:?}", s.comparison));
    if s.is_riemann() {
        for (snap, (eu, ew)) in sim.snapshots.iter().zip(sim.exact_errors()?) {
            kv(&format!("l1_error_t{}", fmt_time(snap.t)), format!("{eu:.6e},{ew:.6e}"));
        }
    }
    kv("time_ratio_u", format!("{:.6}", sim.time_ratio.0));
    kv("time_ratio_w", format!("{:.6}", sim.time_ratio.1));
    for c in &sim.checks {
        let key = c.name.replace(|ch: char| !ch.is_ascii_alphanumeric(), "_");
        kv(
            &format!("check.{key}"),
            format!("{} worst_slack={:.6e} failures={}", if c.passed() { "ok" } else { "FAILED" }, c.worst_slack, c.failures),
        );
    }
    kv("passed", sim.passed().to_string());
    Ok(m)
}

fn gnuplot_script(sim: &Simulation) -> String {
    let mut g = String::new();
    let _ = writeln!(g, "# gnuplot -p plot.gp");
    let _ = writeln!(g, "set datafile separator ','");
    let _ = writeln!(g, "set key autotitle columnhead");
    let _ = writeln!(g, "set xlabel 'x'");
    for snap in &sim.snapshots {
        let t = fmt_time(snap.t);
        let mut series = vec![
            format!("'snapshot_t{t}.csv' using 1:2 with lines title 'u'"),
            format!("'snapshot_t{t}.csv' using 1:3 with lines title 'w'"),
        ];
        if sim.scenario.is_riemann() {
            series.push(format!("'exact_t{t}.csv' using 1:2 with lines dt 2 title 'u exact'"));
            series.push(format!("'exact_t{t}.csv' using 1:3 with lines dt 2 title 'w exact'"));
        }
        if !sim.comparison.is_empty() {
            series.push(format!("'compare_t{t}.csv' using 1:3 with lines dt 2 title 'u_t + f_x = 0'"));
            series.push(format!("'compare_t{t}.csv' using 1:4 with lines dt 4 title 'u_t + f_x / 2 = 0'"));
        }
        let _ = writeln!(g, "set title '{} t = {}'", sim.scenario.name, snap.t);
        let _ = writeln!(g, "plot {}", series.join(", \\\n     "));
        let _ = writeln!(g, "pause -1");
    }
    g
}

/// One level of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub dx: f64,
    /// L1 error of `u` plus that of `w` at the last output time.
    pub error: f64,
    /// `log2(e_prev / e)` against the previous (coarser) level.
    pub order: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub scenario: String,
    /// `"exact"` for Riemann data, otherwise `"finest"`.
    pub reference: &'static str,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log e` against `log dx`.
    pub fitted_order: f64,
    pub strictly_decreasing: bool,
}

impl std::fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "convergence of {} (reference: {})", self.scenario, self.reference)?;
        writeln!(f, "{:>12} {:>14} {:>8}", "dx", "L1 error", "order")?;
        for r in &self.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
            writeln!(f, "{:>12.4e} {:>14.6e} {:>8}", r.dx, r.error, order)?;
        }
        writeln!(f, "fitted order {:.3}", self.fitted_order)?;
        if !self.strictly_decreasing {
            writeln!(f, "warning: errors are not strictly decreasing")?;
        }
        Ok(())
    }
}

/// Errors at `levels` dyadic refinements of `s.dx`. Riemann scenarios are
/// compared with the exact fan; others with one extra, finer level averaged
/// onto each coarse grid.
pub fn convergence_study(s: &Scenario, levels: usize) -> Result<ConvergenceTable> {
    if levels < 2 {
        return Err(Error::Scenario("a convergence study needs at least two levels".into()));
    }
    let dxs: Vec<f64> = (0..levels).map(|k| s.dx / f64::powi(2.0, k as i32)).collect();
    let opts = MonitorOptions { entropy: false, per_cell: false, ..Default::default() };
    let last = |dx: f64| -> Result<(Grid1D, FieldState)> {
        let sim = simulate(&s.with_dx(dx), opts)?;
        let snap = sim.snapshots.last().cloned().expect("validated");
        Ok((sim.grid, snap))
    };
    let (reference, errors) = if s.is_riemann() {
        let fan = solve(&s.riemann_problem()?);
        let mut errors = Vec::with_capacity(levels);
        for &dx in &dxs {
            let (grid, snap) = last(dx)?;
            let (eu, ew) = exact_l1_error(&fan, &grid, &snap);
            errors.push(eu + ew);
        }
        ("exact", errors)
    } else {
        let fine_dx = dxs[levels - 1] / 2.0;
        let (fine_grid, fine) = last(fine_dx)?;
        let mut errors = Vec::with_capacity(levels);
        for &dx in &dxs {
            let (grid, snap) = last(dx)?;
            let ratio = (dx / fine_dx).round() as usize;
            if ratio * grid.n != fine_grid.n {
                return Err(Error::GridMismatch);
            }
            let avg = |v: &[f64], i: usize| v[i * ratio..(i + 1) * ratio].iter().sum::<f64>() / ratio as f64;
            let e: f64 = (0..grid.n)
                .map(|i| (snap.u[i] - avg(&fine.u, i)).abs() + (snap.w[i] - avg(&fine.w, i)).abs())
                .sum();
            errors.push(grid.dx * e);
        }
        ("finest", errors)
    };
    let rows: Vec<ConvergenceRow> = dxs
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(k, (&dx, &error))| ConvergenceRow {
            dx,
            error,
            order: (k > 0).then(|| (errors[k - 1] / error).log2()),
        })
        .collect();
    Ok(ConvergenceTable {
        scenario: s.name.clone(),
        reference,
        fitted_order: fitted_order(&dxs, &errors),
        strictly_decreasing: errors.windows(2).all(|p| p[1] < p[0]),
        rows,
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(h: &[f64], e: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(e).map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Text listing of the waves of `p` and `x,u,w` samples of the solution at time `t`.
pub fn riemann_report(p: &RiemannProblem, t: f64, samples: usize) -> Result<(String, String)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("sampling time must be positive, got {t}")));
    }
    let fan = solve(p);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "Riemann problem ({}, {}) | ({}, {}), a = {}, flux {}",
        p.left.u,
        p.left.w,
        p.right.u,
        p.right.w,
        p.cfg.a(),
        p.flux.id()
    );
    let _ = write!(text, "{fan}");
    if !text.ends_with('\n') {
        text.push('\n');
    }

    let reach = fan.min_speed().abs().max(fan.max_speed().abs()).max(0.5);
    let half = 1.5 * reach * t;
    let samples = samples.max(2);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "u", "w"])?;
    for k in 0..samples {
        let x = -half + 2.0 * half * k as f64 / (samples - 1) as f64;
        let st = sample(&fan, x / t);
        w.write_record([format!("{x:.17e}"), format!("{:.17e}", st.u), format!("{:.17e}", st.w)])?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok((text, csv))
}

/// Re-runs the scenario stored in a run directory and compares the ledger
/// bytes with the stored ones.
#[derive(Debug)]
pub struct DiagOutcome {
    pub simulation: Simulation,
    pub ledger_matches: bool,
}

impl DiagOutcome {
    pub fn passed(&self) -> bool {
        self.ledger_matches && self.simulation.passed()
    }
}

pub fn diagnose_run_dir(dir: &Path, opts: MonitorOptions) -> Result<DiagOutcome> {
    let scenario = Scenario::from_json(&fs::read_to_string(dir.join("scenario.json"))?)?;
    let stored = fs::read(dir.join("ledger.csv"))?;
    let simulation = simulate(&scenario, opts)?;
    let mut fresh = Vec::new();
    write_ledger(&simulation.ledger, &mut fresh)?;
    Ok(DiagOutcome { ledger_matches: fresh == stored, simulation })
}
