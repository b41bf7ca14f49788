//! Radial shooting for the dual equation v'' + (N-1)/r v' + h(v) = 0:
//! trichotomy classification, ground-state bisection, uniqueness scan,
//! pullback u = g(v) with residual check, energy, and decay-rate fit.

use rayon::prelude::*;
use serde::Serialize;

use crate::criterion::{eval_h, ProblemParams};
use crate::dual::DualTransform;
use crate::error::{Error, Result};
use crate::numerics::{find_root_bracketed, integrate_ode_until, Node, Trajectory};

/// Fraction of `alpha` below which a still-decreasing profile counts as
/// decayed to zero.
pub const DECAY_FLOOR_FRAC: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct Floors {
    pub decay: f64,
}

impl Floors {
    pub fn for_alpha(alpha: f64) -> Self {
        Self { decay: DECAY_FLOOR_FRAC * alpha }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    pub r_max: f64,
    pub ode_tol: f64,
}

impl ShootOptions {
    /// Defaults scaled by the linearization rate sqrt(m/a(0)): the tail
    /// e^(-rate r) is far below the decay floor at r_max = 50/rate.
    pub fn for_params(params: &ProblemParams) -> Self {
        Self { r_max: 50.0 / decay_rate_expected(params), ode_tol: 1e-12 }
    }
}

/// Linearization rate of the dual equation at v = 0, from
/// h(s) = -(m/a(0)) s + o(s).
pub fn decay_rate_expected(params: &ProblemParams) -> f64 {
    let (a0, _, _) = params.spec.eval_a_raw(0.0);
    (params.m / a0).sqrt()
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub alpha: f64,
    pub r_max: f64,
    /// Refined abscissa of the first zero of v, when one was hit.
    pub crossing: Option<f64>,
    traj: Trajectory,
}

impl RadialProfile {
    pub fn nodes(&self) -> &[Node] {
        self.traj.nodes()
    }

    pub fn end_r(&self) -> f64 {
        self.traj.end().x
    }

    pub fn end_v(&self) -> f64 {
        self.traj.end().y[0]
    }

    pub fn end_vp(&self) -> f64 {
        self.traj.end().y[1]
    }

    pub fn v_at(&self, r: f64) -> Result<f64> {
        self.traj.eval_component(r, 0)
    }

    pub fn vp_at(&self, r: f64) -> Result<f64> {
        self.traj.eval_component(r, 1)
    }

    /// Strict decrease of v over the stored nodes (Theorem-1.3-style shape).
    pub fn strictly_decreasing(&self) -> bool {
        self.nodes().windows(2).all(|w| w[1].y[0] < w[0].y[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    GroundState,
    CrossesZero { r: f64 },
    FailsToDecay,
}

#[derive(Debug, Clone)]
pub struct ShootingOutcome {
    pub alpha: f64,
    pub classification: Classification,
    pub profile: RadialProfile,
}

/// Odd extension of the nonlinearity: h(-v) = -h(v), h(0) = 0.
fn h_odd(params: &ProblemParams, dt: &DualTransform, v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    match eval_h(params, dt, v.abs()) {
        Ok(hv) => v.signum() * hv.h,
        Err(_) => f64::NAN, // out of the tabulated range; poisons the step
    }
}

/// Shoot from v(0) = alpha, v'(0) = 0. The r = 0 singularity is handled by
/// a fourth-order Taylor start; integration stops early at a zero crossing,
/// at an interior turning point (v' > 0), or once v falls below the decay
/// floor while still decreasing.
pub fn integrate_radial(
    params: &ProblemParams,
    dt: &DualTransform,
    alpha: f64,
    r_max: f64,
    tol: f64,
) -> Result<RadialProfile> {
    if !(alpha > 0.0) || !(r_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "integrate_radial needs alpha > 0 and r_max > 0, got alpha = {alpha}, r_max = {r_max}"
        )));
    }
    if alpha >= dt.s_max() {
        return Err(Error::Range(format!(
            "alpha = {alpha} is outside the tabulated dual range (s_max = {})",
            dt.s_max()
        )));
    }
    let n = params.n as f64;
    let hv = eval_h(params, dt, alpha)?;
    let c2 = -hv.h / (2.0 * n);
    let c4 = hv.h * hv.hp / (8.0 * n * (n + 2.0));
    let r1 = (1e-3 / decay_rate_expected(params)).min(0.1 * r_max);
    let v1 = alpha + c2 * r1 * r1 + c4 * r1.powi(4);
    let w1 = 2.0 * c2 * r1 + 4.0 * c4 * r1.powi(3);

    let floor = Floors::for_alpha(alpha).decay;
    let field = |r: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -(n - 1.0) / r * y[1] - h_odd(params, dt, y[0]);
    };
    let stop = |_r: f64, y: &[f64], _dy: &[f64]| {
        y[0] <= 0.0 || y[1] > 0.0 || (y[0] <= floor && y[1] < 0.0)
    };
    let traj = integrate_ode_until(field, &[v1, w1], (r1, r_max), tol, stop)?;

    let crossing = if traj.end().y[0] <= 0.0 {
        let nodes = traj.nodes();
        let prev = &nodes[nodes.len() - 2];
        if traj.end().y[0] == 0.0 {
            Some(traj.end().x)
        } else {
            Some(find_root_bracketed(
                |r| traj.eval_component(r, 0).unwrap_or(f64::NAN),
                prev.x,
                traj.end().x,
                1e-12 * (1.0 + traj.end().x),
            )?)
        }
    } else {
        None
    };
    Ok(RadialProfile { alpha, r_max, crossing, traj })
}

pub fn classify_shot(profile: RadialProfile, floors: &Floors) -> ShootingOutcome {
    let classification = if let Some(r) = profile.crossing {
        Classification::CrossesZero { r }
    } else if profile.end_vp() > 0.0 || profile.end_v() > floors.decay {
        Classification::FailsToDecay
    } else {
        Classification::GroundState
    };
    ShootingOutcome { alpha: profile.alpha, classification, profile }
}

fn shoot(
    params: &ProblemParams,
    dt: &DualTransform,
    alpha: f64,
    opts: &ShootOptions,
) -> Result<ShootingOutcome> {
    let profile = integrate_radial(params, dt, alpha, opts.r_max, opts.ode_tol)?;
    Ok(classify_shot(profile, &Floors::for_alpha(alpha)))
}

const BISECT_MAX: usize = 200;

/// Bisect a (FailsToDecay, CrossesZero) bracket down to the ground state.
/// The bracket keeps shrinking past `tol` until a shot actually decays below
/// the floor: near alpha* the profile hugs zero long enough to classify.
pub fn find_ground_state(
    params: &ProblemParams,
    dt: &DualTransform,
    bracket: (f64, f64),
    tol: f64,
    opts: &ShootOptions,
) -> Result<(f64, RadialProfile)> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("invalid alpha bracket ({lo}, {hi})")));
    }
    let lo_class = shoot(params, dt, lo, opts)?.classification;
    if lo_class != Classification::FailsToDecay {
        return Err(Error::InvalidInput(format!(
            "bracket low end alpha = {lo} must fail to decay, got {lo_class:?}"
        )));
    }
    match shoot(params, dt, hi, opts)?.classification {
        Classification::CrossesZero { .. } => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "bracket high end alpha = {hi} must cross zero, got {other:?}"
            )));
        }
    }
    let rate = decay_rate_expected(params);
    let n = params.n as f64;
    for _ in 0..BISECT_MAX {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket at machine resolution
        }
        let outcome = shoot(params, dt, mid, opts)?;
        match outcome.classification {
            Classification::GroundState if hi - lo <= tol => {
                return Ok((mid, outcome.profile));
            }
            // every alpha whose dip reaches the floor classifies as a ground
            // state; split that plateau by the tail's log-slope, which is
            // already steeper than the linearized decay on the overshoot side
            Classification::GroundState => {
                let p = &outcome.profile;
                let slope = -p.end_vp() / p.end_v();
                if slope > rate + (n - 1.0) / (2.0 * p.end_r()) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Classification::FailsToDecay => lo = mid,
            Classification::CrossesZero { .. } => hi = mid,
        }
    }
    // the bracket collapsed before any shot decayed below the floor
    Err(Error::IntegrationFailure {
        reached: 0.5 * (lo + hi),
        reason: "alpha bisection exhausted without a decayed profile; \
                 try a larger r_max or tighter ode tolerance"
            .into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    /// (alpha, classification) for every grid point, in grid order.
    pub outcomes: Vec<(f64, Classification)>,
    /// Maximal FailsToDecay -> CrossesZero transitions.
    pub brackets: Vec<(f64, f64)>,
    /// Grid alphas that decayed outright.
    pub ground_alphas: Vec<f64>,
    pub count: usize,
}

/// Classify every alpha on the grid and count ground-state brackets;
/// the uniqueness theorems predict exactly one for admissible data.
pub fn uniqueness_scan(
    params: &ProblemParams,
    dt: &DualTransform,
    alpha_grid: &[f64],
    opts: &ShootOptions,
) -> Result<ScanReport> {
    if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("alpha grid must be increasing".into()));
    }
    let outcomes: Vec<(f64, Classification)> = alpha_grid
        .par_iter()
        .map(|&a| shoot(params, dt, a, opts).map(|o| (a, o.classification)))
        .collect::<Result<_>>()?;
    let mut brackets = Vec::new();
    let mut ground_alphas = Vec::new();
    let mut last_fail: Option<f64> = None;
    for &(a, class) in &outcomes {
        match class {
            Classification::FailsToDecay => last_fail = Some(a),
            Classification::CrossesZero { .. } => {
                if let Some(lo) = last_fail.take() {
                    brackets.push((lo, a));
                }
            }
            Classification::GroundState => ground_alphas.push(a),
        }
    }
    let count = brackets.len() + ground_alphas.len();
    Ok(ScanReport { outcomes, brackets, ground_alphas, count })
}

/// One row of the pullback table (the `shoot` CSV schema).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PullbackRow {
    pub r: f64,
    pub v: f64,
    pub vp: f64,
    pub u: f64,
    pub up: f64,
}

/// Pull the dual profile back to u = g(v) and measure the scaled sup-norm
/// residual of the quasi-linear equation over interior nodes. The second
/// radial derivative comes from the chain rule with v'' read off the ODE.
pub fn pullback_and_residual(
    params: &ProblemParams,
    dt: &DualTransform,
    profile: &RadialProfile,
) -> Result<(Vec<PullbackRow>, f64)> {
    let nodes = profile.nodes();
    if nodes.iter().any(|nd| nd.y[0] <= 0.0) {
        return Err(Error::Domain("pullback requires a positive profile".into()));
    }
    let (n, p, m) = (params.n as f64, params.p, params.m);
    let mut rows = Vec::with_capacity(nodes.len());
    let mut sup = 0.0_f64;
    for (i, nd) in nodes.iter().enumerate() {
        let (r, v, w, vpp) = (nd.x, nd.y[0], nd.y[1], nd.dy[1]);
        let (g, gp, gpp, _) = dt.eval_g(v)?;
        let (u, up) = (g, gp * w);
        rows.push(PullbackRow { r, v, vp: w, u, up });
        if i == 0 || i == nodes.len() - 1 {
            continue;
        }
        let upp = gpp * w * w + gp * vpp;
        let (a, ap, _) = params.spec.eval_a(u)?;
        let res = -a * upp - (n - 1.0) / r * a * up - 0.5 * ap * up * up + m * u - u.powf(p);
        sup = sup.max(res.abs() / (1.0 + u.powf(p)));
    }
    Ok((rows, sup))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyReport {
    /// I(v) = omega_N Int (1/2 v'^2 - H(v)) r^(N-1) dr.
    pub dual: f64,
    /// Quasi-linear energy of the pullback u = g(v); equals `dual`
    /// pointwise via a(u)|Du|^2 = |Dv|^2.
    pub quasilinear: f64,
    /// False when the profile did not reach the decay floor; the values are
    /// then truncations, not ground-state levels.
    pub decayed: bool,
}

/// Surface area of the unit sphere in R^n.
pub fn unit_sphere_area(n: u32) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half(n)
}

/// Gamma(n/2) for integer n >= 1, exact over factorials.
fn gamma_half(n: u32) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|i| i as f64).product()
    } else {
        let mut acc = std::f64::consts::PI.sqrt();
        let mut odd = 1.0;
        for _ in 0..(n - 1) / 2 {
            acc *= odd / 2.0;
            odd += 2.0;
        }
        acc
    }
}

/// Trapezoid quadrature of both energy forms over the stored nodes.
pub fn energy(
    params: &ProblemParams,
    dt: &DualTransform,
    profile: &RadialProfile,
) -> Result<EnergyReport> {
    let n = params.n as f64;
    let (p, m) = (params.p, params.m);
    let nodes = profile.nodes();
    let mut f_dual = Vec::with_capacity(nodes.len());
    let mut f_quasi = Vec::with_capacity(nodes.len());
    for nd in nodes {
        let (r, v, w) = (nd.x, nd.y[0], nd.y[1]);
        let weight = r.powf(n - 1.0);
        let cap_h = if v == 0.0 {
            0.0
        } else {
            eval_h(params, dt, v.abs())?.cap_h
        };
        f_dual.push((0.5 * w * w - cap_h) * weight);
        let (g, gp, _, _) = dt.eval_g(v.abs())?;
        let (a, _, _) = params.spec.eval_a_raw(g);
        let up = gp * w;
        f_quasi.push(
            (0.5 * a * up * up + 0.5 * m * g * g - g.powf(p + 1.0) / (p + 1.0)) * weight,
        );
    }
    let trapz = |f: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 1..f.len() {
            acc += 0.5 * (f[i] + f[i - 1]) * (nodes[i].x - nodes[i - 1].x);
        }
        acc
    };
    // [0, r1] head: v' ~ 0 there, integrand ~ -H(alpha) r^(N-1)
    let head = -eval_h(params, dt, profile.alpha)?.cap_h * nodes[0].x.powf(n) / n;
    let omega = unit_sphere_area(params.n);
    let decayed =
        profile.crossing.is_none() && profile.end_v() <= Floors::for_alpha(profile.alpha).decay;
    Ok(EnergyReport {
        dual: omega * (head + trapz(&f_dual)),
        quasilinear: omega * (head + trapz(&f_quasi)),
        decayed,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayCheck {
    Estimate { rate: f64, expected: f64, points: usize },
    Inconclusive { reason: String },
}

/// Window on the exponential tail used by the decay fit, as fractions of
/// alpha.
const FIT_LO: f64 = 1e-6;
const FIT_HI: f64 = 1e-2;
const FIT_MIN_POINTS: usize = 8;

/// Fit the exponential decay rate on the tail window
/// `FIT_LO*alpha <= v <= FIT_HI*alpha`. The fitted ordinate is
/// `log v + (N-1)/2 log r`: the linearized equation decays like
/// r^(-(N-1)/2) e^(-rate r), and ignoring the algebraic factor biases the
/// slope by several percent at practical r_max.
pub fn decay_check(profile: &RadialProfile, params: &ProblemParams) -> DecayCheck {
    let (lo, hi) = (FIT_LO * profile.alpha, FIT_HI * profile.alpha);
    let pts: Vec<(f64, f64)> = profile
        .nodes()
        .iter()
        .filter(|nd| nd.y[1] < 0.0 && nd.y[0] >= lo && nd.y[0] <= hi)
        .map(|nd| (nd.x, nd.y[0]))
        .collect();
    if pts.len() < FIT_MIN_POINTS {
        return DecayCheck::Inconclusive {
            reason: format!(
                "only {} tail nodes in the fit window [{lo:.3e}, {hi:.3e}]",
                pts.len()
            ),
        };
    }
    let nm1 = (params.n as f64 - 1.0) / 2.0;
    let xs: Vec<f64> = pts.iter().map(|&(r, _)| r).collect();
    let ys: Vec<f64> = pts.iter().map(|&(r, v)| v.ln() + nm1 * r.ln()).collect();
    let nn = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / nn;
    let ym = ys.iter().sum::<f64>() / nn;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    DecayCheck::Estimate {
        rate: -sxy / sxx,
        expected: decay_rate_expected(params),
        points: pts.len(),
    }
}
