//! The dual change of variables `g`: the strictly increasing solution of
//! `g' = 1 / sqrt(a(g))`, `g(0) = 0`, which converts the quasi-linear
//! problem in `u` into a semi-linear one in `v` with `u = g(v)`.
//!
//! Alongside `g` the builder also integrates the comparison function
//! `G0(s) = s - 2/(k+2) * g * sqrt(a(g))` through its derivative identity
//! `G0' = (k psi(g) - g psi'(g)) / ((k+2) a(g))`; the direct formula loses
//! all significant digits to cancellation once `s` is large.

use serde::Serialize;

use crate::coefficient::CoefficientSpec;
use crate::error::{Error, Result};
use crate::numerics::{find_root_bracketed, integrate_ode, Trajectory};

/// Tabulated dual transform over `[0, s_max]`.
#[derive(Debug, Clone)]
pub struct DualTransform {
    spec: CoefficientSpec,
    table: Trajectory,
    s_max: f64,
    c0: f64,
    c1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub name: String,
    /// Closed-form limit from `(k, a1)`; `None` encodes a divergent limit.
    pub theoretical: Option<f64>,
    pub value: f64,
    /// `|value - limit| / |limit|` for finite nonzero limits.
    pub rel_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub s_max: f64,
    pub diagnostics: Vec<Diagnostic>,
}

/// Build the dual transform table for `spec` on `[0, s_max]`.
pub fn build_dual(spec: &CoefficientSpec, s_max: f64, tol: f64) -> Result<DualTransform> {
    if !(s_max > 0.0) {
        return Err(Error::InvalidInput(format!("s_max must be positive, got {s_max}")));
    }
    let k = spec.k();
    let sp = spec.clone();
    let field = move |_s: f64, y: &[f64], dy: &mut [f64]| {
        let g = y[0].max(0.0);
        let (psi, dpsi, _) = sp.psi().eval(g);
        let a = sp.a1() * g.powf(k) + psi;
        dy[0] = 1.0 / a.sqrt();
        dy[1] = (k * psi - g * dpsi) / ((k + 2.0) * a);
    };
    let table = integrate_ode(field, &[0.0, 0.0], (0.0, s_max), tol)?;

    // node invariants: strict monotonicity and the coercivity bound
    let nu_root = spec.nu().sqrt();
    let mut prev = -1.0;
    for node in table.nodes() {
        let g = node.y[0];
        if g <= prev && node.x > 0.0 {
            return Err(Error::IntegrationFailure {
                reached: node.x,
                reason: "tabulated g is not strictly increasing".into(),
            });
        }
        if g > node.x / nu_root * (1.0 + 1e-9) {
            return Err(Error::IntegrationFailure {
                reached: node.x,
                reason: "tabulated g violates the bound g(s) <= s/sqrt(nu)".into(),
            });
        }
        prev = g;
    }

    let c0 = 1.0 / spec.psi().eval(0.0).0.sqrt();
    let c1 = ((k + 2.0) / (2.0 * spec.a1().sqrt())).powf(2.0 / (k + 2.0));
    Ok(DualTransform { spec: spec.clone(), table, s_max, c0, c1 })
}

impl DualTransform {
    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// `c0 = 1/sqrt(a(0))`, the slope of `g` at the origin.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `c1 = ((k+2) / (2 sqrt(a1)))^(2/(k+2))`, the coefficient of the
    /// `s^(2/(k+2))` growth of `g`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Largest tabulated value of `g`.
    pub fn g_end(&self) -> f64 {
        self.table.end().y[0]
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if !(0.0..=self.s_max * (1.0 + 1e-12)).contains(&s) {
            return Err(Error::Range(format!(
                "s = {s} outside tabulated range [0, {}] (extrapolation is forbidden)",
                self.s_max
            )));
        }
        Ok(())
    }

    /// Interpolated `g(s)`.
    pub fn g(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        self.table.eval_component(s.min(self.s_max), 0)
    }

    /// Tabulated comparison function `G0(s)`.
    pub fn g0_comparison(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        self.table.eval_component(s.min(self.s_max), 1)
    }

    /// `g'(s)`, recomputed exactly from the ODE identity `g' = 1/sqrt(a(g))`
    /// (never interpolated, so the downstream algebra stays self-consistent).
    pub fn g_prime(&self, s: f64) -> Result<f64> {
        let g = self.g(s)?;
        let (a, _, _) = self.spec.eval_a_raw(g.max(0.0));
        Ok(1.0 / a.sqrt())
    }

    /// `(g, g', g'', g''')` at `s`. The derivatives come from the closed
    /// forms `g'' = -1/2 a'(g) (g')^4` and
    /// `g''' = -1/2 a''(g) (g')^5 + (a'(g))^2 (g')^7`.
    ///
    /// At `s = 0` the power terms of `a'`, `a''` are taken as one-sided
    /// limits; for `k < 2` the third derivative is singular there and comes
    /// out infinite.
    pub fn eval_g(&self, s: f64) -> Result<(f64, f64, f64, f64)> {
        let g = self.g(s)?.max(0.0);
        let (a, ap, app) = self.spec.eval_a_raw(g);
        let gp = 1.0 / a.sqrt();
        let gpp = -0.5 * ap * gp.powi(4);
        let gppp = -0.5 * app * gp.powi(5) + ap * ap * gp.powi(7);
        Ok((g, gp, gpp, gppp))
    }

    /// Invert `g`: returns `s` with `g(s) = t`, for `t` in `[0, g(s_max)]`.
    pub fn g_inverse(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let g_end = self.g_end();
        if !(0.0..=g_end).contains(&t) {
            return Err(Error::Range(format!(
                "t = {t} outside tabulated g range [0, {g_end}]"
            )));
        }
        // bracket by binary search over the (monotone) node values
        let nodes = self.table.nodes();
        let i = nodes.partition_point(|n| n.y[0] < t).clamp(1, nodes.len() - 1);
        let (lo, hi) = (nodes[i - 1].x, nodes[i].x);
        let tol = 1e-13 * hi.max(1.0);
        find_root_bracketed(|s| self.g(s).unwrap_or(f64::NAN) - t, lo, hi, tol)
    }

    /// Tail diagnostics against the closed-form asymptotics of `g`.
    pub fn asymptotic_diagnostics(&self) -> Result<AsymptoticsReport> {
        if self.s_max < 1e6 {
            return Err(Error::InvalidInput(format!(
                "asymptotic diagnostics need s_max >= 1e6, got {}",
                self.s_max
            )));
        }
        let k = self.spec.k();
        let a1 = self.spec.a1();
        let s = self.s_max;
        let g = self.g(s)?;
        let gp = self.g_prime(s)?;
        let mut diagnostics = Vec::new();

        let push = |diags: &mut Vec<Diagnostic>, name: &str, theo: Option<f64>, value: f64| {
            let rel = theo.and_then(|t| (t != 0.0).then(|| ((value - t) / t).abs()));
            diags.push(Diagnostic { name: name.into(), theoretical: theo, value, rel_deviation: rel });
        };

        push(
            &mut diagnostics,
            "g/s^(2/(k+2))",
            Some(self.c1),
            g / s.powf(2.0 / (k + 2.0)),
        );
        push(
            &mut diagnostics,
            "ginv(t)/t^((k+2)/2)",
            Some(self.c1.powf(-(k + 2.0) / 2.0)),
            s / g.powf((k + 2.0) / 2.0),
        );
        let sg2_limit = if k > 2.0 {
            Some(0.0)
        } else if k == 2.0 {
            Some(1.0 / (a1 * self.c1.powf(k)))
        } else {
            None // +infinity
        };
        push(&mut diagnostics, "s*(g')^2", sg2_limit, s * gp * gp);

        Ok(AsymptoticsReport { s_max: s, diagnostics })
    }
}
