//! The diffusion coefficient `a(s) = a1 * |s|^k + psi(s)` together with a
//! desk-scale audit of the structural hypotheses the uniqueness theorems put
//! on `psi`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::fd_derivative;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The perturbation `psi` in `a(s) = a1 |s|^k + psi(s)`.
#[derive(Clone)]
pub enum PsiSpec {
    /// `psi(s) = c`, `c > 0`.
    Constant(f64),
    /// `psi(s) = c + d * (1 + s^2)^(-beta/2)`; decreasing bump on top of a
    /// positive floor `c`.
    SmoothBump { c: f64, d: f64, beta: f64 },
    /// User-supplied `psi, psi', psi''`. The hypothesis checker still
    /// finite-difference-validates the derivatives and flags disagreement.
    External {
        psi: ScalarFn,
        dpsi: ScalarFn,
        ddpsi: ScalarFn,
    },
}

impl fmt::Debug for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Constant(c) => write!(f, "Constant({c})"),
            PsiSpec::SmoothBump { c, d, beta } => {
                write!(f, "SmoothBump {{ c: {c}, d: {d}, beta: {beta} }}")
            }
            PsiSpec::External { .. } => write!(f, "External {{ .. }}"),
        }
    }
}

impl PsiSpec {
    /// `(psi, psi', psi'')` at `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match self {
            PsiSpec::Constant(c) => (*c, 0.0, 0.0),
            PsiSpec::SmoothBump { c, d, beta } => {
                let u = 1.0 + s * s;
                let w = u.powf(-beta / 2.0);
                let psi = c + d * w;
                let dpsi = -d * beta * s * w / u;
                let ddpsi = -d * beta * w / u + d * beta * (beta + 2.0) * s * s * w / (u * u);
                (psi, dpsi, ddpsi)
            }
            PsiSpec::External { psi, dpsi, ddpsi } => (psi(s), dpsi(s), ddpsi(s)),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PsiSpec::Constant(c) if !(*c > 0.0) => Err(Error::InvalidInput(format!(
                "Constant psi requires c > 0, got {c}"
            ))),
            PsiSpec::SmoothBump { c, d, beta }
                if !(*c > 0.0 && *d >= 0.0 && *beta > 0.0) =>
            {
                Err(Error::InvalidInput(format!(
                    "SmoothBump requires c > 0, d >= 0, beta > 0, got c={c}, d={d}, beta={beta}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// `a(s) = a1 * |s|^k + psi(s)` with `k > 0`, `a1 > 0`.
#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    k: f64,
    a1: f64,
    psi: PsiSpec,
    nu: f64,
}

impl CoefficientSpec {
    pub fn new(k: f64, a1: f64, psi: PsiSpec) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidInput(format!("k must be positive, got {k}")));
        }
        if !(a1 > 0.0) || !a1.is_finite() {
            return Err(Error::InvalidInput(format!("a1 must be positive, got {a1}")));
        }
        psi.validate()?;
        let nu = match &psi {
            // both built-ins have infimum c on [0, inf)
            PsiSpec::Constant(c) => *c,
            PsiSpec::SmoothBump { c, .. } => *c,
            PsiSpec::External { psi, .. } => {
                let mut inf = psi(0.0);
                for i in 0..2048 {
                    let s = 10f64.powf(-6.0 + 14.0 * i as f64 / 2047.0);
                    inf = inf.min(psi(s));
                }
                inf
            }
        };
        if !(nu > 0.0) {
            return Err(Error::InvalidInput(format!(
                "coercivity failed: inf psi = {nu} is not positive"
            )));
        }
        Ok(Self { k, a1, psi, nu })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    /// Coercivity constant `nu = inf_{s >= 0} psi(s)` (exact for built-ins,
    /// grid estimate for `External`).
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `(a, a', a'')` at `s > 0`.
    pub fn eval_a(&self, s: f64) -> Result<(f64, f64, f64)> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!(
                "eval_a requires s > 0 (a'' is singular at 0 for k < 2), got {s}"
            )));
        }
        Ok(self.eval_a_raw(s))
    }

    /// Same as [`eval_a`](Self::eval_a) but admits `s = 0`, taking one-sided
    /// limits of the power terms where they exist (singular components come
    /// out infinite).
    pub(crate) fn eval_a_raw(&self, s: f64) -> (f64, f64, f64) {
        let (k, a1) = (self.k, self.a1);
        let (psi, dpsi, ddpsi) = self.psi.eval(s);
        if s == 0.0 {
            let ap = if k > 1.0 {
                0.0
            } else if k == 1.0 {
                a1
            } else {
                f64::INFINITY
            };
            let app = if k > 2.0 {
                0.0
            } else if k == 2.0 {
                k * (k - 1.0) * a1
            } else {
                f64::INFINITY
            };
            return (psi, ap + dpsi, app + ddpsi);
        }
        let a = a1 * s.powf(k) + psi;
        let ap = k * a1 * s.powf(k - 1.0) + dpsi;
        let app = k * (k - 1.0) * a1 * s.powf(k - 2.0) + ddpsi;
        (a, ap, app)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Which hypothesis set to audit: the main theorems' conditions, or the
/// relaxed set available for `0 < k < 2` (needs the exponent `p`).
#[derive(Debug, Clone, Copy)]
pub enum HypothesisMode {
    Strict,
    Relaxed { p: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub verdict: Verdict,
    /// Witness grid point `(s, value)` attached to every `fail`.
    pub witness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    /// Grid infimum of `psi` (including `s = 0`).
    pub nu_est: f64,
    /// Grid minimum of `k psi(s) - s psi'(s)`.
    pub monotone_combo_min: f64,
    /// Tail value of `k psi - s psi'` (populated for `0 < k <= 2` and in
    /// relaxed mode).
    pub alpha_est: Option<f64>,
    /// Tail value of `psi` (populated for `0 < k <= 2`).
    pub psi_inf_est: Option<f64>,
    /// `(quantity, value at the largest grid point)` for every tail limit.
    pub tail_diagnostics: Vec<(String, f64)>,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn overall(&self) -> Verdict {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Judgement of `q(s) -> 0`: pass when |q| decreases monotonically over the
/// last decade of the grid and ends below `threshold`; fail (with witness)
/// when it grows through the decade; inconclusive otherwise.
fn judge_zero_limit(tail: &[(f64, f64)], threshold: f64) -> (Verdict, Option<(f64, f64)>) {
    let n = tail.len();
    if n < 3 {
        return (Verdict::Inconclusive, None);
    }
    let first = tail[0].1.abs();
    let last = tail[n - 1].1.abs();
    let non_increasing = tail
        .windows(2)
        .all(|w| w[1].1.abs() <= w[0].1.abs() * (1.0 + 1e-9) + 1e-300);
    let increasing = tail.windows(2).all(|w| w[1].1.abs() >= w[0].1.abs());
    if non_increasing && last <= threshold {
        (Verdict::Pass, None)
    } else if increasing && last > first * 2.0 && last > threshold {
        (Verdict::Fail, Some(tail[n - 1]))
    } else {
        (Verdict::Inconclusive, None)
    }
}

/// Judgement of `q(s) -> L` with `0 < L < inf`: pass when the tail has
/// settled (relative variation below `threshold`) at a positive value.
fn judge_finite_positive(tail: &[(f64, f64)], threshold: f64) -> (Verdict, Option<(f64, f64)>) {
    let n = tail.len();
    if n < 3 {
        return (Verdict::Inconclusive, None);
    }
    let last = tail[n - 1].1;
    let lo = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let increasing = tail.windows(2).all(|w| w[1].1 >= w[0].1);
    if last > 0.0 && (hi - lo) <= threshold * last.abs().max(1e-300) {
        (Verdict::Pass, None)
    } else if (increasing && last > tail[0].1 * 2.0) || last <= 0.0 {
        (Verdict::Fail, Some(tail[n - 1]))
    } else {
        (Verdict::Inconclusive, None)
    }
}

/// Audit the coefficient hypotheses on `grid` with the default tail
/// threshold (1e-3).
pub fn check_hypotheses(
    spec: &CoefficientSpec,
    grid: &[f64],
    mode: HypothesisMode,
) -> Result<HypothesisReport> {
    check_hypotheses_with(spec, grid, mode, 1e-3)
}

/// Limits cannot be proven on a grid: each tail condition passes only when
/// the quantity has visibly settled over the last decade of the grid and its
/// final value clears `tail_threshold`; otherwise it is reported
/// inconclusive. A `fail` always carries a witness grid point.
pub fn check_hypotheses_with(
    spec: &CoefficientSpec,
    grid: &[f64],
    mode: HypothesisMode,
    tail_threshold: f64,
) -> Result<HypothesisReport> {
    if grid.len() < 16 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "hypothesis grid must be increasing with at least 16 points".into(),
        ));
    }
    let s_top = *grid.last().unwrap();
    if s_top < 1e6 {
        return Err(Error::InvalidInput(format!(
            "hypothesis grid must reach at least 1e6, got max {s_top}"
        )));
    }
    let k = spec.k();
    if let HypothesisMode::Relaxed { .. } = mode {
        if !(k < 2.0) {
            return Err(Error::InvalidInput(format!(
                "relaxed mode applies only for 0 < k < 2, got k = {k}"
            )));
        }
    }

    let mut checks = Vec::new();
    let mut tail_diagnostics = Vec::new();

    // inf psi > 0 (include s = 0)
    let mut nu_est = spec.psi().eval(0.0).0;
    let mut nu_witness = (0.0, nu_est);
    for &s in grid {
        let v = spec.psi().eval(s).0;
        if v < nu_est {
            nu_est = v;
            nu_witness = (s, v);
        }
    }
    checks.push(HypothesisCheck {
        name: "psi-positive".into(),
        verdict: if nu_est > 0.0 { Verdict::Pass } else { Verdict::Fail },
        witness: (nu_est <= 0.0).then_some(nu_witness),
    });

    // k psi - s psi' >= 0 on the grid
    let combo = |s: f64| {
        let (psi, dpsi, _) = spec.psi().eval(s);
        k * psi - s * dpsi
    };
    let mut combo_min = f64::INFINITY;
    let mut combo_witness = (0.0, 0.0);
    for &s in grid {
        let v = combo(s);
        if v < combo_min {
            combo_min = v;
            combo_witness = (s, v);
        }
    }
    let combo_tol = -1e-12 * (1.0 + combo_min.abs());
    checks.push(HypothesisCheck {
        name: "monotone-combo".into(),
        verdict: if combo_min >= combo_tol { Verdict::Pass } else { Verdict::Fail },
        witness: (combo_min < combo_tol).then_some(combo_witness),
    });

    // last decade of the grid
    let tail: Vec<f64> = grid.iter().copied().filter(|&s| s >= s_top / 10.0).collect();
    let sample = |f: &dyn Fn(f64) -> f64| -> Vec<(f64, f64)> {
        tail.iter().map(|&s| (s, f(s))).collect()
    };
    let push_limit =
        |name: &str,
         vals: Vec<(f64, f64)>,
         judge: fn(&[(f64, f64)], f64) -> (Verdict, Option<(f64, f64)>),
         checks: &mut Vec<HypothesisCheck>,
         diags: &mut Vec<(String, f64)>| {
            let (verdict, witness) = judge(&vals, tail_threshold);
            diags.push((name.to_string(), vals.last().map_or(f64::NAN, |p| p.1)));
            checks.push(HypothesisCheck { name: name.into(), verdict, witness });
        };

    let mut alpha_est = None;
    let mut psi_inf_est = None;

    match mode {
        HypothesisMode::Strict => {
            if k > 2.0 {
                // (k-mag-2): three weighted tail limits -> 0
                push_limit(
                    "tail-psi",
                    sample(&|s| s.powf((2.0 - k) / 2.0) * spec.psi().eval(s).0),
                    judge_zero_limit,
                    &mut checks,
                    &mut tail_diagnostics,
                );
                push_limit(
                    "tail-dpsi",
                    sample(&|s| s.powf((4.0 - k) / 2.0) * spec.psi().eval(s).1),
                    judge_zero_limit,
                    &mut checks,
                    &mut tail_diagnostics,
                );
                push_limit(
                    "tail-ddpsi",
                    sample(&|s| s.powf((6.0 - k) / 2.0) * spec.psi().eval(s).2),
                    judge_zero_limit,
                    &mut checks,
                    &mut tail_diagnostics,
                );
            } else {
                // (k-min-2): psi has a finite positive limit; s psi' and
                // s^2 psi'' vanish
                let psi_tail = sample(&|s| spec.psi().eval(s).0);
                psi_inf_est = psi_tail.last().map(|p| p.1);
                push_limit(
                    "tail-psi-finite",
                    psi_tail,
                    judge_finite_positive,
                    &mut checks,
                    &mut tail_diagnostics,
                );
                push_limit(
                    "tail-s-dpsi",
                    sample(&|s| s * spec.psi().eval(s).1),
                    judge_zero_limit,
                    &mut checks,
                    &mut tail_diagnostics,
                );
                push_limit(
                    "tail-s2-ddpsi",
                    sample(&|s| s * s * spec.psi().eval(s).2),
                    judge_zero_limit,
                    &mut checks,
                    &mut tail_diagnostics,
                );
                alpha_est = Some(combo(s_top));
            }
        }
        HypothesisMode::Relaxed { p } => {
            // relaxed set for 0 < k < 2; "monotone-combo" above is the first
            let combo_tail = sample(&combo);
            alpha_est = combo_tail.last().map(|v| v.1);
            push_limit(
                "liminf-combo-positive",
                combo_tail,
                judge_finite_positive,
                &mut checks,
                &mut tail_diagnostics,
            );
            push_limit(
                "combo-over-sk",
                sample(&|s| combo(s) / s.powf(k)),
                judge_zero_limit,
                &mut checks,
                &mut tail_diagnostics,
            );
            // lim ((k-1) s psi' - s^2 psi'') / (k psi - s psi') < 2k(p+1-k)/(2-k)
            let ratio = |s: f64| {
                let (_, dpsi, ddpsi) = spec.psi().eval(s);
                ((k - 1.0) * s * dpsi - s * s * ddpsi) / combo(s)
            };
            let bound = 2.0 * k * (p + 1.0 - k) / (2.0 - k);
            let vals = sample(&ratio);
            let last = vals.last().map_or(f64::NAN, |v| v.1);
            let lo = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let settled = (hi - lo) <= 1e-2 * (1.0 + last.abs());
            tail_diagnostics.push(("remark-ratio".into(), last));
            tail_diagnostics.push(("remark-ratio-bound".into(), bound));
            checks.push(HypothesisCheck {
                name: "remark-ratio".into(),
                verdict: if settled && last < bound {
                    Verdict::Pass
                } else if settled {
                    Verdict::Fail
                } else {
                    Verdict::Inconclusive
                },
                witness: (settled && last >= bound).then_some((s_top, last)),
            });
        }
    }

    // FD-validate psi' and psi'' (External specs can silently disagree, and
    // the criterion algebra consumes the analytic derivatives everywhere)
    let mut fd_witness = None;
    for &s in grid.iter().filter(|&&s| (1e-3..=1e3).contains(&s)) {
        let (_, dpsi, ddpsi) = spec.psi().eval(s);
        let scale = s.abs().max(1.0);
        let f = |x: f64| spec.psi().eval(x).0;
        let fd1 = fd_derivative(f, s, 1, 1e-5 * scale);
        let fd2 = fd_derivative(f, s, 2, 1e-4 * scale);
        if (fd1 - dpsi).abs() > 1e-6 * (1.0 + dpsi.abs())
            || (fd2 - ddpsi).abs() > 1e-5 * (1.0 + ddpsi.abs())
        {
            fd_witness = Some((s, fd1 - dpsi));
            break;
        }
    }
    checks.push(HypothesisCheck {
        name: "psi-derivative-consistency".into(),
        verdict: if fd_witness.is_none() { Verdict::Pass } else { Verdict::Fail },
        witness: fd_witness,
    });

    Ok(HypothesisReport {
        nu_est,
        monotone_combo_min: combo_min,
        alpha_est,
        psi_inf_est,
        tail_diagnostics,
        checks,
    })
}
