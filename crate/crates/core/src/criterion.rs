//! The Serrin–Tang certification algebra: `h` and its derivatives, the
//! numerator `K(s)` of `K_h'`, the auxiliary functions `H1`, `H2` (with
//! their psi-remainders `R1`, `R2`), the comparison function `G0`, and the
//! thresholds `s1`, `s2`, `s_bar` with the frequency estimate `m0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficient::CoefficientSpec;
use crate::dual::DualTransform;
use crate::error::{Error, Result};
use crate::numerics::log_grid;

/// Problem data `(N, p, m)` on top of a coefficient, carrying the
/// subcriticality invariant `1 < p < ((k+1)N + 2)/(N - 2)`.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub n: u32,
    pub p: f64,
    pub m: f64,
    pub spec: CoefficientSpec,
}

impl ProblemParams {
    pub fn new(n: u32, p: f64, m: f64, spec: CoefficientSpec) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("dimension N must be >= 3, got {n}")));
        }
        let k = spec.k();
        let p_max = ((k + 1.0) * n as f64 + 2.0) / (n as f64 - 2.0);
        if !(p > 1.0 && p < p_max) {
            return Err(Error::InvalidInput(format!(
                "exponent p = {p} violates the subcritical bound 1 < p < ((k+1)N+2)/(N-2) = {p_max}"
            )));
        }
        if !(m > 0.0) {
            return Err(Error::InvalidInput(format!("frequency m must be positive, got {m}")));
        }
        if k > 2.0 && !(k < 2.0 * p) {
            return Err(Error::InvalidInput(format!(
                "the k > 2 regime requires k < 2p, got k = {k}, p = {p}"
            )));
        }
        Ok(Self { n, p, m, spec })
    }
}

/// `h` and friends at one abscissa: `h = g g' (g^(p-1) - m)`, its first two
/// derivatives, and the exact antiderivative
/// `H = g^(p+1)/(p+1) - m g^2/2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HValues {
    pub h: f64,
    pub hp: f64,
    pub hpp: f64,
    pub cap_h: f64,
}

pub fn eval_h(params: &ProblemParams, dt: &DualTransform, s: f64) -> Result<HValues> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("eval_h requires s > 0, got {s}")));
    }
    let (p, m) = (params.p, params.m);
    let (g, gp, gpp, gppp) = dt.eval_g(s)?;
    let gpm1 = g.powf(p - 1.0);
    let h = g * gp * (gpm1 - m);
    let hp = (p - 1.0) * gpm1 * gp * gp + (gpm1 - m) * (gp * gp + g * gpp);
    let hpp = p * (p - 1.0) * g.powf(p - 2.0) * gp.powi(3)
        + 3.0 * (p - 1.0) * gpm1 * gp * gpp
        + (gpm1 - m) * (3.0 * gp * gpp + g * gppp);
    let cap_h = g.powf(p + 1.0) / (p + 1.0) - m * g * g / 2.0;
    Ok(HValues { h, hp, hpp, cap_h })
}

/// The unique positive zero of `h`: `s0 = g^{-1}(m^{1/(p-1)})`.
pub fn s_zero(params: &ProblemParams, dt: &DualTransform) -> Result<f64> {
    let t = params.m.powf(1.0 / (params.p - 1.0));
    if t > dt.g_end() {
        return Err(Error::Range(format!(
            "m^(1/(p-1)) = {t} exceeds tabulated g range (max {}); rebuild with larger s_max",
            dt.g_end()
        )));
    }
    dt.g_inverse(t)
}

/// Auxiliary quantities at one abscissa: `H1`, `H2`, the comparison
/// function `G0`, and the psi-remainders `R1`, `R2` showing the
/// perturbation's share of `H1`, `H2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AuxValues {
    pub h1: f64,
    pub h2: f64,
    pub g0: f64,
    pub r1: f64,
    pub r2: f64,
}

pub fn eval_aux(params: &ProblemParams, dt: &DualTransform, s: f64) -> Result<AuxValues> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("eval_aux requires s > 0, got {s}")));
    }
    let p = params.p;
    let k = params.spec.k();
    let (g, gp, _, _) = dt.eval_g(s)?;
    let (_, ap, app) = params.spec.eval_a(g)?;
    let (psi, dpsi, ddpsi) = params.spec.psi().eval(g);

    let h1 = -0.5 * app * s * g * g * gp.powi(3) + 0.75 * ap * ap * s * g * g * gp.powi(5)
        - 0.5 * ap * g * gp * gp * (p * s * gp + g)
        - p * s * gp
        + p * g;
    let h2 = -0.5 * ap * s * g * gp.powi(3) + g - p * s * gp;
    let g0 = dt.g0_comparison(s)?;
    let r1 = -0.5 * s * g * g * gp.powi(3) * ddpsi
        + 0.75 * s * g * g * gp.powi(5) * dpsi * dpsi
        + 1.5 * k * s * g * gp.powi(3) * dpsi
        - 1.5 * k * s * g * gp.powi(5) * psi * dpsi
        - 0.5 * g * gp * gp * (p * s * gp + g) * dpsi;
    let r2 = -0.5 * dpsi * s * g * gp.powi(3);
    Ok(AuxValues { h1, h2, g0, r1, r2 })
}

/// Numerator of `K_h'` via the factored form
/// `K = m^2 (g')^3 [ t^2 H1 + (p-1) t H2 - s (p-1)^2 g' ]` with
/// `t = g^(p-1)/m - 1`.
pub fn k_numerator(params: &ProblemParams, dt: &DualTransform, s: f64) -> Result<f64> {
    let (p, m) = (params.p, params.m);
    let (g, gp, _, _) = dt.eval_g(s)?;
    let aux = eval_aux(params, dt, s)?;
    let t = g.powf(p - 1.0) / m - 1.0;
    Ok(m * m
        * gp.powi(3)
        * (t * t * aux.h1 + (p - 1.0) * t * aux.h2 - s * (p - 1.0) * (p - 1.0) * gp))
}

/// Same quantity via the direct definition `(h' + s h'') h - s (h')^2`;
/// kept as the independent algebraic route for identity checks.
pub fn k_direct(params: &ProblemParams, dt: &DualTransform, s: f64) -> Result<f64> {
    let hv = eval_h(params, dt, s)?;
    Ok((hv.hp + s * hv.hpp) * hv.h - s * hv.hp * hv.hp)
}

/// `K_h(s) = s h'(s) / h(s)`; only defined strictly above the pole at `s0`.
pub fn kh(params: &ProblemParams, dt: &DualTransform, s: f64) -> Result<f64> {
    let s0 = s_zero(params, dt)?;
    if s <= s0 {
        return Err(Error::Domain(format!(
            "K_h has a pole at s0 = {s0}; requested s = {s}"
        )));
    }
    let hv = eval_h(params, dt, s)?;
    Ok(s * hv.hp / hv.h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    /// Smallest grid point beyond which `H1 < 0` at every later grid point.
    pub s1: Option<f64>,
    /// Likewise for `H2`.
    pub s2: Option<f64>,
    /// `max(s1, s2)`.
    pub s_bar: Option<f64>,
    /// Estimate (up to grid resolution) of the frequency threshold:
    /// `m0 = g(s_bar)^(p-1)`, the smallest `m` with `s0 >= s_bar`.
    pub m0_est: Option<f64>,
}

/// Scan a log grid for the abscissas past which `H1` and `H2` stay
/// negative. `s1`, `s2` do not depend on `m` (neither function contains it).
pub fn find_thresholds(
    params: &ProblemParams,
    dt: &DualTransform,
    grid: &[f64],
) -> Result<Thresholds> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("threshold grid must be increasing".into()));
    }
    let aux: Vec<AuxValues> = grid
        .par_iter()
        .map(|&s| eval_aux(params, dt, s))
        .collect::<Result<_>>()?;
    let persist = |f: &dyn Fn(&AuxValues) -> f64| -> Option<f64> {
        let mut idx = None;
        for i in (0..grid.len()).rev() {
            if f(&aux[i]) < 0.0 {
                idx = Some(i);
            } else {
                break;
            }
        }
        idx.map(|i| grid[i])
    };
    let s1 = persist(&|a| a.h1);
    let s2 = persist(&|a| a.h2);
    let s_bar = match (s1, s2) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let m0_est = match s_bar {
        Some(sb) => Some(dt.g(sb)?.powf(params.p - 1.0)),
        None => None,
    };
    Ok(Thresholds { s1, s2, s_bar, m0_est })
}

/// One row of the criterion table (the `criterion` CSV schema).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleRow {
    pub s: f64,
    pub g: f64,
    pub h: f64,
    pub hp: f64,
    pub hpp: f64,
    pub k: f64,
    /// `K_h`; NaN at and below the pole `s0`.
    pub kh: f64,
    pub h1: f64,
    pub h2: f64,
    pub g0: f64,
    pub r1: f64,
    pub r2: f64,
}

pub fn sample_rows(
    params: &ProblemParams,
    dt: &DualTransform,
    grid: &[f64],
    s0: f64,
) -> Result<Vec<SampleRow>> {
    grid.par_iter()
        .map(|&s| {
            let hv = eval_h(params, dt, s)?;
            let aux = eval_aux(params, dt, s)?;
            let (g, _, _, _) = dt.eval_g(s)?;
            let k = k_numerator(params, dt, s)?;
            let kh = if s > s0 { s * hv.hp / hv.h } else { f64::NAN };
            Ok(SampleRow {
                s,
                g,
                h: hv.h,
                hp: hv.hp,
                hpp: hv.hpp,
                k,
                kh,
                h1: aux.h1,
                h2: aux.h2,
                g0: aux.g0,
                r1: aux.r1,
                r2: aux.r2,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum CriterionVerdict {
    /// `K <= 0` (within float slack) at every sampled `s >= s0`, and `H1`,
    /// `H2` stay negative past `s_bar`.
    Certified,
    /// Witness abscissa and `K` value where the criterion fails.
    Violated { s: f64, k: f64 },
    /// The scan could not settle the verdict (e.g. `H1`/`H2` not eventually
    /// negative on the grid; possible hypothesis violation or s_max too
    /// small). Not a claim either way: the theorems are silent below `m0`.
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub s0: f64,
    pub thresholds: Thresholds,
    pub samples: Vec<SampleRow>,
    /// `m >= m0_est` means the sufficient condition of the theorems is in
    /// force and certification is expected.
    pub m_above_threshold: Option<bool>,
    #[serde(flatten)]
    pub verdict: CriterionVerdict,
}

/// Fraction below `s0` where sampling starts, exposing the pole of `K_h`.
const GRID_MARGIN: f64 = 0.01;
/// Certification slack: `K(s0) = -s0 h'(s0)^2` is legitimately tiny, so the
/// verdict must not flip on float noise.
const CERT_SLACK: f64 = 1e-10;

/// Certify the Serrin–Tang condition `K(s) <= 0` for `s >= s0` by sampling,
/// and attach the threshold scan. `threshold_grid` is the full log grid used
/// for `s1`/`s2`; sampling uses its own grid from `s0 (1 - margin)` to
/// `s_max`.
pub fn verify_criterion(
    params: &ProblemParams,
    dt: &DualTransform,
    threshold_grid: &[f64],
    sample_points: usize,
) -> Result<CriterionReport> {
    let s0 = s_zero(params, dt)?;
    let thresholds = find_thresholds(params, dt, threshold_grid)?;
    let grid = log_grid(s0 * (1.0 - GRID_MARGIN), dt.s_max(), sample_points.max(16));
    let samples = sample_rows(params, dt, &grid, s0)?;

    let k_scale = samples
        .iter()
        .filter(|r| r.s >= s0)
        .map(|r| r.k.abs())
        .fold(0.0_f64, f64::max);
    let slack = CERT_SLACK * k_scale.max(1.0);

    let violation = samples.iter().find(|r| r.s >= s0 && r.k > slack);
    let verdict = if let Some(w) = violation {
        CriterionVerdict::Violated { s: w.s, k: w.k }
    } else {
        match thresholds.s_bar {
            Some(sb) => {
                let h_bad = samples.iter().find(|r| r.s >= sb && (r.h1 >= 0.0 || r.h2 >= 0.0));
                match h_bad {
                    None => CriterionVerdict::Certified,
                    Some(w) => CriterionVerdict::Inconclusive {
                        reason: format!(
                            "H1/H2 not negative at sampled s = {} despite s_bar = {sb}",
                            w.s
                        ),
                    },
                }
            }
            None => CriterionVerdict::Inconclusive {
                reason: "H1 or H2 not eventually negative on the grid; \
                         possible hypothesis violation or insufficient s_max"
                    .into(),
            },
        }
    };
    let m_above_threshold = thresholds.m0_est.map(|m0| params.m >= m0);
    Ok(CriterionReport { s0, thresholds, samples, m_above_threshold, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::PsiSpec;
    use crate::dual::build_dual;
    use crate::numerics::fd_derivative;

    fn canonical(m: f64) -> (ProblemParams, DualTransform) {
        let spec = CoefficientSpec::new(2.0, 2.0, PsiSpec::Constant(1.0)).unwrap();
        let dt = build_dual(&spec, 1e4, 1e-12).unwrap();
        (ProblemParams::new(3, 3.0, m, spec).unwrap(), dt)
    }

    const S_AT_G1: f64 = 1.2712738985228156; // g = 1 on the canonical spec
    const S_AT_G2: f64 = 3.6232252401402305; // g = 2

    #[test]
    fn params_validate_subcriticality() {
        let spec = CoefficientSpec::new(2.0, 2.0, PsiSpec::Constant(1.0)).unwrap();
        // N=3, k=2: bound is (3k+5)/1 = 11
        assert!(ProblemParams::new(3, 11.0, 1.0, spec.clone()).is_err());
        assert!(ProblemParams::new(3, 0.5, 1.0, spec.clone()).is_err());
        assert!(ProblemParams::new(2, 3.0, 1.0, spec.clone()).is_err());
        assert!(ProblemParams::new(3, 3.0, -1.0, spec.clone()).is_err());
        assert!(ProblemParams::new(3, 3.0, 1.0, spec).is_ok());
        // k > 2 needs k < 2p
        let spec5 = CoefficientSpec::new(5.0, 1.0, PsiSpec::Constant(1.0)).unwrap();
        assert!(ProblemParams::new(3, 2.0, 1.0, spec5.clone()).is_err());
        assert!(ProblemParams::new(3, 3.0, 1.0, spec5).is_ok());
    }

    #[test]
    fn h_vanishes_at_s0() {
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        let hv = eval_h(&params, &dt, s0).unwrap();
        assert!(hv.h.abs() < 1e-10, "h(s0) = {}", hv.h);
    }

    #[test]
    fn h_slope_at_origin() {
        // h(s)/s -> -m/a(0) = -4 for the canonical spec with m = 4
        let (params, dt) = canonical(4.0);
        let s = 1e-6;
        let hv = eval_h(&params, &dt, s).unwrap();
        assert!((hv.h / s + 4.0).abs() < 1e-4, "h/s = {}", hv.h / s);
    }

    #[test]
    fn antiderivative_at_g1() {
        let (params, dt) = canonical(4.0);
        let hv = eval_h(&params, &dt, S_AT_G1).unwrap();
        assert!((hv.cap_h + 1.75).abs() < 1e-8, "H = {}", hv.cap_h);
    }

    #[test]
    fn s_zero_oracle_points() {
        let (params, dt) = canonical(1.0);
        assert!((s_zero(&params, &dt).unwrap() - S_AT_G1).abs() < 1e-6);
        let (params, dt) = canonical(4.0);
        assert!((s_zero(&params, &dt).unwrap() - S_AT_G2).abs() < 1e-6);
    }

    #[test]
    fn h_sign_structure_around_s0() {
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        for i in 1..20 {
            let s = s0 * i as f64 / 20.0;
            assert!(eval_h(&params, &dt, s).unwrap().h < 0.0, "h should be < 0 below s0");
        }
        assert!(eval_h(&params, &dt, s0 * 1.01).unwrap().h > 0.0);
    }

    #[test]
    fn aux_oracle_values_at_g1() {
        // frozen with an independent script from the closed-form g
        let (params, dt) = canonical(4.0);
        let aux = eval_aux(&params, &dt, S_AT_G1).unwrap();
        assert!((aux.g0 - 0.405248494738377).abs() < 1e-8, "G0 = {}", aux.g0);
        assert!((aux.h2 + 1.6912245342616068).abs() < 1e-8, "H2 = {}", aux.h2);
        assert!((aux.h1 + 0.847204752612202).abs() < 1e-8, "H1 = {}", aux.h1);
        // constant psi: remainders vanish identically
        assert_eq!(aux.r1, 0.0);
        assert_eq!(aux.r2, 0.0);
    }

    #[test]
    fn factored_and_direct_k_agree() {
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        for &s in &log_grid(s0 * 0.5, 1e3, 200) {
            let kf = k_numerator(&params, &dt, s).unwrap();
            let kd = k_direct(&params, &dt, s).unwrap();
            assert!(
                (kf - kd).abs() <= 1e-8 * (1.0 + kd.abs()),
                "K mismatch at s={s}: {kf} vs {kd}"
            );
        }
    }

    #[test]
    fn k_at_s0_is_nonpositive() {
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        let hv = eval_h(&params, &dt, s0).unwrap();
        let k = k_direct(&params, &dt, s0).unwrap();
        // K(s0) = -s0 h'(s0)^2 up to the residual h(s0)
        assert!(k <= 1e-12);
        assert!((k + s0 * hv.hp * hv.hp).abs() < 1e-8 * (1.0 + k.abs()));
    }

    #[test]
    fn kh_pole_and_tail_limit() {
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        assert!(kh(&params, &dt, s0).is_err());
        assert!(kh(&params, &dt, s0 * 1.000001).unwrap() > 1e3);
        // K_h -> (2p - k)/(k + 2) = 1 for k=2, p=3
        let tail = kh(&params, &dt, 1e4 * 0.999).unwrap();
        assert!((tail - 1.0).abs() < 0.01, "K_h tail = {tail}");
    }

    #[test]
    fn kh_slope_sign_matches_k() {
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        for &s in &log_grid(s0 * 1.1, 1e3, 50) {
            let dkh = fd_derivative(|x| kh(&params, &dt, x).unwrap(), s, 1, 1e-6 * s);
            let k = k_numerator(&params, &dt, s).unwrap();
            if dkh.abs() > 1e-9 {
                assert_eq!(dkh.signum(), k.signum(), "sign mismatch at s={s}");
            }
        }
    }

    #[test]
    fn thresholds_are_m_independent() {
        let spec = CoefficientSpec::new(
            3.0,
            1.0,
            PsiSpec::SmoothBump { c: 1.0, d: 1.0, beta: 1.0 },
        )
        .unwrap();
        let dt = build_dual(&spec, 1e8, 1e-12).unwrap();
        let grid = log_grid(1e-2, 1e8, 1024);
        let t_small =
            find_thresholds(&ProblemParams::new(3, 3.0, 1.0, spec.clone()).unwrap(), &dt, &grid)
                .unwrap();
        let t_large =
            find_thresholds(&ProblemParams::new(3, 3.0, 100.0, spec).unwrap(), &dt, &grid)
                .unwrap();
        assert_eq!(t_small.s1, t_large.s1);
        assert_eq!(t_small.s2, t_large.s2);
    }

    #[test]
    fn k3_bump_thresholds_match_oracle() {
        // independent scipy scan froze s1 ~ 0.3194, m0 ~ 0.0511 on this grid
        let spec = CoefficientSpec::new(
            3.0,
            1.0,
            PsiSpec::SmoothBump { c: 1.0, d: 1.0, beta: 1.0 },
        )
        .unwrap();
        let dt = build_dual(&spec, 1e8, 1e-12).unwrap();
        let grid = log_grid(1e-2, 1e8, 4096);
        let params = ProblemParams::new(3, 3.0, 1.0, spec).unwrap();
        let t = find_thresholds(&params, &dt, &grid).unwrap();
        let s1 = t.s1.unwrap();
        let m0 = t.m0_est.unwrap();
        assert!((s1 - 0.3193548412908937).abs() < 0.02 * s1, "s1 = {s1}");
        assert!((m0 - 0.05113292619777114).abs() < 0.02 * m0, "m0 = {m0}");
        // defining relation of m0: g(ginv(m0^(1/(p-1)))) = g(s_bar)
        let sb = t.s_bar.unwrap();
        let back = dt.g_inverse(m0.powf(1.0 / (params.p - 1.0))).unwrap();
        assert!((back - sb).abs() < 1e-6 * (1.0 + sb));
    }

    #[test]
    fn canonical_certifies() {
        let spec = CoefficientSpec::new(2.0, 2.0, PsiSpec::Constant(1.0)).unwrap();
        let dt = build_dual(&spec, 1e6, 1e-12).unwrap();
        let grid = log_grid(1e-2, 1e6, 1024);
        let params = ProblemParams::new(3, 3.0, 4.0, spec).unwrap();
        let rep = verify_criterion(&params, &dt, &grid, 1024).unwrap();
        assert!(matches!(rep.verdict, CriterionVerdict::Certified), "{:?}", rep.verdict);
        assert_eq!(rep.m_above_threshold, Some(true));
    }

    #[test]
    fn inequality_chain_of_factored_form() {
        // for g^(p-1) > m: K < m^2 (g')^3 t [ t H1 + (p-1) H2 ]
        let (params, dt) = canonical(4.0);
        let s0 = s_zero(&params, &dt).unwrap();
        for &s in &log_grid(s0 * 1.01, 1e3, 100) {
            let (g, gp, _, _) = dt.eval_g(s).unwrap();
            let t = g.powf(params.p - 1.0) / params.m - 1.0;
            assert!(t > 0.0);
            let aux = eval_aux(&params, &dt, s).unwrap();
            let k = k_numerator(&params, &dt, s).unwrap();
            let bound = params.m * params.m
                * gp.powi(3)
                * t
                * (t * aux.h1 + (params.p - 1.0) * aux.h2);
            assert!(k < bound, "chain violated at s={s}: {k} !< {bound}");
        }
    }
}
