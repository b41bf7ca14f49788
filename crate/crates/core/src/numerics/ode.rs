//! Embedded Dormand-Prince 5(4) integrator with PI step control and
//! cubic-Hermite dense output on the accepted nodes.

use crate::error::{Error, Result};

/// One accepted integration node: abscissa, state, and the vector field
/// evaluated at that state (stored, so the interpolant is C^1 and exactly
/// consistent with the ODE at every node).
#[derive(Debug, Clone)]
pub struct Node {
    pub x: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Dense-output trajectory produced by [`integrate_ode`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    nodes: Vec<Node>,
    tol: f64,
}

impl Trajectory {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0].x, self.nodes[self.nodes.len() - 1].x)
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].y.len()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn end(&self) -> &Node {
        self.nodes.last().expect("trajectory has at least two nodes")
    }

    /// Index of the interval [x_i, x_{i+1}] containing `x`.
    fn locate(&self, x: f64) -> Result<usize> {
        let (a, b) = self.span();
        // tolerate endpoint roundoff
        let slack = 1e-12 * (1.0 + b.abs());
        if x < a - slack || x > b + slack {
            return Err(Error::Range(format!(
                "abscissa {x} outside trajectory span [{a}, {b}]"
            )));
        }
        let i = self
            .nodes
            .partition_point(|n| n.x <= x)
            .min(self.nodes.len() - 1)
            .max(1)
            - 1;
        Ok(i)
    }

    /// Evaluate the trajectory at `x` by cubic Hermite interpolation of the
    /// bracketing node pair. Exactly reproduces stored states at the nodes.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        let i = self.locate(x)?;
        let (n0, n1) = (&self.nodes[i], &self.nodes[i + 1]);
        if x == n0.x {
            out.copy_from_slice(&n0.y);
            return Ok(());
        }
        if x == n1.x {
            out.copy_from_slice(&n1.y);
            return Ok(());
        }
        let h = n1.x - n0.x;
        let t = (x - n0.x) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        for j in 0..out.len() {
            out[j] = h00 * n0.y[j] + h10 * h * n0.dy[j] + h01 * n1.y[j] + h11 * h * n1.dy[j];
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_component(&self, x: f64, j: usize) -> Result<f64> {
        let i = self.locate(x)?;
        let (n0, n1) = (&self.nodes[i], &self.nodes[i + 1]);
        if x == n0.x {
            return Ok(n0.y[j]);
        }
        if x == n1.x {
            return Ok(n1.y[j]);
        }
        let h = n1.x - n0.x;
        let t = (x - n0.x) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * n0.y[j]
            + (t3 - 2.0 * t2 + t) * h * n0.dy[j]
            + (-2.0 * t3 + 3.0 * t2) * n1.y[j]
            + (t3 - t2) * h * n1.dy[j])
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th-order weights (row 7 of A, FSAL) and the
// embedded 4th-order weights; used directly for the error estimate.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 6.0;
const MAX_STEPS: usize = 50_000_000;

/// Integrate `y' = field(x, y)` over `span` with local tolerance `tol`.
///
/// Returns a dense-output [`Trajectory`]; evaluable anywhere in the span.
pub fn integrate_ode<F>(field: F, init: &[f64], span: (f64, f64), tol: f64) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    integrate_ode_until(field, init, span, tol, |_, _, _| false)
}

/// Same as [`integrate_ode`] but stops after the first accepted step for
/// which `stop(x, y, dy)` is true; that step's endpoint is the final node.
pub(crate) fn integrate_ode_until<F, S>(
    field: F,
    init: &[f64],
    span: (f64, f64),
    tol: f64,
    mut stop: S,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64], &[f64]) -> bool,
{
    let (x0, x_end) = span;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !(x_end > x0) || !x0.is_finite() || !x_end.is_finite() {
        return Err(Error::InvalidInput(format!(
            "span must be a finite increasing interval, got [{x0}, {x_end}]"
        )));
    }
    let dim = init.len();
    let mut y = init.to_vec();
    let mut f0 = vec![0.0; dim];
    field(x0, &y, &mut f0);
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure {
            reached: x0,
            reason: "vector field not finite at the initial point".into(),
        });
    }

    let mut h = initial_step(x0, x_end, &y, &f0, tol);
    let mut x = x0;
    let mut nodes = vec![Node { x, y: y.clone(), dy: f0.clone() }];
    let mut k = vec![vec![0.0; dim]; 7];
    k[0].copy_from_slice(&f0);
    let mut ytmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut err_prev: f64 = 1.0;

    for _ in 0..MAX_STEPS {
        if x >= x_end {
            break;
        }
        if h > x_end - x {
            h = x_end - x;
        }
        if h <= f64::EPSILON * 4.0 * (1.0 + x.abs()) {
            return Err(Error::IntegrationFailure {
                reached: x,
                reason: "step size underflow".into(),
            });
        }

        // stages 2..7 (stage 1 is k[0], FSAL from the previous step)
        for s in 1..7 {
            for j in 0..dim {
                let mut acc = 0.0;
                for (q, kq) in k.iter().enumerate().take(s) {
                    acc += A[s][q] * kq[j];
                }
                ytmp[j] = y[j] + h * acc;
            }
            field(x + C[s] * h, &ytmp, &mut k[s]);
        }
        // 5th order solution is the last stage argument (A row 7 == b5)
        y5.copy_from_slice(&ytmp);
        let k7_finite = k[6].iter().all(|v| v.is_finite());
        let sol_finite = y5.iter().all(|v| v.is_finite()) && k7_finite;

        // scaled error norm of (y5 - y4)
        let err = if sol_finite {
            let mut acc = 0.0;
            for j in 0..dim {
                let mut e = 0.0;
                for (s, kq) in k.iter().enumerate() {
                    e += E[s] * kq[j];
                }
                let sc = tol + tol * y[j].abs().max(y5[j].abs());
                acc += (h * e / sc).powi(2);
            }
            (acc / dim as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            x += h;
            y.copy_from_slice(&y5);
            nodes.push(Node { x, y: y.clone(), dy: k[6].clone() });
            let (head, tail) = k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]); // FSAL
            let e = err.max(1e-10);
            let fac = (SAFETY * e.powf(-ALPHA) * err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX);
            err_prev = e;
            h *= fac;
            if stop(x, &y, &nodes.last().unwrap().dy) {
                return Ok(Trajectory { nodes, tol });
            }
        } else {
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-ALPHA)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h *= fac;
        }
    }

    if x < x_end {
        return Err(Error::IntegrationFailure {
            reached: x,
            reason: "step budget exhausted".into(),
        });
    }
    Ok(Trajectory { nodes, tol })
}

fn initial_step(x0: f64, x_end: f64, y: &[f64], f0: &[f64], tol: f64) -> f64 {
    let span = x_end - x0;
    let ynorm = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let fnorm = f0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let h = if fnorm > 0.0 {
        0.01 * (ynorm + tol.sqrt()) / fnorm
    } else {
        1e-3 * span
    };
    h.min(0.1 * span).max(f64::EPSILON * 16.0 * (1.0 + x0.abs()))
}
