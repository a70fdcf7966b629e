//! Planar vector fields and manifold-shooting experiments.
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with PI-free
//! proportional step control, cubic-Hermite dense output for event
//! location, and hard budgets.  Events are horizontal lines `y = c`
//! and exit from a trust box.
//!
//! The shooting experiments seed the weak-stable manifold of the node
//! from its high-order local series and integrate backward in time; near
//! resonance the manifold is forced across `y = +-c` on the side and
//! with the sign controlled by the limit constant of the critical
//! series, which is what [`track_wws`] verifies.

use crate::center::estimate_s_infty;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::unfolding::{weak_manifold_coeffs, UnfoldingContext, WeakManifoldExpansion};

// ---------------------------------------------------------------------
// Vector fields.
// ---------------------------------------------------------------------

/// A polynomial planar field built from a system description.
#[derive(Debug, Clone)]
pub struct PlanarField {
    kind: FieldKind,
    eps: f64,
    a_eps: f64,
    mu: f64,
    /// `f_k` for `k = 0..=order` (leading zeros included).
    fcoef: Vec<f64>,
    /// `(k, l, v)` terms of the bivariate part.
    hterms: Vec<(i32, i32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// `x' = (x - eps) x`, `y' = -y (1 + a x) + g(x, y)`.
    Original,
    /// Rescaled variables: `x' = eps x (x - 1)`,
    /// `y' = -y (1 + eps a x) + eps g_resc(x, y)`.
    Scaled,
    /// `x' = -eps x`, `y' = -y + u(x)` (exactly solvable model).
    Baby,
}

impl PlanarField {
    pub fn original(spec: &NonlinearitySpec, eps: f64, order: usize) -> Self {
        Self::build(spec, eps, order, FieldKind::Original)
    }

    pub fn scaled(spec: &NonlinearitySpec, eps: f64, order: usize) -> Self {
        Self::build(spec, eps, order, FieldKind::Scaled)
    }

    fn build(spec: &NonlinearitySpec, eps: f64, order: usize, kind: FieldKind) -> Self {
        let order = order.max(10);
        let fcoef = (0..=order).map(|k| spec.f_coeff(k)).collect();
        let hterms = spec
            .h_terms()
            .iter()
            .map(|t| (t.k as i32, t.l as i32, t.v))
            .collect();
        Self {
            kind,
            eps,
            a_eps: spec.a_eps(eps),
            mu: spec.mu(),
            fcoef,
            hterms,
        }
    }

    pub fn baby(u: &[f64], eps: f64) -> Self {
        // `u` holds the coefficients of x^2, x^3, ... of the forcing.
        let mut fcoef = vec![0.0, 0.0];
        fcoef.extend_from_slice(u);
        Self {
            kind: FieldKind::Baby,
            eps,
            a_eps: 0.0,
            mu: 0.0,
            fcoef,
            hterms: Vec::new(),
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn f_at(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.fcoef.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// `g(x, y) = f(x) + mu h(x, y)` in the original variables.
    fn g_at(&self, x: f64, y: f64) -> f64 {
        let mut s = self.f_at(x);
        if self.mu != 0.0 {
            for &(k, l, v) in &self.hterms {
                s += self.mu * v * x.powi(k) * y.powi(l);
            }
        }
        s
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match self.kind {
            FieldKind::Original => {
                ((x - self.eps) * x, -y * (1.0 + self.a_eps * x) + self.g_at(x, y))
            }
            FieldKind::Scaled => {
                // g_resc(x, y) = eps^{-2} g(eps x, eps y).
                let g = self.g_at(self.eps * x, self.eps * y) / (self.eps * self.eps);
                (
                    self.eps * x * (x - 1.0),
                    -y * (1.0 + self.eps * self.a_eps * x) + self.eps * g,
                )
            }
            FieldKind::Baby => (-self.eps * x, -y + self.f_at(x)),
        }
    }
}

// ---------------------------------------------------------------------
// Integrator.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub t_max: f64,
    pub h0: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
            t_max: 1e6,
            h0: 1e-4,
        }
    }
}

/// What ended an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    /// Crossed the horizontal line `y = value`.
    LineCrossed { value: f64 },
    LeftBox,
    TimeBudget,
    StepBudget,
}

#[derive(Debug, Clone)]
pub struct StopConditions {
    /// Horizontal lines `y = c` that end the integration when crossed.
    pub lines: Vec<f64>,
    /// Trust box `[x_min, x_max] x [y_min, y_max]`.
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Trace {
    /// Sampled states `(t, x, y)` (every accepted step).
    pub points: Vec<(f64, f64, f64)>,
    pub reason: StopReason,
    pub steps: usize,
}

impl Trace {
    pub fn last(&self) -> (f64, f64, f64) {
        *self.points.last().expect("non-empty trace")
    }
}

// Stage coefficients of the Dormand-Prince 5(4) pair.  The fields are
// autonomous, so the c-abscissae never enter.
const DP_A: [[f64; 6]; 6] = [
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
// 4th-order weights of the embedded pair (5th-order weights are DP_A[5]
// extended by 0; the pair is FSAL).
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dz/dt = dir * F(z)` from `start` until a stop condition
/// fires or a budget runs out.  `dir = -1` runs backward in time.
pub fn integrate<F>(
    field: F,
    start: (f64, f64),
    dir: f64,
    stop: &StopConditions,
    opts: &IntegratorOptions,
) -> Result<Trace>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    debug_assert!(dir == 1.0 || dir == -1.0);
    let f = |x: f64, y: f64| {
        let (dx, dy) = field(x, y);
        (dir * dx, dir * dy)
    };
    let inside = |x: f64, y: f64| {
        x >= stop.x_range.0 && x <= stop.x_range.1 && y >= stop.y_range.0 && y <= stop.y_range.1
    };
    let (mut x, mut y) = start;
    if !inside(x, y) {
        return Err(Error::Domain(format!(
            "integrate: start ({x}, {y}) outside the trust box"
        )));
    }
    let mut t = 0.0;
    let mut h = opts.h0;
    let mut points = vec![(t, x, y)];
    let (mut k1x, mut k1y) = f(x, y);
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Ok(Trace {
                points,
                reason: StopReason::StepBudget,
                steps,
            });
        }
        if t >= opts.t_max {
            return Ok(Trace {
                points,
                reason: StopReason::TimeBudget,
                steps,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness(t));
        }
        if t + h > opts.t_max {
            h = opts.t_max - t;
        }
        // One embedded step.
        let mut kx = [0.0f64; 7];
        let mut ky = [0.0f64; 7];
        kx[0] = k1x;
        ky[0] = k1y;
        for i in 0..6 {
            let mut ax = 0.0;
            let mut ay = 0.0;
            for j in 0..=i {
                ax += DP_A[i][j] * kx[j];
                ay += DP_A[i][j] * ky[j];
            }
            let (vx, vy) = f(x + h * ax, y + h * ay);
            kx[i + 1] = vx;
            ky[i + 1] = vy;
        }
        // 5th-order solution (row 6 of A) and embedded 4th-order error.
        let mut x5 = 0.0;
        let mut y5 = 0.0;
        let mut x4 = 0.0;
        let mut y4 = 0.0;
        for j in 0..7 {
            let b5 = if j < 6 { DP_A[5][j] } else { 0.0 };
            x5 += b5 * kx[j];
            y5 += b5 * ky[j];
            x4 += DP_B4[j] * kx[j];
            y4 += DP_B4[j] * ky[j];
        }
        let xn = x + h * x5;
        let yn = y + h * y5;
        let ex = h * (x5 - x4);
        let ey = h * (y5 - y4);
        let scale_x = opts.atol + opts.rtol * x.abs().max(xn.abs());
        let scale_y = opts.atol + opts.rtol * y.abs().max(yn.abs());
        let err = ((ex / scale_x).powi(2) + (ey / scale_y).powi(2)).sqrt() / 2f64.sqrt();
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            steps += 1;
            continue;
        }
        steps += 1;
        // Event detection on the accepted step, via cubic Hermite dense
        // output refined by bisection.
        let (fnx, fny) = f(xn, yn);
        let hermite = |theta: f64| -> (f64, f64) {
            let h00 = (1.0 + 2.0 * theta) * (1.0 - theta) * (1.0 - theta);
            let h10 = theta * (1.0 - theta) * (1.0 - theta);
            let h01 = theta * theta * (3.0 - 2.0 * theta);
            let h11 = theta * theta * (theta - 1.0);
            (
                h00 * x + h10 * h * k1x + h01 * xn + h11 * h * fnx,
                h00 * y + h10 * h * k1y + h01 * yn + h11 * h * fny,
            )
        };
        let mut event: Option<(f64, f64)> = None; // (theta, line value)
        for &c in &stop.lines {
            if (y - c) == 0.0 {
                continue; // starting on the line does not count
            }
            if (y - c) * (yn - c) <= 0.0 {
                // Bisection on the Hermite interpolant.
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (_, ym) = hermite(mid);
                    if (y - c) * (ym - c) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let theta = 0.5 * (lo + hi);
                if event.map_or(true, |(t0, _)| theta < t0) {
                    event = Some((theta, c));
                }
            }
        }
        if let Some((theta, c)) = event {
            let (xe, _) = hermite(theta);
            points.push((t + theta * h, xe, c));
            return Ok(Trace {
                points,
                reason: StopReason::LineCrossed { value: c },
                steps,
            });
        }
        t += h;
        x = xn;
        y = yn;
        k1x = fnx;
        k1y = fny;
        points.push((t, x, y));
        if !inside(x, y) {
            return Ok(Trace {
                points,
                reason: StopReason::LeftBox,
                steps,
            });
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
}

// ---------------------------------------------------------------------
// Weak-stable manifold shooting.
// ---------------------------------------------------------------------

/// Which side of the node the manifold is tracked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Maximum admissible seed residual (size of the last retained series
/// term at the seed point).
pub const SEED_RESIDUAL_MAX: f64 = 1e-8;

/// Evaluate the local weak-manifold series at signed radius `r0`
/// (rescaled variables), returning the seed point and the residual.
pub fn seed_wws(exp: &WeakManifoldExpansion, r0: f64) -> Result<((f64, f64), f64)> {
    let (y, residual) = exp.eval(r0);
    if !residual.is_finite() || residual > SEED_RESIDUAL_MAX {
        return Err(Error::SeedQuality(format!(
            "seed residual {residual:e} at r0 = {r0} exceeds {SEED_RESIDUAL_MAX:e}; \
             shrink r0 or raise the series order"
        )));
    }
    Ok(((r0, y), residual))
}

/// Outcome of one weak-manifold shooting run.
#[derive(Debug, Clone)]
pub struct FlapReport {
    pub eps: f64,
    pub n: usize,
    pub alpha: f64,
    pub side: Side,
    /// Threshold lines are `y = +-c` in the original variables.
    pub c: f64,
    /// Sign of the limit constant of the critical series.
    pub s_sign: i8,
    /// `+1` for `y = +c`, `-1` for `y = -c`, `None` if no line was hit
    /// inside the trust box.
    pub crossed: Option<i8>,
    /// Line predicted by the resonance analysis (None where the offset
    /// parameter is in the no-prediction window).
    pub predicted: Option<i8>,
    /// Crossing point in the original variables, if any.
    pub crossing_x: Option<f64>,
    pub seed_r0: f64,
    pub seed_residual: f64,
    pub steps: usize,
}

impl FlapReport {
    pub fn agrees(&self) -> Option<bool> {
        match (self.crossed, self.predicted) {
            (Some(c), Some(p)) => Some(c == p),
            _ => None,
        }
    }
}

/// Threshold below which the left-side crossing toward `sign(S)` is
/// predicted: `alpha <= N^{a0 - N}`.
pub fn left_lower_threshold(n: usize, a0: f64) -> f64 {
    (n as f64).powf(a0 - n as f64)
}

/// Threshold for the opposite window: `1 - alpha <= N^{a0 - 1 - N}`.
pub fn left_upper_threshold(n: usize, a0: f64) -> f64 {
    (n as f64).powf(a0 - 1.0 - n as f64)
}

/// Line predicted by the resonance analysis, as `+1`/`-1` in units of
/// `c`, or `None` in the left-side no-prediction window.
pub fn predicted_line(s_sign: i8, n: usize, side: Side, alpha: f64, a0: f64) -> Option<i8> {
    match side {
        Side::Right => {
            if n % 2 == 0 {
                Some(s_sign)
            } else {
                Some(-s_sign)
            }
        }
        Side::Left => {
            if alpha <= left_lower_threshold(n, a0) {
                Some(s_sign)
            } else if 1.0 - alpha <= left_upper_threshold(n, a0) {
                Some(-s_sign)
            } else {
                None
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    /// Series order for the local seed expansion.
    pub series_order: usize,
    /// Initial seed radius (rescaled variables); halved until the
    /// residual requirement is met.
    pub r0: f64,
    /// Truncation order of the critical series used for the sign of the
    /// limit constant.
    pub s_order: usize,
    pub integrator: IntegratorOptions,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            series_order: 15,
            r0: 0.25,
            s_order: 100,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Track the weak-stable manifold of the node backward in time on one
/// side until it crosses `y = +-c` (original variables) or leaves the
/// trust box, and compare with the predicted flapping direction.
pub fn track_wws(
    spec: &NonlinearitySpec,
    ctx: &UnfoldingContext,
    side: Side,
    c: f64,
    opts: &TrackOptions,
) -> Result<FlapReport> {
    let (report, _) = track_wws_trace(spec, ctx, side, c, opts)?;
    Ok(report)
}

/// As [`track_wws`], also returning the trace (rescaled variables).
pub fn track_wws_trace(
    spec: &NonlinearitySpec,
    ctx: &UnfoldingContext,
    side: Side,
    c: f64,
    opts: &TrackOptions,
) -> Result<(FlapReport, Trace)> {
    if !(c > 0.0) {
        return Err(Error::Domain("track_wws: c must be positive".into()));
    }
    let order = opts.series_order.max(ctx.n() + 4);
    let exp = weak_manifold_coeffs(spec, ctx, order)?;
    // Shrink the seed radius until the residual requirement holds.
    let mut r0 = opts.r0;
    let mut seed = None;
    while r0 >= 1e-6 {
        match seed_wws(&exp, side.sign() * r0) {
            Ok(s) => {
                seed = Some(s);
                break;
            }
            Err(_) => r0 *= 0.5,
        }
    }
    let ((x0, y0), residual) = seed.ok_or_else(|| {
        Error::SeedQuality(format!(
            "no admissible seed radius for n = {}, alpha = {:e}, side {}",
            ctx.n(),
            ctx.alpha(),
            side.label()
        ))
    })?;
    let eps = ctx.eps();
    let field = PlanarField::scaled(spec, eps, opts.series_order.max(30));
    // Trust box |x| <= 0.9 rho in original variables; lines at
    // y = +-c/eps in the rescaled ones.
    let xbox = 0.9 * spec.rho() / eps;
    let stop = StopConditions {
        lines: vec![c / eps, -c / eps],
        x_range: (-xbox, xbox),
        y_range: (-2.0 * c / eps, 2.0 * c / eps),
    };
    let trace = integrate(|x, y| field.eval(x, y), (x0, y0), -1.0, &stop, &opts.integrator)?;
    let s_est = estimate_s_infty(spec, opts.s_order, 1e-10)?;
    let s_sign = if s_est.value >= 0.0 { 1 } else { -1 };
    let (crossed, crossing_x) = match trace.reason {
        StopReason::LineCrossed { value } => {
            let (_, xe, _) = trace.last();
            (Some(if value > 0.0 { 1 } else { -1 }), Some(eps * xe))
        }
        _ => (None, None),
    };
    let report = FlapReport {
        eps,
        n: ctx.n(),
        alpha: ctx.alpha(),
        side,
        c,
        s_sign,
        crossed,
        predicted: predicted_line(s_sign, ctx.n(), side, ctx.alpha(), spec.a0()),
        crossing_x,
        seed_r0: r0,
        seed_residual: residual,
        steps: trace.steps,
    };
    Ok((report, trace))
}

// ---------------------------------------------------------------------
// Unstable manifold of the saddle.
// ---------------------------------------------------------------------

/// The saddle's unstable-manifold branch heading toward the node,
/// in rescaled variables, together with the saddle location.
#[derive(Debug, Clone)]
pub struct UnstableBranch {
    pub saddle: (f64, f64),
    pub trace: Trace,
}

impl UnstableBranch {
    /// Linear interpolation of the branch height at `x` (rescaled).
    pub fn y_at(&self, x: f64) -> Option<f64> {
        let pts = &self.trace.points;
        for w in pts.windows(2) {
            let (_, x0, y0) = w[0];
            let (_, x1, y1) = w[1];
            if (x0 - x) * (x1 - x) <= 0.0 && x0 != x1 {
                let t = (x - x0) / (x1 - x0);
                return Some(y0 + t * (y1 - y0));
            }
        }
        None
    }
}

/// Locate the saddle (at `x = 1` in rescaled variables) and integrate
/// its unstable manifold forward toward the node.
pub fn track_wu(
    spec: &NonlinearitySpec,
    ctx: &UnfoldingContext,
    opts: &IntegratorOptions,
) -> Result<UnstableBranch> {
    let eps = ctx.eps();
    if eps >= spec.rho() {
        return Err(Error::Domain(format!(
            "track_wu: eps = {eps} outside the analyticity radius {}",
            spec.rho()
        )));
    }
    let field = PlanarField::scaled(spec, eps, 40);
    // x' vanishes identically at x = 1; solve y'(1, y) = 0 by Newton.
    let fy = |y: f64| field.eval(1.0, y).1;
    let mut ys = 0.0f64;
    for _ in 0..100 {
        let v = fy(ys);
        let d = 1e-7;
        let dv = (fy(ys + d) - fy(ys - d)) / (2.0 * d);
        if dv == 0.0 {
            return Err(Error::NoConvergence("track_wu: degenerate Newton step".into()));
        }
        let step = v / dv;
        ys -= step;
        if step.abs() <= 1e-14 {
            break;
        }
    }
    if fy(ys).abs() > 1e-10 {
        return Err(Error::NoConvergence(format!(
            "track_wu: saddle height residual {:e}",
            fy(ys)
        )));
    }
    // Jacobian at the saddle: dx'/dx = eps, dx'/dy = 0, so the unstable
    // eigenvalue is eps with eigenvector (1, j21 / (eps - j22)).
    let d = 1e-7;
    let j21 = (field.eval(1.0 + d, ys).1 - field.eval(1.0 - d, ys).1) / (2.0 * d);
    let j22 = (fy(ys + d) - fy(ys - d)) / (2.0 * d);
    if (eps - j22).abs() <= 1e-10 {
        return Err(Error::Domain(
            "track_wu: saddle eigenvalues nearly resonant (eps ~ j22)".into(),
        ));
    }
    let vy = j21 / (eps - j22);
    let delta = 1e-6;
    // Branch toward the node: x decreasing from 1.
    let start = (1.0 - delta, ys - delta * vy);
    let stop = StopConditions {
        lines: vec![],
        x_range: (0.02, 2.0),
        y_range: (-1.0, 1.0),
    };
    let trace = integrate(|x, y| field.eval(x, y), start, 1.0, &stop, opts)?;
    Ok(UnstableBranch {
        saddle: (1.0, ys),
        trace,
    })
}

// ---------------------------------------------------------------------
// Exactly solvable model.
// ---------------------------------------------------------------------

/// Exact weak-manifold graph of the model `x' = -eps x, y' = -y + u(x)`:
/// `m(x) = sum_k u_k x^k / (1 - eps k)`, where `u` holds the
/// coefficients of `x^2, x^3, ...`.
pub fn baby_exact(u: &[f64], eps: f64, x: f64) -> Result<f64> {
    let mut s = 0.0;
    for (i, &uk) in u.iter().enumerate() {
        let k = (i + 2) as f64;
        let d = 1.0 - eps * k;
        if uk != 0.0 && d.abs() <= 1e-9 {
            return Err(Error::Resonance {
                inv_eps: 1.0 / eps,
                nearest: k as i64,
                guard: 1e-9,
            });
        }
        if uk != 0.0 {
            s += uk / d * x.powi(i as i32 + 2);
        }
    }
    Ok(s)
}

/// The two near-resonant terms of the model manifold, which dominate it
/// when the offset is small on either side:
/// `V(x) = N u_N / alpha * x^N - (N+1) u_{N+1} / (1 - alpha) * x^{N+1}`.
pub fn baby_v(u: &[f64], eps: f64, x: f64) -> Result<f64> {
    let inv_eps = 1.0 / eps;
    let n = inv_eps.floor() as usize;
    let alpha = inv_eps - n as f64;
    if alpha <= 1e-12 || alpha >= 1.0 - 1e-12 {
        return Err(Error::Resonance {
            inv_eps,
            nearest: inv_eps.round() as i64,
            guard: 1e-12,
        });
    }
    let coeff = |k: usize| -> f64 {
        if k >= 2 && k - 2 < u.len() {
            u[k - 2]
        } else {
            0.0
        }
    };
    Ok(n as f64 * coeff(n) / alpha * x.powi(n as i32)
        - (n as f64 + 1.0) * coeff(n + 1) / (1.0 - alpha) * x.powi(n as i32 + 1))
}

// ---------------------------------------------------------------------
// Parameter sweeps.
// ---------------------------------------------------------------------

/// Reports and per-point failures for a sweep of the resonance offset.
#[derive(Debug)]
pub struct FlapSweep {
    pub reports: Vec<FlapReport>,
    pub errors: Vec<(f64, Side, String)>,
}

/// Run [`track_wws`] on both sides over a grid of offsets at a fixed
/// resonance index.  Per-point failures are collected, not fatal.
pub fn flap_sweep(
    spec: &NonlinearitySpec,
    n: usize,
    alphas: &[f64],
    c: f64,
    opts: &TrackOptions,
) -> FlapSweep {
    use rayon::prelude::*;
    let jobs: Vec<(f64, Side)> = alphas
        .iter()
        .flat_map(|&a| [(a, Side::Left), (a, Side::Right)])
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(alpha, side)| {
            let run = UnfoldingContext::from_parts_spec(n, alpha, spec)
                .and_then(|ctx| track_wws(spec, &ctx, side, c, opts));
            (alpha, side, run)
        })
        .collect();
    let mut sweep = FlapSweep {
        reports: Vec::new(),
        errors: Vec::new(),
    };
    for (alpha, side, run) in results {
        match run {
            Ok(r) => sweep.reports.push(r),
            Err(e) => sweep.errors.push((alpha, side, e.to_string())),
        }
    }
    sweep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::CoefficientProvider;

    fn euler_spec() -> NonlinearitySpec {
        NonlinearitySpec::new(
            0.0,
            0.0,
            0.0,
            1.0,
            1.0,
            CoefficientProvider::explicit([(2, 1.0)]),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn integrator_matches_exact_linear_flow() {
        // z' = (-x, -2y): exact solution (x0 e^-t, y0 e^-2t).
        let stop = StopConditions {
            lines: vec![],
            x_range: (-10.0, 10.0),
            y_range: (-10.0, 10.0),
        };
        let mut opts = IntegratorOptions::default();
        opts.t_max = 2.0;
        let trace = integrate(|x, y| (-x, -2.0 * y), (1.0, 1.0), 1.0, &stop, &opts).unwrap();
        assert_eq!(trace.reason, StopReason::TimeBudget);
        let (t, x, y) = trace.last();
        assert!((t - 2.0).abs() <= 1e-12);
        assert!((x - (-2.0f64).exp()).abs() <= 1e-9, "x = {x}");
        assert!((y - (-4.0f64).exp()).abs() <= 1e-9, "y = {y}");
    }

    #[test]
    fn integrator_line_event_location() {
        // y' = y, y(0) = 0.1 crosses y = 1 at t = ln 10; x is a clock.
        let stop = StopConditions {
            lines: vec![1.0],
            x_range: (-100.0, 100.0),
            y_range: (-100.0, 100.0),
        };
        let trace = integrate(
            |_x, y| (1.0, y),
            (0.0, 0.1),
            1.0,
            &stop,
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.reason, StopReason::LineCrossed { value: 1.0 });
        let (_, x, y) = trace.last();
        assert!((y - 1.0).abs() <= 1e-12);
        assert!((x - 10.0f64.ln()).abs() <= 1e-8, "crossing clock {x}");
    }

    #[test]
    fn integrator_box_exit_and_backward_direction() {
        // Backward integration of x' = -x grows x; it must leave the box.
        let stop = StopConditions {
            lines: vec![],
            x_range: (-2.0, 2.0),
            y_range: (-2.0, 2.0),
        };
        let trace = integrate(
            |x, _y| (-x, 0.0),
            (1.0, 0.0),
            -1.0,
            &stop,
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.reason, StopReason::LeftBox);
        let (_, x, _) = trace.last();
        assert!(x > 2.0);
    }

    #[test]
    fn scaled_field_fixed_points() {
        let spec = euler_spec();
        let ctx = UnfoldingContext::from_parts(8, 0.5, 0.0).unwrap();
        let field = PlanarField::scaled(&spec, ctx.eps(), 20);
        // The node sits at the origin.
        let (dx, dy) = field.eval(0.0, 0.0);
        assert_eq!(dx, 0.0);
        assert_eq!(dy, 0.0);
        // x' vanishes on the saddle line x = 1.
        let (dx, _) = field.eval(1.0, 0.3);
        assert_eq!(dx, 0.0);
    }

    #[test]
    fn scaled_and_original_fields_are_conjugate() {
        // (x, y) = (eps xb, eps yb) and t = t affine: dx/dt = eps dxb/dt.
        let spec = euler_spec();
        let eps = 1.0 / 8.5;
        let orig = PlanarField::original(&spec, eps, 20);
        let scal = PlanarField::scaled(&spec, eps, 20);
        for (xb, yb) in [(0.3, 0.1), (-0.5, 0.2), (1.5, -0.4)] {
            let (dxb, dyb) = scal.eval(xb, yb);
            let (dx, dy) = orig.eval(eps * xb, eps * yb);
            assert!((eps * dxb - dx).abs() <= 1e-14 * dx.abs().max(1e-10));
            assert!((eps * dyb - dy).abs() <= 1e-13 * dy.abs().max(1e-10));
        }
    }

    #[test]
    fn seed_residual_guard() {
        let spec = euler_spec();
        let ctx = UnfoldingContext::from_parts(8, 0.5, 0.0).unwrap();
        let exp = weak_manifold_coeffs(&spec, &ctx, 15).unwrap();
        // Large radius: residual too big.
        assert!(seed_wws(&exp, 0.9).is_err());
        // Small radius: fine, and the seed lies on the graph.
        let ((x, y), _) = seed_wws(&exp, 0.05).unwrap();
        assert_eq!(x, 0.05);
        assert!((y - exp.eval(0.05).0).abs() == 0.0);
    }

    #[test]
    fn baby_exact_is_invariant_graph() {
        // The graph y = m(x) must satisfy -eps x m'(x) = -m(x) + u(x):
        // check by comparing field direction with graph tangent.
        let u = [0.0, 1.0, -0.5]; // u = x^3 - 0.5 x^4
        let eps = 1.0 / 3.4;
        let field = PlanarField::baby(&u, eps);
        for x in [-0.5, -0.1, 0.2, 0.6] {
            let m = baby_exact(&u, eps, x).unwrap();
            let dx = 1e-6;
            let mprime = (baby_exact(&u, eps, x + dx).unwrap()
                - baby_exact(&u, eps, x - dx).unwrap())
                / (2.0 * dx);
            let (fx, fy) = field.eval(x, m);
            assert!(
                (fy - mprime * fx).abs() <= 1e-7,
                "x = {x}: tangency defect {}",
                fy - mprime * fx
            );
        }
    }

    #[test]
    fn baby_v_captures_near_resonant_terms() {
        // With u = x^2 and 1/eps = 2 + alpha, V = 2 u_2 / alpha * x^2 and
        // m - V stays bounded as alpha -> 0.
        let u = [1.0];
        for alpha in [1e-2, 1e-4, 1e-6] {
            let eps = 1.0 / (2.0 + alpha);
            let x = 0.5;
            let m = baby_exact(&u, eps, x).unwrap();
            let v = baby_v(&u, eps, x).unwrap();
            assert!(
                (m - v).abs() <= 10.0,
                "alpha = {alpha}: m - V = {}",
                m - v
            );
            assert!(m.abs() > 0.1 / alpha); // the resonant term dominates
        }
    }

    #[test]
    fn track_wu_branch_is_eps_flat() {
        // The unstable branch toward the node stays O(eps) in height.
        let spec = euler_spec();
        let ctx = UnfoldingContext::from_parts(10, 0.5, 0.0).unwrap();
        let branch = track_wu(&spec, &ctx, &IntegratorOptions::default()).unwrap();
        assert!((branch.saddle.1).abs() <= ctx.eps());
        for x in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let y = branch.y_at(x).expect("branch covers (0.1, 0.9)");
            assert!(y.abs() <= 2.0 * ctx.eps(), "x = {x}: y = {y}");
        }
    }

    #[test]
    fn track_wws_right_side_parity() {
        // Euler data has a positive limit constant; on the right side the
        // manifold must flap to sign (-1)^N * sign(S).
        let spec = euler_spec();
        for (n, want) in [(8usize, 1i8), (9, -1)] {
            let ctx = UnfoldingContext::from_parts(n, 0.5, 0.0).unwrap();
            let r = track_wws(&spec, &ctx, Side::Right, 0.1, &TrackOptions::default()).unwrap();
            assert_eq!(r.s_sign, 1);
            assert_eq!(r.predicted, Some(want));
            assert_eq!(r.crossed, Some(want), "n = {n}: {:?}", r);
            assert_eq!(r.agrees(), Some(true));
        }
    }

    #[test]
    fn predicted_line_windows() {
        // Left side with a0 = 0: thresholds N^-N and N^{-1-N}.
        let al = left_lower_threshold(8, 0.0);
        assert!((al - 8.0f64.powi(-8)).abs() <= 1e-22);
        assert_eq!(predicted_line(1, 8, Side::Left, al * 0.5, 0.0), Some(1));
        assert_eq!(
            predicted_line(1, 8, Side::Left, 1.0 - 0.5 * left_upper_threshold(8, 0.0), 0.0),
            Some(-1)
        );
        assert_eq!(predicted_line(1, 8, Side::Left, 0.5, 0.0), None);
        // Right side is parity only.
        assert_eq!(predicted_line(-1, 8, Side::Right, 0.5, 0.0), Some(-1));
        assert_eq!(predicted_line(-1, 9, Side::Right, 0.5, 0.0), Some(1));
    }
}
