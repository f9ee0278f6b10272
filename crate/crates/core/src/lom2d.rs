use crate::field::{ScalarField, OO};
use crate::grid::Grid;
use crate::initdata::{RadialProfile, SizeConstants};
use crate::norms::{cal_hk_norm, linf_norm};
use crate::ops::{op_l, tail_log_cumulative};
use crate::report::{CheckResult, VerificationReport};
use crate::CoreError;
use ndarray::Array1;
use std::sync::Arc;

// the 2d reduced model: I(t,R) accumulates the tail operator applied to the
// explicitly solved vorticity angle profile, closing into the scalar
// integro-differential equation dI/dt = 4 int_R^inf (g0(s)/s) h(I(s)/a) ds,
// h(x) = e^-x / (1+e^-x)^2. everything downstream (g, eta, xi, omega) is an
// explicit functional of I.

pub const C1: f64 = 1.0;
pub const C2: f64 = 4.0;

// h is even, h(0) = 1/4, and e^-x <= 4h(x) <= 4e^-x for x >= 0
pub fn sigmoid_kernel(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub struct LomShared {
    pub grid: Arc<Grid>,
    pub alpha: f64,
    pub g0: Array1<f64>,
    pub eta0: Array1<f64>,
    pub eta0_rderiv: Array1<f64>,
    // G0(R) = int_R^inf g0/s ds
    pub g0_tail: Array1<f64>,
    pub g0_linf: f64,
    pub eta0_linf: f64,
    pub n_times: usize,
}

pub struct LomState2d {
    pub shared: Arc<LomShared>,
    pub t: f64,
    pub i_vals: Array1<f64>,
    // int_0^t exp(I(tau,R)/2a) dtau, trapezoid over the stored snapshots
    pub int_exp: Array1<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct NormRecord {
    pub t: f64,
    pub i_max: f64,
    pub eta_linf: f64,
    pub xi_linf: f64,
    pub g_linf: f64,
    pub omega_app_hn: f64,
    // worst absolute slack of I against the two bracket sides, over R
    pub bracket_lower_margin: f64,
    pub bracket_upper_margin: f64,
}

pub struct LomTrajectory {
    pub shared: Arc<LomShared>,
    pub states: Vec<LomState2d>,
    pub norms: Vec<NormRecord>,
    pub n_h: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum XiMode {
    ExplicitZeroData,
    Transported,
}

fn rhs(shared: &LomShared, i_vals: &Array1<f64>) -> Result<Array1<f64>, CoreError> {
    let alpha = shared.alpha;
    let integrand = Array1::from_iter(
        (0..shared.grid.n_r()).map(|i| shared.g0[i] * sigmoid_kernel(i_vals[i] / alpha)),
    );
    let mut out = tail_log_cumulative(&shared.grid, &integrand)?;
    out.mapv_inplace(|v| 4.0 * v);
    Ok(out)
}

pub fn evolve_i(
    grid: Arc<Grid>,
    g0: &RadialProfile,
    eta0: &RadialProfile,
    alpha: f64,
    times: &[f64],
    n_h: usize,
) -> Result<LomTrajectory, CoreError> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(CoreError::InvalidParam("times must start at 0 with at least 2 entries".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(CoreError::InvalidParam("times must be strictly increasing".into()));
        }
    }
    let g0_s = g0.sample(&grid);
    let eta0_s = eta0.sample(&grid);
    let g0_tail = tail_log_cumulative(&grid, &g0_s)?;
    let g0_linf = g0_s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail_linf = g0_tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let shared = Arc::new(LomShared {
        alpha,
        g0: g0_s,
        eta0: eta0_s.clone(),
        eta0_rderiv: eta0.sample_r_deriv(&grid),
        g0_tail,
        g0_linf,
        eta0_linf: eta0_s.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        n_times: times.len(),
        grid,
    });
    // stiff scale: internal steps no larger than alpha/(10 |G0|_inf)
    let dt_max = if tail_linf > 0.0 { alpha / (10.0 * tail_linf) } else { f64::INFINITY };
    let mut i_vals: Array1<f64> = Array1::zeros(shared.grid.n_r());
    let mut int_exp: Array1<f64> = Array1::zeros(shared.grid.n_r());
    let mut states = vec![LomState2d {
        shared: shared.clone(),
        t: 0.0,
        i_vals: i_vals.clone(),
        int_exp: int_exp.clone(),
    }];
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n_sub = (span / dt_max).ceil().max(1.0);
        if n_sub > 1e7 {
            return Err(CoreError::InvalidParam(format!(
                "interval [{}, {}] needs {n_sub} substeps at dt <= {dt_max:.3e}",
                w[0], w[1]
            )));
        }
        let dt = span / n_sub;
        for _ in 0..n_sub as usize {
            let k1 = rhs(&shared, &i_vals)?;
            let k2 = rhs(&shared, &(&i_vals + &(&k1 * (dt / 2.0))))?;
            let k3 = rhs(&shared, &(&i_vals + &(&k2 * (dt / 2.0))))?;
            let k4 = rhs(&shared, &(&i_vals + &(&k3 * dt)))?;
            i_vals = &i_vals + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0));
        }
        // trapezoid accumulation of int exp(I/2a) over snapshot boundaries
        let prev = &states.last().unwrap().i_vals;
        for i in 0..shared.grid.n_r() {
            let e_prev = (prev[i] / (2.0 * alpha)).exp();
            let e_new = (i_vals[i] / (2.0 * alpha)).exp();
            int_exp[i] += 0.5 * (e_prev + e_new) * span;
        }
        let i_over = i_vals.iter().cloned().fold(0.0f64, f64::max) / (2.0 * alpha);
        if i_over > 700.0 {
            return Err(CoreError::ExponentOverflow {
                what: "I/(2 alpha)".into(),
                value: i_over,
                limit: 700.0,
                r: 0.0,
            });
        }
        states.push(LomState2d {
            shared: shared.clone(),
            t: w[1],
            i_vals: i_vals.clone(),
            int_exp: int_exp.clone(),
        });
    }
    let norms = states.iter().map(|s| norm_record(s, n_h)).collect();
    Ok(LomTrajectory { shared, states, norms, n_h })
}

// g(t) = g0(R) 2 sin(b) cos(b) u / (cos^2 b + sin^2 b u^2), u = exp(-I/a);
// at t=0 this is g0 sin(2b), and the angular factor never exceeds 1
pub fn eval_g(state: &LomState2d) -> ScalarField {
    let g = &state.shared.grid;
    let alpha = state.shared.alpha;
    let mut vals = ndarray::Array2::zeros((g.n_r(), g.n_beta()));
    for i in 0..g.n_r() {
        let u = (-state.i_vals[i] / alpha).exp();
        for j in 0..g.n_beta() {
            let (s, c) = g.beta[j].sin_cos();
            vals[[i, j]] = state.shared.g0[i] * 2.0 * s * c * u / (c * c + s * s * u * u);
        }
    }
    ScalarField::from_comp(g.clone().into(), OO, vals)
}

// eta(t) = eta0(R) exp(I/2a), radial
pub fn eval_eta_app(state: &LomState2d) -> Result<ScalarField, CoreError> {
    let g = &state.shared.grid;
    let alpha = state.shared.alpha;
    let mut prof = Array1::zeros(g.n_r());
    for i in 0..g.n_r() {
        let x = state.i_vals[i] / (2.0 * alpha);
        if x > 700.0 {
            return Err(CoreError::ExponentOverflow {
                what: "I/(2 alpha)".into(),
                value: x,
                limit: 700.0,
                r: g.r[i],
            });
        }
        prof[i] = state.shared.eta0[i] * x.exp();
    }
    Ok(ScalarField::from_radial(g.clone().into(), &prof))
}

// xi(t): explicit zero-data form 1 - exp(-I/2a) (radial), or the
// characteristic solution for the gradient-consistent initial xi
pub fn eval_xi_app(state: &LomState2d, mode: XiMode) -> ScalarField {
    let g = &state.shared.grid;
    let alpha = state.shared.alpha;
    let radial = Array1::from_iter(
        (0..g.n_r()).map(|i| 1.0 - (-state.i_vals[i] / (2.0 * alpha)).exp()),
    );
    let mut out = ScalarField::from_radial(g.clone().into(), &radial);
    if mode == XiMode::Transported {
        // xi0 = (a/2) R eta0' sin(2b) carried back along the beta flow
        // (tan b0 = tan b exp(-I/a)) and damped by exp(-I/2a)
        let mut vals = ndarray::Array2::zeros((g.n_r(), g.n_beta()));
        for i in 0..g.n_r() {
            let w = (-state.i_vals[i] / alpha).exp();
            let damp = (-state.i_vals[i] / (2.0 * alpha)).exp();
            let amp = 0.5 * alpha * state.shared.eta0_rderiv[i];
            for j in 0..g.n_beta() {
                let (s, c) = g.beta[j].sin_cos();
                let sin2b0 = 2.0 * s * c * w / (c * c + s * s * w * w);
                vals[[i, j]] = amp * sin2b0 * damp;
            }
        }
        out = out.add(&ScalarField::from_comp(g.clone().into(), OO, vals));
    }
    out
}

// omega(t) = g(t) + eta0(R) int_0^t exp(I/2a) dtau
pub fn eval_omega_app(state: &LomState2d) -> Result<ScalarField, CoreError> {
    if state.shared.n_times < 32 {
        return Err(CoreError::InvalidParam(format!(
            "omega reconstruction needs >= 32 stored times, trajectory has {}",
            state.shared.n_times
        )));
    }
    for v in state.int_exp.iter() {
        if !v.is_finite() {
            return Err(CoreError::ExponentOverflow {
                what: "int exp(I/2 alpha)".into(),
                value: *v,
                limit: 700.0,
                r: 0.0,
            });
        }
    }
    let radial = Array1::from_iter(
        (0..state.shared.grid.n_r()).map(|i| state.shared.eta0[i] * state.int_exp[i]),
    );
    let radial_part = ScalarField::from_radial(state.shared.grid.clone().into(), &radial);
    Ok(eval_g(state).add(&radial_part))
}

pub fn t_star(alpha: f64, c_n1: f64) -> Result<f64, CoreError> {
    if !(alpha > 0.0 && alpha < (-1.0f64).exp()) {
        return Err(CoreError::InvalidParam(format!("alpha = {alpha} not below 1/e")));
    }
    if !(c_n1 > 0.0) {
        return Err(CoreError::InvalidParam(format!("c_n1 = {c_n1} not positive")));
    }
    Ok(alpha * alpha.ln().abs().ln() / (4.0 * c_n1))
}

fn norm_record(state: &LomState2d, n_h: usize) -> NormRecord {
    let sh = &state.shared;
    let alpha = sh.alpha;
    let n = sh.grid.n_r();
    let mut i_max = 0.0f64;
    let mut eta_linf = 0.0f64;
    let mut xi_linf = 0.0f64;
    for i in 0..n {
        i_max = i_max.max(state.i_vals[i]);
        eta_linf = eta_linf.max((sh.eta0[i] * (state.i_vals[i] / (2.0 * alpha)).exp()).abs());
        xi_linf = xi_linf.max((1.0 - (-state.i_vals[i] / (2.0 * alpha)).exp()).abs());
    }
    let (mut low, mut up) = (f64::INFINITY, f64::INFINITY);
    for i in 0..n {
        let g0t = sh.g0_tail[i];
        if g0t <= 0.0 {
            continue;
        }
        let lower = (2.0 * alpha / C2) * (1.0 + (C2 * state.t / (2.0 * alpha)) * g0t).ln();
        let upper = (2.0 * alpha / C1) * (1.0 + (C1 * state.t / (2.0 * alpha)) * g0t).ln();
        low = low.min(state.i_vals[i] - lower);
        up = up.min(upper - state.i_vals[i]);
    }
    if !low.is_finite() {
        low = 0.0;
        up = 0.0;
    }
    let g_field = eval_g(state);
    let omega_hn = match eval_omega_app(state) {
        Ok(f) => cal_hk_norm(&f, n_h),
        Err(_) => f64::NAN,
    };
    NormRecord {
        t: state.t,
        i_max,
        eta_linf,
        xi_linf,
        g_linf: linf_norm(&g_field),
        omega_app_hn: omega_hn,
        bracket_lower_margin: low,
        bracket_upper_margin: up,
    }
}

impl LomTrajectory {
    // debug corruption: scale the accumulated I (and its exp integral) and
    // refresh the derived norm records
    pub fn corrupt_i(&mut self, factor: f64) {
        for s in self.states.iter_mut() {
            s.i_vals.mapv_inplace(|v| factor * v);
            s.int_exp.mapv_inplace(|v| factor * v);
        }
        let n_h = self.n_h;
        self.norms = self.states.iter().map(|s| norm_record(s, n_h)).collect();
    }

    pub fn final_state(&self) -> &LomState2d {
        self.states.last().unwrap()
    }
}

// re-insert the explicit g into the tail operator and integrate in time; the
// result must reproduce the stored I up to time-quadrature error
pub fn closed_loop_residual(traj: &LomTrajectory) -> Result<f64, CoreError> {
    let n = traj.shared.grid.n_r();
    let mut acc: Array1<f64> = Array1::zeros(n);
    let mut prev_l: Option<Array1<f64>> = None;
    let mut worst = 0.0f64;
    let i_scale = traj
        .states
        .last()
        .unwrap()
        .i_vals
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut prev_t = 0.0;
    for state in traj.states.iter() {
        let l_now = op_l(&eval_g(state))?;
        if let Some(lp) = prev_l {
            let dt = state.t - prev_t;
            for i in 0..n {
                acc[i] += 0.5 * (lp[i] + l_now[i]) * dt;
            }
        }
        for i in 0..n {
            worst = worst.max((acc[i] - state.i_vals[i]).abs());
        }
        prev_t = state.t;
        prev_l = Some(l_now);
    }
    Ok(worst / i_scale)
}

pub fn check_growth_bounds(traj: &LomTrajectory, consts: &SizeConstants) -> VerificationReport {
    let sh = &traj.shared;
    let alpha = sh.alpha;
    let mut report = VerificationReport::new("lom2d-growth-bounds");
    report.echo("alpha", format!("{alpha}"));
    report.echo("c_k1", format!("{}", consts.c_k1));
    let slack = 1e-3;

    // c0 = sup of G0 on supp g0, c_star = G0 at the eta0 maximizer
    let mut c0 = 0.0f64;
    for i in 0..sh.grid.n_r() {
        if sh.g0[i] != 0.0 {
            c0 = c0.max(sh.g0_tail[i]);
        }
    }
    let i_star = (0..sh.grid.n_r())
        .max_by(|&a, &b| sh.eta0[a].abs().partial_cmp(&sh.eta0[b].abs()).unwrap())
        .unwrap();
    let c_star = sh.g0_tail[i_star];

    // bracket sides, relative to the running size of I
    let mut worst_low = f64::INFINITY;
    let mut worst_up = f64::INFINITY;
    let mut worst_wide = f64::INFINITY;
    for (state, rec) in traj.states.iter().zip(traj.norms.iter()) {
        let scale = rec.i_max.max(1e-30);
        worst_low = worst_low.min(rec.bracket_lower_margin / scale);
        worst_up = worst_up.min(rec.bracket_upper_margin / scale);
        for i in 0..sh.grid.n_r() {
            if sh.g0_tail[i] <= 0.0 {
                continue;
            }
            let wide = (2.0 * alpha * C2 / C1)
                * (1.0 + (C1 * state.t / (2.0 * alpha)) * sh.g0_tail[i]).ln();
            worst_wide = worst_wide.min((wide - state.i_vals[i]) / scale);
        }
    }
    if !worst_low.is_finite() {
        worst_low = 0.0;
        worst_up = 0.0;
        worst_wide = 0.0;
    }
    report.push(CheckResult::ge(
        "i-bracket-lower",
        "I(t,R) >= (2a/c2) log(1 + (c2 t/2a) G0(R)), c2 = 4",
        worst_low,
        0.0,
        slack,
    ));
    report.push(CheckResult::ge(
        "i-bracket-upper-printed",
        "I(t,R) <= (2a/c1) log(1 + (c1 t/2a) G0(R)), c1 = 1",
        worst_up,
        0.0,
        slack,
    ));
    report.push(CheckResult::ge(
        "i-bracket-upper-widened",
        "I(t,R) <= (2a c2/c1) log(1 + (c1 t/2a) G0(R))",
        worst_wide,
        0.0,
        slack,
    ));

    // inflation floors on |eta|/|eta0|
    let t_final = traj.states.last().unwrap().t;
    let ratio_final = traj.norms.last().unwrap().eta_linf / sh.eta0_linf.max(1e-300);
    let floor_c0 = (1.0 + (C2 * t_final / (2.0 * alpha)) * c0).powf(1.0 / C2);
    report.push(CheckResult::ge(
        "eta-floor-c0",
        "|eta(t)|/|eta0| >= (1 + (c2 t/2a) C0)^(1/c2), C0 = sup G0 on supp g0, at t = t_end",
        ratio_final,
        floor_c0,
        slack * floor_c0,
    ));
    let mut worst_attained = f64::INFINITY;
    for rec in traj.norms.iter() {
        let floor = (1.0 + (C2 * rec.t / (2.0 * alpha)) * c_star).powf(1.0 / C2);
        worst_attained = worst_attained.min(rec.eta_linf / sh.eta0_linf.max(1e-300) - floor);
    }
    report.push(CheckResult::ge(
        "eta-floor-attained",
        "|eta(t)|/|eta0| >= (1 + (c2 t/2a) G0(R*))^(1/c2), R* the eta0 maximizer, all t",
        worst_attained,
        0.0,
        slack,
    ));

    // ceilings
    let g_worst = traj.norms.iter().fold(0.0f64, |m, r| m.max(r.g_linf));
    report.push(CheckResult::le(
        "g-ceiling",
        "|g(t)|_inf <= |g0|_inf, all t",
        g_worst,
        sh.g0_linf,
        1e-14 * sh.g0_linf.max(1.0),
    ));
    let xi_worst = traj.norms.iter().fold(0.0f64, |m, r| m.max(r.xi_linf));
    report.push(CheckResult::le(
        "xi-ceiling",
        "|xi(t)|_inf < 3, all t",
        xi_worst,
        3.0,
        0.0,
    ));
    let mut c0_inf = f64::INFINITY;
    for i in 0..sh.grid.n_r() {
        if sh.g0[i] != 0.0 {
            c0_inf = c0_inf.min(sh.g0_tail[i]);
        }
    }
    if !c0_inf.is_finite() {
        c0_inf = 0.0;
    }
    let xi_refined = 1.0 + (1.0 + (C2 * t_final / (2.0 * alpha)) * c0_inf).powf(-1.0 / C2);
    report.push(CheckResult::le(
        "xi-refined-ceiling",
        "|xi(t)|_inf <= 1 + (1 + (c2 t/2a) inf G0)^(-1/c2)",
        xi_worst,
        xi_refined,
        0.0,
    ));

    // omega stays bounded by |g| plus the integrated inflation envelope
    if sh.n_times >= 32 {
        let mut worst_omega = f64::NEG_INFINITY;
        for (state, rec) in traj.states.iter().zip(traj.norms.iter()) {
            let envelope = if c0 < 1e-14 {
                state.t
            } else {
                (2.0 * alpha / (c0 * (1.0 + C2)))
                    * ((1.0 + (state.t / (2.0 * alpha)) * c0 * C2).powf((C2 + 1.0) / C2) - 1.0)
            };
            let omega_linf = match eval_omega_app(state) {
                Ok(f) => linf_norm(&f),
                Err(_) => f64::NAN,
            };
            worst_omega = worst_omega.max(omega_linf - rec.g_linf - envelope);
        }
        report.push(CheckResult::le(
            "omega-ceiling",
            "|omega(t)|_inf <= |g(t)|_inf + (2a/(C0(1+c2)))((1 + (t/2a) C0 c2)^((c2+1)/c2) - 1)",
            worst_omega,
            0.0,
            1e-12,
        ));
    }
    report
}
