use crate::field::{ScalarField, OE, OO};
use crate::grid::Grid;
use crate::initdata::{Case3d, RadialProfile, SizeConstants, SupportMeta};
use crate::lom2d::NormRecord;
use crate::norms::{cal_hk_norm, l2_norm, linf_norm};
use crate::ops::{op_l12, tail_log_cumulative};
use crate::report::{CheckResult, VerificationReport};
use crate::CoreError;
use ndarray::{Array1, Array2};
use std::sync::Arc;

// the 3d reduced model: J(t,R) accumulates the sin(2b)cos(b)-weighted tail
// operator applied to the explicit swirl vorticity profile. the angular
// integral of that profile collapses to a one-variable kernel K(J/a), so the
// closure reads dJ/dt = (3/8pi) int_R^inf (g0(s)/s) K(J(s)/a) ds. the sign of
// g0 selects the case: g0 >= 0 drives J up (eta inflates), g0 <= 0 drives J
// down (omega and xi inflate).

// (3/8pi) K(0) with K(0) = pi/2, the initial rate constant
pub const A1: f64 = 3.0 / 16.0;
// (3/8pi) sup K(x) e^{7x/2} = (3/8pi)(16/3), the saturated rate constant
pub const A2: f64 = 2.0 / std::f64::consts::PI;

// max over beta of 2 sin(b) cos^2(b), the angular ceiling of the 3d profile
pub const ANGULAR_MAX: f64 = 0.769800358919501;

pub struct Kernel3d {
    pub x_lo: f64,
    pub x_hi: f64,
    pub h: f64,
    pub k_values: Vec<f64>,
}

// K(x) = int_0^{2pi} 2 sin(b) cos^2(b) e^{-7x/2} (cos^2 b + sin^2 b e^{-6x})^{-3/2}
//        * sin(2b) cos(b) db,
// evaluated in a form that stays in range for either sign of x
pub fn build_kernel(resolution: usize) -> Kernel3d {
    assert!(resolution >= 256, "kernel table needs at least 256 intervals");
    let (x_lo, x_hi) = (-40.0, 120.0);
    let h = (x_hi - x_lo) / resolution as f64;
    let n_q = 16384usize;
    let hb = std::f64::consts::FRAC_PI_2 / n_q as f64;
    // trapezoid weights fold into the numerator once
    let (mut s2s, mut c2s, mut nums) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..=n_q {
        let (s, c) = (j as f64 * hb).sin_cos();
        let (s2, c2) = (s * s, c * c);
        let w = if j == 0 || j == n_q { 0.5 } else { 1.0 };
        s2s.push(s2);
        c2s.push(c2);
        nums.push(w * 4.0 * s2 * c2 * c2);
    }
    let k_values = (0..=resolution)
        .map(|i| {
            let x = x_lo + i as f64 * h;
            let mut acc = 0.0;
            if x >= 0.0 {
                let a = (-3.5 * x).exp();
                let w = (-6.0 * x).exp();
                for j in 0..=n_q {
                    let den = c2s[j] + s2s[j] * w;
                    if den > 0.0 {
                        acc += nums[j] * a / (den * den.sqrt());
                    }
                }
            } else {
                // multiply through by e^{9x} to keep every factor <= 1
                let a = (5.5 * x).exp();
                let w = (6.0 * x).exp();
                for j in 0..=n_q {
                    let den = c2s[j] * w + s2s[j];
                    if den > 0.0 {
                        acc += nums[j] * a / (den * den.sqrt());
                    }
                }
            }
            // the integrand is even about both reflection axes: full circle is
            // four times the quarter
            4.0 * acc * hb
        })
        .collect();
    Kernel3d { x_lo, x_hi, h, k_values }
}

// the default table is deterministic, so build it once per process
static KERNEL_CACHE: std::sync::OnceLock<Arc<Kernel3d>> = std::sync::OnceLock::new();

// 5120 intervals over [-40, 120] puts the nodes on multiples of 1/32
pub fn shared_kernel() -> Arc<Kernel3d> {
    KERNEL_CACHE.get_or_init(|| Arc::new(build_kernel(5120))).clone()
}

impl Kernel3d {
    // catmull-rom through the table, zero outside (both tails decay)
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_lo || x >= self.x_hi {
            return 0.0;
        }
        let u = (x - self.x_lo) / self.h;
        let j = (u.floor() as usize).min(self.k_values.len() - 2);
        let t = u - j as f64;
        let at = |i: i64| {
            let i = i.clamp(0, self.k_values.len() as i64 - 1) as usize;
            self.k_values[i]
        };
        let (p0, p1, p2, p3) = (at(j as i64 - 1), at(j as i64), at(j as i64 + 1), at(j as i64 + 2));
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
    }

    // table extremes over [a, b], endpoints interpolated
    pub fn min_max_on(&self, a: f64, b: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, v) in self.k_values.iter().enumerate() {
            let x = self.x_lo + i as f64 * self.h;
            if x >= a && x <= b {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        for x in [a, b] {
            let v = self.eval(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

pub struct LomShared3d {
    pub grid: Arc<Grid>,
    pub alpha: f64,
    pub case: Case3d,
    pub g0: Array1<f64>,
    pub eta0: Array1<f64>,
    pub eta0_rderiv: Array1<f64>,
    // signed tail integral of g0; negative throughout in case (ii)
    pub g0_tail: Array1<f64>,
    pub kernel: Arc<Kernel3d>,
    pub g0_linf: f64,
    pub n_times: usize,
    pub n_h: usize,
}

pub struct LomState3d {
    pub shared: Arc<LomShared3d>,
    pub t: f64,
    pub j_vals: Array1<f64>,
    // int_0^t max_R |dJ/dt| dtau, the support drift budget
    pub m_int: f64,
}

pub struct LomTrajectory3d {
    pub shared: Arc<LomShared3d>,
    pub states: Vec<LomState3d>,
    pub norms: Vec<NormRecord>,
}

fn rhs_j(shared: &LomShared3d, j_vals: &Array1<f64>) -> Result<Array1<f64>, CoreError> {
    let alpha = shared.alpha;
    let integrand = Array1::from_iter(
        (0..shared.grid.n_r()).map(|i| shared.g0[i] * shared.kernel.eval(j_vals[i] / alpha)),
    );
    let mut out = tail_log_cumulative(&shared.grid, &integrand)?;
    out.mapv_inplace(|v| 3.0 / (8.0 * std::f64::consts::PI) * v);
    Ok(out)
}

pub fn evolve_j(
    grid: Arc<Grid>,
    g0: &RadialProfile,
    eta0: &RadialProfile,
    alpha: f64,
    case: Case3d,
    times: &[f64],
    n_h: usize,
) -> Result<LomTrajectory3d, CoreError> {
    if case == Case3d::Unset {
        return Err(CoreError::InvalidParam("3d evolution needs a case".into()));
    }
    if times.len() < 2 || times[0] != 0.0 {
        return Err(CoreError::InvalidParam("times must start at 0 with at least 2 entries".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(CoreError::InvalidParam("times must be strictly increasing".into()));
        }
    }
    let g0_s = g0.sample(&grid);
    match case {
        Case3d::I if g0_s.iter().any(|v| *v < 0.0) => {
            return Err(CoreError::InvalidParam("case (i) needs g0 >= 0".into()));
        }
        Case3d::II if g0_s.iter().any(|v| *v > 0.0) => {
            return Err(CoreError::InvalidParam("case (ii) needs g0 <= 0".into()));
        }
        _ => {}
    }
    let eta0_s = eta0.sample(&grid);
    let g0_tail = tail_log_cumulative(&grid, &g0_s)?;
    let tail_linf = g0_tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let shared = Arc::new(LomShared3d {
        alpha,
        case,
        g0_linf: g0_s.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        g0: g0_s,
        eta0: eta0_s,
        eta0_rderiv: eta0.sample_r_deriv(&grid),
        g0_tail,
        kernel: shared_kernel(),
        n_times: times.len(),
        n_h,
        grid,
    });
    let dt_max = if tail_linf > 0.0 { alpha / (10.0 * tail_linf) } else { f64::INFINITY };
    let mut j_vals: Array1<f64> = Array1::zeros(shared.grid.n_r());
    let mut m_int = 0.0;
    let mut states = vec![LomState3d {
        shared: shared.clone(),
        t: 0.0,
        j_vals: j_vals.clone(),
        m_int,
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
            let k1 = rhs_j(&shared, &j_vals)?;
            let k2 = rhs_j(&shared, &(&j_vals + &(&k1 * (dt / 2.0))))?;
            let k3 = rhs_j(&shared, &(&j_vals + &(&k2 * (dt / 2.0))))?;
            let k4 = rhs_j(&shared, &(&j_vals + &(&k3 * dt)))?;
            let m1 = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let m4 = k4.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            m_int += 0.5 * (m1 + m4) * dt;
            j_vals = &j_vals + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0));
        }
        let j_over = j_vals.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 3.0 / alpha;
        if j_over > 700.0 {
            return Err(CoreError::ExponentOverflow {
                what: "3 J / alpha".into(),
                value: j_over,
                limit: 700.0,
                r: 0.0,
            });
        }
        states.push(LomState3d {
            shared: shared.clone(),
            t: w[1],
            j_vals: j_vals.clone(),
            m_int,
        });
    }
    let norms = states.iter().map(record3d).collect();
    Ok(LomTrajectory3d { shared, states, norms })
}

// the three fields of the state: vorticity angle profile g, eta = eta0-shape
// times exp(3J/a), xi = xi0-shape times exp(-J/a). in case (i) eta0 is radial
// and xi0 carries the sin(2b) gradient shape; case (ii) swaps them.
pub fn eval_lom3d_fields(
    state: &LomState3d,
) -> Result<(ScalarField, ScalarField, ScalarField), CoreError> {
    let sh = &state.shared;
    let g = &sh.grid;
    let alpha = sh.alpha;
    for i in 0..g.n_r() {
        let x = state.j_vals[i].abs() * 3.0 / alpha;
        if x > 700.0 {
            return Err(CoreError::ExponentOverflow {
                what: "3 J / alpha".into(),
                value: x,
                limit: 700.0,
                r: g.r[i],
            });
        }
    }
    let mut g_vals = Array2::zeros((g.n_r(), g.n_beta()));
    for i in 0..g.n_r() {
        if sh.g0[i] == 0.0 {
            continue;
        }
        let x = state.j_vals[i] / alpha;
        for j in 0..g.n_beta() {
            let (s, c) = g.beta[j].sin_cos();
            let (s2, c2) = (s * s, c * c);
            let v = if x >= 0.0 {
                // powers of e^{-x/2} <= 1
                let v1 = (-0.5 * x).exp();
                let v7 = v1.powi(7);
                let v12 = v1.powi(12);
                let den = c2 + s2 * v12;
                if den == 0.0 {
                    0.0
                } else {
                    2.0 * s * c2 * v7 / (den * den.sqrt())
                }
            } else {
                // powers of e^{x/2} <= 1
                let v1 = (0.5 * x).exp();
                let v11 = v1.powi(11);
                let v12 = v1.powi(12);
                let den = c2 * v12 + s2;
                if den == 0.0 {
                    0.0
                } else {
                    2.0 * s * c2 * v11 / (den * den.sqrt())
                }
            };
            g_vals[[i, j]] = sh.g0[i] * v;
        }
    }
    // 2 sin(b) cos^2(b) is odd about b = 0 and even about b = pi/2
    let g_field = ScalarField::from_comp(g.clone(), OE, g_vals);

    let grow3 = Array1::from_iter(
        (0..g.n_r()).map(|i| (3.0 * state.j_vals[i] / alpha).exp()),
    );
    let decay1 = Array1::from_iter(
        (0..g.n_r()).map(|i| (-state.j_vals[i] / alpha).exp()),
    );
    let radial_shape = &sh.eta0;
    let grad_amp = Array1::from_iter(
        (0..g.n_r()).map(|i| 0.5 * alpha * sh.eta0_rderiv[i]),
    );
    let sin2b = g.beta.mapv(|b| (2.0 * b).sin());
    let make_radial = |amp: Array1<f64>| ScalarField::from_radial(g.clone(), &amp);
    let make_grad = |amp: Array1<f64>| {
        let mut vals = Array2::zeros((g.n_r(), g.n_beta()));
        for i in 0..g.n_r() {
            for j in 0..g.n_beta() {
                vals[[i, j]] = amp[i] * sin2b[j];
            }
        }
        ScalarField::from_comp(g.clone(), OO, vals)
    };
    let (eta_field, xi_field) = match sh.case {
        Case3d::I => (
            make_radial(radial_shape * &grow3),
            make_grad(&grad_amp * &decay1),
        ),
        Case3d::II => (
            make_grad(&grad_amp * &grow3),
            make_radial(radial_shape * &decay1),
        ),
        Case3d::Unset => unreachable!(),
    };
    Ok((g_field, eta_field, xi_field))
}

fn record3d(state: &LomState3d) -> NormRecord {
    let sh = &state.shared;
    let alpha = sh.alpha;
    let n = sh.grid.n_r();
    let j_ext = match sh.case {
        Case3d::II => state.j_vals.iter().cloned().fold(0.0f64, f64::min),
        _ => state.j_vals.iter().cloned().fold(0.0f64, f64::max),
    };
    let max_s2b = sh
        .grid
        .beta
        .iter()
        .fold(0.0f64, |m, b| m.max((2.0 * b).sin().abs()));
    let (mut eta_linf, mut xi_linf) = (0.0f64, 0.0f64);
    for i in 0..n {
        let grow3 = (3.0 * state.j_vals[i] / alpha).exp();
        let decay1 = (-state.j_vals[i] / alpha).exp();
        let grad = (0.5 * alpha * sh.eta0_rderiv[i]).abs() * max_s2b;
        match sh.case {
            Case3d::II => {
                eta_linf = eta_linf.max(grad * grow3);
                xi_linf = xi_linf.max((sh.eta0[i] * decay1).abs());
            }
            _ => {
                eta_linf = eta_linf.max((sh.eta0[i] * grow3).abs());
                xi_linf = xi_linf.max(grad * decay1);
            }
        }
    }
    // kernel-derived bracket margins on |J|
    let (mut low, mut up) = (f64::INFINITY, f64::INFINITY);
    let x_reached = state.j_vals.iter().fold(0.0f64, |m, v| m.max(v.abs())) / alpha;
    let (kmin, kmax) = match sh.case {
        Case3d::II => sh.kernel.min_max_on(-x_reached, 0.0),
        _ => (0.0, 0.0),
    };
    let c38 = 3.0 / (8.0 * std::f64::consts::PI);
    for i in 0..n {
        let gt = sh.g0_tail[i].abs();
        if gt <= 0.0 {
            continue;
        }
        let jv = state.j_vals[i].abs();
        let (lo_bound, up_bound) = match sh.case {
            Case3d::II => (c38 * kmin * gt * state.t, c38 * kmax * gt * state.t),
            _ => (
                (2.0 * alpha / 7.0) * (1.0 + (7.0 * A1 / (2.0 * alpha)) * gt * state.t).ln(),
                A2 * gt * state.t,
            ),
        };
        low = low.min(jv - lo_bound);
        up = up.min(up_bound - jv);
    }
    if !low.is_finite() {
        low = 0.0;
        up = 0.0;
    }
    let (g_field, omega_hn) = match eval_lom3d_fields(state) {
        Ok((gf, _, _)) => {
            let hn = cal_hk_norm(&gf, sh.n_h);
            (Some(gf), hn)
        }
        Err(_) => (None, f64::NAN),
    };
    NormRecord {
        t: state.t,
        i_max: j_ext,
        eta_linf,
        xi_linf,
        g_linf: g_field.as_ref().map(linf_norm).unwrap_or(f64::NAN),
        omega_app_hn: omega_hn,
        bracket_lower_margin: low,
        bracket_upper_margin: up,
    }
}

impl LomTrajectory3d {
    pub fn corrupt_j(&mut self, factor: f64) {
        for s in self.states.iter_mut() {
            s.j_vals.mapv_inplace(|v| factor * v);
        }
        self.norms = self.states.iter().map(record3d).collect();
    }

    pub fn final_state(&self) -> &LomState3d {
        self.states.last().unwrap()
    }
}

// envelope of the support radius to the alpha power: the radial velocity of
// the angular-mode flow is bounded by max_R |L12|/2 in log R, so S^alpha
// drifts by at most exp(+-alpha m(t)/2)
pub fn evolve_support(traj: &LomTrajectory3d, s0_alpha: f64) -> Vec<(f64, f64, f64)> {
    let alpha = traj.shared.alpha;
    traj.states
        .iter()
        .map(|s| {
            let d = (0.5 * alpha * s.m_int).exp();
            (s.t, s0_alpha / d, s0_alpha * d)
        })
        .collect()
}

// re-insert the explicit profile into the quadrature-based weighted tail
// operator and integrate in time; must reproduce the kernel-closure J
pub fn closed_loop_residual_3d(traj: &LomTrajectory3d) -> Result<f64, CoreError> {
    let n = traj.shared.grid.n_r();
    let mut acc: Array1<f64> = Array1::zeros(n);
    let mut prev_l: Option<Array1<f64>> = None;
    let mut prev_t = 0.0;
    let mut worst = 0.0f64;
    let j_scale = traj
        .final_state()
        .j_vals
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for state in traj.states.iter() {
        let (g_field, _, _) = eval_lom3d_fields(state)?;
        let l_now = op_l12(&g_field)?;
        if let Some(lp) = prev_l {
            let dt = state.t - prev_t;
            for i in 0..n {
                acc[i] += 0.5 * (lp[i] + l_now[i]) * dt;
            }
        }
        for i in 0..n {
            worst = worst.max((acc[i] - state.j_vals[i]).abs());
        }
        prev_t = state.t;
        prev_l = Some(l_now);
    }
    Ok(worst / j_scale)
}

pub fn check_growth_bounds_3d(
    traj: &LomTrajectory3d,
    consts: &SizeConstants,
    meta: &SupportMeta,
) -> VerificationReport {
    let sh = &traj.shared;
    let alpha = sh.alpha;
    let slack = 1e-3;
    let mut report = VerificationReport::new(match sh.case {
        Case3d::II => "lom3d-growth-bounds-case-ii",
        _ => "lom3d-growth-bounds-case-i",
    });
    report.echo("alpha", format!("{alpha}"));
    report.echo("c_k1", format!("{}", consts.c_k1));

    // scale for relative bracket margins
    let j_scale = traj
        .norms
        .iter()
        .fold(0.0f64, |m, r| m.max(r.i_max.abs()))
        .max(1e-30);
    let mut worst_low = f64::INFINITY;
    let mut worst_up = f64::INFINITY;
    for rec in traj.norms.iter() {
        worst_low = worst_low.min(rec.bracket_lower_margin / j_scale);
        worst_up = worst_up.min(rec.bracket_upper_margin / j_scale);
    }
    if !worst_low.is_finite() {
        worst_low = 0.0;
        worst_up = 0.0;
    }
    let (low_stmt, up_stmt) = match sh.case {
        Case3d::II => (
            "|J(t,R)| >= (3/8pi) kmin |G0(R)| t, kmin = min K over the reached range",
            "|J(t,R)| <= (3/8pi) kmax |G0(R)| t, kmax = max K over the reached range",
        ),
        _ => (
            "J(t,R) >= (2a/7) log(1 + (7/2a)(3/16) G0(R) t)",
            "J(t,R) <= (2/pi) G0(R) t",
        ),
    };
    report.push(CheckResult::ge("j-bracket-lower-kernel", low_stmt, worst_low, 0.0, slack));
    report.push(CheckResult::ge("j-bracket-upper-kernel", up_stmt, worst_up, 0.0, slack));

    // C0 and the tail value at the relevant maximizer
    let mut c0 = 0.0f64;
    for i in 0..sh.grid.n_r() {
        if sh.g0[i] != 0.0 {
            c0 = c0.max(sh.g0_tail[i].abs());
        }
    }
    let t_final = traj.final_state().t;
    let rec_final = traj.norms.last().unwrap();
    let rec0 = traj.norms.first().unwrap();

    match sh.case {
        Case3d::II => {
            // omega inflates: the angular sup grows exactly like e^{|J|/2a} at
            // the g0 maximizer
            let i_star = (0..sh.grid.n_r())
                .max_by(|&a, &b| sh.g0[a].abs().partial_cmp(&sh.g0[b].abs()).unwrap())
                .unwrap();
            let g_star = sh.g0_tail[i_star].abs();
            let ratio_omega = rec_final.g_linf / rec0.g_linf.max(1e-300);
            let floor_printed = (1.0 + (4.0 * t_final / (2.0 * alpha)) * c0).powf(0.25);
            report.push(CheckResult::ge(
                "omega-floor-printed",
                "|omega(t_end)|/|omega(0)| >= (1 + (c2 t/2a) C0)^(1/c2), c2 = 4",
                ratio_omega,
                floor_printed,
                slack * floor_printed,
            ));
            let x_reached = traj
                .final_state()
                .j_vals
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                / alpha;
            let (kmin, _) = sh.kernel.min_max_on(-x_reached, 0.0);
            let c38 = 3.0 / (8.0 * std::f64::consts::PI);
            let mut worst_att_omega = f64::INFINITY;
            let mut worst_att_xi = f64::INFINITY;
            let i_eta = (0..sh.grid.n_r())
                .max_by(|&a, &b| sh.eta0[a].abs().partial_cmp(&sh.eta0[b].abs()).unwrap())
                .unwrap();
            let g_eta = sh.g0_tail[i_eta].abs();
            for rec in traj.norms.iter() {
                let j_low_star = c38 * kmin * g_star * rec.t;
                let fl = (j_low_star / (2.0 * alpha)).exp();
                worst_att_omega =
                    worst_att_omega.min(rec.g_linf / rec0.g_linf.max(1e-300) - fl);
                let j_low_eta = c38 * kmin * g_eta * rec.t;
                let fx = (j_low_eta / alpha).exp();
                worst_att_xi =
                    worst_att_xi.min(rec.xi_linf / rec0.xi_linf.max(1e-300) - fx);
            }
            report.push(CheckResult::ge(
                "omega-floor-attained",
                "|omega(t)|/|omega(0)| >= exp((3/8pi) kmin |G0(R**)| t / 2a), R** the g0 maximizer",
                worst_att_omega,
                0.0,
                slack,
            ));
            let ratio_xi = rec_final.xi_linf / rec0.xi_linf.max(1e-300);
            let floor_xi_printed = (1.0 + (4.0 * t_final / (2.0 * alpha)) * c0).powf(0.25);
            report.push(CheckResult::ge(
                "xi-floor-printed",
                "|xi(t_end)|/|xi(0)| >= (1 + (c2 t/2a) C0)^(1/c2), c2 = 4",
                ratio_xi,
                floor_xi_printed,
                slack * floor_xi_printed,
            ));
            report.push(CheckResult::ge(
                "xi-floor-attained",
                "|xi(t)|/|xi(0)| >= exp((3/8pi) kmin |G0(R*)| t / a), R* the eta0 maximizer",
                worst_att_xi,
                0.0,
                slack,
            ));
            let eta_worst = traj.norms.iter().fold(0.0f64, |m, r| m.max(r.eta_linf));
            report.push(CheckResult::le(
                "eta-decays",
                "|eta(t)|_inf <= |eta(0)|_inf, all t",
                eta_worst,
                rec0.eta_linf,
                1e-14 * rec0.eta_linf.max(1.0),
            ));
        }
        _ => {
            // eta inflates
            let ratio_eta = rec_final.eta_linf / rec0.eta_linf.max(1e-300);
            let floor_printed = (1.0 + (4.0 * t_final / (2.0 * alpha)) * c0).powf(0.25);
            report.push(CheckResult::ge(
                "eta-floor-printed",
                "|eta(t_end)|/|eta(0)| >= (1 + (c2 t/2a) C0)^(1/c2), c2 = 4",
                ratio_eta,
                floor_printed,
                slack * floor_printed,
            ));
            let i_star = (0..sh.grid.n_r())
                .max_by(|&a, &b| sh.eta0[a].abs().partial_cmp(&sh.eta0[b].abs()).unwrap())
                .unwrap();
            let g_star = sh.g0_tail[i_star];
            let mut worst_att = f64::INFINITY;
            for rec in traj.norms.iter() {
                let fl = (1.0 + (7.0 * A1 / (2.0 * alpha)) * g_star * rec.t).powf(6.0 / 7.0);
                worst_att = worst_att.min(rec.eta_linf / rec0.eta_linf.max(1e-300) - fl);
            }
            report.push(CheckResult::ge(
                "eta-floor-attained",
                "|eta(t)|/|eta(0)| >= (1 + (7/2a)(3/16) G0(R*) t)^(6/7), R* the eta0 maximizer",
                worst_att,
                0.0,
                slack,
            ));
            // J printed floor form fails: the true initial rate is (3/16) G0,
            // below the G0/2 the printed form would need
            let mut worst_printed = f64::INFINITY;
            for state in traj.states.iter() {
                for i in 0..sh.grid.n_r() {
                    let gt = sh.g0_tail[i];
                    if gt <= 0.0 {
                        continue;
                    }
                    let fl = (alpha / 4.0) * (1.0 + (4.0 * state.t / (2.0 * alpha)) * gt).ln();
                    worst_printed = worst_printed.min((state.j_vals[i] - fl) / j_scale);
                }
            }
            if !worst_printed.is_finite() {
                worst_printed = 0.0;
            }
            report.push(CheckResult::ge(
                "j-printed-floor",
                "J(t,R)/a >= (1/c2) log(1 + (c2 t/2a) G0(R)), c2 = 4",
                worst_printed,
                0.0,
                slack,
            ));
            let omega_worst = traj.norms.iter().fold(0.0f64, |m, r| m.max(r.g_linf));
            report.push(CheckResult::le(
                "omega-angular-ceiling",
                "|omega(t)|_inf <= max(2 sin b cos^2 b) |g0|_inf = (4/(3 sqrt 3)) |g0|_inf",
                omega_worst,
                ANGULAR_MAX * sh.g0_linf,
                1e-14 * sh.g0_linf.max(1.0),
            ));
            let xi_worst = traj.norms.iter().fold(0.0f64, |m, r| m.max(r.xi_linf));
            report.push(CheckResult::le(
                "xi-decays",
                "|xi(t)|_inf <= |xi(0)|_inf, all t",
                xi_worst,
                rec0.xi_linf,
                1e-14 * rec0.xi_linf.max(1.0),
            ));
        }
    }

    // support confinement: printed window and the validity window
    let series = evolve_support(traj, meta.s0_alpha);
    let lo_min = series.iter().fold(f64::INFINITY, |m, s| m.min(s.1));
    let hi_max = series.iter().fold(0.0f64, |m, s| m.max(s.2));
    report.push(CheckResult::ge(
        "support-above-eighth",
        "S(t)^a >= 1/8 on the whole run",
        lo_min,
        0.125,
        0.0,
    ));
    report.push(CheckResult::le(
        "support-below-printed",
        "S(t)^a <= 1/7 + 2 eps on the whole run",
        hi_max,
        1.0 / 7.0 + 2.0 * meta.eps_printed,
        0.0,
    ));
    let window_violation = (0.1 - lo_min).max(hi_max - 1.0 / 6.0);
    report.push(CheckResult::le(
        "support-validity-window",
        "S(t)^a stays inside (1/10, 1/6)",
        window_violation,
        0.0,
        0.0,
    ));

    // mirror invariance of the norm machinery on the final-state fields
    if let Ok((gf, ef, xf)) = eval_lom3d_fields(traj.final_state()) {
        let mut worst_mirror = 0.0f64;
        for f in [&gf, &ef, &xf] {
            let m = f.mirror();
            let scale = cal_hk_norm(f, 2).max(linf_norm(f)).max(1e-300);
            worst_mirror = worst_mirror
                .max((cal_hk_norm(&m, 2) - cal_hk_norm(f, 2)).abs() / scale)
                .max((linf_norm(&m) - linf_norm(f)).abs() / scale)
                .max((l2_norm(&m) - l2_norm(f)).abs() / scale);
        }
        report.push(CheckResult::le(
            "mirror-norm-invariance",
            "reflecting beta -> pi/2 - beta leaves every norm unchanged",
            worst_mirror,
            0.0,
            1e-10,
        ));
    }
    report
}
