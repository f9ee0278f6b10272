use crate::grid::Grid;
use crate::CoreError;
use ndarray::Array1;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Case3d {
    Unset,
    I,
    II,
}

#[derive(Clone, Copy, Debug)]
pub struct DataParams {
    pub delta: f64,
    pub alpha: f64,
    pub k: u32,
    pub case3d: Case3d,
}

impl DataParams {
    pub fn new_2d(alpha: f64, delta: f64, k: u32) -> Result<DataParams, CoreError> {
        let p = DataParams {
            delta,
            alpha,
            k,
            case3d: Case3d::Unset,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn new_3d(alpha: f64, delta: f64, k: u32, case3d: Case3d) -> Result<DataParams, CoreError> {
        if case3d == Case3d::Unset {
            return Err(CoreError::InvalidParam("3d data needs a case".into()));
        }
        if k < 4 {
            return Err(CoreError::InvalidParam(format!("3d data needs k >= 4, got {k}")));
        }
        let p = DataParams {
            delta,
            alpha,
            k,
            case3d,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CoreError::InvalidParam(format!("delta = {} not in (0,1)", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.25) {
            return Err(CoreError::InvalidParam(format!("alpha = {} not in (0, 1/4]", self.alpha)));
        }
        // smallness regime: alpha well below delta
        if self.alpha > self.delta * self.delta {
            return Err(CoreError::InvalidParam(format!(
                "alpha = {} exceeds delta^2 = {}",
                self.alpha,
                self.delta * self.delta
            )));
        }
        if self.k < 3 {
            return Err(CoreError::InvalidParam(format!("k = {} below 3", self.k)));
        }
        Ok(())
    }
}

// the slowly growing size scale log|log alpha|, guarded away from its zero
pub fn loglog(alpha: f64) -> Result<f64, CoreError> {
    let l = alpha.ln().abs().ln();
    if !(l > 1.0) {
        return Err(CoreError::InvalidParam(format!(
            "log|log alpha| = {l} not above 1 (alpha = {alpha})"
        )));
    }
    Ok(l)
}

#[derive(Clone, Copy, Debug)]
pub struct SizeConstants {
    pub l: f64,
    pub c_k: f64,
    pub c_k1: f64,
}

pub fn size_constants(p: &DataParams) -> Result<SizeConstants, CoreError> {
    p.validate()?;
    let l = loglog(p.alpha)?;
    Ok(SizeConstants {
        l,
        c_k: p.delta * l.powf(0.25),
        c_k1: p.delta * l.sqrt(),
    })
}

// a radial profile with an exact analytic first derivative, evaluable at any
// radius so the same data can be laid down on different grids
pub struct RadialProfile {
    value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    deriv: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: (f64, f64),
}

impl RadialProfile {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Self {
        RadialProfile { value: Box::new(value), deriv: Box::new(deriv), support }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    pub fn deriv_at(&self, r: f64) -> f64 {
        (self.deriv)(r)
    }

    pub fn sample(&self, grid: &Grid) -> Array1<f64> {
        grid.r.mapv(|r| self.eval(r))
    }

    // R * d/dR of the profile, on the grid
    pub fn sample_r_deriv(&self, grid: &Grid) -> Array1<f64> {
        grid.r.mapv(|r| r * self.deriv_at(r))
    }
}

fn mollifier(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn mollifier_deriv(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - u * u;
        mollifier(u) * (-2.0 * u / (d * d))
    }
}

// smooth bump, 1 at the center, support exactly [center-width, center+width]
pub fn make_bump(center: f64, width: f64) -> RadialProfile {
    assert!(width > 0.0);
    RadialProfile {
        value: Box::new(move |r| mollifier((r - center) / width)),
        deriv: Box::new(move |r| mollifier_deriv((r - center) / width) / width),
        support: (center - width, center + width),
    }
}

// two-bump profile: a unit-scale bump on [1,3] plus a narrow one of width
// l^{-1/4} near R = 1, amplitude trimmed by l^{(1-k)/4}
pub fn make_eta0_2d(p: &DataParams) -> Result<RadialProfile, CoreError> {
    p.validate()?;
    let l = loglog(p.alpha)?;
    let delta = p.delta;
    let amp2 = l.powf((1.0 - p.k as f64) / 4.0);
    let scale = l.powf(0.25);
    let value = move |r: f64| delta * (mollifier(r - 2.0) + amp2 * mollifier((r - 1.0) * scale - 2.0));
    let deriv = move |r: f64| {
        delta * (mollifier_deriv(r - 2.0) + amp2 * scale * mollifier_deriv((r - 1.0) * scale - 2.0))
    };
    Ok(RadialProfile {
        value: Box::new(value),
        deriv: Box::new(deriv),
        support: (1.0, 3.0_f64.max(1.0 + 3.0 / scale)),
    })
}

pub fn make_g0_2d(p: &DataParams) -> Result<RadialProfile, CoreError> {
    p.validate()?;
    let delta = p.delta;
    Ok(RadialProfile {
        value: Box::new(move |r| delta * mollifier(r - 2.0)),
        deriv: Box::new(move |r| delta * mollifier_deriv(r - 2.0)),
        support: (1.0, 3.0),
    })
}

// sigmoid step built from exp(-1/v): 0 for v <= 0, 1 for v >= 1
fn step(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    let q = (-1.0 / v).exp();
    let qc = (-1.0 / (1.0 - v)).exp();
    q / (q + qc)
}

fn step_deriv(v: f64) -> f64 {
    if v <= 0.0 || v >= 1.0 {
        return 0.0;
    }
    let q = (-1.0 / v).exp();
    let qc = (-1.0 / (1.0 - v)).exp();
    let qp = q / (v * v);
    let qcp = qc / ((1.0 - v) * (1.0 - v));
    (qp * qc + q * qcp) / ((q + qc) * (q + qc))
}

// plateau bump on [0, 1/60], identically 1 on [1/180, 1/90]
fn plateau(u: f64) -> f64 {
    step(u * 180.0) * step((1.0 / 60.0 - u) * 180.0)
}

fn plateau_deriv(u: f64) -> f64 {
    180.0 * step_deriv(u * 180.0) * step((1.0 / 60.0 - u) * 180.0)
        - 180.0 * step(u * 180.0) * step_deriv((1.0 / 60.0 - u) * 180.0)
}

#[derive(Clone, Copy, Debug)]
pub struct SupportMeta {
    // the printed width scale l^{-1/4} and the one actually used for geometry,
    // clamped so the data stays inside the narrow 3d annulus at desk-size alpha
    pub eps_printed: f64,
    pub eps_impl: f64,
    // union of the two supports, in the R coordinate
    pub support_r: (f64, f64),
    // initial support edge S(0)^alpha and the bracket it must sit in
    pub s0_alpha: f64,
    pub bracket: (f64, f64),
}

// 3d family: a narrow eta bump just above R = 1/8 and a plateau bump g0 offset
// by eps, signed by the case; amplitudes keep the printed l-factors
pub fn make_data_3d(p: &DataParams) -> Result<(RadialProfile, RadialProfile, SupportMeta), CoreError> {
    if p.case3d == Case3d::Unset {
        return Err(CoreError::InvalidParam("3d data needs a case".into()));
    }
    if p.k < 4 {
        return Err(CoreError::InvalidParam(format!("3d data needs k >= 4, got {}", p.k)));
    }
    p.validate()?;
    let l = loglog(p.alpha)?;
    let eps_printed = l.powf(-0.25);
    let eps_impl = eps_printed.min(1.0 / 120.0);
    let delta = p.delta;
    let amp = delta * l.powf((1.0 - p.k as f64) / 4.0);
    let inv_eps = 1.0 / eps_impl;
    let eta0 = RadialProfile {
        value: Box::new(move |r| amp * mollifier((r - 0.125) * inv_eps - 2.0)),
        deriv: Box::new(move |r| amp * inv_eps * mollifier_deriv((r - 0.125) * inv_eps - 2.0)),
        support: (0.125 + eps_impl, 0.125 + 3.0 * eps_impl),
    };
    let sign = match p.case3d {
        Case3d::I => 1.0,
        Case3d::II => -1.0,
        Case3d::Unset => unreachable!(),
    };
    let off = 0.125 + eps_impl;
    let g0 = RadialProfile {
        value: Box::new(move |r| sign * delta * plateau(r - off)),
        deriv: Box::new(move |r| sign * delta * plateau_deriv(r - off)),
        support: (off, off + 1.0 / 60.0),
    };
    let lo = eta0.support.0.min(g0.support.0);
    let hi = eta0.support.1.max(g0.support.1);
    let meta = SupportMeta {
        eps_printed,
        eps_impl,
        support_r: (lo, hi),
        s0_alpha: hi,
        bracket: (0.125 + eps_impl, 1.0 / 7.0 + eps_impl),
    };
    Ok((g0, eta0, meta))
}
