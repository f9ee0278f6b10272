use crate::field::{ScalarField, OE};
use crate::grid::Grid;
use crate::initdata::RadialProfile;
use crate::norms::{angular_integral_full, beta_project};
use crate::CoreError;
use ndarray::Array1;

// guard: tail integrals assume the integrand vanishes well before the grid
// edge, otherwise the truncation at R_max is not certified
fn check_support(grid: &Grid, values: &Array1<f64>, what: &str) -> Result<(), CoreError> {
    let limit = grid.r_max() / 2.0;
    for i in 0..grid.n_r() {
        if grid.r[i] >= limit && values[i] != 0.0 {
            return Err(CoreError::SupportTooWide {
                what: what.into(),
                edge: grid.r[i],
                limit,
            });
        }
    }
    Ok(())
}

// G(R) = int_R^inf values(s)/s ds, right-to-left cumulative trapezoid
pub fn tail_log_cumulative(grid: &Grid, values: &Array1<f64>) -> Result<Array1<f64>, CoreError> {
    assert_eq!(values.len(), grid.n_r());
    check_support(grid, values, "tail integrand")?;
    let n = grid.n_r();
    let mut out = Array1::zeros(n);
    for i in (0..n - 1).rev() {
        let seg = 0.5
            * (values[i] / grid.r[i] + values[i + 1] / grid.r[i + 1])
            * (grid.r[i + 1] - grid.r[i]);
        out[i] = out[i + 1] + seg;
    }
    Ok(out)
}

pub fn tail_log_integral(grid: &Grid, f: &RadialProfile) -> Result<Array1<f64>, CoreError> {
    tail_log_cumulative(grid, &f.sample(grid))
}

// L(omega)(R) = (1/pi) int_R^inf int_0^2pi omega sin(2b)/s db ds
pub fn op_l(omega: &ScalarField) -> Result<Array1<f64>, CoreError> {
    let p2 = beta_project(omega, 2);
    tail_log_cumulative(&omega.grid, &p2)
}

// L12(omega)(R) = (3/8pi) int_R^inf int_0^2pi omega sin(2b)cos(b)/s db ds
pub fn op_l12(omega: &ScalarField) -> Result<Array1<f64>, CoreError> {
    let g = &omega.grid;
    let w = g.beta.mapv(|b| (2.0 * b).sin() * b.cos());
    let proj = angular_integral_full(omega, &w, OE);
    let mut out = tail_log_cumulative(g, &proj)?;
    out.mapv_inplace(|v| v * 3.0 / (8.0 * std::f64::consts::PI));
    Ok(out)
}

// Ralpha(omega)(R) = R^{-4/a}/(4 a pi) int_0^R int s^{4/a} omega sin(2b)/s db ds.
// the weight spans hundreds of orders of magnitude, so the radial accumulation
// runs in u = log s with the factor exp((4/a)(u - u_i)) kept <= 1 throughout;
// each segment integrates the exponential weight exactly against a linear
// interpolant of the projection, which keeps the scheme second order even when
// (4/a) h is large. mass below the first node is dropped (the weight there is
// smaller by exp(-(4/a) log(r_1/r_0)) and all our data vanish near 0).
pub fn op_ralpha(omega: &ScalarField, alpha: f64) -> Result<Array1<f64>, CoreError> {
    if !(alpha > 0.0 && alpha <= 0.25) {
        return Err(CoreError::InvalidParam(format!("alpha = {alpha} not in (0, 1/4]")));
    }
    let g = &omega.grid;
    // projection carries the beta integral and the 1/pi of the prefactor:
    // beta_project includes 1/pi, leaving 1/(4 alpha)
    let p2 = beta_project(omega, 2);
    let a = 4.0 / alpha;
    let n = g.n_r();
    let mut out = Array1::zeros(n);
    let mut acc = 0.0;
    for i in 1..n {
        let du = g.r[i].ln() - g.r[i - 1].ln();
        let x = a * du;
        if x > 700.0 {
            // weight from the previous node underflows; only the local
            // endpoint contribution survives
            acc = 0.0;
        }
        let e = (-x).exp();
        // int_0^du exp(a(u-du)) (p0 + (p1-p0) u/du) du
        let w1 = (1.0 - (1.0 - e) / x) / a;
        let w0 = (1.0 - e) / a - w1;
        acc = acc * e + w0 * p2[i - 1] + w1 * p2[i];
        out[i] = acc / (4.0 * alpha);
    }
    // first node: no interval below it on the grid
    out[0] = 0.0;
    for v in out.iter() {
        if !v.is_finite() {
            return Err(CoreError::ExponentOverflow {
                what: "radial weight accumulation".into(),
                value: *v,
                limit: 700.0,
                r: 0.0,
            });
        }
    }
    Ok(out)
}
