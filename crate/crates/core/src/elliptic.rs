use crate::field::{ScalarField, EE, OE, OO};
use crate::grid::{Grid, RadialSpacing};
use crate::initdata::make_bump;
use crate::norms::{beta_project, l2_norm, linf_norm};
use crate::ops::{op_l, op_ralpha};
use crate::report::{CheckResult, VerificationReport};
use crate::CoreError;
use ndarray::{Array1, Array2};
use std::sync::Arc;

// stream-function solvers for the scaled vorticity inversion. the 2d operator
// diagonalizes over sin(2m b), so each mode reduces to a constant-coefficient
// BVP in s = log R; the 3d operator's tan(b) term couples angular modes and
// gets a direct block solve instead.

pub struct PsiDecomposition {
    pub psi: ScalarField,
    pub psi_app: ScalarField,
    pub r_part: ScalarField,
    pub psi_err: ScalarField,
    // finite-difference residual of the quadrature-route sin(2b) profile in
    // the reduced radial equation, relative to the forcing
    pub ell2_residual: f64,
    // disagreement between the solver's sin(2b) profile and the tail plus
    // weighted integral formulas for it, relative to the profile size
    pub route_residual: f64,
}

fn require_log_grid(grid: &Grid) -> Result<(), CoreError> {
    if grid.spacing != RadialSpacing::LogR {
        return Err(CoreError::InvalidParam(
            "elliptic solves need the log-spaced radial grid".into(),
        ));
    }
    Ok(())
}

// tridiagonal solve, destroys its inputs
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) -> Result<(), CoreError> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1] == 0.0 {
            return Err(CoreError::InvalidParam("singular tridiagonal pivot".into()));
        }
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if diag[n - 1] == 0.0 {
        return Err(CoreError::InvalidParam("singular tridiagonal pivot".into()));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

// sine coefficients of the interior nodes: f_m = sum_j f_j sin(pi m j / N)
fn dst_forward(interior: &[f64], table: &Array2<f64>) -> Vec<f64> {
    let m_count = interior.len();
    (0..m_count)
        .map(|m| (0..m_count).map(|j| interior[j] * table[[m, j]]).sum())
        .collect()
}

fn dst_inverse(modes: &[f64], table: &Array2<f64>) -> Vec<f64> {
    let m_count = modes.len();
    let scale = 2.0 / (m_count + 1) as f64;
    (0..m_count)
        .map(|j| scale * (0..m_count).map(|m| modes[m] * table[[m, j]]).sum::<f64>())
        .collect()
}

fn dst_table(m_count: usize) -> Array2<f64> {
    let n = (m_count + 1) as f64;
    Array2::from_shape_fn((m_count, m_count), |(m, j)| {
        (std::f64::consts::PI * (m + 1) as f64 * (j + 1) as f64 / n).sin()
    })
}

// cosine modes cos(2m b) on the closed quarter grid, for components even
// about both axes; intervals = n_beta - 1, modes m = 0..=intervals
fn dct_table(intervals: usize) -> Array2<f64> {
    let n = intervals as f64;
    Array2::from_shape_fn((intervals + 1, intervals + 1), |(m, j)| {
        (std::f64::consts::PI * (m * j) as f64 / n).cos()
    })
}

// DCT-I with half-weight endpoints; inverse of dct_inverse
fn dct_forward(values: &[f64], table: &Array2<f64>) -> Vec<f64> {
    let intervals = values.len() - 1;
    let n = intervals as f64;
    (0..=intervals)
        .map(|m| {
            let mut acc = 0.0;
            for (j, v) in values.iter().enumerate() {
                let w = if j == 0 || j == intervals { 0.5 } else { 1.0 };
                acc += w * v * table[[m, j]];
            }
            let dup = if m == 0 || m == intervals { 2.0 } else { 1.0 };
            acc * 2.0 / (n * dup)
        })
        .collect()
}

fn dct_inverse(modes: &[f64], table: &Array2<f64>) -> Vec<f64> {
    let intervals = modes.len() - 1;
    (0..=intervals)
        .map(|j| (0..=intervals).map(|m| modes[m] * table[[m, j]]).sum())
        .collect()
}

fn profile_times_sin2b(grid: &Arc<Grid>, prof: &Array1<f64>) -> ScalarField {
    let sin2b: Vec<f64> = grid.beta.iter().map(|b| (2.0 * b).sin()).collect();
    let mut vals = Array2::zeros((grid.n_r(), grid.n_beta()));
    for i in 0..grid.n_r() {
        for j in 0..grid.n_beta() {
            vals[[i, j]] = prof[i] * sin2b[j];
        }
    }
    ScalarField::from_comp(grid.clone(), OO, vals)
}

// per angular wavenumber: a^2 P'' + 4a P' + (4 - k^2) P = -f on interior s
// nodes, P = 0 at both radial ends; columns of f_modes indexed by mode slot
fn radial_mode_solves(
    f_modes: &Array2<f64>,
    wavenumber: impl Fn(usize) -> f64,
    alpha: f64,
    h: f64,
) -> Result<Array2<f64>, CoreError> {
    let (n_r, m_count) = f_modes.dim();
    let a_sub = alpha * alpha / (h * h) - 2.0 * alpha / h;
    let a_sup = alpha * alpha / (h * h) + 2.0 * alpha / h;
    let diag_val = -2.0 * alpha * alpha / (h * h);
    let mut p_modes = Array2::zeros((n_r, m_count));
    for m in 0..m_count {
        let k = wavenumber(m);
        let gamma = 4.0 - k * k;
        // the gamma = 0 mode continues as a constant plateau below the
        // window: its physical stream goes like r^2 there, which is the
        // prefactor itself, so the scaled profile has zero slope at the
        // inner end. imposing a zero value instead manufactures a layer of
        // width alpha that the grid cannot resolve, and the node-scale
        // wiggle left behind is exactly what the plain radial derivatives
        // in the remainder norms amplify at the inner edge. modes with
        // gamma < 0 decay inward on their own, so the zero-value row is
        // exponentially accurate for them and stays
        let neumann_inner = gamma == 0.0;
        let first = if neumann_inner { 0 } else { 1 };
        let unknowns = n_r - 1 - first;
        let sub = vec![a_sub; unknowns];
        let mut sup = vec![a_sup; unknowns];
        let mut diag = vec![diag_val + gamma; unknowns];
        let mut rhs: Vec<f64> = (first..n_r - 1).map(|i| -f_modes[[i, m]]).collect();
        if neumann_inner {
            // centered zero slope at the first node folds the ghost value
            // into the superdiagonal of that node's interior equation
            sup[0] = a_sub + a_sup;
        }
        thomas(&sub, &mut diag, &sup, &mut rhs).map_err(|_| {
            CoreError::InvalidParam(format!("radial solve failed at angular wavenumber {k}"))
        })?;
        for i in 0..unknowns {
            p_modes[[i + first, m]] = rhs[i];
        }
    }
    Ok(p_modes)
}

// 4 psi + a^2 R^2 psi_RR + (4a + a^2) R psi_R + psi_bb = -omega on the
// quarter annulus, psi = 0 at both radial ends. components odd about both
// axes expand over sin(2m b), components even about both axes over
// cos(2m b); those are the full-circle Fourier classes the evolved fields
// live in, so each mode reduces to a constant-coefficient BVP in s = log R
pub fn solve_psi_2d(omega: &ScalarField, alpha: f64) -> Result<ScalarField, CoreError> {
    let grid = &omega.grid;
    require_log_grid(grid)?;
    if alpha <= 0.0 {
        return Err(CoreError::InvalidParam("alpha must be positive".into()));
    }
    let (n_r, n_beta) = (grid.n_r(), grid.n_beta());
    let h = grid.h_radial;
    let mut out = ScalarField::zero(grid.clone());
    for (parity, comp) in omega.present() {
        let mut sol = Array2::zeros((n_r, n_beta));
        if parity == OO {
            let m_count = n_beta - 2;
            let table = dst_table(m_count);
            // mode coefficients of the forcing at every radius
            let mut f_modes = Array2::zeros((n_r, m_count));
            for i in 0..n_r {
                let interior: Vec<f64> = (1..=m_count).map(|j| comp[[i, j]]).collect();
                for (m, v) in dst_forward(&interior, &table).into_iter().enumerate() {
                    f_modes[[i, m]] = v;
                }
            }
            let p_modes =
                radial_mode_solves(&f_modes, |m| 2.0 * (m + 1) as f64, alpha, h)?;
            for i in 0..n_r {
                let modes: Vec<f64> = (0..m_count).map(|m| p_modes[[i, m]]).collect();
                for (j, v) in dst_inverse(&modes, &table).into_iter().enumerate() {
                    sol[[i, j + 1]] = v;
                }
            }
        } else if parity == EE {
            let intervals = n_beta - 1;
            let table = dct_table(intervals);
            let mut f_modes = Array2::zeros((n_r, intervals + 1));
            for i in 0..n_r {
                let row: Vec<f64> = (0..n_beta).map(|j| comp[[i, j]]).collect();
                for (m, v) in dct_forward(&row, &table).into_iter().enumerate() {
                    f_modes[[i, m]] = v;
                }
            }
            // the circle-mean mode is excluded: its scaled stream behaves like
            // exp(-2s/alpha) at the inner end (the physical stream does not
            // vanish at the origin), which no finite-window Dirichlet solve or
            // f64 field can carry. that mode's effect on the velocity is a
            // bounded swirl profile computed directly from omega by the
            // velocity assembly
            for i in 0..n_r {
                f_modes[[i, 0]] = 0.0;
            }
            let p_modes = radial_mode_solves(&f_modes, |m| 2.0 * m as f64, alpha, h)?;
            for i in 0..n_r {
                let modes: Vec<f64> = (0..=intervals).map(|m| p_modes[[i, m]]).collect();
                for (j, v) in dct_inverse(&modes, &table).into_iter().enumerate() {
                    sol[[i, j]] = v;
                }
            }
        } else {
            return Err(CoreError::InvalidParam(
                "stream solve covers components even or odd about both axes; mixed \
                 classes do not arise from the evolved fields"
                    .into(),
            ));
        }
        out.set_comp(parity, sol);
    }
    Ok(out)
}

// splits psi into the explicit sin(2b) part (tail formula plus weighted
// rest) and the higher-mode remainder. the sin(2b) profile is removed with
// the solver's own discrete projection so the remainder is orthogonal to
// sin(2b) to machine precision; the integral formulas are then checked
// against that profile as an independent route.
pub fn decompose_psi_2d(
    omega: &ScalarField,
    psi: &ScalarField,
    alpha: f64,
) -> Result<PsiDecomposition, CoreError> {
    let grid = &psi.grid;
    require_log_grid(grid)?;
    if omega.grid.n_r() != grid.n_r() || omega.grid.n_beta() != grid.n_beta() {
        return Err(CoreError::InvalidParam("omega and psi grids differ".into()));
    }
    let p2 = beta_project(psi, 2);
    let l_prof = op_l(omega)?;
    let r_prof = op_ralpha(omega, alpha)?;
    let app_prof = l_prof.mapv(|v| v / (4.0 * alpha));
    let psi_app = profile_times_sin2b(grid, &app_prof);
    let rem_prof = &p2 - &app_prof;
    let r_part = profile_times_sin2b(grid, &rem_prof);
    let psi_err = psi.sub(&psi_app).sub(&r_part);

    // dual route: solver projection vs tail plus weighted integral formulas.
    // the solver's Dirichlet zero at the inner radial end is a truncation of
    // the infinite domain the formulas describe; the mismatch there decays
    // like exp(-4 ds/alpha) in s, so the comparison starts above a collar of
    // 8 alpha where that layer is below roundoff
    let quad_prof = &app_prof + &r_prof;
    let s_min = grid.r[0].ln();
    let collar = 8.0 * alpha;
    let mut route_worst = 0.0f64;
    let mut route_scale = 1e-300f64;
    for i in 0..grid.n_r() {
        if grid.r[i].ln() - s_min < collar {
            continue;
        }
        route_scale = route_scale.max(p2[i].abs());
        route_worst = route_worst.max((p2[i] - quad_prof[i]).abs());
    }
    let route_residual = route_worst / route_scale;

    // reduced radial equation on the quadrature-route profile:
    // a^2 P'' + 4a P' = -omega_2 in s, second-order differences
    let h = grid.h_radial;
    let om2 = beta_project(omega, 2);
    let mut worst = 0.0f64;
    let f_scale = om2.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 1..grid.n_r() - 1 {
        let d2 = (quad_prof[i + 1] - 2.0 * quad_prof[i] + quad_prof[i - 1]) / (h * h);
        let d1 = (quad_prof[i + 1] - quad_prof[i - 1]) / (2.0 * h);
        let res = alpha * alpha * d2 + 4.0 * alpha * d1 + om2[i];
        worst = worst.max(res.abs());
    }
    Ok(PsiDecomposition {
        psi: psi.clone(),
        psi_app,
        r_part,
        psi_err,
        ell2_residual: worst / f_scale,
        route_residual,
    })
}

// small dense LU with partial pivoting for the 3d block elimination
struct DenseLu {
    a: Array2<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    fn factor(mut a: Array2<f64>) -> Result<DenseLu, CoreError> {
        let n = a.nrows();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[[i, k]].abs() > a[[p, k]].abs() {
                    p = i;
                }
            }
            if a[[p, k]] == 0.0 {
                return Err(CoreError::InvalidParam("singular block in elliptic solve".into()));
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    let t = a[[k, j]];
                    a[[k, j]] = a[[p, j]];
                    a[[p, j]] = t;
                }
            }
            let d = a[[k, k]];
            for i in k + 1..n {
                let f = a[[i, k]] / d;
                a[[i, k]] = f;
                for j in k + 1..n {
                    a[[i, j]] -= f * a[[k, j]];
                }
            }
        }
        Ok(DenseLu { a, piv })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.a.nrows();
        for k in 0..n {
            b.swap(k, self.piv[k]);
            for i in k + 1..n {
                b[i] -= self.a[[i, k]] * b[k];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                b[i] -= self.a[[i, j]] * b[j];
            }
            b[i] /= self.a[[i, i]];
        }
    }

    fn solve_matrix(&self, b: &mut Array2<f64>) {
        let cols = b.ncols();
        let mut buf = vec![0.0; b.nrows()];
        for c in 0..cols {
            for i in 0..b.nrows() {
                buf[i] = b[[i, c]];
            }
            self.solve(&mut buf);
            for i in 0..b.nrows() {
                b[[i, c]] = buf[i];
            }
        }
    }
}

// -a^2 R^2 psi_RR - a(a+5) R psi_R - psi_bb + (tan b psi)_b - 6 psi = omega,
// psi = 0 at b = 0, pi/2 and both radial ends. finite differences in both
// directions; the tan(b) product rule tan(b) psi_b + sec^2(b) psi keeps the
// stencil tridiagonal in b, and the radial coupling is diagonal, so the
// block-tridiagonal system solves by block elimination.
pub fn solve_psi_3d(omega: &ScalarField, alpha: f64) -> Result<ScalarField, CoreError> {
    let grid = &omega.grid;
    require_log_grid(grid)?;
    if alpha <= 0.0 {
        return Err(CoreError::InvalidParam("alpha must be positive".into()));
    }
    let (n_r, n_beta) = (grid.n_r(), grid.n_beta());
    let m = n_beta - 2;
    let h = grid.h_radial;
    let hb = grid.h_beta;
    let unknowns = n_r - 2;
    // angular block: -psi_bb + tan(b) psi_b + (sec^2 b - 6) psi
    let mut b_block = Array2::zeros((m, m));
    for jj in 0..m {
        let beta = grid.beta[jj + 1];
        let (tan, sec2) = (beta.tan(), 1.0 / (beta.cos() * beta.cos()));
        b_block[[jj, jj]] = 2.0 / (hb * hb) + sec2 - 6.0;
        if jj > 0 {
            b_block[[jj, jj - 1]] = -1.0 / (hb * hb) - tan / (2.0 * hb);
        }
        if jj + 1 < m {
            b_block[[jj, jj + 1]] = -1.0 / (hb * hb) + tan / (2.0 * hb);
        }
    }
    let diag_shift = 2.0 * alpha * alpha / (h * h);
    let lo = -alpha * alpha / (h * h) + 5.0 * alpha / (2.0 * h);
    let up = -alpha * alpha / (h * h) - 5.0 * alpha / (2.0 * h);

    let mut out = ScalarField::zero(grid.clone());
    for (parity, comp) in omega.present() {
        // block elimination: the factor sweep depends only on the operator
        // but is cheap enough to redo per component
        let mut c_prime: Vec<Array2<f64>> = Vec::with_capacity(unknowns);
        let mut r_prime: Vec<Vec<f64>> = Vec::with_capacity(unknowns);
        for i in 0..unknowns {
            let mut d = b_block.clone();
            for jj in 0..m {
                d[[jj, jj]] += diag_shift;
            }
            if i > 0 {
                for a in 0..m {
                    for b in 0..m {
                        d[[a, b]] -= lo * c_prime[i - 1][[a, b]];
                    }
                }
            }
            let mut rhs: Vec<f64> = (0..m).map(|jj| comp[[i + 1, jj + 1]]).collect();
            if i > 0 {
                for a in 0..m {
                    rhs[a] -= lo * r_prime[i - 1][a];
                }
            }
            let lu = DenseLu::factor(d)?;
            let mut u_mat = Array2::from_elem((m, m), 0.0);
            for a in 0..m {
                u_mat[[a, a]] = up;
            }
            lu.solve_matrix(&mut u_mat);
            lu.solve(&mut rhs);
            c_prime.push(u_mat);
            r_prime.push(rhs);
        }
        let mut sol = Array2::zeros((n_r, n_beta));
        let mut next = vec![0.0; m];
        for i in (0..unknowns).rev() {
            let mut x = r_prime[i].clone();
            for a in 0..m {
                let mut acc = 0.0;
                for b in 0..m {
                    acc += c_prime[i][[a, b]] * next[b];
                }
                x[a] -= acc;
            }
            for jj in 0..m {
                sol[[i + 1, jj + 1]] = x[jj];
            }
            next = x;
        }
        out.set_comp(parity, sol);
    }
    Ok(out)
}

// manufactured 2d solution R^2 e^{-(R-2)^2} sin(2b) with the operator applied
// in closed form; returns (forcing, exact solution) on the given grid
pub fn manufactured_pair_2d(grid: Arc<Grid>, alpha: f64) -> (ScalarField, ScalarField) {
    let psi_star = ScalarField::from_fn(grid.clone(), OO, |r, b| {
        let u = r - 2.0;
        r * r * (-u * u).exp() * (2.0 * b).sin()
    });
    let omega_star = ScalarField::from_fn(grid, OO, move |r, b| {
        let u = r - 2.0;
        let e = (-u * u).exp();
        let fp = e * (2.0 * r - 2.0 * r * r * u);
        let fpp = e * (2.0 - 8.0 * r * u - 2.0 * r * r + 4.0 * r * r * u * u);
        -(alpha * alpha * r * r * fpp + (4.0 * alpha + alpha * alpha) * r * fp) * (2.0 * b).sin()
    });
    (omega_star, psi_star)
}

// manufactured even-class solution R^2 e^{-(R-2)^2} cos(2b); on cos(2b) the
// angular part cancels the zeroth-order term, leaving the pure radial operator.
// the circle-mean mode is deliberately absent: the solver does not carry it
pub fn manufactured_pair_2d_even(grid: Arc<Grid>, alpha: f64) -> (ScalarField, ScalarField) {
    let psi_star = ScalarField::from_fn(grid.clone(), EE, |r, b| {
        let u = r - 2.0;
        r * r * (-u * u).exp() * (2.0 * b).cos()
    });
    let omega_star = ScalarField::from_fn(grid, EE, move |r, b| {
        let u = r - 2.0;
        let e = (-u * u).exp();
        let fp = e * (2.0 * r - 2.0 * r * r * u);
        let fpp = e * (2.0 - 8.0 * r * u - 2.0 * r * r + 4.0 * r * r * u * u);
        -(alpha * alpha * r * r * fpp + (4.0 * alpha + alpha * alpha) * r * fp) * (2.0 * b).cos()
    });
    (omega_star, psi_star)
}

// manufactured 3d solution e^{-(R-0.13)^2/w^2} sin(2b) cos(b); the angular
// operator sends sin(2b)cos(b) to 6 sin(b) cos(2b)
pub fn manufactured_pair_3d(grid: Arc<Grid>, alpha: f64) -> (ScalarField, ScalarField) {
    let w = 0.03;
    let g = move |r: f64| {
        let u = (r - 0.13) / w;
        (-u * u).exp()
    };
    let psi_star = ScalarField::from_fn(grid.clone(), OE, move |r, b| {
        g(r) * (2.0 * b).sin() * b.cos()
    });
    let omega_star = ScalarField::from_fn(grid, OE, move |r, b| {
        let u = (r - 0.13) / w;
        let e = (-u * u).exp();
        let gp = e * (-2.0 * u / w);
        let gpp = e * (4.0 * u * u - 2.0) / (w * w);
        let (s, c) = b.sin_cos();
        let radial = -alpha * alpha * r * r * gpp - alpha * (alpha + 5.0) * r * gp;
        radial * 2.0 * s * c * c + g(r) * 6.0 * s * (2.0 * c * c - 1.0)
    });
    (omega_star, psi_star)
}

// max-norm error of the solver against a manufactured pair, one row per grid
// size; radial and angular spacing refine together
pub fn manufactured_convergence_2d(
    alpha: f64,
    sizes: &[(usize, usize)],
) -> Result<Vec<(usize, f64)>, CoreError> {
    let mut rows = Vec::new();
    for &(n_r, n_beta) in sizes {
        let grid = Arc::new(Grid::build(n_r, n_beta, 8.0, alpha, RadialSpacing::LogR)?);
        let (omega, psi_star) = manufactured_pair_2d(grid, alpha);
        let psi = solve_psi_2d(&omega, alpha)?;
        let err = linf_norm(&psi.sub(&psi_star)) / linf_norm(&psi_star);
        rows.push((n_r, err));
    }
    Ok(rows)
}

pub fn manufactured_convergence_2d_even(
    alpha: f64,
    sizes: &[(usize, usize)],
) -> Result<Vec<(usize, f64)>, CoreError> {
    let mut rows = Vec::new();
    for &(n_r, n_beta) in sizes {
        let grid = Arc::new(Grid::build(n_r, n_beta, 8.0, alpha, RadialSpacing::LogR)?);
        let (omega, psi_star) = manufactured_pair_2d_even(grid, alpha);
        let psi = solve_psi_2d(&omega, alpha)?;
        let err = linf_norm(&psi.sub(&psi_star)) / linf_norm(&psi_star);
        rows.push((n_r, err));
    }
    Ok(rows)
}

pub fn manufactured_convergence_3d(
    alpha: f64,
    sizes: &[(usize, usize)],
) -> Result<Vec<(usize, f64)>, CoreError> {
    let mut rows = Vec::new();
    for &(n_r, n_beta) in sizes {
        let grid = Arc::new(Grid::build(n_r, n_beta, 2.0, alpha, RadialSpacing::LogR)?);
        let (omega, psi_star) = manufactured_pair_3d(grid, alpha);
        let psi = solve_psi_3d(&omega, alpha)?;
        let err = linf_norm(&psi.sub(&psi_star)) / linf_norm(&psi_star);
        rows.push((n_r, err));
    }
    Ok(rows)
}

// caps for the alpha-uniform estimate ratios; fixed here so the report pins
// them rather than fitting them to the run
pub const CAP_ERR_BB: f64 = 4.0;
pub const CAP_ERR_CROSS: f64 = 4.0;
pub const CAP_P2_BB: f64 = 4.0;
pub const CAP_P2_RR: f64 = 4.0;
pub const CAP_HARDY: f64 = 2.0;

// a ratio this small is numerically zero and its variation across the ladder
// is roundoff noise, not a trend
const VACUOUS_RATIO_FLOOR: f64 = 1e-9;

pub fn verify_elliptic_estimates(omega: &ScalarField, alphas: &[f64]) -> VerificationReport {
    let mut report = VerificationReport::new("elliptic-estimates");
    let om_l2 = l2_norm(omega);
    if om_l2 == 0.0 {
        report.push(CheckResult::le(
            "zero-data-sentinel",
            "zero vorticity: all estimate ratios vacuously zero",
            0.0,
            0.0,
            0.0,
        ));
        return report;
    }
    if alphas.is_empty() {
        report.push(CheckResult::le(
            "alpha-ladder-empty",
            "estimate verification needs at least one alpha",
            1.0,
            0.0,
            0.0,
        ));
        return report;
    }
    let grid = &omega.grid;
    // companion forcing with pure sin(4b) content: the data class itself has
    // no sin(2b)-free part, so the remainder invariants are exercised on this
    // field as well as on whatever remainder the given data produces
    let bump = make_bump(1.5, 0.5);
    let companion = ScalarField::from_fn(grid.clone(), OO, move |r, b| {
        bump.eval(r) * (4.0 * b).sin()
    });
    let mut ratios: [Vec<f64>; 5] = Default::default();
    let mut mode2_deficiency = 0.0f64;
    let mut poincare_min = f64::INFINITY;
    for &alpha in alphas {
        let (psi, dec, dec_c) = match (|| {
            let psi = solve_psi_2d(omega, alpha)?;
            let dec = decompose_psi_2d(omega, &psi, alpha)?;
            let psi_c = solve_psi_2d(&companion, alpha)?;
            let dec_c = decompose_psi_2d(&companion, &psi_c, alpha)?;
            Ok::<_, CoreError>((psi, dec, dec_c))
        })() {
            Ok(t) => t,
            Err(e) => {
                report.push(CheckResult::le(
                    "solver-failure",
                    &format!("solve failed at alpha {alpha}: {e}"),
                    1.0,
                    0.0,
                    0.0,
                ));
                return report;
            }
        };
        let psi2 = dec.psi_app.add(&dec.r_part);
        let err_bb = dec.psi_err.deriv_beta().deriv_beta();
        let err_cross = dec.psi_err.r_deriv_r().deriv_beta();
        let p2_bb = psi2.deriv_beta().deriv_beta();
        let rdr = psi2.r_deriv_r();
        let p2_rr = rdr.r_deriv_r().sub(&rdr);
        ratios[0].push(l2_norm(&err_bb) / om_l2);
        ratios[1].push(alpha * l2_norm(&err_cross) / om_l2);
        ratios[2].push(alpha * l2_norm(&p2_bb) / om_l2);
        ratios[3].push(alpha * alpha * l2_norm(&p2_rr) / om_l2);
        let r_quad = op_ralpha(omega, alpha).unwrap_or_else(|_| Array1::zeros(grid.n_r()));
        ratios[4].push(l2_norm(&profile_times_sin2b(grid, &r_quad)) / om_l2);

        // remainder structure, measured on the given data when its remainder
        // is above roundoff and always on the companion
        let psi_l2 = l2_norm(&psi).max(1e-300);
        for d in [&dec, &dec_c] {
            let err_l2 = l2_norm(&d.psi_err);
            if err_l2 <= 1e-12 * psi_l2.max(l2_norm(&d.psi)) {
                continue;
            }
            let proj = beta_project(&d.psi_err, 2);
            let proj_l2 = l2_norm(&profile_times_sin2b(grid, &proj));
            mode2_deficiency = mode2_deficiency.max(proj_l2 / err_l2);
            let grad = l2_norm(&d.psi_err.deriv_beta());
            poincare_min = poincare_min.min(grad * grad / (err_l2 * err_l2));
        }
        for (tag, vals) in [
            ("err-bb", &ratios[0]),
            ("err-cross", &ratios[1]),
            ("p2-bb", &ratios[2]),
            ("p2-rr", &ratios[3]),
            ("hardy", &ratios[4]),
        ] {
            report.echo(
                &format!("{tag}@alpha={alpha:.0e}"),
                format!("{:.6e}", vals.last().unwrap()),
            );
        }
    }
    let names = ["err-bb", "err-cross", "p2-bb", "p2-rr", "hardy"];
    let caps = [CAP_ERR_BB, CAP_ERR_CROSS, CAP_P2_BB, CAP_P2_RR, CAP_HARDY];
    let stmts = [
        "|psi_err_bb| / |omega| bounded and alpha-stable",
        "alpha |R psi_err_Rb| / |omega| bounded and alpha-stable",
        "alpha |psi2_bb| / |omega| bounded and alpha-stable",
        "alpha^2 |R^2 psi2_RR| / |omega| bounded and alpha-stable",
        "|weighted rest of omega| / |omega| bounded and alpha-stable",
    ];
    for k in 0..5 {
        let max = ratios[k].iter().cloned().fold(0.0f64, f64::max);
        let min = ratios[k].iter().cloned().fold(f64::INFINITY, f64::min);
        report.push(CheckResult::le(
            &format!("{}-cap", names[k]),
            stmts[k],
            max,
            caps[k],
            0.0,
        ));
        let variation = if max <= VACUOUS_RATIO_FLOOR || min <= 0.0 {
            0.0
        } else {
            max / min - 1.0
        };
        report.push(CheckResult::le(
            &format!("{}-stable", names[k]),
            "ratio varies by less than 50 percent across the alpha ladder",
            variation,
            0.5,
            0.0,
        ));
    }
    report.push(CheckResult::le(
        "err-mode2-deficiency",
        "the remainder has no sin(2b) content, on the data and a sin(4b) companion",
        mode2_deficiency,
        0.0,
        1e-6,
    ));
    report.push(CheckResult::ge(
        "err-mode-poincare",
        "|psi_err_b|^2 >= 9 |psi_err|^2 since the remainder lives in higher modes",
        poincare_min,
        9.0,
        0.45,
    ));

    // far-field certification at the largest ladder alpha: truncation error
    // from the Dirichlet ends decays like exp(-4 dist/alpha) in log R, so the
    // largest alpha is the conservative case, and the comparison noise floor
    // needs the weighted-layer width alpha resolved by the fine grid
    let alpha_cert = alphas.iter().cloned().fold(0.0f64, f64::max).max(0.1);
    match far_field_shift(alpha_cert) {
        Ok(shift) => {
            report.push(CheckResult::le(
                "far-field-certified",
                "doubling R_max moves the solution by under 1e-6 of its size in the data region",
                shift,
                0.0,
                1e-6,
            ));
        }
        Err(e) => {
            report.push(CheckResult::le(
                "far-field-certified",
                &format!("certification solve failed: {e}"),
                1.0,
                0.0,
                0.0,
            ));
        }
    }
    report
}

// solve the canonical data-class problem on two windows with equal node count
// and equal log spacing, the second with R_max doubled, and compare the
// sin(2b) profiles over the data region. equal spacing makes the O(h^2)
// discretization error cancel in the difference, and the data are sampled
// analytically on each grid, so the residual difference isolates what the
// Dirichlet truncation at the ends actually costs.
fn far_field_shift(alpha: f64) -> Result<f64, CoreError> {
    let (n_r, n_beta) = (2048, 33);
    let build = |r_max: f64| -> Result<(Arc<Grid>, ScalarField), CoreError> {
        let grid = Arc::new(Grid::build(n_r, n_beta, r_max, alpha, RadialSpacing::LogR)?);
        let bump = make_bump(1.5, 0.5);
        let omega = ScalarField::from_fn(grid.clone(), OO, move |r, b| {
            bump.eval(r) * (2.0 * b).sin()
        });
        Ok((grid, omega))
    };
    let (grid_a, omega_a) = build(8.0)?;
    let (grid_b, omega_b) = build(16.0)?;
    let p2_a = beta_project(&solve_psi_2d(&omega_a, alpha)?, 2);
    let p2_b = beta_project(&solve_psi_2d(&omega_b, alpha)?, 2);
    let scale = p2_a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    // grid_b nodes sit log 2 above grid_a nodes; evaluate its profile at the
    // grid_a radii in the data region by cubic interpolation in s
    let s_b0 = grid_b.r[0].ln();
    let h = grid_b.h_radial;
    let mut worst = 0.0f64;
    for i in 0..n_r {
        let r = grid_a.r[i];
        if r < 0.5 || r > 4.0 {
            continue;
        }
        let u = (r.ln() - s_b0) / h;
        let j = (u.floor() as i64).clamp(1, n_r as i64 - 3) as usize;
        let t = u - j as f64;
        let l = |k: i64| -> f64 { p2_b[(j as i64 + k) as usize] };
        let interp = -t * (t - 1.0) * (t - 2.0) / 6.0 * l(-1)
            + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * l(0)
            - (t + 1.0) * t * (t - 2.0) / 2.0 * l(1)
            + (t + 1.0) * t * (t - 1.0) / 6.0 * l(2);
        worst = worst.max((p2_a[i] - interp).abs());
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{EE, OE, OO};
    use crate::initdata::make_bump;

    fn log_grid(n_r: usize, n_beta: usize, r_max: f64) -> Arc<Grid> {
        Arc::new(Grid::build(n_r, n_beta, r_max, 0.1, RadialSpacing::LogR).unwrap())
    }

    fn data_omega(grid: Arc<Grid>) -> ScalarField {
        let bump = make_bump(1.5, 0.5);
        ScalarField::from_fn(grid, OO, move |r, b| bump.eval(r) * (2.0 * b).sin())
    }

    #[test]
    fn zero_omega_gives_zero() {
        let grid = log_grid(128, 33, 8.0);
        let z = ScalarField::zero(grid.clone());
        let psi = solve_psi_2d(&z, 0.1).unwrap();
        assert!(linf_norm(&psi) == 0.0);
        let grid3 = log_grid(128, 33, 2.0);
        let z3 = ScalarField::zero(grid3);
        let psi3 = solve_psi_3d(&z3, 0.1).unwrap();
        assert!(linf_norm(&psi3) == 0.0);
    }

    #[test]
    fn uniform_grid_rejected() {
        let grid = Arc::new(Grid::build(64, 17, 8.0, 0.1, RadialSpacing::Uniform).unwrap());
        let z = ScalarField::zero(grid);
        assert!(matches!(solve_psi_2d(&z, 0.1), Err(CoreError::InvalidParam(_))));
    }

    #[test]
    fn manufactured_2d_second_order() {
        let rows = manufactured_convergence_2d(0.1, &[(256, 33), (512, 65), (1024, 129)]).unwrap();
        for w in rows.windows(2) {
            let order = (w[0].1 / w[1].1).log2();
            assert!(order > 1.8, "2d order {order} between {} and {}", w[0].0, w[1].0);
        }
        assert!(rows.last().unwrap().1 < 1e-3, "finest error {}", rows.last().unwrap().1);
    }

    #[test]
    fn manufactured_even_second_order() {
        let rows =
            manufactured_convergence_2d_even(0.1, &[(256, 33), (512, 65), (1024, 129)]).unwrap();
        for w in rows.windows(2) {
            let order = (w[0].1 / w[1].1).log2();
            assert!(order > 1.8, "even order {order} between {} and {}", w[0].0, w[1].0);
        }
        assert!(rows.last().unwrap().1 < 1e-3, "finest error {}", rows.last().unwrap().1);
    }

    #[test]
    fn dct_roundtrip() {
        let n = 17;
        let table = dct_table(n - 1);
        let vals: Vec<f64> = (0..n).map(|j| (0.3 + j as f64 * 0.7).sin()).collect();
        let modes = dct_forward(&vals, &table);
        let back = dct_inverse(&modes, &table);
        for j in 0..n {
            assert!(
                (vals[j] - back[j]).abs() < 1e-12,
                "node {j}: {} vs {}",
                vals[j],
                back[j]
            );
        }
    }

    #[test]
    fn mixed_class_component_rejected() {
        let grid =
            Arc::new(Grid::build(64, 17, 8.0, 0.1, RadialSpacing::LogR).unwrap());
        let omega = ScalarField::from_fn(grid, OE, |r, b| {
            let u = r - 2.0;
            (-u * u).exp() * b.sin()
        });
        assert!(solve_psi_2d(&omega, 0.1).is_err());
    }

    #[test]
    fn manufactured_3d_second_order() {
        let rows = manufactured_convergence_3d(0.1, &[(128, 17), (256, 33), (512, 65)]).unwrap();
        for w in rows.windows(2) {
            let order = (w[0].1 / w[1].1).log2();
            assert!(order > 1.8, "3d order {order} between {} and {}", w[0].0, w[1].0);
        }
        assert!(rows.last().unwrap().1 < 5e-3, "finest error {}", rows.last().unwrap().1);
    }

    #[test]
    fn mode_orthogonality() {
        let grid = log_grid(256, 65, 8.0);
        let bump = make_bump(1.5, 0.5);
        let omega = ScalarField::from_fn(grid, OO, move |r, b| bump.eval(r) * (4.0 * b).sin());
        let psi = solve_psi_2d(&omega, 0.1).unwrap();
        let p2 = beta_project(&psi, 2);
        let scale = linf_norm(&psi).max(1e-300);
        let worst = p2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst / scale < 1e-8, "sin(2b) leakage {}", worst / scale);
    }

    #[test]
    fn radial_omega_is_all_remainder() {
        let grid = log_grid(256, 33, 8.0);
        let bump = make_bump(1.5, 0.5);
        let prof = bump.sample(&grid);
        let omega = ScalarField::from_radial(grid, &prof);
        let psi = solve_psi_2d(&omega, 0.1).unwrap();
        let dec = decompose_psi_2d(&omega, &psi, 0.1).unwrap();
        assert!(linf_norm(&dec.psi_app) == 0.0);
        assert!(linf_norm(&dec.r_part) == 0.0);
        assert!(linf_norm(&dec.psi_err.sub(&psi)) == 0.0);
    }

    #[test]
    fn decomposition_splits_exactly() {
        let grid = log_grid(1024, 65, 8.0);
        let omega = data_omega(grid);
        let alpha = 0.1;
        let psi = solve_psi_2d(&omega, alpha).unwrap();
        let dec = decompose_psi_2d(&omega, &psi, alpha).unwrap();
        // identity by construction
        let re = dec.psi_app.add(&dec.r_part).add(&dec.psi_err);
        assert!(linf_norm(&re.sub(&psi)) < 1e-13 * linf_norm(&psi));
        // remainder orthogonal to sin(2b) at machine precision
        let proj = beta_project(&dec.psi_err, 2);
        let worst = proj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12 * linf_norm(&psi), "projection {worst}");
        // psi_app factors exactly as profile times sin(2b)
        let prof = beta_project(&dec.psi_app, 2);
        for i in (0..1024).step_by(97) {
            for (j, b) in [(8, dec.psi.grid.beta[8]), (32, dec.psi.grid.beta[32])] {
                let want = prof[i] * (2.0 * b).sin();
                let diff = (dec.psi_app.value_quarter(i, j) - want).abs();
                assert!(diff < 1e-12 * prof[i].abs().max(1e-300) + 1e-300, "app mismatch {diff}");
            }
        }
        // both integral-formula routes agree with the solver profile to
        // discretization accuracy, and the reduced equation residual is small
        assert!(dec.route_residual < 5e-3, "route residual {}", dec.route_residual);
        assert!(dec.ell2_residual < 5e-3, "reduced-equation residual {}", dec.ell2_residual);
    }

    #[test]
    fn reduced_equation_residual_halves_under_refinement() {
        let alpha = 0.1;
        let mut res = Vec::new();
        for n_r in [512usize, 1024, 2048] {
            let grid = log_grid(n_r, 33, 8.0);
            let omega = data_omega(grid);
            let psi = solve_psi_2d(&omega, alpha).unwrap();
            let dec = decompose_psi_2d(&omega, &psi, alpha).unwrap();
            res.push(dec.ell2_residual);
        }
        for w in res.windows(2) {
            assert!(w[1] < 0.35 * w[0], "residuals not contracting: {res:?}");
        }
    }

    #[test]
    fn homogeneous_two_mode_identity() {
        // the angular operator annihilates sin(2b): the second derivative
        // contributes +4, the tan product term +2, the zeroth term -6
        let grid = log_grid(8, 129, 2.0);
        for j in 1..grid.n_beta() - 1 {
            let b = grid.beta[j];
            let (s, c) = b.sin_cos();
            let term_bb = 4.0 * 2.0 * s * c;
            let term_tan = (s / c) * 2.0 * (c * c - s * s) + 2.0 * s * c / (c * c);
            let term_id = -6.0 * 2.0 * s * c;
            let total = term_bb + term_tan + term_id;
            assert!(total.abs() < 1e-8, "identity residual {total} at beta {b}");
        }
    }

    #[test]
    fn three_d_solution_keeps_parity() {
        let grid = log_grid(256, 33, 2.0);
        let (omega, _) = manufactured_pair_3d(grid, 0.1);
        let psi = solve_psi_3d(&omega, 0.1).unwrap();
        assert!(psi.comp(OE).is_some());
        assert!(psi.comp(OO).is_none() && psi.comp(EE).is_none());
    }

    #[test]
    fn solves_are_linear() {
        let grid = log_grid(256, 33, 8.0);
        let o1 = data_omega(grid.clone());
        let bump2 = make_bump(2.0, 0.4);
        let o2 = ScalarField::from_fn(grid, OO, move |r, b| bump2.eval(r) * (4.0 * b).sin());
        let alpha = 0.05;
        let combo = o1.scale(0.7).add(&o2.scale(-1.3));
        let lhs = solve_psi_2d(&combo, alpha).unwrap();
        let rhs = solve_psi_2d(&o1, alpha)
            .unwrap()
            .scale(0.7)
            .add(&solve_psi_2d(&o2, alpha).unwrap().scale(-1.3));
        let rel = linf_norm(&lhs.sub(&rhs)) / linf_norm(&lhs).max(1e-300);
        assert!(rel < 1e-9, "2d linearity defect {rel}");
    }

    #[test]
    fn estimate_report_snapshot_on_data_class() {
        let grid = log_grid(512, 65, 8.0);
        let omega = data_omega(grid);
        let rep = verify_elliptic_estimates(&omega, &[1e-1, 1e-2, 1e-3]);
        assert_eq!(rep.checks.len(), 13);
        for c in rep.checks.iter() {
            // the radial second-derivative ratio genuinely decays with alpha
            // (its uniform bound is not saturated), so its stability check
            // stays red; everything else holds
            if c.name == "p2-rr-stable" {
                assert!(!c.pass, "expected red: {}", c.summary_line());
            } else {
                assert!(c.pass, "check failed: {}", c.summary_line());
            }
        }
    }

    #[test]
    fn zero_omega_report_is_vacuous() {
        let grid = log_grid(64, 17, 8.0);
        let z = ScalarField::zero(grid);
        let rep = verify_elliptic_estimates(&z, &[1e-1]);
        assert!(rep.overall_pass());
        assert_eq!(rep.checks.len(), 1);
        assert_eq!(rep.checks[0].name, "zero-data-sentinel");
    }
}
