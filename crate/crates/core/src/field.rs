use crate::grid::{Grid, RadialSpacing};
use ndarray::{Array1, Array2};
use std::sync::Arc;

// Symmetry class of a function on the circle, recorded as its parity under the
// two reflections beta -> -beta and beta -> pi - beta. Samples on the quarter
// period [0, pi/2] plus the class determine the function everywhere, and the
// class algebra is what keeps angular integrals and products exact: a product
// multiplies classes componentwise, d/dbeta flips both components, and only the
// fully even class contributes to integrals over the full circle.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Parity(u8); // bit 0: odd under beta -> -beta, bit 1: odd under beta -> pi - beta

pub const EE: Parity = Parity(0); // 1, cos(2k b)
pub const OE: Parity = Parity(1); // sin((2k+1) b)
pub const EO: Parity = Parity(2); // cos((2k+1) b)
pub const OO: Parity = Parity(3); // sin(2k b)

impl Parity {
    pub fn product(self, other: Parity) -> Parity {
        Parity(self.0 ^ other.0)
    }

    pub fn flip_both(self) -> Parity {
        Parity(self.0 ^ 3)
    }

    pub fn odd_about_zero(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn odd_about_half(self) -> bool {
        self.0 & 2 != 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> [Parity; 4] {
        [EE, OE, EO, OO]
    }

    // parity swap induced by beta -> pi/2 - beta
    pub fn mirror(self) -> Parity {
        match self.0 {
            1 => Parity(2),
            2 => Parity(1),
            p => Parity(p),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    comps: [Option<Array2<f64>>; 4],
}

impl ScalarField {
    pub fn zero(grid: Arc<Grid>) -> ScalarField {
        ScalarField {
            grid,
            comps: [None, None, None, None],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Arc<Grid>, parity: Parity, f: F) -> ScalarField {
        let mut a = Array2::zeros((grid.n_r(), grid.n_beta()));
        for i in 0..grid.n_r() {
            for j in 0..grid.n_beta() {
                a[[i, j]] = f(grid.r[i], grid.beta[j]);
            }
        }
        let mut out = ScalarField::zero(grid);
        out.comps[parity.index()] = Some(a);
        out
    }

    // radial profiles are symmetric under both reflections
    pub fn from_radial(grid: Arc<Grid>, profile: &Array1<f64>) -> ScalarField {
        assert_eq!(profile.len(), grid.n_r());
        let mut a = Array2::zeros((grid.n_r(), grid.n_beta()));
        for i in 0..grid.n_r() {
            for j in 0..grid.n_beta() {
                a[[i, j]] = profile[i];
            }
        }
        let mut out = ScalarField::zero(grid);
        out.comps[EE.index()] = Some(a);
        out
    }

    pub fn from_comp(grid: Arc<Grid>, parity: Parity, values: Array2<f64>) -> ScalarField {
        assert_eq!(values.dim(), (grid.n_r(), grid.n_beta()));
        let mut out = ScalarField::zero(grid);
        out.comps[parity.index()] = Some(values);
        out
    }

    pub fn comp(&self, parity: Parity) -> Option<&Array2<f64>> {
        self.comps[parity.index()].as_ref()
    }

    pub fn set_comp(&mut self, parity: Parity, values: Array2<f64>) {
        assert_eq!(values.dim(), (self.grid.n_r(), self.grid.n_beta()));
        self.comps[parity.index()] = Some(values);
    }

    pub fn present(&self) -> impl Iterator<Item = (Parity, &Array2<f64>)> {
        Parity::all()
            .into_iter()
            .filter_map(|p| self.comps[p.index()].as_ref().map(|a| (p, a)))
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_none())
    }

    // value on the quarter period (all components superimposed)
    pub fn value_quarter(&self, i: usize, j: usize) -> f64 {
        self.present().map(|(_, a)| a[[i, j]]).sum()
    }

    // value anywhere on the circle, using the reflection rules
    pub fn value_full(&self, i: usize, beta_full: f64) -> f64 {
        use std::f64::consts::PI;
        let tau = beta_full.rem_euclid(2.0 * PI);
        // fold into [0, pi/2] recording which reflections were applied
        let (b, refl0, refl1) = if tau <= PI / 2.0 {
            (tau, false, false)
        } else if tau <= PI {
            (PI - tau, false, true)
        } else if tau <= 1.5 * PI {
            (tau - PI, true, true)
        } else {
            (2.0 * PI - tau, true, false)
        };
        let j = (b / self.grid.h_beta).round() as usize;
        assert!(
            (b - self.grid.beta[j]).abs() < 1e-9,
            "beta {beta_full} does not land on a node"
        );
        let mut v = 0.0;
        for (p, a) in self.present() {
            let mut sign = 1.0;
            if refl0 && p.odd_about_zero() {
                sign = -sign;
            }
            if refl1 && p.odd_about_half() {
                sign = -sign;
            }
            v += sign * a[[i, j]];
        }
        v
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        assert!(self.grid.same_shape(&other.grid));
        let mut out = self.clone();
        for (p, b) in other.present() {
            match &mut out.comps[p.index()] {
                Some(a) => *a += b,
                slot @ None => *slot = Some(b.clone()),
            }
        }
        out
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let mut out = self.clone();
        for slot in out.comps.iter_mut().flatten() {
            slot.mapv_inplace(|v| c * v);
        }
        out
    }

    // pointwise product; classes convolve
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        assert!(self.grid.same_shape(&other.grid));
        let mut out = ScalarField::zero(self.grid.clone());
        for (p, a) in self.present() {
            for (q, b) in other.present() {
                let target = p.product(q);
                let prod = a * b;
                match &mut out.comps[target.index()] {
                    Some(acc) => *acc += &prod,
                    slot @ None => *slot = Some(prod),
                }
            }
        }
        out
    }

    // multiply by a fixed angular profile with a known class
    pub fn mul_angular(&self, values: &Array1<f64>, parity: Parity) -> ScalarField {
        assert_eq!(values.len(), self.grid.n_beta());
        let mut out = ScalarField::zero(self.grid.clone());
        for (p, a) in self.present() {
            let mut prod = a.clone();
            for i in 0..self.grid.n_r() {
                for j in 0..self.grid.n_beta() {
                    prod[[i, j]] *= values[j];
                }
            }
            let target = p.product(parity);
            match &mut out.comps[target.index()] {
                Some(acc) => *acc += &prod,
                slot @ None => *slot = Some(prod),
            }
        }
        out
    }

    pub fn mul_radial(&self, profile: &Array1<f64>) -> ScalarField {
        assert_eq!(profile.len(), self.grid.n_r());
        let mut out = self.clone();
        for slot in out.comps.iter_mut().flatten() {
            for i in 0..out.grid.n_r() {
                for j in 0..out.grid.n_beta() {
                    slot[[i, j]] *= profile[i];
                }
            }
        }
        out
    }

    pub fn mul_cos_beta(&self) -> ScalarField {
        let vals = self.grid.beta.mapv(f64::cos);
        self.mul_angular(&vals, EO)
    }

    pub fn mul_sin_beta(&self) -> ScalarField {
        let vals = self.grid.beta.mapv(f64::sin);
        self.mul_angular(&vals, OE)
    }

    // d/dbeta: 4th-order centered stencil everywhere, ghost nodes by reflection
    pub fn deriv_beta(&self) -> ScalarField {
        let n = self.grid.n_beta();
        let h = self.grid.h_beta;
        let mut out = ScalarField::zero(self.grid.clone());
        for (p, a) in self.present() {
            let s0 = if p.odd_about_zero() { -1.0 } else { 1.0 };
            let s1 = if p.odd_about_half() { -1.0 } else { 1.0 };
            let get = |row: ndarray::ArrayView1<f64>, j: isize| -> f64 {
                if j < 0 {
                    s0 * row[(-j) as usize]
                } else if j as usize > n - 1 {
                    s1 * row[2 * (n - 1) - j as usize]
                } else {
                    row[j as usize]
                }
            };
            let mut d = Array2::zeros(a.dim());
            for i in 0..self.grid.n_r() {
                let row = a.row(i);
                for j in 0..n {
                    let jj = j as isize;
                    d[[i, j]] = (get(row, jj - 2) - 8.0 * get(row, jj - 1)
                        + 8.0 * get(row, jj + 1)
                        - get(row, jj + 2))
                        / (12.0 * h);
                }
            }
            out.comps[p.flip_both().index()] = match out.comps[p.flip_both().index()].take() {
                Some(mut acc) => {
                    acc += &d;
                    Some(acc)
                }
                None => Some(d),
            };
        }
        out
    }

    // d/dR; on log grids differentiates in s = log R and divides by R
    pub fn deriv_r(&self) -> ScalarField {
        let mut out = self.map_rows_radial_stencil();
        if self.grid.spacing == RadialSpacing::LogR {
            for slot in out.comps.iter_mut().flatten() {
                for i in 0..self.grid.n_r() {
                    let inv_r = 1.0 / self.grid.r[i];
                    for j in 0..self.grid.n_beta() {
                        slot[[i, j]] *= inv_r;
                    }
                }
            }
        }
        out
    }

    // R d/dR; on log grids this is exactly d/ds
    pub fn r_deriv_r(&self) -> ScalarField {
        let mut out = self.map_rows_radial_stencil();
        if self.grid.spacing == RadialSpacing::Uniform {
            for slot in out.comps.iter_mut().flatten() {
                for i in 0..self.grid.n_r() {
                    let r = self.grid.r[i];
                    for j in 0..self.grid.n_beta() {
                        slot[[i, j]] *= r;
                    }
                }
            }
        }
        out
    }

    // derivative along the radial index coordinate (R or s), parity preserved:
    // 4th-order centered interior, 2nd-order centered then one-sided at edges
    fn map_rows_radial_stencil(&self) -> ScalarField {
        let n = self.grid.n_r();
        let h = self.grid.h_radial;
        let mut out = ScalarField::zero(self.grid.clone());
        for (p, a) in self.present() {
            let mut d = Array2::zeros(a.dim());
            for j in 0..self.grid.n_beta() {
                let col: Vec<f64> = (0..n).map(|i| a[[i, j]]).collect();
                d[[0, j]] = (-3.0 * col[0] + 4.0 * col[1] - col[2]) / (2.0 * h);
                d[[1, j]] = (col[2] - col[0]) / (2.0 * h);
                for i in 2..n - 2 {
                    d[[i, j]] = (col[i - 2] - 8.0 * col[i - 1] + 8.0 * col[i + 1] - col[i + 2])
                        / (12.0 * h);
                }
                d[[n - 2, j]] = (col[n - 1] - col[n - 3]) / (2.0 * h);
                d[[n - 1, j]] = (3.0 * col[n - 1] - 4.0 * col[n - 2] + col[n - 3]) / (2.0 * h);
            }
            out.comps[p.index()] = Some(d);
        }
        out
    }

    // field under beta -> pi/2 - beta: reverse the beta axis, swap mirror classes
    pub fn mirror(&self) -> ScalarField {
        let n = self.grid.n_beta();
        let mut out = ScalarField::zero(self.grid.clone());
        for (p, a) in self.present() {
            let mut m = Array2::zeros(a.dim());
            for i in 0..self.grid.n_r() {
                for j in 0..n {
                    m[[i, j]] = a[[i, n - 1 - j]];
                }
            }
            out.comps[p.mirror().index()] = Some(m);
        }
        out
    }
}

// data standing for R^{power/alpha} times `base`; the prefactor is never
// materialized, so Cartesian derivatives stay representable at any alpha
#[derive(Clone, Debug)]
pub struct PrefactoredField {
    pub base: ScalarField,
    pub power: i32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CartesianDir {
    X,
    Y,
}

impl PrefactoredField {
    pub fn plain(base: ScalarField) -> PrefactoredField {
        PrefactoredField { base, power: 0 }
    }

    // d_x (R^{m/a} b) = R^{(m-1)/a} (m cos(b) b + a cos(b) R dR b - sin(b) db b)
    // d_y (R^{m/a} b) = R^{(m-1)/a} (m sin(b) b + a sin(b) R dR b + cos(b) db b)
    pub fn cartesian_derivative(&self, dir: CartesianDir) -> PrefactoredField {
        let alpha = self.base.grid.alpha;
        let m = self.power as f64;
        let rdr = self.base.r_deriv_r();
        let db = self.base.deriv_beta();
        let base = match dir {
            CartesianDir::X => self
                .base
                .scale(m)
                .add(&rdr.scale(alpha))
                .mul_cos_beta()
                .sub(&db.mul_sin_beta()),
            CartesianDir::Y => self
                .base
                .scale(m)
                .add(&rdr.scale(alpha))
                .mul_sin_beta()
                .add(&db.mul_cos_beta()),
        };
        PrefactoredField {
            base,
            power: self.power - 1,
        }
    }

    // sample R^{power/alpha} * base at a node, with graceful underflow
    pub fn sample(&self, i: usize, j: usize) -> f64 {
        let g = &self.base.grid;
        let expo = self.power as f64 / g.alpha * g.r[i].ln();
        if expo < -700.0 {
            return 0.0;
        }
        expo.exp() * self.base.value_quarter(i, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, RadialSpacing};
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::build(96, 49, 8.0, 0.1, RadialSpacing::LogR).unwrap())
    }

    #[test]
    fn parity_algebra() {
        assert_eq!(OO.product(OO), EE);
        assert_eq!(OO.product(EE), OO);
        assert_eq!(OE.product(EO), OO);
        assert_eq!(OE.flip_both(), EO);
        assert_eq!(OO.flip_both(), EE);
        assert_eq!(OE.mirror(), EO);
        assert_eq!(OO.mirror(), OO);
    }

    #[test]
    fn product_lands_in_convolved_class() {
        let g = grid();
        let a = ScalarField::from_fn(g.clone(), OO, |_, b| (2.0 * b).sin());
        let b = ScalarField::from_fn(g.clone(), EO, |_, b| b.cos());
        let p = a.mul(&b);
        assert!(p.comp(OE).is_some());
        assert!(p.comp(OO).is_none());
        assert!(p.comp(EE).is_none());
        // sin(2b) cos(b) value check
        let v = p.value_quarter(10, 12);
        let beta = g.beta[12];
        assert!((v - (2.0 * beta).sin() * beta.cos()).abs() < 1e-14);
    }

    #[test]
    fn deriv_beta_spectral_accuracy_and_class_flip() {
        let g = grid();
        let f = ScalarField::from_fn(g.clone(), OO, |_, b| (4.0 * b).sin());
        let d = f.deriv_beta();
        assert!(d.comp(EE).is_some());
        let mut max_err: f64 = 0.0;
        for j in 0..g.n_beta() {
            let exact = 4.0 * (4.0 * g.beta[j]).cos();
            max_err = max_err.max((d.value_quarter(5, j) - exact).abs());
        }
        // 4th-order stencil at h ~ 0.0327
        assert!(max_err < 2e-4, "max_err = {max_err}");
    }

    #[test]
    fn deriv_beta_odd_edge_uses_reflection() {
        let g = grid();
        // cos(b): even about 0, odd about pi/2
        let f = ScalarField::from_fn(g.clone(), EO, |_, b| b.cos());
        let d = f.deriv_beta();
        let mut max_err: f64 = 0.0;
        for j in 0..g.n_beta() {
            max_err = max_err.max((d.value_quarter(7, j) + g.beta[j].sin()).abs());
        }
        assert!(max_err < 1e-5, "max_err = {max_err}");
    }

    #[test]
    fn r_deriv_matches_powers() {
        let g = grid();
        let f = ScalarField::from_fn(g.clone(), EE, |r, _| r * r);
        let d = f.deriv_r();
        let rd = f.r_deriv_r();
        let mut max_rel: f64 = 0.0;
        for i in 2..g.n_r() - 2 {
            max_rel = max_rel.max((d.value_quarter(i, 3) - 2.0 * g.r[i]).abs() / (2.0 * g.r[i]));
            max_rel =
                max_rel.max((rd.value_quarter(i, 3) - 2.0 * g.r[i] * g.r[i]).abs() / (2.0 * g.r[i] * g.r[i]));
        }
        assert!(max_rel < 5e-5, "max_rel = {max_rel}");
    }

    #[test]
    fn value_full_reflects_signs() {
        let g = grid();
        let f = ScalarField::from_fn(g.clone(), OO, |r, b| r.min(1.0) * (2.0 * b).sin());
        let j = 10;
        let b = g.beta[j];
        let v = f.value_quarter(20, j);
        assert!((f.value_full(20, PI - b) + v).abs() < 1e-14);
        assert!((f.value_full(20, PI + b) - v).abs() < 1e-13);
        assert!((f.value_full(20, 2.0 * PI - b) + v).abs() < 1e-13);
    }

    #[test]
    fn mirror_swaps_sin_cos() {
        let g = grid();
        let f = ScalarField::from_fn(g.clone(), EO, |_, b| b.cos());
        let m = f.mirror();
        assert!(m.comp(OE).is_some());
        for j in 0..g.n_beta() {
            assert!((m.value_quarter(4, j) - g.beta[j].sin()).abs() < 1e-12);
        }
    }

    // d_y (R^{1/a} sin b) = 1 exactly
    #[test]
    fn cartesian_derivative_recovers_constant() {
        let g = grid();
        let f = PrefactoredField {
            base: ScalarField::from_fn(g.clone(), OE, |_, b| b.sin()),
            power: 1,
        };
        let dy = f.cartesian_derivative(CartesianDir::Y);
        assert_eq!(dy.power, 0);
        let mut max_err: f64 = 0.0;
        for i in 3..g.n_r() - 3 {
            for j in 0..g.n_beta() {
                max_err = max_err.max((dy.base.value_quarter(i, j) - 1.0).abs());
            }
        }
        assert!(max_err < 1e-5, "max_err = {max_err}");
        // and d_x of the same field is 0
        let dx = f.cartesian_derivative(CartesianDir::X);
        let mut max_abs: f64 = 0.0;
        for i in 3..g.n_r() - 3 {
            for j in 0..g.n_beta() {
                max_abs = max_abs.max(dx.base.value_quarter(i, j).abs());
            }
        }
        assert!(max_abs < 1e-5, "max_abs = {max_abs}");
    }

    // mixed partials commute on a smooth compactly supported field
    #[test]
    fn cartesian_mixed_partials_commute() {
        let g = grid();
        let f = PrefactoredField::plain(ScalarField::from_fn(g.clone(), EE, |r, _| {
            let u: f64 = (r - 2.0) / 1.5;
            if u.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - u * u)).exp()
            } else {
                0.0
            }
        }));
        let dxy = f
            .cartesian_derivative(CartesianDir::X)
            .cartesian_derivative(CartesianDir::Y);
        let dyx = f
            .cartesian_derivative(CartesianDir::Y)
            .cartesian_derivative(CartesianDir::X);
        assert_eq!(dxy.power, dyx.power);
        let mut max_err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in Parity::all() {
            let (a, b) = (dxy.base.comp(p), dyx.base.comp(p));
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    for i in 4..g.n_r() - 4 {
                        for j in 0..g.n_beta() {
                            max_err = max_err.max((a[[i, j]] - b[[i, j]]).abs());
                            scale = scale.max(a[[i, j]].abs());
                        }
                    }
                }
                _ => {
                    let only = a.or(b).unwrap();
                    for v in only.iter() {
                        max_err = max_err.max(v.abs());
                    }
                }
            }
        }
        assert!(max_err < 1e-4 * scale.max(1.0), "max_err = {max_err}, scale = {scale}");
    }
}
