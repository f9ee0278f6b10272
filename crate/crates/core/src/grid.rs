use crate::CoreError;
use ndarray::Array1;
use std::f64::consts::PI;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RadialSpacing {
    Uniform,
    LogR,
}

// log grids span [r_max / LOG_SPAN, r_max]
pub const LOG_SPAN: f64 = 512.0;

#[derive(Clone, Debug)]
pub struct Grid {
    pub alpha: f64,
    pub spacing: RadialSpacing,
    // scaled radial coordinate R = r^alpha, strictly positive, increasing
    pub r: Array1<f64>,
    // quarter period, both endpoints included
    pub beta: Array1<f64>,
    pub h_beta: f64,
    // node spacing: in R for Uniform, in s = log R for LogR
    pub h_radial: f64,
}

impl Grid {
    pub fn build(
        n_r: usize,
        n_beta: usize,
        r_max: f64,
        alpha: f64,
        spacing: RadialSpacing,
    ) -> Result<Grid, CoreError> {
        if !(alpha > 0.0 && alpha <= 0.25) {
            return Err(CoreError::InvalidParam(format!(
                "alpha = {alpha} outside (0, 1/4]"
            )));
        }
        if n_r < 8 || n_beta < 8 {
            return Err(CoreError::InvalidParam(format!(
                "grid {n_r} x {n_beta} too small"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(CoreError::InvalidParam(format!("r_max = {r_max}")));
        }
        let (r, h_radial) = match spacing {
            RadialSpacing::Uniform => {
                let h = r_max / n_r as f64;
                (
                    Array1::from_iter((0..n_r).map(|i| (i + 1) as f64 * h)),
                    h,
                )
            }
            RadialSpacing::LogR => {
                let s_max = r_max.ln();
                let s_min = (r_max / LOG_SPAN).ln();
                let h = (s_max - s_min) / (n_r - 1) as f64;
                (
                    Array1::from_iter((0..n_r).map(|i| (s_min + i as f64 * h).exp())),
                    h,
                )
            }
        };
        let h_beta = (PI / 2.0) / (n_beta - 1) as f64;
        let beta = Array1::from_iter((0..n_beta).map(|j| j as f64 * h_beta));
        Ok(Grid {
            alpha,
            spacing,
            r,
            beta,
            h_beta,
            h_radial,
        })
    }

    pub fn n_r(&self) -> usize {
        self.r.len()
    }

    pub fn n_beta(&self) -> usize {
        self.beta.len()
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    // r^alpha, the map from physical radius to the working coordinate
    pub fn to_scaled(&self, r_phys: f64) -> f64 {
        r_phys.powf(self.alpha)
    }

    pub fn from_scaled(&self, r_scaled: f64) -> f64 {
        r_scaled.powf(1.0 / self.alpha)
    }

    // trapezoid weights for integration dR over the node set
    pub fn radial_weights(&self) -> Array1<f64> {
        trapezoid_weights(&self.r)
    }

    // trapezoid weights on the quarter period [0, pi/2]
    pub fn beta_weights(&self) -> Array1<f64> {
        trapezoid_weights(&self.beta)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.n_r() == other.n_r()
            && self.n_beta() == other.n_beta()
            && self.spacing == other.spacing
            && self.alpha == other.alpha
            && (self.r_max() - other.r_max()).abs() < 1e-14 * self.r_max()
    }
}

pub fn trapezoid_weights(nodes: &Array1<f64>) -> Array1<f64> {
    let n = nodes.len();
    let mut w = Array1::zeros(n);
    w[0] = 0.5 * (nodes[1] - nodes[0]);
    for i in 1..n - 1 {
        w[i] = 0.5 * (nodes[i + 1] - nodes[i - 1]);
    }
    w[n - 1] = 0.5 * (nodes[n - 1] - nodes[n - 2]);
    w
}
