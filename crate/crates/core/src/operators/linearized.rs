//! Linearization of `F_{nb}` at the normal state `u = 0`.

use num_complex::Complex64;

use crate::bifurcation::{GaugeState, ModelParams};
use crate::error::{invalid, Result};

use super::{apply_magnetic_laplacian, curl, curl_star, GaugePotential};

/// `A_{nb} v = ((-Δ_{a^n} - (n/b)χ) psi, curl* a0, curl α, -b θ)`.
#[derive(Debug, Clone)]
pub struct LinearizedOp {
    pub model: ModelParams,
}

impl LinearizedOp {
    pub fn new(model: &ModelParams) -> Result<Self> {
        model.validate()?;
        Ok(LinearizedOp { model: model.clone() })
    }

    /// `λ v(0)` at `λ = n/b`.
    pub fn shift(&self) -> f64 {
        self.model.v_lambda(0.0, self.model.n as f64 / self.model.b)
    }

    pub fn apply(&self, v: &GaugeState) -> Result<GaugeState> {
        if v.psi.flux != self.model.n {
            return Err(invalid("flux of psi does not match the model"));
        }
        let base = GaugePotential::base(v.grid());
        let mut psi = apply_magnetic_laplacian(&v.psi, &base)?;
        let c = Complex64::new(self.shift(), 0.0);
        psi.axpy(c, &v.psi);
        Ok(GaugeState { psi, alpha: curl_star(&v.a0), a0: curl(&v.alpha), theta: -self.model.b * v.theta })
    }
}
