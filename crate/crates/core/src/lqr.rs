//! LQR synthesis of the baseline PI servo gains `K_x = [K_I, K_P]`.

use nalgebra::linalg::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::{care_residual, care_solve, eig_real_parts, lu_solve, Matrix};
use crate::plant::{is_nonsingular, ExtendedSystem};

const SYMMETRY_TOL: f64 = 1e-12;

/// State and control weights for the extended state `(e_yI, x_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrWeights {
    q: Matrix,
    r: Matrix,
}

impl LqrWeights {
    pub fn new(q: Matrix, r: Matrix) -> Result<Self> {
        if !q.is_symmetric(SYMMETRY_TOL) || !r.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidConfig("LQR weights must be symmetric".into()));
        }
        let q_min = SymmetricEigen::new(q.to_nalgebra())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if q.rows() > 0 && q_min < -SYMMETRY_TOL * 1.0_f64.max(q.max_abs()) {
            return Err(Error::InvalidConfig("Q must be positive semidefinite".into()));
        }
        if Cholesky::new(r.to_nalgebra()).is_none() {
            return Err(Error::InvalidConfig("R must be positive definite".into()));
        }
        Ok(Self { q, r })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }
}

/// Integral and proportional gains of `u_bl_cmd = −K_I e_yI − K_P x_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ServoGains {
    k_i: Matrix,
    k_p: Matrix,
}

impl ServoGains {
    pub fn new(k_i: Matrix, k_p: Matrix) -> Result<Self> {
        if !k_i.is_square() || k_p.rows() != k_i.rows() {
            return Err(Error::DimensionMismatch(format!(
                "K_I is {:?}, K_P is {:?}",
                k_i.shape(),
                k_p.shape()
            )));
        }
        if !is_nonsingular(&k_i) {
            return Err(Error::GainSingular);
        }
        Ok(Self { k_i, k_p })
    }

    /// Splits `K_x` into its first `m` columns (`K_I`) and the rest (`K_P`).
    pub fn from_k_x(k_x: &Matrix) -> Result<Self> {
        let m = k_x.rows();
        if k_x.cols() <= m {
            return Err(Error::DimensionMismatch("K_x needs more than m columns".into()));
        }
        Self::new(k_x.block(0, 0, m, m), k_x.block(0, m, m, k_x.cols() - m))
    }

    pub fn k_i(&self) -> &Matrix {
        &self.k_i
    }

    pub fn k_p(&self) -> &Matrix {
        &self.k_p
    }

    pub fn k_x(&self) -> Matrix {
        let m = self.k_i.rows();
        let mut k = Matrix::zeros(m, m + self.k_p.cols());
        k.set_block(0, 0, &self.k_i);
        k.set_block(0, m, &self.k_p);
        k
    }

    /// `A − B K_x` for the extended system.
    pub fn closed_loop_matrix(&self, ext: &ExtendedSystem) -> Matrix {
        &ext.a - &(&ext.b * &self.k_x())
    }
}

/// Result of a CARE-based design with its certificates.
#[derive(Clone, Debug)]
pub struct LqrDesign {
    pub gains: ServoGains,
    pub riccati: Matrix,
    pub care_residual: f64,
    pub closed_loop_real_parts: Vec<f64>,
}

impl LqrDesign {
    pub fn synthesize(ext: &ExtendedSystem, weights: &LqrWeights) -> Result<Self> {
        let n = ext.n_states();
        if weights.q.shape() != (n, n) || weights.r.shape() != (ext.n_inputs(), ext.n_inputs()) {
            return Err(Error::DimensionMismatch(format!(
                "weights Q {:?}, R {:?} for a system with n = {n}, m = {}",
                weights.q.shape(),
                weights.r.shape(),
                ext.n_inputs()
            )));
        }
        let p = care_solve(&ext.a, &ext.b, &weights.q, &weights.r)?;
        let k_x = lu_solve(&weights.r, &(&ext.b.transpose() * &p))?;
        let gains = ServoGains::from_k_x(&k_x)?;
        let care_residual = care_residual(&ext.a, &ext.b, &weights.q, &weights.r, &p)?;
        let closed_loop_real_parts = eig_real_parts(&gains.closed_loop_matrix(ext))?;
        if closed_loop_real_parts.iter().any(|&r| r >= 0.0) {
            return Err(Error::NotStabilizable);
        }
        log::debug!("LQR design: CARE residual {care_residual:e}");
        Ok(Self {
            gains,
            riccati: p,
            care_residual,
            closed_loop_real_parts,
        })
    }
}

/// `K_x = R⁻¹ Bᵀ P`, split into `[K_I, K_P]`.
pub fn design_lqr_servo(ext: &ExtendedSystem, weights: &LqrWeights) -> Result<ServoGains> {
    LqrDesign::synthesize(ext, weights).map(|d| d.gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{determinant, lu_solve_vec};
    use crate::plant::PlantModel;
    use crate::presets;

    #[test]
    fn scalar_chain_design() {
        let s = |x: f64| Matrix::from_rows(&[[x]]).unwrap();
        let plant = PlantModel::new(s(-1.0), s(1.0), s(1.0), s(0.0), s(1.0), s(0.0)).unwrap();
        let ext = plant.build_extended_system();
        assert_eq!(ext.a.to_rows(), vec![vec![0.0, 1.0], vec![0.0, -1.0]]);
        let weights = LqrWeights::new(Matrix::from_diag(&[1.0, 0.0]).unwrap(), s(1.0)).unwrap();
        let design = LqrDesign::synthesize(&ext, &weights).unwrap();
        assert!(design.care_residual <= 1e-8);
        assert!(design.closed_loop_real_parts.iter().all(|&r| r < 0.0));
    }

    #[test]
    fn lateral_design_is_valid() {
        let plant = presets::lateral_plant();
        let ext = plant.build_extended_system();
        let design = LqrDesign::synthesize(&ext, &presets::lateral_weights()).unwrap();
        assert!(design.care_residual <= 1e-8, "residual {}", design.care_residual);
        assert_eq!(design.closed_loop_real_parts.len(), 5);
        assert!(design.closed_loop_real_parts.iter().all(|&r| r < 0.0));
        assert!(determinant(design.gains.k_i()).abs() > 1e-6);
        assert!(design.riccati.is_symmetric(1e-10));
    }

    #[test]
    fn lateral_design_tracks_constant_commands() {
        // Steady state of (A − B K) x + B_cmd y = 0 must give y_reg = y_cmd.
        let plant = presets::lateral_plant();
        let ext = plant.build_extended_system();
        let gains = design_lqr_servo(&ext, &presets::lateral_weights()).unwrap();
        let acl = gains.closed_loop_matrix(&ext);
        for y_cmd in [[0.3, 0.0], [-0.1, 0.05]] {
            let rhs: Vec<f64> = ext.b_cmd.mul_vec(&y_cmd).iter().map(|v| -v).collect();
            let x_ss = lu_solve_vec(&acl, &rhs).unwrap();
            let u = gains.k_x().mul_vec(&x_ss).iter().map(|v| -v).collect::<Vec<_>>();
            let (y, _) = plant.evaluate_outputs(&x_ss[2..], &u);
            for (a, b) in y.iter().zip(&y_cmd) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gains_reject_singular_integral_block() {
        let err = ServoGains::new(Matrix::zeros(2, 2), Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::GainSingular));
    }

    #[test]
    fn weights_validation() {
        let i = Matrix::identity(2);
        assert!(LqrWeights::new(i.clone(), Matrix::zeros(2, 2)).is_err());
        assert!(LqrWeights::new(Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap(), i.clone()).is_err());
        assert!(LqrWeights::new(Matrix::from_diag(&[1.0, -1.0]).unwrap(), i.clone()).is_err());
        assert!(LqrWeights::new(Matrix::zeros(2, 2), i).is_ok());
    }
}
