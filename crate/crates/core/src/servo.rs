//! Baseline PI servo law, augmentation summing junction, saturation and the
//! anti-windup-modified integrator.

use crate::error::{Error, Result};
use crate::lqr::ServoGains;

/// Baseline command split into its integral and proportional parts.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineCommand {
    pub u_i: Vec<f64>,
    pub u_p: Vec<f64>,
    pub total: Vec<f64>,
}

/// `u_bl_cmd = −K_I e_yI − K_P x_p`.
pub fn baseline_command(gains: &ServoGains, e_yi: &[f64], x_p: &[f64]) -> Vec<f64> {
    baseline_command_parts(gains, e_yi, x_p).total
}

pub fn baseline_command_parts(gains: &ServoGains, e_yi: &[f64], x_p: &[f64]) -> BaselineCommand {
    let u_i: Vec<f64> = gains.k_i().mul_vec(e_yi).iter().map(|v| -v).collect();
    let u_p: Vec<f64> = gains.k_p().mul_vec(x_p).iter().map(|v| -v).collect();
    let total = u_i.iter().zip(&u_p).map(|(a, b)| a + b).collect();
    BaselineCommand { u_i, u_p, total }
}

/// `u_cmd = u_bl_cmd + w`.
pub fn total_command(u_bl_cmd: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(u_bl_cmd.len(), w.len());
    u_bl_cmd.iter().zip(w).map(|(a, b)| a + b).collect()
}

/// Componentwise clamp of `u_cmd` into `[u_min, u_max]`.
pub fn saturate(u_cmd: &[f64], u_min: &[f64], u_max: &[f64]) -> Result<Vec<f64>> {
    check_limits(u_min, u_max)?;
    Ok(u_cmd
        .iter()
        .zip(u_min.iter().zip(u_max))
        .map(|(&u, (&lo, &hi))| u.clamp(lo, hi))
        .collect())
}

pub fn check_limits(min: &[f64], max: &[f64]) -> Result<()> {
    if min.len() != max.len() {
        return Err(Error::DimensionMismatch("limit vectors differ in length".into()));
    }
    for (channel, (&lo, &hi)) in min.iter().zip(max).enumerate() {
        if !(lo < hi) {
            return Err(Error::BadLimits {
                channel,
                min: lo,
                max: hi,
            });
        }
    }
    Ok(())
}

/// `ė_yI = (y_reg − y_cmd) + v`.
pub fn integrator_derivative(y_reg: &[f64], y_cmd: &[f64], v: &[f64]) -> Vec<f64> {
    y_reg
        .iter()
        .zip(y_cmd)
        .zip(v)
        .map(|((y, c), v)| (y - c) + v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use proptest::prelude::*;

    fn pure_integral() -> ServoGains {
        ServoGains::new(Matrix::identity(2), Matrix::zeros(2, 3)).unwrap()
    }

    #[test]
    fn baseline_examples() {
        let g = pure_integral();
        assert_eq!(baseline_command(&g, &[0.0, 0.0], &[0.0; 3]), vec![0.0, 0.0]);
        assert_eq!(baseline_command(&g, &[1.0, -2.0], &[0.0; 3]), vec![-1.0, 2.0]);

        let k_p = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let g = ServoGains::new(Matrix::identity(2), k_p).unwrap();
        let parts = baseline_command_parts(&g, &[0.0, 0.0], &[0.01, 0.0, 0.0]);
        assert_eq!(parts.total, vec![-0.01, -0.04]);
        assert_eq!(parts.u_i, vec![-0.0, -0.0]);
    }

    #[test]
    fn summing_junction() {
        assert_eq!(total_command(&[1.0, 1.0], &[0.0, 0.0]), vec![1.0, 1.0]);
        assert_eq!(total_command(&[1.0, -1.0], &[-1.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn saturation_examples() {
        let lim = 4.0_f64.to_radians();
        let out = saturate(&[5.0_f64.to_radians()], &[-lim], &[lim]).unwrap();
        assert_eq!(out, vec![lim]);
        assert_eq!(saturate(&[0.01], &[-lim], &[lim]).unwrap(), vec![0.01]);
        assert_eq!(saturate(&[-lim], &[-lim], &[lim]).unwrap(), vec![-lim]);
        assert!(matches!(
            saturate(&[0.0], &[1.0], &[1.0]),
            Err(Error::BadLimits { channel: 0, .. })
        ));
    }

    #[test]
    fn integrator_examples() {
        assert_eq!(integrator_derivative(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(integrator_derivative(&[1.0, 0.0], &[0.0, 0.0], &[-1.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(integrator_derivative(&[0.5, -0.2], &[0.0, 0.0], &[0.0, 0.0]), vec![0.5, -0.2]);
    }

    proptest! {
        #[test]
        fn saturation_is_idempotent_and_nonexpansive(
            a in proptest::collection::vec(-5.0..5.0_f64, 3),
            b in proptest::collection::vec(-5.0..5.0_f64, 3),
        ) {
            let lo = [-1.0, -0.5, -2.0];
            let hi = [1.0, 0.25, 3.0];
            let sa = saturate(&a, &lo, &hi).unwrap();
            let sb = saturate(&b, &lo, &hi).unwrap();
            prop_assert_eq!(saturate(&sa, &lo, &hi).unwrap(), sa.clone());
            for i in 0..3 {
                prop_assert!((sa[i] - sb[i]).abs() <= (a[i] - b[i]).abs());
            }
        }
    }
}
