//! Open-loop plant and the integrator-extended system built on top of it.

use crate::error::{Error, Result};
use crate::numerics::{determinant, is_hurwitz, Matrix};

/// Entrywise threshold below which a feedthrough is treated as exactly zero.
pub const ZERO_FEEDTHROUGH_TOL: f64 = 1e-12;
/// Relative determinant threshold for nonsingularity verdicts.
pub const NONSINGULAR_TOL: f64 = 1e-10;

/// LTI plant `ẋ_p = A_p x_p + B_p u` with a regulated and a limited output.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    a: Matrix,
    b: Matrix,
    c_reg: Matrix,
    d_reg: Matrix,
    c_lim: Matrix,
    d_lim: Matrix,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub limited_names: Vec<String>,
}

impl PlantModel {
    /// Validates dimensions and requires `A_p` to be Hurwitz.
    pub fn new(
        a: Matrix,
        b: Matrix,
        c_reg: Matrix,
        d_reg: Matrix,
        c_lim: Matrix,
        d_lim: Matrix,
    ) -> Result<Self> {
        let plant = Self::from_parts(a, b, c_reg, d_reg, c_lim, d_lim)?;
        if !is_hurwitz(&plant.a)? {
            return Err(Error::InvalidPlant("A_p is not Hurwitz".into()));
        }
        Ok(plant)
    }

    /// Dimension checks only. Used for degenerate test plants; simulation and
    /// design entry points go through [`PlantModel::new`].
    pub fn from_parts(
        a: Matrix,
        b: Matrix,
        c_reg: Matrix,
        d_reg: Matrix,
        c_lim: Matrix,
        d_lim: Matrix,
    ) -> Result<Self> {
        let n = a.rows();
        let m = b.cols();
        let check = |name: &str, mat: &Matrix, shape: (usize, usize)| {
            if mat.shape() == shape {
                Ok(())
            } else {
                Err(Error::InvalidPlant(format!(
                    "{name} is {:?}, expected {shape:?}",
                    mat.shape()
                )))
            }
        };
        check("A_p", &a, (n, n))?;
        check("B_p", &b, (n, m))?;
        check("C_p_reg", &c_reg, (m, n))?;
        check("D_p_reg", &d_reg, (m, m))?;
        check("C_p", &c_lim, (m, n))?;
        check("D_p", &d_lim, (m, m))?;
        if m == 0 || n < m {
            return Err(Error::InvalidPlant(format!(
                "need m >= 1 and n_p >= m, got n_p = {n}, m = {m}"
            )));
        }
        let names = |prefix: &str, k: usize| (0..k).map(|i| format!("{prefix}{}", i + 1)).collect();
        Ok(Self {
            a,
            b,
            c_reg,
            d_reg,
            c_lim,
            d_lim,
            state_names: names("x", n),
            input_names: names("u", m),
            output_names: names("y", m),
            limited_names: names("z", m),
        })
    }

    pub fn with_names(
        mut self,
        states: Vec<String>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        limited: Vec<String>,
    ) -> Result<Self> {
        if states.len() != self.n_states()
            || inputs.len() != self.n_inputs()
            || outputs.len() != self.n_inputs()
            || limited.len() != self.n_inputs()
        {
            return Err(Error::InvalidPlant("name list length mismatch".into()));
        }
        self.state_names = states;
        self.input_names = inputs;
        self.output_names = outputs;
        self.limited_names = limited;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c_reg(&self) -> &Matrix {
        &self.c_reg
    }

    pub fn d_reg(&self) -> &Matrix {
        &self.d_reg
    }

    pub fn c_lim(&self) -> &Matrix {
        &self.c_lim
    }

    pub fn d_lim(&self) -> &Matrix {
        &self.d_lim
    }

    /// `(y_reg, z_lim)` for state `x_p` and achieved control `u`.
    pub fn evaluate_outputs(&self, x_p: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = add(&self.c_reg.mul_vec(x_p), &self.d_reg.mul_vec(u));
        let z = add(&self.c_lim.mul_vec(x_p), &self.d_lim.mul_vec(u));
        (y, z)
    }

    pub fn state_derivative(&self, x_p: &[f64], u: &[f64]) -> Vec<f64> {
        add(&self.a.mul_vec(x_p), &self.b.mul_vec(u))
    }

    /// True iff `[[A_p, B_p], [C_p_reg, D_p_reg]]` is nonsingular, i.e. the
    /// regulated output has no transmission zero at the origin and the
    /// integrator-extended pair is controllable.
    pub fn check_no_origin_transmission_zero(&self) -> bool {
        let n = self.n_states();
        let m = self.n_inputs();
        let mut s = Matrix::zeros(n + m, n + m);
        s.set_block(0, 0, &self.a);
        s.set_block(0, n, &self.b);
        s.set_block(n, 0, &self.c_reg);
        s.set_block(n, n, &self.d_reg);
        is_nonsingular(&s)
    }

    pub fn classify_relative_degree(&self) -> Result<RelativeDegree> {
        if is_nonsingular(&self.d_lim) {
            return Ok(RelativeDegree::Zero);
        }
        let d_is_zero = self
            .d_lim
            .as_slice()
            .iter()
            .all(|x| x.abs() < ZERO_FEEDTHROUGH_TOL);
        if d_is_zero && is_nonsingular(&(&self.c_lim * &self.b)) {
            return Ok(RelativeDegree::One);
        }
        Err(Error::UnsupportedOutput)
    }

    /// Assembles the integrator-augmented open-loop system with state `(e_yI, x_p)`.
    pub fn build_extended_system(&self) -> ExtendedSystem {
        let n = self.n_states();
        let m = self.n_inputs();
        let mut a = Matrix::zeros(n + m, n + m);
        a.set_block(0, m, &self.c_reg);
        a.set_block(m, m, &self.a);
        let mut b = Matrix::zeros(n + m, m);
        b.set_block(0, 0, &self.d_reg);
        b.set_block(m, 0, &self.b);
        let mut b_cmd = Matrix::zeros(n + m, m);
        b_cmd.set_block(0, 0, &Matrix::identity(m).scale(-1.0));
        ExtendedSystem { a, b, b_cmd, m }
    }
}

/// `|det(M)| > 1e-10 · max(1, ‖M‖_max)`.
pub fn is_nonsingular(m: &Matrix) -> bool {
    determinant(m).abs() > NONSINGULAR_TOL * 1.0_f64.max(m.max_abs())
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Relative degree of the limited output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelativeDegree {
    /// `det(D_p) ≠ 0`: the output depends on `u` directly.
    Zero,
    /// `D_p = 0`, `det(C_p B_p) ≠ 0`.
    One,
}

/// `ẋ = A x + B u + B_cmd (y_cmd − v)` with `x = (e_yI, x_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub b_cmd: Matrix,
    m: usize,
}

impl ExtendedSystem {
    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rank;
    use crate::presets;

    fn scalar_plant(a: f64, b: f64, c: f64, d: f64) -> PlantModel {
        let s = |x: f64| Matrix::from_rows(&[[x]]).unwrap();
        PlantModel::new(s(a), s(b), s(c), s(d), s(1.0), s(0.0)).unwrap()
    }

    #[test]
    fn extended_system_block_structure() {
        let plant = presets::lateral_plant();
        let ext = plant.build_extended_system();
        assert_eq!(ext.a.shape(), (5, 5));
        assert_eq!(ext.a.block(0, 2, 2, 3), *plant.c_reg());
        assert_eq!(ext.a.block(2, 2, 3, 3), *plant.a());
        assert_eq!(ext.a.block(0, 0, 5, 2).max_abs(), 0.0);
        assert_eq!(ext.b.block(0, 0, 2, 2), *plant.d_reg());
        assert_eq!(ext.b.block(2, 0, 3, 2), *plant.b());
        assert_eq!(ext.b_cmd.block(0, 0, 2, 2), Matrix::identity(2).scale(-1.0));
        assert_eq!(ext.b_cmd.block(2, 0, 3, 2).max_abs(), 0.0);
    }

    #[test]
    fn extended_system_of_scalar_plant() {
        let ext = scalar_plant(-2.0, 3.0, 5.0, 7.0).build_extended_system();
        assert_eq!(ext.a.to_rows(), vec![vec![0.0, 5.0], vec![0.0, -2.0]]);
        assert_eq!(ext.b.as_slice(), &[7.0, 3.0]);
        assert_eq!(ext.b_cmd.as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn zero_plant() {
        let z = Matrix::zeros(1, 1);
        assert!(PlantModel::new(z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()).is_err());
        let plant = PlantModel::from_parts(z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z).unwrap();
        let ext = plant.build_extended_system();
        assert_eq!(ext.a, Matrix::zeros(2, 2));
        assert_eq!(ext.b, Matrix::zeros(2, 1));
        assert_eq!(ext.b_cmd.as_slice(), &[-1.0, 0.0]);
        assert!(!plant.check_no_origin_transmission_zero());
    }

    #[test]
    fn transmission_zero_checks() {
        assert!(presets::lateral_plant().check_no_origin_transmission_zero());

        let i2 = Matrix::identity(2);
        let p = PlantModel::new(i2.scale(-1.0), i2.clone(), i2.clone(), Matrix::zeros(2, 2), i2.clone(), i2.clone())
            .unwrap();
        assert!(p.check_no_origin_transmission_zero());

        // c = 0: integrator cannot see the plant
        assert!(!scalar_plant(-1.0, 1.0, 0.0, 0.0).check_no_origin_transmission_zero());
    }

    #[test]
    fn controllability_rank_agrees() {
        let plant = presets::lateral_plant();
        let ext = plant.build_extended_system();
        let n = ext.n_states();
        let mut ctrb = Matrix::zeros(n, n * 2);
        let mut blk = ext.b.clone();
        for k in 0..n {
            ctrb.set_block(0, 2 * k, &blk);
            blk = &ext.a * &blk;
        }
        assert_eq!(rank(&ctrb, 1e-10), 5);
        assert!(plant.check_no_origin_transmission_zero());
    }

    #[test]
    fn relative_degree_classification() {
        assert_eq!(
            presets::lateral_plant().classify_relative_degree().unwrap(),
            RelativeDegree::One
        );
        let i2 = Matrix::identity(2);
        let base = presets::lateral_plant();
        let p = PlantModel::new(
            base.a().clone(),
            base.b().clone(),
            base.c_reg().clone(),
            base.d_reg().clone(),
            base.c_lim().clone(),
            i2,
        )
        .unwrap();
        assert_eq!(p.classify_relative_degree().unwrap(), RelativeDegree::Zero);

        // C_p orthogonal to B_p and D_p = 0
        let p = PlantModel::new(
            base.a().clone(),
            base.b().clone(),
            base.c_reg().clone(),
            base.d_reg().clone(),
            Matrix::zeros(2, 3),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        assert!(matches!(p.classify_relative_degree(), Err(Error::UnsupportedOutput)));

        // small nonzero but singular D_p is rejected, not approximated
        let d = Matrix::from_rows(&[[1e-6, 0.0], [0.0, 0.0]]).unwrap();
        let p = PlantModel::new(
            base.a().clone(),
            base.b().clone(),
            base.c_reg().clone(),
            base.d_reg().clone(),
            base.c_lim().clone(),
            d,
        )
        .unwrap();
        assert!(matches!(p.classify_relative_degree(), Err(Error::UnsupportedOutput)));
    }

    #[test]
    fn output_evaluation() {
        let plant = presets::lateral_plant();
        let (y, z) = plant.evaluate_outputs(&[0.0; 3], &[0.0; 2]);
        assert_eq!((y, z), (vec![0.0; 2], vec![0.0; 2]));
        let (y, _) = plant.evaluate_outputs(&[0.0, 1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(y, vec![1.0, 0.018724]);
        let (y, _) = plant.evaluate_outputs(&[0.0; 3], &[0.0, 1.0]);
        assert_eq!(y, vec![0.0, 0.33698]);
    }

    #[test]
    fn non_hurwitz_plant_is_rejected() {
        let s = |x: f64| Matrix::from_rows(&[[x]]).unwrap();
        let err = PlantModel::new(s(0.5), s(1.0), s(1.0), s(0.0), s(1.0), s(0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidPlant(_)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn relative_degree_invariant_to_row_scaling(s1 in 0.01..100.0_f64, s2 in 0.01..100.0_f64) {
                let base = presets::lateral_plant();
                let scale = Matrix::from_diag(&[s1, s2]).unwrap();
                let p = PlantModel::new(
                    base.a().clone(), base.b().clone(), base.c_reg().clone(), base.d_reg().clone(),
                    &scale * base.c_lim(), Matrix::zeros(2, 2),
                ).unwrap();
                prop_assert_eq!(p.classify_relative_degree().unwrap(), RelativeDegree::One);
            }
        }
    }
}
