//! Min-norm CBF-based augmentation of the baseline servo-controller.
//!
//! At every instant the controller solves, in closed form, the pointwise QP
//!
//! ```text
//! min  vᵀ R_v v + wᵀ R_w w
//! s.t. [ I; −I] (G_v v + G_w w) + ΔG ≤ 0     (commanded control box)
//!      [−I;  I]  H_w w          + ΔH ≤ 0     (limited output box)
//! ```
//!
//! for the anti-windup input `v` and the control augmentation `w`. The
//! control constraints are imposed on `u_bl_cmd + w_f`, where `w_f` is a
//! first-order filtered copy of `w`, so that their time derivative is
//! realizable. Each vector block is solved as if it were the only active
//! one, the multipliers are clipped at zero and the four branches are
//! superposed.

use nalgebra::linalg::Cholesky;

use crate::error::{Error, Result};
use crate::lqr::ServoGains;
use crate::numerics::{is_hurwitz, lu_solve, vec_add, vec_scale, vec_sub, Matrix};
use crate::plant::{is_nonsingular, PlantModel, RelativeDegree};
use crate::servo::{baseline_command, check_limits};

/// How the Lagrange multipliers are scaled before clipping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MultiplierMode {
    /// `λ_k = 2 max(0, R_λλ⁻¹ ΔG_k)`, `γ_k = 2 max(0, R_γγ⁻¹ ΔH_k)`.
    #[default]
    Full,
    /// `λ_k = 2 max(0, ΔG_k / r_v)`, `γ_k = 2 max(0, ΔH_k / r_w)`: the
    /// shortcut form quoted for the scaled weights. It is not equal to the
    /// full form in general (under scaled weights `R_λλ = (1/r_v + 1/r_w) I`).
    Scaled,
    /// Multipliers of the exact QP optimum found by active-set enumeration.
    /// Differs from `Full` only when several constraint blocks are active
    /// at once. Falls back to `Full` when the enumeration finds no point.
    Exact,
}

impl MultiplierMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MultiplierMode::Full => "full",
            MultiplierMode::Scaled => "scaled",
            MultiplierMode::Exact => "exact",
        }
    }
}

impl std::str::FromStr for MultiplierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "eq311" => Ok(MultiplierMode::Full),
            "scaled" | "eq314" => Ok(MultiplierMode::Scaled),
            "exact" => Ok(MultiplierMode::Exact),
            other => Err(Error::InvalidConfig(format!("unknown multiplier mode `{other}`"))),
        }
    }
}

/// Box limits on the commanded control and on the limited output.
#[derive(Clone, Debug, PartialEq)]
pub struct Limits {
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub z_min: Vec<f64>,
    pub z_max: Vec<f64>,
}

impl Limits {
    pub fn symmetric(u: &[f64], z: &[f64]) -> Self {
        Self {
            u_min: u.iter().map(|x| -x).collect(),
            u_max: u.to_vec(),
            z_min: z.iter().map(|x| -x).collect(),
            z_max: z.to_vec(),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        for (name, v) in [
            ("u_min", &self.u_min),
            ("u_max", &self.u_max),
            ("z_min", &self.z_min),
            ("z_max", &self.z_max),
        ] {
            if v.len() != m {
                return Err(Error::DimensionMismatch(format!("{name} has {} entries, expected {m}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("limits"));
            }
        }
        check_limits(&self.u_min, &self.u_max)?;
        check_limits(&self.z_min, &self.z_max)
    }
}

/// Filter gain `K_w` specification.
#[derive(Clone, Debug, PartialEq)]
pub enum FilterGain {
    /// `K_w = k · K_P B_p`.
    ProportionalMultiple(f64),
    Explicit(Matrix),
}

impl Default for FilterGain {
    fn default() -> Self {
        FilterGain::ProportionalMultiple(4.0)
    }
}

/// Tuning scalars of the augmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationParams {
    pub alpha_v: f64,
    pub alpha_w: f64,
    pub r_v: f64,
    pub r_w: f64,
    pub filter_gain: FilterGain,
    pub mode: MultiplierMode,
}

impl Default for AugmentationParams {
    fn default() -> Self {
        Self {
            alpha_v: 10.0,
            alpha_w: 10.0,
            r_v: 1.0,
            r_w: 1.0,
            filter_gain: FilterGain::default(),
            mode: MultiplierMode::Full,
        }
    }
}

/// `R_v = r_v G_vᵀ G_v`, `R_w = r_w G_wᵀ G_w`.
pub fn make_weights(g_v: &Matrix, g_w: &Matrix, r_v: f64, r_w: f64) -> Result<(Matrix, Matrix)> {
    if !(r_v > 0.0 && r_w > 0.0) {
        return Err(Error::InvalidConfig("r_v and r_w must be positive".into()));
    }
    if !is_nonsingular(g_v) {
        return Err(Error::SingularGain("G_v"));
    }
    if !is_nonsingular(g_w) {
        return Err(Error::SingularGain("G_w"));
    }
    let r_v_mat = (&g_v.transpose() * g_v).scale(r_v).symmetrized();
    let r_w_mat = (&g_w.transpose() * g_w).scale(r_w).symmetrized();
    Ok((r_v_mat, r_w_mat))
}

/// Constraint maps and cost weights of the pointwise QP, with the
/// solve matrices precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMaps {
    pub g_v: Matrix,
    pub g_w: Matrix,
    pub h_w: Matrix,
    pub r_v_scalar: f64,
    pub r_w_scalar: f64,
    pub r_v: Matrix,
    pub r_w: Matrix,
    pub r_lambda: Matrix,
    pub r_gamma: Matrix,
    r_lambda_inv: Matrix,
    r_gamma_inv: Matrix,
    /// `R_v⁻¹ G_vᵀ`
    v_map: Matrix,
    /// `R_w⁻¹ G_wᵀ`
    w_map_g: Matrix,
    /// `R_w⁻¹ H_wᵀ`
    w_map_h: Matrix,
}

impl ConstraintMaps {
    /// Builds the maps with scaled weights `R_v = r_v G_vᵀG_v`, `R_w = r_w G_wᵀG_w`.
    pub fn new(g_v: Matrix, g_w: Matrix, h_w: Matrix, r_v: f64, r_w: f64) -> Result<Self> {
        let m = g_v.rows();
        for (name, mat) in [("G_v", &g_v), ("G_w", &g_w), ("H_w", &h_w)] {
            if mat.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!("{name} must be {m}x{m}")));
            }
        }
        if !is_nonsingular(&h_w) {
            return Err(Error::SingularGain("H_w"));
        }
        let (r_v_mat, r_w_mat) = make_weights(&g_v, &g_w, r_v, r_w)?;
        let v_map = lu_solve(&r_v_mat, &g_v.transpose())?;
        let w_map_g = lu_solve(&r_w_mat, &g_w.transpose())?;
        let w_map_h = lu_solve(&r_w_mat, &h_w.transpose())?;
        let r_lambda = (&(&g_v * &v_map) + &(&g_w * &w_map_g)).symmetrized();
        let r_gamma = (&h_w * &w_map_h).symmetrized();
        for (name, mat) in [("R_lambda", &r_lambda), ("R_gamma", &r_gamma)] {
            if Cholesky::new(mat.to_nalgebra()).is_none() {
                return Err(Error::InvalidConfig(format!("{name} is not positive definite")));
            }
        }
        let r_lambda_inv = r_lambda.inverse()?;
        let r_gamma_inv = r_gamma.inverse()?;
        Ok(Self {
            g_v,
            g_w,
            h_w,
            r_v_scalar: r_v,
            r_w_scalar: r_w,
            r_v: r_v_mat,
            r_w: r_w_mat,
            r_lambda,
            r_gamma,
            r_lambda_inv,
            r_gamma_inv,
            v_map,
            w_map_g,
            w_map_h,
        })
    }

    pub fn dim(&self) -> usize {
        self.g_v.rows()
    }

    /// Clipped multipliers for the four constraint blocks.
    pub fn solve_multipliers(&self, delta_g: &[f64], delta_h: &[f64], mode: MultiplierMode) -> Multipliers {
        let m = self.dim();
        assert_eq!(delta_g.len(), 2 * m);
        assert_eq!(delta_h.len(), 2 * m);
        let clip = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| 2.0 * v.max(0.0)).collect() };
        let (g1, g2) = delta_g.split_at(m);
        let (h1, h2) = delta_h.split_at(m);
        match mode {
            MultiplierMode::Exact => {
                let inst = crate::oracle::QpInstance::from_maps(self, delta_g, delta_h);
                match crate::oracle::oracle_solve(&inst) {
                    Ok(sol) => {
                        let (l, g) = (sol.lambda(), sol.gamma());
                        Multipliers {
                            lambda1: l[..m].to_vec(),
                            lambda2: l[m..].to_vec(),
                            gamma1: g[..m].to_vec(),
                            gamma2: g[m..].to_vec(),
                        }
                    }
                    Err(e) => {
                        log::warn!("exact multipliers unavailable ({e}), using closed form");
                        self.solve_multipliers(delta_g, delta_h, MultiplierMode::Full)
                    }
                }
            }
            MultiplierMode::Full => Multipliers {
                lambda1: clip(self.r_lambda_inv.mul_vec(g1)),
                lambda2: clip(self.r_lambda_inv.mul_vec(g2)),
                gamma1: clip(self.r_gamma_inv.mul_vec(h1)),
                gamma2: clip(self.r_gamma_inv.mul_vec(h2)),
            },
            MultiplierMode::Scaled => Multipliers {
                lambda1: clip(vec_scale(g1, 1.0 / self.r_v_scalar)),
                lambda2: clip(vec_scale(g2, 1.0 / self.r_v_scalar)),
                gamma1: clip(vec_scale(h1, 1.0 / self.r_w_scalar)),
                gamma2: clip(vec_scale(h2, 1.0 / self.r_w_scalar)),
            },
        }
    }

    /// Stationarity-optimal `(v, w)` for given multipliers.
    pub fn optimal_policies(&self, mult: &Multipliers) -> (Vec<f64>, Vec<f64>) {
        let dl = vec_sub(&mult.lambda1, &mult.lambda2);
        let dg = vec_sub(&mult.gamma1, &mult.gamma2);
        let v = vec_scale(&self.v_map.mul_vec(&dl), -0.5);
        let w = vec_scale(&vec_sub(&self.w_map_g.mul_vec(&dl), &self.w_map_h.mul_vec(&dg)), -0.5);
        (v, w)
    }

    /// Closed-form `(v, w, multipliers)` from the constraint offsets.
    pub fn solve(&self, delta_g: &[f64], delta_h: &[f64], mode: MultiplierMode) -> (Vec<f64>, Vec<f64>, Multipliers) {
        let mult = self.solve_multipliers(delta_g, delta_h, mode);
        let (v, w) = self.optimal_policies(&mult);
        (v, w, mult)
    }

    /// Constraint values `G(v, w)` and `H(w)` (stacked lower/upper blocks).
    pub fn constraint_values(&self, v: &[f64], w: &[f64], delta_g: &[f64], delta_h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = vec_add(&self.g_v.mul_vec(v), &self.g_w.mul_vec(w));
        let hw = self.h_w.mul_vec(w);
        let m = self.dim();
        let g = (0..2 * m)
            .map(|i| if i < m { s[i] } else { -s[i - m] } + delta_g[i])
            .collect();
        let h = (0..2 * m)
            .map(|i| if i < m { -hw[i] } else { hw[i - m] } + delta_h[i])
            .collect();
        (g, h)
    }

    pub fn objective(&self, v: &[f64], w: &[f64]) -> f64 {
        quad(&self.r_v, v) + quad(&self.r_w, w)
    }
}

fn quad(m: &Matrix, x: &[f64]) -> f64 {
    m.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Lagrange multipliers of the four constraint blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Multipliers {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(m: usize) -> Self {
        Self {
            lambda1: vec![0.0; m],
            lambda2: vec![0.0; m],
            gamma1: vec![0.0; m],
            gamma2: vec![0.0; m],
        }
    }

    pub fn lambda(&self) -> Vec<f64> {
        [self.lambda1.as_slice(), &self.lambda2].concat()
    }

    pub fn gamma(&self) -> Vec<f64> {
        [self.gamma1.as_slice(), &self.gamma2].concat()
    }
}

/// Full record of one augmentation evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationSolution {
    pub u_bl_cmd: Vec<f64>,
    pub e_y: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub delta_g: Vec<f64>,
    pub delta_h: Vec<f64>,
    pub multipliers: Multipliers,
    /// Anti-windup input.
    pub v: Vec<f64>,
    /// Control augmentation.
    pub w: Vec<f64>,
}

/// Validated augmentation design bound to a plant and a baseline controller.
#[derive(Clone, Debug)]
pub struct AugmentationConfig {
    plant: PlantModel,
    gains: ServoGains,
    pub limits: Limits,
    pub alpha_v: f64,
    pub alpha_w: f64,
    pub mode: MultiplierMode,
    pub relative_degree: RelativeDegree,
    pub k_w: Matrix,
    pub maps: ConstraintMaps,
}

impl AugmentationConfig {
    pub fn new(plant: &PlantModel, gains: &ServoGains, limits: Limits, params: &AugmentationParams) -> Result<Self> {
        let m = plant.n_inputs();
        limits.validate(m)?;
        if gains.k_i().rows() != m || gains.k_p().cols() != plant.n_states() {
            return Err(Error::DimensionMismatch("gains do not match plant".into()));
        }
        for (name, x) in [
            ("alpha_v", params.alpha_v),
            ("alpha_w", params.alpha_w),
            ("r_v", params.r_v),
            ("r_w", params.r_w),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {x}")));
            }
        }
        let kp_bp = gains.k_p() * plant.b();
        let k_w = match &params.filter_gain {
            FilterGain::ProportionalMultiple(k) => kp_bp.scale(*k),
            FilterGain::Explicit(k) => k.clone(),
        };
        if k_w.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!("K_w must be {m}x{m}")));
        }
        if !is_hurwitz(&(-&k_w))? {
            return Err(Error::InvalidConfig("-K_w is not Hurwitz".into()));
        }
        let relative_degree = plant.classify_relative_degree()?;
        let h_w = match relative_degree {
            RelativeDegree::Zero => plant.d_lim().clone(),
            RelativeDegree::One => plant.c_lim() * plant.b(),
        };
        let g_w = &kp_bp - &k_w;
        let maps = ConstraintMaps::new(gains.k_i().clone(), g_w, h_w, params.r_v, params.r_w)?;
        Ok(Self {
            plant: plant.clone(),
            gains: gains.clone(),
            limits,
            alpha_v: params.alpha_v,
            alpha_w: params.alpha_w,
            mode: params.mode,
            relative_degree,
            k_w,
            maps,
        })
    }

    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    pub fn gains(&self) -> &ServoGains {
        &self.gains
    }

    pub fn dim(&self) -> usize {
        self.plant.n_inputs()
    }

    /// `ẇ_f = K_w (w − w_f)`.
    pub fn filter_derivative(&self, w: &[f64], w_f: &[f64]) -> Vec<f64> {
        self.k_w.mul_vec(&vec_sub(w, w_f))
    }

    /// `g = (u_min − u_bl_cmd − w_f, u_bl_cmd − u_max + w_f)`.
    pub fn control_constraints_g(&self, u_bl_cmd: &[f64], w_f: &[f64]) -> Vec<f64> {
        let u = vec_add(u_bl_cmd, w_f);
        let lower = vec_sub(&self.limits.u_min, &u);
        let upper = vec_sub(&u, &self.limits.u_max);
        [lower, upper].concat()
    }

    /// `h = (z_min − z_lim, z_lim − z_max)`.
    pub fn output_constraints_h(&self, z_lim: &[f64]) -> Vec<f64> {
        let lower = vec_sub(&self.limits.z_min, z_lim);
        let upper = vec_sub(z_lim, &self.limits.z_max);
        [lower, upper].concat()
    }

    /// `ΔG = (s, −s) + α_v g` with `s = K_I e_y + K_P (A_p x_p + B_p u_bl_cmd) + K_w w_f`.
    pub fn delta_g(&self, x_p: &[f64], e_y: &[f64], u_bl_cmd: &[f64], w_f: &[f64]) -> Vec<f64> {
        let drift = self.plant.state_derivative(x_p, u_bl_cmd);
        let s = vec_add(
            &vec_add(&self.gains.k_i().mul_vec(e_y), &self.gains.k_p().mul_vec(&drift)),
            &self.k_w.mul_vec(w_f),
        );
        let g = self.control_constraints_g(u_bl_cmd, w_f);
        let m = self.dim();
        (0..2 * m)
            .map(|i| if i < m { s[i] } else { -s[i - m] } + self.alpha_v * g[i])
            .collect()
    }

    /// Output-constraint offset for the plant's relative degree.
    ///
    /// Degree zero: `ΔH = (−q, q) + (z_min, −z_max)` with `q = C_p x_p + D_p u_bl_cmd`.
    /// Degree one: `ΔH = (−r, r) + α_w h` with `r = C_p (A_p x_p + B_p u_bl_cmd)`.
    pub fn delta_h(&self, x_p: &[f64], u_bl_cmd: &[f64]) -> Vec<f64> {
        let m = self.dim();
        match self.relative_degree {
            RelativeDegree::Zero => {
                let q = vec_add(&self.plant.c_lim().mul_vec(x_p), &self.plant.d_lim().mul_vec(u_bl_cmd));
                (0..2 * m)
                    .map(|i| {
                        if i < m {
                            -q[i] + self.limits.z_min[i]
                        } else {
                            q[i - m] - self.limits.z_max[i - m]
                        }
                    })
                    .collect()
            }
            RelativeDegree::One => {
                let r = self.plant.c_lim().mul_vec(&self.plant.state_derivative(x_p, u_bl_cmd));
                let z = self.plant.c_lim().mul_vec(x_p);
                let h = self.output_constraints_h(&z);
                (0..2 * m)
                    .map(|i| if i < m { -r[i] } else { r[i - m] } + self.alpha_w * h[i])
                    .collect()
            }
        }
    }

    pub fn solve_multipliers(&self, delta_g: &[f64], delta_h: &[f64]) -> Multipliers {
        self.maps.solve_multipliers(delta_g, delta_h, self.mode)
    }

    pub fn optimal_policies(&self, mult: &Multipliers) -> (Vec<f64>, Vec<f64>) {
        self.maps.optimal_policies(mult)
    }

    /// Evaluates the whole augmentation law at one instant.
    ///
    /// The tracking error `e_y` is formed with the regulated output evaluated
    /// at `u = u_bl_cmd`, which keeps the law explicit when `D_p_reg ≠ 0`.
    pub fn augment(&self, x_p: &[f64], e_yi: &[f64], y_cmd: &[f64], w_f: &[f64]) -> AugmentationSolution {
        let u_bl_cmd = baseline_command(&self.gains, e_yi, x_p);
        let (y_reg, z_lim) = self.plant.evaluate_outputs(x_p, &u_bl_cmd);
        let e_y = vec_sub(&y_reg, y_cmd);
        let g = self.control_constraints_g(&u_bl_cmd, w_f);
        let h = self.output_constraints_h(&z_lim);
        let delta_g = self.delta_g(x_p, &e_y, &u_bl_cmd, w_f);
        let delta_h = self.delta_h(x_p, &u_bl_cmd);
        let multipliers = self.solve_multipliers(&delta_g, &delta_h);
        let (v, w) = self.optimal_policies(&multipliers);
        AugmentationSolution {
            u_bl_cmd,
            e_y,
            g,
            h,
            delta_g,
            delta_h,
            multipliers,
            v,
            w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::design_lqr_servo;
    use crate::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> Matrix {
        Matrix::from_rows(&[[x]]).unwrap()
    }

    fn lateral_config(mode: MultiplierMode) -> AugmentationConfig {
        let plant = presets::lateral_plant();
        let gains = design_lqr_servo(&plant.build_extended_system(), &presets::lateral_weights()).unwrap();
        let limits = Limits::symmetric(
            &[4.0_f64.to_radians(), 2.0_f64.to_radians()],
            &[60.0_f64.to_radians(), 2.0_f64.to_radians()],
        );
        let params = AugmentationParams {
            mode,
            ..AugmentationParams::default()
        };
        AugmentationConfig::new(&plant, &gains, limits, &params).unwrap()
    }

    /// Scalar plant with K_I = 1, K_P = 0, K_w = 1 (so G_w = −1) and D_p = 1.
    fn scalar_config(alpha_v: f64) -> AugmentationConfig {
        let plant = PlantModel::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.0), scalar(0.0), scalar(1.0)).unwrap();
        let gains = ServoGains::new(scalar(1.0), scalar(0.0)).unwrap();
        let params = AugmentationParams {
            alpha_v,
            filter_gain: FilterGain::Explicit(scalar(1.0)),
            ..AugmentationParams::default()
        };
        AugmentationConfig::new(&plant, &gains, Limits::symmetric(&[1.0], &[1.0]), &params).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-s..s)).collect()
    }

    #[test]
    fn filter_derivative_examples() {
        let cfg = scalar_config(1.0);
        assert_eq!(cfg.filter_derivative(&[0.3], &[0.3]), vec![0.0]);
        let cfg = lateral_config(MultiplierMode::Full);
        let mut k = cfg.clone();
        k.k_w = Matrix::identity(2).scale(3.0);
        assert_eq!(k.filter_derivative(&[1.0, -2.0], &[0.0, 0.0]), vec![3.0, -6.0]);
    }

    #[test]
    fn filtered_augmentation_converges_exponentially() {
        // w_f(t) = w (1 − e^{−k t}) for K_w = k and constant w, by RK4.
        let mut cfg = scalar_config(1.0);
        let k = 2.5;
        cfg.k_w = scalar(k);
        let (w, dt) = (0.7, 1e-3);
        let mut wf = vec![0.0];
        for _ in 0..1000 {
            let f = |x: &[f64]| cfg.filter_derivative(&[w], x);
            let k1 = f(&wf);
            let k2 = f(&[wf[0] + 0.5 * dt * k1[0]]);
            let k3 = f(&[wf[0] + 0.5 * dt * k2[0]]);
            let k4 = f(&[wf[0] + dt * k3[0]]);
            wf[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        }
        assert!((wf[0] - w * (1.0 - (-k * 1.0_f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn control_constraint_examples() {
        let cfg = lateral_config(MultiplierMode::Full);
        let g = cfg.control_constraints_g(&[0.0, 0.0], &[0.0, 0.0]);
        let (a, r) = (4.0_f64.to_radians(), 2.0_f64.to_radians());
        assert_eq!(g, vec![-a, -r, -a, -r]);
        let g = cfg.control_constraints_g(&[a - 0.01, 0.0], &[0.01, 0.0]);
        assert!(g[2].abs() < 1e-15);
        let g = cfg.control_constraints_g(&[-a, 0.0], &[0.0, 0.0]);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn output_constraint_examples() {
        let mut cfg = lateral_config(MultiplierMode::Full);
        assert!(cfg.output_constraints_h(&[0.0, 0.0]).iter().all(|&x| x < 0.0));
        let h = cfg.output_constraints_h(&cfg.limits.z_max.clone());
        assert_eq!(&h[2..], &[0.0, 0.0]);

        cfg.limits.z_min[0] = -18.0_f64.to_radians();
        cfg.limits.z_max[0] = 18.0_f64.to_radians();
        let h = cfg.output_constraints_h(&[20.0_f64.to_radians(), 0.0]);
        assert!((h[2] - 2.0_f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn delta_g_examples() {
        let cfg = lateral_config(MultiplierMode::Full);
        let dg = cfg.delta_g(&[0.0; 3], &[0.0; 2], &[0.0; 2], &[0.0; 2]);
        let expected: Vec<f64> = [cfg.limits.u_min.clone(), vec_scale(&cfg.limits.u_max, -1.0)]
            .concat()
            .iter()
            .map(|x| cfg.alpha_v * x)
            .collect();
        assert_eq!(dg, expected);

        // scalar substitution: K_I = 1, K_P = 0, K_w = 1, e_y = 1, α_v → 0
        let cfg = scalar_config(1e-300);
        let dg = cfg.delta_g(&[0.0], &[1.0], &[0.0], &[0.0]);
        assert!((dg[0] - 1.0).abs() < 1e-12 && (dg[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_h_examples() {
        let cfg = lateral_config(MultiplierMode::Full);
        let dh = cfg.delta_h(&[0.0; 3], &[0.0; 2]);
        let expected: Vec<f64> = [cfg.limits.z_min.clone(), vec_scale(&cfg.limits.z_max, -1.0)]
            .concat()
            .iter()
            .map(|x| cfg.alpha_w * x)
            .collect();
        assert_eq!(dh, expected);

        // relative degree zero, D_p = 1: command sitting on z_max
        let cfg = scalar_config(1.0);
        assert_eq!(cfg.relative_degree, RelativeDegree::Zero);
        let dh = cfg.delta_h(&[0.0], &[1.0]);
        assert_eq!(dh[1], 0.0);
    }

    #[test]
    fn cancellation_identities() {
        let cfg = lateral_config(MultiplierMode::Full);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 3, 0.5);
            let e_y = rand_vec(&mut rng, 2, 0.5);
            let u = rand_vec(&mut rng, 2, 0.1);
            let wf = rand_vec(&mut rng, 2, 0.1);
            let dg = cfg.delta_g(&x, &e_y, &u, &wf);
            let g = cfg.control_constraints_g(&u, &wf);
            for i in 0..2 {
                assert!((dg[i] + dg[i + 2] - cfg.alpha_v * (g[i] + g[i + 2])).abs() < 1e-12);
            }
            let dh = cfg.delta_h(&x, &u);
            let h = cfg.output_constraints_h(&cfg.plant().c_lim().mul_vec(&x));
            for i in 0..2 {
                assert!((dh[i] + dh[i + 2] - cfg.alpha_w * (h[i] + h[i + 2])).abs() < 1e-12);
            }
        }
    }

    fn unit_maps(h_w: f64) -> ConstraintMaps {
        ConstraintMaps::new(scalar(1.0), scalar(1.0), scalar(h_w), 1.0, 1.0).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        let maps = unit_maps(1.0);
        assert_eq!(maps.r_lambda[(0, 0)], 2.0);
        let mult = maps.solve_multipliers(&[-1.0, -2.0], &[-0.5, 0.0], MultiplierMode::Full);
        assert_eq!(mult, Multipliers::zeros(1));

        let mult = maps.solve_multipliers(&[1.0, -1.0], &[-1.0, -1.0], MultiplierMode::Full);
        assert_eq!(mult.lambda1, vec![1.0]);
        let (v, w) = maps.optimal_policies(&mult);
        assert_eq!((v.clone(), w.clone()), (vec![-0.5], vec![-0.5]));
        let (g, _) = maps.constraint_values(&v, &w, &[1.0, -1.0], &[-1.0, -1.0]);
        assert_eq!(g[0], 0.0);

        let maps = unit_maps(2.0);
        assert_eq!(maps.r_gamma[(0, 0)], 4.0);
        let mult = maps.solve_multipliers(&[-1.0, -1.0], &[4.0, -10.0], MultiplierMode::Full);
        assert_eq!(mult.gamma1, vec![2.0]);
        let (v, w) = maps.optimal_policies(&mult);
        assert_eq!((v.clone(), w.clone()), (vec![0.0], vec![2.0]));
        let (_, h) = maps.constraint_values(&v, &w, &[-1.0, -1.0], &[4.0, -10.0]);
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn scaled_mode_uses_scalar_weights() {
        let maps = ConstraintMaps::new(scalar(1.0), scalar(1.0), scalar(2.0), 2.0, 4.0).unwrap();
        let mult = maps.solve_multipliers(&[1.0, -1.0], &[1.0, -1.0], MultiplierMode::Scaled);
        assert_eq!(mult.lambda1, vec![1.0]);
        assert_eq!(mult.gamma1, vec![0.5]);
    }

    #[test]
    fn exact_mode_resolves_coupled_blocks() {
        let maps = unit_maps(1.0);
        let single = maps.solve(&[1.0, -1.0], &[-1.0, -1.0], MultiplierMode::Exact);
        let closed = maps.solve(&[1.0, -1.0], &[-1.0, -1.0], MultiplierMode::Full);
        assert!((single.0[0] - closed.0[0]).abs() < 1e-12 && (single.1[0] - closed.1[0]).abs() < 1e-12);

        let (v, w, _) = maps.solve(&[1.0, -1.0], &[1.0, -1.0], MultiplierMode::Full);
        let (_, h) = maps.constraint_values(&v, &w, &[1.0, -1.0], &[1.0, -1.0]);
        assert!(h[0] > 0.1);
        let (v, w, mult) = maps.solve(&[1.0, -1.0], &[1.0, -1.0], MultiplierMode::Exact);
        assert!((v[0] + 2.0).abs() < 1e-12 && (w[0] - 1.0).abs() < 1e-12);
        assert!(mult.lambda1[0] > 0.0 && mult.gamma1[0] > 0.0);
        assert_eq!("exact".parse::<MultiplierMode>().unwrap(), MultiplierMode::Exact);
    }

    #[test]
    fn weight_examples() {
        let (r_v, _) = make_weights(&Matrix::identity(2), &Matrix::identity(2), 3.0, 1.0).unwrap();
        assert_eq!(r_v, Matrix::identity(2).scale(3.0));
        let g_w = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let (_, r_w) = make_weights(&Matrix::identity(2), &g_w, 1.0, 1.0).unwrap();
        assert_eq!(r_w.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 2.0]]);
        assert!(matches!(
            make_weights(&Matrix::zeros(2, 2), &g_w, 1.0, 1.0),
            Err(Error::SingularGain("G_v"))
        ));
    }

    #[test]
    fn r_lambda_is_scaled_identity_under_scaled_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..=3 {
            let g_v = &Matrix::new(m, m, rand_vec(&mut rng, m * m, 1.0)).unwrap() + &Matrix::identity(m).scale(2.0);
            let g_w = &Matrix::new(m, m, rand_vec(&mut rng, m * m, 1.0)).unwrap() + &Matrix::identity(m).scale(2.0);
            let maps = ConstraintMaps::new(g_v, g_w, Matrix::identity(m), 0.7, 1.9).unwrap();
            let expected = Matrix::identity(m).scale(1.0 / 0.7 + 1.0 / 1.9);
            assert!((&maps.r_lambda - &expected).max_abs() < 1e-10);
        }
        let cfg = lateral_config(MultiplierMode::Full);
        assert!((&cfg.maps.r_lambda - &Matrix::identity(2).scale(2.0)).max_abs() < 1e-10);
    }

    #[test]
    fn zero_state_gives_zero_augmentation() {
        let cfg = lateral_config(MultiplierMode::Full);
        let sol = cfg.augment(&[0.0; 3], &[0.0; 2], &[0.0; 2], &[0.0; 2]);
        assert_eq!(sol.v, vec![0.0; 2]);
        assert_eq!(sol.w, vec![0.0; 2]);
        assert_eq!(sol.u_bl_cmd, vec![0.0; 2]);
    }

    #[test]
    fn config_validation() {
        let plant = presets::lateral_plant();
        let gains = design_lqr_servo(&plant.build_extended_system(), &presets::lateral_weights()).unwrap();
        let ok = Limits::symmetric(&[0.1, 0.1], &[1.0, 1.0]);
        let mut bad = ok.clone();
        bad.u_max[1] = bad.u_min[1];
        assert!(matches!(
            AugmentationConfig::new(&plant, &gains, bad, &AugmentationParams::default()),
            Err(Error::BadLimits { channel: 1, .. })
        ));
        let params = AugmentationParams {
            filter_gain: FilterGain::ProportionalMultiple(-4.0),
            ..AugmentationParams::default()
        };
        assert!(AugmentationConfig::new(&plant, &gains, ok.clone(), &params).is_err());
        let params = AugmentationParams {
            alpha_v: 0.0,
            ..AugmentationParams::default()
        };
        assert!(AugmentationConfig::new(&plant, &gains, ok, &params).is_err());
    }

    #[test]
    fn common_weight_scaling_leaves_policies_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 2;
        for _ in 0..100 {
            let mk = |rng: &mut ChaCha8Rng| {
                &Matrix::new(m, m, rand_vec(rng, m * m, 1.0)).unwrap() + &Matrix::identity(m).scale(2.5)
            };
            let (g_v, g_w, h_w) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let c = rng.random_range(0.1..10.0);
            let a = ConstraintMaps::new(g_v.clone(), g_w.clone(), h_w.clone(), 1.3, 0.4).unwrap();
            let b = ConstraintMaps::new(g_v, g_w, h_w, 1.3 * c, 0.4 * c).unwrap();
            let dg = rand_vec(&mut rng, 2 * m, 1.0);
            let dh = rand_vec(&mut rng, 2 * m, 1.0);
            let (va, wa, _) = a.solve(&dg, &dh, MultiplierMode::Full);
            let (vb, wb, _) = b.solve(&dg, &dh, MultiplierMode::Full);
            for (x, y) in va.iter().chain(&wa).zip(vb.iter().chain(&wb)) {
                assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn augmentation_is_lipschitz_on_random_pairs() {
        let cfg = lateral_config(MultiplierMode::Full);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let x = rand_vec(&mut rng, 3, 0.5);
            let e = rand_vec(&mut rng, 2, 0.5);
            let y = rand_vec(&mut rng, 2, 0.5);
            let wf = rand_vec(&mut rng, 2, 0.1);
            let dx = rand_vec(&mut rng, 3, 1e-6);
            let a = cfg.augment(&x, &e, &y, &wf);
            let b = cfg.augment(&vec_add(&x, &dx), &e, &y, &wf);
            let diff = a.v.iter().chain(&a.w).zip(b.v.iter().chain(&b.w)).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
            let step = dx.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            worst = worst.max(diff / step);
        }
        // A bounded ratio: the law is piecewise linear with finitely many pieces.
        assert!(worst < 1e4, "finite-difference Lipschitz ratio {worst}");
    }
}
