//! Exhaustive active-set solver for the pointwise augmentation QP.
//!
//! The decision vector is `x = (v, w) ∈ R^{2m}` and there are `4m` scalar
//! inequality constraints, ordered as the multipliers are stacked:
//! `G₁` (0..m), `G₂` (m..2m), `H₁` (2m..3m), `H₂` (3m..4m). Every regular
//! active set is solved as an equality-constrained QP through one KKT
//! system; the feasible, dual-feasible candidate with the lowest cost wins.
//! Intended for `m ≤ 4` only.

use crate::augmentation::ConstraintMaps;
use crate::error::{Error, Result};
use crate::numerics::{lu_solve_vec, Matrix};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const DUAL_TOL: f64 = 1e-9;
pub const MAX_DIM: usize = 4;

/// One instance of the QP `min vᵀR_v v + wᵀR_w w` subject to the stacked
/// control and output constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct QpInstance {
    pub r_v: Matrix,
    pub r_w: Matrix,
    pub g_v: Matrix,
    pub g_w: Matrix,
    pub h_w: Matrix,
    pub delta_g: Vec<f64>,
    pub delta_h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// Scalar constraint indices held with equality.
    pub active_set: Vec<usize>,
    /// All `4m` multipliers, zero off the active set: `(λ₁, λ₂, γ₁, γ₂)`.
    pub multipliers: Vec<f64>,
    pub objective: f64,
}

impl QpSolution {
    pub fn lambda(&self) -> &[f64] {
        &self.multipliers[..self.multipliers.len() / 2]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.multipliers[self.multipliers.len() / 2..]
    }
}

impl QpInstance {
    pub fn from_maps(maps: &ConstraintMaps, delta_g: &[f64], delta_h: &[f64]) -> Self {
        Self {
            r_v: maps.r_v.clone(),
            r_w: maps.r_w.clone(),
            g_v: maps.g_v.clone(),
            g_w: maps.g_w.clone(),
            h_w: maps.h_w.clone(),
            delta_g: delta_g.to_vec(),
            delta_h: delta_h.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g_v.rows()
    }

    fn validate(&self) -> Result<()> {
        let m = self.dim();
        let square = [&self.r_v, &self.r_w, &self.g_v, &self.g_w, &self.h_w]
            .iter()
            .all(|x| x.shape() == (m, m));
        if !square || self.delta_g.len() != 2 * m || self.delta_h.len() != 2 * m {
            return Err(Error::DimensionMismatch("QP instance blocks".into()));
        }
        if m == 0 || m > MAX_DIM {
            return Err(Error::InvalidConfig(format!("oracle supports 1 <= m <= {MAX_DIM}, got {m}")));
        }
        if self.delta_g.iter().chain(&self.delta_h).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("QP offsets"));
        }
        Ok(())
    }

    /// Constraint rows `a_i` and offsets `b_i` of `a_i · x + b_i ≤ 0`.
    pub fn constraint_rows(&self) -> (Matrix, Vec<f64>) {
        let m = self.dim();
        let mut a = Matrix::zeros(4 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = self.g_v[(i, j)];
                a[(i, m + j)] = self.g_w[(i, j)];
                a[(m + i, j)] = -self.g_v[(i, j)];
                a[(m + i, m + j)] = -self.g_w[(i, j)];
                a[(2 * m + i, m + j)] = -self.h_w[(i, j)];
                a[(3 * m + i, m + j)] = self.h_w[(i, j)];
            }
        }
        (a, [self.delta_g.as_slice(), &self.delta_h].concat())
    }

    pub fn objective(&self, v: &[f64], w: &[f64]) -> f64 {
        let q = |m: &Matrix, x: &[f64]| -> f64 { m.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum() };
        q(&self.r_v, v) + q(&self.r_w, w)
    }

    /// Constraint values at `(v, w)`, in index order.
    pub fn constraint_values(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let (a, b) = self.constraint_rows();
        let x = [v, w].concat();
        a.mul_vec(&x).iter().zip(&b).map(|(ax, b)| ax + b).collect()
    }
}

/// Candidate active sets, ordered by cardinality then lexicographically.
///
/// A constraint and its mirror (`G₁ᵢ`/`G₂ᵢ`, `H₁ᵢ`/`H₂ᵢ`) have opposite
/// normals, so a set containing both is never regular and is skipped.
fn candidate_sets(m: usize) -> Vec<Vec<usize>> {
    let pairs = 2 * m;
    let mut sets = Vec::with_capacity(3_usize.pow(pairs as u32));
    for code in 0..3_usize.pow(pairs as u32) {
        let mut c = code;
        let mut set = Vec::new();
        for p in 0..pairs {
            let (block, i) = (p / m, p % m);
            let base = 2 * m * block + i;
            match c % 3 {
                1 => set.push(base),
                2 => set.push(base + m),
                _ => {}
            }
            c /= 3;
        }
        set.sort_unstable();
        sets.push(set);
    }
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets
}

/// Global minimizer by exhaustive enumeration of regular active sets.
pub fn oracle_solve(inst: &QpInstance) -> Result<QpSolution> {
    inst.validate()?;
    let m = inst.dim();
    let nx = 2 * m;
    let (a, b) = inst.constraint_rows();
    let b_scale = 1.0 + b.iter().fold(0.0_f64, |s, x| s.max(x.abs()));

    let mut best: Option<QpSolution> = None;
    for set in candidate_sets(m) {
        let k = set.len();
        let mut kkt = Matrix::zeros(nx + k, nx + k);
        kkt.set_block(0, 0, &inst.r_v.scale(2.0));
        kkt.set_block(m, m, &inst.r_w.scale(2.0));
        let mut rhs = vec![0.0; nx + k];
        for (r, &c) in set.iter().enumerate() {
            for j in 0..nx {
                kkt[(nx + r, j)] = a[(c, j)];
                kkt[(j, nx + r)] = a[(c, j)];
            }
            rhs[nx + r] = -b[c];
        }
        let Ok(sol) = lu_solve_vec(&kkt, &rhs) else {
            continue;
        };
        let (x, mu) = sol.split_at(nx);
        if mu.iter().any(|&l| l < -DUAL_TOL) {
            continue;
        }
        let ax = a.mul_vec(x);
        if ax.iter().zip(&b).any(|(p, q)| p + q > FEASIBILITY_TOL * b_scale) {
            continue;
        }
        let (v, w) = x.split_at(m);
        let objective = inst.objective(v, w);
        let improves = match &best {
            None => true,
            Some(cur) => objective < cur.objective - 1e-12 * (1.0 + cur.objective.abs()),
        };
        if improves {
            let mut multipliers = vec![0.0; 4 * m];
            for (&c, &l) in set.iter().zip(mu) {
                multipliers[c] = l.max(0.0);
            }
            best = Some(QpSolution {
                v: v.to_vec(),
                w: w.to_vec(),
                active_set: set,
                multipliers,
                objective,
            });
        }
    }
    best.ok_or(Error::Infeasible)
}

/// Largest violation of the KKT conditions at `(v, w, λ, γ)`.
pub fn kkt_residual(inst: &QpInstance, v: &[f64], w: &[f64], lambda: &[f64], gamma: &[f64]) -> f64 {
    let m = inst.dim();
    assert_eq!(lambda.len(), 2 * m);
    assert_eq!(gamma.len(), 2 * m);
    let dl: Vec<f64> = (0..m).map(|i| lambda[i] - lambda[m + i]).collect();
    let dg: Vec<f64> = (0..m).map(|i| gamma[i] - gamma[m + i]).collect();

    let gvt_dl = inst.g_v.transpose().mul_vec(&dl);
    let gwt_dl = inst.g_w.transpose().mul_vec(&dl);
    let hwt_dg = inst.h_w.transpose().mul_vec(&dg);
    let rv_v = inst.r_v.mul_vec(v);
    let rw_w = inst.r_w.mul_vec(w);

    let mut res: f64 = 0.0;
    for i in 0..m {
        res = res.max((2.0 * rv_v[i] + gvt_dl[i]).abs());
        res = res.max((2.0 * rw_w[i] + gwt_dl[i] - hwt_dg[i]).abs());
    }
    let values = inst.constraint_values(v, w);
    let mults = lambda.iter().chain(gamma);
    for (c, mu) in values.iter().zip(mults) {
        res = res.max(c.max(0.0));
        res = res.max((-mu).max(0.0));
        res = res.max((mu * c).abs());
    }
    res
}
