//! Randomized cross-checks of the closed-form augmentation law.
//!
//! Each instance draws constraint maps for `m ∈ {1, 2, 3}` with the scaled
//! weights `R_v = r_v G_vᵀG_v`, `R_w = r_w G_wᵀG_w`, picks one of the four
//! constraint blocks to carry positive offsets and makes the other three
//! strictly inactive at the optimum. The closed form is then compared with
//! the enumeration oracle and certified through the KKT residual.
//! Cancellation identities and common weight scaling are checked alongside.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augmentation::{AugmentationConfig, ConstraintMaps, MultiplierMode, Multipliers};
use crate::error::Result;
use crate::numerics::Matrix;
use crate::oracle::{kkt_residual, oracle_solve, QpInstance};
use crate::plant::is_nonsingular;
use crate::scenario::{bundled_source, parse_scenario};

/// Agreement tolerance on `(v, w)` between closed form and oracle.
pub const AGREEMENT_TOL: f64 = 1e-8;
pub const KKT_TOL: f64 = 1e-8;
pub const IDENTITY_TOL: f64 = 1e-12;

/// Deliberate corruption of the closed form, for exercising the checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Halves every multiplier before the policies are formed.
    HalveMultipliers,
    /// Drops the clamp at zero so negative multipliers leak through.
    SkipClamp,
}

impl std::str::FromStr for Fault {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halve-multipliers" => Ok(Fault::HalveMultipliers),
            "skip-clamp" => Ok(Fault::SkipClamp),
            other => Err(crate::error::Error::InvalidConfig(format!("unknown fault `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub count: usize,
    pub mode: MultiplierMode,
    pub fault: Option<Fault>,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
}

impl VerifyConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        Self {
            seed,
            count,
            mode: MultiplierMode::Full,
            fault: None,
            threads: 0,
        }
    }
}

/// A random QP with exactly one block of positive offsets.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub maps: ConstraintMaps,
    pub delta_g: Vec<f64>,
    pub delta_h: Vec<f64>,
    /// 0..4 for `G₁, G₂, H₁, H₂`.
    pub active_block: usize,
}

impl RandomInstance {
    pub fn dim(&self) -> usize {
        self.maps.dim()
    }

    pub fn qp(&self) -> QpInstance {
        QpInstance::from_maps(&self.maps, &self.delta_g, &self.delta_h)
    }
}

#[derive(Clone, Debug, Default)]
struct CheckStat {
    passed: usize,
    failed: usize,
    max: f64,
}

impl CheckStat {
    fn record(&mut self, value: f64, tol: f64) -> bool {
        let ok = value.is_finite() && value <= tol;
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.max = if value.is_nan() { f64::NAN } else { self.max.max(value) };
        ok
    }

    fn merge(&mut self, o: &CheckStat) {
        self.passed += o.passed;
        self.failed += o.failed;
        self.max = if self.max.is_nan() || o.max.is_nan() { f64::NAN } else { self.max.max(o.max) };
    }
}

/// Pass/fail counts and worst residuals of one verification run.
#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub seed: u64,
    pub count: usize,
    pub agreement: CheckSummary,
    pub kkt: CheckSummary,
    pub scaling: CheckSummary,
    pub identities: CheckSummary,
    pub oracle_failures: usize,
    pub elapsed: Duration,
    /// First few failing instance indices.
    pub failing_instances: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CheckSummary {
    pub passed: usize,
    pub failed: usize,
    pub max_residual: f64,
}

impl From<&CheckStat> for CheckSummary {
    fn from(s: &CheckStat) -> Self {
        Self {
            passed: s.passed,
            failed: s.failed,
            max_residual: s.max,
        }
    }
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.oracle_failures == 0
            && [self.agreement, self.kkt, self.scaling, self.identities]
                .iter()
                .all(|c| c.failed == 0 && c.passed > 0)
    }

    pub fn summary(&self) -> String {
        let line = |name: &str, c: &CheckSummary, tol: f64| {
            format!(
                "{name:<22} {:>6}/{:<6} passed  max residual {:.3e} (tol {tol:.0e})\n",
                c.passed,
                c.passed + c.failed,
                c.max_residual
            )
        };
        let mut s = format!("seed {} count {} in {:.2?}\n", self.seed, self.count, self.elapsed);
        s += &line("closed form vs oracle", &self.agreement, AGREEMENT_TOL);
        s += &line("KKT residual", &self.kkt, KKT_TOL);
        s += &line("weight scaling", &self.scaling, AGREEMENT_TOL);
        s += &line("cancellation", &self.identities, IDENTITY_TOL);
        if self.oracle_failures > 0 {
            s += &format!("oracle found no solution on {} instances\n", self.oracle_failures);
        }
        if !self.failing_instances.is_empty() {
            s += &format!("first failing instances: {:?}\n", self.failing_instances);
        }
        s += if self.all_passed() { "PASS\n" } else { "FAIL\n" };
        s
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize) -> Matrix {
    loop {
        let mut a = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
            a[(i, i)] += if rng.random_bool(0.5) { 1.5 } else { -1.5 };
        }
        if !is_nonsingular(&a) {
            continue;
        }
        // Keep the conditioning moderate so 1e-8 agreement is meaningful.
        if let Ok(inv) = a.inverse() {
            if a.max_abs() * inv.max_abs() < 50.0 {
                return a;
            }
        }
    }
}

/// Draws one instance; `block` selects which of `G₁, G₂, H₁, H₂` is active.
pub fn random_instance(rng: &mut ChaCha8Rng, m: usize, block: usize) -> RandomInstance {
    assert!(block < 4);
    loop {
        let g_v = random_matrix(rng, m);
        let g_w = random_matrix(rng, m);
        let h_w = random_matrix(rng, m);
        let r_v = rng.random_range(0.2..5.0);
        let r_w = rng.random_range(0.2..5.0);
        let Ok(maps) = ConstraintMaps::new(g_v, g_w, h_w, r_v, r_w) else {
            continue;
        };
        // Offsets of the active block are R μ / 2 with μ ≥ 0, so the
        // clamped multipliers equal μ and every row of the block is tight.
        let mut mu: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.75) { rng.random_range(0.05..2.0) } else { 0.0 })
            .collect();
        if mu.iter().all(|&x| x == 0.0) {
            mu[rng.random_range(0..m)] = rng.random_range(0.05..2.0);
        }
        let r = if block < 2 { &maps.r_lambda } else { &maps.r_gamma };
        let active: Vec<f64> = r.mul_vec(&mu).iter().map(|x| 0.5 * x).collect();
        if active.iter().all(|&x| x <= 0.0) {
            continue;
        }

        // The optimum is the stationary point for multipliers μ on the active
        // block; the other blocks get offsets that keep them strictly slack there.
        let mut mult = Multipliers::zeros(m);
        match block {
            0 => mult.lambda1 = mu,
            1 => mult.lambda2 = mu,
            2 => mult.gamma1 = mu,
            _ => mult.gamma2 = mu,
        }
        let (v, w) = maps.optimal_policies(&mult);
        let mut blocks = vec![vec![0.0; m]; 4];
        blocks[block] = active;
        let (a, _) = QpInstance::from_maps(&maps, &vec![0.0; 2 * m], &vec![0.0; 2 * m]).constraint_rows();
        let lin = a.mul_vec(&[v, w].concat());
        // Inactive offsets are R ν / 2 with ν < 0, so the clamped multipliers
        // are zero, scaled until every row is strictly slack at the optimum.
        let mut ok = true;
        for (b, vals) in blocks.iter_mut().enumerate() {
            if b == block {
                continue;
            }
            let r = if b < 2 { &maps.r_lambda } else { &maps.r_gamma };
            let Some(d) = (0..100).find_map(|_| {
                let nu: Vec<f64> = (0..m).map(|_| -rng.random_range(0.05..2.0)).collect();
                let d: Vec<f64> = r.mul_vec(&nu).iter().map(|x| 0.5 * x).collect();
                d.iter().all(|&x| x < -1e-3).then_some(d)
            }) else {
                ok = false;
                break;
            };
            let mut scale: f64 = 1.0;
            for i in 0..m {
                let need = lin[b * m + i] + rng.random_range(0.01..0.5);
                scale = scale.max(need / -d[i]);
            }
            *vals = d.iter().map(|x| scale * x).collect();
        }
        if !ok {
            continue;
        }
        return RandomInstance {
            maps,
            delta_g: [blocks[0].clone(), blocks[1].clone()].concat(),
            delta_h: [blocks[2].clone(), blocks[3].clone()].concat(),
            active_block: block,
        };
    }
}

fn corrupt(mult: &mut Multipliers, fault: Fault, raw: Option<(&ConstraintMaps, &[f64], &[f64])>) {
    match fault {
        Fault::HalveMultipliers => {
            for v in [&mut mult.lambda1, &mut mult.lambda2, &mut mult.gamma1, &mut mult.gamma2] {
                v.iter_mut().for_each(|x| *x *= 0.5);
            }
        }
        Fault::SkipClamp => {
            if let Some((maps, dg, dh)) = raw {
                let m = maps.dim();
                let lam = |d: &[f64]| maps.r_lambda.inverse().unwrap().mul_vec(d).iter().map(|x| 2.0 * x).collect();
                let gam = |d: &[f64]| maps.r_gamma.inverse().unwrap().mul_vec(d).iter().map(|x| 2.0 * x).collect();
                *mult = Multipliers {
                    lambda1: lam(&dg[..m]),
                    lambda2: lam(&dg[m..]),
                    gamma1: gam(&dh[..m]),
                    gamma2: gam(&dh[m..]),
                };
            }
        }
    }
}

/// Closed-form `(v, w, multipliers)` with an optional injected fault.
pub fn closed_form(
    maps: &ConstraintMaps,
    delta_g: &[f64],
    delta_h: &[f64],
    mode: MultiplierMode,
    fault: Option<Fault>,
) -> (Vec<f64>, Vec<f64>, Multipliers) {
    let mut mult = maps.solve_multipliers(delta_g, delta_h, mode);
    if let Some(f) = fault {
        corrupt(&mut mult, f, Some((maps, delta_g, delta_h)));
    }
    let (v, w) = maps.optimal_policies(&mult);
    (v, w, mult)
}

#[derive(Default)]
struct Partial {
    agreement: CheckStat,
    kkt: CheckStat,
    scaling: CheckStat,
    oracle_failures: usize,
    failing: Vec<usize>,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn check_instance(idx: usize, cfg: &VerifyConfig, out: &mut Partial) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(idx as u64);
    let m = 1 + idx % 3;
    let block = (idx / 3) % 4;
    let inst = random_instance(&mut rng, m, block);
    let qp = inst.qp();
    let (v, w, mult) = closed_form(&inst.maps, &inst.delta_g, &inst.delta_h, cfg.mode, cfg.fault);

    let mut ok = true;
    match oracle_solve(&qp) {
        Ok(sol) => {
            let gap = max_diff(&v, &sol.v).max(max_diff(&w, &sol.w));
            ok &= out.agreement.record(gap, AGREEMENT_TOL);
        }
        Err(_) => {
            out.oracle_failures += 1;
            ok = false;
        }
    }
    let res = kkt_residual(&qp, &v, &w, &mult.lambda(), &mult.gamma());
    ok &= out.kkt.record(res, KKT_TOL);

    let c = rng.random_range(0.1..10.0);
    let scaled = ConstraintMaps::new(
        inst.maps.g_v.clone(),
        inst.maps.g_w.clone(),
        inst.maps.h_w.clone(),
        c * inst.maps.r_v_scalar,
        c * inst.maps.r_w_scalar,
    )
    .expect("scaling keeps the maps valid");
    let (vs, ws, _) = closed_form(&scaled, &inst.delta_g, &inst.delta_h, cfg.mode, cfg.fault);
    let scale = 1.0 + v.iter().chain(&w).fold(0.0_f64, |a, x| a.max(x.abs()));
    ok &= out
        .scaling
        .record(max_diff(&v, &vs).max(max_diff(&w, &ws)) / scale, AGREEMENT_TOL);

    if !ok && out.failing.len() < 8 {
        out.failing.push(idx);
    }
}

/// Cancellation identities on the bundled plants at random states.
fn check_identities(seed: u64, count: usize) -> Result<CheckStat> {
    let mut stat = CheckStat::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1de7);
    for name in ["2_aileron_limit", "scalar_demo"] {
        let sc = parse_scenario(bundled_source(name).expect("bundled"))?;
        let cfg = AugmentationConfig::new(&sc.plant, &sc.gains, sc.limits.clone(), &sc.params)?;
        let (n, m) = (sc.plant.n_states(), sc.plant.n_inputs());
        let per = count.div_ceil(2).max(1);
        for _ in 0..per {
            let mut v = |k: usize, s: f64| (0..k).map(|_| rng.random_range(-s..s)).collect::<Vec<f64>>();
            let (x, e_y, u, wf) = (v(n, 0.5), v(m, 0.5), v(m, 0.1), v(m, 0.1));
            let dg = cfg.delta_g(&x, &e_y, &u, &wf);
            let g = cfg.control_constraints_g(&u, &wf);
            let dh = cfg.delta_h(&x, &u);
            let (_, z) = sc.plant.evaluate_outputs(&x, &u);
            let h = cfg.output_constraints_h(&z);
            let mut worst: f64 = 0.0;
            for i in 0..m {
                let sg = 1.0 + dg[i].abs().max(dg[i + m].abs());
                worst = worst.max((dg[i] + dg[i + m] - cfg.alpha_v * (g[i] + g[i + m])).abs() / sg);
                let sh = 1.0 + dh[i].abs().max(dh[i + m].abs());
                worst = worst.max((dh[i] + dh[i + m] - cfg.alpha_w * (h[i] + h[i + m])).abs() / sh);
            }
            stat.record(worst, IDENTITY_TOL);
        }
    }
    Ok(stat)
}

/// Runs `count` randomized instances split across worker threads.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let start = Instant::now();
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(cfg.count.max(1));
    let parts: Vec<Partial> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let mut p = Partial::default();
                    for idx in (t..cfg.count).step_by(threads) {
                        check_instance(idx, cfg, &mut p);
                    }
                    p
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("verify worker panicked")).collect()
    });
    let mut total = Partial::default();
    for p in &parts {
        total.agreement.merge(&p.agreement);
        total.kkt.merge(&p.kkt);
        total.scaling.merge(&p.scaling);
        total.oracle_failures += p.oracle_failures;
        total.failing.extend(&p.failing);
    }
    total.failing.sort_unstable();
    total.failing.truncate(8);
    let identities = check_identities(cfg.seed, cfg.count.min(1000))?;
    Ok(VerifyReport {
        seed: cfg.seed,
        count: cfg.count,
        agreement: (&total.agreement).into(),
        kkt: (&total.kkt).into(),
        scaling: (&total.scaling).into(),
        identities: (&identities).into(),
        oracle_failures: total.oracle_failures,
        elapsed: start.elapsed(),
        failing_instances: total.failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_have_one_positive_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..60 {
            let (m, block) = (1 + k % 3, k % 4);
            let inst = random_instance(&mut rng, m, block);
            let all = [inst.delta_g.clone(), inst.delta_h.clone()].concat();
            for b in 0..4 {
                let positive = all[b * m..(b + 1) * m].iter().any(|&x| x > 0.0);
                assert_eq!(positive, b == block, "block {b} of instance {k}");
            }
        }
    }

    #[test]
    fn small_run_passes() {
        let mut cfg = VerifyConfig::new(1, 120);
        cfg.threads = 2;
        let report = run_verify(&cfg).unwrap();
        assert!(report.all_passed(), "{}", report.summary());
        assert_eq!(report.agreement.passed, 120);
    }

    #[test]
    fn injected_faults_are_detected() {
        for fault in [Fault::HalveMultipliers, Fault::SkipClamp] {
            let mut cfg = VerifyConfig::new(2, 60);
            cfg.fault = Some(fault);
            let report = run_verify(&cfg).unwrap();
            assert!(!report.all_passed());
            assert!(report.kkt.failed > 0 && report.kkt.max_residual > KKT_TOL);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_verify(&VerifyConfig::new(5, 30)).unwrap();
        let b = run_verify(&VerifyConfig::new(5, 30)).unwrap();
        assert_eq!(a.agreement, b.agreement);
        assert_eq!(a.kkt, b.kkt);
    }
}
