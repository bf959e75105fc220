//! Fixed-step closed-loop simulation of plant, baseline servo, augmentation
//! filter and the min-norm augmentation law.

use crate::augmentation::{AugmentationConfig, AugmentationParams, Limits, Multipliers};
use crate::error::{Error, Result};
use crate::lqr::{LqrWeights, ServoGains};
use crate::numerics::max_abs;
use crate::plant::PlantModel;
use crate::servo::{integrator_derivative, saturate, total_command};

/// States above this magnitude abort the run.
pub const BLOWUP_LIMIT: f64 = 1e9;
pub const DEFAULT_DT: f64 = 1e-3;

/// Piecewise-constant command: each `(time, value)` holds until the next.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandProfile {
    steps: Vec<(f64, f64)>,
}

impl CommandProfile {
    pub fn new(mut steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *t < 0.0) {
            return Err(Error::InvalidConfig("command steps must be finite with t >= 0".into()));
        }
        steps.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { steps })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            steps: vec![(0.0, value)],
        }
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    /// Value of the last step at or before `t`; 0 before the first step.
    pub fn value_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|(ts, _)| *ts <= t)
            .last()
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            steps: self.steps.iter().map(|&(t, v)| (t, v * s)).collect(),
        }
    }
}

pub fn command_profile(profile: &CommandProfile, t: f64) -> f64 {
    profile.value_at(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimFlags {
    pub augmentation: bool,
    pub hard_saturation: bool,
}

impl Default for SimFlags {
    fn default() -> Self {
        Self {
            augmentation: true,
            hard_saturation: true,
        }
    }
}

/// Dynamic state advanced by the integrator.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopState {
    pub t: f64,
    pub x_p: Vec<f64>,
    pub e_yi: Vec<f64>,
    pub w_f: Vec<f64>,
}

impl ClosedLoopState {
    pub fn zeros(n_p: usize, m: usize) -> Self {
        Self {
            t: 0.0,
            x_p: vec![0.0; n_p],
            e_yi: vec![0.0; m],
            w_f: vec![0.0; m],
        }
    }

    fn max_abs(&self) -> f64 {
        max_abs(&self.x_p).max(max_abs(&self.e_yi)).max(max_abs(&self.w_f))
    }

    fn is_finite(&self) -> bool {
        self.x_p.iter().chain(&self.e_yi).chain(&self.w_f).all(|x| x.is_finite())
    }

    fn offset(&self, d: &Derivative, h: f64) -> Self {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + h * y).collect();
        Self {
            t: self.t + h,
            x_p: add(&self.x_p, &d.x_p),
            e_yi: add(&self.e_yi, &d.e_yi),
            w_f: add(&self.w_f, &d.w_f),
        }
    }
}

/// A complete simulation setup.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantModel,
    pub gains: ServoGains,
    /// Weights the gains were designed with, when known.
    pub weights: Option<LqrWeights>,
    pub limits: Limits,
    pub params: AugmentationParams,
    /// One profile per regulated output channel.
    pub commands: Vec<CommandProfile>,
    pub duration: f64,
    pub dt: f64,
    pub flags: SimFlags,
    pub initial: Option<ClosedLoopState>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt) {
            return Err(Error::InvalidConfig("duration must be at least dt".into()));
        }
        if self.commands.len() != self.plant.n_inputs() {
            return Err(Error::InvalidConfig(format!(
                "{} command profiles for {} regulated outputs",
                self.commands.len(),
                self.plant.n_inputs()
            )));
        }
        for (i, c) in self.commands.iter().enumerate() {
            if c.steps().iter().any(|(t, _)| *t > self.duration) {
                return Err(Error::InvalidConfig(format!("command {i} has a step after the end of the run")));
            }
        }
        if let Some(init) = &self.initial {
            if init.x_p.len() != self.plant.n_states()
                || init.e_yi.len() != self.plant.n_inputs()
                || init.w_f.len() != self.plant.n_inputs()
            {
                return Err(Error::DimensionMismatch("initial state".into()));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn y_cmd(&self, t: f64) -> Vec<f64> {
        self.commands.iter().map(|c| c.value_at(t)).collect()
    }
}

/// All signals at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x_p: Vec<f64>,
    pub e_yi: Vec<f64>,
    pub w_f: Vec<f64>,
    pub y_cmd: Vec<f64>,
    pub y_reg: Vec<f64>,
    pub z_lim: Vec<f64>,
    pub u_bl_cmd: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub u_cmd: Vec<f64>,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub delta_g: Vec<f64>,
    pub delta_h: Vec<f64>,
    pub multipliers: Multipliers,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Telemetry {
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub limited_names: Vec<String>,
    pub records: Vec<Record>,
}

#[derive(Clone, Debug)]
struct Derivative {
    x_p: Vec<f64>,
    e_yi: Vec<f64>,
    w_f: Vec<f64>,
}

/// Closed-loop vector field bound to one scenario.
#[derive(Clone, Debug)]
pub struct Simulator {
    scenario: Scenario,
    config: AugmentationConfig,
}

impl Simulator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let config = AugmentationConfig::new(&scenario.plant, &scenario.gains, scenario.limits.clone(), &scenario.params)?;
        Ok(Self {
            scenario: scenario.clone(),
            config,
        })
    }

    pub fn config(&self) -> &AugmentationConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn initial_state(&self) -> ClosedLoopState {
        self.scenario
            .initial
            .clone()
            .unwrap_or_else(|| ClosedLoopState::zeros(self.scenario.plant.n_states(), self.scenario.plant.n_inputs()))
    }

    /// Signals and state derivative at `state` with the command held at `y_cmd`.
    fn evaluate(&self, state: &ClosedLoopState, y_cmd: &[f64]) -> (Record, Derivative) {
        let plant = &self.scenario.plant;
        let flags = self.scenario.flags;
        let m = plant.n_inputs();
        let mut sol = self.config.augment(&state.x_p, &state.e_yi, y_cmd, &state.w_f);
        if !flags.augmentation {
            sol.v = vec![0.0; m];
            sol.w = vec![0.0; m];
            sol.multipliers = Multipliers::zeros(m);
        }
        let u_cmd = total_command(&sol.u_bl_cmd, &sol.w);
        let u = if flags.hard_saturation {
            saturate(&u_cmd, &self.config.limits.u_min, &self.config.limits.u_max).expect("limits validated")
        } else {
            u_cmd.clone()
        };
        let (y_reg, z_lim) = plant.evaluate_outputs(&state.x_p, &u);
        let deriv = Derivative {
            x_p: plant.state_derivative(&state.x_p, &u),
            e_yi: integrator_derivative(&y_reg, y_cmd, &sol.v),
            w_f: self.config.filter_derivative(&sol.w, &state.w_f),
        };
        let record = Record {
            t: state.t,
            x_p: state.x_p.clone(),
            e_yi: state.e_yi.clone(),
            w_f: state.w_f.clone(),
            y_cmd: y_cmd.to_vec(),
            y_reg,
            z_lim,
            u_bl_cmd: sol.u_bl_cmd,
            w: sol.w,
            v: sol.v,
            u_cmd,
            u,
            g: sol.g,
            h: sol.h,
            delta_g: sol.delta_g,
            delta_h: sol.delta_h,
            multipliers: sol.multipliers,
        };
        (record, deriv)
    }

    /// Command in force over the step starting at `t`; step instants are
    /// snapped to the integration grid.
    fn command_for_step(&self, t: f64) -> Vec<f64> {
        self.scenario.y_cmd(t + 1e-6 * self.scenario.dt)
    }

    /// Signals at `state` without advancing it.
    pub fn sample(&self, state: &ClosedLoopState) -> Record {
        self.evaluate(state, &self.command_for_step(state.t)).0
    }

    /// Classical RK4 step; the augmentation is re-evaluated at every stage.
    pub fn step(&self, state: &ClosedLoopState) -> Result<(ClosedLoopState, Record)> {
        let dt = self.scenario.dt;
        let y_cmd = self.command_for_step(state.t);
        let (record, k1) = self.evaluate(state, &y_cmd);
        let (_, k2) = self.evaluate(&state.offset(&k1, 0.5 * dt), &y_cmd);
        let (_, k3) = self.evaluate(&state.offset(&k2, 0.5 * dt), &y_cmd);
        let (_, k4) = self.evaluate(&state.offset(&k3, dt), &y_cmd);
        let comb = |a: &[f64], b1: &[f64], b2: &[f64], b3: &[f64], b4: &[f64]| -> Vec<f64> {
            (0..a.len())
                .map(|i| a[i] + dt / 6.0 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i]))
                .collect()
        };
        let next = ClosedLoopState {
            t: state.t + dt,
            x_p: comb(&state.x_p, &k1.x_p, &k2.x_p, &k3.x_p, &k4.x_p),
            e_yi: comb(&state.e_yi, &k1.e_yi, &k2.e_yi, &k3.e_yi, &k4.e_yi),
            w_f: comb(&state.w_f, &k1.w_f, &k2.w_f, &k3.w_f, &k4.w_f),
        };
        if !next.is_finite() || next.max_abs() > BLOWUP_LIMIT {
            return Err(Error::NumericBlowup {
                t: next.t,
                limit: BLOWUP_LIMIT,
            });
        }
        Ok((next, record))
    }

    pub fn run(&self) -> Result<SimulationResult> {
        let n = self.scenario.n_steps();
        let mut state = self.initial_state();
        let mut records = Vec::with_capacity(n + 1);
        for k in 0..n {
            let (mut next, rec) = self.step(&state)?;
            next.t = (k + 1) as f64 * self.scenario.dt;
            records.push(rec);
            state = next;
        }
        records.push(self.sample(&state));
        let plant = &self.scenario.plant;
        let telemetry = Telemetry {
            state_names: plant.state_names.clone(),
            input_names: plant.input_names.clone(),
            output_names: plant.output_names.clone(),
            limited_names: plant.limited_names.clone(),
            records,
        };
        let metrics = Metrics::compute(&self.scenario, &self.config.limits, &telemetry);
        Ok(SimulationResult {
            final_state: state,
            telemetry,
            metrics,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub final_state: ClosedLoopState,
    pub telemetry: Telemetry,
    pub metrics: Metrics,
}

pub fn run(scenario: &Scenario) -> Result<SimulationResult> {
    Simulator::new(scenario)?.run()
}

/// Summary statistics of one run, per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    /// `max(0, u_cmd − u_max, u_min − u_cmd)` over the run.
    pub max_control_violation: Vec<f64>,
    /// Same for the achieved control `u`.
    pub max_achieved_control_violation: Vec<f64>,
    pub max_output_violation: Vec<f64>,
    pub max_abs_u_cmd: Vec<f64>,
    pub max_abs_z_lim: Vec<f64>,
    pub max_abs_y_reg: Vec<f64>,
    pub max_abs_integrator: Vec<f64>,
    /// RMS of `y_reg − y_cmd` over the second half of every command hold.
    pub rms_tracking_error: Vec<f64>,
    /// `|y_reg − y_cmd|` at the last sample of each hold, per channel.
    pub hold_end_errors: Vec<Vec<f64>>,
    /// Samples where the hard saturation changed the command.
    pub saturation_samples: usize,
}

impl Metrics {
    pub fn compute(scenario: &Scenario, limits: &Limits, telemetry: &Telemetry) -> Self {
        let m = scenario.plant.n_inputs();
        let recs = &telemetry.records;
        let viol = |x: f64, lo: f64, hi: f64| (x - hi).max(lo - x).max(0.0);
        let over = |f: &dyn Fn(&Record, usize) -> f64| -> Vec<f64> {
            (0..m)
                .map(|i| recs.iter().fold(0.0_f64, |acc, r| acc.max(f(r, i))))
                .collect()
        };
        let max_control_violation = over(&|r, i| viol(r.u_cmd[i], limits.u_min[i], limits.u_max[i]));
        let max_achieved_control_violation = over(&|r, i| viol(r.u[i], limits.u_min[i], limits.u_max[i]));
        let max_output_violation = over(&|r, i| viol(r.z_lim[i], limits.z_min[i], limits.z_max[i]));
        let max_abs_u_cmd = over(&|r, i| r.u_cmd[i].abs());
        let max_abs_z_lim = over(&|r, i| r.z_lim[i].abs());
        let max_abs_y_reg = over(&|r, i| r.y_reg[i].abs());
        let max_abs_integrator = over(&|r, i| r.e_yi[i].abs());
        let saturation_samples = recs.iter().filter(|r| r.u != r.u_cmd).count();

        let mut rms_tracking_error = Vec::with_capacity(m);
        let mut hold_end_errors = Vec::with_capacity(m);
        for i in 0..m {
            let mut bounds: Vec<f64> = scenario.commands[i]
                .steps()
                .iter()
                .map(|s| s.0)
                .filter(|&t| t > 0.0 && t < scenario.duration)
                .collect();
            bounds.insert(0, 0.0);
            bounds.push(scenario.duration);
            bounds.dedup();
            let tol = 0.5 * scenario.dt;
            let (mut sum_sq, mut count) = (0.0, 0usize);
            let mut ends = Vec::new();
            for (k, win) in bounds.windows(2).enumerate() {
                let (a, b) = (win[0], win[1]);
                let last = k + 2 == bounds.len();
                let in_hold = |t: f64| t >= a - tol && if last { t <= b + tol } else { t < b - tol };
                let mid = a + 0.5 * (b - a);
                let mut end_err = None;
                for r in recs.iter().filter(|r| in_hold(r.t)) {
                    let e = r.y_reg[i] - r.y_cmd[i];
                    if r.t >= mid - tol {
                        sum_sq += e * e;
                        count += 1;
                    }
                    end_err = Some(e.abs());
                }
                if let Some(e) = end_err {
                    ends.push(e);
                }
            }
            rms_tracking_error.push(if count > 0 { (sum_sq / count as f64).sqrt() } else { 0.0 });
            hold_end_errors.push(ends);
        }
        Self {
            max_control_violation,
            max_achieved_control_violation,
            max_output_violation,
            max_abs_u_cmd,
            max_abs_z_lim,
            max_abs_y_reg,
            max_abs_integrator,
            rms_tracking_error,
            hold_end_errors,
            saturation_samples,
        }
    }

    /// `key=value` lines with channel names as key suffixes.
    pub fn to_key_value(&self, telemetry: &Telemetry) -> String {
        let mut out = String::new();
        let mut put = |key: &str, names: &[String], vals: &[f64]| {
            for (n, v) in names.iter().zip(vals) {
                out.push_str(&format!("{key}.{n}={v:.16e}\n"));
            }
        };
        put("max_control_violation", &telemetry.input_names, &self.max_control_violation);
        put(
            "max_achieved_control_violation",
            &telemetry.input_names,
            &self.max_achieved_control_violation,
        );
        put("max_output_violation", &telemetry.limited_names, &self.max_output_violation);
        put("max_abs_u_cmd", &telemetry.input_names, &self.max_abs_u_cmd);
        put("max_abs_z_lim", &telemetry.limited_names, &self.max_abs_z_lim);
        put("max_abs_y_reg", &telemetry.output_names, &self.max_abs_y_reg);
        put("max_abs_integrator", &telemetry.output_names, &self.max_abs_integrator);
        put("rms_tracking_error", &telemetry.output_names, &self.rms_tracking_error);
        let worst_end: Vec<f64> = self
            .hold_end_errors
            .iter()
            .map(|e| e.iter().fold(0.0_f64, |a, &b| a.max(b)))
            .collect();
        put("max_hold_end_error", &telemetry.output_names, &worst_end);
        out.push_str(&format!("saturation_samples={}\n", self.saturation_samples));
        out
    }
}
