//! Lateral-directional model of a mid-size transport aircraft at
//! V0 = 717.17 ft/s, 25 000 ft, trimmed at 1 g, and its LQR PI weights.
//!
//! States are sideslip β (rad), stability-axis roll rate p_s and yaw rate
//! r_s (rad/s); inputs are aileron and rudder deflection (rad). The
//! regulated output is (p_s, N_y) with N_y in g; the limited output is
//! (p_s, r_s).

use crate::lqr::LqrWeights;
use crate::numerics::Matrix;
use crate::plant::PlantModel;

/// Standard gravity used to express N_y in g (ft/s²).
pub const GRAVITY_FT_S2: f64 = 32.174;

pub const A_P: [[f64; 3]; 3] = [
    [-0.11794, 0.00085, -1.0001],
    [-7.0113, -1.4492, 0.22059],
    [6.3035, 0.06511, -0.41172],
];

pub const B_P: [[f64; 2]; 3] = [[0.0, 0.015257], [-7.9662, 2.6875], [0.60926, -2.3577]];

pub const C_P_REG: [[f64; 3]; 2] = [[0.0, 1.0, 0.0], [-2.6049, 0.018724, 0.067695]];

pub const D_P_REG: [[f64; 2]; 2] = [[0.0, 0.0], [0.0, 0.33698]];

/// Limited output selects roll and yaw rate.
pub const C_P_LIM: [[f64; 3]; 2] = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub const Q_LQR_DIAG: [f64; 5] = [1.025, 1.0289, 0.0, 0.0, 1.6021];

pub const R_LQR_DIAG: [f64; 2] = [1.0, 0.49129];

/// CBF margins for both constraint families (1/s).
pub const ALPHA: f64 = 10.0;

/// Filter gain multiple: `K_w = 4 K_P B_p`.
pub const FILTER_GAIN_MULTIPLE: f64 = 4.0;

pub fn lateral_plant() -> PlantModel {
    let m = |rows: &[&[f64]]| Matrix::from_rows(rows).expect("static data");
    PlantModel::new(
        m(&[&A_P[0], &A_P[1], &A_P[2]]),
        m(&[&B_P[0], &B_P[1], &B_P[2]]),
        m(&[&C_P_REG[0], &C_P_REG[1]]),
        m(&[&D_P_REG[0], &D_P_REG[1]]),
        m(&[&C_P_LIM[0], &C_P_LIM[1]]),
        Matrix::zeros(2, 2),
    )
    .expect("lateral plant is valid")
    .with_names(
        vec!["beta".into(), "p_s".into(), "r_s".into()],
        vec!["delta_ail".into(), "delta_rud".into()],
        vec!["p_s".into(), "N_y".into()],
        vec!["p_s".into(), "r_s".into()],
    )
    .expect("name lengths match")
}

pub fn lateral_weights() -> LqrWeights {
    LqrWeights::new(
        Matrix::from_diag(&Q_LQR_DIAG).expect("static data"),
        Matrix::from_diag(&R_LQR_DIAG).expect("static data"),
    )
    .expect("weights are valid")
}

/// Roll-rate command schedule (deg/s): 0 → +40 → −40 → 0 at t = 1, 11, 21 s.
pub const ROLL_SCHEDULE_DEG: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 40.0), (11.0, -40.0), (21.0, 0.0)];
pub const TRADE_STUDY_DURATION: f64 = 30.0;

/// The five configurations of the lateral trade study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TradeStudyCase {
    /// Wide limits, no augmentation.
    UnconstrainedBaseline,
    /// Aileron ±4°, rudder ±2°, roll rate ±60 °/s, yaw rate ±2 °/s.
    AileronLimit,
    /// As `AileronLimit` with rudder ±1°.
    TwoChannelSaturation,
    /// Roll rate ±18 °/s, baseline only behind hard saturation.
    RollRateLimitBaseline,
    /// Roll rate ±18 °/s with augmentation.
    RollRateLimitAugmented,
}

impl TradeStudyCase {
    pub const ALL: [TradeStudyCase; 5] = [
        TradeStudyCase::UnconstrainedBaseline,
        TradeStudyCase::AileronLimit,
        TradeStudyCase::TwoChannelSaturation,
        TradeStudyCase::RollRateLimitBaseline,
        TradeStudyCase::RollRateLimitAugmented,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            TradeStudyCase::UnconstrainedBaseline => "1_unconstrained_baseline",
            TradeStudyCase::AileronLimit => "2_aileron_limit",
            TradeStudyCase::TwoChannelSaturation => "3_two_channel_saturation",
            TradeStudyCase::RollRateLimitBaseline => "4_roll_limit_baseline",
            TradeStudyCase::RollRateLimitAugmented => "5_roll_limit_augmented",
        }
    }

    /// `(aileron, rudder, roll rate, yaw rate)` half-widths in degrees or deg/s.
    pub fn limits_deg(self) -> [f64; 4] {
        match self {
            TradeStudyCase::UnconstrainedBaseline => [90.0, 90.0, 1000.0, 1000.0],
            TradeStudyCase::AileronLimit => [4.0, 2.0, 60.0, 2.0],
            TradeStudyCase::TwoChannelSaturation => [4.0, 1.0, 60.0, 2.0],
            TradeStudyCase::RollRateLimitBaseline | TradeStudyCase::RollRateLimitAugmented => [4.0, 2.0, 18.0, 2.0],
        }
    }

    pub fn augmented(self) -> bool {
        !matches!(
            self,
            TradeStudyCase::UnconstrainedBaseline | TradeStudyCase::RollRateLimitBaseline
        )
    }
}

/// Builds a trade-study scenario with freshly designed LQR gains.
pub fn trade_study_scenario(case: TradeStudyCase) -> crate::sim::Scenario {
    use crate::augmentation::{AugmentationParams, FilterGain, Limits};
    use crate::sim::{CommandProfile, Scenario, SimFlags, DEFAULT_DT};

    let plant = lateral_plant();
    let weights = lateral_weights();
    let gains = crate::lqr::design_lqr_servo(&plant.build_extended_system(), &weights).expect("lateral design");
    let l = case.limits_deg().map(f64::to_radians);
    let roll = CommandProfile::new(ROLL_SCHEDULE_DEG.to_vec())
        .expect("static schedule")
        .scaled(1.0_f64.to_radians());
    Scenario {
        name: case.slug().to_string(),
        plant,
        gains,
        weights: Some(weights),
        limits: Limits::symmetric(&l[..2], &l[2..]),
        params: AugmentationParams {
            alpha_v: ALPHA,
            alpha_w: ALPHA,
            r_v: 1.0,
            r_w: 1.0,
            filter_gain: FilterGain::ProportionalMultiple(FILTER_GAIN_MULTIPLE),
            mode: Default::default(),
        },
        commands: vec![roll, CommandProfile::constant(0.0)],
        duration: TRADE_STUDY_DURATION,
        dt: DEFAULT_DT,
        flags: SimFlags {
            augmentation: case.augmented(),
            hard_saturation: true,
        },
        initial: None,
    }
}
