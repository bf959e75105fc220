//! TOML scenario files.
//!
//! ```toml
//! name = "aileron_limit"
//!
//! [plant]
//! a = [[-1.0]]
//! b = [[1.0]]
//! c_reg = [[1.0]]
//! d_reg = [[0.0]]      # optional, zeros
//! c_lim = [[1.0]]
//! d_lim = [[0.0]]      # optional, zeros
//!
//! [limits]
//! u_max_deg = [4.0]    # `_deg` keys are converted to radians
//! z_max = [0.5]        # `*_min` defaults to `-*_max`
//!
//! [lqr]
//! q_diag = [0.25, 0.0] # or `q`/`r` full matrices, or explicit `k_i`/`k_p`
//! r_diag = [1.0]
//!
//! [augmentation]       # optional
//! alpha_v = 10.0
//! k_w = "4*Kp*Bp"      # or a matrix
//! multiplier_mode = "eq311"
//!
//! [commands]           # optional, zero commands
//! unit = "deg"         # or one unit per channel
//! steps = [[[0.0, 0.0], [1.0, 40.0]]]
//!
//! [sim]                # optional
//! dt = 1e-3
//! duration = 10.0
//! ```

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::augmentation::{AugmentationParams, FilterGain, Limits, MultiplierMode};
use crate::error::{Error, Result};
use crate::lqr::{design_lqr_servo, LqrWeights, ServoGains};
use crate::numerics::Matrix;
use crate::plant::PlantModel;
use crate::presets::TradeStudyCase;
use crate::sim::{CommandProfile, Scenario, SimFlags, DEFAULT_DT};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub plant: Spanned<PlantSection>,
    pub limits: Spanned<LimitsSection>,
    pub lqr: Spanned<LqrSection>,
    #[serde(default)]
    pub augmentation: Option<Spanned<AugmentationSection>>,
    #[serde(default)]
    pub commands: Option<Spanned<CommandsSection>>,
    #[serde(default)]
    pub sim: Option<Spanned<SimSection>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Rows,
    pub b: Rows,
    pub c_reg: Rows,
    pub d_reg: Option<Rows>,
    pub c_lim: Rows,
    pub d_lim: Option<Rows>,
    pub state_names: Option<Vec<String>>,
    pub input_names: Option<Vec<String>>,
    pub output_names: Option<Vec<String>>,
    pub limited_names: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub u_min: Option<Vec<f64>>,
    pub u_max: Option<Vec<f64>>,
    pub u_min_deg: Option<Vec<f64>>,
    pub u_max_deg: Option<Vec<f64>>,
    pub z_min: Option<Vec<f64>>,
    pub z_max: Option<Vec<f64>>,
    pub z_min_deg: Option<Vec<f64>>,
    pub z_max_deg: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrSection {
    pub q_diag: Option<Vec<f64>>,
    pub r_diag: Option<Vec<f64>>,
    pub q: Option<Rows>,
    pub r: Option<Rows>,
    pub k_i: Option<Rows>,
    pub k_p: Option<Rows>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum FilterGainSpec {
    Expression(String),
    Matrix(Rows),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSection {
    pub alpha_v: Option<f64>,
    pub alpha_w: Option<f64>,
    pub r_v: Option<f64>,
    pub r_w: Option<f64>,
    pub k_w: Option<FilterGainSpec>,
    pub multiplier_mode: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum UnitSpec {
    All(String),
    PerChannel(Vec<String>),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandsSection {
    pub unit: Option<UnitSpec>,
    #[serde(default)]
    pub steps: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub augmentation: Option<bool>,
    pub hard_saturation: Option<bool>,
}

/// Bundled trade-study scenarios, `(file stem, contents)`.
pub const BUNDLED: [(&str, &str); 6] = [
    ("1_unconstrained_baseline", include_str!("../scenarios/1_unconstrained_baseline.toml")),
    ("2_aileron_limit", include_str!("../scenarios/2_aileron_limit.toml")),
    ("3_two_channel_saturation", include_str!("../scenarios/3_two_channel_saturation.toml")),
    ("4_roll_limit_baseline", include_str!("../scenarios/4_roll_limit_baseline.toml")),
    ("5_roll_limit_augmented", include_str!("../scenarios/5_roll_limit_augmented.toml")),
    ("scalar_demo", include_str!("../scenarios/scalar_demo.toml")),
];

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled_case_source(case: TradeStudyCase) -> &'static str {
    bundled_source(case.slug()).expect("every case is bundled")
}

/// Parses and builds a scenario from a file on disk.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let file = ScenarioFile::parse(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    file.build(&text, fallback.as_deref())
}

/// Parses and builds a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ScenarioFile::parse(text)?.build(text, None)
}

impl ScenarioFile {
    /// Schema-level parse; errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    Error::Parse(format!("line {line}, column {col}: {msg}"))
                }
                None => Error::Parse(msg),
            }
        })
    }

    /// Resolves units, designs gains when only weights are given, and
    /// re-checks every model invariant.
    pub fn build(&self, text: &str, fallback_name: Option<&str>) -> Result<Scenario> {
        let plant_span = self.plant.span();
        let plant = anchored(text, &plant_span, "plant", build_plant(self.plant.get_ref()))?;
        let m = plant.n_inputs();

        let limits = anchored(text, &self.limits.span(), "limits", build_limits(self.limits.get_ref(), m))?;

        let lqr_span = self.lqr.span();
        let (weights, explicit) = anchored(text, &lqr_span, "lqr", read_lqr(self.lqr.get_ref()))?;
        let gains = match explicit {
            Some(g) => g,
            None => {
                let w = weights.as_ref().expect("weights present without explicit gains");
                let ext = plant.build_extended_system();
                if w.q().rows() != ext.n_states() || w.r().rows() != m {
                    return Err(section_error(
                        text,
                        &lqr_span,
                        "lqr",
                        format!("Q must be {n}x{n} and R {m}x{m}", n = ext.n_states()),
                    ));
                }
                design_lqr_servo(&ext, w)?
            }
        };
        if gains.k_p().cols() != plant.n_states() || gains.k_i().rows() != m {
            return Err(section_error(text, &lqr_span, "lqr", "gain shapes do not match the plant".into()));
        }

        let params = match &self.augmentation {
            Some(s) => anchored(text, &s.span(), "augmentation", build_params(s.get_ref(), m))?,
            None => AugmentationParams::default(),
        };

        let commands = match &self.commands {
            Some(s) => anchored(text, &s.span(), "commands", build_commands(s.get_ref(), m))?,
            None => vec![CommandProfile::default(); m],
        };

        let sim = self.sim.as_ref().map(|s| s.get_ref().clone()).unwrap_or_default();
        let scenario = Scenario {
            name: self
                .name
                .clone()
                .or_else(|| fallback_name.map(str::to_string))
                .unwrap_or_else(|| "scenario".into()),
            plant,
            gains,
            weights,
            limits,
            params,
            commands,
            duration: sim.duration.unwrap_or(10.0),
            dt: sim.dt.unwrap_or(DEFAULT_DT),
            flags: SimFlags {
                augmentation: sim.augmentation.unwrap_or(true),
                hard_saturation: sim.hard_saturation.unwrap_or(true),
            },
            initial: None,
        };
        match &self.sim {
            Some(s) => anchored(text, &s.span(), "sim", scenario.validate())?,
            None => scenario.validate()?,
        }
        // Augmentation invariants (−K_w Hurwitz, nonsingular maps) are checked here too.
        crate::augmentation::AugmentationConfig::new(
            &scenario.plant,
            &scenario.gains,
            scenario.limits.clone(),
            &scenario.params,
        )?;
        Ok(scenario)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let head = &text[..offset.min(text.len())];
    let line = head.matches('\n').count() + 1;
    let col = head.rfind('\n').map_or(head.len(), |i| head.len() - i - 1) + 1;
    (line, col)
}

fn section_error(text: &str, span: &Range<usize>, section: &str, msg: String) -> Error {
    let (line, _) = line_col(text, span.start);
    Error::Parse(format!("line {line}: [{section}] {msg}"))
}

/// Attaches the section's line to schema-like errors.
fn anchored<T>(text: &str, span: &Range<usize>, section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(msg) | Error::InvalidConfig(msg) | Error::DimensionMismatch(msg) | Error::InvalidPlant(msg) => {
            section_error(text, span, section, msg)
        }
        other @ (Error::BadLimits { .. } | Error::NonFinite(_)) => section_error(text, span, section, other.to_string()),
        other => other,
    })
}

fn matrix(name: &str, rows: &Rows) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(Error::Parse(format!("`{name}` is empty")));
    }
    Matrix::from_rows(rows).map_err(|e| Error::Parse(format!("`{name}`: {e}")))
}

fn build_plant(s: &PlantSection) -> Result<PlantModel> {
    let a = matrix("a", &s.a)?;
    let b = matrix("b", &s.b)?;
    let c_reg = matrix("c_reg", &s.c_reg)?;
    let c_lim = matrix("c_lim", &s.c_lim)?;
    let m = b.cols();
    let d = |name: &str, rows: &Option<Rows>| match rows {
        Some(r) => matrix(name, r),
        None => Ok(Matrix::zeros(m, m)),
    };
    let plant = PlantModel::new(a, b, c_reg, d("d_reg", &s.d_reg)?, c_lim, d("d_lim", &s.d_lim)?)?;
    let n = plant.n_states();
    let names = |given: &Option<Vec<String>>, prefix: &str, k: usize| {
        given
            .clone()
            .unwrap_or_else(|| (1..=k).map(|i| format!("{prefix}{i}")).collect())
    };
    plant.with_names(
        names(&s.state_names, "x", n),
        names(&s.input_names, "u", m),
        names(&s.output_names, "y", m),
        names(&s.limited_names, "z", m),
    )
}

fn pick(rad: &Option<Vec<f64>>, deg: &Option<Vec<f64>>, key: &str) -> Result<Option<Vec<f64>>> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(Error::Parse(format!("both `{key}` and `{key}_deg` given"))),
        (Some(v), None) => Ok(Some(v.clone())),
        (None, Some(v)) => Ok(Some(v.iter().map(|x| x.to_radians()).collect())),
        (None, None) => Ok(None),
    }
}

fn build_limits(s: &LimitsSection, m: usize) -> Result<Limits> {
    let pair = |min_rad, min_deg, max_rad, max_deg, key: &str| -> Result<(Vec<f64>, Vec<f64>)> {
        let max = pick(max_rad, max_deg, &format!("{key}_max"))?
            .ok_or_else(|| Error::Parse(format!("`{key}_max` or `{key}_max_deg` is required")))?;
        let min = pick(min_rad, min_deg, &format!("{key}_min"))?.unwrap_or_else(|| max.iter().map(|x| -x).collect());
        Ok((min, max))
    };
    let (u_min, u_max) = pair(&s.u_min, &s.u_min_deg, &s.u_max, &s.u_max_deg, "u")?;
    let (z_min, z_max) = pair(&s.z_min, &s.z_min_deg, &s.z_max, &s.z_max_deg, "z")?;
    let limits = Limits {
        u_min,
        u_max,
        z_min,
        z_max,
    };
    limits.validate(m)?;
    Ok(limits)
}

fn read_lqr(s: &LqrSection) -> Result<(Option<LqrWeights>, Option<ServoGains>)> {
    if let (Some(k_i), Some(k_p)) = (&s.k_i, &s.k_p) {
        if s.q.is_some() || s.q_diag.is_some() || s.r.is_some() || s.r_diag.is_some() {
            return Err(Error::Parse("give either weights or explicit gains, not both".into()));
        }
        return Ok((None, Some(ServoGains::new(matrix("k_i", k_i)?, matrix("k_p", k_p)?)?)));
    }
    if s.k_i.is_some() || s.k_p.is_some() {
        return Err(Error::Parse("explicit gains need both `k_i` and `k_p`".into()));
    }
    let weight = |full: &Option<Rows>, diag: &Option<Vec<f64>>, key: &str| -> Result<Matrix> {
        match (full, diag) {
            (Some(_), Some(_)) => Err(Error::Parse(format!("both `{key}` and `{key}_diag` given"))),
            (Some(rows), None) => matrix(key, rows),
            (None, Some(d)) => Matrix::from_diag(d),
            (None, None) => Err(Error::Parse(format!("`{key}` or `{key}_diag` is required"))),
        }
    };
    let w = LqrWeights::new(weight(&s.q, &s.q_diag, "q")?, weight(&s.r, &s.r_diag, "r")?)?;
    Ok((Some(w), None))
}

/// Parses `"k*Kp*Bp"` (whitespace and case insensitive, `k` optional).
pub fn parse_filter_gain_expression(expr: &str) -> Result<f64> {
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let head = compact
        .strip_suffix("kp*bp")
        .ok_or_else(|| Error::Parse(format!("`k_w = \"{expr}\"`: expected `<multiple>*Kp*Bp`")))?;
    if head.is_empty() {
        return Ok(1.0);
    }
    let k = head
        .strip_suffix('*')
        .and_then(|h| h.parse::<f64>().ok())
        .ok_or_else(|| Error::Parse(format!("`k_w = \"{expr}\"`: bad multiple")))?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Parse(format!("`k_w = \"{expr}\"`: multiple must be positive")));
    }
    Ok(k)
}

fn build_params(s: &AugmentationSection, m: usize) -> Result<AugmentationParams> {
    let d = AugmentationParams::default();
    let filter_gain = match &s.k_w {
        None => d.filter_gain,
        Some(FilterGainSpec::Expression(e)) => FilterGain::ProportionalMultiple(parse_filter_gain_expression(e)?),
        Some(FilterGainSpec::Matrix(rows)) => {
            let k = matrix("k_w", rows)?;
            if k.shape() != (m, m) {
                return Err(Error::Parse(format!("`k_w` must be {m}x{m}")));
            }
            FilterGain::Explicit(k)
        }
    };
    let mode = match &s.multiplier_mode {
        Some(text) => text.parse::<MultiplierMode>()?,
        None => d.mode,
    };
    Ok(AugmentationParams {
        alpha_v: s.alpha_v.unwrap_or(d.alpha_v),
        alpha_w: s.alpha_w.unwrap_or(d.alpha_w),
        r_v: s.r_v.unwrap_or(d.r_v),
        r_w: s.r_w.unwrap_or(d.r_w),
        filter_gain,
        mode,
    })
}

fn unit_scale(unit: &str) -> Result<f64> {
    match unit {
        // Outputs already expressed in g (lateral acceleration) are taken as given.
        "rad" | "rad/s" | "g" => Ok(1.0),
        "deg" | "deg/s" => Ok(1.0_f64.to_radians()),
        other => Err(Error::Parse(format!("unknown unit `{other}` (expected deg, rad or g)"))),
    }
}

fn build_commands(s: &CommandsSection, m: usize) -> Result<Vec<CommandProfile>> {
    if s.steps.is_empty() {
        return Ok(vec![CommandProfile::default(); m]);
    }
    if s.steps.len() != m {
        return Err(Error::Parse(format!("{} step lists for {m} regulated outputs", s.steps.len())));
    }
    let scales: Vec<f64> = match &s.unit {
        None => vec![1.0; m],
        Some(UnitSpec::All(u)) => vec![unit_scale(u)?; m],
        Some(UnitSpec::PerChannel(us)) => {
            if us.len() != m {
                return Err(Error::Parse(format!("{} units for {m} channels", us.len())));
            }
            us.iter().map(|u| unit_scale(u)).collect::<Result<_>>()?
        }
    };
    s.steps
        .iter()
        .zip(scales)
        .map(|(steps, k)| {
            let raw = CommandProfile::new(steps.iter().map(|&[t, v]| (t, v)).collect())?;
            Ok(if k == 1.0 { raw } else { raw.scaled(k) })
        })
        .collect()
}
