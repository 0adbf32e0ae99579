use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid1D;
use crate::models::{BurgersModel, EulerBernoulliModel, HeatModel, Model, NagumoModel, TimeScheme};
use crate::optimizer::{CostConfig, Region, WeightMode};
use crate::verify::MIN_CHECK_ROLLOUTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heat,
    Burgers,
    Nagumo,
    EulerBernoulli,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Heat,
        ModelKind::Burgers,
        ModelKind::Nagumo,
        ModelKind::EulerBernoulli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Heat => "heat",
            ModelKind::Burgers => "burgers",
            ModelKind::Nagumo => "nagumo",
            ModelKind::EulerBernoulli => "euler_bernoulli",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Full-size runs: thousands of iterations, hours of CPU.
    Full,
    /// J=32, K=300, R=50: minutes on one CPU core.
    Desk,
}

/// Heat cost scale, chosen so reaching the targets clearly
/// pays for the control effort at rho = 10.
pub const HEAT_KAPPA: f64 = 2.0;
/// Burgers viscosity.
pub const BURGERS_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Diffusivity or viscosity. Unused by the beam.
    pub epsilon: f64,
    /// Nagumo threshold.
    pub alpha: f64,
    /// Burgers boundary value.
    pub bc_value: f64,
    /// Beam Kelvin-Voigt damping.
    pub c_d: f64,
    /// Beam viscous damping.
    pub mu: f64,
    pub length: f64,
    pub points: usize,
    pub horizon: f64,
    pub dt: f64,
    pub rho: f64,
    pub rollouts: usize,
    pub iterations: usize,
    pub actuators: usize,
    pub sigma_sq: f64,
    pub kappa: f64,
    pub lr_theta: f64,
    pub lr_x: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Actuators start uniformly in `[init_lo, init_hi]`.
    pub init_lo: f64,
    pub init_hi: f64,
    /// Hidden width; 0 means the observation dimension.
    pub hidden: usize,
    pub scheme: String,
    pub weight_mode: String,
    pub checkpoint_every: usize,
    pub snapshot_rollouts: usize,
    pub verify_rollouts: usize,
    pub verify_horizon: f64,
    /// Record elapsed seconds in `iterations.csv`. Off keeps runs byte-identical.
    pub wall_clock: bool,
    /// Draw noise. Off gives deterministic baselines.
    pub noisy: bool,
    pub regions: Vec<Region>,
}

/// Every field optional; missing ones come from the full-scale preset of
/// `model`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigOverrides {
    model: ModelKind,
    epsilon: Option<f64>,
    alpha: Option<f64>,
    bc_value: Option<f64>,
    c_d: Option<f64>,
    mu: Option<f64>,
    length: Option<f64>,
    points: Option<usize>,
    horizon: Option<f64>,
    dt: Option<f64>,
    rho: Option<f64>,
    rollouts: Option<usize>,
    iterations: Option<usize>,
    actuators: Option<usize>,
    sigma_sq: Option<f64>,
    kappa: Option<f64>,
    lr_theta: Option<f64>,
    lr_x: Option<f64>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    init_lo: Option<f64>,
    init_hi: Option<f64>,
    hidden: Option<usize>,
    scheme: Option<String>,
    weight_mode: Option<String>,
    checkpoint_every: Option<usize>,
    snapshot_rollouts: Option<usize>,
    verify_rollouts: Option<usize>,
    verify_horizon: Option<f64>,
    wall_clock: Option<bool>,
    noisy: Option<bool>,
    regions: Option<Vec<Region>>,
}

fn regions(a: f64, spec: &[(f64, f64, f64)]) -> Vec<Region> {
    spec.iter()
        .map(|&(lo, hi, desired)| Region {
            lo: lo * a,
            hi: hi * a,
            desired,
        })
        .collect()
}

impl ExperimentConfig {
    pub fn preset(kind: ModelKind, scale: Scale) -> Self {
        let mut c = Self {
            model: kind,
            epsilon: 1.0,
            alpha: -0.5,
            bc_value: 1.0,
            c_d: 1e-4,
            mu: 1e-3,
            length: 1.0,
            points: 64,
            horizon: 1.0,
            dt: 0.01,
            rho: 10.0,
            rollouts: 200,
            iterations: 3000,
            actuators: 3,
            sigma_sq: 0.01,
            kappa: HEAT_KAPPA,
            lr_theta: 1e-3,
            lr_x: 3e-2,
            seed: 0,
            out_dir: PathBuf::from(format!("runs/{}", kind.name())),
            init_lo: 0.4,
            init_hi: 0.6,
            hidden: 0,
            scheme: TimeScheme::default().name().into(),
            weight_mode: WeightMode::default().name().into(),
            checkpoint_every: 100,
            snapshot_rollouts: 100,
            verify_rollouts: 2000,
            verify_horizon: 0.1,
            wall_clock: false,
            noisy: true,
            regions: regions(1.0, &[(0.18, 0.22, 1.0), (0.48, 0.52, 0.5), (0.78, 0.82, 1.0)]),
        };
        match kind {
            ModelKind::Heat => {}
            ModelKind::Burgers => {
                c.epsilon = BURGERS_EPSILON;
                c.actuators = 5;
                c.kappa = 100.0;
                c.iterations = 3500;
                c.rollouts = 100;
                c.regions = regions(1.0, &[(0.18, 0.22, 2.0), (0.48, 0.52, 1.0), (0.78, 0.82, 2.0)]);
            }
            ModelKind::Nagumo => {
                c.length = 5.0;
                c.sigma_sq = 0.25;
                c.kappa = 1e-3;
                c.horizon = 3.5;
                c.iterations = 2000;
                c.rollouts = 100;
                c.lr_x = 5e-2;
                c.regions = regions(5.0, &[(0.7, 0.99, 0.0)]);
            }
            ModelKind::EulerBernoulli => {
                c.points = 32;
                c.rho = 1.0;
                c.actuators = 8;
                c.sigma_sq = 0.04;
                c.kappa = 3e-4;
                c.iterations = 3500;
                c.rollouts = 250;
                c.lr_x = 5e-2;
                c.regions = regions(1.0, &[(0.0, 1.0, 0.0)]);
            }
        }
        c.init_lo = 0.4 * c.length;
        c.init_hi = 0.6 * c.length;
        if scale == Scale::Desk {
            c.points = 32;
            c.iterations = 300;
            c.rollouts = 50;
            c.snapshot_rollouts = 50;
            if kind == ModelKind::Heat {
                // 300 iterations at the full-scale rates barely leave the start
                c.actuators = 2;
                c.lr_theta = 1e-2;
                c.lr_x = 3e-1;
            }
        }
        c
    }

    pub fn preset_by_name(name: &str, scale: Scale) -> Result<Self> {
        ModelKind::parse(name)
            .map(|k| Self::preset(k, scale))
            .ok_or_else(|| Error::config("model", format!("unknown preset `{name}`")))
    }

    /// Parses TOML text. Keys not given fall back to the full-scale preset
    /// of the selected model.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_scaled(text, Scale::Full)
    }

    /// Like [`parse`](Self::parse) with the fallback preset taken at `scale`.
    pub fn parse_scaled(text: &str, scale: Scale) -> Result<Self> {
        let o: ConfigOverrides = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::ConfigParse {
                line,
                message: e.message().to_string(),
            }
        })?;
        let mut c = Self::preset(o.model, scale);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { c.$f = v; } )* };
        }
        take!(
            epsilon, alpha, bc_value, c_d, mu, length, points, horizon, dt, rho, rollouts,
            iterations, actuators, sigma_sq, kappa, lr_theta, lr_x, seed, out_dir, init_lo,
            init_hi, hidden, scheme, weight_mode, checkpoint_every, snapshot_rollouts,
            verify_rollouts, verify_horizon, wall_clock, noisy, regions
        );
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::load_scaled(path, Scale::Full)
    }

    pub fn load_scaled(path: &std::path::Path, scale: Scale) -> Result<Self> {
        Self::parse_scaled(&std::fs::read_to_string(path)?, scale)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive, got {v}")))
            }
        };
        positive("length", self.length)?;
        positive("horizon", self.horizon)?;
        positive("dt", self.dt)?;
        positive("rho", self.rho)?;
        positive("sigma_sq", self.sigma_sq)?;
        positive("verify_horizon", self.verify_horizon)?;
        match self.model {
            ModelKind::EulerBernoulli => {
                if !(self.c_d >= 0.0 && self.mu >= 0.0) {
                    return Err(Error::config("c_d", "damping must be non-negative"));
                }
            }
            _ => positive("epsilon", self.epsilon)?,
        }
        for (name, v) in [("lr_theta", self.lr_theta), ("lr_x", self.lr_x), ("kappa", self.kappa)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.points < 3 {
            return Err(Error::config("points", "need at least 3 grid points"));
        }
        if self.rollouts < 2 {
            return Err(Error::config("rollouts", "need at least 2 rollouts"));
        }
        if self.actuators == 0 {
            return Err(Error::config("actuators", "need at least one actuator"));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::config("checkpoint_every", "must be positive"));
        }
        if self.snapshot_rollouts < 2 {
            return Err(Error::config("snapshot_rollouts", "need at least 2 rollouts"));
        }
        if self.verify_rollouts < MIN_CHECK_ROLLOUTS {
            return Err(Error::config(
                "verify_rollouts",
                format!("need at least {MIN_CHECK_ROLLOUTS} rollouts"),
            ));
        }
        if !(0.0 <= self.init_lo && self.init_lo <= self.init_hi && self.init_hi <= self.length) {
            return Err(Error::config("init_lo", "actuator init interval must lie in [0, length]"));
        }
        if TimeScheme::parse(&self.scheme).is_none() {
            return Err(Error::config("scheme", format!("unknown scheme `{}`", self.scheme)));
        }
        if WeightMode::parse(&self.weight_mode).is_none() {
            return Err(Error::config("weight_mode", format!("unknown mode `{}`", self.weight_mode)));
        }
        let grid = self.grid()?;
        self.cost_config()
            .and_then(|c| c.targets(&grid))
            .map_err(|e| Error::config("regions", e.to_string()))?;
        CostConfig::new(self.kappa, vec![], self.verify_horizon, self.dt)
            .map_err(|e| Error::config("verify_horizon", e.to_string()))?;
        self.build_model()
            .map_err(|e| Error::config(self.model.name(), e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.points).map_err(|e| Error::config("points", e.to_string()))
    }

    pub fn time_scheme(&self) -> TimeScheme {
        TimeScheme::parse(&self.scheme).unwrap_or_default()
    }

    pub fn weight_mode(&self) -> WeightMode {
        WeightMode::parse(&self.weight_mode).unwrap_or_default()
    }

    pub fn build_model(&self) -> Result<Model> {
        Ok(match self.model {
            ModelKind::Heat => Model::Heat(HeatModel::new(self.epsilon, self.rho)?),
            ModelKind::Burgers => {
                Model::Burgers(BurgersModel::new(self.epsilon, self.rho, self.bc_value)?)
            }
            ModelKind::Nagumo => Model::Nagumo(NagumoModel::new(self.epsilon, self.alpha, self.rho)?),
            ModelKind::EulerBernoulli => {
                Model::EulerBernoulli(EulerBernoulliModel::new(self.c_d, self.mu, self.rho)?)
            }
        })
    }

    pub fn cost_config(&self) -> Result<CostConfig> {
        CostConfig::new(self.kappa, self.regions.clone(), self.horizon, self.dt)
    }

    /// `[d_in, h, h, N]`.
    pub fn policy_dims(&self) -> [usize; 4] {
        let d_in = match self.model {
            ModelKind::EulerBernoulli => 2 * self.points,
            _ => self.points,
        };
        let h = if self.hidden == 0 { d_in } else { self.hidden };
        [d_in, h, h, self.actuators]
    }
}
