//! TOML run configuration shared by every pipeline stage.
//!
//! Every section and key is optional; omitted keys take the defaults below.
//! Unknown keys are rejected.
//!
//! ```toml
//! [envsim]
//! scenarios = ["crossroads-left", "crossroads-right", "crossroads-mid",
//!              "winding-0", "winding-1", "winding-2", "loop", "pause-then-go"]
//! n_per_scenario = 20     # demonstrations per scenario
//! data_seed = 1           # demonstration jitter seed
//! reference_seed = 0
//! jitter = 0.1            # expert stick jitter before binning
//! sigma = 0.05            # rollout velocity noise
//! v_max = 1.0
//! obs_future = 0          # look-ahead goal vectors in each observation
//! obs_stride = 1
//! hazard_regions = []     # [{ center = [x, y], radius = r, bias = [bx, by] }]
//!
//! [core]
//! buttons = 2
//! sticks = 2
//!
//! [idm]
//! past = 10
//! future = 10
//! skip = 1                # K: training future window starts at t + K
//! modality = "full"       # full | observations_only | actions_only
//! hidden = 64
//! encoder_layers = 2
//! head_layers = 2
//!
//! [idm.train]
//! epochs = 50
//! updates_per_epoch = 200
//! batch_size = 64
//! learning_rate = 1e-3
//! optimizer = "adam"      # adam | sgd
//! seed = 0
//! loss_weights = { buttons = 1.0, sticks = 1.0 }
//!
//! [futuresel]
//! strategy = "radius"     # static | closest | radius | inner_outer
//! k = 1
//! r = 2.0
//! r_in = 0.5
//! r_out = 2.0
//! sweep_radii = [0.5, 1.0, 2.0, 4.0, 8.0]
//! sweep_pairs = [[0.5, 2.0], [1.0, 4.0], [2.0, 8.0]]
//!
//! [harness]
//! n_seeds = 10
//! base_seed = 0
//! fi_radius = 2.0
//! eval_scenarios = []     # empty: same as envsim.scenarios
//! dtw_aligned_auc = false
//! coverage_samples = 101
//!
//! [paths]
//! data = "out/data"
//! model = "out/model"
//! eval = "out/eval"
//! sweep = "out/sweep"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action::ActionSpec;
use crate::envsim::{EnvConfig, HazardRegion, Scenario, StochasticitySpec, DEFAULT_JITTER};
use crate::error::{Error, Result};
use crate::futuresel::SelectorKind;
use crate::harness::{RolloutConfig, DEFAULT_FI_RADIUS};
use crate::idm::{Architecture, InputLayout, Modality, TrainConfig, WindowSpec};

/// Environment variable naming the config file when no path is given.
pub const CONFIG_ENV: &str = "IDMK_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub envsim: EnvsimSection,
    pub core: ActionSpec,
    pub idm: IdmSection,
    pub futuresel: FutureselSection,
    pub harness: HarnessSection,
    pub paths: PathsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvsimSection {
    pub scenarios: Vec<Scenario>,
    pub n_per_scenario: usize,
    pub data_seed: u64,
    pub reference_seed: u64,
    pub jitter: f64,
    pub sigma: f64,
    pub v_max: f64,
    pub obs_future: usize,
    pub obs_stride: usize,
    pub hazard_regions: Vec<HazardRegion>,
}

impl Default for EnvsimSection {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            scenarios: Scenario::ALL.to_vec(),
            n_per_scenario: 20,
            data_seed: 1,
            reference_seed: 0,
            jitter: DEFAULT_JITTER,
            sigma: 0.05,
            v_max: env.v_max,
            obs_future: env.obs_future,
            obs_stride: env.obs_stride,
            hazard_regions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmSection {
    pub past: usize,
    pub future: usize,
    pub skip: usize,
    pub modality: Modality,
    pub hidden: usize,
    pub encoder_layers: usize,
    pub head_layers: usize,
    pub train: TrainConfig,
}

impl Default for IdmSection {
    fn default() -> Self {
        let w = WindowSpec::default();
        let a = Architecture::default();
        Self {
            past: w.past,
            future: w.future,
            skip: w.skip,
            modality: w.modality,
            hidden: a.hidden,
            encoder_layers: a.encoder_layers,
            head_layers: a.head_layers,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Static,
    Closest,
    #[default]
    Radius,
    InnerOuter,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "static" => Ok(Strategy::Static),
            "closest" => Ok(Strategy::Closest),
            "radius" => Ok(Strategy::Radius),
            "inner_outer" => Ok(Strategy::InnerOuter),
            _ => Err(Error::InvalidInput(format!(
                "unknown strategy `{s}` (expected static, closest, radius or inner_outer)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FutureselSection {
    pub strategy: Strategy,
    pub k: usize,
    pub r: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub sweep_radii: Vec<f64>,
    pub sweep_pairs: Vec<(f64, f64)>,
}

impl Default for FutureselSection {
    fn default() -> Self {
        Self {
            strategy: Strategy::Radius,
            k: 1,
            r: 2.0,
            r_in: 0.5,
            r_out: 2.0,
            sweep_radii: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            sweep_pairs: vec![(0.5, 2.0), (1.0, 4.0), (2.0, 8.0)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSection {
    pub n_seeds: usize,
    pub base_seed: u64,
    pub fi_radius: f64,
    pub eval_scenarios: Vec<Scenario>,
    pub dtw_aligned_auc: bool,
    pub coverage_samples: usize,
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            n_seeds: 10,
            base_seed: 0,
            fi_radius: DEFAULT_FI_RADIUS,
            eval_scenarios: Vec::new(),
            dtw_aligned_auc: false,
            coverage_samples: 101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub data: PathBuf,
    pub model: PathBuf,
    pub eval: PathBuf,
    pub sweep: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            data: "out/data".into(),
            model: "out/model".into(),
            eval: "out/eval".into(),
            sweep: "out/sweep".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<config>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().trim().to_string();
            match line {
                Some(l) => Error::Config(format!("{}:{l}: {msg}", path.display())),
                None => Error::Config(format!("{}: {msg}", path.display())),
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Load `path`, else the file named by `IDMK_CONFIG`, else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical JSON form of the parsed config, so formatting
    /// and comments do not change the hash.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.envsim.scenarios.is_empty() {
            return bad("envsim.scenarios must not be empty".into());
        }
        if self.envsim.n_per_scenario == 0 {
            return bad("envsim.n_per_scenario must be >= 1".into());
        }
        if !(self.envsim.jitter >= 0.0 && self.envsim.jitter.is_finite()) {
            return bad(format!(
                "envsim.jitter must be >= 0, got {}",
                self.envsim.jitter
            ));
        }
        if self.core.buttons == 0 && self.core.sticks == 0 {
            return bad("core needs at least one button or stick".into());
        }
        if self.core.buttons == 0 {
            return bad("core.buttons must be >= 1 (button 0 is boost)".into());
        }
        if self.core.sticks < 2 {
            return bad("core.sticks must be >= 2 (sticks 0 and 1 drive x and y)".into());
        }
        if self.harness.coverage_samples < 2 {
            return bad("harness.coverage_samples must be >= 2".into());
        }
        let map = |e: Error| Error::Config(e.to_string());
        self.env().check().map_err(map)?;
        self.window().check().map_err(map)?;
        self.arch().check().map_err(map)?;
        self.idm.train.check().map_err(map)?;
        self.selector().check().map_err(map)?;
        self.rollout().check().map_err(map)?;
        for &r in &self.futuresel.sweep_radii {
            SelectorKind::Radius { r, k: 0 }.check().map_err(map)?;
        }
        for &(r_in, r_out) in &self.futuresel.sweep_pairs {
            SelectorKind::InnerOuter { r_in, r_out, k: 0 }
                .check()
                .map_err(map)?;
        }
        Ok(())
    }

    /// Environment used for rollouts (data generation forces sigma to 0).
    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            v_max: self.envsim.v_max,
            obs_future: self.envsim.obs_future,
            obs_stride: self.envsim.obs_stride,
            stochasticity: StochasticitySpec {
                sigma: self.envsim.sigma,
                hazard_regions: self.envsim.hazard_regions.clone(),
            },
        }
    }

    pub fn window(&self) -> WindowSpec {
        WindowSpec::new(self.idm.past, self.idm.future, self.idm.skip)
            .with_modality(self.idm.modality)
    }

    pub fn arch(&self) -> Architecture {
        Architecture {
            hidden: self.idm.hidden,
            encoder_layers: self.idm.encoder_layers,
            head_layers: self.idm.head_layers,
        }
    }

    pub fn layout(&self) -> InputLayout {
        InputLayout {
            window: self.window(),
            obs_dim: self.env().obs_dim(),
            actions: self.core,
        }
    }

    pub fn selector(&self) -> SelectorKind {
        let f = &self.futuresel;
        match f.strategy {
            Strategy::Static => SelectorKind::Static { k: f.k },
            Strategy::Closest => SelectorKind::Closest { k: f.k },
            Strategy::Radius => SelectorKind::Radius { r: f.r, k: f.k },
            Strategy::InnerOuter => SelectorKind::InnerOuter {
                r_in: f.r_in,
                r_out: f.r_out,
                k: f.k,
            },
        }
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            selector: self.selector(),
            env: self.env(),
            n_seeds: self.harness.n_seeds,
            base_seed: self.harness.base_seed,
            fi_radius: self.harness.fi_radius,
            dtw_aligned_auc: self.harness.dtw_aligned_auc,
        }
    }

    pub fn eval_scenarios(&self) -> &[Scenario] {
        if self.harness.eval_scenarios.is_empty() {
            &self.envsim.scenarios
        } else {
            &self.harness.eval_scenarios
        }
    }
}
