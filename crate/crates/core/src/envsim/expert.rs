use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{Plan, Scenario};
use super::{observe, step, EnvConfig, EnvState, BOOST_FACTOR};
use crate::action::{Action, ActionSpec, NEUTRAL_BIN};
use crate::error::{Error, Result};
use crate::trajectory::{Position, Trajectory, TrajectoryMeta};

/// Uniform half-width of the stick perturbation applied to demonstrations.
pub const DEFAULT_JITTER: f64 = 0.1;

const ARRIVE_TOL: f64 = 1.0;
const FINAL_SLOWDOWN: f64 = 0.3;
const MIN_APPROACH_SPEED: f64 = 0.15;
const HOLD_GAIN: f64 = 0.35;
pub const MAX_STEPS: usize = 400;

/// Scripted waypoint follower used to produce reference and demonstration
/// trajectories.
#[derive(Clone, Debug)]
pub struct ExpertController {
    plan: Plan,
    spec: ActionSpec,
    next_waypoint: usize,
    hold_left: usize,
    jitter: f64,
    rng: ChaCha8Rng,
}

impl ExpertController {
    pub fn new(scenario: Scenario, spec: ActionSpec, jitter: f64, seed: u64) -> Self {
        Self::from_plan(scenario.plan(), spec, jitter, seed)
    }

    pub(crate) fn from_plan(plan: Plan, spec: ActionSpec, jitter: f64, seed: u64) -> Self {
        Self {
            hold_left: plan.hold_steps,
            plan,
            spec,
            next_waypoint: 0,
            jitter,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn start(&self) -> Position {
        self.plan.start
    }

    /// Next action, or `None` once the final waypoint is reached.
    pub fn act(&mut self, state: &EnvState) -> Option<Action> {
        let (v_des, boost) = if self.hold_left > 0 {
            self.hold_left -= 1;
            let d = self.plan.start - state.pos;
            ([HOLD_GAIN * d.x, HOLD_GAIN * d.y], false)
        } else {
            let last = self.plan.waypoints.len() - 1;
            let mut d = self.plan.waypoints[self.next_waypoint] - state.pos;
            while d.norm() < ARRIVE_TOL && self.next_waypoint < last {
                self.next_waypoint += 1;
                d = self.plan.waypoints[self.next_waypoint] - state.pos;
            }
            let dist = d.norm();
            if self.next_waypoint == last && dist < ARRIVE_TOL {
                return None;
            }
            let boost = self.plan.boost_beyond.is_some_and(|b| dist > b);
            let mut speed = if boost {
                (self.plan.cruise * 1.3).min(0.95)
            } else {
                self.plan.cruise
            };
            if self.next_waypoint == last {
                speed = speed.min((FINAL_SLOWDOWN * dist).max(MIN_APPROACH_SPEED));
            }
            ([d.x / dist * speed, d.y / dist * speed], boost)
        };

        let gain = if boost { BOOST_FACTOR } else { 1.0 };
        let mut raw = [0.0; 2];
        for i in 0..2 {
            raw[i] = (2.0 * v_des[i] - state.vel[i]) / gain;
            if self.jitter > 0.0 {
                raw[i] += self.rng.random_range(-self.jitter..=self.jitter);
            }
        }
        Some(self.compose(raw, boost))
    }

    fn compose(&self, raw: [f64; 2], boost: bool) -> Action {
        let mut sticks = vec![NEUTRAL_BIN; self.spec.sticks];
        for (slot, v) in sticks.iter_mut().zip(raw) {
            *slot = crate::action::discretize_stick(v).expect("controller output is finite");
        }
        let idle = sticks.iter().take(2).all(|&b| b == NEUTRAL_BIN);
        let mut buttons = vec![false; self.spec.buttons];
        if let Some(b) = buttons.get_mut(0) {
            *b = boost;
        }
        if let Some(b) = buttons.get_mut(1) {
            *b = idle;
        }
        Action { buttons, sticks }
    }
}

fn run_expert(
    scenario: Scenario,
    spec: ActionSpec,
    jitter: f64,
    seed: u64,
    env: &EnvConfig,
) -> Trajectory {
    run_plan(scenario.plan(), scenario, spec, jitter, seed, env)
}

fn run_plan(
    plan: Plan,
    scenario: Scenario,
    spec: ActionSpec,
    jitter: f64,
    seed: u64,
    env: &EnvConfig,
) -> Trajectory {
    let env = env.deterministic();
    let mut expert = ExpertController::from_plan(plan, spec, jitter, seed);
    let mut state = EnvState::new(expert.start(), seed);
    let mut tr = Trajectory::new(TrajectoryMeta {
        scenario: scenario.name().to_string(),
        seed,
    });
    // Observations that look ahead along the reference need the finished
    // path, so they are filled in afterwards.
    let mut states = Vec::new();
    loop {
        let action = expert.act(&state);
        let done = action.is_none() || tr.len() + 1 >= MAX_STEPS;
        let action = action.unwrap_or_else(|| spec.neutral());
        states.push(state.clone());
        tr.push(state.pos, Vec::new(), action.clone());
        if done {
            break;
        }
        state = step(&state, &action, &env);
    }
    let positions = tr.positions();
    for (t, (s, st)) in tr.steps.iter_mut().zip(&states).enumerate() {
        s.obs = observe(st, &positions, t, &env);
    }
    tr
}

/// Reference trajectory for a scenario: the jitter-free expert run in the
/// deterministic environment.
pub fn make_reference(
    scenario: Scenario,
    seed: u64,
    spec: ActionSpec,
    env: &EnvConfig,
) -> Trajectory {
    run_expert(scenario, spec, 0.0, seed, env)
}

/// Jittered expert demonstrations, `n_per_scenario` for each scenario.
///
/// Demonstration `i` of the scenario at position `s` uses seed
/// `seed + 1000 * s + i`.
pub fn generate_dataset(
    scenarios: &[Scenario],
    n_per_scenario: usize,
    seed: u64,
    jitter: f64,
    spec: ActionSpec,
    env: &EnvConfig,
) -> Result<Vec<Trajectory>> {
    if n_per_scenario == 0 {
        return Err(Error::InvalidInput("n_per_scenario must be >= 1".into()));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "jitter must be >= 0, got {jitter}"
        )));
    }
    let mut out = Vec::with_capacity(scenarios.len() * n_per_scenario);
    for (s, &scenario) in scenarios.iter().enumerate() {
        for i in 0..n_per_scenario {
            let demo_seed = seed.wrapping_add(1000 * s as u64).wrapping_add(i as u64);
            out.push(run_expert(scenario, spec, jitter, demo_seed, env));
        }
    }
    Ok(out)
}
