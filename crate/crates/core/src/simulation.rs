//! Tick-by-tick diffusion dynamics.
//!
//! One tick `t -> t+1` is: place this tick's innovators into the tick-`t`
//! state array, then update every non-absorbing agent synchronously from
//! that array. Row `t` of the time series is the state after tick `t`'s
//! sweep; row 0 is the initial all-non-adopter population.
//!
//! Random draws:
//! * innovators of schedule product `k` at tick `t`: stream
//!   `(seed, Innovators, t, k)`;
//! * decision of agent `α` during the sweep out of tick `t`: the first
//!   uniform of stream `(seed, Decision, t, α)`, fed to a cumulative scan
//!   of the agent's choice probabilities in state-index order.
//!
//! Both are addressed, never sequenced, so results do not depend on how
//! the sweep is split across threads.

use log::warn;
use rand::seq::index;
use rayon::prelude::*;

use crate::decision::{probabilities_into, sample_unchecked, OptionModel, StateIndex, Temperature, MAX_OPTIONS};
use crate::error::{Error, Result};
use crate::network::{build_moore_lattice, rewire, AgentId, Network};
use crate::rng::{Domain, RandomStream};
use crate::scenarios::Scenario;

/// Per-agent utility vectors, row-major `N x M`.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityProfile {
    options: usize,
    values: Vec<f64>,
}

impl UtilityProfile {
    pub fn new(options: usize, values: Vec<f64>) -> Result<Self> {
        if options == 0 || !values.len().is_multiple_of(options) {
            return Err(Error::Usage(format!(
                "{} utility values do not split into rows of {options}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite utility {v}")));
        }
        Ok(UtilityProfile { options, values })
    }

    /// Every agent gets the same vector.
    pub fn uniform(agents: usize, utility: &[f64]) -> Result<Self> {
        Self::new(utility.len(), utility.repeat(agents))
    }

    pub fn agents(&self) -> usize {
        self.values.len() / self.options
    }

    pub fn options(&self) -> usize {
        self.options
    }

    #[inline]
    pub fn of(&self, agent: AgentId) -> &[f64] {
        &self.values[agent * self.options..(agent + 1) * self.options]
    }
}

/// External seeding of one product: `rate` innovators per tick from
/// `start_tick` until `⌊target_fraction · N⌋` have been placed.
#[derive(Clone, Debug, PartialEq)]
pub struct InnovatorSchedule {
    pub product: StateIndex,
    pub rate: usize,
    pub target_fraction: f64,
    pub start_tick: u32,
}

pub const DEFAULT_INNOVATOR_FRACTION: f64 = 0.025;

impl InnovatorSchedule {
    pub fn new(product: StateIndex, rate: usize, target_fraction: f64, start_tick: u32) -> Result<Self> {
        if rate < 1 {
            return Err(Error::config("innovators.rate", "must be at least 1"));
        }
        if !(target_fraction > 0.0 && target_fraction < 1.0) {
            return Err(Error::config(
                "innovators.fraction",
                format!("{target_fraction} is outside (0, 1)"),
            ));
        }
        Ok(InnovatorSchedule {
            product,
            rate,
            target_fraction,
            start_tick,
        })
    }

    /// Total number of innovators for a population of `agents`.
    pub fn quota(&self, agents: usize) -> usize {
        (self.target_fraction * agents as f64).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationState {
    pub tick: u32,
    pub states: Vec<u8>,
    pub counts: Vec<usize>,
    /// Innovators placed so far, indexed like the schedule list.
    pub innovators_placed: Vec<usize>,
}

impl SimulationState {
    /// Everyone starts in the non-adoption state.
    pub fn new(agents: usize, opts: &OptionModel, schedules: usize) -> Self {
        let mut counts = vec![0; opts.len()];
        counts[opts.non_adoption()] = agents;
        SimulationState {
            tick: 0,
            states: vec![opts.non_adoption() as u8; agents],
            counts,
            innovators_placed: vec![0; schedules],
        }
    }

    pub fn agents(&self) -> usize {
        self.states.len()
    }

    fn recount(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        for &s in &self.states {
            self.counts[s as usize] += 1;
        }
    }
}

/// Adoption counts per tick. `fraction(t, k) = count(t, k) / N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeSeries {
    agents: usize,
    options: usize,
    counts: Vec<usize>,
}

impl TimeSeries {
    pub fn new(agents: usize, options: usize) -> Self {
        TimeSeries {
            agents,
            options,
            counts: Vec::new(),
        }
    }

    pub fn push(&mut self, counts: &[usize]) {
        assert_eq!(counts.len(), self.options);
        self.counts.extend_from_slice(counts);
    }

    /// Number of recorded ticks.
    pub fn len(&self) -> usize {
        self.counts.len() / self.options
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn options(&self) -> usize {
        self.options
    }

    pub fn counts(&self, tick: usize) -> &[usize] {
        &self.counts[tick * self.options..(tick + 1) * self.options]
    }

    pub fn fraction(&self, tick: usize, state: StateIndex) -> f64 {
        self.counts(tick)[state] as f64 / self.agents as f64
    }

    pub fn fractions(&self, tick: usize) -> Vec<f64> {
        (0..self.options).map(|k| self.fraction(tick, k)).collect()
    }

    pub fn last_fractions(&self) -> Vec<f64> {
        self.fractions(self.len() - 1)
    }
}

/// Places this tick's innovators. Schedules are handled in list order
/// (scenarios keep them sorted by product index); each picks
/// `min(rate, remaining quota)` distinct agents uniformly from the current
/// non-adopters and sets them straight to its product.
pub fn seed_innovators(st: &mut SimulationState, schedules: &[InnovatorSchedule], opts: &OptionModel, seed: u64) {
    let non_adoption = opts.non_adoption() as u8;
    let agents = st.agents();
    for (i, sched) in schedules.iter().enumerate() {
        if st.tick < sched.start_tick {
            continue;
        }
        let remaining = sched.quota(agents).saturating_sub(st.innovators_placed[i]);
        if remaining == 0 {
            continue;
        }
        let wanted = remaining.min(sched.rate);
        let pool: Vec<u32> = (0..agents as u32)
            .filter(|&a| st.states[a as usize] == non_adoption)
            .collect();
        let take = if pool.len() < wanted {
            warn!(
                "tick {}: only {} non-adopters left for {} innovators of product {}",
                st.tick,
                pool.len(),
                wanted,
                opts.label(sched.product)
            );
            pool.len()
        } else {
            wanted
        };
        let mut rng = RandomStream::new(seed, Domain::Innovators, st.tick as u64, sched.product as u64);
        for pick in index::sample(&mut rng, pool.len(), take).into_iter() {
            st.states[pool[pick] as usize] = sched.product as u8;
        }
        st.innovators_placed[i] += take;
    }
    st.recount();
}

/// Synchronous sweep from tick `t` to `t + 1`. Every agent whose state has
/// a permitted exit in `opts` re-decides from the tick-`t` array with its
/// own utility vector; absorbed agents are copied through.
pub fn step(
    st: &SimulationState,
    net: &Network,
    utilities: &UtilityProfile,
    temperature: Temperature,
    opts: &OptionModel,
    seed: u64,
) -> SimulationState {
    let m = opts.len();
    debug_assert_eq!(utilities.options(), m);
    debug_assert_eq!(net.len(), st.agents());
    let beta = temperature.beta();
    let absorbing: Vec<bool> = (0..m).map(|k| opts.is_absorbing(k)).collect();
    let prev = &st.states;
    let tick = st.tick as u64;

    let next: Vec<u8> = (0..prev.len())
        .into_par_iter()
        .with_min_len(1024)
        .map(|agent| {
            let current = prev[agent] as usize;
            if absorbing[current] {
                return prev[agent];
            }
            let contacts = net.contacts(agent);
            let mut counts = [0u32; MAX_OPTIONS];
            for &c in contacts {
                counts[prev[c as usize] as usize] += 1;
            }
            let degree = contacts.len() as f64;
            let u = utilities.of(agent);
            let mut field = [0.0f64; MAX_OPTIONS];
            for k in 0..m {
                field[k] = counts[k] as f64 / degree + u[k];
            }
            let mut probs = [0.0f64; MAX_OPTIONS];
            probabilities_into(&field[..m], beta, current, opts, &mut probs[..m]);
            let draw = RandomStream::new(seed, Domain::Decision, tick, agent as u64).uniform();
            sample_unchecked(&probs[..m], draw) as u8
        })
        .collect();

    let mut out = SimulationState {
        tick: st.tick + 1,
        states: next,
        counts: vec![0; m],
        innovators_placed: st.innovators_placed.clone(),
    };
    out.recount();
    out
}

/// First tick at which all fractions have been unchanged for `window`
/// consecutive ticks, i.e. `t + window` for the earliest `t` with rows
/// `t..=t+window` identical. A constant series saturates at `window`.
pub fn detect_saturation(series: &TimeSeries, window: usize) -> Option<usize> {
    detect_saturation_after(series, window, 0)
}

/// As [`detect_saturation`], but only stretches starting at or after
/// `earliest` count.
pub fn detect_saturation_after(series: &TimeSeries, window: usize, earliest: usize) -> Option<usize> {
    let window = window.max(1);
    let mut start = earliest;
    for t in earliest + 1..series.len() {
        if series.counts(t) != series.counts(start) {
            start = t;
        } else if t - start >= window {
            return Some(t);
        }
    }
    None
}

/// As [`detect_saturation_after`], restricted to the count of `state`.
pub fn detect_plateau_after(series: &TimeSeries, state: StateIndex, window: usize, earliest: usize) -> Option<usize> {
    let window = window.max(1);
    let mut start = earliest;
    for t in earliest + 1..series.len() {
        if series.counts(t)[state] != series.counts(start)[state] {
            start = t;
        } else if t - start >= window {
            return Some(t);
        }
    }
    None
}

/// Output of a single run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub series: TimeSeries,
    pub final_state: SimulationState,
    /// `None` when `max_ticks` ran out first ("unsaturated").
    pub saturation_tick: Option<usize>,
    /// First tick after the last innovator placement and any launch delay.
    pub quiet_from: usize,
    pub seed: u64,
}

impl RunOutcome {
    pub fn is_saturated(&self) -> bool {
        self.saturation_tick.is_some()
    }

    /// Saturation tick, or the last simulated tick when unsaturated.
    pub fn settling_tick(&self) -> usize {
        self.saturation_tick.unwrap_or(self.series.len() - 1)
    }

    /// Tick at which the share of `state` alone has stayed unchanged for
    /// `window` ticks, or the last simulated tick. At `T > 0` the full
    /// state rarely freezes; the non-adopter share settles much earlier.
    pub fn plateau_tick(&self, state: StateIndex, window: usize) -> usize {
        detect_plateau_after(&self.series, state, window, self.quiet_from.min(self.series.len() - 1))
            .unwrap_or(self.series.len() - 1)
    }
}

/// Builds the network for `seed`: Moore lattice, then rewiring from stream
/// `(seed, Rewiring, 0, 0)`.
pub fn build_network(scn: &Scenario, seed: u64) -> Network {
    let lattice = build_moore_lattice(scn.grid);
    let mut rng = RandomStream::new(seed, Domain::Rewiring, 0, 0);
    rewire(&lattice, scn.rewiring, &mut rng)
}

/// Runs the scenario with its own seed.
pub fn run(scn: &Scenario) -> Result<RunOutcome> {
    run_with_seed(scn, scn.seed)
}

/// Runs the scenario with `seed` in place of the scenario's seed.
///
/// Saturation is only looked for once no innovator is pending and every
/// delayed product has launched; the frozen stretch must begin after the
/// last tick that placed innovators.
pub fn run_with_seed(scn: &Scenario, seed: u64) -> Result<RunOutcome> {
    scn.validate()?;
    let net = build_network(scn, seed);
    let opts = scn.option_model();
    let utilities = scn.utility_profile(seed)?;
    let schedules = scn.effective_schedules();
    let launch = scn.launch.as_ref().map(|l| (scn.delayed_product(), l.t_b));
    let restricted = launch.map(|(product, _)| opts.without_option(product));
    let agents = scn.grid.agents();
    let window = scn.saturation_window as usize;

    let mut st = SimulationState::new(agents, &opts, schedules.len());
    let mut series = TimeSeries::new(agents, opts.len());
    series.push(&st.counts);

    let mut earliest = 0usize;
    let mut saturation = None;
    for _ in 0..scn.max_ticks {
        let before = st.innovators_placed.clone();
        seed_innovators(&mut st, &schedules, &opts, seed);
        if st.innovators_placed != before {
            earliest = st.tick as usize + 1;
        }
        let blocked = launch.is_some_and(|(_, t_b)| st.tick < t_b);
        let active = if blocked { restricted.as_ref().unwrap() } else { &opts };
        st = step(&st, &net, &utilities, scn.temperature, active, seed);
        series.push(&st.counts);

        let pending = blocked
            || (st.counts[opts.non_adoption()] > 0
                && schedules.iter().enumerate().any(|(i, s)| st.innovators_placed[i] < s.quota(agents)));
        if pending {
            earliest = series.len() - 1;
            continue;
        }
        if let Some(t) = detect_saturation_after(&series, window, earliest) {
            saturation = Some(t);
            break;
        }
    }

    Ok(RunOutcome {
        series,
        final_state: st,
        saturation_tick: saturation,
        quiet_from: earliest,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::GridSpec;

    fn series_from(rows: &[[usize; 2]]) -> TimeSeries {
        let mut s = TimeSeries::new(10, 2);
        for r in rows {
            s.push(r);
        }
        s
    }

    #[test]
    fn saturation_of_constant_series_is_window() {
        let s = series_from(&[[0, 10]; 12]);
        assert_eq!(detect_saturation(&s, 5), Some(5));
        assert_eq!(detect_saturation(&s, 1), Some(1));
    }

    #[test]
    fn saturation_needs_a_full_window() {
        let rows: Vec<[usize; 2]> = (0..10).map(|i| [i, 10 - i]).collect();
        assert_eq!(detect_saturation(&series_from(&rows), 5), None);

        let mut rows: Vec<[usize; 2]> = (0..4).map(|i| [i, 10 - i]).collect();
        rows.extend([[3, 7]; 5]);
        // stretch starts at tick 3, rows 3..=8 are six equal rows
        assert_eq!(detect_saturation(&series_from(&rows), 5), Some(8));
        assert_eq!(detect_saturation(&series_from(&rows[..8]), 5), None);
        assert_eq!(detect_saturation_after(&series_from(&rows), 4, 4), Some(8));
    }

    #[test]
    fn innovator_quota_and_pace() {
        let opts = OptionModel::three_option();
        let sched = vec![InnovatorSchedule::new(0, 125, 0.025, 0).unwrap()];
        let mut st = SimulationState::new(40_000, &opts, 1);
        assert_eq!(sched[0].quota(40_000), 1000);
        let mut per_tick = Vec::new();
        for _ in 0..12 {
            let before = st.counts[0];
            seed_innovators(&mut st, &sched, &opts, 3);
            per_tick.push(st.counts[0] - before);
            st.tick += 1;
        }
        assert_eq!(per_tick, [125, 125, 125, 125, 125, 125, 125, 125, 0, 0, 0, 0]);
        assert_eq!(st.counts, vec![1000, 0, 39_000]);
    }

    #[test]
    fn fast_schedule_fills_quota_at_once() {
        let opts = OptionModel::three_option();
        let sched = vec![InnovatorSchedule::new(1, 1000, 0.025, 0).unwrap()];
        let mut st = SimulationState::new(40_000, &opts, 1);
        seed_innovators(&mut st, &sched, &opts, 3);
        assert_eq!(st.counts[1], 1000);
    }

    #[test]
    fn scarce_non_adopters_seed_lower_products_first() {
        let opts = OptionModel::three_option();
        let sched = vec![
            InnovatorSchedule::new(0, 6, 0.9, 0).unwrap(),
            InnovatorSchedule::new(1, 6, 0.9, 0).unwrap(),
        ];
        let mut st = SimulationState::new(9, &opts, 2);
        seed_innovators(&mut st, &sched, &opts, 1);
        assert_eq!(st.counts, vec![6, 3, 0]);
        assert_eq!(st.innovators_placed, vec![6, 3]);
    }

    #[test]
    fn schedule_validation() {
        assert!(InnovatorSchedule::new(0, 0, 0.025, 0).is_err());
        assert!(InnovatorSchedule::new(0, 5, 0.0, 0).is_err());
        assert!(InnovatorSchedule::new(0, 5, 1.0, 0).is_err());
    }

    #[test]
    fn nobody_adopts_without_adopters_at_zero_temperature() {
        let opts = OptionModel::three_option();
        let net = build_moore_lattice(GridSpec::new(10, 10).unwrap());
        let u = UtilityProfile::uniform(100, &[0.9, 0.9, 0.0]).unwrap();
        let st = SimulationState::new(100, &opts, 0);
        let next = step(&st, &net, &u, Temperature::ZERO, &opts, 1);
        assert_eq!(next.states, st.states);
        assert_eq!(next.tick, 1);
    }

    #[test]
    fn two_adopting_contacts_reach_the_threshold() {
        let opts = OptionModel::three_option();
        let net = build_moore_lattice(GridSpec::new(3, 3).unwrap());
        let u = UtilityProfile::uniform(9, &[0.6, 0.6, 0.0]).unwrap();
        let mut st = SimulationState::new(9, &opts, 0);
        st.states[0] = 0;
        st.states[2] = 0;
        st.recount();
        let next = step(&st, &net, &u, Temperature::ZERO, &opts, 1);
        // the centre sees 2 A out of 8
        assert_eq!(next.states[4], 0);
        let again = step(&st, &net, &u, Temperature::ZERO, &opts, 1);
        assert_eq!(next, again);
    }
}
