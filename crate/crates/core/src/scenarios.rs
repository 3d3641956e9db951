//! Experiment descriptions: utilities, launch delay, figure presets and
//! replication across seeds.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::decision::{OptionModel, RestrictionRule, StateIndex, Temperature};
use crate::error::{Error, Result};
use crate::network::{GridSpec, RewiringProbability};
use crate::rng::{Domain, RandomStream};
use crate::simulation::{run_with_seed, InnovatorSchedule, RunOutcome, UtilityProfile, DEFAULT_INNOVATOR_FRACTION};

/// Improvement time constant used by the launch-delay experiments.
pub const DEFAULT_TAU: f64 = 20.0 / 3.0;

/// Which option model a scenario uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptionPreset {
    /// `(A, B, 0)`, exclusive products.
    Three,
    /// `(A, B, AB, 0)`, products may be combined.
    Four,
}

impl OptionPreset {
    pub fn model(self) -> OptionModel {
        match self {
            OptionPreset::Three => OptionModel::three_option(),
            OptionPreset::Four => OptionModel::four_option(),
        }
    }

    pub fn options(self) -> usize {
        match self {
            OptionPreset::Three => 3,
            OptionPreset::Four => 4,
        }
    }
}

/// Population split into buckets sharing a utility gap `Δu`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeterogeneityDistribution {
    buckets: Vec<(f64, f64)>,
}

impl HeterogeneityDistribution {
    /// `buckets` are `(population fraction, Δu)` pairs.
    pub fn new(buckets: Vec<(f64, f64)>) -> Result<Self> {
        const KEY: &str = "utilities.distribution";
        if buckets.is_empty() {
            return Err(Error::config(KEY, "no buckets"));
        }
        for &(fraction, du) in &buckets {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::config(KEY, format!("fraction {fraction} is outside (0, 1]")));
            }
            if !(0.0..=1.0).contains(&du) {
                return Err(Error::config(KEY, format!("utility {du} is outside [0, 1]")));
            }
        }
        let total: f64 = buckets.iter().map(|b| b.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(KEY, format!("fractions sum to {total}, not 1")));
        }
        Ok(HeterogeneityDistribution { buckets })
    }

    /// 40% at 0.6, 40% at 0.7, 20% at 0.4.
    pub fn reference_mix() -> Self {
        Self::new(vec![(0.4, 0.6), (0.4, 0.7), (0.2, 0.4)]).expect("valid mix")
    }

    pub fn buckets(&self) -> &[(f64, f64)] {
        &self.buckets
    }

    pub fn mean(&self) -> f64 {
        self.buckets.iter().map(|(f, u)| f * u).sum()
    }

    /// Exact bucket sizes `⌊fraction · N⌋`; the remainder goes to the
    /// largest bucket (first one on ties).
    pub fn bucket_sizes(&self, agents: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .buckets
            .iter()
            .map(|(f, _)| (f * agents as f64).floor() as usize)
            .collect();
        let assigned: usize = sizes.iter().sum();
        let largest = self
            .buckets
            .iter()
            .enumerate()
            .fold(0, |best, (i, b)| if b.0 > self.buckets[best].0 { i } else { best });
        sizes[largest] += agents - assigned;
        sizes
    }

    /// Per-agent `Δu`: buckets laid out in order, then shuffled.
    pub fn assign(&self, agents: usize, rng: &mut RandomStream) -> Vec<f64> {
        let mut values = Vec::with_capacity(agents);
        for (size, (_, du)) in self.bucket_sizes(agents).into_iter().zip(&self.buckets) {
            values.extend(std::iter::repeat_n(*du, size));
        }
        values.shuffle(rng);
        values
    }
}

/// How agents value the products.
#[derive(Clone, Debug, PartialEq)]
pub enum UtilitySpec {
    /// One gap per product, in option order (non-adoption excluded).
    Homogeneous(Vec<f64>),
    /// Per-agent gap shared by both products of the three-option model.
    Heterogeneous(HeterogeneityDistribution),
}

/// Product B launches `t_b` ticks late with its utility improved.
#[derive(Clone, Debug, PartialEq)]
pub struct LaunchPlan {
    pub t_b: u32,
    pub tau: f64,
}

impl LaunchPlan {
    pub fn new(t_b: u32, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::config("launch.tau", format!("{tau} is not > 0")));
        }
        Ok(LaunchPlan { t_b, tau })
    }
}

/// Utility after improving a product for `t_b` ticks:
/// `Δu_A + (1 − Δu_A) · tanh(t_b / τ)`.
pub fn improved_utility(delta_u_a: f64, t_b: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta_u_a) {
        return Err(Error::config("utilities.A", format!("{delta_u_a} is outside [0, 1]")));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::config("launch.tau", format!("{tau} is not > 0")));
    }
    if t_b.is_nan() || t_b < 0.0 {
        return Err(Error::config("launch.t_b", format!("{t_b} is negative")));
    }
    Ok(delta_u_a + (1.0 - delta_u_a) * (t_b / tau).tanh())
}

/// Utility vector `(A, B, AB, 0)` for the four-option model. Field
/// differences then give `u_AB − u_A = du_ab0 − du_a0` and likewise for B.
pub fn four_option_utilities(du_a0: f64, du_b0: f64, du_ab0: f64) -> Result<[f64; 4]> {
    for (key, v) in [("utilities.A", du_a0), ("utilities.B", du_b0), ("utilities.AB", du_ab0)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::config(key, format!("{v} is outside [0, 1]")));
        }
    }
    Ok([du_a0, du_b0, du_ab0, 0.0])
}

/// Index of the product a [`LaunchPlan`] delays.
pub const DELAYED_PRODUCT: StateIndex = 1;

/// Builds per-agent utility vectors. Non-adoption sits at 0; the delayed
/// product's component is the improved version of the agent's own `Δu_A`.
pub fn assign_utilities(
    spec: &UtilitySpec,
    launch: Option<&LaunchPlan>,
    agents: usize,
    options: usize,
    rng: &mut RandomStream,
) -> Result<UtilityProfile> {
    let improve = |du_a: f64| -> Result<f64> {
        match launch {
            Some(plan) => improved_utility(du_a, plan.t_b as f64, plan.tau),
            None => Ok(du_a),
        }
    };
    match spec {
        UtilitySpec::Homogeneous(values) => {
            if values.len() + 1 != options {
                return Err(Error::config(
                    "utilities",
                    format!("{} product utilities for {options} options", values.len()),
                ));
            }
            let mut u = values.clone();
            if launch.is_some() {
                u[DELAYED_PRODUCT] = improve(u[0])?;
            }
            u.push(0.0);
            UtilityProfile::uniform(agents, &u)
        }
        UtilitySpec::Heterogeneous(dist) => {
            if options != 3 {
                return Err(Error::config("utilities.mode", "heterogeneous utilities need the 3-option model"));
            }
            let per_agent = dist.assign(agents, rng);
            let mut values = Vec::with_capacity(agents * 3);
            for du in per_agent {
                values.extend([du, improve(du)?, 0.0]);
            }
            UtilityProfile::new(3, values)
        }
    }
}

/// A complete experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: GridSpec,
    pub rewiring: RewiringProbability,
    pub temperature: Temperature,
    pub options: OptionPreset,
    /// Fate of choice weight on forbidden transitions.
    pub restriction: RestrictionRule,
    pub utilities: UtilitySpec,
    /// Sorted by product index, at most one per product.
    pub innovators: Vec<InnovatorSchedule>,
    pub launch: Option<LaunchPlan>,
    pub max_ticks: u32,
    pub saturation_window: u32,
    pub seed: u64,
    pub replications: u32,
}

impl Default for Scenario {
    /// Two identical products (`Δu = 0.6`, 125 innovators per tick up to
    /// 2.5% each) on a regular 200×200 lattice at zero temperature.
    fn default() -> Self {
        Scenario {
            grid: GridSpec::new(200, 200).expect("valid grid"),
            rewiring: RewiringProbability::new(0.0).expect("valid p_r"),
            temperature: Temperature::ZERO,
            options: OptionPreset::Three,
            restriction: RestrictionRule::default(),
            utilities: UtilitySpec::Homogeneous(vec![0.6, 0.6]),
            innovators: vec![
                InnovatorSchedule::new(0, 125, DEFAULT_INNOVATOR_FRACTION, 0).expect("valid schedule"),
                InnovatorSchedule::new(1, 125, DEFAULT_INNOVATOR_FRACTION, 0).expect("valid schedule"),
            ],
            launch: None,
            max_ticks: 500,
            saturation_window: 5,
            seed: 1,
            replications: 1,
        }
    }
}

impl Scenario {
    pub fn option_model(&self) -> OptionModel {
        self.options.model().with_rule(self.restriction)
    }

    pub fn delayed_product(&self) -> StateIndex {
        DELAYED_PRODUCT
    }

    pub fn validate(&self) -> Result<()> {
        let opts = self.option_model();
        let m = opts.len();
        match &self.utilities {
            UtilitySpec::Homogeneous(values) => {
                if values.len() + 1 != m {
                    return Err(Error::config(
                        "utilities",
                        format!("{} product utilities for {m} options", values.len()),
                    ));
                }
                for (k, v) in values.iter().enumerate() {
                    if !(0.0..=1.0).contains(v) {
                        return Err(Error::config(
                            format!("utilities.{}", opts.label(k)),
                            format!("{v} is outside [0, 1]"),
                        ));
                    }
                }
            }
            UtilitySpec::Heterogeneous(_) => {
                if self.options != OptionPreset::Three {
                    return Err(Error::config(
                        "utilities.mode",
                        "heterogeneous utilities need the 3-option model",
                    ));
                }
            }
        }
        let mut last = None;
        for s in &self.innovators {
            if s.product >= m || s.product == opts.non_adoption() {
                return Err(Error::config("innovators", format!("product index {} is not a product", s.product)));
            }
            if last.is_some_and(|p| p >= s.product) {
                return Err(Error::config("innovators", "schedules must be unique and sorted by product"));
            }
            last = Some(s.product);
        }
        if self.saturation_window < 1 {
            return Err(Error::config("run.saturation_window", "must be at least 1"));
        }
        if self.replications < 1 {
            return Err(Error::config("run.replications", "must be at least 1"));
        }
        if let Some(plan) = &self.launch {
            LaunchPlan::new(plan.t_b, plan.tau)?;
        }
        Ok(())
    }

    /// Innovator schedules with the delayed product's start moved to its
    /// launch tick.
    pub fn effective_schedules(&self) -> Vec<InnovatorSchedule> {
        let mut out = self.innovators.clone();
        if let Some(plan) = &self.launch {
            for s in out.iter_mut().filter(|s| s.product == DELAYED_PRODUCT) {
                s.start_tick = s.start_tick.max(plan.t_b);
            }
        }
        out
    }

    /// Utility vectors for a run seeded with `seed`; heterogeneous
    /// assignment shuffles with stream `(seed, Utilities, 0, 0)`.
    pub fn utility_profile(&self, seed: u64) -> Result<UtilityProfile> {
        let mut rng = RandomStream::new(seed, Domain::Utilities, 0, 0);
        assign_utilities(
            &self.utilities,
            self.launch.as_ref(),
            self.grid.agents(),
            self.options.options(),
            &mut rng,
        )
    }
}

/// The published experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(PresetName::Fig1),
            "fig2" => Ok(PresetName::Fig2),
            "fig3" => Ok(PresetName::Fig3),
            "fig4" => Ok(PresetName::Fig4),
            "fig5" => Ok(PresetName::Fig5),
            other => Err(Error::Usage(format!("unknown preset {other:?} (expected fig1..fig5)"))),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            PresetName::Fig1 => 1,
            PresetName::Fig2 => 2,
            PresetName::Fig3 => 3,
            PresetName::Fig4 => 4,
            PresetName::Fig5 => 5,
        };
        write!(f, "fig{n}")
    }
}

/// Knobs the presets are swept over. `None` keeps the preset's default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PresetVariant {
    pub p_r: Option<f64>,
    pub temperature: Option<f64>,
    /// Innovator rate of product B (fig2).
    pub gamma_b: Option<usize>,
    /// Launch delay of product B (fig3, fig4).
    pub t_b: Option<u32>,
    pub grid: Option<(usize, usize)>,
}

pub fn preset(name: PresetName, variant: &PresetVariant) -> Result<Scenario> {
    let mut scn = Scenario::default();
    match name {
        PresetName::Fig1 => {}
        PresetName::Fig2 => {
            scn.innovators[1].rate = variant.gamma_b.unwrap_or(125);
        }
        PresetName::Fig3 | PresetName::Fig4 => {
            if name == PresetName::Fig4 {
                scn.utilities = UtilitySpec::Heterogeneous(HeterogeneityDistribution::reference_mix());
            }
            scn.launch = Some(LaunchPlan::new(variant.t_b.unwrap_or(0), DEFAULT_TAU)?);
        }
        PresetName::Fig5 => {
            scn.options = OptionPreset::Four;
            let u = four_option_utilities(0.7, 0.65, 0.6)?;
            scn.utilities = UtilitySpec::Homogeneous(u[..3].to_vec());
        }
    }
    if name != PresetName::Fig2 {
        if let Some(g) = variant.gamma_b {
            scn.innovators[1].rate = g;
        }
    }
    if let Some(t_b) = variant.t_b {
        if let Some(plan) = &mut scn.launch {
            plan.t_b = t_b;
        } else {
            return Err(Error::Usage(format!("{name} has no launch delay to vary")));
        }
    }
    if let Some(p) = variant.p_r {
        scn.rewiring = RewiringProbability::new(p)?;
    }
    if let Some(t) = variant.temperature {
        scn.temperature = Temperature::new(t)?;
    }
    if let Some((w, h)) = variant.grid {
        scn.grid = GridSpec::new(w, h)?;
    }
    if let Some(g) = variant.gamma_b {
        if g < 1 {
            return Err(Error::config("innovators.B.rate", "must be at least 1"));
        }
    }
    scn.validate()?;
    Ok(scn)
}

/// Statistics over replicated runs with seeds `seed, seed+1, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateSummary {
    pub runs: usize,
    pub options: usize,
    /// Per tick, per state. Runs that stopped early are padded with their
    /// last row.
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    /// Each run's saturation tick (`None` = unsaturated).
    pub saturation_ticks: Vec<Option<usize>>,
    /// Mean over runs of the saturation tick, counting unsaturated runs at
    /// their last simulated tick.
    pub mean_saturation_tick: f64,
    /// Per run, tick at which the non-adopter share stops moving.
    pub non_adoption_ticks: Vec<usize>,
    pub mean_non_adoption_tick: f64,
    /// Per run, final shares.
    pub final_shares: Vec<Vec<f64>>,
    pub final_mean: Vec<f64>,
    pub final_sd: Vec<f64>,
}

impl ReplicateSummary {
    pub fn saturated_runs(&self) -> usize {
        self.saturation_ticks.iter().filter(|t| t.is_some()).count()
    }

    /// `window` is the run's saturation window, reused for the
    /// non-adopter plateau.
    pub fn from_outcomes(outcomes: &[RunOutcome], non_adoption: StateIndex, window: usize) -> Self {
        assert!(!outcomes.is_empty(), "no runs to aggregate");
        let options = outcomes[0].series.options();
        let ticks = outcomes.iter().map(|o| o.series.len()).max().unwrap_or(0);
        let mut mean = Vec::with_capacity(ticks);
        let mut sd = Vec::with_capacity(ticks);
        for t in 0..ticks {
            let rows: Vec<Vec<f64>> = outcomes
                .iter()
                .map(|o| o.series.fractions(t.min(o.series.len() - 1)))
                .collect();
            let (m, s) = column_stats(&rows, options);
            mean.push(m);
            sd.push(s);
        }
        let final_shares: Vec<Vec<f64>> = outcomes.iter().map(|o| o.series.last_fractions()).collect();
        let (final_mean, final_sd) = column_stats(&final_shares, options);
        let mean_saturation_tick =
            outcomes.iter().map(|o| o.settling_tick() as f64).sum::<f64>() / outcomes.len() as f64;
        let non_adoption_ticks: Vec<usize> = outcomes.iter().map(|o| o.plateau_tick(non_adoption, window)).collect();
        let mean_non_adoption_tick =
            non_adoption_ticks.iter().map(|&t| t as f64).sum::<f64>() / outcomes.len() as f64;
        ReplicateSummary {
            runs: outcomes.len(),
            options,
            mean,
            sd,
            saturation_ticks: outcomes.iter().map(|o| o.saturation_tick).collect(),
            mean_saturation_tick,
            non_adoption_ticks,
            mean_non_adoption_tick,
            final_shares,
            final_mean,
            final_sd,
        }
    }
}

/// Mean and sample standard deviation (zero for a single row) per column.
fn column_stats(rows: &[Vec<f64>], columns: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..columns)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n)
        .collect();
    let sd = (0..columns)
        .map(|k| {
            if rows.len() < 2 {
                return 0.0;
            }
            let ss: f64 = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect();
    (mean, sd)
}

/// Runs `n_runs` replications concurrently and aggregates them in seed order.
pub fn replicate(scn: &Scenario, n_runs: usize) -> Result<ReplicateSummary> {
    if n_runs < 1 {
        return Err(Error::config("run.replications", "must be at least 1"));
    }
    let outcomes = replicate_runs(scn, n_runs)?;
    Ok(ReplicateSummary::from_outcomes(
        &outcomes,
        scn.option_model().non_adoption(),
        scn.saturation_window as usize,
    ))
}

/// The individual runs behind [`replicate`].
pub fn replicate_runs(scn: &Scenario, n_runs: usize) -> Result<Vec<RunOutcome>> {
    (0..n_runs as u64)
        .into_par_iter()
        .map(|i| run_with_seed(scn, scn.seed.wrapping_add(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improved_utility_boundaries() {
        assert_eq!(improved_utility(0.6, 0.0, DEFAULT_TAU).unwrap(), 0.6);
        assert!((improved_utility(0.6, 1e4, DEFAULT_TAU).unwrap() - 1.0).abs() < 1e-12);
        assert!(improved_utility(1.2, 1.0, 1.0).is_err());
        assert!(improved_utility(0.5, 1.0, 0.0).is_err());
        assert!(improved_utility(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn four_option_differences() {
        let u = four_option_utilities(0.7, 0.65, 0.6).unwrap();
        assert!((u[2] - u[0] - (-0.1)).abs() < 1e-12);
        assert!((u[2] - u[1] - (-0.05)).abs() < 1e-12);
        assert_eq!(four_option_utilities(0.5, 0.3, 0.5).unwrap()[2] - 0.5, 0.0);
        assert_eq!(four_option_utilities(0.0, 0.0, 0.0).unwrap(), [0.0; 4]);
        assert!(four_option_utilities(0.5, 1.1, 0.5).is_err());
    }

    #[test]
    fn bucket_sizes_are_exact() {
        let d = HeterogeneityDistribution::reference_mix();
        assert_eq!(d.bucket_sizes(40_000), vec![16_000, 16_000, 8_000]);
        // 7 agents: floors 2, 2, 1, remainder 2 to the first largest bucket
        assert_eq!(d.bucket_sizes(7), vec![4, 2, 1]);
        assert!((d.mean() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(HeterogeneityDistribution::new(vec![(0.5, 0.6), (0.4, 0.7)]).is_err());
        assert!(HeterogeneityDistribution::new(vec![(1.0, 1.5)]).is_err());
        assert!(HeterogeneityDistribution::new(vec![]).is_err());
    }

    #[test]
    fn homogeneous_assignment() {
        let mut rng = RandomStream::new(1, Domain::Utilities, 0, 0);
        let p = assign_utilities(&UtilitySpec::Homogeneous(vec![0.6, 0.6]), None, 50, 3, &mut rng).unwrap();
        assert!((0..50).all(|a| p.of(a) == [0.6, 0.6, 0.0]));
    }

    #[test]
    fn heterogeneous_assignment_with_delay() {
        let mut rng = RandomStream::new(1, Domain::Utilities, 0, 0);
        let spec = UtilitySpec::Heterogeneous(HeterogeneityDistribution::reference_mix());
        let plan = LaunchPlan::new(2, DEFAULT_TAU).unwrap();
        let p = assign_utilities(&spec, Some(&plan), 1000, 3, &mut rng).unwrap();
        let mean_a = (0..1000).map(|a| p.of(a)[0]).sum::<f64>() / 1000.0;
        assert!((mean_a - 0.6).abs() < 1e-12);
        let low = (0..1000).find(|&a| p.of(a)[0] == 0.4).unwrap();
        assert!((p.of(low)[1] - (0.4 + 0.6 * 0.3f64.tanh())).abs() < 1e-15);
        assert_eq!(p.of(low)[2], 0.0);
    }

    #[test]
    fn presets() {
        let f1 = preset(PresetName::Fig1, &PresetVariant::default()).unwrap();
        assert_eq!(f1, Scenario::default());

        let f2 = preset(PresetName::Fig2, &PresetVariant { gamma_b: Some(1000), ..Default::default() }).unwrap();
        assert_eq!((f2.innovators[0].rate, f2.innovators[1].rate), (125, 1000));

        let f5 = preset(
            PresetName::Fig5,
            &PresetVariant { p_r: Some(0.02), temperature: Some(0.05), ..Default::default() },
        )
        .unwrap();
        assert_eq!(f5.options, OptionPreset::Four);
        assert_eq!(f5.utilities, UtilitySpec::Homogeneous(vec![0.7, 0.65, 0.6]));
        assert_eq!(f5.rewiring.value(), 0.02);

        let f4 = preset(PresetName::Fig4, &PresetVariant { t_b: Some(3), ..Default::default() }).unwrap();
        assert_eq!(f4.effective_schedules()[1].start_tick, 3);
        assert!(matches!(f4.utilities, UtilitySpec::Heterogeneous(_)));

        assert!(preset(PresetName::Fig1, &PresetVariant { t_b: Some(3), ..Default::default() }).is_err());
        assert!("fig9".parse::<PresetName>().is_err());
        assert_eq!("fig3".parse::<PresetName>().unwrap().to_string(), "fig3");
    }
}
