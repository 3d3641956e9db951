//! The M-option Potts decision kernel.
//!
//! An agent's local field is `m_k = ν_k + u_k`, where `ν_k` is the share of
//! its contacts in state `k` and `u_k` its utility for `k`. Each available
//! state gets the Boltzmann–Gibbs weight `exp(β m_k)`; at `T = 0` the mass
//! splits evenly over the maximizers of `m`. Targets the agent may not move
//! to get probability 0, and how their weight is disposed of is set by the
//! model's [`RestrictionRule`].

use crate::error::{Error, Result};
use crate::network::{AgentId, Network};
use crate::rng::RandomStream;

pub type StateIndex = usize;

/// Upper bound on the number of options; keeps per-agent buffers on the stack.
pub const MAX_OPTIONS: usize = 8;

/// What happens to the weight of a state the agent cannot move to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RestrictionRule {
    /// Evaluate the choice over every available state; weight that lands on
    /// a forbidden target stays with the current state.
    #[default]
    Stay,
    /// Normalize over the permitted targets only.
    Renormalize,
}

impl RestrictionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            RestrictionRule::Stay => "stay",
            RestrictionRule::Renormalize => "renormalize",
        }
    }
}

impl std::str::FromStr for RestrictionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stay" => Ok(RestrictionRule::Stay),
            "renormalize" => Ok(RestrictionRule::Renormalize),
            other => Err(Error::config(
                "decision.restricted",
                format!("{other:?} is not stay or renormalize"),
            )),
        }
    }
}

/// The set of states, which transitions between them are permitted, and
/// which states are currently on offer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptionModel {
    labels: Vec<String>,
    /// Row-major `M x M`; `allowed[from * M + to]`.
    allowed: Vec<bool>,
    /// States that take part in the choice at all (an unlaunched product
    /// does not).
    available: Vec<bool>,
    non_adoption: StateIndex,
    rule: RestrictionRule,
}

impl OptionModel {
    /// Builds a model from labels and the non-trivial transitions. Self
    /// transitions are always added.
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        transitions: &[(StateIndex, StateIndex)],
        non_adoption: StateIndex,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let m = labels.len();
        if !(2..=MAX_OPTIONS).contains(&m) {
            return Err(Error::config(
                "options",
                format!("need between 2 and {MAX_OPTIONS} options, got {m}"),
            ));
        }
        if non_adoption >= m {
            return Err(Error::config("options", "non-adoption state out of range"));
        }
        let mut allowed = vec![false; m * m];
        for k in 0..m {
            allowed[k * m + k] = true;
        }
        for &(from, to) in transitions {
            if from >= m || to >= m {
                return Err(Error::config("options", format!("transition {from}->{to} out of range")));
            }
            allowed[from * m + to] = true;
        }
        Ok(OptionModel {
            labels,
            allowed,
            available: vec![true; m],
            non_adoption,
            rule: RestrictionRule::default(),
        })
    }

    /// Adopt / not adopt. States `(adopt, 0)`.
    pub fn two_option() -> Self {
        Self::new(["adopt", "0"], &[(1, 0)], 1).expect("valid preset")
    }

    /// Two competing exclusive products. States `(A, B, 0)`; only `0→A`
    /// and `0→B` are permitted, so adopters are absorbing.
    pub fn three_option() -> Self {
        Self::new(["A", "B", "0"], &[(2, 0), (2, 1)], 2).expect("valid preset")
    }

    /// Two non-exclusive products. States `(A, B, AB, 0)` with transitions
    /// `0→A`, `0→B`, `0→AB`, `A→AB`, `B→AB`.
    pub fn four_option() -> Self {
        Self::new(
            ["A", "B", "AB", "0"],
            &[(3, 0), (3, 1), (3, 2), (0, 2), (1, 2)],
            3,
        )
        .expect("valid preset")
    }

    /// Every transition permitted; the unrestricted Potts kernel.
    pub fn unrestricted<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let m = labels.len();
        let all: Vec<_> = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).collect();
        let last = m.saturating_sub(1);
        Self::new(labels, &all, last)
    }

    pub fn with_rule(mut self, rule: RestrictionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn rule(&self) -> RestrictionRule {
        self.rule
    }

    /// Number of options `M`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: StateIndex) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Option<StateIndex> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn non_adoption(&self) -> StateIndex {
        self.non_adoption
    }

    /// The transition `from → to` is permitted and `to` is on offer.
    pub fn is_allowed(&self, from: StateIndex, to: StateIndex) -> bool {
        self.allowed[from * self.len() + to] && (self.available[to] || from == to)
    }

    pub fn is_available(&self, k: StateIndex) -> bool {
        self.available[k]
    }

    /// A state with no permitted transition other than staying put.
    pub fn is_absorbing(&self, from: StateIndex) -> bool {
        (0..self.len()).all(|to| to == from || !self.is_allowed(from, to))
    }

    /// Copy of the model with `target` withdrawn from the choice set of
    /// every agent not already in it.
    pub fn without_option(&self, target: StateIndex) -> Self {
        let mut out = self.clone();
        out.available[target] = false;
        out
    }
}

/// Shares `ν_k` of an agent's contacts in each state.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborFractions(pub Vec<f64>);

/// Local field `m_k = ν_k + u_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalField(pub Vec<f64>);

impl LocalField {
    /// `Δ_kj = m_k − m_j = Δν_kj + Δu_kj`.
    pub fn delta(&self, k: StateIndex, j: StateIndex) -> f64 {
        self.0[k] - self.0[j]
    }
}

/// Decision temperature (Boltzmann constant fixed at 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0.0);

    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::config("decision.temperature", format!("{t} is not a finite value >= 0")));
        }
        Ok(Temperature(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `β = 1/T`, or `None` at zero temperature.
    pub fn beta(self) -> Option<f64> {
        (self.0 > 0.0).then(|| 1.0 / self.0)
    }
}

/// Counts the contacts of `agent` in each of the `m` states and divides by
/// its degree.
pub fn neighbor_fractions(net: &Network, states: &[u8], agent: AgentId, m: usize) -> Result<NeighborFractions> {
    let degree = net.degree(agent)?;
    if degree == 0 {
        return Err(Error::Usage(format!("agent {agent} has no contacts")));
    }
    let mut counts = vec![0usize; m];
    for &c in net.contacts(agent) {
        let s = states[c as usize] as usize;
        if s >= m {
            return Err(Error::Usage(format!("state {s} out of range for {m} options")));
        }
        counts[s] += 1;
    }
    Ok(NeighborFractions(
        counts.into_iter().map(|c| c as f64 / degree as f64).collect(),
    ))
}

pub fn local_field(nu: &NeighborFractions, utility: &[f64]) -> Result<LocalField> {
    if nu.0.len() != utility.len() {
        return Err(Error::Usage(format!(
            "neighbor fractions have {} components, utilities {}",
            nu.0.len(),
            utility.len()
        )));
    }
    Ok(LocalField(nu.0.iter().zip(utility).map(|(n, u)| n + u).collect()))
}

fn check_inputs(field: &LocalField, current: StateIndex, opts: &OptionModel) -> Result<()> {
    if field.0.len() != opts.len() {
        return Err(Error::Usage(format!(
            "field has {} components, model {}",
            field.0.len(),
            opts.len()
        )));
    }
    if current >= opts.len() {
        return Err(Error::Usage(format!("state {current} out of range")));
    }
    if let Some(bad) = field.0.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite field component {bad}")));
    }
    Ok(())
}

/// Boltzmann–Gibbs choice probabilities for an agent in `current`.
/// Requires `T > 0`; use [`zero_temperature_probabilities`] or
/// [`transition_probabilities`] otherwise.
///
/// With every transition permitted this is `exp(β m_k) / Σ_j exp(β m_j)`.
/// Forbidden targets always get 0; see [`RestrictionRule`].
pub fn choice_probabilities(
    field: &LocalField,
    temperature: Temperature,
    current: StateIndex,
    opts: &OptionModel,
) -> Result<Vec<f64>> {
    check_inputs(field, current, opts)?;
    let beta = temperature
        .beta()
        .ok_or_else(|| Error::Usage("zero temperature has no finite beta".into()))?;
    let mut out = vec![0.0; opts.len()];
    probabilities_into(&field.0, Some(beta), current, opts, &mut out);
    Ok(out)
}

/// Exact `T = 0` limit: probability splits evenly over the states whose
/// field equals the maximum (exact comparison).
pub fn zero_temperature_probabilities(field: &LocalField, current: StateIndex, opts: &OptionModel) -> Result<Vec<f64>> {
    check_inputs(field, current, opts)?;
    let mut out = vec![0.0; opts.len()];
    probabilities_into(&field.0, None, current, opts, &mut out);
    Ok(out)
}

/// Dispatches on temperature.
pub fn transition_probabilities(
    field: &LocalField,
    temperature: Temperature,
    current: StateIndex,
    opts: &OptionModel,
) -> Result<Vec<f64>> {
    match temperature.beta() {
        Some(_) => choice_probabilities(field, temperature, current, opts),
        None => zero_temperature_probabilities(field, current, opts),
    }
}

/// Unchecked kernel used by the simulation sweep. `field` and `out` have
/// length `M`.
#[inline]
pub(crate) fn probabilities_into(
    field: &[f64],
    beta: Option<f64>,
    current: StateIndex,
    opts: &OptionModel,
    out: &mut [f64],
) {
    let m = opts.len();
    let row = &opts.allowed[current * m..(current + 1) * m];
    // candidates: states that enter the normalization
    let mut candidate = [false; MAX_OPTIONS];
    for k in 0..m {
        candidate[k] = k == current
            || (opts.available[k] && (row[k] || opts.rule == RestrictionRule::Stay));
    }
    let max = (0..m)
        .filter(|&k| candidate[k])
        .map(|k| field[k])
        .fold(f64::NEG_INFINITY, f64::max);

    let mut total = 0.0;
    for k in 0..m {
        out[k] = if !candidate[k] {
            0.0
        } else {
            match beta {
                // shifting by the max keeps every exponent <= 0
                Some(beta) => (beta * (field[k] - max)).exp(),
                None => (field[k] == max) as u8 as f64,
            }
        };
        total += out[k];
    }
    let mut kept = 0.0;
    for k in 0..m {
        if k != current && !row[k] {
            kept += out[k];
            out[k] = 0.0;
        }
    }
    out[current] += kept;
    for o in out[..m].iter_mut() {
        *o /= total;
    }
}

/// Draws a state with one uniform variate and a cumulative scan in index
/// order. Rounding slack at the top end falls to the last state with
/// positive probability.
pub fn sample_state(probabilities: &[f64], rng: &mut RandomStream) -> Result<StateIndex> {
    let total: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "not a probability distribution: {probabilities:?}"
        )));
    }
    Ok(sample_unchecked(probabilities, rng.uniform()))
}

#[inline]
pub(crate) fn sample_unchecked(probabilities: &[f64], draw: f64) -> StateIndex {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if draw < acc {
            return k;
        }
    }
    last
}
