//! Flat `key = value` run configuration.
//!
//! ```text
//! # two identical products on a small-world lattice
//! grid.width = 100
//! grid.height = 100
//! network.p_r = 0.02
//! innovators.B.rate = 1000
//! ```
//!
//! Keys are dotted, one per line; `#` starts a comment. Every key is
//! optional and unknown keys are rejected. Defaults reproduce the
//! two-identical-products experiment on a 200×200 lattice.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::decision::Temperature;
use crate::error::{Error, Result};
use crate::network::{GridSpec, RewiringProbability};
use crate::scenarios::{
    four_option_utilities, HeterogeneityDistribution, LaunchPlan, OptionPreset, Scenario, UtilitySpec, DEFAULT_TAU,
};
use crate::simulation::{InnovatorSchedule, DEFAULT_INNOVATOR_FRACTION};

const DEFAULT_RATE: usize = 125;

/// Parsed but not yet interpreted configuration text. Keeps the source
/// line of every entry for error messages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDocument {
    entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    key: String,
    value: String,
    /// 0 for entries set programmatically.
    line: usize,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDocument::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `key = value`, found {content:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line,
                    message: format!("malformed key {key:?}"),
                });
            }
            if value.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("missing value for {key}"),
                });
            }
            if doc.entries.iter().any(|e| e.key == key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key {key}"),
                });
            }
            doc.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(doc)
    }

    /// Sets or replaces `key`.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value.to_string();
                e.line = 0;
            }
            None => self.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            }),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), value.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        e.value.parse().map(Some).map_err(|_| Error::Parse {
            line: e.line,
            message: format!("cannot parse {:?} for {key}", e.value),
        })
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        Interpreter::new(self).scenario()
    }
}

struct Interpreter<'a> {
    doc: &'a ConfigDocument,
    used: HashSet<&'a str>,
}

impl<'a> Interpreter<'a> {
    fn new(doc: &'a ConfigDocument) -> Self {
        Interpreter {
            doc,
            used: HashSet::new(),
        }
    }

    fn take<T: FromStr>(&mut self, key: &'a str) -> Result<Option<T>> {
        self.used.insert(key);
        self.doc.value(key)
    }

    fn take_owned<T: FromStr>(&mut self, key: String) -> Result<Option<T>> {
        let stored = self.doc.entry(&key).map(|e| e.key.as_str());
        if let Some(k) = stored {
            self.used.insert(k);
        }
        self.doc.value(&key)
    }

    fn scenario(mut self) -> Result<Scenario> {
        let mut scn = Scenario::default();

        let width = self.take("grid.width")?.unwrap_or(scn.grid.width());
        let height = self.take("grid.height")?.unwrap_or(scn.grid.height());
        scn.grid = GridSpec::new(width, height)?;
        if let Some(p) = self.take("network.p_r")? {
            scn.rewiring = RewiringProbability::new(p)?;
        }
        if let Some(t) = self.take("decision.temperature")? {
            scn.temperature = Temperature::new(t)?;
        }
        if let Some(rule) = self.take::<String>("decision.restricted")? {
            scn.restriction = rule.parse()?;
        }
        scn.options = match self.take::<u32>("options.preset")? {
            None | Some(3) => OptionPreset::Three,
            Some(4) => OptionPreset::Four,
            Some(other) => return Err(Error::config("options.preset", format!("{other} is not 3 or 4"))),
        };
        let opts = scn.option_model();
        let products: Vec<usize> = (0..opts.len()).filter(|&k| k != opts.non_adoption()).collect();

        let mode: String = self.take("utilities.mode")?.unwrap_or_else(|| "homogeneous".into());
        scn.utilities = match mode.as_str() {
            "homogeneous" => {
                let mut values = match scn.options {
                    OptionPreset::Three => vec![0.6, 0.6],
                    OptionPreset::Four => four_option_utilities(0.7, 0.65, 0.6)?[..3].to_vec(),
                };
                for (slot, &k) in values.iter_mut().zip(&products) {
                    if let Some(v) = self.take_owned(format!("utilities.{}", opts.label(k)))? {
                        *slot = v;
                    }
                }
                if self.doc.entry("utilities.distribution").is_some() {
                    return Err(Error::config(
                        "utilities.distribution",
                        "only valid with utilities.mode = heterogeneous",
                    ));
                }
                UtilitySpec::Homogeneous(values)
            }
            "heterogeneous" => {
                let text: Option<String> = self.take("utilities.distribution")?;
                let dist = match text {
                    Some(t) => parse_distribution(&t)?,
                    None => HeterogeneityDistribution::reference_mix(),
                };
                UtilitySpec::Heterogeneous(dist)
            }
            other => {
                return Err(Error::config(
                    "utilities.mode",
                    format!("{other:?} is not homogeneous or heterogeneous"),
                ))
            }
        };

        let listed: Option<String> = self.take("innovators.products")?;
        let scheduled: Vec<usize> = match listed.as_deref() {
            None => vec![0, 1],
            Some("none") => vec![],
            Some(list) => {
                let mut out = Vec::new();
                for label in list.split(',').map(str::trim) {
                    match opts.index_of(label) {
                        Some(k) if k != opts.non_adoption() => out.push(k),
                        _ => return Err(Error::config("innovators.products", format!("{label:?} is not a product"))),
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            }
        };
        scn.innovators = Vec::with_capacity(scheduled.len());
        for &k in &scheduled {
            let label = opts.label(k);
            let rate = self.take_owned(format!("innovators.{label}.rate"))?.unwrap_or(DEFAULT_RATE);
            let fraction = self
                .take_owned(format!("innovators.{label}.fraction"))?
                .unwrap_or(DEFAULT_INNOVATOR_FRACTION);
            let start = self.take_owned(format!("innovators.{label}.start"))?.unwrap_or(0);
            let sched = InnovatorSchedule::new(k, rate, fraction, start).map_err(|e| match e {
                Error::Config { key, message } => {
                    Error::config(key.replacen("innovators.", &format!("innovators.{label}."), 1), message)
                }
                other => other,
            })?;
            scn.innovators.push(sched);
        }

        let t_b: Option<u32> = self.take("launch.t_b")?;
        let tau: Option<f64> = self.take("launch.tau")?;
        if t_b.is_some() || tau.is_some() {
            scn.launch = Some(LaunchPlan::new(t_b.unwrap_or(0), tau.unwrap_or(DEFAULT_TAU))?);
        }

        if let Some(v) = self.take("run.max_ticks")? {
            scn.max_ticks = v;
        }
        if let Some(v) = self.take("run.saturation_window")? {
            scn.saturation_window = v;
        }
        if let Some(v) = self.take("run.seed")? {
            scn.seed = v;
        }
        if let Some(v) = self.take("run.replications")? {
            scn.replications = v;
        }

        if let Some(e) = self.doc.entries.iter().find(|e| !self.used.contains(e.key.as_str())) {
            return Err(if e.line > 0 {
                Error::Parse {
                    line: e.line,
                    message: format!("unknown key {}", e.key),
                }
            } else {
                Error::Usage(format!("unknown key {}", e.key))
            });
        }
        scn.validate()?;
        Ok(scn)
    }
}

/// `fraction:Δu` pairs separated by commas, e.g. `0.4:0.6, 0.4:0.7, 0.2:0.4`.
fn parse_distribution(text: &str) -> Result<HeterogeneityDistribution> {
    const KEY: &str = "utilities.distribution";
    let mut buckets = Vec::new();
    for item in text.split(',') {
        let (f, u) = item
            .split_once(':')
            .ok_or_else(|| Error::config(KEY, format!("{item:?} is not fraction:utility")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(KEY, format!("{s:?} is not a number")))
        };
        buckets.push((parse(f)?, parse(u)?));
    }
    HeterogeneityDistribution::new(buckets)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Scenario> {
    ConfigDocument::parse(text)?.to_scenario()
}

/// Canonical text form; `parse_config(&emit_config(s))` equals `s`.
pub fn emit_config(scn: &Scenario) -> String {
    let opts = scn.option_model();
    let mut out = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("grid.width", &scn.grid.width());
    kv("grid.height", &scn.grid.height());
    kv("network.p_r", &scn.rewiring.value());
    kv("decision.temperature", &scn.temperature.value());
    kv("decision.restricted", &scn.restriction.as_str());
    kv("options.preset", &scn.options.options());
    match &scn.utilities {
        UtilitySpec::Homogeneous(values) => {
            kv("utilities.mode", &"homogeneous");
            let products = (0..opts.len()).filter(|&k| k != opts.non_adoption());
            for (k, v) in products.zip(values) {
                kv(&format!("utilities.{}", opts.label(k)), v);
            }
        }
        UtilitySpec::Heterogeneous(dist) => {
            kv("utilities.mode", &"heterogeneous");
            let list: Vec<String> = dist.buckets().iter().map(|(f, u)| format!("{f}:{u}")).collect();
            kv("utilities.distribution", &list.join(", "));
        }
    }
    if scn.innovators.is_empty() {
        kv("innovators.products", &"none");
    } else {
        let labels: Vec<&str> = scn.innovators.iter().map(|s| opts.label(s.product)).collect();
        kv("innovators.products", &labels.join(","));
    }
    for s in &scn.innovators {
        let label = opts.label(s.product);
        kv(&format!("innovators.{label}.rate"), &s.rate);
        kv(&format!("innovators.{label}.fraction"), &s.target_fraction);
        kv(&format!("innovators.{label}.start"), &s.start_tick);
    }
    if let Some(plan) = &scn.launch {
        kv("launch.t_b", &plan.t_b);
        kv("launch.tau", &plan.tau);
    }
    kv("run.max_ticks", &scn.max_ticks);
    kv("run.saturation_window", &scn.saturation_window);
    kv("run.seed", &scn.seed);
    kv("run.replications", &scn.replications);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{preset, PresetName, PresetVariant};

    #[test]
    fn empty_document_gives_defaults() {
        let scn = parse_config("").unwrap();
        assert_eq!(scn, Scenario::default());
        assert_eq!(scn.grid.agents(), 40_000);
        assert_eq!((scn.max_ticks, scn.saturation_window, scn.seed, scn.replications), (500, 5, 1, 1));
        assert_eq!(scn.options, OptionPreset::Three);
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), scn);
    }

    #[test]
    fn range_violation_names_the_key() {
        let err = parse_config("network.p_r = 1.5").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "network.p_r"), "{err}");
        let err = parse_config("innovators.B.rate = 0").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "innovators.B.rate"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config("grid.width = 10\nthis line is wrong\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_config("grid.width = ten").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_config("run.seed = 1\nrun.seed = 2").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_config("grid.depth = 3").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn mode_specific_keys() {
        assert!(parse_config("utilities.distribution = 1:0.5").is_err());
        assert!(parse_config("utilities.mode = heterogeneous\nutilities.A = 0.5").is_err());
        assert!(parse_config("utilities.AB = 0.5").is_err());
        assert!(parse_config("options.preset = 4\nutilities.AB = 0.5").is_ok());
        assert!(parse_config("innovators.products = A\ninnovators.B.rate = 5").is_err());
        assert!(parse_config("options.preset = 5").is_err());
    }

    #[test]
    fn parses_a_full_document() {
        let scn = parse_config(
            "grid.width = 50 # wide\n\
             grid.height = 40\n\
             network.p_r = 0.02\n\
             decision.temperature = 0.05\n\
             utilities.mode = heterogeneous\n\
             utilities.distribution = 0.5:0.6, 0.5:0.7\n\
             innovators.products = B\n\
             innovators.B.rate = 1000\n\
             launch.t_b = 3\n\
             run.seed = 9\n",
        )
        .unwrap();
        assert_eq!(scn.grid.agents(), 2000);
        assert_eq!(scn.innovators.len(), 1);
        assert_eq!(scn.innovators[0].product, 1);
        assert_eq!(scn.launch, Some(LaunchPlan::new(3, DEFAULT_TAU).unwrap()));
        assert_eq!(scn.seed, 9);
    }

    #[test]
    fn presets_round_trip() {
        for name in [PresetName::Fig1, PresetName::Fig2, PresetName::Fig3, PresetName::Fig4, PresetName::Fig5] {
            let variant = PresetVariant {
                p_r: Some(0.02),
                temperature: Some(0.05),
                ..Default::default()
            };
            let scn = preset(name, &variant).unwrap();
            assert_eq!(parse_config(&emit_config(&scn)).unwrap(), scn, "{name}");
        }
        let none = Scenario {
            innovators: vec![],
            ..Scenario::default()
        };
        assert_eq!(parse_config(&emit_config(&none)).unwrap(), none);
    }

    #[test]
    fn overrides_replace_values() {
        let mut doc = ConfigDocument::parse("network.p_r = 0.1").unwrap();
        doc.apply_override("network.p_r=0.02").unwrap();
        doc.apply_override("decision.temperature = 0.05").unwrap();
        let scn = doc.to_scenario().unwrap();
        assert_eq!(scn.rewiring.value(), 0.02);
        assert_eq!(scn.temperature.value(), 0.05);
        assert!(doc.apply_override("nonsense").is_err());
        doc.set("bogus.key", "1");
        assert!(matches!(doc.to_scenario(), Err(Error::Usage(_))));
    }
}
