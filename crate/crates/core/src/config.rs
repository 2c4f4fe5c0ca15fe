//! Run configuration: a TOML file of flat, dotted keys resolved against
//! documented defaults, with the origin of every value recorded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::cavity::GateParams;
use crate::channels::{ChannelParams, Strategy};
use crate::error::{Error, Result};
use crate::optics::{DetectionParams, LoopRule, SwitchParams};
use crate::protocol::{ProtocolConfig, MAX_PAIRS};
use crate::qstate::C64;
use crate::source::SourceParams;
use crate::sweep::{Engine, SweepSpec};

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    User,
    /// Reference hardware values of the modeled link.
    ReferenceHardware,
    /// Choices of this engine where the model leaves a value open.
    Engine,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::User => "user",
            Provenance::ReferenceHardware => "default:reference-hardware",
            Provenance::Engine => "default:engine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    /// Base link configuration (its `m`, distance and strategy are the
    /// first sweep point).
    pub protocol: ProtocolConfig,
    pub sweep: SweepSpec,
    /// Path → (rendered value, provenance) for every known key.
    pub entries: BTreeMap<String, (String, Provenance)>,
}

impl ResolvedConfig {
    /// One line per key: `path = value  [tag]`.
    pub fn explain(&self) -> String {
        let width = self.entries.keys().map(|k| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (path, (value, prov)) in &self.entries {
            let _ = writeln!(out, "{path:<width$} = {value}  [{}]", prov.tag());
        }
        out
    }
}

struct Reader {
    values: BTreeMap<String, Value>,
    known: BTreeSet<String>,
    entries: BTreeMap<String, (String, Provenance)>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&path, t, out),
            other => {
                out.insert(path, other.clone());
            }
        }
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => format!("\"{s}\""),
        other => other.to_string(),
    }
}

impl Reader {
    fn new(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            Error::config("<file>", format!("parse error: {msg}"))
        })?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values);
        Ok(Self { values, known: BTreeSet::new(), entries: BTreeMap::new() })
    }

    fn take(&mut self, path: &str) -> Option<Value> {
        self.known.insert(path.to_string());
        self.values.get(path).cloned()
    }

    fn record(&mut self, path: &str, value: String, prov: Provenance) {
        self.entries.insert(path.to_string(), (value, prov));
    }

    fn number(&mut self, path: &str, default: f64, prov: Provenance, valid: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
        let v = match self.take(path) {
            None => {
                self.record(path, default.to_string(), prov);
                return Ok(default);
            }
            Some(Value::Float(f)) => f,
            Some(Value::Integer(i)) => i as f64,
            Some(other) => return Err(Error::config(path, format!("expected a number, got {}", other.type_str()))),
        };
        if !valid(v) {
            return Err(Error::config(path, format!("value {v} out of range: must be {range}")));
        }
        self.record(path, v.to_string(), Provenance::User);
        Ok(v)
    }

    fn integer(&mut self, path: &str, default: i64, prov: Provenance) -> Result<i64> {
        match self.take(path) {
            None => {
                self.record(path, default.to_string(), prov);
                Ok(default)
            }
            Some(Value::Integer(i)) => {
                self.record(path, i.to_string(), Provenance::User);
                Ok(i)
            }
            Some(other) => Err(Error::config(path, format!("expected an integer, got {}", other.type_str()))),
        }
    }

    fn boolean(&mut self, path: &str, default: bool, prov: Provenance) -> Result<bool> {
        match self.take(path) {
            None => {
                self.record(path, default.to_string(), prov);
                Ok(default)
            }
            Some(Value::Boolean(b)) => {
                self.record(path, b.to_string(), Provenance::User);
                Ok(b)
            }
            Some(other) => Err(Error::config(path, format!("expected true or false, got {}", other.type_str()))),
        }
    }

    fn string(&mut self, path: &str, default: &str, prov: Provenance) -> Result<String> {
        match self.take(path) {
            None => {
                self.record(path, format!("\"{default}\""), prov);
                Ok(default.to_string())
            }
            Some(Value::String(s)) => {
                self.record(path, format!("\"{s}\""), Provenance::User);
                Ok(s)
            }
            Some(other) => Err(Error::config(path, format!("expected a string, got {}", other.type_str()))),
        }
    }

    fn array(&mut self, path: &str) -> Result<Option<Vec<Value>>> {
        match self.take(path) {
            None => Ok(None),
            Some(Value::Array(a)) => {
                if a.is_empty() {
                    return Err(Error::config(path, "list must not be empty"));
                }
                self.record(path, render(&Value::Array(a.clone())), Provenance::User);
                Ok(Some(a))
            }
            Some(other) => Err(Error::config(path, format!("expected a list, got {}", other.type_str()))),
        }
    }

    fn finish(&self) -> Result<()> {
        if let Some(path) = self.values.keys().find(|k| !self.known.contains(*k)) {
            return Err(Error::config(path.as_str(), "unknown key"));
        }
        Ok(())
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn non_negative(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn check_m(path: &str, m: i64) -> Result<usize> {
    if m < 1 || m > MAX_PAIRS as i64 {
        return Err(Error::EngineLimit(format!("{path} = {m} outside the supported range 1..={MAX_PAIRS}")));
    }
    Ok(m as usize)
}

fn parse_strategy(path: &str, s: &str) -> Result<Strategy> {
    Strategy::parse(s).ok_or_else(|| Error::config(path, format!("unknown strategy \"{s}\" (qudit, qubit_all_keep, qubit_one_shot)")))
}

/// Parses and range-checks a configuration, filling every missing key with
/// its default.
pub fn validate_config(text: &str) -> Result<ResolvedConfig> {
    use Provenance::{Engine as E, ReferenceHardware as H};
    let mut r = Reader::new(text)?;

    let m = check_m("m", r.integer("m", 2, E)?)?;
    let distance_km = r.number("distance_km", 20.0, E, non_negative, ">= 0")?;
    let strategy = parse_strategy("strategy", &r.string("strategy", "qudit", E)?)?;
    let n_trajectories = r.integer("n_trajectories", 100_000, E)?;
    if n_trajectories < 1 {
        return Err(Error::config("n_trajectories", format!("value {n_trajectories} out of range: must be >= 1")));
    }
    let seed = r.integer("seed", 1, E)?;
    if seed < 0 {
        return Err(Error::config("seed", "must be non-negative"));
    }

    let attenuation_km = r.number("fiber.attenuation_km", 20.0, H, positive, "> 0")?;
    let c_fiber = r.number("fiber.light_speed_km_s", 2.0e5, E, positive, "> 0")?;

    let switch = SwitchParams {
        eta_sw: r.number("switch.eta_sw", 0.9, H, unit, "in [0, 1]")?,
        e_sw: r.number("switch.e_sw", 0.01, H, unit, "in [0, 1]")?,
    };

    let c0 = r.number("gate.cooperativity0", 0.0, H, non_negative, ">= 0")?;
    let c1 = r.number("gate.cooperativity1", 100.0, H, non_negative, ">= 0")?;
    let ratio = r.number("gate.kappa_a_ratio", 0.95, H, unit, "in [0, 1]")?;
    let kappa = r.number("gate.kappa", 1.0e11, E, positive, "> 0")?;
    let gamma = r.number("gate.gamma", 1.0e9, E, positive, "> 0")?;
    let omega = r.number("gate.omega", 0.0, E, f64::is_finite, "finite")?;
    let delta0 = r.number("gate.delta0", 0.0, E, f64::is_finite, "finite")?;
    let delta1 = r.number("gate.delta1", 0.0, E, f64::is_finite, "finite")?;
    let gate = GateParams {
        delta0,
        delta1,
        g0: (c0 * kappa * gamma).sqrt(),
        g1: (c1 * kappa * gamma).sqrt(),
        gamma0: gamma,
        gamma1: gamma,
        kappa_a: ratio * kappa,
        kappa,
        omega,
    };

    let sd = SourceParams::default();
    let source = SourceParams {
        sigma_a: r.number("source.sigma_a", 0.1, H, non_negative, ">= 0")?,
        sigma_p: r.number("source.sigma_p", 0.1, H, non_negative, ">= 0")?,
        omega: C64::new(
            r.number("source.omega_re", sd.omega.re, E, f64::is_finite, "finite")?,
            r.number("source.omega_im", sd.omega.im, E, f64::is_finite, "finite")?,
        ),
        delta: r.number("source.delta", sd.delta, E, f64::is_finite, "finite")?,
        two_photon_delta: r.number("source.two_photon_delta", sd.two_photon_delta, E, f64::is_finite, "finite")?,
        g: r.number("source.g", sd.g, E, non_negative, ">= 0")?,
        gamma_g: r.number("source.gamma_g", sd.gamma_g, E, non_negative, ">= 0")?,
        gamma_f: r.number("source.gamma_f", sd.gamma_f, E, non_negative, ">= 0")?,
        kappa: r.number("source.kappa", sd.kappa, E, positive, "> 0")?,
        tau_pulse: r.number("source.tau_pulse", sd.tau_pulse, E, non_negative, ">= 0")?,
    };
    let precompensate = r.boolean("source.precompensate", true, E)?;

    let sigma_x = match r.take("detection.sigma_x") {
        None => {
            r.record("detection.sigma_x", "0.1·m".into(), H);
            None
        }
        Some(v) => {
            let s = v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
            match s {
                Some(s) if s >= 0.0 => {
                    r.record("detection.sigma_x", s.to_string(), Provenance::User);
                    Some(s)
                }
                Some(s) => return Err(Error::config("detection.sigma_x", format!("value {s} out of range: must be >= 0"))),
                None => return Err(Error::config("detection.sigma_x", "expected a number")),
            }
        }
    };
    let detection = DetectionParams {
        eta_lag: r.number("detection.eta_lag", 0.01, H, |x| (0.0..1.0).contains(&x), "in [0, 1)")?,
        sigma_x,
        loop_rule: match r.string("detection.loop_rule", "align_to_last", E)?.as_str() {
            "align_to_last" => LoopRule::AlignToLast,
            other => return Err(Error::config("detection.loop_rule", format!("unknown rule \"{other}\" (align_to_last)"))),
        },
        detector_efficiency: r.number("detection.detector_efficiency", 1.0, E, unit, "in [0, 1]")?,
    };

    let channel = ChannelParams {
        t1: r.number("memory.t1", 10e-3, H, positive, "> 0")?,
        t_p: r.number("memory.t_p", 5e-3, H, positive, "> 0")?,
        a_beta: r.number("memory.a_beta", 0.5, E, unit, "in [0, 1]")?,
    };

    let protocol = ProtocolConfig {
        m,
        distance_km,
        attenuation_km,
        c_fiber,
        source,
        precompensate,
        gate,
        switch,
        detection,
        channel,
        strategy,
        n_trajectories: n_trajectories as u64,
        seed: seed as u64,
    };
    protocol.validate().map_err(|e| Error::config("<resolved>", e.to_string()))?;

    let m_values = match r.array("sweep.m_values")? {
        None => vec![m],
        Some(vals) => vals
            .iter()
            .map(|v| v.as_integer().ok_or_else(|| Error::config("sweep.m_values", "entries must be integers")).and_then(|i| check_m("sweep.m_values", i)))
            .collect::<Result<_>>()?,
    };
    let distances = match r.array("sweep.distances_km")? {
        None => vec![distance_km],
        Some(vals) => vals
            .iter()
            .map(|v| {
                let d = v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
                match d {
                    Some(d) if non_negative(d) => Ok(d),
                    _ => Err(Error::config("sweep.distances_km", "entries must be non-negative numbers")),
                }
            })
            .collect::<Result<_>>()?,
    };
    let strategies = match r.array("sweep.strategies")? {
        None => Strategy::ALL.to_vec(),
        Some(vals) => vals
            .iter()
            .map(|v| v.as_str().ok_or_else(|| Error::config("sweep.strategies", "entries must be strings")).and_then(|s| parse_strategy("sweep.strategies", s)))
            .collect::<Result<_>>()?,
    };
    if !r.entries.contains_key("sweep.m_values") {
        r.record("sweep.m_values", format!("[{m}]"), E);
    }
    if !r.entries.contains_key("sweep.distances_km") {
        r.record("sweep.distances_km", format!("[{distance_km}]"), E);
    }
    if !r.entries.contains_key("sweep.strategies") {
        r.record("sweep.strategies", "[\"qudit\", \"qubit_all_keep\", \"qubit_one_shot\"]".into(), E);
    }
    let engine = match r.string("sweep.engine", "trajectory", E)?.as_str() {
        "trajectory" => Engine::Trajectory,
        "oracle" => Engine::Oracle,
        other => return Err(Error::config("sweep.engine", format!("unknown engine \"{other}\" (trajectory, oracle)"))),
    };
    r.finish()?;

    let sweep = SweepSpec { distances, m_values, strategies, trajectories: n_trajectories as u64, seed: seed as u64, engine, base: protocol.clone() };
    sweep.validate()?;
    Ok(ResolvedConfig { protocol, sweep, entries: r.entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_reference_defaults() {
        let c = validate_config("").unwrap();
        let p = &c.protocol;
        assert_eq!(p.switch, SwitchParams { eta_sw: 0.9, e_sw: 0.01 });
        assert_eq!(p.gate.kappa_a / p.gate.kappa, 0.95);
        assert!((p.gate.cooperativity1() - 100.0).abs() < 1e-9);
        assert_eq!(p.gate.cooperativity0(), 0.0);
        assert_eq!((p.source.sigma_a, p.source.sigma_p), (0.1, 0.1));
        assert_eq!(p.detection.sigma_x_for(4), 0.4);
        assert_eq!(p.detection.eta_lag, 0.01);
        assert_eq!((p.channel.t1, p.channel.t_p), (10e-3, 5e-3));
        assert_eq!(p.attenuation_km, 20.0);
        assert_eq!(c.sweep.points().len(), 3);
    }

    #[test]
    fn out_of_range_names_the_field() {
        let err = validate_config("[switch]\neta_sw = 1.2\n").unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "switch.eta_sw"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn engine_limit_on_m() {
        assert!(matches!(validate_config("m = 7"), Err(Error::EngineLimit(_))));
        assert!(matches!(validate_config("sweep.m_values = [2, 7]"), Err(Error::EngineLimit(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        match validate_config("switch.eta = 0.5").unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "switch.eta");
                assert!(message.contains("unknown"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_errors_name_the_field() {
        match validate_config("memory.t1 = \"long\"").unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "memory.t1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explain_tags_every_key() {
        let c = validate_config("switch.e_sw = 0.02\n[sweep]\nm_values = [2, 4]\n").unwrap();
        let text = c.explain();
        for line in text.lines() {
            assert!(line.ends_with(']'), "{line}");
            assert!(line.contains("[user]") || line.contains("[default:"), "{line}");
        }
        assert!(text.contains("switch.e_sw") && text.contains("[user]"));
        assert!(text.lines().any(|l| l.starts_with("switch.eta_sw") && l.contains("reference-hardware")));
        assert!(text.lines().any(|l| l.starts_with("memory.a_beta") && l.contains("default:engine")));
        assert_eq!(c.sweep.points().len(), 6);
    }

    #[test]
    fn dotted_and_sectioned_keys_are_equivalent() {
        let a = validate_config("switch.eta_sw = 0.8\nmemory.t_p = 0.002").unwrap();
        let b = validate_config("[switch]\neta_sw = 0.8\n[memory]\nt_p = 0.002").unwrap();
        assert_eq!(a.protocol, b.protocol);
    }

    #[test]
    fn duplicate_sweep_points_are_rejected() {
        assert!(validate_config("sweep.distances_km = [10, 10]").is_err());
    }
}
