//! Scenario file schema, defaults, and validation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::auditor::DEFAULT_DELTAS;
use crate::book::{Side, Ticks};
use crate::infra::{fragment_count, FeedPolicy, LatencyModel, TimestampPolicy};
use crate::participants::Strategy;
use crate::remediation::Speedbump;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Listed in login order.
    pub participants: Vec<ParticipantConfig>,
    #[serde(default)]
    pub gateways: Vec<GatewayConfig>,
    /// Point-to-point links outside the gateway tier (private or inter-book).
    #[serde(default)]
    pub links: Vec<LinkConfig>,
    /// Store-and-forward switch in front of the engine.
    #[serde(default)]
    pub switch: Option<SwitchConfig>,
    #[serde(default = "default_feed")]
    pub feed: FeedPolicy,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub remediation: RemediationConfig,
    #[serde(default)]
    pub stimuli: StimulusConfig,
    #[serde(default)]
    pub contenders: Contenders,
    #[serde(default)]
    pub cross_book: Option<CrossBookConfig>,
    #[serde(default)]
    pub audit: AuditConfig,
}

fn default_feed() -> FeedPolicy {
    FeedPolicy::MulticastJitter {
        jitter: LatencyModel::constant(0),
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantConfig {
    pub name: String,
    pub reaction_time_ns: u64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Gateway ids in connection order; non-replicators use the first.
    #[serde(default)]
    pub gateways: Vec<String>,
    #[serde(default)]
    pub private_link: Option<String>,
    /// Port name used for per-port latency offsets; defaults to the name.
    #[serde(default)]
    pub port: Option<String>,
    /// Order size on the wire; defaults to the engine setting.
    #[serde(default)]
    pub message_bytes: Option<u64>,
    /// Send a truncated variant of this size instead.
    #[serde(default)]
    pub truncate_to_bytes: Option<u64>,
    #[serde(default = "default_true")]
    pub truncation_keeps_critical: bool,
}

impl ParticipantConfig {
    pub fn port(&self) -> &str {
        self.port.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub id: String,
    pub latency: LatencyModel,
    #[serde(default)]
    pub load_penalty_ns: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub id: String,
    pub latency: LatencyModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub link_rate_bytes_per_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub timestamp_policy: TimestampPolicy,
    pub reassembly_timeout_ns: u64,
    pub mtu_bytes: u64,
    pub message_bytes: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            timestamp_policy: TimestampPolicy::FirstFragment,
            reassembly_timeout_ns: 100_000_000,
            mtu_bytes: 1500,
            message_bytes: 1500,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemediationConfig {
    pub speedbumps: Vec<Speedbump>,
    pub batch: BatchConfig,
    pub connection_limit: Option<u32>,
}

/// `window_ns = 0` keeps continuous matching.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchConfig {
    pub window_ns: u64,
    pub phase_ns: u64,
    /// Draw the phase uniformly from `[0, window)` instead.
    pub randomize_phase: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    Poisson { mean_interarrival_ns: u64 },
    Fixed { interval_ns: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpportunityConfig {
    /// Side of the resting liquidity racers try to take.
    pub side: Side,
    /// Every stimulus trades its own instrument, so stragglers of one race
    /// never touch another race's liquidity.
    pub price: Ticks,
    pub qty: u64,
}

impl Default for OpportunityConfig {
    fn default() -> Self {
        OpportunityConfig {
            side: Side::Ask,
            price: 1_000_000,
            qty: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StimulusConfig {
    pub count: u64,
    pub schedule: Schedule,
    pub start_ns: u64,
    pub min_gap_ns: u64,
    pub opportunity: OpportunityConfig,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        StimulusConfig {
            count: 1000,
            schedule: Schedule::Poisson {
                mean_interarrival_ns: 1_000_000,
            },
            start_ns: 10_000_000,
            min_gap_ns: 0,
            opportunity: OpportunityConfig::default(),
        }
    }
}

/// Who races for each stimulus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Contenders {
    #[default]
    All,
    /// A fresh uniform subset per stimulus.
    RandomSubset { size: usize },
    /// Cycle through the listed sets.
    Sets { sets: Vec<Vec<String>> },
}

impl Contenders {
    pub fn describe(&self) -> String {
        match self {
            Contenders::All => "all participants in every race".into(),
            Contenders::RandomSubset { size } => format!("uniform random subset of {size} per race"),
            Contenders::Sets { sets } => format!("round-robin over {} fixed sets", sets.len()),
        }
    }
}

/// Two-node book: the router's order reaches the local node at `t_e` and is
/// forwarded over `link` to the remote node, where the opportunity rests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossBookConfig {
    pub link: String,
    pub router: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub deltas: Vec<f64>,
    /// ε for victory statistics; defaults to the measured ε at the largest δ.
    pub epsilon_ns: Option<u64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            deltas: DEFAULT_DELTAS.to_vec(),
            epsilon_ns: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: match e.path().to_string() {
                p if p == "." => "<root>".into(),
                p => p,
            },
            message: e.into_inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        Self::from_json(&value.to_string())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The config with every default filled in.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn participant_index(&self, name: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.name == name)
    }

    pub fn message_bytes(&self, p: &ParticipantConfig) -> u64 {
        p.message_bytes.unwrap_or(self.engine.message_bytes)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.participants.is_empty() {
            return Err(invalid("participants", "at least one participant required"));
        }
        let mut names = BTreeSet::new();
        for (i, p) in self.participants.iter().enumerate() {
            if !names.insert(p.name.as_str()) {
                return Err(invalid(format!("participants[{i}].name"), format!("duplicate name {:?}", p.name)));
            }
        }

        let mut ids = BTreeSet::new();
        for (i, g) in self.gateways.iter().enumerate() {
            if !ids.insert(g.id.as_str()) {
                return Err(invalid(format!("gateways[{i}].id"), format!("duplicate id {:?}", g.id)));
            }
            g.latency
                .validate()
                .map_err(|r| invalid(format!("gateways[{i}].latency"), r))?;
        }
        let gateway_ids = ids.clone();
        for (i, l) in self.links.iter().enumerate() {
            if !ids.insert(l.id.as_str()) {
                return Err(invalid(format!("links[{i}].id"), format!("duplicate id {:?}", l.id)));
            }
            l.latency.validate().map_err(|r| invalid(format!("links[{i}].latency"), r))?;
        }
        let link_ids: BTreeSet<&str> = self.links.iter().map(|l| l.id.as_str()).collect();

        let e = &self.engine;
        if e.mtu_bytes == 0 {
            return Err(invalid("engine.mtu_bytes", "must be > 0"));
        }
        if e.message_bytes == 0 {
            return Err(invalid("engine.message_bytes", "must be > 0"));
        }
        if e.reassembly_timeout_ns == 0 {
            return Err(invalid("engine.reassembly_timeout_ns", "must be > 0"));
        }

        let router = self.cross_book.as_ref().map(|c| c.router.as_str());
        for (i, p) in self.participants.iter().enumerate() {
            let field = |f: &str| format!("participants[{i}].{f}");
            for g in &p.gateways {
                if !gateway_ids.contains(g.as_str()) {
                    return Err(invalid(field("gateways"), format!("unknown gateway {g:?}")));
                }
            }
            if let Some(l) = &p.private_link {
                if !link_ids.contains(l.as_str()) {
                    return Err(invalid(field("private_link"), format!("unknown link {l:?}")));
                }
            }
            let bytes = self.message_bytes(p);
            if bytes == 0 {
                return Err(invalid(field("message_bytes"), "must be > 0"));
            }
            if let Some(t) = p.truncate_to_bytes {
                if t == 0 || t > bytes {
                    return Err(invalid(field("truncate_to_bytes"), format!("must be in 1..={bytes}")));
                }
            }
            let is_router = router == Some(p.name.as_str());
            match &p.strategy {
                Strategy::FastLinkSniper if p.private_link.is_none() => {
                    return Err(invalid(field("private_link"), "fast-link-sniper needs a private link"));
                }
                Strategy::Replicator if p.gateways.len() < 2 => {
                    return Err(invalid(field("gateways"), "replicator needs at least two gateways"));
                }
                Strategy::OptimisticMessenger {
                    lead_ns,
                    trade_probability,
                } => {
                    if *lead_ns == 0 {
                        return Err(invalid(field("strategy.lead_ns"), "must be > 0"));
                    }
                    if !(0.0..=1.0).contains(trade_probability) {
                        return Err(invalid(field("strategy.trade_probability"), "must be in [0, 1]"));
                    }
                    if *lead_ns > self.stimuli.start_ns {
                        return Err(invalid(field("strategy.lead_ns"), "lead reaches before stimuli.start_ns"));
                    }
                    let wire = p.truncate_to_bytes.unwrap_or(bytes);
                    if fragment_count(wire, e.mtu_bytes).unwrap_or(0) < 2 {
                        return Err(invalid(
                            field("message_bytes"),
                            "optimistic messaging needs a message of at least two fragments",
                        ));
                    }
                }
                _ => {}
            }
            let needs_gateway = !is_router && p.strategy != Strategy::FastLinkSniper;
            if needs_gateway && p.gateways.is_empty() {
                return Err(invalid(field("gateways"), "at least one gateway required"));
            }
        }

        if let Some(s) = &self.switch {
            if !(s.link_rate_bytes_per_ns.is_finite() && s.link_rate_bytes_per_ns > 0.0) {
                return Err(invalid("switch.link_rate_bytes_per_ns", "must be finite and > 0"));
            }
        }

        match &self.feed {
            FeedPolicy::MulticastJitter { jitter } => {
                jitter.validate().map_err(|r| invalid("feed.jitter", r))?;
            }
            FeedPolicy::SequentialByLogin { .. } | FeedPolicy::RandomizedSequential { .. } => {}
        }

        let r = &self.remediation;
        for (i, b) in r.speedbumps.iter().enumerate() {
            if !ids.contains(b.link.as_str()) {
                return Err(invalid(format!("remediation.speedbumps[{i}].link"), format!("unknown link {:?}", b.link)));
            }
        }
        if r.batch.window_ns > 0 && r.batch.phase_ns >= r.batch.window_ns {
            return Err(invalid("remediation.batch.phase_ns", "must be smaller than window_ns"));
        }
        if r.batch.window_ns == 0 && (r.batch.phase_ns > 0 || r.batch.randomize_phase) {
            return Err(invalid("remediation.batch.window_ns", "phase settings need a window > 0"));
        }
        if r.connection_limit == Some(0) {
            return Err(invalid("remediation.connection_limit", "must be >= 1"));
        }

        let s = &self.stimuli;
        if s.count == 0 {
            return Err(invalid("stimuli.count", "must be >= 1"));
        }
        match s.schedule {
            Schedule::Poisson { mean_interarrival_ns: 0 } => {
                return Err(invalid("stimuli.schedule.mean_interarrival_ns", "must be > 0"))
            }
            Schedule::Fixed { interval_ns: 0 } => return Err(invalid("stimuli.schedule.interval_ns", "must be > 0")),
            _ => {}
        }
        if s.opportunity.qty == 0 {
            return Err(invalid("stimuli.opportunity.qty", "must be >= 1"));
        }

        let racers = self.participants.len() - usize::from(router.is_some());
        match &self.contenders {
            Contenders::All => {}
            Contenders::RandomSubset { size } => {
                if *size < 2 || *size > racers {
                    return Err(invalid("contenders.size", format!("must be in 2..={racers}")));
                }
            }
            Contenders::Sets { sets } => {
                if sets.is_empty() {
                    return Err(invalid("contenders.sets", "at least one set required"));
                }
                for (i, set) in sets.iter().enumerate() {
                    if set.len() < 2 {
                        return Err(invalid(format!("contenders.sets[{i}]"), "a race needs at least two contenders"));
                    }
                    let unique: BTreeSet<_> = set.iter().collect();
                    if unique.len() != set.len() {
                        return Err(invalid(format!("contenders.sets[{i}]"), "duplicate participant"));
                    }
                    for name in set {
                        if !names.contains(name.as_str()) || router == Some(name.as_str()) {
                            return Err(invalid(
                                format!("contenders.sets[{i}]"),
                                format!("unknown or router participant {name:?}"),
                            ));
                        }
                    }
                }
            }
        }

        if let Some(c) = &self.cross_book {
            if !link_ids.contains(c.link.as_str()) {
                return Err(invalid("cross_book.link", format!("unknown link {:?}", c.link)));
            }
            let Some(p) = self.participants.iter().find(|p| p.name == c.router) else {
                return Err(invalid("cross_book.router", format!("unknown participant {:?}", c.router)));
            };
            if p.reaction_time_ns != 0 || p.strategy != Strategy::HonestRacer {
                return Err(invalid("cross_book.router", "router must be an honest-racer with zero reaction time"));
            }
            if racers == 0 {
                return Err(invalid("participants", "cross-book scenario needs a participant besides the router"));
            }
        }

        if self.audit.deltas.is_empty() {
            return Err(invalid("audit.deltas", "at least one δ required"));
        }
        if let Some(d) = self.audit.deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return Err(invalid("audit.deltas", format!("{d} outside (0, 1]")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t",
        "participants": [
            {"name": "A", "reaction_time_ns": 5000, "gateways": ["g"]},
            {"name": "B", "reaction_time_ns": 7000, "gateways": ["g"]}
        ],
        "gateways": [{"id": "g", "latency": {"kind": "constant", "base_ns": 10000}}]
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.engine.mtu_bytes, 1500);
        assert_eq!(cfg.engine.reassembly_timeout_ns, 100_000_000);
        assert_eq!(cfg.engine.timestamp_policy, TimestampPolicy::FirstFragment);
        assert_eq!(cfg.audit.deltas, DEFAULT_DELTAS.to_vec());
        assert_eq!(cfg.contenders, Contenders::All);
        let round = ScenarioConfig::from_json(&cfg.resolved_json()).unwrap();
        assert_eq!(round, cfg);
        assert_eq!(round.hash(), cfg.hash());
    }

    #[test]
    fn parse_errors_name_the_field() {
        let bad = MINIMAL.replace("\"reaction_time_ns\": 7000", "\"reaction_time_ns\": \"slow\"");
        let err = ScenarioConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().starts_with("participants[1].reaction_time_ns"), "{err}");
        let typo = MINIMAL.replace("\"gateways\": [{", "\"gatewys\": [{");
        assert!(ScenarioConfig::from_json(&typo).is_err());
    }

    #[test]
    fn unknown_gateway_rejected_before_run() {
        let bad = MINIMAL.replace(
            "\"reaction_time_ns\": 7000, \"gateways\": [\"g\"]",
            "\"reaction_time_ns\": 7000, \"gateways\": [\"nope\"]",
        );
        match ScenarioConfig::from_json(&bad) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "participants[1].gateways"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replicator_needs_two_gateways() {
        let bad = MINIMAL.replace(
            "\"reaction_time_ns\": 5000,",
            "\"reaction_time_ns\": 5000, \"strategy\": {\"kind\": \"replicator\"},",
        );
        assert!(matches!(ScenarioConfig::from_json(&bad), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn optimistic_needs_two_fragments() {
        let bad = MINIMAL.replace(
            "\"reaction_time_ns\": 5000,",
            "\"reaction_time_ns\": 5000, \"strategy\": {\"kind\": \"optimistic-messenger\", \"lead_ns\": 1000},",
        );
        let err = ScenarioConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("two fragments"), "{err}");
        let ok = bad.replace("\"lead_ns\": 1000},", "\"lead_ns\": 1000}, \"message_bytes\": 3000,");
        ScenarioConfig::from_json(&ok).unwrap();
    }
}
