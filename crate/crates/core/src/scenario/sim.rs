//! The event-driven world behind [`run_scenario`].

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use super::config::{ConfigError, Contenders, ScenarioConfig, Schedule};
use crate::auditor::{
    AuditTrace, BatchSummary, Delivery, FairnessReport, Provenance, RaceEntry, RaceRecord, SendRecord,
};
use crate::book::{BookError, BatchWindow, Message, MatchOutcome, OrderBook, OrderId, ParticipantId, Trade};
use crate::infra::{
    disseminate, fragment_bytes, fragment_count, route_cross_book, switch_forward, EngineIngress, Fragment, Gateway,
    IngressEvent, IngressKey, Link, WireMessage,
};
use crate::kernel::{ComponentId, EventTrace, Kernel, KernelError};
use crate::participants::{
    on_update, optimistic_dispatch, replicate_dispatch, take_intent, Decision, Intent, Opportunity, Participant,
    ParticipantError, Stimulus, StimulusId, Strategy,
};
use crate::remediation::{apply_speedbump, set_connection_limit, BatchPolicy, ConnectionPolicy};
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Participant(#[from] ParticipantError),
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_trace: true }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: EventTrace,
    pub races: Vec<RaceRecord>,
    pub trades: Vec<Trade>,
    pub audit: AuditTrace,
    pub report: FairnessReport,
    /// The config as run, every default filled in and `seed` set.
    pub resolved_config: ScenarioConfig,
}

pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<RunOutput, SimError> {
    run_scenario_with(config, seed, RunOptions::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, seed: u64, opts: RunOptions) -> Result<RunOutput, SimError> {
    config.validate()?;
    let mut cfg = config.clone();
    cfg.seed = seed;

    let mut kernel: Kernel<Action> = Kernel::new();
    if !opts.record_trace {
        kernel = kernel.without_trace();
    }
    let mut world = World::new(&cfg, &mut kernel)?;
    world.schedule_stimuli(&mut kernel)?;
    let trace = kernel.run_until(SimTime::MAX, |k, ev| world.handle(k, ev.payload))?;
    Ok(world.finish(trace))
}

#[derive(Clone, Copy, Debug)]
enum Path {
    Gateway(usize),
    Link(usize),
}

#[derive(Clone, Copy, Debug)]
enum Action {
    Stimulus { stimulus: usize },
    Deliver { stimulus: usize, participant: usize },
    PrePosition { stimulus: usize, participant: usize },
    Transmit { msg: usize, copy: u32, path: Path, from: u32, to: u32, valid: bool },
    Fragment { msg: usize, copy: u32, index: u32, valid: bool },
    ReassemblyTimeout { key: IngressKey },
    BatchClose { window: u64 },
}

struct Plan {
    stimulus: Stimulus,
    /// Participant indices, in login order.
    contenders: Vec<usize>,
}

struct Msg {
    stimulus: usize,
    participant: usize,
    message: Message,
    wire_bytes: u64,
    fragments: u32,
    first_send: Option<SimTime>,
    arrival: Option<SimTime>,
    window: Option<u64>,
}

struct Components {
    stimuli: ComponentId,
    feed: ComponentId,
    engine: ComponentId,
    participants: Vec<ComponentId>,
    gateways: Vec<ComponentId>,
    links: Vec<ComponentId>,
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    comp: Components,
    participants: Vec<Participant>,
    /// Login position of each participant.
    login: Vec<usize>,
    router: Option<usize>,
    gateways: Vec<Gateway>,
    gateway_rngs: Vec<RngStream>,
    gateway_index: BTreeMap<String, usize>,
    links: Vec<Link>,
    link_rngs: Vec<RngStream>,
    link_index: BTreeMap<String, usize>,
    interbook: Option<usize>,
    feed_rng: RngStream,
    decision_rngs: Vec<RngStream>,
    batch_rng: RngStream,
    connection_limit: Option<ConnectionPolicy>,
    batch: Option<BatchPolicy>,
    plans: Vec<Plan>,
    messages: Vec<Msg>,
    by_race: BTreeMap<(usize, usize), usize>,
    opportunities: BTreeMap<OrderId, usize>,
    winners: BTreeSet<(usize, usize)>,
    /// One book per stimulus instrument.
    books: Vec<OrderBook>,
    local_book: OrderBook,
    ingress: EngineIngress<usize>,
    pending_batches: BTreeMap<u64, Vec<(usize, SimTime)>>,
    trades: Vec<Trade>,
    audit: AuditTrace,
    notices: BTreeMap<String, u64>,
    next_order: u64,
}

impl<'a> World<'a> {
    fn new(cfg: &'a ScenarioConfig, kernel: &mut Kernel<Action>) -> Result<Self, SimError> {
        let seed = cfg.seed;
        let bump = |id: &str| {
            cfg.remediation
                .speedbumps
                .iter()
                .filter(|b| b.link == id)
                .map(|b| SimTime::from_nanos(b.delay_ns))
                .fold(SimTime::ZERO, |a, b| a + b)
        };
        let gateways: Vec<Gateway> = cfg
            .gateways
            .iter()
            .map(|g| {
                let link = apply_speedbump(&Link::new(g.id.clone(), g.latency.clone()), bump(&g.id));
                Gateway::new(link, SimTime::from_nanos(g.load_penalty_ns))
            })
            .collect();
        let links: Vec<Link> = cfg
            .links
            .iter()
            .map(|l| apply_speedbump(&Link::new(l.id.clone(), l.latency.clone()), bump(&l.id)))
            .collect();
        let gateway_index: BTreeMap<String, usize> =
            cfg.gateways.iter().enumerate().map(|(i, g)| (g.id.clone(), i)).collect();
        let link_index: BTreeMap<String, usize> = cfg.links.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();

        let participants: Vec<Participant> = cfg
            .participants
            .iter()
            .enumerate()
            .map(|(i, p)| Participant {
                id: ParticipantId(i as u32),
                name: p.name.clone(),
                reaction_time: SimTime::from_nanos(p.reaction_time_ns),
                strategy: p.strategy.clone(),
                gateways: p.gateways.clone(),
                private_link: p.private_link.clone(),
            })
            .collect();

        // Early-login participants take the front of the queue, otherwise
        // configuration order.
        let mut order: Vec<usize> = (0..participants.len()).collect();
        order.sort_by_key(|&i| participants[i].strategy != Strategy::EarlyLogin);
        let mut login = vec![0; participants.len()];
        for (pos, &i) in order.iter().enumerate() {
            login[i] = pos;
        }

        let batch = match cfg.remediation.batch.window_ns {
            0 => None,
            w => {
                let phase = if cfg.remediation.batch.randomize_phase {
                    RngStream::new(seed, "batch-phase").random_range(0..w)
                } else {
                    cfg.remediation.batch.phase_ns
                };
                Some(BatchPolicy::new(SimTime::from_nanos(w), SimTime::from_nanos(phase)).map_err(|e| {
                    ConfigError::Invalid {
                        field: "remediation.batch".into(),
                        reason: e.to_string(),
                    }
                })?)
            }
        };
        let connection_limit = cfg
            .remediation
            .connection_limit
            .map(set_connection_limit)
            .transpose()
            .map_err(|e| ConfigError::Invalid {
                field: "remediation.connection_limit".into(),
                reason: e.to_string(),
            })?;

        let comp = Components {
            stimuli: kernel.register("stimuli"),
            feed: kernel.register("feed"),
            engine: kernel.register("engine"),
            participants: participants.iter().map(|p| kernel.register(format!("participant:{}", p.name))).collect(),
            gateways: gateways.iter().map(|g| kernel.register(format!("gateway:{}", g.id()))).collect(),
            links: links.iter().map(|l| kernel.register(format!("link:{}", l.id))).collect(),
        };

        Ok(World {
            cfg,
            comp,
            router: cfg.cross_book.as_ref().and_then(|c| cfg.participant_index(&c.router)),
            interbook: cfg.cross_book.as_ref().map(|c| link_index[&c.link]),
            gateway_rngs: gateways.iter().map(|g| RngStream::new(seed, format!("gateway:{}", g.id()))).collect(),
            link_rngs: links.iter().map(|l| RngStream::new(seed, format!("link:{}", l.id))).collect(),
            decision_rngs: participants
                .iter()
                .map(|p| RngStream::new(seed, format!("participant:{}", p.name)))
                .collect(),
            feed_rng: RngStream::new(seed, "feed"),
            batch_rng: RngStream::new(seed, "batch"),
            participants,
            login,
            gateways,
            gateway_index,
            links,
            link_index,
            connection_limit,
            batch,
            plans: Vec::new(),
            messages: Vec::new(),
            by_race: BTreeMap::new(),
            opportunities: BTreeMap::new(),
            winners: BTreeSet::new(),
            books: Vec::new(),
            local_book: OrderBook::new(),
            ingress: EngineIngress::new(
                cfg.engine.timestamp_policy,
                SimTime::from_nanos(cfg.engine.reassembly_timeout_ns),
            ),
            pending_batches: BTreeMap::new(),
            trades: Vec::new(),
            audit: AuditTrace::default(),
            notices: BTreeMap::new(),
            next_order: 0,
        })
    }

    fn order_id(&mut self) -> OrderId {
        self.next_order += 1;
        OrderId(self.next_order)
    }

    fn notice(&mut self, what: &str) {
        *self.notices.entry(what.to_owned()).or_default() += 1;
    }

    /// Lay out every stimulus, its contenders and any pre-positioning up front.
    fn schedule_stimuli(&mut self, kernel: &mut Kernel<Action>) -> Result<(), SimError> {
        let s = &self.cfg.stimuli;
        let mut timing = RngStream::new(self.cfg.seed, "stimuli");
        let mut picking = RngStream::new(self.cfg.seed, "contenders");
        let racers: Vec<usize> = (0..self.participants.len()).filter(|&i| Some(i) != self.router).collect();
        let exp = match s.schedule {
            Schedule::Poisson { mean_interarrival_ns } => {
                Some(Exp::new(1.0 / mean_interarrival_ns as f64).expect("validated mean > 0"))
            }
            Schedule::Fixed { .. } => None,
        };

        let mut t = s.start_ns;
        for k in 0..s.count as usize {
            if k > 0 {
                let gap = match (&s.schedule, &exp) {
                    (_, Some(exp)) => exp.sample(&mut timing).round() as u64,
                    (Schedule::Fixed { interval_ns }, None) => *interval_ns,
                    (Schedule::Poisson { .. }, None) => unreachable!(),
                };
                t += gap.max(s.min_gap_ns);
            }
            let t_e = SimTime::from_nanos(t);

            let mut contenders: Vec<usize> = match &self.cfg.contenders {
                Contenders::All => racers.clone(),
                Contenders::RandomSubset { size } => rand::seq::index::sample(&mut picking, racers.len(), *size)
                    .into_iter()
                    .map(|i| racers[i])
                    .collect(),
                Contenders::Sets { sets } => sets[k % sets.len()]
                    .iter()
                    .map(|n| self.cfg.participant_index(n).expect("validated"))
                    .collect(),
            };
            contenders.sort_by_key(|&i| self.login[i]);

            let owner = contenders
                .iter()
                .copied()
                .filter(|&i| self.participants[i].strategy == Strategy::RestingMaker)
                .min()
                .map_or(ParticipantId::HOUSE, |i| self.participants[i].id);
            let opp = &s.opportunity;
            let order = self.order_id();
            self.opportunities.insert(order, k);
            let stimulus = Stimulus {
                id: StimulusId(k as u64),
                t_e,
                opportunity: Opportunity {
                    instrument: k as u64,
                    side: opp.side,
                    price: opp.price,
                    qty: opp.qty,
                    order,
                    owner,
                },
            };

            kernel.schedule(t_e, self.comp.stimuli, Action::Stimulus { stimulus: k })?;
            for &p in &contenders {
                if let Strategy::OptimisticMessenger { lead_ns, .. } = self.participants[p].strategy {
                    let at = t_e.checked_sub(SimTime::from_nanos(lead_ns)).ok_or(ParticipantError::LeadBeforeStart {
                        lead: SimTime::from_nanos(lead_ns),
                        t_e,
                    })?;
                    kernel.schedule(at, self.comp.participants[p], Action::PrePosition { stimulus: k, participant: p })?;
                }
            }
            self.plans.push(Plan { stimulus, contenders });
            self.books.push(OrderBook::new());
        }
        Ok(())
    }

    fn handle(&mut self, kernel: &mut Kernel<Action>, action: Action) -> Result<(), SimError> {
        let now = kernel.now();
        match action {
            Action::Stimulus { stimulus } => self.on_stimulus(kernel, stimulus),
            Action::Deliver { stimulus, participant } => self.on_deliver(kernel, stimulus, participant),
            Action::PrePosition { stimulus, participant } => {
                let intent = take_intent(&self.plans[stimulus].stimulus.opportunity);
                let msg = self.new_message(stimulus, participant, intent);
                let path = self.primary_path(participant);
                self.transmit(kernel, msg, 0, path, 0, 1, true)
            }
            Action::Transmit {
                msg,
                copy,
                path,
                from,
                to,
                valid,
            } => self.transmit(kernel, msg, copy, path, from, to, valid),
            Action::Fragment { msg, copy, index, valid } => {
                let m = &self.messages[msg];
                let frag = Fragment {
                    key: IngressKey {
                        participant: ParticipantId(m.participant as u32),
                        message: msg as u64,
                        copy,
                    },
                    index,
                    count: m.fragments,
                    valid_checksum: valid,
                };
                let out = self.ingress.on_fragment(frag, &msg, now);
                if let Some(at) = out.timeout_at {
                    kernel.schedule(at, self.comp.engine, Action::ReassemblyTimeout { key: frag.key })?;
                }
                self.on_ingress(kernel, out.events)
            }
            Action::ReassemblyTimeout { key } => {
                let events = self.ingress.on_timeout(key, now);
                self.on_ingress(kernel, events)
            }
            Action::BatchClose { window } => {
                let batch = self.batch.expect("batch mode");
                let mut per_book: BTreeMap<usize, Vec<(usize, SimTime)>> = BTreeMap::new();
                for (m, t) in self.pending_batches.remove(&window).unwrap_or_default() {
                    per_book.entry(self.messages[m].stimulus).or_default().push((m, t));
                }
                for (k, pending) in per_book {
                    let msgs = pending.iter().map(|&(m, t)| (self.messages[m].message, t)).collect();
                    let outcomes = self.books[k].batch_process(batch.window(window), msgs, &mut self.batch_rng)?;
                    for (i, outcome) in outcomes {
                        self.on_outcome(pending[i].0, outcome);
                    }
                }
                Ok(())
            }
        }
    }

    fn on_stimulus(&mut self, kernel: &mut Kernel<Action>, k: usize) -> Result<(), SimError> {
        let now = kernel.now();
        let opp = self.plans[k].stimulus.opportunity;
        let quote = Message::limit(opp.order.0, opp.owner.0, opp.side, opp.price, opp.qty);
        let outcome = self.books[k].process_message(&quote, now)?;
        self.audit.book_events.entry(k as u64).or_default().extend(outcome.events);
        self.trades.extend(outcome.trades);

        if let (Some(router), Some(link)) = (self.router, self.interbook) {
            let intent = take_intent(&opp);
            let msg = self.new_message(k, router, intent);
            self.messages[msg].first_send = Some(now);
            let Message::New(order) = self.messages[msg].message else {
                unreachable!("take intent is a new order")
            };
            match route_cross_book(
                &order,
                &self.local_book,
                &self.books[k],
                &self.links[link],
                now,
                &mut self.link_rngs[link],
            ) {
                Ok(arrival) => {
                    for index in 0..self.messages[msg].fragments {
                        kernel.schedule(arrival, self.comp.links[link], Action::Fragment {
                            msg,
                            copy: 0,
                            index,
                            valid: true,
                        })?;
                    }
                }
                Err(_) => self.notice("route_refused"),
            }
        }

        let recipients: Vec<usize> = self.plans[k].contenders.clone();
        if recipients.is_empty() {
            return Ok(());
        }
        let names: Vec<&str> = recipients.iter().map(|&i| self.participants[i].name.as_str()).collect();
        let deliveries = disseminate(now, &names, &self.cfg.feed, &mut self.feed_rng).expect("non-empty recipients");
        for (idx, t_receive) in deliveries {
            let p = recipients[idx];
            self.audit.deliveries.push(Delivery {
                update: k as u64,
                participant: self.participants[p].id,
                t_receive,
            });
            kernel.schedule(t_receive, self.comp.feed, Action::Deliver {
                stimulus: k,
                participant: p,
            })?;
        }
        Ok(())
    }

    fn on_deliver(&mut self, kernel: &mut Kernel<Action>, k: usize, p: usize) -> Result<(), SimError> {
        let now = kernel.now();
        let part = self.participants[p].clone();
        let stimulus = self.plans[k].stimulus;

        if let Strategy::OptimisticMessenger { trade_probability, .. } = part.strategy {
            let Some(&msg) = self.by_race.get(&(k, p)) else {
                return Ok(());
            };
            let decision = if self.decision_rngs[p].random_bool(trade_probability) {
                Decision::Trade
            } else {
                Decision::Abort
            };
            let sends = optimistic_dispatch(&part, &stimulus, now, decision, self.messages[msg].fragments)?;
            let rest = &sends[1..];
            let (t_send, valid) = (rest[0].t_send, rest[0].valid_checksum);
            let path = self.primary_path(p);
            kernel.schedule(t_send, self.comp.participants[p], Action::Transmit {
                msg,
                copy: 0,
                path,
                from: 1,
                to: self.messages[msg].fragments,
                valid,
            })?;
            return Ok(());
        }

        for out in on_update(&part, &stimulus, now) {
            let msg = self.new_message(k, p, out.intent);
            let paths: Vec<Path> = match part.strategy {
                Strategy::Replicator => {
                    let rep = replicate_dispatch(&part, self.connection_limit.as_ref())?;
                    for _ in &rep.rejected {
                        self.notice("replica_rejected");
                    }
                    rep.accepted.iter().map(|g| Path::Gateway(self.gateway_index[g])).collect()
                }
                _ => vec![self.primary_path(p)],
            };
            let to = self.messages[msg].fragments;
            for (copy, path) in paths.into_iter().enumerate() {
                kernel.schedule(out.t_send, self.comp.participants[p], Action::Transmit {
                    msg,
                    copy: copy as u32,
                    path,
                    from: 0,
                    to,
                    valid: true,
                })?;
            }
        }
        Ok(())
    }

    fn primary_path(&self, p: usize) -> Path {
        let part = &self.participants[p];
        match (&part.strategy, &part.private_link) {
            (Strategy::FastLinkSniper, Some(l)) => Path::Link(self.link_index[l]),
            _ => Path::Gateway(self.gateway_index[&part.gateways[0]]),
        }
    }

    fn new_message(&mut self, k: usize, p: usize, intent: Intent) -> usize {
        let pid = self.participants[p].id;
        let message = match intent {
            Intent::Take { side, price, qty } => Message::limit(self.order_id().0, pid.0, side, price, qty),
            Intent::Cancel { target } => Message::cancel(target.0, pid.0),
        };
        let pc = &self.cfg.participants[p];
        let wire_bytes = pc.truncate_to_bytes.unwrap_or(self.cfg.message_bytes(pc));
        let fragments = fragment_count(wire_bytes, self.cfg.engine.mtu_bytes).expect("validated sizes");
        let idx = self.messages.len();
        self.messages.push(Msg {
            stimulus: k,
            participant: p,
            message,
            wire_bytes,
            fragments,
            first_send: None,
            arrival: None,
            window: None,
        });
        self.by_race.entry((k, p)).or_insert(idx);
        idx
    }

    /// Push fragments `from..to` of one copy onto `path`. Fragments leaving
    /// together share one path latency sample.
    #[allow(clippy::too_many_arguments)]
    fn transmit(
        &mut self,
        kernel: &mut Kernel<Action>,
        msg: usize,
        copy: u32,
        path: Path,
        from: u32,
        to: u32,
        valid: bool,
    ) -> Result<(), SimError> {
        let now = kernel.now();
        let p = self.messages[msg].participant;
        let pc = &self.cfg.participants[p];
        let port = pc.port();
        let truncated = pc.truncate_to_bytes.is_some();
        let wire_bytes = self.messages[msg].wire_bytes;
        self.messages[msg].first_send.get_or_insert(now);

        let (base, target) = match path {
            Path::Gateway(g) => {
                let wire = WireMessage {
                    bytes: wire_bytes,
                    truncated,
                    critical_intact: pc.truncation_keeps_critical,
                };
                match self.gateways[g].transit(wire, now, Some(port), &mut self.gateway_rngs[g]) {
                    Ok(t) => (t, self.comp.gateways[g]),
                    Err(_) => {
                        self.notice("malformed_dropped");
                        return Ok(());
                    }
                }
            }
            Path::Link(l) => (
                now + self.links[l].traverse(Some(port), &mut self.link_rngs[l]),
                self.comp.links[l],
            ),
        };
        let mtu = self.cfg.engine.mtu_bytes;
        for index in from..to {
            let switch_delay = match &self.cfg.switch {
                Some(s) => {
                    let bytes = fragment_bytes(wire_bytes, mtu, index);
                    switch_forward(bytes, truncated, s.link_rate_bytes_per_ns)
                        .expect("validated rate and size")
                        .delay
                }
                None => SimTime::ZERO,
            };
            kernel.schedule(base + switch_delay, target, Action::Fragment { msg, copy, index, valid })?;
        }
        Ok(())
    }

    fn on_ingress(&mut self, kernel: &mut Kernel<Action>, events: Vec<IngressEvent<usize>>) -> Result<(), SimError> {
        let now = kernel.now();
        for ev in events {
            match ev {
                IngressEvent::Released { payload: msg, priority, .. } => {
                    self.messages[msg].arrival = Some(priority);
                    match self.batch {
                        Some(batch) => {
                            let w = batch.window_index(now);
                            self.messages[msg].window = Some(w);
                            let bucket = self.pending_batches.entry(w).or_default();
                            if bucket.is_empty() {
                                kernel.schedule(batch.window(w).end, self.comp.engine, Action::BatchClose { window: w })?;
                            }
                            bucket.push((msg, now));
                        }
                        None => {
                            let k = self.messages[msg].stimulus;
                            let outcome = self.books[k].process_at(&self.messages[msg].message, priority, now)?;
                            self.on_outcome(msg, outcome);
                        }
                    }
                }
                IngressEvent::Duplicate { .. } => self.notice("duplicates_discarded"),
                IngressEvent::Abandoned { reason, .. } => self.notice(match reason {
                    crate::infra::AbandonReason::BadChecksum => "abandoned_bad_checksum",
                    crate::infra::AbandonReason::Timeout => "abandoned_timeout",
                }),
            }
        }
        Ok(())
    }

    fn on_outcome(&mut self, msg: usize, outcome: MatchOutcome) {
        for trade in &outcome.trades {
            if let Some(&k) = self.opportunities.get(&trade.maker_order) {
                self.winners.insert((k, trade.taker_participant.0 as usize));
            }
        }
        if let (Message::Cancel { target, .. }, Some(crate::book::CancelOutcome::Cancelled { .. })) =
            (self.messages[msg].message, outcome.cancel)
        {
            if let Some(&k) = self.opportunities.get(&target) {
                self.winners.insert((k, self.messages[msg].participant));
            }
        }
        let k = self.messages[msg].stimulus as u64;
        self.audit.book_events.entry(k).or_default().extend(outcome.events);
        self.trades.extend(outcome.trades);
    }

    fn finish(mut self, trace: EventTrace) -> RunOutput {
        let mut races = Vec::with_capacity(self.plans.len());
        for (k, plan) in self.plans.iter().enumerate() {
            let entries = self
                .by_race
                .range((k, 0)..(k + 1, 0))
                .map(|(&(_, p), &msg)| {
                    let m = &self.messages[msg];
                    RaceEntry {
                        participant: self.participants[p].id,
                        name: self.participants[p].name.clone(),
                        reaction_time: self.participants[p].reaction_time,
                        t_arrival: m.arrival,
                        won: self.winners.contains(&(k, p)),
                        window: m.window,
                    }
                })
                .collect();
            races.push(RaceRecord {
                stimulus: plan.stimulus.id,
                t_e: plan.stimulus.t_e,
                entries,
            });
        }
        self.audit.sends = self
            .messages
            .iter()
            .filter_map(|m| {
                Some(SendRecord {
                    stimulus: StimulusId(m.stimulus as u64),
                    participant: self.participants[m.participant].id,
                    t_send: m.first_send?,
                    t_arrival: m.arrival,
                })
            })
            .collect();

        let cfg = self.cfg;
        let provenance = Provenance {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            pairing: cfg.contenders.describe(),
            config: serde_json::to_value(cfg).expect("config serializes"),
        };
        let mut report = FairnessReport::build(
            provenance,
            &races,
            &self.audit,
            &cfg.audit.deltas,
            cfg.audit.epsilon_ns.map(SimTime::from_nanos),
        );
        if let Some(batch) = self.batch {
            let judged = races.iter().filter(|r| r.is_judgeable());
            let single = judged.clone().filter(|r| r.single_window() == Some(true)).count() as u64;
            let total = judged.count() as u64;
            let first: BatchWindow = batch.window(batch.window_index(SimTime::ZERO));
            report.batch = Some(BatchSummary {
                window_ns: batch.window_len().as_nanos(),
                phase_ns: first.end.as_nanos() % batch.window_len().as_nanos(),
                single_window_races: single,
                straddling_races: total - single,
            });
        }
        report.notices = std::mem::take(&mut self.notices);

        RunOutput {
            trace,
            races,
            trades: self.trades,
            audit: self.audit,
            report,
            resolved_config: cfg.clone(),
        }
    }
}
