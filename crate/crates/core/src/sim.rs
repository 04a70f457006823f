//! Discrete-event model of a queue/worker cluster.
//!
//! Requests enter an unbounded FIFO queue and are served by homogeneous
//! worker nodes, one request per node, with a service time affine in the
//! request size. Scaling changes are enacted after a delay sampled from a
//! [`DelayModel`]; until then the node count is unchanged. Time is kept in
//! integer milliseconds so ordering is exact and runs are bit-reproducible.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::Rng;

use crate::error::{param, Error, Result};
use crate::rng::{self, SimRng, Stream};
use crate::stats;

/// Simulated time in milliseconds.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub arrival_ms: Millis,
    /// Fibonacci index, `[0, 100]`.
    pub size: u32,
    pub start_ms: Option<Millis>,
    pub completion_ms: Option<Millis>,
}

impl Request {
    pub fn new(id: u64, arrival_ms: Millis, size: u32) -> Self {
        Self { id, arrival_ms, size, start_ms: None, completion_ms: None }
    }

    pub fn response_time_ms(&self) -> Option<f64> {
        self.completion_ms.map(|c| (c - self.arrival_ms) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ServiceModel {
    pub base_ms: f64,
    pub per_unit_ms: f64,
}

impl Default for ServiceModel {
    fn default() -> Self {
        Self { base_ms: 50.0, per_unit_ms: 10.0 }
    }
}

impl ServiceModel {
    pub fn service_time_ms(&self, size: u32) -> f64 {
        service_time(size, self.per_unit_ms, self.base_ms)
    }

    fn service_millis(&self, size: u32) -> Millis {
        libm::round(self.service_time_ms(size)).max(1.0) as Millis
    }

    /// Requests of `size` one node completes per `interval_ms`.
    pub fn node_rate(&self, size: u32, interval_ms: Millis) -> f64 {
        interval_ms as f64 / self.service_time_ms(size)
    }
}

/// `base_ms + per_unit_ms * n`: computing the n-th Fibonacci number is linear in n.
pub fn service_time(n: u32, per_unit_ms: f64, base_ms: f64) -> f64 {
    base_ms + per_unit_ms * f64::from(n)
}

/// Provisioning delays, drawn uniformly from inclusive millisecond ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DelayModel {
    pub scale_out_ms: (Millis, Millis),
    pub scale_in_ms: (Millis, Millis),
}

impl Default for DelayModel {
    /// 8-9 minutes to add a node, 2-3 minutes to remove one.
    fn default() -> Self {
        Self { scale_out_ms: (480_000, 540_000), scale_in_ms: (120_000, 180_000) }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("sim.delays.scale_out", self.scale_out_ms), ("sim.delays.scale_in", self.scale_in_ms)] {
            if lo == 0 || lo > hi {
                return Err(param(name, "need 0 < min <= max"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, delta: i32, rng: &mut R) -> Millis {
        let (lo, hi) = if delta > 0 { self.scale_out_ms } else { self.scale_in_ms };
        rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub node_min: u32,
    pub node_max: u32,
    pub initial_nodes: u32,
    pub delays: DelayModel,
    pub service: ServiceModel,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            node_min: 1,
            node_max: 7,
            initial_nodes: 1,
            delays: DelayModel::default(),
            service: ServiceModel::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_min == 0 || self.node_min > self.node_max {
            return Err(param("sim.node_min", "need 1 <= node_min <= node_max"));
        }
        if !(self.node_min..=self.node_max).contains(&self.initial_nodes) {
            return Err(param("sim.initial_nodes", "must lie within the node bounds"));
        }
        let s = self.service;
        if !(s.base_ms.is_finite() && s.per_unit_ms.is_finite() && s.base_ms >= 0.0 && s.per_unit_ms >= 0.0)
            || s.base_ms + s.per_unit_ms <= 0.0
        {
            return Err(param("sim.service", "service times must be nonnegative and not all zero"));
        }
        self.delays.validate()
    }
}

/// Monitored state over one control interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    /// End of the interval.
    pub t_ms: Millis,
    /// Requests that arrived during the interval.
    pub w: u64,
    /// Requests completed during the interval.
    pub th: u64,
    /// Mean response time of the completed requests; 0 when none completed.
    pub rt_mean_ms: f64,
    pub rt_p95_ms: f64,
    /// Active nodes at the end of the interval (pending changes excluded).
    pub vm: u32,
    pub empty: bool,
}

impl Observation {
    pub fn from_response_times(t_ms: Millis, w: u64, vm: u32, rts: &[f64]) -> Self {
        let th = rts.len() as u64;
        let rt_mean_ms = stats::mean(rts).unwrap_or(0.0);
        let rt_p95_ms = stats::percentile_nearest_rank(rts, 95.0).unwrap_or(0.0);
        Self { t_ms, w, th, rt_mean_ms, rt_p95_ms, vm, empty: th == 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingChange {
    pub delta: i32,
    pub issued_ms: Millis,
    pub enact_at_ms: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EventKind {
    Arrival,
    Start,
    Completion,
    ScaleOut,
    ScaleIn,
    Preempt,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arrival => "arrival",
            Self::Start => "start",
            Self::Completion => "completion",
            Self::ScaleOut => "scale_out",
            Self::ScaleIn => "scale_in",
            Self::Preempt => "preempt",
        }
    }
}

/// One line of the optional event log.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventRecord {
    pub t_ms: Millis,
    pub kind: EventKind,
    pub node_count: u32,
    pub queue_len: usize,
    pub request_id: Option<u64>,
    pub rt_ms: Option<f64>,
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    added_ms: Millis,
    epoch: u64,
    busy: Option<(Request, Millis)>,
}

/// The cluster: queue, nodes, in-flight change and interval accounting.
#[derive(Debug, Clone)]
pub struct ClusterSim {
    cfg: SimConfig,
    now: Millis,
    nodes: Vec<Node>,
    next_node_id: u64,
    queue: VecDeque<Request>,
    future: VecDeque<Request>,
    completions: BinaryHeap<Reverse<(Millis, u64, u64, u64)>>,
    seq: u64,
    pending: Option<PendingChange>,
    last_enactment: Option<(Millis, i32)>,
    delay_rng: SimRng,
    arrived: u64,
    completed: u64,
    interval_arrivals: u64,
    interval_rts: Vec<f64>,
    node_timeline: Vec<(Millis, u32)>,
    events: Option<Vec<EventRecord>>,
    events_processed: u64,
}

impl ClusterSim {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut sim = Self {
            cfg,
            now: 0,
            nodes: Vec::new(),
            next_node_id: 0,
            queue: VecDeque::new(),
            future: VecDeque::new(),
            completions: BinaryHeap::new(),
            seq: 0,
            pending: None,
            last_enactment: None,
            delay_rng: rng::stream(cfg.seed, Stream::Delays),
            arrived: 0,
            completed: 0,
            interval_arrivals: 0,
            interval_rts: Vec::new(),
            node_timeline: alloc::vec![(0, cfg.initial_nodes)],
            events: None,
            events_processed: 0,
        };
        for _ in 0..cfg.initial_nodes {
            sim.add_node();
        }
        Ok(sim)
    }

    /// Keeps an in-memory event log from now on.
    pub fn with_event_log(mut self) -> Self {
        self.events = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn active_nodes(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn in_service(&self) -> usize {
        self.nodes.iter().filter(|n| n.busy.is_some()).count()
    }

    pub fn arrived(&self) -> u64 {
        self.arrived
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    pub fn events_processed(&self) -> u64 {
        self.events_processed
    }

    pub fn pending_change(&self) -> Option<PendingChange> {
        self.pending
    }

    pub fn in_flight(&self) -> bool {
        self.pending.is_some()
    }

    /// Time and delta of the most recent enacted change.
    pub fn last_enactment(&self) -> Option<(Millis, i32)> {
        self.last_enactment
    }

    /// `(time, active nodes)` at start and after every enactment.
    pub fn node_timeline(&self) -> &[(Millis, u32)] {
        &self.node_timeline
    }

    pub fn event_log(&self) -> Option<&[EventRecord]> {
        self.events.as_deref()
    }

    /// `arrived == completed + queued + in service`.
    pub fn conservation_holds(&self) -> bool {
        self.arrived == self.completed + self.queue.len() as u64 + self.in_service() as u64
    }

    /// Adds requests to the system. Requests due now join the queue at once;
    /// later ones are held until their arrival time. Each batch must be
    /// sorted by arrival and not earlier than the current time.
    pub fn inject(&mut self, arrivals: impl IntoIterator<Item = Request>) {
        for r in arrivals {
            debug_assert!(r.arrival_ms >= self.now, "arrival in the past");
            debug_assert!(self.future.back().is_none_or(|b| b.arrival_ms <= r.arrival_ms), "unsorted arrivals");
            if r.arrival_ms <= self.now && self.future.is_empty() {
                self.admit(r);
            } else {
                self.future.push_back(r);
            }
        }
    }

    fn admit(&mut self, r: Request) {
        self.arrived += 1;
        self.interval_arrivals += 1;
        self.queue.push_back(r);
        self.log(EventKind::Arrival, Some(r.id), None);
    }

    /// Queues a change of `delta` nodes, enacted after a sampled delay.
    pub fn schedule_scaling(&mut self, delta: i32, now: Millis) -> Result<Millis> {
        if delta == 0 {
            return Err(Error::ZeroDelta);
        }
        if let Some(p) = self.pending {
            return Err(Error::ChangeInFlight { enact_at_ms: p.enact_at_ms });
        }
        let nodes = self.active_nodes();
        let target = i64::from(nodes) + i64::from(delta);
        if target < i64::from(self.cfg.node_min) || target > i64::from(self.cfg.node_max) {
            return Err(Error::NodeBounds { delta, nodes, min: self.cfg.node_min, max: self.cfg.node_max });
        }
        let now = now.max(self.now);
        let enact_at_ms = now + self.cfg.delays.sample(delta, &mut self.delay_rng);
        self.pending = Some(PendingChange { delta, issued_ms: now, enact_at_ms });
        Ok(enact_at_ms)
    }

    /// Runs every event up to and including `until`; returns the requests
    /// completed on the way.
    pub fn advance(&mut self, until: Millis) -> Vec<Request> {
        let mut done = Vec::new();
        while let Some(r) = self.step(until) {
            if let Some(r) = r {
                done.push(r);
            }
        }
        self.now = self.now.max(until);
        done
    }

    /// Processes the next event at or before `until`. Returns `None` when no
    /// such event exists, otherwise the completed request, if the event was
    /// a completion.
    pub fn step(&mut self, until: Millis) -> Option<Option<Request>> {
        self.dispatch();
        loop {
            let completion = self.completions.peek().map(|Reverse(c)| c.0);
            let enact = self.pending.map(|p| p.enact_at_ms);
            let arrival = self.future.front().map(|r| r.arrival_ms);
            let next = [completion, enact, arrival].into_iter().flatten().min()?;
            if next > until {
                return None;
            }
            self.now = next;
            // Ties: completions free nodes before the cluster changes, and both
            // happen before new arrivals join the queue.
            let out = if completion == Some(next) {
                let Reverse((_, _, node_id, epoch)) = self.completions.pop().unwrap();
                match self.finish(node_id, epoch) {
                    Some(r) => Some(r),
                    None => continue,
                }
            } else if enact == Some(next) {
                self.enact();
                None
            } else {
                let r = self.future.pop_front().unwrap();
                self.admit(r);
                None
            };
            self.dispatch();
            self.events_processed += 1;
            debug_assert!(self.conservation_holds());
            debug_assert!((self.cfg.node_min..=self.cfg.node_max).contains(&self.active_nodes()));
            return Some(out);
        }
    }

    fn finish(&mut self, node_id: u64, epoch: u64) -> Option<Request> {
        let node = self.nodes.iter_mut().find(|n| n.id == node_id && n.epoch == epoch)?;
        let (mut r, _) = node.busy.take()?;
        r.completion_ms = Some(self.now);
        self.completed += 1;
        let rt = r.response_time_ms().unwrap();
        self.interval_rts.push(rt);
        self.log(EventKind::Completion, Some(r.id), Some(rt));
        Some(r)
    }

    fn enact(&mut self) {
        let p = self.pending.take().unwrap();
        if p.delta > 0 {
            for _ in 0..p.delta {
                self.add_node();
            }
            self.log(EventKind::ScaleOut, None, None);
        } else {
            for _ in 0..p.delta.unsigned_abs() {
                self.remove_node();
            }
            self.log(EventKind::ScaleIn, None, None);
        }
        self.last_enactment = Some((self.now, p.delta));
        self.node_timeline.push((self.now, self.active_nodes()));
    }

    fn add_node(&mut self) {
        let id = self.next_node_id;
        self.next_node_id += 1;
        self.nodes.push(Node { id, added_ms: self.now, epoch: 0, busy: None });
    }

    /// Removes an idle node if there is one, otherwise the youngest busy node,
    /// whose request goes back to the head of the queue.
    fn remove_node(&mut self) {
        let youngest = |pred: &dyn Fn(&Node) -> bool, nodes: &[Node]| {
            nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| pred(n))
                .max_by_key(|(_, n)| (n.added_ms, n.id))
                .map(|(k, _)| k)
        };
        let victim = youngest(&|n| n.busy.is_none(), &self.nodes)
            .or_else(|| youngest(&|_| true, &self.nodes))
            .expect("cluster never drops below node_min");
        let node = self.nodes.remove(victim);
        if let Some((mut r, _)) = node.busy {
            r.start_ms = None;
            self.queue.push_front(r);
            self.log(EventKind::Preempt, Some(r.id), None);
        }
    }

    fn dispatch(&mut self) {
        let mut k = 0;
        while k < self.nodes.len() && !self.queue.is_empty() {
            if self.nodes[k].busy.is_none() {
                let mut r = self.queue.pop_front().unwrap();
                r.start_ms = Some(self.now);
                let done = self.now + self.cfg.service.service_millis(r.size);
                let node = &mut self.nodes[k];
                node.epoch += 1;
                node.busy = Some((r, done));
                self.seq += 1;
                self.completions.push(Reverse((done, self.seq, node.id, node.epoch)));
                self.log(EventKind::Start, Some(r.id), None);
            }
            k += 1;
        }
    }

    fn log(&mut self, kind: EventKind, request_id: Option<u64>, rt_ms: Option<f64>) {
        let (t_ms, node_count, queue_len) = (self.now, self.active_nodes(), self.queue.len());
        if let Some(events) = self.events.as_mut() {
            events.push(EventRecord { t_ms, kind, node_count, queue_len, request_id, rt_ms });
        }
    }

    /// Aggregates the interval ending now and starts a new one. The caller
    /// advances to the end of the interval first.
    pub fn observe(&mut self) -> Observation {
        let obs = Observation::from_response_times(self.now, self.interval_arrivals, self.active_nodes(), &self.interval_rts);
        self.interval_arrivals = 0;
        self.interval_rts.clear();
        obs
    }

    /// Response times recorded in the current, not yet observed interval.
    pub fn interval_response_times(&self) -> &[f64] {
        &self.interval_rts
    }
}
