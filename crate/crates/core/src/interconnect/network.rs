use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};

use serde::Serialize;

use super::message::{
    hex, B2HMessage, Bank, Command, H2BMessage, B2H_BITS, H2B_BITS, MAX_SITES, REG_EN, REG_EN_PWR_BAR, REG_RSTN_SOFT,
};
use super::SimError;

/// Cycles between a station taking a request and the request taking effect.
pub const CROSSING_LATENCY: usize = 2;
pub const REG_BITS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Regs {
    /// Active-low soft reset of the user block.
    pub rstn_soft: bool,
    pub en: bool,
    /// Active-low power enable; set means powered off.
    pub en_pwr_bar: bool,
}

impl Default for Regs {
    fn default() -> Self {
        Regs { rstn_soft: true, en: false, en_pwr_bar: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Station {
    /// Site address this station answers to.
    pub id: u8,
    pub h2b: Option<H2BMessage>,
    pub crossing: [Option<H2BMessage>; CROSSING_LATENCY],
    pub b2h: Option<B2HMessage>,
    pub regs: Regs,
    /// Non-zero words of the user bank.
    pub user_bank: BTreeMap<u32, u32>,
}

impl Station {
    pub fn new(id: u8) -> Self {
        Station { id, h2b: None, crossing: [None; CROSSING_LATENCY], b2h: None, regs: Regs::default(), user_bank: BTreeMap::new() }
    }

    pub fn is_idle(&self) -> bool {
        self.h2b.is_none() && self.b2h.is_none() && self.crossing.iter().all(Option::is_none)
    }

    /// Queues, crossing stages and registers as a flat bit vector. The user
    /// bank lives behind the station and is not part of it.
    pub fn state_bits(&self) -> Vec<bool> {
        let mut out = Vec::new();
        let mut push = |valid: bool, bits: u128, width: u32| {
            out.push(valid);
            out.extend((0..width).rev().map(|k| valid && (bits >> k) & 1 == 1));
        };
        push(self.h2b.is_some(), self.h2b.map_or(0, |m| m.encode()), H2B_BITS);
        for stage in &self.crossing {
            push(stage.is_some(), stage.map_or(0, |m| m.encode()), H2B_BITS);
        }
        push(self.b2h.is_some(), self.b2h.map_or(0, |m| m.encode()), B2H_BITS);
        out.extend([self.regs.rstn_soft, self.regs.en, self.regs.en_pwr_bar]);
        out
    }

    fn user_live(&self) -> bool {
        self.regs.rstn_soft && !self.regs.en_pwr_bar
    }

    fn apply(&mut self, m: &H2BMessage) -> Option<B2HMessage> {
        match (m.command, m.bank) {
            (Command::Read, Bank::Periphery) => {
                let data = match m.word {
                    REG_RSTN_SOFT => self.regs.rstn_soft,
                    REG_EN => self.regs.en,
                    REG_EN_PWR_BAR => self.regs.en_pwr_bar,
                    _ => false,
                };
                Some(B2HMessage { site: self.id, word: m.word, data: u32::from(data) })
            }
            (Command::Read, Bank::User) => {
                let data = if self.user_live() { self.user_bank.get(&m.word).copied().unwrap_or(0) } else { 0 };
                Some(B2HMessage { site: self.id, word: m.word, data })
            }
            (Command::Write, Bank::Periphery) => {
                let bit = m.data & 1 == 1;
                match m.word {
                    REG_RSTN_SOFT => {
                        self.regs.rstn_soft = bit;
                        if !bit {
                            self.user_bank.clear();
                        }
                    }
                    REG_EN => self.regs.en = bit,
                    REG_EN_PWR_BAR => self.regs.en_pwr_bar = bit,
                    _ => {}
                }
                None
            }
            (Command::Write, Bank::User) => {
                if self.user_live() {
                    if m.data == 0 {
                        self.user_bank.remove(&m.word);
                    } else {
                        self.user_bank.insert(m.word, m.data);
                    }
                }
                None
            }
        }
    }
}

/// How a queue slot freed in a cycle can be refilled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum QueueKind {
    /// Ready only when empty at the start of the cycle.
    #[default]
    Normal,
    /// Also ready when the occupant leaves in the same cycle.
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Inject,
    Forward,
    Consume,
    Apply,
    Respond,
    Return,
    Deliver,
    Drop,
    Malformed,
    Timeout,
    LateResponse,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Inject => "inject",
            EventKind::Forward => "forward",
            EventKind::Consume => "consume",
            EventKind::Apply => "apply",
            EventKind::Respond => "respond",
            EventKind::Return => "return",
            EventKind::Deliver => "deliver",
            EventKind::Drop => "drop",
            EventKind::Malformed => "malformed",
            EventKind::Timeout => "timeout",
            EventKind::LateResponse => "late_response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub cycle: u64,
    /// Physical chain position; `None` is the controller.
    pub station: Option<usize>,
    pub kind: EventKind,
    pub payload: u128,
    pub width: u32,
}

impl TraceEvent {
    pub fn csv(&self) -> String {
        let st = self.station.map_or_else(|| "ctrl".to_string(), |p| p.to_string());
        format!("{},{},{},{}", self.cycle, st, self.kind.as_str(), hex(self.payload, self.width))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Stats {
    pub injected: u64,
    pub consumed: u64,
    pub applied: u64,
    pub dropped: u64,
    pub malformed: u64,
    pub responses: u64,
    pub delivered: u64,
    pub timeouts: u64,
    pub late_responses: u64,
    /// Cycles that ended with more than one enabled station.
    pub active_violations: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepReport {
    pub accepted: bool,
    pub delivered: Option<B2HMessage>,
    pub dropped: Vec<H2BMessage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadOutcome {
    Data(u32),
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReadResult {
    /// Order of the read among all reads issued.
    pub seq: u64,
    pub site: u8,
    pub bank: Bank,
    pub word: u32,
    pub issued: u64,
    pub outcome: ReadOutcome,
}

#[derive(Debug, Clone)]
struct Outstanding {
    seq: u64,
    msg: H2BMessage,
    issued: Option<u64>,
    timed_out: bool,
}

#[derive(Debug, Clone, Default)]
struct Controller {
    pending: VecDeque<(H2BMessage, Option<u64>)>,
    outstanding: Vec<Outstanding>,
    results: Vec<ReadResult>,
    next_seq: u64,
    active: Option<u8>,
}

/// An open chain of stations driven by one controller at position 0.
#[derive(Debug, Clone)]
pub struct Network {
    stations: Vec<Station>,
    queue: QueueKind,
    cycle: u64,
    ready_low: Option<usize>,
    trace: Option<Vec<TraceEvent>>,
    stats: Stats,
    ctrl: Controller,
}

impl Network {
    /// `n` stations with site addresses `0..n` in chain order.
    pub fn new(n: usize) -> Result<Self, SimError> {
        Network::with_order((0..n.min(MAX_SITES + 1)).map(|i| i as u8).collect::<Vec<_>>().as_slice())
            .map_err(|_| SimError::SiteCount(n))
    }

    /// Stations with site addresses listed in physical chain order.
    pub fn with_order(ids: &[u8]) -> Result<Self, SimError> {
        if ids.is_empty() || ids.len() > MAX_SITES {
            return Err(SimError::SiteCount(ids.len()));
        }
        let mut seen = vec![false; MAX_SITES];
        for &id in ids {
            if usize::from(id) >= MAX_SITES || std::mem::replace(&mut seen[usize::from(id)], true) {
                return Err(SimError::Protocol(format!("site address {id} repeated or out of range")));
            }
        }
        Ok(Network {
            stations: ids.iter().map(|&id| Station::new(id)).collect(),
            queue: QueueKind::Normal,
            cycle: 0,
            ready_low: None,
            trace: None,
            stats: Stats::default(),
            ctrl: Controller::default(),
        })
    }

    pub fn with_queue(mut self, queue: QueueKind) -> Self {
        self.queue = queue;
        self
    }

    /// Fault hook: the station at chain position `pos` never accepts a request.
    pub fn with_ready_tied_low(mut self, pos: usize) -> Self {
        self.ready_low = Some(pos);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Stop recording trace events and forget those recorded.
    pub fn clear_trace(&mut self) {
        self.trace = None;
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn write_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "cycle,station,event,payload_hex")?;
        for e in self.trace() {
            writeln!(w, "{}", e.csv())?;
        }
        Ok(())
    }

    /// Cycles a read may stay unanswered.
    pub fn timeout(&self) -> u64 {
        4 * self.len() as u64 + 16
    }

    pub fn station(&self, site: u8) -> Option<&Station> {
        self.stations.iter().find(|s| s.id == site)
    }

    pub fn active_count(&self) -> usize {
        self.stations.iter().filter(|s| s.regs.en).count()
    }

    pub fn active_site(&self) -> Option<u8> {
        self.ctrl.active
    }

    /// Messages held anywhere in the chain.
    pub fn in_flight(&self) -> usize {
        self.stations
            .iter()
            .map(|s| usize::from(s.h2b.is_some()) + usize::from(s.b2h.is_some()) + s.crossing.iter().flatten().count())
            .sum()
    }

    pub fn is_quiet(&self) -> bool {
        self.stations.iter().all(Station::is_idle)
    }

    fn log(&mut self, station: Option<usize>, kind: EventKind, payload: u128, width: u32) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { cycle: self.cycle, station, kind, payload, width });
        }
    }

    /// One clock edge. `offer` is presented to the first station and taken
    /// if it is ready. All handshakes see the state from the start of the cycle.
    pub fn step(&mut self, offer: Option<H2BMessage>) -> StepReport {
        let n = self.len();
        let s = self.stations.clone();
        let mut next = s.clone();
        let mut report = StepReport::default();

        let crossing_free = |p: usize| s[p].crossing[0].is_none();
        // Whether each h2b slot is taken out this cycle and whether each is ready.
        let mut leaves = vec![false; n];
        let mut ready = vec![false; n + 1];
        for p in (0..n).rev() {
            if let Some(m) = s[p].h2b {
                leaves[p] = if m.site == s[p].id { crossing_free(p) } else { p + 1 == n || ready[p + 1] };
            }
            let free = s[p].h2b.is_none() || (self.queue == QueueKind::Pipeline && leaves[p]);
            ready[p] = free && self.ready_low != Some(p);
        }

        // b2h moves toward the controller, which always accepts.
        let b2h_moves: Vec<bool> = (0..n).map(|p| s[p].b2h.is_some() && (p == 0 || s[p - 1].b2h.is_none())).collect();
        for p in 0..n {
            if !b2h_moves[p] {
                continue;
            }
            let r = s[p].b2h.expect("moving slot is full");
            next[p].b2h = None;
            if p == 0 {
                report.delivered = Some(r);
                self.stats.delivered += 1;
                self.log(None, EventKind::Deliver, r.encode(), B2H_BITS);
            } else {
                next[p - 1].b2h = Some(r);
                self.log(Some(p - 1), EventKind::Return, r.encode(), B2H_BITS);
            }
        }

        for p in 0..n {
            // The last crossing stage takes effect; a read waits for room in b2h,
            // giving way to responses coming from further down the chain.
            let last = CROSSING_LATENCY - 1;
            let mut last_free = s[p].crossing[last].is_none();
            if let Some(m) = s[p].crossing[last] {
                let incoming = p + 1 < n && b2h_moves[p + 1];
                if m.command == Command::Write || (s[p].b2h.is_none() && !incoming) {
                    let resp = next[p].apply(&m);
                    next[p].crossing[last] = None;
                    last_free = true;
                    self.stats.applied += 1;
                    self.log(Some(p), EventKind::Apply, m.encode(), H2B_BITS);
                    if let Some(r) = resp {
                        next[p].b2h = Some(r);
                        self.stats.responses += 1;
                        self.log(Some(p), EventKind::Respond, r.encode(), B2H_BITS);
                    }
                }
            }
            for k in (0..last).rev() {
                if s[p].crossing[k].is_some() && (k + 1 < last || last_free) && next[p].crossing[k + 1].is_none() {
                    next[p].crossing[k + 1] = s[p].crossing[k];
                    next[p].crossing[k] = None;
                }
            }
            if !leaves[p] {
                continue;
            }
            let m = s[p].h2b.expect("leaving slot is full");
            next[p].h2b = None;
            if m.site == s[p].id {
                next[p].crossing[0] = Some(m);
                self.stats.consumed += 1;
                self.log(Some(p), EventKind::Consume, m.encode(), H2B_BITS);
            } else if p + 1 == n {
                report.dropped.push(m);
                self.stats.dropped += 1;
                self.log(Some(p), EventKind::Drop, m.encode(), H2B_BITS);
            } else {
                next[p + 1].h2b = Some(m);
                self.log(Some(p + 1), EventKind::Forward, m.encode(), H2B_BITS);
            }
        }

        if let Some(m) = offer {
            if ready[0] {
                next[0].h2b = Some(m);
                report.accepted = true;
                self.stats.injected += 1;
                self.log(None, EventKind::Inject, m.encode(), H2B_BITS);
            }
        }

        self.stations = next;
        if self.active_count() > 1 {
            self.stats.active_violations += 1;
        }
        self.cycle += 1;
        report
    }

    /// Queue a request for the controller to send. Enable bits are only set
    /// through [`Network::activate_site`].
    pub fn enqueue(&mut self, msg: H2BMessage) -> Result<(), SimError> {
        if msg.command == Command::Write && msg.bank == Bank::Periphery && msg.word == REG_EN && msg.data & 1 == 1 {
            return Err(SimError::Protocol(format!("site {} must be enabled with activate", msg.site)));
        }
        self.push(msg);
        Ok(())
    }

    /// Queue an encoded request; undecodable words are dropped and logged.
    pub fn enqueue_raw(&mut self, bits: u128) -> Result<(), SimError> {
        match H2BMessage::decode(bits) {
            Ok(m) => self.enqueue(m),
            Err(e) => {
                self.stats.malformed += 1;
                self.log(None, EventKind::Malformed, bits, 128);
                Err(e)
            }
        }
    }

    fn push(&mut self, msg: H2BMessage) -> Option<u64> {
        let seq = (msg.command == Command::Read).then(|| {
            self.ctrl.next_seq += 1;
            self.ctrl.next_seq - 1
        });
        if let Some(seq) = seq {
            self.ctrl.outstanding.push(Outstanding { seq, msg, issued: None, timed_out: false });
        }
        self.ctrl.pending.push_back((msg, seq));
        seq
    }

    /// One controller cycle: offer the next queued request, collect any
    /// response and expire overdue reads.
    pub fn tick(&mut self) -> StepReport {
        let offer = self.ctrl.pending.front().map(|&(m, _)| m);
        let now = self.cycle;
        let report = self.step(offer);
        if report.accepted {
            let (_, seq) = self.ctrl.pending.pop_front().expect("offered");
            if let Some(o) = seq.and_then(|q| self.ctrl.outstanding.iter_mut().find(|o| o.seq == q)) {
                o.issued = Some(now);
            }
        }
        if let Some(r) = report.delivered {
            // Responses from one site come back in issue order.
            match self.ctrl.outstanding.iter().position(|o| o.msg.site == r.site && o.issued.is_some()) {
                Some(i) => {
                    let o = self.ctrl.outstanding.remove(i);
                    if o.timed_out {
                        self.stats.late_responses += 1;
                        self.log(None, EventKind::LateResponse, r.encode(), B2H_BITS);
                    } else {
                        self.ctrl.results.push(ReadResult {
                            seq: o.seq,
                            site: o.msg.site,
                            bank: o.msg.bank,
                            word: o.msg.word,
                            issued: o.issued.unwrap_or(now),
                            outcome: ReadOutcome::Data(r.data),
                        });
                    }
                }
                None => {
                    self.stats.late_responses += 1;
                    self.log(None, EventKind::LateResponse, r.encode(), B2H_BITS);
                }
            }
        }
        let limit = self.timeout();
        let mut expired = Vec::new();
        for o in self.ctrl.outstanding.iter_mut() {
            if let Some(t) = o.issued {
                if !o.timed_out && self.cycle - t > limit {
                    o.timed_out = true;
                    expired.push(o.timeout_result());
                }
            }
        }
        for r in expired {
            self.stats.timeouts += 1;
            let m = H2BMessage::read(r.site, r.bank, r.word);
            self.log(None, EventKind::Timeout, m.encode(), H2B_BITS);
            self.ctrl.results.push(r);
        }
        report
    }

    /// Completed reads in completion order.
    pub fn results(&self) -> &[ReadResult] {
        &self.ctrl.results
    }

    /// Requests not yet accepted or reads not yet answered or expired.
    pub fn busy(&self) -> bool {
        !self.ctrl.pending.is_empty() || self.ctrl.outstanding.iter().any(|o| !o.timed_out)
    }

    /// Tick until every queued request is resolved and the chain is empty.
    /// Gives up after `max_cycles`.
    pub fn drain(&mut self, max_cycles: u64) -> Result<(), SimError> {
        let end = self.cycle + max_cycles;
        while self.busy() || !self.is_quiet() {
            if self.cycle >= end {
                return Err(SimError::Stalled { cycles: max_cycles });
            }
            self.tick();
        }
        Ok(())
    }

    fn wait_sent(&mut self) -> Result<(), SimError> {
        let limit = self.timeout();
        let end = self.cycle + limit;
        while !self.ctrl.pending.is_empty() {
            if self.cycle >= end {
                return Err(SimError::Stalled { cycles: limit });
            }
            self.tick();
        }
        Ok(())
    }

    /// Write a 40-bit address and wait until the chain accepts it.
    pub fn mmio_write(&mut self, addr: u64, data: u32) -> Result<(), SimError> {
        self.enqueue(H2BMessage::from_addr(Command::Write, addr, data)?)?;
        self.wait_sent()
    }

    /// Read a 40-bit address and wait for the answer.
    pub fn mmio_read(&mut self, addr: u64) -> Result<u32, SimError> {
        let msg = H2BMessage::from_addr(Command::Read, addr, 0)?;
        self.read_wait(msg).1
    }

    fn read_wait(&mut self, msg: H2BMessage) -> (u64, Result<u32, SimError>) {
        let seq = self.push(msg).expect("reads get a sequence number");
        (seq, self.wait_result(seq, msg))
    }

    fn wait_result(&mut self, seq: u64, msg: H2BMessage) -> Result<u32, SimError> {
        let end = self.cycle + self.ctrl.pending.len() as u64 * 2 + self.timeout() + 2;
        loop {
            if let Some(r) = self.ctrl.results.iter().find(|r| r.seq == seq) {
                return match r.outcome {
                    ReadOutcome::Data(d) => Ok(d),
                    ReadOutcome::Timeout => Err(SimError::Timeout { site: msg.site, word: msg.word, cycles: self.timeout() }),
                };
            }
            if self.cycle >= end {
                return Err(SimError::Stalled { cycles: self.timeout() });
            }
            self.tick();
        }
    }

    /// Enable `site` alone. The previously active site is switched off and
    /// read back before the new enable is sent.
    pub fn activate_site(&mut self, site: u8) -> Result<(), SimError> {
        if self.station(site).is_none() {
            return Err(SimError::NoSuchSite { site, n: self.len() });
        }
        if self.ctrl.active == Some(site) {
            return Ok(());
        }
        if let Some(old) = self.ctrl.active.take() {
            self.push(H2BMessage::write(old, Bank::Periphery, REG_EN, 0));
            // the fence read is internal and not reported
            let (seq, fence) = self.read_wait(H2BMessage::read(old, Bank::Periphery, REG_EN));
            self.ctrl.results.retain(|r| r.seq != seq);
            let fence = fence?;
            if fence != 0 {
                return Err(SimError::Invariant(format!("site {old} still enabled after switch-off")));
            }
        }
        self.push(H2BMessage::write(site, Bank::Periphery, REG_EN, 1));
        self.wait_sent()?;
        self.ctrl.active = Some(site);
        if self.stats.active_violations > 0 {
            return Err(SimError::Invariant(format!("{} cycles with several enabled sites", self.stats.active_violations)));
        }
        Ok(())
    }
}

impl Outstanding {
    fn timeout_result(&self) -> ReadResult {
        ReadResult {
            seq: self.seq,
            site: self.msg.site,
            bank: self.msg.bank,
            word: self.msg.word,
            issued: self.issued.unwrap_or(0),
            outcome: ReadOutcome::Timeout,
        }
    }
}
