//! Continuous-time simulation of finite-population unslotted ALOHA.
//!
//! `M` users each hold at most one packet. An empty user generates a packet
//! after an `Exp(lambda)` delay and transmits it at once; there is no carrier
//! sense. A transmission that overlaps another one aborts both at the overlap
//! instant and every involved user backs off for an `Exp(nu)` delay before
//! retrying the *same* packet. A transmission that runs for its full length
//! without overlap is a departure.
//!
//! The receiver sees an increasing sequence of channel events (collisions and
//! departures). For the `m`-th departure at `D_m` the trace records the delay
//! `T_m = D_m - D_{m-1}` and the number of transmission starts `N_m` in
//! `(D_{m-1}, D_m]`, and the same quantities from the departing user's own
//! point of view.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dist::PacketDistribution;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Hard ceiling on processed timer events.
pub const MAX_EVENTS: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteModelParams {
    users: usize,
    lambda: f64,
    nu: f64,
    packet: PacketDistribution,
}

impl FiniteModelParams {
    pub fn new(users: usize, lambda: f64, nu: f64, packet: PacketDistribution) -> Result<Self> {
        if users == 0 {
            return Err(Error::param("M", "must be >= 1"));
        }
        if users > u32::MAX as usize {
            return Err(Error::param("M", "too many users"));
        }
        for (name, v) in [("lambda", lambda), ("nu", nu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be finite and > 0"));
            }
        }
        packet.validate()?;
        Ok(Self {
            users,
            lambda,
            nu,
            packet,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn packet(&self) -> &PacketDistribution {
        &self.packet
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Instrumentation {
    /// Record, for every departure, the number of channel events until the
    /// system is next full (all users backlogged right after a collision).
    pub full_state: bool,
    /// Record, for every departure, the smallest packet held by the other users.
    pub min_residual: bool,
    /// Keep the complete channel event log.
    pub event_log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop right after this many departures.
    Departures(u64),
    /// Process every event up to and including this time.
    Time(f64),
    /// Stop right after `user` (0-based) has departed `count` times.
    UserDepartures { user: usize, count: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub stop: StopRule,
    pub instrument: Instrumentation,
    pub max_events: u64,
}

impl SimulationOptions {
    pub fn departures(count: u64) -> Self {
        Self {
            stop: StopRule::Departures(count),
            instrument: Instrumentation::default(),
            max_events: MAX_EVENTS,
        }
    }

    pub fn user_departures(user: usize, count: u64) -> Self {
        Self {
            stop: StopRule::UserDepartures { user, count },
            instrument: Instrumentation::default(),
            max_events: MAX_EVENTS,
        }
    }

    pub fn until(time: f64) -> Self {
        Self {
            stop: StopRule::Time(time),
            instrument: Instrumentation::default(),
            max_events: MAX_EVENTS,
        }
    }

    pub fn with_instrumentation(mut self, instrument: Instrumentation) -> Self {
        self.instrument = instrument;
        self
    }

    pub fn with_max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events.min(MAX_EVENTS);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Empty,
    Backlogged,
    Transmitting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    pub mode: Mode,
    /// Held packet; absent exactly when the user is empty.
    pub packet: Option<Packet>,
    /// Length of the packet the user will generate next. Drawn at the
    /// preceding departure (or at start), which leaves its law unchanged.
    pub next_length: f64,
    pub timer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelEvent {
    TransmissionStart {
        time: f64,
        user: usize,
        packet: Packet,
    },
    /// Overlap of two transmissions; both abort.
    Collision { time: f64, users: [usize; 2] },
    Departure {
        time: f64,
        user: usize,
        packet: Packet,
        start: f64,
    },
}

/// Per-user view of the departures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserSamples {
    /// Receiver index `m` (0-based) of each of this user's departures.
    pub departure_index: Vec<usize>,
    /// `T^{(i)}_m`: time since the user's previous departure (or since 0).
    pub delays: Vec<f64>,
    /// `N^{(i)}_m`: the user's transmission starts for this packet cycle.
    pub retx_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayTrace {
    pub users: usize,
    pub departures: Vec<f64>,
    pub delays: Vec<f64>,
    pub retx_counts: Vec<u64>,
    pub departing_user: Vec<u32>,
    /// Length of the packet that departed at `D_m`.
    pub packet_lengths: Vec<f64>,
    pub per_user: Vec<UserSamples>,
    /// Events-until-full count per departure; `None` if the run ended first.
    pub nf_samples: Option<Vec<Option<u64>>>,
    pub min_residual: Option<Vec<f64>>,
    pub event_log: Option<Vec<ChannelEvent>>,
    pub collisions: u64,
    pub timer_events: u64,
    /// Time up to which the channel was observed.
    pub horizon: f64,
}

impl DelayTrace {
    pub fn len(&self) -> usize {
        self.departures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.departures.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Timer {
    time: f64,
    user: usize,
    generation: u64,
}

impl PartialEq for Timer {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Timer {}

impl PartialOrd for Timer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timer {
    // Reversed so the max-heap pops the earliest (time, user) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.user.cmp(&self.user))
    }
}

struct Engine<'a> {
    params: FiniteModelParams,
    rng: &'a mut RandomStream,
    now: f64,
    states: Vec<UserState>,
    generation: Vec<u64>,
    queue: BinaryHeap<Timer>,
    channel: Option<(usize, f64)>,
    next_packet_id: u64,
    channel_events: u64,
    starts_since_departure: u64,
    user_starts: Vec<u64>,
    user_last_departure: Vec<f64>,
    pending_full: Vec<(usize, u64)>,
    trace: DelayTrace,
}

impl<'a> Engine<'a> {
    fn new(
        params: FiniteModelParams,
        options: &SimulationOptions,
        rng: &'a mut RandomStream,
    ) -> Self {
        let m = params.users;
        let instrument = options.instrument;
        let mut engine = Self {
            params,
            rng,
            now: 0.0,
            states: Vec::with_capacity(m),
            generation: vec![0; m],
            queue: BinaryHeap::with_capacity(2 * m),
            channel: None,
            next_packet_id: 0,
            channel_events: 0,
            starts_since_departure: 0,
            user_starts: vec![0; m],
            user_last_departure: vec![0.0; m],
            pending_full: Vec::new(),
            trace: DelayTrace {
                users: m,
                departures: Vec::new(),
                delays: Vec::new(),
                retx_counts: Vec::new(),
                departing_user: Vec::new(),
                packet_lengths: Vec::new(),
                per_user: vec![UserSamples::default(); m],
                nf_samples: instrument.full_state.then(Vec::new),
                min_residual: instrument.min_residual.then(Vec::new),
                event_log: instrument.event_log.then(Vec::new),
                collisions: 0,
                timer_events: 0,
                horizon: 0.0,
            },
        };
        // Empty start: every user waits for its first arrival.
        for i in 0..m {
            let next_length = engine.params.packet.sample(engine.rng);
            engine.states.push(UserState {
                mode: Mode::Empty,
                packet: None,
                next_length,
                timer: 0.0,
            });
            let delay = engine.rng.exponential(engine.params.lambda);
            engine.schedule(i, delay);
        }
        engine
    }

    fn schedule(&mut self, user: usize, delay: f64) {
        self.generation[user] += 1;
        let time = self.now + delay;
        self.states[user].timer = time;
        self.queue.push(Timer {
            time,
            user,
            generation: self.generation[user],
        });
    }

    fn log(&mut self, event: ChannelEvent) {
        if let Some(log) = self.trace.event_log.as_mut() {
            log.push(event);
        }
    }

    fn run(mut self, options: &SimulationOptions) -> Result<DelayTrace> {
        let (target, user_target) = match options.stop {
            StopRule::Departures(n) => (n, None),
            StopRule::Time(_) => (u64::MAX, None),
            StopRule::UserDepartures { user, count } => (u64::MAX, Some((user, count))),
        };
        let horizon = match options.stop {
            StopRule::Time(t) => t,
            _ => f64::INFINITY,
        };
        let done = |trace: &DelayTrace| match user_target {
            Some((user, count)) => trace.per_user[user].delays.len() as u64 >= count,
            None => trace.departures.len() as u64 >= target,
        };
        while !done(&self.trace) {
            let timer = match self.queue.peek() {
                Some(t) if t.time <= horizon => *t,
                _ => break,
            };
            self.queue.pop();
            if timer.generation != self.generation[timer.user] {
                continue;
            }
            if self.trace.timer_events >= options.max_events {
                return Err(Error::EventBudget(options.max_events));
            }
            self.trace.timer_events += 1;
            self.now = timer.time;
            self.fire(timer.user);
        }
        self.trace.horizon = match options.stop {
            StopRule::Time(t) => t,
            _ => self.now,
        };
        Ok(self.trace)
    }

    fn fire(&mut self, user: usize) {
        match self.states[user].mode {
            Mode::Empty => {
                let packet = Packet {
                    id: self.next_packet_id,
                    length: self.states[user].next_length,
                };
                self.next_packet_id += 1;
                self.states[user].packet = Some(packet);
                self.start_transmission(user);
            }
            Mode::Backlogged => self.start_transmission(user),
            Mode::Transmitting => self.depart(user),
        }
    }

    fn start_transmission(&mut self, user: usize) {
        let packet = self.states[user]
            .packet
            .expect("non-empty user holds a packet");
        self.starts_since_departure += 1;
        self.user_starts[user] += 1;
        self.log(ChannelEvent::TransmissionStart {
            time: self.now,
            user,
            packet,
        });
        match self.channel.take() {
            Some((other, _)) => {
                let (a, b) = if other < user {
                    (other, user)
                } else {
                    (user, other)
                };
                self.channel_events += 1;
                self.trace.collisions += 1;
                self.log(ChannelEvent::Collision {
                    time: self.now,
                    users: [a, b],
                });
                for i in [a, b] {
                    self.states[i].mode = Mode::Backlogged;
                    let delay = self.rng.exponential(self.params.nu);
                    self.schedule(i, delay);
                }
                if self.states.iter().all(|s| s.mode == Mode::Backlogged) {
                    self.resolve_full_state();
                }
            }
            None => {
                self.states[user].mode = Mode::Transmitting;
                self.channel = Some((user, self.now));
                self.schedule(user, packet.length);
            }
        }
    }

    fn resolve_full_state(&mut self) {
        let l = self.channel_events;
        if let Some(nf) = self.trace.nf_samples.as_mut() {
            for (m, h) in self.pending_full.drain(..) {
                nf[m] = Some(l - h);
            }
        }
    }

    fn depart(&mut self, user: usize) {
        let (_, start) = self
            .channel
            .take()
            .expect("transmitting user owns the channel");
        let packet = self.states[user]
            .packet
            .take()
            .expect("transmitting user holds a packet");
        self.channel_events += 1;
        self.log(ChannelEvent::Departure {
            time: self.now,
            user,
            packet,
            start,
        });

        let m = self.trace.departures.len();
        let previous = self.trace.departures.last().copied().unwrap_or(0.0);
        self.trace.departures.push(self.now);
        self.trace.delays.push(self.now - previous);
        self.trace.retx_counts.push(self.starts_since_departure);
        self.trace.departing_user.push(user as u32);
        self.trace.packet_lengths.push(packet.length);
        self.starts_since_departure = 0;

        let samples = &mut self.trace.per_user[user];
        samples.departure_index.push(m);
        samples
            .delays
            .push(self.now - self.user_last_departure[user]);
        samples.retx_counts.push(self.user_starts[user]);
        self.user_starts[user] = 0;
        self.user_last_departure[user] = self.now;

        if let Some(nf) = self.trace.nf_samples.as_mut() {
            nf.push(None);
            self.pending_full.push((m, self.channel_events));
        }

        let state = &mut self.states[user];
        state.mode = Mode::Empty;
        state.next_length = self.params.packet.sample(self.rng);

        if let Some(residuals) = self.trace.min_residual.as_mut() {
            let min = self
                .states
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != user)
                .map(|(_, s)| s.packet.map_or(s.next_length, |p| p.length))
                .fold(f64::INFINITY, f64::min);
            residuals.push(min);
        }

        let delay = self.rng.exponential(self.params.lambda);
        self.schedule(user, delay);
    }
}

/// Runs one replication from an empty system.
pub fn simulate_finite(
    params: &FiniteModelParams,
    options: &SimulationOptions,
    rng: &mut RandomStream,
) -> Result<DelayTrace> {
    params.packet.validate()?;
    match options.stop {
        StopRule::Departures(0) => return Err(Error::param("stop_after", "must be >= 1")),
        StopRule::Time(t) if !(t.is_finite() && t > 0.0) => {
            return Err(Error::param("stop_time", "must be finite and > 0"))
        }
        StopRule::UserDepartures { count: 0, .. } => {
            return Err(Error::param("stop_after", "must be >= 1"))
        }
        StopRule::UserDepartures { user, .. } if user >= params.users => {
            return Err(Error::UserOutOfRange {
                index: user,
                users: params.users,
            })
        }
        _ => {}
    }
    if params.users < 2 && (options.instrument.full_state || options.instrument.min_residual) {
        return Err(Error::Instrumentation(
            "full-state and minimum-residual samples need at least two users",
        ));
    }
    Engine::new(*params, options, rng).run(options)
}

/// Departure delays and transmission counts of one user (0-based index).
pub fn extract_per_user(trace: &DelayTrace, user: usize) -> Result<&UserSamples> {
    trace.per_user.get(user).ok_or(Error::UserOutOfRange {
        index: user,
        users: trace.users,
    })
}

/// Events-until-full samples that resolved before the run ended, plus the
/// number of departures whose window was cut off.
pub fn measure_nf(trace: &DelayTrace) -> Result<(Vec<u64>, usize)> {
    if trace.users < 2 {
        return Err(Error::Instrumentation(
            "full state is undefined for a single user",
        ));
    }
    let nf = trace.nf_samples.as_ref().ok_or(Error::Instrumentation(
        "full-state instrumentation was not enabled",
    ))?;
    let resolved: Vec<u64> = nf.iter().flatten().copied().collect();
    let dropped = nf.len() - resolved.len();
    Ok((resolved, dropped))
}

/// Smallest packet among the other users at each departure.
pub fn measure_min_residual(trace: &DelayTrace) -> Result<&[f64]> {
    if trace.users < 2 {
        return Err(Error::Instrumentation(
            "minimum residual needs at least two users",
        ));
    }
    trace.min_residual.as_deref().ok_or(Error::Instrumentation(
        "minimum-residual instrumentation was not enabled",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_params(m: usize, lambda: f64, nu: f64, mu: f64) -> FiniteModelParams {
        FiniteModelParams::new(m, lambda, nu, PacketDistribution::exponential(mu).unwrap()).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = PacketDistribution::exponential(1.0).unwrap();
        assert!(FiniteModelParams::new(0, 1.0, 1.0, p).is_err());
        assert!(FiniteModelParams::new(2, 0.0, 1.0, p).is_err());
        assert!(FiniteModelParams::new(2, 1.0, -1.0, p).is_err());
        let params = exp_params(2, 1.0, 1.0, 1.0);
        let mut s = RandomStream::new(1, 1);
        assert!(simulate_finite(&params, &SimulationOptions::departures(0), &mut s).is_err());
    }

    #[test]
    fn single_user_never_collides() {
        let params = exp_params(1, 1.0, 1.0, 1.0);
        let mut s = RandomStream::new(3, 0);
        let trace =
            simulate_finite(&params, &SimulationOptions::departures(100_000), &mut s).unwrap();
        assert_eq!(trace.len(), 100_000);
        assert!(trace.retx_counts.iter().all(|&n| n == 1));
        assert_eq!(trace.collisions, 0);
        let mean = trace.delays.iter().sum::<f64>() / trace.len() as f64;
        assert!((1.97..=2.03).contains(&mean), "mean delay {mean}");
        let owned = extract_per_user(&trace, 0).unwrap();
        assert_eq!(owned.delays.len(), trace.len());
        assert!(extract_per_user(&trace, 1).is_err());
    }

    #[test]
    fn single_user_instrumentation_is_an_error() {
        let params = exp_params(1, 1.0, 1.0, 1.0);
        let mut s = RandomStream::new(3, 0);
        let opts = SimulationOptions::departures(10).with_instrumentation(Instrumentation {
            full_state: true,
            ..Default::default()
        });
        assert!(matches!(
            simulate_finite(&params, &opts, &mut s),
            Err(Error::Instrumentation(_))
        ));
    }

    #[test]
    fn trace_structure() {
        let params = exp_params(4, 1.5, 0.25, 1.0);
        let mut s = RandomStream::new(9, 4);
        let opts = SimulationOptions::departures(5_000)
            .with_instrumentation(Instrumentation {
                full_state: true,
                min_residual: true,
                event_log: true,
            })
            .with_max_events(10_000_000);
        let trace = simulate_finite(&params, &opts, &mut s).unwrap();
        assert!(trace.departures.windows(2).all(|w| w[1] > w[0]));
        assert!(trace.delays.iter().all(|&t| t > 0.0));
        assert!(trace.retx_counts.iter().all(|&n| n >= 1));
        for (t, l) in trace.delays.iter().zip(&trace.packet_lengths) {
            assert!(t >= l);
        }
        let per_user_total: usize = trace.per_user.iter().map(|u| u.delays.len()).sum();
        assert_eq!(per_user_total, trace.len());
        let mut owners: Vec<usize> = trace
            .per_user
            .iter()
            .flat_map(|u| u.departure_index.iter().copied())
            .collect();
        owners.sort_unstable();
        assert!(owners.iter().copied().eq(0..trace.len()));
        let (nf, _) = measure_nf(&trace).unwrap();
        assert!(nf.iter().all(|&n| n >= 1));
        assert!(measure_min_residual(&trace)
            .unwrap()
            .iter()
            .all(|&l| l > 0.0));
    }

    #[test]
    fn channel_is_exclusive_and_packets_keep_their_length() {
        use alloc::collections::BTreeMap;
        let params = exp_params(5, 1.0, 0.2, 1.0);
        let mut s = RandomStream::new(17, 0);
        let opts = SimulationOptions::departures(3_000).with_instrumentation(Instrumentation {
            event_log: true,
            ..Default::default()
        });
        let trace = simulate_finite(&params, &opts, &mut s).unwrap();
        let log = trace.event_log.clone().unwrap();
        let mut lengths: BTreeMap<u64, f64> = BTreeMap::new();
        let mut successes: Vec<(f64, f64)> = Vec::new();
        for event in &log {
            match *event {
                ChannelEvent::TransmissionStart { packet, .. } => {
                    let len = *lengths.entry(packet.id).or_insert(packet.length);
                    assert_eq!(len, packet.length);
                }
                ChannelEvent::Departure {
                    time,
                    packet,
                    start,
                    ..
                } => {
                    assert_eq!(lengths[&packet.id], packet.length);
                    assert!((time - start - packet.length).abs() <= 1e-9 * time.max(1.0));
                    successes.push((start, time));
                }
                ChannelEvent::Collision { .. } => {}
            }
        }
        assert!(successes.windows(2).all(|w| w[1].0 >= w[0].1));
        let receiver_prefix_counts = successes.len();
        assert_eq!(receiver_prefix_counts, trace.len());
    }

    #[test]
    fn stops_on_a_users_departures() {
        let params = exp_params(3, 1.0, 0.3, 1.0);
        let mut s = RandomStream::new(8, 1);
        let trace =
            simulate_finite(&params, &SimulationOptions::user_departures(2, 4), &mut s).unwrap();
        assert_eq!(trace.per_user[2].delays.len(), 4);
        assert_eq!(*trace.departing_user.last().unwrap(), 2);
        let mut s = RandomStream::new(8, 1);
        assert!(
            simulate_finite(&params, &SimulationOptions::user_departures(3, 1), &mut s).is_err()
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let params = exp_params(3, 2.0 / 3.0, 2.0 / 3.0, 1.0);
        let run = || {
            let mut s = RandomStream::new(42, 7);
            simulate_finite(&params, &SimulationOptions::departures(2_000), &mut s).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn time_stop_and_event_budget() {
        let params = exp_params(2, 1.0, 1.0, 1.0);
        let mut s = RandomStream::new(5, 5);
        let trace = simulate_finite(&params, &SimulationOptions::until(500.0), &mut s).unwrap();
        assert_eq!(trace.horizon, 500.0);
        assert!(trace.departures.last().is_none_or(|&d| d <= 500.0));
        let mut s = RandomStream::new(5, 5);
        let err = simulate_finite(
            &params,
            &SimulationOptions::departures(1_000_000).with_max_events(100),
            &mut s,
        )
        .unwrap_err();
        assert_eq!(err, Error::EventBudget(100));
    }

    #[test]
    fn symmetric_users_share_departures() {
        let params = exp_params(2, 1.0, 0.5, 1.0);
        let mut s = RandomStream::new(12, 0);
        let trace =
            simulate_finite(&params, &SimulationOptions::departures(100_000), &mut s).unwrap();
        for u in 0..2 {
            let share =
                extract_per_user(&trace, u).unwrap().delays.len() as f64 / trace.len() as f64;
            assert!((0.47..=0.53).contains(&share), "share {share}");
        }
    }
}
