//! In-process message bus standing in for MPI.
//!
//! Every ordered rank pair has a FIFO queue per channel. Sends never block;
//! receives block until a message from the named source arrives. Data
//! messages and collectives travel on separate channels so they never
//! interleave. Messages a rank sends to itself bypass the bus.
//!
//! In sequential mode only the rank holding the baton runs. A rank that
//! blocks on an empty queue hands the baton to the next live rank in
//! round-robin order, which makes the interleaving deterministic.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Data = 0,
    Control = 1,
}

struct BusState {
    queues: Vec<VecDeque<Vec<u8>>>,
    aborted: Option<String>,
    finished: Vec<bool>,
    baton: usize,
    stalled: usize,
}

pub struct Bus {
    size: usize,
    sequential: bool,
    state: Mutex<BusState>,
    cv: Condvar,
    data_messages: AtomicU64,
}

impl Bus {
    pub fn new(size: usize, sequential: bool) -> Arc<Self> {
        assert!(size > 0, "a world needs at least one rank");
        Arc::new(Self {
            size,
            sequential,
            state: Mutex::new(BusState {
                queues: vec![VecDeque::new(); 2 * size * size],
                aborted: None,
                finished: vec![false; size],
                baton: 0,
                stalled: 0,
            }),
            cv: Condvar::new(),
            data_messages: AtomicU64::new(0),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Data messages that crossed the bus (self-messages excluded).
    pub fn data_messages(&self) -> u64 {
        self.data_messages.load(Ordering::Relaxed)
    }

    /// Poison the bus; every blocked or future receive fails.
    pub fn abort(&self, reason: impl Into<String>) {
        let mut st = self.lock();
        if st.aborted.is_none() {
            st.aborted = Some(reason.into());
        }
        self.cv.notify_all();
    }

    fn lock(&self) -> MutexGuard<'_, BusState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn queue(&self, ch: Channel, src: usize, dst: usize) -> usize {
        ((ch as usize) * self.size + src) * self.size + dst
    }

    fn pass_baton(&self, st: &mut BusState, from: usize) {
        for k in 1..=self.size {
            let r = (from + k) % self.size;
            if !st.finished[r] {
                st.baton = r;
                break;
            }
        }
        self.cv.notify_all();
    }
}

pub struct Endpoint {
    rank: usize,
    bus: Arc<Bus>,
    self_queues: [VecDeque<Vec<u8>>; 2],
    sent: u64,
}

impl Endpoint {
    pub fn new(rank: usize, bus: Arc<Bus>) -> Self {
        assert!(rank < bus.size, "rank {rank} out of range");
        Self {
            rank,
            bus,
            self_queues: [VecDeque::new(), VecDeque::new()],
            sent: 0,
        }
    }

    /// A single-rank endpoint on a private bus.
    pub fn solo() -> Self {
        Self::new(0, Bus::new(1, false))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.bus.size
    }

    pub fn bus(&self) -> &Arc<Bus> {
        &self.bus
    }

    /// Data messages this endpoint put on the bus.
    pub fn messages_sent(&self) -> u64 {
        self.sent
    }

    pub fn abort(&self, reason: impl Into<String>) {
        self.bus.abort(reason);
    }

    /// Wait for the baton (sequential mode only).
    pub fn begin(&self) {
        if !self.bus.sequential {
            return;
        }
        let mut st = self.bus.lock();
        while st.baton != self.rank && st.aborted.is_none() {
            st = self.bus.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }

    fn finish(&mut self) {
        let mut st = self.bus.lock();
        if st.finished[self.rank] {
            return;
        }
        st.finished[self.rank] = true;
        st.stalled = 0;
        if self.bus.sequential && st.baton == self.rank {
            self.bus.pass_baton(&mut st, self.rank);
        }
        self.bus.cv.notify_all();
    }

    fn send_on(&mut self, ch: Channel, dst: usize, msg: Vec<u8>) {
        if dst == self.rank {
            self.self_queues[ch as usize].push_back(msg);
            return;
        }
        assert!(dst < self.bus.size, "send to rank {dst} out of range");
        let q = self.bus.queue(ch, self.rank, dst);
        let mut st = self.bus.lock();
        st.queues[q].push_back(msg);
        if ch == Channel::Data {
            self.bus.data_messages.fetch_add(1, Ordering::Relaxed);
            self.sent += 1;
        }
        self.bus.cv.notify_all();
    }

    fn recv_on(&mut self, ch: Channel, src: usize) -> Result<Vec<u8>> {
        if src == self.rank {
            return self.self_queues[ch as usize]
                .pop_front()
                .ok_or_else(|| Error::protocol(self.rank, "receive from self with nothing sent"));
        }
        assert!(src < self.bus.size, "receive from rank {src} out of range");
        let q = self.bus.queue(ch, src, self.rank);
        let mut st = self.bus.lock();
        loop {
            if let Some(m) = st.queues[q].pop_front() {
                st.stalled = 0;
                return Ok(m);
            }
            if let Some(reason) = &st.aborted {
                return Err(Error::Aborted(reason.clone()));
            }
            if st.finished[src] {
                return Err(Error::Aborted(format!(
                    "rank {} waits on rank {src}, which has exited",
                    self.rank
                )));
            }
            if self.bus.sequential {
                st.stalled += 1;
                if st.stalled > 2 * self.bus.size {
                    st.aborted = Some("deadlock: every rank is blocked".into());
                    self.bus.cv.notify_all();
                    continue;
                }
                self.bus.pass_baton(&mut st, self.rank);
                while st.baton != self.rank && st.aborted.is_none() {
                    st = self.bus.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                }
            } else {
                st = self.bus.cv.wait(st).unwrap_or_else(|e| e.into_inner());
            }
        }
    }

    pub fn send(&mut self, dst: usize, msg: Vec<u8>) {
        self.send_on(Channel::Data, dst, msg)
    }

    pub fn recv(&mut self, src: usize) -> Result<Vec<u8>> {
        self.recv_on(Channel::Data, src)
    }

    /// Every rank's contribution, in rank order.
    pub fn allgather(&mut self, msg: &[u8]) -> Result<Vec<Vec<u8>>> {
        for dst in 0..self.size() {
            self.send_on(Channel::Control, dst, msg.to_vec());
        }
        (0..self.size()).map(|src| self.recv_on(Channel::Control, src)).collect()
    }

    pub fn barrier(&mut self) -> Result<()> {
        self.allgather(&[]).map(|_| ())
    }

    pub fn allgather_f64(&mut self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        Ok(self
            .allgather(&bytes)?
            .into_iter()
            .map(|b| b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            .collect())
    }

    pub fn allgather_u64(&mut self, v: &[u64]) -> Result<Vec<Vec<u64>>> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        Ok(self
            .allgather(&bytes)?
            .into_iter()
            .map(|b| b.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
            .collect())
    }

    /// Elementwise sum, accumulated in rank order on every rank.
    pub fn allreduce_sum_f64(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        let all = self.allgather_f64(v)?;
        let mut out = vec![0.0; v.len()];
        for part in &all {
            for (o, x) in out.iter_mut().zip(part) {
                *o += x;
            }
        }
        Ok(out)
    }

    pub fn allreduce_sum_u64(&mut self, v: &[u64]) -> Result<Vec<u64>> {
        let all = self.allgather_u64(v)?;
        let mut out = vec![0u64; v.len()];
        for part in &all {
            for (o, x) in out.iter_mut().zip(part) {
                *o += x;
            }
        }
        Ok(out)
    }

    pub fn allreduce_max_f64(&mut self, v: f64) -> Result<f64> {
        Ok(self.allgather_f64(&[v])?.into_iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max))
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.bus.abort(format!("rank {} panicked", self.rank));
        }
        self.finish();
    }
}

/// Run `f` on `size` ranks, each on its own thread with its own endpoint.
///
/// If any rank fails, the bus is poisoned so blocked peers return; the
/// reported error is the first failure that is not a consequence of the
/// abort.
pub fn run_ranks<T, F>(size: usize, sequential: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Endpoint) -> Result<T> + Sync,
{
    let bus = Bus::new(size, sequential);
    let results: Vec<Result<T>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..size)
            .map(|rank| {
                let bus = bus.clone();
                let f = &f;
                std::thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(s, move || {
                        let ep = Endpoint::new(rank, bus.clone());
                        ep.begin();
                        let r = f(ep);
                        if let Err(e) = &r {
                            bus.abort(format!("rank {rank} failed: {e}"));
                        }
                        r
                    })
                    .expect("failed to spawn rank thread")
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(rank, h)| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Aborted(format!("rank {rank} panicked"))))
            })
            .collect()
    });
    let mut out = Vec::with_capacity(size);
    let mut first_abort = None;
    let mut root = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e @ Error::Aborted(_)) => {
                first_abort.get_or_insert(e);
            }
            Err(e) => {
                root.get_or_insert(e);
            }
        }
    }
    if let Some(e) = root.or(first_abort) {
        return Err(e);
    }
    Ok(out)
}
