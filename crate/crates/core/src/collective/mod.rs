//! Deterministic collectives for bulk-synchronous workers.
//!
//! `N` items are split into `P` contiguous shards of `N/P` (both powers of
//! two). Workers exchange [`Envelope`]s through a [`Transport`]; the
//! transport itself (threads, processes, sockets) is supplied by the caller.
//! Every collective combines partial results along a fixed rank-ordered
//! binary tree, so its output is bitwise identical to the serial reference
//! in [`tree`] for any `P`.

pub mod tree;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use tree::BlockSums;
pub use tree::ReduceOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Reduce,
    Broadcast,
    Gather,
    Exchange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub tag: Tag,
    pub seq: u64,
    pub payload: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("worker {from} sent {got:?}#{got_seq} while {expected:?}#{expected_seq} was expected")]
    Mismatch { from: usize, expected: Tag, expected_seq: u64, got: Tag, got_seq: u64 },
    #[error("lost connection to worker {peer}")]
    Disconnected { peer: usize },
    #[error("invalid topology: {0}")]
    Topology(&'static str),
    #[error("malformed payload from worker {from}")]
    Payload { from: usize },
}

/// Point-to-point message passing between the `size()` workers.
pub trait Transport {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;
    fn send(&mut self, to: usize, envelope: Envelope) -> Result<(), ProtocolError>;
    /// Blocks until the next message from `from` arrives.
    fn recv(&mut self, from: usize) -> Result<Envelope, ProtocolError>;
}

/// Transport for a single worker; no messages are ever exchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct Solo;

impl Transport for Solo {
    fn rank(&self) -> usize {
        0
    }
    fn size(&self) -> usize {
        1
    }
    fn send(&mut self, to: usize, _: Envelope) -> Result<(), ProtocolError> {
        Err(ProtocolError::Disconnected { peer: to })
    }
    fn recv(&mut self, from: usize) -> Result<Envelope, ProtocolError> {
        Err(ProtocolError::Disconnected { peer: from })
    }
}

/// Shard layout of `n` items over `p` workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerTopology {
    pub n: usize,
    pub p: usize,
    pub rank: usize,
}

impl WorkerTopology {
    pub fn new(n: usize, p: usize, rank: usize) -> Result<Self, ProtocolError> {
        if !n.is_power_of_two() || !p.is_power_of_two() {
            return Err(ProtocolError::Topology("item and worker counts must be powers of two"));
        }
        if p > n {
            return Err(ProtocolError::Topology("more workers than items"));
        }
        if rank >= p {
            return Err(ProtocolError::Topology("rank out of range"));
        }
        Ok(Self { n, p, rank })
    }

    pub fn shard_len(&self) -> usize {
        self.n / self.p
    }

    pub fn shard(&self) -> Range<usize> {
        let s = self.shard_len();
        self.rank * s..(self.rank + 1) * s
    }
}

/// Collective operations over a [`Transport`].
///
/// All workers must issue the same sequence of collective calls; each call
/// carries a sequence number and a mismatch surfaces as
/// [`ProtocolError::Mismatch`].
pub struct Communicator<T: Transport> {
    transport: T,
    seq: u64,
}

impl<T: Transport> Communicator<T> {
    pub fn new(transport: T) -> Self {
        Self { transport, seq: 0 }
    }

    pub fn rank(&self) -> usize {
        self.transport.rank()
    }

    pub fn size(&self) -> usize {
        self.transport.size()
    }

    pub fn into_inner(self) -> T {
        self.transport
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn send(&mut self, to: usize, tag: Tag, seq: u64, payload: Vec<f64>) -> Result<(), ProtocolError> {
        self.transport.send(to, Envelope { tag, seq, payload })
    }

    fn recv(&mut self, from: usize, tag: Tag, seq: u64) -> Result<Vec<f64>, ProtocolError> {
        let env = self.transport.recv(from)?;
        if env.tag != tag || env.seq != seq {
            return Err(ProtocolError::Mismatch { from, expected: tag, expected_seq: seq, got: env.tag, got_seq: env.seq });
        }
        Ok(env.payload)
    }

    /// Element-wise all-reduce of per-worker partials along the rank tree
    /// `((r0 ∘ r1) ∘ (r2 ∘ r3)) ∘ …`, then broadcast back down.
    pub fn allreduce(&mut self, local: Vec<f64>, op: ReduceOp) -> Result<Vec<f64>, ProtocolError> {
        let seq = self.next_seq();
        let (rank, size) = (self.rank(), self.size());
        let width = local.len();
        let mut acc = local;
        let mut step = 1;
        while step < size {
            if rank % (2 * step) == 0 {
                let right = self.recv(rank + step, Tag::Reduce, seq)?;
                if right.len() != width {
                    return Err(ProtocolError::Payload { from: rank + step });
                }
                for (a, b) in acc.iter_mut().zip(right) {
                    *a = op.apply(*a, b);
                }
            } else {
                self.send(rank - step, Tag::Reduce, seq, acc.clone())?;
                break;
            }
            step *= 2;
        }
        self.broadcast_from_root(acc, seq)
    }

    /// Root's value travels back down the same tree.
    fn broadcast_from_root(&mut self, mut value: Vec<f64>, seq: u64) -> Result<Vec<f64>, ProtocolError> {
        let (rank, size) = (self.rank(), self.size());
        if size == 1 {
            return Ok(value);
        }
        // Lowest set bit of the rank is the level at which it received from its parent.
        let mut step = if rank == 0 { size } else { 1 << rank.trailing_zeros() };
        if rank != 0 {
            value = self.recv(rank - step, Tag::Broadcast, seq)?;
        }
        step /= 2;
        while step >= 1 {
            if rank + step < size {
                self.send(rank + step, Tag::Broadcast, seq, value.clone())?;
            }
            step /= 2;
        }
        Ok(value)
    }

    /// Pairwise sum of `local` (this worker's shard), replicated on all workers.
    pub fn tree_reduce_sum(&mut self, local: &[f64]) -> Result<f64, ProtocolError> {
        Ok(self.allreduce(vec![tree::pairwise_sum(local)], ReduceOp::Sum)?[0])
    }

    pub fn tree_reduce_max(&mut self, local: &[f64]) -> Result<f64, ProtocolError> {
        Ok(self.allreduce(vec![tree::pairwise(local, ReduceOp::Max)], ReduceOp::Max)?[0])
    }

    /// Column-wise pairwise reduction of a row-major shard of `width`-wide rows.
    pub fn tree_reduce_rows(&mut self, local: &[f64], width: usize, op: ReduceOp) -> Result<Vec<f64>, ProtocolError> {
        self.allreduce(tree::pairwise_rows(local, width, op), op)
    }

    /// Recursive-doubling all-gather of equal-length blocks, in rank order.
    pub fn allgather(&mut self, local: Vec<f64>) -> Result<Vec<Vec<f64>>, ProtocolError> {
        let seq = self.next_seq();
        let (rank, size) = (self.rank(), self.size());
        let width = local.len();
        // `held` covers ranks [base, base + held.len()/width)
        let mut held = local;
        let mut base = rank;
        let mut step = 1;
        while step < size {
            let partner = rank ^ step;
            self.send(partner, Tag::Gather, seq, held.clone())?;
            let theirs = self.recv(partner, Tag::Gather, seq)?;
            if theirs.len() != held.len() {
                return Err(ProtocolError::Payload { from: partner });
            }
            if partner < rank {
                let mut merged = theirs;
                merged.extend_from_slice(&held);
                held = merged;
                base -= step;
            } else {
                held.extend_from_slice(&theirs);
            }
            step *= 2;
        }
        debug_assert_eq!(base, 0);
        Ok(if width == 0 { vec![Vec::new(); size] } else { held.chunks(width).map(<[f64]>::to_vec).collect() })
    }

    /// Sends `outgoing[w]` to every worker `w` and returns what each sent here.
    pub fn alltoallv(&mut self, mut outgoing: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, ProtocolError> {
        let seq = self.next_seq();
        let (rank, size) = (self.rank(), self.size());
        if outgoing.len() != size {
            return Err(ProtocolError::Topology("one outgoing buffer per worker required"));
        }
        let own = core::mem::take(&mut outgoing[rank]);
        for (w, buf) in outgoing.into_iter().enumerate() {
            if w != rank {
                self.send(w, Tag::Exchange, seq, buf)?;
            }
        }
        let mut incoming = Vec::with_capacity(size);
        for w in 0..size {
            incoming.push(if w == rank { Vec::new() } else { self.recv(w, Tag::Exchange, seq)? });
        }
        incoming[rank] = own;
        Ok(incoming)
    }

    /// Canonical cumulative weights for this worker's shard (see
    /// [`tree::cumulative`]) plus the global total, computed from two
    /// all-gathers of one value per worker.
    pub fn parallel_cumsum(&mut self, local: &[f64]) -> Result<ShardCumsum, ProtocolError> {
        let rank = self.rank();
        let blocks = BlockSums::new(local);
        let tops: Vec<f64> = self.allgather(vec![blocks.total()])?.into_iter().map(|v| v[0]).collect();
        let top_blocks = BlockSums::new(&tops);
        let offset = top_blocks.fold_prefix(0.0, rank);
        let total = top_blocks.total();

        let mut inclusive: Vec<f64> = Vec::with_capacity(local.len());
        let mut local_max = f64::NEG_INFINITY;
        for (i, &w) in local.iter().enumerate() {
            let v = blocks.fold_prefix(offset, i) + w;
            local_max = local_max.max(v);
            inclusive.push(local_max);
        }
        let maxima: Vec<f64> = self.allgather(vec![local_max])?.into_iter().map(|v| v[0]).collect();
        let mut shard_max = Vec::with_capacity(maxima.len());
        let mut run = f64::NEG_INFINITY;
        for m in maxima {
            run = run.max(m);
            shard_max.push(run);
        }
        let before = if rank == 0 { f64::NEG_INFINITY } else { shard_max[rank - 1] };
        for c in &mut inclusive {
            *c = c.max(before);
        }
        Ok(ShardCumsum { cumulative: inclusive, shard_max, total })
    }

    /// Multinomial resampling of a sharded population.
    ///
    /// `weights` are this shard's non-negative weights, `uniforms` the
    /// `(0, 1]` draws for this shard's output slots and `items` the encoded
    /// samples (one row per local item). Output slot `i` takes the item at the
    /// smallest global index whose cumulative weight reaches `u_i · total`,
    /// which is exactly [`tree::multinomial_parents`] on the full population.
    pub fn parallel_resample(&mut self, weights: &[f64], uniforms: &[f64], items: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ProtocolError> {
        let size = self.size();
        if weights.len() != items.len() || uniforms.len() != items.len() {
            return Err(ProtocolError::Topology("shard buffers disagree in length"));
        }
        let cs = self.parallel_cumsum(weights)?;
        let targets: Vec<f64> = uniforms.iter().map(|&u| u * cs.total).collect();
        let owners: Vec<usize> = targets.iter().map(|&t| tree::select(&cs.shard_max, t)).collect();

        let mut requests = vec![Vec::new(); size];
        for (&t, &o) in targets.iter().zip(&owners) {
            requests[o].push(t);
        }
        let asked = self.alltoallv(requests)?;
        let mut replies = Vec::with_capacity(size);
        for wanted in asked {
            let mut out = Vec::new();
            for t in wanted {
                out.extend_from_slice(&items[tree::select(&cs.cumulative, t)]);
            }
            replies.push(out);
        }
        let answered = self.alltoallv(replies)?;

        let width = items.first().map_or(0, Vec::len);
        let mut cursor = vec![0usize; size];
        let mut result = Vec::with_capacity(items.len());
        for &o in &owners {
            let start = cursor[o] * width;
            let row = answered[o].get(start..start + width).ok_or(ProtocolError::Payload { from: o })?;
            result.push(row.to_vec());
            cursor[o] += 1;
        }
        Ok(result)
    }
}

/// This worker's slice of the global cumulative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardCumsum {
    pub cumulative: Vec<f64>,
    /// Cumulative weight at the end of each worker's shard.
    pub shard_max: Vec<f64>,
    pub total: f64,
}
