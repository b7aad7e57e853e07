//! In-process transport: one OS thread per worker, one channel per ordered
//! pair of workers.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use crn_smc::collective::{Communicator, Envelope, ProtocolError, Transport};

pub struct ChannelTransport {
    rank: usize,
    outboxes: Vec<Sender<Envelope>>,
    inboxes: Vec<Receiver<Envelope>>,
}

/// Fully connected transports for `p` workers, indexed by rank.
pub fn mesh(p: usize) -> Vec<ChannelTransport> {
    // links[from][to]
    let mut senders: Vec<Vec<Option<Sender<Envelope>>>> = (0..p).map(|_| (0..p).map(|_| None).collect()).collect();
    let mut receivers: Vec<Vec<Option<Receiver<Envelope>>>> = (0..p).map(|_| (0..p).map(|_| None).collect()).collect();
    for from in 0..p {
        for to in 0..p {
            let (tx, rx) = channel();
            senders[from][to] = Some(tx);
            receivers[to][from] = Some(rx);
        }
    }
    senders
        .into_iter()
        .zip(receivers)
        .enumerate()
        .map(|(rank, (out, inb))| ChannelTransport {
            rank,
            outboxes: out.into_iter().map(Option::unwrap).collect(),
            inboxes: inb.into_iter().map(Option::unwrap).collect(),
        })
        .collect()
}

impl Transport for ChannelTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.outboxes.len()
    }

    fn send(&mut self, to: usize, envelope: Envelope) -> Result<(), ProtocolError> {
        let link = self.outboxes.get(to).ok_or(ProtocolError::Topology("no such worker"))?;
        link.send(envelope).map_err(|_| ProtocolError::Disconnected { peer: to })
    }

    fn recv(&mut self, from: usize) -> Result<Envelope, ProtocolError> {
        let link = self.inboxes.get(from).ok_or(ProtocolError::Topology("no such worker"))?;
        link.recv().map_err(|_| ProtocolError::Disconnected { peer: from })
    }
}

/// Runs `work` on `p` scoped threads, each with its own communicator, and
/// returns the results in rank order.
///
/// A worker that returns early drops its channels, so peers blocked on it
/// see [`ProtocolError::Disconnected`] instead of hanging.
pub fn run_parallel<R, F>(p: usize, work: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut Communicator<ChannelTransport>) -> R + Sync,
{
    let work = &work;
    thread::scope(|s| {
        let handles: Vec<_> = mesh(p).into_iter().map(|t| s.spawn(move || work(&mut Communicator::new(t)))).collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    })
}
