//! One-hop message passing between agents with optional packet-drop injection.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smm::Mode;

use crate::{FilterError, PartitionLayout};

/// One forwarded sensor reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    /// Index of the sensor in the road's sensor layout.
    pub sensor: usize,
    /// Measured density.
    pub value: f64,
    /// Noise variance reported by the owner.
    pub variance: f64,
}

/// Data an agent sends to a neighbor after prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangePacket {
    /// Sending section.
    pub sender: usize,
    /// Receiving section.
    pub recipient: usize,
    /// Readings of the sender's own sensors.
    pub readings: Vec<Reading>,
    /// Sender's prior estimate restricted to the shared cells.
    pub overlap_prior: DVector<f64>,
    /// Mode the sender used for prediction.
    pub mode: Mode,
}

/// A message addressed to one neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T> {
    /// Sending section.
    pub sender: usize,
    /// Receiving section.
    pub recipient: usize,
    /// Message body.
    pub payload: T,
}

/// Packet-loss model for data packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DropPolicy {
    /// Every packet is delivered.
    #[default]
    None,
    /// Each data packet is dropped independently with probability `p`.
    Random { p: f64, seed: u64 },
    /// Listed `(step, sender, recipient)` packets are dropped.
    Scheduled { drops: Vec<(usize, usize, usize)> },
}

/// Delivery of messages over the path graph of a layout.
#[derive(Debug, Clone)]
pub struct Network {
    neighbors: Vec<Vec<usize>>,
    policy: DropPolicy,
    scheduled: BTreeSet<(usize, usize, usize)>,
    rng: ChaCha8Rng,
    dropped: Vec<(usize, usize, usize)>,
}

impl Network {
    /// Network over the topology of `layout`.
    pub fn new(layout: &PartitionLayout, policy: DropPolicy) -> Result<Self, FilterError> {
        let (seed, scheduled) = match &policy {
            DropPolicy::Random { p, seed } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(FilterError::Config(format!("drop probability {p} is outside [0, 1]")));
                }
                (*seed, BTreeSet::new())
            }
            DropPolicy::Scheduled { drops } => (0, drops.iter().copied().collect()),
            DropPolicy::None => (0, BTreeSet::new()),
        };
        Ok(Self {
            neighbors: (0..layout.n_sections()).map(|i| layout.neighbors(i)).collect(),
            policy,
            scheduled,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dropped: Vec::new(),
        })
    }

    /// Delivers `messages` sent at step `k`, returning each agent's inbox
    /// sorted by sender. Lossy delivery applies the drop policy; control
    /// messages use reliable delivery.
    pub fn deliver<T>(&mut self, k: usize, messages: Vec<Envelope<T>>, lossy: bool) -> Result<Vec<Vec<Envelope<T>>>, FilterError> {
        let mut inbox: Vec<Vec<Envelope<T>>> = (0..self.neighbors.len()).map(|_| Vec::new()).collect();
        for m in messages {
            if m.recipient >= self.neighbors.len() || !self.neighbors[m.sender].contains(&m.recipient) {
                return Err(FilterError::NotNeighbor(m.sender, m.recipient));
            }
            if lossy && self.drops(k, m.sender, m.recipient) {
                self.dropped.push((k, m.sender, m.recipient));
                continue;
            }
            inbox[m.recipient].push(m);
        }
        for b in &mut inbox {
            b.sort_by_key(|m| m.sender);
        }
        Ok(inbox)
    }

    fn drops(&mut self, k: usize, sender: usize, recipient: usize) -> bool {
        match self.policy {
            DropPolicy::None => false,
            DropPolicy::Random { p, .. } => self.rng.gen::<f64>() < p,
            DropPolicy::Scheduled { .. } => self.scheduled.contains(&(k, sender, recipient)),
        }
    }

    /// Log of dropped `(step, sender, recipient)` packets.
    pub fn dropped(&self) -> &[(usize, usize, usize)] {
        &self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(sender: usize, recipient: usize) -> Envelope<u8> {
        Envelope { sender, recipient, payload: 0 }
    }

    #[test]
    fn seven_sections_route_one_hop() {
        let l = PartitionLayout::uniform(136, 7, 28, 10).unwrap();
        let mut net = Network::new(&l, DropPolicy::None).unwrap();
        let msgs: Vec<_> = (0..7).flat_map(|i| l.neighbors(i).into_iter().map(move |j| env(i, j))).collect();
        let inbox = net.deliver(0, msgs, true).unwrap();
        let senders: Vec<_> = inbox[3].iter().map(|m| m.sender).collect();
        assert_eq!(senders, vec![2, 4]);
        assert!(matches!(net.deliver(0, vec![env(0, 2)], true), Err(FilterError::NotNeighbor(0, 2))));
    }

    #[test]
    fn scheduled_drop_only_hits_lossy_rounds() {
        let l = PartitionLayout::uniform(6, 2, 4, 2).unwrap();
        let mut net = Network::new(&l, DropPolicy::Scheduled { drops: vec![(5, 1, 0)] }).unwrap();
        assert!(net.deliver(5, vec![env(1, 0)], true).unwrap()[0].is_empty());
        assert_eq!(net.deliver(5, vec![env(1, 0)], false).unwrap()[0].len(), 1);
        assert_eq!(net.deliver(4, vec![env(1, 0)], true).unwrap()[0].len(), 1);
        assert_eq!(net.dropped(), &[(5, 1, 0)]);
    }
}
