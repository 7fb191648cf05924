//! In-process round-based transport.
//!
//! Each ordered pair of parties gets one unbounded FIFO channel. A message is
//! tagged with the sender's round counter; the receiver checks the tag, so a
//! desynchronised schedule is an error rather than silent corruption.

use std::fmt::Write as _;

use futures::channel::mpsc::{unbounded, UnboundedReceiver, UnboundedSender};
use futures::StreamExt;

use super::MpcError;

#[derive(Debug)]
pub struct Message {
    pub round: u64,
    pub words: Vec<u64>,
}

/// Per-party communication counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommStats {
    pub rounds: u64,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

impl CommStats {
    pub fn since(&self, earlier: &CommStats) -> CommStats {
        CommStats {
            rounds: self.rounds - earlier.rounds,
            messages_sent: self.messages_sent - earlier.messages_sent,
            bytes_sent: self.bytes_sent - earlier.bytes_sent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub round: u64,
    pub label: String,
    pub messages: u64,
    pub bytes: u64,
}

/// Line-oriented trace: `round=<r> op=<label> msgs=<n> bytes=<b>`.
pub fn format_trace(entries: &[TraceEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        let _ = writeln!(s, "round={} op={} msgs={} bytes={}", e.round, e.label, e.messages, e.bytes);
    }
    s
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceEntry>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut e = TraceEntry {
                round: 0,
                label: String::new(),
                messages: 0,
                bytes: 0,
            };
            for field in line.split_whitespace() {
                let (k, v) = field.split_once('=').ok_or_else(|| format!("bad field {field:?}"))?;
                let num = || v.parse::<u64>().map_err(|e| format!("{k}: {e}"));
                match k {
                    "round" => e.round = num()?,
                    "op" => e.label = v.to_string(),
                    "msgs" => e.messages = num()?,
                    "bytes" => e.bytes = num()?,
                    _ => return Err(format!("unknown key {k:?}")),
                }
            }
            Ok(e)
        })
        .collect()
}

pub struct Endpoint {
    id: usize,
    parties: usize,
    outbox: Vec<Option<UnboundedSender<Message>>>,
    inbox: Vec<Option<UnboundedReceiver<Message>>>,
    round: u64,
    stats: CommStats,
    trace: Option<Vec<TraceEntry>>,
    view: Option<Vec<(usize, Vec<u64>)>>,
}

/// Fully connected network of `parties` endpoints.
pub fn network(parties: usize) -> Vec<Endpoint> {
    let mut outboxes: Vec<Vec<Option<UnboundedSender<Message>>>> =
        (0..parties).map(|_| (0..parties).map(|_| None).collect()).collect();
    let mut inboxes: Vec<Vec<Option<UnboundedReceiver<Message>>>> =
        (0..parties).map(|_| (0..parties).map(|_| None).collect()).collect();
    for from in 0..parties {
        for to in 0..parties {
            if from != to {
                let (tx, rx) = unbounded();
                outboxes[from][to] = Some(tx);
                inboxes[to][from] = Some(rx);
            }
        }
    }
    outboxes
        .into_iter()
        .zip(inboxes)
        .enumerate()
        .map(|(id, (outbox, inbox))| Endpoint {
            id,
            parties,
            outbox,
            inbox,
            round: 0,
            stats: CommStats::default(),
            trace: None,
            view: None,
        })
        .collect()
}

impl Endpoint {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    /// Drops all outgoing channels; peers see "peer hung up" on their next receive.
    pub fn close(&mut self) {
        for tx in &mut self.outbox {
            *tx = None;
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        self.trace.take().unwrap_or_default()
    }

    /// Records every received message as `(sender, words)`. Test instrumentation.
    pub fn enable_view_log(&mut self) {
        self.view.get_or_insert_with(Vec::new);
    }

    pub fn take_view(&mut self) -> Vec<(usize, Vec<u64>)> {
        self.view.take().unwrap_or_default()
    }

    fn send(&mut self, to: usize, words: Vec<u64>) -> Result<(u64, u64), MpcError> {
        let bytes = 8 * words.len() as u64;
        let tx = self.outbox[to].as_ref().ok_or(MpcError::Transport("no channel to peer"))?;
        tx.unbounded_send(Message {
            round: self.round,
            words,
        })
        .map_err(|_| MpcError::Transport("peer hung up"))?;
        self.stats.messages_sent += 1;
        self.stats.bytes_sent += bytes;
        Ok((1, bytes))
    }

    async fn recv(&mut self, from: usize) -> Result<Vec<u64>, MpcError> {
        let rx = self.inbox[from].as_mut().ok_or(MpcError::Transport("no channel to peer"))?;
        let msg = rx.next().await.ok_or(MpcError::Transport("peer hung up"))?;
        if msg.round != self.round {
            return Err(MpcError::Desync {
                party: self.id,
                expected: self.round,
                got: msg.round,
            });
        }
        if let Some(v) = self.view.as_mut() {
            v.push((from, msg.words.clone()));
        }
        Ok(msg.words)
    }

    fn finish_round(&mut self, label: &str, msgs: u64, bytes: u64) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEntry {
                round: self.round,
                label: label.to_string(),
                messages: msgs,
                bytes,
            });
        }
        self.round += 1;
        self.stats.rounds += 1;
    }

    /// Sends `words` to every peer and returns all parties' vectors, own included,
    /// indexed by party id.
    pub async fn broadcast(&mut self, label: &str, words: Vec<u64>) -> Result<Vec<Vec<u64>>, MpcError> {
        let (mut msgs, mut bytes) = (0, 0);
        for to in 0..self.parties {
            if to != self.id {
                let (m, b) = self.send(to, words.clone())?;
                msgs += m;
                bytes += b;
            }
        }
        let mut all = Vec::with_capacity(self.parties);
        for from in 0..self.parties {
            if from == self.id {
                all.push(Vec::new());
            } else {
                all.push(self.recv(from).await?);
            }
        }
        all[self.id] = words;
        self.finish_round(label, msgs, bytes);
        Ok(all)
    }

    /// One round in which `owner` sends `outgoing[j]` to each peer `j` and
    /// everybody else receives one message from `owner`.
    pub async fn scatter(
        &mut self,
        label: &str,
        owner: usize,
        outgoing: Option<Vec<Vec<u64>>>,
    ) -> Result<Option<Vec<u64>>, MpcError> {
        let (mut msgs, mut bytes) = (0, 0);
        let received = if self.id == owner {
            let outgoing = outgoing.ok_or(MpcError::Transport("owner has nothing to scatter"))?;
            for (to, words) in outgoing.into_iter().enumerate() {
                if to != self.id {
                    let (m, b) = self.send(to, words)?;
                    msgs += m;
                    bytes += b;
                }
            }
            None
        } else {
            Some(self.recv(owner).await?)
        };
        self.finish_round(label, msgs, bytes);
        Ok(received)
    }
}
