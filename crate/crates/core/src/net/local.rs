use std::sync::mpsc::{channel, Receiver, Sender};

use super::{Frame, Link};
use crate::error::{Error, Result};
use crate::party::PartyId;

/// In-process endpoint backed by unbounded channels.
pub struct LocalLink {
    me: PartyId,
    tx: [Option<Sender<Frame>>; 4],
    rx: [Option<Receiver<Frame>>; 4],
}

/// A fully connected set of four in-process endpoints.
pub fn local_links() -> [LocalLink; 4] {
    let mut links = PartyId::ALL.map(|me| LocalLink { me, tx: Default::default(), rx: Default::default() });
    for from in 0..4 {
        for to in 0..4 {
            if from != to {
                let (tx, rx) = channel();
                links[from].tx[to] = Some(tx);
                links[to].rx[from] = Some(rx);
            }
        }
    }
    links
}

impl Link for LocalLink {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()> {
        let tx = self.tx[to.index()].as_ref().ok_or(Error::ChannelClosed { from: self.me, to })?;
        tx.send(frame).map_err(|_| Error::ChannelClosed { from: self.me, to })
    }

    fn recv(&mut self, from: PartyId) -> Result<Frame> {
        let rx = self.rx[from.index()].as_ref().ok_or(Error::ChannelClosed { from, to: self.me })?;
        rx.recv().map_err(|_| Error::ChannelClosed { from, to: self.me })
    }
}
