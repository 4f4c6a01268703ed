use std::io::{BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{Frame, Kind, Link, Phase};
use crate::error::{Error, Result};
use crate::party::PartyId;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(20);

/// Endpoint over localhost TCP. Frames are a 4-byte big-endian length,
/// then phase and kind bytes, then the body. Each outgoing connection has
/// its own writer thread so a large send never blocks on a peer that is
/// itself busy sending.
pub struct TcpLink {
    me: PartyId,
    writers: [Option<Sender<Vec<u8>>>; 4],
    readers: [Option<BufReader<TcpStream>>; 4],
    pumps: Vec<JoinHandle<()>>,
}

impl TcpLink {
    /// Connects to lower-numbered parties and accepts higher-numbered ones.
    pub fn establish(me: PartyId, listener: TcpListener, addrs: &[SocketAddr; 4]) -> Result<TcpLink> {
        let mut streams: [Option<TcpStream>; 4] = Default::default();
        for peer in PartyId::ALL.into_iter().filter(|p| *p < me) {
            let mut s = connect_retry(addrs[peer.index()])?;
            s.write_all(&[me as u8])?;
            streams[peer.index()] = Some(s);
        }
        for _ in (me.index() + 1)..4 {
            let (mut s, _) = listener.accept()?;
            let mut id = [0u8; 1];
            s.read_exact(&mut id)?;
            let peer = PartyId::from_index(id[0] as usize)
                .filter(|p| *p > me)
                .ok_or_else(|| Error::InvalidArgument(format!("bad handshake byte {}", id[0])))?;
            streams[peer.index()] = Some(s);
        }
        let mut link = TcpLink { me, writers: Default::default(), readers: Default::default(), pumps: Vec::new() };
        for (i, s) in streams.into_iter().enumerate() {
            let Some(s) = s else { continue };
            s.set_nodelay(true)?;
            let mut w = s.try_clone()?;
            let (tx, rx) = channel::<Vec<u8>>();
            let pump = thread::spawn(move || {
                for buf in rx {
                    if w.write_all(&buf).is_err() {
                        break;
                    }
                }
                let _ = w.shutdown(Shutdown::Write);
            });
            link.pumps.push(pump);
            link.writers[i] = Some(tx);
            link.readers[i] = Some(BufReader::new(s));
        }
        Ok(link)
    }

    /// Joins a session whose party i listens on `base_port + i`.
    pub fn connect(me: PartyId, host: &str, base_port: u16) -> Result<TcpLink> {
        let addrs = addrs_for(host, base_port)?;
        let listener = TcpListener::bind(addrs[me.index()])?;
        TcpLink::establish(me, listener, &addrs)
    }
}

fn addrs_for(host: &str, base_port: u16) -> Result<[SocketAddr; 4]> {
    let mut out = [SocketAddr::from(([127, 0, 0, 1], 0)); 4];
    for (i, a) in out.iter_mut().enumerate() {
        *a = format!("{host}:{}", base_port as usize + i)
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("address: {e}")))?;
    }
    Ok(out)
}

fn connect_retry(addr: SocketAddr) -> Result<TcpStream> {
    let start = Instant::now();
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) if start.elapsed() > CONNECT_TIMEOUT => return Err(e.into()),
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

/// Four connected endpoints on localhost, for running every party in one
/// process over real sockets. `base_port` of `None` picks free ports.
pub fn tcp_links(base_port: Option<u16>) -> Result<[TcpLink; 4]> {
    let listeners: Vec<TcpListener> = (0..4)
        .map(|i| TcpListener::bind(("127.0.0.1", base_port.map_or(0, |b| b + i as u16))))
        .collect::<std::io::Result<_>>()?;
    let mut addrs = [SocketAddr::from(([127, 0, 0, 1], 0)); 4];
    for (a, l) in addrs.iter_mut().zip(&listeners) {
        *a = l.local_addr()?;
    }
    let handles: Vec<_> = listeners
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let me = PartyId::from_index(i).unwrap();
            thread::spawn(move || TcpLink::establish(me, l, &addrs))
        })
        .collect();
    let mut links = Vec::with_capacity(4);
    for h in handles {
        links.push(h.join().map_err(|_| Error::InvalidArgument("tcp setup panicked".into()))??);
    }
    let links: [TcpLink; 4] = links.try_into().map_err(|_| Error::InvalidArgument("tcp setup".into()))?;
    Ok(links)
}

impl Link for TcpLink {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()> {
        let tx = self.writers[to.index()].as_ref().ok_or(Error::ChannelClosed { from: self.me, to })?;
        let len = u32::try_from(frame.body.len() + 2)
            .map_err(|_| Error::InvalidArgument("frame too large".into()))?;
        let mut buf = Vec::with_capacity(frame.body.len() + 6);
        buf.extend_from_slice(&len.to_be_bytes());
        buf.push(frame.phase as u8);
        buf.push(frame.kind as u8);
        buf.extend_from_slice(&frame.body);
        tx.send(buf).map_err(|_| Error::ChannelClosed { from: self.me, to })
    }

    fn recv(&mut self, from: PartyId) -> Result<Frame> {
        let closed = Error::ChannelClosed { from, to: self.me };
        let r = self.readers[from.index()].as_mut().ok_or(Error::ChannelClosed { from, to: self.me })?;
        let mut len = [0u8; 4];
        if r.read_exact(&mut len).is_err() {
            return Err(closed);
        }
        let len = u32::from_be_bytes(len) as usize;
        if len < 2 {
            return Err(Error::Malformed { from, reason: "short frame".into() });
        }
        let mut buf = vec![0u8; len];
        if r.read_exact(&mut buf).is_err() {
            return Err(closed);
        }
        let phase = Phase::from_byte(buf[0]).ok_or_else(|| Error::Malformed { from, reason: "phase byte".into() })?;
        let kind = Kind::from_byte(buf[1]).ok_or_else(|| Error::Malformed { from, reason: "kind byte".into() })?;
        buf.drain(..2);
        Ok(Frame { phase, kind, body: buf })
    }
}

/// Drains queued frames before the process can exit.
impl Drop for TcpLink {
    fn drop(&mut self) {
        self.writers = Default::default();
        for h in self.pumps.drain(..) {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::party::{P0, P3};

    #[test]
    fn frames_cross_sockets_in_order() {
        let [mut a, _, _, mut d] = tcp_links(None).unwrap();
        for i in 0..3u8 {
            a.send(P3, Frame { phase: Phase::Online, kind: Kind::Payload, body: vec![i; 5] }).unwrap();
        }
        for i in 0..3u8 {
            let f = d.recv(P0).unwrap();
            assert_eq!(f.body, vec![i; 5]);
            assert_eq!(f.phase, Phase::Online);
        }
        drop(a);
        assert!(matches!(d.recv(P0), Err(Error::ChannelClosed { .. })));
    }
}
