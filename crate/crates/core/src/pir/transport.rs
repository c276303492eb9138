use std::io::{BufRead, BufReader, Write};
use std::os::unix::net::UnixStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Error, Result};

/// A bidirectional byte-message channel between client and server.
pub trait Link: Send {
    fn send(&mut self, bytes: &[u8]) -> Result<()>;
    fn recv(&mut self) -> Result<Vec<u8>>;
}

pub struct InProcLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl Link for InProcLink {
    fn send(&mut self, bytes: &[u8]) -> Result<()> {
        self.tx.send(bytes.to_vec()).map_err(|_| Error::Transport("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        self.rx.recv().map_err(|_| Error::Transport("peer hung up".into()))
    }
}

/// Line-delimited hex over a local socket.
pub struct SocketLink {
    writer: UnixStream,
    reader: BufReader<UnixStream>,
}

impl SocketLink {
    pub fn new(stream: UnixStream) -> Result<Self> {
        let reader = BufReader::new(stream.try_clone().map_err(|e| Error::Transport(e.to_string()))?);
        Ok(SocketLink { writer: stream, reader })
    }
}

impl Link for SocketLink {
    fn send(&mut self, bytes: &[u8]) -> Result<()> {
        let mut line = hex::encode(bytes);
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(|e| Error::Transport(e.to_string()))
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(|e| Error::Transport(e.to_string()))?;
        if n == 0 {
            return Err(Error::Transport("socket closed".into()));
        }
        hex::decode(line.trim_end()).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    Socket,
}

impl std::str::FromStr for TransportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inproc" | "in-process" => Ok(TransportKind::InProcess),
            "socket" => Ok(TransportKind::Socket),
            _ => Err(Error::Config(format!("unknown transport '{s}'"))),
        }
    }
}

/// Connected `(client, server)` ends.
pub fn link_pair(kind: TransportKind) -> Result<(Box<dyn Link>, Box<dyn Link>)> {
    match kind {
        TransportKind::InProcess => {
            let (a_tx, b_rx) = channel();
            let (b_tx, a_rx) = channel();
            Ok((Box::new(InProcLink { tx: a_tx, rx: a_rx }), Box::new(InProcLink { tx: b_tx, rx: b_rx })))
        }
        TransportKind::Socket => {
            let (a, b) = UnixStream::pair().map_err(|e| Error::Transport(e.to_string()))?;
            Ok((Box::new(SocketLink::new(a)?), Box::new(SocketLink::new(b)?)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_transports_carry_bytes() {
        for kind in [TransportKind::InProcess, TransportKind::Socket] {
            let (mut a, mut b) = link_pair(kind).unwrap();
            a.send(b"hello\n\x00").unwrap();
            assert_eq!(b.recv().unwrap(), b"hello\n\x00");
            b.send(&[]).unwrap();
            assert_eq!(a.recv().unwrap(), Vec::<u8>::new());
            drop(b);
            assert!(a.recv().is_err());
        }
    }
}
