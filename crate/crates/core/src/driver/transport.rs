//! Non-blocking byte-stream transports: in-memory pipes for tests and TCP.

use std::collections::VecDeque;
use std::io::{self, ErrorKind, Read, Write};
use std::net::TcpStream;
use std::sync::{Arc, Mutex};

#[derive(Debug, PartialEq, Eq)]
pub enum Recv {
    Data(Vec<u8>),
    /// Nothing available right now.
    Empty,
    Closed,
}

pub trait Transport: Send {
    fn send(&mut self, bytes: &[u8]) -> io::Result<()>;
    fn recv(&mut self) -> Recv;
    fn close(&mut self);
}

#[derive(Default)]
struct PipeState {
    queues: [VecDeque<u8>; 2],
    closed: bool,
}

/// One end of an in-memory duplex pipe. Closing either end closes both.
pub struct MemPipe {
    state: Arc<Mutex<PipeState>>,
    side: usize,
}

impl MemPipe {
    pub fn pair() -> (MemPipe, MemPipe) {
        let state = Arc::new(Mutex::new(PipeState::default()));
        (
            MemPipe {
                state: state.clone(),
                side: 0,
            },
            MemPipe { state, side: 1 },
        )
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }
}

impl Transport for MemPipe {
    fn send(&mut self, bytes: &[u8]) -> io::Result<()> {
        let mut st = self.state.lock().unwrap();
        if st.closed {
            return Err(ErrorKind::BrokenPipe.into());
        }
        st.queues[1 - self.side].extend(bytes);
        Ok(())
    }

    fn recv(&mut self) -> Recv {
        let mut st = self.state.lock().unwrap();
        let q = &mut st.queues[self.side];
        if !q.is_empty() {
            return Recv::Data(q.drain(..).collect());
        }
        if st.closed {
            Recv::Closed
        } else {
            Recv::Empty
        }
    }

    fn close(&mut self) {
        self.state.lock().unwrap().closed = true;
    }
}

impl Drop for MemPipe {
    fn drop(&mut self) {
        self.close();
    }
}

pub struct TcpTransport {
    stream: Option<TcpStream>,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> io::Result<TcpTransport> {
        stream.set_nonblocking(true)?;
        stream.set_nodelay(true)?;
        Ok(TcpTransport { stream: Some(stream) })
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, mut bytes: &[u8]) -> io::Result<()> {
        let s = self.stream.as_mut().ok_or(io::Error::from(ErrorKind::BrokenPipe))?;
        while !bytes.is_empty() {
            match s.write(bytes) {
                Ok(0) => return Err(ErrorKind::WriteZero.into()),
                Ok(n) => bytes = &bytes[n..],
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::yield_now(),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn recv(&mut self) -> Recv {
        let Some(s) = self.stream.as_mut() else {
            return Recv::Closed;
        };
        let mut out = Vec::new();
        let mut buf = [0u8; 16 * 1024];
        loop {
            match s.read(&mut buf) {
                Ok(0) => {
                    self.stream = None;
                    return if out.is_empty() { Recv::Closed } else { Recv::Data(out) };
                }
                Ok(n) => out.extend_from_slice(&buf[..n]),
                Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(_) => {
                    self.stream = None;
                    return Recv::Closed;
                }
            }
        }
        if out.is_empty() {
            Recv::Empty
        } else {
            Recv::Data(out)
        }
    }

    fn close(&mut self) {
        if let Some(s) = self.stream.take() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}
