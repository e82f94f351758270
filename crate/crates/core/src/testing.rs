//! In-memory transports for exercising the exchange protocol: a blocking
//! duplex pipe pair, plus wrappers that record wire bytes or inject faults
//! (cuts and bit flips) at chosen offsets.
//!
//! Requires `std` (threads block on condvars); enabled in tests and behind
//! the `testing` feature for downstream test suites.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use std::vec::Vec;

use crate::exchange::{ByteStream, StreamError};

#[derive(Default)]
struct Pipe {
    buf: VecDeque<u8>,
    closed: bool,
}

struct PipeShared {
    pipe: Mutex<Pipe>,
    ready: Condvar,
}

/// One end of an in-memory duplex byte stream. Reads block (with a timeout,
/// so protocol deadlocks surface as errors rather than hangs) until the peer
/// writes or closes.
pub struct DuplexEnd {
    incoming: Arc<PipeShared>,
    outgoing: Arc<PipeShared>,
    read_timeout: Duration,
}

/// Creates a connected pair of in-memory duplex ends.
pub fn duplex_pair() -> (DuplexEnd, DuplexEnd) {
    duplex_pair_with_timeout(Duration::from_secs(5))
}

pub fn duplex_pair_with_timeout(read_timeout: Duration) -> (DuplexEnd, DuplexEnd) {
    let a = Arc::new(PipeShared {
        pipe: Mutex::new(Pipe::default()),
        ready: Condvar::new(),
    });
    let b = Arc::new(PipeShared {
        pipe: Mutex::new(Pipe::default()),
        ready: Condvar::new(),
    });
    (
        DuplexEnd {
            incoming: a.clone(),
            outgoing: b.clone(),
            read_timeout,
        },
        DuplexEnd {
            incoming: b,
            outgoing: a,
            read_timeout,
        },
    )
}

impl Drop for DuplexEnd {
    fn drop(&mut self) {
        let mut pipe = self.outgoing.pipe.lock().unwrap();
        pipe.closed = true;
        self.outgoing.ready.notify_all();
    }
}

impl ByteStream for DuplexEnd {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), StreamError> {
        let mut pipe = self.outgoing.pipe.lock().unwrap();
        if pipe.closed {
            return Err(StreamError::Closed);
        }
        pipe.buf.extend(buf.iter().copied());
        self.outgoing.ready.notify_all();
        Ok(())
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), StreamError> {
        let mut pipe = self.incoming.pipe.lock().unwrap();
        loop {
            if pipe.buf.len() >= buf.len() {
                for slot in buf.iter_mut() {
                    *slot = pipe.buf.pop_front().unwrap();
                }
                return Ok(());
            }
            if pipe.closed {
                return Err(StreamError::Closed);
            }
            let (next, timeout) = self
                .incoming
                .ready
                .wait_timeout(pipe, self.read_timeout)
                .unwrap();
            pipe = next;
            if timeout.timed_out() && pipe.buf.len() < buf.len() && !pipe.closed {
                return Err(StreamError::Broken);
            }
        }
    }
}

/// Byte-stream wrapper that records everything written and read, keyed by
/// direction, for wire-leakage scans.
pub struct RecordingStream<S: ByteStream> {
    inner: S,
    pub written: Arc<Mutex<Vec<u8>>>,
    pub read: Arc<Mutex<Vec<u8>>>,
}

impl<S: ByteStream> RecordingStream<S> {
    pub fn new(inner: S) -> Self {
        RecordingStream {
            inner,
            written: Arc::new(Mutex::new(Vec::new())),
            read: Arc::new(Mutex::new(Vec::new())),
        }
    }
}

impl<S: ByteStream> ByteStream for RecordingStream<S> {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), StreamError> {
        self.written.lock().unwrap().extend_from_slice(buf);
        self.inner.write_all(buf)
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), StreamError> {
        self.inner.read_exact(buf)?;
        self.read.lock().unwrap().extend_from_slice(buf);
        Ok(())
    }
}

/// Fault to inject into the written side of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Sever the stream after this many bytes have been written through.
    CutAfter(usize),
    /// XOR the given bit into the byte at this absolute write offset.
    FlipBit { offset: usize, bit: u8 },
}

/// Applies a [`Fault`] to every byte written through it. A cut closes the
/// underlying direction so the peer observes end-of-stream.
pub struct FaultyStream<S: ByteStream> {
    inner: S,
    fault: Fault,
    written: usize,
    cut: bool,
}

impl<S: ByteStream> FaultyStream<S> {
    pub fn new(inner: S, fault: Fault) -> Self {
        FaultyStream {
            inner,
            fault,
            written: 0,
            cut: false,
        }
    }
}

impl<S: ByteStream> ByteStream for FaultyStream<S> {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), StreamError> {
        if self.cut {
            return Err(StreamError::Closed);
        }
        match self.fault {
            Fault::CutAfter(limit) => {
                if self.written + buf.len() > limit {
                    let keep = limit.saturating_sub(self.written);
                    if keep > 0 {
                        let _ = self.inner.write_all(&buf[..keep]);
                    }
                    self.written = limit;
                    self.cut = true;
                    return Err(StreamError::Closed);
                }
                self.written += buf.len();
                self.inner.write_all(buf)
            }
            Fault::FlipBit { offset, bit } => {
                if offset >= self.written && offset < self.written + buf.len() {
                    let mut copy = buf.to_vec();
                    copy[offset - self.written] ^= 1u8 << (bit & 7);
                    self.written += buf.len();
                    self.inner.write_all(&copy)
                } else {
                    self.written += buf.len();
                    self.inner.write_all(buf)
                }
            }
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), StreamError> {
        self.inner.read_exact(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn duplex_ferries_bytes_both_ways() {
        let (mut a, mut b) = duplex_pair();
        a.write_all(b"ping").unwrap();
        let mut buf = [0u8; 4];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"ping");
        b.write_all(b"pong").unwrap();
        a.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"pong");
    }

    #[test]
    fn duplex_blocks_until_peer_writes() {
        let (mut a, mut b) = duplex_pair();
        let handle = thread::spawn(move || {
            let mut buf = [0u8; 3];
            b.read_exact(&mut buf).unwrap();
            buf
        });
        thread::sleep(Duration::from_millis(20));
        a.write_all(b"abc").unwrap();
        assert_eq!(&handle.join().unwrap(), b"abc");
    }

    #[test]
    fn duplex_close_unblocks_reader() {
        let (a, mut b) = duplex_pair();
        let handle = thread::spawn(move || {
            let mut buf = [0u8; 1];
            b.read_exact(&mut buf)
        });
        drop(a);
        assert_eq!(handle.join().unwrap(), Err(StreamError::Closed));
    }

    #[test]
    fn cut_truncates_at_offset() {
        let (a, mut b) = duplex_pair();
        let mut faulty = FaultyStream::new(a, Fault::CutAfter(6));
        assert!(faulty.write_all(b"0123").is_ok());
        assert_eq!(faulty.write_all(b"4567"), Err(StreamError::Closed));
        let mut buf = [0u8; 6];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"012345");
        let mut one = [0u8; 1];
        assert!(b.read_exact(&mut one).is_err());
    }

    #[test]
    fn flip_changes_exactly_one_bit() {
        let (a, mut b) = duplex_pair();
        let mut faulty = FaultyStream::new(a, Fault::FlipBit { offset: 2, bit: 0 });
        faulty.write_all(b"AAAA").unwrap();
        let mut buf = [0u8; 4];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, &[b'A', b'A', b'A' ^ 1, b'A']);
    }

    #[test]
    fn recorder_captures_written_bytes() {
        let (a, mut b) = duplex_pair();
        let mut rec = RecordingStream::new(a);
        rec.write_all(b"secret").unwrap();
        let mut buf = [0u8; 6];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(rec.written.lock().unwrap().as_slice(), b"secret");
    }
}
