//! TCP binding for the exchange protocol's byte-stream abstraction.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use sotto_core::exchange::{ByteStream, StreamError};

pub struct TcpByteStream(pub TcpStream);

impl TcpByteStream {
    pub fn new(stream: TcpStream) -> std::io::Result<Self> {
        stream.set_nodelay(true)?;
        // A stalled peer must not hang the process forever.
        stream.set_read_timeout(Some(Duration::from_secs(30)))?;
        stream.set_write_timeout(Some(Duration::from_secs(30)))?;
        Ok(TcpByteStream(stream))
    }
}

impl ByteStream for TcpByteStream {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), StreamError> {
        self.0.write_all(buf).map_err(|_| StreamError::Broken)
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), StreamError> {
        self.0.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                StreamError::Closed
            } else {
                StreamError::Broken
            }
        })
    }
}
