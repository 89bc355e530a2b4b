use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;
use std::time::Duration;

use crate::denoise::protocol::{self, DEFAULT_MAX_PIXELS};
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::Image;

/// Where a denoiser server lives.
///
/// Parsed from `tcp://host:port` or `stdio:<program> [args...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio { program: String, args: Vec<String> },
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(Error::param("tcp endpoint needs host:port"));
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace().map(str::to_string);
            let program = parts.next().ok_or_else(|| Error::param("stdio endpoint needs a program"))?;
            return Ok(Endpoint::Stdio { program, args: parts.collect() });
        }
        Err(Error::param(format!("unrecognized denoiser endpoint {s:?} (want tcp://… or stdio:…)")))
    }
}

enum Transport {
    Tcp(TcpStream),
    Stdio { child: Child, stdin: ChildStdin, stdout: ChildStdout },
}

impl Read for Transport {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        match self {
            Transport::Tcp(s) => s.read(buf),
            Transport::Stdio { stdout, .. } => stdout.read(buf),
        }
    }
}

impl Write for Transport {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self {
            Transport::Tcp(s) => s.write(buf),
            Transport::Stdio { stdin, .. } => stdin.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self {
            Transport::Tcp(s) => s.flush(),
            Transport::Stdio { stdin, .. } => stdin.flush(),
        }
    }
}

impl Drop for Transport {
    fn drop(&mut self) {
        if let Transport::Stdio { child, .. } = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Client side of the framed denoiser protocol. One request in flight at a
/// time; any protocol violation closes the session for good.
pub struct RemoteDenoiser {
    transport: Option<Transport>,
    max_pixels: usize,
    requests: usize,
}

impl RemoteDenoiser {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self> {
        let transport = match endpoint {
            Endpoint::Tcp(addr) => {
                let addrs: Vec<_> = addr
                    .to_socket_addrs()
                    .map_err(|e| Error::Connectivity(format!("resolving {addr}: {e}")))?
                    .collect();
                let mut last_err = None;
                let mut stream = None;
                for a in addrs {
                    match TcpStream::connect_timeout(&a, timeout) {
                        Ok(s) => {
                            stream = Some(s);
                            break;
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
                let stream = stream.ok_or_else(|| {
                    Error::Connectivity(format!(
                        "connecting to {addr}: {}",
                        last_err.map_or("no addresses".to_string(), |e| e.to_string())
                    ))
                })?;
                stream.set_read_timeout(Some(timeout))?;
                stream.set_write_timeout(Some(timeout))?;
                stream.set_nodelay(true)?;
                Transport::Tcp(stream)
            }
            Endpoint::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| Error::Connectivity(format!("spawning {program}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Transport::Stdio { child, stdin, stdout }
            }
        };
        Self::handshake(transport)
    }

    /// Wraps an already-open byte stream (used for TCP streams accepted elsewhere).
    pub fn from_tcp(stream: TcpStream) -> Result<Self> {
        Self::handshake(Transport::Tcp(stream))
    }

    /// Probes the server with a 1×1 zero frame; a peer answering with any
    /// other magic speaks a different protocol version.
    fn handshake(transport: Transport) -> Result<Self> {
        let mut client = RemoteDenoiser { transport: Some(transport), max_pixels: DEFAULT_MAX_PIXELS, requests: 0 };
        let probe = client.round_trip(&Image::zeros(1, 1))?;
        if !probe.is_finite() {
            client.close();
            return Err(Error::Protocol("handshake probe returned non-finite values".into()));
        }
        client.requests = 0;
        Ok(client)
    }

    pub fn is_open(&self) -> bool {
        self.transport.is_some()
    }

    /// Requests served since the handshake.
    pub fn requests(&self) -> usize {
        self.requests
    }

    pub fn close(&mut self) {
        self.transport = None;
    }

    fn round_trip(&mut self, x: &Image) -> Result<Image> {
        let transport = self
            .transport
            .as_mut()
            .ok_or_else(|| Error::Connectivity("remote denoiser session is closed".into()))?;
        let result = protocol::write_frame(transport, &protocol::encode_request(x)?)
            .and_then(|_| protocol::read_response(transport, self.max_pixels))
            .and_then(|eps| {
                if eps.shape() != x.shape() {
                    Err(Error::Protocol(format!(
                        "response shape {:?} does not match request {:?}",
                        eps.shape(),
                        x.shape()
                    )))
                } else {
                    Ok(eps)
                }
            });
        match result {
            Ok(eps) => {
                self.requests += 1;
                Ok(eps)
            }
            Err(e) => {
                self.close();
                Err(e)
            }
        }
    }
}

impl Denoiser for RemoteDenoiser {
    /// The served network is not conditioned on the noise level; `sigma` is ignored.
    fn predict_noise(&mut self, x: &Image, _sigma: f64) -> Result<Image> {
        self.round_trip(x)
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}
