//! Framed binary protocol for out-of-process denoisers.
//!
//! ```text
//! request:  "DNZ1" | u32 LE height | u32 LE width | height*width f32 LE pixels
//! response: "DNZR" | u32 LE height | u32 LE width | height*width f32 LE noise prediction
//! ```
//!
//! Pixels are row-major. Any other magic aborts the session. The exchange is
//! strictly one request followed by one response.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::image::Image;

pub const REQUEST_MAGIC: [u8; 4] = *b"DNZ1";
pub const RESPONSE_MAGIC: [u8; 4] = *b"DNZR";
pub const HEADER_LEN: usize = 12;

/// Frames larger than this are refused before allocation.
pub const DEFAULT_MAX_PIXELS: usize = 1 << 24;

fn encode(magic: [u8; 4], img: &Image) -> Result<Vec<u8>> {
    let (h, w) = img.shape();
    let (h32, w32) = (u32::try_from(h), u32::try_from(w));
    let (Ok(h32), Ok(w32)) = (h32, w32) else {
        return Err(Error::Protocol(format!("image {h}x{w} exceeds the u32 frame header")));
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * img.len());
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&h32.to_le_bytes());
    buf.extend_from_slice(&w32.to_le_bytes());
    for &v in img.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(buf)
}

pub fn encode_request(img: &Image) -> Result<Vec<u8>> {
    encode(REQUEST_MAGIC, img)
}

pub fn encode_response(img: &Image) -> Result<Vec<u8>> {
    encode(RESPONSE_MAGIC, img)
}

fn read_exact_or(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Protocol(format!("stream ended inside {what}")),
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => {
            Error::Connectivity(format!("timed out reading {what}"))
        }
        _ => Error::Connectivity(format!("reading {what}: {e}")),
    })
}

fn decode(reader: &mut impl Read, magic: [u8; 4], max_pixels: usize) -> Result<Image> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or(reader, &mut header, "frame header")?;
    if header[..4] != magic {
        return Err(Error::Protocol(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&header[..4]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let h = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let w = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let n = h.checked_mul(w).ok_or_else(|| Error::Protocol("frame shape overflows".into()))?;
    if n > max_pixels {
        return Err(Error::Protocol(format!("frame of {h}x{w} pixels exceeds limit {max_pixels}")));
    }
    let mut payload = vec![0u8; 4 * n];
    read_exact_or(reader, &mut payload, "frame payload")?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Image::from_vec(h, w, values).map_err(|e| Error::Protocol(format!("invalid frame payload: {e}")))
}

pub fn read_request(reader: &mut impl Read, max_pixels: usize) -> Result<Image> {
    decode(reader, REQUEST_MAGIC, max_pixels)
}

pub fn read_response(reader: &mut impl Read, max_pixels: usize) -> Result<Image> {
    decode(reader, RESPONSE_MAGIC, max_pixels)
}

pub fn write_frame(writer: &mut impl Write, frame: &[u8]) -> Result<()> {
    writer
        .write_all(frame)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::Connectivity(format!("writing frame: {e}")))
}

/// Serves requests on one connection until the peer hangs up or sends a bad frame.
///
/// Used by in-process test servers; the real model server lives elsewhere.
pub fn serve_connection<S: Read + Write>(
    stream: &mut S,
    mut handler: impl FnMut(&Image) -> Result<Image>,
) -> Result<usize> {
    let mut served = 0;
    loop {
        let req = match read_request(stream, DEFAULT_MAX_PIXELS) {
            Ok(img) => img,
            Err(Error::Protocol(msg)) if msg.starts_with("stream ended inside frame header") => {
                return Ok(served);
            }
            Err(e) => return Err(e),
        };
        let eps = handler(&req)?;
        write_frame(stream, &encode_response(&eps)?)?;
        served += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1×2 image [1.0, -2.5] in both directions, byte for byte.
    const GOLDEN_REQUEST: [u8; 20] = [
        b'D', b'N', b'Z', b'1', 1, 0, 0, 0, 2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0,
    ];
    const GOLDEN_RESPONSE: [u8; 20] = [
        b'D', b'N', b'Z', b'R', 1, 0, 0, 0, 2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0,
    ];

    #[test]
    fn golden_frames() {
        let img = Image::from_vec(1, 2, vec![1.0, -2.5]).unwrap();
        assert_eq!(encode_request(&img).unwrap(), GOLDEN_REQUEST);
        assert_eq!(encode_response(&img).unwrap(), GOLDEN_RESPONSE);
        assert_eq!(read_request(&mut &GOLDEN_REQUEST[..], 16).unwrap(), img);
        assert_eq!(read_response(&mut &GOLDEN_RESPONSE[..], 16).unwrap(), img);
    }

    #[test]
    fn wrong_magic_rejected() {
        assert!(matches!(read_response(&mut &GOLDEN_REQUEST[..], 16), Err(Error::Protocol(_))));
    }

    #[test]
    fn truncated_payload_rejected() {
        assert!(matches!(read_response(&mut &GOLDEN_RESPONSE[..18], 16), Err(Error::Protocol(_))));
    }

    #[test]
    fn oversized_frame_rejected() {
        assert!(matches!(read_request(&mut &GOLDEN_REQUEST[..], 1), Err(Error::Protocol(_))));
    }

    #[test]
    fn serve_round_trip_in_memory() {
        use std::io::Cursor;
        // request bytes in, response bytes out
        struct Duplex {
            input: Cursor<Vec<u8>>,
            output: Vec<u8>,
        }
        impl Read for Duplex {
            fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
                self.input.read(buf)
            }
        }
        impl Write for Duplex {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                self.output.write(buf)
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let mut input = GOLDEN_REQUEST.to_vec();
        input.extend_from_slice(&GOLDEN_REQUEST);
        let mut duplex = Duplex { input: Cursor::new(input), output: Vec::new() };
        let served = serve_connection(&mut duplex, |img| Ok(img.clone())).unwrap();
        assert_eq!(served, 2);
        assert_eq!(&duplex.output[..20], &GOLDEN_RESPONSE);
        assert_eq!(&duplex.output[20..], &GOLDEN_RESPONSE);
    }
}
