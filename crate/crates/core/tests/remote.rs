use std::io::Write;
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use ddgm_core::denoise::protocol::{encode_response, read_request, serve_connection, DEFAULT_MAX_PIXELS};
use ddgm_core::denoise::{Denoiser, Endpoint, GaussianPriorDenoiser, RemoteDenoiser};
use ddgm_core::phantom::TexturePrior;
use ddgm_core::rng::{seeded, standard_normal_image};
use ddgm_core::{Error, Image};

/// Accepts one connection and serves it with `handler`.
fn spawn_server<F>(handler: F) -> (Endpoint, thread::JoinHandle<()>)
where
    F: FnMut(&Image) -> ddgm_core::Result<Image> + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let _ = serve_connection(&mut stream, handler);
    });
    (Endpoint::Tcp(addr.to_string()), handle)
}

fn connect(endpoint: &Endpoint) -> ddgm_core::Result<RemoteDenoiser> {
    RemoteDenoiser::connect(endpoint, Duration::from_secs(5))
}

#[test]
fn zero_echo_server_round_trips() {
    let (endpoint, handle) = spawn_server(|x| Ok(Image::zeros(x.height(), x.width())));
    let mut remote = connect(&endpoint).unwrap();
    let x = standard_normal_image(&mut seeded(1), 5, 7);
    assert_eq!(remote.predict_noise(&x, 1.0).unwrap(), Image::zeros(5, 7));
    assert_eq!(remote.requests(), 1);
    remote.close();
    handle.join().unwrap();
}

#[test]
fn analytic_server_matches_local_closed_form() {
    let sigma = 0.5;
    let prior = TexturePrior::default().prior(16, 16).unwrap();
    let mut server_side = GaussianPriorDenoiser::new(prior.clone());
    let (endpoint, handle) = spawn_server(move |x| {
        // the handshake probe is 1×1; answer it with zeros
        if x.len() == 1 {
            return Ok(Image::zeros(1, 1));
        }
        server_side.predict_noise(x, sigma)
    });
    let mut remote = connect(&endpoint).unwrap();
    let mut local = GaussianPriorDenoiser::new(prior);
    let mut rng = seeded(2);
    for _ in 0..5 {
        let x = standard_normal_image(&mut rng, 16, 16);
        let a = remote.predict_noise(&x, sigma).unwrap();
        let b = local.predict_noise(&x, sigma).unwrap();
        let worst = a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-5, "max deviation {worst}");
    }
    assert!(remote.noise_vjp(&Image::zeros(16, 16), &Image::zeros(16, 16), sigma).unwrap().is_none());
    remote.close();
    handle.join().unwrap();
}

/// Answers the handshake, then replies to the next request with a raw byte blob.
fn spawn_raw_server(reply: Vec<u8>) -> (Endpoint, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let probe = read_request(&mut stream, DEFAULT_MAX_PIXELS).unwrap();
        stream.write_all(&encode_response(&Image::zeros(probe.height(), probe.width())).unwrap()).unwrap();
        let _ = read_request(&mut stream, DEFAULT_MAX_PIXELS);
        stream.write_all(&reply).unwrap();
    });
    (Endpoint::Tcp(addr.to_string()), handle)
}

#[test]
fn truncated_payload_is_protocol_error_and_closes() {
    // header promises 2×2 but only one float follows before hangup
    let mut reply = b"DNZR".to_vec();
    reply.extend(2u32.to_le_bytes());
    reply.extend(2u32.to_le_bytes());
    reply.extend(1.0f32.to_le_bytes());
    let (endpoint, handle) = spawn_raw_server(reply);
    let mut remote = connect(&endpoint).unwrap();
    let err = remote.predict_noise(&Image::zeros(2, 2), 1.0).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err}");
    assert!(!remote.is_open());
    assert!(remote.predict_noise(&Image::zeros(2, 2), 1.0).is_err());
    handle.join().unwrap();
}

#[test]
fn wrong_shape_response_is_protocol_error() {
    let reply = encode_response(&Image::zeros(3, 3)).unwrap();
    let (endpoint, handle) = spawn_raw_server(reply);
    let mut remote = connect(&endpoint).unwrap();
    let err = remote.predict_noise(&Image::zeros(2, 2), 1.0).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err}");
    assert!(!remote.is_open());
    handle.join().unwrap();
}

#[test]
fn bad_magic_fails_handshake() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let _ = read_request(&mut stream, DEFAULT_MAX_PIXELS);
        let mut frame = encode_response(&Image::zeros(1, 1)).unwrap();
        frame[..4].copy_from_slice(b"DNZ2");
        stream.write_all(&frame).unwrap();
    });
    let err = connect(&Endpoint::Tcp(addr.to_string())).err().unwrap();
    assert!(matches!(err, Error::Protocol(_)), "{err}");
    handle.join().unwrap();
}

#[test]
fn server_hangup_is_reported() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        drop(stream);
    });
    assert!(connect(&Endpoint::Tcp(addr.to_string())).is_err());
    handle.join().unwrap();
}
