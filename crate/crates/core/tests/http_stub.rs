use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use semsqli_core::detectors::{Detector, DetectorError, HttpConfig, HttpDetector, Label};
use semsqli_core::mutation::RequestMethod;

/// Minimal HTTP/1.1 server answering each request with `respond(n, request)`.
/// Returns the base url and the log of raw request heads and bodies.
fn serve(respond: impl Fn(usize, &str) -> u16 + Send + 'static) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/search", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                head.push_str(&line);
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let request = format!("{head}\n{}", String::from_utf8_lossy(&body));
            let status = respond(n, &request);
            seen.lock().unwrap().push(request);
            let text = if status == 200 { "welcome" } else { "request rejected by firewall" };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (url, log)
}

fn config(url: &str) -> HttpConfig {
    HttpConfig {
        url: url.into(),
        rate_limit_per_sec: 1000.0,
        backoff_base_ms: 1,
        timeout_secs: 2.0,
        i_own_this_target: true,
        ..HttpConfig::default()
    }
}

#[test]
fn refuses_without_acknowledgment() {
    let (url, log) = serve(|_, _| 200);
    let err = HttpDetector::new(HttpConfig { i_own_this_target: false, ..config(&url) }).unwrap_err();
    assert!(matches!(err, DetectorError::NotAuthorized));
    assert!(err.to_string().contains("--i-own-this-target"));
    assert!(log.lock().unwrap().is_empty());
}

#[test]
fn status_codes_map_to_labels() {
    let (url, log) = serve(|_, req| if req.contains("union") { 403 } else { 200 });
    let det = HttpDetector::new(config(&url)).unwrap();
    let v = det.detect("1%20union%20select%201", RequestMethod::Get).unwrap();
    assert_eq!((v.label, v.raw_status), (Label::Blocked, Some(403)));
    assert_eq!(v.score, None);
    let v = det.detect("1", RequestMethod::Get).unwrap();
    assert_eq!(v.label, Label::Passed);
    assert_eq!(det.calls(), 2);
    assert!(log.lock().unwrap()[0].starts_with("GET /search?id=1%20union%20select%201 "));
}

#[test]
fn post_bodies_carry_the_payload() {
    let (url, log) = serve(|_, _| 200);
    let det = HttpDetector::new(HttpConfig { param: "q".into(), ..config(&url) }).unwrap();
    det.detect("1+or+1%3D1", RequestMethod::Post).unwrap();
    det.detect("1 or 1=1", RequestMethod::PostJson).unwrap();
    let log = log.lock().unwrap();
    assert!(log[0].ends_with("\nq=1+or+1%3D1"), "{}", log[0]);
    assert!(log[1].ends_with("\n{\"q\":\"1 or 1=1\"}"), "{}", log[1]);
}

#[test]
fn block_page_marker() {
    let (url, _) = serve(|_, _| 200);
    let det = HttpDetector::new(HttpConfig { block_body: Some("welcome".into()), ..config(&url) }).unwrap();
    assert_eq!(det.detect("1", RequestMethod::Get).unwrap().label, Label::Blocked);
}

#[test]
fn throttling_is_retried_within_one_call() {
    let (url, log) = serve(|n, _| if n < 3 { 429 } else { 200 });
    let det = HttpDetector::new(config(&url)).unwrap();
    assert_eq!(det.detect("1", RequestMethod::Get).unwrap().label, Label::Passed);
    assert_eq!(det.calls(), 1);
    assert_eq!(det.attempts(), 4);
    assert_eq!(log.lock().unwrap().len(), 4);
}

#[test]
fn persistent_throttling_fails() {
    let (url, _) = serve(|_, _| 429);
    let det = HttpDetector::new(HttpConfig { throttle_retries: 2, ..config(&url) }).unwrap();
    assert!(matches!(det.detect("1", RequestMethod::Get), Err(DetectorError::TooManyRequests)));
    assert_eq!(det.attempts(), 3);
}
