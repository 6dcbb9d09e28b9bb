//! Alert emails: rendering to `key: value` bodies and pluggable transports.
//! Delivery is attempted once; failures are recorded, never retried.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wheelsim_core::health::{AlertEvent, AlertParameter};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEmail {
    pub to: String,
    pub subject: String,
    pub body: String,
}

impl AlertEmail {
    /// RFC 822-style text: headers, blank line, body.
    pub fn to_message(&self) -> String {
        format!("To: {}\nSubject: {}\n\n{}", self.to, self.subject, self.body)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.0}")).unwrap_or_else(|| "unavailable".into())
}

pub fn render_alert(event: &AlertEvent, to: &str) -> AlertEmail {
    let v = &event.vitals;
    let (what, cmp) = match event.parameter {
        AlertParameter::ObjectTempF => ("High body temperature", ">="),
        AlertParameter::Spo2 => ("Low blood oxygen", "<"),
    };
    let subject = format!(
        "{what}: {} {:.2} {cmp} {:.2}",
        event.parameter.key(),
        event.value,
        event.threshold
    );
    let lines = [
        ("timestamp", format!("{:.2}", event.timestamp)),
        ("parameter", event.parameter.key().to_string()),
        ("value", format!("{:.2}", event.value)),
        ("threshold", format!("{:.2}", event.threshold)),
        ("beatsPerMinute", opt(v.beats_per_minute)),
        ("spo2", opt(v.spo2)),
        ("ecgValue", v.ecg_value.to_string()),
        ("ambientTempC", format!("{:.2}", v.ambient_temp_c)),
        ("objectTempC", format!("{:.2}", v.object_temp_c)),
        ("objectTempF", format!("{:.2}", v.object_temp_f)),
        ("leadStatus", v.lead_status.code().to_string()),
    ];
    let body = lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
    AlertEmail { to: to.to_string(), subject, body }
}

/// Parse `key: value` lines; lines without a colon are ignored.
pub fn parse_body(body: &str) -> BTreeMap<String, String> {
    body.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("email transport failure: {0}")]
pub struct TransportFailure(pub String);

pub trait EmailTransport: Send {
    /// Hand one message over; returns a transport-specific receipt.
    fn deliver(&mut self, email: &AlertEmail) -> Result<String, TransportFailure>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub subject: String,
    pub delivered: bool,
    /// File path, server reply or error text.
    pub detail: String,
}

/// Render and deliver exactly once.
pub fn send_email_alert(event: &AlertEvent, to: &str, transport: &mut dyn EmailTransport) -> DeliveryRecord {
    let email = render_alert(event, to);
    match transport.deliver(&email) {
        Ok(detail) => DeliveryRecord { subject: email.subject, delivered: true, detail },
        Err(TransportFailure(e)) => {
            tracing::warn!(error = %e, "alert email not delivered");
            DeliveryRecord { subject: email.subject, delivered: false, detail: e }
        }
    }
}

/// Writes each message to its own numbered file in a directory.
#[derive(Debug, Clone)]
pub struct FileSinkTransport {
    dir: PathBuf,
    count: u64,
}

impl FileSinkTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), count: 0 }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl EmailTransport for FileSinkTransport {
    fn deliver(&mut self, email: &AlertEmail) -> Result<String, TransportFailure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| TransportFailure(e.to_string()))?;
        self.count += 1;
        let path = self.dir.join(format!("alert-{:04}.eml", self.count));
        std::fs::write(&path, email.to_message()).map_err(|e| TransportFailure(e.to_string()))?;
        Ok(path.display().to_string())
    }
}

/// Plain SMTP without TLS or authentication.
#[derive(Debug, Clone)]
pub struct SmtpTransport {
    pub addr: String,
    pub from: String,
    pub timeout: Duration,
}

impl SmtpTransport {
    pub fn new(addr: impl Into<String>, from: impl Into<String>) -> Self {
        Self { addr: addr.into(), from: from.into(), timeout: Duration::from_secs(5) }
    }

    fn exchange(&self, email: &AlertEmail) -> std::io::Result<Result<String, String>> {
        let stream = TcpStream::connect(&self.addr)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;

        // Read one (possibly multi-line) reply and check its code.
        let expect = |reader: &mut BufReader<TcpStream>, code: &str| -> std::io::Result<Result<String, String>> {
            let mut last = String::new();
            loop {
                last.clear();
                if reader.read_line(&mut last)? == 0 {
                    return Ok(Err("connection closed".into()));
                }
                if last.as_bytes().get(3) != Some(&b'-') {
                    break;
                }
            }
            Ok(if last.starts_with(code) { Ok(last.trim().to_string()) } else { Err(last.trim().to_string()) })
        };

        macro_rules! step {
            ($cmd:expr, $code:expr) => {{
                if let Some(cmd) = $cmd {
                    writer.write_all(cmd.as_bytes())?;
                }
                match expect(&mut reader, $code)? {
                    Ok(r) => r,
                    Err(e) => return Ok(Err(e)),
                }
            }};
        }

        step!(None::<String>, "220");
        step!(Some("HELO wheelsim\r\n".to_string()), "250");
        step!(Some(format!("MAIL FROM:<{}>\r\n", self.from)), "250");
        step!(Some(format!("RCPT TO:<{}>\r\n", email.to)), "250");
        step!(Some("DATA\r\n".to_string()), "354");
        let mut data = format!("From: {}\r\n{}", self.from, email.to_message().replace('\n', "\r\n"));
        // Dot-stuff lines that begin with '.'.
        data = data.replace("\r\n.", "\r\n..");
        let reply = step!(Some(format!("{data}\r\n.\r\n")), "250");
        writer.write_all(b"QUIT\r\n")?;
        Ok(Ok(reply))
    }
}

impl EmailTransport for SmtpTransport {
    fn deliver(&mut self, email: &AlertEmail) -> Result<String, TransportFailure> {
        match self.exchange(email) {
            Ok(Ok(reply)) => Ok(reply),
            Ok(Err(reply)) => Err(TransportFailure(format!("server said {reply:?}"))),
            Err(e) => Err(TransportFailure(e.to_string())),
        }
    }
}
