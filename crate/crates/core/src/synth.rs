//! Seeded synthetic data: a KDD-format connection corpus and small Gaussian
//! blob fixtures.
//!
//! The corpus generator knows a profile for every exploit in the built-in
//! taxonomy. Profiles follow the broad traffic signature of each exploit
//! (floods saturate `count` and the error rates, probes spread over services
//! and hosts, remote-to-local and user-to-root attacks show up in the content
//! features) so the recognizers face a problem with the same structure as the
//! real data: two huge dominant classes, a long tail of rare exploits, exact
//! duplicate records, and test-only exploits that resemble known ones to
//! varying degrees.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "kddcup.data";
pub const TEST_FILE: &str = "corrected";

type Range = (f64, f64);

#[derive(Clone, Copy)]
struct Profile {
    /// (protocol, service) pairs drawn uniformly.
    endpoints: &'static [(&'static str, &'static str)],
    flags: &'static [&'static str],
    duration: Range,
    src_bytes: Range,
    dst_bytes: Range,
    wrong_fragment: Range,
    land: f64,
    hot: Range,
    failed_logins: Range,
    logged_in: f64,
    compromised: Range,
    root_shell: f64,
    file_creations: Range,
    guest: f64,
    count: Range,
    srv_count: Range,
    serror: f64,
    rerror: f64,
    same_srv: f64,
    diff_srv: f64,
    host_count: Range,
    host_srv_count: Range,
    /// Spread added to every rate feature.
    jitter: f64,
    /// Probability that a generated record is repeated verbatim.
    duplicate: f64,
}

const BASE: Profile = Profile {
    endpoints: &[("tcp", "http")],
    flags: &["SF"],
    duration: (0.0, 0.0),
    src_bytes: (100.0, 1000.0),
    dst_bytes: (0.0, 0.0),
    wrong_fragment: (0.0, 0.0),
    land: 0.0,
    hot: (0.0, 0.0),
    failed_logins: (0.0, 0.0),
    logged_in: 0.0,
    compromised: (0.0, 0.0),
    root_shell: 0.0,
    file_creations: (0.0, 0.0),
    guest: 0.0,
    count: (1.0, 10.0),
    srv_count: (1.0, 10.0),
    serror: 0.0,
    rerror: 0.0,
    same_srv: 1.0,
    diff_srv: 0.0,
    host_count: (1.0, 255.0),
    host_srv_count: (1.0, 255.0),
    jitter: 0.03,
    duplicate: 0.05,
};

const LOGIN: Profile = Profile {
    endpoints: &[("tcp", "telnet"), ("tcp", "ftp"), ("tcp", "login")],
    duration: (10.0, 3000.0),
    src_bytes: (50.0, 5000.0),
    dst_bytes: (100.0, 20000.0),
    logged_in: 1.0,
    hot: (0.0, 3.0),
    count: (1.0, 3.0),
    srv_count: (1.0, 3.0),
    host_count: (1.0, 60.0),
    host_srv_count: (1.0, 30.0),
    ..BASE
};

fn profile(exploit: &str) -> Option<Profile> {
    let p = match exploit {
        "normal" => Profile {
            endpoints: &[
                ("tcp", "http"),
                ("tcp", "http"),
                ("tcp", "http"),
                ("tcp", "smtp"),
                ("tcp", "smtp"),
                ("tcp", "ftp_data"),
                ("tcp", "ftp"),
                ("tcp", "telnet"),
                ("tcp", "auth"),
                ("udp", "domain_u"),
                ("udp", "private"),
                ("udp", "ntp_u"),
                ("udp", "snmp"),
                ("icmp", "ecr_i"),
                ("icmp", "urp_i"),
            ],
            flags: &["SF", "SF", "SF", "SF", "S1", "RSTO"],
            duration: (0.0, 200.0),
            src_bytes: (50.0, 20000.0),
            dst_bytes: (0.0, 50000.0),
            hot: (0.0, 2.0),
            logged_in: 0.75,
            count: (1.0, 40.0),
            srv_count: (1.0, 40.0),
            same_srv: 0.95,
            diff_srv: 0.04,
            jitter: 0.05,
            duplicate: 0.15,
            ..BASE
        },
        // Denial of service: floods and malformed packets.
        "smurf" => Profile {
            endpoints: &[("icmp", "ecr_i")],
            src_bytes: (1032.0, 1032.0),
            count: (480.0, 511.0),
            srv_count: (480.0, 511.0),
            host_count: (255.0, 255.0),
            host_srv_count: (255.0, 255.0),
            jitter: 0.0,
            duplicate: 0.95,
            ..BASE
        },
        "neptune" => Profile {
            endpoints: &[("tcp", "private"), ("tcp", "private"), ("tcp", "telnet"), ("tcp", "http"), ("tcp", "ftp_data")],
            flags: &["S0", "S0", "S0", "REJ"],
            src_bytes: (0.0, 0.0),
            count: (100.0, 511.0),
            srv_count: (1.0, 30.0),
            serror: 1.0,
            same_srv: 0.05,
            diff_srv: 0.07,
            host_srv_count: (1.0, 30.0),
            jitter: 0.03,
            duplicate: 0.75,
            ..BASE
        },
        "back" => Profile {
            endpoints: &[("tcp", "http")],
            src_bytes: (54540.0, 54540.0),
            dst_bytes: (7300.0, 8315.0),
            hot: (2.0, 2.0),
            logged_in: 1.0,
            compromised: (1.0, 1.0),
            count: (1.0, 20.0),
            srv_count: (1.0, 20.0),
            duplicate: 0.5,
            ..BASE
        },
        "teardrop" => Profile {
            endpoints: &[("udp", "private")],
            src_bytes: (28.0, 28.0),
            wrong_fragment: (3.0, 3.0),
            count: (1.0, 80.0),
            srv_count: (1.0, 80.0),
            duplicate: 0.3,
            ..BASE
        },
        "pod" => Profile {
            endpoints: &[("icmp", "ecr_i"), ("icmp", "tim_i")],
            src_bytes: (1480.0, 1480.0),
            wrong_fragment: (1.0, 1.0),
            count: (1.0, 10.0),
            srv_count: (1.0, 10.0),
            duplicate: 0.4,
            ..BASE
        },
        "land" => Profile {
            endpoints: &[("tcp", "finger"), ("tcp", "telnet")],
            flags: &["S0"],
            src_bytes: (0.0, 0.0),
            land: 1.0,
            serror: 1.0,
            ..BASE
        },
        "apache2" => Profile {
            endpoints: &[("tcp", "http")],
            flags: &["SF", "RSTR", "S3"],
            src_bytes: (9000.0, 40000.0),
            dst_bytes: (0.0, 2000.0),
            hot: (0.0, 2.0),
            logged_in: 0.5,
            count: (20.0, 200.0),
            srv_count: (20.0, 200.0),
            rerror: 0.2,
            ..BASE
        },
        "mailbomb" => Profile {
            endpoints: &[("tcp", "smtp")],
            src_bytes: (1200.0, 1400.0),
            dst_bytes: (300.0, 350.0),
            logged_in: 1.0,
            count: (1.0, 10.0),
            srv_count: (40.0, 120.0),
            host_count: (1.0, 20.0),
            host_srv_count: (200.0, 255.0),
            duplicate: 0.4,
            ..BASE
        },
        "processtable" => Profile {
            endpoints: &[("tcp", "finger"), ("tcp", "smtp"), ("tcp", "telnet")],
            flags: &["SF", "S1"],
            duration: (1000.0, 3000.0),
            src_bytes: (0.0, 50.0),
            count: (1.0, 5.0),
            srv_count: (1.0, 5.0),
            ..BASE
        },
        "udpstorm" => Profile {
            endpoints: &[("udp", "private")],
            src_bytes: (28.0, 28.0),
            count: (1.0, 5.0),
            ..BASE
        },
        // Probes: spread over services and hosts.
        "ipsweep" => Profile {
            endpoints: &[("icmp", "eco_i"), ("icmp", "ecr_i")],
            src_bytes: (8.0, 20.0),
            count: (1.0, 5.0),
            srv_count: (1.0, 40.0),
            host_count: (1.0, 100.0),
            host_srv_count: (1.0, 60.0),
            diff_srv: 0.0,
            duplicate: 0.2,
            ..BASE
        },
        "nmap" => Profile {
            endpoints: &[("icmp", "eco_i"), ("tcp", "private"), ("udp", "private")],
            flags: &["SF", "SH", "S0"],
            src_bytes: (0.0, 20.0),
            count: (1.0, 5.0),
            srv_count: (1.0, 5.0),
            same_srv: 0.6,
            diff_srv: 0.4,
            host_count: (1.0, 80.0),
            host_srv_count: (1.0, 10.0),
            ..BASE
        },
        "portsweep" => Profile {
            endpoints: &[("tcp", "private"), ("tcp", "other"), ("tcp", "ftp_data")],
            flags: &["REJ", "RSTR", "RSTOS0"],
            duration: (0.0, 3000.0),
            src_bytes: (0.0, 5.0),
            count: (1.0, 5.0),
            srv_count: (1.0, 5.0),
            rerror: 0.9,
            same_srv: 0.5,
            diff_srv: 0.5,
            host_count: (1.0, 20.0),
            host_srv_count: (1.0, 5.0),
            ..BASE
        },
        "satan" => Profile {
            endpoints: &[("tcp", "private"), ("tcp", "other"), ("udp", "private"), ("tcp", "finger")],
            flags: &["REJ", "S0", "SF", "RSTO"],
            src_bytes: (0.0, 40.0),
            count: (1.0, 300.0),
            srv_count: (1.0, 10.0),
            rerror: 0.7,
            serror: 0.1,
            same_srv: 0.1,
            diff_srv: 0.8,
            host_srv_count: (1.0, 20.0),
            ..BASE
        },
        "mscan" => Profile {
            endpoints: &[("tcp", "private"), ("tcp", "imap4"), ("tcp", "sunrpc"), ("tcp", "domain")],
            flags: &["REJ", "S0", "SF"],
            src_bytes: (0.0, 20.0),
            count: (1.0, 100.0),
            srv_count: (1.0, 10.0),
            rerror: 0.5,
            serror: 0.3,
            same_srv: 0.1,
            diff_srv: 0.9,
            host_count: (200.0, 255.0),
            host_srv_count: (1.0, 10.0),
            ..BASE
        },
        "saint" => Profile {
            endpoints: &[("tcp", "private"), ("tcp", "other"), ("udp", "private")],
            flags: &["REJ", "SF", "S0"],
            src_bytes: (0.0, 40.0),
            count: (1.0, 200.0),
            srv_count: (1.0, 10.0),
            rerror: 0.6,
            same_srv: 0.15,
            diff_srv: 0.7,
            host_srv_count: (1.0, 20.0),
            ..BASE
        },
        // Remote to local: content features and logins.
        "guess_passwd" => Profile {
            endpoints: &[("tcp", "telnet"), ("tcp", "pop_3")],
            flags: &["RSTO", "SF"],
            duration: (2.0, 5.0),
            src_bytes: (100.0, 130.0),
            dst_bytes: (100.0, 200.0),
            failed_logins: (1.0, 1.0),
            logged_in: 0.0,
            host_count: (1.0, 255.0),
            host_srv_count: (1.0, 10.0),
            ..LOGIN
        },
        "ftp_write" => Profile {
            endpoints: &[("tcp", "ftp"), ("tcp", "ftp_data")],
            file_creations: (1.0, 3.0),
            hot: (1.0, 4.0),
            ..LOGIN
        },
        "imap" => Profile {
            endpoints: &[("tcp", "imap4")],
            flags: &["SF", "SH", "S3"],
            src_bytes: (1400.0, 2000.0),
            compromised: (1.0, 2.0),
            ..LOGIN
        },
        "multihop" => Profile {
            file_creations: (0.0, 2.0),
            compromised: (0.0, 3.0),
            ..LOGIN
        },
        "phf" => Profile {
            endpoints: &[("tcp", "http")],
            duration: (0.0, 5.0),
            src_bytes: (50.0, 60.0),
            dst_bytes: (5000.0, 9000.0),
            hot: (3.0, 3.0),
            ..LOGIN
        },
        "spy" => Profile {
            duration: (15000.0, 25000.0),
            ..LOGIN
        },
        "warezclient" => Profile {
            endpoints: &[("tcp", "ftp_data"), ("tcp", "ftp")],
            duration: (0.0, 200.0),
            src_bytes: (500.0, 300000.0),
            dst_bytes: (0.0, 500.0),
            hot: (1.0, 28.0),
            guest: 1.0,
            host_count: (1.0, 255.0),
            host_srv_count: (1.0, 40.0),
            ..LOGIN
        },
        "warezmaster" => Profile {
            endpoints: &[("tcp", "ftp")],
            duration: (50.0, 15000.0),
            src_bytes: (50.0, 500.0),
            dst_bytes: (1_000_000.0, 5_000_000.0),
            hot: (20.0, 28.0),
            guest: 1.0,
            ..LOGIN
        },
        "named" => Profile {
            endpoints: &[("tcp", "domain")],
            src_bytes: (600.0, 3000.0),
            hot: (0.0, 2.0),
            compromised: (1.0, 2.0),
            ..LOGIN
        },
        "sendmail" => Profile {
            endpoints: &[("tcp", "smtp")],
            src_bytes: (500.0, 3000.0),
            hot: (1.0, 3.0),
            root_shell: 0.5,
            ..LOGIN
        },
        // Nearly indistinguishable from ordinary SNMP traffic.
        "snmpgetattack" => Profile {
            endpoints: &[("udp", "snmp")],
            src_bytes: (100.0, 110.0),
            dst_bytes: (100.0, 110.0),
            count: (1.0, 40.0),
            srv_count: (1.0, 40.0),
            same_srv: 0.95,
            diff_srv: 0.04,
            jitter: 0.05,
            duplicate: 0.3,
            ..BASE
        },
        "snmpguess" => Profile {
            endpoints: &[("udp", "snmp")],
            src_bytes: (30.0, 40.0),
            count: (100.0, 511.0),
            srv_count: (100.0, 511.0),
            host_count: (250.0, 255.0),
            host_srv_count: (250.0, 255.0),
            duplicate: 0.5,
            ..BASE
        },
        "worm" => Profile {
            endpoints: &[("tcp", "http")],
            src_bytes: (4000.0, 5000.0),
            hot: (6.0, 10.0),
            ..LOGIN
        },
        "xlock" => Profile {
            endpoints: &[("tcp", "X11")],
            failed_logins: (0.0, 1.0),
            ..LOGIN
        },
        "xsnoop" => Profile {
            endpoints: &[("tcp", "X11")],
            duration: (0.0, 5.0),
            logged_in: 0.0,
            ..LOGIN
        },
        // User to root: privilege escalation after a login.
        "buffer_overflow" => Profile {
            compromised: (1.0, 5.0),
            root_shell: 0.9,
            file_creations: (0.0, 2.0),
            hot: (1.0, 5.0),
            ..LOGIN
        },
        "loadmodule" => Profile {
            root_shell: 0.6,
            file_creations: (1.0, 3.0),
            ..LOGIN
        },
        "perl" => Profile {
            root_shell: 1.0,
            compromised: (1.0, 2.0),
            ..LOGIN
        },
        "rootkit" => Profile {
            endpoints: &[("tcp", "telnet"), ("udp", "tftp_u"), ("tcp", "ftp_data")],
            root_shell: 0.3,
            file_creations: (0.0, 3.0),
            ..LOGIN
        },
        "httptunnel" => Profile {
            endpoints: &[("tcp", "http"), ("tcp", "telnet")],
            duration: (100.0, 10000.0),
            root_shell: 0.5,
            ..LOGIN
        },
        "ps" => Profile {
            root_shell: 1.0,
            compromised: (2.0, 5.0),
            ..LOGIN
        },
        "sqlattack" => Profile {
            root_shell: 1.0,
            src_bytes: (2000.0, 4000.0),
            ..LOGIN
        },
        "xterm" => Profile {
            endpoints: &[("tcp", "X11"), ("tcp", "telnet")],
            root_shell: 1.0,
            file_creations: (1.0, 5.0),
            ..LOGIN
        },
        _ => return None,
    };
    Some(p)
}

/// Record counts before duplication. Dominant classes and a rare tail in
/// training; the test split mixes known exploits with test-only ones.
const TRAIN_COUNTS: &[(&str, usize)] = &[
    ("normal", 25_000),
    ("neptune", 12_000),
    ("smurf", 800),
    ("back", 300),
    ("teardrop", 200),
    ("pod", 60),
    ("land", 15),
    ("ipsweep", 250),
    ("nmap", 60),
    ("portsweep", 200),
    ("satan", 300),
    ("guess_passwd", 40),
    ("ftp_write", 8),
    ("imap", 12),
    ("multihop", 7),
    ("phf", 4),
    ("spy", 2),
    ("warezclient", 300),
    ("warezmaster", 20),
    ("buffer_overflow", 30),
    ("loadmodule", 9),
    ("perl", 3),
    ("rootkit", 10),
];

const TEST_COUNTS: &[(&str, usize)] = &[
    ("normal", 3000),
    ("neptune", 600),
    ("smurf", 300),
    ("back", 60),
    ("teardrop", 20),
    ("pod", 20),
    ("land", 5),
    ("ipsweep", 60),
    ("nmap", 20),
    ("portsweep", 60),
    ("satan", 80),
    ("guess_passwd", 40),
    ("ftp_write", 3),
    ("imap", 1),
    ("multihop", 10),
    ("phf", 2),
    ("warezclient", 20),
    ("warezmaster", 40),
    ("buffer_overflow", 15),
    ("loadmodule", 2),
    ("perl", 2),
    ("rootkit", 10),
    ("apache2", 150),
    ("mailbomb", 100),
    ("processtable", 100),
    ("udpstorm", 2),
    ("mscan", 150),
    ("saint", 100),
    ("named", 15),
    ("sendmail", 15),
    ("snmpgetattack", 150),
    ("snmpguess", 100),
    ("worm", 2),
    ("xlock", 8),
    ("xsnoop", 4),
    ("httptunnel", 30),
    ("ps", 15),
    ("sqlattack", 2),
    ("xterm", 12),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub seed: u64,
    /// Multiplier on every per-class count (rounded up, at least 1).
    pub scale: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { seed: 7, scale: 1.0 }
    }
}

fn uniform_int(rng: &mut ChaCha8Rng, (lo, hi): Range) -> f64 {
    if hi <= lo {
        return lo;
    }
    rng.random_range(lo as i64..=hi as i64) as f64
}

/// Log-uniform integer in `[lo, hi]`; byte counts span orders of magnitude.
fn bytes(rng: &mut ChaCha8Rng, (lo, hi): Range) -> f64 {
    if hi <= lo {
        return lo;
    }
    let (a, b) = ((lo + 1.0).ln(), (hi + 1.0).ln());
    (rng.random_range(a..=b).exp() - 1.0).round().clamp(lo, hi)
}

fn rate(rng: &mut ChaCha8Rng, mean: f64, jitter: f64) -> f64 {
    let v = if jitter > 0.0 {
        mean + rng.random_range(-jitter..=jitter)
    } else {
        mean
    };
    (v.clamp(0.0, 1.0) * 100.0).round() / 100.0
}

fn flag(rng: &mut ChaCha8Rng, p: f64) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

fn record_line(rng: &mut ChaCha8Rng, p: &Profile, label: &str) -> String {
    let (protocol, service) = *p.endpoints.choose(rng).expect("profile endpoints");
    let flag_tok = *p.flags.choose(rng).expect("profile flags");
    let count = uniform_int(rng, p.count);
    let srv_count = uniform_int(rng, p.srv_count);
    let serror = rate(rng, p.serror, p.jitter);
    let rerror = rate(rng, p.rerror, p.jitter);
    let same_srv = rate(rng, p.same_srv, p.jitter);
    let diff_srv = rate(rng, p.diff_srv, p.jitter);
    let host_count = uniform_int(rng, p.host_count);
    let host_srv_count = uniform_int(rng, p.host_srv_count).min(host_count.max(1.0));
    let root_shell = flag(rng, p.root_shell);
    let compromised = uniform_int(rng, p.compromised);
    let fields: Vec<String> = vec![
        uniform_int(rng, p.duration).to_string(),
        protocol.to_string(),
        service.to_string(),
        flag_tok.to_string(),
        bytes(rng, p.src_bytes).to_string(),
        bytes(rng, p.dst_bytes).to_string(),
        flag(rng, p.land).to_string(),
        uniform_int(rng, p.wrong_fragment).to_string(),
        "0".into(),
        uniform_int(rng, p.hot).to_string(),
        uniform_int(rng, p.failed_logins).to_string(),
        flag(rng, p.logged_in).to_string(),
        compromised.to_string(),
        root_shell.to_string(),
        "0".into(),
        (compromised * f64::from(root_shell)).to_string(),
        uniform_int(rng, p.file_creations).to_string(),
        "0".into(),
        "0".into(),
        "0".into(),
        "0".into(),
        flag(rng, p.guest).to_string(),
        count.to_string(),
        srv_count.to_string(),
        serror.to_string(),
        rate(rng, p.serror, p.jitter).to_string(),
        rerror.to_string(),
        rate(rng, p.rerror, p.jitter).to_string(),
        same_srv.to_string(),
        diff_srv.to_string(),
        rate(rng, 0.0, p.jitter).to_string(),
        host_count.to_string(),
        host_srv_count.to_string(),
        rate(rng, p.same_srv, p.jitter).to_string(),
        rate(rng, p.diff_srv, p.jitter).to_string(),
        rate(rng, 0.0, p.jitter).to_string(),
        rate(rng, 0.0, p.jitter).to_string(),
        rate(rng, p.serror, p.jitter).to_string(),
        rate(rng, p.serror, p.jitter).to_string(),
        rate(rng, p.rerror, p.jitter).to_string(),
        rate(rng, p.rerror, p.jitter).to_string(),
    ];
    format!("{},{label}.", fields.join(","))
}

fn split(counts: &[(&str, usize)], cfg: &CorpusConfig, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for &(label, n) in counts {
        let p = profile(label)
            .ok_or_else(|| Error::InvalidInput(format!("no synthetic profile for `{label}`")))?;
        let n = ((n as f64 * cfg.scale).ceil() as usize).max(1);
        for _ in 0..n {
            let line = record_line(rng, &p, label);
            while rng.random::<f64>() < p.duplicate {
                lines.push(line.clone());
            }
            lines.push(line);
        }
    }
    lines.shuffle(rng);
    Ok(lines)
}

/// KDD-format training and test lines, each terminated by the label period.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<(Vec<String>, Vec<String>)> {
    if !(cfg.scale > 0.0 && cfg.scale.is_finite()) {
        return Err(Error::InvalidInput(format!("corpus scale must be positive, got {}", cfg.scale)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = split(TRAIN_COUNTS, cfg, &mut rng)?;
    let test = split(TEST_COUNTS, cfg, &mut rng)?;
    Ok((train, test))
}

/// Writes [`TRAIN_FILE`] and [`TEST_FILE`] into `dir`.
pub fn write_corpus(dir: &Path, cfg: &CorpusConfig) -> Result<()> {
    let (train, test) = generate_corpus(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, lines) in [(TRAIN_FILE, train), (TEST_FILE, test)] {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for l in &lines {
            writeln!(w, "{l}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Isotropic Gaussian blobs, `per_class` points around each center.
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    std_dev: f64,
    per_class: usize,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    let dim = centers.first().map_or(0, Vec::len);
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidInput("blob centers must share a positive dimension".into()));
    }
    let noise = Normal::new(0.0, std_dev)
        .map_err(|e| Error::InvalidInput(format!("invalid blob spread: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = FeatureMatrix::new(dim);
    let mut class_of = Vec::with_capacity(per_class * centers.len());
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let row: Vec<f64> = c.iter().map(|&m| m + noise.sample(&mut rng)).collect();
            x.push_row(&row)?;
            class_of.push(k);
        }
    }
    Ok((x, class_of))
}
