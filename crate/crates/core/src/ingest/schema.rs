//! The fixed 41-attribute KDD'99 connection schema.

/// Number of attributes per connection record, excluding the label.
pub const NUM_FEATURES: usize = 41;

/// Zero-based positions of the symbolic attributes (protocol, service, flag).
pub const CATEGORICAL_POSITIONS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Numeric,
    Categorical,
    Binary,
}

pub struct Attribute {
    pub name: &'static str,
    pub kind: AttributeKind,
}

const fn num(name: &'static str) -> Attribute {
    Attribute {
        name,
        kind: AttributeKind::Numeric,
    }
}

const fn cat(name: &'static str) -> Attribute {
    Attribute {
        name,
        kind: AttributeKind::Categorical,
    }
}

const fn bin(name: &'static str) -> Attribute {
    Attribute {
        name,
        kind: AttributeKind::Binary,
    }
}

pub const SCHEMA: [Attribute; NUM_FEATURES] = [
    num("duration"),
    cat("protocol_type"),
    cat("service"),
    cat("flag"),
    num("src_bytes"),
    num("dst_bytes"),
    bin("land"),
    num("wrong_fragment"),
    num("urgent"),
    num("hot"),
    num("num_failed_logins"),
    bin("logged_in"),
    num("num_compromised"),
    num("root_shell"),
    num("su_attempted"),
    num("num_root"),
    num("num_file_creations"),
    num("num_shells"),
    num("num_access_files"),
    num("num_outbound_cmds"),
    bin("is_host_login"),
    bin("is_guest_login"),
    num("count"),
    num("srv_count"),
    num("serror_rate"),
    num("srv_serror_rate"),
    num("rerror_rate"),
    num("srv_rerror_rate"),
    num("same_srv_rate"),
    num("diff_srv_rate"),
    num("srv_diff_host_rate"),
    num("dst_host_count"),
    num("dst_host_srv_count"),
    num("dst_host_same_srv_rate"),
    num("dst_host_diff_srv_rate"),
    num("dst_host_same_src_port_rate"),
    num("dst_host_srv_diff_host_rate"),
    num("dst_host_serror_rate"),
    num("dst_host_srv_serror_rate"),
    num("dst_host_rerror_rate"),
    num("dst_host_srv_rerror_rate"),
];

pub fn kind_of(position: usize) -> AttributeKind {
    SCHEMA[position].kind
}
