//! Packet attribute tuple and the bucketization that maps raw header fields
//! onto the discrete attribute domains used by profiles and scorebooks.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// Smallest IPv4 datagram (header only).
pub const MIN_PACKET_SIZE: u16 = 20;

/// Upper bound on any single table (one attribute or the joint pair).
pub const MAX_TABLE_LEN: usize = 1 << 20;

/// Simulator-side label. The filter path never reads it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroundTruth {
    Legitimate,
    Attack,
    #[default]
    Unknown,
}

impl GroundTruth {
    pub fn code(self) -> &'static str {
        match self {
            GroundTruth::Legitimate => "L",
            GroundTruth::Attack => "A",
            GroundTruth::Unknown => "?",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "L" => Some(GroundTruth::Legitimate),
            "A" => Some(GroundTruth::Attack),
            "?" => Some(GroundTruth::Unknown),
            _ => None,
        }
    }
}

/// One packet's extracted header attributes.
///
/// `tcp_flags` is `None` exactly when the protocol is not TCP, and `dst_port`
/// is `None` exactly when the protocol is neither TCP nor UDP.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketRecord {
    pub timestamp: f64,
    pub src_ip: Ipv4Addr,
    pub protocol: u8,
    pub packet_size: u16,
    pub ttl: u8,
    pub tcp_flags: Option<u8>,
    pub dst_port: Option<u16>,
    pub ground_truth: GroundTruth,
}

impl PacketRecord {
    pub fn tcp(timestamp: f64, src_ip: Ipv4Addr, packet_size: u16, ttl: u8, flags: u8, port: u16) -> Self {
        Self {
            timestamp,
            src_ip,
            protocol: PROTO_TCP,
            packet_size,
            ttl,
            tcp_flags: Some(flags),
            dst_port: Some(port),
            ground_truth: GroundTruth::Unknown,
        }
    }

    pub fn udp(timestamp: f64, src_ip: Ipv4Addr, packet_size: u16, ttl: u8, port: u16) -> Self {
        Self {
            timestamp,
            src_ip,
            protocol: PROTO_UDP,
            packet_size,
            ttl,
            tcp_flags: None,
            dst_port: Some(port),
            ground_truth: GroundTruth::Unknown,
        }
    }

    /// A packet of a portless protocol (ICMP, GRE, ...).
    pub fn other(timestamp: f64, src_ip: Ipv4Addr, protocol: u8, packet_size: u16, ttl: u8) -> Self {
        Self {
            timestamp,
            src_ip,
            protocol,
            packet_size,
            ttl,
            tcp_flags: None,
            dst_port: None,
            ground_truth: GroundTruth::Unknown,
        }
    }

    pub fn labeled(mut self, ground_truth: GroundTruth) -> Self {
        self.ground_truth = ground_truth;
        self
    }

    /// Checks the field-coupling invariants. Returns the name of the first
    /// offending field and a message.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !self.timestamp.is_finite() || self.timestamp < 0.0 {
            return Err(("timestamp", format!("{} is not a non-negative number", self.timestamp)));
        }
        if self.packet_size < MIN_PACKET_SIZE {
            return Err(("packet_size", format!("{} is below {MIN_PACKET_SIZE}", self.packet_size)));
        }
        let is_tcp = self.protocol == PROTO_TCP;
        if is_tcp != self.tcp_flags.is_some() {
            return Err((
                "tcp_flags",
                format!("flags must be present exactly for TCP (protocol {})", self.protocol),
            ));
        }
        let has_port = is_tcp || self.protocol == PROTO_UDP;
        if has_port != self.dst_port.is_some() {
            return Err((
                "dst_port",
                format!("port must be present exactly for TCP/UDP (protocol {})", self.protocol),
            ));
        }
        Ok(())
    }
}

/// The six scored attributes, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    PacketSize,
    Ttl,
    Protocol,
    SrcPrefix,
    TcpFlags,
    ServerPort,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 6] = [
        AttributeKind::PacketSize,
        AttributeKind::Ttl,
        AttributeKind::Protocol,
        AttributeKind::SrcPrefix,
        AttributeKind::TcpFlags,
        AttributeKind::ServerPort,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::PacketSize => "packet_size",
            AttributeKind::Ttl => "ttl",
            AttributeKind::Protocol => "protocol",
            AttributeKind::SrcPrefix => "src_prefix",
            AttributeKind::TcpFlags => "tcp_flags",
            AttributeKind::ServerPort => "server_port",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttributeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttributeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown attribute `{s}`")))
    }
}

/// A histogram / scorebook axis: one attribute or the configured joint pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Single(AttributeKind),
    Joint(AttributeKind, AttributeKind),
}

impl Dimension {
    pub fn name(&self) -> String {
        match self {
            Dimension::Single(k) => k.name().to_owned(),
            Dimension::Joint(a, b) => format!("{a}+{b}"),
        }
    }
}

/// Binning parameters for every attribute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketConfig {
    pub size_bucket_edges: Vec<u32>,
    pub ttl_bucket_width: u32,
    pub src_prefix_len: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_pair: Option<(AttributeKind, AttributeKind)>,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self {
            size_bucket_edges: vec![64, 128, 256, 512, 1024, 1514],
            ttl_bucket_width: 8,
            src_prefix_len: 16,
            joint_pair: None,
        }
    }
}

impl BucketConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.size_bucket_edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("size bucket edges must be strictly ascending".into()));
        }
        if !(1..=256).contains(&self.ttl_bucket_width) {
            return Err(Error::InvalidConfig(format!(
                "ttl bucket width {} outside 1..=256",
                self.ttl_bucket_width
            )));
        }
        if self.src_prefix_len > 32 {
            return Err(Error::InvalidConfig(format!(
                "source prefix length {} outside 0..=32",
                self.src_prefix_len
            )));
        }
        if let Some((a, b)) = self.joint_pair {
            if a == b {
                return Err(Error::InvalidConfig(format!("joint pair repeats `{a}`")));
            }
        }
        for dim in self.dimensions() {
            let len = self.dimension_len(dim);
            if len > MAX_TABLE_LEN {
                return Err(Error::InvalidConfig(format!(
                    "table for `{}` would hold {len} buckets (limit {MAX_TABLE_LEN})",
                    dim.name()
                )));
            }
        }
        Ok(())
    }

    /// Scoring axes in canonical order: singles not covered by the joint pair,
    /// followed by the joint pair when configured.
    pub fn dimensions(&self) -> Vec<Dimension> {
        let mut dims: Vec<Dimension> = AttributeKind::ALL
            .into_iter()
            .filter(|k| match self.joint_pair {
                Some((a, b)) => *k != a && *k != b,
                None => true,
            })
            .map(Dimension::Single)
            .collect();
        if let Some((a, b)) = self.joint_pair {
            dims.push(Dimension::Joint(a, b));
        }
        dims
    }

    pub fn dimension_len(&self, dim: Dimension) -> usize {
        match dim {
            Dimension::Single(k) => bucket_count(k, self),
            Dimension::Joint(a, b) => bucket_count(a, self).saturating_mul(bucket_count(b, self)),
        }
    }
}

/// Number of buckets in the domain of `kind`, including the NOT_APPLICABLE
/// bucket for TCP flags and server port.
pub fn bucket_count(kind: AttributeKind, cfg: &BucketConfig) -> usize {
    match kind {
        AttributeKind::PacketSize => cfg.size_bucket_edges.len() + 1,
        AttributeKind::Ttl => 256usize.div_ceil(cfg.ttl_bucket_width as usize),
        AttributeKind::Protocol => 256,
        AttributeKind::SrcPrefix => 1usize << cfg.src_prefix_len.min(32),
        AttributeKind::TcpFlags => 257,
        AttributeKind::ServerPort => 65537,
    }
}

/// Maps one attribute of `packet` to its bucket index.
#[inline]
pub fn bucketize(packet: &PacketRecord, kind: AttributeKind, cfg: &BucketConfig) -> usize {
    match kind {
        AttributeKind::PacketSize => {
            let size = u32::from(packet.packet_size);
            cfg.size_bucket_edges.partition_point(|&e| e <= size)
        }
        AttributeKind::Ttl => usize::from(packet.ttl) / cfg.ttl_bucket_width as usize,
        AttributeKind::Protocol => usize::from(packet.protocol),
        AttributeKind::SrcPrefix => prefix_bucket(packet.src_ip, cfg.src_prefix_len),
        AttributeKind::TcpFlags => packet.tcp_flags.map_or(256, usize::from),
        AttributeKind::ServerPort => packet.dst_port.map_or(65536, usize::from),
    }
}

#[inline]
pub fn bucketize_dim(packet: &PacketRecord, dim: Dimension, cfg: &BucketConfig) -> usize {
    match dim {
        Dimension::Single(k) => bucketize(packet, k, cfg),
        Dimension::Joint(a, b) => bucketize(packet, a, cfg) * bucket_count(b, cfg) + bucketize(packet, b, cfg),
    }
}

#[inline]
pub fn prefix_bucket(addr: Ipv4Addr, prefix_len: u8) -> usize {
    if prefix_len == 0 {
        0
    } else {
        (u32::from(addr) >> (32 - u32::from(prefix_len.min(32)))) as usize
    }
}

/// Network address of a source-prefix bucket.
pub fn prefix_network(bucket: usize, prefix_len: u8) -> Ipv4Addr {
    if prefix_len == 0 {
        Ipv4Addr::UNSPECIFIED
    } else {
        Ipv4Addr::from((bucket as u32) << (32 - u32::from(prefix_len)))
    }
}
