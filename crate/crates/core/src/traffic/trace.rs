use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use crate::error::{Error, Result};
use crate::packet_model::{GroundTruth, PacketRecord};

pub const TRACE_HEADER: [&str; 8] =
    ["timestamp", "src_ip", "protocol", "packet_size", "ttl", "tcp_flags", "dst_port", "ground_truth"];

const NOT_APPLICABLE: &str = "-";

/// Streaming reader over a trace CSV. Yields records in file order and stops
/// after the first error.
pub struct TraceReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    header_checked: bool,
    previous: Option<f64>,
    failed: bool,
}

impl TraceReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: Read> TraceReader<R> {
    pub fn new(input: R) -> Self {
        let rows = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input)
            .into_records();
        Self { rows, header_checked: false, previous: None, failed: false }
    }

    fn parse(&mut self, row: &csv::StringRecord) -> Result<PacketRecord> {
        let line = row.position().map_or(0, |p| p.line());
        let err = |field: &'static str, message: String| Error::TraceParse { line, field, message };
        if row.len() != TRACE_HEADER.len() {
            return Err(err("row", format!("expected {} fields, found {}", TRACE_HEADER.len(), row.len())));
        }
        let f = |i: usize| &row[i];

        let timestamp: f64 = f(0).parse().map_err(|_| err("timestamp", format!("`{}` is not a number", f(0))))?;
        let src_ip: Ipv4Addr = f(1).parse().map_err(|_| err("src_ip", format!("`{}` is not a dotted quad", f(1))))?;
        let protocol: u8 = f(2).parse().map_err(|_| err("protocol", format!("`{}` is not in 0..=255", f(2))))?;
        let packet_size: u16 =
            f(3).parse().map_err(|_| err("packet_size", format!("`{}` is not in 20..=65535", f(3))))?;
        let ttl: u8 = f(4).parse().map_err(|_| err("ttl", format!("`{}` is not in 0..=255", f(4))))?;
        let tcp_flags = match f(5) {
            NOT_APPLICABLE => None,
            s => {
                let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
                Some(u8::from_str_radix(digits, 16).map_err(|_| err("tcp_flags", format!("`{s}` is not a hex byte")))?)
            }
        };
        let dst_port = match f(6) {
            NOT_APPLICABLE => None,
            s => Some(s.parse::<u16>().map_err(|_| err("dst_port", format!("`{s}` is not in 0..=65535")))?),
        };
        let ground_truth =
            GroundTruth::from_code(f(7)).ok_or_else(|| err("ground_truth", format!("`{}` is not L, A or ?", f(7))))?;

        let record = PacketRecord { timestamp, src_ip, protocol, packet_size, ttl, tcp_flags, dst_port, ground_truth };
        record.check().map_err(|(field, message)| err(field, message))?;
        if let Some(previous) = self.previous {
            if timestamp < previous {
                return Err(Error::NonMonotoneTrace { line, timestamp, previous });
            }
        }
        self.previous = Some(timestamp);
        Ok(record)
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let row = match self.rows.next()? {
                Ok(row) => row,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            if !self.header_checked {
                self.header_checked = true;
                if row.iter().ne(TRACE_HEADER) {
                    self.failed = true;
                    let line = row.position().map_or(1, |p| p.line());
                    return Some(Err(Error::TraceParse {
                        line,
                        field: "header",
                        message: format!("expected `{}`", TRACE_HEADER.join(",")),
                    }));
                }
                continue;
            }
            let parsed = self.parse(&row);
            self.failed = parsed.is_err();
            return Some(parsed);
        }
    }
}

/// Reads a whole trace into memory.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<PacketRecord>> {
    TraceReader::open(path)?.collect()
}

pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        out.write_record(TRACE_HEADER)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, p: &PacketRecord) -> Result<()> {
        let flags = p.tcp_flags.map_or_else(|| NOT_APPLICABLE.to_owned(), |f| format!("0x{f:02x}"));
        let port = p.dst_port.map_or_else(|| NOT_APPLICABLE.to_owned(), |v| v.to_string());
        self.out.write_record([
            p.timestamp.to_string(),
            p.src_ip.to_string(),
            p.protocol.to_string(),
            p.packet_size.to_string(),
            p.ttl.to_string(),
            flags,
            port,
            p.ground_truth.code().to_owned(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(io::Error::other(e.to_string())))
    }
}

pub fn write_trace<'a>(path: impl AsRef<Path>, packets: impl IntoIterator<Item = &'a PacketRecord>) -> Result<()> {
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?))?;
    for p in packets {
        w.write(p)?;
    }
    w.finish()?.flush()?;
    Ok(())
}
