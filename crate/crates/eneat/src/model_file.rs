//! The versioned text format for trained ensemble models.
//!
//! The format is line-oriented with a fixed field order: a header
//! (version, member count, input count, aggregator, scaler bounds), then
//! per member a metadata block and the genome records, and finally a
//! SHA-256 checksum line over every preceding byte. All decimals carry 17
//! significant digits, so `load(save(m))` is structurally equal to `m`
//! and `save(load(save(m)))` is byte-identical to `save(m)`.
//!
//! ```text
//! eneat-model 1
//! members <n>
//! inputs <d>
//! aggregator mode
//! scaler <d>
//! dim <i> <min> <max>            (d lines)
//! member <i>                      (n blocks)
//! seed <u64>
//! config <16 hex>
//! fitness <decimal>
//! nodes <count>
//! node <id> <input|hidden|output> <bias> <activation>
//! connections <count>
//! conn <innovation> <source> <target> <weight> <0|1>
//! checksum <64 hex>
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::ensemble::{Aggregator, EnsembleMember, EnsembleModel, MODEL_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::genome::{ConnectionGene, Genome, Innovation, NodeGene, NodeKind};
use crate::haralick::FeatureScaler;
use crate::network::NodeId;
use crate::textio::fmt_f64;

/// Serialize a model to its canonical byte encoding.
pub fn model_to_bytes(model: &EnsembleModel) -> Vec<u8> {
    let mut body = String::new();
    let w = &mut body;
    writeln!(w, "eneat-model {}", model.format_version).unwrap();
    writeln!(w, "members {}", model.n_members()).unwrap();
    writeln!(w, "inputs {}", model.input_count).unwrap();
    writeln!(w, "aggregator {}", model.aggregator).unwrap();
    writeln!(w, "scaler {}", model.scaler.dimension()).unwrap();
    for d in 0..model.scaler.dimension() {
        let (lo, hi) = model.scaler.bounds(d);
        writeln!(w, "dim {d} {} {}", fmt_f64(lo), fmt_f64(hi)).unwrap();
    }
    for (i, member) in model.members().iter().enumerate() {
        writeln!(w, "member {i}").unwrap();
        writeln!(w, "seed {}", member.seed).unwrap();
        writeln!(w, "config {}", member.config_digest).unwrap();
        writeln!(w, "fitness {}", fmt_f64(member.fitness)).unwrap();
        writeln!(w, "nodes {}", member.genome.nodes().len()).unwrap();
        for n in member.genome.nodes() {
            writeln!(
                w,
                "node {} {} {} {}",
                n.id,
                n.kind.name(),
                fmt_f64(n.bias),
                n.activation
            )
            .unwrap();
        }
        writeln!(w, "connections {}", member.genome.connections().len()).unwrap();
        for c in member.genome.connections() {
            writeln!(
                w,
                "conn {} {} {} {} {}",
                c.innovation,
                c.source,
                c.target,
                fmt_f64(c.weight),
                u8::from(c.enabled)
            )
            .unwrap();
        }
    }
    let checksum = Sha256::digest(body.as_bytes());
    body.push_str("checksum ");
    for b in checksum {
        write!(body, "{b:02x}").unwrap();
    }
    body.push('\n');
    body.into_bytes()
}

/// Write a model to a sink.
pub fn save_model<W: Write>(model: &EnsembleModel, sink: &mut W) -> Result<()> {
    sink.write_all(&model_to_bytes(model))?;
    Ok(())
}

/// Read a model from a source, verifying version and checksum.
pub fn load_model<R: Read>(source: &mut R) -> Result<EnsembleModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}

/// Parse a model from its byte encoding.
pub fn model_from_bytes(bytes: &[u8]) -> Result<EnsembleModel> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::MalformedModel("stream is not valid UTF-8".into()))?;
    let stripped = text
        .strip_suffix('\n')
        .ok_or_else(|| Error::MalformedModel("stream is truncated (no final newline)".into()))?;
    let (body, checksum_line) = match stripped.rfind('\n') {
        Some(idx) => (&text[..idx + 1], &stripped[idx + 1..]),
        None => return Err(Error::MalformedModel("missing checksum line".into())),
    };
    let claimed = checksum_line
        .strip_prefix("checksum ")
        .ok_or_else(|| Error::MalformedModel("last line is not a checksum".into()))?;
    let mut actual = String::with_capacity(64);
    for b in Sha256::digest(body.as_bytes()) {
        write!(actual, "{b:02x}").unwrap();
    }
    if claimed != actual {
        return Err(Error::ChecksumMismatch);
    }

    let mut lines = LineReader::new(body);
    let version_fields = lines.expect_tag("eneat-model", 2)?;
    let version: u32 = lines.parse_field(version_fields[1], "format version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: MODEL_FORMAT_VERSION,
            got: version,
        });
    }
    let n_members: usize = {
        let f = lines.expect_tag("members", 2)?;
        lines.parse_field(f[1], "member count")?
    };
    let input_count: usize = {
        let f = lines.expect_tag("inputs", 2)?;
        lines.parse_field(f[1], "input count")?
    };
    let aggregator: Aggregator = {
        let f = lines.expect_tag("aggregator", 2)?;
        f[1].parse()?
    };
    let scaler_dim: usize = {
        let f = lines.expect_tag("scaler", 2)?;
        lines.parse_field(f[1], "scaler dimension")?
    };
    let mut mins = Vec::with_capacity(scaler_dim);
    let mut maxs = Vec::with_capacity(scaler_dim);
    for d in 0..scaler_dim {
        let f = lines.expect_tag("dim", 4)?;
        let idx: usize = lines.parse_field(f[1], "scaler dimension index")?;
        if idx != d {
            return Err(lines.error(format!("scaler dimension {idx} out of order")));
        }
        mins.push(lines.parse_field(f[2], "scaler min")?);
        maxs.push(lines.parse_field(f[3], "scaler max")?);
    }
    let scaler = FeatureScaler::from_bounds(mins, maxs)?;

    let mut members = Vec::with_capacity(n_members);
    for i in 0..n_members {
        let f = lines.expect_tag("member", 2)?;
        let idx: usize = lines.parse_field(f[1], "member index")?;
        if idx != i {
            return Err(lines.error(format!("member {idx} out of order (expected {i})")));
        }
        let seed: u64 = {
            let f = lines.expect_tag("seed", 2)?;
            lines.parse_field(f[1], "seed")?
        };
        let config_digest = {
            let f = lines.expect_tag("config", 2)?;
            let digest = f[1].to_string();
            if digest.len() != 16 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(lines.error(format!("invalid config digest `{digest}`")));
            }
            digest
        };
        let fitness: f64 = {
            let f = lines.expect_tag("fitness", 2)?;
            lines.parse_field(f[1], "fitness")?
        };
        let node_count: usize = {
            let f = lines.expect_tag("nodes", 2)?;
            lines.parse_field(f[1], "node count")?
        };
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let f = lines.expect_tag("node", 5)?;
            let id: u32 = lines.parse_field(f[1], "node id")?;
            let kind = match f[2] {
                "input" => NodeKind::Input,
                "hidden" => NodeKind::Hidden,
                "output" => NodeKind::Output,
                other => return Err(lines.error(format!("unknown node kind `{other}`"))),
            };
            let bias: f64 = lines.parse_field(f[3], "bias")?;
            let activation = f[4]
                .parse()
                .map_err(|_| lines.error(format!("unknown activation `{}`", f[4])))?;
            nodes.push(NodeGene {
                id: NodeId(id),
                kind,
                bias,
                activation,
            });
        }
        let conn_count: usize = {
            let f = lines.expect_tag("connections", 2)?;
            lines.parse_field(f[1], "connection count")?
        };
        let mut connections = Vec::with_capacity(conn_count);
        for _ in 0..conn_count {
            let f = lines.expect_tag("conn", 6)?;
            let innovation: u64 = lines.parse_field(f[1], "innovation")?;
            let source: u32 = lines.parse_field(f[2], "source")?;
            let target: u32 = lines.parse_field(f[3], "target")?;
            let weight: f64 = lines.parse_field(f[4], "weight")?;
            let enabled = match f[5] {
                "0" => false,
                "1" => true,
                other => return Err(lines.error(format!("invalid enabled flag `{other}`"))),
            };
            connections.push(ConnectionGene {
                innovation: Innovation(innovation),
                source: NodeId(source),
                target: NodeId(target),
                weight,
                enabled,
            });
        }
        let genome = Genome::from_parts(nodes, connections, Some(fitness))
            .map_err(|e| Error::MalformedModel(format!("member {i} genome invalid: {e}")))?;
        members.push(EnsembleMember::new(seed, config_digest, fitness, genome)?);
    }
    if lines.next_line().is_some() {
        return Err(lines.error("trailing data after the last member".into()));
    }
    EnsembleModel::new(input_count, aggregator, scaler, members)
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn new(body: &'a str) -> Self {
        LineReader {
            lines: body.lines(),
            line_no: 0,
        }
    }

    fn next_line(&mut self) -> Option<&'a str> {
        self.line_no += 1;
        self.lines.next()
    }

    fn error(&self, msg: String) -> Error {
        Error::MalformedModel(format!("line {}: {msg}", self.line_no))
    }

    fn expect_tag(&mut self, tag: &str, fields: usize) -> Result<Vec<&'a str>> {
        let line = self
            .next_line()
            .ok_or_else(|| self.error(format!("unexpected end of stream (expected `{tag}`)")))?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != fields || parts[0] != tag {
            return Err(self.error(format!(
                "expected `{tag}` with {} fields, got `{line}`",
                fields - 1
            )));
        }
        Ok(parts)
    }

    fn parse_field<T: std::str::FromStr>(&self, field: &str, what: &str) -> Result<T> {
        field
            .parse()
            .map_err(|_| self.error(format!("invalid {what} `{field}`")))
    }
}
