//! Arrival set persistence.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! "UQKD" | u32 version | u64 n_photons | u64 n_records | u64 seed
//!        | u32 len | len bytes of UTF-8 metadata | u32 CRC32(all preceding bytes)
//! n_records × (f64 hit_x, f64 hit_y, f64 delay, f64 aoa, f64 weight)
//! u32 CRC32(record bytes)
//! ```
//!
//! The metadata block is the campaign's canonical config text followed by
//! `run.*` lines carrying the absorbed/escaped tallies and the producing
//! software version.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::config::LinkConfig;
use crate::error::{Error, Result};
use crate::transport::{run_photons, ArrivalRecord, CampaignOutput};

pub const MAGIC: &[u8; 4] = b"UQKD";
pub const FORMAT_VERSION: u32 = 1;
pub const RECORD_BYTES: usize = 40;
pub const CSV_HEADER: &str = "hit_x_m,hit_y_m,delay_s,aoa_rad,weight";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Totals {
    pub arrived: u64,
    pub absorbed: u64,
    pub escaped: u64,
    /// Sum of record weights in record order.
    pub arrived_weight: f64,
}

/// Every receiver-plane arrival of one campaign, in photon-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSet {
    /// Campaign configuration, with the runtime worker count cleared.
    pub config: LinkConfig,
    pub n_photons: u64,
    pub seed: u64,
    pub software_version: String,
    pub records: Vec<ArrivalRecord>,
    pub totals: Totals,
}

fn sum_weights(records: &[ArrivalRecord]) -> f64 {
    records.iter().map(|r| r.weight).sum()
}

impl ArrivalSet {
    /// Wrap campaign output. Photon count and seed are taken from
    /// `config.simulation`.
    pub fn from_campaign(config: &LinkConfig, output: CampaignOutput) -> Self {
        let mut config = config.clone();
        config.simulation.workers = 0;
        let totals = Totals {
            arrived: output.stats.arrived,
            absorbed: output.stats.absorbed,
            escaped: output.stats.escaped,
            arrived_weight: sum_weights(&output.records),
        };
        Self {
            n_photons: config.simulation.photons,
            seed: config.simulation.seed,
            config,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            records: output.records,
            totals,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.totals;
        if t.arrived != self.records.len() as u64 {
            return Err(Error::domain(format!(
                "arrived tally {} does not match {} records",
                t.arrived,
                self.records.len()
            )));
        }
        if t.arrived + t.absorbed + t.escaped != self.n_photons {
            return Err(Error::domain(format!(
                "tallies {}+{}+{} do not sum to {} photons",
                t.arrived, t.absorbed, t.escaped, self.n_photons
            )));
        }
        Ok(())
    }

    fn metadata_text(&self) -> String {
        format!(
            "{}run.absorbed = {}\nrun.escaped = {}\nrun.version = {}\n",
            self.config.campaign_text(),
            self.totals.absorbed,
            self.totals.escaped,
            self.software_version
        )
    }

    fn header_bytes(&self) -> Vec<u8> {
        let meta = self.metadata_text();
        let mut h = Vec::with_capacity(40 + meta.len());
        h.extend_from_slice(MAGIC);
        h.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        h.extend_from_slice(&self.n_photons.to_le_bytes());
        h.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        h.extend_from_slice(&self.seed.to_le_bytes());
        h.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        h.extend_from_slice(meta.as_bytes());
        let crc = crc32fast::hash(&h);
        h.extend_from_slice(&crc.to_le_bytes());
        h
    }

    /// Length in bytes of everything before the first record.
    pub fn header_len(&self) -> usize {
        self.header_bytes().len()
    }
}

fn record_bytes(r: &ArrivalRecord) -> [u8; RECORD_BYTES] {
    let mut b = [0u8; RECORD_BYTES];
    for (i, v) in [r.hit_x, r.hit_y, r.delay, r.aoa, r.weight].into_iter().enumerate() {
        b[i * 8..(i + 1) * 8].copy_from_slice(&v.to_le_bytes());
    }
    b
}

/// Write `set` to `path`.
pub fn persist(set: &ArrivalSet, path: &Path) -> Result<()> {
    set.validate()?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&set.header_bytes()).map_err(io)?;
    let mut crc = crc32fast::Hasher::new();
    for r in &set.records {
        let b = record_bytes(r);
        crc.update(&b);
        w.write_all(&b).map_err(io)?;
    }
    w.write_all(&crc.finalize().to_le_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Integrity {
                path: self.path.to_path_buf(),
                message: format!("truncated file: needed {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Read an arrival set written by [`persist`].
pub fn load(path: &Path) -> Result<ArrivalSet> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let integrity = |message: String| Error::Integrity {
        path: path.to_path_buf(),
        message,
    };

    let mut c = Cursor { buf: &buf, pos: 0, path };
    if c.take(4)? != MAGIC {
        return Err(integrity("bad magic".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let n_photons = c.u64()?;
    let n_records = c.u64()?;
    let seed = c.u64()?;
    let meta_len = c.u32()? as usize;
    let meta = c.take(meta_len)?;
    let header_end = c.pos;
    let stored = c.u32()?;
    if crc32fast::hash(&buf[..header_end]) != stored {
        return Err(integrity("header CRC mismatch".into()));
    }
    let meta = std::str::from_utf8(meta).map_err(|e| integrity(format!("metadata is not UTF-8: {e}")))?;

    let body_len = (n_records as usize)
        .checked_mul(RECORD_BYTES)
        .ok_or_else(|| integrity("record count overflows".into()))?;
    if buf.len() != c.pos + body_len + 4 {
        return Err(integrity(format!(
            "expected {} bytes for {n_records} records, file has {}",
            c.pos + body_len + 4,
            buf.len()
        )));
    }
    let body = &buf[c.pos..c.pos + body_len];
    let stored = u32::from_le_bytes(buf[c.pos + body_len..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(integrity("record CRC mismatch".into()));
    }
    let mut rc = Cursor { buf: body, pos: 0, path };
    let mut records = Vec::with_capacity(n_records as usize);
    for _ in 0..n_records {
        records.push(ArrivalRecord {
            hit_x: rc.f64()?,
            hit_y: rc.f64()?,
            delay: rc.f64()?,
            aoa: rc.f64()?,
            weight: rc.f64()?,
        });
    }

    let mut config_text = String::new();
    let (mut absorbed, mut escaped, mut software_version) = (None, None, None);
    for line in meta.lines() {
        match line.split_once(" = ") {
            Some(("run.absorbed", v)) => absorbed = v.parse::<u64>().ok(),
            Some(("run.escaped", v)) => escaped = v.parse::<u64>().ok(),
            Some(("run.version", v)) => software_version = Some(v.to_string()),
            _ => {
                config_text.push_str(line);
                config_text.push('\n');
            }
        }
    }
    let config = LinkConfig::parse(&config_text)?;
    let (Some(absorbed), Some(escaped), Some(software_version)) = (absorbed, escaped, software_version) else {
        return Err(integrity("metadata lacks run tallies".into()));
    };

    let set = ArrivalSet {
        config,
        n_photons,
        seed,
        software_version,
        totals: Totals {
            arrived: n_records,
            absorbed,
            escaped,
            arrived_weight: sum_weights(&records),
        },
        records,
    };
    set.validate().map_err(|e| integrity(e.to_string()))?;
    Ok(set)
}

/// Text export with 17 significant digits, delay in seconds.
pub fn export_csv(set: &ArrivalSet, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{CSV_HEADER}").map_err(io)?;
    for r in &set.records {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.hit_x, r.hit_y, r.delay, r.aoa, r.weight
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read records back from [`export_csv`] output.
pub fn import_csv(path: &Path) -> Result<Vec<ArrivalRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |m: String| Error::Integrity {
        path: path.to_path_buf(),
        message: m,
    };
    match lines.next() {
        Some(Ok(h)) if h == CSV_HEADER => {}
        _ => return Err(bad("missing CSV header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let v: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        let [hit_x, hit_y, delay, aoa, weight] = v[..] else {
            return Err(bad(format!("row {} has {} columns", i + 1, v.len())));
        };
        out.push(ArrivalRecord {
            hit_x,
            hit_y,
            delay,
            aoa,
            weight,
        });
    }
    Ok(out)
}

/// Run the campaign described by `config` (photons, seed and workers from
/// `config.simulation`).
pub fn run_campaign(config: &LinkConfig) -> Result<ArrivalSet> {
    let spec = config.campaign_spec()?;
    let out = run_photons(&spec, config.simulation.photons, config.simulation.seed, config.simulation.workers)?;
    Ok(ArrivalSet::from_campaign(config, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set(n: usize) -> ArrivalSet {
        let records: Vec<ArrivalRecord> = (0..n)
            .map(|i| {
                let x = i as f64;
                ArrivalRecord {
                    hit_x: 0.01 * (x * 0.37).sin(),
                    hit_y: -0.02 * (x * 0.11).cos(),
                    delay: x * 1.234_567_891e-12,
                    aoa: (x * 0.001).min(1.5),
                    weight: 0.245f64.powi((i % 7) as i32),
                }
            })
            .collect();
        let mut config = LinkConfig::default();
        config.simulation.photons = 10 * n as u64 + 3;
        let mut set = ArrivalSet::from_campaign(
            &config,
            CampaignOutput {
                records,
                stats: Default::default(),
            },
        );
        set.totals.arrived = n as u64;
        set.totals.absorbed = 8 * n as u64;
        set.totals.escaped = n as u64 + 3;
        set
    }

    #[test]
    fn empty_set_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.uqkd");
        let set = sample_set(0);
        persist(&set, &p).unwrap();
        let back = load(&p).unwrap();
        assert_eq!(back, set);
        assert!(back.is_empty());
    }

    #[test]
    fn file_size_is_header_plus_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.uqkd");
        let set = sample_set(123);
        persist(&set, &p).unwrap();
        let len = std::fs::metadata(&p).unwrap().len() as usize;
        assert_eq!(len, set.header_len() + RECORD_BYTES * 123 + 4);
    }

    #[test]
    fn corrupted_bytes_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.uqkd");
        let set = sample_set(50);
        persist(&set, &p).unwrap();
        let clean = std::fs::read(&p).unwrap();

        let mut bad = clean.clone();
        let i = set.header_len() + 17;
        bad[i] ^= 0x40;
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(load(&p), Err(Error::Integrity { ref message, .. }) if message.contains("record CRC")));

        let mut bad = clean.clone();
        bad[30] ^= 0x01;
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(load(&p), Err(Error::Integrity { .. })));

        let mut bad = clean.clone();
        bad[4] = 2;
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(load(&p), Err(Error::Version { found: 2, expected: 1 })));

        std::fs::write(&p, &clean[..clean.len() - 9]).unwrap();
        assert!(matches!(load(&p), Err(Error::Integrity { .. })));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load(Path::new("/nonexistent/arrivals.uqkd")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/arrivals.uqkd"));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.csv");
        let mut set = sample_set(2);
        set.records.truncate(1);
        set.records[0].delay = 2.5e-9;
        set.totals.arrived = 1;
        export_csv(&set, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let delay_field = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
        assert_eq!(delay_field.parse::<f64>().unwrap(), 2.5e-9);
    }

    #[test]
    fn csv_reimport_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("many.csv");
        let set = sample_set(500);
        export_csv(&set, &p).unwrap();
        assert_eq!(import_csv(&p).unwrap(), set.records);
    }

    #[test]
    fn inconsistent_tallies_refused() {
        let mut set = sample_set(5);
        set.totals.escaped += 1;
        let dir = tempfile::tempdir().unwrap();
        assert!(persist(&set, &dir.path().join("x")).is_err());
    }
}
