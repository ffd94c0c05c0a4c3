//! Streaming ingestion of LODES origin-destination CSV files.
//!
//! The OD main file is a comma-delimited table with a header row
//! (`w_geocode,h_geocode,S000,...,createdate`), optionally gzip-compressed.
//! Only the work geocode, home geocode, and total-jobs (`S000`) columns are
//! consumed; the job-segment columns are skipped. Parsing is line-oriented
//! and holds a bounded buffer, so memory use is independent of file length.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::bufread::MultiGzDecoder;
use thiserror::Error;

use crate::geoid::BlockId;

/// Gzip magic bytes used for format auto-detection.
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// One origin-destination payroll record: jobs located in `work_block`
/// held by residents of `home_block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ODFlow {
    pub work_block: BlockId,
    pub home_block: BlockId,
    pub jobs: u64,
}

impl ODFlow {
    /// True iff both geocodes carry the given 2-digit state FIPS prefix.
    ///
    /// The OD "main" file is within-state by construction; a false result
    /// indicates a file mix-up (wrong state, or an aux file).
    pub fn is_within_state(&self, state_fips: u64) -> bool {
        self.work_block.state_fips() == state_fips && self.home_block.state_fips() == state_fips
    }
}

/// True iff both geocodes of `flow` start with `state_fips`.
pub fn validate_state(flow: &ODFlow, state_fips: u64) -> bool {
    flow.is_within_state(state_fips)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Demote malformed rows from fatal errors to counted-and-skipped.
    pub lenient: bool,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column {0:?} in header")]
    MissingColumn(&'static str),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("truncated gzip stream")]
    TruncatedGzip,
    #[error("empty input: no header row")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Rows consumed and rows skipped (lenient mode only) by a parse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseCounters {
    pub rows_parsed: u64,
    pub rows_skipped: u64,
}

impl ParseCounters {
    pub fn merge(&mut self, other: ParseCounters) {
        self.rows_parsed += other.rows_parsed;
        self.rows_skipped += other.rows_skipped;
    }
}

/// Column positions of the three consumed fields, plus the expected
/// field count for row-shape validation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ColumnMap {
    work: usize,
    home: usize,
    jobs: usize,
    pub(crate) field_count: usize,
}

impl ColumnMap {
    pub(crate) fn from_header(header: &[u8]) -> Result<Self, IngestError> {
        let header = strip_bom(trim_line(header));
        let mut work = None;
        let mut home = None;
        let mut jobs = None;
        let mut count = 0;
        for (idx, field) in header.split(|&b| b == b',').enumerate() {
            match field {
                b"w_geocode" => work = Some(idx),
                b"h_geocode" => home = Some(idx),
                b"S000" => jobs = Some(idx),
                _ => {}
            }
            count = idx + 1;
        }
        Ok(ColumnMap {
            work: work.ok_or(IngestError::MissingColumn("w_geocode"))?,
            home: home.ok_or(IngestError::MissingColumn("h_geocode"))?,
            jobs: jobs.ok_or(IngestError::MissingColumn("S000"))?,
            field_count: count,
        })
    }
}

fn strip_bom(line: &[u8]) -> &[u8] {
    line.strip_prefix(&[0xef, 0xbb, 0xbf]).unwrap_or(line)
}

fn trim_line(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}

fn parse_block_field(field: &[u8]) -> Result<BlockId, String> {
    std::str::from_utf8(field)
        .ok()
        .and_then(|s| BlockId::parse(s).ok())
        .ok_or_else(|| {
            format!(
                "geocode {:?} is not 15 digits",
                String::from_utf8_lossy(field)
            )
        })
}

fn parse_jobs_field(field: &[u8]) -> Result<u64, String> {
    if field.is_empty() || !field.iter().all(u8::is_ascii_digit) {
        return Err(format!(
            "job count {:?} is not a non-negative integer",
            String::from_utf8_lossy(field)
        ));
    }
    let mut value: u64 = 0;
    for &b in field {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u64::from(b - b'0')))
            .ok_or_else(|| "job count overflows".to_string())?;
    }
    if value == 0 {
        // LODES omits zero rows; a parsed zero means the file is corrupt.
        return Err("job count is zero".to_string());
    }
    Ok(value)
}

/// Parse one data row. The caller is responsible for attaching line numbers.
pub(crate) fn parse_row(line: &[u8], cols: &ColumnMap) -> Result<ODFlow, String> {
    let line = trim_line(line);
    let mut work = None;
    let mut home = None;
    let mut jobs = None;
    let mut count = 0;
    for (idx, field) in line.split(|&b| b == b',').enumerate() {
        if idx == cols.work {
            work = Some(parse_block_field(field)?);
        }
        if idx == cols.home {
            home = Some(parse_block_field(field)?);
        }
        if idx == cols.jobs {
            jobs = Some(parse_jobs_field(field)?);
        }
        count = idx + 1;
    }
    if count != cols.field_count {
        return Err(format!(
            "expected {} fields, found {}",
            cols.field_count, count
        ));
    }
    Ok(ODFlow {
        // count == field_count > max(required indices), so all three are set
        work_block: work.unwrap(),
        home_block: home.unwrap(),
        jobs: jobs.unwrap(),
    })
}

/// A buffered source with gzip auto-detection applied.
pub struct OdSource {
    reader: Box<dyn BufRead + Send>,
    is_gzip: bool,
}

impl OdSource {
    /// Wrap any byte stream, sniffing the gzip magic bytes.
    pub fn new<R: Read + Send + 'static>(source: R) -> io::Result<Self> {
        let mut buffered = BufReader::with_capacity(256 * 1024, source);
        let head = buffered.fill_buf()?;
        let is_gzip = head.starts_with(&GZIP_MAGIC);
        let reader: Box<dyn BufRead + Send> = if is_gzip {
            Box::new(BufReader::with_capacity(
                256 * 1024,
                MultiGzDecoder::new(buffered),
            ))
        } else {
            Box::new(buffered)
        };
        Ok(OdSource { reader, is_gzip })
    }

    pub fn open(path: &Path) -> io::Result<Self> {
        Self::new(File::open(path)?)
    }

    pub fn is_gzip(&self) -> bool {
        self.is_gzip
    }

    /// `read_until`, with gzip truncation mapped to `TruncatedGzip`.
    pub(crate) fn read_line_bytes(&mut self, buf: &mut Vec<u8>) -> Result<usize, IngestError> {
        match self.reader.read_until(b'\n', buf) {
            Ok(n) => Ok(n),
            Err(e) => Err(self.map_io(e)),
        }
    }

    pub(crate) fn map_io(&self, e: io::Error) -> IngestError {
        if self.is_gzip && matches!(e.kind(), io::ErrorKind::UnexpectedEof | io::ErrorKind::InvalidData) {
            IngestError::TruncatedGzip
        } else {
            IngestError::Io(e)
        }
    }
}

/// Streaming parser: an iterator of `ODFlow` in file order.
///
/// Errors are yielded in place of a record; in strict mode the stream fuses
/// after the first error, in lenient mode malformed rows are counted and
/// skipped (I/O errors remain fatal).
pub struct OdReader {
    source: OdSource,
    cols: ColumnMap,
    options: ParseOptions,
    counters: ParseCounters,
    line: u64,
    buf: Vec<u8>,
    fused: bool,
}

impl OdReader {
    pub fn new(source: OdSource, options: ParseOptions) -> Result<Self, IngestError> {
        let mut source = source;
        let mut header = Vec::new();
        let n = source.read_line_bytes(&mut header)?;
        if n == 0 {
            return Err(IngestError::EmptyInput);
        }
        let cols = ColumnMap::from_header(&header)?;
        Ok(OdReader {
            source,
            cols,
            options,
            counters: ParseCounters::default(),
            line: 1,
            buf: Vec::with_capacity(128),
            fused: false,
        })
    }

    pub fn counters(&self) -> ParseCounters {
        self.counters
    }

    /// 1-based file line of the most recently read row.
    pub fn current_line(&self) -> u64 {
        self.line
    }

    fn next_flow(&mut self) -> Option<Result<ODFlow, IngestError>> {
        if self.fused {
            return None;
        }
        loop {
            self.buf.clear();
            match self.source.read_line_bytes(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.fused = true;
                    return Some(Err(e));
                }
            }
            self.line += 1;
            if trim_line(&self.buf).is_empty() {
                continue;
            }
            match parse_row(&self.buf, &self.cols) {
                Ok(flow) => {
                    self.counters.rows_parsed += 1;
                    return Some(Ok(flow));
                }
                Err(reason) if self.options.lenient => {
                    self.counters.rows_skipped += 1;
                    log::debug!("skipping malformed row at line {}: {}", self.line, reason);
                }
                Err(reason) => {
                    self.fused = true;
                    return Some(Err(IngestError::MalformedRow {
                        line: self.line,
                        reason,
                    }));
                }
            }
        }
    }
}

impl Iterator for OdReader {
    type Item = Result<ODFlow, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_flow()
    }
}

/// Open a byte stream as a validated LODES OD stream.
///
/// The source may be plain CSV or gzip-compressed (detected by magic bytes);
/// the header row must contain `w_geocode`, `h_geocode`, and `S000`.
pub fn parse_od_stream<R: Read + Send + 'static>(
    source: R,
    options: ParseOptions,
) -> Result<OdReader, IngestError> {
    OdReader::new(OdSource::new(source)?, options)
}

/// Open a LODES OD file from disk.
pub fn parse_od_path(path: &Path, options: ParseOptions) -> Result<OdReader, IngestError> {
    OdReader::new(OdSource::open(path).map_err(IngestError::Io)?, options)
}

/// Serialize flows back to the minimal three-column OD CSV form.
pub fn write_od_csv<W: Write, I: IntoIterator<Item = ODFlow>>(
    mut writer: W,
    flows: I,
) -> io::Result<()> {
    writeln!(writer, "w_geocode,h_geocode,S000")?;
    for flow in flows {
        writeln!(writer, "{},{},{}", flow.work_block, flow.home_block, flow.jobs)?;
    }
    Ok(())
}

/// Decompressed chunks cut on line boundaries, for parallel consumption.
///
/// Each chunk starts immediately after a newline and ends on one (except
/// possibly the last), and carries the 1-based file line number of its first
/// line so workers can report exact error positions.
#[cfg(feature = "parallel")]
pub(crate) struct ChunkReader {
    source: OdSource,
    next_line: u64,
    chunk_size: usize,
    done: bool,
}

#[cfg(feature = "parallel")]
pub(crate) struct Chunk {
    pub first_line: u64,
    pub data: Vec<u8>,
}

#[cfg(feature = "parallel")]
impl ChunkReader {
    /// `first_line` is the line number of the first unread line in `source`.
    pub(crate) fn new(source: OdSource, first_line: u64, chunk_size: usize) -> Self {
        ChunkReader {
            source,
            next_line: first_line,
            chunk_size,
            done: false,
        }
    }
}

#[cfg(feature = "parallel")]
impl Iterator for ChunkReader {
    type Item = Result<Chunk, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut data = Vec::with_capacity(self.chunk_size + 4096);
        // Fill up to chunk_size, then extend to the next newline so no line
        // straddles two chunks.
        loop {
            let start = data.len();
            if start >= self.chunk_size {
                break;
            }
            data.resize(self.chunk_size, 0);
            let n = match read_fully(&mut self.source.reader, &mut data[start..]) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(self.source.map_io(e)));
                }
            };
            data.truncate(start + n);
            if n == 0 {
                self.done = true;
                break;
            }
        }
        if !self.done && data.last() != Some(&b'\n') {
            match self.source.read_line_bytes(&mut data) {
                Ok(0) => self.done = true,
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        if data.is_empty() {
            return None;
        }
        let first_line = self.next_line;
        self.next_line += data.iter().filter(|&&b| b == b'\n').count() as u64;
        Some(Ok(Chunk { first_line, data }))
    }
}

#[cfg(feature = "parallel")]
fn read_fully<R: Read + ?Sized>(reader: &mut R, mut buf: &mut [u8]) -> io::Result<usize> {
    let mut total = 0;
    while !buf.is_empty() {
        match reader.read(buf) {
            Ok(0) => break,
            Ok(n) => {
                total += n;
                buf = &mut buf[n..];
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// Split an `OdSource` into its header's column map and a chunk iterator
/// over the remaining data.
#[cfg(feature = "parallel")]
pub(crate) fn into_chunks(
    mut source: OdSource,
    chunk_size: usize,
) -> Result<(ColumnMap, ChunkReader), IngestError> {
    let mut header = Vec::new();
    let n = source.read_line_bytes(&mut header)?;
    if n == 0 {
        return Err(IngestError::EmptyInput);
    }
    let cols = ColumnMap::from_header(&header)?;
    Ok((cols, ChunkReader::new(source, 2, chunk_size)))
}
