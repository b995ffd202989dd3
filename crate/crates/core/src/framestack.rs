//! Binary frame stack files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field            | type        |
//! |------------------|-------------|
//! | magic            | `b"TGFSTACK"` |
//! | version          | u32 (= 1)   |
//! | channels         | u32 (= 3)   |
//! | detector points  | u64         |
//! | detector pitch   | f64, metres |
//! | detector center  | f64, metres |
//! | frame count      | u64         |
//! | has master seed  | u64 (0 or 1)|
//! | master seed      | u64         |
//! | seed count       | u64         |
//! | frame seeds      | u64 × seed count |
//!
//! followed by `frame count` records, each the three channel intensity
//! vectors `ch1, ch2, ch3` as f64.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::optics::{Frame, FrameSet, SeedManifest};

pub const MAGIC: &[u8; 8] = b"TGFSTACK";
pub const FORMAT_VERSION: u32 = 1;
pub const CHANNELS: u32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct StackHeader {
    pub grid: GridSpec,
    pub frame_count: u64,
    pub seeds: SeedManifest,
}

impl StackHeader {
    fn byte_len(&self) -> u64 {
        8 + 4 + 4 + 8 * 3 + 8 + 8 + 8 + 8 + 8 * self.seeds.frame_seeds.len() as u64
    }

    fn record_len(&self) -> u64 {
        8 * CHANNELS as u64 * self.grid.n_points as u64
    }

    fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&CHANNELS.to_le_bytes())?;
        w.write_all(&(self.grid.n_points as u64).to_le_bytes())?;
        w.write_all(&self.grid.pitch.to_le_bytes())?;
        w.write_all(&self.grid.center.to_le_bytes())?;
        w.write_all(&self.frame_count.to_le_bytes())?;
        w.write_all(&u64::from(self.seeds.master_seed.is_some()).to_le_bytes())?;
        w.write_all(&self.seeds.master_seed.unwrap_or(0).to_le_bytes())?;
        w.write_all(&(self.seeds.frame_seeds.len() as u64).to_le_bytes())?;
        for s in &self.seeds.frame_seeds {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }
}

fn short_header(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("file ends inside the header".into())
    } else {
        Error::Io(e)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b).map_err(short_header)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b).map_err(short_header)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    read_u64(r).map(f64::from_bits)
}

/// Streaming writer; the frame count is declared up front and checked by
/// [`StackWriter::finish`].
pub struct StackWriter<W: Write> {
    out: W,
    header: StackHeader,
    written: u64,
}

impl StackWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: StackHeader) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> StackWriter<W> {
    pub fn new(mut out: W, header: StackHeader) -> Result<Self> {
        header.grid.validate()?;
        header.write_to(&mut out)?;
        Ok(Self {
            out,
            header,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<()> {
        if self.written == self.header.frame_count {
            return Err(Error::Format(format!(
                "header declares {} frames, refusing to write more",
                self.header.frame_count
            )));
        }
        frame.validate(self.header.grid.n_points, self.written)?;
        let mut buf = Vec::with_capacity(self.header.record_len() as usize);
        for ch in &frame.channels {
            for v in ch {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        self.out.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.frame_count {
            return Err(Error::Truncated {
                expected: self.header.frame_count,
                found: self.written,
            });
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_frames(path: &Path, frames: &FrameSet) -> Result<()> {
    let header = StackHeader {
        grid: *frames.detector_grid(),
        frame_count: frames.len() as u64,
        seeds: frames.seed_manifest().clone(),
    };
    let mut w = StackWriter::create(path, header)?;
    for f in frames.frames() {
        w.write_frame(f)?;
    }
    w.finish()?;
    Ok(())
}

/// Frame-at-a-time reader. Construction checks the header and that the
/// payload length matches the declared frame count.
pub struct StackReader<R: Read> {
    input: R,
    header: StackHeader,
    next: u64,
}

impl StackReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        Self::new(BufReader::new(file), len)
    }
}

impl<R: Read> StackReader<R> {
    /// `total_len` is the byte length of the whole stream.
    pub fn new(mut input: R, total_len: u64) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(short_header)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a frame stack (bad magic)".into()));
        }
        let version = read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version}, this reader handles {FORMAT_VERSION}"
            )));
        }
        let channels = read_u32(&mut input)?;
        if channels != CHANNELS {
            return Err(Error::Format(format!("expected {CHANNELS} channels, header says {channels}")));
        }
        let n_points = read_u64(&mut input)?;
        let pitch = read_f64(&mut input)?;
        let center = read_f64(&mut input)?;
        let n_points = usize::try_from(n_points).map_err(|_| Error::Format("detector size overflows".into()))?;
        let grid = GridSpec::new(n_points, pitch, center).map_err(|e| Error::Format(e.to_string()))?;
        let frame_count = read_u64(&mut input)?;
        let has_master = match read_u64(&mut input)? {
            0 => false,
            1 => true,
            v => return Err(Error::Format(format!("bad master-seed flag {v}"))),
        };
        let master = read_u64(&mut input)?;
        let seed_count = read_u64(&mut input)?;
        if seed_count.saturating_mul(8) > total_len {
            return Err(Error::Format(format!("seed count {seed_count} exceeds the file size")));
        }
        let frame_seeds = (0..seed_count).map(|_| read_u64(&mut input)).collect::<Result<Vec<_>>>()?;
        let header = StackHeader {
            grid,
            frame_count,
            seeds: SeedManifest {
                master_seed: has_master.then_some(master),
                frame_seeds,
            },
        };
        let payload = total_len.saturating_sub(header.byte_len());
        let record = header.record_len();
        let present = payload / record;
        if present < frame_count {
            return Err(Error::Truncated {
                expected: frame_count,
                found: present,
            });
        }
        if payload != frame_count * record {
            return Err(Error::Format(format!(
                "{} bytes after the last declared frame",
                payload - frame_count * record
            )));
        }
        Ok(Self {
            input,
            header,
            next: 0,
        })
    }

    pub fn header(&self) -> &StackHeader {
        &self.header
    }

    /// Next frame, validated, or `None` after the last.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.next == self.header.frame_count {
            return Ok(None);
        }
        let n = self.header.grid.n_points;
        let mut buf = vec![0u8; self.header.record_len() as usize];
        self.input.read_exact(&mut buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    expected: self.header.frame_count,
                    found: self.next,
                }
            } else {
                Error::Io(e)
            }
        })?;
        let mut vals = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut ch = || vals.by_ref().take(n).collect::<Vec<_>>();
        let frame = Frame::new(ch(), ch(), ch());
        frame.validate(n, self.next)?;
        self.next += 1;
        Ok(Some(frame))
    }
}

/// Reads a whole stack into memory.
pub fn ingest_frames(path: &Path) -> Result<FrameSet> {
    let mut r = StackReader::open(path)?;
    let mut frames = Vec::with_capacity(r.header().frame_count.min(1 << 20) as usize);
    while let Some(f) = r.next_frame()? {
        frames.push(f);
    }
    let h = r.header().clone();
    FrameSet::new(h.grid, frames, h.seeds)
}
