//! Bank persistence: a directory holding an `index` file plus one binary
//! record per entry. Little-endian throughout; loads are all-or-nothing.

use std::path::Path;

use super::{Affordance, MemoryBank, MemoryEntry, ObjectRef, PartPatch};
use crate::config::MemoryConfig;
use crate::error::{Error, Result};
use crate::geom::{pose_from_seven_exact, pose_to_seven};
use crate::sim::JointKind;

const MAGIC: &[u8; 5] = b"ABMB1";
const VERSION: u32 = 1;

pub fn persist(bank: &MemoryBank, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let entries: Vec<&MemoryEntry> = bank
        .bucket(JointKind::Prismatic)
        .iter()
        .chain(bank.bucket(JointKind::Revolute).iter())
        .collect();

    let mut index = Vec::new();
    index.extend_from_slice(MAGIC);
    put_u32(&mut index, VERSION);
    put_u32(&mut index, entries.len() as u32);
    for (i, entry) in entries.iter().enumerate() {
        let record = encode_entry(entry);
        put_u8(&mut index, kind_code(entry.kind));
        put_u64(&mut index, record.len() as u64);
        std::fs::write(dir.join(record_name(i)), record)?;
    }
    std::fs::write(dir.join("index"), index)?;
    Ok(())
}

pub fn load(dir: &Path, cfg: &MemoryConfig) -> Result<MemoryBank> {
    let index = std::fs::read(dir.join("index"))?;
    let mut r = Reader::new(&index, "index");
    let magic = r.take(5)?;
    if magic != MAGIC {
        return Err(Error::Memory(format!(
            "index has wrong magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Memory(format!(
            "index version {version} unsupported (expected {VERSION})"
        )));
    }
    let count = r.u32()? as usize;

    let mut bank = MemoryBank::new(cfg);
    for i in 0..count {
        let kind = kind_from_code(r.u8()?)?;
        let expected_len = r.u64()? as usize;
        let path = dir.join(record_name(i));
        let record = std::fs::read(&path)?;
        if record.len() != expected_len {
            return Err(Error::Memory(format!(
                "corrupt index: {} is {} bytes, index says {expected_len}",
                path.display(),
                record.len()
            )));
        }
        let entry = decode_entry(&record, &path.display().to_string())?;
        if entry.kind != kind {
            return Err(Error::Memory(format!(
                "corrupt index: record {i} kind disagrees with index"
            )));
        }
        match entry.kind {
            JointKind::Prismatic => bank.prismatic.push(entry),
            JointKind::Revolute => bank.revolute.push(entry),
        }
    }
    Ok(bank)
}

fn record_name(i: usize) -> String {
    format!("entry_{i:05}.bin")
}

fn kind_code(kind: JointKind) -> u8 {
    match kind {
        JointKind::Prismatic => 0,
        JointKind::Revolute => 1,
    }
}

fn kind_from_code(code: u8) -> Result<JointKind> {
    match code {
        0 => Ok(JointKind::Prismatic),
        1 => Ok(JointKind::Revolute),
        other => Err(Error::Memory(format!("unknown joint-kind code {other}"))),
    }
}

fn encode_entry(entry: &MemoryEntry) -> Vec<u8> {
    let mut b = Vec::new();
    put_str(&mut b, &entry.task);
    put_str(&mut b, &entry.variation);
    put_str(&mut b, &entry.object.category);
    put_str(&mut b, &entry.object.object_id);
    put_str(&mut b, &entry.object.part_id);
    put_u8(&mut b, kind_code(entry.kind));
    for k in 0..3 {
        put_f64(&mut b, entry.affordance.contact[k]);
    }
    put_u32(&mut b, entry.affordance.trajectory.len() as u32);
    for pose in &entry.affordance.trajectory {
        for v in pose_to_seven(pose) {
            put_f64(&mut b, v);
        }
    }
    put_patch(&mut b, &entry.patch);
    put_patch(&mut b, &entry.cloud);
    for v in entry.embedding {
        put_f32(&mut b, v);
    }
    b
}

fn decode_entry(bytes: &[u8], what: &str) -> Result<MemoryEntry> {
    let mut r = Reader::new(bytes, what);
    let task = r.string()?;
    let variation = r.string()?;
    let object = ObjectRef {
        category: r.string()?,
        object_id: r.string()?,
        part_id: r.string()?,
    };
    let kind = kind_from_code(r.u8()?)?;
    let contact = nalgebra::Point3::new(r.f64()?, r.f64()?, r.f64()?);
    let m = r.u32()? as usize;
    let mut trajectory = Vec::with_capacity(m);
    for _ in 0..m {
        let mut seven = [0.0f64; 7];
        for v in &mut seven {
            *v = r.f64()?;
        }
        trajectory.push(pose_from_seven_exact(&seven));
    }
    let patch = r.patch()?;
    let cloud = r.patch()?;
    let mut embedding = [0.0f32; super::EMBED_DIM];
    for v in &mut embedding {
        *v = r.f32()?;
    }
    r.expect_end()?;
    Ok(MemoryEntry {
        task,
        variation,
        object,
        kind,
        affordance: Affordance {
            contact,
            trajectory,
        },
        patch,
        cloud,
        embedding,
    })
}

fn put_u8(b: &mut Vec<u8>, v: u8) {
    b.push(v);
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(b: &mut Vec<u8>, v: u64) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(b: &mut Vec<u8>, v: f32) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(b: &mut Vec<u8>, v: f64) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_str(b: &mut Vec<u8>, s: &str) {
    put_u32(b, s.len() as u32);
    b.extend_from_slice(s.as_bytes());
}

fn put_patch(b: &mut Vec<u8>, patch: &PartPatch) {
    put_u32(b, patch.points.len() as u32);
    for (p, n) in patch.points.iter().zip(&patch.normals) {
        for v in p.iter().chain(n.iter()) {
            put_f32(b, *v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'a str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Memory(format!(
                "corrupt {}: truncated at byte {}",
                self.what, self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Memory(format!("corrupt {}: invalid utf-8", self.what)))
    }

    fn patch(&mut self) -> Result<PartPatch> {
        let n = self.u32()? as usize;
        let mut patch = PartPatch {
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let mut row = [0.0f32; 6];
            for v in &mut row {
                *v = self.f32()?;
            }
            patch.points.push([row[0], row[1], row[2]]);
            patch.normals.push([row[3], row[4], row[5]]);
        }
        Ok(patch)
    }

    fn expect_end(&mut self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Memory(format!(
                "corrupt {}: {} trailing bytes",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
