//! Directory format of a stored sequence log.
//!
//! `index.csv` holds one row per message with header
//! `seq,t,topic,kind,width,height,blob`; `kind` is `image`, `imu` or `blob`.
//! Image rows fill `width`/`height`. Blob rows name a file under `blobs/`
//! holding the raw payload bytes.

use std::fs;
use std::path::Path;

use super::{Message, Payload, PrepError, SequenceLog};

pub const INDEX_FILE: &str = "index.csv";
const BLOB_DIR: &str = "blobs";

fn io_err(e: impl std::fmt::Display) -> PrepError {
    PrepError::Io(e.to_string())
}

pub fn write_log(dir: &Path, log: &SequenceLog) -> Result<(), PrepError> {
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut w = csv::Writer::from_path(dir.join(INDEX_FILE)).map_err(io_err)?;
    w.write_record(["seq", "t", "topic", "kind", "width", "height", "blob"])
        .map_err(io_err)?;
    for (seq, m) in log.messages.iter().enumerate() {
        let seq_s = seq.to_string();
        let t = m.t.to_string();
        let row: [String; 5] = match &m.payload {
            Payload::Image { width, height } => [
                "image".into(),
                width.to_string(),
                height.to_string(),
                String::new(),
                String::new(),
            ],
            Payload::Imu => ["imu".into(), String::new(), String::new(), String::new(), String::new()],
            Payload::Blob { data } => {
                let name = format!("{seq}.bin");
                let blobs = dir.join(BLOB_DIR);
                fs::create_dir_all(&blobs).map_err(io_err)?;
                fs::write(blobs.join(&name), data).map_err(io_err)?;
                ["blob".into(), String::new(), String::new(), name, String::new()]
            }
        };
        w.write_record([
            seq_s.as_str(),
            t.as_str(),
            m.topic.as_str(),
            row[0].as_str(),
            row[1].as_str(),
            row[2].as_str(),
            row[3].as_str(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_log(dir: &Path) -> Result<SequenceLog, PrepError> {
    let mut r = csv::Reader::from_path(dir.join(INDEX_FILE)).map_err(io_err)?;
    let mut messages = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let t: f64 = field(1)
            .parse()
            .map_err(|_| PrepError::Malformed(format!("bad timestamp {:?}", field(1))))?;
        let payload = match field(3) {
            "image" => {
                let dim = |i: usize| {
                    field(i)
                        .parse::<u32>()
                        .map_err(|_| PrepError::Malformed(format!("bad dimension {:?}", field(i))))
                };
                Payload::Image {
                    width: dim(4)?,
                    height: dim(5)?,
                }
            }
            "imu" => Payload::Imu,
            "blob" => Payload::Blob {
                data: fs::read(dir.join(BLOB_DIR).join(field(6))).map_err(io_err)?,
            },
            other => return Err(PrepError::Malformed(format!("unknown payload kind {other:?}"))),
        };
        messages.push(Message {
            t,
            topic: field(2).to_string(),
            payload,
        });
    }
    SequenceLog::new(messages)
}
