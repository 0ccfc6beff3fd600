//! On-disk formats: binary PPM (P6) or PNG frames, clip directories with a
//! small metadata file, and the line-oriented clip manifest.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{ClipManifest, Frame, ManifestRecord, Split, VideoClip};
use crate::dataset::{BaseEvent, EventLabel, Outcome};
use crate::error::{Error, Result};
use crate::flow::GcmpImage;

fn format_err(kind: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        kind,
        detail: detail.into(),
    }
}

// ---- PPM (P6, maxval 255) ----

pub fn write_ppm<W: Write>(mut w: W, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != width * height * 3 {
        return Err(Error::Shape("ppm byte count".into()));
    }
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)?;
    Ok(())
}

/// Reads one PPM token, skipping whitespace and `#` comments.
fn ppm_token<R: Read>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    loop {
        if r.read(&mut byte)? == 0 {
            if tok.is_empty() {
                return Err(format_err("ppm", "unexpected end of header"));
            }
            return Ok(tok);
        }
        let c = byte[0] as char;
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        if c == '#' {
            in_comment = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            return Ok(tok);
        }
        tok.push(c);
    }
}

pub fn read_ppm<R: Read>(mut r: R) -> Result<(usize, usize, Vec<u8>)> {
    if ppm_token(&mut r)? != "P6" {
        return Err(format_err("ppm", "not a P6 file"));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| format_err("ppm", format!("bad header field {s:?}")))
    };
    let width = parse(ppm_token(&mut r)?)?;
    let height = parse(ppm_token(&mut r)?)?;
    let maxval = parse(ppm_token(&mut r)?)?;
    if maxval != 255 {
        return Err(format_err("ppm", format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(format_err("ppm", "zero dimension"));
    }
    let mut rgb = vec![0u8; width * height * 3];
    r.read_exact(&mut rgb)?;
    Ok((width, height, rgb))
}

// ---- PNG via the image crate ----

pub fn write_png(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    let img = image::RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
        .ok_or_else(|| Error::Shape("png byte count".into()))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| format_err("png", e.to_string()))
}

pub fn read_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path)
        .map_err(|e| format_err("png", e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((w, h, img.into_raw()))
}

// ---- Frames, dispatched on extension ----

pub fn save_frame(path: &Path, frame: &Frame) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => {
            let f = fs::File::create(path)?;
            write_ppm(BufWriter::new(f), frame.width(), frame.height(), frame.rgb())
        }
        Some("png") => write_png(path, frame.width(), frame.height(), frame.rgb()),
        other => Err(Error::Config(format!("unsupported frame format {other:?}"))),
    }
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let (w, h, rgb) = match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => read_ppm(BufReader::new(fs::File::open(path)?))?,
        Some("png") => read_png(path)?,
        other => return Err(Error::Config(format!("unsupported frame format {other:?}"))),
    };
    Frame::new(w, h, rgb)
}

/// GCMP images carry the fixed ".gcmp.ppm" suffix.
pub fn save_gcmp_image(dir: &Path, index: usize, img: &GcmpImage) -> Result<PathBuf> {
    let path = dir.join(format!("flow_{index:04}.gcmp.ppm"));
    let f = fs::File::create(&path)?;
    write_ppm(BufWriter::new(f), img.width, img.height, &img.rgb)?;
    Ok(path)
}

pub fn load_gcmp_image(path: &Path) -> Result<GcmpImage> {
    let (width, height, rgb) = read_ppm(BufReader::new(fs::File::open(path)?))?;
    Ok(GcmpImage { width, height, rgb })
}

// ---- Clip directories: numbered frames plus clip.txt ----

pub fn save_clip(dir: &Path, clip: &VideoClip) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = format!("id {}\nfps {}\nframes {}\n", clip.id, clip.fps, clip.len());
    fs::write(dir.join("clip.txt"), meta)?;
    for (i, frame) in clip.frames().iter().enumerate() {
        save_frame(&dir.join(format!("frame_{i:04}.ppm")), frame)?;
    }
    Ok(())
}

pub fn load_clip(dir: &Path) -> Result<VideoClip> {
    let meta = fs::read_to_string(dir.join("clip.txt"))?;
    let mut id = None;
    let mut fps = None;
    let mut count = None;
    for line in meta.lines() {
        match line.split_once(' ') {
            Some(("id", v)) => id = Some(v.to_string()),
            Some(("fps", v)) => {
                fps = Some(v.parse::<f64>().map_err(|_| format_err("clip.txt", format!("bad fps {v:?}")))?)
            }
            Some(("frames", v)) => {
                count = Some(v.parse::<usize>().map_err(|_| format_err("clip.txt", format!("bad frame count {v:?}")))?)
            }
            _ => return Err(format_err("clip.txt", format!("unrecognized line {line:?}"))),
        }
    }
    let id = id.ok_or_else(|| format_err("clip.txt", "missing id"))?;
    let fps = fps.ok_or_else(|| format_err("clip.txt", "missing fps"))?;
    let count = count.ok_or_else(|| format_err("clip.txt", "missing frame count"))?;
    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        let ppm = dir.join(format!("frame_{i:04}.ppm"));
        let png = dir.join(format!("frame_{i:04}.png"));
        let path = if ppm.exists() { ppm } else { png };
        frames.push(load_frame(&path)?);
    }
    VideoClip::new(id, fps, frames)
}

// ---- Manifest: one record per line, "#" comments allowed ----
// Fields: id start end base outcome split

pub fn write_manifest<W: Write>(mut w: W, manifest: &ClipManifest) -> Result<()> {
    writeln!(w, "# id start end base outcome split")?;
    for r in &manifest.records {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            r.id,
            r.start,
            r.end,
            r.label.base().name(),
            r.label.outcome().name(),
            r.split.name()
        )?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<ClipManifest> {
    let mut records = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(format_err(
                "manifest",
                format!("line {}: expected 6 fields, got {}", ln + 1, fields.len()),
            ));
        }
        let start: usize = fields[1]
            .parse()
            .map_err(|_| format_err("manifest", format!("line {}: bad start", ln + 1)))?;
        let end: usize = fields[2]
            .parse()
            .map_err(|_| format_err("manifest", format!("line {}: bad end", ln + 1)))?;
        let label = EventLabel::new(BaseEvent::parse(fields[3])?, Outcome::parse(fields[4])?)?;
        let record = ManifestRecord {
            id: fields[0].to_string(),
            start,
            end,
            label,
            split: Split::parse(fields[5])?,
        };
        record.validate(None)?;
        records.push(record);
    }
    Ok(ClipManifest { records })
}

pub fn save_manifest(path: &Path, manifest: &ClipManifest) -> Result<()> {
    let f = fs::File::create(path)?;
    write_manifest(BufWriter::new(f), manifest)
}

pub fn load_manifest(path: &Path) -> Result<ClipManifest> {
    let f = fs::File::open(path)?;
    read_manifest(BufReader::new(f))
}

/// Clips live under `<root>/clips/<id>/`; the manifest at `<root>/manifest.txt`.
pub fn clip_dir(root: &Path, id: &str) -> PathBuf {
    root.join("clips").join(id)
}

pub fn manifest_path(root: &Path) -> PathBuf {
    root.join("manifest.txt")
}

/// Writes a generated dataset (clips + manifest) under `root`.
pub fn save_dataset(root: &Path, clips: &[VideoClip], manifest: &ClipManifest) -> Result<()> {
    fs::create_dir_all(root)?;
    for clip in clips {
        save_clip(&clip_dir(root, &clip.id), clip)?;
    }
    save_manifest(&manifest_path(root), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BaseEvent, EventLabel, Outcome};

    #[test]
    fn ppm_roundtrip() {
        let rgb: Vec<u8> = (0..2 * 3 * 3).map(|i| i as u8).collect();
        let mut buf = Vec::new();
        write_ppm(&mut buf, 3, 2, &rgb).unwrap();
        let (w, h, back) = read_ppm(buf.as_slice()).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(back, rgb);
    }

    #[test]
    fn ppm_reader_skips_comments() {
        let mut buf = b"P6 # format\n# a comment line\n2 1\n255\n".to_vec();
        buf.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let (w, h, rgb) = read_ppm(buf.as_slice()).unwrap();
        assert_eq!((w, h), (2, 1));
        assert_eq!(rgb, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn manifest_roundtrip_and_validation() {
        let label = EventLabel::new(BaseEvent::Steal, Outcome::NotApplicable).unwrap();
        let m = ClipManifest {
            records: vec![ManifestRecord {
                id: "steal-000".into(),
                start: 18,
                end: 49,
                label,
                split: Split::Test,
            }],
        };
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m).unwrap();
        let back = read_manifest(buf.as_slice()).unwrap();
        assert_eq!(back, m);

        // start >= end must fail on load
        let bad = "c 10 10 steal n/a train\n";
        assert!(read_manifest(bad.as_bytes()).is_err());
        // steal with an outcome must fail
        let bad = "c 1 5 steal success train\n";
        assert!(read_manifest(bad.as_bytes()).is_err());
    }

    #[test]
    fn clip_directory_roundtrip() {
        let dir = std::env::temp_dir().join(format!("gcmp-io-test-{}", std::process::id()));
        let frames = (0..3)
            .map(|i| Frame::filled(4, 2, [i as u8 * 40, 10, 200]))
            .collect();
        let clip = VideoClip::new("clip-a", 25.0, frames).unwrap();
        save_clip(&dir, &clip).unwrap();
        let back = load_clip(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(back, clip);
    }

    #[test]
    fn png_roundtrip() {
        let dir = std::env::temp_dir().join(format!("gcmp-png-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.png");
        let rgb: Vec<u8> = (0..4 * 4 * 3).map(|i| (i * 5) as u8).collect();
        write_png(&path, 4, 4, &rgb).unwrap();
        let (w, h, back) = read_png(&path).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!((w, h), (4, 4));
        assert_eq!(back, rgb);
    }
}
