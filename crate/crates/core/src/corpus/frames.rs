//! Frame archives: one directory per video holding a text header and one
//! raw file per frame.
//!
//! `header` contains six lines: the magic `TFNF`, the format version and
//! then `T`, `C`, `H`, `W` in decimal. Frame `i` is stored in
//! `{i:06}.raw` as `H×W×C` interleaved bytes.

use std::path::Path;

use super::CorpusError;

pub const MAGIC: &str = "TFNF";
pub const VERSION: u32 = 1;
pub const HEADER_FILE: &str = "header";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameArchive {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// One `H×W×C` byte buffer per frame.
    pub frames: Vec<Vec<u8>>,
}

impl FrameArchive {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            frames: Vec::new(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn header_text(&self) -> String {
        format!(
            "{MAGIC}\n{VERSION}\n{}\n{}\n{}\n{}\n",
            self.frames.len(),
            self.channels,
            self.height,
            self.width
        )
    }

    pub fn write(&self, dir: &Path) -> Result<(), CorpusError> {
        std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        let header = dir.join(HEADER_FILE);
        std::fs::write(&header, self.header_text()).map_err(|e| CorpusError::io(&header, e))?;
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.len() != self.frame_len() {
                return Err(CorpusError::Archive(format!(
                    "frame {i} has {} bytes, expected {}",
                    frame.len(),
                    self.frame_len()
                )));
            }
            let path = dir.join(frame_file_name(i));
            std::fs::write(&path, frame).map_err(|e| CorpusError::io(&path, e))?;
        }
        Ok(())
    }

    pub fn read_header(dir: &Path) -> Result<(usize, usize, usize, usize), CorpusError> {
        let path = dir.join(HEADER_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != 6 || lines[0] != MAGIC {
            return Err(CorpusError::Archive(format!(
                "{}: not a {MAGIC} header",
                path.display()
            )));
        }
        if lines[1].parse::<u32>().ok() != Some(VERSION) {
            return Err(CorpusError::Archive(format!(
                "{}: unsupported version {:?}",
                path.display(),
                lines[1]
            )));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CorpusError::Archive(format!("{}: bad number {s:?}", path.display())))
        };
        Ok((num(lines[2])?, num(lines[3])?, num(lines[4])?, num(lines[5])?))
    }

    pub fn read(dir: &Path) -> Result<Self, CorpusError> {
        let (t, c, h, w) = Self::read_header(dir)?;
        let mut archive = Self::new(c, h, w);
        for i in 0..t {
            let path = dir.join(frame_file_name(i));
            let bytes = std::fs::read(&path).map_err(|e| CorpusError::io(&path, e))?;
            if bytes.len() != archive.frame_len() {
                return Err(CorpusError::Archive(format!(
                    "{}: {} bytes, expected {}",
                    path.display(),
                    bytes.len(),
                    archive.frame_len()
                )));
            }
            archive.frames.push(bytes);
        }
        Ok(archive)
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.raw")
}
