//! Deterministic synthetic corpora in the manifest + frame archive layout.
//!
//! Every gloss gets a distinct 4×4 block glyph (also distinct from every
//! other glyph's mirror image, so horizontal flips never turn one gloss
//! into another). A video shows each gloss of its sentence for a random
//! number of frames, separated by background-only rest frames, with a
//! one-pixel positional jitter per frame. `clutter_level` blends uniform
//! noise into every pixel.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{manifest, CorpusEntry, CorpusError, FrameArchive, Split};
use crate::config::{self, ConfigError, KvConfig};

pub const SYNTH_FPS: f64 = 25.0;
pub const MANIFEST_FILE: &str = "manifest.txt";

const GRID: usize = 4;
const BACKGROUND: f64 = 0.2;
const GLYPH: f64 = 0.9;
const SIGNERS: [&str; 4] = ["P1", "P2", "P3", "P4"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub sentence_len: (usize, usize),
    pub frames_per_gloss: (usize, usize),
    /// Background frames before, between and after glosses.
    pub rest_frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub clutter_level: f64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            vocab_size: 12,
            sentence_len: (2, 4),
            frames_per_gloss: (6, 10),
            rest_frames: 2,
            height: 32,
            width: 32,
            channels: 3,
            clutter_level: 0.3,
            train: 200,
            dev: 40,
            test: 40,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.sentence_len.0 < 1 || self.sentence_len.0 > self.sentence_len.1 {
            return bad("sentence_len needs 1 <= min <= max");
        }
        if self.frames_per_gloss.0 < 1 || self.frames_per_gloss.0 > self.frames_per_gloss.1 {
            return bad("frames_per_gloss needs 1 <= min <= max");
        }
        if self.height < 2 * GRID || self.width < 2 * GRID || self.channels == 0 {
            return bad("frames must be at least 8x8 with one channel");
        }
        if !(0.0..=1.0).contains(&self.clutter_level) {
            return bad("clutter_level must lie in [0, 1]");
        }
        if self.train == 0 || self.dev == 0 || self.test == 0 {
            return bad("every split needs at least one entry");
        }
        Ok(())
    }

    pub fn from_kv(mut kv: KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let cfg = Self {
            vocab_size: kv.take_or("vocab_size", d.vocab_size)?,
            sentence_len: (
                kv.take_or("sentence_len_min", d.sentence_len.0)?,
                kv.take_or("sentence_len_max", d.sentence_len.1)?,
            ),
            frames_per_gloss: (
                kv.take_or("frames_per_gloss_min", d.frames_per_gloss.0)?,
                kv.take_or("frames_per_gloss_max", d.frames_per_gloss.1)?,
            ),
            rest_frames: kv.take_or("rest_frames", d.rest_frames)?,
            height: kv.take_or("frame_height", d.height)?,
            width: kv.take_or("frame_width", d.width)?,
            channels: kv.take_or("channels", d.channels)?,
            clutter_level: kv.take_or("clutter_level", d.clutter_level)?,
            train: kv.take_or("train", d.train)?,
            dev: kv.take_or("dev", d.dev)?,
            test: kv.take_or("test", d.test)?,
            seed: kv.take_or("seed", d.seed)?,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_kv(KvConfig::load(path)?)
    }

    pub fn to_text(&self) -> String {
        config::render(&[
            ("vocab_size", self.vocab_size.to_string()),
            ("sentence_len_min", self.sentence_len.0.to_string()),
            ("sentence_len_max", self.sentence_len.1.to_string()),
            ("frames_per_gloss_min", self.frames_per_gloss.0.to_string()),
            ("frames_per_gloss_max", self.frames_per_gloss.1.to_string()),
            ("rest_frames", self.rest_frames.to_string()),
            ("frame_height", self.height.to_string()),
            ("frame_width", self.width.to_string()),
            ("channels", self.channels.to_string()),
            ("clutter_level", self.clutter_level.to_string()),
            ("train", self.train.to_string()),
            ("dev", self.dev.to_string()),
            ("test", self.test.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }

    /// Number of distinct gloss sequences the generator can emit (no
    /// gloss repeats back to back), saturating.
    pub fn sentence_diversity(&self) -> u128 {
        let v = self.vocab_size as u128;
        (self.sentence_len.0..=self.sentence_len.1)
            .map(|len| {
                (1..len).fold(v, |acc, _| acc.saturating_mul(v - 1))
            })
            .fold(0u128, u128::saturating_add)
    }
}

/// A generated corpus held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub entries: Vec<CorpusEntry>,
    pub archives: Vec<FrameArchive>,
    pub warnings: Vec<String>,
}

pub fn gloss_token(id: usize, vocab_size: usize) -> String {
    let width = vocab_size.to_string().len().max(2);
    format!("g{id:0width$}")
}

type Glyph = [[bool; GRID]; GRID];

fn mirror(g: &Glyph) -> Glyph {
    let mut m = *g;
    for row in m.iter_mut() {
        row.reverse();
    }
    m
}

fn glyphs(vocab_size: usize, rng: &mut ChaCha8Rng) -> Vec<Glyph> {
    let mut out: Vec<Glyph> = Vec::with_capacity(vocab_size);
    while out.len() < vocab_size {
        let mut g = [[false; GRID]; GRID];
        for row in g.iter_mut() {
            for cell in row.iter_mut() {
                *cell = rng.gen_bool(0.5);
            }
        }
        let on = g.iter().flatten().filter(|&&c| c).count();
        if !(5..=11).contains(&on) {
            continue;
        }
        let m = mirror(&g);
        if out.iter().any(|o| *o == g || *o == m) {
            continue;
        }
        out.push(g);
    }
    out
}

struct Renderer {
    cfg: SynthConfig,
    glyphs: Vec<Glyph>,
}

impl Renderer {
    /// Renders one frame; `gloss` is a 0-based glyph index or `None` for a
    /// rest frame.
    fn frame(&self, gloss: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let SynthConfig {
            height: h,
            width: w,
            channels: c,
            clutter_level,
            ..
        } = self.cfg;
        let cell_h = h / (GRID + 2);
        let cell_w = w / (GRID + 2);
        let (dy, dx) = match gloss {
            Some(_) => (rng.gen_range(-1i64..=1), rng.gen_range(-1i64..=1)),
            None => (0, 0),
        };
        let top = ((h - GRID * cell_h) / 2) as i64 + dy;
        let left = ((w - GRID * cell_w) / 2) as i64 + dx;
        let mut out = Vec::with_capacity(h * w * c);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut v = BACKGROUND;
                if let Some(g) = gloss {
                    let (gy, gx) = (y - top, x - left);
                    if gy >= 0 && gx >= 0 {
                        let (cy, cx) = (gy as usize / cell_h, gx as usize / cell_w);
                        if cy < GRID && cx < GRID && self.glyphs[g][cy][cx] {
                            v = GLYPH;
                        }
                    }
                }
                for _ in 0..c {
                    let p = if clutter_level > 0.0 {
                        (1.0 - clutter_level) * v + clutter_level * rng.gen::<f64>()
                    } else {
                        v
                    };
                    out.push((p * 255.0).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        out
    }
}

/// Generates the corpus in memory. Identical configs give identical output.
pub fn synthesize(cfg: &SynthConfig) -> Result<SynthCorpus, CorpusError> {
    cfg.validate()
        .map_err(|e| CorpusError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let renderer = Renderer {
        cfg: cfg.clone(),
        glyphs: glyphs(cfg.vocab_size, &mut rng),
    };
    let mut warnings = Vec::new();
    let total = (cfg.train + cfg.dev + cfg.test) as u128;
    if total > cfg.sentence_diversity() {
        warnings.push(format!(
            "{total} sentences requested but only {} distinct gloss sequences exist; duplicates will occur",
            cfg.sentence_diversity()
        ));
    }
    let mut entries = Vec::new();
    let mut archives = Vec::new();
    let plan = [(Split::Train, cfg.train), (Split::Dev, cfg.dev), (Split::Test, cfg.test)];
    let mut id = 0u64;
    for (split, count) in plan {
        for _ in 0..count {
            id += 1;
            let len = rng.gen_range(cfg.sentence_len.0..=cfg.sentence_len.1);
            let mut ids: Vec<usize> = Vec::with_capacity(len);
            while ids.len() < len {
                let g = rng.gen_range(0..cfg.vocab_size);
                if ids.last() != Some(&g) {
                    ids.push(g);
                }
            }
            let mut archive = FrameArchive::new(cfg.channels, cfg.height, cfg.width);
            for _ in 0..cfg.rest_frames {
                archive.frames.push(renderer.frame(None, &mut rng));
            }
            for &g in &ids {
                let span = rng.gen_range(cfg.frames_per_gloss.0..=cfg.frames_per_gloss.1);
                for _ in 0..span {
                    archive.frames.push(renderer.frame(Some(g), &mut rng));
                }
                for _ in 0..cfg.rest_frames {
                    archive.frames.push(renderer.frame(None, &mut rng));
                }
            }
            let glosses: Vec<String> = ids
                .iter()
                .map(|&g| gloss_token(g + 1, cfg.vocab_size))
                .collect();
            entries.push(CorpusEntry {
                id,
                signer: SIGNERS.choose(&mut rng).expect("non-empty").to_string(),
                split,
                sentence: glosses.join(" "),
                glosses,
                notes: Vec::new(),
                frame_count: archive.len(),
                fps: SYNTH_FPS,
                frames_path: PathBuf::from(format!("frames/{id:06}")),
            });
            archives.push(archive);
        }
    }
    Ok(SynthCorpus {
        entries,
        archives,
        warnings,
    })
}

/// Generates the corpus and writes `manifest.txt` plus `frames/` under
/// `outdir`. Returns the manifest path and any warnings.
pub fn generate_synthetic(cfg: &SynthConfig, outdir: &Path) -> Result<(PathBuf, Vec<String>), CorpusError> {
    let corpus = synthesize(cfg)?;
    std::fs::create_dir_all(outdir).map_err(|e| CorpusError::io(outdir, e))?;
    for (entry, archive) in corpus.entries.iter().zip(&corpus.archives) {
        archive.write(&outdir.join(&entry.frames_path))?;
    }
    let manifest_path = outdir.join(MANIFEST_FILE);
    manifest::write_manifest(&manifest_path, &corpus.entries)?;
    Ok((manifest_path, corpus.warnings))
}
