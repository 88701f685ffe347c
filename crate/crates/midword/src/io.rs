//! Versioned binary formats for every stage artifact, plus the delimited
//! text export of encodings. All multi-byte values are little-endian;
//! floating payloads round-trip bit-exactly. Descriptor features are
//! stored as 32-bit floats, everything else as 64-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::alignment::{DescriptorSet, PcaProjection, SphericalGmm};
use crate::codebook::{KarcherCodebook, RiemannianGmm};
use crate::encoding::{EncodedVideo, EncodingMethod};
use crate::error::{Error, Result};
use crate::manifold::{GrassmannPoint, SymPosDef};
use crate::words::{MidLevelWord, WordKind, WordPoint};

pub const FORMAT_VERSION: u32 = 1;

const MAGIC_DESCRIPTORS: &[u8; 4] = b"MWDS";
const MAGIC_SPHERICAL_GMM: &[u8; 4] = b"MWGM";
const MAGIC_PCA: &[u8; 4] = b"MWPC";
const MAGIC_WORDS: &[u8; 4] = b"MWWD";
const MAGIC_CODEBOOK: &[u8; 4] = b"MWCB";
const MAGIC_RIEMANNIAN_GMM: &[u8; 4] = b"MWRG";
const MAGIC_ENCODINGS: &[u8; 4] = b"MWEV";

/// Upper bound on any length field, to fail fast on corrupt files instead
/// of attempting a huge allocation.
const MAX_LEN: u64 = 1 << 32;

fn format_err(what: impl Into<String>) -> Error {
    Error::Format(what.into())
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)
        .map_err(|_| format_err("file too short for a magic number"))?;
    if &got != magic {
        return Err(format_err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("file too short for a version"))?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

fn checked_len(n: u64, what: &str) -> Result<usize> {
    if n > MAX_LEN {
        return Err(format_err(format!("implausible {what} count {n}")));
    }
    Ok(n as usize)
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated string length"))?;
    let len = checked_len(len as u64, "string byte")?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| format_err("truncated string payload"))?;
    String::from_utf8(buf).map_err(|_| format_err("string is not valid UTF-8"))
}

fn write_f64_slice<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_f64_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)
        .map_err(|_| format_err("truncated float payload"))?;
    Ok(out)
}

/// Matrices are stored row-major; nalgebra is column-major, so go through
/// an explicit row scan on both sides.
fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_f64::<LittleEndian>(m[(i, j)])?;
        }
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let data = read_f64_vec(r, rows * cols)?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(()),
        Ok(_) => Err(format_err("trailing bytes after the payload")),
        Err(e) => Err(e.into()),
    }
}

fn kind_tag(kind: WordKind) -> u8 {
    match kind {
        WordKind::Subspace => 0,
        WordKind::Covariance => 1,
        WordKind::GaussianSpd => 2,
    }
}

fn kind_from_tag(tag: u8) -> Result<WordKind> {
    match tag {
        0 => Ok(WordKind::Subspace),
        1 => Ok(WordKind::Covariance),
        2 => Ok(WordKind::GaussianSpd),
        other => Err(format_err(format!("unknown word-kind tag {other}"))),
    }
}

fn method_tag(method: EncodingMethod) -> u8 {
    match method {
        EncodingMethod::Bovw => 0,
        EncodingMethod::Vlad => 1,
        EncodingMethod::FisherVector => 2,
    }
}

fn method_from_tag(tag: u8) -> Result<EncodingMethod> {
    match tag {
        0 => Ok(EncodingMethod::Bovw),
        1 => Ok(EncodingMethod::Vlad),
        2 => Ok(EncodingMethod::FisherVector),
        other => Err(format_err(format!("unknown encoding-method tag {other}"))),
    }
}

/// One descriptor set per file: id, dimensions, then L×d 32-bit floats.
pub fn write_descriptor_set(path: impl AsRef<Path>, set: &DescriptorSet) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_DESCRIPTORS)?;
    write_string(&mut w, set.video_id())?;
    w.write_u32::<LittleEndian>(set.dim() as u32)?;
    w.write_u64::<LittleEndian>(set.len() as u64)?;
    let f = set.features();
    for i in 0..f.nrows() {
        for j in 0..f.ncols() {
            w.write_f32::<LittleEndian>(f[(i, j)] as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_descriptor_set(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_DESCRIPTORS)?;
    let video_id = read_string(&mut r)?;
    let d = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated descriptor header"))? as usize;
    let l = checked_len(
        r.read_u64::<LittleEndian>()
            .map_err(|_| format_err("truncated descriptor header"))?,
        "feature",
    )?;
    if d == 0 || l == 0 {
        return Err(format_err("descriptor set with zero features or dimension"));
    }
    let mut data = vec![0.0f32; l * d];
    r.read_f32_into::<LittleEndian>(&mut data)
        .map_err(|_| format_err("truncated descriptor payload"))?;
    expect_eof(&mut r)?;
    let features = DMatrix::from_fn(l, d, |i, j| f64::from(data[i * d + j]));
    DescriptorSet::new(video_id, features)
}

pub fn write_spherical_gmm(path: impl AsRef<Path>, gmm: &SphericalGmm) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_SPHERICAL_GMM)?;
    w.write_u32::<LittleEndian>(gmm.component_count() as u32)?;
    w.write_u32::<LittleEndian>(gmm.dim() as u32)?;
    write_f64_slice(&mut w, gmm.weights().iter().copied())?;
    write_matrix(&mut w, gmm.means())?;
    write_f64_slice(&mut w, gmm.variances().iter().copied())?;
    w.flush()?;
    Ok(())
}

pub fn read_spherical_gmm(path: impl AsRef<Path>) -> Result<SphericalGmm> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_SPHERICAL_GMM)?;
    let k = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated mixture header"))? as usize;
    let d = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated mixture header"))? as usize;
    let weights = DVector::from_vec(read_f64_vec(&mut r, k)?);
    let means = read_matrix(&mut r, k, d)?;
    let variances = DVector::from_vec(read_f64_vec(&mut r, k)?);
    expect_eof(&mut r)?;
    SphericalGmm::from_parts(weights, means, variances)
}

fn write_pca_payload<W: Write>(w: &mut W, pca: &PcaProjection) -> Result<()> {
    w.write_u32::<LittleEndian>(pca.input_dim() as u32)?;
    w.write_u32::<LittleEndian>(pca.output_dim() as u32)?;
    write_f64_slice(w, pca.mean().iter().copied())?;
    write_matrix(w, pca.rows())
}

fn read_pca_payload<R: Read>(r: &mut R) -> Result<PcaProjection> {
    let input = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated projection header"))? as usize;
    let output = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated projection header"))? as usize;
    let mean = DVector::from_vec(read_f64_vec(r, input)?);
    let rows = read_matrix(r, output, input)?;
    PcaProjection::from_parts(mean, rows)
}

pub fn write_pca(path: impl AsRef<Path>, pca: &PcaProjection) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_PCA)?;
    write_pca_payload(&mut w, pca)?;
    w.flush()?;
    Ok(())
}

pub fn read_pca(path: impl AsRef<Path>) -> Result<PcaProjection> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_PCA)?;
    let pca = read_pca_payload(&mut r)?;
    expect_eof(&mut r)?;
    Ok(pca)
}

fn point_shape(point: &WordPoint) -> (usize, usize) {
    match point {
        WordPoint::Subspace(p) => (p.ambient_dim(), p.subspace_dim()),
        WordPoint::Spd(p) => (p.dim(), p.dim()),
    }
}

fn write_point_payload<W: Write>(w: &mut W, point: &WordPoint) -> Result<()> {
    match point {
        WordPoint::Subspace(p) => write_matrix(w, p.basis()),
        WordPoint::Spd(p) => write_matrix(w, p.matrix()),
    }
}

fn read_point_payload<R: Read>(
    r: &mut R,
    kind: WordKind,
    rows: usize,
    cols: usize,
) -> Result<WordPoint> {
    let m = read_matrix(r, rows, cols)?;
    Ok(match kind {
        WordKind::Subspace => WordPoint::Subspace(GrassmannPoint::new(m)?),
        WordKind::Covariance | WordKind::GaussianSpd => WordPoint::Spd(SymPosDef::new(m)?),
    })
}

/// Word set: kind and payload shape in the header, then per word the
/// provenance (video id, component index) and the payload matrix.
pub fn write_words(path: impl AsRef<Path>, words: &[MidLevelWord]) -> Result<()> {
    if words.is_empty() {
        return Err(Error::Empty("no words to write".into()));
    }
    let kind = words[0].kind();
    if words.iter().any(|w| w.kind() != kind) {
        return Err(Error::KindMismatch(
            "a word file stores words of one kind".into(),
        ));
    }
    let (rows, cols) = point_shape(words[0].point());
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_WORDS)?;
    w.write_u8(kind_tag(kind))?;
    w.write_u32::<LittleEndian>(rows as u32)?;
    w.write_u32::<LittleEndian>(cols as u32)?;
    w.write_u64::<LittleEndian>(words.len() as u64)?;
    for word in words {
        if point_shape(word.point()) != (rows, cols) {
            return Err(Error::DimensionMismatch(
                "words in one file share a payload shape".into(),
            ));
        }
        write_string(&mut w, word.video_id())?;
        w.write_u32::<LittleEndian>(word.component_index() as u32)?;
        write_point_payload(&mut w, word.point())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_words(path: impl AsRef<Path>) -> Result<Vec<MidLevelWord>> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_WORDS)?;
    let kind = kind_from_tag(r.read_u8().map_err(|_| format_err("truncated word header"))?)?;
    let rows = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated word header"))? as usize;
    let cols = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated word header"))? as usize;
    let count = checked_len(
        r.read_u64::<LittleEndian>()
            .map_err(|_| format_err("truncated word header"))?,
        "word",
    )?;
    let mut words = Vec::with_capacity(count);
    for _ in 0..count {
        let video_id = read_string(&mut r)?;
        let component = r
            .read_u32::<LittleEndian>()
            .map_err(|_| format_err("truncated word provenance"))? as usize;
        let point = read_point_payload(&mut r, kind, rows, cols)?;
        words.push(MidLevelWord::new(kind, point, video_id, component)?);
    }
    expect_eof(&mut r)?;
    Ok(words)
}

pub fn write_codebook(path: impl AsRef<Path>, book: &KarcherCodebook) -> Result<()> {
    let (rows, cols) = point_shape(&book.centers()[0]);
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_CODEBOOK)?;
    w.write_u8(kind_tag(book.kind()))?;
    w.write_u32::<LittleEndian>(rows as u32)?;
    w.write_u32::<LittleEndian>(cols as u32)?;
    w.write_u64::<LittleEndian>(book.size() as u64)?;
    for center in book.centers() {
        write_point_payload(&mut w, center)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codebook(path: impl AsRef<Path>) -> Result<KarcherCodebook> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_CODEBOOK)?;
    let kind = kind_from_tag(
        r.read_u8()
            .map_err(|_| format_err("truncated codebook header"))?,
    )?;
    let rows = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated codebook header"))? as usize;
    let cols = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated codebook header"))? as usize;
    let m = checked_len(
        r.read_u64::<LittleEndian>()
            .map_err(|_| format_err("truncated codebook header"))?,
        "center",
    )?;
    let mut centers = Vec::with_capacity(m);
    for _ in 0..m {
        centers.push(read_point_payload(&mut r, kind, rows, cols)?);
    }
    expect_eof(&mut r)?;
    KarcherCodebook::from_parts(kind, centers)
}

pub fn write_riemannian_gmm(path: impl AsRef<Path>, gmm: &RiemannianGmm) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_RIEMANNIAN_GMM)?;
    w.write_u8(kind_tag(gmm.kind()))?;
    w.write_u32::<LittleEndian>(gmm.component_count() as u32)?;
    w.write_u32::<LittleEndian>(gmm.projected_dim() as u32)?;
    write_pca_payload(&mut w, gmm.pca())?;
    write_f64_slice(&mut w, gmm.weights().iter().copied())?;
    write_matrix(&mut w, gmm.means())?;
    write_matrix(&mut w, gmm.variances())?;
    w.flush()?;
    Ok(())
}

pub fn read_riemannian_gmm(path: impl AsRef<Path>) -> Result<RiemannianGmm> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_RIEMANNIAN_GMM)?;
    let kind = kind_from_tag(
        r.read_u8()
            .map_err(|_| format_err("truncated mixture header"))?,
    )?;
    let m = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated mixture header"))? as usize;
    let d = r
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err("truncated mixture header"))? as usize;
    let pca = read_pca_payload(&mut r)?;
    if pca.output_dim() != d {
        return Err(format_err(format!(
            "header dimension {d} disagrees with the projection output {}",
            pca.output_dim()
        )));
    }
    let weights = DVector::from_vec(read_f64_vec(&mut r, m)?);
    let means = read_matrix(&mut r, m, d)?;
    let variances = read_matrix(&mut r, m, d)?;
    expect_eof(&mut r)?;
    RiemannianGmm::from_parts(kind, pca, weights, means, variances)
}

/// Container of all encoded videos of one run.
pub fn write_encodings(path: impl AsRef<Path>, encodings: &[EncodedVideo]) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    write_header(&mut w, MAGIC_ENCODINGS)?;
    w.write_u64::<LittleEndian>(encodings.len() as u64)?;
    for e in encodings {
        write_string(&mut w, e.video_id())?;
        w.write_u8(method_tag(e.method()))?;
        w.write_u8(kind_tag(e.kind()))?;
        w.write_u32::<LittleEndian>(e.components() as u32)?;
        w.write_u32::<LittleEndian>(e.block() as u32)?;
        write_f64_slice(&mut w, e.vector().iter().copied())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_encodings(path: impl AsRef<Path>) -> Result<Vec<EncodedVideo>> {
    let mut r = open_reader(path.as_ref())?;
    read_header(&mut r, MAGIC_ENCODINGS)?;
    let count = checked_len(
        r.read_u64::<LittleEndian>()
            .map_err(|_| format_err("truncated encoding header"))?,
        "encoding",
    )?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let video_id = read_string(&mut r)?;
        let method = method_from_tag(
            r.read_u8()
                .map_err(|_| format_err("truncated encoding record"))?,
        )?;
        let kind = kind_from_tag(
            r.read_u8()
                .map_err(|_| format_err("truncated encoding record"))?,
        )?;
        let components = r
            .read_u32::<LittleEndian>()
            .map_err(|_| format_err("truncated encoding record"))? as usize;
        let block = r
            .read_u32::<LittleEndian>()
            .map_err(|_| format_err("truncated encoding record"))? as usize;
        let len = method.vector_len(components, block);
        let vector = DVector::from_vec(read_f64_vec(&mut r, len)?);
        out.push(EncodedVideo::from_parts(
            video_id, method, kind, components, block, vector,
        )?);
    }
    expect_eof(&mut r)?;
    Ok(out)
}

/// Text export for external classifiers: one line per video with comma
/// separators, `id,method,v0,v1,...`. Floats print with full round-trip
/// precision.
pub fn export_encodings_text(path: impl AsRef<Path>, encodings: &[EncodedVideo]) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    for e in encodings {
        write!(w, "{},{}", e.video_id(), e.method())?;
        for v in e.vector().iter() {
            write!(w, ",{v:?}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Labels as a two-column CSV, `video_id,label`.
pub fn write_labels<'a>(
    path: impl AsRef<Path>,
    labels: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    for (id, label) in labels {
        if id.contains(',') || label.contains(',') {
            return Err(Error::InvalidInput(format!(
                "comma in label entry {id}:{label}"
            )));
        }
        writeln!(w, "{id},{label}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((id, label)) = line.split_once(',') else {
            return Err(format_err(format!(
                "label line {} has no comma: {line:?}",
                lineno + 1
            )));
        };
        out.push((id.to_owned(), label.to_owned()));
    }
    Ok(out)
}
