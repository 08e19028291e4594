//! Random block interleaver, binary symmetric channel and datasets.
//!
//! Randomness comes from ChaCha8 seeded with the user seed. Independent
//! streams are selected with `set_stream`: stream 0 draws the interleaver,
//! stream `INFO | w` the info bits of word `w` and stream `NOISE | w` the
//! channel flips of word `w`, so generation is schedule independent.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{BitRow, Columns};
use crate::conv::{ConvCode, ParityCheck};
use crate::error::{Error, Result};

const INFO_STREAM: u64 = 1 << 40;
const NOISE_STREAM: u64 = 2 << 40;

/// Seeded generator on a named substream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A permutation of `1..=N`, with `y[π(i)] = x[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Interleaver {
    map: Vec<u32>,
}

impl Interleaver {
    /// `map[i-1] = π(i)`; must be a bijection on `1..=N`.
    pub fn new(map: Vec<u32>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n + 1];
        for &v in &map {
            if v == 0 || v as usize > n || seen[v as usize] {
                return Err(Error::Domain(format!("not a permutation of 1..={n}")));
            }
            seen[v as usize] = true;
        }
        Ok(Interleaver { map })
    }

    pub fn identity(n: usize) -> Self {
        Interleaver { map: (1..=n as u32).collect() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[u32] {
        &self.map
    }

    /// π(i) for 1-based `i`.
    pub fn at(&self, i: usize) -> usize {
        self.map[i - 1] as usize
    }

    pub fn inverse(&self) -> Interleaver {
        let mut inv = vec![0u32; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v as usize - 1] = i as u32 + 1;
        }
        Interleaver { map: inv }
    }

    pub fn apply(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.map.len() {
            return Err(Error::Shape(format!("word length {} != N={}", x.len(), self.map.len())));
        }
        let mut y = vec![0u8; x.len()];
        for (i, &v) in self.map.iter().enumerate() {
            y[v as usize - 1] = x[i];
        }
        Ok(y)
    }

    /// Image π(E) of a position set; positions must lie in `1..=N`.
    pub fn apply_check(&self, e: &ParityCheck) -> Result<ParityCheck> {
        let n = self.map.len() as i64;
        if e.min_pos() < 1 || e.max_pos() > n {
            return Err(Error::Domain(format!("check {e} outside 1..={n}")));
        }
        e.map(|p| self.map[p as usize - 1] as i64)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.map.iter().enumerate() {
            s.push_str(&format!("{} -> {}\n", i + 1, v));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse { line: ln + 1, msg: format!("expected 'i -> j', got '{line}'") };
            let (a, b) = line.split_once("->").ok_or_else(bad)?;
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            pairs.push((a, b));
        }
        pairs.sort_unstable();
        if pairs.iter().enumerate().any(|(i, &(a, _))| a != i + 1) {
            return Err(Error::Domain("interleaver indices must be 1..=N".into()));
        }
        Interleaver::new(pairs.into_iter().map(|(_, b)| b).collect())
    }
}

/// Uniformly random interleaver of length `n`.
pub fn random_interleaver(n: usize, seed: u64) -> Result<Interleaver> {
    if n == 0 {
        return Err(Error::Domain("interleaver length must be positive".into()));
    }
    let mut map: Vec<u32> = (1..=n as u32).collect();
    map.shuffle(&mut stream_rng(seed, 0));
    Ok(Interleaver { map })
}

pub fn apply_interleaver(pi: &Interleaver, x: &[u8]) -> Result<Vec<u8>> {
    pi.apply(x)
}

/// Flip each bit independently with probability `p`.
pub fn bsc<R: Rng>(y: &[u8], p: f64, rng: &mut R) -> Result<Vec<u8>> {
    check_p(p)?;
    Ok(y.iter().map(|&b| if p > 0.0 && rng.gen::<f64>() < p { b ^ 1 } else { b }).collect())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Domain(format!("crossover probability {p} outside [0, 0.5)")));
    }
    Ok(())
}

/// `M` observed words of length `N`, with the channel parameters that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    words: Vec<BitRow>,
}

impl Dataset {
    pub fn new(n: usize, p: f64, seed: u64, words: Vec<BitRow>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Domain("dataset needs at least one word".into()));
        }
        if words.iter().any(|w| w.len() != n) {
            return Err(Error::Shape(format!("all words must have length {n}")));
        }
        Ok(Dataset { n, p, seed, words })
    }

    pub fn m(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[BitRow] {
        &self.words
    }

    pub fn columns(&self) -> Columns {
        Columns::from_rows(&self.words, self.n)
    }

    /// Keep only the first `m` words.
    pub fn truncated(&self, m: usize) -> Dataset {
        Dataset { words: self.words[..m.min(self.words.len())].to_vec(), ..self.clone() }
    }

    /// Text format: header `N M p seed`, then one line of `0`/`1` per word.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {} {}", self.n, self.m(), self.p, self.seed)?;
        let mut line = vec![b'0'; self.n + 1];
        line[self.n] = b'\n';
        for word in &self.words {
            for (i, c) in line[..self.n].iter_mut().enumerate() {
                *c = if word.get(i) { b'1' } else { b'0' };
            }
            w.write_all(&line)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
        if h.len() != 4 {
            return Err(bad("header must be 'N M p seed'"));
        }
        let n: usize = h[0].parse().map_err(|_| bad("bad N"))?;
        let m: usize = h[1].parse().map_err(|_| bad("bad M"))?;
        let p: f64 = h[2].parse().map_err(|_| bad("bad p"))?;
        let seed: u64 = h[3].parse().map_err(|_| bad("bad seed"))?;
        let mut words = Vec::with_capacity(m);
        for (ln, line) in lines {
            let line = line.trim();
            if line.len() != n {
                return Err(Error::Parse { line: ln + 1, msg: format!("expected {n} bits, got {}", line.len()) });
            }
            let mut row = BitRow::zeros(n);
            for (i, c) in line.bytes().enumerate() {
                match c {
                    b'0' => {}
                    b'1' => row.set(i, true),
                    _ => return Err(Error::Parse { line: ln + 1, msg: "bits must be 0 or 1".into() }),
                }
            }
            words.push(row);
        }
        if words.len() != m {
            return Err(Error::Parse { line: 1, msg: format!("header says M={m}, found {} words", words.len()) });
        }
        Dataset::new(n, p, seed, words)
    }

    /// Binary format: `BIC1`, LE u32 N, LE u32 M, then ⌈N/8⌉ bytes per word, LSB first.
    /// The channel parameters are not stored.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"BIC1")?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.m() as u32).to_le_bytes())?;
        let nb = self.n.div_ceil(8);
        for word in &self.words {
            let mut bytes = vec![0u8; nb];
            for i in word.ones() {
                bytes[i / 8] |= 1 << (i % 8);
            }
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        if &head[..4] != b"BIC1" {
            return Err(Error::Parse { line: 0, msg: "missing BIC1 magic".into() });
        }
        let n = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let nb = n.div_ceil(8);
        let mut buf = vec![0u8; nb];
        let mut words = Vec::with_capacity(m);
        for _ in 0..m {
            r.read_exact(&mut buf)?;
            let mut row = BitRow::zeros(n);
            for i in 0..n {
                if (buf[i / 8] >> (i % 8)) & 1 == 1 {
                    row.set(i, true);
                }
            }
            words.push(row);
        }
        Dataset::new(n, 0.0, 0, words)
    }

    /// Read either format, sniffing the binary magic.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"BIC1") {
            Dataset::read_binary(&bytes[..])
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Parse { line: 0, msg: "dataset is neither text nor BIC1".into() })?;
            Dataset::parse_text(&text)
        }
    }
}

/// Encode `M` uniform info words of `m` blocks, interleave with `pi`, pass through a BSC(p).
pub fn generate_dataset(
    code: &ConvCode,
    pi: &Interleaver,
    p: f64,
    m_words: usize,
    m_blocks: usize,
    seed: u64,
) -> Result<Dataset> {
    check_p(p)?;
    if m_words == 0 {
        return Err(Error::Domain("M must be positive".into()));
    }
    let n = m_blocks * code.n();
    if pi.len() != n {
        return Err(Error::Shape(format!("interleaver length {} != m·n = {n}", pi.len())));
    }
    let words = (0..m_words as u64)
        .into_par_iter()
        .map(|w| {
            let mut info_rng = stream_rng(seed, INFO_STREAM | w);
            let info: Vec<u8> = (0..m_blocks * code.k()).map(|_| info_rng.gen::<bool>() as u8).collect();
            let x = code.encode(&info)?;
            let y = pi.apply(&x)?;
            let z = bsc(&y, p, &mut stream_rng(seed, NOISE_STREAM | w))?;
            Ok(BitRow::from_bits(&z))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(n, p, seed, words)
}

/// Number of words on which the bits at the check's positions XOR to zero.
pub fn satisfaction_count(e: &ParityCheck, data: &Dataset) -> usize {
    let idx: Vec<usize> = e.positions().iter().map(|&p| p as usize - 1).collect();
    data.words()
        .iter()
        .filter(|w| idx.iter().fold(false, |acc, &i| acc ^ w.get(i)) == false)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaver_basics() {
        assert_eq!(random_interleaver(1, 99).unwrap(), Interleaver::identity(1));
        assert_eq!(random_interleaver(50, 3).unwrap(), random_interleaver(50, 3).unwrap());
        let pi = random_interleaver(26, 5).unwrap();
        let mut v = pi.map().to_vec();
        v.sort_unstable();
        assert_eq!(v, (1..=26).collect::<Vec<u32>>());
        assert!(random_interleaver(0, 1).is_err());
        assert!(Interleaver::new(vec![1, 1]).is_err());
    }

    #[test]
    fn apply_convention() {
        let pi = Interleaver::new(vec![3, 1, 2]).unwrap();
        // y[π(i)] = x[i]
        assert_eq!(pi.apply(&[1, 0, 0]).unwrap(), vec![0, 0, 1]);
        let x = [1, 1, 0];
        assert_eq!(pi.inverse().apply(&pi.apply(&x).unwrap()).unwrap(), x.to_vec());
        assert_eq!(Interleaver::identity(3).apply(&x).unwrap(), x.to_vec());
        let e = ParityCheck::new(vec![1, 2]).unwrap();
        assert_eq!(pi.apply_check(&e).unwrap().positions(), &[1, 3]);
    }

    #[test]
    fn interleaver_text_roundtrip() {
        let pi = random_interleaver(12, 8).unwrap();
        assert_eq!(Interleaver::parse_text(&pi.to_text()).unwrap(), pi);
    }

    #[test]
    fn bsc_extremes() {
        let mut rng = stream_rng(1, 9);
        let y = vec![1u8, 0, 1, 1, 0];
        assert_eq!(bsc(&y, 0.0, &mut rng).unwrap(), y);
        assert!(bsc(&y, 0.6, &mut rng).is_err());
        let long = vec![0u8; 20000];
        let flips = bsc(&long, 0.1, &mut rng).unwrap().iter().filter(|&&b| b == 1).count();
        // mean 2000, sigma ~42
        assert!((1870..2130).contains(&flips), "{flips}");
    }

    #[test]
    fn dataset_formats_roundtrip() {
        let code = ConvCode::named("C2").unwrap();
        let pi = random_interleaver(40, 1).unwrap();
        let d = generate_dataset(&code, &pi, 0.0, 5, 20, 7).unwrap();
        let mut txt = Vec::new();
        d.write_text(&mut txt).unwrap();
        assert!(txt.starts_with(b"40 5 0 7\n"));
        assert_eq!(Dataset::parse_text(std::str::from_utf8(&txt).unwrap()).unwrap(), d);
        let mut bin = Vec::new();
        d.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 12 + 5 * 5);
        let back = Dataset::read_binary(&bin[..]).unwrap();
        assert_eq!(back.words(), d.words());
        assert!(generate_dataset(&code, &pi, 0.0, 0, 20, 7).is_err());
        assert!(generate_dataset(&code, &pi, 0.0, 1, 21, 7).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let code = ConvCode::named("C1").unwrap();
        let pi = random_interleaver(60, 2).unwrap();
        let a = generate_dataset(&code, &pi, 0.05, 30, 30, 11).unwrap();
        let b = generate_dataset(&code, &pi, 0.05, 30, 30, 11).unwrap();
        assert_eq!(a, b);
    }
}
