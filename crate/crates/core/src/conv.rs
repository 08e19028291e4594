//! Convolutional codes, truncated encoding and parity-check position sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitRow;
use crate::error::{Error, Result};

/// An (n, k) feedforward convolutional code given by its k×n generator matrix.
/// Each polynomial is a coefficient list, constant term first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvCode {
    n: usize,
    k: usize,
    generators: Vec<Vec<Vec<u8>>>,
    memory: usize,
}

impl ConvCode {
    pub fn new(generators: Vec<Vec<Vec<u8>>>) -> Result<Self> {
        let k = generators.len();
        let n = generators.first().map_or(0, |r| r.len());
        if k == 0 || n <= k {
            return Err(Error::Domain(format!("need 1 <= k < n, got k={k} n={n}")));
        }
        let mut memory = 0;
        let mut gens = Vec::with_capacity(k);
        for row in generators {
            if row.len() != n {
                return Err(Error::Domain("ragged generator matrix".into()));
            }
            let row: Vec<Vec<u8>> = row
                .into_iter()
                .map(|mut p| {
                    while p.last() == Some(&0) {
                        p.pop();
                    }
                    p
                })
                .collect();
            if row.iter().all(|p| p.is_empty()) {
                return Err(Error::Domain("zero generator row".into()));
            }
            if row.iter().flatten().any(|&c| c > 1) {
                return Err(Error::Domain("coefficients must be 0 or 1".into()));
            }
            for p in &row {
                memory = memory.max(p.len().saturating_sub(1));
            }
            gens.push(row);
        }
        Ok(ConvCode { n, k, generators: gens, memory })
    }

    /// Named codes used throughout the experiments: `C1`, `C2`, `C3`.
    pub fn named(name: &str) -> Option<Self> {
        let s = match name.to_ascii_uppercase().as_str() {
            "C1" => "1+D+D2+D5,1+D+D3+D4+D6",
            "C2" => "1+D+D2,1+D2+D3",
            "C3" => "1+D2+D3+D5+D6,1+D+D2+D3+D6",
            _ => return None,
        };
        s.parse().ok()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn generators(&self) -> &[Vec<Vec<u8>>] {
        &self.generators
    }

    /// Truncated encoding with zero initial state and no tail.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() % self.k != 0 {
            return Err(Error::Shape(format!(
                "info length {} not divisible by k={}",
                info.len(),
                self.k
            )));
        }
        let m = info.len() / self.k;
        let mut out = vec![0u8; m * self.n];
        for (r, row) in self.generators.iter().enumerate() {
            for (i, poly) in row.iter().enumerate() {
                for (d, &c) in poly.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    for j in d..m {
                        out[j * self.n + i] ^= info[(j - d) * self.k + r] & 1;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Columns of the truncated generator matrix: for each of the `m·n`
    /// codeword positions, the set of `m·k` info bits it depends on.
    pub fn generator_columns(&self, m: usize) -> Vec<BitRow> {
        let mut cols = vec![BitRow::zeros(m * self.k); m * self.n];
        for (r, row) in self.generators.iter().enumerate() {
            for (i, poly) in row.iter().enumerate() {
                for (d, &c) in poly.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    for j in d..m {
                        cols[j * self.n + i].flip((j - d) * self.k + r);
                    }
                }
            }
        }
        cols
    }

    /// Whether `e` (1-based positions) is a parity check of the code truncated to `m` blocks.
    pub fn is_dual(&self, e: &ParityCheck, m: usize) -> bool {
        let cols = self.generator_columns(m);
        is_dual_with(&cols, e.positions())
    }
}

fn is_dual_with(cols: &[BitRow], positions: &[i64]) -> bool {
    let Some(first) = cols.first() else { return false };
    let mut acc = BitRow::zeros(first.len());
    for &p in positions {
        if p < 1 || p as usize > cols.len() {
            return false;
        }
        acc.xor_assign(&cols[p as usize - 1]);
    }
    acc.count_ones() == 0
}

fn format_poly(p: &[u8]) -> String {
    let terms: Vec<String> = p
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 1)
        .map(|(d, _)| match d {
            0 => "1".to_string(),
            1 => "D".to_string(),
            _ => format!("D{d}"),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join("+")
    }
}

fn parse_poly(s: &str) -> Result<Vec<u8>> {
    let bad = || Error::Domain(format!("bad polynomial '{s}'"));
    let mut coeffs = Vec::new();
    for term in s.split('+') {
        let term = term.trim();
        let deg = match term {
            "0" => continue,
            "1" => 0,
            "D" | "d" => 1,
            _ => {
                let rest = term.strip_prefix(['D', 'd']).ok_or_else(bad)?;
                let rest = rest.strip_prefix('^').unwrap_or(rest);
                rest.parse::<usize>().map_err(|_| bad())?
            }
        };
        if deg > 64 {
            return Err(bad());
        }
        if coeffs.len() <= deg {
            coeffs.resize(deg + 1, 0);
        }
        coeffs[deg] ^= 1;
    }
    Ok(coeffs)
}

impl FromStr for ConvCode {
    type Err = Error;

    /// Rows separated by `;`, polynomials within a row by `,`, e.g. `1+D+D2,1+D2+D3`.
    fn from_str(s: &str) -> Result<Self> {
        let rows = s
            .split(';')
            .map(|row| row.split(',').map(parse_poly).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        ConvCode::new(rows)
    }
}

impl fmt::Display for ConvCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .generators
            .iter()
            .map(|row| row.iter().map(|p| format_poly(p)).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", rows.join(";"))
    }
}

/// A parity-check equation: the sorted set of positions whose bits XOR to zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParityCheck(Vec<i64>);

impl ParityCheck {
    /// Sorts the positions; rejects empty input and repeated positions.
    pub fn new(mut positions: Vec<i64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Domain("empty parity check".into()));
        }
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("repeated position in {positions:?}")));
        }
        Ok(ParityCheck(positions))
    }

    pub fn positions(&self) -> &[i64] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    pub fn min_pos(&self) -> i64 {
        self.0[0]
    }

    pub fn max_pos(&self) -> i64 {
        self.0[self.0.len() - 1]
    }

    pub fn span(&self) -> i64 {
        self.max_pos() - self.min_pos() + 1
    }

    pub fn contains(&self, x: i64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    /// Translate every position by `i·n`.
    pub fn shift(&self, i: i64, n: usize) -> ParityCheck {
        let d = i * n as i64;
        ParityCheck(self.0.iter().map(|&p| p + d).collect())
    }

    /// Translate by an arbitrary offset.
    pub fn translate(&self, d: i64) -> ParityCheck {
        ParityCheck(self.0.iter().map(|&p| p + d).collect())
    }

    /// The mirror image `{-x}` translated back to the same minimum.
    pub fn reversed(&self) -> ParityCheck {
        let (lo, hi) = (self.min_pos(), self.max_pos());
        let mut v: Vec<i64> = self.0.iter().map(|&p| lo + hi - p).collect();
        v.reverse();
        ParityCheck(v)
    }

    /// Number of common positions.
    pub fn overlap(&self, other: &ParityCheck) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut c) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        c
    }

    pub fn intersection(&self, other: &ParityCheck) -> Vec<i64> {
        self.0.iter().copied().filter(|&p| other.contains(p)).collect()
    }

    /// Apply a position map.
    pub fn map(&self, f: impl Fn(i64) -> i64) -> Result<ParityCheck> {
        ParityCheck::new(self.0.iter().map(|&p| f(p)).collect())
    }
}

impl fmt::Display for ParityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", s.join(" "))
    }
}

/// Shift every position of `e` by `i·n`.
pub fn shift(e: &ParityCheck, i: i64, n: usize) -> ParityCheck {
    e.shift(i, n)
}

/// `max - min + 1` of a position set.
pub fn span(positions: &[i64]) -> Result<i64> {
    match (positions.iter().min(), positions.iter().max()) {
        (Some(lo), Some(hi)) => Ok(hi - lo + 1),
        _ => Err(Error::Domain("span of empty set".into())),
    }
}

/// Whether one check is a shift of the other by a multiple of `n`.
pub fn same_type(e: &ParityCheck, e2: &ParityCheck, n: usize) -> bool {
    if e.weight() != e2.weight() {
        return false;
    }
    let d = e2.min_pos() - e.min_pos();
    d % n as i64 == 0 && e.translate(d) == *e2
}

/// A type of parity check: all shifts by multiples of `n` of a representative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationClass {
    /// Shifted so that its minimum lies in the first block `1..=n`.
    pub representative: ParityCheck,
    pub span: i64,
    pub n: usize,
}

impl EquationClass {
    pub fn from_check(e: &ParityCheck, n: usize) -> Self {
        let b = (e.min_pos() - 1).div_euclid(n as i64);
        let representative = e.shift(-b, n);
        EquationClass { span: representative.span(), representative, n }
    }

    /// All shifts of the representative lying inside `1..=len`.
    pub fn in_range_shifts(&self, len: usize) -> Vec<ParityCheck> {
        let mut out = Vec::new();
        let mut i = 0;
        loop {
            let e = self.representative.shift(i, self.n);
            if e.max_pos() > len as i64 {
                break;
            }
            out.push(e);
            i += 1;
        }
        out
    }
}

/// Every weight-`t` parity check of span at most `s_max` of the code truncated
/// to `m` blocks whose in-range shifts are all parity checks, grouped by type.
///
/// The search walks position subsets starting inside a middle block and
/// prunes as soon as an info bit can no longer be cancelled: once the next
/// candidate position exceeds the last position an info bit touches, that bit
/// of the accumulated column XOR must already be zero.
pub fn enumerate_classes(
    code: &ConvCode,
    t: usize,
    s_max: usize,
    m: usize,
) -> Result<Vec<EquationClass>> {
    if t < 2 || s_max < t {
        return Err(Error::Domain(format!("need 2 <= t <= s_max, got t={t} s_max={s_max}")));
    }
    let n = code.n();
    let big_n = m * n;
    let reach = s_max.div_ceil(n) + 1;
    if m < 2 * (code.memory() + reach) + 1 {
        return Err(Error::Domain(format!(
            "m={m} too small for s_max={s_max}; need at least {}",
            2 * (code.memory() + reach) + 1
        )));
    }
    let b0 = m / 2;
    let cols = code.generator_columns(m);
    let words = cols[0].words().len();

    // last (0-based) codeword position influenced by each info bit
    let mut last = vec![0usize; m * code.k()];
    for (p, c) in cols.iter().enumerate() {
        for b in c.ones() {
            last[b] = last[b].max(p);
        }
    }
    // closed[p]: info bits whose influence ends before position p
    let mut closed = vec![vec![0u64; words]; big_n + 1];
    for (b, &l) in last.iter().enumerate() {
        for row in closed.iter_mut().skip(l + 1) {
            row[b >> 6] |= 1u64 << (b & 63);
        }
    }

    let mut found = Vec::new();
    for off in 0..n {
        let a = b0 * n + off;
        let hi = (a + s_max).min(big_n);
        let mut acc = vec![0u64; words * (t + 1)];
        acc[words..2 * words].copy_from_slice(cols[a].words());
        let mut chosen = vec![a];
        dfs(&cols, &closed, words, t, a + 1, hi, &mut acc, &mut chosen, &mut found);
    }

    let mut classes = Vec::new();
    for pos in found {
        let e = ParityCheck::new(pos.iter().map(|&p| p as i64 + 1).collect())?;
        let cls = EquationClass::from_check(&e, n);
        if cls.in_range_shifts(big_n).iter().all(|s| is_dual_with(&cols, s.positions())) {
            classes.push(cls);
        }
    }
    classes.sort_by(|a, b| (a.span, &a.representative).cmp(&(b.span, &b.representative)));
    classes.dedup();
    Ok(classes)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    cols: &[BitRow],
    closed: &[Vec<u64>],
    words: usize,
    t: usize,
    from: usize,
    hi: usize,
    acc: &mut [u64],
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let depth = chosen.len();
    let cur = depth * words;
    if depth == t {
        if acc[cur..cur + words].iter().all(|&w| w == 0) {
            out.push(chosen.clone());
        }
        return;
    }
    let need = t - depth;
    for q in from..hi {
        if hi - q < need {
            break;
        }
        let blocked = (0..words).any(|w| acc[cur + w] & closed[q][w] != 0);
        if blocked {
            break;
        }
        let cq = cols[q].words();
        for w in 0..words {
            acc[cur + words + w] = acc[cur + w] ^ cq[w];
        }
        chosen.push(q);
        dfs(cols, closed, words, t, q + 1, hi, acc, chosen, out);
        chosen.pop();
    }
}

/// Parse the equation-list text format: one check per line, positions
/// separated by whitespace, `#` starts a comment line.
pub fn parse_checks(text: &str) -> Result<Vec<ParityCheck>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pos = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad position '{tok}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ParityCheck::new(pos).map_err(|e| Error::Parse { line: ln + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

pub fn format_checks(checks: &[ParityCheck]) -> String {
    let mut s = String::new();
    for c in checks {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(v: &[i64]) -> ParityCheck {
        ParityCheck::new(v.to_vec()).unwrap()
    }

    /// Reference encoder: convolve each row polynomial with the info stream
    /// by explicit polynomial multiplication, then interleave output streams.
    fn poly_mul_encode(code: &ConvCode, info: &[u8]) -> Vec<u8> {
        let (n, k) = (code.n(), code.k());
        let m = info.len() / k;
        let mut out = vec![0u8; m * n];
        for i in 0..n {
            let mut stream = vec![0u8; m];
            for r in 0..k {
                let u: Vec<u8> = (0..m).map(|j| info[j * k + r]).collect();
                let g = &code.generators()[r][i];
                let mut prod = vec![0u8; m + g.len()];
                for (a, &ua) in u.iter().enumerate() {
                    for (b, &gb) in g.iter().enumerate() {
                        prod[a + b] ^= ua & gb;
                    }
                }
                for j in 0..m {
                    stream[j] ^= prod[j];
                }
            }
            for j in 0..m {
                out[j * n + i] = stream[j];
            }
        }
        out
    }

    #[test]
    fn impulse_response_of_c2() {
        let c2 = ConvCode::named("C2").unwrap();
        let mut info = vec![0u8; 8];
        info[0] = 1;
        let y = c2.encode(&info).unwrap();
        assert_eq!(&y[..8], &[1, 1, 1, 0, 1, 1, 0, 1]);
        assert!(y[8..].iter().all(|&b| b == 0));
        assert_eq!(y, poly_mul_encode(&c2, &info));
    }

    #[test]
    fn encode_shapes() {
        let c = ConvCode::named("C1").unwrap();
        assert_eq!(c.encode(&[0; 10]).unwrap(), vec![0; 20]);
        let k2: ConvCode = "1+D,1,D;1,1+D,0".parse().unwrap();
        assert_eq!((k2.n(), k2.k()), (3, 2));
        assert!(matches!(k2.encode(&[1, 0, 1]), Err(Error::Shape(_))));
        let info = [1, 0, 1, 1, 0, 1, 1, 1];
        assert_eq!(k2.encode(&info).unwrap(), poly_mul_encode(&k2, &info));
    }

    #[test]
    fn code_parsing_roundtrip() {
        let c = ConvCode::named("C3").unwrap();
        assert_eq!(c.memory(), 6);
        let again: ConvCode = c.to_string().parse().unwrap();
        assert_eq!(again, c);
        assert!("1+D,0".parse::<ConvCode>().is_ok());
        assert!("1+X".parse::<ConvCode>().is_err());
        assert!("1+D".parse::<ConvCode>().is_err());
        assert!(ConvCode::named("C9").is_none());
    }

    #[test]
    fn shift_span_type() {
        let e = pc(&[1, 2, 3, 5, 6, 8]);
        assert_eq!(e.shift(1, 2), pc(&[3, 4, 5, 7, 8, 10]));
        assert_eq!(e.shift(0, 2), e);
        assert_eq!(e.shift(3, 2).shift(-3, 2), e);
        assert_eq!(e.span(), 8);
        assert_eq!(span(&[5]).unwrap(), 1);
        assert_eq!(span(&[1, 2, 4, 6, 7, 10]).unwrap(), 10);
        assert!(span(&[]).is_err());
        assert!(same_type(&e, &pc(&[3, 4, 5, 7, 8, 10]), 2));
        assert!(!same_type(&e, &pc(&[1, 2, 4, 6, 7, 10]), 2));
        assert!(same_type(&e, &e, 2));
        assert!(!same_type(&e, &e.translate(1), 2));
    }

    #[test]
    fn rejects_repeats() {
        assert!(ParityCheck::new(vec![3, 1, 3]).is_err());
        assert_eq!(pc(&[4, 1, 2]).positions(), &[1, 2, 4]);
    }

    #[test]
    fn checks_text_format() {
        let text = "# comment\n1 2 4\n\n3 5 6\n";
        let l = parse_checks(text).unwrap();
        assert_eq!(l, vec![pc(&[1, 2, 4]), pc(&[3, 5, 6])]);
        assert_eq!(format_checks(&l), "1 2 4\n3 5 6\n");
        assert!(matches!(parse_checks("1 x"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn reversal() {
        assert_eq!(pc(&[1, 2, 3, 5, 6]).reversed(), pc(&[1, 2, 4, 5, 6]));
        assert_eq!(pc(&[1, 2, 4, 6, 7]).reversed(), pc(&[1, 2, 4, 6, 7]));
    }

    #[test]
    fn class_checks_are_dual_vectors() {
        let c2 = ConvCode::named("C2").unwrap();
        let classes = enumerate_classes(&c2, 6, 16, 40).unwrap();
        for cls in &classes {
            for e in cls.in_range_shifts(80) {
                assert!(c2.is_dual(&e, 40), "{e}");
            }
            assert!((1..=2).contains(&cls.representative.min_pos()));
        }
    }

    #[test]
    fn small_m_rejected() {
        let c2 = ConvCode::named("C2").unwrap();
        assert!(enumerate_classes(&c2, 6, 16, 8).is_err());
    }
}
