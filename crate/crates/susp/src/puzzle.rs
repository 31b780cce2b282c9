//! Puzzle representation: rows over the alphabet `{1,2,3}`, the text codec,
//! row encoding, isomorphism-class canonicalization, and the local-SUSP
//! predicate.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::{Error, Result};

/// A single puzzle row: `width` symbols, each in `{1,2,3}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Row {
    cells: Vec<u8>,
}

impl Row {
    pub fn new(cells: Vec<u8>) -> Result<Row> {
        if let Some(&bad) = cells.iter().find(|&&c| !(1..=3).contains(&c)) {
            return Err(Error::Invalid(format!("cell value {bad} not in 1..=3")));
        }
        Ok(Row { cells })
    }

    pub fn width(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    /// Big-endian base-3 encoding of cells minus one; a bijection between
    /// width-`k` rows and `0..3^k`. Lexicographic text order agrees with
    /// numeric order of the code.
    pub fn encode(&self) -> u32 {
        self.cells
            .iter()
            .fold(0u32, |acc, &c| acc * 3 + (c - 1) as u32)
    }

    /// Inverse of [`Row::encode`] at a given width.
    pub fn from_code(code: u32, width: usize) -> Row {
        let mut cells = vec![1u8; width];
        let mut c = code;
        for i in (0..width).rev() {
            cells[i] = (c % 3) as u8 + 1;
            c /= 3;
        }
        debug_assert_eq!(c, 0, "code out of range for width");
        Row { cells }
    }

    /// Bitmask of the columns holding `symbol` (the row's piece for that
    /// symbol). Widths up to 64 are supported, far beyond practical use.
    pub fn support(&self, symbol: u8) -> u64 {
        let mut mask = 0u64;
        for (i, &c) in self.cells.iter().enumerate() {
            if c == symbol {
                mask |= 1 << i;
            }
        }
        mask
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &c in &self.cells {
            write!(f, "{}", c)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Row {
    type Err = Error;

    fn from_str(s: &str) -> Result<Row> {
        let mut cells = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '1' => cells.push(1),
                '2' => cells.push(2),
                '3' => cells.push(3),
                _ => return Err(Error::BadSymbol { line: 0, symbol: ch }),
            }
        }
        Ok(Row { cells })
    }
}

/// A puzzle: a set of distinct equal-width rows, held in ascending
/// [`Row::encode`] order. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Puzzle {
    width: usize,
    rows: Vec<Row>,
}

impl Puzzle {
    /// The empty puzzle of a given width (a strong USP; the search root).
    pub fn empty(width: usize) -> Puzzle {
        Puzzle { width, rows: Vec::new() }
    }

    pub fn new(width: usize, mut rows: Vec<Row>) -> Result<Puzzle> {
        for r in &rows {
            if r.width() != width {
                return Err(Error::WidthMismatch(width, r.width()));
            }
        }
        rows.sort_by_key(Row::encode);
        if let Some(w) = rows.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateRow { line: 0, row: w[0].to_string() });
        }
        Ok(Puzzle { width, rows })
    }

    pub fn from_codes(width: usize, codes: &[u32]) -> Result<Puzzle> {
        Self::new(width, codes.iter().map(|&c| Row::from_code(c, width)).collect())
    }

    /// Hot-path constructor for the search: codes must already be sorted,
    /// distinct, and in range.
    pub(crate) fn from_sorted_codes_unchecked(width: usize, codes: &[u32]) -> Puzzle {
        debug_assert!(codes.windows(2).all(|w| w[0] < w[1]));
        Puzzle {
            width,
            rows: codes.iter().map(|&c| Row::from_code(c, width)).collect(),
        }
    }

    /// Number of rows `s`.
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns `k`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row_codes(&self) -> Vec<u32> {
        self.rows.iter().map(Row::encode).collect()
    }

    pub fn contains_code(&self, code: u32) -> bool {
        self.rows.binary_search_by_key(&code, Row::encode).is_ok()
    }

    /// The puzzle extended by one row. Errors on width mismatch or if the
    /// row is already present.
    pub fn with_row(&self, row: Row) -> Result<Puzzle> {
        if row.width() != self.width {
            return Err(Error::WidthMismatch(self.width, row.width()));
        }
        let code = row.encode();
        match self.rows.binary_search_by_key(&code, Row::encode) {
            Ok(_) => Err(Error::DuplicateRow { line: 0, row: row.to_string() }),
            Err(pos) => {
                let mut rows = self.rows.clone();
                rows.insert(pos, row);
                Ok(Puzzle { width: self.width, rows })
            }
        }
    }

    /// The subpuzzle on the given row indices.
    pub fn subpuzzle(&self, indices: &[usize]) -> Puzzle {
        let rows: Vec<Row> = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Puzzle::new(self.width, rows).expect("subset of valid puzzle is valid")
    }

    /// Parse the `.puz` text format: one row per line over `{'1','2','3'}`,
    /// blank lines and `#` comments ignored, LF or CRLF accepted.
    pub fn parse(text: &str) -> Result<Puzzle> {
        let mut rows: Vec<Row> = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let mut cells = Vec::with_capacity(line.len());
            for ch in line.chars() {
                match ch {
                    '1' => cells.push(1u8),
                    '2' => cells.push(2),
                    '3' => cells.push(3),
                    _ => return Err(Error::BadSymbol { line: lineno, symbol: ch }),
                }
            }
            match width {
                None => width = Some(cells.len()),
                Some(w) if w != cells.len() => {
                    return Err(Error::MixedWidth { line: lineno, expected: w, got: cells.len() })
                }
                _ => {}
            }
            let row = Row { cells };
            if rows.contains(&row) {
                return Err(Error::DuplicateRow { line: lineno, row: row.to_string() });
            }
            rows.push(row);
        }
        Puzzle::new(width.unwrap_or(0), rows)
    }

    /// Inverse of [`Puzzle::parse`]: rows in ascending encode order, one per
    /// line, LF-terminated.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * (self.width + 1));
        for r in &self.rows {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    /// Apply a column permutation `rho` and symbol permutation `delta`:
    /// `new_row[c] = delta(row[rho(c)])`. The transformed puzzle is
    /// isomorphic to `self`.
    pub fn transform(&self, rho: &[usize], delta: &[u8; 3]) -> Puzzle {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let cells = (0..self.width)
                    .map(|c| delta[(r.cells[rho[c]] - 1) as usize])
                    .collect();
                Row { cells }
            })
            .collect();
        Puzzle::new(self.width, rows).expect("transform of valid puzzle is valid")
    }

    /// Canonical representative of this puzzle's isomorphism class.
    pub fn canonical_form(&self) -> CanonicalForm {
        canonicalizer(self.width).canonical_form(self)
    }

    /// True iff every not-all-equal triple of rows (ordered, with
    /// repetition) has a column whose symbol triple lies in the local
    /// witness set [`LOCAL_WITNESSES`].
    pub fn is_local_susp(&self) -> bool {
        let mut lut = [false; 27];
        for &(a, b, c) in LOCAL_WITNESSES {
            lut[((a - 1) * 9 + (b - 1) * 3 + (c - 1)) as usize] = true;
        }
        let s = self.rows.len();
        for u in 0..s {
            for v in 0..s {
                'w: for w in 0..s {
                    if u == v && v == w {
                        continue;
                    }
                    for c in 0..self.width {
                        let a = self.rows[u].cells[c];
                        let b = self.rows[v].cells[c];
                        let d = self.rows[w].cells[c];
                        if lut[((a - 1) * 9 + (b - 1) * 3 + (d - 1)) as usize] {
                            continue 'w;
                        }
                    }
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for Puzzle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// The six column triples a local SUSP must witness on every not-all-equal
/// row triple.
pub const LOCAL_WITNESSES: &[(u8, u8, u8)] =
    &[(1, 2, 1), (1, 2, 2), (1, 1, 3), (1, 3, 3), (2, 2, 3), (3, 2, 3)];

/// Canonical encoding of a puzzle's isomorphism class: the lexicographically
/// minimal serialization over all column and symbol permutations, rows
/// sorted. Two puzzles are isomorphic iff their canonical forms are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm {
    bytes: Vec<u8>,
}

impl CanonicalForm {
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// 128-bit FNV-1a of the canonical bytes; used as a compact seen-set
    /// key during search.
    pub fn digest(&self) -> u128 {
        fnv1a_128(&self.bytes)
    }

    /// The canonical representative puzzle itself.
    pub fn representative(&self) -> Puzzle {
        Puzzle::parse(std::str::from_utf8(&self.bytes).expect("canonical bytes are ASCII"))
            .expect("canonical bytes are a valid puzzle")
    }
}

/// 128-bit digest of a sorted code vector; the search and the clique
/// decomposition key their seen-sets on it.
pub(crate) fn digest_codes(codes: &[u32]) -> u128 {
    let mut bytes = Vec::with_capacity(codes.len() * 4);
    for c in codes {
        bytes.extend_from_slice(&c.to_le_bytes());
    }
    fnv1a_128(&bytes)
}

pub(crate) fn fnv1a_128(bytes: &[u8]) -> u128 {
    const OFFSET: u128 = 0x6c62272e07bb014262b821756295c58d;
    const PRIME: u128 = 0x0000000001000000000000000000013b;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= b as u128;
        h = h.wrapping_mul(PRIME);
    }
    h
}

const SYMBOL_PERMS: [[u8; 3]; 6] = [
    [1, 2, 3],
    [1, 3, 2],
    [2, 1, 3],
    [2, 3, 1],
    [3, 1, 2],
    [3, 2, 1],
];

fn column_perms(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    permute(&mut cur, 0, &mut out);
    out
}

fn permute(cur: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i == cur.len() {
        out.push(cur.clone());
        return;
    }
    for j in i..cur.len() {
        cur.swap(i, j);
        permute(cur, i + 1, out);
        cur.swap(i, j);
    }
}

/// Reusable canonicalization machinery for one width. For small widths the
/// action of every transform on the whole code space `0..3^k` is tabulated
/// once, making per-puzzle canonicalization a matter of table lookups.
pub struct Canonicalizer {
    width: usize,
    /// `tables[t][code]` = image of `code` under transform `t`; empty when
    /// the width is too large to tabulate.
    tables: Vec<Vec<u32>>,
    /// Explicit (rho, delta) list, used when `tables` is empty.
    transforms: Vec<(Vec<usize>, [u8; 3])>,
}

// 3^k * k! * 6 table entries; beyond k = 6 the tables stop paying for
// themselves and we fall back to direct row transformation.
const TABLE_MAX_WIDTH: usize = 6;

impl Canonicalizer {
    pub fn new(width: usize) -> Canonicalizer {
        let rhos = column_perms(width);
        let mut transforms = Vec::with_capacity(rhos.len() * 6);
        for rho in &rhos {
            for delta in &SYMBOL_PERMS {
                transforms.push((rho.clone(), *delta));
            }
        }
        let tables = if width <= TABLE_MAX_WIDTH {
            let n = 3usize.pow(width as u32);
            transforms
                .iter()
                .map(|(rho, delta)| {
                    (0..n as u32)
                        .map(|code| {
                            let row = Row::from_code(code, width);
                            let cells: Vec<u8> = (0..width)
                                .map(|c| delta[(row.cells[rho[c]] - 1) as usize])
                                .collect();
                            Row { cells }.encode()
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Canonicalizer { width, tables, transforms }
    }

    /// Minimal sorted code vector over all transforms.
    pub fn canonical_codes(&self, codes: &[u32]) -> Vec<u32> {
        let mut best: Option<Vec<u32>> = None;
        let mut scratch = vec![0u32; codes.len()];
        if !self.tables.is_empty() {
            for table in &self.tables {
                for (dst, &c) in scratch.iter_mut().zip(codes) {
                    *dst = table[c as usize];
                }
                scratch.sort_unstable();
                if best.as_ref().is_none_or(|b| scratch < *b) {
                    best = Some(scratch.clone());
                }
            }
        } else {
            let rows: Vec<Row> = codes.iter().map(|&c| Row::from_code(c, self.width)).collect();
            for (rho, delta) in &self.transforms {
                for (dst, row) in scratch.iter_mut().zip(&rows) {
                    let mut code = 0u32;
                    for c in 0..self.width {
                        code = code * 3 + (delta[(row.cells[rho[c]] - 1) as usize] - 1) as u32;
                    }
                    *dst = code;
                }
                scratch.sort_unstable();
                if best.as_ref().is_none_or(|b| scratch < *b) {
                    best = Some(scratch.clone());
                }
            }
        }
        best.unwrap_or_default()
    }

    pub fn canonical_form(&self, p: &Puzzle) -> CanonicalForm {
        assert_eq!(p.width(), self.width, "canonicalizer width mismatch");
        let codes = p.row_codes();
        let min = self.canonical_codes(&codes);
        let mut bytes = Vec::with_capacity(min.len() * (self.width + 1));
        for code in min {
            let row = Row::from_code(code, self.width);
            bytes.extend_from_slice(row.to_string().as_bytes());
            bytes.push(b'\n');
        }
        CanonicalForm { bytes }
    }

    /// Order of the stabilizer of `p` inside the column x symbol
    /// permutation group: the number of transforms mapping the row set to
    /// itself. The isomorphism-class orbit size is `k!*6 / stabilizer`.
    pub fn stabilizer_order(&self, p: &Puzzle) -> usize {
        let codes = p.row_codes();
        let mut scratch = vec![0u32; codes.len()];
        let mut stab = 0usize;
        for t in 0..self.transforms.len() {
            if !self.tables.is_empty() {
                let table = &self.tables[t];
                for (dst, &c) in scratch.iter_mut().zip(&codes) {
                    *dst = table[c as usize];
                }
            } else {
                let (rho, delta) = &self.transforms[t];
                let q = p.transform(rho, delta);
                scratch = q.row_codes();
            }
            scratch.sort_unstable();
            if scratch == codes {
                stab += 1;
            }
        }
        stab
    }

    pub fn group_order(&self) -> usize {
        self.transforms.len()
    }
}

/// Shared per-width canonicalizers; building the width-6 tables takes tens
/// of milliseconds, so they are cached for the life of the process.
fn canonicalizer(width: usize) -> Arc<Canonicalizer> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Canonicalizer>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().unwrap().get(&width) {
        return c.clone();
    }
    let built = Arc::new(Canonicalizer::new(width));
    let mut guard = cache.lock().unwrap();
    guard.entry(width).or_insert(built).clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn puzzle(text: &str) -> Puzzle {
        Puzzle::parse(text).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(puzzle("11").rows()[0].encode(), 0);
        assert_eq!(puzzle("32").rows()[0].encode(), 7);
        assert_eq!(puzzle("13").rows()[0].encode(), 2);
    }

    #[test]
    fn encode_is_bijection_width_3() {
        for code in 0..27u32 {
            assert_eq!(Row::from_code(code, 3).encode(), code);
        }
    }

    #[test]
    fn parse_basic() {
        let p = puzzle("32");
        assert_eq!((p.size(), p.width()), (1, 2));
        let p = puzzle("");
        assert_eq!((p.size(), p.width()), (0, 0));
        let p = puzzle("12\n23");
        assert_eq!((p.size(), p.width()), (2, 2));
        let p = puzzle("# comment\n\r\n12\r\n23\r\n");
        assert_eq!((p.size(), p.width()), (2, 2));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Puzzle::parse("12\n123"), Err(Error::MixedWidth { .. })));
        assert!(matches!(Puzzle::parse("14"), Err(Error::BadSymbol { .. })));
        assert!(matches!(Puzzle::parse("12\n12"), Err(Error::DuplicateRow { .. })));
    }

    #[test]
    fn serialize_sorted_round_trip() {
        assert_eq!(puzzle("32").serialize(), "32\n");
        // encode(12)=1 < encode(23)=5, so rows come out sorted
        assert_eq!(puzzle("23\n12").serialize(), "12\n23\n");
        for text in ["", "32", "12\n23", "111\n222\n333"] {
            let p = puzzle(text);
            assert_eq!(Puzzle::parse(&p.serialize()).unwrap(), p);
        }
    }

    #[test]
    fn canonical_symbol_permutation() {
        let a = puzzle("1").canonical_form();
        let b = puzzle("2").canonical_form();
        let c = puzzle("3").canonical_form();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn canonical_column_swap() {
        // {12,23} and {21,32} are related by swapping the two columns.
        assert_eq!(puzzle("12\n23").canonical_form(), puzzle("21\n32").canonical_form());
    }

    #[test]
    fn canonical_invariant_under_all_transforms() {
        let p = puzzle("112\n231\n323");
        let base = p.canonical_form();
        for rho in column_perms(3) {
            for delta in &SYMBOL_PERMS {
                assert_eq!(p.transform(&rho, delta).canonical_form(), base);
            }
        }
    }

    #[test]
    fn canonical_form_is_fixed_point() {
        for text in ["32", "12\n23", "112\n231\n323"] {
            let cf = puzzle(text).canonical_form();
            assert_eq!(cf.representative().canonical_form(), cf);
        }
    }

    /// Single-row width-k classes are the partitions of k into at most 3
    /// parts: 4 for k=4, 5 for k=5, 6 -> 7.
    #[test]
    fn single_row_class_counts() {
        for (k, expected) in [(4usize, 4usize), (5, 5), (6, 7)] {
            let canon = Canonicalizer::new(k);
            let mut forms = std::collections::HashSet::new();
            for code in 0..3u32.pow(k as u32) {
                forms.insert(canon.canonical_codes(&[code]));
            }
            assert_eq!(forms.len(), expected, "width {k}");
        }
    }

    /// Canonical equality coincides with brute-force isomorphism search
    /// over all transforms, exhaustively at width 2.
    #[test]
    fn canonical_equality_matches_isomorphism_width_2() {
        let all_pairs: Vec<Puzzle> = {
            let mut v = Vec::new();
            for a in 0..9u32 {
                for b in (a + 1)..9 {
                    v.push(Puzzle::from_codes(2, &[a, b]).unwrap());
                }
            }
            v
        };
        let rhos = column_perms(2);
        let isomorphic = |p: &Puzzle, q: &Puzzle| {
            rhos.iter().any(|rho| {
                SYMBOL_PERMS.iter().any(|delta| p.transform(rho, delta) == *q)
            })
        };
        for p in &all_pairs {
            for q in &all_pairs {
                assert_eq!(
                    p.canonical_form() == q.canonical_form(),
                    isomorphic(p, q),
                    "{p:?} vs {q:?}"
                );
            }
        }
    }

    #[test]
    fn stabilizer_orbit_sizes_width_1() {
        // {1}: stabilized by the two symbol perms fixing 1; orbit = 6/2 = 3.
        let canon = Canonicalizer::new(1);
        let p = puzzle("1");
        assert_eq!(canon.group_order(), 6);
        assert_eq!(canon.stabilizer_order(&p), 2);
    }

    #[test]
    fn local_susp_examples() {
        assert!(puzzle("1").is_local_susp());
        assert!(!puzzle("1\n2").is_local_susp());
        assert!(Puzzle::empty(3).is_local_susp());
    }

    #[test]
    fn supports() {
        let r: Row = "12131".parse().unwrap();
        assert_eq!(r.support(1), 0b10101);
        assert_eq!(r.support(2), 0b00010);
        assert_eq!(r.support(3), 0b01000);
    }
}
