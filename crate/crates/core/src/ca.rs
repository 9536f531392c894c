//! Totalistic Moore-neighbourhood cellular automata on square tori.
//!
//! Boards are stored as bit-packed rows (`u64`, bit `c` = column `c`), so a
//! synchronous update is a handful of word operations per row: the eight
//! neighbour planes are summed with a bit-sliced 4-bit counter and the
//! birth/survive sets are applied as masks over the counter planes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of a seed board.
pub const SEED_SIDE: usize = 16;
/// Side length of the embedded evaluation grid.
pub const EMBED_SIDE: usize = 24;
/// Largest supported side (one `u64` per row).
pub const MAX_SIDE: usize = 64;
/// Smallest supported side; below 3 the Moore offsets alias.
pub const MIN_SIDE: usize = 3;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Board {
    n: usize,
    rows: Vec<u64>,
}

impl Board {
    /// All-dead board of side `n`.
    ///
    /// Panics if `n` is outside `MIN_SIDE..=MAX_SIDE`.
    pub fn empty(n: usize) -> Self {
        assert!(
            (MIN_SIDE..=MAX_SIDE).contains(&n),
            "board side {n} outside {MIN_SIDE}..={MAX_SIDE}"
        );
        Board { n, rows: vec![0; n] }
    }

    pub fn full(n: usize) -> Self {
        let mut b = Board::empty(n);
        let mask = b.row_mask();
        b.rows.iter_mut().for_each(|r| *r = mask);
        b
    }

    /// Build from row bit masks (bit `c` of `rows[r]` is cell `(r, c)`).
    pub fn from_row_bits(n: usize, rows: Vec<u64>) -> Result<Self> {
        if !(MIN_SIDE..=MAX_SIDE).contains(&n) || rows.len() != n {
            return Err(Error::BadDimensions(format!(
                "{} rows for side {n}",
                rows.len()
            )));
        }
        let b = Board { n, rows };
        if b.rows.iter().any(|&r| r & !b.row_mask() != 0) {
            return Err(Error::BadDimensions("bits set beyond board width".into()));
        }
        Ok(b)
    }

    /// Build from `'#'`/`'.'` row strings of any square side.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let n = rows.len();
        if !(MIN_SIDE..=MAX_SIDE).contains(&n) {
            return Err(Error::InvalidSeed(format!("{n} rows")));
        }
        let mut b = Board::empty(n);
        for (r, line) in rows.iter().enumerate() {
            let line = line.as_ref();
            if line.chars().count() != n {
                return Err(Error::InvalidSeed(format!(
                    "row {r} has length {}, expected {n}",
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => b.set(r, c, true),
                    '.' => {}
                    other => {
                        return Err(Error::InvalidSeed(format!(
                            "row {r} col {c}: unexpected character {other:?}"
                        )))
                    }
                }
            }
        }
        Ok(b)
    }

    /// Parse the canonical seed format: exactly 16 LF-separated lines of 16
    /// characters over `{'.', '#'}`, with at most one trailing newline.
    pub fn parse_seed(text: &str) -> Result<Self> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let lines: Vec<&str> = body.split('\n').collect();
        if lines.len() != SEED_SIDE {
            return Err(Error::InvalidSeed(format!(
                "{} lines, expected {SEED_SIDE}",
                lines.len()
            )));
        }
        Board::from_rows(&lines)
    }

    /// Canonical text: `n` lines joined by LF with a trailing newline.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.n * (self.n + 1));
        for r in 0..self.n {
            for c in 0..self.n {
                s.push(if self.get(r, c) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    #[inline]
    pub fn row_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r] >> c & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, live: bool) {
        if live {
            self.rows[r] |= 1 << c;
        } else {
            self.rows[r] &= !(1 << c);
        }
    }

    #[inline]
    pub fn toggle(&mut self, r: usize, c: usize) {
        self.rows[r] ^= 1 << c;
    }

    pub fn live_count(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    pub fn hamming(&self, other: &Board) -> usize {
        assert_eq!(self.n, other.n, "hamming distance between different sides");
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Cyclic shift by `(dr, dc)`: cell `(r, c)` moves to `(r+dr, c+dc)`.
    pub fn shifted(&self, dr: usize, dc: usize) -> Board {
        let n = self.n;
        let (dr, dc) = (dr % n, dc % n);
        let mut rows = vec![0; n];
        for (r, &bits) in self.rows.iter().enumerate() {
            rows[(r + dr) % n] = self.rotl(bits, dc);
        }
        Board { n, rows }
    }

    #[inline]
    fn rotl(&self, bits: u64, k: usize) -> u64 {
        if k == 0 {
            return bits;
        }
        ((bits << k) | (bits >> (self.n - k))) & self.row_mask()
    }

    /// Place this board at the centre of a larger all-dead torus.
    pub fn embed_center(&self, target_n: usize) -> Result<Board> {
        if target_n <= self.n || target_n > MAX_SIDE || !(target_n - self.n).is_multiple_of(2) {
            return Err(Error::BadDimensions(format!(
                "cannot centre a {0}x{0} board in {1}x{1}",
                self.n, target_n
            )));
        }
        let off = (target_n - self.n) / 2;
        let mut rows = vec![0; target_n];
        for (r, &bits) in self.rows.iter().enumerate() {
            rows[r + off] = bits << off;
        }
        Ok(Board { n: target_n, rows })
    }
}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Board({}x{})", self.n, self.n)?;
        f.write_str(&self.to_text())
    }
}

/// Birth/survive rule over Moore neighbour counts.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    /// Bit `k` set when a dead cell with `k` live neighbours is born.
    pub birth: u16,
    /// Bit `k` set when a live cell with `k` live neighbours survives.
    pub survive: u16,
    pub name: &'static str,
}

impl Rule {
    pub const LIFE: Rule = Rule::from_counts("Life", &[3], &[2, 3]);
    pub const HIGHLIFE: Rule = Rule::from_counts("HighLife", &[3, 6], &[2, 3]);
    pub const SEEDS: Rule = Rule::from_counts("Seeds", &[2], &[]);

    /// The three benchmark rules in evaluation order.
    pub const BENCHMARK: [Rule; 3] = [Rule::LIFE, Rule::HIGHLIFE, Rule::SEEDS];

    pub const fn from_counts(name: &'static str, birth: &[u8], survive: &[u8]) -> Rule {
        Rule {
            birth: mask_of(birth),
            survive: mask_of(survive),
            name,
        }
    }

    #[inline]
    pub fn births(&self, count: u32) -> bool {
        self.birth >> count & 1 == 1
    }

    #[inline]
    pub fn survives(&self, count: u32) -> bool {
        self.survive >> count & 1 == 1
    }

    /// `B3/S23` notation.
    pub fn notation(&self) -> String {
        let digits = |m: u16| (0..=8).filter(|k| m >> k & 1 == 1).map(|k| k.to_string()).collect::<String>();
        format!("B{}/S{}", digits(self.birth), digits(self.survive))
    }

    pub fn by_name(name: &str) -> Option<Rule> {
        Rule::BENCHMARK
            .into_iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.notation())
    }
}

const fn mask_of(counts: &[u8]) -> u16 {
    let mut m = 0u16;
    let mut i = 0;
    while i < counts.len() {
        m |= 1 << counts[i];
        i += 1;
    }
    m
}

/// Bit-sliced 4-bit counter over one row of cells.
#[derive(Default, Clone, Copy)]
struct Counter([u64; 4]);

impl Counter {
    #[inline(always)]
    fn add(&mut self, x: u64) {
        let mut carry = x;
        for plane in &mut self.0 {
            let next = *plane & carry;
            *plane ^= carry;
            carry = next;
            if carry == 0 {
                break;
            }
        }
    }

    /// Mask of cells whose count equals `k`.
    #[inline(always)]
    fn eq(&self, k: u32) -> u64 {
        let mut m = u64::MAX;
        for (bit, plane) in self.0.iter().enumerate() {
            m &= if k >> bit & 1 == 1 { *plane } else { !*plane };
        }
        m
    }

    #[inline(always)]
    fn any_of(&self, set: u16) -> u64 {
        let mut m = 0;
        for k in 0..=8u32 {
            if set >> k & 1 == 1 {
                m |= self.eq(k);
            }
        }
        m
    }
}

/// One synchronous update with toroidal wraparound.
pub fn step(b: &Board, rule: &Rule) -> Board {
    let mut out = Board::empty(b.n);
    step_into(b, rule, &mut out);
    out
}

/// [`step`] writing into an existing board of the same side.
pub fn step_into(b: &Board, rule: &Rule, out: &mut Board) {
    let n = b.n;
    debug_assert_eq!(out.n, n);
    let mask = b.row_mask();
    for r in 0..n {
        let up = b.rows[(r + n - 1) % n];
        let mid = b.rows[r];
        let down = b.rows[(r + 1) % n];
        let mut cnt = Counter::default();
        for row in [up, mid, down] {
            // column c-1 lands on c: rotate left; column c+1 lands on c: rotate right
            cnt.add(b.rotl(row, 1));
            cnt.add(b.rotl(row, n - 1));
        }
        cnt.add(up);
        cnt.add(down);
        let born = !mid & cnt.any_of(rule.birth);
        let kept = mid & cnt.any_of(rule.survive);
        out.rows[r] = (born | kept) & mask;
    }
}

/// `max(64, 4n)`.
pub fn horizon(n: usize) -> usize {
    64.max(4 * n)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub rule: Rule,
    pub states: Vec<Board>,
}

impl Trajectory {
    /// Number of update steps `T` (states hold `T + 1` boards).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn side(&self) -> usize {
        self.states[0].side()
    }
}

/// `steps` synchronous updates starting from `b`.
pub fn simulate(b: &Board, rule: &Rule, steps: usize) -> Trajectory {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(b.clone());
    for t in 0..steps {
        let mut next = Board::empty(b.n);
        step_into(&states[t], rule, &mut next);
        states.push(next);
    }
    Trajectory { rule: *rule, states }
}
