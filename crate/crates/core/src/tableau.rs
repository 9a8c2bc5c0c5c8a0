//! Pure stabilizer states in the Aaronson–Gottesman tableau form.
//!
//! Rows `0..n` hold destabilizers, rows `n..2n` the stabilizer generators and
//! row `2n` is scratch space for deterministic measurements. Each row stores its
//! X part followed by its Z part, packed into `u64` words, so row products and
//! symplectic inner products cost `O(n / 64)`.

use std::fmt;

use rand::Rng;

use crate::clifford::TwoQubitClifford;
use crate::error::{Error, Result};
use crate::gf2::{words_for, BitMatrix};

/// Result of a projective `Z` measurement. `value == true` is the `−1` outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasurementOutcome {
    pub value: bool,
    pub was_deterministic: bool,
}

/// Pure `n`-qubit stabilizer state.
#[derive(Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    words: usize,
    data: Vec<u64>,
    signs: Vec<bool>,
}

impl StabilizerTableau {
    /// `|0…0⟩`: stabilizers `+Z_q`, destabilizers `+X_q`.
    pub fn new_product_state(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        let words = words_for(n);
        let mut t = Self { n, words, data: vec![0; (2 * n + 1) * 2 * words], signs: vec![false; 2 * n + 1] };
        for q in 0..n {
            t.set_x(q, q, true);
            t.set_z(n + q, q, true);
        }
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        let s = 2 * self.words;
        r * s..(r + 1) * s
    }

    #[inline]
    fn bit(&self, r: usize, word_offset: usize, q: usize) -> bool {
        (self.data[r * 2 * self.words + word_offset + q / 64] >> (q % 64)) & 1 == 1
    }

    #[inline]
    fn put(&mut self, r: usize, word_offset: usize, q: usize, v: bool) {
        let w = &mut self.data[r * 2 * self.words + word_offset + q / 64];
        let m = 1u64 << (q % 64);
        if v {
            *w |= m
        } else {
            *w &= !m
        }
    }

    #[inline]
    fn x(&self, r: usize, q: usize) -> bool {
        self.bit(r, 0, q)
    }

    #[inline]
    fn z(&self, r: usize, q: usize) -> bool {
        self.bit(r, self.words, q)
    }

    #[inline]
    fn set_x(&mut self, r: usize, q: usize, v: bool) {
        self.put(r, 0, q, v)
    }

    #[inline]
    fn set_z(&mut self, r: usize, q: usize, v: bool) {
        let w = self.words;
        self.put(r, w, q, v)
    }

    /// X bit of stabilizer generator `g` on qubit `q`.
    pub fn stabilizer_x(&self, g: usize, q: usize) -> bool {
        self.x(self.n + g, q)
    }

    pub fn stabilizer_z(&self, g: usize, q: usize) -> bool {
        self.z(self.n + g, q)
    }

    /// `true` when generator `g` carries a `−1` phase.
    pub fn stabilizer_sign(&self, g: usize) -> bool {
        self.signs[self.n + g]
    }

    /// The `n × 2n` generator matrix `[x | z]`.
    pub fn stabilizer_matrix(&self) -> BitMatrix {
        let n = self.n;
        let mut m = BitMatrix::zeros(n, 2 * n);
        for g in 0..n {
            for q in 0..n {
                m.set(g, q, self.stabilizer_x(g, q));
                m.set(g, n + q, self.stabilizer_z(g, q));
            }
        }
        m
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.n {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange { index: q, n_qubits: self.n })
        }
    }

    /// Applies `gate` with its local qubit 1 on `i` and local qubit 2 on `j`.
    pub fn apply_clifford2(&mut self, gate: &TwoQubitClifford, i: usize, j: usize) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(Error::SameQubit(i));
        }
        let table = gate.table();
        let stride = 2 * self.words;
        let (wi, bi) = (i / 64, i % 64);
        let (wj, bj) = (j / 64, j % 64);
        let zo = self.words;
        for r in 0..2 * self.n {
            let row = &mut self.data[r * stride..(r + 1) * stride];
            let p = ((row[wi] >> bi) & 1)
                | ((row[zo + wi] >> bi) & 1) << 1
                | ((row[wj] >> bj) & 1) << 2
                | ((row[zo + wj] >> bj) & 1) << 3;
            let (img, neg) = table.apply(p as u8);
            if img as u64 != p {
                let img = img as u64;
                row[wi] = (row[wi] & !(1 << bi)) | (img & 1) << bi;
                row[zo + wi] = (row[zo + wi] & !(1 << bi)) | (img >> 1 & 1) << bi;
                row[wj] = (row[wj] & !(1 << bj)) | (img >> 2 & 1) << bj;
                row[zo + wj] = (row[zo + wj] & !(1 << bj)) | (img >> 3 & 1) << bj;
            }
            self.signs[r] ^= neg;
        }
        Ok(())
    }

    /// Hadamard on `q`.
    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        for r in 0..2 * self.n {
            let (x, z) = (self.x(r, q), self.z(r, q));
            self.signs[r] ^= x && z;
            self.set_x(r, q, z);
            self.set_z(r, q, x);
        }
        Ok(())
    }

    /// Phase gate on `q`.
    pub fn apply_s(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        for r in 0..2 * self.n {
            let (x, z) = (self.x(r, q), self.z(r, q));
            self.signs[r] ^= x && z;
            self.set_z(r, q, z ^ x);
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameQubit(control));
        }
        let (a, b) = (control, target);
        for r in 0..2 * self.n {
            let (xa, za, xb, zb) = (self.x(r, a), self.z(r, a), self.x(r, b), self.z(r, b));
            self.signs[r] ^= xa && zb && (xb ^ za ^ true);
            self.set_x(r, b, xb ^ xa);
            self.set_z(r, a, za ^ zb);
        }
        Ok(())
    }

    /// Phase exponent (mod 4) of the product `row(left) · row(right)`, including signs.
    fn product_phase(&self, left: usize, right: usize) -> u32 {
        let w = self.words;
        let l = &self.data[self.row_range(left)];
        let r = &self.data[self.row_range(right)];
        let (mut pos, mut neg) = (0u32, 0u32);
        for k in 0..w {
            let (x1, z1, x2, z2) = (l[k], l[w + k], r[k], r[w + k]);
            let y1 = x1 & z1;
            let xo = x1 & !z1;
            let zo = !x1 & z1;
            pos += ((y1 & z2 & !x2) | (xo & z2 & x2) | (zo & x2 & !z2)).count_ones();
            neg += ((y1 & x2 & !z2) | (xo & z2 & !x2) | (zo & x2 & z2)).count_ones();
        }
        let total = 2 * (self.signs[left] as i64 + self.signs[right] as i64) + pos as i64 - neg as i64;
        total.rem_euclid(4) as u32
    }

    /// `row(target) ← row(source) · row(target)`.
    fn rowsum(&mut self, target: usize, source: usize) {
        let phase = self.product_phase(source, target);
        debug_assert!(phase % 2 == 0, "rowsum of anticommuting rows");
        self.signs[target] = phase == 2;
        let s = 2 * self.words;
        let (src, dst) = if source < target {
            let (lo, hi) = self.data.split_at_mut(target * s);
            (&lo[source * s..(source + 1) * s], &mut hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(source * s);
            (&hi[..s], &mut lo[target * s..(target + 1) * s])
        };
        for (d, v) in dst.iter_mut().zip(src) {
            *d ^= v;
        }
    }

    fn copy_row(&mut self, target: usize, source: usize) {
        let src = self.row_range(source);
        let start = self.row_range(target).start;
        self.data.copy_within(src, start);
        self.signs[target] = self.signs[source];
    }

    fn clear_row(&mut self, r: usize) {
        let range = self.row_range(r);
        self.data[range].fill(0);
        self.signs[r] = false;
    }

    /// Whether `Z_q` commutes with every stabilizer generator.
    pub fn is_z_deterministic(&self, q: usize) -> Result<bool> {
        self.check_qubit(q)?;
        Ok(!(self.n..2 * self.n).any(|r| self.x(r, q)))
    }

    /// Projective `Z` measurement of qubit `q`.
    ///
    /// The random branch consumes exactly one `f64` from `rng` and reports the
    /// `−1` outcome when it falls below one half; the deterministic branch draws
    /// nothing.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<MeasurementOutcome> {
        self.check_qubit(q)?;
        let n = self.n;
        let pivot = (n..2 * n).find(|&r| self.x(r, q));
        match pivot {
            Some(p) => {
                // row p − n is overwritten below
                for r in 0..2 * n {
                    if r != p && r != p - n && self.x(r, q) {
                        self.rowsum(r, p);
                    }
                }
                self.copy_row(p - n, p);
                self.clear_row(p);
                self.set_z(p, q, true);
                let value = rng.gen::<f64>() < 0.5;
                self.signs[p] = value;
                Ok(MeasurementOutcome { value, was_deterministic: false })
            }
            None => {
                let scratch = 2 * n;
                self.clear_row(scratch);
                for i in 0..n {
                    if self.x(i, q) {
                        self.rowsum(scratch, i + n);
                    }
                }
                Ok(MeasurementOutcome { value: self.signs[scratch], was_deterministic: true })
            }
        }
    }

    /// Symplectic inner product of two tableau rows.
    fn rows_anticommute(&self, a: usize, b: usize) -> bool {
        let w = self.words;
        let ra = &self.data[self.row_range(a)];
        let rb = &self.data[self.row_range(b)];
        let mut acc = 0u64;
        for k in 0..w {
            acc ^= (ra[k] & rb[w + k]) ^ (ra[w + k] & rb[k]);
        }
        acc.count_ones() % 2 == 1
    }

    /// Checks the pure-state invariants: commuting, independent generators and a
    /// consistent destabilizer basis.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n;
        for a in 0..n {
            for b in a..n {
                if self.rows_anticommute(n + a, n + b) {
                    return Err(Error::InvariantViolation(format!("generators {a} and {b} anticommute")));
                }
                if self.rows_anticommute(a, b) {
                    return Err(Error::InvariantViolation(format!("destabilizers {a} and {b} anticommute")));
                }
            }
            for b in 0..n {
                if self.rows_anticommute(a, n + b) != (a == b) {
                    return Err(Error::InvariantViolation(format!(
                        "destabilizer {a} / generator {b} pairing broken"
                    )));
                }
            }
        }
        let rank = self.stabilizer_matrix().eliminate();
        if rank != n {
            return Err(Error::InvariantViolation(format!("generator rank {rank} != {n}")));
        }
        Ok(())
    }

    /// Text form: `L=<n>` then one `<x bits><z bits><sign>` line per generator.
    pub fn to_text(&self) -> String {
        let mut s = format!("L={}\n", self.n);
        for g in 0..self.n {
            for q in 0..self.n {
                s.push(if self.stabilizer_x(g, q) { '1' } else { '0' });
            }
            for q in 0..self.n {
                s.push(if self.stabilizer_z(g, q) { '1' } else { '0' });
            }
            s.push(if self.stabilizer_sign(g) { '1' } else { '0' });
            s.push('\n');
        }
        s
    }

    /// Parses [`to_text`](Self::to_text) output and rebuilds a destabilizer basis.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let n: usize = header
            .trim()
            .strip_prefix("L=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected L=<n>, got {header:?}") })?;
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        let mut gens = BitMatrix::zeros(n, 2 * n);
        let mut signs = vec![false; n];
        let mut count = 0;
        for (idx, line) in lines {
            let line = line.trim();
            if count == n {
                return Err(Error::Parse { line: idx + 1, msg: "too many generators".into() });
            }
            if line.len() != 2 * n + 1 {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} characters, got {}", 2 * n + 1, line.len()),
                });
            }
            for (c, ch) in line.chars().enumerate() {
                let v = match ch {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(Error::Parse { line: idx + 1, msg: format!("bad character {other:?}") })
                    }
                };
                if c < 2 * n {
                    gens.set(count, c, v);
                } else {
                    signs[count] = v;
                }
            }
            count += 1;
        }
        if count != n {
            return Err(Error::Parse { line: count + 2, msg: format!("expected {n} generators, got {count}") });
        }
        Self::from_generators(&gens, &signs)
    }

    /// Builds a tableau from `n × 2n` generator rows `[x | z]` and their signs.
    pub fn from_generators(gens: &BitMatrix, signs: &[bool]) -> Result<Self> {
        let n = gens.rows();
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        if gens.cols() != 2 * n || signs.len() != n {
            return Err(Error::InvalidConfig("generator matrix must be n × 2n".into()));
        }
        let destab = destabilizers_for(gens)?;
        let mut t = Self::new_product_state(n)?;
        for r in 0..2 * n {
            t.clear_row(r);
        }
        for g in 0..n {
            for c in 0..n {
                t.set_x(n + g, c, gens.get(g, c));
                t.set_z(n + g, c, gens.get(g, n + c));
                t.set_x(g, c, destab.get(g, c));
                t.set_z(g, c, destab.get(g, n + c));
            }
            t.signs[n + g] = signs[g];
        }
        t.check_invariants()?;
        Ok(t)
    }
}

/// Finds Paulis `d_i` with `⟨d_i, g_j⟩ = δ_ij` and mutually commuting `d_i`.
fn destabilizers_for(gens: &BitMatrix) -> Result<BitMatrix> {
    let n = gens.rows();
    // ⟨d, g⟩ = d · swap(g); solve swap(G) dᵀ = e_i via [swap(G) | I]
    let mut aug = BitMatrix::zeros(n, 3 * n);
    for g in 0..n {
        for c in 0..n {
            aug.set(g, c, gens.get(g, n + c));
            aug.set(g, n + c, gens.get(g, c));
        }
        aug.set(g, 2 * n + g, true);
    }
    let pivots = aug.rref_columns(2 * n);
    if pivots.len() != n {
        return Err(Error::InvariantViolation("generators are not independent".into()));
    }
    let mut d = BitMatrix::zeros(n, 2 * n);
    for i in 0..n {
        for (k, &col) in pivots.iter().enumerate() {
            if aug.get(k, 2 * n + i) {
                d.set(i, col, true);
            }
        }
    }
    let sym = |a: &BitMatrix, i: usize, b: &BitMatrix, j: usize| {
        (0..n).fold(false, |acc, c| acc ^ (a.get(i, c) & b.get(j, n + c)) ^ (a.get(i, n + c) & b.get(j, c)))
    };
    // adding g_j to d_i flips only ⟨d_i, d_j⟩
    for i in 0..n {
        for j in 0..i {
            if sym(&d, i, &d, j) {
                for c in 0..2 * n {
                    let v = d.get(i, c) ^ gens.get(j, c);
                    d.set(i, c, v);
                }
            }
        }
    }
    Ok(d)
}

impl fmt::Debug for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in 0..self.n {
            write!(f, "{}", if self.stabilizer_sign(g) { '-' } else { '+' })?;
            for q in 0..self.n {
                let c = match (self.stabilizer_x(g, q), self.stabilizer_z(g, q)) {
                    (false, false) => '.',
                    (true, false) => 'X',
                    (false, true) => 'Z',
                    (true, true) => 'Y',
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
