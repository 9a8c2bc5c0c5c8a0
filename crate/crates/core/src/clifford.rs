//! Two-qubit Clifford elements as 4×4 symplectic matrices over GF(2) plus signs.
//!
//! A local two-qubit Pauli is packed into four bits `x₁ z₁ x₂ z₂` (bit 0 is
//! `x₁`), with `x = z = 1` meaning `Y`, so every packed Pauli is Hermitian.
//! Row `k` of the symplectic matrix is the packed image of the `k`-th basis
//! operator in the order `X₁, Z₁, X₂, Z₂`.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;

/// Phase exponent `g` with `σ(a)·σ(b) = i^g σ(a ⊕ b)` for single-qubit Paulis.
#[inline]
pub(crate) fn pauli_phase(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 as i32 - x2 as i32,
        (true, false) => z2 as i32 * (2 * x2 as i32 - 1),
        (false, true) => x2 as i32 * (1 - 2 * z2 as i32),
    }
}

/// Phase exponent for the product of two packed two-qubit Paulis.
#[inline]
fn packed_phase(a: u8, b: u8) -> i32 {
    let bit = |v: u8, k: u8| (v >> k) & 1 == 1;
    pauli_phase(bit(a, 0), bit(a, 1), bit(b, 0), bit(b, 1))
        + pauli_phase(bit(a, 2), bit(a, 3), bit(b, 2), bit(b, 3))
}

/// Symplectic product of two packed Paulis; `true` when they anticommute.
#[inline]
pub fn anticommutes(a: u8, b: u8) -> bool {
    let swapped = ((b & 0b0101) << 1) | ((b & 0b1010) >> 1);
    (a & swapped).count_ones() % 2 == 1
}

/// Whether rows satisfy `M Ω Mᵀ = Ω` for the pairing `(X₁,Z₁), (X₂,Z₂)`.
pub fn is_symplectic(rows: &[u8; 4]) -> bool {
    (0..4).all(|i| {
        (i + 1..4).all(|j| {
            let paired = (i == 0 && j == 1) || (i == 2 && j == 3);
            anticommutes(rows[i], rows[j]) == paired
        })
    })
}

static SYMPLECTIC_GROUP: OnceLock<Vec<[u8; 4]>> = OnceLock::new();

/// All 720 elements of Sp(4, 2), found by filtering the 2¹⁶ binary 4×4 matrices.
pub fn symplectic_group() -> &'static [[u8; 4]] {
    SYMPLECTIC_GROUP.get_or_init(|| {
        (0u32..1 << 16)
            .map(|m| [(m & 15) as u8, (m >> 4 & 15) as u8, (m >> 8 & 15) as u8, (m >> 12 & 15) as u8])
            .filter(is_symplectic)
            .collect()
    })
}

/// A two-qubit Clifford modulo global phase.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoQubitClifford {
    symplectic: [u8; 4],
    sign_flips: u8,
}

impl TwoQubitClifford {
    /// Returns `None` unless `symplectic` preserves the symplectic form.
    pub fn new(symplectic: [u8; 4], sign_flips: u8) -> Option<Self> {
        (is_symplectic(&symplectic) && symplectic.iter().all(|&r| r < 16))
            .then_some(Self { symplectic, sign_flips: sign_flips & 0xF })
    }

    pub fn identity() -> Self {
        Self { symplectic: [0b0001, 0b0010, 0b0100, 0b1000], sign_flips: 0 }
    }

    /// Hadamard on local qubit `q ∈ {0, 1}`.
    pub fn h(q: usize) -> Self {
        let mut s = Self::identity().symplectic;
        let (x, z) = (2 * q, 2 * q + 1);
        s.swap(x, z);
        Self { symplectic: s, sign_flips: 0 }
    }

    /// Phase gate on local qubit `q`: `X ↦ Y`, `Z ↦ Z`.
    pub fn s(q: usize) -> Self {
        let mut s = Self::identity().symplectic;
        s[2 * q] = 0b11 << (2 * q);
        Self { symplectic: s, sign_flips: 0 }
    }

    /// CNOT with local qubit 0 as control.
    pub fn cnot() -> Self {
        Self { symplectic: [0b0101, 0b0010, 0b0100, 0b1010], sign_flips: 0 }
    }

    pub fn swap() -> Self {
        Self { symplectic: [0b0100, 0b1000, 0b0001, 0b0010], sign_flips: 0 }
    }

    /// Pauli `X` on local qubit `q` (flips the sign of `Z_q`).
    pub fn pauli_x(q: usize) -> Self {
        Self { symplectic: Self::identity().symplectic, sign_flips: 1 << (2 * q + 1) }
    }

    pub fn symplectic(&self) -> [u8; 4] {
        self.symplectic
    }

    pub fn sign_flips(&self) -> u8 {
        self.sign_flips
    }

    /// Image of basis operator `k` (`X₁, Z₁, X₂, Z₂`) as `(packed Pauli, negative)`.
    pub fn image(&self, k: usize) -> (u8, bool) {
        (self.symplectic[k], (self.sign_flips >> k) & 1 == 1)
    }

    /// Conjugates the Hermitian packed Pauli `p`, returning the packed image and
    /// whether it picks up a minus sign.
    pub fn conjugate(&self, p: u8) -> (u8, bool) {
        // σ(x,z) = i^{xz} XᶻZᶻ on each qubit
        let mut phase = ((p & 1) & (p >> 1 & 1)) as i32 + ((p >> 2 & 1) & (p >> 3 & 1)) as i32;
        let mut acc = 0u8;
        for k in 0..4 {
            if (p >> k) & 1 == 1 {
                let (img, neg) = self.image(k);
                phase += 2 * neg as i32 + packed_phase(acc, img);
                acc ^= img;
            }
        }
        let phase = phase.rem_euclid(4);
        debug_assert!(phase % 2 == 0, "non-Hermitian image");
        (acc, phase == 2)
    }

    /// Lookup table of `conjugate` over all 16 packed Paulis.
    pub fn table(&self) -> GateTable {
        let mut image = [0u8; 16];
        let mut flip = 0u16;
        for p in 0..16u8 {
            let (img, neg) = self.conjugate(p);
            image[p as usize] = img;
            flip |= (neg as u16) << p;
        }
        GateTable { image, flip }
    }

    /// The element acting as `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        let mut symplectic = [0u8; 4];
        let mut sign_flips = 0u8;
        for k in 0..4 {
            let (row, neg) = self.image(k);
            let (img, flip) = next.conjugate(row);
            symplectic[k] = img;
            sign_flips |= ((neg ^ flip) as u8) << k;
        }
        Self { symplectic, sign_flips }
    }

    /// Uniform sample from the 11520-element two-qubit Clifford group modulo phase.
    ///
    /// Every (symplectic, sign) pair is realised by exactly one group element, so a
    /// uniform symplectic matrix and four independent fair sign bits suffice.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let group = symplectic_group();
        let symplectic = group[rng.gen_range(0..group.len())];
        let sign_flips = rng.gen::<u8>() & 0xF;
        Self { symplectic, sign_flips }
    }
}

impl fmt::Debug for TwoQubitClifford {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 4] = ["X1", "Z1", "X2", "Z2"];
        let mut m = f.debug_map();
        for (k, name) in NAMES.iter().enumerate() {
            let (img, neg) = self.image(k);
            m.entry(name, &format_args!("{}{}", if neg { '-' } else { '+' }, packed_label(img)));
        }
        m.finish()
    }
}

/// Text label such as `XY` or `IZ` for a packed Pauli.
pub fn packed_label(p: u8) -> String {
    (0..2)
        .map(|q| match (p >> (2 * q)) & 0b11 {
            0 => 'I',
            1 => 'X',
            2 => 'Z',
            _ => 'Y',
        })
        .collect()
}

/// Precomputed conjugation action of one gate.
#[derive(Clone, Copy, Debug)]
pub struct GateTable {
    pub image: [u8; 16],
    pub flip: u16,
}

impl GateTable {
    #[inline]
    pub fn apply(&self, p: u8) -> (u8, bool) {
        (self.image[p as usize], (self.flip >> p) & 1 == 1)
    }
}

/// Samples `TwoQubitClifford` uniformly; see [`TwoQubitClifford::sample`].
pub fn sample_two_qubit_clifford<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitClifford {
    TwoQubitClifford::sample(rng)
}
