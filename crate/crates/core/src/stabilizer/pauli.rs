use std::fmt;

/// Number of `u64` words needed for `n` qubits.
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Exponent of `i` picked up when multiplying the Pauli strings
/// `(x1, z1)` and `(x2, z2)` word by word, before adding the operands' own
/// phases. Per qubit the cyclic products `XY = iZ`, `YZ = iX`, `ZX = iY`
/// contribute `+1` and their reverses `-1`.
#[inline]
pub(crate) fn product_phase(x1: &[u64], z1: &[u64], x2: &[u64], z2: &[u64]) -> u32 {
    let mut acc: u32 = 0;
    for w in 0..x1.len() {
        let (a, b, c, d) = (x1[w], z1[w], x2[w], z2[w]);
        let y1 = a & b;
        let xo1 = a & !b;
        let zo1 = !a & b;
        let y2 = c & d;
        let xo2 = c & !d;
        let zo2 = !c & d;
        let plus = (xo1 & y2) | (y1 & zo2) | (zo1 & xo2);
        let minus = (xo1 & zo2) | (y1 & xo2) | (zo1 & y2);
        acc = acc
            .wrapping_add(plus.count_ones())
            .wrapping_sub(minus.count_ones());
    }
    acc & 3
}

/// A Pauli operator `i^phase * P_0 ⊗ ... ⊗ P_{n-1}` with bit-packed x/z parts.
/// Qubit `q` with x=1, z=1 is `Y` (not `XZ`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            x: vec![0; words_for(n)],
            z: vec![0; words_for(n)],
            phase: 0,
        }
    }

    pub(crate) fn from_parts(n: usize, x: Vec<u64>, z: Vec<u64>, phase: u8) -> Self {
        PauliString {
            n,
            x,
            z,
            phase: phase & 3,
        }
    }

    /// Single-qubit operator `op` (one of `I X Y Z`) on qubit `q`.
    pub fn single(n: usize, q: usize, op: char) -> Self {
        let mut p = PauliString::identity(n);
        p.set(q, op);
        p
    }

    /// Parse `+XZI`, `-YY`, `XX` (sign optional).
    pub fn parse(s: &str) -> Option<Self> {
        let (phase, body) = match s.as_bytes().first() {
            Some(b'+') => (0, &s[1..]),
            Some(b'-') => (2, &s[1..]),
            _ => (0, s),
        };
        let n = body.chars().count();
        let mut p = PauliString::identity(n);
        p.phase = phase;
        for (q, c) in body.chars().enumerate() {
            if !matches!(c, 'I' | 'X' | 'Y' | 'Z') {
                return None;
            }
            p.set(q, c);
        }
        Some(p)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    /// True for a sign of `-1` (phase `i^2`).
    pub fn is_negative(&self) -> bool {
        self.phase == 2
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.x[q / 64] >> (q % 64) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.z[q / 64] >> (q % 64) & 1 == 1
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn get(&self, q: usize) -> char {
        match (self.x_bit(q), self.z_bit(q)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    pub fn set(&mut self, q: usize, op: char) {
        let (xb, zb) = match op {
            'X' => (true, false),
            'Y' => (true, true),
            'Z' => (false, true),
            _ => (false, false),
        };
        let (w, m) = (q / 64, 1u64 << (q % 64));
        self.x[w] = if xb { self.x[w] | m } else { self.x[w] & !m };
        self.z[w] = if zb { self.z[w] | m } else { self.z[w] & !m };
    }

    /// Same operator with sign `-1` if `negative`, else `+1`.
    pub fn with_sign(mut self, negative: bool) -> Self {
        self.phase = if negative { 2 } else { 0 };
        self
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut parity = 0;
        for w in 0..self.x.len() {
            parity ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones() & 1;
        }
        parity == 0
    }

    /// `self <- self * rhs`.
    pub fn mul_assign(&mut self, rhs: &PauliString) {
        debug_assert_eq!(self.n, rhs.n);
        let g = product_phase(&self.x, &self.z, &rhs.x, &rhs.z);
        self.phase = ((self.phase as u32 + rhs.phase as u32 + g) & 3) as u8;
        for w in 0..self.x.len() {
            self.x[w] ^= rhs.x[w];
            self.z[w] ^= rhs.z[w];
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        })?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q))?;
        }
        Ok(())
    }
}
