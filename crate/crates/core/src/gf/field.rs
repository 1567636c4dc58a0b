use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fields up to this order get log/antilog tables; larger ones multiply polynomially.
pub const MAX_TABLE_ORDER: u64 = 1 << 20;
const MAX_ORDER: u64 = 1 << 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("{0} is not a prime power")]
    NotPrimePower(u32),
    #[error("field order {p}^{m} exceeds 2^32")]
    TooLarge { p: u32, m: u32 },
    #[error("polynomial {0:?} is not primitive")]
    NotPrimitive(Vec<u32>),
}

/// Characteristic, degree and the monic modulus (coefficients low to high, length `m+1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub p: u32,
    pub m: u32,
    pub poly: Vec<u32>,
}

/// GF(p^m). An element is the integer whose base-p digits (least significant first)
/// are the coefficients of its polynomial representative.
#[derive(Clone)]
pub struct Field {
    desc: FieldDescriptor,
    order: u64,
    /// Modulus as a bit mask (p = 2 only).
    mask: u64,
    generator: u32,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GF({}^{}; {:?})", self.desc.p, self.desc.m, self.desc.poly)
    }
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `q = p^a` with `p` prime.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while !q.is_multiple_of(p) {
        p += 1;
    }
    let (mut r, mut a) = (q, 0);
    while r % p == 0 {
        r /= p;
        a += 1;
    }
    (r == 1).then_some((p, a))
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl Field {
    /// GF(p^m) with the lexicographically first primitive modulus.
    pub fn new(p: u32, m: u32) -> Result<Self, FieldError> {
        Self::check(p, m)?;
        let order = (p as u64).pow(m);
        for tail in 0..order {
            if tail % p as u64 == 0 {
                continue;
            }
            let mut poly = digits(tail, p, m);
            poly.push(1);
            if let Ok(f) = Self::with_poly(p, m, poly) {
                return Ok(f);
            }
        }
        unreachable!("every finite field has a primitive polynomial")
    }

    /// The field GF(q^len) whose elements index length-`len` words over a prime-power `q`.
    pub fn for_alphabet(q: u32, len: u32) -> Result<Self, FieldError> {
        let (p, a) = prime_power(q).ok_or(FieldError::NotPrimePower(q))?;
        Self::new(p, a * len)
    }

    pub fn with_poly(p: u32, m: u32, poly: Vec<u32>) -> Result<Self, FieldError> {
        Self::build(p, m, poly, true)
    }

    fn check(p: u32, m: u32) -> Result<(), FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if m == 0 || (p as f64).powi(m as i32) > MAX_ORDER as f64 {
            return Err(FieldError::TooLarge { p, m });
        }
        Ok(())
    }

    pub(crate) fn build(p: u32, m: u32, poly: Vec<u32>, tables: bool) -> Result<Self, FieldError> {
        Self::check(p, m)?;
        if poly.len() != m as usize + 1 || poly[m as usize] != 1 || poly.iter().any(|&c| c >= p) || poly[0] == 0 {
            return Err(FieldError::NotPrimitive(poly));
        }
        let order = (p as u64).pow(m);
        let mask = if p == 2 {
            poly.iter().enumerate().fold(0u64, |acc, (i, &c)| acc | ((c as u64) << i))
        } else {
            0
        };
        let mut f = Field {
            desc: FieldDescriptor { p, m, poly },
            order,
            mask,
            generator: 0,
            exp: Vec::new(),
            log: Vec::new(),
        };
        // x reduced modulo the modulus
        f.generator = if m == 1 { (p - f.desc.poly[0]) % p  } else { p };
        let g = f.generator;
        let n = order - 1;
        if f.pow_slow(g, n) != 1 || prime_factors(n).iter().any(|&r| f.pow_slow(g, n / r) == 1) {
            return Err(FieldError::NotPrimitive(f.desc.poly));
        }
        if tables && order <= MAX_TABLE_ORDER {
            let n = n as usize;
            let mut exp = vec![0u32; 2 * n];
            let mut log = vec![0u32; order as usize];
            let mut cur = 1u32;
            for i in 0..n {
                exp[i] = cur;
                exp[i + n] = cur;
                log[cur as usize] = i as u32;
                cur = f.mul_slow(cur, g);
            }
            f.exp = exp;
            f.log = log;
        }
        Ok(f)
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.desc
    }

    #[inline]
    pub fn order(&self) -> u64 {
        self.order
    }

    #[inline]
    pub fn characteristic(&self) -> u32 {
        self.desc.p
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.desc.m
    }

    /// The primitive element `x`.
    #[inline]
    pub fn generator(&self) -> u32 {
        self.generator
    }

    #[inline]
    pub fn has_tables(&self) -> bool {
        !self.exp.is_empty()
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.desc.p == 2 {
            return a ^ b;
        }
        let p = self.desc.p as u64;
        let (mut a, mut b) = (a as u64, b as u64);
        let (mut r, mut pw) = (0u64, 1u64);
        while a | b != 0 {
            r += ((a % p + b % p) % p) * pw;
            a /= p;
            b /= p;
            pw *= p;
        }
        r as u32
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if self.desc.p == 2 {
            return a;
        }
        let p = self.desc.p as u64;
        let mut a = a as u64;
        let (mut r, mut pw) = (0u64, 1u64);
        while a != 0 {
            r += ((p - a % p) % p) * pw;
            a /= p;
            pw *= p;
        }
        r as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        if self.has_tables() {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        } else {
            self.mul_slow(a, b)
        }
    }

    /// Multiplicative inverse; panics on zero.
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a != 0, "inverse of zero");
        if self.has_tables() {
            let n = (self.order - 1) as u32;
            self.exp[((n - self.log[a as usize]) % n) as usize]
        } else {
            self.pow_slow(a, self.order - 2)
        }
    }

    pub fn div(&self, a: u32, b: u32) -> u32 {
        self.mul(a, self.inv(b))
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        if self.has_tables() {
            let n = self.order - 1;
            self.exp[((self.log[a as usize] as u64 * (e % n)) % n) as usize]
        } else {
            self.pow_slow(a, e)
        }
    }

    fn pow_slow(&self, a: u32, mut e: u64) -> u32 {
        let (mut base, mut acc) = (a, 1u32);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, base);
            }
            base = self.mul_slow(base, base);
            e >>= 1;
        }
        acc
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let m = self.desc.m;
        if self.desc.p == 2 {
            let (mut a, mut b, mut r) = (a as u64, b as u64, 0u64);
            while b != 0 {
                if b & 1 == 1 {
                    r ^= a;
                }
                b >>= 1;
                a <<= 1;
                if (a >> m) & 1 == 1 {
                    a ^= self.mask;
                }
            }
            return r as u32;
        }
        let p = self.desc.p as u64;
        let m = m as usize;
        let da = digits(a as u64, self.desc.p, m as u32);
        let db = digits(b as u64, self.desc.p, m as u32);
        let mut prod = vec![0u64; 2 * m - 1];
        for (i, &x) in da.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p;
            }
        }
        for i in (m..2 * m - 1).rev() {
            let c = prod[i];
            if c != 0 {
                for j in 0..m {
                    let t = c * self.desc.poly[j] as u64 % p;
                    prod[i - m + j] = (prod[i - m + j] + p - t) % p;
                }
                prod[i] = 0;
            }
        }
        prod[..m].iter().rev().fold(0u64, |acc, &d| acc * p + d) as u32
    }

    /// Element whose base-q expansion (most significant symbol first) is `symbols`.
    pub fn from_symbols(&self, symbols: &[u8], q: u32) -> u32 {
        let v = symbols.iter().fold(0u64, |acc, &s| acc * q as u64 + s as u64);
        debug_assert!(v < self.order);
        v as u32
    }

    /// Inverse of [`Field::from_symbols`] for words of length `len`.
    pub fn to_symbols(&self, e: u32, q: u32, len: usize) -> Vec<u8> {
        let mut out = vec![0u8; len];
        let mut v = e as u64;
        for slot in out.iter_mut().rev() {
            *slot = (v % q as u64) as u8;
            v /= q as u64;
        }
        out
    }
}

fn digits(mut v: u64, p: u32, m: u32) -> Vec<u32> {
    (0..m)
        .map(|_| {
            let d = (v % p as u64) as u32;
            v /= p as u64;
            d
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_primitive_polynomials() {
        assert_eq!(Field::new(2, 3).unwrap().descriptor().poly, vec![1, 1, 0, 1]);
        assert_eq!(Field::new(2, 4).unwrap().descriptor().poly, vec![1, 1, 0, 0, 1]);
        assert_eq!(Field::new(2, 8).unwrap().descriptor().poly, vec![1, 0, 1, 1, 1, 0, 0, 0, 1]);
        // x^2 + x + 2 over GF(3)
        assert_eq!(Field::new(3, 2).unwrap().descriptor().poly, vec![2, 1, 1]);
        // GF(7): x + 2, generator 5
        let f = Field::new(7, 1).unwrap();
        assert_eq!(f.descriptor().poly, vec![2, 1]);
        assert_eq!(f.generator(), 5);
        assert!(Field::with_poly(2, 4, vec![1, 1, 1, 1, 1]).is_err());
    }

    #[test]
    fn prime_powers() {
        assert_eq!(prime_power(8), Some((2, 3)));
        assert_eq!(prime_power(9), Some((3, 2)));
        assert_eq!(prime_power(7), Some((7, 1)));
        assert_eq!(prime_power(6), None);
        assert_eq!(prime_power(12), None);
    }

    #[test]
    fn table_and_slow_paths_agree() {
        for (p, m) in [(2, 5), (3, 3), (5, 2), (2, 10)] {
            let t = Field::new(p, m).unwrap();
            let s = Field::build(p, m, t.descriptor().poly.clone(), false).unwrap();
            assert!(t.has_tables() && !s.has_tables());
            let n = t.order() as u32;
            for a in (0..n).step_by(7) {
                for b in (0..n).step_by(11) {
                    assert_eq!(t.mul(a, b), s.mul(a, b));
                }
                if a != 0 {
                    assert_eq!(t.inv(a), s.inv(a));
                }
            }
        }
    }

    #[test]
    fn large_field_uses_slow_path() {
        let f = Field::new(2, 24).unwrap();
        assert!(!f.has_tables());
        for a in [1u32, 2, 0xABCDE, 0xFFFFFF] {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn symbol_bijection() {
        let f = Field::for_alphabet(3, 4).unwrap();
        assert_eq!(f.order(), 81);
        for e in 0..81 {
            let s = f.to_symbols(e, 3, 4);
            assert_eq!(f.from_symbols(&s, 3), e);
        }
    }

    fn axioms(f: &Field, a: u32, b: u32, c: u32) -> Result<(), TestCaseError> {
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, b), f.add(b, a));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.add(a, f.neg(a)), 0);
        prop_assert_eq!(f.mul(a, 1), a);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a)), 1);
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn binary_field_axioms(m in 1u32..=16, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
            let f = Field::new(2, m).unwrap();
            let n = f.order() as u32;
            axioms(&f, a % n, b % n, c % n)?;
        }

        #[test]
        fn prime_field_axioms(p in prop::sample::select(vec![3u32, 5, 7, 11, 13, 31]), a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
            let f = Field::new(p, 1).unwrap();
            axioms(&f, a % p, b % p, c % p)?;
            prop_assert_eq!(f.mul(a % p, b % p), ((a % p) as u64 * (b % p) as u64 % p as u64) as u32);
        }

        #[test]
        fn extension_field_axioms(pm in prop::sample::select(vec![(3u32, 2u32), (3, 5), (5, 3), (7, 2)]), a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
            let f = Field::new(pm.0, pm.1).unwrap();
            let n = f.order() as u32;
            axioms(&f, a % n, b % n, c % n)?;
        }
    }
}
