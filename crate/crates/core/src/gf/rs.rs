use super::Field;
use std::sync::Arc;
use thiserror::Error;

/// Coefficients low to high; the zero polynomial is empty.
pub type Poly = Vec<u32>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RsError {
    #[error("expected {expected} symbols, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid code parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RsOutcome {
    Decoded(Vec<u32>),
    Failure,
}

impl RsOutcome {
    pub fn ok(self) -> Option<Vec<u32>> {
        match self {
            RsOutcome::Decoded(d) => Some(d),
            RsOutcome::Failure => None,
        }
    }
}

/// Systematic evaluation code: data are the values of `f` (`deg f < K`) at
/// `α_0..α_{K−1}`, parity its values at `α_K..α_{K′−1}`, with `α_i = g^i`.
#[derive(Debug, Clone)]
pub struct RsCode {
    field: Arc<Field>,
    k: usize,
    n: usize,
    points: Vec<u32>,
    /// Barycentric weights of the first `K` points.
    weights: Vec<u32>,
    /// `Π (x − α_i)` over all points.
    root: Poly,
    /// `1/Π_{j≠i} (α_i − α_j)` over all points.
    inv_denoms: Vec<u32>,
}

fn trim(p: &mut Poly) {
    while p.last() == Some(&0) {
        p.pop();
    }
}

fn deg(p: &Poly) -> isize {
    p.len() as isize - 1
}

fn poly_sub(f: &Field, a: &Poly, b: &Poly) -> Poly {
    let mut out: Poly = (0..a.len().max(b.len()))
        .map(|i| f.sub(*a.get(i).unwrap_or(&0), *b.get(i).unwrap_or(&0)))
        .collect();
    trim(&mut out);
    out
}

fn poly_mul(f: &Field, a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u32; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = f.add(out[i + j], f.mul(x, y));
        }
    }
    trim(&mut out);
    out
}

fn poly_divmod(f: &Field, a: &Poly, b: &Poly) -> (Poly, Poly) {
    assert!(!b.is_empty(), "division by the zero polynomial");
    if a.len() < b.len() {
        return (Vec::new(), a.clone());
    }
    let mut rem = a.clone();
    let db = b.len() - 1;
    let lead_inv = f.inv(b[db]);
    let mut quo = vec![0u32; a.len() - db];
    for i in (0..quo.len()).rev() {
        let c = f.mul(rem[i + db], lead_inv);
        quo[i] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                rem[i + j] = f.sub(rem[i + j], f.mul(c, bj));
            }
        }
    }
    rem.truncate(db);
    trim(&mut rem);
    trim(&mut quo);
    (quo, rem)
}

pub(crate) fn poly_eval(f: &Field, p: &Poly, x: u32) -> u32 {
    p.iter().rev().fold(0, |acc, &c| f.add(f.mul(acc, x), c))
}

/// `p / (x − a)` for a root `a` of `p`.
fn div_linear(f: &Field, p: &Poly, a: u32) -> Poly {
    let mut out = vec![0u32; p.len() - 1];
    let mut carry = 0u32;
    for i in (1..p.len()).rev() {
        carry = f.add(p[i], f.mul(carry, a));
        out[i - 1] = carry;
    }
    out
}

impl RsCode {
    pub fn new(field: Arc<Field>, k: usize, n: usize) -> Result<Self, RsError> {
        if k == 0 || k > n {
            return Err(RsError::Params(format!("need 1 <= K <= K' (K = {k}, K' = {n})")));
        }
        if n as u64 > field.order() - 1 {
            return Err(RsError::Params(format!(
                "K' = {n} exceeds the {} nonzero field elements",
                field.order() - 1
            )));
        }
        let g = field.generator();
        let mut points = Vec::with_capacity(n);
        let mut cur = 1u32;
        for _ in 0..n {
            points.push(cur);
            cur = field.mul(cur, g);
        }
        let weights = (0..k)
            .map(|j| {
                let prod = (0..k)
                    .filter(|&m| m != j)
                    .fold(1u32, |acc, m| field.mul(acc, field.sub(points[j], points[m])));
                field.inv(prod)
            })
            .collect();
        let mut root: Poly = vec![1];
        for &a in &points {
            root = poly_mul(&field, &root, &vec![field.neg(a), 1]);
        }
        let inv_denoms = (0..n)
            .map(|i| {
                let prod = (0..n)
                    .filter(|&j| j != i)
                    .fold(1u32, |acc, j| field.mul(acc, field.sub(points[i], points[j])));
                field.inv(prod)
            })
            .collect();
        Ok(Self { field, k, n, points, weights, root, inv_denoms })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn points(&self) -> &[u32] {
        &self.points
    }

    pub fn encode(&self, data: &[u32]) -> Result<Vec<u32>, RsError> {
        if data.len() != self.k {
            return Err(RsError::Length { expected: self.k, got: data.len() });
        }
        let f = &*self.field;
        let mut out = data.to_vec();
        for &x in &self.points[self.k..] {
            let mut ell = 1u32;
            let mut sum = 0u32;
            for j in 0..self.k {
                let d = f.sub(x, self.points[j]);
                ell = f.mul(ell, d);
                if data[j] != 0 {
                    sum = f.add(sum, f.div(f.mul(self.weights[j], data[j]), d));
                }
            }
            out.push(f.mul(ell, sum));
        }
        Ok(out)
    }

    /// Errors-and-erasures decoding (`None` marks an erasure). Succeeds whenever
    /// `2·errors + erasures ≤ K′ − K`; any returned word is a codeword within half the
    /// remaining distance of the unerased symbols.
    pub fn decode(&self, received: &[Option<u32>]) -> Result<RsOutcome, RsError> {
        if received.len() != self.n {
            return Err(RsError::Length { expected: self.n, got: received.len() });
        }
        let f = &*self.field;
        let erased: Vec<u32> = received.iter().zip(&self.points).filter(|(r, _)| r.is_none()).map(|(_, &a)| a).collect();
        let n1 = self.n - erased.len();
        if n1 < self.k {
            return Ok(RsOutcome::Failure);
        }
        // vanishing polynomial and interpolant of the unerased points
        let mut g0 = self.root.clone();
        for &e in &erased {
            g0 = div_linear(f, &g0, e);
        }
        let mut xs = Vec::with_capacity(n1);
        let mut ys = Vec::with_capacity(n1);
        let mut g1: Poly = vec![0u32; n1];
        for (i, r) in received.iter().enumerate() {
            let Some(y) = *r else { continue };
            let x = self.points[i];
            xs.push(x);
            ys.push(y);
            if y == 0 {
                continue;
            }
            let c = erased.iter().fold(f.mul(y, self.inv_denoms[i]), |acc, &e| f.mul(acc, f.sub(x, e)));
            let mut carry = 0u32;
            for j in (1..g0.len()).rev() {
                carry = f.add(g0[j], f.mul(carry, x));
                g1[j - 1] = f.add(g1[j - 1], f.mul(c, carry));
            }
        }
        trim(&mut g1);

        let (mut r0, mut r1) = (g0, g1);
        let (mut v0, mut v1): (Poly, Poly) = (Vec::new(), vec![1]);
        while !r1.is_empty() && 2 * deg(&r1) >= (n1 + self.k) as isize {
            let (qt, rem) = poly_divmod(f, &r0, &r1);
            let v = poly_sub(f, &v0, &poly_mul(f, &qt, &v1));
            r0 = std::mem::replace(&mut r1, rem);
            v0 = std::mem::replace(&mut v1, v);
        }
        let (msg, rem) = poly_divmod(f, &r1, &v1);
        if !rem.is_empty() || msg.len() > self.k {
            return Ok(RsOutcome::Failure);
        }
        let disagreements = xs.iter().zip(&ys).filter(|(&a, &y)| poly_eval(f, &msg, a) != y).count();
        if 2 * disagreements > n1 - self.k {
            return Ok(RsOutcome::Failure);
        }
        Ok(RsOutcome::Decoded(
            self.points[..self.k].iter().map(|&a| poly_eval(f, &msg, a)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code(p: u32, m: u32, k: usize, n: usize) -> RsCode {
        RsCode::new(Arc::new(Field::new(p, m).unwrap()), k, n).unwrap()
    }

    #[test]
    fn identity_when_no_parity() {
        let c = code(2, 4, 5, 5);
        let d = vec![3, 0, 9, 15, 1];
        assert_eq!(c.encode(&d).unwrap(), d);
        let r: Vec<_> = d.iter().map(|&x| Some(x)).collect();
        assert_eq!(c.decode(&r).unwrap(), RsOutcome::Decoded(d));
    }

    #[test]
    fn gf8_minimum_distance() {
        let c = code(2, 3, 3, 7);
        let words: Vec<Vec<u32>> = (0..512u32)
            .map(|v| c.encode(&[v & 7, (v >> 3) & 7, v >> 6]).unwrap())
            .collect();
        let mut min = usize::MAX;
        for i in 0..words.len() {
            assert_eq!(&words[i][..3], &[i as u32 & 7, (i as u32 >> 3) & 7, i as u32 >> 6]);
            for j in 0..i {
                min = min.min(words[i].iter().zip(&words[j]).filter(|(a, b)| a != b).count());
            }
        }
        assert_eq!(min, 5);
    }

    #[test]
    fn gf16_all_double_errors() {
        let c = code(2, 4, 7, 15);
        let data = vec![1, 7, 0, 12, 5, 5, 9];
        let cw = c.encode(&data).unwrap();
        for a in 0..15 {
            for b in a..15 {
                for ea in 1..16u32 {
                    for eb in 1..16u32 {
                        let mut r: Vec<Option<u32>> = cw.iter().map(|&x| Some(x)).collect();
                        r[a] = Some(cw[a] ^ ea);
                        if b != a {
                            r[b] = Some(cw[b] ^ eb);
                        }
                        assert_eq!(c.decode(&r).unwrap(), RsOutcome::Decoded(data.clone()));
                    }
                }
            }
        }
    }

    #[test]
    fn errors_and_erasures_at_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, m, k, n) in [(2u32, 4u32, 7usize, 15usize), (3, 2, 3, 8), (2, 8, 40, 100), (5, 2, 10, 24)] {
            let c = code(p, m, k, n);
            let order = c.field().order() as u32;
            for _ in 0..200 {
                let data: Vec<u32> = (0..k).map(|_| rng.gen_range(0..order)).collect();
                let cw = c.encode(&data).unwrap();
                let red = n - k;
                let t = rng.gen_range(0..=red / 2);
                let e = red - 2 * t;
                let mut pos: Vec<usize> = (0..n).collect();
                for i in 0..t + e {
                    let j = rng.gen_range(i..n);
                    pos.swap(i, j);
                }
                let mut r: Vec<Option<u32>> = cw.iter().map(|&x| Some(x)).collect();
                for &i in &pos[..t] {
                    r[i] = Some(c.field().add(cw[i], rng.gen_range(1..order)));
                }
                for &i in &pos[t..t + e] {
                    r[i] = None;
                }
                let out = c.decode(&r).unwrap().ok().expect("within bound");
                assert_eq!(out, data);
                assert_eq!(c.encode(&out).unwrap(), cw);
            }
        }
    }

    #[test]
    fn beyond_bound_never_claims_a_far_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = code(2, 4, 7, 15);
        for _ in 0..500 {
            let r: Vec<Option<u32>> = (0..15).map(|_| Some(rng.gen_range(0..16))).collect();
            if let RsOutcome::Decoded(d) = c.decode(&r).unwrap() {
                let cw = c.encode(&d).unwrap();
                let dist = cw.iter().zip(&r).filter(|(a, b)| Some(**a) != **b).count();
                assert!(dist <= 4);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let f = Arc::new(Field::new(2, 3).unwrap());
        assert!(RsCode::new(f.clone(), 3, 8).is_err());
        assert!(RsCode::new(f.clone(), 0, 4).is_err());
        let c = RsCode::new(f, 3, 7).unwrap();
        assert!(c.encode(&[1, 2]).is_err());
        assert!(c.decode(&[None; 6]).is_err());
    }
}
