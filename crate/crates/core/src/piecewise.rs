//! Piecewise polynomials on the real line.
//!
//! Coefficient laws are stored in this form so that derivatives and
//! antiderivatives are exact. A function with breakpoints `b_0 < ... < b_{m-1}`
//! has `m + 1` pieces: piece 0 covers `(-inf, b_0)`, piece `i` covers
//! `[b_{i-1}, b_i)` and piece `m` covers `[b_{m-1}, inf)`. Every piece is a
//! polynomial in the local variable `x - anchor`, where the anchor is the left
//! breakpoint of the piece (`b_0` for the leftmost piece).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial in a local variable, `coeffs[k]` multiplies `y^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    /// Antiderivative vanishing at `y = 0`.
    pub fn integral(&self) -> Poly {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(self.coeffs.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Poly::new(out)
    }

    /// Returns `q` with `q(y) = p(y + shift)`.
    pub fn shifted(&self, shift: f64) -> Poly {
        if shift == 0.0 {
            return self.clone();
        }
        // repeated synthetic division (Taylor shift)
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += shift * c[j + 1];
            }
        }
        Poly::new(c)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| self.coeffs.get(k).copied().unwrap_or(0.0) + other.coeffs.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Zeros of the polynomial on the open interval `(lo, hi)` (local
    /// coordinates) at which it changes sign or touches zero at a critical
    /// point. Roots are isolated between critical points, where the
    /// polynomial is monotone, and refined by bisection.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if !(hi > lo) || self.is_zero() {
            return Vec::new();
        }
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if r > lo && r < hi {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut pts = vec![lo];
                pts.extend(self.derivative().roots_in(lo, hi));
                pts.push(hi);
                let mut roots = Vec::new();
                for w in pts.windows(2) {
                    let (mut a, mut b) = (w[0], w[1]);
                    let (mut fa, fb) = (self.eval(a), self.eval(b));
                    if fa == 0.0 {
                        if a > lo && roots.last().is_none_or(|&r: &f64| r < a) {
                            roots.push(a);
                        }
                        continue;
                    }
                    if fa * fb >= 0.0 {
                        continue;
                    }
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if m <= a || m >= b {
                            break;
                        }
                        let fm = self.eval(m);
                        if fm == 0.0 {
                            a = m;
                            b = m;
                            break;
                        }
                        if fa * fm < 0.0 {
                            b = m;
                        } else {
                            a = m;
                            fa = fm;
                        }
                    }
                    let r = 0.5 * (a + b);
                    if r > lo && r < hi {
                        roots.push(r);
                    }
                }
                roots
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Piece {
    anchor: f64,
    poly: Poly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PiecewisePoly {
    /// Single polynomial on the whole line, in powers of `x - anchor`.
    pub fn polynomial(anchor: f64, coeffs: Vec<f64>) -> Self {
        PiecewisePoly {
            breaks: vec![anchor],
            pieces: vec![Piece { anchor, poly: Poly::new(coeffs.clone()) }, Piece { anchor, poly: Poly::new(coeffs) }],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(0.0, vec![c])
    }

    /// Build from breakpoints and one polynomial per piece (`breaks.len() + 1`
    /// pieces), each in powers of `x - left breakpoint`.
    pub fn from_pieces(breaks: Vec<f64>, polys: Vec<Poly>) -> Result<Self> {
        if breaks.is_empty() {
            return Err(Error::invalid("piecewise polynomial needs at least one breakpoint"));
        }
        if polys.len() != breaks.len() + 1 {
            return Err(Error::invalid(format!(
                "expected {} pieces for {} breakpoints, got {}",
                breaks.len() + 1,
                breaks.len(),
                polys.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("breakpoints must be finite and strictly increasing"));
        }
        let pieces = polys
            .into_iter()
            .enumerate()
            .map(|(i, poly)| Piece { anchor: breaks[i.saturating_sub(1)], poly })
            .collect();
        Ok(PiecewisePoly { breaks, pieces })
    }

    /// Polynomial pieces given on the bounded intervals between `breaks`
    /// (`breaks.len() - 1` of them); outside, the end pieces are continued
    /// analytically.
    pub fn from_interval_pieces(breaks: Vec<f64>, polys: Vec<Poly>) -> Result<Self> {
        if breaks.len() < 2 || polys.len() != breaks.len() - 1 {
            return Err(Error::invalid("need n+1 breakpoints for n interval pieces (n >= 1)"));
        }
        let first = polys[0].clone();
        let last_anchor = breaks[breaks.len() - 2];
        let last = polys.last().unwrap().clone();
        // the rightmost piece is anchored at the last interior breakpoint, re-anchor
        let right = last.shifted(breaks[breaks.len() - 1] - last_anchor);
        let mut all = Vec::with_capacity(polys.len() + 2);
        all.push(first);
        all.extend(polys);
        all.push(right);
        Self::from_pieces(breaks, all)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    fn piece_index(&self, x: f64) -> usize {
        // number of breakpoints <= x
        self.breaks.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.pieces[self.piece_index(x)];
        p.poly.eval(x - p.anchor)
    }

    pub fn derivative(&self) -> PiecewisePoly {
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| Piece { anchor: p.anchor, poly: p.poly.derivative() }).collect(),
        }
    }

    /// Continuous antiderivative `F` with `F(x0) = value`.
    pub fn antiderivative(&self, x0: f64, value: f64) -> PiecewisePoly {
        let mut pieces: Vec<Piece> =
            self.pieces.iter().map(|p| Piece { anchor: p.anchor, poly: p.poly.integral() }).collect();
        let start = self.piece_index(x0);
        let shift = value - pieces[start].poly.eval(x0 - pieces[start].anchor);
        pieces[start].poly = pieces[start].poly.add(&Poly::constant(shift));
        // sweep right: piece i+1 starts at breaks[i]
        for i in start..pieces.len() - 1 {
            let b = self.breaks[i];
            let left = pieces[i].poly.eval(b - pieces[i].anchor);
            let right = pieces[i + 1].poly.eval(b - pieces[i + 1].anchor);
            pieces[i + 1].poly = pieces[i + 1].poly.add(&Poly::constant(left - right));
        }
        for i in (0..start).rev() {
            let b = self.breaks[i];
            let right = pieces[i + 1].poly.eval(b - pieces[i + 1].anchor);
            let left = pieces[i].poly.eval(b - pieces[i].anchor);
            pieces[i].poly = pieces[i].poly.add(&Poly::constant(right - left));
        }
        PiecewisePoly { breaks: self.breaks.clone(), pieces }
    }

    /// Insert additional breakpoints without changing the function.
    pub fn refined(&self, extra: &[f64]) -> PiecewisePoly {
        let mut all: Vec<f64> = self.breaks.iter().chain(extra.iter()).copied().collect();
        all.sort_by(|a, b| a.total_cmp(b));
        all.dedup();
        let mut pieces = Vec::with_capacity(all.len() + 1);
        // leftmost piece: same polynomial as before, anchored at the new first break
        let p0 = &self.pieces[0];
        pieces.push(Piece { anchor: all[0], poly: p0.poly.shifted(all[0] - p0.anchor) });
        for &b in &all {
            let src = &self.pieces[self.piece_index(b)];
            pieces.push(Piece { anchor: b, poly: src.poly.shifted(b - src.anchor) });
        }
        PiecewisePoly { breaks: all, pieces }
    }

    /// Apply a per-piece map to every bounded piece inside `[lo, hi]` after
    /// splitting pieces at the sign changes of the function; pieces outside
    /// the window become zero. Used to take positive/negative parts.
    fn split_sign_part(&self, lo: f64, hi: f64, keep_positive: bool) -> PiecewisePoly {
        let base = self.refined(&[lo, hi]);
        let mut cuts = Vec::new();
        for (i, piece) in base.pieces.iter().enumerate() {
            if i == 0 || i == base.pieces.len() - 1 {
                continue;
            }
            let (a, b) = (base.breaks[i - 1], base.breaks[i]);
            if a < lo || b > hi {
                continue;
            }
            for r in piece.poly.roots_in(0.0, b - a) {
                cuts.push(a + r);
            }
        }
        let split = base.refined(&cuts);
        let mut pieces = Vec::with_capacity(split.pieces.len());
        for (i, piece) in split.pieces.iter().enumerate() {
            let inside = i > 0 && i < split.pieces.len() - 1 && split.breaks[i - 1] >= lo && split.breaks[i] <= hi;
            let poly = if inside {
                let (a, b) = (split.breaks[i - 1], split.breaks[i]);
                let mid = piece.poly.eval(0.5 * (b - a));
                if (mid > 0.0) == keep_positive && mid != 0.0 {
                    piece.poly.clone()
                } else {
                    Poly::zero()
                }
            } else {
                Poly::zero()
            };
            pieces.push(Piece { anchor: piece.anchor, poly });
        }
        PiecewisePoly { breaks: split.breaks, pieces }
    }

    /// `max(p, 0)` restricted to `[lo, hi]`, zero outside.
    pub fn positive_part_on(&self, lo: f64, hi: f64) -> PiecewisePoly {
        self.split_sign_part(lo, hi, true)
    }

    /// `min(p, 0)` restricted to `[lo, hi]`, zero outside.
    pub fn negative_part_on(&self, lo: f64, hi: f64) -> PiecewisePoly {
        self.split_sign_part(lo, hi, false)
    }

    /// Add a polynomial supported on the interval `[a, b)` only.
    pub fn add_on_interval(&self, a: f64, b: f64, poly_at_a: &Poly) -> PiecewisePoly {
        let mut out = self.refined(&[a, b]);
        for i in 1..out.pieces.len() - 1 {
            let (l, r) = (out.breaks[i - 1], out.breaks[i]);
            if l >= a && r <= b {
                let add = poly_at_a.shifted(l - a);
                out.pieces[i].poly = out.pieces[i].poly.add(&add);
            }
        }
        out
    }

    pub fn add(&self, other: &PiecewisePoly) -> PiecewisePoly {
        let a = self.refined(&other.breaks);
        let b = other.refined(&self.breaks);
        let pieces = a
            .pieces
            .iter()
            .zip(&b.pieces)
            .map(|(p, q)| {
                debug_assert_eq!(p.anchor, q.anchor);
                Piece { anchor: p.anchor, poly: p.poly.add(&q.poly) }
            })
            .collect();
        PiecewisePoly { breaks: a.breaks, pieces }
    }

    /// Highest polynomial degree over all pieces.
    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(|p| p.poly.degree()).max().unwrap_or(0)
    }

    /// Polynomials on the bounded intervals, as `(left, right, coefficients)`.
    pub fn interval_pieces(&self) -> Vec<(f64, f64, Vec<f64>)> {
        (1..self.pieces.len() - 1)
            .map(|i| (self.breaks[i - 1], self.breaks[i], self.pieces[i].poly.coeffs.clone()))
            .collect()
    }

    /// Coefficients of the two unbounded end pieces (anchored at the first and
    /// last breakpoint respectively).
    pub fn tail_pieces(&self) -> (Vec<f64>, Vec<f64>) {
        (self.pieces[0].poly.coeffs.clone(), self.pieces[self.pieces.len() - 1].poly.coeffs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_matches_evaluation() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let q = p.shifted(0.7);
        for &y in &[-1.0, 0.0, 0.3, 2.0] {
            assert!((q.eval(y) - p.eval(y + 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_cubic() {
        // (y - 0.2)(y - 0.5)(y - 0.9)
        let p = Poly::new(vec![-0.09, 0.73, -1.6, 1.0]);
        let r = p.roots_in(0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // a double root is found once
        let d = Poly::new(vec![0.25, -1.0, 1.0]);
        assert_eq!(d.roots_in(0.0, 1.0), vec![0.5]);
        assert!(Poly::new(vec![1.0, 0.0, 1.0]).roots_in(-1.0, 1.0).is_empty());
    }

    #[test]
    fn antiderivative_is_continuous_and_pinned() {
        let p =
            PiecewisePoly::from_interval_pieces(vec![0.0, 0.5, 1.0], vec![Poly::new(vec![1.0]), Poly::new(vec![-1.0])])
                .unwrap();
        let f = p.antiderivative(0.0, 2.0);
        assert_eq!(f.eval(0.0), 2.0);
        assert!((f.eval(0.5) - 2.5).abs() < 1e-15);
        assert!((f.eval(1.0) - 2.0).abs() < 1e-15);
        assert!((f.eval(-1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn positive_part_splits_at_roots() {
        // 6 - 12x on [0,1]
        let p = PiecewisePoly::polynomial(0.0, vec![6.0, -12.0]);
        let pos = p.positive_part_on(0.0, 1.0);
        let neg = p.negative_part_on(0.0, 1.0);
        for &x in &[-0.5, 0.1, 0.49, 0.51, 0.9, 1.5] {
            let v = p.eval(x);
            let inside = (0.0..=1.0).contains(&x);
            let ep = if inside { v.max(0.0) } else { 0.0 };
            let en = if inside { v.min(0.0) } else { 0.0 };
            assert!((pos.eval(x) - ep).abs() < 1e-12, "x={x}");
            assert!((neg.eval(x) - en).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn rejects_bad_breaks() {
        assert!(PiecewisePoly::from_pieces(vec![1.0, 0.0], vec![Poly::zero(); 3]).is_err());
        assert!(PiecewisePoly::from_pieces(vec![0.0], vec![Poly::zero(); 3]).is_err());
    }
}
