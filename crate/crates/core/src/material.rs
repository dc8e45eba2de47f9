//! Constitutive laws: stiffness tensor, damage-dependent coefficients and the
//! regularized irreversibility penalty.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::{PiecewisePoly, Poly};

/// Symmetric strain or stress as `[xx, yy, xy]` tensor components. In 1D only
/// the first entry is used.
pub type Sym = [f64; 3];

const SAMPLE_LO: f64 = -10.0;
const SAMPLE_HI: f64 = 10.0;
const SAMPLES: usize = 4001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StiffnessMode {
    Isotropic {
        lambda: f64,
        mu_lame: f64,
    },
    /// Row-major `C[i][j][k][l]` with `n^4` entries.
    Explicit {
        entries: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessTensor {
    dim: usize,
    mode: StiffnessMode,
    /// Voigt matrix acting on `[e11, e22, 2 e12]`.
    voigt: [[f64; 3]; 3],
    eta: f64,
}

impl StiffnessTensor {
    pub fn isotropic(dim: usize, lambda: f64, mu_lame: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(mu_lame > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "Lamé constants must satisfy mu > 0 (got lambda={lambda}, mu={mu_lame})"
            )));
        }
        let n = dim;
        let mut entries = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        entries[((i * n + j) * n + k) * n + l] =
                            lambda * d(i, j) * d(k, l) + mu_lame * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                    }
                }
            }
        }
        Self::build(dim, StiffnessMode::Isotropic { lambda, mu_lame }, &entries)
    }

    pub fn explicit(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        let n = dim;
        if entries.len() != n * n * n * n {
            return Err(Error::DimensionMismatch {
                what: "stiffness tensor entries",
                expected: n * n * n * n,
                got: entries.len(),
            });
        }
        let at = |i: usize, j: usize, k: usize, l: usize| entries[((i * n + j) * n + k) * n + l];
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let c = at(i, j, k, l);
                        if (c - at(j, i, k, l)).abs() > 1e-12 * scale || (c - at(k, l, i, j)).abs() > 1e-12 * scale {
                            return Err(Error::invalid(format!("stiffness tensor not symmetric at ({i},{j},{k},{l})")));
                        }
                    }
                }
            }
        }
        let e = entries.clone();
        Self::build(dim, StiffnessMode::Explicit { entries: e }, &entries)
    }

    fn build(dim: usize, mode: StiffnessMode, entries: &[f64]) -> Result<Self> {
        let n = dim;
        let at = |i: usize, j: usize, k: usize, l: usize| entries[((i * n + j) * n + k) * n + l];
        let mut voigt = [[0.0; 3]; 3];
        let eta = if dim == 1 {
            voigt[0][0] = at(0, 0, 0, 0);
            voigt[0][0]
        } else {
            let idx = [(0, 0), (1, 1), (0, 1)];
            for (a, &(i, j)) in idx.iter().enumerate() {
                for (b, &(k, l)) in idx.iter().enumerate() {
                    voigt[a][b] = at(i, j, k, l);
                }
            }
            // Mandel form: |e|^2 becomes the Euclidean norm of (e11, e22, sqrt2 e12)
            let s2 = std::f64::consts::SQRT_2;
            let w = [1.0, 1.0, s2];
            let m = Matrix3::from_fn(|a, b| voigt[a][b] * w[a] * w[b]);
            SymmetricEigen::new(m).eigenvalues.min()
        };
        if !(eta > 0.0) {
            return Err(Error::invalid(format!(
                "stiffness tensor is not positive definite (smallest eigenvalue {eta:.3e})"
            )));
        }
        let t = StiffnessTensor { dim, mode, voigt, eta };
        t.check_sampled_coercivity()?;
        Ok(t)
    }

    /// Randomized check of `e:Ce >= eta |e|^2`.
    fn check_sampled_coercivity(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..256 {
            let mut e: Sym = [rng.random_range(-1.0..1.0), 0.0, 0.0];
            if self.dim == 2 {
                e[1] = rng.random_range(-1.0..1.0);
                e[2] = rng.random_range(-1.0..1.0);
            }
            let q = self.energy_density(&e);
            let n2 = self.norm_sq(&e);
            if q < self.eta * n2 * (1.0 - 1e-10) - 1e-14 {
                return Err(Error::invalid("sampled coercivity check failed"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> &StiffnessMode {
        &self.mode
    }

    /// Coercivity constant: smallest eigenvalue on symmetric matrices.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn voigt(&self) -> &[[f64; 3]; 3] {
        &self.voigt
    }

    pub fn apply(&self, e: &Sym) -> Sym {
        if self.dim == 1 {
            return [self.voigt[0][0] * e[0], 0.0, 0.0];
        }
        let ev = [e[0], e[1], 2.0 * e[2]];
        let mut s = [0.0; 3];
        for (a, row) in self.voigt.iter().enumerate() {
            s[a] = row.iter().zip(&ev).map(|(c, x)| c * x).sum();
        }
        s
    }

    /// `e : C e`.
    pub fn energy_density(&self, e: &Sym) -> f64 {
        let s = self.apply(e);
        if self.dim == 1 {
            s[0] * e[0]
        } else {
            s[0] * e[0] + s[1] * e[1] + 2.0 * s[2] * e[2]
        }
    }

    fn norm_sq(&self, e: &Sym) -> f64 {
        if self.dim == 1 {
            e[0] * e[0]
        } else {
            e[0] * e[0] + e[1] * e[1] + 2.0 * e[2] * e[2]
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension must be 1 or 2, got {dim}")))
    }
}

/// `C e` for a symmetric strain.
pub fn apply_stiffness(c: &StiffnessTensor, e: &Sym) -> Sym {
    c.apply(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    MoreauYosida,
    /// C^2 mollification of the Moreau-Yosida kink over a layer of width
    /// `beta^2`: cubic on `(0, beta^2)`, shifted quadratic beyond.
    SmoothVariant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    beta: f64,
    kind: PenaltyKind,
}

impl Penalty {
    pub fn new(beta: f64, kind: PenaltyKind) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(Penalty { beta, kind })
    }

    pub fn moreau_yosida(beta: f64) -> Result<Self> {
        Self::new(beta, PenaltyKind::MoreauYosida)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// `I_beta(x)`.
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let b = self.beta;
        match self.kind {
            PenaltyKind::MoreauYosida => x * x / (2.0 * b),
            PenaltyKind::SmoothVariant => {
                let eps = b * b;
                if x < eps {
                    x * x * x / (6.0 * eps * b)
                } else {
                    let y = x - 0.5 * eps;
                    y * y / (2.0 * b) + eps * eps / (24.0 * b)
                }
            }
        }
    }

    /// `xi_beta(x) = I_beta'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let b = self.beta;
        match self.kind {
            PenaltyKind::MoreauYosida => x / b,
            PenaltyKind::SmoothVariant => {
                let eps = b * b;
                if x < eps {
                    x * x / (2.0 * eps * b)
                } else {
                    (x - 0.5 * eps) / b
                }
            }
        }
    }

    /// `I_beta''(x)`; at the kink the right derivative is returned, which is
    /// the element of the generalized Jacobian used by the semismooth Newton
    /// iteration.
    pub fn curvature(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let b = self.beta;
        match self.kind {
            PenaltyKind::MoreauYosida => 1.0 / b,
            PenaltyKind::SmoothVariant => {
                let eps = b * b;
                if x < eps {
                    x / (eps * b)
                } else {
                    1.0 / b
                }
            }
        }
    }
}

pub fn penalty_value(p: &Penalty, x: f64) -> f64 {
    p.value(x)
}

pub fn penalty_slope(p: &Penalty, x: f64) -> f64 {
    p.slope(x)
}

/// Violation of the complementarity triple `chi_t <= 0`, `xi >= 0`,
/// `xi * chi_t = 0`. Zero exactly when all three hold.
pub fn subgradient_residual(chi_t: f64, xi: f64) -> f64 {
    chi_t.max(0.0) + (-xi).max(0.0) + (xi * chi_t).abs()
}

/// Convex/concave pair produced by [`extend_coefficient`].
#[derive(Debug, Clone)]
pub struct CoefficientSplit {
    pub c1: PiecewisePoly,
    pub c2: PiecewisePoly,
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
}

impl CoefficientSplit {
    pub fn c(&self, x: f64) -> f64 {
        self.c1.eval(x) + self.c2.eval(x)
    }
}

/// Extend a nonnegative `c~` on `[0, 1]` with `c~'(0) = 0` to the real line
/// as a sum of a convex and a concave `C^{1,1}` function with bounded sum and
/// bounded derivatives.
///
/// On `[0, 1]` the second derivative is split into its positive part (for
/// `c1`) and negative part (for `c2`), each integrated twice from 0. With
/// `lambda1 = c1'(1)` and `lambda2 = -c2'(1)` the slopes are then balanced on
/// `[1, 1 + delta]`: if `lambda1 <= lambda2`, `c1'` ramps linearly from
/// `lambda1` to `lambda2` while `c2'` stays at `-lambda2`; otherwise the roles
/// swap and `c2'` ramps from `-lambda2` down to `-lambda1`. Either ramp has a
/// second derivative of the sign the function needs (`(lambda2-lambda1)/delta
/// >= 0` added to `c1''`, `-(lambda1-lambda2)/delta <= 0` added to `c2''`), and
/// beyond `1 + delta` the two slopes cancel so `c` is constant.
pub fn extend_coefficient(c_tilde: &PiecewisePoly, delta: f64) -> Result<CoefficientSplit> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Construction(format!("ramp width must be positive, got {delta}")));
    }
    let d1 = c_tilde.derivative();
    let d2 = d1.derivative();
    let scale = 1.0 + (0..=100).map(|i| d1.eval(i as f64 / 100.0).abs()).fold(0.0, f64::max);
    let slope0 = d1.eval(0.0);
    if slope0.abs() > 1e-9 * scale {
        return Err(Error::Construction(format!("c~'(0) must vanish, got {slope0:.3e}")));
    }
    for &b in c_tilde.breaks().iter().filter(|&&b| b > 0.0 && b < 1.0) {
        let h = 1e-12 * (1.0 + b.abs());
        let jump0 = (c_tilde.eval(b) - c_tilde.eval(b - h)).abs();
        let jump1 = (d1.eval(b) - d1.eval(b - h)).abs();
        if jump0 > 1e-9 * scale || jump1 > 1e-7 * scale {
            return Err(Error::Construction(format!("c~ is not C^1 at breakpoint {b}")));
        }
    }
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        if c_tilde.eval(x) < -1e-12 {
            return Err(Error::Construction(format!("c~ is negative at x = {x}")));
        }
    }

    let pos = d2.positive_part_on(0.0, 1.0);
    let neg = d2.negative_part_on(0.0, 1.0);
    let lambda1 = pos.antiderivative(0.0, 0.0).eval(1.0);
    let lambda2 = -neg.antiderivative(0.0, 0.0).eval(1.0);

    let (pos, neg) = if lambda1 <= lambda2 {
        let ramp = Poly::constant((lambda2 - lambda1) / delta);
        (pos.add_on_interval(1.0, 1.0 + delta, &ramp), neg)
    } else {
        let ramp = Poly::constant(-(lambda1 - lambda2) / delta);
        (pos, neg.add_on_interval(1.0, 1.0 + delta, &ramp))
    };
    let c1 = pos.antiderivative(0.0, 0.0).antiderivative(0.0, c_tilde.eval(0.0));
    let c2 = neg.antiderivative(0.0, 0.0).antiderivative(0.0, 0.0);

    let end = c1.eval(1.0 + delta) + c2.eval(1.0 + delta);
    if end < -1e-12 {
        // c' decreases linearly to zero on the ramp, so c stays monotone there
        // and its end value is c~(1) + c~'(1) delta / 2
        return Err(Error::Construction(format!(
            "extension turns negative on the ramp (c(1+delta) = {end:.3e}); choose a smaller delta"
        )));
    }
    Ok(CoefficientSplit { c1, c2, lambda1, lambda2, delta })
}

/// Damage-dependent coefficient functions together with the stiffness tensor.
#[derive(Debug, Clone)]
pub struct MaterialLaw {
    c1: PiecewisePoly,
    c2: PiecewisePoly,
    c1p: PiecewisePoly,
    c1pp: PiecewisePoly,
    c2p: PiecewisePoly,
    c2pp: PiecewisePoly,
    d: PiecewisePoly,
    f: PiecewisePoly,
    fp: PiecewisePoly,
    fpp: PiecewisePoly,
    stiffness: StiffnessTensor,
    mu: f64,
    f_lipschitz: f64,
    d_min: f64,
}

impl MaterialLaw {
    pub fn new(
        c1: PiecewisePoly,
        c2: PiecewisePoly,
        d: PiecewisePoly,
        f: PiecewisePoly,
        stiffness: StiffnessTensor,
        mu: f64,
    ) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!("viscosity ratio must be positive, got {mu}")));
        }
        let c1p = c1.derivative();
        let c2p = c2.derivative();
        let fp = f.derivative();
        let law = MaterialLaw {
            c1pp: c1p.derivative(),
            c2pp: c2p.derivative(),
            fpp: fp.derivative(),
            c1,
            c2,
            c1p,
            c2p,
            d,
            f,
            fp,
            stiffness,
            mu,
            f_lipschitz: 0.0,
            d_min: 0.0,
        };
        law.validated()
    }

    /// Material with `c = c1 + c2` from [`extend_coefficient`].
    pub fn from_split(
        split: &CoefficientSplit,
        d: PiecewisePoly,
        f: PiecewisePoly,
        stiffness: StiffnessTensor,
        mu: f64,
    ) -> Result<Self> {
        Self::new(split.c1.clone(), split.c2.clone(), d, f, stiffness, mu)
    }

    fn validated(mut self) -> Result<Self> {
        let tol = 1e-10;
        let mut xs: Vec<f64> =
            (0..SAMPLES).map(|i| SAMPLE_LO + (SAMPLE_HI - SAMPLE_LO) * i as f64 / (SAMPLES - 1) as f64).collect();
        for p in [&self.c1, &self.c2, &self.d, &self.f] {
            xs.extend(p.breaks().iter().filter(|b| (SAMPLE_LO..=SAMPLE_HI).contains(*b)));
        }
        let mut f_lip = 0.0f64;
        let mut d_min = f64::INFINITY;
        for &x in &xs {
            let c = self.c(x);
            if c < -tol {
                return Err(Error::invalid(format!("c({x}) = {c:.3e} is negative")));
            }
            if self.c1pp.eval(x) < -tol {
                return Err(Error::invalid(format!("c1 is not convex near x = {x}")));
            }
            if self.c2pp.eval(x) > tol {
                return Err(Error::invalid(format!("c2 is not concave near x = {x}")));
            }
            let vals = [c, self.c1p.eval(x), self.c2p.eval(x), self.fp.eval(x), self.d.eval(x)];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite coefficient at x = {x}")));
            }
            d_min = d_min.min(self.d.eval(x));
            f_lip = f_lip.max(self.fpp.eval(x).abs());
        }
        // boundedness on the whole line: the unbounded end pieces must be flat
        let flat = |p: &PiecewisePoly| {
            let (l, r) = p.tail_pieces();
            Poly::new(l).degree() == 0 && Poly::new(r).degree() == 0
        };
        let c = self.c1.add(&self.c2);
        if !flat(&c) || !flat(&self.c1p) || !flat(&self.c2p) {
            return Err(Error::invalid("c, c1' and c2' must be bounded on the real line"));
        }
        if !flat(&self.d) || !flat(&self.d.derivative()) {
            return Err(Error::invalid("d and d' must be bounded on the real line"));
        }
        if !flat(&self.fpp) {
            return Err(Error::invalid("f' must be globally Lipschitz"));
        }
        if !(d_min > 0.0) {
            return Err(Error::invalid(format!("d must be bounded below by a positive constant, min {d_min:.3e}")));
        }
        self.f_lipschitz = f_lip;
        self.d_min = d_min;
        Ok(self)
    }

    pub fn c(&self, x: f64) -> f64 {
        self.c1.eval(x) + self.c2.eval(x)
    }
    pub fn c1(&self, x: f64) -> f64 {
        self.c1.eval(x)
    }
    pub fn c2(&self, x: f64) -> f64 {
        self.c2.eval(x)
    }
    pub fn c1_prime(&self, x: f64) -> f64 {
        self.c1p.eval(x)
    }
    pub fn c1_second(&self, x: f64) -> f64 {
        self.c1pp.eval(x)
    }
    pub fn c2_prime(&self, x: f64) -> f64 {
        self.c2p.eval(x)
    }
    pub fn c2_second(&self, x: f64) -> f64 {
        self.c2pp.eval(x)
    }
    pub fn d(&self, x: f64) -> f64 {
        self.d.eval(x)
    }
    pub fn f(&self, x: f64) -> f64 {
        self.f.eval(x)
    }
    pub fn f_prime(&self, x: f64) -> f64 {
        self.fp.eval(x)
    }
    pub fn f_second(&self, x: f64) -> f64 {
        self.fpp.eval(x)
    }
    pub fn stiffness(&self) -> &StiffnessTensor {
        &self.stiffness
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// Lipschitz constant of `f'` measured on the sample range.
    pub fn f_lipschitz(&self) -> f64 {
        self.f_lipschitz
    }
    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    /// Largest negative curvature of `f` (zero for convex `f`).
    pub fn f_concavity(&self) -> f64 {
        let (l, r) = self.fpp.tail_pieces();
        let mut m = Poly::new(l).eval(0.0).min(Poly::new(r).eval(0.0));
        for (a, b, coeffs) in self.fpp.interval_pieces() {
            let p = Poly::new(coeffs);
            m = m.min(p.eval(0.0)).min(p.eval(b - a));
            for r in p.derivative().roots_in(0.0, b - a) {
                m = m.min(p.eval(r));
            }
        }
        (-m).max(0.0)
    }

    /// `d` equal to one on the sample range and flat outside it.
    pub fn d_is_one(&self) -> bool {
        let (l, r) = self.d.tail_pieces();
        let ok = |c: &[f64]| Poly::new(c.to_vec()).coeffs == [1.0];
        ok(&l) && ok(&r) && self.d.interval_pieces().iter().all(|(_, _, c)| ok(c))
    }

    /// `c` and `d` constant on `(-inf, 0]`, the setting of the truncation
    /// argument.
    pub fn constant_below_zero(&self) -> bool {
        let flat_left = |p: &PiecewisePoly| {
            let (l, _) = p.tail_pieces();
            let v0 = p.eval(0.0);
            let lo = p.breaks()[0].min(SAMPLE_LO);
            Poly::new(l).degree() == 0
                && p.breaks().iter().filter(|&&b| b <= 0.0).all(|&b| p.eval(b) == v0)
                && (0..=1000).all(|i| p.eval(lo * i as f64 / 1000.0) == v0)
        };
        let c = self.c1.add(&self.c2);
        flat_left(&c) && flat_left(&self.d)
    }
}

/// `c~(x) = x^2` on `[0, 1]`.
pub fn quadratic_c_tilde() -> PiecewisePoly {
    PiecewisePoly::from_interval_pieces(vec![0.0, 1.0], vec![Poly::new(vec![0.0, 0.0, 1.0])])
        .expect("static breakpoints")
}

/// `f(x) = k/2 (x - a)^2`.
pub fn quadratic_well(k: f64, a: f64) -> PiecewisePoly {
    PiecewisePoly::polynomial(a, vec![0.0, 0.0, 0.5 * k])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso2() -> StiffnessTensor {
        StiffnessTensor::isotropic(2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn penalty_examples() {
        let p = Penalty::moreau_yosida(0.5).unwrap();
        assert_eq!(p.value(-1.0), 0.0);
        assert_eq!(p.value(1.0), 1.0);
        assert_eq!(p.slope(0.3), 0.6);
        assert_eq!(Penalty::moreau_yosida(0.25).unwrap().value(0.0), 0.0);
        assert_eq!(Penalty::moreau_yosida(0.25).unwrap().slope(2.0), 8.0);
        assert_eq!(Penalty::moreau_yosida(0.1).unwrap().slope(-5.0), 0.0);
        assert!(Penalty::moreau_yosida(1.0).is_err());
        assert!(Penalty::moreau_yosida(0.0).is_err());
    }

    #[test]
    fn smooth_variant_is_c2() {
        let p = Penalty::new(0.3, PenaltyKind::SmoothVariant).unwrap();
        let eps = 0.09;
        for x in [eps, 0.0] {
            let h = 1e-9;
            assert!((p.value(x + h) - p.value(x - h)).abs() < 1e-8);
            assert!((p.slope(x + h) - p.slope(x - h)).abs() < 1e-7);
        }
        assert!((p.curvature(eps - 1e-12) - p.curvature(eps)).abs() < 1e-8);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(subgradient_residual(-0.3, 0.0), 0.0);
        assert_eq!(subgradient_residual(0.0, 5.0), 0.0);
        assert_eq!(subgradient_residual(0.1, 0.0), 0.1);
    }

    #[test]
    fn isotropic_stress_and_eta() {
        let c = iso2();
        assert_eq!(c.apply(&[1.0, 1.0, 0.0]), [4.0, 4.0, 0.0]);
        assert_eq!(c.apply(&[0.0; 3]), [0.0; 3]);
        // min(2 mu, 2 (lambda + mu))
        assert!((c.eta() - 2.0).abs() < 1e-12);
        let c1 = StiffnessTensor::isotropic(1, 1.0, 1.0).unwrap();
        assert_eq!(c1.apply(&[2.0, 0.0, 0.0])[0], 6.0);
    }

    #[test]
    fn identity_tensor() {
        // C_ijkl = (d_ik d_jl + d_il d_jk)/2 maps symmetric e to e
        let n = 2;
        let mut e = vec![0.0; 16];
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        e[((i * n + j) * n + k) * n + l] = 0.5 * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                    }
                }
            }
        }
        let c = StiffnessTensor::explicit(2, e).unwrap();
        assert_eq!(c.apply(&[0.3, -1.2, 0.7]), [0.3, -1.2, 0.7]);
        assert!((c.eta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_tensor_rejected() {
        let mut e = vec![0.0; 16];
        e[0] = 1.0;
        e[15] = 1.0;
        e[1] = 0.5; // C_0001 without C_0010
        assert!(StiffnessTensor::explicit(2, e).is_err());
    }

    #[test]
    fn quadratic_extension_values() {
        let s = extend_coefficient(&quadratic_c_tilde(), 1.0).unwrap();
        assert!((s.c1.eval(2.0) - 3.0).abs() < 1e-14);
        assert!((s.c2.eval(2.0) + 1.0).abs() < 1e-14);
        assert!((s.c(5.0) - 2.0).abs() < 1e-13);
        assert_eq!(s.c(-3.0), 0.0);
        assert!((s.c(0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_extension() {
        let s = extend_coefficient(&PiecewisePoly::constant(1.0), 0.7).unwrap();
        assert_eq!(s.c(7.0), 1.0);
        assert_eq!(s.c2.eval(7.0), 0.0);
    }

    #[test]
    fn extension_rejects_bad_input() {
        let slope = PiecewisePoly::polynomial(0.0, vec![0.0, 1.0]);
        assert!(matches!(extend_coefficient(&slope, 1.0), Err(Error::Construction(_))));
        assert!(extend_coefficient(&quadratic_c_tilde(), 0.0).is_err());
        // c~ = 1 - x^2/2 ends with slope -1 and turns negative on a long ramp
        let dome = PiecewisePoly::polynomial(0.0, vec![1.0, 0.0, -0.5]);
        assert!(extend_coefficient(&dome, 0.5).is_ok());
        assert!(extend_coefficient(&dome, 3.0).is_err());
    }

    #[test]
    fn material_validation() {
        let s = extend_coefficient(&quadratic_c_tilde(), 1.0).unwrap();
        let m =
            MaterialLaw::from_split(&s, PiecewisePoly::constant(1.0), quadratic_well(1.0, 1.0), iso2(), 1.0).unwrap();
        assert!(m.d_is_one());
        assert!(m.constant_below_zero());
        assert_eq!(m.f_lipschitz(), 1.0);
        assert_eq!(m.f_concavity(), 0.0);
        // unbounded c rejected
        let bad = MaterialLaw::new(
            PiecewisePoly::polynomial(0.0, vec![0.0, 0.0, 1.0]),
            PiecewisePoly::constant(0.0),
            PiecewisePoly::constant(1.0),
            PiecewisePoly::constant(0.0),
            iso2(),
            1.0,
        );
        assert!(bad.is_err());
    }
}
