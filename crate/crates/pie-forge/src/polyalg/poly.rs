//! Bivariate polynomials in the spatial variables `s` and `th` with exact
//! rational coefficients.
//!
//! These polynomials are the common currency of every PI-operator kernel:
//! multipliers are univariate in `s`, Volterra kernels are bivariate in
//! `(s, th)`. All arithmetic is exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Exact rational scalar used throughout the conversion path.
pub type Rat = BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Convenience constructor for integers.
pub fn rint(num: i64) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

/// The two spatial variables a kernel may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    S,
    Th,
}

impl Var {
    pub fn other(self) -> Var {
        match self {
            Var::S => Var::Th,
            Var::Th => Var::S,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::S => "s",
            Var::Th => "th",
        }
    }
}

/// Integration bound: a rational constant or one of the spatial variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Const(Rat),
    Var(Var),
}

impl Bound {
    pub fn var(v: Var) -> Bound {
        Bound::Var(v)
    }
}

/// Errors raised by polynomial operations.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("integration bound references the integration variable {0}")]
    BoundUsesIntegrationVar(&'static str),
    #[error("operation requires a polynomial univariate in {expected}, got one depending on {found}")]
    NotUnivariate {
        expected: &'static str,
        found: &'static str,
    },
    #[error("division by a non-constant or zero polynomial")]
    BadDivisor,
}

/// A polynomial in `(s, th)` stored as a dense coefficient grid.
///
/// `coeffs[i][j]` is the coefficient of `s^i * th^j`. The grid is always
/// trimmed: the last row and last column each contain a nonzero entry, and
/// the zero polynomial is the empty grid (its degrees are undefined).
#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    coeffs: Vec<Vec<Rat>>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Rat) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                coeffs: vec![vec![c]],
            }
        }
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::one())
    }

    /// The monomial `c * s^i * th^j`.
    pub fn monomial(i: usize, j: usize, c: Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![vec![Rat::zero(); j + 1]; i + 1];
        coeffs[i][j] = c;
        Poly { coeffs }
    }

    pub fn var(v: Var) -> Poly {
        match v {
            Var::S => Poly::monomial(1, 0, Rat::one()),
            Var::Th => Poly::monomial(0, 1, Rat::one()),
        }
    }

    /// Builds a polynomial from `(deg_s, deg_th, coefficient)` triples.
    /// Repeated index pairs accumulate.
    pub fn from_terms(terms: &[(usize, usize, Rat)]) -> Poly {
        let mut p = Poly::zero();
        for (i, j, c) in terms {
            p = p.add(&Poly::monomial(*i, *j, c.clone()));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree in `s`, or `None` for the zero polynomial.
    pub fn deg_s(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    /// Degree in `th`, or `None` for the zero polynomial.
    pub fn deg_th(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.coeffs[0].len() - 1)
        }
    }

    pub fn deg(&self, v: Var) -> Option<usize> {
        match v {
            Var::S => self.deg_s(),
            Var::Th => self.deg_th(),
        }
    }

    /// True when the polynomial does not depend on `v`.
    pub fn is_free_of(&self, v: Var) -> bool {
        self.deg(v).unwrap_or(0) == 0
    }

    pub fn coeff(&self, i: usize, j: usize) -> Rat {
        self.coeffs
            .get(i)
            .and_then(|row| row.get(j))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    /// Iterates over the nonzero terms as `(deg_s, deg_th, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, &Rat)> {
        self.coeffs.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(move |(j, c)| (i, j, c))
        })
    }

    fn trim(mut coeffs: Vec<Vec<Rat>>) -> Poly {
        while let Some(row) = coeffs.last() {
            if row.iter().all(Rat::is_zero) {
                coeffs.pop();
            } else {
                break;
            }
        }
        if coeffs.is_empty() {
            return Poly::zero();
        }
        let mut width = coeffs.iter().map(Vec::len).max().unwrap_or(0);
        while width > 0 {
            let all_zero = coeffs
                .iter()
                .all(|row| row.get(width - 1).is_none_or(Rat::is_zero));
            if all_zero {
                width -= 1;
            } else {
                break;
            }
        }
        if width == 0 {
            return Poly::zero();
        }
        for row in &mut coeffs {
            row.resize(width, Rat::zero());
        }
        Poly { coeffs }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let rows = self.coeffs.len().max(other.coeffs.len());
        let cols = self
            .coeffs
            .first()
            .map_or(0, Vec::len)
            .max(other.coeffs.first().map_or(0, Vec::len));
        let mut grid = vec![vec![Rat::zero(); cols]; rows];
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                grid[i][j] += c;
            }
        }
        for (i, row) in other.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                grid[i][j] += c;
            }
        }
        Poly::trim(grid)
    }

    pub fn neg(&self) -> Poly {
        Poly {
            coeffs: self
                .coeffs
                .iter()
                .map(|row| row.iter().map(|c| -c.clone()).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let rows = self.coeffs.len() + other.coeffs.len() - 1;
        let cols = self.coeffs[0].len() + other.coeffs[0].len() - 1;
        let mut grid = vec![vec![Rat::zero(); cols]; rows];
        for (i1, r1) in self.coeffs.iter().enumerate() {
            for (j1, c1) in r1.iter().enumerate() {
                if c1.is_zero() {
                    continue;
                }
                for (i2, r2) in other.coeffs.iter().enumerate() {
                    for (j2, c2) in r2.iter().enumerate() {
                        if c2.is_zero() {
                            continue;
                        }
                        grid[i1 + i2][j1 + j2] += c1 * c2;
                    }
                }
            }
        }
        Poly::trim(grid)
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            coeffs: self
                .coeffs
                .iter()
                .map(|row| row.iter().map(|x| x * c).collect())
                .collect(),
        }
    }

    pub fn pow(&self, n: usize) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exchanges the roles of `s` and `th`.
    pub fn swap_vars(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let rows = self.coeffs[0].len();
        let cols = self.coeffs.len();
        let mut grid = vec![vec![Rat::zero(); cols]; rows];
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                grid[j][i] = c.clone();
            }
        }
        Poly::trim(grid)
    }

    /// Exact evaluation at rational `(s, th)`.
    pub fn eval(&self, s: &Rat, th: &Rat) -> Rat {
        // Horner in s, inner Horner in th.
        let mut acc = Rat::zero();
        for row in self.coeffs.iter().rev() {
            let mut inner = Rat::zero();
            for c in row.iter().rev() {
                inner = inner * th + c;
            }
            acc = acc * s + inner;
        }
        acc
    }

    /// Floating-point evaluation.
    pub fn eval_f64(&self, s: f64, th: f64) -> f64 {
        let mut acc = 0.0;
        for row in self.coeffs.iter().rev() {
            let mut inner = 0.0;
            for c in row.iter().rev() {
                inner = inner * th + c.to_f64().unwrap_or(f64::NAN);
            }
            acc = acc * s + inner;
        }
        acc
    }

    /// Substitutes `v := v + offset` (binomial expansion).
    pub fn shift(&self, v: Var, offset: &Rat) -> Poly {
        if offset.is_zero() || self.is_free_of(v) {
            return self.clone();
        }
        let arg = Poly::var(v).add(&Poly::constant(offset.clone()));
        self.substitute(v, &arg)
    }

    /// Substitutes variable `v` with an arbitrary polynomial argument.
    ///
    /// Used to form compositions such as `T(s - a)`, `Q(th - s)`, `Q(b - s)`.
    pub fn substitute(&self, v: Var, arg: &Poly) -> Poly {
        // Horner over the powers of `v`; the other variable rides along.
        let grid: Vec<Vec<Rat>> = match v {
            Var::S => self.coeffs.clone(),
            Var::Th => {
                if self.is_zero() {
                    Vec::new()
                } else {
                    self.swap_vars().coeffs
                }
            }
        };
        let other = v.other();
        let mut acc = Poly::zero();
        for row in grid.iter().rev() {
            // The row is a univariate polynomial in the other variable.
            let mut row_poly = Poly::zero();
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    let m = match other {
                        Var::S => Poly::monomial(j, 0, c.clone()),
                        Var::Th => Poly::monomial(0, j, c.clone()),
                    };
                    row_poly = row_poly.add(&m);
                }
            }
            acc = acc.mul(arg).add(&row_poly);
        }
        acc
    }

    /// Coefficient-wise derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Poly {
        let p = match v {
            Var::S => self.clone(),
            Var::Th => self.swap_vars(),
        };
        if p.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let mut grid = Vec::with_capacity(p.coeffs.len() - 1);
        for (i, row) in p.coeffs.iter().enumerate().skip(1) {
            grid.push(
                row.iter()
                    .map(|c| c * Rat::from_integer(BigInt::from(i)))
                    .collect(),
            );
        }
        let d = Poly::trim(grid);
        match v {
            Var::S => d,
            Var::Th => d.swap_vars(),
        }
    }

    pub fn diff_n(&self, v: Var, n: usize) -> Poly {
        let mut p = self.clone();
        for _ in 0..n {
            p = p.diff(v);
        }
        p
    }

    /// Exact definite integral over `v` between `lower` and `upper`.
    ///
    /// Bounds may be rational constants or the other spatial variable; a
    /// bound equal to the integration variable is rejected.
    pub fn integrate(&self, v: Var, lower: &Bound, upper: &Bound) -> Result<Poly, PolyError> {
        for bnd in [lower, upper] {
            if let Bound::Var(bv) = bnd {
                if *bv == v {
                    return Err(PolyError::BoundUsesIntegrationVar(v.name()));
                }
            }
        }
        let anti = self.antiderivative(v);
        let at = |bnd: &Bound| -> Poly {
            match bnd {
                Bound::Const(c) => anti.substitute(v, &Poly::constant(c.clone())),
                Bound::Var(other) => anti.substitute(v, &Poly::var(*other)),
            }
        };
        Ok(at(upper).sub(&at(lower)))
    }

    fn antiderivative(&self, v: Var) -> Poly {
        let p = match v {
            Var::S => self.clone(),
            Var::Th => self.swap_vars(),
        };
        if p.is_zero() {
            return Poly::zero();
        }
        let mut grid = vec![vec![Rat::zero(); p.coeffs[0].len()]];
        for (i, row) in p.coeffs.iter().enumerate() {
            grid.push(
                row.iter()
                    .map(|c| c / Rat::from_integer(BigInt::from(i + 1)))
                    .collect(),
            );
        }
        let a = Poly::trim(grid);
        match v {
            Var::S => a,
            Var::Th => a.swap_vars(),
        }
    }

    /// Largest absolute coefficient value, as f64 (diagnostics only).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms()
            .map(|(_, _, c)| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

fn fmt_coeff(c: &Rat) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Poly {
    /// Renders a canonical expression-string form, parseable back by the
    /// polynomial parser.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut terms: Vec<(usize, usize, &Rat)> = self.terms().collect();
        // Highest total degree first, then s-degree.
        terms.sort_by(|a, b| (b.0 + b.1, b.0).cmp(&(a.0 + a.1, a.0)));
        let mut out = String::new();
        for (k, (i, j, c)) in terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || (*i == 0 && *j == 0) {
                factors.push(fmt_coeff(&mag));
            }
            match i {
                0 => {}
                1 => factors.push("s".into()),
                _ => factors.push(format!("s^{i}")),
            }
            match j {
                0 => {}
                1 => factors.push("th".into()),
                _ => factors.push(format!("th^{j}")),
            }
            out.push_str(&factors.join("*"));
        }
        write!(f, "{out}")
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s() -> Poly {
        Poly::var(Var::S)
    }

    fn th() -> Poly {
        Poly::var(Var::Th)
    }

    #[test]
    fn add_cancels_to_zero() {
        let p = s().mul(&th()).add(&Poly::constant(rint(3)));
        assert!(p.add(&p.neg()).is_zero());
    }

    #[test]
    fn mul_degrees() {
        let p = s().mul(&th());
        assert_eq!(p.deg_s(), Some(1));
        assert_eq!(p.deg_th(), Some(1));
        assert_eq!(p.coeff(1, 1), rint(1));
    }

    #[test]
    fn factorial_identity() {
        // tau_1 * tau_1 = s^2 = 2 * tau_2
        let tau1 = s();
        let tau2 = Poly::monomial(2, 0, rat(1, 2));
        assert_eq!(tau1.mul(&tau1), tau2.scale(&rint(2)));
    }

    #[test]
    fn integrate_constant_over_th() {
        // int_0^s 1 dth = s
        let one = Poly::one();
        let r = one
            .integrate(Var::Th, &Bound::Const(rint(0)), &Bound::var(Var::S))
            .unwrap();
        assert_eq!(r, s());
    }

    #[test]
    fn integrate_cauchy_kernel() {
        // int_0^s (s - th) dth = s^2/2
        let p = s().sub(&th());
        let r = p
            .integrate(Var::Th, &Bound::Const(rint(0)), &Bound::var(Var::S))
            .unwrap();
        assert_eq!(r, Poly::monomial(2, 0, rat(1, 2)));
    }

    #[test]
    fn integrate_rational_value() {
        // int_0^1 (1 - th)(th/4) dth = 1/24
        let p = Poly::one()
            .sub(&th())
            .mul(&th().scale(&rat(1, 4)));
        let r = p
            .integrate(Var::Th, &Bound::Const(rint(0)), &Bound::Const(rint(1)))
            .unwrap();
        assert_eq!(r, Poly::constant(rat(1, 24)));
    }

    #[test]
    fn integrate_rejects_bad_bound() {
        let e = s().integrate(Var::S, &Bound::Const(rint(0)), &Bound::var(Var::S));
        assert!(matches!(e, Err(PolyError::BoundUsesIntegrationVar(_))));
    }

    #[test]
    fn splitting_integral_ranges() {
        // int_c^s p dth + int_s^d p dth = int_c^d p dth for several p
        let p = s().pow(2).mul(&th()).add(&th().pow(3)).sub(&Poly::one());
        let c = Bound::Const(rat(-1, 2));
        let d = Bound::Const(rint(2));
        let svar = Bound::var(Var::S);
        let left = p.integrate(Var::Th, &c, &svar).unwrap();
        let right = p.integrate(Var::Th, &svar, &d).unwrap();
        let full = p.integrate(Var::Th, &c, &d).unwrap();
        assert_eq!(left.add(&right), full);
    }

    #[test]
    fn fundamental_theorem() {
        // d/ds int_a^s p(th) dth = p(s)
        let p = th().pow(3).scale(&rat(2, 3)).add(&th()).add(&Poly::one());
        let integral = p
            .integrate(Var::Th, &Bound::Const(rint(0)), &Bound::var(Var::S))
            .unwrap();
        let expected = p.substitute(Var::Th, &s());
        assert_eq!(integral.diff(Var::S), expected);
    }

    #[test]
    fn shift_and_eval() {
        assert_eq!(s().pow(2).shift(Var::S, &rint(0)), s().pow(2));
        // eval(3s^2 - s*th + 1, 2, 1) = 11
        let p = s().pow(2).scale(&rint(3)).sub(&s().mul(&th())).add(&Poly::one());
        assert_eq!(p.eval(&rint(2), &rint(1)), rint(11));
        assert_eq!(p.eval_f64(2.0, 1.0), 11.0);
    }

    #[test]
    fn substitute_affine() {
        // Q(b - s) with Q(x) = [x; 1] entry x at b = 1 becomes 1 - s.
        let q = s();
        let arg = Poly::constant(rint(1)).sub(&s());
        assert_eq!(q.substitute(Var::S, &arg), arg);
        // (s - th) at s := th is zero
        let p = s().sub(&th());
        assert!(p.substitute(Var::S, &th()).is_zero());
    }

    #[test]
    fn display_roundtrip_form() {
        let p = s().pow(2).scale(&rint(3)).sub(&s().mul(&th())).add(&Poly::one());
        assert_eq!(p.to_string(), "3*s^2 - s*th + 1");
        assert_eq!(Poly::zero().to_string(), "0");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly() -> impl Strategy<Value = Poly> {
            proptest::collection::vec((0usize..4, 0usize..4, -9i64..=9, 1i64..=4), 0..7)
                .prop_map(|terms| {
                    let terms: Vec<(usize, usize, Rat)> = terms
                        .into_iter()
                        .map(|(i, j, n, d)| (i, j, rat(n, d)))
                        .collect();
                    Poly::from_terms(&terms)
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn ring_axioms(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
                prop_assert_eq!(a.add(&b), b.add(&a));
                prop_assert_eq!(a.mul(&b), b.mul(&a));
                prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
                prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
                prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            }

            #[test]
            fn integral_splits_at_interior_variable(p in arb_poly()) {
                let c = Bound::Const(rat(-1, 3));
                let d = Bound::Const(rint(2));
                let mid = Bound::var(Var::S);
                let left = p.integrate(Var::Th, &c, &mid).unwrap();
                let right = p.integrate(Var::Th, &mid, &d).unwrap();
                let full = p.integrate(Var::Th, &c, &d).unwrap();
                prop_assert_eq!(left.add(&right), full);
            }

            #[test]
            fn derivative_undoes_running_integral(p in arb_poly()) {
                // d/ds int_a^s p(th) dth = p(s) for univariate integrands.
                let univ = p.substitute(Var::S, &Poly::one());
                let running = univ
                    .integrate(Var::Th, &Bound::Const(rint(0)), &Bound::var(Var::S))
                    .unwrap();
                prop_assert_eq!(running.diff(Var::S), univ.substitute(Var::Th, &s()));
            }
        }
    }
}
