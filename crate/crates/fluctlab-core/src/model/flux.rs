use alloc::vec;
use alloc::vec::Vec;

use super::{DeviationScale, ModelError};
use crate::math;

/// Horner evaluation, coefficients ordered low to high.
fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_derive(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

fn poly_trim(coeffs: &[f64]) -> &[f64] {
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1] == 0.0 {
        end -= 1;
    }
    &coeffs[..end]
}

fn bisect_root(coeffs: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = poly_eval(coeffs, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = poly_eval(coeffs, mid);
        if fmid == 0.0 {
            return mid;
        }
        if (flo < 0.0) == (fmid < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Real roots where the polynomial changes sign, sorted ascending.
///
/// Works by recursing on the derivative: the polynomial is monotone between
/// consecutive critical points, so each bracket holds at most one sign
/// change. Tangent (even-multiplicity) roots are deliberately skipped; only
/// sign changes matter to the split-flux integrals below.
fn poly_sign_roots(coeffs: &[f64]) -> Vec<f64> {
    let coeffs = poly_trim(coeffs);
    let degree = coeffs.len() - 1;
    match degree {
        0 => Vec::new(),
        1 => vec![-coeffs[0] / coeffs[1]],
        _ => {
            let lead = coeffs[degree].abs();
            let bound = 1.0
                + coeffs[..degree]
                    .iter()
                    .fold(0.0_f64, |m, &c| m.max(c.abs() / lead));
            let mut breaks = vec![-bound];
            for c in poly_sign_roots(&poly_derive(coeffs)) {
                if c > -bound && c < bound {
                    breaks.push(c);
                }
            }
            breaks.push(bound);
            let mut roots = Vec::new();
            for pair in breaks.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let (flo, fhi) = (poly_eval(coeffs, lo), poly_eval(coeffs, hi));
                if flo == 0.0 {
                    continue;
                }
                if (flo < 0.0) != (fhi <= 0.0) {
                    roots.push(bisect_root(coeffs, lo, hi));
                }
            }
            roots
        }
    }
}

/// Which concrete flux family a [`FluxModel`] was built from.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// `A(xi) = xi^2 / 2`.
    Burgers,
    /// `A(xi) = sum c_i xi^i`, coefficients low to high.
    Polynomial(Vec<f64>),
}

/// Flux `A`, its derivative `a = A'`, and the declared growth data
/// `|a(xi) - a(zeta)| <= C (1 + |xi|^{p-1} + |zeta|^{p-1}) |xi - zeta|`.
///
/// Every kind is backed by one polynomial coefficient vector; Burgers is
/// `[0, 0, 1/2]`, for which Horner reproduces `xi^2/2` and `xi` exactly.
/// Construction caches the sign structure of `a` so the Engquist-Osher split
/// integrals and speed bounds are exact up to root location (~1e-14).
#[derive(Debug, Clone)]
pub struct FluxModel {
    kind: FluxKind,
    coeffs: Vec<f64>,
    deriv: Vec<f64>,
    growth_p: f64,
    growth_c: f64,
    /// Sign-change roots of `a`, ascending.
    speed_roots: Vec<f64>,
    /// Sign-change roots of `a'` (critical points of the speed), ascending.
    speed_crits: Vec<f64>,
    flux_at_zero: f64,
}

impl FluxModel {
    pub fn burgers() -> Self {
        Self::from_parts(FluxKind::Burgers, vec![0.0, 0.0, 0.5], 2.0, 1.0)
    }

    /// Linear advection `A(xi) = speed * xi`.
    pub fn linear(speed: f64) -> Self {
        Self::from_parts(
            FluxKind::Polynomial(vec![0.0, speed]),
            vec![0.0, speed],
            1.0,
            1.0,
        )
    }

    /// Polynomial flux with declared growth derived from the coefficients:
    /// `p = max(degree, 1)` and `C = max(1, sum_{i>=2} i(i-1)|c_i|)`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, ModelError> {
        if coeffs.is_empty() {
            return Err(ModelError::EmptyPolynomial);
        }
        for &c in &coeffs {
            if !c.is_finite() {
                return Err(ModelError::InvalidParameter {
                    what: "flux coefficient",
                    value: c,
                });
            }
        }
        let degree = poly_trim(&coeffs).len() - 1;
        let p = (degree as f64).max(1.0);
        let c_decl = coeffs
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, &c)| (i * (i - 1)) as f64 * c.abs())
            .sum::<f64>()
            .max(1.0);
        Ok(Self::from_parts(
            FluxKind::Polynomial(coeffs.clone()),
            coeffs,
            p,
            c_decl,
        ))
    }

    /// Override the declared Hypothesis-H constants.
    pub fn with_growth(mut self, p: f64, c: f64) -> Result<Self, ModelError> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(ModelError::InvalidParameter {
                what: "growth exponent p",
                value: p,
            });
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(ModelError::InvalidParameter {
                what: "growth constant C",
                value: c,
            });
        }
        self.growth_p = p;
        self.growth_c = c;
        Ok(self)
    }

    fn from_parts(kind: FluxKind, coeffs: Vec<f64>, p: f64, c: f64) -> Self {
        let deriv = poly_derive(&coeffs);
        let speed_roots = poly_sign_roots(&deriv);
        let speed_crits = poly_sign_roots(&poly_derive(&deriv));
        let flux_at_zero = coeffs[0];
        Self {
            kind,
            coeffs,
            deriv,
            growth_p: p,
            growth_c: c,
            speed_roots,
            speed_crits,
            flux_at_zero,
        }
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `A(xi)`.
    pub fn eval(&self, xi: f64) -> f64 {
        poly_eval(&self.coeffs, xi)
    }

    /// `a(xi) = A'(xi)`.
    pub fn derivative(&self, xi: f64) -> f64 {
        poly_eval(&self.deriv, xi)
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_p
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_c
    }

    /// `Gamma(xi, zeta) = C (1 + |xi|^{p-1} + |zeta|^{p-1})`.
    pub fn gamma_bound(&self, xi: f64, zeta: f64) -> f64 {
        let q = self.growth_p - 1.0;
        self.growth_c * (1.0 + math::pow(xi.abs(), q) + math::pow(zeta.abs(), q))
    }

    /// `sup |a|` over `[lo, hi]` (endpoints plus interior critical points).
    pub fn max_speed(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.derivative(lo).abs().max(self.derivative(hi).abs());
        for &c in &self.speed_crits {
            if c > lo && c < hi {
                m = m.max(self.derivative(c).abs());
            }
        }
        m
    }

    /// `A(0)`.
    pub fn flux_at_zero(&self) -> f64 {
        self.flux_at_zero
    }

    /// `int_0^u max(a(s), 0) ds`, the up-wind half of the Engquist-Osher flux.
    pub fn eo_positive(&self, u: f64) -> f64 {
        self.eo_integral(u, true)
    }

    /// `int_0^u min(a(s), 0) ds`.
    pub fn eo_negative(&self, u: f64) -> f64 {
        self.eo_integral(u, false)
    }

    /// Split integral computed exactly: between consecutive sign changes of
    /// `a` the integrand is either `a` or `0`, and `int a = A(b) - A(a)`.
    fn eo_integral(&self, u: f64, positive_part: bool) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let (lo, hi) = if u > 0.0 { (0.0, u) } else { (u, 0.0) };
        let mut total = 0.0;
        let mut left = lo;
        let close = |left: f64, right: f64, total: &mut f64| {
            if right <= left {
                return;
            }
            let speed = self.derivative(0.5 * (left + right));
            let wanted = if positive_part {
                speed > 0.0
            } else {
                speed < 0.0
            };
            if wanted {
                *total += self.eval(right) - self.eval(left);
            }
        };
        for &r in &self.speed_roots {
            if r > lo && r < hi {
                close(left, r, &mut total);
                left = r;
            }
        }
        close(left, hi, &mut total);
        if u < 0.0 {
            -total
        } else {
            total
        }
    }

    /// The rescaled flux `Psi(xi) = (A(mu xi + 1) - A(1)) / mu` with
    /// `mu = sqrt(eps) * lambda(eps)`, expanded to polynomial coefficients.
    /// The constant term is set to zero exactly (`Psi(0) = 0` identically).
    pub fn transformed(&self, eps: f64, scale: &DeviationScale) -> Result<FluxModel, ModelError> {
        let mu = scale.mu(eps)?;
        let n = self.coeffs.len();
        let mut shifted = vec![0.0; n];
        for (i, &ci) in self.coeffs.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            let mut binom = 1.0;
            let mut mu_pow = 1.0;
            for (j, slot) in shifted.iter_mut().enumerate().take(i + 1) {
                *slot += ci * binom * mu_pow;
                binom *= (i - j) as f64 / (j + 1) as f64;
                mu_pow *= mu;
            }
        }
        let mut psi = vec![0.0; n];
        for j in 1..n {
            psi[j] = shifted[j] / mu;
        }
        Ok(Self::from_parts(
            FluxKind::Polynomial(psi.clone()),
            psi,
            self.growth_p,
            self.growth_c,
        ))
    }
}

/// `Psi(xi) = (A(sqrt(eps) lambda(eps) xi + 1) - A(1)) / (sqrt(eps) lambda(eps))`
/// evaluated directly from `A`; `Psi(0) = 0` exactly since the numerator
/// cancels. Requires `eps` in `(0, 1)`.
pub fn eval_psi(
    flux: &FluxModel,
    eps: f64,
    scale: &DeviationScale,
    xi: f64,
) -> Result<f64, ModelError> {
    let mu = scale.mu(eps)?;
    Ok((flux.eval(mu * xi + 1.0) - flux.eval(1.0)) / mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale025() -> DeviationScale {
        DeviationScale::new(0.25).unwrap()
    }

    #[test]
    fn burgers_values() {
        let f = FluxModel::burgers();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(2.0), 2.0);
        assert_eq!(f.derivative(1.0), 1.0);
        assert_eq!(f.derivative(0.0), 0.0);
        assert_eq!(f.derivative(-3.5), -3.5);
    }

    #[test]
    fn polynomial_cubic_example() {
        // A(xi) = xi + xi^3/3, so A(1) = 4/3.
        let f = FluxModel::polynomial(vec![0.0, 1.0, 0.0, 1.0 / 3.0]).unwrap();
        assert!((f.eval(1.0) - 4.0 / 3.0).abs() < 1e-15);
        // a(xi) = 1 + xi^2 is strictly positive: no sign roots.
        assert!(f.speed_roots.is_empty());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let f = FluxModel::polynomial(vec![0.3, -1.0, 0.25, 2.0]).unwrap();
        let d = 1e-5;
        for &xi in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
            let fd = (f.eval(xi + d) - f.eval(xi - d)) / (2.0 * d);
            assert!(
                (fd - f.derivative(xi)).abs() < 1e-8,
                "xi={xi}: fd={fd} a={}",
                f.derivative(xi)
            );
        }
    }

    #[test]
    fn eo_split_matches_burgers_closed_form() {
        let f = FluxModel::burgers();
        for &u in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let plus = if u > 0.0 { 0.5 * u * u } else { 0.0 };
            let minus = if u < 0.0 { 0.5 * u * u } else { 0.0 };
            assert!((f.eo_positive(u) - plus).abs() < 1e-15);
            assert!((f.eo_negative(u) - minus).abs() < 1e-15);
        }
    }

    #[test]
    fn eo_split_sums_to_flux_difference() {
        // eo_positive + eo_negative = A(u) - A(0) for any flux.
        let f = FluxModel::polynomial(vec![0.1, -0.4, -1.0, 0.5]).unwrap();
        for i in -20..=20 {
            let u = i as f64 * 0.17;
            let total = f.eo_positive(u) + f.eo_negative(u);
            assert!(
                (total - (f.eval(u) - f.eval(0.0))).abs() < 1e-12,
                "u={u}"
            );
        }
    }

    #[test]
    fn eo_split_matches_quadrature() {
        let f = FluxModel::polynomial(vec![0.0, -0.3, 0.8, 0.0, -0.2]).unwrap();
        for &u in &[-1.6, -0.4, 0.9, 2.1] {
            let n = 200_000;
            let h = u / n as f64;
            let mut plus = 0.0;
            let mut minus = 0.0;
            for i in 0..n {
                let s = (i as f64 + 0.5) * h;
                let a = f.derivative(s);
                plus += a.max(0.0) * h;
                minus += a.min(0.0) * h;
            }
            assert!((f.eo_positive(u) - plus).abs() < 1e-6, "u={u}");
            assert!((f.eo_negative(u) - minus).abs() < 1e-6, "u={u}");
        }
    }

    #[test]
    fn max_speed_sees_interior_extrema() {
        // a(xi) = 1 - xi^2 peaks at xi = 0.
        let f = FluxModel::polynomial(vec![0.0, 1.0, 0.0, -1.0 / 3.0]).unwrap();
        assert!((f.max_speed(-0.5, 0.5) - 1.0).abs() < 1e-12);
        assert!((f.max_speed(1.0, 3.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn psi_vanishes_at_zero_for_any_flux() {
        let scale = scale025();
        for flux in [
            FluxModel::burgers(),
            FluxModel::polynomial(vec![0.7, -0.2, 0.1, 0.05]).unwrap(),
        ] {
            for &eps in &[1e-4, 1e-2, 0.5, 0.99] {
                assert_eq!(eval_psi(&flux, eps, &scale, 0.0).unwrap(), 0.0);
                assert_eq!(flux.transformed(eps, &scale).unwrap().eval(0.0), 0.0);
            }
        }
    }

    #[test]
    fn psi_burgers_symbolic_expansion() {
        // For Burgers, Psi(xi) = xi + mu xi^2 / 2 with mu = eps^{1/2 - alpha}.
        let flux = FluxModel::burgers();
        let scale = scale025();
        let eps = 0.01;
        let mu = math::pow(eps, 0.25);
        let got = eval_psi(&flux, eps, &scale, 1.0).unwrap();
        assert!((got - (1.0 + mu / 2.0)).abs() < 1e-14);
        for i in -10..=10 {
            let xi = i as f64 * 0.2;
            let want = xi + mu * xi * xi / 2.0;
            assert!((eval_psi(&flux, eps, &scale, xi).unwrap() - want).abs() < 1e-13);
            let t = flux.transformed(eps, &scale).unwrap();
            assert!((t.eval(xi) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_approaches_linearization() {
        // |Psi(xi) - a(1) xi| <= C mu xi^2 over xi in [-2, 2].
        let flux = FluxModel::burgers();
        let scale = scale025();
        let a1 = flux.derivative(1.0);
        for &eps in &[1e-2, 1e-4, 1e-6] {
            let mu = scale.mu(eps).unwrap();
            for i in -20..=20 {
                let xi = i as f64 * 0.1;
                let err = (eval_psi(&flux, eps, &scale, xi).unwrap() - a1 * xi).abs();
                assert!(err <= 0.5 * mu * xi * xi + 1e-14, "eps={eps} xi={xi}");
            }
        }
    }

    #[test]
    fn psi_rejects_bad_epsilon() {
        let flux = FluxModel::burgers();
        let scale = scale025();
        assert!(eval_psi(&flux, 0.0, &scale, 1.0).is_err());
        assert!(eval_psi(&flux, 1.0, &scale, 1.0).is_err());
        assert!(eval_psi(&flux, -0.5, &scale, 1.0).is_err());
        assert!(flux.transformed(1.5, &scale).is_err());
    }

    #[test]
    fn transformed_and_direct_psi_agree() {
        let flux = FluxModel::polynomial(vec![0.0, 1.0, -0.3, 1.0 / 3.0]).unwrap();
        let scale = scale025();
        let eps = 0.05;
        let t = flux.transformed(eps, &scale).unwrap();
        for i in -15..=15 {
            let xi = i as f64 * 0.15;
            let direct = eval_psi(&flux, eps, &scale, xi).unwrap();
            assert!((t.eval(xi) - direct).abs() < 1e-12, "xi={xi}");
        }
    }

    #[test]
    fn sign_roots_of_cubic_speed() {
        // a(xi) = xi (xi - 1) (xi + 2) = xi^3 + xi^2 - 2 xi.
        // A = xi^4/4 + xi^3/3 - xi^2.
        let f = FluxModel::polynomial(vec![0.0, 0.0, -1.0, 1.0 / 3.0, 0.25]).unwrap();
        let roots = &f.speed_roots;
        assert_eq!(roots.len(), 3);
        assert!((roots[0] + 2.0).abs() < 1e-10);
        assert!(roots[1].abs() < 1e-10);
        assert!((roots[2] - 1.0).abs() < 1e-10);
    }
}
