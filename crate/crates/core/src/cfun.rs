//! c-functions, connection coefficients and closed-form Wronskians.
//!
//! The c-function expands the spherical function in the asymptotically free
//! basis on the positive branch; its reciprocal modulus squared is the
//! continuous Plancherel density. The K-coefficients expand the asymptotic
//! solution back in the basis `{phi, psi}` of functions continuously
//! differentiable at the origin.

use crate::eigen;
use crate::error::{Error, Result};
use crate::lattice::{self, LatticePoint, Parameters};
use crate::qseries::{self, QBase};
use crate::scaled::Scaled;
use crate::Complex;
use alloc::format;

/// A q-Pochhammer denominator with a relative factor smaller than this marks
/// the evaluation as sitting on a pole.
const POLE_GUARD: f64 = 1e-8;

fn c(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

/// `c(gamma; a, b, c; z)` per its product formula
/// `(a/g, b/g, c/g;q)_inf theta(-q/(abczg)) / ((ab, ac;q)_inf theta(-bcz) (1/g^2;q)_inf)`.
pub fn c_function_with(
    gamma: Complex,
    a: f64,
    b: f64,
    cc: f64,
    z: f64,
    q: QBase,
) -> Result<Complex> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("c(gamma) requires gamma != 0"));
    }
    if qseries::qpoch_inf_min_factor(gamma.powi(-2), q) < POLE_GUARD {
        return Err(Error::pole(format!("(1/gamma^2;q)_inf at gamma = {gamma}")));
    }
    let (den_poch, _, _) = qseries::qpoch_inf_scaled(gamma.powi(-2), q);
    let mut num = Scaled::ONE;
    for arg in [c(a) / gamma, c(b) / gamma, c(cc) / gamma] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        num = num.mul(v);
    }
    let (th_num, _) = qseries::theta_scaled(c(-q.get()) / (c(a * b * cc * z) * gamma), q)?;
    num = num.mul(th_num);
    let mut den = den_poch;
    for arg in [c(a * b), c(a * cc)] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        den = den.mul(v);
    }
    let (th_den, _) = qseries::theta_scaled(c(-b * cc * z), q)?;
    den = den.mul(th_den);
    Ok(num.div(den).to_complex())
}

/// `c(gamma)` at the module parameters.
pub fn c_function(gamma: Complex, p: &Parameters) -> Result<Complex> {
    c_function_with(gamma, p.a, p.b, p.c, p.z, p.q)
}

/// `ctilde(gamma; a,b,c; z) = c(gamma; a, q/b, q/c; bcz/q)`.
pub fn ctilde_function(gamma: Complex, p: &Parameters) -> Result<Complex> {
    let qv = p.qv();
    c_function_with(gamma, p.a, qv / p.b, qv / p.c, p.b * p.c * p.z / qv, p.q)
}

/// The explicit display of `ctilde`:
/// `(a/g, q/bg, q/cg;q)_inf theta(-1/(azg)) / ((qa/b, qa/c;q)_inf theta(-1/z) (1/g^2;q)_inf)`.
/// Cross-check route for [`ctilde_function`].
pub fn ctilde_explicit(gamma: Complex, p: &Parameters) -> Result<Complex> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("ctilde(gamma) requires gamma != 0"));
    }
    let q = p.q;
    let qv = q.get();
    if qseries::qpoch_inf_min_factor(gamma.powi(-2), q) < POLE_GUARD {
        return Err(Error::pole(format!("(1/gamma^2;q)_inf at gamma = {gamma}")));
    }
    let (den_poch, _, _) = qseries::qpoch_inf_scaled(gamma.powi(-2), q);
    let mut num = Scaled::ONE;
    for arg in [c(p.a) / gamma, c(qv / p.b) / gamma, c(qv / p.c) / gamma] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        num = num.mul(v);
    }
    let (th_num, _) = qseries::theta_scaled(c(-1.0) / (c(p.a * p.z) * gamma), q)?;
    num = num.mul(th_num);
    let mut den = den_poch;
    for arg in [c(qv * p.a / p.b), c(qv * p.a / p.c)] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        den = den.mul(v);
    }
    let (th_den, _) = qseries::theta_scaled(c(-1.0 / p.z), q)?;
    den = den.mul(th_den);
    Ok(num.div(den).to_complex())
}

/// `K(gamma; a, b, c; z)` of the expansion `Phi = K phi + Ktilde psi`:
/// `(ab, ac, qg/b, qg/c;q)_inf / (qg^2, a/g;q)_inf
///  * theta(-bcz, -az/g) / theta(bc, -abz, -acz)`.
pub fn k_coef_with(gamma: Complex, a: f64, b: f64, cc: f64, z: f64, q: QBase) -> Result<Complex> {
    let qv = q.get();
    if qseries::qpoch_inf_min_factor(c(qv) * gamma * gamma, q) < POLE_GUARD {
        return Err(Error::pole(format!("(q gamma^2;q)_inf at gamma = {gamma}")));
    }
    if qseries::qpoch_inf_min_factor(c(a) / gamma, q) < POLE_GUARD {
        return Err(Error::pole(format!("(a/gamma;q)_inf at gamma = {gamma}")));
    }
    let (p1, _, _) = qseries::qpoch_inf_scaled(c(qv) * gamma * gamma, q);
    let (p2, _, _) = qseries::qpoch_inf_scaled(c(a) / gamma, q);
    let mut num = Scaled::ONE;
    for arg in [c(a * b), c(a * cc), c(qv) * gamma / c(b), c(qv) * gamma / c(cc)] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        num = num.mul(v);
    }
    let (th1, _) = qseries::theta_scaled(c(-b * cc * z), q)?;
    let (th2, _) = qseries::theta_scaled(c(-a * z) / gamma, q)?;
    num = num.mul(th1).mul(th2);
    let den = p1.mul(p2).mul(qseries::theta_multi_scaled(
        &[c(b * cc), c(-a * b * z), c(-a * cc * z)],
        q,
    )?);
    Ok(num.div(den).to_complex())
}

/// `(K(gamma), Ktilde(gamma))` at the module parameters, with
/// `Ktilde(gamma; a,b,c; z) = K(gamma; a, q/b, q/c; bcz/q)`.
pub fn k_coefficients(gamma: Complex, p: &Parameters) -> Result<(Complex, Complex)> {
    let qv = p.qv();
    let k = k_coef_with(gamma, p.a, p.b, p.c, p.z, p.q)?;
    let kt = k_coef_with(gamma, p.a, qv / p.b, qv / p.c, p.b * p.c * p.z / qv, p.q)?;
    Ok((k, kt))
}

/// Closed-form Wronskian `W(psi_g, phi_g)` (constant on the whole lattice):
/// `(1-q) (ag, a/g;q)_inf theta(bc) / (ab, ac, qa/b, qa/c;q)_inf`.
pub fn wronskian_psi_phi_closed(gamma: Complex, p: &Parameters) -> Result<Complex> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("gamma must be nonzero"));
    }
    let q = p.q;
    let qv = q.get();
    for (name, v) in [("qa/b", qv * p.a / p.b), ("qa/c", qv * p.a / p.c)] {
        let u = v.abs().ln() / qv.ln();
        if v > 1.0 && (u - u.round()).abs() < 1e-12 {
            return Err(Error::domain(format!("{name} lies on q^(-N), degenerate")));
        }
    }
    let (n1, _, _) = qseries::qpoch_inf_scaled(c(p.a) * gamma, q);
    let (n2, _, _) = qseries::qpoch_inf_scaled(c(p.a) / gamma, q);
    let (th, _) = qseries::theta_scaled(c(p.b * p.c), q)?;
    let mut den = Scaled::ONE;
    for arg in [
        c(p.a * p.b),
        c(p.a * p.c),
        c(qv * p.a / p.b),
        c(qv * p.a / p.c),
    ] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        den = den.mul(v);
    }
    Ok(n1
        .mul(n2)
        .mul(th)
        .div(den)
        .mul_complex(c(1.0 - qv))
        .to_complex())
}

/// `W(Phi_g, Phi_{1/g}) = a K (g - 1/g)` on the positive branch.
pub fn wronskian_phi_pair(gamma: Complex, p: &Parameters) -> Result<Complex> {
    let sp = eigen::SpectralParam::classify(gamma, p)?;
    if sp.in_s_sing {
        return Err(Error::domain("gamma in the singular set S_sing"));
    }
    let k = lattice::const_k(p)?;
    Ok(c(p.a * k) * (gamma - gamma.inv()))
}

/// The constant Wronskian `W(gamma) = W(Phi_g, phi_g) = a K c(1/g) (g - 1/g)`.
pub fn w_gamma(gamma: Complex, p: &Parameters) -> Result<Complex> {
    let k = lattice::const_k(p)?;
    let cm = c_function(gamma.inv(), p)?;
    Ok(c(p.a * k) * cm * (gamma - gamma.inv()))
}

/// All connection coefficients at one spectral parameter.
#[derive(Clone, Copy, Debug)]
pub struct ConnectionData {
    pub c_plus: Complex,
    pub c_minus: Complex,
    pub ctilde_plus: Complex,
    pub ctilde_minus: Complex,
    pub k_coef: Complex,
    pub ktilde_coef: Complex,
    pub w_gamma: Complex,
}

impl ConnectionData {
    pub fn compute(gamma: Complex, p: &Parameters) -> Result<Self> {
        let (k_coef, ktilde_coef) = k_coefficients(gamma, p)?;
        Ok(ConnectionData {
            c_plus: c_function(gamma, p)?,
            c_minus: c_function(gamma.inv(), p)?,
            ctilde_plus: ctilde_function(gamma, p)?,
            ctilde_minus: ctilde_function(gamma.inv(), p)?,
            k_coef,
            ktilde_coef,
            w_gamma: w_gamma(gamma, p)?,
        })
    }

    /// Max-norm residual of
    /// `[[c(g), c(1/g)], [ct(g), ct(1/g)]] = [[K(g), Kt(g)], [K(1/g), Kt(1/g)]]^{-1}`.
    pub fn matrix_identity_residual(&self, gamma: Complex, p: &Parameters) -> Result<f64> {
        let (k_m, kt_m) = k_coefficients(gamma.inv(), p)?;
        // the product of the two matrices must be the identity
        let m00 = self.c_plus * self.k_coef + self.c_minus * k_m;
        let m01 = self.c_plus * self.ktilde_coef + self.c_minus * kt_m;
        let m10 = self.ctilde_plus * self.k_coef + self.ctilde_minus * k_m;
        let m11 = self.ctilde_plus * self.ktilde_coef + self.ctilde_minus * kt_m;
        let r = (m00 - c(1.0)).norm().max((m11 - c(1.0)).norm());
        Ok(r.max(m01.norm()).max(m10.norm()))
    }
}

/// Relative residual of the expansion
/// `phi_g(x) = c(g) Phi_g(x) + c(1/g) Phi_{1/g}(x)` at `x = z q^k`.
pub fn connection_expand_phi(gamma: Complex, k: i32, p: &Parameters) -> Result<f64> {
    let sp = eigen::SpectralParam::classify(gamma, p)?;
    if sp.in_s_sing {
        return Err(Error::pole("gamma in S_sing: asymptotic basis degenerates"));
    }
    let x = LatticePoint::pos(k).value(p);
    let lhs = eigen::phi_at(gamma, x, p)?.value;
    let rhs = c_function(gamma, p)? * eigen::phi_asym(gamma, k, p)?.value
        + c_function(gamma.inv(), p)? * eigen::phi_asym(gamma.inv(), k, p)?.value;
    Ok((lhs - rhs).norm() / (1.0 + lhs.norm()))
}

/// Same residual for `psi` with the `ctilde` coefficients.
pub fn connection_expand_psi(gamma: Complex, k: i32, p: &Parameters) -> Result<f64> {
    let sp = eigen::SpectralParam::classify(gamma, p)?;
    if sp.in_s_sing {
        return Err(Error::pole("gamma in S_sing: asymptotic basis degenerates"));
    }
    let x = LatticePoint::pos(k).value(p);
    let lhs = eigen::psi_at(gamma, x, p)?.value;
    let rhs = ctilde_function(gamma, p)? * eigen::phi_asym(gamma, k, p)?.value
        + ctilde_function(gamma.inv(), p)? * eigen::phi_asym(gamma.inv(), k, p)?.value;
    Ok((lhs - rhs).norm() / (1.0 + lhs.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p0() -> Parameters {
        Parameters::new(0.5, 0.4, 0.5, 0.6, 1.0).unwrap()
    }

    fn g() -> Complex {
        Complex::new(0.3, 0.4)
    }

    #[test]
    fn c_function_theta_shift_route() {
        // recomputation with theta arguments shifted by q^2 and unshifted
        // through the quasi-periodicity factor agrees with the direct path
        let p = p0();
        let q = p.q;
        let direct = c_function(g(), &p).unwrap();
        let shifted_theta = |x: Complex| {
            let y = x * q.powi(2);
            qseries::theta_scaled(y, q)
                .unwrap()
                .0
                .mul(qseries::theta_shift_factor(y, q, -2))
        };
        let mut num = Scaled::ONE;
        for arg in [c(p.a) / g(), c(p.b) / g(), c(p.c) / g()] {
            num = num.mul(qseries::qpoch_inf_scaled(arg, q).0);
        }
        num = num.mul(shifted_theta(c(-q.get()) / (c(p.a * p.b * p.c * p.z) * g())));
        let mut den = qseries::qpoch_inf_scaled(g().powi(-2), q).0;
        for arg in [c(p.a * p.b), c(p.a * p.c)] {
            den = den.mul(qseries::qpoch_inf_scaled(arg, q).0);
        }
        den = den.mul(shifted_theta(c(-p.b * p.c * p.z)));
        let alt = num.div(den).to_complex();
        assert!((direct - alt).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn c_function_zero_from_polynomial_set() {
        // gamma = a makes (a/gamma;q)_inf carry the factor (1;q)_inf = 0;
        // equivalently gamma -> c(1/gamma) vanishes at gamma = 1/a
        let p = p0();
        let v = c_function(c(p.a), &p).unwrap();
        assert!(v.norm() < 1e-14, "c(a) = {v}");
    }

    #[test]
    fn c_function_conjugation_on_circle() {
        let p = p0();
        for theta in [0.3, 1.1, 2.8] {
            let gamma = Complex::from_polar(1.0, theta);
            let a = c_function(gamma, &p).unwrap();
            let b = c_function(gamma.inv(), &p).unwrap();
            assert!((b - a.conj()).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn c_function_pole_flagged() {
        let p = p0();
        // gamma^2 = q: (1/gamma^2;q)_inf vanishes
        let gamma = c(0.5f64.sqrt());
        match c_function(gamma, &p) {
            Err(e) => assert!(e.is_pole(), "expected pole, got {e}"),
            Ok(v) => panic!("expected pole error, got {v}"),
        }
    }

    #[test]
    fn ctilde_two_routes_agree() {
        let p = p0();
        for gamma in [g(), c(0.17), Complex::new(-0.4, 0.12)] {
            let swap = ctilde_function(gamma, &p).unwrap();
            let exp = ctilde_explicit(gamma, &p).unwrap();
            assert!(
                (swap - exp).norm() <= 1e-11 * swap.norm(),
                "gamma {gamma}: {swap} vs {exp}"
            );
        }
    }

    #[test]
    fn ctilde_zero_and_pole() {
        let p = p0();
        assert!(ctilde_function(c(p.a), &p).unwrap().norm() < 1e-14);
        let gamma = c(0.5f64.sqrt());
        assert!(ctilde_function(gamma, &p).unwrap_err().is_pole());
    }

    #[test]
    fn k_coefficients_pole_at_s_pol() {
        let p = p0();
        // gamma = a q^2 makes (a/gamma;q)_inf vanish
        let gamma = c(p.a * 0.25);
        assert!(k_coefficients(gamma, &p).unwrap_err().is_pole());
    }

    #[test]
    fn wronskian_closed_form_symmetry_and_zero() {
        let p = p0();
        let w1 = wronskian_psi_phi_closed(g(), &p).unwrap();
        let w2 = wronskian_psi_phi_closed(g().inv(), &p).unwrap();
        assert!((w1 - w2).norm() < 1e-12 * w1.norm());
        // vanishes at gamma = a (n = 0 polynomial case)
        let w0 = wronskian_psi_phi_closed(c(p.a), &p).unwrap();
        let scale = wronskian_psi_phi_closed(c(p.a * 1.1), &p).unwrap().norm();
        assert!(w0.norm() < 1e-12 * scale.max(1e-3), "{w0}");
    }

    #[test]
    fn phi_pair_wronskian_properties() {
        let p = p0();
        let gamma = Complex::from_polar(0.7, core::f64::consts::PI / 5.0);
        let w = wronskian_phi_pair(gamma, &p).unwrap();
        assert!(w.norm() > 1e-6);
        let w_inv = wronskian_phi_pair(gamma.inv(), &p).unwrap();
        assert!((w + w_inv).norm() < 1e-12 * w.norm());
        // gamma = 1 lies in S_sing: rejected
        assert!(wronskian_phi_pair(c(1.0), &p).is_err());
    }
}
