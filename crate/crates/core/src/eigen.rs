//! Eigenvalue map and the explicit eigenfunctions of the operator `L`.
//!
//! All eigenfunctions come as basic hypergeometric series with several
//! overlapping representations; each evaluator selects a representation by
//! the magnitude of its series argument (and falls back on propagation by
//! the eigenvalue recurrence where no series converges). The representations
//! must agree on overlaps, which the tests exercise directly.
//!
//! Naming: `phi` is the spherical function (normalized to 1 at `x = -1`,
//! continuously differentiable at the origin), `psi` its companion solution,
//! `phi_asym` the asymptotically free solution on the positive branch with
//! `Phi(z q^{-m}) ~ (a gamma)^m`, and `phi_minus` the analogous minimal
//! solution on the negative axis.

use crate::cfun;
use crate::error::{Error, Result};
use crate::lattice::{coeff_a, coeff_b, LatticePoint, Parameters};
use crate::qseries::{self, phi_series, SeriesResult, DEFAULT_TOL};
use crate::scaled::Scaled;
use crate::Complex;
use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

/// Largest series-argument modulus a representation is trusted with.
const ROUTE_CUT: f64 = 0.92;

/// Relative distance below which a spectral parameter counts as lying on a
/// singular set.
const SET_TOL: f64 = 1e-9;

/// Switch to the analytic-limit evaluation of the extended asymptotic
/// solution when `gamma` is this close (relatively) to `S_pol^+`.
const POL_SWITCH: f64 = 1e-5;

fn c(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

fn one() -> Complex {
    Complex::new(1.0, 0.0)
}

/// Eigenvalue map `mu(gamma) = -1 - a^2 + a (gamma + 1/gamma)`.
pub fn mu(gamma: Complex, p: &Parameters) -> Result<Complex> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("mu(gamma) requires gamma != 0"));
    }
    Ok(c(-1.0 - p.a * p.a) + c(p.a) * (gamma + gamma.inv()))
}

/// Relative distance from `v` to the nearest `q^m`, together with that `m`.
/// Distance is measured as `|v - q^m| / q^m`, so both modulus and phase
/// deviations count.
pub fn rel_dist_to_q_power(v: Complex, p: &Parameters) -> (f64, i64) {
    let qv = p.qv();
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return (f64::INFINITY, 0);
    }
    let m = (n.ln() / qv.ln()).round() as i64;
    let qm = p.q.powi(m);
    ((v - c(qm)).norm() / qm, m)
}

/// Classification of a spectral parameter against the singular sets.
#[derive(Clone, Copy, Debug)]
pub struct SpectralParam {
    pub gamma: Complex,
    pub mu: Complex,
    /// `gamma` in `{+-q^{-k/2}}, k >= 1` (poles of the asymptotic solution).
    pub in_s_sing_plus: bool,
    /// `gamma` in `{+-q^{k/2}}, k` any integer.
    pub in_s_sing: bool,
    /// `gamma` in `{a q^n, q^{-n}/a}, n >= 0` (polynomial degeneration).
    pub in_s_pol: bool,
    /// `gamma` in `{a q^n}, n >= 0`.
    pub in_s_pol_plus: bool,
}

impl SpectralParam {
    pub fn classify(gamma: Complex, p: &Parameters) -> Result<Self> {
        let mu = mu(gamma, p)?;
        // gamma^2 close to some q^k <=> gamma close to +-q^{k/2}
        let (d2, m2) = rel_dist_to_q_power(gamma * gamma, p);
        let in_s_sing = d2 < 2.0 * SET_TOL;
        let in_s_sing_plus = in_s_sing && m2 <= -1;
        let (dp, np) = rel_dist_to_q_power(gamma / c(p.a), p);
        let in_s_pol_plus = dp < SET_TOL && np >= 0;
        let (dm, nm) = rel_dist_to_q_power(gamma * c(p.a), p);
        let in_s_pol = in_s_pol_plus || (dm < SET_TOL && nm <= 0);
        Ok(SpectralParam {
            gamma,
            mu,
            in_s_sing_plus,
            in_s_sing,
            in_s_pol,
            in_s_pol_plus,
        })
    }

    /// Relative distance to the nearest point of `S_pol^+ = {a q^n}`.
    pub fn dist_s_pol_plus(gamma: Complex, p: &Parameters) -> (f64, u32) {
        let (d, n) = rel_dist_to_q_power(gamma / c(p.a), p);
        if n >= 0 {
            (d, n as u32)
        } else {
            (f64::INFINITY, 0)
        }
    }
}

// ---------------------------------------------------------------------------
// phi: the spherical function
// ---------------------------------------------------------------------------

/// Defining series: `phi_g(x) = 3phi2(ag, a/g, -1/x; ab, ac; q, -bcx)`,
/// valid for `|bcx| < 1` (all of the negative branch and small positive x).
pub fn phi_phib(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    phi_series(
        &[c(p.a) * gamma, c(p.a) / gamma, c(-1.0 / x)],
        &[c(p.a * p.b), c(p.a * p.c)],
        p.q,
        c(-p.b * p.c * x),
        DEFAULT_TOL,
    )
}

/// Analytic continuation in `x`:
/// `phi_g(x) = (ag, bc, -abcx/g;q)_inf / (ab, ac, -bcx;q)_inf
///             * 3phi2(b/g, c/g, -bcx; bc, -abcx/g; q, ag)`,
/// single valued for `x` off `(-inf, -1/bc]`; needs `|a gamma| < 1`.
pub fn phi_ancont_b(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    let ag = c(p.a) * gamma;
    if ag.norm() > ROUTE_CUT {
        return Err(Error::domain("ancont route needs |a gamma| < 1"));
    }
    let q = p.q;
    let habc = c(-p.a * p.b * p.c * x) / gamma;
    let mut pref = Scaled::ONE;
    for arg in [ag, c(p.b * p.c), habc] {
        pref = pref.mul(qseries::qpoch_inf_scaled(arg, q).0);
    }
    for arg in [c(p.a * p.b), c(p.a * p.c), c(-p.b * p.c * x)] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        if v.to_complex().norm() < 1e-250 {
            return Err(Error::pole(format!("(x;q)_inf with x = {arg}")));
        }
        pref = pref.div(v);
    }
    let ser = phi_series(
        &[c(p.b) / gamma, c(p.c) / gamma, c(-p.b * p.c * x)],
        &[c(p.b * p.c), habc],
        q,
        ag,
        DEFAULT_TOL,
    )?;
    Ok(ser.scale(pref.to_complex()))
}

/// Second continuation (parameter roles of `a` and `b` swapped in the
/// series):
/// `phi_g(x) = (bg, -abcx/g;q)_inf / (ab, -bcx;q)_inf
///             * 3phi2(a/g, c/g, -acx; ac, -abcx/g; q, bg)`; needs `|bg| < 1`.
pub fn phi_ancont_b2(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    let bg = c(p.b) * gamma;
    if bg.norm() > ROUTE_CUT {
        return Err(Error::domain("second ancont route needs |b gamma| < 1"));
    }
    let q = p.q;
    let habc = c(-p.a * p.b * p.c * x) / gamma;
    let mut pref = Scaled::ONE;
    for arg in [bg, habc] {
        pref = pref.mul(qseries::qpoch_inf_scaled(arg, q).0);
    }
    for arg in [c(p.a * p.b), c(-p.b * p.c * x)] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, q);
        if v.to_complex().norm() < 1e-250 {
            return Err(Error::pole(format!("(x;q)_inf with x = {arg}")));
        }
        pref = pref.div(v);
    }
    let ser = phi_series(
        &[c(p.a) / gamma, c(p.c) / gamma, c(-p.a * p.c * x)],
        &[c(p.a * p.c), habc],
        q,
        bg,
        DEFAULT_TOL,
    )?;
    Ok(ser.scale(pref.to_complex()))
}

/// Index `k` with `x = z q^k` when `x` lies on the positive lattice grid.
fn pos_grid_index(x: f64, p: &Parameters) -> Option<i32> {
    if x <= 0.0 {
        return None;
    }
    let k = ((x / p.z).ln() / p.qv().ln()).round();
    let ki = k as i32;
    if (p.z * p.q.powi(ki as i64) - x).abs() <= 1e-12 * x {
        Some(ki)
    } else {
        None
    }
}

/// Does `gamma` lie (within `SET_TOL`) on the discrete spectral set, i.e.
/// on a zero of `gamma -> c(1/gamma)` in the punctured unit disc? The sites
/// are `1/(q^k e)` for `e` in `{a,b,c}` with `q^k e > 1`, and
/// `-abcz/q^{k+1}` with modulus below one.
pub fn on_discrete_set(gamma: Complex, p: &Parameters) -> bool {
    if gamma.norm() >= 1.0 {
        return false;
    }
    for e in [p.a, p.b, p.c] {
        // gamma = q^{-k}/e <=> 1/(gamma e) = q^k with k >= 0
        let (d, k) = rel_dist_to_q_power((c(e) * gamma).inv(), p);
        if d < SET_TOL && k >= 0 {
            return true;
        }
    }
    // gamma = -abcz/q^{k+1} <=> -abcz/(q gamma) = q^k
    let (d, _) = rel_dist_to_q_power(c(-p.a * p.b * p.c * p.z / p.qv()) / gamma, p);
    d < SET_TOL
}

/// c-function expansion route for large positive `x`:
/// `phi = c(g) Phi_g + c(1/g) Phi_{1/g}`. This is the numerically stable
/// representation at lattice infinity, where the defining series diverges.
/// On the discrete spectral set `c(1/g)` vanishes identically; it is zeroed
/// there so roundoff cannot excite the exponentially large second solution.
fn phi_via_connection(gamma: Complex, k: i32, p: &Parameters) -> Result<SeriesResult> {
    // on the discrete set the coefficient of the exponentially dominant
    // second solution is an exact zero
    let cp = if on_discrete_set(gamma.inv(), p) {
        Complex::new(0.0, 0.0)
    } else {
        cfun::c_function(gamma, p)?
    };
    let cm = if on_discrete_set(gamma, p) {
        Complex::new(0.0, 0.0)
    } else {
        cfun::c_function(gamma.inv(), p)?
    };
    let mut v = Scaled::ZERO;
    let mut err = 0.0;
    let mut n = 0;
    if cp.norm() > 0.0 {
        let fp = phi_asym_scaled(gamma, p.z, k, p)?;
        v = v.add(fp.0.mul_complex(cp));
        err += fp.1 * cp.norm();
        n += fp.2;
    }
    if cm.norm() > 0.0 {
        let fm = phi_asym_scaled(gamma.inv(), p.z, k, p)?;
        v = v.add(fm.0.mul_complex(cm));
        err += fm.1 * cm.norm();
        n += fm.2;
    }
    Ok(SeriesResult {
        value: v.to_complex(),
        err_estimate: err,
        n_terms: n,
    })
}

/// Evaluate the spherical function at an arbitrary real coordinate.
///
/// Route selection: the defining series where its argument is small, the
/// c-function expansion at large positive grid points, the analytic
/// continuations where only those apply, and eigenvalue-recurrence
/// propagation as a last resort. `phi_g = phi_{1/g}` holds in every route.
pub fn phi_at(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("phi requires gamma != 0"));
    }
    if x == 0.0 {
        return Ok(SeriesResult {
            value: phi_origin(gamma, p)?.0,
            err_estimate: 1e-14,
            n_terms: 0,
        });
    }
    let r_def = (p.b * p.c * x).abs();
    if r_def <= ROUTE_CUT {
        return phi_phib(gamma, x, p);
    }
    // large |x|: asymptotic expansion on the positive grid
    let mut last_err = None;
    if let Some(k) = pos_grid_index(x, p) {
        match phi_via_connection(gamma, k, p) {
            Ok(v) => return Ok(v),
            Err(e) => last_err = Some(e),
        }
    }
    for g in [gamma, gamma.inv()] {
        if (c(p.a) * g).norm() <= ROUTE_CUT {
            match phi_ancont_b(g, x, p) {
                Ok(v) => return Ok(v),
                Err(e) => last_err = Some(e),
            }
        }
    }
    for g in [gamma, gamma.inv()] {
        if (c(p.b) * g).norm() <= ROUTE_CUT {
            match phi_ancont_b2(g, x, p) {
                Ok(v) => return Ok(v),
                Err(e) => last_err = Some(e),
            }
        }
    }
    if let Some(k) = pos_grid_index(x, p) {
        return phi_recurrence_out(gamma, k, p);
    }
    Err(last_err.unwrap_or_else(|| Error::domain("no valid representation of phi at this point")))
}

/// `phi` at a tagged lattice point.
pub fn phi(gamma: Complex, pt: LatticePoint, p: &Parameters) -> Result<SeriesResult> {
    phi_at(gamma, pt.value(p), p)
}

/// Propagate `phi` outward on the positive branch with the eigenvalue
/// recurrence, seeded inside the convergence region of the defining series.
fn phi_recurrence_out(gamma: Complex, k_target: i32, p: &Parameters) -> Result<SeriesResult> {
    // seeds: the two largest grid points with |bc x| comfortably small
    let mut k_seed = k_target;
    while (p.b * p.c * p.z * p.q.powi(k_seed as i64)).abs() > 0.8 * ROUTE_CUT {
        k_seed += 1;
        if k_seed > k_target + 4000 {
            return Err(Error::convergence("no seed region for recurrence"));
        }
    }
    let m = mu(gamma, p)?;
    let mut f_in = phi_phib(gamma, p.z * p.q.powi((k_seed + 1) as i64), p)?; // f(q x)
    let mut f_x = phi_phib(gamma, p.z * p.q.powi(k_seed as i64), p)?; // f(x)
    let mut err = f_in.err_estimate + f_x.err_estimate;
    let mut k = k_seed;
    while k > k_target {
        // L f = mu f at x = z q^k solved for f(x/q)
        let x = p.z * p.q.powi(k as i64);
        let a = coeff_a(x, p)?;
        let b = coeff_b(x, p)?;
        if b.abs() < 1e-300 {
            return Err(Error::domain("recurrence hit B(x) = 0"));
        }
        let f_out = ((c(a + b) + m) * f_x.value - c(a) * f_in.value) / c(b);
        err = (err * (a.abs() + b.abs() + m.norm()) / b.abs()) + 1e-15 * f_out.norm();
        f_in = f_x;
        f_x = SeriesResult {
            value: f_out,
            err_estimate: err,
            n_terms: f_in.n_terms,
        };
        k -= 1;
    }
    Ok(f_x)
}

// ---------------------------------------------------------------------------
// psi
// ---------------------------------------------------------------------------

fn psi_degenerate(p: &Parameters) -> Result<()> {
    let qv = p.qv();
    for (name, v) in [("qa/b", qv * p.a / p.b), ("qa/c", qv * p.a / p.c)] {
        let u = v.abs().ln() / qv.ln();
        if v > 1.0 && (u - u.round()).abs() < 1e-12 {
            return Err(Error::domain(format!(
                "{name} in q^(-N): psi parameters degenerate"
            )));
        }
    }
    Ok(())
}

/// Defining series:
/// `psi_g(x) = 3phi2(ag, a/g, -q/(bcx); qa/b, qa/c; q, -qx)`, `|qx| < 1`.
pub fn psi_psib(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    psi_degenerate(p)?;
    let qv = p.qv();
    phi_series(
        &[
            c(p.a) * gamma,
            c(p.a) / gamma,
            c(-qv / (p.b * p.c * x)),
        ],
        &[c(qv * p.a / p.b), c(qv * p.a / p.c)],
        p.q,
        c(-qv * x),
        DEFAULT_TOL,
    )
}

/// The parameter symmetry `psi_g(x; a,b,c) = phi_g(bc x/q; a, q/b, q/c)`
/// (with the companion Hilbert-space label `bcz/q`), used as an alternate
/// evaluation route.
pub fn psi_via_symmetry(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    psi_degenerate(p)?;
    let qv = p.qv();
    let swapped = Parameters {
        q: p.q,
        a: p.a,
        b: qv / p.b,
        c: qv / p.c,
        z: p.b * p.c * p.z / qv,
    };
    phi_at(gamma, p.b * p.c * x / qv, &swapped)
}

/// ctilde expansion route for large positive grid points.
fn psi_via_connection(gamma: Complex, k: i32, p: &Parameters) -> Result<SeriesResult> {
    let cp = cfun::ctilde_function(gamma, p)?;
    let cm = cfun::ctilde_function(gamma.inv(), p)?;
    let fp = phi_asym_scaled(gamma, p.z, k, p)?;
    let fm = phi_asym_scaled(gamma.inv(), p.z, k, p)?;
    let v = fp
        .0
        .mul_complex(cp)
        .add(fm.0.mul_complex(cm))
        .to_complex();
    Ok(SeriesResult {
        value: v,
        err_estimate: fp.1 * cp.norm() + fm.1 * cm.norm(),
        n_terms: fp.2 + fm.2,
    })
}

/// Evaluate `psi` at an arbitrary real coordinate; invariant under
/// `gamma <-> 1/gamma`.
pub fn psi_at(gamma: Complex, x: f64, p: &Parameters) -> Result<SeriesResult> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("psi requires gamma != 0"));
    }
    if x == 0.0 {
        return Ok(SeriesResult {
            value: psi_origin(gamma, p)?.0,
            err_estimate: 1e-14,
            n_terms: 0,
        });
    }
    if (p.qv() * x).abs() <= ROUTE_CUT {
        return psi_psib(gamma, x, p);
    }
    let mut last_err = None;
    if let Some(k) = pos_grid_index(x, p) {
        match psi_via_connection(gamma, k, p) {
            Ok(v) => return Ok(v),
            Err(e) => last_err = Some(e),
        }
    }
    match psi_via_symmetry(gamma, x, p) {
        Ok(v) => Ok(v),
        Err(e) => Err(last_err.unwrap_or(e)),
    }
}

/// `psi` at a tagged lattice point.
pub fn psi(gamma: Complex, pt: LatticePoint, p: &Parameters) -> Result<SeriesResult> {
    psi_at(gamma, pt.value(p), p)
}

// ---------------------------------------------------------------------------
// q-derivative formulas and origin values
// ---------------------------------------------------------------------------

/// `(D_q phi_g)(x; a,b,c) = bc mu(g) / ((1-q)(1-ab)(1-ac)) phi_g(x; qa,b,c)`.
pub fn dq_phi_formula(gamma: Complex, x: f64, p: &Parameters) -> Result<Complex> {
    let qv = p.qv();
    if (1.0 - p.a * p.b).abs() < 1e-12 || (1.0 - p.a * p.c).abs() < 1e-12 {
        return Err(Error::domain("ab = 1 or ac = 1 degenerates D_q phi"));
    }
    let shifted = Parameters {
        q: p.q,
        a: qv * p.a,
        b: p.b,
        c: p.c,
        z: p.z,
    };
    let m = mu(gamma, p)?;
    let factor = c(p.b * p.c) * m / c((1.0 - qv) * (1.0 - p.a * p.b) * (1.0 - p.a * p.c));
    Ok(factor * phi_at(gamma, x, &shifted)?.value)
}

/// `(D_q psi_g)(x; a,b,c) = q mu(g) / ((1-q)(1-qa/b)(1-qa/c)) psi_g(x; qa,b,c)`.
pub fn dq_psi_formula(gamma: Complex, x: f64, p: &Parameters) -> Result<Complex> {
    let qv = p.qv();
    if (1.0 - qv * p.a / p.b).abs() < 1e-12 || (1.0 - qv * p.a / p.c).abs() < 1e-12 {
        return Err(Error::domain("qa/b = 1 or qa/c = 1 degenerates D_q psi"));
    }
    let shifted = Parameters {
        q: p.q,
        a: qv * p.a,
        b: p.b,
        c: p.c,
        z: p.z,
    };
    let m = mu(gamma, p)?;
    let factor = c(qv) * m / c((1.0 - qv) * (1.0 - qv * p.a / p.b) * (1.0 - qv * p.a / p.c));
    Ok(factor * psi_at(gamma, x, &shifted)?.value)
}

/// Value and q-derivative of `phi_g` at the origin:
/// `phi_g(0) = 2phi2(ag, a/g; ab, ac; q, bc)` and
/// `phi_g'(0) = bc mu(g)/((1-q)(1-ab)(1-ac)) 2phi2(qag, qa/g; qab, qac; q, bc)`.
pub fn phi_origin(gamma: Complex, p: &Parameters) -> Result<(Complex, Complex)> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("gamma must be nonzero"));
    }
    let qv = p.qv();
    let v = phi_series(
        &[c(p.a) * gamma, c(p.a) / gamma],
        &[c(p.a * p.b), c(p.a * p.c)],
        p.q,
        c(p.b * p.c),
        DEFAULT_TOL,
    )?
    .value;
    let m = mu(gamma, p)?;
    let d = c(p.b * p.c) * m / c((1.0 - qv) * (1.0 - p.a * p.b) * (1.0 - p.a * p.c))
        * phi_series(
            &[c(qv * p.a) * gamma, c(qv * p.a) / gamma],
            &[c(qv * p.a * p.b), c(qv * p.a * p.c)],
            p.q,
            c(p.b * p.c),
            DEFAULT_TOL,
        )?
        .value;
    Ok((v, d))
}

/// Origin data for `psi` through `psi_g(0; a,b,c) = phi_g(0; a, q/b, q/c)`
/// and `psi_g'(0) = (bc/q) phi_g'(0; a, q/b, q/c)`.
pub fn psi_origin(gamma: Complex, p: &Parameters) -> Result<(Complex, Complex)> {
    let qv = p.qv();
    let swapped = Parameters {
        q: p.q,
        a: p.a,
        b: qv / p.b,
        c: qv / p.c,
        z: p.z,
    };
    let (v, d) = phi_origin(gamma, &swapped)?;
    Ok((v, c(p.b * p.c / qv) * d))
}

// ---------------------------------------------------------------------------
// the asymptotic solution Phi
// ---------------------------------------------------------------------------

fn check_not_s_sing_plus(gamma: Complex, p: &Parameters) -> Result<()> {
    let sp = SpectralParam::classify(gamma, p)?;
    if sp.in_s_sing_plus {
        return Err(Error::domain(
            "gamma in S_sing^+ = {+-q^{-k/2}}: asymptotic solution undefined",
        ));
    }
    Ok(())
}

/// Minimal-solution series (route valid for `|a gamma| < 1`), at `x = y q^k`:
/// prefactor `(-qg/ax, -q^2 g/abcx, ag;q)_inf / (-q/abx, -q/acx, qg^2;q)_inf`
/// times `(ag)^{-k} 3phi2(qg/a, -q/abx, -q/acx; -qg/ax, -q^2g/abcx; q, ag)`.
fn phi_asym_phib(gamma: Complex, y: f64, k: i32, p: &Parameters) -> Result<(Scaled, f64, usize)> {
    let ag = c(p.a) * gamma;
    if ag.norm() > ROUTE_CUT {
        return Err(Error::domain("minimal-solution series needs |a gamma| < 1"));
    }
    let x = y * p.q.powi(k as i64);
    let qv = p.qv();
    // transient growth before asymptotic decay costs ~ (a/(q|g|))^{j*} digits
    let j_star = ((qv / (p.a * p.b * x.abs())).abs().ln() / (1.0 / qv).ln()).max(0.0);
    let growth = (p.a / (qv * gamma.norm())).max(1.0).powf(j_star);
    if growth > 1e4 {
        return Err(Error::convergence(
            "minimal-solution series ill-conditioned this deep in the lattice",
        ));
    }
    let u1 = c(-qv / (p.a * x)) * gamma;
    let u2 = c(-qv * qv / (p.a * p.b * p.c * x)) * gamma;
    let l1 = c(-qv / (p.a * p.b * x));
    let l2 = c(-qv / (p.a * p.c * x));
    let mut pref = Scaled::ONE;
    for arg in [u1, u2, ag] {
        pref = pref.mul(qseries::qpoch_inf_scaled(arg, p.q).0);
    }
    for arg in [l1, l2, c(qv) * gamma * gamma] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, p.q);
        if v.to_complex().norm() < 1e-250 {
            return Err(Error::pole(format!("(x;q)_inf with x = {arg}")));
        }
        pref = pref.div(v);
    }
    let ser = phi_series(&[c(qv) * gamma / c(p.a), l1, l2], &[u1, u2], p.q, ag, DEFAULT_TOL)?;
    let v = pref.mul(Scaled::powi(ag, -(k as i64))).mul_complex(ser.value);
    Ok((
        v,
        ser.err_estimate * (v.to_complex().norm() / ser.value.norm().max(1e-300)) * growth,
        ser.n_terms,
    ))
}

/// Large-x series (valid for every regular `gamma` once `|q/(bcx)| < 1`):
/// prefactor `(-q/bcx, -qg/ax;q)_inf / (-q/abx, -q/acx;q)_inf` times
/// `(ag)^{-k} 3phi2(qg/a, bg, cg; -qg/ax, qg^2; q, -q/bcx)`.
fn phi_asym_alt(gamma: Complex, y: f64, k: i32, p: &Parameters) -> Result<(Scaled, f64, usize)> {
    let x = y * p.q.powi(k as i64);
    let qv = p.qv();
    let arg = c(-qv / (p.b * p.c * x));
    if arg.norm() > ROUTE_CUT {
        return Err(Error::domain("large-x series needs |q/(bcx)| < 1"));
    }
    let u1 = c(-qv / (p.a * x)) * gamma;
    let mut pref = qseries::qpoch_inf_scaled(c(-qv / (p.b * p.c * x)), p.q).0;
    pref = pref.mul(qseries::qpoch_inf_scaled(u1, p.q).0);
    for a in [c(-qv / (p.a * p.b * x)), c(-qv / (p.a * p.c * x))] {
        let (v, _, _) = qseries::qpoch_inf_scaled(a, p.q);
        if v.to_complex().norm() < 1e-250 {
            return Err(Error::pole(format!("(x;q)_inf with x = {a}")));
        }
        pref = pref.div(v);
    }
    let ser = phi_series(
        &[c(qv) * gamma / c(p.a), c(p.b) * gamma, c(p.c) * gamma],
        &[u1, c(qv) * gamma * gamma],
        p.q,
        arg,
        DEFAULT_TOL,
    )?;
    let ag = c(p.a) * gamma;
    let v = pref.mul(Scaled::powi(ag, -(k as i64))).mul_complex(ser.value);
    Ok((
        v,
        ser.err_estimate * (v.to_complex().norm() / ser.value.norm().max(1e-300)),
        ser.n_terms,
    ))
}

/// Scaled evaluation of `Phi^y_gamma(y q^k)` with route selection and the
/// paper's recurrence prescription for the region no series reaches.
fn phi_asym_scaled(gamma: Complex, y: f64, k: i32, p: &Parameters) -> Result<(Scaled, f64, usize)> {
    check_not_s_sing_plus(gamma, p)?;
    let qv = p.qv();
    let x = y * p.q.powi(k as i64);
    if (qv / (p.b * p.c * x)).abs() <= ROUTE_CUT {
        return phi_asym_alt(gamma, y, k, p);
    }
    if let Ok(v) = phi_asym_phib(gamma, y, k, p) {
        return Ok(v);
    }
    // propagate downward in x from two seeds in the large-x zone; this is the
    // stable direction for the minimal solution
    let mut k_seed = k;
    while (qv / (p.b * p.c * y * p.q.powi(k_seed as i64))).abs() > 0.8 * ROUTE_CUT {
        k_seed -= 1;
        if k_seed < k - 4000 {
            return Err(Error::convergence("no seed region for Phi recurrence"));
        }
    }
    let m = mu(gamma, p)?;
    let mut f_out = phi_asym_alt(gamma, y, k_seed - 1, p)?; // f(x/q)
    let mut f_x = phi_asym_alt(gamma, y, k_seed, p)?; // f(x)
    let mut err = f_out.1 + f_x.1;
    let mut kk = k_seed;
    while kk < k {
        let xx = y * p.q.powi(kk as i64);
        let a = coeff_a(xx, p)?;
        let b = coeff_b(xx, p)?;
        if a.abs() < 1e-300 {
            return Err(Error::domain("recurrence hit A(x) = 0"));
        }
        // f(qx) = ((A + B + mu) f(x) - B f(x/q)) / A
        let nxt = f_x
            .0
            .mul_complex((c(a + b) + m) / c(a))
            .add(f_out.0.mul_complex(-c(b) / c(a)));
        err = err * ((a.abs() + b.abs() + m.norm()) / a.abs()).max(1.0)
            + 1e-15 * nxt.to_complex().norm();
        f_out = f_x;
        f_x = (nxt, err, f_out.2);
        kk += 1;
    }
    Ok(f_x)
}

/// Asymptotic solution `Phi^y_gamma(x)` at `x = y q^k` (default `y = z` via
/// [`phi_asym`]). Behaves like `(a gamma)^m` at `x = y q^{-m}` as `m -> inf`.
pub fn phi_asym_y(gamma: Complex, y: f64, k: i32, p: &Parameters) -> Result<SeriesResult> {
    if !(y > 0.0) {
        return Err(Error::domain("asymptotic solution needs a positive base"));
    }
    let (v, err, n) = phi_asym_scaled(gamma, y, k, p)?;
    Ok(SeriesResult {
        value: v.to_complex(),
        err_estimate: err,
        n_terms: n,
    })
}

/// `Phi_gamma = Phi^z_gamma` on the positive branch `x = z q^k`.
pub fn phi_asym(gamma: Complex, k: i32, p: &Parameters) -> Result<SeriesResult> {
    phi_asym_y(gamma, p.z, k, p)
}

/// The minimal solution on the negative axis, `Phi^-_gamma(-q^k)`; equals
/// `(qg/a, qg/b, qg/c;q)_inf / (q/ab, q/ac, qg^2;q)_inf * phi_gamma` there.
pub fn phi_minus(gamma: Complex, k: i32, p: &Parameters) -> Result<SeriesResult> {
    check_not_s_sing_plus(gamma, p)?;
    let ag = c(p.a) * gamma;
    if ag.norm() > ROUTE_CUT {
        return Err(Error::domain("Phi^- needs |gamma| < 1/a"));
    }
    let qv = p.qv();
    let x = -p.q.powi(k as i64);
    let u1 = c(-qv * qv / (p.a * p.b * p.c * x)) * gamma;
    let u2 = c(-qv / (p.a * x)) * gamma;
    let l1 = c(-qv / (p.a * p.b * x));
    let l2 = c(-qv / (p.a * p.c * x));
    let mut pref = Scaled::ONE;
    for arg in [u1, u2, ag] {
        pref = pref.mul(qseries::qpoch_inf_scaled(arg, p.q).0);
    }
    for arg in [l1, l2, c(qv) * gamma * gamma] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, p.q);
        if v.to_complex().norm() < 1e-250 {
            return Err(Error::pole(format!("(x;q)_inf with x = {arg}")));
        }
        pref = pref.div(v);
    }
    let ser = phi_series(&[c(qv) * gamma / c(p.a), l1, l2], &[u1, u2], p.q, ag, DEFAULT_TOL)?;
    let v = pref.mul(Scaled::powi(ag, -(k as i64))).mul_complex(ser.value);
    Ok(SeriesResult {
        value: v.to_complex(),
        err_estimate: ser.err_estimate * (v.to_complex().norm() / ser.value.norm().max(1e-300)),
        n_terms: ser.n_terms,
    })
}

/// The proportionality constant of `Phi^-_gamma = C phi_gamma` on the
/// negative branch: `C = (qg/a, qg/b, qg/c;q)_inf / (q/ab, q/ac, qg^2;q)_inf`.
pub fn phi_minus_prefactor(gamma: Complex, p: &Parameters) -> Result<Complex> {
    let qv = p.qv();
    let mut num = Scaled::ONE;
    for arg in [
        c(qv) * gamma / c(p.a),
        c(qv) * gamma / c(p.b),
        c(qv) * gamma / c(p.c),
    ] {
        num = num.mul(qseries::qpoch_inf_scaled(arg, p.q).0);
    }
    let mut den = Scaled::ONE;
    for arg in [
        c(qv / (p.a * p.b)),
        c(qv / (p.a * p.c)),
        c(qv) * gamma * gamma,
    ] {
        let (v, _, _) = qseries::qpoch_inf_scaled(arg, p.q);
        if v.to_complex().norm() < 1e-250 {
            return Err(Error::pole(format!("(x;q)_inf with x = {arg}")));
        }
        den = den.mul(v);
    }
    Ok(num.div(den).to_complex())
}

/// The extension of the asymptotic solution to the whole lattice,
/// `Phi_gamma = K(gamma) phi_gamma + Ktilde(gamma) psi_gamma`, continuously
/// differentiable at the origin. Near `S_pol^+` (where `K`, `Ktilde` have
/// simple poles with cancelling residues) the analytic limit is assembled
/// from the residues, the regularized coefficient `M_n`, and gamma
/// derivatives of `phi` and `psi`.
pub fn phi_asym_extended(gamma: Complex, pt: LatticePoint, p: &Parameters) -> Result<Complex> {
    check_not_s_sing_plus(gamma, p)?;
    let x = pt.value(p);
    let (dist, n) = SpectralParam::dist_s_pol_plus(gamma, p);
    if dist < POL_SWITCH {
        return phi_asym_extended_at_pol(n, pt, p);
    }
    let (kc, kt) = cfun::k_coefficients(gamma, p)?;
    let v = kc * phi_at(gamma, x, p)?.value + kt * psi_at(gamma, x, p)?.value;
    Ok(v)
}

/// Richardson-extrapolated central difference of a function of gamma.
fn gamma_derivative(
    mut f: impl FnMut(Complex) -> Result<Complex>,
    g0: Complex,
    h: f64,
) -> Result<Complex> {
    let d = |f: &mut dyn FnMut(Complex) -> Result<Complex>, hh: f64| -> Result<Complex> {
        Ok((f(g0 + c(hh))? - f(g0 - c(hh))?) / c(2.0 * hh))
    };
    let d1 = d(&mut f, h)?;
    let d2 = d(&mut f, h / 2.0)?;
    Ok((c(4.0) * d2 - d1) / c(3.0))
}

/// Even-part extrapolation of a function with a removable singularity at
/// `g0`: averages at `g0 +- h` kill the simple pole, one Richardson step
/// removes the `h^2` term.
fn regularized_value(
    mut f: impl FnMut(Complex) -> Result<Complex>,
    g0: Complex,
    h: f64,
) -> Result<Complex> {
    let avg = |f: &mut dyn FnMut(Complex) -> Result<Complex>, hh: f64| -> Result<Complex> {
        Ok((f(g0 + c(hh))? + f(g0 - c(hh))?) / c(2.0))
    };
    let a1 = avg(&mut f, h)?;
    let a2 = avg(&mut f, h / 2.0)?;
    Ok((c(4.0) * a2 - a1) / c(3.0))
}

/// `Phi_{gamma_n}` at `gamma_n = a q^n` via the analytic limit:
/// `Res K * d phi/d gamma + M_n phi + Res Ktilde * d psi/d gamma`.
fn phi_asym_extended_at_pol(n: u32, pt: LatticePoint, p: &Parameters) -> Result<Complex> {
    let gn = c(p.a * p.q.powi(n as i64));
    let x = pt.value(p);
    let h = 1e-5 * gn.norm();
    let res_k = regularized_value(|g| Ok((g - gn) * cfun::k_coefficients(g, p)?.0), gn, h)?;
    let res_kt = regularized_value(|g| Ok((g - gn) * cfun::k_coefficients(g, p)?.1), gn, h)?;
    // M_n = lim (K + Ktilde/c_n) with c_n the phi/psi proportionality of the
    // polynomial case; the simple poles of K and Ktilde cancel in this
    // combination, leaving the coefficient of phi_{gamma_n}
    let cn = big_qjacobi_psi_ratio(n, p)?;
    let m_n = regularized_value(
        |g| {
            let (kc, kt) = cfun::k_coefficients(g, p)?;
            Ok(kc + kt / cn)
        },
        gn,
        h,
    )?;
    let dphi = gamma_derivative(|g| Ok(phi_at(g, x, p)?.value), gn, h)?;
    let dpsi = gamma_derivative(|g| Ok(psi_at(g, x, p)?.value), gn, h)?;
    let phin = phi_at(gn, x, p)?.value;
    Ok(res_k * dphi + m_n * phin + res_kt * dpsi)
}

// ---------------------------------------------------------------------------
// big q-Jacobi polynomials
// ---------------------------------------------------------------------------

/// Big q-Jacobi polynomial of degree `n`: `phi_{gamma_n}(x)` at
/// `gamma_n = a q^n`, through the terminating representation
/// `(qa/c;q)_n/(ac;q)_n (-c/a)^n q^{-n(n+1)/2}
///  3phi2(q^{-n}, -abx, q^n a^2; ab, qa/c; q, q)`. Accepts arbitrary
/// complex `x`.
pub fn big_qjacobi_poly(n: u32, x: Complex, p: &Parameters) -> Result<Complex> {
    let q = p.q;
    let qv = q.get();
    let den = qseries::qpoch_finite(c(p.a * p.c), q, n);
    if den.norm() < 1e-250 {
        return Err(Error::domain("(ac;q)_n vanishes"));
    }
    let pref = Scaled::from_complex(qseries::qpoch_finite(c(qv * p.a / p.c), q, n))
        .div(Scaled::from_complex(den))
        .mul(Scaled::powi(c(-p.c / p.a), n as i64))
        .mul(Scaled::powi(c(qv), -((n as i64) * (n as i64 + 1)) / 2));
    let ser = phi_series(
        &[
            c(q.powi(-(n as i64))),
            -c(p.a * p.b) * x,
            c(p.a * p.a * q.powi(n as i64)),
        ],
        &[c(p.a * p.b), c(qv * p.a / p.c)],
        q,
        c(qv),
        DEFAULT_TOL,
    )?;
    Ok(pref.mul_complex(ser.value).to_complex())
}

/// Proportionality constant `c_n` in
/// `phi_{gamma_n} = c_n psi_{gamma_n}`:
/// `c_n = (qa/b, qa/c;q)_n / (ab, ac;q)_n (bc/q)^n`.
pub fn big_qjacobi_psi_ratio(n: u32, p: &Parameters) -> Result<Complex> {
    let q = p.q;
    let qv = q.get();
    let den = qseries::qpoch_finite(c(p.a * p.b), q, n) * qseries::qpoch_finite(c(p.a * p.c), q, n);
    if den.norm() < 1e-250 {
        return Err(Error::domain("(ab;q)_n or (ac;q)_n vanishes"));
    }
    let num = qseries::qpoch_finite(c(qv * p.a / p.b), q, n)
        * qseries::qpoch_finite(c(qv * p.a / p.c), q, n);
    Ok(num / den * Scaled::powi(c(p.b * p.c / qv), n as i64).to_complex())
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
