//! The Plancherel measure of the operator (continuous density on the unit
//! circle plus discrete atoms), the Green kernel and resolvent, and Stone's
//! formula checks.
//!
//! The discrete atoms sit at the zeros of `gamma -> c(1/gamma)` in the
//! punctured unit disc: a finite family `1/(q^k e)` for `e` in `{a,b,c}`
//! with `q^k e > 1`, and a family `-abcz/q^{k+1}` accumulating at the
//! origin. Masses come in closed form from the Askey-Wilson residue
//! calculus and are cross-checked against numerical contour residues.

use crate::cfun;
use crate::eigen;
use crate::error::{Error, Result};
use crate::lattice::{self, Branch, LatticeFunction, LatticePoint, Parameters};
use crate::qseries::{self, QBase};
use crate::scaled::Scaled;
use crate::Complex;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

fn c(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

/// Which parameter generates a positive-family atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamLabel {
    A,
    B,
    C,
}

impl ParamLabel {
    pub fn value(self, p: &Parameters) -> f64 {
        match self {
            ParamLabel::A => p.a,
            ParamLabel::B => p.b,
            ParamLabel::C => p.c,
        }
    }

    /// The other two parameter values.
    fn partners(self, p: &Parameters) -> (f64, f64) {
        match self {
            ParamLabel::A => (p.b, p.c),
            ParamLabel::B => (p.a, p.c),
            ParamLabel::C => (p.a, p.b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamLabel::A => "a",
            ParamLabel::B => "b",
            ParamLabel::C => "c",
        }
    }
}

/// Location family of a discrete atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomFamily {
    /// `gamma = 1/(q^k e)` with `q^k e > 1`, `k >= 0`.
    Pos { e: ParamLabel, k: u32 },
    /// `gamma = -abcz/q^{k+1}` with `abcz/q^{k+1} < 1`, `k` any integer.
    Neg { k: i32 },
}

/// A point mass of the Plancherel measure.
#[derive(Clone, Copy, Debug)]
pub struct DiscreteAtom {
    pub family: AtomFamily,
    /// Spectral parameter in the punctured unit disc (real).
    pub gamma: f64,
    /// Eigenvalue `mu(gamma)`.
    pub mu_value: f64,
    /// Point mass `nu({gamma})`; strictly positive once filled.
    pub mass: f64,
}

/// Enumerate the atom sites (masses unfilled, reported as zero).
/// Negative-family sites are truncated once their closed-form masses drop
/// below 1e-300; the dropped tail decays super-geometrically.
pub fn discrete_set_s(p: &Parameters) -> Result<Vec<DiscreteAtom>> {
    let mut out = Vec::new();
    let mu_of = |g: f64| -1.0 - p.a * p.a + p.a * (g + 1.0 / g);
    for e in [ParamLabel::A, ParamLabel::B, ParamLabel::C] {
        let ev = e.value(p);
        let mut k = 0u32;
        while p.q.powi(k as i64) * ev > 1.0 {
            let gamma = 1.0 / (p.q.powi(k as i64) * ev);
            out.push(DiscreteAtom {
                family: AtomFamily::Pos { e, k },
                gamma,
                mu_value: mu_of(gamma),
                mass: 0.0,
            });
            k += 1;
        }
    }
    let abcz = p.a * p.b * p.c * p.z;
    // largest admissible k: q^{k+1} > abcz
    let mut k = (abcz.ln() / p.qv().ln()).floor() as i32 + 2;
    while !(p.q.powi((k + 1) as i64) > abcz) {
        k -= 1;
        if k < -100_000 {
            return Err(Error::domain("no admissible negative-family atoms"));
        }
    }
    loop {
        let gamma = -abcz / p.q.powi((k + 1) as i64);
        if gamma.abs() < 1e-280 {
            break;
        }
        let mass = discrete_mass_neg(k, p)?;
        if mass < 1e-300 {
            break;
        }
        out.push(DiscreteAtom {
            family: AtomFamily::Neg { k },
            gamma,
            mu_value: mu_of(gamma),
            mass: 0.0,
        });
        k -= 1;
    }
    Ok(out)
}

/// The positive constant `M = (1/K) (ab, ac;q)_inf^2 theta(-bcz, -bcz)`.
pub fn const_m(p: &Parameters) -> Result<f64> {
    let k = lattice::const_k(p)?;
    let q = p.q;
    let (poch, _, _) = qseries::qpoch_inf_scaled(c(p.a * p.b), q);
    let (poch2, _, _) = qseries::qpoch_inf_scaled(c(p.a * p.c), q);
    let th = qseries::theta_multi_scaled(&[c(-p.b * p.c * p.z), c(-p.b * p.c * p.z)], q)?;
    Ok(poch.mul(poch).mul(poch2).mul(poch2).mul(th).to_complex().re / k)
}

/// Second displayed route:
/// `M = (ab, ac;q)_inf^2 theta(-abz, -acz, -bcz) / ((1-q) z theta(-1/z))`.
pub fn const_m_alt(p: &Parameters) -> Result<f64> {
    let q = p.q;
    let (poch, _, _) = qseries::qpoch_inf_scaled(c(p.a * p.b), q);
    let (poch2, _, _) = qseries::qpoch_inf_scaled(c(p.a * p.c), q);
    let num = qseries::theta_multi_scaled(
        &[c(-p.a * p.b * p.z), c(-p.a * p.c * p.z), c(-p.b * p.c * p.z)],
        q,
    )?;
    let den = qseries::theta_multi_scaled(&[c(-1.0 / p.z)], q)?;
    Ok(poch.mul(poch).mul(poch2).mul(poch2).mul(num).div(den).to_complex().re
        / ((1.0 - q.get()) * p.z))
}

/// Askey-Wilson weight
/// `Delta(x; t) = (x^2, 1/x^2;q)_inf / prod_j (t_j x, t_j/x;q)_inf`.
pub fn aw_weight(x: Complex, t: [f64; 4], q: QBase) -> Result<Complex> {
    if x.norm() == 0.0 {
        return Err(Error::domain("Delta(x) requires x != 0"));
    }
    let mut num = qseries::qpoch_inf_scaled(x * x, q).0;
    num = num.mul(qseries::qpoch_inf_scaled((x * x).inv(), q).0);
    let mut den = Scaled::ONE;
    for tj in t {
        den = den.mul(qseries::qpoch_inf_scaled(c(tj) * x, q).0);
        den = den.mul(qseries::qpoch_inf_scaled(c(tj) / x, q).0);
    }
    if den.to_complex().norm() < 1e-280 {
        return Err(Error::pole("Askey-Wilson denominator product vanishes"));
    }
    Ok(num.div(den).to_complex())
}

/// Residue of `Delta(x)/x` at the simple pole `x = t_i q^k`:
/// `(e^{-2};q)_inf / (q, ef, f/e, eg, g/e, eh, h/e;q)_inf
///  * (e^2, ef, eg, eh;q)_k / (q, qe/f, qe/g, qe/h;q)_k
///  * (1 - e^2 q^{2k})/(1 - e^2) * (q/(efgh))^k`.
pub fn aw_residue(t: [f64; 4], pole: usize, k: u32, q: QBase) -> Result<f64> {
    if pole >= 4 {
        return Err(Error::domain("pole index out of range"));
    }
    let e = t[pole];
    let others: Vec<f64> = (0..4).filter(|&i| i != pole).map(|i| t[i]).collect();
    let (f, g, h) = (others[0], others[1], others[2]);
    // simple-pole requirement: no other pole family may collide
    for &o in &others {
        let r = (e / o).abs().ln() / q.get().ln();
        if (r - r.round()).abs() < 1e-10 {
            return Err(Error::domain(
                "pole is not simple: parameter ratio lies on a q-power",
            ));
        }
    }
    let mut num = qseries::qpoch_inf_scaled(c(1.0 / (e * e)), q).0;
    let mut den = Scaled::ONE;
    for arg in [q.get(), e * f, f / e, e * g, g / e, e * h, h / e] {
        den = den.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    for arg in [e * e, e * f, e * g, e * h] {
        num = num.mul_complex(qseries::qpoch_finite(c(arg), q, k));
    }
    for arg in [q.get(), q.get() * e / f, q.get() * e / g, q.get() * e / h] {
        den = den.mul_complex(qseries::qpoch_finite(c(arg), q, k));
    }
    let ratio = (1.0 - e * e * q.powi(2 * k as i64)) / (1.0 - e * e);
    let pw = Scaled::powi(c(q.get() / (e * f * g * h)), k as i64);
    Ok(num.div(den).mul(pw).to_complex().re * ratio)
}

/// Closed-form mass of a positive-family atom `gamma = 1/(q^k e)`.
fn discrete_mass_pos(e: ParamLabel, k: u32, p: &Parameters) -> Result<f64> {
    let q = p.q;
    let qv = q.get();
    let m = const_m(p)?;
    let ev = e.value(p);
    let (f, g) = e.partners(p);
    let mut num = qseries::qpoch_inf_scaled(c(1.0 / (ev * ev)), q).0;
    let mut den = Scaled::ONE;
    for arg in [qv, ev * f, f / ev, ev * g, g / ev] {
        den = den.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    den = den.mul(qseries::theta_multi_scaled(
        &[c(-f * g * p.z), c(-ev * ev * f * g * p.z)],
        q,
    )?);
    for arg in [ev * ev, ev * f, ev * g] {
        num = num.mul_complex(qseries::qpoch_finite(c(arg), q, k));
    }
    for arg in [qv, qv * ev / f, qv * ev / g] {
        den = den.mul_complex(qseries::qpoch_finite(c(arg), q, k));
    }
    let ratio = (1.0 - ev * ev * q.powi(2 * k as i64)) / (1.0 - ev * ev);
    // (-q^{(k+1)/2}/(fg))^k = (-1)^k q^{k(k+1)/2} (fg)^{-k}
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let pw = Scaled::powi(c(qv), (k as i64) * (k as i64 + 1) / 2)
        .mul(Scaled::powi(c(f * g), -(k as i64)));
    Ok(m * num.div(den).mul(pw).to_complex().re * ratio * sign)
}

/// Closed-form mass of a negative-family atom `gamma = -abcz/q^{k+1}`,
/// from the Askey-Wilson residue reflected through the unit circle:
/// `M (q^{2k} - (abcz)^2/q^2)
///  * (-q/abz, -q/acz, -q/bcz;q)_k / (-q^2/a^2bcz, -q^2/ab^2cz, -q^2/abc^2z;q)_k
///  * q^{k(k+3)/2} (a^2b^2c^2 z)^{-k}
///  / (q, q, -q/abz, -q/acz, -q/bcz, -a^2bcz/q, -ab^2cz/q, -abc^2z/q;q)_inf`.
fn discrete_mass_neg(k: i32, p: &Parameters) -> Result<f64> {
    let q = p.q;
    let qv = q.get();
    let m = const_m(p)?;
    let (a, b, cc, z) = (p.a, p.b, p.c, p.z);
    let abcz = a * b * cc * z;
    let mut den = Scaled::ONE;
    for arg in [
        qv,
        qv,
        -qv / (a * b * z),
        -qv / (a * cc * z),
        -qv / (b * cc * z),
        -a * a * b * cc * z / qv,
        -a * b * b * cc * z / qv,
        -a * b * cc * cc * z / qv,
    ] {
        den = den.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    let mut kpart = Scaled::ONE;
    for arg in [-qv / (a * b * z), -qv / (a * cc * z), -qv / (b * cc * z)] {
        kpart = kpart.mul(qseries::qpoch_int_scaled(c(arg), q, k as i64)?);
    }
    for arg in [
        -qv * qv / (a * a * b * cc * z),
        -qv * qv / (a * b * b * cc * z),
        -qv * qv / (a * b * cc * cc * z),
    ] {
        kpart = kpart.div(qseries::qpoch_int_scaled(c(arg), q, k as i64)?);
    }
    // band factor in scaled form: q^{2k} can overflow for very negative k
    let band = Scaled::powi(c(qv), 2 * k as i64)
        .add(Scaled::from_f64(-abcz * abcz / (qv * qv)));
    let pw = Scaled::powi(c(qv), (k as i64) * (k as i64 + 3) / 2)
        .mul(Scaled::powi(c(a * a * b * b * cc * cc * z), -(k as i64)));
    Ok(m * kpart.div(den).mul(pw).mul(band).to_complex().re)
}

/// Mass of an atom by its closed form.
pub fn discrete_mass(atom: &DiscreteAtom, p: &Parameters) -> Result<f64> {
    let mass = match atom.family {
        AtomFamily::Pos { e, k } => discrete_mass_pos(e, k, p)?,
        AtomFamily::Neg { k } => discrete_mass_neg(k, p)?,
    };
    if !(mass > 0.0) {
        return Err(Error::domain(format!(
            "atom mass must be positive, got {mass} at gamma = {}",
            atom.gamma
        )));
    }
    Ok(mass)
}

/// Mass via the defining residue,
/// `(1/K) Res_{gamma = gt} (-1/(gamma c(gamma) c(1/gamma)))`, computed on a
/// circular contour (64-point trapezoid; spectrally accurate on circles).
pub fn discrete_mass_residue(atom: &DiscreteAtom, p: &Parameters) -> Result<f64> {
    let gt = atom.gamma;
    let kconst = lattice::const_k(p)?;
    // keep the contour clear of the neighbouring poles
    let radius = 1e-3f64
        .min(gt.abs() * 1e-2)
        .min(gt.abs() * (1.0 - p.qv()) * 0.4);
    let n = 64;
    let mut sum = Complex::new(0.0, 0.0);
    for j in 0..n {
        let t = 2.0 * core::f64::consts::PI * (j as f64) / (n as f64);
        let w = Complex::from_polar(radius, t);
        let gamma = c(gt) + w;
        let v = -(gamma * cfun::c_function(gamma, p)? * cfun::c_function(gamma.inv(), p)?).inv();
        sum += v * w;
    }
    Ok(sum.re / (n as f64) / kconst)
}

/// Continuous Plancherel density with respect to `d theta` on `[0, pi]`:
/// `1/(2 pi K |c(e^{i theta})|^2)`. The full-circle form
/// `d nu = (4 pi i K)^{-1} d gamma / (c(gamma) c(1/gamma) gamma)` integrates
/// W-invariant functions identically to this convention. Removable points
/// (circle zeros of a numerator factor) are evaluated by nudging theta.
pub fn continuous_density(theta: f64, p: &Parameters) -> Result<f64> {
    let kconst = lattice::const_k(p)?;
    let eval = |th: f64| -> Result<f64> {
        let gamma = Complex::from_polar(1.0, th);
        let cc = (cfun::c_function(gamma, p)? * cfun::c_function(gamma.inv(), p)?).re;
        Ok(1.0 / (2.0 * core::f64::consts::PI * kconst * cc))
    };
    match eval(theta) {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => {
            // removable singularity: average the two-sided nudge
            let lo = eval((theta - 1e-6).max(1e-9)).unwrap_or(0.0);
            let hi = eval((theta + 1e-6).min(core::f64::consts::PI - 1e-9)).unwrap_or(0.0);
            Ok(0.5 * (lo + hi).max(0.0))
        }
    }
}

/// The Plancherel measure: constants, atoms with masses, and the continuous
/// density sampled on a uniform closed grid in theta over `[0, pi]`.
#[derive(Clone, Debug)]
pub struct SpectralMeasure {
    pub params: Parameters,
    pub k_const: f64,
    pub m_const: f64,
    pub atoms: Vec<DiscreteAtom>,
    /// Uniform grid `theta_j = j pi / n`, `j = 0..=n`.
    pub thetas: Vec<f64>,
    pub density: Vec<f64>,
    /// Bound on the total mass of dropped negative-family atoms.
    pub dropped_tail: f64,
}

impl SpectralMeasure {
    /// Build with the default grid resolution (1024 panels, doubled until
    /// the total continuous mass moves by less than 1e-8).
    pub fn build(p: &Parameters) -> Result<Self> {
        Self::build_with(p, 1024)
    }

    pub fn build_with(p: &Parameters, n0: usize) -> Result<Self> {
        let k_const = lattice::const_k(p)?;
        let m_const = const_m(p)?;
        let mut atoms = discrete_set_s(p)?;
        for atom in atoms.iter_mut() {
            atom.mass = discrete_mass(atom, p)?;
        }
        // super-geometric decay: the dropped tail is below the last mass kept
        let dropped_tail = atoms
            .iter()
            .filter(|a| matches!(a.family, AtomFamily::Neg { .. }))
            .last()
            .map(|a| a.mass.min(1e-280))
            .unwrap_or(0.0);
        let mut n = n0.max(64);
        let mut prev_mass = f64::NAN;
        loop {
            let thetas: Vec<f64> = (0..=n)
                .map(|j| core::f64::consts::PI * (j as f64) / (n as f64))
                .collect();
            let mut density = Vec::with_capacity(n + 1);
            for &th in &thetas {
                density.push(continuous_density(th, p)?);
            }
            let mass = trapezoid(&thetas, &density);
            if (mass - prev_mass).abs() < 1e-8 || n >= 16384 {
                return Ok(SpectralMeasure {
                    params: *p,
                    k_const,
                    m_const,
                    atoms,
                    thetas,
                    density,
                    dropped_tail,
                });
            }
            prev_mass = mass;
            n *= 2;
        }
    }

    /// Total mass of the continuous part.
    pub fn continuous_mass(&self) -> f64 {
        trapezoid(&self.thetas, &self.density)
    }

    /// Trapezoid quadrature of `values(theta) * density(theta)` over
    /// `[0, pi]`; `values` must be sampled on `self.thetas`.
    pub fn integrate_continuous(&self, values: &[Complex]) -> Complex {
        debug_assert_eq!(values.len(), self.thetas.len());
        let n = self.thetas.len() - 1;
        let h = core::f64::consts::PI / (n as f64);
        let mut acc = Complex::new(0.0, 0.0);
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            acc += values[j] * c(self.density[j] * w);
        }
        acc * c(h)
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// The `|gamma| < 1` solution of `mu(gamma) = mu` (the root pair multiplies
/// to 1).
pub fn gamma_from_mu(mu: Complex, p: &Parameters) -> Result<Complex> {
    let s = mu + c(1.0 + p.a * p.a);
    let disc = (s * s - c(4.0 * p.a * p.a)).sqrt();
    let g1 = (s + disc) / c(2.0 * p.a);
    let g2 = (s - disc) / c(2.0 * p.a);
    let g = if g1.norm() < g2.norm() { g1 } else { g2 };
    if (g.norm() - 1.0).abs() < 1e-12 {
        return Err(Error::domain(
            "mu lies on the continuous band: no strictly minimal solution",
        ));
    }
    Ok(g)
}

/// Green kernel `K_gamma(x, y) = Phi(max) phi(min) / W(gamma)`.
pub fn green_kernel(
    gamma: Complex,
    x: LatticePoint,
    y: LatticePoint,
    p: &Parameters,
) -> Result<Complex> {
    let w = cfun::w_gamma(gamma, p)?;
    let (lo, hi) = if x.value(p) <= y.value(p) { (x, y) } else { (y, x) };
    let phi_lo = eigen::phi(gamma, lo, p)?.value;
    let phi_hi = big_phi_at(gamma, hi, p)?;
    Ok(phi_hi * phi_lo / w)
}

/// The extended asymptotic solution at a lattice point: series routes on the
/// positive branch, the `K phi + Ktilde psi` extension on the negative one.
fn big_phi_at(gamma: Complex, pt: LatticePoint, p: &Parameters) -> Result<Complex> {
    match pt.branch {
        Branch::Pos => Ok(eigen::phi_asym(gamma, pt.k, p)?.value),
        Branch::Neg => eigen::phi_asym_extended(gamma, pt, p),
    }
}

/// Resolvent application `G_f(., gamma) = (L - mu(gamma))^{-1} f`:
/// `G_f(x) = W(gamma)^{-1} [Phi(x) int_{-1}^{x} f phi d_q/p
///                          + phi(x) int_{x}^{inf(z)} f Phi d_q/p]`.
pub fn green_apply(f: &LatticeFunction, gamma: Complex, p: &Parameters) -> Result<LatticeFunction> {
    let m = eigen::mu(gamma, p)?;
    if m.im.abs() < 1e-12 * (1.0 + m.norm()) {
        return Err(Error::domain("resolvent requires mu(gamma) off the real axis"));
    }
    if gamma.norm() >= 1.0 {
        return Err(Error::domain("resolvent parametrized by |gamma| < 1"));
    }
    let w = cfun::w_gamma(gamma, p)?;
    let pts = f.window.points_ascending();
    let n = pts.len();
    let mut phi_v = Vec::with_capacity(n);
    let mut big_v = Vec::with_capacity(n);
    let mut wt = Vec::with_capacity(n);
    for &pt in &pts {
        phi_v.push(eigen::phi(gamma, pt, p)?.value);
        big_v.push(big_phi_at(gamma, pt, p)?);
        wt.push(lattice::point_weight(pt, p)?);
    }
    // prefix sums of f phi w (y <= x) and suffix sums of f Phi w (y > x)
    let mut out = LatticeFunction::zeros(f.window);
    let mut prefix = Complex::new(0.0, 0.0);
    let mut suffix = Complex::new(0.0, 0.0);
    for i in 0..n {
        suffix += f.get(pts[i])? * big_v[i] * c(wt[i]);
    }
    for i in 0..n {
        let fi = f.get(pts[i])?;
        prefix += fi * phi_v[i] * c(wt[i]);
        suffix -= fi * big_v[i] * c(wt[i]);
        out.set(pts[i], (big_v[i] * prefix + phi_v[i] * suffix) / w);
    }
    Ok(out)
}

/// `<(L - mu)^{-1} f, g>` for finitely supported data, evaluating the
/// eigenfunctions only on the union of supports.
pub fn resolvent_matrix_element(
    f: &LatticeFunction,
    g: &LatticeFunction,
    mu: Complex,
    p: &Parameters,
) -> Result<Complex> {
    let gamma = gamma_from_mu(mu, p)?;
    let w = cfun::w_gamma(gamma, p)?;
    let pts = f.window.points_ascending();
    let mut support = Vec::new();
    for &pt in &pts {
        if f.get(pt)?.norm() > 0.0 || g.get(pt)?.norm() > 0.0 {
            support.push(pt);
        }
    }
    let n = support.len();
    let mut phi_v = Vec::with_capacity(n);
    let mut big_v = Vec::with_capacity(n);
    let mut wt = Vec::with_capacity(n);
    for &pt in &support {
        phi_v.push(eigen::phi(gamma, pt, p)?.value);
        big_v.push(big_phi_at(gamma, pt, p)?);
        wt.push(lattice::point_weight(pt, p)?);
    }
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..n {
        let gi = g.get(support[i])?;
        if gi.norm() == 0.0 {
            continue;
        }
        let mut val = Complex::new(0.0, 0.0);
        for j in 0..n {
            let fj = f.get(support[j])?;
            if fj.norm() == 0.0 {
                continue;
            }
            let kern = if j <= i {
                big_v[i] * phi_v[j]
            } else {
                phi_v[i] * big_v[j]
            };
            val += kern * fj * c(wt[j]);
        }
        acc += val / w * gi.conj() * c(wt[i]);
    }
    Ok(acc)
}

/// Lattice inner product `<phi_{g1}, phi_{g2}>` of two atom eigenfunctions.
///
/// The doubly infinite positive-branch sum converges like `(g1 g2)^m`; the
/// truncated sum is completed by the exact geometric tail, which is what
/// makes the quadratic norms testable even for atoms close to the unit
/// circle.
pub fn atom_phi_inner(a1: &DiscreteAtom, a2: &DiscreteAtom, p: &Parameters) -> Result<Complex> {
    let g1 = c(a1.gamma);
    let g2 = c(a2.gamma);
    let rho = (a1.gamma * a2.gamma).abs();
    if !(rho < 1.0) {
        return Err(Error::domain("atom pair not square integrable"));
    }
    // depth where the geometric tail model is exact to machine precision
    let m_deep = 40.max((1e-8f64.ln() / rho.ln()).ceil() as i32);
    let mut acc = Complex::new(0.0, 0.0);
    for k in 0..=80 {
        let pt = LatticePoint::neg(k).unwrap();
        let w = lattice::point_weight(pt, p)?;
        acc += eigen::phi(g1, pt, p)?.value * eigen::phi(g2, pt, p)?.value.conj() * c(w);
    }
    let mut last = Complex::new(0.0, 0.0);
    for k in (-m_deep..=80).rev() {
        let pt = LatticePoint::pos(k);
        let w = lattice::point_weight(pt, p)?;
        last = eigen::phi(g1, pt, p)?.value * eigen::phi(g2, pt, p)?.value.conj() * c(w);
        acc += last;
    }
    // remaining tail: terms scale by exactly (g1 g2) per step up to O(q^m)
    let step = g1 * g2;
    acc += last * step / (c(1.0) - step);
    Ok(acc)
}

/// Forward transform value `<f, phi_gamma>` for finitely supported data.
pub fn forward_value(f: &LatticeFunction, gamma: Complex, p: &Parameters) -> Result<Complex> {
    let mut acc = Complex::new(0.0, 0.0);
    for (pt, v) in f.iter() {
        if v.norm() == 0.0 {
            continue;
        }
        let w = lattice::point_weight(pt, p)?;
        acc += v * eigen::phi(gamma, pt, p)?.value.conj() * c(w);
    }
    Ok(acc)
}

/// Stone's-formula spectral projection estimate for `(mu1, mu2)`: the left
/// entry is the epsilon-extrapolated double limit of the resolvent jump,
/// the right one the closed-form projection (continuous band integral plus
/// enclosed atoms).
pub fn stone_projection_check(
    f: &LatticeFunction,
    g: &LatticeFunction,
    mu1: f64,
    mu2: f64,
    eps_list: &[f64],
    measure: &SpectralMeasure,
) -> Result<(Complex, Complex)> {
    let p = &measure.params;
    if !(mu1 < mu2) {
        return Err(Error::domain("need mu1 < mu2"));
    }
    let band = (-(1.0 + p.a) * (1.0 + p.a), -(1.0 - p.a) * (1.0 - p.a));
    for edge in [band.0, band.1] {
        if (mu1 - edge).abs() < 1e-6 || (mu2 - edge).abs() < 1e-6 {
            return Err(Error::domain("projection interval touches a band end-point"));
        }
    }
    for atom in &measure.atoms {
        if (mu1 - atom.mu_value).abs() < 1e-6 || (mu2 - atom.mu_value).abs() < 1e-6 {
            return Err(Error::domain("projection interval touches a point mass"));
        }
    }
    if eps_list.len() != 3 {
        return Err(Error::domain("epsilon extrapolation expects three levels"));
    }

    // lhs: (2 pi i)^{-1} int (R(mu+ie) - R(mu-ie)) dmu, composite Simpson
    let n_quad = 1024usize;
    let mut lhs_eps = Vec::with_capacity(3);
    for &eps in eps_list {
        let h = (mu2 - mu1) / (n_quad as f64);
        let mut acc = Complex::new(0.0, 0.0);
        for j in 0..=n_quad {
            let mus = mu1 + h * (j as f64);
            let jump = resolvent_matrix_element(f, g, Complex::new(mus, eps), p)?
                - resolvent_matrix_element(f, g, Complex::new(mus, -eps), p)?;
            let sw = if j == 0 || j == n_quad {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += jump * c(sw);
        }
        let integral = acc * c(h / 3.0);
        lhs_eps.push(integral / Complex::new(0.0, 2.0 * core::f64::consts::PI));
    }
    // kill the O(eps) and O(eps^2) terms (the levels halve)
    let s1 = c(2.0) * lhs_eps[1] - lhs_eps[0];
    let s2 = c(2.0) * lhs_eps[2] - lhs_eps[1];
    let lhs = (c(4.0) * s2 - s1) / c(3.0);

    // rhs: continuous overlap with the band plus enclosed atoms
    let mut rhs = Complex::new(0.0, 0.0);
    let lo = mu1.max(band.0);
    let hi = mu2.min(band.1);
    if lo < hi {
        // theta decreases as mu increases: mu = -1 - a^2 + 2a cos(theta)
        let th_of = |m: f64| ((m + 1.0 + p.a * p.a) / (2.0 * p.a)).clamp(-1.0, 1.0).acos();
        let th_hi = th_of(lo);
        let th_lo = th_of(hi);
        let n = 512usize;
        let h = (th_hi - th_lo) / (n as f64);
        let mut acc = Complex::new(0.0, 0.0);
        for j in 0..=n {
            let th = th_lo + h * (j as f64);
            let gamma = Complex::from_polar(1.0, th);
            let val = forward_value(f, gamma, p)? * forward_value(g, gamma, p)?.conj();
            let sw = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += val * c(continuous_density(th, p)? * sw);
        }
        rhs += acc * c(h / 3.0);
    }
    for atom in &measure.atoms {
        if atom.mu_value > mu1 && atom.mu_value < mu2 {
            let gt = c(atom.gamma);
            rhs += forward_value(f, gt, p)? * forward_value(g, gt, p)?.conj() * c(atom.mass);
        }
    }
    Ok((lhs, rhs))
}
