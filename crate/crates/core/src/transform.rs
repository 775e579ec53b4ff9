//! The forward/inverse big q-Jacobi function transform, Plancherel
//! verification, dual orthogonality (continuous dual q^{-1}-Hahn system),
//! and the compact big q-Jacobi polynomial case.

use crate::eigen;
use crate::error::{Error, Result};
use crate::lattice::{self, coeff_a, coeff_b, LatticeFunction, LatticePoint, Parameters};
use crate::qseries::{self, QBase};
use crate::scaled::Scaled;
use crate::spectral::{self, SpectralMeasure};
use crate::Complex;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

fn c(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

/// A W-invariant spectral-side function: samples on the measure's theta grid
/// plus one value per discrete atom.
#[derive(Clone, Debug)]
pub struct SpectralFunction {
    pub continuous: Vec<Complex>,
    pub atom_values: Vec<Complex>,
}

/// Forward transform at one spectral point, `(F f)(gamma) = <f, phi_gamma>`.
/// `f` must vanish towards lattice infinity (finite support or decaying
/// tail); W-invariance `F f(gamma) = F f(1/gamma)` is inherited from `phi`.
pub fn forward(f: &LatticeFunction, gamma: Complex, p: &Parameters) -> Result<Complex> {
    spectral::forward_value(f, gamma, p)
}

/// Forward transform sampled on the grid and atoms of a measure.
pub fn forward_spectral(f: &LatticeFunction, m: &SpectralMeasure) -> Result<SpectralFunction> {
    let p = &m.params;
    let mut continuous = Vec::with_capacity(m.thetas.len());
    for &th in &m.thetas {
        continuous.push(forward(f, Complex::from_polar(1.0, th), p)?);
    }
    let mut atom_values = Vec::with_capacity(m.atoms.len());
    for atom in &m.atoms {
        atom_values.push(forward(f, c(atom.gamma), p)?);
    }
    Ok(SpectralFunction {
        continuous,
        atom_values,
    })
}

/// Inverse transform
/// `(G g)(x) = int g(gamma) phi_gamma(x) d nu(gamma)`: continuous quadrature
/// over the circle density plus the atom sum.
pub fn inverse(g: &SpectralFunction, m: &SpectralMeasure, x: LatticePoint) -> Result<Complex> {
    let p = &m.params;
    if g.continuous.len() != m.thetas.len() || g.atom_values.len() != m.atoms.len() {
        return Err(Error::domain("spectral function grid does not match measure"));
    }
    let mut vals = Vec::with_capacity(m.thetas.len());
    for (j, &th) in m.thetas.iter().enumerate() {
        let gamma = Complex::from_polar(1.0, th);
        vals.push(g.continuous[j] * eigen::phi(gamma, x, p)?.value);
    }
    let mut acc = m.integrate_continuous(&vals);
    for (atom, gv) in m.atoms.iter().zip(&g.atom_values) {
        acc += *gv * eigen::phi(c(atom.gamma), x, p)?.value * c(atom.mass);
    }
    Ok(acc)
}

/// Plancherel pairing: returns `(<f, g>, int F f conj(F g) d nu)`; the two
/// agree for transforms of finitely supported data.
pub fn plancherel_check(
    f: &LatticeFunction,
    g: &LatticeFunction,
    m: &SpectralMeasure,
) -> Result<(Complex, Complex)> {
    let p = &m.params;
    let lhs = lattice::inner_product(f, g, p)?.value;
    let ff = forward_spectral(f, m)?;
    let gg = forward_spectral(g, m)?;
    let vals: Vec<Complex> = ff
        .continuous
        .iter()
        .zip(&gg.continuous)
        .map(|(a, b)| a * b.conj())
        .collect();
    let mut rhs = m.integrate_continuous(&vals);
    for ((atom, fa), ga) in m.atoms.iter().zip(&ff.atom_values).zip(&gg.atom_values) {
        rhs += fa * ga.conj() * c(atom.mass);
    }
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// continuous dual q^{-1}-Hahn system
// ---------------------------------------------------------------------------

/// Parameters `(t_0, t_1, t_2; z)` of the dual orthogonality problem, with
/// `t_i > 0` and `t_i t_j > 1`; the reciprocals `(1/t_0, 1/t_1, 1/t_2)` are
/// then an admissible operator parameter triple.
#[derive(Clone, Copy, Debug)]
pub struct HahnSystem {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub z: f64,
    pub q: QBase,
}

impl HahnSystem {
    pub fn new(t0: f64, t1: f64, t2: f64, z: f64, q: f64) -> Result<Self> {
        let q = QBase::new(q)?;
        if !(t0 > 0.0 && t1 > 0.0 && t2 > 0.0) {
            return Err(Error::domain("Hahn parameters must be positive"));
        }
        for (name, v) in [("t0 t1", t0 * t1), ("t0 t2", t0 * t2), ("t1 t2", t1 * t2)] {
            if !(v > 1.0) {
                return Err(Error::domain(format!("need {name} > 1, got {v}")));
            }
        }
        if !(z > 0.0) {
            return Err(Error::domain("z must be positive"));
        }
        Ok(HahnSystem { t0, t1, t2, z, q })
    }

    /// The operator parameters `(a, b, c; z) = (1/t0, 1/t1, 1/t2; z)`.
    pub fn parameters(&self) -> Result<Parameters> {
        Parameters::new(self.q.get(), 1.0 / self.t0, 1.0 / self.t1, 1.0 / self.t2, self.z)
    }
}

/// Continuous dual q^{-1}-Hahn polynomial `p_k(gamma) = phi_gamma(-q^k)`
/// at the reciprocal parameters.
pub fn hahn_poly(k: u32, gamma: Complex, sys: &HahnSystem) -> Result<Complex> {
    let p = sys.parameters()?;
    let x = -p.q.powi(k as i64);
    Ok(eigen::phi_at(gamma, x, &p)?.value)
}

/// The同 terminating series route in base `q^{-1}`:
/// `p_k(gamma) = 3phi2(q^k, t0 gamma, t0/gamma; t0 t1, t0 t2; q^{-1}, q^{-1})`.
pub fn hahn_poly_terminating(k: u32, gamma: Complex, sys: &HahnSystem) -> Result<Complex> {
    let qh = 1.0 / sys.q.get();
    let upper = [c(sys.q.powi(k as i64)), c(sys.t0) * gamma, c(sys.t0) / gamma];
    let lower = [c(sys.t0 * sys.t1), c(sys.t0 * sys.t2)];
    // terminating sum: base and argument both q^{-1} > 1, zero factor at j = k
    let mut sum = Complex::new(0.0, 0.0);
    let mut term = Complex::new(1.0, 0.0);
    let mut qj = 1.0f64; // qh^j
    for j in 0..=k as i64 {
        sum += term;
        let mut step = Complex::new(1.0, 0.0);
        for u in upper {
            step *= Complex::new(1.0, 0.0) - u * qj;
        }
        let mut den = Complex::new(1.0, 0.0) - qh * qj; // (qh;qh)_{j+1} factor
        for l in lower {
            den *= Complex::new(1.0, 0.0) - l * qj;
        }
        if den.norm() < 1e-280 {
            return Err(Error::domain("degenerate Hahn denominator"));
        }
        term *= step / den * qh;
        qj *= qh;
        let _ = j;
    }
    Ok(sum)
}

/// Complementary function `r_k^z(gamma) = phi_gamma(z q^k)` at the
/// reciprocal parameters.
pub fn hahn_complement(k: i32, gamma: Complex, sys: &HahnSystem) -> Result<Complex> {
    let p = sys.parameters()?;
    let x = p.z * p.q.powi(k as i64);
    Ok(eigen::phi_at(gamma, x, &p)?.value)
}

/// Explicit series display of `r_k^z` (valid for `|gamma/t0| < 1`):
/// the analytic continuation of `phi` with prefactor
/// `(g/t0, 1/t1t2, -q^k z/(t0t1t2 g);q)_inf / (1/t0t1, 1/t0t2, -q^k z/t1t2;q)_inf`.
pub fn hahn_complement_series(k: i32, gamma: Complex, sys: &HahnSystem) -> Result<Complex> {
    let p = sys.parameters()?;
    let x = p.z * p.q.powi(k as i64);
    Ok(eigen::phi_ancont_b(gamma, x, &p)?.value)
}

/// Closed-form quadratic norm of `p_k` under `d sigma_z`:
/// `theta(-z)/theta(-z/t0t1, -z/t0t2, -z/t1t2)
///  / (q, 1/t0t1, 1/t0t2, 1/t1t2;q)_inf
///  * (q, 1/t1t2;q)_k / (1/t0t1, 1/t0t2;q)_k * q^{-k}`.
pub fn hahn_pk_norm_closed(k: u32, sys: &HahnSystem) -> Result<f64> {
    let q = sys.q;
    let (i01, i02, i12) = (
        1.0 / (sys.t0 * sys.t1),
        1.0 / (sys.t0 * sys.t2),
        1.0 / (sys.t1 * sys.t2),
    );
    let num = qseries::theta_multi_scaled(&[c(-sys.z)], q)?;
    let den = qseries::theta_multi_scaled(
        &[c(-sys.z * i01), c(-sys.z * i02), c(-sys.z * i12)],
        q,
    )?;
    let mut poch = Scaled::ONE;
    for arg in [q.get(), i01, i02, i12] {
        poch = poch.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    let kpart = qseries::qpoch_finite(c(q.get()), q, k) * qseries::qpoch_finite(c(i12), q, k)
        / (qseries::qpoch_finite(c(i01), q, k) * qseries::qpoch_finite(c(i02), q, k));
    Ok(num.div(den).div(poch).mul_complex(kpart).to_complex().re * q.powi(-(k as i64)))
}

/// Closed-form quadratic norm of `r_k^z` under `d sigma_z`:
/// `theta(-1/z)/theta(-z/t0t1, -z/t0t2, -z/t1t2) / (1/t0t1, 1/t0t2;q)_inf^2
///  * (-q^k z/t0t1, -q^k z/t0t2;q)_inf / (-q^k z/t1t2, -q^{1+k} z;q)_inf * q^{-k}`.
pub fn hahn_rk_norm_closed(k: i32, sys: &HahnSystem) -> Result<f64> {
    let q = sys.q;
    let qv = q.get();
    let (i01, i02, i12) = (
        1.0 / (sys.t0 * sys.t1),
        1.0 / (sys.t0 * sys.t2),
        1.0 / (sys.t1 * sys.t2),
    );
    let zk = sys.z * q.powi(k as i64);
    let num = qseries::theta_multi_scaled(&[c(-1.0 / sys.z)], q)?;
    let den = qseries::theta_multi_scaled(
        &[c(-sys.z * i01), c(-sys.z * i02), c(-sys.z * i12)],
        q,
    )?;
    let mut poch = Scaled::ONE;
    for arg in [i01, i02] {
        let v = qseries::qpoch_inf_scaled(c(arg), q).0;
        poch = poch.mul(v).mul(v);
    }
    let mut ratio = Scaled::ONE;
    for arg in [-zk * i01, -zk * i02] {
        ratio = ratio.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    for arg in [-zk * i12, -qv * zk] {
        ratio = ratio.div(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    Ok(num.div(den).div(poch).mul(ratio).to_complex().re * q.powi(-(k as i64)))
}

/// Labels for the rows/columns of the dual Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HahnBasis {
    Poly(u32),
    Complement(i32),
}

/// Gram data of `{p_k}_{k < n_poly} ∪ {r_k^z}_{k in comp_range}` under
/// `d sigma_z = (1/M) d nu(.; 1/t0, 1/t1, 1/t2; z)`.
pub struct HahnGram {
    pub labels: Vec<HahnBasis>,
    /// Row-major Gram matrix.
    pub matrix: Vec<Vec<Complex>>,
    /// Closed-form norms for the diagonal comparison.
    pub closed_norms: Vec<f64>,
}

/// Assemble the dual-orthogonality Gram matrix by quadrature against the
/// Plancherel measure of the reciprocal parameters.
pub fn hahn_gram(
    sys: &HahnSystem,
    n_poly: u32,
    comp_range: (i32, i32),
    m: &SpectralMeasure,
) -> Result<HahnGram> {
    let p = sys.parameters()?;
    let mut labels = Vec::new();
    for k in 0..n_poly {
        labels.push(HahnBasis::Poly(k));
    }
    for k in comp_range.0..=comp_range.1 {
        labels.push(HahnBasis::Complement(k));
    }
    let eval = |lbl: HahnBasis, gamma: Complex| -> Result<Complex> {
        match lbl {
            HahnBasis::Poly(k) => Ok(eigen::phi_at(gamma, -p.q.powi(k as i64), &p)?.value),
            HahnBasis::Complement(k) => {
                Ok(eigen::phi_at(gamma, p.z * p.q.powi(k as i64), &p)?.value)
            }
        }
    };
    // sample every basis function on the grid and atoms
    let nfun = labels.len();
    let mut grid_vals = Vec::with_capacity(nfun);
    let mut atom_vals = Vec::with_capacity(nfun);
    for &lbl in &labels {
        let mut gv = Vec::with_capacity(m.thetas.len());
        for &th in &m.thetas {
            gv.push(eval(lbl, Complex::from_polar(1.0, th))?);
        }
        let mut av = Vec::with_capacity(m.atoms.len());
        for atom in &m.atoms {
            av.push(eval(lbl, c(atom.gamma))?);
        }
        grid_vals.push(gv);
        atom_vals.push(av);
    }
    let mconst = m.m_const;
    let mut matrix = Vec::with_capacity(nfun);
    for i in 0..nfun {
        let mut row = Vec::with_capacity(nfun);
        for j in 0..nfun {
            let vals: Vec<Complex> = grid_vals[i]
                .iter()
                .zip(&grid_vals[j])
                .map(|(a, b)| a * b.conj())
                .collect();
            let mut acc = m.integrate_continuous(&vals);
            for (atom, (ai, aj)) in m
                .atoms
                .iter()
                .zip(atom_vals[i].iter().zip(&atom_vals[j]))
            {
                acc += ai * aj.conj() * c(atom.mass);
            }
            row.push(acc / c(mconst));
        }
        matrix.push(row);
    }
    let mut closed_norms = Vec::with_capacity(nfun);
    for &lbl in &labels {
        closed_norms.push(match lbl {
            HahnBasis::Poly(k) => hahn_pk_norm_closed(k, sys)?,
            HahnBasis::Complement(k) => hahn_rk_norm_closed(k, sys)?,
        });
    }
    Ok(HahnGram {
        labels,
        matrix,
        closed_norms,
    })
}

// ---------------------------------------------------------------------------
// the compact polynomial case (bc < 0)
// ---------------------------------------------------------------------------

/// Points of the compact lattice `I_wp = {-q^k} ∪ {-q^{k+1}/bc}` (`bc < 0`
/// makes the second family positive, decreasing from `-q/bc` to 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolPoint {
    /// `x = -q^k`, `k >= 0`.
    FromNegOne(u32),
    /// `x = -q^{k+1}/(bc)`, `k >= 0`.
    FromEndpoint(u32),
}

impl PolPoint {
    pub fn value(self, p: &Parameters) -> f64 {
        match self {
            PolPoint::FromNegOne(k) => -p.q.powi(k as i64),
            PolPoint::FromEndpoint(k) => -p.q.powi(k as i64 + 1) / (p.b * p.c),
        }
    }
}

/// All points of the truncated compact lattice in ascending coordinate
/// order.
pub fn pol_points(k_max: u32, p: &Parameters) -> Vec<PolPoint> {
    let mut pts = Vec::with_capacity(2 * (k_max as usize + 1));
    for k in 0..=k_max {
        pts.push(PolPoint::FromNegOne(k));
    }
    for k in (0..=k_max).rev() {
        pts.push(PolPoint::FromEndpoint(k));
    }
    let _ = p;
    pts
}

/// Inner product on the compact lattice,
/// `<f, g>_wp = sum f(x) conj(g(x)) (1-q)|x|/p(x)`.
pub fn pol_inner_product(
    mut f: impl FnMut(f64) -> Result<Complex>,
    mut g: impl FnMut(f64) -> Result<Complex>,
    k_max: u32,
    p: &Parameters,
) -> Result<Complex> {
    let mut acc = Complex::new(0.0, 0.0);
    for pt in pol_points(k_max, p) {
        let x = pt.value(p);
        let w = (1.0 - p.qv()) * x.abs() / lattice::weight_p(x, p)?.value.re;
        acc += f(x)? * g(x)?.conj() * c(w);
    }
    Ok(acc)
}

/// Apply the operator on the compact lattice: the full second order formula
/// on the interior, and `(Lf)(x) = A(x)(f(qx) - f(x))` at both end-points
/// `x = -1` and `x = -q/bc`.
pub fn apply_l_pol(
    mut f: impl FnMut(f64) -> Result<Complex>,
    pt: PolPoint,
    p: &Parameters,
) -> Result<Complex> {
    let x = pt.value(p);
    let qv = p.qv();
    let endpoint = matches!(pt, PolPoint::FromNegOne(0) | PolPoint::FromEndpoint(0));
    let a = coeff_a(x, p)?;
    if endpoint {
        Ok(c(a) * (f(qv * x)? - f(x)?))
    } else {
        let b = coeff_b(x, p)?;
        Ok(c(a) * (f(qv * x)? - f(x)?) + c(b) * (f(x / qv)? - f(x)?))
    }
}

/// Closed-form quadratic norm `N_wp(n)` of the big q-Jacobi polynomial
/// `psi_{gamma_n}` on the compact lattice:
/// `(1-q) (q, bc, q/bc, q^{2n+1}a^2;q)_inf (q;q)_n (q^n a^2;q)_n
///  / ((qa/b, qa/c, q^n ab, q^n ac;q)_inf (qa/b;q)_n (qa/c;q)_n)
///  * (-q^{(3-n)/2}/bc)^n`.
pub fn big_qjacobi_norm(n: u32, p: &Parameters) -> Result<f64> {
    if !(p.b * p.c < 0.0) {
        return Err(Error::domain("polynomial norms require the bc < 0 regime"));
    }
    let q = p.q;
    let qv = q.get();
    let bc = p.b * p.c;
    let mut num = Scaled::ONE;
    for arg in [qv, bc, qv / bc, q.powi(2 * n as i64 + 1) * p.a * p.a] {
        num = num.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    num = num
        .mul_complex(qseries::qpoch_finite(c(qv), q, n))
        .mul_complex(qseries::qpoch_finite(c(q.powi(n as i64) * p.a * p.a), q, n));
    let mut den = Scaled::ONE;
    for arg in [
        qv * p.a / p.b,
        qv * p.a / p.c,
        q.powi(n as i64) * p.a * p.b,
        q.powi(n as i64) * p.a * p.c,
    ] {
        den = den.mul(qseries::qpoch_inf_scaled(c(arg), q).0);
    }
    den = den
        .mul_complex(qseries::qpoch_finite(c(qv * p.a / p.b), q, n))
        .mul_complex(qseries::qpoch_finite(c(qv * p.a / p.c), q, n));
    // (-q^{(3-n)/2}/bc)^n = (-1)^n q^{n(3-n)/2} (bc)^{-n}; n(3-n) is even
    let pw = Scaled::powi(c(qv), (n as i64) * (3 - n as i64) / 2)
        .mul(Scaled::powi(c(-bc), -(n as i64)));
    let v = num.div(den).mul(pw).to_complex().re * (1.0 - qv);
    if !(v > 0.0) {
        return Err(Error::domain(format!("N_wp({n}) must be positive, got {v}")));
    }
    Ok(v)
}

/// Independent route to `N_wp(n)` through the residue of the reciprocal
/// Wronskian:
/// `N = [ (a/g_n)(1/g_n - g_n) c_n Res_{g_n}(1/W_wp) ]^{-1}`.
pub fn big_qjacobi_norm_residue_route(n: u32, p: &Parameters) -> Result<f64> {
    let gn = c(p.a * p.q.powi(n as i64));
    let h = 1e-5 * gn.norm();
    // even average + one Richardson step evaluates the residue of the simple
    // pole of 1/W at gamma_n
    let g_fun = |g: Complex| -> Result<Complex> {
        Ok((g - gn) / crate::cfun::wronskian_psi_phi_closed(g, p)?)
    };
    let a1 = (g_fun(gn + c(h))? + g_fun(gn - c(h))?) / c(2.0);
    let a2 = (g_fun(gn + c(h / 2.0))? + g_fun(gn - c(h / 2.0))?) / c(2.0);
    let res = (c(4.0) * a2 - a1) / c(3.0);
    let cn = eigen::big_qjacobi_psi_ratio(n, p)?;
    let val = (c(p.a) / gn * (gn.inv() - gn) * cn * res).inv();
    Ok(val.re)
}

/// Lattice norm `<psi_{gamma_m}, psi_{gamma_n}>_wp` (the polynomials are
/// real on the compact lattice).
pub fn pol_psi_inner(m_deg: u32, n_deg: u32, k_max: u32, p: &Parameters) -> Result<Complex> {
    let gm = c(p.a * p.q.powi(m_deg as i64));
    let gn = c(p.a * p.q.powi(n_deg as i64));
    pol_inner_product(
        |x| Ok(eigen::psi_at(gm, x, p)?.value),
        |x| Ok(eigen::psi_at(gn, x, p)?.value),
        k_max,
        p,
    )
}

/// Stone's-formula mass of the interval `(mu1, mu2)` for the compact case,
/// approximated at three epsilon levels and Richardson extrapolated. The
/// spectrum is pure point at `mu(a q^n)`; the continuous band carries no
/// mass.
pub fn stone_pol_interval_mass(
    f_vals: &[(PolPoint, Complex)],
    g_vals: &[(PolPoint, Complex)],
    mu1: f64,
    mu2: f64,
    eps_list: &[f64],
    k_max: u32,
    p: &Parameters,
) -> Result<Complex> {
    if eps_list.len() != 3 {
        return Err(Error::domain("epsilon extrapolation expects three levels"));
    }
    let pts = pol_points(k_max, p);
    let idx_of = |pt: PolPoint| pts.iter().position(|&q| q == pt);
    let mut fv = alloc::vec![Complex::new(0.0, 0.0); pts.len()];
    let mut gv = alloc::vec![Complex::new(0.0, 0.0); pts.len()];
    for &(pt, v) in f_vals {
        fv[idx_of(pt).ok_or_else(|| Error::domain("support point out of range"))?] = v;
    }
    for &(pt, v) in g_vals {
        gv[idx_of(pt).ok_or_else(|| Error::domain("support point out of range"))?] = v;
    }
    let mut wt = Vec::with_capacity(pts.len());
    for &pt in &pts {
        let x = pt.value(p);
        wt.push((1.0 - p.qv()) * x.abs() / lattice::weight_p(x, p)?.value.re);
    }
    // resolvent matrix element via the compact Green kernel
    // K(x,y) = psi(max) phi(min) / W_wp
    let elem = |mu: Complex| -> Result<Complex> {
        let gamma = spectral::gamma_from_mu(mu, p)?;
        let w = crate::cfun::wronskian_psi_phi_closed(gamma, p)?;
        let mut phi_v = Vec::with_capacity(pts.len());
        let mut psi_v = Vec::with_capacity(pts.len());
        for &pt in &pts {
            let x = pt.value(p);
            if fv[idx_of(pt).unwrap()].norm() > 0.0 || gv[idx_of(pt).unwrap()].norm() > 0.0 {
                phi_v.push(eigen::phi_at(gamma, x, p)?.value);
                psi_v.push(eigen::psi_at(gamma, x, p)?.value);
            } else {
                phi_v.push(Complex::new(0.0, 0.0));
                psi_v.push(Complex::new(0.0, 0.0));
            }
        }
        let mut acc = Complex::new(0.0, 0.0);
        for i in 0..pts.len() {
            if gv[i].norm() == 0.0 {
                continue;
            }
            let mut val = Complex::new(0.0, 0.0);
            for j in 0..pts.len() {
                if fv[j].norm() == 0.0 {
                    continue;
                }
                let kern = if j <= i {
                    psi_v[i] * phi_v[j]
                } else {
                    phi_v[i] * psi_v[j]
                };
                val += kern * fv[j] * c(wt[j]);
            }
            acc += val / w * gv[i].conj() * c(wt[i]);
        }
        Ok(acc)
    };
    let n_quad = 512usize;
    let mut lhs_eps = Vec::with_capacity(3);
    for &eps in eps_list {
        let h = (mu2 - mu1) / (n_quad as f64);
        let mut acc = Complex::new(0.0, 0.0);
        for j in 0..=n_quad {
            let mus = mu1 + h * (j as f64);
            let jump = elem(Complex::new(mus, eps))? - elem(Complex::new(mus, -eps))?;
            let sw = if j == 0 || j == n_quad {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += jump * c(sw);
        }
        lhs_eps.push(acc * c(h / 3.0) / Complex::new(0.0, 2.0 * core::f64::consts::PI));
    }
    let s1 = c(2.0) * lhs_eps[1] - lhs_eps[0];
    let s2 = c(2.0) * lhs_eps[2] - lhs_eps[1];
    Ok((c(4.0) * s2 - s1) / c(3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeWindow;

    fn p0() -> Parameters {
        Parameters::new(0.5, 0.4, 0.5, 0.6, 1.0).unwrap()
    }

    fn ppol() -> Parameters {
        Parameters::new_polynomial(0.5, 0.4, 0.5, -0.6).unwrap()
    }

    fn sys0() -> HahnSystem {
        HahnSystem::new(2.5, 2.0, 1.0 / 0.6, 1.0, 0.5).unwrap()
    }

    #[test]
    fn forward_spike_and_linearity() {
        let p = p0();
        let w = LatticeWindow::new(10, -10, 10).unwrap();
        let x0 = LatticePoint::pos(1);
        let mut f = LatticeFunction::zeros(w);
        f.set(x0, c(1.0));
        let gamma = Complex::new(0.3, 0.4);
        let got = forward(&f, gamma, &p).unwrap();
        let expect = eigen::phi(gamma, x0, &p).unwrap().value.conj()
            * c(lattice::point_weight(x0, &p).unwrap());
        assert!((got - expect).norm() < 1e-13 * expect.norm());
        // W-invariance
        let g2 = forward(&f, gamma.inv(), &p).unwrap();
        assert!((got - g2).norm() < 1e-11 * got.norm());
        // linearity
        let mut f2 = LatticeFunction::zeros(w);
        f2.set(LatticePoint::neg(2).unwrap(), Complex::new(0.0, 1.5));
        let mut f3 = LatticeFunction::zeros(w);
        f3.set(x0, c(2.0));
        f3.set(LatticePoint::neg(2).unwrap(), Complex::new(0.0, 3.0));
        let lhs = forward(&f3, gamma, &p).unwrap();
        let rhs = c(2.0) * forward(&f, gamma, &p).unwrap() + c(2.0) * forward(&f2, gamma, &p).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
    }

    #[test]
    fn hahn_poly_two_routes() {
        let sys = sys0();
        let gamma = Complex::new(0.7, 0.2);
        assert!((hahn_poly(0, gamma, &sys).unwrap() - c(1.0)).norm() < 1e-13);
        for k in [1u32, 3, 5] {
            let a = hahn_poly(k, gamma, &sys).unwrap();
            let b = hahn_poly_terminating(k, gamma, &sys).unwrap();
            assert!((a - b).norm() <= 1e-10 * a.norm(), "k={k}: {a} vs {b}");
        }
        // symmetric in gamma <-> 1/gamma
        let a = hahn_poly(3, gamma, &sys).unwrap();
        let b = hahn_poly(3, gamma.inv(), &sys).unwrap();
        assert!((a - b).norm() < 1e-11 * a.norm());
    }

    #[test]
    fn hahn_complement_routes() {
        let sys = sys0();
        let gamma = Complex::new(0.5, 0.31);
        for k in [-1, 0, 2] {
            let a = hahn_complement(k, gamma, &sys).unwrap();
            let b = hahn_complement_series(k, gamma, &sys).unwrap();
            assert!((a - b).norm() <= 1e-10 * a.norm(), "k={k}");
        }
        let a = hahn_complement(1, gamma, &sys).unwrap();
        let b = hahn_complement(1, gamma.inv(), &sys).unwrap();
        assert!((a - b).norm() < 1e-11 * a.norm());
    }

    #[test]
    fn pol_lattice_layout() {
        let p = ppol();
        let pts = pol_points(3, &p);
        let vals: Vec<f64> = pts.iter().map(|pt| pt.value(&p)).collect();
        // strictly ascending, from -1 to -q/bc = 5/3
        for i in 1..vals.len() {
            assert!(vals[i] > vals[i - 1]);
        }
        assert_eq!(vals[0], -1.0);
        assert!((vals[vals.len() - 1] - 0.5 / 0.3).abs() < 1e-14);
    }

    #[test]
    fn pol_eigen_equations_at_endpoints() {
        // phi satisfies the truncated equation at -1 but not at -q/bc;
        // psi the other way around
        let p = ppol();
        let gamma = Complex::new(0.23, 0.0);
        let m = eigen::mu(gamma, &p).unwrap();
        let left = PolPoint::FromNegOne(0);
        let right = PolPoint::FromEndpoint(0);
        let lphi =
            apply_l_pol(|x| Ok(eigen::phi_at(gamma, x, &p)?.value), left, &p).unwrap();
        let phi_l = eigen::phi_at(gamma, left.value(&p), &p).unwrap().value;
        assert!((lphi - m * phi_l).norm() < 1e-10 * (1.0 + phi_l.norm()));
        let lphi_r =
            apply_l_pol(|x| Ok(eigen::phi_at(gamma, x, &p)?.value), right, &p).unwrap();
        let phi_r = eigen::phi_at(gamma, right.value(&p), &p).unwrap().value;
        assert!((lphi_r - m * phi_r).norm() > 1e-3);
        let lpsi =
            apply_l_pol(|x| Ok(eigen::psi_at(gamma, x, &p)?.value), right, &p).unwrap();
        let psi_r = eigen::psi_at(gamma, right.value(&p), &p).unwrap().value;
        assert!((lpsi - m * psi_r).norm() < 1e-10 * (1.0 + psi_r.norm()));
        let lpsi_l =
            apply_l_pol(|x| Ok(eigen::psi_at(gamma, x, &p)?.value), left, &p).unwrap();
        let psi_l = eigen::psi_at(gamma, left.value(&p), &p).unwrap().value;
        assert!((lpsi_l - m * psi_l).norm() > 1e-3);
    }

    #[test]
    fn pol_norms_match_closed_form() {
        let p = ppol();
        for n in 0..=4u32 {
            let latt = pol_psi_inner(n, n, 80, &p).unwrap().re;
            let closed = big_qjacobi_norm(n, &p).unwrap();
            assert!(
                (latt - closed).abs() < 1e-8 * closed,
                "n={n}: {latt} vs {closed}"
            );
            let res = big_qjacobi_norm_residue_route(n, &p).unwrap();
            assert!(
                (res - closed).abs() < 1e-6 * closed,
                "n={n}: residue {res} vs {closed}"
            );
        }
        // orthogonality
        let off = pol_psi_inner(1, 3, 80, &p).unwrap();
        let n1 = big_qjacobi_norm(1, &p).unwrap();
        let n3 = big_qjacobi_norm(3, &p).unwrap();
        assert!(off.norm() < 1e-9 * (n1 * n3).sqrt());
    }

    #[test]
    fn pol_wronskian_closed_matches_lattice() {
        // W_wp is the same product formula; check it against the lattice
        // Wronskian computed on the compact lattice
        let p = ppol();
        let gamma = Complex::new(0.37, 0.11);
        let closed = crate::cfun::wronskian_psi_phi_closed(gamma, &p).unwrap();
        for x in [-1.0, -0.25, 0.5 / 0.3 * 0.25] {
            let w = lattice::wronskian_eval(
                |t| Ok(eigen::psi_at(gamma, t, &p)?.value),
                |t| Ok(eigen::phi_at(gamma, t, &p)?.value),
                x,
                &p,
            )
            .unwrap();
            assert!(
                (w - closed).norm() < 1e-8 * closed.norm(),
                "x={x}: {w} vs {closed}"
            );
        }
    }
}
