//! q-analysis kernel: q-shifted factorials, theta products and basic
//! hypergeometric series with truncation control.
//!
//! Conventions follow Gasper and Rahman: `(x;q)_n` is the product
//! `prod_{j=0}^{n-1} (1 - x q^j)`, `theta(x) = (x;q)_inf (q/x;q)_inf`, and
//! the series `_r phi_s` carries the factor `[(-1)^k q^{k(k-1)/2}]^{1+s-r}`
//! per term.

use crate::error::{Error, Result};
use crate::scaled::Scaled;
use crate::Complex;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Default relative tolerance for series truncation.
pub const DEFAULT_TOL: f64 = 1e-13;

/// Hard cap on series length before reporting non-convergence.
const MAX_TERMS: usize = 20_000;

/// Base of the q-calculus, restricted to `0 < q < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QBase {
    q: f64,
}

impl QBase {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) || !q.is_finite() {
            return Err(Error::domain(format!("q must satisfy 0 < q < 1, got {q}")));
        }
        Ok(QBase { q })
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.q
    }

    /// `q^k` for any integer k, computed by exact repeated squaring.
    pub fn powi(self, k: i64) -> f64 {
        if k.unsigned_abs() < i32::MAX as u64 {
            self.q.powi(k as i32)
        } else {
            f64::INFINITY
        }
    }

    /// Number of factors after which `(x;q)_inf` tails are 1 to machine
    /// precision for `|x| <= 1`.
    pub fn j_max(self) -> usize {
        ((f64::EPSILON.ln() / self.q.ln()).ceil() as usize) + 64
    }
}

/// A numerically evaluated series or product: value, a bound on the
/// truncation error, and the number of terms consumed.
#[derive(Clone, Copy, Debug)]
pub struct SeriesResult {
    pub value: Complex,
    pub err_estimate: f64,
    pub n_terms: usize,
}

impl SeriesResult {
    pub fn exact(value: Complex) -> Self {
        SeriesResult {
            value,
            err_estimate: 0.0,
            n_terms: 0,
        }
    }

    /// Multiply by a scalar, scaling the error bound along.
    pub fn scale(self, c: Complex) -> Self {
        SeriesResult {
            value: self.value * c,
            err_estimate: self.err_estimate * c.norm(),
            n_terms: self.n_terms,
        }
    }
}

/// Finite q-shifted factorial `(x;q)_n`; the empty product is 1.
pub fn qpoch_finite(x: Complex, q: QBase, n: u32) -> Complex {
    let mut p = Complex::new(1.0, 0.0);
    let mut xq = x;
    for _ in 0..n {
        p *= Complex::new(1.0, 0.0) - xq;
        xq *= q.get();
    }
    p
}

/// `(x;q)_k` for any integer k, with `(x;q)_{-n} = 1/(x q^{-n};q)_n`.
pub fn qpoch_int(x: Complex, q: QBase, k: i64) -> Result<Complex> {
    Ok(qpoch_int_scaled(x, q, k)?.to_complex())
}

/// Scaled variant of [`qpoch_int`]; negative indices grow factorially and
/// overflow `f64` well inside the ranges the atom masses need.
pub fn qpoch_int_scaled(x: Complex, q: QBase, k: i64) -> Result<Scaled> {
    if k >= 0 {
        let mut p = Scaled::ONE;
        let mut xq = x;
        for _ in 0..k {
            p = p.mul_complex(Complex::new(1.0, 0.0) - xq);
            xq *= q.get();
        }
        Ok(p)
    } else {
        let mut p = Scaled::ONE;
        for j in 1..=(-k) {
            let f = Complex::new(1.0, 0.0) - x * q.powi(-j);
            if f.norm() < 1e-300 {
                return Err(Error::domain("(x;q)_k with negative k hits a zero factor"));
            }
            p = p.div(Scaled::from_complex(f));
        }
        Ok(p)
    }
}

/// Scaled infinite product `(x;q)_inf` for arbitrary complex `x`.
///
/// Large `|x|` makes early factors huge; the scaled representation keeps the
/// running product exact while the final ratio is formed by the caller.
pub fn qpoch_inf_scaled(x: Complex, q: QBase) -> (Scaled, f64, usize) {
    let qv = q.get();
    let mut p = Scaled::ONE;
    let mut xq = x;
    let mut n = 0usize;
    let j_hard = {
        // once |x q^j| is below the roundoff guard the remaining factors are 1
        let extra = if x.norm() > 1.0 {
            (x.norm().ln() / -qv.ln()).ceil() as usize
        } else {
            0
        };
        q.j_max() + extra
    };
    for _ in 0..j_hard {
        if xq.norm() < 1e-18 {
            break;
        }
        p = p.mul_complex(Complex::new(1.0, 0.0) - xq);
        xq *= qv;
        n += 1;
    }
    // tail bound: |log prod (1-xq^j)| <= sum |x| q^j = |xq^n|/(1-q)
    let tail = xq.norm() / (1.0 - qv);
    let err = p.to_complex().norm() * tail;
    (p, err, n)
}

/// Infinite q-shifted factorial `(x;q)_inf` as a plain double.
pub fn qpoch_inf(x: Complex, q: QBase) -> SeriesResult {
    let (p, err, n) = qpoch_inf_scaled(x, q);
    SeriesResult {
        value: p.to_complex(),
        err_estimate: err,
        n_terms: n,
    }
}

/// Smallest relative factor magnitude `|1 - x q^j| / (1 + |x q^j|)` in the
/// product `(x;q)_inf`; near-zero values flag a (near-)pole or zero.
pub fn qpoch_inf_min_factor(x: Complex, q: QBase) -> f64 {
    let qv = q.get();
    let mut xq = x;
    let mut m = f64::INFINITY;
    let j_hard = q.j_max()
        + if x.norm() > 1.0 {
            (x.norm().ln() / -qv.ln()).ceil() as usize
        } else {
            0
        };
    for _ in 0..j_hard {
        if xq.norm() < 0.5 {
            m = m.min((Complex::new(1.0, 0.0) - xq).norm() / (1.0 + xq.norm()));
            break;
        }
        m = m.min((Complex::new(1.0, 0.0) - xq).norm() / (1.0 + xq.norm()));
        xq *= qv;
    }
    m
}

/// `(x;q)_inf` with the single factor `j = skip` omitted.
///
/// Used for residues at simple zeros: when `x = q^{-n}` the factor `j = n`
/// vanishes and the rest of the product is regular.
pub fn qpoch_inf_skip(x: Complex, q: QBase, skip: usize) -> Scaled {
    let qv = q.get();
    let mut p = Scaled::ONE;
    let mut xq = x;
    let j_hard = q.j_max()
        + if x.norm() > 1.0 {
            (x.norm().ln() / -qv.ln()).ceil() as usize
        } else {
            0
        };
    for j in 0..j_hard.max(skip + 1) {
        if j != skip {
            if xq.norm() < 1e-18 && j > skip {
                break;
            }
            p = p.mul_complex(Complex::new(1.0, 0.0) - xq);
        }
        xq *= qv;
    }
    p
}

/// Renormalized Jacobi theta product `theta(x) = (x;q)_inf (q/x;q)_inf`,
/// in scaled form. Arguments far from the fundamental annulus
/// `q < |x| <= 1` are shifted there first via the quasi-periodicity
/// relation, which keeps every factor well conditioned.
pub fn theta_scaled(x: Complex, q: QBase) -> Result<(Scaled, f64)> {
    if x.norm() == 0.0 {
        return Err(Error::domain("theta(x) requires x != 0"));
    }
    let qv = q.get();
    // |x q^s| in (q, 1]: s = -floor(ln|x|/ln q) shifted so 0 <= u+s < 1
    let u = x.norm().ln() / qv.ln();
    let s = -u.floor() as i64;
    let xr = x * Scaled::powi(Complex::new(qv, 0.0), s).to_complex();
    let (p1, e1, _) = qpoch_inf_scaled(xr, q);
    let (p2, e2, _) = qpoch_inf_scaled(Complex::new(qv, 0.0) / xr, q);
    let base = p1.mul(p2);
    // theta(x) = theta(q^{-s} xr) = factor(-s, xr) * theta(xr)
    let fac = theta_shift_factor(xr, q, -s);
    let val = base.mul(fac);
    let rel = {
        let b = base.to_complex().norm().max(1e-300);
        (e1 + e2) / b
    };
    Ok((val, rel * val.to_complex().norm()))
}

/// The quasi-periodicity factor `F` with `theta(q^k x) = F(k, x) theta(x)`,
/// `F(k, x) = q^{-k(k-1)/2} (-x)^{-k}` for every integer `k`. (For `k <= 0`
/// the same relation reads `q^{k(k+1)/2} (-q^k x)^{-k}` in terms of the
/// shifted argument.)
pub fn theta_shift_factor(x: Complex, q: QBase, k: i64) -> Scaled {
    Scaled::powi(Complex::new(q.get(), 0.0), -(k * (k - 1)) / 2).mul(Scaled::powi(-x, -k))
}

/// `theta(x)` as a plain double.
pub fn theta(x: Complex, q: QBase) -> Result<SeriesResult> {
    let (v, err) = theta_scaled(x, q)?;
    Ok(SeriesResult {
        value: v.to_complex(),
        err_estimate: err,
        n_terms: 0,
    })
}

/// Product form `theta(x_1, ..., x_r) = theta(x_1) ... theta(x_r)`.
pub fn theta_multi(xs: &[Complex], q: QBase) -> Result<SeriesResult> {
    let mut p = Scaled::ONE;
    let mut rel = 0.0;
    for &x in xs {
        let (t, err) = theta_scaled(x, q)?;
        rel += err / t.to_complex().norm().max(1e-300);
        p = p.mul(t);
    }
    let value = p.to_complex();
    Ok(SeriesResult {
        value,
        err_estimate: rel * value.norm(),
        n_terms: 0,
    })
}

/// Scaled variant of [`theta_multi`] for quotients that overflow `f64`.
pub fn theta_multi_scaled(xs: &[Complex], q: QBase) -> Result<Scaled> {
    let mut p = Scaled::ONE;
    for &x in xs {
        let (t, _) = theta_scaled(x, q)?;
        p = p.mul(t);
    }
    Ok(p)
}

/// `theta(q^k x)` computed from `theta(x)` and the quasi-periodicity factor.
pub fn theta_shift(x: Complex, q: QBase, k: i64) -> Result<Complex> {
    let (t, _) = theta_scaled(x, q)?;
    Ok(theta_shift_factor(x, q, k).mul(t).to_complex())
}

/// Basic hypergeometric series
/// `_r phi_s(upper; lower; q, arg) = sum_k t_k` with
/// `t_k = [prod (u;q)_k / prod (l;q)_k] [(-1)^k q^{k(k-1)/2}]^{1+s-r} arg^k / (q;q)_k`.
///
/// Terminating series (an upper parameter of the form `q^{-m}`) stop exactly
/// and report a zero error estimate. Non-terminating series stop once three
/// consecutive terms are below `tol` relative to the partial sum *and* the
/// geometric tail bound derived from the last observed term ratios is below
/// `tol` as well; q-series terms can be non-monotone before their asymptotic
/// decay, hence the double test.
pub fn phi_series(
    upper: &[Complex],
    lower: &[Complex],
    q: QBase,
    arg: Complex,
    tol: f64,
) -> Result<SeriesResult> {
    let qv = q.get();
    let extra = 1 + lower.len() as i32 - upper.len() as i32;
    let one = Complex::new(1.0, 0.0);

    let mut sum = Complex::new(0.0, 0.0);
    let mut term = one;
    let mut qk = 1.0f64; // q^k
    let mut small_streak = 0usize;
    let mut ratios = [f64::NAN; 3];
    let mut abs_acc = 0.0f64;

    for k in 0..MAX_TERMS {
        sum += term;
        abs_acc += term.norm();

        // factor carrying the step k -> k+1
        let mut num = one;
        let mut terminated = false;
        for &u in upper {
            let f = one - u * qk;
            // detect a terminating parameter u = q^{-k}
            if f.norm() <= 1e-13 * (1.0 + (u * qk).norm()) {
                terminated = true;
            }
            num *= f;
        }
        if terminated {
            return Ok(SeriesResult {
                value: sum,
                err_estimate: 3.0 * f64::EPSILON * abs_acc,
                n_terms: k + 1,
            });
        }
        let mut den = one - qv * qk; // (q;q) factor at index k+1
        for &l in lower {
            let f = one - l * qk;
            if f.norm() < 1e-300 {
                return Err(Error::domain(
                    "lower parameter of the form q^{-m}: denominator vanishes",
                ));
            }
            if f.norm() < 1e-13 {
                return Err(Error::pole(format!(
                    "(lower;q)_k factor of magnitude {} at k={}",
                    f.norm(),
                    k
                )));
            }
            den *= f;
        }
        let mut step = num / den * arg;
        if extra != 0 {
            let e = (-qk).powi(extra); // ((-1) q^k)^{1+s-r}
            step *= e;
        }
        let prev = term.norm();
        term *= step;
        qk *= qv;
        if !term.is_finite() {
            return Err(Error::convergence("series term overflow"));
        }

        ratios.rotate_left(1);
        ratios[2] = if prev > 0.0 { term.norm() / prev } else { 0.0 };

        // `sum` holds S_k = t_0 + ... + t_k; the remaining tail is bounded by
        // |t_k| rho/(1-rho) once the term ratios stay below rho < 1.
        let snorm = sum.norm().max(1e-300);
        if prev < tol * snorm {
            small_streak += 1;
        } else {
            small_streak = 0;
        }
        if small_streak >= 3 {
            let rho = ratios.iter().cloned().fold(0.0f64, f64::max);
            if rho < 1.0 {
                let tail = prev * rho / (1.0 - rho);
                if tail < tol * snorm {
                    return Ok(SeriesResult {
                        value: sum,
                        err_estimate: tail + 3.0 * f64::EPSILON * abs_acc,
                        n_terms: k + 1,
                    });
                }
            }
        }
    }
    Err(Error::convergence(
        "series failed to converge within the term budget",
    ))
}

/// Convenience wrapper building complex slices from mixed real input.
pub fn phi_series_real(upper: &[f64], lower: &[f64], q: QBase, arg: f64, tol: f64) -> Result<SeriesResult> {
    let u: Vec<Complex> = upper.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let l: Vec<Complex> = lower.iter().map(|&v| Complex::new(v, 0.0)).collect();
    phi_series(&u, &l, q, Complex::new(arg, 0.0), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    fn q05() -> QBase {
        QBase::new(0.5).unwrap()
    }

    #[test]
    fn qbase_rejects_bad_values() {
        assert!(QBase::new(0.0).is_err());
        assert!(QBase::new(1.0).is_err());
        assert!(QBase::new(-0.3).is_err());
        assert!(QBase::new(f64::NAN).is_err());
    }

    #[test]
    fn qpoch_finite_empty_product() {
        assert_eq!(qpoch_finite(c(0.7), q05(), 0), c(1.0));
    }

    #[test]
    fn qpoch_finite_vanishing_first_factor() {
        assert_eq!(qpoch_finite(c(1.0), q05(), 3), c(0.0));
    }

    #[test]
    fn qpoch_finite_hand_product() {
        // (1 - 0.5)(1 - 0.25) = 0.375
        let v = qpoch_finite(c(0.5), q05(), 2);
        assert!((v - c(0.375)).norm() < 1e-15);
    }

    #[test]
    fn qpoch_int_negative_index() {
        // (x;q)_{-2} = 1/((1 - x/q)(1 - x/q^2))
        let x = c(0.3);
        let v = qpoch_int(x, q05(), -2).unwrap();
        let direct = 1.0 / ((1.0 - 0.6) * (1.0 - 1.2));
        assert!((v - c(direct)).norm() < 1e-14);
    }

    #[test]
    fn qpoch_inf_trivial_values() {
        assert_eq!(qpoch_inf(c(0.0), q05()).value, c(1.0));
        assert!(qpoch_inf(c(1.0), q05()).value.norm() < 1e-300);
    }

    #[test]
    fn qpoch_inf_frozen_value() {
        // oracle: direct product to 200 factors at 40-digit precision
        let v = qpoch_inf(c(0.5), q05());
        assert!((v.value.re - 0.2887880950866024212788997).abs() < 1e-15);
        // brute force double-precision product as an in-repo oracle
        let mut p = 1.0f64;
        let mut xq = 0.5f64;
        for _ in 0..200 {
            p *= 1.0 - xq;
            xq *= 0.5;
        }
        assert!((v.value.re - p).abs() < 1e-15);
    }

    #[test]
    fn theta_vanishes_at_one() {
        let t = theta(c(1.0), q05()).unwrap();
        assert!(t.value.norm() < 1e-300);
    }

    #[test]
    fn theta_rejects_zero() {
        assert!(theta(c(0.0), q05()).is_err());
    }

    #[test]
    fn theta_frozen_value() {
        // theta(-1; 0.5) = (-1;q)_inf (-0.5;q)_inf, 40-digit oracle
        let t = theta(c(-1.0), q05()).unwrap();
        assert!((t.value.re - 11.36911519959198743460764).abs() < 1e-12);
        let o = qpoch_inf(c(-1.0), q05()).value * qpoch_inf(c(-0.5), q05()).value;
        assert!((t.value - o).norm() < 1e-13 * o.norm());
    }

    #[test]
    fn theta_reflection() {
        // theta(x) = theta(q/x)
        let q = q05();
        for &x in &[0.3, -0.7, 2.4, 0.05] {
            let a = theta(c(x), q).unwrap().value;
            let b = theta(c(0.5 / x), q).unwrap().value;
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0), "x={x}");
        }
    }

    #[test]
    fn theta_shift_matches_direct() {
        let q = q05();
        for &(x, k) in &[(0.3, 0i64), (0.3, 1), (-0.7, -2), (0.45, 7), (-0.2, -9)] {
            let shifted = theta_shift(c(x), q, k).unwrap();
            let direct = theta(c(x * q.powi(k)), q).unwrap().value;
            assert!(
                (shifted - direct).norm() <= 1e-11 * direct.norm(),
                "x={x} k={k}: {shifted} vs {direct}"
            );
        }
    }

    #[test]
    fn qshifttransform_identity() {
        // (x q^{1-m};q)_inf = (-x)^m q^{-m(m-1)/2} (1/x;q)_m (qx;q)_inf
        let q = q05();
        for &(x, m) in &[(0.7, 5i64), (-0.45, 8), (1.3, 3)] {
            let lhs = qpoch_inf(c(x * q.powi(1 - m)), q).value;
            let rhs = Scaled::powi(c(-x), m)
                .mul(Scaled::powi(c(0.5), -(m * (m - 1)) / 2))
                .mul_complex(qpoch_finite(c(1.0 / x), q, m as u32))
                .mul_complex(qpoch_inf(c(0.5 * x), q).value)
                .to_complex();
            assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm(), "x={x} m={m}");
        }
    }

    #[test]
    fn phi_series_upper_one_gives_unity() {
        // an upper parameter 1 = q^0 terminates the series at the first term
        let v = phi_series(
            &[c(1.0), c(0.3), c(0.2)],
            &[c(0.5), c(0.6)],
            q05(),
            c(0.25),
            1e-13,
        )
        .unwrap();
        assert_eq!(v.value, c(1.0));
        assert!(v.err_estimate < 1e-14);
    }

    #[test]
    fn phi_series_frozen_3phi2() {
        // 3phi2((0.2,0.3,0.4);(0.5,0.6); 0.5, 0.25), 40-digit oracle
        let v = phi_series(
            &[c(0.2), c(0.3), c(0.4)],
            &[c(0.5), c(0.6)],
            q05(),
            c(0.25),
            1e-13,
        )
        .unwrap();
        assert!((v.value.re - 2.302291093059502857167114).abs() < 1e-14);
    }

    #[test]
    fn phi_series_q_gauss_sum() {
        // 2phi1(a,b;c;q,c/ab) = (c/a;q)_inf (c/b;q)_inf / ((c;q)_inf (c/ab;q)_inf)
        let q = q05();
        let (a, b, cc) = (0.3, 0.7, 0.1);
        let lhs = phi_series(&[c(a), c(b)], &[c(cc)], q, c(cc / (a * b)), 1e-14)
            .unwrap()
            .value;
        let rhs = qpoch_inf(c(cc / a), q).value * qpoch_inf(c(cc / b), q).value
            / (qpoch_inf(c(cc), q).value * qpoch_inf(c(cc / (a * b)), q).value);
        assert!((lhs - rhs).norm() < 1e-11 * rhs.norm());
    }

    #[test]
    fn phi_series_rejects_bad_lower() {
        // lower parameter q^{-2} makes (l;q)_k vanish at k = 2
        let r = phi_series(&[c(0.2)], &[c(4.0)], q05(), c(0.1), 1e-13);
        assert!(r.is_err());
    }

    #[test]
    fn phi_series_err_estimate_is_a_bound() {
        // doubling effort changes the value by less than the reported bound
        let q = q05();
        let loose = phi_series(&[c(0.2), c(0.9)], &[c(0.7)], q, c(0.8), 1e-6).unwrap();
        let tight = phi_series(&[c(0.2), c(0.9)], &[c(0.7)], q, c(0.8), 1e-14).unwrap();
        assert!(
            (loose.value - tight.value).norm() <= loose.err_estimate.max(1e-15),
            "diff {} vs err {}",
            (loose.value - tight.value).norm(),
            loose.err_estimate
        );
    }

    #[test]
    fn theta_product_identity() {
        // theta(xl, x/l, mn, m/n) - theta(xn, x/n, lm, m/l) = (m/l) theta(xm, x/m, ln, l/n)
        let q = q05();
        let draws = [
            (0.9, 0.4, -0.7, 1.3),
            (1.7, 0.23, 0.61, -0.45),
            (-0.32, 1.9, 0.77, 0.15),
        ];
        for &(x, l, m, n) in &draws {
            let th = |a: f64, b: f64, cc: f64, d: f64| {
                theta_multi(&[c(a), c(b), c(cc), c(d)], q).unwrap().value
            };
            let lhs = th(x * l, x / l, m * n, m / n) - th(x * n, x / n, l * m, m / l);
            let rhs = c(m / l) * th(x * m, x / m, l * n, l / n);
            assert!(
                (lhs - rhs).norm() <= 1e-11 * rhs.norm().max(1e-6),
                "draw {x} {l} {m} {n}"
            );
        }
    }
}
