//! The q-lattice `I = [-1, inf(z))_q`, weight functions, the operator `L`,
//! Jackson q-integration, inner products and the Wronskian.
//!
//! Points of `I` are `-q^k` (`k >= 0`, the `Neg` branch) and `z q^k`
//! (`k` any integer, the `Pos` branch). Everything here works on a finite
//! truncation window of the lattice; tails of doubly infinite sums are
//! estimated by geometric extrapolation, which is asymptotically exact for
//! the weights involved.

use crate::error::{Error, Result};
use crate::qseries::{self, QBase, SeriesResult};
use crate::scaled::Scaled;
use crate::Complex;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance (in log-q units) for the `V_z^gen` membership tests.
const GENERIC_TOL: f64 = 1e-9;

/// Parameter set `(q, a, b, c, z)`.
///
/// Constructors enforce the standard domain `V` (`a, b, c > 0` and
/// `ab, ac, bc < 1`, `z > 0`) or the compact polynomial regime
/// (`ab, qa/b, ac, qa/c < 1` and `bc < 0`).
#[derive(Clone, Copy, Debug)]
pub struct Parameters {
    pub q: QBase,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl Parameters {
    /// Parameters in `V` with `z > 0`.
    pub fn new(q: f64, a: f64, b: f64, c: f64, z: f64) -> Result<Self> {
        let q = QBase::new(q)?;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::domain(format!(
                "V requires a,b,c > 0 (got a={a}, b={b}, c={c})"
            )));
        }
        if !(a * b < 1.0) {
            return Err(Error::domain(format!("V requires ab < 1 (ab = {})", a * b)));
        }
        if !(a * c < 1.0) {
            return Err(Error::domain(format!("V requires ac < 1 (ac = {})", a * c)));
        }
        if !(b * c < 1.0) {
            return Err(Error::domain(format!("V requires bc < 1 (bc = {})", b * c)));
        }
        if !(z > 0.0) {
            return Err(Error::domain(format!("z must be positive (z = {z})")));
        }
        Ok(Parameters { q, a, b, c, z })
    }

    /// Parameters in the compact polynomial regime (`bc < 0`).
    pub fn new_polynomial(q: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        let q = QBase::new(q)?;
        let qv = q.get();
        if !(b * c < 0.0) {
            return Err(Error::domain(format!(
                "polynomial regime requires bc < 0 (bc = {})",
                b * c
            )));
        }
        for (name, v) in [
            ("ab", a * b),
            ("qa/b", qv * a / b),
            ("ac", a * c),
            ("qa/c", qv * a / c),
        ] {
            if !(v < 1.0) {
                return Err(Error::domain(format!(
                    "polynomial regime requires {name} < 1 ({name} = {v})"
                )));
            }
        }
        Ok(Parameters { q, a, b, c, z: 1.0 })
    }

    /// Is `v` within `tol` (in log-q units) of some integer power `q^k`?
    fn near_q_power(&self, v: f64, tol: f64) -> bool {
        if v <= 0.0 {
            return false;
        }
        let u = v.ln() / self.q.get().ln();
        (u - u.round()).abs() < tol
    }

    /// Membership in the dense subdomain `V_z^gen`.
    pub fn in_generic_domain(&self) -> bool {
        let (a, b, c, z) = (self.a, self.b, self.c, self.z);
        let probes = [
            a * a,
            b * b,
            c * c,
            a * b,
            a * c,
            b * c,
            a / b,
            a / c,
            (a * b * c * z).powi(2),
        ];
        probes.iter().all(|&v| !self.near_q_power(v, GENERIC_TOL))
    }

    pub fn qv(&self) -> f64 {
        self.q.get()
    }
}

/// Which branch of `I` a point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    /// `x = -q^k`, `k >= 0`.
    Neg,
    /// `x = z q^k`, `k` any integer.
    Pos,
}

/// A tagged point of the q-lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    pub branch: Branch,
    pub k: i32,
}

impl LatticePoint {
    pub fn neg(k: i32) -> Result<Self> {
        if k < 0 {
            return Err(Error::domain("Neg branch requires k >= 0"));
        }
        Ok(LatticePoint {
            branch: Branch::Neg,
            k,
        })
    }

    pub fn pos(k: i32) -> Self {
        LatticePoint {
            branch: Branch::Pos,
            k,
        }
    }

    /// Real coordinate of the point.
    pub fn value(&self, p: &Parameters) -> f64 {
        match self.branch {
            Branch::Neg => -p.q.powi(self.k as i64),
            Branch::Pos => p.z * p.q.powi(self.k as i64),
        }
    }

    /// The point `q * x` (one step towards the origin).
    pub fn step_in(&self) -> LatticePoint {
        LatticePoint {
            branch: self.branch,
            k: self.k + 1,
        }
    }

    /// The point `x / q` (one step away from the origin); `None` at `x = -1`.
    pub fn step_out(&self) -> Option<LatticePoint> {
        if self.branch == Branch::Neg && self.k == 0 {
            None
        } else {
            Some(LatticePoint {
                branch: self.branch,
                k: self.k - 1,
            })
        }
    }
}

/// Truncation window: Neg indices `0..=k_max_neg`, Pos indices
/// `k_min_pos..=k_max_pos`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeWindow {
    pub k_max_neg: i32,
    pub k_min_pos: i32,
    pub k_max_pos: i32,
}

impl LatticeWindow {
    pub fn new(k_max_neg: i32, k_min_pos: i32, k_max_pos: i32) -> Result<Self> {
        if k_max_neg < 0 || k_min_pos > k_max_pos {
            return Err(Error::domain("empty lattice window"));
        }
        Ok(LatticeWindow {
            k_max_neg,
            k_min_pos,
            k_max_pos,
        })
    }

    /// Default window; weights decay like `q^k` near zero and like `a^{2m}`
    /// at infinity, so these bounds give <= 1e-12 tails for `a <= 0.9`.
    pub fn default_window() -> Self {
        LatticeWindow {
            k_max_neg: 80,
            k_min_pos: -60,
            k_max_pos: 80,
        }
    }

    pub fn contains(&self, pt: LatticePoint) -> bool {
        match pt.branch {
            Branch::Neg => pt.k >= 0 && pt.k <= self.k_max_neg,
            Branch::Pos => pt.k >= self.k_min_pos && pt.k <= self.k_max_pos,
        }
    }

    /// Window shrunk by one index on each open end (the `x = -1` end is
    /// closed and keeps its sample).
    pub fn shrink(&self) -> Result<Self> {
        LatticeWindow::new(self.k_max_neg - 1, self.k_min_pos + 1, self.k_max_pos - 1)
    }

    /// All in-window points in ascending order of their real coordinate:
    /// `-1 < -q < ... < 0 < ... < z q < z < z/q < ...`.
    pub fn points_ascending(&self) -> Vec<LatticePoint> {
        let mut pts = Vec::with_capacity(
            (self.k_max_neg + 1) as usize + (self.k_max_pos - self.k_min_pos + 1) as usize,
        );
        for k in 0..=self.k_max_neg {
            pts.push(LatticePoint {
                branch: Branch::Neg,
                k,
            });
        }
        for k in (self.k_min_pos..=self.k_max_pos).rev() {
            pts.push(LatticePoint {
                branch: Branch::Pos,
                k,
            });
        }
        pts
    }

    pub fn len(&self) -> usize {
        (self.k_max_neg + 1) as usize + (self.k_max_pos - self.k_min_pos + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A complex-valued function sampled on a truncated lattice window.
#[derive(Clone, Debug)]
pub struct LatticeFunction {
    pub window: LatticeWindow,
    neg: Vec<Complex>,
    pos: Vec<Complex>,
}

impl LatticeFunction {
    pub fn zeros(window: LatticeWindow) -> Self {
        LatticeFunction {
            window,
            neg: alloc::vec![Complex::new(0.0, 0.0); (window.k_max_neg + 1) as usize],
            pos: alloc::vec![
                Complex::new(0.0, 0.0);
                (window.k_max_pos - window.k_min_pos + 1) as usize
            ],
        }
    }

    /// Sample a closure over the window. The closure receives the tagged
    /// point and its real coordinate.
    pub fn from_fn(
        window: LatticeWindow,
        p: &Parameters,
        mut f: impl FnMut(LatticePoint, f64) -> Complex,
    ) -> Self {
        let mut out = Self::zeros(window);
        for pt in window.points_ascending() {
            let x = pt.value(p);
            out.set(pt, f(pt, x));
        }
        out
    }

    /// Fallible sampling; aborts on the first evaluation error.
    pub fn try_from_fn(
        window: LatticeWindow,
        p: &Parameters,
        mut f: impl FnMut(LatticePoint, f64) -> Result<Complex>,
    ) -> Result<Self> {
        let mut out = Self::zeros(window);
        for pt in window.points_ascending() {
            let x = pt.value(p);
            out.set(pt, f(pt, x)?);
        }
        Ok(out)
    }

    pub fn get(&self, pt: LatticePoint) -> Result<Complex> {
        if !self.window.contains(pt) {
            return Err(Error::domain(format!(
                "lattice point ({:?}, {}) outside window",
                pt.branch, pt.k
            )));
        }
        Ok(match pt.branch {
            Branch::Neg => self.neg[pt.k as usize],
            Branch::Pos => self.pos[(pt.k - self.window.k_min_pos) as usize],
        })
    }

    pub fn set(&mut self, pt: LatticePoint, v: Complex) {
        match pt.branch {
            Branch::Neg => self.neg[pt.k as usize] = v,
            Branch::Pos => self.pos[(pt.k - self.window.k_min_pos) as usize] = v,
        }
    }

    /// Iterate `(point, value)` in ascending coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, Complex)> + '_ {
        self.window
            .points_ascending()
            .into_iter()
            .map(move |pt| (pt, self.get(pt).unwrap()))
    }
}

/// Coefficient `A(x) = a^2 (1 + 1/(abx)) (1 + 1/(acx))` of the operator.
pub fn coeff_a(x: f64, p: &Parameters) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::domain("A(x) undefined at x = 0"));
    }
    Ok(p.a * p.a * (1.0 + 1.0 / (p.a * p.b * x)) * (1.0 + 1.0 / (p.a * p.c * x)))
}

/// Coefficient `B(x) = (1 + q/(bcx)) (1 + 1/x)`; `B(-1) = 0`.
pub fn coeff_b(x: f64, p: &Parameters) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::domain("B(x) undefined at x = 0"));
    }
    Ok((1.0 + p.qv() / (p.b * p.c * x)) * (1.0 + 1.0 / x))
}

/// Weight `p(x) = (-abx, -acx;q)_inf / (-bcx, -qx;q)_inf`, strictly positive
/// on `I` for parameters in `V`.
pub fn weight_p(x: f64, p: &Parameters) -> Result<SeriesResult> {
    let q = p.q;
    let num = [
        Complex::new(-p.a * p.b * x, 0.0),
        Complex::new(-p.a * p.c * x, 0.0),
    ];
    let den = [Complex::new(-p.b * p.c * x, 0.0), Complex::new(-q.get() * x, 0.0)];
    scaled_poch_ratio(&num, &den, q)
}

/// Weight `r(x) = (1-q)^2/(qbc) * (-bcx, -qx;q)_inf / (-qabx, -qacx;q)_inf`.
pub fn weight_r(x: f64, p: &Parameters) -> Result<SeriesResult> {
    let q = p.q;
    let qv = q.get();
    let num = [
        Complex::new(-p.b * p.c * x, 0.0),
        Complex::new(-qv * x, 0.0),
    ];
    let den = [
        Complex::new(-qv * p.a * p.b * x, 0.0),
        Complex::new(-qv * p.a * p.c * x, 0.0),
    ];
    let pref = (1.0 - qv) * (1.0 - qv) / (qv * p.b * p.c);
    Ok(scaled_poch_ratio(&num, &den, q)?.scale(Complex::new(pref, 0.0)))
}

fn scaled_poch_ratio(num: &[Complex], den: &[Complex], q: QBase) -> Result<SeriesResult> {
    let mut acc = Scaled::ONE;
    let mut rel = 0.0;
    let mut n_terms = 0usize;
    for &x in num {
        let (v, err, n) = qseries::qpoch_inf_scaled(x, q);
        if v.is_zero() {
            return Ok(SeriesResult::exact(Complex::new(0.0, 0.0)));
        }
        rel += err / v.to_complex().norm().max(1e-300);
        acc = acc.mul(v);
        n_terms += n;
    }
    for &x in den {
        let (v, err, n) = qseries::qpoch_inf_scaled(x, q);
        if v.is_zero() {
            return Err(Error::pole(format!("(x;q)_inf with x = {x} vanishes")));
        }
        rel += err / v.to_complex().norm().max(1e-300);
        acc = acc.div(v);
        n_terms += n;
    }
    let value = acc.to_complex();
    Ok(SeriesResult {
        value,
        err_estimate: rel * value.norm(),
        n_terms,
    })
}

/// The positive constant `K = (1-q) z theta(-bcz, -qz) / theta(-abz, -acz)`
/// governing the weight asymptotics at lattice infinity.
pub fn const_k(p: &Parameters) -> Result<f64> {
    let q = p.q;
    let num = qseries::theta_multi_scaled(
        &[
            Complex::new(-p.b * p.c * p.z, 0.0),
            Complex::new(-q.get() * p.z, 0.0),
        ],
        q,
    )?;
    let den = qseries::theta_multi_scaled(
        &[
            Complex::new(-p.a * p.b * p.z, 0.0),
            Complex::new(-p.a * p.c * p.z, 0.0),
        ],
        q,
    )?;
    Ok((1.0 - q.get()) * p.z * num.div(den).to_complex().re)
}

/// q-difference operator `(D_q f)(x) = (f(x) - f(qx)) / ((1-q) x)`.
pub fn dq(f: &LatticeFunction, pt: LatticePoint, p: &Parameters) -> Result<Complex> {
    let fx = f.get(pt)?;
    let fqx = f.get(pt.step_in())?;
    let x = pt.value(p);
    Ok((fx - fqx) / ((1.0 - p.qv()) * x))
}

/// Apply `L = A (T_q - Id) + B (T_{q^{-1}} - Id)` with the end-point rule
/// `(Lf)(-1) = A(-1)(f(-q) - f(-1))`. The output window shrinks by one
/// index on each open end; boundary samples are dropped rather than
/// extrapolated.
pub fn apply_l(f: &LatticeFunction, p: &Parameters) -> Result<LatticeFunction> {
    let win = f.window.shrink()?;
    let mut out = LatticeFunction::zeros(win);
    for pt in win.points_ascending() {
        let x = pt.value(p);
        let fx = f.get(pt)?;
        let fqx = f.get(pt.step_in())?;
        let a = coeff_a(x, p)?;
        let v = match pt.step_out() {
            None => Complex::new(a, 0.0) * (fqx - fx),
            Some(up) => {
                let b = coeff_b(x, p)?;
                Complex::new(a, 0.0) * (fqx - fx) + Complex::new(b, 0.0) * (f.get(up)? - fx)
            }
        };
        out.set(pt, v);
    }
    Ok(out)
}

/// Apply `L` through its factored self-adjoint form
/// `p(x) (D_q (r(.) D_q f))(x/q)` on the interior and
/// `-q p(x) r(x) / ((1-q)x) (D_q f)(x)` at `x = -1`.
pub fn apply_l_selfadjoint_form(f: &LatticeFunction, p: &Parameters) -> Result<LatticeFunction> {
    let win = f.window.shrink()?;
    let qv = p.qv();
    let mut out = LatticeFunction::zeros(win);
    for pt in win.points_ascending() {
        let x = pt.value(p);
        let px = weight_p(x, p)?.value.re;
        let v = match pt.step_out() {
            None => {
                let rx = weight_r(x, p)?.value.re;
                let dqf = dq(f, pt, p)?;
                Complex::new(-qv * px * rx / ((1.0 - qv) * x), 0.0) * dqf
            }
            Some(up) => {
                // (D_q (r D_q f))(x/q) = (r(x/q) D_qf(x/q) - r(x) D_qf(x)) / ((1-q) x/q)
                let xq = up.value(p);
                let r_up = weight_r(xq, p)?.value.re;
                let r_x = weight_r(x, p)?.value.re;
                let d_up = dq(f, up, p)?;
                let d_x = dq(f, pt, p)?;
                Complex::new(px, 0.0) * (Complex::new(r_up, 0.0) * d_up - Complex::new(r_x, 0.0) * d_x)
                    / ((1.0 - qv) * xq)
            }
        };
        out.set(pt, v);
    }
    Ok(out)
}

/// Integration bound for the Jackson q-integral over `I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    /// The closed end-point `-1`.
    MinusOne,
    /// A lattice point (integration runs up to and including it).
    Point(LatticePoint),
    /// The open end `inf(z)`.
    Infinity,
}

/// Jackson q-integral `int_0^gamma f(x) d_q x = (1-q) sum_{n>=0} f(gamma q^n) gamma q^n`
/// for a plain function of the coordinate.
pub fn jackson_zero_to(
    gamma: f64,
    q: QBase,
    n_terms: usize,
    mut f: impl FnMut(f64) -> Complex,
) -> SeriesResult {
    let qv = q.get();
    let mut sum = Complex::new(0.0, 0.0);
    let mut x = gamma;
    let mut last = 0.0f64;
    for _ in 0..n_terms {
        let t = f(x) * Complex::new(x, 0.0);
        sum += t;
        last = t.norm();
        x *= qv;
    }
    let tail = last * qv / (1.0 - qv);
    SeriesResult {
        value: sum * (1.0 - qv),
        err_estimate: tail * (1.0 - qv),
        n_terms,
    }
}

/// Weight of a lattice point in the measure `d_q x / p(x)`:
/// `(1-q) |x| / p(x)`.
pub fn point_weight(pt: LatticePoint, p: &Parameters) -> Result<f64> {
    let x = pt.value(p);
    let px = weight_p(x, p)?.value.re;
    if !(px > 0.0) {
        return Err(Error::domain(format!("weight p({x}) not positive: {px}")));
    }
    Ok((1.0 - p.qv()) * x.abs() / px)
}

/// Jackson q-integral of a sampled function between lattice bounds,
/// per the decomposition `int_{-1}^{inf(z)} = int_0^{inf(z)} - int_0^{-1}`.
/// Integrating over all of `I` amounts to `sum f(x) (1-q) |x|` with a
/// geometric tail estimate at each open window end.
pub fn jackson_integral(
    f: &LatticeFunction,
    lower: Bound,
    upper: Bound,
    p: &Parameters,
) -> Result<SeriesResult> {
    let w = f.window;
    let in_range = |pt: LatticePoint| -> Result<bool> {
        let x = pt.value(p);
        let lo_ok = match lower {
            Bound::MinusOne => true,
            Bound::Point(lp) => x >= lp.value(p) - 1e-300,
            Bound::Infinity => false,
        };
        let hi_ok = match upper {
            Bound::MinusOne => x <= -1.0 + 1e-300,
            Bound::Point(up) => x <= up.value(p) * (1.0 + 1e-14) + 1e-300,
            Bound::Infinity => true,
        };
        Ok(lo_ok && hi_ok)
    };
    let qv = p.qv();
    let mut sum = Complex::new(0.0, 0.0);
    let mut boundary_terms: [f64; 3] = [0.0; 3];
    for pt in w.points_ascending() {
        if !in_range(pt)? {
            continue;
        }
        let x = pt.value(p);
        let t = f.get(pt)? * Complex::new((1.0 - qv) * x.abs(), 0.0);
        sum += t;
        // track magnitudes at the three open ends for the tail estimate
        if pt.branch == Branch::Neg && pt.k == w.k_max_neg {
            boundary_terms[0] = t.norm();
        }
        if pt.branch == Branch::Pos && pt.k == w.k_max_pos {
            boundary_terms[1] = t.norm();
        }
        if pt.branch == Branch::Pos && pt.k == w.k_min_pos {
            boundary_terms[2] = t.norm();
        }
    }
    // geometric tails: towards zero terms scale ~ q, towards infinity the
    // caller's integrand must decay; estimate from the last sample assuming
    // ratio q on the inner ends and 1/2 at worst on the outer end.
    let tail = (boundary_terms[0] + boundary_terms[1]) * qv / (1.0 - qv) + boundary_terms[2];
    Ok(SeriesResult {
        value: sum,
        err_estimate: tail,
        n_terms: w.len(),
    })
}

/// Inner product `<f, g> = int_{-1}^{inf(z)} f conj(g) d_q x / p(x)` over the
/// common window, with geometric tail estimation on the three open ends.
pub fn inner_product(f: &LatticeFunction, g: &LatticeFunction, p: &Parameters) -> Result<SeriesResult> {
    if f.window != g.window {
        return Err(Error::domain("inner product windows differ"));
    }
    inner_product_truncated(
        f,
        g,
        p,
        f.window.k_max_neg,
        f.window.k_min_pos,
        f.window.k_max_pos,
    )
}

/// Truncated inner product `<f, g>_{k; l, m}` with explicit cut indices:
/// Neg branch summed over `0..=k`, Pos branch over `l..=m`.
pub fn inner_product_truncated(
    f: &LatticeFunction,
    g: &LatticeFunction,
    p: &Parameters,
    k: i32,
    l: i32,
    m: i32,
) -> Result<SeriesResult> {
    let mut sum = Complex::new(0.0, 0.0);
    let mut ends = [0.0f64; 3];
    for kk in 0..=k {
        let pt = LatticePoint::neg(kk)?;
        let w = point_weight(pt, p)?;
        let t = f.get(pt)? * g.get(pt)?.conj() * w;
        sum += t;
        if kk == k {
            ends[0] = t.norm();
        }
    }
    for kk in l..=m {
        let pt = LatticePoint::pos(kk);
        let w = point_weight(pt, p)?;
        let t = f.get(pt)? * g.get(pt)?.conj() * w;
        sum += t;
        if kk == m {
            ends[1] = t.norm();
        }
        if kk == l {
            ends[2] = t.norm();
        }
    }
    let qv = p.qv();
    // inner ends decay at least like q; the outer end must be checked by the
    // caller (non-decaying tails flag as convergence errors)
    let tail = (ends[0] + ends[1]) * qv / (1.0 - qv) + 2.0 * ends[2];
    if ends[2] > 1e3 * (1.0 + sum.norm()) {
        return Err(Error::convergence(
            "inner product tail not decaying at lattice infinity",
        ));
    }
    Ok(SeriesResult {
        value: sum,
        err_estimate: tail,
        n_terms: (k + 1 + m - l + 1) as usize,
    })
}

/// Discrete Wronskian
/// `W(f,g)(x) = q r(x)/((1-q)x) (f(x) g(qx) - f(qx) g(x))`.
pub fn wronskian(
    f: &LatticeFunction,
    g: &LatticeFunction,
    pt: LatticePoint,
    p: &Parameters,
) -> Result<Complex> {
    let x = pt.value(p);
    let rx = weight_r(x, p)?.value.re;
    let qv = p.qv();
    let fx = f.get(pt)?;
    let gx = g.get(pt)?;
    let fqx = f.get(pt.step_in())?;
    let gqx = g.get(pt.step_in())?;
    Ok(Complex::new(qv * rx / ((1.0 - qv) * x), 0.0) * (fx * gqx - fqx * gx))
}

/// Second defining form of the Wronskian,
/// `q r(x) ((D_q f)(x) g(x) - f(x) (D_q g)(x))`; must agree with
/// [`wronskian`].
pub fn wronskian_dq_form(
    f: &LatticeFunction,
    g: &LatticeFunction,
    pt: LatticePoint,
    p: &Parameters,
) -> Result<Complex> {
    let x = pt.value(p);
    let rx = weight_r(x, p)?.value.re;
    let qv = p.qv();
    Ok(Complex::new(qv * rx, 0.0) * (dq(f, pt, p)? * g.get(pt)? - f.get(pt)? * dq(g, pt, p)?))
}

/// Pointwise Wronskian of two scalar evaluators at a lattice point; used when
/// the functions are given by closed-form evaluations rather than samples.
pub fn wronskian_eval(
    mut f: impl FnMut(f64) -> Result<Complex>,
    mut g: impl FnMut(f64) -> Result<Complex>,
    x: f64,
    p: &Parameters,
) -> Result<Complex> {
    let qv = p.qv();
    let rx = weight_r(x, p)?.value.re;
    let fx = f(x)?;
    let gx = g(x)?;
    let fqx = f(qv * x)?;
    let gqx = g(qv * x)?;
    Ok(Complex::new(qv * rx / ((1.0 - qv) * x), 0.0) * (fx * gqx - fqx * gx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p0() -> Parameters {
        Parameters::new(0.5, 0.4, 0.5, 0.6, 1.0).unwrap()
    }

    fn small_window() -> LatticeWindow {
        LatticeWindow::new(30, -20, 30).unwrap()
    }

    #[test]
    fn parameter_domain_validation() {
        assert!(Parameters::new(0.5, 0.4, 0.5, 0.6, 1.0).is_ok());
        assert!(Parameters::new(0.5, -0.4, 0.5, 0.6, 1.0).is_err());
        assert!(Parameters::new(0.5, 2.5, 0.5, 0.6, 1.0).is_err()); // ab >= 1
        assert!(Parameters::new(0.5, 0.4, 0.5, 0.6, -1.0).is_err());
        assert!(Parameters::new(0.5, 0.4, 0.5, -0.6, 1.0).is_err()); // bc < 0 not in V
        assert!(Parameters::new_polynomial(0.5, 0.4, 0.5, -0.6).is_ok());
        assert!(Parameters::new_polynomial(0.5, 0.4, 0.5, 0.6).is_err());
    }

    #[test]
    fn generic_domain_detects_q_powers() {
        let good = Parameters::new(0.5, 0.37, 0.61, 0.53, 1.1).unwrap();
        assert!(good.in_generic_domain());
        // a/b = q exactly -> not generic
        let bad = Parameters::new(0.5, 0.3, 0.6, 0.53, 1.1).unwrap();
        assert!(!bad.in_generic_domain());
        // P0 itself has b = q, so b^2 lands on q^2
        assert!(!p0().in_generic_domain());
    }

    #[test]
    fn lattice_point_values() {
        let p = p0();
        assert_eq!(LatticePoint::neg(0).unwrap().value(&p), -1.0);
        assert_eq!(LatticePoint::neg(2).unwrap().value(&p), -0.25);
        assert_eq!(LatticePoint::pos(-1).value(&p), 2.0);
        assert!(LatticePoint::neg(-1).is_err());
    }

    #[test]
    fn coeff_b_vanishes_at_minus_one_and_endpoint() {
        let p = p0();
        assert!(coeff_b(-1.0, &p).unwrap().abs() < 1e-15);
        // first factor vanishes at x = -q/bc
        let x = -p.qv() / (p.b * p.c);
        assert!(coeff_b(x, &p).unwrap().abs() < 1e-15);
        assert!(coeff_b(0.0, &p).is_err());
    }

    #[test]
    fn coeff_a_hand_value() {
        // a^2 (1 + 1/ab)(1 + 1/ac) at P0, x = 1: 0.16 * 6 * (1 + 1/0.24) = 4.96
        let p = p0();
        let v = coeff_a(1.0, &p).unwrap();
        assert!((v - 4.96).abs() < 1e-13, "{v}");
    }

    #[test]
    fn weight_r_origin_limit() {
        // r(0^+) = (1-q)^2 / (qbc) = r(0^-)
        let p = p0();
        let expect = (1.0 - 0.5f64).powi(2) / (0.5 * 0.5 * 0.6);
        let rp = weight_r(p.z * p.q.powi(45), &p).unwrap().value.re;
        let rm = weight_r(-p.q.powi(45), &p).unwrap().value.re;
        assert!((rp - expect).abs() < 1e-10);
        assert!((rm - expect).abs() < 1e-10);
    }

    #[test]
    fn weight_p_positive_on_lattice() {
        let p = p0();
        for pt in small_window().points_ascending() {
            let v = weight_p(pt.value(&p), &p).unwrap().value.re;
            assert!(v > 0.0, "p({}) = {v}", pt.value(&p));
        }
    }

    #[test]
    fn weight_p_asymptotics_give_const_k() {
        // (1-q) z q^{-m} / p(z q^{-m}) = K a^{-2m} (1 + O(q^m))
        let p = p0();
        let k = const_k(&p).unwrap();
        assert!(k > 0.0);
        let m = 40;
        let x = p.z * p.q.powi(-m);
        let w = (1.0 - p.qv()) * x / weight_p(x, &p).unwrap().value.re;
        let predicted = k * p.a.powi(-2 * m as i32);
        assert!(
            ((w / predicted) - 1.0).abs() < 1e-8,
            "ratio {} vs 1",
            w / predicted
        );
    }

    #[test]
    fn weights_near_zero_are_order_qk() {
        // (1-q) q^k / p(-q^k) = O(q^k), same on the Pos branch
        let p = p0();
        for k in 20..=60 {
            let neg = point_weight(LatticePoint::neg(k).unwrap(), &p).unwrap();
            let pos = point_weight(LatticePoint::pos(k), &p).unwrap();
            let qk = p.q.powi(k as i64);
            assert!(neg / qk < 2.0 && neg / qk > 0.2, "k={k} ratio={}", neg / qk);
            assert!(pos / qk < 2.0 && pos / qk > 0.2);
        }
    }

    #[test]
    fn const_k_two_evaluation_routes() {
        // direct vs theta_shift-normalized evaluation
        let p = p0();
        let direct = const_k(&p).unwrap();
        let q = p.q;
        let th = |x: f64, s: i64| qseries::theta_shift(Complex::new(x, 0.0), q, s).unwrap().re;
        // shift each argument by q^2 and unshift through the factors
        let num = th(-p.b * p.c * p.z * q.powi(-2), 2) * th(-q.get() * p.z * q.powi(-2), 2);
        let den = th(-p.a * p.b * p.z * q.powi(-2), 2) * th(-p.a * p.c * p.z * q.powi(-2), 2);
        let alt = (1.0 - q.get()) * p.z * num / den;
        assert!((direct - alt).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn apply_l_kills_constants() {
        let p = p0();
        let f = LatticeFunction::from_fn(small_window(), &p, |_, _| Complex::new(1.0, 0.0));
        let lf = apply_l(&f, &p).unwrap();
        for (_, v) in lf.iter() {
            assert!(v.norm() < 1e-13);
        }
        let lf2 = apply_l_selfadjoint_form(&f, &p).unwrap();
        for (_, v) in lf2.iter() {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn apply_l_forms_agree() {
        let p = p0();
        // pseudo-random but deterministic samples
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let f = LatticeFunction::from_fn(small_window(), &p, |_, _| Complex::new(rnd(), rnd()));
        let l1 = apply_l(&f, &p).unwrap();
        let l2 = apply_l_selfadjoint_form(&f, &p).unwrap();
        let mut scale = 0.0f64;
        for (_, v) in l1.iter() {
            scale = scale.max(v.norm());
        }
        for (pt, v) in l1.iter() {
            let d = (v - l2.get(pt).unwrap()).norm();
            assert!(d <= 1e-11 * scale, "disagree at {:?} {}: {d}", pt.branch, pt.k);
        }
        // f(x) = x as well; restrict to |x| >= q^10 where applying the
        // second order operator keeps full double precision (its
        // coefficients grow like 1/(bc x^2) towards the origin)
        let wx = LatticeWindow::new(10, -20, 10).unwrap();
        let g = LatticeFunction::from_fn(wx, &p, |_, x| Complex::new(x, 0.0));
        let l1 = apply_l(&g, &p).unwrap();
        let l2 = apply_l_selfadjoint_form(&g, &p).unwrap();
        for (pt, v) in l1.iter() {
            assert!((v - l2.get(pt).unwrap()).norm() <= 1e-11 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn dq_basics() {
        let p = p0();
        let f = LatticeFunction::from_fn(small_window(), &p, |_, _| Complex::new(3.25, -1.0));
        assert!(dq(&f, LatticePoint::pos(0), &p).unwrap().norm() < 1e-14);
        let g = LatticeFunction::from_fn(small_window(), &p, |_, x| Complex::new(x, 0.0));
        for pt in [LatticePoint::pos(2), LatticePoint::neg(1).unwrap()] {
            let v = dq(&g, pt, &p).unwrap();
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-13);
        }
        // out of window
        assert!(dq(&g, LatticePoint::pos(-21), &p).is_err());
    }

    #[test]
    fn dq_product_rule() {
        // (D_q(fg))(x) = (D_q f)(x) g(x) + f(qx) (D_q g)(x)
        let p = p0();
        let w = small_window();
        let f = LatticeFunction::from_fn(w, &p, |_, x| Complex::new(x * x - 0.3, 0.5 * x));
        let g = LatticeFunction::from_fn(w, &p, |_, x| Complex::new((1.0 + x * x).recip(), x));
        let fg = LatticeFunction::from_fn(w, &p, |pt, _| {
            f.get(pt).unwrap() * g.get(pt).unwrap()
        });
        for pt in [LatticePoint::pos(1), LatticePoint::pos(-3), LatticePoint::neg(2).unwrap()] {
            let lhs = dq(&fg, pt, &p).unwrap();
            let rhs = dq(&f, pt, &p).unwrap() * g.get(pt).unwrap()
                + f.get(pt.step_in()).unwrap() * dq(&g, pt, &p).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn jackson_geometric_sums() {
        let q = QBase::new(0.5).unwrap();
        // int_0^gamma 1 d_q x = gamma
        let v = jackson_zero_to(0.7, q, 200, |_| Complex::new(1.0, 0.0));
        assert!((v.value.re - 0.7).abs() < 1e-13);
        // int_0^1 x d_q x = 1/(1+q)
        let v = jackson_zero_to(1.0, q, 200, |x| Complex::new(x, 0.0));
        assert!((v.value.re - 1.0 / 1.5).abs() < 1e-13);
    }

    #[test]
    fn jackson_three_point_support() {
        let p = p0();
        let w = small_window();
        let pts = [
            LatticePoint::neg(2).unwrap(),
            LatticePoint::pos(0),
            LatticePoint::pos(3),
        ];
        let vals = [
            Complex::new(1.5, 0.0),
            Complex::new(-2.0, 1.0),
            Complex::new(0.25, 0.0),
        ];
        let mut f = LatticeFunction::zeros(w);
        for (pt, v) in pts.iter().zip(vals.iter()) {
            f.set(*pt, *v);
        }
        let got = jackson_integral(&f, Bound::MinusOne, Bound::Infinity, &p).unwrap();
        let mut expect = Complex::new(0.0, 0.0);
        for (pt, v) in pts.iter().zip(vals.iter()) {
            expect += *v * (1.0 - p.qv()) * pt.value(&p).abs();
        }
        assert!((got.value - expect).norm() < 1e-14);
    }

    #[test]
    fn inner_product_spike_and_symmetry() {
        let p = p0();
        let w = small_window();
        let spike_pt = LatticePoint::pos(2);
        let mut d = LatticeFunction::zeros(w);
        d.set(spike_pt, Complex::new(1.0, 0.0));
        let ip = inner_product(&d, &d, &p).unwrap().value.re;
        let expect = point_weight(spike_pt, &p).unwrap();
        assert!((ip - expect).abs() < 1e-14 * expect);

        let mut state = 1234567u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let f = LatticeFunction::from_fn(w, &p, |_, _| Complex::new(rnd(), rnd()));
        let g = LatticeFunction::from_fn(w, &p, |_, _| Complex::new(rnd(), rnd()));
        let fg = inner_product(&f, &g, &p).unwrap().value;
        let gf = inner_product(&g, &f, &p).unwrap().value;
        assert!((fg - gf.conj()).norm() < 1e-12 * fg.norm());
    }

    #[test]
    fn symmetry_defect_vanishes_for_finite_support() {
        // <Lf, g> = <f, Lg> exactly for finitely supported f, g
        let p = p0();
        let w = small_window();
        let mut f = LatticeFunction::zeros(w);
        let mut g = LatticeFunction::zeros(w);
        f.set(LatticePoint::pos(1), Complex::new(1.0, -0.5));
        f.set(LatticePoint::neg(3).unwrap(), Complex::new(0.7, 0.0));
        g.set(LatticePoint::pos(0), Complex::new(-0.3, 0.2));
        g.set(LatticePoint::pos(2), Complex::new(1.1, 0.4));
        g.set(LatticePoint::neg(0).unwrap(), Complex::new(0.9, 0.0));
        let lf = apply_l(&f, &p).unwrap();
        let lg = apply_l(&g, &p).unwrap();
        let wsh = lf.window;
        let fr = LatticeFunction::from_fn(wsh, &p, |pt, _| f.get(pt).unwrap());
        let gr = LatticeFunction::from_fn(wsh, &p, |pt, _| g.get(pt).unwrap());
        let lhs = inner_product(&lf, &gr, &p).unwrap().value;
        let rhs = inner_product(&fr, &lg, &p).unwrap().value;
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn truncated_symmetry_matches_boundary_wronskians() {
        // <Lf,g>_{k;l,m} - <f,Lg>_{k;l,m}
        //   = W(f, conj g)(z q^{l-1}) - W(f, conj g)(z q^m) + W(f, conj g)(-q^k)
        let p = p0();
        let w = small_window();
        let mut state = 42u64;
        let mut rnd = move || {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let f = LatticeFunction::from_fn(w, &p, |_, x| Complex::new(rnd(), rnd()) / (1.0 + x * x));
        let g = LatticeFunction::from_fn(w, &p, |_, x| Complex::new(rnd(), rnd()) / (1.0 + x * x));
        let lf = apply_l(&f, &p).unwrap();
        let lg = apply_l(&g, &p).unwrap();
        let (kc, lc, mc) = (10, -8, 12);
        let lhs = inner_product_truncated(&lf, &g, &p, kc, lc, mc).unwrap().value
            - inner_product_truncated(&f, &lg, &p, kc, lc, mc).unwrap().value;
        let gbar = LatticeFunction::from_fn(w, &p, |pt, _| g.get(pt).unwrap().conj());
        let rhs = wronskian(&f, &gbar, LatticePoint::pos(lc - 1), &p).unwrap()
            - wronskian(&f, &gbar, LatticePoint::pos(mc), &p).unwrap()
            + wronskian(&f, &gbar, LatticePoint::neg(kc).unwrap(), &p).unwrap();
        assert!(
            (lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()),
            "lhs {lhs} rhs {rhs}"
        );
    }

    #[test]
    fn wronskian_antisymmetry_and_forms() {
        let p = p0();
        let w = small_window();
        let f = LatticeFunction::from_fn(w, &p, |_, x| Complex::new(x.sin(), x * 0.2));
        let g = LatticeFunction::from_fn(w, &p, |_, x| Complex::new(1.0 / (1.0 + x * x), -x));
        let pt = LatticePoint::pos(1);
        assert!(wronskian(&f, &f, pt, &p).unwrap().norm() < 1e-14);
        let wfg = wronskian(&f, &g, pt, &p).unwrap();
        let wgf = wronskian(&g, &f, pt, &p).unwrap();
        assert!((wfg + wgf).norm() < 1e-13 * wfg.norm());
        let alt = wronskian_dq_form(&f, &g, pt, &p).unwrap();
        assert!((wfg - alt).norm() <= 1e-12 * wfg.norm());
        assert!(wronskian(&f, &g, LatticePoint::pos(-21), &p).is_err());
    }

    #[test]
    fn csv_window_shrinks() {
        let w = LatticeWindow::new(3, -2, 4).unwrap();
        let s = w.shrink().unwrap();
        assert_eq!(s.k_max_neg, 2);
        assert_eq!(s.k_min_pos, -1);
        assert_eq!(s.k_max_pos, 3);
        assert!(LatticeWindow::new(0, 3, 2).is_err());
    }
}
