//! Quadrature rules: generalized Gauss–Laguerre, adaptive Gauss–Kronrod and
//! summation of slowly converging series.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SupouError};

/// Nodes and weights for `∫_0^∞ x^a e^{−x} f(x) dx ≈ Σ w_k f(x_k)`.
#[derive(Debug, Clone)]
pub struct LaguerreRule {
    pub a: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub const MIN_LAGUERRE_NODES: usize = 32;
pub const MAX_LAGUERRE_NODES: usize = 4096;

type RuleCache = Mutex<HashMap<(usize, u64), Arc<LaguerreRule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached `n`-point rule for the weight `x^a e^{−x}`, `a > −1`.
pub fn laguerre_rule(n: usize, a: f64) -> Arc<LaguerreRule> {
    assert!(a > -1.0 && n >= 1);
    let key = (n, a.to_bits());
    if let Some(rule) = cache().lock().unwrap().get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(golub_welsch(n, a));
    cache().lock().unwrap().insert(key, rule.clone());
    rule
}

fn golub_welsch(n: usize, a: f64) -> LaguerreRule {
    let mut diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + a + 1.0).collect();
    let mut off: Vec<f64> = (0..n)
        .map(|k| if k == 0 { 0.0 } else { ((k as f64) * (k as f64 + a)).sqrt() })
        .collect();
    // off[k] couples k-1 and k; shift so off[i] couples i and i+1.
    off.rotate_left(1);
    off[n - 1] = 0.0;
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first);
    let ln_mu0 = ln_gamma(a + 1.0);
    let mut pairs: Vec<(f64, f64)> = diag
        .iter()
        .zip(&first)
        .map(|(&x, &z)| (x, if z == 0.0 { 0.0 } else { (ln_mu0 + 2.0 * z.abs().ln()).exp() }))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    LaguerreRule {
        a,
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the first
/// component of every eigenvector.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64, &mut [f64]), a: f64, b: f64, m: usize, buf: &mut [f64]) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; m];
    let mut gauss = vec![0.0; m];
    f(c, buf);
    for j in 0..m {
        kron[j] += GK_WEIGHTS_K[7] * buf[j];
        gauss[j] += GK_WEIGHTS_G[3] * buf[j];
    }
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        for x in [c - dx, c + dx] {
            f(x, buf);
            for j in 0..m {
                kron[j] += GK_WEIGHTS_K[i] * buf[j];
                if i % 2 == 1 {
                    gauss[j] += GK_WEIGHTS_G[i / 2] * buf[j];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for j in 0..m {
        kron[j] *= h;
        gauss[j] *= h;
        err = err.max((kron[j] - gauss[j]).abs());
    }
    (kron, err)
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of an `m`-vector valued
/// function on the finite interval `[a, b]`. Stops when the summed error
/// estimate drops below `max(abs_tol, rel_tol·|I|_∞)`.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64, &mut [f64]),
    a: f64,
    b: f64,
    m: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(vec![0.0; m]);
    }
    let mut buf = vec![0.0; m];
    let (v, e) = gk15(&mut f, a, b, m, &mut buf);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let mut total = vec![0.0; m];
        let mut err = 0.0;
        for p in &pieces {
            for j in 0..m {
                total[j] += p.2[j];
            }
            err += p.3;
        }
        if total.iter().any(|x| !x.is_finite()) {
            return Err(SupouError::Quadrature("integrand produced non-finite values".into()));
        }
        let scale = total.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if err <= abs_tol.max(rel_tol * scale) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(SupouError::Quadrature(format!(
                "adaptive quadrature did not reach tolerance (error estimate {err:.3e})"
            )));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid, m, &mut buf);
        let (v2, e2) = gk15(&mut f, mid, hi, m, &mut buf);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Scalar convenience wrapper around [`integrate_adaptive`].
pub fn integrate_scalar(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let v = integrate_adaptive(|x, out| out[0] = f(x), a, b, 1, abs_tol, rel_tol)?;
    Ok(v[0])
}

/// `∫_0^∞ f(x) dx` through `x = t/(1−t)`.
pub fn integrate_half_line(mut f: impl FnMut(f64) -> f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    integrate_scalar(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let x = t / (1.0 - t);
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            let v = f(x) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Outcome of summing `Σ_{n≥1} t_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesSum<T> {
    Converged { value: T, terms: usize },
    Diverged { partial: T, terms: usize },
    Undecidable { partial: T, terms: usize },
}

/// Sums a series of nonnegative-norm terms in dyadic blocks.
///
/// Block sums of a power-law tail shrink geometrically, so the tail after a
/// block is extrapolated from the ratio of the last two block sums. A ratio
/// that stays at or above 0.97 is reported as divergence.
pub fn sum_series<T>(
    mut term: impl FnMut(usize) -> Result<T>,
    zero: T,
    add: impl Fn(&T, &T) -> T,
    scale: impl Fn(&T, f64) -> T,
    norm: impl Fn(&T) -> f64,
    tol: f64,
    max_terms: usize,
) -> Result<SeriesSum<T>>
where
    T: Clone,
{
    const FIRST_BLOCK: usize = 16;
    let mut partial = zero.clone();
    for n in 1..=FIRST_BLOCK {
        partial = add(&partial, &term(n)?);
    }
    let mut n_done = FIRST_BLOCK;
    let mut prev_block: Option<T> = None;
    let mut prev_extrap: Option<T> = None;
    let mut slow_blocks = 0;
    while 2 * n_done <= max_terms {
        let mut block = zero.clone();
        for n in (n_done + 1)..=(2 * n_done) {
            block = add(&block, &term(n)?);
        }
        n_done *= 2;
        partial = add(&partial, &block);
        let bn = norm(&block);
        if bn == 0.0 {
            if prev_block.as_ref().map(|b| norm(b) == 0.0).unwrap_or(false) {
                return Ok(SeriesSum::Converged { value: partial, terms: n_done });
            }
            prev_block = Some(block);
            continue;
        }
        if let Some(pb) = &prev_block {
            let pn = norm(pb);
            let ratio = if pn > 0.0 { bn / pn } else { f64::INFINITY };
            if ratio >= 0.97 {
                slow_blocks += 1;
                if slow_blocks >= 3 && n_done >= 1024 {
                    return Ok(SeriesSum::Diverged { partial, terms: n_done });
                }
            } else {
                slow_blocks = 0;
            }
            if ratio < 0.9 {
                let extrap = add(&partial, &scale(&block, ratio / (1.0 - ratio)));
                if let Some(pe) = &prev_extrap {
                    let diff = norm(&add(&extrap, &scale(pe, -1.0)));
                    if diff <= tol * norm(&extrap) || norm(&extrap) == 0.0 {
                        return Ok(SeriesSum::Converged { value: extrap, terms: n_done });
                    }
                }
                prev_extrap = Some(extrap);
            } else {
                prev_extrap = None;
            }
        }
        prev_block = Some(block);
    }
    Ok(SeriesSum::Undecidable { partial, terms: n_done })
}

/// Scalar form of [`sum_series`].
pub fn sum_series_scalar(term: impl FnMut(usize) -> Result<f64>, tol: f64, max_terms: usize) -> Result<SeriesSum<f64>> {
    sum_series(term, 0.0, |a, b| a + b, |a, s| a * s, |a| a.abs(), tol, max_terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    #[test]
    fn laguerre_integrates_polynomials_exactly() {
        for &a in &[-0.5, 0.0, 0.7, 2.3] {
            let rule = laguerre_rule(12, a);
            for k in 0..10 {
                let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k)).sum();
                let want = gamma(a + 1.0 + k as f64);
                assert!((got - want).abs() <= 1e-11 * want, "a={a} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn large_rule_is_well_formed() {
        let rule = laguerre_rule(MAX_LAGUERRE_NODES, -0.99);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - gamma(0.01)).abs() < 1e-9 * gamma(0.01));
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate_scalar(|x| x.powf(-0.5), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let v = integrate_half_line(|x| (-x).exp(), 1e-13, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn series_verdicts() {
        let zeta3 = 1.2020569031595942;
        match sum_series_scalar(|n| Ok((n as f64).powi(-3)), 1e-10, 1 << 22).unwrap() {
            SeriesSum::Converged { value, .. } => assert!((value - zeta3).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            sum_series_scalar(|n| Ok(1.0 / n as f64), 1e-10, 1 << 22).unwrap(),
            SeriesSum::Diverged { .. }
        ));
    }
}
