//! Special functions not provided by statrs.

/// Riemann zeta function for real `s > 1` (Euler–Maclaurin, N = 12).
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta requires s > 1");
    const N: usize = 12;
    // B_{2k} / (2k)!
    const B: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
    ];
    let mut sum: f64 = (1..N).map(|n| (n as f64).powf(-s)).sum();
    let nf = N as f64;
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    let mut rising = s; // s (s+1) ... (s + 2k - 2)
    let mut pow = nf.powf(-s - 1.0);
    for (k, b) in B.iter().enumerate() {
        sum += b * rising * pow;
        let kk = 2.0 * k as f64;
        rising *= (s + kk + 1.0) * (s + kk + 2.0);
        pow /= nf * nf;
    }
    sum
}

/// `Σ_{n > m} n^{−s}` for `s > 1`.
pub fn zeta_tail(s: f64, m: usize) -> f64 {
    if m == 0 {
        return zeta(s);
    }
    if m > 100_000 {
        // Euler–Maclaurin directly at the cut.
        let mf = m as f64;
        return mf.powf(1.0 - s) / (s - 1.0) - 0.5 * mf.powf(-s) + s * mf.powf(-s - 1.0) / 12.0;
    }
    let head: f64 = (1..=m).map(|n| (n as f64).powf(-s)).sum();
    (zeta(s) - head).max(0.0)
}

/// `Σ_{n > m} ln(n) n^{−s}` for `s > 1` (direct head, Euler–Maclaurin tail).
pub fn log_zeta_tail(s: f64, m: usize) -> f64 {
    let cut = m.max(1000);
    let head: f64 = (m + 1..=cut).map(|n| (n as f64).ln() * (n as f64).powf(-s)).sum();
    let nf = cut as f64;
    let ln = nf.ln();
    let integral = nf.powf(1.0 - s) * (ln / (s - 1.0) + 1.0 / ((s - 1.0) * (s - 1.0)));
    let f = ln * nf.powf(-s);
    let df = nf.powf(-s - 1.0) * (1.0 - s * ln);
    head + integral - 0.5 * f - df / 12.0
}
