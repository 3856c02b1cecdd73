//! Bessel functions of the first kind for Chebyshev propagators.

/// `J_0(z), …, J_kmax(z)` for real `z ≥ 0`, by Miller's backward recurrence.
///
/// The recurrence starts well above both `kmax` and `z`, and the result is
/// normalized with `J_0² + 2 Σ_{k≥1} J_k² = 1`; the sign comes from
/// `J_0 + 2 Σ_{k≥1} J_{2k} = 1`.
pub fn bessel_j_sequence(z: f64, kmax: usize) -> Vec<f64> {
    assert!(
        z >= 0.0 && z.is_finite(),
        "bessel_j_sequence needs finite z >= 0"
    );
    let mut out = vec![0.0; kmax + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = (kmax as f64).max(z);
    let mut start = (top + 30.0 + (40.0 * top).sqrt() + 3.0 * z.cbrt()).ceil() as usize;
    start += start % 2;

    let mut next = 0.0; // J_{k+1}
    let mut cur = 1.0; // J_k, up to scale
    let mut sum_sq = 0.0;
    let mut sum_even = 0.0;
    for k in (1..=start).rev() {
        // J_{k-1} = (2k / z) J_k - J_{k+1}
        let prev = (2.0 * k as f64 / z) * cur - next;
        next = cur;
        cur = prev;
        let idx = k - 1;
        if idx <= kmax {
            out[idx] = cur;
        }
        if idx >= 1 {
            sum_sq += 2.0 * cur * cur;
            if idx % 2 == 0 {
                sum_even += 2.0 * cur;
            }
        } else {
            sum_sq += cur * cur;
            sum_even += cur;
        }
        if cur.abs() > 1e100 {
            let s = 1e-100;
            cur *= s;
            next *= s;
            sum_sq *= s * s;
            sum_even *= s;
            for v in out.iter_mut().skip(idx) {
                *v *= s;
            }
        }
    }
    let norm = sum_sq.sqrt().copysign(sum_even);
    for v in &mut out {
        *v /= norm;
    }
    out
}

/// `J_n(z)` for a single order.
pub fn bessel_j(n: usize, z: f64) -> f64 {
    bessel_j_sequence(z, n)[n]
}
