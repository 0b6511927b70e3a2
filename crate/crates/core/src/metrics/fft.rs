use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Radix-2 decimation-in-time FFT of a real sequence, zero-padded to the
/// next power of two. The output has the padded length.
pub fn fft_real(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("fft of an empty sequence".into()));
    }
    let n = x.len().next_power_of_two();
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft_in_place(&mut buf);
    Ok(buf)
}

fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = Complex64::from_polar(1.0, step * k as f64);
                let even = buf[start + k];
                let odd = buf[start + k + half] * w;
                buf[start + k] = even + odd;
                buf[start + k + half] = even - odd;
            }
        }
        len <<= 1;
    }
}
