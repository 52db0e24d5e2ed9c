//! Reference implementations written independently of the library, used as
//! oracles by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

pub const TONE: f64 = 9.746969e6;
pub const GAMMA: f64 = 2.0 * PI * 28.0e9;

/// `|sinc(pi f N tau) (1 - sec(pi f tau))|` at `f = (1 + eps) / (2 tau)`,
/// rewritten with exact identities so nothing cancels:
/// `cos(pi/2 (1+eps)) = -sin(pi eps / 2)` and, for even N = 2k,
/// `sin(N pi/2 (1+eps)) = (-1)^k sin(N pi eps / 2)`.
pub fn filter_near_resonance(n: u32, eps: f64) -> f64 {
    assert!(n.is_multiple_of(2));
    let nf = n as f64;
    let theta = PI / 2.0 * (1.0 + eps);
    let s = (PI * eps / 2.0).sin();
    let num = (nf * PI * eps / 2.0).sin();
    (num / (nf * theta) * (1.0 + 1.0 / s)).abs()
}

/// Plain evaluation of the filter formula.
pub fn filter_raw(f: f64, n: u32, tau: f64) -> f64 {
    let z = PI * f * n as f64 * tau;
    let sinc = if z == 0.0 { 1.0 } else { z.sin() / z };
    (sinc * (1.0 - 1.0 / (PI * f * tau).cos())).abs()
}

/// `J0(x) = (1/pi) int_0^pi cos(x sin t) dt` by the trapezoid rule, which
/// converges geometrically for this periodic integrand.
pub fn j0_quadrature(x: f64) -> f64 {
    let m = 64 + 2 * x.abs().ceil() as usize;
    let h = PI / m as f64;
    // both end points contribute cos(0) = 1 with weight 1/2
    let mut s = 1.0;
    for i in 1..m {
        s += (x * (i as f64 * h).sin()).cos();
    }
    s * h / PI
}

/// First `count` positive zeros of J0, by bisection on the quadrature.
pub fn j0_zeros(count: usize) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut a = 0.5;
    while zeros.len() < count {
        let b = a + 0.1;
        if j0_quadrature(a) * j0_quadrature(b) < 0.0 {
            zeros.push(bisect(j0_quadrature, a, b));
        }
        a = b;
    }
    zeros
}

pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

type M2 = [[Complex64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `exp(-i (wz Iz + wx Ix) t)` for a spin 1/2.
fn rotation(wz: f64, wx: f64, t: f64) -> M2 {
    let w = wz.hypot(wx);
    if w == 0.0 {
        return [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    }
    let (nz, nx) = (wz / w, wx / w);
    let (c, s) = ((w * t / 2.0).cos(), (w * t / 2.0).sin());
    let i = Complex64::new(0.0, 1.0);
    [
        [Complex64::new(c, 0.0) - i * s * nz, -i * s * nx],
        [-i * s * nx, Complex64::new(c, 0.0) + i * s * nz],
    ]
}

/// Ideal-pulse response to one nucleus from the two NV-conditioned nuclear
/// propagators: `p = (1 + Re tr(U0^dagger U1) / 2) / 2`.
pub fn conditional_rotation_p(n: u32, tau: f64, larmor: f64, a_par: f64, a_perp: f64) -> f64 {
    let r = |branch: usize, t: f64| {
        if branch == 0 {
            rotation(larmor, 0.0, t)
        } else {
            rotation(larmor + a_par, a_perp, t)
        }
    };
    let evolve = |start: usize| {
        let mut u = r(start, tau / 2.0);
        let mut b = start;
        for k in 0..n {
            b ^= 1;
            let t = if k + 1 == n { tau / 2.0 } else { tau };
            u = mul(&r(b, t), &u);
        }
        u
    };
    let (u0, u1) = (evolve(0), evolve(1));
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            tr += u0[j][i].conj() * u1[j][i];
        }
    }
    0.5 * (1.0 + tr.re / 2.0)
}

/// Cosine-square train on an arbitrarily fine grid: `(times, amplitudes)`.
/// Pulse `k` is centred on `(k + 1/2) tau` with half-maximum width `t_pi`.
pub fn dense_cosine_train(n: u32, tau: f64, t_pi: f64, rate: f64) -> (Vec<f64>, Vec<f64>) {
    let total = n as f64 * tau;
    let m = (total * rate).round() as usize;
    let dt = total / m as f64;
    let mut t = Vec::with_capacity(m);
    let mut a = Vec::with_capacity(m);
    for i in 0..m {
        let ti = (i as f64 + 0.5) * dt;
        let k = (ti / tau).floor();
        let d = (ti - (k + 0.5) * tau).abs();
        let x = (1.0 - d / t_pi).max(0.0);
        t.push(ti);
        a.push((PI * x / 2.0).sin().powi(2));
    }
    (t, a)
}

/// Amplitude-weighted centre of every period of a dense train.
pub fn dense_centroids(n: u32, tau: f64, t: &[f64], a: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; n as usize];
    let mut den = vec![0.0; n as usize];
    for (&ti, &ai) in t.iter().zip(a) {
        let k = ((ti / tau) as usize).min(n as usize - 1);
        num[k] += ti * ai;
        den[k] += ai;
    }
    num.iter().zip(&den).map(|(x, y)| x / y).collect()
}
