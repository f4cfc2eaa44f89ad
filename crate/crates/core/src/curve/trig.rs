//! Real trigonometric series on a period `L`, built from uniform samples by FFT.

use rustfft::{num_complex::Complex, FftPlanner};

/// `f(s) = a₀ + Σ_{k≥1} (a_k cos kωs + b_k sin kωs)`, `ω = 2π/L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    pub period: f64,
    pub a0: f64,
    /// `cos[k-1]` is `a_k`.
    pub cos: Vec<f64>,
    /// `sin[k-1]` is `b_k`.
    pub sin: Vec<f64>,
}

impl TrigSeries {
    pub fn constant(period: f64, value: f64) -> Self {
        Self {
            period,
            a0: value,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    /// Interpolant of `samples[j] = f(j·L/M)`. The Nyquist mode is dropped so
    /// that derivatives stay real and symmetric.
    pub fn from_samples(period: f64, samples: &[f64]) -> Self {
        let m = samples.len();
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let half = (m - 1) / 2;
        let scale = 1.0 / m as f64;
        let a0 = buf[0].re * scale;
        let cos = (1..=half).map(|k| 2.0 * buf[k].re * scale).collect();
        let sin = (1..=half).map(|k| -2.0 * buf[k].im * scale).collect();
        Self {
            period,
            a0,
            cos,
            sin,
        }
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU / self.period
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    /// Magnitude of the largest coefficient among the top `frac` of modes,
    /// relative to the largest coefficient including `a₀`.
    pub fn tail_ratio(&self, frac: f64) -> f64 {
        let k = self.degree();
        if k == 0 {
            return 0.0;
        }
        let start = ((1.0 - frac) * k as f64).floor() as usize;
        let amp = |i: usize| self.cos[i].hypot(self.sin[i]);
        let peak = (0..k).map(amp).fold(self.a0.abs(), f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        (start..k).map(amp).fold(0.0, f64::max) / peak
    }

    /// Drops trailing modes whose amplitude is below `rel` times the largest.
    pub fn truncated(mut self, rel: f64) -> Self {
        let amp = |c: f64, s: f64| c.hypot(s);
        let peak = self
            .cos
            .iter()
            .zip(&self.sin)
            .map(|(&c, &s)| amp(c, s))
            .fold(self.a0.abs(), f64::max);
        let mut keep = self.cos.len();
        while keep > 0 && amp(self.cos[keep - 1], self.sin[keep - 1]) <= rel * peak {
            keep -= 1;
        }
        self.cos.truncate(keep);
        self.sin.truncate(keep);
        self
    }

    /// Values of `f, f′, …, f^(D)` at `s`.
    pub fn eval_derivs<const D: usize>(&self, s: f64) -> [f64; D] {
        let w = self.omega();
        let theta = w * s;
        let (s1, c1) = theta.sin_cos();
        let mut out = [0.0; D];
        if D > 0 {
            out[0] = self.a0;
        }
        let (mut ck, mut sk) = (1.0, 0.0);
        for k in 1..=self.degree() {
            // Rotation recurrence for cos kθ, sin kθ; reseeded periodically.
            if k % 64 == 0 {
                let (s, c) = (k as f64 * theta).sin_cos();
                ck = c;
                sk = s;
            } else {
                let nc = ck * c1 - sk * s1;
                sk = sk * c1 + ck * s1;
                ck = nc;
            }
            let (a, b) = (self.cos[k - 1], self.sin[k - 1]);
            let kw = k as f64 * w;
            // d^n/ds^n of (a cos + b sin) cycles through four forms.
            let mut scale = 1.0;
            for (n, o) in out.iter_mut().enumerate() {
                let v = match n % 4 {
                    0 => a * ck + b * sk,
                    1 => -a * sk + b * ck,
                    2 => -(a * ck + b * sk),
                    _ => a * sk - b * ck,
                };
                *o += scale * v;
                scale *= kw;
            }
        }
        out
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_derivs::<1>(s)[0]
    }

    /// Antiderivative of the non-constant part, vanishing at `s = 0`.
    pub fn antiderivative(&self) -> Self {
        let w = self.omega();
        let cos: Vec<f64> = (1..=self.degree())
            .map(|k| -self.sin[k - 1] / (k as f64 * w))
            .collect();
        let sin = (1..=self.degree())
            .map(|k| self.cos[k - 1] / (k as f64 * w))
            .collect();
        Self {
            period: self.period,
            a0: -cos.iter().sum::<f64>(),
            cos,
            sin,
        }
    }

    /// The derivative series.
    pub fn derivative(&self) -> Self {
        let w = self.omega();
        let cos = (1..=self.degree())
            .map(|k| k as f64 * w * self.sin[k - 1])
            .collect();
        let sin = (1..=self.degree())
            .map(|k| -(k as f64) * w * self.cos[k - 1])
            .collect();
        Self {
            period: self.period,
            a0: 0.0,
            cos,
            sin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_differentiates() {
        let l = 3.0;
        let w = std::f64::consts::TAU / l;
        let f = |s: f64| 0.5 + (w * s).cos() - 0.25 * (3.0 * w * s).sin();
        let m = 32;
        let samples: Vec<f64> = (0..m).map(|j| f(j as f64 * l / m as f64)).collect();
        let t = TrigSeries::from_samples(l, &samples).truncated(1e-14);
        assert_eq!(t.degree(), 3);
        let s = 0.377;
        let d = t.eval_derivs::<3>(s);
        assert!((d[0] - f(s)).abs() < 1e-13);
        let df = -w * (w * s).sin() - 0.75 * w * (3.0 * w * s).cos();
        assert!((d[1] - df).abs() < 1e-12);
        let ddf = -w * w * (w * s).cos() + 2.25 * w * w * (3.0 * w * s).sin();
        assert!((d[2] - ddf).abs() < 1e-11);
        assert!((t.derivative().eval(s) - df).abs() < 1e-12);
        let anti = t.derivative().antiderivative();
        assert!((anti.eval(s) - (f(s) - f(0.0))).abs() < 1e-13);
    }
}
