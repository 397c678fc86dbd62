use ndarray::{Array1, Array2};

/// Small, fast, splittable PRNG with 64 bits of state (SplitMix64).
///
/// Every draw is a pure function of the state, and every float mapping
/// is written out explicitly below, so a given seed produces the same
/// stream on every platform. That property is load-bearing: seeded
/// experiment generators and the CLI's reproducibility guarantees all
/// sit on top of this type.
///
/// Mappings from a raw 64-bit word `z`:
///
/// * `uniform`      -> `(z >> 11) * 2^-53`, values in `[0, 1)`
/// * interior of the Box-Muller log: `((z >> 11) + 1) * 2^-53` in `(0, 1]`
/// * interior draw for Laplace:      `((z >> 12) + 0.5) * 2^-52` in `(0, 1)`
///
/// `normal` uses the cosine branch of Box-Muller only (two words per
/// draw, nothing cached), `laplace` inverts the CDF.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Next raw word of the SplitMix64 stream.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Child generator seeded from this stream. The child's stream is
    /// statistically independent of the parent's remaining draws, and
    /// splitting advances the parent deterministically, so a fixed
    /// split layout gives reproducible sub-streams.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }

    /// Uniform draw in `(0, 1]`; used where a log of the value is taken.
    fn uniform_pos(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * 2f64.powi(-53)
    }

    /// Uniform draw in the open interval `(0, 1)`.
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * 2f64.powi(-52)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller (cosine branch).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform_pos();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Standard Laplace (density `exp(-|x|)/2`) by CDF inversion.
    pub fn laplace(&mut self) -> f64 {
        let u = self.uniform_open() - 0.5;
        if u < 0.0 {
            (2.0 * u).ln_1p()
        } else {
            -(-2.0 * u).ln_1p()
        }
    }

    pub fn normal_vec(&mut self, d: usize) -> Array1<f64> {
        Array1::from_shape_fn(d, |_| self.normal())
    }

    pub fn normal_mat(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        // Row-major fill order, pinned so regeneration is bitwise stable.
        let mut out = Array2::zeros((rows, cols));
        for i in 0..rows {
            for j in 0..cols {
                out[[i, j]] = self.normal();
            }
        }
        out
    }

    pub fn uniform_mat(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
        let mut out = Array2::zeros((rows, cols));
        for i in 0..rows {
            for j in 0..cols {
                out[[i, j]] = self.uniform_in(lo, hi);
            }
        }
        out
    }

    /// Uniform draw from the unit sphere in `R^d` (normalized Gaussian).
    pub fn unit_sphere(&mut self, d: usize) -> Array1<f64> {
        assert!(d > 0, "unit_sphere needs a positive dimension");
        loop {
            let v = self.normal_vec(d);
            let n = v.dot(&v).sqrt();
            if n > 1e-12 {
                return v / n;
            }
        }
    }
}
