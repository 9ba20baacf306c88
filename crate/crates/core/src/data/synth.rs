//! Synthetic click/conversion data with a controllable task correlation.
//!
//! Each example draws a latent `u ~ N(0, I_k)`. With two fixed orthogonal
//! directions scaled to length `signal`, the click score is `a = u·v_click`
//! and the independent conversion score is `b = u·v_conv`. Then
//!
//! ```text
//! click      ~ Bernoulli(σ(click_bias + a + click_noise * ε))
//! conversion ~ Bernoulli(σ(conv_bias + ρ a + (1 - ρ) b))   only if click
//! ```
//!
//! Field `f` observes latent coordinate `f mod k`, quantized into
//! equiprobable buckets with ids `1..vocab` (id 0 stays reserved for
//! missing values), so both labels are learnable from ids alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example, FieldSpec, Schema};
use crate::autodiff::sigmoid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_examples: usize,
    /// Index of the first generated example; lets disjoint splits share
    /// the same latent directions.
    #[serde(default)]
    pub first_index: u64,
    pub vocab_sizes: Vec<usize>,
    pub latent_dim: usize,
    pub click_noise: f64,
    /// Conversion dependence on the click direction, in `[0, 1]`.
    pub rho: f64,
    #[serde(default = "default_signal")]
    pub signal: f64,
    #[serde(default)]
    pub click_bias: f64,
    #[serde(default)]
    pub conv_bias: f64,
}

fn default_signal() -> f64 {
    2.0
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Data(format!("synthetic spec: {m}")));
        if self.vocab_sizes.is_empty() || self.vocab_sizes.contains(&0) {
            return fail("vocab_sizes must be non-empty and positive".into());
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return fail(format!("rho {} outside [0, 1]", self.rho));
        }
        if !self.click_noise.is_finite() || self.click_noise < 0.0 {
            return fail(format!(
                "click_noise {} must be finite and non-negative",
                self.click_noise
            ));
        }
        for (name, v) in [
            ("signal", self.signal),
            ("click_bias", self.click_bias),
            ("conv_bias", self.conv_bias),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// Fields keyed `0..vocab_sizes.len()`.
    pub fn schema(&self) -> Schema {
        Schema {
            fields: self
                .vocab_sizes
                .iter()
                .enumerate()
                .map(|(k, &vocab)| FieldSpec { key: k as u32, vocab })
                .collect(),
        }
    }

    /// Expected click rate and full-space second-stage rate, by quadrature
    /// over the Gaussian scores.
    pub fn expected_rates(&self) -> [f64; 2] {
        let grid = NormalGrid::new();
        let sd_a = self.signal;
        let sd_b = if self.latent_dim > 1 { self.signal } else { 0.0 };
        let click_given_a: Vec<f64> = grid
            .points
            .iter()
            .map(|&za| {
                let a = sd_a * za;
                grid.expect(|ze| sigmoid(self.click_bias + a + self.click_noise * ze))
            })
            .collect();
        let click = grid.weights.iter().zip(&click_given_a).map(|(w, p)| w * p).sum();
        let mut conv = 0.0;
        for ((&za, &wa), &pc) in grid.points.iter().zip(&grid.weights).zip(&click_given_a) {
            let a = sd_a * za;
            let pv = grid.expect(|zb| sigmoid(self.conv_bias + self.rho * a + (1.0 - self.rho) * sd_b * zb));
            conv += wa * pc * pv;
        }
        [click, conv]
    }
}

/// Reads a TOML file holding the fields of a [`SynthSpec`].
pub fn load_synth_spec(path: &std::path::Path) -> Result<SynthSpec> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading spec {}", path.display()), e))?;
    let spec: SynthSpec = toml::from_str(&src).map_err(|e| Error::Config {
        path: Some(path.to_path_buf()),
        line: e.span().map(|s| src[..s.start].matches('\n').count() + 1),
        message: e.message().trim().to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Composite Simpson nodes for `E[f(Z)]`, `Z ~ N(0, 1)`, on `[-9, 9]`.
struct NormalGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalGrid {
    fn new() -> Self {
        const N: usize = 360;
        let (lo, hi) = (-9.0, 9.0);
        let h = (hi - lo) / N as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mut points = Vec::with_capacity(N + 1);
        let mut weights = Vec::with_capacity(N + 1);
        for i in 0..=N {
            let z = lo + i as f64 * h;
            let simpson = if i == 0 || i == N {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            points.push(z);
            weights.push(simpson * h / 3.0 * norm * (-0.5 * z * z).exp());
        }
        NormalGrid { points, weights }
    }

    fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&z, w)| w * f(z)).sum()
    }
}

/// The latent scores behind one generated example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentScores {
    /// `u·v_click`
    pub click: f64,
    /// `ρ u·v_click + (1 - ρ) u·v_conv`
    pub conversion: f64,
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    gen_synthetic_with_scores(spec).map(|(d, _)| d)
}

pub fn gen_synthetic_with_scores(spec: &SynthSpec) -> Result<(Dataset, Vec<LatentScores>)> {
    spec.validate()?;
    let k = spec.latent_dim;
    let (v_click, v_conv) = directions(spec.seed, k, spec.signal);
    let mut examples = Vec::with_capacity(spec.n_examples);
    let mut scores = Vec::with_capacity(spec.n_examples);
    let mut u = vec![0.0; k];
    for i in 0..spec.n_examples as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        // Stream 0 holds the directions; example i owns stream i + 1.
        rng.set_stream(spec.first_index + i + 1);
        u.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let eps: f64 = rng.sample(StandardNormal);
        let click_draw: f64 = rng.random();
        let conv_draw: f64 = rng.random();

        let a: f64 = u.iter().zip(&v_click).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&v_conv).map(|(x, y)| x * y).sum();
        let conv_score = spec.rho * a + (1.0 - spec.rho) * b;
        let click = click_draw < sigmoid(spec.click_bias + a + spec.click_noise * eps);
        let second = click && conv_draw < sigmoid(spec.conv_bias + conv_score);

        let ids = spec
            .vocab_sizes
            .iter()
            .enumerate()
            .map(|(f, &vocab)| quantize(u[f % k], vocab))
            .collect();
        examples.push(Example { click, second, ids });
        scores.push(LatentScores {
            click: a,
            conversion: conv_score,
        });
    }
    Ok((
        Dataset {
            schema: spec.schema(),
            examples,
        },
        scores,
    ))
}

fn directions(seed: u64, k: usize, signal: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut draw = || -> Vec<f64> { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x *= signal / n);
        }
    };
    let mut click = draw();
    normalize(&mut click);
    let mut conv = if k > 1 { draw() } else { vec![0.0; k] };
    let dot: f64 = conv.iter().zip(&click).map(|(x, y)| x * y).sum();
    let cc: f64 = click.iter().map(|x| x * x).sum();
    if cc > 0.0 {
        conv.iter_mut().zip(&click).for_each(|(x, y)| *x -= dot / cc * y);
    }
    normalize(&mut conv);
    (click, conv)
}

/// Equiprobable bucket of a standard normal value, in `1..vocab`.
fn quantize(z: f64, vocab: usize) -> u32 {
    if vocab <= 1 {
        return 0;
    }
    let buckets = vocab - 1;
    let cdf = 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2));
    let b = ((cdf * buckets as f64) as usize).min(buckets - 1);
    (b + 1) as u32
}
