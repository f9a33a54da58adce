use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal};

use crate::asymptotics::AsymptoticError;
use crate::model::{ReducedSpec, SojournFamily};

use super::MonteCarloError;

/// Evaluated probabilities above this are outside the asymptotic regime.
pub const REGIME_GUARD: f64 = 1.1;

#[derive(Clone, Debug)]
enum SojournSampler {
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    LogNormal(LogNormal<f64>),
}

impl SojournSampler {
    fn new(family: &SojournFamily, mean: f64) -> Result<Self, String> {
        match family {
            SojournFamily::Exponential => Exp::new(1.0 / mean)
                .map(SojournSampler::Exp)
                .map_err(|e| e.to_string()),
            SojournFamily::Gamma { shape } => {
                let k = shape.to_f64().unwrap_or(f64::NAN);
                Gamma::new(k, mean / k)
                    .map(SojournSampler::Gamma)
                    .map_err(|e| e.to_string())
            }
            SojournFamily::LogNormal { sigma } => {
                LogNormal::new(mean.ln() - sigma * sigma / 2.0, *sigma)
                    .map(SojournSampler::LogNormal)
                    .map_err(|e| e.to_string())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SojournSampler::Exp(d) => d.sample(rng),
            SojournSampler::Gamma(d) => d.sample(rng),
            SojournSampler::LogNormal(d) => d.sample(rng),
        }
    }
}

/// A family evaluated at one concrete `eps`.
#[derive(Clone, Debug)]
pub struct ConcreteKernel {
    eps: f64,
    p: Vec<Vec<f64>>,
    means: Vec<f64>,
    families: Vec<SojournFamily>,
    /// Per row: positive targets with cumulative probabilities.
    cumulative: Vec<Vec<(usize, f64)>>,
    samplers: Vec<SojournSampler>,
    underflowed: Vec<(usize, usize)>,
}

impl ConcreteKernel {
    /// Evaluate probabilities and means at `eps`; rows are renormalized to sum to one.
    ///
    /// Probabilities too small for `f64` become zero and are listed in
    /// [`ConcreteKernel::underflowed`].
    pub fn instantiate(spec: &ReducedSpec, eps: f64) -> Result<ConcreteKernel, MonteCarloError> {
        let spec = spec.normalized();
        let m = spec.len();
        let mut p = vec![vec![0.0; m]; m];
        let mut underflowed = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let entry = &spec.p[i][j];
                if entry.is_zero() {
                    continue;
                }
                let v = match entry.evaluate(&spec.basis, eps) {
                    Ok(v) => v,
                    Err(AsymptoticError::Underflow { .. }) => {
                        underflowed.push((i, j));
                        0.0
                    }
                    Err(error) => {
                        return Err(MonteCarloError::Evaluation {
                            from: i,
                            to: j,
                            error,
                        })
                    }
                };
                if v > REGIME_GUARD {
                    return Err(MonteCarloError::EpsTooLarge {
                        eps,
                        from: i,
                        to: j,
                        value: v,
                    });
                }
                p[i][j] = v;
            }
        }
        let means = spec
            .tau
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.evaluate(&spec.basis, eps)
                    .map_err(|error| MonteCarloError::Evaluation {
                        from: i,
                        to: i,
                        error,
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        Self::from_parts(eps, p, means, spec.sojourn.clone()).map(|mut k| {
            k.underflowed = underflowed;
            k
        })
    }

    /// Kernel from explicit numbers; rows are renormalized.
    pub fn from_parts(
        eps: f64,
        p: Vec<Vec<f64>>,
        means: Vec<f64>,
        families: Vec<SojournFamily>,
    ) -> Result<ConcreteKernel, MonteCarloError> {
        let m = p.len();
        assert!(
            means.len() == m && families.len() == m,
            "dimension mismatch"
        );
        let mut p = p;
        for (i, row) in p.iter_mut().enumerate() {
            let total: f64 = row.iter().sum();
            if total.is_nan() || total <= 0.0 || row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(MonteCarloError::BadRow(i));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        let cumulative = p
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                let mut out: Vec<(usize, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(j, v)| {
                        acc += v;
                        (j, acc)
                    })
                    .collect();
                if let Some(last) = out.last_mut() {
                    last.1 = 1.0;
                }
                out
            })
            .collect();
        let samplers = families
            .iter()
            .zip(&means)
            .enumerate()
            .map(|(i, (f, &mean))| {
                if !(mean > 0.0 && mean.is_finite()) {
                    return Err(MonteCarloError::BadMean { state: i, mean });
                }
                SojournSampler::new(f, mean)
                    .map_err(|e| MonteCarloError::Sojourn { state: i, error: e })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConcreteKernel {
            eps,
            p,
            means,
            families,
            cumulative,
            samplers,
            underflowed: Vec::new(),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probabilities(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn families(&self) -> &[SojournFamily] {
        &self.families
    }

    pub fn underflowed(&self) -> &[(usize, usize)] {
        &self.underflowed
    }

    pub fn all_exponential(&self) -> bool {
        self.families.iter().all(SojournFamily::is_exponential)
    }

    pub fn sojourn<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        self.samplers[i].sample(rng)
    }

    pub fn next_state<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        pick(&self.cumulative[i], rng.random::<f64>())
    }
}

/// First entry whose cumulative weight exceeds `u`.
pub(crate) fn pick(cumulative: &[(usize, f64)], u: f64) -> usize {
    let idx = cumulative.partition_point(|&(_, c)| c <= u);
    cumulative[idx.min(cumulative.len() - 1)].0
}
