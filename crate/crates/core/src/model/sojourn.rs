use crate::asymptotics::Rational;

/// Sojourn law shape; the mean is supplied when the family is instantiated.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum SojournFamily {
    #[default]
    Exponential,
    Gamma {
        shape: Rational,
    },
    LogNormal {
        sigma: f64,
    },
}

impl SojournFamily {
    /// Bound on variance / mean^2.
    pub fn squared_cv(&self) -> f64 {
        use num_traits::ToPrimitive;
        match self {
            SojournFamily::Exponential => 1.0,
            SojournFamily::Gamma { shape } => 1.0 / shape.to_f64().unwrap_or(f64::NAN),
            SojournFamily::LogNormal { sigma } => (sigma * sigma).exp_m1(),
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, SojournFamily::Exponential)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SojournFamily::Exponential => "exponential",
            SojournFamily::Gamma { .. } => "gamma",
            SojournFamily::LogNormal { .. } => "lognormal",
        }
    }
}
