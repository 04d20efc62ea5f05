//! Model configuration.
//!
//! Units are `hbar = 2m = 1`; with binding on, the bound state is `e^{-|x|}` at
//! energy `-1`. The drive is `r sin(omega t) U(x)` with
//! `U1 = 2 delta(x - a)` or `U2 = 2 [delta(x + a) - delta(x - a)]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    U1 { a: f64 },
    U2 { a: f64 },
    /// `U2` geometry acting on a free particle (no binding delta).
    FreeTrap { a: f64 },
}

impl Potential {
    pub fn a(&self) -> f64 {
        match *self {
            Potential::U1 { a } | Potential::U2 { a } | Potential::FreeTrap { a } => a,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Potential::U1 { .. } => "u1",
            Potential::U2 { .. } => "u2",
            Potential::FreeTrap { .. } => "free",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub potential: Potential,
    pub binding: bool,
    pub r: f64,
    pub omega: f64,
}

impl ModelConfig {
    pub fn new(potential: Potential, binding: bool, r: f64, omega: f64) -> Result<Self> {
        let cfg = ModelConfig { potential, binding, r, omega };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn u1(a: f64, r: f64, omega: f64) -> Result<Self> {
        Self::new(Potential::U1 { a }, true, r, omega)
    }

    pub fn u2(a: f64, r: f64, omega: f64) -> Result<Self> {
        Self::new(Potential::U2 { a }, true, r, omega)
    }

    pub fn free_trap(a: f64, r: f64, omega: f64) -> Result<Self> {
        Self::new(Potential::FreeTrap { a }, false, r, omega)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.potential.a();
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("a must be finite and >= 0, got {a}")));
        }
        if !self.r.is_finite() {
            return Err(Error::domain("r must be finite"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::domain(format!("omega must be > 0, got {}", self.omega)));
        }
        match (self.potential, self.binding) {
            (Potential::FreeTrap { .. }, true) => Err(Error::domain("FreeTrap requires binding = false")),
            (Potential::U1 { .. } | Potential::U2 { .. }, false) => {
                Err(Error::domain("the unbound problem is modelled by FreeTrap"))
            }
            _ => Ok(()),
        }
    }

    pub fn a(&self) -> f64 {
        self.potential.a()
    }

    /// Single-site drive: only `Y+` is active.
    pub fn is_scalar(&self) -> bool {
        matches!(self.potential, Potential::U1 { .. })
    }

    /// Signed strength `g` in `Y = s - (i g / 2) M (Y_{n-1} - Y_{n+1})`.
    ///
    /// `U2` and the free pair use `g = r`. The single site of `U1` carries the
    /// opposite sign to the `+a` site of `U2`, so `U1` uses `g = -r`.
    pub fn coupling(&self) -> f64 {
        match self.potential {
            Potential::U1 { .. } => -self.r,
            Potential::U2 { .. } | Potential::FreeTrap { .. } => self.r,
        }
    }

    pub fn with_r(&self, r: f64) -> Self {
        ModelConfig { r, ..*self }
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        ModelConfig { omega, ..*self }
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}
