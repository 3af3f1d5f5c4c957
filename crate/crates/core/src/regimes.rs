//! Classification of a parameter set against the boundedness, convergence and
//! blow-up hypotheses, in the original mass variables.

use serde::{Deserialize, Serialize};

use crate::functionals::{rate_report, RateInputs, RateReport};
use crate::model::{DerivedParams, ModelParams, Provenance, Regime};
use crate::scalar::{pos, Real};

/// One evaluated inequality `lhs < rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition<T> {
    pub name: String,
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
    /// Why the condition could not be evaluated, if it could not.
    pub note: Option<String>,
}

impl<T: Real> Condition<T> {
    fn strict(name: &str, lhs: T, rhs: T) -> Self {
        Self { name: name.into(), lhs, rhs, holds: lhs < rhs, note: None }
    }

    fn undefined(name: &str, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lhs: T::nan(),
            rhs: T::nan(),
            holds: false,
            note: Some(note.into()),
        }
    }

    pub fn margin(&self) -> T {
        self.rhs - self.lhs
    }
}

/// Boundedness: `m₁m₂χ₁χ₂ < (π* − m₂χ₃)π*` for `τ = 0`,
/// `m₁m₂χ₁χ₂ < √(1 − 4m₂χ₃C⁴)/(4C⁸)` for `τ > 0`.
pub fn check_b1<T: Real>(params: &ModelParams<T>, dp: &DerivedParams<T>) -> Condition<T> {
    let lhs = dp.m1 * dp.m2 * params.chi1 * params.chi2;
    match params.regime() {
        Regime::ParabolicElliptic => {
            let p = dp.pistar;
            Condition::strict("bounded (tau = 0)", lhs, (p - dp.m2 * params.chi3) * p)
        }
        Regime::FullyParabolic => {
            let name = "bounded (tau > 0)";
            let Some(c) = dp.cgn else {
                return Condition::undefined(name, "C_GN not available");
            };
            let c4 = c.value.powi(4);
            let disc = T::one() - T::lit(4.0) * dp.m2 * params.chi3 * c4;
            if disc < T::zero() {
                return Condition::undefined(name, "1 - 4 m2 chi3 C_GN^4 < 0, threshold undefined");
            }
            Condition::strict(name, lhs, disc.sqrt() / (T::lit(4.0) * c4 * c4))
        }
    }
}

/// Both algebraic forms of the convergence condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B3Check<T> {
    /// Mass form, the one reported.
    pub conditions: Vec<Condition<T>>,
    pub holds: bool,
    /// Same predicate through `η₁, η₂, χ`.
    pub eta_form_holds: bool,
}

impl<T: Real> B3Check<T> {
    pub fn forms_agree(&self) -> bool {
        self.holds == self.eta_form_holds
    }
}

/// Convergence: `k²m₁m₂χ₁χ₂ + km₂|Ω|χ₃⁺ < 4|Ω|²` for `τ = 0`; for `τ > 0`
/// `(2−√22)/3 < km₂χ₃/|Ω| < √2` and `k²m₁m₂χ₁χ₂ < (2√2/3)|Ω|² min{1, 3/2 + km₂χ₃/|Ω|}`.
/// Absent when `k` is unknown.
pub fn check_b3<T: Real>(params: &ModelParams<T>, dp: &DerivedParams<T>) -> Option<B3Check<T>> {
    let k = dp.k?.value;
    let area = dp.area;
    let prod = dp.m1 * dp.m2 * params.chi1 * params.chi2;
    let ri = RateInputs::new(dp, params).ok()?;
    let (conditions, eta_form_holds) = match params.regime() {
        Regime::ParabolicElliptic => {
            let lhs = k * k * prod + k * dp.m2 * area * pos(params.chi3);
            (
                vec![Condition::strict("converges (tau = 0)", lhs, T::lit(4.0) * area * area)],
                ri.elliptic_condition(),
            )
        }
        Regime::FullyParabolic => {
            let s = k * dp.m2 * params.chi3 / area;
            let lo = (T::lit(2.0) - T::lit(22.0).sqrt()) / T::lit(3.0);
            let bound =
                T::lit(2.0) * T::SQRT_2() / T::lit(3.0) * area * area * T::one().min(T::lit(1.5) + s);
            (
                vec![
                    Condition::strict("converges: lower window (tau > 0)", lo, s),
                    Condition::strict("converges: upper window (tau > 0)", s, T::SQRT_2()),
                    Condition::strict("converges: mass product (tau > 0)", k * k * prod, bound),
                ],
                ri.parabolic_condition(),
            )
        }
    };
    let holds = conditions.iter().all(|c| c.holds);
    Some(B3Check { conditions, holds, eta_form_holds })
}

/// Blow-up hypotheses: `(on_line, blowup_mass)`. The line is `m₁χ₂ = m₂χ₁` with
/// `τ₁ = τ₂` and `χ₃ = 0`; the mass condition is `m₁m₂χ₁χ₂ > (π*)²` on it.
pub fn check_b4<T: Real>(params: &ModelParams<T>, dp: &DerivedParams<T>, line_tol: T) -> (bool, bool) {
    let a = dp.m1 * params.chi2;
    let b = dp.m2 * params.chi1;
    let on_line =
        params.tau1 == params.tau2 && params.chi3 == T::zero() && (a - b).abs() <= line_tol * a.max(b);
    let mass = dp.m1 * dp.m2 * params.chi1 * params.chi2 > dp.pistar * dp.pistar;
    (on_line, on_line && mass)
}

/// Which statement, if any, the theory makes about a parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outlook {
    Bounded,
    BlowUp,
    TheorySilent,
}

impl std::fmt::Display for Outlook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outlook::Bounded => "bounded",
            Outlook::BlowUp => "blow-up",
            Outlook::TheorySilent => "theory-silent",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict<T> {
    pub b1_bounded: bool,
    pub b1_margin: T,
    pub b3_converges: bool,
    pub b4_on_blowup_line: bool,
    pub b4_blowup_mass: bool,
    pub outlook: Outlook,
    pub applicable_conditions: Vec<Condition<T>>,
    pub rates: RateReport<T>,
    pub k_provenance: Option<Provenance>,
    pub cgn_provenance: Option<Provenance>,
}

pub fn classify<T: Real>(params: &ModelParams<T>, dp: &DerivedParams<T>, line_tol: T) -> RegimeVerdict<T> {
    let b1 = check_b1(params, dp);
    let b3 = check_b3(params, dp);
    let (on_line, blowup_mass) = check_b4(params, dp, line_tol);
    let mut conditions = vec![b1.clone()];
    match &b3 {
        Some(c) => conditions.extend(c.conditions.iter().cloned()),
        None => conditions.push(Condition::undefined("converges", "k not available")),
    }
    let pistar_sq = dp.pistar * dp.pistar;
    let mut line = Condition::strict(
        "blow-up line |m1 chi2 - m2 chi1| (tau1 = tau2, chi3 = 0)",
        (dp.m1 * params.chi2 - dp.m2 * params.chi1).abs(),
        line_tol * (dp.m1 * params.chi2).max(dp.m2 * params.chi1),
    );
    line.holds = on_line;
    conditions.push(line);
    let mut mass = Condition::strict("blow-up mass (pi*^2 < m1 m2 chi1 chi2)", pistar_sq, dp.m1 * dp.m2 * params.chi1 * params.chi2);
    mass.holds = blowup_mass;
    conditions.push(mass);

    let outlook = if b1.holds {
        Outlook::Bounded
    } else if blowup_mass {
        Outlook::BlowUp
    } else {
        Outlook::TheorySilent
    };
    RegimeVerdict {
        b1_bounded: b1.holds,
        b1_margin: b1.margin(),
        b3_converges: b3.as_ref().is_some_and(|c| c.holds),
        b4_on_blowup_line: on_line,
        b4_blowup_mass: blowup_mass,
        outlook,
        applicable_conditions: conditions,
        rates: rate_report(dp, params),
        k_provenance: dp.k.map(|c| c.provenance),
        cgn_provenance: dp.cgn.map(|c| c.provenance),
    }
}
