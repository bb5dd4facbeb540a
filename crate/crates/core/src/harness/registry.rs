//! The ten worked examples as ready-made scenarios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytics::laws::TheoremId;
use crate::classifier::{Regime, PROPER_BOUNDARY_TOL};
use crate::environment::{validate_model, EnvSequence, ThetaModel, DEFAULT_CHECK_HORIZON};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub example: u8,
    pub model: ThetaModel,
    pub free_params: BTreeMap<String, f64>,
    pub expected_regime: Regime,
    pub expected_sub_label: Option<String>,
    pub theorem_id: TheoremId,
}

pub const SCENARIO_IDS: [&str; 18] = [
    "Ex1", "Ex2", "Ex3", "Ex4a", "Ex4b", "Ex5", "Ex6i", "Ex6ii", "Ex6iii", "Ex6iv", "Ex7i",
    "Ex7ii", "Ex8i", "Ex8ii", "Ex9i", "Ex9ii", "Ex10i", "Ex10ii",
];

/// Horizon for limit detection when classifying scenarios; the slowest
/// registry limits (`D` with a `n^-1/2` tail) settle by then.
pub const CLASSIFY_HORIZON: u64 = 1 << 16;

/// Free parameters of a scenario with their defaults.
fn defaults(id: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match id {
        "Ex1" | "Ex2" => &[("theta", 1.0), ("sigma", 1.0)],
        "Ex3" | "Ex4a" | "Ex5" => &[("theta", 1.0)],
        "Ex4b" => &[("theta", 1.0), ("sigma", 1.0)],
        "Ex6i" | "Ex6iii" => &[("sigma", 1.0)],
        "Ex6ii" | "Ex6iv" => &[("sigma", 0.5)],
        "Ex7i" | "Ex7ii" => &[("theta", 1.0), ("r", 2.0), ("sigma", 0.75)],
        "Ex8i" | "Ex8ii" => &[("theta", -0.5), ("r", 2.0), ("sigma", 1.2)],
        "Ex9i" | "Ex9ii" => &[("r", 2.0), ("sigma", 0.5)],
        "Ex10i" | "Ex10ii" => &[("theta", -0.5), ("sigma", 0.5)],
        _ => return None,
    })
}

fn infeasible(id: &str, what: &str) -> Error {
    Error::rejected(None, format!("{id}: {what}"))
}

/// Builds one scenario; `overrides` replaces any of its free parameters.
pub fn scenario(id: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario> {
    let table = defaults(id).ok_or_else(|| Error::UnknownScenario(id.to_string()))?;
    let mut p: BTreeMap<String, f64> = table.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !p.contains_key(k) {
            return Err(infeasible(id, &format!("`{k}` is not a free parameter")));
        }
        p.insert(k.clone(), *v);
    }
    let get = |k: &str| p[k];
    let positive_theta = |t: f64| {
        if t > 0.0 && t <= 1.0 {
            Ok(())
        } else {
            Err(infeasible(id, "theta must lie in (0, 1]"))
        }
    };
    let negative_theta = |t: f64| {
        if t > -1.0 && t < 0.0 {
            Ok(())
        } else {
            Err(infeasible(id, "theta must lie in (-1, 0)"))
        }
    };
    let require = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(infeasible(id, what))
        }
    };
    let harmonic_or_convergent = |part: &str| {
        if part.ends_with("ii") {
            EnvSequence::Convergent
        } else {
            EnvSequence::Harmonic
        }
    };

    use Regime::*;
    use TheoremId::*;
    let (example, theta, r, a, c, regime, theorem): (
        u8,
        f64,
        f64,
        EnvSequence,
        EnvSequence,
        Regime,
        TheoremId,
    ) = match id {
        "Ex1" | "Ex2" => {
            positive_theta(get("theta"))?;
            require(get("sigma") >= 1.0, "sigma must be at least 1")?;
            let (a, regime, t) = if id == "Ex1" {
                (EnvSequence::Harmonic, Supercritical, T1)
            } else {
                (EnvSequence::Convergent, AsymptoticallyDegenerate, T2)
            };
            let ex = if id == "Ex1" { 1 } else { 2 };
            (
                ex,
                get("theta"),
                1.0,
                a,
                EnvSequence::ProportionalC {
                    sigma: get("sigma"),
                },
                regime,
                t,
            )
        }
        "Ex3" => {
            positive_theta(get("theta"))?;
            (
                3,
                get("theta"),
                1.0,
                EnvSequence::AlternatingEx3,
                EnvSequence::AlternatingEx3,
                Critical,
                T3,
            )
        }
        "Ex4a" => {
            positive_theta(get("theta"))?;
            (
                4,
                get("theta"),
                1.0,
                EnvSequence::SuperharmonicEx4,
                EnvSequence::SuperharmonicEx4,
                StrictlySubcritical,
                T4,
            )
        }
        "Ex4b" => {
            positive_theta(get("theta"))?;
            require(get("sigma") > 0.0, "sigma must be positive")?;
            (
                4,
                get("theta"),
                1.0,
                EnvSequence::SuperharmonicEx4,
                EnvSequence::NegativeProportionalC {
                    sigma: get("sigma"),
                },
                StrictlySubcritical,
                T4,
            )
        }
        "Ex5" => {
            positive_theta(get("theta"))?;
            (
                5,
                get("theta"),
                1.0,
                EnvSequence::DyadicEx5,
                EnvSequence::DyadicEx5,
                LooselySubcritical,
                T5i,
            )
        }
        "Ex6i" | "Ex6ii" | "Ex6iii" | "Ex6iv" => {
            let sigma = get("sigma");
            let (a, wants_large, t) = match id {
                "Ex6i" => (EnvSequence::Harmonic, true, T6i),
                "Ex6ii" => (EnvSequence::Harmonic, false, T6ii),
                "Ex6iii" => (EnvSequence::Convergent, true, T6iii),
                _ => (EnvSequence::Convergent, false, T6iv),
            };
            if wants_large {
                require(sigma >= 1.0, "sigma must be at least 1")?;
            } else {
                require(sigma < 1.0, "sigma must be below 1")?;
            }
            (
                6,
                0.0,
                1.0,
                a,
                EnvSequence::ExpTailEx6 { sigma },
                InfiniteMean,
                t,
            )
        }
        "Ex7i" | "Ex7ii" => {
            let (theta, r, sigma) = (get("theta"), get("r"), get("sigma"));
            positive_theta(theta)?;
            require(r > 1.0, "r must exceed 1")?;
            require(
                r.powf(-theta) <= sigma && sigma <= (r - 1.0).powf(-theta),
                "sigma must lie in [r^-theta, (r-1)^-theta]",
            )?;
            let t = if id == "Ex7i" { T7i } else { T7ii };
            (
                7,
                theta,
                r,
                harmonic_or_convergent(id),
                EnvSequence::ProportionalC { sigma },
                Defective,
                t,
            )
        }
        "Ex8i" | "Ex8ii" => {
            let (theta, r, sigma) = (get("theta"), get("r"), get("sigma"));
            negative_theta(theta)?;
            require(r > 1.0, "r must exceed 1")?;
            let alpha = -1.0 / theta;
            let s_alpha = sigma.powf(alpha);
            require(
                sigma > 0.0 && r - 1.0 <= s_alpha && s_alpha <= r,
                "sigma^alpha must lie in [r-1, r]",
            )?;
            let t = if id == "Ex8i" { T8i } else { T8ii };
            (
                8,
                theta,
                r,
                harmonic_or_convergent(id),
                EnvSequence::ProportionalC { sigma },
                Defective,
                t,
            )
        }
        "Ex9i" | "Ex9ii" => {
            let (r, sigma) = (get("r"), get("sigma"));
            require(r > 1.0, "r must exceed 1")?;
            require((0.0..=1.0).contains(&sigma), "sigma must lie in [0, 1]")?;
            let t = if id == "Ex9i" { T9i } else { T9ii };
            (
                9,
                0.0,
                r,
                harmonic_or_convergent(id),
                EnvSequence::Constant { value: sigma },
                Defective,
                t,
            )
        }
        "Ex10i" | "Ex10ii" => {
            let (theta, sigma) = (get("theta"), get("sigma"));
            negative_theta(theta)?;
            require(sigma > 0.0 && sigma <= 1.0, "sigma must lie in (0, 1]")?;
            let t = if id == "Ex10i" { T10i } else { T10ii };
            (
                10,
                theta,
                1.0,
                harmonic_or_convergent(id),
                EnvSequence::ProportionalC { sigma },
                Defective,
                t,
            )
        }
        _ => unreachable!("ids come from the defaults table"),
    };
    let model = validate_model(theta, r, a, c, DEFAULT_CHECK_HORIZON)?;
    let mut theorem_id = theorem;
    let mut sub_label = match id {
        "Ex6i" => Some("i"),
        "Ex6ii" => Some("ii"),
        "Ex6iii" => Some("iii"),
        "Ex6iv" => Some("iv"),
        _ if regime == Defective => Some(if id.ends_with("ii") { "ii" } else { "i" }),
        _ => None,
    }
    .map(str::to_string);
    if regime == Defective
        && example != 10
        && model.proper_boundary_holds(model.checked_horizon(), PROPER_BOUNDARY_TOL)
    {
        theorem_id = corollary(theorem);
        sub_label = sub_label.map(|s| format!("corollary_{s}"));
    }
    Ok(Scenario {
        id: id.to_string(),
        example,
        model,
        free_params: p,
        expected_regime: regime,
        expected_sub_label: sub_label,
        theorem_id,
    })
}

fn corollary(t: TheoremId) -> TheoremId {
    use TheoremId::*;
    match t {
        T7i => T7Ci,
        T7ii => T7Cii,
        T8i => T8Ci,
        T8ii => T8Cii,
        T9i => T9Ci,
        T9ii => T9Cii,
        other => other,
    }
}

/// All scenarios at their default parameters, in example order.
pub fn registry() -> Vec<Scenario> {
    SCENARIO_IDS
        .iter()
        .map(|id| scenario(id, &BTreeMap::new()).expect("default parameters are admissible"))
        .collect()
}

/// Main theorems that at least one registry scenario exercises.
pub fn theorem_coverage(scenarios: &[Scenario]) -> BTreeMap<u8, Vec<String>> {
    let mut cover: BTreeMap<u8, Vec<String>> = (1..=10).map(|t| (t, Vec::new())).collect();
    for s in scenarios {
        cover
            .entry(s.theorem_id.number())
            .or_default()
            .push(s.id.clone());
    }
    cover
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::limits::{limit_constants, DEFAULT_LIMIT_TOL};
    use crate::classifier::classify;

    #[test]
    fn every_theorem_has_a_scenario() {
        let reg = registry();
        assert_eq!(reg.len(), 18);
        for (t, ids) in theorem_coverage(&reg) {
            assert!(!ids.is_empty(), "theorem {t} uncovered");
        }
        let examples: std::collections::BTreeSet<u8> = reg.iter().map(|s| s.example).collect();
        assert_eq!(examples.len(), 10);
    }

    #[test]
    fn overrides_are_checked() {
        let bad = |id: &str, k: &str, v: f64| {
            let o = BTreeMap::from([(k.to_string(), v)]);
            assert!(scenario(id, &o).is_err(), "{id} {k}={v}");
        };
        bad("Ex1", "sigma", 0.5);
        bad("Ex1", "theta", 1.5);
        bad("Ex1", "r", 2.0);
        bad("Ex7i", "sigma", 1.5);
        bad("Ex8i", "sigma", 0.5);
        bad("Ex9i", "sigma", 1.5);
        bad("Ex10i", "theta", 0.5);
        bad("Ex6ii", "sigma", 1.0);
        assert!(scenario("Ex11", &BTreeMap::new()).is_err());
    }

    #[test]
    fn boundary_sigma_selects_corollary() {
        let o = BTreeMap::from([("sigma".to_string(), 1.0)]);
        let s = scenario("Ex9i", &o).unwrap();
        assert_eq!(s.theorem_id, TheoremId::T9Ci);
        assert_eq!(s.expected_sub_label.as_deref(), Some("corollary_i"));
        assert_eq!(
            scenario("Ex9i", &BTreeMap::new()).unwrap().theorem_id,
            TheoremId::T9i
        );
    }

    #[test]
    fn registry_labels_match_classifier() {
        for s in registry() {
            let l = limit_constants(&s.model, CLASSIFY_HORIZON, DEFAULT_LIMIT_TOL).unwrap();
            let label = classify(&s.model, &l);
            assert_eq!(label.regime, s.expected_regime, "{}: {}", s.id, label.basis);
            assert_eq!(label.sub_label, s.expected_sub_label, "{}", s.id);
            if s.expected_regime != Regime::LooselySubcritical {
                assert_eq!(label.theorem, Some(s.theorem_id), "{}", s.id);
            }
        }
    }
}
