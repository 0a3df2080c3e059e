//! Name registries: spec-file strings → policy constructors and instance
//! families.
//!
//! Policies are built per cell from the (possibly perturbed) prediction
//! payload; `time_share` and `robustify` nest other policy specs, so
//! construction and the needs computation both recurse. Everything here is
//! validated eagerly by [`crate::spec::ExperimentSpec::validate`] so a typo
//! fails before any simulation starts.

use std::collections::BTreeMap;

use precsched::adversarial::{
    gen_average_lb, gen_hidden_chain, gen_intree, gen_outtree_static, gen_static_order_lb,
    FamilySpec,
};
use precsched::policy::follow::ActionMode;
use precsched::policy::{
    equal_share, follow_action, follow_input, order_adaptive, order_static, robustify,
    time_share, wdeq_chains, wrr_adaptive, wrr_chains, OrderVariant, Policy,
};
use precsched::prediction::Payload;
use precsched::rational::{rat, rat_serde, Rat};
use serde::Deserialize;

use crate::error::{data_err, CliError};
use crate::spec::{PayloadKind, PolicySpec};

/// Registered policy names, in registry order.
pub const POLICY_NAMES: [&str; 10] = [
    "equal_share",
    "wrr_chains",
    "wdeq_chains",
    "wrr_adaptive",
    "order_adaptive",
    "order_static",
    "follow_action",
    "follow_input",
    "time_share",
    "robustify",
];

/// Registered family names, in registry order.
pub const FAMILY_NAMES: [&str; 5] =
    ["hidden_chain", "outtree_static", "intree", "average_lb", "static_order_lb"];

fn parse_params<T: Default + for<'de> Deserialize<'de>>(
    name: &str,
    params: &serde_json::Value,
) -> Result<T, CliError> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone())
        .map_err(|e| CliError::InvalidSpec(format!("bad params for policy '{name}': {e}")))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct VariantParams {
    variant: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct ModeParams {
    mode: Option<String>,
}

fn default_lambda() -> Rat {
    rat(1, 2)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeShareParams {
    a: PolicySpec,
    b: PolicySpec,
    #[serde(default = "default_lambda", with = "rat_serde")]
    lambda: Rat,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RobustifyParams {
    inner: PolicySpec,
}

/// Which prediction payload shapes a policy spec (recursively) consumes.
pub fn policy_needs(spec: &PolicySpec) -> Result<Vec<PayloadKind>, CliError> {
    match spec.name.as_str() {
        "equal_share" => Ok(vec![]),
        "wrr_chains" | "wdeq_chains" | "wrr_adaptive" => Ok(vec![PayloadKind::Weights]),
        "order_adaptive" | "order_static" | "follow_action" => Ok(vec![PayloadKind::Order]),
        "follow_input" => Ok(vec![PayloadKind::Instance]),
        "time_share" => {
            let p: TimeShareParams = serde_json::from_value(spec.params.clone())
                .map_err(|e| CliError::InvalidSpec(format!("bad params for time_share: {e}")))?;
            let mut needs = policy_needs(&p.a)?;
            needs.extend(policy_needs(&p.b)?);
            needs.dedup();
            Ok(needs)
        }
        "robustify" => {
            let p: RobustifyParams = serde_json::from_value(spec.params.clone())
                .map_err(|e| CliError::InvalidSpec(format!("bad params for robustify: {e}")))?;
            policy_needs(&p.inner)
        }
        other => Err(CliError::UnknownPolicy(other.into())),
    }
}

fn want_weights<'a>(name: &str, payload: Option<&'a Payload>) -> Result<&'a BTreeMap<usize, Rat>, CliError> {
    match payload {
        Some(Payload::Weights(table)) => Ok(table),
        _ => Err(CliError::InvalidSpec(format!("policy '{name}' needs a weights payload"))),
    }
}

fn want_order<'a>(name: &str, payload: Option<&'a Payload>) -> Result<&'a [usize], CliError> {
    match payload {
        Some(Payload::Order(sigma)) => Ok(sigma),
        _ => Err(CliError::InvalidSpec(format!("policy '{name}' needs an order payload"))),
    }
}

/// Builds a policy from its spec and the cell's prediction payload.
pub fn build_policy(
    spec: &PolicySpec,
    payload: Option<&Payload>,
) -> Result<Box<dyn Policy>, CliError> {
    let name = spec.name.as_str();
    match name {
        "equal_share" => Ok(Box::new(equal_share())),
        "wrr_chains" => Ok(Box::new(wrr_chains(want_weights(name, payload)?.clone()))),
        "wdeq_chains" => Ok(Box::new(wdeq_chains(want_weights(name, payload)?.clone()))),
        "wrr_adaptive" => Ok(Box::new(wrr_adaptive(want_weights(name, payload)?.clone()))),
        "order_adaptive" => Ok(Box::new(order_adaptive(want_order(name, payload)?))),
        "order_static" => {
            let p: VariantParams = parse_params(name, &spec.params)?;
            let variant = match p.variant.as_deref() {
                None | Some("strict") => OrderVariant::Strict,
                Some("work_conserving") => OrderVariant::WorkConserving,
                Some(other) => {
                    return Err(CliError::InvalidSpec(format!(
                        "unknown order_static variant '{other}'"
                    )));
                }
            };
            Ok(Box::new(order_static(want_order(name, payload)?, variant)))
        }
        "follow_action" => {
            let p: ModeParams = parse_params(name, &spec.params)?;
            let mode = match p.mode.as_deref() {
                None | Some("adaptive") => ActionMode::Adaptive,
                Some("static") => ActionMode::Static,
                Some(other) => {
                    return Err(CliError::InvalidSpec(format!(
                        "unknown follow_action mode '{other}'"
                    )));
                }
            };
            Ok(Box::new(follow_action(want_order(name, payload)?, mode)))
        }
        "follow_input" => match payload {
            Some(Payload::Instance(predicted)) => {
                Ok(Box::new(follow_input(predicted).map_err(data_err)?))
            }
            _ => Err(CliError::InvalidSpec(
                "policy 'follow_input' needs an instance payload".into(),
            )),
        },
        "time_share" => {
            let p: TimeShareParams = serde_json::from_value(spec.params.clone())
                .map_err(|e| CliError::InvalidSpec(format!("bad params for time_share: {e}")))?;
            if p.lambda <= Rat::from_integer(0.into()) || p.lambda > Rat::from_integer(1.into()) {
                return Err(CliError::InvalidSpec("time_share lambda must lie in (0, 1]".into()));
            }
            let a = build_policy(&p.a, payload)?;
            let b = build_policy(&p.b, payload)?;
            Ok(Box::new(time_share(a, b, p.lambda)))
        }
        "robustify" => {
            let p: RobustifyParams = serde_json::from_value(spec.params.clone())
                .map_err(|e| CliError::InvalidSpec(format!("bad params for robustify: {e}")))?;
            Ok(Box::new(robustify(build_policy(&p.inner, payload)?)))
        }
        other => Err(CliError::UnknownPolicy(other.into())),
    }
}

fn family_param(
    family: &str,
    params: &BTreeMap<String, i64>,
    key: &str,
) -> Result<usize, CliError> {
    let value = *params.get(key).ok_or_else(|| {
        CliError::InvalidSpec(format!("family '{family}' requires parameter '{key}'"))
    })?;
    usize::try_from(value).map_err(|_| {
        CliError::InvalidSpec(format!("family '{family}' parameter '{key}' must be nonnegative"))
    })
}

fn family_keys(family: &str) -> Result<&'static [&'static str], CliError> {
    match family {
        "hidden_chain" | "outtree_static" => Ok(&["n", "h"]),
        "intree" => Ok(&["k", "l"]),
        "average_lb" => Ok(&["s"]),
        "static_order_lb" => Ok(&["omega", "d"]),
        other => Err(CliError::UnknownFamily(other.into())),
    }
}

/// Checks a family reference without generating the instance.
pub fn check_family(family: &str, params: &BTreeMap<String, i64>) -> Result<(), CliError> {
    let keys = family_keys(family)?;
    for key in params.keys() {
        if !keys.contains(&key.as_str()) {
            return Err(CliError::InvalidSpec(format!(
                "family '{family}' does not take parameter '{key}'"
            )));
        }
    }
    for key in keys {
        if !params.contains_key(*key) {
            return Err(CliError::InvalidSpec(format!(
                "family '{family}' requires parameter '{key}'"
            )));
        }
    }
    Ok(())
}

/// Builds a family instance with its reference sidecar.
pub fn build_family(
    family: &str,
    params: &BTreeMap<String, i64>,
) -> Result<FamilySpec, CliError> {
    check_family(family, params)?;
    let get = |key: &str| family_param(family, params, key);
    let spec = match family {
        "hidden_chain" => gen_hidden_chain(get("n")?, get("h")?)?,
        "outtree_static" => gen_outtree_static(get("n")?, get("h")?)?,
        "intree" => gen_intree(get("k")?, get("l")?)?,
        "average_lb" => gen_average_lb(get("s")?)?,
        "static_order_lb" => gen_static_order_lb(get("omega")?, get("d")?)?,
        other => return Err(CliError::UnknownFamily(other.into())),
    };
    Ok(spec)
}

// ───────────────────────── tests ─────────────────────────
