//! Plain-text null-model files.
//!
//! One `key = value` pair per line; `#` starts a comment. A Markov chain
//! lists its state values once and one `transition` line per current
//! state, in the order of `states`:
//!
//! ```text
//! model = markov
//! states = -1 0 1
//! transition = 0.5 0.3 0.2
//! transition = 0.2 0.6 0.2
//! transition = 0.1 0.4 0.5
//! ```
//!
//! A Gaussian AR(1) gives `mean`, `sd` and `phi`:
//!
//! ```text
//! model = ar1
//! mean = 0
//! sd = 1
//! phi = 0.9
//! ```

use std::path::Path;

use super::{Ar1Spec, MarkovChainSpec, NullModelSpec};
use crate::error::{Error, Result};
use crate::io::ParseError;

fn spec_error(line: usize, message: impl Into<String>) -> Error {
    ParseError::Spec {
        line,
        message: message.into(),
    }
    .into()
}

fn parse_numbers(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| spec_error(line, format!("{key}: '{tok}' is not a number")))
        })
        .collect()
}

fn parse_scalar(line: usize, key: &str, value: &str) -> Result<f64> {
    match parse_numbers(line, key, value)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(spec_error(line, format!("{key} takes exactly one number"))),
    }
}

/// Parses and validates a model spec. Structural problems are parse errors;
/// a non-ergodic chain surfaces as [`Error::NotErgodic`].
pub fn parse_model_spec(text: &str) -> Result<NullModelSpec> {
    let mut model = None;
    let mut states = None;
    let mut rows = Vec::new();
    let (mut mean, mut sd, mut phi) = (None, None, None);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| spec_error(line, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "model" => model = Some((line, value.to_ascii_lowercase())),
            "states" => states = Some(parse_numbers(line, key, value)?),
            "transition" => rows.push(parse_numbers(line, key, value)?),
            "mean" => mean = Some(parse_scalar(line, key, value)?),
            "sd" => sd = Some(parse_scalar(line, key, value)?),
            "phi" => phi = Some(parse_scalar(line, key, value)?),
            other => return Err(spec_error(line, format!("unknown key '{other}'"))),
        }
    }
    let (line, model) = model.ok_or_else(|| spec_error(0, "missing 'model' line"))?;
    match model.as_str() {
        "markov" => {
            let states = states.ok_or_else(|| spec_error(line, "markov model needs a 'states' line"))?;
            if rows.is_empty() {
                return Err(spec_error(line, "markov model needs 'transition' lines"));
            }
            Ok(NullModelSpec::Markov(MarkovChainSpec::new(states, rows)?))
        }
        "ar1" => {
            let need = |v: Option<f64>, k: &str| v.ok_or_else(|| spec_error(line, format!("ar1 model needs '{k}'")));
            Ok(NullModelSpec::Ar1(Ar1Spec::new(
                need(mean, "mean")?,
                need(sd, "sd")?,
                need(phi, "phi")?,
            )?))
        }
        other => Err(spec_error(line, format!("unknown model '{other}' (expected markov or ar1)"))),
    }
}

pub fn load_model_spec(path: impl AsRef<Path>) -> Result<NullModelSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_markov() {
        let text = "# three states\nmodel = markov\nstates = -1 0 1\ntransition = 0.5 0.3 0.2\n\
                    transition = 0.2 0.6 0.2 # middle\ntransition = 0.1 0.4 0.5\n";
        match parse_model_spec(text).unwrap() {
            NullModelSpec::Markov(spec) => {
                assert_eq!(spec.states(), &[-1.0, 0.0, 1.0]);
                assert_eq!(spec.transition()[1], vec![0.2, 0.6, 0.2]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_ar1() {
        let spec = parse_model_spec("model = ar1\nmean = 0\nsd = 1\nphi = 0.9\n").unwrap();
        assert_eq!(spec, NullModelSpec::Ar1(Ar1Spec::new(0.0, 1.0, 0.9).unwrap()));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_model_spec("model = markov\nstates = 0 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse(ParseError::Spec { line: 2, .. })), "{err}");
        let err = parse_model_spec("model = ar1\nmean = 0\nsd = 1\n").unwrap_err();
        assert!(err.to_string().contains("phi"));
        assert!(parse_model_spec("mode = ar1\n").is_err());
    }

    #[test]
    fn non_ergodic_chain_is_not_a_parse_error() {
        let err = parse_model_spec("model = markov\nstates = 0 1\ntransition = 1 0\ntransition = 0 1\n").unwrap_err();
        assert!(matches!(err, Error::NotErgodic(_)));
    }
}
