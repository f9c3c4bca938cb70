use tracing::warn;

use crate::backend::{ChatRequest, Exchange, LlmBackend};

const BOX_OPEN: &str = "\\boxed{";

/// Payload of the last `\boxed{...}` in `content`, matched by brace depth.
/// `None` if there is no box or the last one is never closed.
pub fn extract_answer(content: &str) -> Option<String> {
    let start = content.rfind(BOX_OPEN)? + BOX_OPEN.len();
    let mut depth = 1usize;
    for (i, c) in content[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(content[start..start + i].to_string());
                }
            }
            _ => {}
        }
    }
    None
}

/// Trims, collapses whitespace runs to one space and strips one layer of
/// surrounding `$`.
pub fn normalize(answer: &str) -> String {
    let collapsed = answer.split_whitespace().collect::<Vec<_>>().join(" ");
    match collapsed.strip_prefix('$').and_then(|s| s.strip_suffix('$')) {
        Some(inner) => inner.trim().to_string(),
        None => collapsed,
    }
}

pub const JUDGE_SYSTEM: &str = "You are a strict grader of final answers.";

/// Asks a model whether two answers are equivalent. Replies are parsed as
/// YES or NO; anything else counts as NO.
pub struct Judge<'a> {
    backend: &'a dyn LlmBackend,
    model: String,
}

impl<'a> Judge<'a> {
    pub fn new(backend: &'a dyn LlmBackend, model: &str) -> Self {
        Self {
            backend,
            model: model.to_string(),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn request(&self, predicted: &str, gold: &str) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            system_text: JUDGE_SYSTEM.into(),
            user_text: format!(
                "Decide whether the predicted answer is equivalent to the reference answer.\n\nPredicted answer: {predicted}\nReference answer: {gold}\n\nReply with exactly one word: YES or NO."
            ),
            temperature: 0.0,
            request_tag: "judge".into(),
        }
    }

    /// The verdict plus the exchange when the call succeeded.
    pub fn verdict(&self, predicted: &str, gold: &str) -> (bool, Option<Exchange>) {
        let request = self.request(predicted, gold);
        match self.backend.complete(&request) {
            Ok(response) => {
                let word = response
                    .content
                    .trim()
                    .trim_matches(|c: char| !c.is_ascii_alphabetic())
                    .to_ascii_uppercase();
                let equal = match word.as_str() {
                    "YES" => true,
                    "NO" => false,
                    _ => {
                        warn!(reply = %response.content, "judge reply is neither YES nor NO");
                        false
                    }
                };
                (equal, Some(Exchange { request, response }))
            }
            Err(e) => {
                warn!(error = %e, "judge call failed; scoring as incorrect");
                (false, None)
            }
        }
    }
}

/// Outcome of an equivalence check, with the judge exchange if one was
/// made.
#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub equal: bool,
    pub judged: bool,
    pub exchange: Option<Exchange>,
}

/// Exact match after [`normalize`], then one judge call on mismatch.
pub fn judge_equivalence(predicted: Option<&str>, gold: &str, judge: Option<&Judge<'_>>) -> Equivalence {
    let miss = Equivalence {
        equal: false,
        judged: false,
        exchange: None,
    };
    let Some(predicted) = predicted else {
        return miss;
    };
    let (p, g) = (normalize(predicted), normalize(gold));
    if p == g {
        return Equivalence { equal: true, ..miss };
    }
    match judge {
        Some(judge) => {
            let (equal, exchange) = judge.verdict(&p, &g);
            Equivalence {
                equal,
                judged: true,
                exchange,
            }
        }
        None => miss,
    }
}

pub fn check_equivalence(predicted: Option<&str>, gold: &str, judge: Option<&Judge<'_>>) -> bool {
    judge_equivalence(predicted, gold, judge).equal
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::backend::{Fallback, ScriptedBackend};

    #[test]
    fn extraction_examples() {
        assert_eq!(extract_answer("so \\boxed{42}.").as_deref(), Some("42"));
        assert_eq!(
            extract_answer("\\boxed{1} wait \\boxed{\\frac{1}{2}}").as_deref(),
            Some("\\frac{1}{2}")
        );
        assert_eq!(extract_answer("no box here"), None);
        assert_eq!(extract_answer("\\boxed{1} then \\boxed{2"), None);
        assert_eq!(extract_answer("\\boxed{}").as_deref(), Some(""));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("  42 "), "42");
        assert_eq!(normalize("x  +\n 1"), "x + 1");
        assert_eq!(normalize("$ 3 $"), "3");
        assert_eq!(normalize("$5"), "$5");
    }

    #[test]
    fn equivalence_without_judge() {
        assert!(check_equivalence(Some("42"), "42", None));
        assert!(check_equivalence(Some(" 42 "), "42", None));
        assert!(!check_equivalence(Some("1/2"), "0.5", None));
        assert!(!check_equivalence(None, "0.5", None));
    }

    #[test]
    fn judge_decides_mismatches() {
        let yes = ScriptedBackend::constant("YES");
        let judge = Judge::new(&yes, "gpt-5");
        let e = judge_equivalence(Some("1/2"), "0.5", Some(&judge));
        assert!(e.equal && e.judged);
        assert_eq!(e.exchange.unwrap().request.model, "gpt-5");

        let no = ScriptedBackend::constant(" no.");
        assert!(!check_equivalence(Some("1/2"), "0.6", Some(&Judge::new(&no, "m"))));

        let vague = ScriptedBackend::constant("Probably yes");
        assert!(!check_equivalence(Some("a"), "b", Some(&Judge::new(&vague, "m"))));

        let broken = ScriptedBackend::new(vec![], Fallback::Error);
        assert!(!check_equivalence(Some("a"), "b", Some(&Judge::new(&broken, "m"))));
    }

    #[test]
    fn judge_skipped_on_normalized_match() {
        let judge_backend = ScriptedBackend::constant("NO");
        let judge = Judge::new(&judge_backend, "m");
        assert!(check_equivalence(Some("$ 7 $"), "7", Some(&judge)));
        assert_eq!(judge_backend.calls(), 0);
    }

    proptest! {
        #[test]
        fn boxed_payload_round_trips(payload in "[a-w0-9 +^\\\\]{0,6}(\\{[a-z0-9]{0,3}\\}[a-z0-9]{0,3}){0,3}", prefix in "[a-z .]{0,10}") {
            let wrapped = format!("{prefix}\\boxed{{{payload}}}.");
            prop_assert_eq!(extract_answer(&wrapped), Some(payload));
        }

        #[test]
        fn equivalence_is_reflexive(x in "\\PC{1,20}") {
            prop_assume!(!x.trim().is_empty());
            prop_assert!(check_equivalence(Some(&x), &x, None));
        }
    }
}
