//! Marker-annotated surface strings.
//!
//! `"Bill Gates worked at Microsoft."` with head `(0,10)` and tail `(21,30)`
//! renders as `"<s> Bill Gates </s> worked at <o> Microsoft </o>."`.

use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, RelationInstance, SpanProblem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkerScheme {
    pub head_open: String,
    pub head_close: String,
    pub tail_open: String,
    pub tail_close: String,
    pub separator: String,
}

impl Default for MarkerScheme {
    fn default() -> Self {
        MarkerScheme {
            head_open: "<s>".into(),
            head_close: "</s>".into(),
            tail_open: "<o>".into(),
            tail_close: "</o>".into(),
            separator: " ".into(),
        }
    }
}

impl MarkerScheme {
    pub fn markers(&self) -> [&str; 4] {
        [&self.head_open, &self.head_close, &self.tail_open, &self.tail_close]
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.markers();
        if m.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidConfig("marker strings must be non-empty".into()));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if m[i] == m[j] {
                    return Err(Error::InvalidConfig(format!("duplicate marker {:?}", m[i])));
                }
            }
        }
        Ok(())
    }

    /// Total characters `render` adds to any sentence.
    pub fn overhead_chars(&self) -> usize {
        self.markers().iter().map(|m| m.chars().count()).sum::<usize>() + 4 * self.separator.chars().count()
    }
}

pub fn render(instance: &RelationInstance, scheme: &MarkerScheme) -> Result<String> {
    match instance.validate() {
        Ok(()) => {}
        Err(SpanProblem::Overlap) => return Err(Error::OverlappingSpans(instance.uid.clone())),
        Err(SpanProblem::OutOfBounds(reason)) => return Err(Error::SpanOutOfBounds { line: 0, reason }),
        Err(SpanProblem::Malformed(reason)) => return Err(Error::MalformedRecord { line: 0, reason }),
    }
    if let Some(m) = scheme.markers().iter().find(|m| instance.text.contains(**m)) {
        log::warn!("instance {} already contains marker {m:?}", instance.uid);
    }
    Ok(render_spans(&instance.text, instance.head, instance.tail, scheme))
}

/// Inserts markers around two non-overlapping, in-bounds spans.
pub(crate) fn render_spans(text: &str, head: EntitySpan, tail: EntitySpan, scheme: &MarkerScheme) -> String {
    let sep = scheme.separator.as_str();
    let mut spans = [
        (head, scheme.head_open.as_str(), scheme.head_close.as_str()),
        (tail, scheme.tail_open.as_str(), scheme.tail_close.as_str()),
    ];
    spans.sort_by_key(|s| s.0.start);

    let mut out = String::with_capacity(text.len() + scheme.overhead_chars() * 2);
    let mut next = 0;
    let mut chars = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    // Byte offset of every character boundary, fetched lazily in order.
    let mut boundaries = Vec::with_capacity(text.len() + 1);
    let mut byte_at = |c: usize| -> usize {
        while boundaries.len() <= c {
            boundaries.push(chars.next().expect("span validated against text length"));
        }
        boundaries[c]
    };
    for (span, open, close) in spans {
        let (s, e) = (byte_at(span.start), byte_at(span.end));
        out.push_str(&text[next..s]);
        out.push_str(open);
        out.push_str(sep);
        out.push_str(&text[s..e]);
        out.push_str(sep);
        out.push_str(close);
        next = e;
    }
    out.push_str(&text[next..]);
    out
}

/// Removes the marker/separator sequences `render` inserts.
///
/// Exact inverse of `render` as long as the sentence itself contains none of
/// the marker strings.
pub fn strip_markers(rendered: &str, scheme: &MarkerScheme) -> String {
    let sep = &scheme.separator;
    let mut out = rendered.to_owned();
    for open in [&scheme.head_open, &scheme.tail_open] {
        out = out.replacen(&format!("{open}{sep}"), "", 1);
    }
    for close in [&scheme.head_close, &scheme.tail_close] {
        out = out.replacen(&format!("{sep}{close}"), "", 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(text: &str, head: (usize, usize), tail: (usize, usize)) -> RelationInstance {
        RelationInstance {
            uid: "x".into(),
            text: text.into(),
            head: EntitySpan::new(head.0, head.1),
            tail: EntitySpan::new(tail.0, tail.1),
            relation: "R".into(),
        }
    }

    /// Independent oracle: splice by collecting chars and inserting from the right.
    fn splice_oracle(text: &str, head: (usize, usize), tail: (usize, usize)) -> String {
        let mut chars: Vec<String> = text.chars().map(String::from).collect();
        let mut inserts = vec![
            (head.1, " </s>".to_string()),
            (head.0, "<s> ".to_string()),
            (tail.1, " </o>".to_string()),
            (tail.0, "<o> ".to_string()),
        ];
        // Descending position; at equal positions a closing marker sits left of an opening one.
        inserts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.starts_with(' ').cmp(&b.1.starts_with(' '))));
        for (pos, s) in inserts {
            chars.insert(pos, s);
        }
        chars.concat()
    }

    #[test]
    fn marker_example() {
        let out =
            render(&inst("Bill Gates worked at Microsoft.", (0, 10), (21, 30)), &MarkerScheme::default()).unwrap();
        assert_eq!(out, "<s> Bill Gates </s> worked at <o> Microsoft </o>.");
    }

    #[test]
    fn tail_before_head() {
        let out = render(&inst("Ulm is where Einstein was born.", (13, 21), (0, 3)), &MarkerScheme::default()).unwrap();
        assert_eq!(out, "<o> Ulm </o> is where <s> Einstein </s> was born.");
    }

    #[test]
    fn adjacent_spans() {
        let out = render(&inst("AaaaBbbb", (0, 4), (4, 8)), &MarkerScheme::default()).unwrap();
        assert_eq!(out, "<s> Aaaa </s><o> Bbbb </o>");
        assert_eq!(out, splice_oracle("AaaaBbbb", (0, 4), (4, 8)));
    }

    #[test]
    fn overlap_is_an_error() {
        let err = render(&inst("AaaaBbbb", (0, 5), (4, 8)), &MarkerScheme::default()).unwrap_err();
        assert!(matches!(err, Error::OverlappingSpans(_)));
    }

    #[test]
    fn multibyte_offsets() {
        let out = render(&inst("Zoë aimait Noël", (0, 3), (11, 15)), &MarkerScheme::default()).unwrap();
        assert_eq!(out, "<s> Zoë </s> aimait <o> Noël </o>");
    }

    #[test]
    fn marker_in_text_still_renders() {
        let out = render(&inst("a <s> b", (0, 1), (6, 7)), &MarkerScheme::default()).unwrap();
        assert_eq!(out, "<s> a </s> <s> <o> b </o>");
    }

    #[test]
    fn custom_separator() {
        let scheme = MarkerScheme { separator: String::new(), ..Default::default() };
        let out = render(&inst("Bill Gates worked at Microsoft.", (0, 10), (21, 30)), &scheme).unwrap();
        assert_eq!(out, "<s>Bill Gates</s> worked at <o>Microsoft</o>.");
    }

    #[test]
    fn scheme_validation() {
        assert!(MarkerScheme::default().validate().is_ok());
        let dup = MarkerScheme { tail_open: "<s>".into(), ..Default::default() };
        assert!(dup.validate().is_err());
        let empty = MarkerScheme { head_close: String::new(), ..Default::default() };
        assert!(empty.validate().is_err());
    }

    fn arb_instance() -> impl Strategy<Value = (String, (usize, usize), (usize, usize))> {
        ("[a-zA-Zéü .,]{2,40}", any::<[u16; 4]>()).prop_filter_map("needs two disjoint spans", |(text, r)| {
            let n = text.chars().count();
            let mut cuts: Vec<usize> = r.iter().map(|&x| x as usize % (n + 1)).collect();
            cuts.sort();
            let (a, b, c, d) = (cuts[0], cuts[1], cuts[2], cuts[3]);
            if a == b || c == d {
                return None;
            }
            if r[0] % 2 == 0 {
                Some((text, (a, b), (c, d)))
            } else {
                Some((text, (c, d), (a, b)))
            }
        })
    }

    proptest! {
        #[test]
        fn strip_round_trip_and_length((text, head, tail) in arb_instance()) {
            let scheme = MarkerScheme::default();
            let out = render(&inst(&text, head, tail), &scheme).unwrap();
            prop_assert_eq!(strip_markers(&out, &scheme), text.clone());
            prop_assert_eq!(out.chars().count(), text.chars().count() + scheme.overhead_chars());
            prop_assert_eq!(out, splice_oracle(&text, head, tail));
        }
    }
}
